//! `schwinger compare`: checks a finished sweep against the step model.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::PathBuf;

use serde::Serialize;

use schwinger::io;
use schwinger::observables::{energy_spectrum, relative_l2, MomentumSpectrum};
use schwinger::scattering::{self, StepModel};
use schwinger::sweep::{self, CaseAggregate};
use schwinger::units::{parse_config, Case};

use crate::Failure;

#[derive(Debug, Serialize)]
pub struct CaseRow {
    pub case: Case,
    pub numeric_rate: f64,
    pub oracle_rate: f64,
    pub deviation: f64,
    pub most_probable_p_par: f64,
    /// Energies holding 1% and 99% of the most probable channel's production.
    pub window_numeric: Option<(f64, f64)>,
    pub window_oracle: Option<(f64, f64)>,
}

#[derive(Debug, Serialize)]
pub struct RatioRow {
    pub name: String,
    pub numeric: f64,
    pub oracle: f64,
    pub deviation: f64,
}

#[derive(Debug, Serialize)]
pub struct ComparisonReport {
    pub run: PathBuf,
    pub tolerance: f64,
    pub cases: Vec<CaseRow>,
    pub ratios: Vec<RatioRow>,
    /// Relative L2 of (π/2)·dρ/dt against T/4, Case I at p_∥ = 0.
    pub hund_l2: Option<f64>,
    pub pass: bool,
}

impl ComparisonReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "comparison of {} (tolerance {:.1}%)", self.run.display(), 100.0 * self.tolerance);
        for c in &self.cases {
            let _ = writeln!(
                s,
                "  Case {:<3} Γ = {:.5e}  model {:.5e}  deviation {:>6.2}%  most probable p_∥ = {:.3}",
                c.case.as_str(),
                c.numeric_rate,
                c.oracle_rate,
                100.0 * c.deviation,
                c.most_probable_p_par
            );
            if let (Some(n), Some(o)) = (c.window_numeric, c.window_oracle) {
                let _ = writeln!(s, "           window 1–99%: [{:.4}, {:.4}]  model [{:.4}, {:.4}]", n.0, n.1, o.0, o.1);
            }
        }
        for r in &self.ratios {
            let _ = writeln!(s, "  {:<8} {:.4}  model {:.4}  deviation {:>6.2}%", r.name, r.numeric, r.oracle, 100.0 * r.deviation);
        }
        if let Some(h) = self.hund_l2 {
            let _ = writeln!(s, "  Case I p_∥ = 0 spectrum vs T/4: relative L2 {:.2}%", 100.0 * h);
        }
        let _ = writeln!(s, "result: {}", if self.pass { "PASS" } else { "FAIL" });
        s
    }
}

/// Energies at which the cumulative production of one channel crosses 1%
/// and 99%; negative (polarisation) contributions are ignored.
fn window_from_rate(rate: &MomentumSpectrum) -> Option<(f64, f64)> {
    let e = energy_spectrum(rate);
    let mut pts: Vec<(f64, f64)> =
        e.left.energy.iter().zip(&e.left.occupation).chain(e.right.energy.iter().zip(&e.right.occupation)).map(|(&x, &o)| (x, o.max(0.0))).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = pts.iter().map(|p| p.1).sum();
    if !(total > 0.0) {
        return None;
    }
    let mut acc = 0.0;
    let (mut lo, mut hi) = (None, None);
    for (x, o) in pts {
        acc += o;
        if lo.is_none() && acc >= 0.01 * total {
            lo = Some(x);
        }
        if hi.is_none() && acc >= 0.99 * total {
            hi = Some(x);
        }
    }
    Some((lo?, hi?))
}

fn rate_row(c: &CaseAggregate, row: usize) -> Option<MomentumSpectrum> {
    let (t0, t1) = c.fit_window;
    let a = c.momentum_spectrum(row, t0)?;
    let b = c.momentum_spectrum(row, t1)?;
    MomentumSpectrum::rate_between(&a, &b).ok()
}

fn hund_l2(c: &CaseAggregate, m: &StepModel) -> Option<f64> {
    let row = c.p_par.iter().position(|p| p.abs() < 1e-12)?;
    let rate = energy_spectrum(&rate_row(c, row)?);
    let (a, b) = scattering::klein_window(Case::I, 0.0, m)?;
    let (lo, hi) = (a + 0.1 * (b - a), b - 0.1 * (b - a));
    let mut num = Vec::new();
    let mut reference = Vec::new();
    for (branch, leaves) in [(&rate.left, true), (&rate.right, false)] {
        for (&e, &d) in branch.energy.iter().zip(&branch.density) {
            if (lo..=hi).contains(&e) {
                num.push(d * PI / 2.0);
                reference.push(if leaves { scattering::transmission(Case::I, e, 0.0, m) / 4.0 } else { 0.0 });
            }
        }
    }
    (!num.is_empty()).then(|| relative_l2(&num, &reference))
}

pub fn build(run: PathBuf, oracle: &str, tol: f64) -> Result<ComparisonReport, Failure> {
    let text = std::fs::read_to_string(run.join(sweep::CONFIG)).map_err(|e| Failure::Usage(format!("{}: {e}", run.display())))?;
    let cfg = parse_config(&text)?;
    let model = match oracle {
        "auto" => StepModel::from(&cfg.fields),
        "reference" => StepModel::reference(),
        other => return Err(Failure::Usage(format!("unknown oracle `{other}` (auto or reference)"))),
    };
    let agg = sweep::load(&run)?;
    let mut cases = Vec::new();
    for c in &agg.cases {
        let oracle_rate = scattering::total_rate(c.case, &c.p_par, agg.weight, &model)?;
        let numeric_rate = c.total_rate(agg.weight);
        let row = c.rate.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map_or(0, |(i, _)| i);
        cases.push(CaseRow {
            case: c.case,
            numeric_rate,
            oracle_rate,
            deviation: (numeric_rate / oracle_rate - 1.0).abs(),
            most_probable_p_par: c.p_par[row],
            window_numeric: rate_row(c, row).as_ref().and_then(window_from_rate),
            window_oracle: scattering::klein_window(c.case, c.p_par[row], &model),
        });
    }
    let mut ratios = Vec::new();
    for (a, b) in [(Case::I, Case::II), (Case::II, Case::III), (Case::I, Case::III)] {
        let (Some(x), Some(y)) = (cases.iter().find(|c| c.case == a), cases.iter().find(|c| c.case == b)) else { continue };
        let numeric = x.numeric_rate / y.numeric_rate;
        let oracle = x.oracle_rate / y.oracle_rate;
        ratios.push(RatioRow { name: format!("{a}/{b}"), numeric, oracle, deviation: (numeric / oracle - 1.0).abs() });
    }
    let hund = agg.case(Case::I).and_then(|c| hund_l2(c, &model));
    let pass = cases.iter().all(|c| c.deviation <= tol) && ratios.iter().all(|r| r.deviation <= tol);
    Ok(ComparisonReport { run, tolerance: tol, cases, ratios, hund_l2: hund, pass })
}

pub fn command(run: PathBuf, oracle: &str, tol: f64, json: Option<PathBuf>) -> Result<(), Failure> {
    let report = build(run, oracle, tol)?;
    print!("{}", report.to_text());
    if let Some(path) = json {
        io::write_json(&path, &report)?;
    }
    if report.pass {
        Ok(())
    } else {
        Err(Failure::Tolerance(format!("deviation above {:.1}%", 100.0 * tol)))
    }
}
