use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use schwinger::io::{self, CsvTable, Tagged};
use schwinger::observables::{energy_spectrum, ChannelEngine};
use schwinger::scattering::{self, StepModel};
use schwinger::sweep::{self, RunOptions};
use schwinger::units::{parse_config, Case, Channel, PhysicalConstants, SimConfig};
use schwinger::Error;

mod compare;

#[derive(Parser)]
#[command(name = "schwinger", version, about = "Pair creation at scalar and vector potential steps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Curves of the analytic step model: T(E), Klein windows, Hund spectra, rates.
    Oracle(OracleArgs),
    /// Simulate one channel, or the whole sweep when no --p-par is given.
    Run(RunArgs),
    /// Plan and run a channel sweep (resumes an interrupted one).
    Sweep(SweepArgs),
    /// Momentum, energy and position spectra at chosen times.
    Spectra(SpectraArgs),
    /// Compare a finished sweep against the analytic model.
    Compare(CompareArgs),
    /// Long-format CSV of sweep results for external plotting.
    Plotdata(PlotArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Curve {
    /// transmission T(E) at fixed p_∥
    Transmission,
    /// Hund spectrum ρ(E, t) at fixed p_∥
    Hund,
    /// Klein-window edges as functions of p_∥
    Window,
    /// per-channel rate γ(p_∥)
    Rate,
}

#[derive(Args)]
struct Units {
    /// Report energies/momenta in atomic units instead of multiples of c², c.
    #[arg(long)]
    au: bool,
}

impl Units {
    fn energy(&self, e: f64) -> f64 {
        if self.au {
            e * PhysicalConstants::atomic().energy_unit()
        } else {
            e
        }
    }
    fn momentum(&self, p: f64) -> f64 {
        if self.au {
            p * PhysicalConstants::atomic().momentum_unit()
        } else {
            p
        }
    }
    fn energy_col(&self) -> &'static str {
        if self.au { "E_au" } else { "E_over_c2" }
    }
    fn momentum_col(&self, base: &'static str) -> String {
        if self.au { format!("{base}_au") } else { format!("{base}_over_c") }
    }
    fn tag(&self) -> &'static str {
        if self.au { "a.u." } else { "natural" }
    }
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, value_enum, default_value = "transmission")]
    curve: Curve,
    #[arg(long, default_value = "I")]
    case: Case,
    #[arg(long = "p-par", default_value_t = 0.0, allow_negative_numbers = true)]
    p_par: f64,
    #[arg(long = "e-min", default_value_t = 1.0)]
    e_min: f64,
    #[arg(long = "e-max", default_value_t = 1.5)]
    e_max: f64,
    #[arg(long = "p-min", default_value_t = -1.5, allow_negative_numbers = true)]
    p_min: f64,
    #[arg(long = "p-max", default_value_t = 1.5, allow_negative_numbers = true)]
    p_max: f64,
    /// Number of samples.
    #[arg(long, default_value_t = 200)]
    n: usize,
    /// Time for the Hund spectrum.
    #[arg(long, default_value_t = 50.0)]
    t: f64,
    /// Scalar step eφ₀ (multiples of c²).
    #[arg(long = "e-phi0", default_value_t = 2.5)]
    e_phi0: f64,
    /// Vector step eA₀/c (multiples of c).
    #[arg(long = "e-a0", default_value_t = 0.6)]
    e_a0: f64,
    /// Step separation (Compton wavelengths).
    #[arg(long = "sep", default_value_t = 24.5)]
    l: f64,
    /// Output file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    units: Units,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: $SCHWINGER_OUT/<config stem>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Simulate only this channel.
    #[arg(long = "p-par", allow_negative_numbers = true)]
    p_par: Option<f64>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Stop after this many channels.
    #[arg(long)]
    limit: Option<usize>,
    /// Recompute finished channels.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct SpectraArgs {
    /// Recompute from a configuration file ...
    #[arg(long, conflicts_with = "run", required_unless_present = "run")]
    config: Option<PathBuf>,
    /// ... or read a finished sweep directory.
    #[arg(long)]
    run: Option<PathBuf>,
    /// Channel; with --run the default is the most probable one, otherwise 0.
    #[arg(long = "p-par", allow_negative_numbers = true)]
    p_par: Option<f64>,
    /// Case to read from a sweep directory.
    #[arg(long)]
    case: Option<Case>,
    /// Times (comma separated).
    #[arg(long, value_delimiter = ',', default_value = "50")]
    t: Vec<f64>,
    /// Width of the Gaussian time average (0 = instantaneous).
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    units: Units,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    run: PathBuf,
    /// Reference model; `auto` takes it from the run's configuration.
    #[arg(long, default_value = "auto")]
    oracle: String,
    /// Largest tolerated relative deviation.
    #[arg(long, default_value_t = 0.10)]
    tol: f64,
    /// Also write the report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlotWhat {
    /// electron momentum distribution at a snapshot
    Emd,
    /// creation-rate map over the fit window
    RateMap,
    /// γ(p_∥)
    Rate,
    /// N(t) summed over channels
    Ntotal,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long, value_enum)]
    what: PlotWhat,
    /// Snapshot time for `emd` (default: last).
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    units: Units,
}

/// Failure of a command, with the exit status it maps to.
enum Failure {
    Tolerance(String),
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } | Error::Io { .. } | Error::Format { .. } => Failure::Usage(e.to_string()),
            Error::Numerical { .. } | Error::Contract(_) => Failure::Runtime(e.to_string()),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Oracle(a) => oracle(a),
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep_cmd(a),
        Command::Spectra(a) => spectra(a),
        Command::Compare(a) => compare::command(a.run, &a.oracle, a.tol, a.json),
        Command::Plotdata(a) => plotdata(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Tolerance(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn emit(table: &CsvTable, out: Option<&Path>) -> CmdResult {
    match out {
        Some(p) => io::write_csv(p, table)?,
        None => print!("{}", table.to_text()),
    }
    Ok(())
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

fn oracle(a: OracleArgs) -> CmdResult {
    if a.n == 0 {
        return Err(Failure::Usage("--n must be positive".into()));
    }
    let m = StepModel { e_phi0: a.e_phi0, delta: if a.case == Case::I { 0.0 } else { a.e_a0 }, l: a.l };
    let u = &a.units;
    let table = match a.curve {
        Curve::Transmission | Curve::Hund => {
            let es = linspace(a.e_min, a.e_max, a.n);
            let (name, values) = match a.curve {
                Curve::Transmission => ("T", es.iter().map(|&e| scattering::transmission(a.case, e, a.p_par, &m)).collect()),
                _ => ("rho", scattering::hund_spectrum(a.case, a.p_par, a.t, &es, &m)),
            };
            let mut t = CsvTable::new(&[u.energy_col(), name])
                .meta("case", a.case)
                .meta("p_par", u.momentum(a.p_par))
                .meta("units", u.tag());
            if matches!(a.curve, Curve::Hund) {
                t = t.meta("t", a.t);
            }
            for (e, v) in es.iter().zip::<Vec<f64>>(values) {
                t.push(vec![u.energy(*e), v]);
            }
            t
        }
        Curve::Window => {
            let pcol = u.momentum_col("p_par");
            let lo = format!("{}_lo", u.energy_col());
            let hi = format!("{}_hi", u.energy_col());
            let mut t = CsvTable::new(&[&pcol, &lo, &hi]).meta("case", a.case).meta("units", u.tag());
            for p in linspace(a.p_min, a.p_max, a.n) {
                let (l, h) = scattering::klein_window(a.case, p, &m).unwrap_or((f64::NAN, f64::NAN));
                t.push(vec![u.momentum(p), u.energy(l), u.energy(h)]);
            }
            t
        }
        Curve::Rate => {
            let pcol = u.momentum_col("p_par");
            let mut t = CsvTable::new(&[&pcol, "gamma"]).meta("case", a.case).meta("units", "natural rate per channel and spin");
            for p in linspace(a.p_min, a.p_max, a.n) {
                t.push(vec![u.momentum(p), scattering::channel_rate(a.case, p, &m)?]);
            }
            t
        }
    };
    emit(&table, a.out.as_deref())
}

fn load_config(path: &Path) -> Result<SimConfig, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    Ok(parse_config(&text)?)
}

fn default_out(config: &Path) -> PathBuf {
    let root = std::env::var_os("SCHWINGER_OUT").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out"));
    root.join(config.file_stem().unwrap_or_default())
}

fn run(a: RunArgs) -> CmdResult {
    let cfg = load_config(&a.config)?;
    let out = a.out.clone().unwrap_or_else(|| default_out(&a.config));
    match a.p_par {
        None => execute_sweep(&cfg, &out, &RunOptions::workers(a.workers)),
        Some(p) => single_channel(&cfg, p, &out),
    }
}

fn single_channel(cfg: &SimConfig, p_par: f64, out: &Path) -> CmdResult {
    cfg.validate()?;
    std::fs::create_dir_all(out).map_err(|e| Failure::from(Error::Io { path: out.into(), source: e }))?;
    let case = cfg.fields.case;
    let mut engine = ChannelEngine::new(cfg, Channel::new(p_par))?;
    let r = &cfg.run;
    let steps = (r.t_max / r.sample_dt).round() as usize;
    let times: Vec<f64> = (0..=steps).map(|i| i as f64 * r.sample_dt).collect();
    let series = engine.particle_number_series(&times);
    let fit = if r.smoothing > 0.0 {
        schwinger::observables::fit_smoothed_rate(&series, r.fit_window, r.smoothing)?
    } else {
        schwinger::observables::fit_rate(&series, r.fit_window)?
    };
    let mut n = CsvTable::new(&["t", "N"]).meta("case", case).meta("p_par_over_c", p_par).meta("units", "natural");
    for (t, v) in series.times.iter().zip(&series.values) {
        n.push(vec![*t, *v]);
    }
    io::write_csv(&out.join("particle_number.csv"), &n)?;
    for &t in &r.snapshots {
        let m = engine.filtered_momentum_spectrum(t, r.smoothing);
        write_spectra(&out.join(format!("t{t}")), case, &m, &Units { au: false })?;
    }
    let model = StepModel::from(&cfg.fields);
    let scalars = serde_json::json!({
        "case": case,
        "p_par": Tagged::natural(p_par),
        "rate": Tagged::natural(fit.rate),
        "rate_error": Tagged::natural(fit.rate_error),
        "fit_window": r.fit_window,
        "oracle_rate": Tagged::natural(scattering::channel_rate(case, p_par, &model)?),
    });
    io::write_json(&out.join("scalars.json"), &scalars)?;
    println!("channel p_par = {p_par}: rate {:.6e} ± {:.1e} → {}", fit.rate, fit.rate_error, out.display());
    Ok(())
}

fn write_spectra(prefix: &Path, case: Case, m: &schwinger::observables::MomentumSpectrum, u: &Units) -> CmdResult {
    let stem = prefix.file_name().unwrap_or_default().to_string_lossy().into_owned();
    let dir = prefix.parent().unwrap_or(Path::new("."));
    let pcol = u.momentum_col("p_perp");
    let mut mt = CsvTable::new(&[&pcol, "occupation"])
        .meta("case", case)
        .meta("p_par", u.momentum(m.p_par))
        .meta("t", m.t)
        .meta("dk", m.dk)
        .meta("units", u.tag());
    for (p, o) in m.p_perp.iter().zip(&m.occupation) {
        mt.push(vec![u.momentum(*p), *o]);
    }
    io::write_csv(&dir.join(format!("{stem}_momentum.csv")), &mt)?;
    let e = energy_spectrum(m);
    let mut et = CsvTable::new(&[u.energy_col(), "rho", "branch"])
        .meta("case", case)
        .meta("p_par", u.momentum(m.p_par))
        .meta("t", m.t)
        .meta("branch", "-1 = p_perp < 0, +1 = p_perp >= 0")
        .meta("units", u.tag());
    for (b, sign) in [(&e.left, -1.0), (&e.right, 1.0)] {
        for (x, d) in b.energy.iter().zip(&b.density) {
            // ρ is per unit energy, so it scales inversely with the unit
            et.push(vec![u.energy(*x), d / u.energy(1.0), sign]);
        }
    }
    io::write_csv(&dir.join(format!("{stem}_energy.csv")), &et)?;
    Ok(())
}

fn execute_sweep(cfg: &SimConfig, out: &Path, opts: &RunOptions) -> CmdResult {
    let mut plan = sweep::plan_sweep(cfg, out)?;
    let pending = plan.pending().len();
    eprintln!("{} jobs, {} pending → {}", plan.jobs.len(), pending, out.display());
    let outcome = sweep::run_jobs(&mut plan, opts)?;
    for (id, msg) in &outcome.failed {
        eprintln!("job {id} failed: {msg}");
    }
    match &outcome.aggregate {
        Some(agg) => {
            for c in &agg.cases {
                println!("Case {}: total rate {:.6e} (natural units, weight {})", c.case, c.total_rate(agg.weight), agg.weight);
            }
            Ok(())
        }
        None if outcome.failed.is_empty() => {
            println!("{} of {} jobs still pending; rerun to resume", plan.pending().len(), plan.jobs.len());
            Ok(())
        }
        None => Err(Failure::Runtime(format!("{} channel(s) failed; see the ledger", outcome.failed.len()))),
    }
}

fn sweep_cmd(a: SweepArgs) -> CmdResult {
    let cfg = load_config(&a.config)?;
    let out = a.out.clone().unwrap_or_else(|| default_out(&a.config));
    execute_sweep(&cfg, &out, &RunOptions { workers: a.workers, limit: a.limit, force: a.force })
}

fn spectra(a: SpectraArgs) -> CmdResult {
    std::fs::create_dir_all(&a.out).map_err(|e| Failure::from(Error::Io { path: a.out.clone(), source: e }))?;
    if let Some(run) = &a.run {
        let agg = sweep::load(run)?;
        let case = a.case.or_else(|| agg.cases.first().map(|c| c.case)).ok_or_else(|| Failure::Usage("empty sweep".into()))?;
        let c = agg.case(case).ok_or_else(|| Failure::Usage(format!("sweep has no Case {case}")))?;
        // the most probable channel unless one was asked for
        let row = match a.p_par {
            Some(p) => nearest(&c.p_par, p),
            None => c.rate.iter().enumerate().max_by(|x, y| x.1.total_cmp(y.1)).map_or(0, |(i, _)| i),
        };
        for &t in &a.t {
            let m = c
                .momentum_spectrum(row, t)
                .ok_or_else(|| Failure::Usage(format!("no snapshot at t = {t}; stored: {:?}", c.snapshots)))?;
            write_spectra(&a.out.join(format!("case{case}_p{}_t{t}", c.p_par[row])), case, &m, &a.units)?;
        }
        return Ok(());
    }
    let cfg = load_config(a.config.as_ref().expect("clap enforces one source"))?;
    cfg.validate()?;
    let case = cfg.fields.case;
    let p_par = a.p_par.unwrap_or(0.0);
    let mut engine = ChannelEngine::new(&cfg, Channel::new(p_par))?;
    for &t in &a.t {
        let m = engine.filtered_momentum_spectrum(t, a.sigma);
        write_spectra(&a.out.join(format!("case{case}_p{p_par}_t{t}")), case, &m, &a.units)?;
        let d = engine.spatial_density(t);
        let mut dt = CsvTable::new(&["x_over_lc", "electron", "positron"]).meta("case", case).meta("t", t).meta("units", "natural");
        for i in 0..d.x.len() {
            dt.push(vec![d.x[i], d.electron[i], d.positron[i]]);
        }
        io::write_csv(&a.out.join(format!("case{case}_p{p_par}_t{t}_density.csv")), &dt)?;
    }
    Ok(())
}

fn nearest(grid: &[f64], p: f64) -> usize {
    (0..grid.len()).min_by(|&i, &j| (grid[i] - p).abs().total_cmp(&(grid[j] - p).abs())).unwrap_or(0)
}

fn plotdata(a: PlotArgs) -> CmdResult {
    let agg = sweep::load(&a.run)?;
    let u = &a.units;
    let ppar = u.momentum_col("p_par");
    let pperp = u.momentum_col("p_perp");
    let mut table = match a.what {
        PlotWhat::Emd | PlotWhat::RateMap => CsvTable::new(&["case", &ppar, &pperp, "value"]),
        PlotWhat::Rate => CsvTable::new(&["case", &ppar, "rate", "rate_error"]),
        PlotWhat::Ntotal => CsvTable::new(&["case", "t", "N_total"]),
    }
    .meta("units", u.tag())
    .meta("case", "1 = I, 2 = II, 3 = III");
    let case_num = |c: Case| match c {
        Case::I => 1.0,
        Case::II => 2.0,
        Case::III => 3.0,
    };
    for c in &agg.cases {
        let k = case_num(c.case);
        match a.what {
            PlotWhat::Emd | PlotWhat::RateMap => {
                let map = if matches!(a.what, PlotWhat::Emd) {
                    let t = a.t.unwrap_or(*c.snapshots.last().unwrap_or(&0.0));
                    table = table.meta("t", t);
                    c.emd(t).ok_or_else(|| Failure::Usage(format!("no snapshot at t = {t}; stored: {:?}", c.snapshots)))?
                } else {
                    c.rate_map()
                };
                for (i, row) in map.values.iter().enumerate() {
                    for (j, v) in row.iter().enumerate() {
                        // densities per unit p_⊥ rescale with the momentum unit
                        table.push(vec![k, u.momentum(map.p_par[i]), u.momentum(map.p_perp[j]), v / u.momentum(1.0)]);
                    }
                }
            }
            PlotWhat::Rate => {
                for i in 0..c.p_par.len() {
                    table.push(vec![k, u.momentum(c.p_par[i]), c.rate[i], c.rate_error[i]]);
                }
            }
            PlotWhat::Ntotal => {
                for (t, n) in c.times.iter().zip(c.total_particle_number(agg.weight)) {
                    table.push(vec![k, *t, n]);
                }
            }
        }
    }
    emit(&table, a.out.as_deref())
}
