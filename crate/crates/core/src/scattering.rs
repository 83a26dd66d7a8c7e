//! Sharp-step scattering model for the three field geometries.
//!
//! An electron of energy `E` and conserved parallel momentum `p_∥` coming
//! from x → −∞ meets one (Case I) or two (Cases II/III) sharp steps. In every
//! region the potentials `(v, a)` are constant, so the reduced Dirac equation
//! is solved by plane waves with perpendicular momentum
//! `κ = √((E − v)² − 1 − (p_∥ − a)²)` (principal branch, Im κ ≥ 0). Matching
//! the two spinor components at each step gives a small linear system; the
//! transmission probability is the ratio of Dirac currents `j = ψ†σ₁ψ`.
//!
//! Inside the Klein window the transmitted wave lives in the negative
//! continuum of the right-hand region. It is convenient to describe that
//! region by the hole energy `E_f = eφ₀ − E` (and similarly `E₂`), which is
//! what [`RegionKinematics`] stores.
//!
//! Besides the linear solve, closed forms for `T` are provided as an
//! independent cross-check. They were re-derived for the conventions used
//! here (hole states carry parallel momentum `p_∥ − a`, evaluated with the
//! same sign as the particle states) and agree with the solve to rounding.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{Case, FieldConfiguration};

/// The three numbers the analytic model needs, natural units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepModel {
    pub e_phi0: f64,
    /// Kinetic-momentum shift across the vector step, eA₀/c.
    pub delta: f64,
    /// Separation between the two steps.
    pub l: f64,
}

impl StepModel {
    pub fn reference() -> Self {
        StepModel { e_phi0: 2.5, delta: 0.6, l: 24.5 }
    }
}

impl From<&FieldConfiguration> for StepModel {
    fn from(f: &FieldConfiguration) -> Self {
        StepModel { e_phi0: f.e_phi0, delta: f.momentum_shift(), l: f.l }
    }
}

/// Potentials of one constant region.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Slab {
    v: f64,
    a: f64,
}

fn layout(case: Case, m: &StepModel) -> (Vec<Slab>, Vec<f64>) {
    let (phi, d, l) = (m.e_phi0, m.delta, m.l);
    match case {
        Case::I => (vec![Slab { v: 0.0, a: 0.0 }, Slab { v: phi, a: 0.0 }], vec![0.0]),
        Case::II => (
            vec![Slab { v: 0.0, a: 0.0 }, Slab { v: phi, a: 0.0 }, Slab { v: phi, a: d }],
            vec![0.0, l],
        ),
        Case::III => (
            vec![Slab { v: 0.0, a: 0.0 }, Slab { v: 0.0, a: d }, Slab { v: phi, a: d }],
            vec![-l, 0.0],
        ),
    }
}

/// Principal-branch perpendicular momentum `√(E² − 1 − p_∥²)`, Im ≥ 0.
pub fn perp_momentum(e: f64, p_par: f64) -> C64 {
    C64::new(e * e - 1.0 - p_par * p_par, 0.0).sqrt()
}

fn is_propagating(p: C64) -> bool {
    p.im == 0.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionState {
    /// Energy of the state in this region: the particle energy where the
    /// state is in the positive continuum, the hole energy `eφ₀ − E` where it
    /// is in the negative one.
    pub energy: f64,
    pub p_par: f64,
    pub p_perp: C64,
}

impl RegionState {
    fn new(energy: f64, p_par: f64) -> Self {
        RegionState { energy, p_par, p_perp: perp_momentum(energy, p_par) }
    }

    pub fn on_shell_residual(&self) -> f64 {
        let lhs = C64::new(self.energy * self.energy, 0.0);
        let rhs = 1.0 + self.p_par * self.p_par + self.p_perp * self.p_perp;
        (lhs - rhs).norm()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionKinematics {
    pub case: Case,
    pub initial: RegionState,
    /// The region between the steps (Cases II and III).
    pub middle: Option<RegionState>,
    pub last: RegionState,
    pub l: f64,
}

impl RegionKinematics {
    /// Phase accumulated across the middle region, η = p_{2,⊥} L.
    pub fn eta(&self) -> Option<C64> {
        self.middle.map(|m| m.p_perp * self.l)
    }
}

pub fn kinematics(case: Case, e_i: f64, p_par: f64, m: &StepModel) -> RegionKinematics {
    let hole = m.e_phi0 - e_i;
    let initial = RegionState::new(e_i, p_par);
    let (middle, last) = match case {
        Case::I => (None, RegionState::new(hole, p_par)),
        Case::II => (Some(RegionState::new(hole, p_par)), RegionState::new(hole, p_par - m.delta)),
        Case::III => (Some(RegionState::new(e_i, p_par - m.delta)), RegionState::new(hole, p_par - m.delta)),
    };
    RegionKinematics { case, initial, middle, last, l: m.l }
}

/// Energy interval in which the incoming electron, the transmitted hole and
/// (for two steps) the state between the steps all propagate. `None` when the
/// interval is empty.
pub fn klein_window(case: Case, p_par: f64, m: &StepModel) -> Option<(f64, f64)> {
    let s = |q: f64| (1.0 + q * q).sqrt();
    let shifted = p_par - m.delta;
    let (lo, hi) = match case {
        Case::I => (s(p_par), m.e_phi0 - s(p_par)),
        Case::II => (s(p_par), m.e_phi0 - s(p_par).max(s(shifted))),
        Case::III => (s(p_par).max(s(shifted)), m.e_phi0 - s(shifted)),
    };
    (lo < hi).then_some((lo, hi))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatteringSolution {
    pub r: C64,
    pub t: C64,
    /// Amplitudes of the right- and left-moving waves between the steps.
    pub c1: Option<C64>,
    pub c2: Option<C64>,
    pub reflection: f64,
    pub transmission: f64,
    pub kinematics: RegionKinematics,
}

/// Plane-wave spinor (unnormalised) for kinetic energy `eps = E − v`, kinetic
/// parallel momentum `q` and perpendicular momentum `k`.
fn spinor(k: C64, eps: f64, q: f64) -> [C64; 2] {
    let iq = C64::new(0.0, q);
    if eps > 0.0 {
        [C64::new(eps + 1.0, 0.0), k + iq]
    } else {
        [k - iq, C64::new(eps - 1.0, 0.0)]
    }
}

fn current(c: &[C64; 2]) -> f64 {
    2.0 * (c[0].conj() * c[1]).re
}

/// Wave moving (or decaying) to the right in a region.
fn rightward(kappa: C64, eps: f64) -> C64 {
    if !is_propagating(kappa) || eps > 0.0 {
        kappa
    } else {
        // group velocity of negative-continuum states is opposite to k
        -kappa
    }
}

/// Dense Gaussian elimination with partial pivoting for the ≤4×4 matching
/// systems. Returns the solution and the ratio of largest to smallest pivot.
fn solve_small(mut a: Vec<Vec<C64>>, mut b: Vec<C64>) -> Option<(Vec<C64>, f64)> {
    let n = b.len();
    let (mut pmax, mut pmin) = (0.0f64, f64::INFINITY);
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].norm().total_cmp(&a[j][col].norm()))?;
        let mag = a[piv][col].norm();
        if mag == 0.0 || !mag.is_finite() {
            return None;
        }
        pmax = pmax.max(mag);
        pmin = pmin.min(mag);
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == C64::new(0.0, 0.0) {
                continue;
            }
            for k in col..n {
                let sub = f * a[col][k];
                a[row][k] -= sub;
            }
            let sub = f * b[col];
            b[row] -= sub;
        }
    }
    let mut x = vec![C64::new(0.0, 0.0); n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Some((x, pmax / pmin))
}

/// Solve the continuity conditions at the sharp steps.
pub fn match_solve(case: Case, e_i: f64, p_par: f64, m: &StepModel) -> Result<ScatteringSolution> {
    let kin = kinematics(case, e_i, p_par, m);
    if !(is_propagating(kin.initial.p_perp) && kin.initial.p_perp.re > 0.0) {
        return Err(Error::numerical(format!(
            "incoming wave at E = {e_i}, p_∥ = {p_par} is not propagating"
        )));
    }
    let (slabs, bounds) = layout(case, m);
    let n = slabs.len();
    // (k, spinor) of the right- and left-going wave in each region
    let waves: Vec<[(C64, [C64; 2]); 2]> = slabs
        .iter()
        .map(|s| {
            let eps = e_i - s.v;
            let q = p_par - s.a;
            let kappa = perp_momentum(eps, q);
            let kr = rightward(kappa, eps);
            [(kr, spinor(kr, eps, q)), (-kr, spinor(-kr, eps, q))]
        })
        .collect();

    // unknowns: r, then (right, left) amplitudes of each inner region, then t
    let nu = 2 * (n - 1);
    let var = |region: usize, wave: usize| -> Option<usize> {
        match (region, wave) {
            (0, 0) => None,
            (0, _) => Some(0),
            (j, 0) if j == n - 1 => Some(nu - 1),
            (j, _) if j == n - 1 => None,
            (j, w) => Some(2 * j - 1 + w),
        }
    };
    let mut a = vec![vec![C64::new(0.0, 0.0); nu]; nu];
    let mut rhs = vec![C64::new(0.0, 0.0); nu];
    let mut row = 0;
    for (b, &xb) in bounds.iter().enumerate() {
        for comp in 0..2 {
            for (sign, region) in [(1.0, b), (-1.0, b + 1)] {
                for (w, (k, chi)) in waves[region].iter().enumerate() {
                    let val = chi[comp] * (C64::i() * k * xb).exp() * sign;
                    match var(region, w) {
                        Some(idx) => a[row][idx] += val,
                        // the incoming wave has unit amplitude
                        None if region == 0 => rhs[row] -= val,
                        None => {}
                    }
                }
            }
            row += 1;
        }
    }
    let (x, cond) = solve_small(a, rhs).ok_or_else(|| {
        Error::numerical(format!("singular matching system at E = {e_i}, p_∥ = {p_par}"))
    })?;
    if cond > 1e14 {
        return Err(Error::numerical(format!(
            "matching system at E = {e_i}, p_∥ = {p_par} is ill-conditioned (pivot ratio {cond:.3e})"
        )));
    }
    let j_in = current(&waves[0][0].1);
    let j_r = current(&waves[0][1].1) * x[0].norm_sqr();
    let (kt, chit) = waves[n - 1][0];
    let j_t = if is_propagating(kt) { current(&chit) * x[nu - 1].norm_sqr() } else { 0.0 };
    let (c1, c2) = if n == 3 { (Some(x[1]), Some(x[2])) } else { (None, None) };
    Ok(ScatteringSolution {
        r: x[0],
        t: x[nu - 1],
        c1,
        c2,
        reflection: -j_r / j_in,
        transmission: j_t / j_in,
        kinematics: kin,
    })
}

/// Coefficients of the two-step denominator
/// `[a sin η + s·b cos η]² + [c sin η − d cos η]²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DenominatorCoefficients {
    pub a: C64,
    pub b: C64,
    pub c: C64,
    pub d: C64,
    pub sign: f64,
}

struct Shorthand {
    ei: f64,
    ef: f64,
    e2: f64,
    qi: f64,
    qf: f64,
    q2: f64,
    pi: C64,
    pf: C64,
    p2: C64,
}

fn shorthand(kin: &RegionKinematics) -> Shorthand {
    let mid = kin.middle.unwrap_or(kin.last);
    Shorthand {
        ei: kin.initial.energy,
        ef: kin.last.energy,
        e2: mid.energy,
        qi: kin.initial.p_par,
        qf: kin.last.p_par,
        q2: mid.p_par,
        pi: kin.initial.p_perp,
        pf: kin.last.p_perp,
        p2: mid.p_perp,
    }
}

/// Coefficient set for the vector step on the far side of the scalar step
/// (Case II geometry).
pub fn coefficients_outer(kin: &RegionKinematics) -> DenominatorCoefficients {
    let Shorthand { ei, ef, e2, qi, qf, q2, pi, pf, p2 } = shorthand(kin);
    let cross = pf * qi - pi * qf;
    let mixed = (ei + 1.0) * (ef + 1.0) - pi * pf - qi * qf;
    DenominatorCoefficients {
        a: pi * (ef + 1.0) * (e2 - 1.0) + pf * (ei + 1.0) * (e2 + 1.0) + q2 * cross,
        b: p2 * cross,
        c: qf * (ei + 1.0) * (e2 + 1.0) - qi * (ef + 1.0) * (e2 - 1.0) - q2 * mixed,
        d: p2 * ((ei + 1.0) * (ef + 1.0) + pi * pf + qi * qf),
        sign: -1.0,
    }
}

/// Coefficient set for the vector step on the incoming side (Case III).
pub fn coefficients_inner(kin: &RegionKinematics) -> DenominatorCoefficients {
    let Shorthand { ei, ef, e2, qi, qf, q2, pi, pf, p2 } = shorthand(kin);
    let cross = pf * qi - pi * qf;
    let mixed = (ei + 1.0) * (ef + 1.0) - pi * pf - qi * qf;
    DenominatorCoefficients {
        a: pi * (ef + 1.0) * (e2 + 1.0) + pf * (ei + 1.0) * (e2 - 1.0) - q2 * cross,
        b: p2 * cross,
        c: qi * (ef + 1.0) * (e2 + 1.0) - qf * (ei + 1.0) * (e2 - 1.0) - q2 * mixed,
        d: p2 * ((ei + 1.0) * (ef + 1.0) + pi * pf + qi * qf),
        sign: 1.0,
    }
}

/// Two-step transmission for a given coefficient set. `sin η`, `cos η` are
/// evaluated at complex η when the middle region is evanescent.
pub fn two_step_transmission(kin: &RegionKinematics, k: &DenominatorCoefficients) -> f64 {
    let s = shorthand(kin);
    let eta = kin.eta().expect("two-step kinematics");
    let (sn, cs) = (eta.sin(), eta.cos());
    let num = 4.0 * s.pi * s.p2 * s.p2 * s.pf * (s.ei + 1.0) * (s.ef + 1.0);
    let u = k.a * sn + k.b * cs * k.sign;
    let w = k.c * sn - k.d * cs;
    (num / (u * u + w * w)).re
}

/// Closed-form transmission probability.
pub fn transmission_closed_form(kin: &RegionKinematics) -> f64 {
    if !is_propagating(kin.last.p_perp) || !is_propagating(kin.initial.p_perp) {
        return 0.0;
    }
    match kin.case {
        Case::I => {
            let Shorthand { ei, ef, qi, qf, pi, pf, .. } = shorthand(kin);
            let num = 4.0 * pi * pf * (ei + 1.0) * (ef + 1.0);
            let x = (ei + 1.0) * (ef + 1.0) + pi * pf + qi * qf;
            let y = pi * qf - qi * pf;
            (num / (x * x + y * y)).re
        }
        Case::II => two_step_transmission(kin, &coefficients_outer(kin)),
        Case::III => two_step_transmission(kin, &coefficients_inner(kin)),
    }
}

/// `T(E)` by the canonical route (linear solve); zero outside the region
/// where the incoming wave propagates.
pub fn transmission(case: Case, e: f64, p_par: f64, m: &StepModel) -> f64 {
    let kin = kinematics(case, e, p_par, m);
    if !(is_propagating(kin.initial.p_perp) && kin.initial.p_perp.re > 0.0) {
        return 0.0;
    }
    match match_solve(case, e, p_par, m) {
        Ok(s) => s.transmission,
        // measure-zero kinematics: fall back to the closed form
        Err(_) => transmission_closed_form(&kin),
    }
}

/// Pair-creation energy spectrum predicted from the static transmission,
/// `ρ(E, t) = (2t/π) T(E)` inside the Klein window.
pub fn hund_spectrum(case: Case, p_par: f64, t: f64, energies: &[f64], m: &StepModel) -> Vec<f64> {
    let window = klein_window(case, p_par, m);
    energies
        .iter()
        .map(|&e| match window {
            Some((lo, hi)) if e >= lo && e <= hi && t > 0.0 => 2.0 * t / PI * transmission(case, e, p_par, m),
            _ => 0.0,
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureReport {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: u32,
}

/// ∫ f over [lo, hi] for integrands with square-root behaviour at both ends.
///
/// The substitution E = lo + (hi − lo)(1 − cos θ)/2 removes the endpoint
/// singularities; the θ range is split into `pieces` panels (the two-step
/// transmissions oscillate with the cavity phase), each integrated by
/// tanh-sinh quadrature. Panels that do not converge are bisected, which
/// takes care of narrow resonances.
pub fn integrate_window(f: impl Fn(f64) -> f64, lo: f64, hi: f64, pieces: usize, tol: f64) -> Result<QuadratureReport> {
    let half = 0.5 * (hi - lo);
    let g = |theta: f64| {
        let e = lo + half * (1.0 - theta.cos());
        f(e) * half * theta.sin()
    };
    let pieces = pieces.max(1);
    let h = PI / pieces as f64;
    // T ≤ 1, so an error small against the window width is harmless even
    // when the requested absolute tolerance was not reached.
    let floor = 1e-9 * (hi - lo);
    let mut total = QuadratureReport { value: 0.0, error_estimate: 0.0, evaluations: 0 };
    let mut stack: Vec<(f64, f64, u32)> = (0..pieces).rev().map(|i| (h * i as f64, h * (i + 1) as f64, 0)).collect();
    while let Some((a, b, depth)) = stack.pop() {
        let panel_tol = tol * (b - a) / PI;
        let out = quadrature::double_exponential::integrate(&g, a, b, panel_tol);
        total.evaluations += out.num_function_evaluations;
        let converged = out.integral.is_finite()
            && (out.error_estimate <= 100.0 * panel_tol || out.error_estimate <= floor * (b - a) / PI);
        if converged {
            total.value += out.integral;
            total.error_estimate += out.error_estimate;
        } else if depth < 24 {
            let mid = 0.5 * (a + b);
            stack.push((mid, b, depth + 1));
            stack.push((a, mid, depth + 1));
        } else {
            return Err(Error::numerical(format!(
                "quadrature did not converge on θ ∈ [{a:.6}, {b:.6}] (E ∈ [{:.6}, {:.6}]): estimate {:.3e}",
                lo + half * (1.0 - a.cos()),
                lo + half * (1.0 - b.cos()),
                out.error_estimate,
            )));
        }
    }
    Ok(total)
}

fn panels(case: Case, window: (f64, f64), p_par: f64, m: &StepModel) -> usize {
    match case {
        Case::I => 2,
        _ => {
            // number of cavity half-periods across the window
            let kin = |e| kinematics(case, e, p_par, m).eta().map(|x| x.re).unwrap_or(0.0);
            let span = (kin(window.0) - kin(window.1)).abs();
            (4 + (2.0 * span / PI) as usize).min(512)
        }
    }
}

/// Energies at which some region's perpendicular momentum changes between
/// propagating and evanescent; `T(E)` has square-root kinks there.
fn thresholds(case: Case, p_par: f64, m: &StepModel) -> Vec<f64> {
    let (slabs, _) = layout(case, m);
    let mut out: Vec<f64> = slabs
        .iter()
        .flat_map(|s| {
            let gap = (1.0 + (p_par - s.a).powi(2)).sqrt();
            [s.v - gap, s.v + gap]
        })
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

/// Per-channel rate `γ = (2/π) ∫ T dE` over the Klein window.
pub fn channel_rate(case: Case, p_par: f64, m: &StepModel) -> Result<f64> {
    let Some(w) = klein_window(case, p_par, m) else {
        return Ok(0.0);
    };
    let mut cuts = vec![w.0];
    let min_gap = 1e-9 * (w.1 - w.0);
    cuts.extend(thresholds(case, p_par, m).into_iter().filter(|&e| e > w.0 + min_gap && e < w.1 - min_gap));
    cuts.push(w.1);
    let mut total = 0.0;
    for seg in cuts.windows(2) {
        let q = integrate_window(
            |e| transmission_closed_form(&kinematics(case, e, p_par, m)),
            seg[0],
            seg[1],
            panels(case, (seg[0], seg[1]), p_par, m),
            1e-10,
        )?;
        total += q.value;
    }
    Ok(2.0 / PI * total)
}

/// Trapezoidal aggregate of `γ(p_∥)` times a normalisation weight.
pub fn total_rate(case: Case, p_grid: &[f64], weight: f64, m: &StepModel) -> Result<f64> {
    let g: Vec<f64> = p_grid.iter().map(|&p| channel_rate(case, p, m)).collect::<Result<_>>()?;
    Ok(weight * trapezoid(p_grid, &g))
}

pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    match x.len() {
        0 => 0.0,
        1 => y[0],
        _ => x.windows(2).zip(y.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum(),
    }
}

/// Standing-wave energies of the cavity between the two steps in the Case II
/// geometry, restricted to the range where the far step blocks transmission
/// (the regime fed only by resonance channels). Approximate: the phase shifts
/// at the walls are ignored, so the condition used is Re η = nπ.
pub fn resonance_energies(p_par: f64, m: &StepModel) -> Vec<f64> {
    if m.l <= 0.0 {
        return vec![];
    }
    let s = |q: f64| (1.0 + q * q).sqrt();
    let top = m.e_phi0 - s(p_par);
    let bottom = s(p_par).max(m.e_phi0 - s(p_par - m.delta));
    let mut out = vec![];
    for n in 1.. {
        let k = n as f64 * PI / m.l;
        let e = m.e_phi0 - (1.0 + p_par * p_par + k * k).sqrt();
        if e < bottom {
            break;
        }
        if e <= top {
            out.push(e);
        }
    }
    out.reverse();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const M: StepModel = StepModel { e_phi0: 2.5, delta: 0.6, l: 24.5 };

    #[test]
    fn symmetric_point_of_single_step() {
        let k = kinematics(Case::I, 1.25, 0.0, &M);
        assert_eq!(k.last.energy, 1.25);
        assert!((k.initial.p_perp.re - 0.75).abs() < 1e-15);
        let s = match_solve(Case::I, 1.25, 0.0, &M).unwrap();
        assert!((s.transmission - 0.36).abs() < 1e-12);
        assert!((transmission_closed_form(&k) - 0.36).abs() < 1e-12);
    }

    #[test]
    fn case_two_kinematics() {
        let k = kinematics(Case::II, 1.25, 0.0, &M);
        let mid = k.middle.unwrap();
        assert_eq!((mid.energy, k.last.energy, k.last.p_par), (1.25, 1.25, -0.6));
        assert!((k.last.p_perp.re - 0.45).abs() < 1e-15);
        let beyond = kinematics(Case::II, 1.45, 0.0, &M);
        assert_eq!(beyond.last.p_perp.re, 0.0);
        assert!(beyond.last.p_perp.im > 0.0);
        assert_eq!(transmission_closed_form(&beyond), 0.0);
    }

    #[test]
    fn windows() {
        let (lo, hi) = klein_window(Case::I, 0.0, &M).unwrap();
        assert_eq!((lo, hi), (1.0, 1.5));
        let (lo, hi) = klein_window(Case::II, 0.0, &M).unwrap();
        assert_eq!(lo, 1.0);
        assert!((hi - (2.5 - 1.36f64.sqrt())).abs() < 1e-15);
        assert!(klein_window(Case::I, 1.0, &M).is_none());
    }

    #[test]
    fn flux_is_conserved_in_two_step_geometries() {
        for (case, e, p) in [(Case::II, 1.2, 0.1), (Case::III, 1.3, 0.5), (Case::II, 1.05, -0.2)] {
            let s = match_solve(case, e, p, &M).unwrap();
            assert!((s.reflection + s.transmission - 1.0).abs() < 1e-10, "{case} {e} {p}");
            assert!(s.c1.is_some() && s.c2.is_some());
        }
    }

    #[test]
    fn closed_forms_match_the_solve() {
        for (case, e, p) in [(Case::I, 1.2, 0.3), (Case::II, 1.2, 0.0), (Case::II, 1.1, 0.1), (Case::III, 1.4, 0.6), (Case::III, 1.25, 0.4)] {
            let k = kinematics(case, e, p, &M);
            let s = match_solve(case, e, p, &M).unwrap();
            assert!((transmission_closed_form(&k) - s.transmission).abs() < 1e-10, "{case} {e} {p}");
        }
    }

    #[test]
    fn evanescent_middle_region_is_continuous() {
        // Case III at p_∥ = 0: the region between the steps is gapped below √1.36
        for e in [1.05, 1.1, 1.15] {
            let k = kinematics(Case::III, e, 0.0, &M);
            assert!(k.middle.unwrap().p_perp.im > 0.0);
            let s = match_solve(Case::III, e, 0.0, &M).unwrap();
            let c = transmission_closed_form(&k);
            assert!((c - s.transmission).abs() < 1e-12 * c.max(1e-300).max(1e-20) + 1e-18);
        }
    }

    #[test]
    fn incoming_wave_must_propagate() {
        assert!(match_solve(Case::I, 0.9, 0.0, &M).is_err());
    }

    #[test]
    fn degenerate_geometry_reduces_to_single_step() {
        let m0 = StepModel { e_phi0: 2.5, delta: 0.0, l: 0.0 };
        for e in [1.1, 1.25, 1.4] {
            let t2 = transmission_closed_form(&kinematics(Case::II, e, 0.2, &m0));
            let t1 = transmission_closed_form(&kinematics(Case::I, e, 0.2, &m0));
            assert!((t2 - t1).abs() < 1e-12);
        }
    }

    #[test]
    fn hund_spectrum_vanishes_at_t_zero_and_outside_window() {
        let es = [1.1, 1.25, 1.4, 1.45];
        assert!(hund_spectrum(Case::I, 0.0, 0.0, &es, &M).iter().all(|&r| r == 0.0));
        let r = hund_spectrum(Case::II, 0.0, 10.0, &es, &M);
        assert_eq!(r[3], 0.0);
        let r1 = hund_spectrum(Case::I, 0.0, 10.0, &[1.25], &M)[0];
        assert!((r1 - 20.0 / PI * 0.36).abs() < 1e-12);
    }

    #[test]
    fn quadrature_handles_square_root_edges() {
        // ∫₀¹ √(x(1−x)) dx = π/8
        let q = integrate_window(|x| (x * (1.0 - x)).sqrt(), 0.0, 1.0, 2, 1e-12).unwrap();
        assert!((q.value - PI / 8.0).abs() < 1e-12);
    }

    #[test]
    fn resonances() {
        let r = resonance_energies(0.0, &M);
        assert!(!r.is_empty());
        assert!(r.iter().all(|&e| e > 2.5 - 1.36f64.sqrt() && e <= 1.5));
        assert!(resonance_energies(0.0, &StepModel { l: 0.0, ..M }).is_empty());
        let long = resonance_energies(0.0, &StepModel { l: 60.0, ..M });
        assert!(long.len() > r.len());
    }
}
