//! Field-theory observables of one channel.
//!
//! Every negative-energy free state |n⟩ is evolved with the static
//! Hamiltonian and projected on the positive free states |p⟩. The overlaps
//! `G_{p,n}(t) = ⟨p|U(t)|n⟩` determine all electron observables:
//!
//! * particle number `N(t) = Σ_{p,n} |G_{p,n}|²`,
//! * momentum spectrum `ρ(p_⊥) = Σ_n |G_{p,n}|²` (occupation per mode),
//! * energy spectrum through the Jacobian `dp_⊥/dE = E/|p_⊥|`,
//! * electron/positron densities in position space.
//!
//! With `U(t) = V e^{−iEt} V†` from the eigendecomposition, `G(t)` is one
//! dense product per time. The particle-number series uses the identity
//! `N(t) = N_modes − Σ_{m,m'} |X_{mm'}|² cos((E_m − E_m')t)` with
//! `X = V†P P†V`, which costs two real mat-vecs per sample once `|X|²` is
//! formed.

use std::f64::consts::PI;

use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::dirac::{diagonalize, FreeBasis, Hamiltonian, HamiltonianSpectrum};
use crate::error::{Error, Result};
use crate::units::{Channel, Grid1D, SimConfig};

/// Eigen-decomposed channel with its eigenvectors expressed in the free basis.
pub struct ChannelEngine {
    pub basis: FreeBasis,
    pub energies: Vec<f64>,
    /// ⟨p_k|m⟩, rows by FFT slot, columns by eigenvalue index
    pos: Mat<C64>,
    /// ⟨n_k|m⟩
    neg: Mat<C64>,
    /// `X = pos† pos`, formed on first use
    gram: Option<Mat<C64>>,
    kernel: Option<Mat<f64>>,
}

#[derive(Clone)]
pub struct BogoliubovAmplitudes {
    pub t: f64,
    pub channel: Channel,
    pub grid: Grid1D,
    /// Rows: positive free states; columns: negative free states (FFT slots).
    pub g: Mat<C64>,
}

fn phases(energies: &[f64], t: f64) -> Vec<C64> {
    energies.iter().map(|e| C64::from_polar(1.0, -e * t)).collect()
}

/// `L · diag(ph) · R†`
fn sandwich(l: &Mat<C64>, ph: &[C64], r: &Mat<C64>) -> Mat<C64> {
    let scaled = Mat::from_fn(l.nrows(), l.ncols(), |i, m| l[(i, m)] * ph[m]);
    &scaled * r.adjoint()
}

impl ChannelEngine {
    pub fn new(cfg: &SimConfig, channel: Channel) -> Result<Self> {
        let h = Hamiltonian::new(cfg, channel)?;
        let spectrum = diagonalize(&h)?;
        Ok(Self::from_spectrum(&spectrum, FreeBasis::new(cfg.grid, channel)))
    }

    pub fn from_spectrum(spectrum: &HamiltonianSpectrum, basis: FreeBasis) -> Self {
        let n = basis.n_modes();
        let dim = spectrum.dim();
        let mut pos = Mat::<C64>::zeros(n, dim);
        let mut neg = Mat::<C64>::zeros(n, dim);
        for m in 0..dim {
            let col: Vec<C64> = spectrum.vectors.col(m).iter().copied().collect();
            let (p, q) = basis.project(&col);
            for k in 0..n {
                pos[(k, m)] = p[k];
                neg[(k, m)] = q[k];
            }
        }
        ChannelEngine { basis, energies: spectrum.energies.clone(), pos, neg, gram: None, kernel: None }
    }

    pub fn channel(&self) -> Channel {
        self.basis.channel
    }

    pub fn grid(&self) -> Grid1D {
        self.basis.grid
    }

    pub fn bogoliubov(&self, t: f64) -> BogoliubovAmplitudes {
        BogoliubovAmplitudes { t, channel: self.channel(), grid: self.grid(), g: sandwich(&self.pos, &phases(&self.energies, t), &self.neg) }
    }

    /// `⟨n'|U(t)|n⟩`
    pub fn negative_block(&self, t: f64) -> Mat<C64> {
        sandwich(&self.neg, &phases(&self.energies, t), &self.neg)
    }

    /// `⟨n|U(t)|p⟩`
    pub fn positron_amplitudes(&self, t: f64) -> Mat<C64> {
        sandwich(&self.neg, &phases(&self.energies, t), &self.pos)
    }

    fn gram(&mut self) -> &Mat<C64> {
        if self.gram.is_none() {
            self.gram = Some(self.pos.adjoint() * &self.pos);
        }
        self.gram.as_ref().unwrap()
    }

    fn kernel(&mut self) -> &Mat<f64> {
        if self.kernel.is_none() {
            let x = self.gram();
            let k = Mat::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)].norm_sqr());
            self.kernel = Some(k);
        }
        self.kernel.as_ref().unwrap()
    }

    /// Momentum spectrum averaged over a Gaussian time window of width
    /// `sigma` centred on `t`.
    ///
    /// Each occupation is a sum of terms oscillating at eigenvalue
    /// differences, `ρ_p(t) = 1 − Σ_{m,m'} P_{pm} X_{mm'} P*_{pm'} e^{−i(E_m−E_m')t}`,
    /// so the average just damps every term by `exp(−σ²(E_m−E_m')²/2)`.
    /// This removes the vacuum-polarisation beats (|ΔE| > 2) from regions
    /// with a vector potential while keeping the slow growth from pair
    /// creation. `sigma = 0` reproduces the instantaneous spectrum.
    pub fn filtered_momentum_spectrum(&mut self, t: f64, sigma: f64) -> MomentumSpectrum {
        let energies = self.energies.clone();
        let dim = energies.len();
        let x = self.gram();
        let w = Mat::from_fn(dim, dim, |m, mp| {
            let d = energies[m] - energies[mp];
            x[(m, mp)] * C64::from_polar((-0.5 * sigma * sigma * d * d).exp(), -d * t)
        });
        let pw = &self.pos * &w;
        let grid = self.grid();
        let slots = grid.sorted_slots();
        let occupation = slots
            .iter()
            .map(|&k| {
                let q: C64 = (0..dim).map(|m| pw[(k, m)] * self.pos[(k, m)].conj()).sum();
                (1.0 - q.re).max(0.0)
            })
            .collect();
        MomentumSpectrum {
            t,
            p_par: self.channel().p_par,
            dk: grid.dk(),
            p_perp: slots.iter().map(|&k| grid.k(k)).collect(),
            occupation,
        }
    }

    /// `N(t)` at each time, without forming `G`.
    pub fn particle_number_series(&mut self, times: &[f64]) -> ParticleNumberSeries {
        let modes = self.basis.n_modes() as f64;
        let energies = self.energies.clone();
        let k = self.kernel();
        let dim = energies.len();
        let values = times
            .iter()
            .map(|&t| {
                let c = faer::Col::<f64>::from_fn(dim, |m| (energies[m] * t).cos());
                let s = faer::Col::<f64>::from_fn(dim, |m| (energies[m] * t).sin());
                let kc = k * &c;
                let ks = k * &s;
                let quad: f64 = (0..dim).map(|m| c[m] * kc[m] + s[m] * ks[m]).sum();
                (modes - quad).max(0.0)
            })
            .collect();
        ParticleNumberSeries { times: times.to_vec(), values }
    }

    /// Electron and positron densities per unit length at time t.
    pub fn spatial_density(&self, t: f64) -> SpatialDensity {
        let g = self.bogoliubov(t).g;
        let h = self.positron_amplitudes(t);
        let electron = self.density_from(&g, &self.basis.positive);
        let positron = self.density_from(&h, &self.basis.negative);
        SpatialDensity { t, x: self.grid().positions(), electron, positron }
    }

    /// Σ_col Σ_c |Σ_k s_c(k) e^{ikx} M_{k,col}|² / (N dx)
    fn density_from(&self, m: &Mat<C64>, spinors: &[[C64; 2]]) -> Vec<f64> {
        let n = self.basis.n_modes();
        let tr = self.basis.transform();
        let dx = self.grid().dx();
        let mut rho = vec![0.0; n];
        let mut buf = vec![C64::new(0.0, 0.0); n];
        for col in 0..m.ncols() {
            for c in 0..2 {
                for k in 0..n {
                    buf[k] = spinors[k][c] * m[(k, col)];
                }
                tr.to_position(&mut buf);
                for (r, b) in rho.iter_mut().zip(&buf) {
                    *r += b.norm_sqr();
                }
            }
        }
        rho.iter_mut().for_each(|r| *r /= dx);
        rho
    }
}

impl BogoliubovAmplitudes {
    pub fn particle_number(&self) -> f64 {
        particle_number(&self.g)
    }

    /// Σ_p |G_{p,n}|² for every negative state n.
    pub fn column_norms(&self) -> Vec<f64> {
        (0..self.g.ncols()).map(|n| self.g.col(n).iter().map(|z| z.norm_sqr()).sum()).collect()
    }

    pub fn momentum_spectrum(&self) -> MomentumSpectrum {
        let slots = self.grid.sorted_slots();
        let occupation = slots.iter().map(|&k| self.g.row(k).iter().map(|z| z.norm_sqr()).sum()).collect();
        MomentumSpectrum {
            t: self.t,
            p_par: self.channel.p_par,
            dk: self.grid.dk(),
            p_perp: slots.iter().map(|&k| self.grid.k(k)).collect(),
            occupation,
        }
    }
}

pub fn particle_number(g: &Mat<C64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..g.ncols() {
        for z in g.col(j).iter() {
            acc += z.norm_sqr();
        }
    }
    acc
}

/// Created electrons per lattice mode, ordered by increasing p_⊥.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentumSpectrum {
    pub t: f64,
    pub p_par: f64,
    /// Lattice spacing of p_⊥; `occupation / dk` is the density in p_⊥.
    pub dk: f64,
    pub p_perp: Vec<f64>,
    pub occupation: Vec<f64>,
}

impl MomentumSpectrum {
    pub fn total(&self) -> f64 {
        self.occupation.iter().sum()
    }

    pub fn density(&self) -> Vec<f64> {
        self.occupation.iter().map(|o| o / self.dk).collect()
    }

    /// `(ρ(t₁) − ρ(t₀)) / (t₁ − t₀)`: the per-mode production rate.
    pub fn rate_between(early: &MomentumSpectrum, late: &MomentumSpectrum) -> Result<MomentumSpectrum> {
        if early.p_perp != late.p_perp || early.p_par != late.p_par {
            return Err(Error::Contract("spectra belong to different channels or grids".into()));
        }
        let dt = late.t - early.t;
        if !(dt > 0.0) {
            return Err(Error::Contract("rate needs two increasing times".into()));
        }
        Ok(MomentumSpectrum {
            t: late.t,
            occupation: late.occupation.iter().zip(&early.occupation).map(|(b, a)| (b - a) / dt).collect(),
            ..late.clone()
        })
    }

    /// Share of the total weight with p_⊥ in `[lo, hi]`.
    pub fn fraction_inside(&self, lo: f64, hi: f64) -> f64 {
        let inside: f64 = self.p_perp.iter().zip(&self.occupation).filter(|(p, _)| (lo..=hi).contains(*p)).map(|(_, o)| o).sum();
        inside / self.total()
    }
}

/// One sign branch of the energy spectrum, sampled at the lattice energies.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBranch {
    pub energy: Vec<f64>,
    pub density: Vec<f64>,
    /// Electrons carried by each sample (the integral of the density over
    /// its share of the energy axis).
    pub occupation: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergySpectrum {
    pub t: f64,
    pub p_par: f64,
    /// p_⊥ < 0: electrons moving towards −x
    pub left: EnergyBranch,
    /// p_⊥ ≥ 0
    pub right: EnergyBranch,
}

/// Histogram on a uniform energy grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyHistogram {
    pub edges: Vec<f64>,
    pub density: Vec<f64>,
}

impl EnergyHistogram {
    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn integral(&self) -> f64 {
        self.edges.windows(2).zip(&self.density).map(|(w, d)| (w[1] - w[0]) * d).sum()
    }

    /// Indices of bins whose density exceeds `fraction` of the maximum.
    pub fn support(&self, fraction: f64) -> Vec<usize> {
        let max = self.density.iter().cloned().fold(0.0, f64::max);
        if max <= 0.0 {
            return vec![];
        }
        (0..self.density.len()).filter(|&i| self.density[i] > fraction * max).collect()
    }
}

/// `ρ(E) = ρ(p_⊥) |dp_⊥/dE|`, `E = √(1 + p_⊥² + p_∥²)`, per sign branch.
pub fn energy_spectrum(m: &MomentumSpectrum) -> EnergySpectrum {
    let mut left = EnergyBranch::default();
    let mut right = EnergyBranch::default();
    let p2 = m.p_par * m.p_par;
    let energy = |p: f64| (1.0 + p * p + p2).sqrt();
    for (&p, &occ) in m.p_perp.iter().zip(&m.occupation) {
        let e = energy(p);
        let jac = if p == 0.0 {
            // E(p) is flat at p = 0: one-sided difference to the next mode
            m.dk / (energy(m.dk) - e)
        } else {
            e / p.abs()
        };
        let branch = if p < 0.0 { &mut left } else { &mut right };
        branch.energy.push(e);
        branch.density.push(occ / m.dk * jac);
        branch.occupation.push(occ);
    }
    // left branch was filled with decreasing |p|; keep energies ascending
    left.energy.reverse();
    left.density.reverse();
    left.occupation.reverse();
    EnergySpectrum { t: m.t, p_par: m.p_par, left, right }
}

impl EnergySpectrum {
    /// Left branch minus the right branch at the same energies.
    ///
    /// In geometries where the created electrons all leave towards −x, the
    /// right branch only carries the vacuum-polarisation background, which
    /// is even in p_⊥; subtracting it leaves the production signal.
    pub fn mirror_subtracted(&self) -> EnergyBranch {
        let mut out = EnergyBranch::default();
        for (i, &e) in self.left.energy.iter().enumerate() {
            let Some(j) = self.right.energy.iter().position(|&x| (x - e).abs() <= 1e-12 * e) else { continue };
            out.energy.push(e);
            out.density.push(self.left.density[i] - self.right.density[j]);
            out.occupation.push(self.left.occupation[i] - self.right.occupation[j]);
        }
        out
    }

    fn histogram(&self, branches: &[&EnergyBranch], e_min: f64, e_max: f64, bins: usize) -> EnergyHistogram {
        let w = (e_max - e_min) / bins as f64;
        let mut density = vec![0.0; bins];
        for b in branches {
            for (&e, &occ) in b.energy.iter().zip(&b.occupation) {
                let i = ((e - e_min) / w).floor();
                if i >= 0.0 && (i as usize) < bins {
                    density[i as usize] += occ / w;
                }
            }
        }
        EnergyHistogram { edges: (0..=bins).map(|i| e_min + w * i as f64).collect(), density }
    }

    /// Both branches summed into uniform bins; integrates exactly to the
    /// number of electrons inside `[e_min, e_max)`.
    pub fn binned(&self, e_min: f64, e_max: f64, bins: usize) -> EnergyHistogram {
        self.histogram(&[&self.left, &self.right], e_min, e_max, bins)
    }

    pub fn binned_left(&self, e_min: f64, e_max: f64, bins: usize) -> EnergyHistogram {
        self.histogram(&[&self.left], e_min, e_max, bins)
    }

    /// Trapezoidal integral of the branch densities.
    pub fn integral(&self) -> f64 {
        let trap = |b: &EnergyBranch| crate::scattering::trapezoid(&b.energy, &b.density);
        trap(&self.left) + trap(&self.right)
    }

    pub fn total(&self) -> f64 {
        self.left.occupation.iter().chain(&self.right.occupation).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialDensity {
    pub t: f64,
    pub x: Vec<f64>,
    pub electron: Vec<f64>,
    pub positron: Vec<f64>,
}

impl SpatialDensity {
    fn integral(&self, rho: &[f64]) -> f64 {
        let dx = self.x[1] - self.x[0];
        rho.iter().sum::<f64>() * dx
    }

    pub fn electrons(&self) -> f64 {
        self.integral(&self.electron)
    }

    pub fn positrons(&self) -> f64 {
        self.integral(&self.positron)
    }

    fn centroid(&self, rho: &[f64]) -> f64 {
        let w: f64 = rho.iter().sum();
        self.x.iter().zip(rho).map(|(x, r)| x * r).sum::<f64>() / w
    }

    pub fn electron_centroid(&self) -> f64 {
        self.centroid(&self.electron)
    }

    pub fn positron_centroid(&self) -> f64 {
        self.centroid(&self.positron)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleNumberSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl ParticleNumberSeries {
    /// Gaussian time filter of width `sigma` on a uniformly sampled series.
    /// The kernel is truncated at 4σ; only times at least 4σ from either end
    /// are returned. `sigma = 0` returns the series unchanged.
    ///
    /// The sudden switch-on leaves undamped oscillations at frequencies of
    /// order 2√(1 + Δ²) in N(t) (vacuum polarisation of the regions with a
    /// non-zero vector potential); the filter removes them before a slope is
    /// fitted.
    pub fn smoothed(&self, sigma: f64) -> Result<ParticleNumberSeries> {
        if sigma == 0.0 {
            return Ok(self.clone());
        }
        if self.times.len() < 2 {
            return Err(Error::Contract("series too short to smooth".into()));
        }
        let dt = self.times[1] - self.times[0];
        if self.times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.abs().max(1.0)) {
            return Err(Error::Contract("smoothing needs uniformly spaced samples".into()));
        }
        let half = (4.0 * sigma / dt).ceil() as usize;
        if 2 * half + 1 > self.times.len() {
            return Err(Error::Contract(format!("series shorter than the smoothing kernel (σ = {sigma})")));
        }
        let kernel: Vec<f64> = (0..=2 * half).map(|i| (-0.5 * ((i as f64 - half as f64) * dt / sigma).powi(2)).exp()).collect();
        let norm: f64 = kernel.iter().sum();
        let n = self.times.len();
        let values = (half..n - half)
            .map(|c| kernel.iter().enumerate().map(|(i, w)| w * self.values[c + i - half]).sum::<f64>() / norm)
            .collect();
        Ok(ParticleNumberSeries { times: self.times[half..n - half].to_vec(), values })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub rate: f64,
    pub intercept: f64,
    /// Standard error of the slope.
    pub rate_error: f64,
    /// RMS of the residuals.
    pub residual: f64,
    /// Largest |residual| relative to the fitted rise across the window.
    pub relative_residual: f64,
    pub samples: usize,
}

/// Least-squares line through the samples inside `window`.
pub fn fit_rate(series: &ParticleNumberSeries, window: (f64, f64)) -> Result<RateFit> {
    let pts: Vec<(f64, f64)> = series
        .times
        .iter()
        .zip(&series.values)
        .filter(|(t, _)| **t >= window.0 && **t <= window.1)
        .map(|(t, v)| (*t, *v))
        .collect();
    let n = pts.len();
    if n < 10 {
        return Err(Error::Contract(format!("rate fit needs ≥ 10 samples in [{}, {}], found {n}", window.0, window.1)));
    }
    let nf = n as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let vm = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let stt: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let span = pts.last().unwrap().0 - pts[0].0;
    if stt <= 1e-12 * nf * span.abs().max(1.0).powi(2) || span == 0.0 {
        return Err(Error::numerical("rate fit is ill-conditioned: no spread in t"));
    }
    let stv: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - vm)).sum();
    let rate = stv / stt;
    let intercept = vm - rate * tm;
    let res: Vec<f64> = pts.iter().map(|p| p.1 - (intercept + rate * p.0)).collect();
    let ss: f64 = res.iter().map(|r| r * r).sum();
    let residual = (ss / nf).sqrt();
    let rate_error = if n > 2 { (ss / (nf - 2.0) / stt).sqrt() } else { 0.0 };
    let rise = (rate * span).abs();
    let worst = res.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let relative_residual = if rise > 0.0 { worst / rise } else if worst == 0.0 { 0.0 } else { f64::INFINITY };
    Ok(RateFit { rate, intercept, rate_error, residual, relative_residual, samples: n })
}

/// Fit the rate after Gaussian smoothing; the window is clipped to the part
/// of the horizon where the smoothed series is defined.
pub fn fit_smoothed_rate(series: &ParticleNumberSeries, window: (f64, f64), sigma: f64) -> Result<RateFit> {
    let s = series.smoothed(sigma)?;
    let lo = window.0.max(s.times[0]);
    let hi = window.1.min(*s.times.last().unwrap());
    fit_rate(&s, (lo, hi))
}

/// Fringe visibility of `density` against a fringe-free `reference` on the
/// same energies: the Michelson contrast `(max − min)/(max + min)` of the
/// ratio `density / reference` inside `window`.
///
/// Dividing by the reference removes the overall spectral shape and the
/// finite-time ringing both spectra share, so only the modulation is left.
pub fn fringe_contrast(energy: &[f64], density: &[f64], reference: &[f64], window: (f64, f64)) -> Result<f64> {
    if density.len() != energy.len() || reference.len() != energy.len() {
        return Err(Error::Contract("fringe contrast needs equally sampled spectra".into()));
    }
    let ratios: Vec<f64> = (0..energy.len())
        .filter(|&i| energy[i] >= window.0 && energy[i] <= window.1)
        .map(|i| density[i] / reference[i])
        .collect();
    if ratios.is_empty() {
        return Err(Error::Contract(format!("no samples in fringe window [{}, {}]", window.0, window.1)));
    }
    if ratios.iter().any(|r| !r.is_finite()) {
        return Err(Error::numerical("reference spectrum vanishes inside the fringe window"));
    }
    let hi = ratios.iter().cloned().fold(f64::MIN, f64::max);
    let lo = ratios.iter().cloned().fold(f64::MAX, f64::min);
    Ok(if hi + lo > 0.0 { (hi - lo) / (hi + lo) } else { 0.0 })
}

/// Energy spectra of one channel at increasing times.
pub fn time_resolved_spectrum(engine: &ChannelEngine, times: &[f64]) -> Result<Vec<EnergySpectrum>> {
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Contract("time samples must increase".into()));
    }
    Ok(times.iter().map(|&t| energy_spectrum(&engine.bogoliubov(t).momentum_spectrum())).collect())
}

/// Electron momentum distribution over (p_∥, p_⊥).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Emd2d {
    pub p_par: Vec<f64>,
    pub p_perp: Vec<f64>,
    /// Row-major, one row per p_∥ channel.
    pub values: Vec<Vec<f64>>,
}

pub fn assemble_emd2d(spectra: &[MomentumSpectrum]) -> Result<Emd2d> {
    let first = spectra.first().ok_or_else(|| Error::Contract("no channels to assemble".into()))?;
    let mut rows: Vec<&MomentumSpectrum> = spectra.iter().collect();
    for s in &rows {
        if s.p_perp != first.p_perp {
            return Err(Error::Contract(format!("channel p_∥ = {} uses a different p_⊥ grid", s.p_par)));
        }
    }
    rows.sort_by(|a, b| a.p_par.total_cmp(&b.p_par));
    if let Some(w) = rows.windows(2).find(|w| w[0].p_par == w[1].p_par) {
        return Err(Error::Contract(format!("duplicate channel p_∥ = {}", w[0].p_par)));
    }
    Ok(Emd2d {
        p_par: rows.iter().map(|s| s.p_par).collect(),
        p_perp: first.p_perp.clone(),
        values: rows.iter().map(|s| s.occupation.clone()).collect(),
    })
}

impl Emd2d {
    pub fn row_sums(&self) -> Vec<f64> {
        self.values.iter().map(|r| r.iter().sum()).collect()
    }

    /// Channel with the largest row sum (the "most probable p_∥").
    pub fn most_probable_row(&self) -> usize {
        let s = self.row_sums();
        (0..s.len()).fold(0, |best, i| if s[i] > s[best] { i } else { best })
    }

    pub fn normalized(&self) -> Emd2d {
        let max = self.values.iter().flatten().cloned().fold(0.0, f64::max);
        let scale = if max > 0.0 { 1.0 / max } else { 1.0 };
        Emd2d { values: self.values.iter().map(|r| r.iter().map(|v| v * scale).collect()).collect(), ..self.clone() }
    }

    /// Largest relative difference between rows p_∥ and −p_∥, relative to
    /// the map maximum. Rows without a mirror partner are skipped.
    pub fn mirror_asymmetry(&self) -> f64 {
        let max = self.values.iter().flatten().cloned().fold(0.0, f64::max);
        let mut worst = 0.0f64;
        for (i, p) in self.p_par.iter().enumerate() {
            if let Some(j) = self.p_par.iter().position(|q| (q + p).abs() < 1e-9) {
                for (a, b) in self.values[i].iter().zip(&self.values[j]) {
                    worst = worst.max((a - b).abs() / max);
                }
            }
        }
        worst
    }
}

/// Relative L2 distance between `numeric` and `reference` sampled at the
/// same points.
pub fn relative_l2(numeric: &[f64], reference: &[f64]) -> f64 {
    let num: f64 = numeric.iter().zip(reference).map(|(a, b)| (a - b).powi(2)).sum();
    let den: f64 = reference.iter().map(|b| b * b).sum();
    (num / den).sqrt()
}

/// Energy density of the production rate in a channel, `2π dρ(E)/dt`,
/// which a Landauer-type picture equates with the transmission `T(E)`.
pub fn rate_energy_density(rate: &MomentumSpectrum) -> EnergySpectrum {
    let mut s = energy_spectrum(rate);
    for b in [&mut s.left, &mut s.right] {
        b.density.iter_mut().for_each(|d| *d *= 2.0 * PI);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(f: impl Fn(f64) -> f64, n: usize, dt: f64) -> ParticleNumberSeries {
        let times: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
        ParticleNumberSeries { values: times.iter().map(|&t| f(t)).collect(), times }
    }

    #[test]
    fn linear_and_constant_series() {
        let fit = fit_rate(&series(|t| 3.0 * t, 50, 0.5), (0.0, 30.0)).unwrap();
        assert!((fit.rate - 3.0).abs() < 1e-12);
        assert!(fit.residual < 1e-12);
        let fit = fit_rate(&series(|_| 2.0, 50, 0.5), (0.0, 30.0)).unwrap();
        assert_eq!(fit.rate, 0.0);
        assert!(fit_rate(&series(|t| t, 5, 0.5), (0.0, 30.0)).is_err());
    }

    #[test]
    fn smoothing_removes_fast_oscillation() {
        let s = series(|t| 0.02 * t + 0.3 * (2.3 * t).sin(), 400, 0.25);
        let raw = fit_rate(&s, (10.0, 90.0)).unwrap();
        let smooth = fit_smoothed_rate(&s, (10.0, 90.0), 2.0).unwrap();
        assert!((smooth.rate - 0.02).abs() < 1e-6);
        assert!((smooth.rate - 0.02).abs() < (raw.rate - 0.02).abs());
    }

    #[test]
    fn contrast_of_synthetic_patterns() {
        let e: Vec<f64> = (0..2001).map(|i| i as f64 * 1e-3).collect();
        let shape: Vec<f64> = e.iter().map(|x| 1.0 + x).collect();
        assert_eq!(fringe_contrast(&e, &shape, &shape, (0.0, 2.0)).unwrap(), 0.0);
        let fr: Vec<f64> = e.iter().map(|x| (1.0 + x) * (1.0 + 0.5 * (2.0 * PI * 5.0 * x).cos())).collect();
        assert!((fringe_contrast(&e, &fr, &shape, (0.0, 2.0)).unwrap() - 0.5).abs() < 1e-12);
        assert!(fringe_contrast(&e, &fr, &shape, (5.0, 6.0)).is_err());
    }

    #[test]
    fn jacobian_of_single_bin() {
        let m = MomentumSpectrum { t: 1.0, p_par: 0.0, dk: 0.25, p_perp: vec![-0.75, -0.5, 0.0, 0.5], occupation: vec![1.0, 0.0, 0.0, 0.0] };
        let e = energy_spectrum(&m);
        let i = e.left.energy.iter().position(|&x| (x - 1.25).abs() < 1e-12).unwrap();
        assert!((e.left.density[i] - 4.0 * 5.0 / 3.0).abs() < 1e-12);
        assert!(e.right.density.iter().all(|d| d.is_finite()));
        assert!((e.binned(1.0, 1.5, 10).integral() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn emd_single_row_and_symmetry() {
        let m = MomentumSpectrum { t: 1.0, p_par: 0.3, dk: 0.1, p_perp: vec![-0.1, 0.0, 0.1], occupation: vec![0.2, 0.1, 0.0] };
        let map = assemble_emd2d(&[m.clone()]).unwrap();
        assert_eq!(map.values, vec![m.occupation.clone()]);
        let mirrored = MomentumSpectrum { p_par: -0.3, ..m.clone() };
        let map = assemble_emd2d(&[m.clone(), mirrored]).unwrap();
        assert_eq!(map.p_par, vec![-0.3, 0.3]);
        assert_eq!(map.mirror_asymmetry(), 0.0);
        assert!(assemble_emd2d(&[m.clone(), m]).is_err());
        assert!(assemble_emd2d(&[]).is_err());
    }
}
