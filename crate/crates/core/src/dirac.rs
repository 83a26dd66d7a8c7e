//! The reduced 1+1D Dirac operator of one transverse channel.
//!
//! With the field along x and the vector potential along y, the 4×4 Dirac
//! Hamiltonian splits into two identical 2×2 blocks (one per spin):
//!
//! ```text
//! H = σ₁ k̂ + σ₂ (p_∥ − a(x)) + σ₃ + v(x)
//! ```
//!
//! Spinors on the grid are stored as one vector of length 2N,
//! `[upper component; lower component]`, normalised with the plain sum
//! Σ|ψ_j|² (multiply by dx for ∫|ψ|²dx). The kinetic term is applied
//! spectrally so the dense matrix and the FFT applicator are the same
//! operator.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::units::{Channel, FieldConfiguration};

/// Edges of the local continua at p_⊥ = 0, `E±(x) = v(x) ± √(1 + (p_∥ − a(x))²)`.
pub fn static_continua(fields: &FieldConfiguration, channel: &Channel, xs: &[f64]) -> (Vec<f64>, Vec<f64>) {
    xs.iter()
        .map(|&x| {
            let (v, a) = fields.field_profiles(x);
            let q = channel.p_par - a;
            let m = (1.0 + q * q).sqrt();
            (v + m, v - m)
        })
        .unzip()
}

/// Free positive-energy spinor `(E+1, k+ip)/√(2E(E+1))`.
pub fn positive_spinor(k: f64, p_par: f64) -> (f64, [C64; 2]) {
    let e = (1.0 + k * k + p_par * p_par).sqrt();
    let n = 1.0 / (2.0 * e * (e + 1.0)).sqrt();
    (e, [C64::new((e + 1.0) * n, 0.0), C64::new(k * n, p_par * n)])
}

/// Free negative-energy spinor `(−(k−ip), E+1)/√(2E(E+1))`, energy −E.
pub fn negative_spinor(k: f64, p_par: f64) -> (f64, [C64; 2]) {
    let e = (1.0 + k * k + p_par * p_par).sqrt();
    let n = 1.0 / (2.0 * e * (e + 1.0)).sqrt();
    (-e, [C64::new(-k * n, p_par * n), C64::new((e + 1.0) * n, 0.0)])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Positive,
    Negative,
}

#[cfg(feature = "engine")]
pub use engine::*;

#[cfg(feature = "engine")]
mod engine {
    use std::sync::Arc;

    use faer::{Mat, Side};
    use num_complex::Complex64 as C64;
    use rustfft::{Fft, FftPlanner};

    use super::{negative_spinor, positive_spinor, Branch};
    use crate::error::{Error, Result};
    use crate::units::{Channel, Grid1D, SimConfig};

    const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

    /// Forward/inverse DFTs between cell-centred grid samples and lattice
    /// momenta, with unitary normalisation:
    /// `ψ̃(k) = N^{-1/2} Σ_j e^{-ik x_j} ψ_j`.
    #[derive(Clone)]
    pub struct Transform {
        grid: Grid1D,
        forward: Arc<dyn Fft<f64>>,
        inverse: Arc<dyn Fft<f64>>,
        /// e^{-ik x_0} per slot, the offset of the first cell centre
        shift: Vec<C64>,
        scale: f64,
    }

    impl Transform {
        pub fn new(grid: Grid1D) -> Self {
            let mut planner = FftPlanner::new();
            let n = grid.n_points;
            let x0 = grid.x(0);
            Transform {
                grid,
                forward: planner.plan_fft_forward(n),
                inverse: planner.plan_fft_inverse(n),
                shift: (0..n).map(|j| C64::from_polar(1.0, -grid.k(j) * x0)).collect(),
                scale: 1.0 / (n as f64).sqrt(),
            }
        }

        pub fn grid(&self) -> &Grid1D {
            &self.grid
        }

        pub fn to_momentum(&self, buf: &mut [C64]) {
            self.forward.process(buf);
            for (b, s) in buf.iter_mut().zip(&self.shift) {
                *b *= s * self.scale;
            }
        }

        pub fn to_position(&self, buf: &mut [C64]) {
            for (b, s) in buf.iter_mut().zip(&self.shift) {
                *b *= s.conj() * self.scale;
            }
            self.inverse.process(buf);
        }
    }

    /// Plane-wave eigenstates of the field-free Hamiltonian.
    #[derive(Clone)]
    pub struct FreeBasis {
        pub grid: Grid1D,
        pub channel: Channel,
        /// Positive energies E⁺(k) per FFT slot.
        pub energies: Vec<f64>,
        pub positive: Vec<[C64; 2]>,
        pub negative: Vec<[C64; 2]>,
        transform: Transform,
    }

    impl FreeBasis {
        pub fn new(grid: Grid1D, channel: Channel) -> Self {
            let n = grid.n_points;
            let mut energies = Vec::with_capacity(n);
            let mut positive = Vec::with_capacity(n);
            let mut negative = Vec::with_capacity(n);
            for j in 0..n {
                let k = grid.k(j);
                let (e, u) = positive_spinor(k, channel.p_par);
                let (_, v) = negative_spinor(k, channel.p_par);
                energies.push(e);
                positive.push(u);
                negative.push(v);
            }
            FreeBasis { grid, channel, energies, positive, negative, transform: Transform::new(grid) }
        }

        pub fn n_modes(&self) -> usize {
            self.grid.n_points
        }

        pub fn transform(&self) -> &Transform {
            &self.transform
        }

        pub fn energy(&self, slot: usize, branch: Branch) -> f64 {
            match branch {
                Branch::Positive => self.energies[slot],
                Branch::Negative => -self.energies[slot],
            }
        }

        fn spinor(&self, slot: usize, branch: Branch) -> &[C64; 2] {
            match branch {
                Branch::Positive => &self.positive[slot],
                Branch::Negative => &self.negative[slot],
            }
        }

        /// Position-space samples of the free state in `slot`.
        pub fn state(&self, slot: usize, branch: Branch) -> Vec<C64> {
            let n = self.n_modes();
            let s = self.spinor(slot, branch);
            let k = self.grid.k(slot);
            let norm = 1.0 / (n as f64).sqrt();
            let mut out = vec![ZERO; 2 * n];
            for j in 0..n {
                let w = C64::from_polar(norm, k * self.grid.x(j));
                out[j] = s[0] * w;
                out[n + j] = s[1] * w;
            }
            out
        }

        /// Overlaps `(⟨p_k|ψ⟩, ⟨n_k|ψ⟩)` for every slot.
        pub fn project(&self, psi: &[C64]) -> (Vec<C64>, Vec<C64>) {
            let n = self.n_modes();
            let mut up = psi[..n].to_vec();
            let mut lo = psi[n..].to_vec();
            self.transform.to_momentum(&mut up);
            self.transform.to_momentum(&mut lo);
            let mut pos = Vec::with_capacity(n);
            let mut neg = Vec::with_capacity(n);
            for j in 0..n {
                let (u, v) = (&self.positive[j], &self.negative[j]);
                pos.push(u[0].conj() * up[j] + u[1].conj() * lo[j]);
                neg.push(v[0].conj() * up[j] + v[1].conj() * lo[j]);
            }
            (pos, neg)
        }

        /// Inverse of [`FreeBasis::project`]: Σ_k (a_k |p_k⟩ + b_k |n_k⟩).
        pub fn synthesize(&self, pos: &[C64], neg: &[C64]) -> Vec<C64> {
            let n = self.n_modes();
            let mut up = vec![ZERO; n];
            let mut lo = vec![ZERO; n];
            for j in 0..n {
                let (u, v) = (&self.positive[j], &self.negative[j]);
                up[j] = u[0] * pos[j] + v[0] * neg[j];
                lo[j] = u[1] * pos[j] + v[1] * neg[j];
            }
            self.transform.to_position(&mut up);
            self.transform.to_position(&mut lo);
            up.extend(lo);
            up
        }
    }

    /// The channel Hamiltonian with the potentials sampled on the grid.
    #[derive(Clone)]
    pub struct Hamiltonian {
        pub grid: Grid1D,
        pub channel: Channel,
        /// v(x_j)
        pub v: Vec<f64>,
        /// kinetic parallel momentum p_∥ − a(x_j)
        pub q: Vec<f64>,
        transform: Transform,
    }

    impl Hamiltonian {
        pub fn new(cfg: &SimConfig, channel: Channel) -> Result<Self> {
            cfg.grid.check_cutoff(&cfg.fields)?;
            let xs = cfg.grid.positions();
            let (v, a): (Vec<f64>, Vec<f64>) = xs.iter().map(|&x| cfg.potentials(x)).unzip();
            let q = a.iter().map(|a| channel.p_par - a).collect();
            Ok(Hamiltonian { grid: cfg.grid, channel, v, q, transform: Transform::new(cfg.grid) })
        }

        /// Field-free operator on the given grid.
        pub fn free(grid: Grid1D, channel: Channel) -> Self {
            let n = grid.n_points;
            Hamiltonian { grid, channel, v: vec![0.0; n], q: vec![channel.p_par; n], transform: Transform::new(grid) }
        }

        pub fn dim(&self) -> usize {
            2 * self.grid.n_points
        }

        /// Bound on the spectral radius used for the split-operator guard.
        pub fn energy_bound(&self) -> f64 {
            let k = self.grid.k_max();
            let qmax = self.q.iter().fold(0.0f64, |m, q| m.max(q.abs()));
            let vmax = self.v.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            (k * k + 1.0 + qmax * qmax).sqrt() + vmax
        }

        /// First column of the circulant spectral derivative,
        /// `d_m = N^{-1} Σ_k k e^{i k m dx}`.
        fn derivative_column(&self) -> Vec<C64> {
            let n = self.grid.n_points;
            let mut d: Vec<C64> = (0..n).map(|j| C64::new(self.grid.k(j), 0.0)).collect();
            FftPlanner::new().plan_fft_inverse(n).process(&mut d);
            for x in &mut d {
                *x /= n as f64;
            }
            d
        }

        pub fn dense(&self) -> Mat<C64> {
            let n = self.grid.n_points;
            let d = self.derivative_column();
            let kin = |j: usize, l: usize| d[(j + n - l) % n];
            Mat::from_fn(2 * n, 2 * n, |r, c| {
                let (br, j) = (r / n, r % n);
                let (bc, l) = (c / n, c % n);
                let diag = j == l;
                match (br, bc) {
                    (0, 0) => if diag { C64::new(1.0 + self.v[j], 0.0) } else { ZERO },
                    (1, 1) => if diag { C64::new(-1.0 + self.v[j], 0.0) } else { ZERO },
                    (0, 1) => kin(j, l) - if diag { C64::new(0.0, self.q[j]) } else { ZERO },
                    _ => kin(j, l) + if diag { C64::new(0.0, self.q[j]) } else { ZERO },
                }
            })
        }

        /// Matrix-free H|ψ⟩.
        pub fn apply(&self, psi: &[C64]) -> Vec<C64> {
            let n = self.grid.n_points;
            let (up, lo) = psi.split_at(n);
            // σ₁ k̂ swaps the components
            let mut dk_lo = lo.to_vec();
            let mut dk_up = up.to_vec();
            for buf in [&mut dk_lo, &mut dk_up] {
                self.transform.to_momentum(buf);
                for (j, b) in buf.iter_mut().enumerate() {
                    *b *= self.grid.k(j);
                }
                self.transform.to_position(buf);
            }
            let mut out = vec![ZERO; 2 * n];
            for j in 0..n {
                let iq = C64::new(0.0, self.q[j]);
                out[j] = dk_lo[j] - iq * lo[j] + (1.0 + self.v[j]) * up[j];
                out[n + j] = dk_up[j] + iq * up[j] + (-1.0 + self.v[j]) * lo[j];
            }
            out
        }

        pub fn expectation(&self, psi: &[C64]) -> f64 {
            let h = self.apply(psi);
            psi.iter().zip(&h).map(|(a, b)| (a.conj() * b).re).sum()
        }
    }

    pub struct HamiltonianSpectrum {
        pub grid: Grid1D,
        pub channel: Channel,
        /// Ascending eigenvalues.
        pub energies: Vec<f64>,
        /// Eigenvectors as columns.
        pub vectors: Mat<C64>,
    }

    pub fn hermiticity_residual(h: &Mat<C64>) -> f64 {
        let n = h.nrows();
        let mut worst = 0.0f64;
        for j in 0..n {
            for i in 0..=j {
                worst = worst.max((h[(i, j)] - h[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn diagonalize(h: &Hamiltonian) -> Result<HamiltonianSpectrum> {
        let dense = h.dense();
        let residual = hermiticity_residual(&dense);
        if residual > 1e-12 {
            return Err(Error::Numerical {
                msg: format!("Hamiltonian is not Hermitian (residual {residual:.3e})"),
                channel: Some(h.channel.label()),
            });
        }
        let evd = dense.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Numerical {
            msg: format!("eigensolver failed: {e:?}"),
            channel: Some(h.channel.label()),
        })?;
        let s = evd.S().column_vector();
        let u = evd.U();
        let dim = dense.nrows();
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| s[a].re.total_cmp(&s[b].re));
        let energies = order.iter().map(|&i| s[i].re).collect();
        let vectors = Mat::from_fn(dim, dim, |r, c| u[(r, order[c])]);
        Ok(HamiltonianSpectrum { grid: h.grid, channel: h.channel, energies, vectors })
    }

    impl HamiltonianSpectrum {
        pub fn dim(&self) -> usize {
            self.energies.len()
        }

        /// max_m ‖H|m⟩ − E_m|m⟩‖, using the matrix-free applicator.
        pub fn reconstruction_residual(&self, h: &Hamiltonian) -> f64 {
            (0..self.dim())
                .map(|m| {
                    let col: Vec<C64> = self.vectors.col(m).iter().copied().collect();
                    let hv = h.apply(&col);
                    hv.iter().zip(&col).map(|(a, b)| (a - b * self.energies[m]).norm_sqr()).sum::<f64>().sqrt()
                })
                .fold(0.0, f64::max)
        }

        /// Coefficients ⟨m|ψ⟩.
        pub fn coefficients(&self, psi: &[C64]) -> Vec<C64> {
            let v = &self.vectors;
            (0..self.dim()).map(|m| v.col(m).iter().zip(psi).map(|(a, b)| a.conj() * b).sum()).collect()
        }

        pub fn synthesize(&self, coeffs: &[C64]) -> Vec<C64> {
            let dim = self.dim();
            let mut out = vec![ZERO; dim];
            for (m, c) in coeffs.iter().enumerate() {
                if *c == ZERO {
                    continue;
                }
                for (o, v) in out.iter_mut().zip(self.vectors.col(m).iter()) {
                    *o += v * c;
                }
            }
            out
        }
    }

    /// `U(t)|ψ⟩ = Σ_m e^{−iE_m t}|m⟩⟨m|ψ⟩`.
    pub fn evolve_eigen(spectrum: &HamiltonianSpectrum, psi: &[C64], t: f64) -> Result<Vec<C64>> {
        if t < 0.0 {
            return Err(Error::Contract(format!("evolution time must be non-negative, got {t}")));
        }
        if psi.len() != spectrum.dim() {
            return Err(Error::Contract("state and spectrum live on different grids".into()));
        }
        let mut c = spectrum.coefficients(psi);
        for (c, e) in c.iter_mut().zip(&spectrum.energies) {
            *c *= C64::from_polar(1.0, -e * t);
        }
        Ok(spectrum.synthesize(&c))
    }

    /// Strang-split propagator. The free Hamiltonian H₀(k) = σ₁k + σ₂p_∥ + σ₃
    /// is exponentiated exactly in momentum space; the field part
    /// v(x) − σ₂a(x) exactly in position space. With the fields off the
    /// scheme is exact for any step.
    pub struct SplitOperator {
        h: Hamiltonian,
        dt: f64,
        /// exp(−i dt/2 [v − aσ₂]) per grid point, row-major 2×2
        half_potential: Vec<[C64; 4]>,
        /// exp(−i dt H₀(k)) per slot, row-major 2×2
        kinetic: Vec<[C64; 4]>,
    }

    fn potential_exponential(v: f64, a: f64, tau: f64) -> [C64; 4] {
        // exp(iaτσ₂) = cos(aτ) + i sin(aτ)σ₂
        let phase = C64::from_polar(1.0, -v * tau);
        let (c, s) = ((a * tau).cos(), (a * tau).sin());
        [phase * c, phase * s, -phase * s, phase * c]
    }

    fn free_exponential(k: f64, p_par: f64, dt: f64) -> [C64; 4] {
        let e = (1.0 + k * k + p_par * p_par).sqrt();
        let (c, s) = ((e * dt).cos(), (e * dt).sin() / e);
        let mi = C64::new(0.0, -1.0);
        // cos(E dt) − i sin(E dt) H₀/E
        [
            C64::new(c, 0.0) + mi * s,
            mi * s * C64::new(k, -p_par),
            mi * s * C64::new(k, p_par),
            C64::new(c, 0.0) - mi * s,
        ]
    }

    impl SplitOperator {
        pub fn new(h: Hamiltonian, dt: f64) -> Result<Self> {
            let bound = h.energy_bound();
            if !(dt > 0.0) || dt * bound > 0.5 {
                return Err(Error::Config {
                    key: "run.dt".into(),
                    msg: format!("dt = {dt} violates dt·|E|max ≤ 0.5 (|E|max ≈ {bound:.3})"),
                });
            }
            let p = h.channel.p_par;
            let half_potential = h.v.iter().zip(&h.q).map(|(&v, &q)| potential_exponential(v, p - q, 0.5 * dt)).collect();
            let kinetic = (0..h.grid.n_points).map(|j| free_exponential(h.grid.k(j), p, dt)).collect();
            Ok(SplitOperator { h, dt, half_potential, kinetic })
        }

        pub fn dt(&self) -> f64 {
            self.dt
        }

        fn potential_half_step(&self, psi: &mut [C64]) {
            let n = self.h.grid.n_points;
            let (up, lo) = psi.split_at_mut(n);
            for j in 0..n {
                let m = &self.half_potential[j];
                let (a, b) = (up[j], lo[j]);
                up[j] = m[0] * a + m[1] * b;
                lo[j] = m[2] * a + m[3] * b;
            }
        }

        fn kinetic_step(&self, psi: &mut [C64]) {
            let n = self.h.grid.n_points;
            let (up, lo) = psi.split_at_mut(n);
            self.h.transform.to_momentum(up);
            self.h.transform.to_momentum(lo);
            for j in 0..n {
                let m = &self.kinetic[j];
                let (a, b) = (up[j], lo[j]);
                up[j] = m[0] * a + m[1] * b;
                lo[j] = m[2] * a + m[3] * b;
            }
            self.h.transform.to_position(up);
            self.h.transform.to_position(lo);
        }

        pub fn step(&self, psi: &mut [C64]) {
            self.potential_half_step(psi);
            self.kinetic_step(psi);
            self.potential_half_step(psi);
        }

        pub fn evolve(&self, psi: &[C64], n_steps: usize) -> Vec<C64> {
            let mut out = psi.to_vec();
            for _ in 0..n_steps {
                self.step(&mut out);
            }
            out
        }
    }

    /// One-shot split-operator evolution from a configuration.
    pub fn evolve_split_operator(cfg: &SimConfig, channel: Channel, psi: &[C64], dt: f64, n_steps: usize) -> Result<Vec<C64>> {
        let prop = SplitOperator::new(Hamiltonian::new(cfg, channel)?, dt)?;
        Ok(prop.evolve(psi, n_steps))
    }

    pub fn norm_sqr(psi: &[C64]) -> f64 {
        psi.iter().map(|c| c.norm_sqr()).sum()
    }

}
