//! Constants, unit conversion, configuration and grids.
//!
//! Everything downstream of this module works in natural units
//! (m = c = ħ = 1): energies in mc², momenta in mc, lengths in Compton
//! wavelengths λ_c and times in ħ/mc². Atomic units only appear at the I/O
//! boundary, where configuration values may be given either as plain a.u.
//! numbers or as strings carrying an explicit natural-unit suffix:
//!
//! | suffix | meaning        | example   |
//! |--------|----------------|-----------|
//! | `c2`   | energy, × c²   | `"2.5c2"` |
//! | `c`    | momentum, × c  | `"0.6c"`  |
//! | `lc`   | length, × λ_c  | `"24.5lc"`|
//! | `tc`   | time, × ħ/mc²  | `"50tc"`  |

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in atomic units.
pub const C_AU: f64 = 137.036;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    pub c: f64,
    pub lambda_c: f64,
}

impl PhysicalConstants {
    pub const fn atomic() -> Self {
        PhysicalConstants { c: C_AU, lambda_c: 1.0 / C_AU }
    }

    pub fn energy_unit(&self) -> f64 {
        self.c * self.c
    }

    pub fn momentum_unit(&self) -> f64 {
        self.c
    }

    pub fn length_unit(&self) -> f64 {
        self.lambda_c
    }

    pub fn time_unit(&self) -> f64 {
        1.0 / (self.c * self.c)
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::atomic()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitSystem {
    Atomic,
    Natural,
}

/// Physical dimension of a configurable quantity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dimension {
    Energy,
    Momentum,
    Length,
    Time,
}

impl Dimension {
    fn suffix(self) -> &'static str {
        match self {
            Dimension::Energy => "c2",
            Dimension::Momentum => "c",
            Dimension::Length => "lc",
            Dimension::Time => "tc",
        }
    }

    /// Size of one natural unit of this dimension, expressed in a.u.
    pub fn natural_in_atomic(self, k: &PhysicalConstants) -> f64 {
        match self {
            Dimension::Energy => k.energy_unit(),
            Dimension::Momentum => k.momentum_unit(),
            Dimension::Length => k.length_unit(),
            Dimension::Time => k.time_unit(),
        }
    }

    pub fn to_natural(self, value_au: f64, k: &PhysicalConstants) -> f64 {
        match self {
            // lengths and times: dividing by a reciprocal loses a bit more than
            // multiplying by c directly
            Dimension::Length => value_au * k.c,
            Dimension::Time => value_au * k.c * k.c,
            _ => value_au / self.natural_in_atomic(k),
        }
    }

    pub fn to_atomic(self, value_nat: f64, k: &PhysicalConstants) -> f64 {
        match self {
            Dimension::Length => value_nat / k.c,
            Dimension::Time => value_nat / (k.c * k.c),
            _ => value_nat * self.natural_in_atomic(k),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Case {
    I,
    II,
    III,
}

impl Case {
    pub const ALL: [Case; 3] = [Case::I, Case::II, Case::III];

    pub fn as_str(self) -> &'static str {
        match self {
            Case::I => "I",
            Case::II => "II",
            Case::III => "III",
        }
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Case {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(Case::I),
            "II" | "2" => Ok(Case::II),
            "III" | "3" => Ok(Case::III),
            other => Err(Error::config("fields.case", format!("unknown case `{other}` (expected I, II or III)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    Tanh,
    SharpStep,
}

/// Static field geometry. `e_phi0` and `e_a0` are the products eφ₀, eA₀ as
/// energies; the vector-potential step sits at `x_b`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldConfiguration {
    pub case: Case,
    pub e_phi0: f64,
    pub e_a0: f64,
    pub w_v: f64,
    pub w_a: f64,
    pub x_b: f64,
    pub l: f64,
    pub profile: ProfileKind,
    pub units: UnitSystem,
}

impl FieldConfiguration {
    /// The geometry used throughout the reference study, in natural units:
    /// eφ₀ = 2.5, eA₀ = 0.6, W_v = W_a = 0.1, L = 24.5.
    pub fn reference(case: Case) -> Self {
        let l = 24.5;
        let (e_a0, x_b) = match case {
            Case::I => (0.0, 0.0),
            Case::II => (0.6, l),
            Case::III => (0.6, -l),
        };
        FieldConfiguration {
            case,
            e_phi0: 2.5,
            e_a0,
            w_v: 0.1,
            w_a: 0.1,
            x_b,
            l,
            profile: ProfileKind::Tanh,
            units: UnitSystem::Natural,
        }
    }

    pub fn with_profile(mut self, profile: ProfileKind) -> Self {
        self.profile = profile;
        self
    }

    fn fields(&self) -> [(&'static str, f64, Dimension); 6] {
        [
            ("fields.e_phi0", self.e_phi0, Dimension::Energy),
            ("fields.e_a0", self.e_a0, Dimension::Energy),
            ("fields.w_v", self.w_v, Dimension::Length),
            ("fields.w_a", self.w_a, Dimension::Length),
            ("fields.x_b", self.x_b, Dimension::Length),
            ("fields.L", self.l, Dimension::Length),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (key, value, _) in self.fields() {
            if !value.is_finite() {
                return Err(Error::config(key, "value is not finite"));
            }
        }
        if self.profile == ProfileKind::Tanh {
            if self.w_v <= 0.0 {
                return Err(Error::config("fields.w_v", "width must be positive for tanh profiles"));
            }
            if self.w_a <= 0.0 {
                return Err(Error::config("fields.w_a", "width must be positive for tanh profiles"));
            }
        }
        if self.e_phi0 <= 0.0 {
            return Err(Error::config("fields.e_phi0", "scalar step must be positive"));
        }
        if self.l < 0.0 {
            return Err(Error::config("fields.L", "separation must be non-negative"));
        }
        let tol = 1e-12 * self.l.abs().max(1.0);
        match self.case {
            Case::I => {
                if self.e_a0 != 0.0 {
                    return Err(Error::config("fields.e_a0", "Case I requires e_a0 = 0"));
                }
            }
            Case::II => {
                if (self.x_b - self.l).abs() > tol {
                    return Err(Error::config("fields.x_b", "Case II requires x_b = +L"));
                }
            }
            Case::III => {
                if (self.x_b + self.l).abs() > tol {
                    return Err(Error::config("fields.x_b", "Case III requires x_b = -L"));
                }
            }
        }
        let two_mc2 = match self.units {
            UnitSystem::Natural => 2.0,
            UnitSystem::Atomic => 2.0 * PhysicalConstants::atomic().energy_unit(),
        };
        if self.e_phi0 <= two_mc2 {
            return Err(Error::config("fields.e_phi0", "scalar step must exceed 2mc² for a non-empty Klein region"));
        }
        Ok(())
    }

    fn map(&self, f: impl Fn(Dimension, f64) -> f64, units: UnitSystem) -> Result<Self> {
        for (key, value, _) in self.fields() {
            if !value.is_finite() {
                return Err(Error::config(key, "value is not finite"));
            }
        }
        Ok(FieldConfiguration {
            e_phi0: f(Dimension::Energy, self.e_phi0),
            e_a0: f(Dimension::Energy, self.e_a0),
            w_v: f(Dimension::Length, self.w_v),
            w_a: f(Dimension::Length, self.w_a),
            x_b: f(Dimension::Length, self.x_b),
            l: f(Dimension::Length, self.l),
            units,
            ..*self
        })
    }

    pub fn to_natural_units(&self, k: &PhysicalConstants) -> Result<Self> {
        match self.units {
            UnitSystem::Natural => self.map(|_, v| v, UnitSystem::Natural),
            UnitSystem::Atomic => self.map(|d, v| d.to_natural(v, k), UnitSystem::Natural),
        }
    }

    pub fn to_atomic_units(&self, k: &PhysicalConstants) -> Result<Self> {
        match self.units {
            UnitSystem::Atomic => self.map(|_, v| v, UnitSystem::Atomic),
            UnitSystem::Natural => self.map(|d, v| d.to_atomic(v, k), UnitSystem::Atomic),
        }
    }

    /// Kinetic-momentum shift across the vector step (Δ = eA₀/c; in natural
    /// units numerically equal to `e_a0`).
    pub fn momentum_shift(&self) -> f64 {
        debug_assert_eq!(self.units, UnitSystem::Natural);
        self.e_a0
    }

    pub fn scalar_potential(&self, x: f64) -> f64 {
        self.e_phi0 * step(x, self.w_v, self.profile)
    }

    pub fn vector_potential(&self, x: f64) -> f64 {
        if self.e_a0 == 0.0 {
            return 0.0;
        }
        self.e_a0 * step(x - self.x_b, self.w_a, self.profile)
    }

    /// `(eφ(x), eA_y(x))` as energies in the configuration's unit system.
    pub fn field_profiles(&self, x: f64) -> (f64, f64) {
        (self.scalar_potential(x), self.vector_potential(x))
    }
}

fn step(x: f64, width: f64, kind: ProfileKind) -> f64 {
    match kind {
        ProfileKind::Tanh => 0.5 * (1.0 + (x / width).tanh()),
        ProfileKind::SharpStep => {
            if x > 0.0 {
                1.0
            } else if x < 0.0 {
                0.0
            } else {
                0.5
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Spin {
    Up,
    Down,
}

/// One reduced 1+1D problem: fixed conserved momentum along the vector
/// potential and a spin label (which the dynamics ignore).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub p_par: f64,
    pub spin: Spin,
}

impl Channel {
    pub fn new(p_par: f64) -> Self {
        Channel { p_par, spin: Spin::Up }
    }

    pub fn with_spin(mut self, spin: Spin) -> Self {
        self.spin = spin;
        self
    }

    pub fn label(&self) -> String {
        let s = match self.spin {
            Spin::Up => "+",
            Spin::Down => "-",
        };
        format!("p_par={:+.6}/spin{s}", self.p_par)
    }
}

/// Periodic grid of `n_points` cell-centred samples on
/// `[-box_length/2, box_length/2)`, natural units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub n_points: usize,
    pub box_length: f64,
}

impl Grid1D {
    pub fn new(n_points: usize, box_length: f64) -> Result<Self> {
        let g = Grid1D { n_points, box_length };
        g.validate()?;
        Ok(g)
    }

    pub fn desk() -> Self {
        Grid1D { n_points: 1024, box_length: 200.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_points < 4 || !self.n_points.is_power_of_two() {
            return Err(Error::config("grid.n_points", format!("{} is not a power of two ≥ 4", self.n_points)));
        }
        if !(self.box_length.is_finite() && self.box_length > 0.0) {
            return Err(Error::config("grid.box_length", "must be finite and positive"));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        self.box_length / self.n_points as f64
    }

    pub fn dk(&self) -> f64 {
        2.0 * PI / self.box_length
    }

    pub fn k_max(&self) -> f64 {
        PI / self.dx()
    }

    pub fn x(&self, j: usize) -> f64 {
        -0.5 * self.box_length + (j as f64 + 0.5) * self.dx()
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.n_points).map(|j| self.x(j)).collect()
    }

    /// Lattice momentum of FFT slot `j` (0, dk, …, (N/2−1)dk, −(N/2)dk, …, −dk).
    pub fn k(&self, j: usize) -> f64 {
        let n = self.n_points as i64;
        let j = j as i64;
        let m = if j < n / 2 { j } else { j - n };
        m as f64 * self.dk()
    }

    pub fn momenta(&self) -> Vec<f64> {
        (0..self.n_points).map(|j| self.k(j)).collect()
    }

    /// FFT slots ordered by increasing momentum.
    pub fn sorted_slots(&self) -> Vec<usize> {
        let n = self.n_points;
        (n / 2..n).chain(0..n / 2).collect()
    }

    /// Largest perpendicular momentum a created electron can carry for the
    /// given scalar step (top of the Klein window at p_∥ = 0).
    pub fn klein_momentum_max(e_phi0: f64) -> f64 {
        let e = e_phi0 - 1.0;
        (e * e - 1.0).max(0.0).sqrt()
    }

    pub fn check_cutoff(&self, fields: &FieldConfiguration) -> Result<()> {
        let need = 5.0 * Self::klein_momentum_max(fields.e_phi0);
        if self.k_max() < need {
            return Err(Error::config(
                "grid.n_points",
                format!("momentum cutoff π/dx = {:.4} is below 5·p_⊥,max = {need:.4}", self.k_max()),
            ));
        }
        Ok(())
    }
}

/// Time-domain controls, natural units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunControls {
    /// Simulated horizon.
    pub t_max: f64,
    /// Split-operator step.
    pub dt: f64,
    /// Spacing of the particle-number series.
    pub sample_dt: f64,
    /// Rate-fit window; excludes the switch-on transient.
    pub fit_window: (f64, f64),
    /// Width of the Gaussian time filter applied before rate fits (0 = none).
    pub smoothing: f64,
    /// Times at which full momentum spectra are stored.
    pub snapshots: Vec<f64>,
    /// Fraction of the box over which the fields are ramped back to zero
    /// so that the periodic wrap carries no second step.
    pub ramp_fraction: f64,
}

impl RunControls {
    pub fn desk() -> Self {
        RunControls {
            t_max: 50.0,
            dt: 0.025,
            sample_dt: 0.25,
            fit_window: (10.0, 50.0),
            smoothing: 2.0,
            snapshots: vec![10.0, 20.0, 30.0, 40.0, 50.0],
            ramp_fraction: 0.2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepControls {
    pub cases: Vec<Case>,
    pub p_min: f64,
    pub p_max: f64,
    pub count: usize,
    /// Transverse normalisation weight used for absolute totals.
    pub weight: f64,
}

impl SweepControls {
    pub fn p_grid(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.p_min];
        }
        let h = (self.p_max - self.p_min) / (self.count - 1) as f64;
        (0..self.count).map(|i| self.p_min + h * i as f64).collect()
    }
}

impl Default for SweepControls {
    fn default() -> Self {
        SweepControls { cases: vec![], p_min: -1.5, p_max: 1.5, count: 21, weight: 1.0 }
    }
}

/// A fully validated run configuration in natural units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub fields: FieldConfiguration,
    pub grid: Grid1D,
    pub run: RunControls,
    pub sweep: SweepControls,
}

impl SimConfig {
    pub fn desk(case: Case) -> Self {
        SimConfig {
            fields: FieldConfiguration::reference(case),
            grid: Grid1D::desk(),
            run: RunControls::desk(),
            sweep: SweepControls { cases: vec![case], ..SweepControls::default() },
        }
    }

    /// The same run with the field geometry switched to `case`: the vector
    /// step is dropped for Case I and moved to ±L otherwise.
    pub fn for_case(&self, case: Case) -> Result<SimConfig> {
        let mut out = self.clone();
        let f = &mut out.fields;
        f.case = case;
        match case {
            Case::I => {
                f.e_a0 = 0.0;
                f.x_b = 0.0;
            }
            Case::II | Case::III => {
                if f.e_a0 == 0.0 {
                    return Err(Error::config(
                        "fields.e_a0",
                        format!("Case {case} needs a non-zero vector step; set e_a0 and L in the base config"),
                    ));
                }
                f.x_b = if case == Case::II { f.l } else { -f.l };
            }
        }
        out.sweep.cases = vec![case];
        out.validate()?;
        Ok(out)
    }

    pub fn ramp_length(&self) -> f64 {
        self.run.ramp_fraction * self.grid.box_length
    }

    pub fn validate(&self) -> Result<()> {
        self.fields.validate()?;
        if self.fields.units != UnitSystem::Natural {
            return Err(Error::config("fields", "simulation configs are stored in natural units"));
        }
        self.grid.validate()?;
        self.grid.check_cutoff(&self.fields)?;
        let r = &self.run;
        if !(r.t_max.is_finite() && r.t_max > 0.0) {
            return Err(Error::config("run.t_max", "must be positive"));
        }
        if !(r.dt > 0.0) {
            return Err(Error::config("run.dt", "must be positive"));
        }
        if !(r.sample_dt > 0.0) {
            return Err(Error::config("run.sample_dt", "must be positive"));
        }
        let (t0, t1) = r.fit_window;
        if !(0.0 <= t0 && t0 < t1 && t1 <= r.t_max) {
            return Err(Error::config("run.fit_window", format!("[{t0}, {t1}] must lie inside [0, t_max]")));
        }
        if r.smoothing < 0.0 {
            return Err(Error::config("run.smoothing", "must be non-negative"));
        }
        if let Some(t) = r.snapshots.iter().find(|t| !(0.0..=r.t_max).contains(*t)) {
            return Err(Error::config("run.snapshots", format!("snapshot t = {t} outside [0, t_max]")));
        }
        if !(0.0..0.5).contains(&r.ramp_fraction) {
            return Err(Error::config("run.ramp_fraction", "must lie in [0, 0.5)"));
        }
        let reach = self.fields.x_b.abs();
        let need = 2.0 * (r.t_max + reach) + 10.0;
        if self.grid.box_length < need {
            return Err(Error::config(
                "grid.box_length",
                format!("box {} too small for horizon {}: need ≥ 2(t_max + |x_B|) + 10 = {need}", self.grid.box_length, r.t_max),
            ));
        }
        // Anything reflected off the return ramp must not get back to the
        // step region within the horizon, and the ramp must not touch the
        // vector step.
        let ramp_start = 0.5 * self.grid.box_length - self.ramp_length();
        let width = self.fields.w_v.max(self.fields.w_a);
        if 2.0 * ramp_start < r.t_max + 10.0 || ramp_start < reach + 10.0 * width + 5.0 {
            return Err(Error::config(
                "run.ramp_fraction",
                format!("return ramp starts at x = {ramp_start}, too close to the steps for horizon {}", r.t_max),
            ));
        }
        let s = &self.sweep;
        if s.count == 0 {
            return Err(Error::config("sweep.count", "must be at least 1"));
        }
        if s.count > 1 && !(s.p_max > s.p_min) {
            return Err(Error::config("sweep.p_max", "must exceed sweep.p_min"));
        }
        if !(s.weight > 0.0) {
            return Err(Error::config("sweep.weight", "must be positive"));
        }
        Ok(())
    }

    /// Envelope that switches the fields off smoothly over the last
    /// `ramp_fraction` of the box (raised cosine).
    pub fn envelope(&self, x: f64) -> f64 {
        let ramp = self.ramp_length();
        if ramp <= 0.0 {
            return 1.0;
        }
        let x0 = 0.5 * self.grid.box_length - ramp;
        if x < x0 {
            1.0
        } else {
            let s = ((x - x0) / ramp).min(1.0);
            0.5 * (1.0 + (PI * s).cos())
        }
    }

    /// `(v(x), a(x))` as actually sampled on the periodic grid.
    pub fn potentials(&self, x: f64) -> (f64, f64) {
        let env = self.envelope(x);
        let (v, a) = self.fields.field_profiles(x);
        (v * env, a * env)
    }
}

// ---------------------------------------------------------------------------
// Configuration document
// ---------------------------------------------------------------------------

const SECTIONS: [(&str, &[&str]); 4] = [
    ("fields", &["case", "e_phi0", "e_a0", "w_v", "w_a", "x_b", "L", "profile"]),
    ("grid", &["n_points", "box_length"]),
    ("run", &["t_max", "dt", "sample_dt", "fit_window", "smoothing", "snapshots", "ramp_fraction"]),
    ("sweep", &["cases", "p_min", "p_max", "count", "weight"]),
];

const MANDATORY: [&str; 2] = ["fields.case", "fields.e_phi0"];

fn quantity(key: &str, v: &toml::Value, dim: Dimension, k: &PhysicalConstants) -> Result<f64> {
    let value = match v {
        toml::Value::Float(f) => dim.to_natural(*f, k),
        toml::Value::Integer(i) => dim.to_natural(*i as f64, k),
        toml::Value::String(s) => {
            let s = s.trim();
            let body = s.strip_suffix(dim.suffix()).ok_or_else(|| {
                Error::config(key, format!("`{s}` must be a number (a.u.) or end in `{}`", dim.suffix()))
            })?;
            // `c` is a suffix of `lc`/`tc`; make sure the remainder is numeric
            body.trim()
                .parse::<f64>()
                .map_err(|_| Error::config(key, format!("`{s}` is not a number followed by `{}`", dim.suffix())))?
        }
        _ => return Err(Error::config(key, "expected a number or a suffixed string")),
    };
    if !value.is_finite() {
        return Err(Error::config(key, "value is not finite"));
    }
    Ok(value)
}

fn plain_number(key: &str, v: &toml::Value) -> Result<f64> {
    match v {
        toml::Value::Float(f) => Ok(*f),
        toml::Value::Integer(i) => Ok(*i as f64),
        _ => Err(Error::config(key, "expected a number")),
    }
}

/// Parse a TOML configuration document into a validated [`SimConfig`].
pub fn parse_config(text: &str) -> Result<SimConfig> {
    let k = PhysicalConstants::atomic();
    let doc: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::config("<document>", e.message().to_string()))?;

    for (name, value) in &doc {
        let Some((_, allowed)) = SECTIONS.iter().find(|(s, _)| s == name) else {
            return Err(Error::config(name.clone(), "unknown section"));
        };
        let table = value.as_table().ok_or_else(|| Error::config(name.clone(), "expected a table"))?;
        for key in table.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(Error::config(format!("{name}.{key}"), "unknown key"));
            }
        }
    }
    let empty = toml::Table::new();
    let section = |name: &str| doc.get(name).and_then(|v| v.as_table()).unwrap_or(&empty);
    let fields = section("fields");

    let missing: Vec<&str> = MANDATORY
        .iter()
        .copied()
        .filter(|path| {
            let (s, key) = path.split_once('.').unwrap();
            !section(s).contains_key(key)
        })
        .collect();
    if !missing.is_empty() {
        return Err(Error::config(missing.join(", "), "missing mandatory key(s)"));
    }

    let case: Case = fields["case"].as_str().ok_or_else(|| Error::config("fields.case", "expected a string"))?.parse()?;
    let get = |key: &str, dim: Dimension| -> Result<Option<f64>> {
        fields.get(key).map(|v| quantity(&format!("fields.{key}"), v, dim, &k)).transpose()
    };
    let e_phi0 = get("e_phi0", Dimension::Energy)?.unwrap();
    let e_a0 = get("e_a0", Dimension::Energy)?;
    let l = get("L", Dimension::Length)?;
    if case != Case::I {
        let mut miss = vec![];
        if e_a0.is_none() {
            miss.push("fields.e_a0");
        }
        if l.is_none() {
            miss.push("fields.L");
        }
        if !miss.is_empty() {
            return Err(Error::config(miss.join(", "), format!("mandatory for Case {case}")));
        }
    }
    let l = l.unwrap_or(0.0);
    let x_b = get("x_b", Dimension::Length)?.unwrap_or(match case {
        Case::I => 0.0,
        Case::II => l,
        Case::III => -l,
    });
    let profile = match fields.get("profile") {
        None => ProfileKind::Tanh,
        Some(v) => match v.as_str() {
            Some("tanh") => ProfileKind::Tanh,
            Some("sharp-step") => ProfileKind::SharpStep,
            _ => return Err(Error::config("fields.profile", "expected \"tanh\" or \"sharp-step\"")),
        },
    };
    let field_cfg = FieldConfiguration {
        case,
        e_phi0,
        e_a0: e_a0.unwrap_or(0.0),
        w_v: get("w_v", Dimension::Length)?.unwrap_or(0.1),
        w_a: get("w_a", Dimension::Length)?.unwrap_or(0.1),
        x_b,
        l,
        profile,
        units: UnitSystem::Natural,
    };

    let grid_t = section("grid");
    let mut grid = Grid1D::desk();
    if let Some(v) = grid_t.get("n_points") {
        let n = v.as_integer().filter(|n| *n > 0).ok_or_else(|| Error::config("grid.n_points", "expected a positive integer"))?;
        grid.n_points = n as usize;
    }
    if let Some(v) = grid_t.get("box_length") {
        grid.box_length = quantity("grid.box_length", v, Dimension::Length, &k)?;
    }

    let run_t = section("run");
    let mut run = RunControls::desk();
    let time = |key: &str| -> Result<Option<f64>> {
        run_t.get(key).map(|v| quantity(&format!("run.{key}"), v, Dimension::Time, &k)).transpose()
    };
    if let Some(t) = time("t_max")? {
        run.t_max = t;
        // keep the default window/snapshots consistent with a changed horizon
        run.fit_window = (run.fit_window.0.min(0.2 * t), t);
        run.snapshots = (1..=5).map(|i| t * i as f64 / 5.0).collect();
    }
    if let Some(t) = time("dt")? {
        run.dt = t;
    }
    if let Some(t) = time("sample_dt")? {
        run.sample_dt = t;
    }
    if let Some(t) = time("smoothing")? {
        run.smoothing = t;
    }
    if let Some(v) = run_t.get("fit_window") {
        let arr = v.as_array().filter(|a| a.len() == 2).ok_or_else(|| Error::config("run.fit_window", "expected [t0, t1]"))?;
        run.fit_window = (
            quantity("run.fit_window[0]", &arr[0], Dimension::Time, &k)?,
            quantity("run.fit_window[1]", &arr[1], Dimension::Time, &k)?,
        );
    }
    if let Some(v) = run_t.get("snapshots") {
        let arr = v.as_array().ok_or_else(|| Error::config("run.snapshots", "expected an array"))?;
        run.snapshots = arr
            .iter()
            .enumerate()
            .map(|(i, v)| quantity(&format!("run.snapshots[{i}]"), v, Dimension::Time, &k))
            .collect::<Result<_>>()?;
    }
    if let Some(v) = run_t.get("ramp_fraction") {
        run.ramp_fraction = plain_number("run.ramp_fraction", v)?;
    }

    let sweep_t = section("sweep");
    let mut sweep = SweepControls { cases: vec![case], ..SweepControls::default() };
    if let Some(v) = sweep_t.get("cases") {
        let arr = v.as_array().ok_or_else(|| Error::config("sweep.cases", "expected an array of case tags"))?;
        sweep.cases = arr
            .iter()
            .map(|c| c.as_str().ok_or_else(|| Error::config("sweep.cases", "expected strings")).and_then(str::parse))
            .collect::<Result<_>>()?;
    }
    if let Some(v) = sweep_t.get("p_min") {
        sweep.p_min = quantity("sweep.p_min", v, Dimension::Momentum, &k)?;
    }
    if let Some(v) = sweep_t.get("p_max") {
        sweep.p_max = quantity("sweep.p_max", v, Dimension::Momentum, &k)?;
    }
    if let Some(v) = sweep_t.get("count") {
        let n = v.as_integer().filter(|n| *n > 0).ok_or_else(|| Error::config("sweep.count", "expected a positive integer"))?;
        sweep.count = n as usize;
    }
    if let Some(v) = sweep_t.get("weight") {
        sweep.weight = plain_number("sweep.weight", v)?;
    }

    let cfg = SimConfig { fields: field_cfg, grid, run, sweep };
    cfg.validate()?;
    Ok(cfg)
}

fn suffixed(value: f64, dim: Dimension) -> String {
    format!("\"{value:?}{}\"", dim.suffix())
}

/// Serialise back to the document format. Values are written in natural
/// units with explicit suffixes so that parsing the output is lossless.
pub fn to_config_document(cfg: &SimConfig) -> String {
    use std::fmt::Write;
    let f = &cfg.fields;
    let r = &cfg.run;
    let s = &cfg.sweep;
    let profile = match f.profile {
        ProfileKind::Tanh => "tanh",
        ProfileKind::SharpStep => "sharp-step",
    };
    let mut out = String::new();
    let _ = writeln!(out, "[fields]");
    let _ = writeln!(out, "case = \"{}\"", f.case);
    let _ = writeln!(out, "e_phi0 = {}", suffixed(f.e_phi0, Dimension::Energy));
    let _ = writeln!(out, "e_a0 = {}", suffixed(f.e_a0, Dimension::Energy));
    let _ = writeln!(out, "w_v = {}", suffixed(f.w_v, Dimension::Length));
    let _ = writeln!(out, "w_a = {}", suffixed(f.w_a, Dimension::Length));
    let _ = writeln!(out, "x_b = {}", suffixed(f.x_b, Dimension::Length));
    let _ = writeln!(out, "L = {}", suffixed(f.l, Dimension::Length));
    let _ = writeln!(out, "profile = \"{profile}\"");
    let _ = writeln!(out, "\n[grid]");
    let _ = writeln!(out, "n_points = {}", cfg.grid.n_points);
    let _ = writeln!(out, "box_length = {}", suffixed(cfg.grid.box_length, Dimension::Length));
    let _ = writeln!(out, "\n[run]");
    let _ = writeln!(out, "t_max = {}", suffixed(r.t_max, Dimension::Time));
    let _ = writeln!(out, "dt = {}", suffixed(r.dt, Dimension::Time));
    let _ = writeln!(out, "sample_dt = {}", suffixed(r.sample_dt, Dimension::Time));
    let _ = writeln!(
        out,
        "fit_window = [{}, {}]",
        suffixed(r.fit_window.0, Dimension::Time),
        suffixed(r.fit_window.1, Dimension::Time)
    );
    let _ = writeln!(out, "smoothing = {}", suffixed(r.smoothing, Dimension::Time));
    let snaps: Vec<String> = r.snapshots.iter().map(|t| suffixed(*t, Dimension::Time)).collect();
    let _ = writeln!(out, "snapshots = [{}]", snaps.join(", "));
    let _ = writeln!(out, "ramp_fraction = {:?}", r.ramp_fraction);
    let _ = writeln!(out, "\n[sweep]");
    let cases: Vec<String> = s.cases.iter().map(|c| format!("\"{c}\"")).collect();
    let _ = writeln!(out, "cases = [{}]", cases.join(", "));
    let _ = writeln!(out, "p_min = {}", suffixed(s.p_min, Dimension::Momentum));
    let _ = writeln!(out, "p_max = {}", suffixed(s.p_max, Dimension::Momentum));
    let _ = writeln!(out, "count = {}", s.count);
    let _ = writeln!(out, "weight = {:?}", s.weight);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const K: PhysicalConstants = PhysicalConstants::atomic();

    #[test]
    fn compton_length_times_c_is_one() {
        assert_eq!(K.lambda_c * K.c, 1.0);
    }

    #[test]
    fn reference_values_convert_to_natural() {
        let au = FieldConfiguration {
            e_phi0: 2.5 * K.c * K.c,
            e_a0: 0.6 * K.c * K.c,
            w_v: 0.1 / K.c,
            w_a: 0.1 / K.c,
            x_b: 24.5 / K.c,
            l: 24.5 / K.c,
            units: UnitSystem::Atomic,
            ..FieldConfiguration::reference(Case::II)
        };
        let nat = au.to_natural_units(&K).unwrap();
        assert!((nat.e_phi0 - 2.5).abs() < 1e-14);
        assert!((nat.x_b - 24.5).abs() < 1e-13);
        assert_eq!(Dimension::Time.to_natural(0.0, &K), 0.0);
        let back = nat.to_atomic_units(&K).unwrap();
        for (a, b) in [(au.e_phi0, back.e_phi0), (au.x_b, back.x_b), (au.w_a, back.w_a)] {
            assert!(((a - b) / a).abs() <= 1e-14);
        }
    }

    #[test]
    fn non_finite_input_names_the_field() {
        let mut f = FieldConfiguration::reference(Case::I);
        f.w_v = f64::NAN;
        match f.to_natural_units(&K) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "fields.w_v"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn profiles_asymptotics() {
        let f = FieldConfiguration::reference(Case::II);
        assert_eq!(f.scalar_potential(-50.0), 0.0);
        assert_eq!(f.scalar_potential(50.0), 2.5);
        assert_eq!(f.scalar_potential(0.0), 1.25);
        assert_eq!(f.vector_potential(24.5), 0.3);
        let s = f.with_profile(ProfileKind::SharpStep);
        assert_eq!(s.scalar_potential(-1e-9), 0.0);
        assert_eq!(s.scalar_potential(1e-9), 2.5);
    }

    #[test]
    fn minimal_document_fills_defaults() {
        let cfg = parse_config("[fields]\ncase = \"I\"\ne_phi0 = \"2.5c2\"\n").unwrap();
        assert_eq!(cfg.fields.w_v, 0.1);
        assert_eq!(cfg.fields.e_phi0, 2.5);
        assert_eq!(cfg.grid, Grid1D::desk());
    }

    #[test]
    fn atomic_unit_numbers_are_accepted() {
        let c2 = C_AU * C_AU;
        let doc = format!("[fields]\ncase = \"I\"\ne_phi0 = {}\n", 2.5 * c2);
        let cfg = parse_config(&doc).unwrap();
        assert!((cfg.fields.e_phi0 - 2.5).abs() < 1e-14);
    }

    #[test]
    fn wrong_vector_step_side_is_rejected() {
        let doc = "[fields]\ncase = \"II\"\ne_phi0 = \"2.5c2\"\ne_a0 = \"0.6c2\"\nL = \"24.5lc\"\nx_b = \"-24.5lc\"\n";
        match parse_config(doc) {
            Err(Error::Config { key, msg }) => {
                assert_eq!(key, "fields.x_b");
                assert!(msg.contains("+L"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn case_one_with_vector_potential_is_rejected() {
        let doc = "[fields]\ncase = \"I\"\ne_phi0 = \"2.5c2\"\ne_a0 = \"0.6c2\"\n";
        assert!(matches!(parse_config(doc), Err(Error::Config { key, .. }) if key == "fields.e_a0"));
    }

    #[test]
    fn empty_document_lists_mandatory_keys() {
        match parse_config("") {
            Err(Error::Config { key, .. }) => {
                for m in MANDATORY {
                    assert!(key.contains(m), "{key} lacks {m}");
                }
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let doc = "[fields]\ncase = \"I\"\ne_phi0 = \"2.5c2\"\nphi = 3\n";
        assert!(matches!(parse_config(doc), Err(Error::Config { key, .. }) if key == "fields.phi"));
        assert!(matches!(parse_config("[misc]\n"), Err(Error::Config { key, .. }) if key == "misc"));
    }

    #[test]
    fn suffix_must_match_dimension() {
        let doc = "[fields]\ncase = \"I\"\ne_phi0 = \"2.5lc\"\n";
        assert!(parse_config(doc).is_err());
    }

    #[test]
    fn undersized_box_is_a_validation_error() {
        let doc = "[fields]\ncase = \"I\"\ne_phi0 = \"2.5c2\"\n[run]\nt_max = \"120tc\"\n";
        assert!(matches!(parse_config(doc), Err(Error::Config { key, .. }) if key == "grid.box_length"));
    }

    #[test]
    fn coarse_grid_violates_cutoff() {
        let g = Grid1D::new(64, 200.0).unwrap();
        assert!(g.check_cutoff(&FieldConfiguration::reference(Case::I)).is_err());
        assert!(Grid1D::desk().check_cutoff(&FieldConfiguration::reference(Case::I)).is_ok());
    }

    #[test]
    fn grid_is_cell_centred_and_fft_ordered() {
        let g = Grid1D::new(8, 8.0).unwrap();
        assert_eq!(g.positions(), vec![-3.5, -2.5, -1.5, -0.5, 0.5, 1.5, 2.5, 3.5]);
        let dk = g.dk();
        let ks: Vec<f64> = g.momenta().iter().map(|k| k / dk).collect();
        assert_eq!(ks, vec![0.0, 1.0, 2.0, 3.0, -4.0, -3.0, -2.0, -1.0]);
        let sorted: Vec<f64> = g.sorted_slots().iter().map(|&j| g.k(j) / dk).collect();
        assert_eq!(sorted, vec![-4.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn envelope_switches_off_at_the_wrap() {
        let cfg = SimConfig::desk(Case::I);
        assert_eq!(cfg.envelope(0.0), 1.0);
        assert_eq!(cfg.envelope(59.9), 1.0);
        assert!(cfg.envelope(99.99) < 1e-6);
    }
}
