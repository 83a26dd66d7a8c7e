use wasm_bindgen::prelude::*;

use schwinger::dirac::static_continua;
use schwinger::scattering::{self, StepModel};
use schwinger::units::{Case, Channel, FieldConfiguration};

fn parse_case(case: &str) -> Result<Case, JsError> {
    case.parse::<Case>().map_err(|e| JsError::new(&e.to_string()))
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![a; n];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// Step geometry shared by every plot on the page (natural units).
#[wasm_bindgen]
pub struct Steps {
    e_phi0: f64,
    e_a0: f64,
    l: f64,
}

#[wasm_bindgen]
impl Steps {
    #[wasm_bindgen(constructor)]
    pub fn new(e_phi0: f64, e_a0: f64, l: f64) -> Steps {
        Steps { e_phi0, e_a0, l }
    }

    fn model(&self, case: Case) -> StepModel {
        StepModel { e_phi0: self.e_phi0, delta: if case == Case::I { 0.0 } else { self.e_a0 }, l: self.l }
    }

    /// `n` energies followed by `n` values of T(E).
    pub fn transmission(&self, case: &str, p_par: f64, e_min: f64, e_max: f64, n: usize) -> Result<Vec<f64>, JsError> {
        let case = parse_case(case)?;
        let m = self.model(case);
        let es = linspace(e_min, e_max, n);
        let ts: Vec<f64> = es.iter().map(|&e| scattering::transmission(case, e, p_par, &m)).collect();
        Ok([es, ts].concat())
    }

    /// `[lo, hi]` of the Klein window, empty when it is closed.
    pub fn window(&self, case: &str, p_par: f64) -> Result<Vec<f64>, JsError> {
        let case = parse_case(case)?;
        Ok(scattering::klein_window(case, p_par, &self.model(case)).map_or(vec![], |(a, b)| vec![a, b]))
    }

    /// Positions, then the lower edge of the upper continuum, then the upper
    /// edge of the lower continuum, `n` values each.
    pub fn continua(&self, case: &str, p_par: f64, x_min: f64, x_max: f64, n: usize) -> Result<Vec<f64>, JsError> {
        let case = parse_case(case)?;
        let mut f = FieldConfiguration::reference(case);
        f.e_phi0 = self.e_phi0;
        f.l = self.l;
        f.e_a0 = if case == Case::I { 0.0 } else { self.e_a0 };
        f.x_b = match case {
            Case::I => 0.0,
            Case::II => self.l,
            Case::III => -self.l,
        };
        let xs = linspace(x_min, x_max, n);
        let (up, down) = static_continua(&f, &Channel::new(p_par), &xs);
        Ok([xs, up, down].concat())
    }

    /// `n` channel momenta followed by the rate γ(p_∥) of each channel.
    pub fn rate_profile(&self, case: &str, p_min: f64, p_max: f64, n: usize) -> Result<Vec<f64>, JsError> {
        let case = parse_case(case)?;
        let m = self.model(case);
        let ps = linspace(p_min, p_max, n);
        let mut rates = Vec::with_capacity(n);
        for &p in &ps {
            rates.push(scattering::channel_rate(case, p, &m).map_err(|e| JsError::new(&e.to_string()))?);
        }
        Ok([ps, rates].concat())
    }
}
