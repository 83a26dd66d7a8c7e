#![allow(dead_code)]

use schwinger::units::{Case, Grid1D, SimConfig};

/// A sweep small enough to run many times per test: 64 points, short
/// horizon, steps 3 apart.
pub fn tiny(case: Case) -> SimConfig {
    let mut cfg = SimConfig::desk(case);
    cfg.fields.l = 3.0;
    cfg.fields.x_b = match case {
        Case::I => 0.0,
        Case::II => 3.0,
        Case::III => -3.0,
    };
    cfg.grid = Grid1D::new(64, 32.0).unwrap();
    cfg.run.t_max = 6.0;
    cfg.run.fit_window = (2.0, 6.0);
    cfg.run.smoothing = 0.0;
    cfg.run.snapshots = vec![3.0, 6.0];
    cfg.sweep.p_min = -0.8;
    cfg.sweep.p_max = 0.8;
    cfg.sweep.count = 5;
    cfg.validate().unwrap();
    cfg
}
