mod common;

use proptest::prelude::*;
use schwinger::observables::{energy_spectrum, ChannelEngine};
use schwinger::units::{Case, Channel};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Unitarity of the propagated vacuum: every negative-energy state ends
    /// up somewhere, and electrons and positrons are created in pairs.
    #[test]
    fn unitarity_and_charge(case in prop_oneof![Just(Case::I), Just(Case::II), Just(Case::III)], p in -1.0f64..1.0, t in 0.5f64..6.0) {
        let cfg = common::tiny(case);
        let engine = ChannelEngine::new(&cfg, Channel::new(p)).unwrap();
        let b = engine.bogoliubov(t);
        let stay = engine.negative_block(t);
        let n = b.g.nrows();
        for j in 0..n {
            let mut col = 0.0;
            for i in 0..n {
                col += b.g[(i, j)].norm_sqr() + stay[(i, j)].norm_sqr();
            }
            prop_assert!((col - 1.0).abs() < 1e-10, "column {j}: {col}");
        }
        let d = engine.spatial_density(t);
        let (ne, np) = (d.electrons(), d.positrons());
        prop_assert!((ne - b.particle_number()).abs() <= 1e-9 * ne.max(1e-12));
        prop_assert!((ne - np).abs() <= 1e-8 * ne.max(1e-12));
        // the energy spectrum redistributes, never loses, occupation
        let m = b.momentum_spectrum();
        prop_assert!((energy_spectrum(&m).total() - m.total()).abs() <= 1e-12 * m.total().max(1.0));
    }
}

#[test]
fn vacuum_before_the_fields_act() {
    let cfg = common::tiny(Case::III);
    let engine = ChannelEngine::new(&cfg, Channel::new(0.6)).unwrap();
    assert!(engine.bogoliubov(0.0).particle_number() < 1e-20);
    assert!(engine.bogoliubov(2.0).particle_number() > 1e-6);
}

#[test]
fn time_filter_reduces_to_the_instantaneous_spectrum() {
    let cfg = common::tiny(Case::II);
    let mut engine = ChannelEngine::new(&cfg, Channel::new(0.2)).unwrap();
    let raw = engine.bogoliubov(4.0).momentum_spectrum();
    let filtered = engine.filtered_momentum_spectrum(4.0, 0.0);
    for (a, b) in raw.occupation.iter().zip(&filtered.occupation) {
        assert!((a - b).abs() < 1e-12);
    }
}
