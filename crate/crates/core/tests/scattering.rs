use proptest::prelude::*;
use schwinger::scattering::*;
use schwinger::units::Case;

fn case() -> impl Strategy<Value = Case> {
    prop_oneof![Just(Case::I), Just(Case::II), Just(Case::III)]
}

fn model() -> impl Strategy<Value = StepModel> {
    (2.1f64..4.0, 0.05f64..1.0, 1.0f64..40.0).prop_map(|(e_phi0, delta, l)| StepModel { e_phi0, delta, l })
}

/// A point strictly inside the Klein window, if the window is open.
fn inside(case: Case, p: f64, m: &StepModel, u: f64) -> Option<f64> {
    let (lo, hi) = klein_window(case, p, m)?;
    (hi - lo > 1e-6).then(|| lo + (hi - lo) * (0.001 + 0.998 * u))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn flux_is_conserved(case in case(), m in model(), p in -1.5f64..1.5, u in 0.0f64..1.0) {
        let Some(e) = inside(case, p, &m, u) else { return Ok(()) };
        let s = match_solve(case, e, p, &m).unwrap();
        prop_assert!((s.reflection + s.transmission - 1.0).abs() < 1e-9, "R + T = {}", s.reflection + s.transmission);
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&s.transmission));
    }

    #[test]
    fn closed_form_agrees_with_linear_solve(case in case(), m in model(), p in -1.5f64..1.5, u in 0.0f64..1.0) {
        let Some(e) = inside(case, p, &m, u) else { return Ok(()) };
        let solved = match_solve(case, e, p, &m).unwrap().transmission;
        let closed = transmission_closed_form(&kinematics(case, e, p, &m));
        prop_assert!((solved - closed).abs() <= 1e-8 * solved.abs().max(1e-3), "{solved} vs {closed}");
    }

    #[test]
    fn windows_are_ordered_and_nested(m in model(), p in -1.5f64..1.5) {
        let s = |q: f64| (1.0 + q * q).sqrt();
        if let Some((lo, hi)) = klein_window(Case::I, p, &m) {
            prop_assert!(lo < hi);
            prop_assert_eq!((lo, hi), (s(p), m.e_phi0 - s(p)));
        }
        // the incoming wave must propagate at p_∥, the transmitted one at p_∥ − Δ
        let d = m.delta;
        for case in [Case::II, Case::III] {
            if let Some((lo, hi)) = klein_window(case, p, &m) {
                prop_assert!(lo < hi);
                prop_assert!(lo >= s(p) - 1e-12);
                prop_assert!(hi <= m.e_phi0 - s(p - d) + 1e-12);
            }
        }
    }

    #[test]
    fn case_one_is_even_in_parallel_momentum(m in model(), p in 0.0f64..1.2, u in 0.0f64..1.0) {
        let Some(e) = inside(Case::I, p, &m, u) else { return Ok(()) };
        let a = transmission(Case::I, e, p, &m);
        let b = transmission(Case::I, e, -p, &m);
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn hund_spectrum_vanishes_outside_the_window(case in case(), p in -1.0f64..1.0, t in 1.0f64..100.0) {
        let m = StepModel::reference();
        let es: Vec<f64> = (0..60).map(|i| 0.5 + 0.05 * i as f64).collect();
        let rho = hund_spectrum(case, p, t, &es, &m);
        let w = klein_window(case, p, &m);
        for (e, r) in es.iter().zip(&rho) {
            let open = w.is_some_and(|(lo, hi)| *e >= lo && *e <= hi);
            if !open {
                prop_assert_eq!(*r, 0.0);
            } else {
                prop_assert!(*r >= 0.0 && *r <= 2.0 * t / std::f64::consts::PI + 1e-9);
            }
        }
    }
}

#[test]
fn single_step_rates_are_even_and_vanish_outside() {
    let m = StepModel::reference();
    for p in [0.1, 0.35, 0.7] {
        let a = channel_rate(Case::I, p, &m).unwrap();
        let b = channel_rate(Case::I, -p, &m).unwrap();
        assert!((a - b).abs() <= 1e-9 * a, "p = {p}: {a} vs {b}");
    }
    // the vector step breaks the p_∥ → −p_∥ symmetry
    let a = channel_rate(Case::II, 0.3, &m).unwrap();
    let b = channel_rate(Case::II, -0.3, &m).unwrap();
    assert!((a - b).abs() > 1e-3 * a);
    assert_eq!(channel_rate(Case::I, 1.2, &m).unwrap(), 0.0);
}

#[test]
fn resonances_lie_above_the_transmitting_band() {
    let m = StepModel::reference();
    let (_, hi) = klein_window(Case::II, 0.0, &m).unwrap();
    let r = resonance_energies(0.0, &m);
    assert!(!r.is_empty());
    assert!(r.windows(2).all(|w| w[0] < w[1]));
    assert!(r.iter().all(|&e| e >= hi - 1e-12 && e <= 1.5 + 1e-12));
}
