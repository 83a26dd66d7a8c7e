use schwinger_wasm::Steps;

fn steps() -> Steps {
    Steps::new(2.5, 0.6, 24.5)
}

#[test]
fn transmission_layout_and_symmetric_point() {
    let v = steps().transmission("I", 0.0, 1.0, 1.5, 5).unwrap();
    assert_eq!(v.len(), 10);
    assert_eq!(&v[..5], &[1.0, 1.125, 1.25, 1.375, 1.5]);
    assert!((v[7] - 0.36).abs() < 1e-9);
}

#[test]
fn windows_open_and_close() {
    let s = steps();
    let w = s.window("I", 0.0).unwrap();
    assert_eq!(w, vec![1.0, 1.5]);
    assert!(s.window("II", 1.5).unwrap().is_empty());
}

#[test]
fn continua_bracket_the_gap() {
    let v = steps().continua("II", 0.3, -40.0, 40.0, 81).unwrap();
    let (x, rest) = v.split_at(81);
    let (up, down) = rest.split_at(81);
    assert_eq!(x[40], 0.0);
    for i in 0..81 {
        assert!(up[i] - down[i] >= 2.0 - 1e-12);
    }
    // far right: scalar step 2.5 and vector step 0.6 both switched on
    assert!((up[80] - (2.5 + (1.0f64 + 0.09).sqrt())).abs() < 1e-9);
}

#[test]
fn rate_profile_peaks_near_zero_for_case_one() {
    let v = steps().rate_profile("I", -1.0, 1.0, 11).unwrap();
    let rates = &v[11..];
    let best = (0..11).max_by(|&i, &j| rates[i].total_cmp(&rates[j])).unwrap();
    assert_eq!(best, 5);
    assert!((rates[3] - rates[7]).abs() < 1e-12 * rates[5]);
}
