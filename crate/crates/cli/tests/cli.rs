use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use schwinger::io::{read_csv, read_json};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_schwinger"));
    c.env_remove("SCHWINGER_OUT");
    c
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/tiny.toml")
}

fn ok(out: Output) -> Output {
    assert!(out.status.success(), "status {:?}\nstderr: {}", out.status, String::from_utf8_lossy(&out.stderr));
    out
}

#[test]
fn oracle_transmission_curve() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    ok(bin()
        .args(["oracle", "--case", "I", "--e-min", "1.0", "--e-max", "1.5", "--n", "11", "--out"])
        .arg(&path)
        .output()
        .unwrap());
    let t = read_csv(&path).unwrap();
    assert_eq!(t.columns, ["E_over_c2", "T"]);
    assert_eq!(t.get_meta("case"), Some("I"));
    let e = t.column("E_over_c2").unwrap();
    let tr = t.column("T").unwrap();
    assert_eq!(e.len(), 11);
    // symmetric point of the reference step
    assert!((e[5] - 1.25).abs() < 1e-12);
    assert!((tr[5] - 0.36).abs() < 1e-9, "T(1.25) = {}", tr[5]);
}

#[test]
fn oracle_atomic_units_and_windows() {
    let out = ok(bin().args(["oracle", "--curve", "window", "--case", "II", "--n", "3", "--au"]).output().unwrap());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("# units: a.u."));
    let t = schwinger::io::CsvTable::parse(&text, Path::new("<stdout>")).unwrap();
    let p = t.column("p_par_au").unwrap();
    assert!((p[0] + 1.5 * 137.036).abs() < 1e-9);
    // window at p_∥ = 0 in hartree
    let lo = t.column("E_au_lo").unwrap()[1];
    assert!((lo - 137.036f64.powi(2)).abs() < 1e-6);
}

#[test]
fn usage_and_config_errors_exit_with_two() {
    let out = bin().args(["oracle", "--curve", "nope"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[fields]\nbogus = 1\n").unwrap();
    let out = bin().args(["sweep", "--config"]).arg(&bad).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("fields.bogus"));
}

#[test]
fn sweep_resume_compare_and_plotdata() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let out = ok(bin().args(["sweep", "--limit", "4", "--config"]).arg(fixture()).arg("--out").arg(&run).output().unwrap());
    assert!(String::from_utf8_lossy(&out.stdout).contains("still pending"));
    // default output root comes from the environment
    ok(bin().env("SCHWINGER_OUT", dir.path()).args(["sweep", "--workers", "2", "--config"]).arg(fixture()).output().unwrap());
    let via_env = dir.path().join("tiny");
    assert!(via_env.join("aggregate/totals.json").is_file());
    ok(bin().args(["run", "--config"]).arg(fixture()).arg("--out").arg(&run).output().unwrap());
    for f in ["rate_profile_I.csv", "rate_profile_II.csv", "rate_profile_III.csv", "totals.json"] {
        let a = std::fs::read(run.join("aggregate").join(f)).unwrap();
        let b = std::fs::read(via_env.join("aggregate").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs between resumed and fresh sweeps");
    }

    let json = dir.path().join("report.json");
    let out = bin().args(["compare", "--tol", "10", "--run"]).arg(&run).arg("--json").arg(&json).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = read_json(&json).unwrap();
    assert_eq!(report["cases"].as_array().unwrap().len(), 3);
    assert_eq!(report["ratios"].as_array().unwrap().len(), 3);
    assert!(report["hund_l2"].is_number());
    // a horizon of six Compton times is far from the asymptotic rate
    let out = bin().args(["compare", "--tol", "1e-6", "--run"]).arg(&run).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("result: FAIL"));

    let plot = dir.path().join("rate.csv");
    ok(bin().args(["plotdata", "--what", "rate", "--run"]).arg(&run).arg("--out").arg(&plot).output().unwrap());
    let t = read_csv(&plot).unwrap();
    assert_eq!(t.rows.len(), 15);
    let emd = ok(bin().args(["plotdata", "--what", "emd", "--t", "3", "--run"]).arg(&run).output().unwrap());
    let t = schwinger::io::CsvTable::parse(&String::from_utf8(emd.stdout).unwrap(), Path::new("<stdout>")).unwrap();
    assert_eq!(t.rows.len(), 3 * 5 * 64);

    let spectra = dir.path().join("spectra");
    ok(bin().args(["spectra", "--case", "II", "--t", "3,6", "--run"]).arg(&run).arg("--out").arg(&spectra).output().unwrap());
    let n = std::fs::read_dir(&spectra).unwrap().count();
    assert_eq!(n, 4);
    let out = bin().args(["spectra", "--case", "II", "--t", "4", "--run"]).arg(&run).arg("--out").arg(&spectra).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn single_channel_with_spatial_density() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("one");
    ok(bin().args(["run", "--p-par", "-0.4", "--config"]).arg(fixture()).arg("--out").arg(&out).output().unwrap());
    let n = read_csv(&out.join("particle_number.csv")).unwrap();
    assert_eq!(n.column("t").unwrap().len(), 25);
    let scalars: serde_json::Value = read_json(&out.join("scalars.json")).unwrap();
    assert_eq!(scalars["p_par"]["value"].as_f64(), Some(-0.4));
    assert!(out.join("t6_momentum.csv").is_file());

    let sp = dir.path().join("sp");
    ok(bin().args(["spectra", "--p-par", "0.4", "--t", "5", "--sigma", "0.5", "--config"]).arg(fixture()).arg("--out").arg(&sp).output().unwrap());
    let d = read_csv(&sp.join("caseII_p0.4_t5_density.csv")).unwrap();
    let e = d.column("electron").unwrap();
    let p = d.column("positron").unwrap();
    let dx = 0.5;
    let (ne, np) = (e.iter().sum::<f64>() * dx, p.iter().sum::<f64>() * dx);
    assert!(ne > 0.0 && ((ne - np) / ne).abs() < 1e-8, "charge: {ne} vs {np}");
}
