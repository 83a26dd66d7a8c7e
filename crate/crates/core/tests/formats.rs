use std::path::Path;

use proptest::prelude::*;
use schwinger::io::*;
use schwinger::units::{parse_config, to_config_document, Case, Dimension, PhysicalConstants, SimConfig};

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![any::<f64>().prop_filter("finite", |v| v.is_finite()), -1e3f64..1e3]
}

proptest! {
    #[test]
    fn klb1_round_trips(rows in 0usize..6, cols in 0usize..6, seed in prop::collection::vec(any::<f64>(), 36)) {
        let data: Vec<f64> = seed[..rows * cols].to_vec();
        let a = Array::new(vec![rows, cols], data).unwrap();
        let bytes = encode_klb1(&a);
        let b = decode_klb1(&bytes, Path::new("mem")).unwrap();
        prop_assert_eq!(&a.dims, &b.dims);
        // bitwise, so NaN payloads survive too
        prop_assert!(a.data.iter().zip(&b.data).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn klb1_detects_any_single_bit_flip(data in prop::collection::vec(finite(), 1..20), bit in any::<prop::sample::Index>()) {
        let mut bytes = encode_klb1(&Array::vector(data));
        let i = bit.index(bytes.len() * 8);
        bytes[i / 8] ^= 1 << (i % 8);
        prop_assert!(decode_klb1(&bytes, Path::new("mem")).is_err());
    }

    #[test]
    fn csv_round_trips(rows in prop::collection::vec(prop::collection::vec(finite(), 3), 0..30), note in "[a-z ]{0,12}") {
        let mut t = CsvTable::new(&["a", "b", "c"]).meta("note", note.trim()).meta("units", "natural");
        for r in &rows {
            t.push(r.clone());
        }
        let back = CsvTable::parse(&t.to_text(), Path::new("mem")).unwrap();
        prop_assert_eq!(back, t);
    }

    #[test]
    fn unit_conversions_invert(v in -1e6f64..1e6) {
        let k = PhysicalConstants::atomic();
        for d in [Dimension::Energy, Dimension::Momentum, Dimension::Length, Dimension::Time] {
            let back = d.to_natural(d.to_atomic(v, &k), &k);
            prop_assert!((back - v).abs() <= 4.0 * f64::EPSILON * v.abs(), "{d:?}: {v} → {back}");
        }
    }

    #[test]
    fn config_documents_round_trip(
        case in prop_oneof![Just(Case::I), Just(Case::II), Just(Case::III)],
        count in 1usize..40,
        t_max in 50.0f64..80.0,
    ) {
        let mut cfg = SimConfig::desk(case);
        cfg.sweep.count = count;
        cfg.run.t_max = t_max;
        cfg.run.fit_window.1 = t_max;
        prop_assume!(cfg.validate().is_ok());
        let back = parse_config(&to_config_document(&cfg)).unwrap();
        prop_assert_eq!(back, cfg);
    }
}

#[test]
fn manifest_detects_changed_files() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    write_csv(&root.join("a.csv"), &CsvTable::new(&["x"])).unwrap();
    write_klb1(&root.join("b.klb"), &Array::vector(vec![1.0, 2.0])).unwrap();
    let mut m = RunManifest::new("cfg".into());
    m.add_file(root, "a.csv").unwrap();
    m.add_file(root, "b.klb").unwrap();
    assert!(m.verify(root).is_empty());
    write_klb1(&root.join("b.klb"), &Array::vector(vec![1.0, 2.5])).unwrap();
    assert_eq!(m.verify(root), vec![std::path::PathBuf::from("b.klb")]);
}
