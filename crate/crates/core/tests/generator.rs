use logdp::evaluation::synthetic::{AnomalyKind, SyntheticSpec};
use logdp::evaluation::generate_synthetic;
use logdp::{EventCountMatrix, Label};
use proptest::prelude::*;

/// Brute-force check of a row against every marginal and dependency.
fn broken_events(spec: &SyntheticSpec, row: &[u32]) -> Vec<usize> {
    let slack = spec.noise_half_width as f64 + 0.5;
    let mut broken = Vec::new();
    for m in &spec.marginals {
        if row[m.event] < m.low || row[m.event] > m.high {
            broken.push(m.event);
        }
    }
    for d in &spec.dependencies {
        if (row[d.target] as f64 - d.expected(row)).abs() > slack {
            broken.push(d.target);
        }
    }
    broken
}

fn all_rows(x: &EventCountMatrix) -> impl Iterator<Item = (&[u32], Label)> {
    x.rows().zip(x.labels().iter().copied())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn normal_rows_respect_every_definition(seed in any::<u64>()) {
        let spec = SyntheticSpec { n_train: 200, n_val: 100, n_test: 200, ..SyntheticSpec::default() }.with_seed(seed);
        let ds = generate_synthetic(&spec).unwrap();
        for x in [&ds.train, &ds.val, &ds.test] {
            for (row, label) in all_rows(x) {
                if label == Label::Normal {
                    prop_assert!(broken_events(&spec, row).is_empty(), "{:?}", row);
                }
            }
        }
    }

    #[test]
    fn anomalies_break_exactly_their_planted_pattern(seed in any::<u64>()) {
        let spec = SyntheticSpec { n_train: 10, n_val: 10, n_test: 300, ..SyntheticSpec::default() }.with_seed(seed);
        let ds = generate_synthetic(&spec).unwrap();
        prop_assert_eq!(ds.labels.len(), ds.test.n_rows());
        for (i, l) in ds.labels.iter().enumerate() {
            prop_assert_eq!(&l.sequence_id, &ds.test.sequence_ids()[i]);
            prop_assert_eq!(l.label, ds.test.labels()[i]);
            let Some(a) = &l.anomaly else { continue };
            let row = ds.test.row(i);
            let broken = broken_events(&spec, row);
            let e = a.event_id.0 as usize;
            match a.kind {
                AnomalyKind::Proximity => {
                    let m = spec.marginals.iter().find(|m| m.event == e).unwrap();
                    prop_assert!(row[e] > m.high);
                }
                AnomalyKind::Dependency => prop_assert!(broken.contains(&e), "{:?} {:?}", row, a),
            }
        }
    }
}
