use std::io::Cursor;

use num_complex::Complex64;
use pdc_core::crystal::{pmf, Domain, DomainStack};
use pdc_core::spectral::{FrequencyGrid, JointSpectralAmplitude};
use proptest::prelude::*;

fn stack_strategy() -> impl Strategy<Value = DomainStack> {
    prop::collection::vec((prop::bool::ANY, 1.0f64..40.0), 1..60).prop_map(|v| {
        let domains = v.into_iter().map(|(s, w)| Domain::new(if s { 1 } else { -1 }, w)).collect();
        DomainStack::new(domains, 46.22).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn stack_file_round_trip(stack in stack_strategy()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.json");
        stack.save(&path).unwrap();
        prop_assert_eq!(DomainStack::load(&path).unwrap(), stack);
    }

    #[test]
    fn flipping_negates_the_pmf(stack in stack_strategy(), dk in -2.0e5f64..2.0e5) {
        let a = pmf(&stack, dk);
        let b = pmf(&stack.flipped(), dk);
        prop_assert!((a + b).norm() < 1e-12);
    }

    #[test]
    fn merging_keeps_the_pmf(stack in stack_strategy(), dk in -2.0e5f64..2.0e5) {
        let merged = stack.merged();
        prop_assert!(merged.len() <= stack.len());
        prop_assert!((pmf(&stack, dk) - pmf(&merged, dk)).norm() < 1e-9);
    }

    #[test]
    fn pmf_is_bounded_by_one(stack in stack_strategy(), dk in -2.0e5f64..2.0e5) {
        prop_assert!(pmf(&stack, dk).norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn jsa_binary_round_trip(seed in 0u64..1000) {
        let grid = FrequencyGrid::degenerate(775.0, 5.0, 16).unwrap();
        let values: Vec<Complex64> = (0..256)
            .map(|k| Complex64::new(((k as u64 * 7919 + seed) % 101) as f64 - 50.0, (k as f64 * 0.37).sin()))
            .collect();
        let jsa = JointSpectralAmplitude::from_values(grid, values).unwrap();
        let mut buf = Vec::new();
        jsa.write_binary(&mut buf).unwrap();
        prop_assert_eq!(&buf[..4], b"JSA1");
        let back = JointSpectralAmplitude::read_binary(Cursor::new(buf)).unwrap();
        for (a, b) in jsa.values().iter().zip(back.values()) {
            prop_assert!((a - b).norm() <= 1e-9 * a.norm().max(1.0));
        }
    }
}
