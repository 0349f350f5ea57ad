use jointnormal::cli::ExperimentManifest;
use jointnormal::cylinders::{cf_cylinder_length, cylinder_interval};
use jointnormal::interval::EnclosedReal;
use jointnormal::mixing::times_b_preimage_mass;
use jointnormal::normality::{sliding_counts, Gate};
use jointnormal::{orbit_digits, sample, MapSpec, PrecisionConfig, Symbol};
use proptest::prelude::*;
use rug::Rational;

fn cfg(bits: u32, n: usize) -> PrecisionConfig {
    PrecisionConfig::new(bits, n, 2f64.powi(-20)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn enclosure_ops_contain_exact_results(p in 1u64..1000, q in 1001u64..5000, k in 1u64..50) {
        let x = Rational::from((p, q));
        let e = EnclosedReal::from_rational(&x, 80);
        prop_assert!(e.contains_rational(&x));
        prop_assert!(e.mul_integer(k, 80).contains_rational(&Rational::from(&x * k)));
        prop_assert!(e.add(&e, 80).contains_rational(&Rational::from(&x * 2u32)));
        let back = e.recip(80).unwrap();
        prop_assert!(back.contains_rational(&Rational::from(x.recip_ref())));
    }

    #[test]
    fn base_b_digits_are_long_division(p in 0u64..997, b in 2u32..12) {
        let q = 997u64;
        let map = MapSpec::times_b(b).unwrap();
        let c = cfg(400, 60);
        let x = EnclosedReal::from_rational(&Rational::from((p, q)), c.bits);
        let d = orbit_digits(&map, x, 60, &c);
        let mut r = p;
        for &s in &d.symbols {
            let next = r * u64::from(b);
            prop_assert_eq!(s, next / q);
            r = next % q;
        }
        prop_assert_eq!(d.valid_len(), 60);
    }

    #[test]
    fn cylinder_of_orbit_prefix_contains_the_point(seed in 0u64..10_000, which in 0usize..3, n in 1usize..25) {
        let map = [MapSpec::times_b(3).unwrap(), MapSpec::golden(), MapSpec::Gauss][which].clone();
        let c = cfg(512, n);
        let x = sample(seed, c.bits);
        let d = orbit_digits(&map, x.clone(), n, &c);
        prop_assume!(d.valid_len() == n);
        let cyl = cylinder_interval(&map, &d.symbols, 512).unwrap();
        prop_assert!(!cyl.is_empty());
        prop_assert!(cyl.meets(&x));
        prop_assert!(cyl.log_lebesgue().is_finite());
    }

    #[test]
    fn cf_length_is_the_convergent_formula(digits in prop::collection::vec(1u64..30, 1..8)) {
        let len = cf_cylinder_length(&digits).unwrap();
        let (mut q_prev, mut q) = (rug::Integer::new(), rug::Integer::from(1));
        for &a in &digits {
            let next = rug::Integer::from(&q * a) + &q_prev;
            q_prev = std::mem::replace(&mut q, next);
        }
        let expect = Rational::from((rug::Integer::from(1), rug::Integer::from(&q + &q_prev) * &q));
        prop_assert_eq!(len, expect);
    }

    #[test]
    fn sliding_counts_sum_to_windows(symbols in prop::collection::vec(0u64..3, 0..200), k in 1usize..4) {
        let t = sliding_counts(&symbols, k, None);
        let total: u64 = t.counts.values().sum();
        prop_assert_eq!(total, t.windows);
        prop_assert_eq!(t.windows as usize, symbols.len().saturating_sub(k - 1));
    }

    #[test]
    fn dyadic_correlations_vanish(l in 1u32..7, a in 0u64..64, j in 0u64..16, w in 1u64..16, n in 0usize..12) {
        let a = a % (1 << l);
        let (j, w) = (j.min(15), w.min(16 - j.min(15)));
        let aa = (Rational::from((a, 1u64 << l)), Rational::from((a + 1, 1u64 << l)));
        let bb = (Rational::from((j, 16u64)), Rational::from((j + w, 16u64)));
        let la = Rational::from(&aa.1 - &aa.0);
        let lb = Rational::from(&bb.1 - &bb.0);
        prop_assert_eq!(times_b_preimage_mass(2, n + l as usize, &aa, &bb), la * lb);
    }

    #[test]
    fn gate_passes_everything_inside_the_outlier_band(zs in prop::collection::vec(-3.99f64..3.99, 1..300)) {
        prop_assert!(Gate::default().judge(&zs).pass);
    }

    #[test]
    fn manifest_json_round_trips(n in 1usize..100_000, seeds in 1u64..50, bits in prop::option::of(64u32..5000)) {
        let text = match bits {
            Some(b) => format!(r#"{{"command":"normality","maps":["timesb:3"],"seeds":{seeds},"N":{n},"precision":{b}}}"#),
            None => format!(r#"{{"command":"normality","maps":["timesb:3"],"seeds":{seeds},"N":{n}}}"#),
        };
        let m = ExperimentManifest::from_json(&text).unwrap();
        let back = ExperimentManifest::from_json(&serde_json::to_string(&m).unwrap()).unwrap();
        prop_assert_eq!(m.hash(), back.hash());
        prop_assert_eq!(back.points().len() as u64, seeds);
    }
}

#[test]
fn golden_cylinders_partition_the_interval() {
    let map = MapSpec::golden();
    for n in 1..=12 {
        let cyls = jointnormal::cylinders::enumerate_cylinders(&map, n, 256, 1 << 20).unwrap();
        let total: f64 = cyls.iter().map(|c| c.lebesgue()).sum();
        assert!((total - 1.0).abs() < 1e-12, "rank {n}: {total}");
        let words: Vec<&Vec<Symbol>> = cyls.iter().map(|c| &c.symbols).collect();
        assert!(words.iter().all(|w| w.windows(2).all(|p| p != [1, 1])));
    }
}
