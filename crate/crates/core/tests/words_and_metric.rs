use proptest::prelude::*;
use solenoid_core::dadic::{agreement_depth, Agreement, DadicWord};
use solenoid_core::solenoid::{generate_from_free_data, SolenoidTable};
use solenoid_core::ultrametric::{u_metric_series_diagnostic, words_at_depth, UltraMetricEvaluator};

proptest! {
    #[test]
    fn add_one_increments_value(d in 2u32..9, k in 0u64..1_000_000) {
        let w = DadicWord::from_integer(k, d, 24).unwrap();
        prop_assert_eq!(w.add_one().integer_value(), Some(k + 1));
    }

    #[test]
    fn truncation_is_reduction_mod_power(d in 2u32..6, k in 0u64..100_000, depth in 0usize..8) {
        let w = DadicWord::from_integer(k, d, 20).unwrap();
        let modulus = u64::from(d).pow(depth as u32);
        prop_assert_eq!(w.truncated(depth).integer_value(), Some(k % modulus));
    }

    #[test]
    fn agreement_matches_congruence(d in 2u32..5, a in 0u64..4096, b in 0u64..4096) {
        let (wa, wb) = (DadicWord::from_integer(a, d, 12).unwrap(), DadicWord::from_integer(b, d, 12).unwrap());
        let agree = agreement_depth(&wa, &wb).unwrap();
        // Independent oracle: n = largest power with d^n | (a - b) counts the
        // common low digits, so digits 0..n-1 agree.
        let mut n = 0usize;
        let diff = a.abs_diff(b);
        if diff == 0 {
            prop_assert_eq!(agree, Agreement::Identical(12));
        } else {
            while diff % u64::from(d).pow(n as u32 + 1) == 0 { n += 1; }
            if n == 0 {
                prop_assert_eq!(agree, Agreement::Disjoint);
            } else {
                prop_assert_eq!(agree, Agreement::Prefix(n - 1));
            }
        }
    }
}

#[test]
fn constant_metric_is_dyadic_power() {
    let t = SolenoidTable::constant(2, (1 << 14) - 1, 1.0).unwrap();
    let ev = UltraMetricEvaluator::new(t.clone(), 13).unwrap();
    let words = words_at_depth(2, 6).unwrap();
    for a in &words {
        for b in &words {
            let m = ev.u_metric(a, b).unwrap();
            match agreement_depth(a, b).unwrap() {
                Agreement::Disjoint => assert_eq!(m.value, 1.0),
                Agreement::Prefix(n) => assert_eq!(m.value, 0.5f64.powi(n as i32 + 1)),
                Agreement::Identical(_) => assert!(m.identical && m.value == 0.0),
            }
        }
    }
    // Series diagnostic for the constant table is the same constant, 3.
    let a = DadicWord::from_integer(3, 2, 6).unwrap();
    let b = DadicWord::from_integer(7, 2, 6).unwrap();
    assert!((u_metric_series_diagnostic(&t, &a, &b).unwrap() - 3.0).abs() < 1e-12);
}

#[test]
fn strong_triangle_on_generated_table() {
    let t = generate_from_free_data(1.2, &[1.0; 256], None).unwrap();
    let ev = UltraMetricEvaluator::new(t, 7).unwrap();
    let words = words_at_depth(2, 5).unwrap();
    for a in &words {
        for b in &words {
            for c in &words {
                let ab = ev.u_metric(a, b).unwrap().value;
                let bc = ev.u_metric(b, c).unwrap().value;
                let ac = ev.u_metric(a, c).unwrap().value;
                assert!(ac <= ab.max(bc) * (1.0 + 1e-15));
            }
        }
    }
}
