use phonon_qc::analysis::em::default_init;
use phonon_qc::analysis::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn em_log_likelihood_is_monotone(pops in prop::collection::vec(0.0..1.0f64, 6..16)) {
        if let Ok(fit) = em_fit(&pops, default_init()) {
            for w in fit.trace.windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0), "{:?}", fit.trace);
            }
            let total: f64 = fit.components.iter().map(|c| c.weight).sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
            prop_assert!(fit.components[0].mean() <= fit.components[1].mean());
        }
    }

    #[test]
    fn period_divides_register(peaks in prop::collection::vec(1usize..8, 1..4)) {
        let r = extract_period(&peaks, 8).unwrap();
        prop_assert!(8 % r == 0);
        for p in &peaks {
            prop_assert!((p * r) % 8 == 0);
        }
    }

    #[test]
    fn exp_fit_recovers_noiseless_decay(a in 0.2..1.0f64, p in 0.5..0.99f64, c in 0.0..0.3f64) {
        let x: Vec<f64> = (0..25).map(|k| k as f64).collect();
        let y: Vec<f64> = x.iter().map(|&n| a * p.powf(n) + c).collect();
        let f = exp_fit(&x, &y).unwrap();
        prop_assert!((f.p - p).abs() < 1e-6, "{f:?}");
    }
}

#[test]
fn theoretical_tables_sum_to_one() {
    for table in [[0u8; 8], [0, 1, 0, 1, 0, 1, 0, 1], [0, 0, 1, 1, 0, 0, 1, 1]] {
        let p = qpf_theoretical_distribution(&table);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
