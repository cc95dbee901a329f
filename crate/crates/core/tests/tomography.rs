use phonon_qc::dynamics::rotation_matrix;
use phonon_qc::linalg::{max_abs_diff, CMatrix, SuperOperator, C64};
use phonon_qc::tomography::*;
use proptest::prelude::*;

fn unitary_from(n: usize, angles: &[f64]) -> CMatrix {
    let mut u = CMatrix::identity(1 << n, 1 << n);
    for (k, w) in angles.chunks(3).enumerate() {
        let q = k % n;
        let axis = [w[0].cos() * w[1].cos(), w[0].sin() * w[1].cos(), w[1].sin()];
        let r = rotation_matrix(axis, w[2]);
        let d = 1 << n;
        let op = CMatrix::from_fn(d, d, |i, j| {
            let rest = (i ^ j) & !(1 << (n - 1 - q));
            if rest != 0 {
                C64::new(0.0, 0.0)
            } else {
                r[((i >> (n - 1 - q)) & 1, (j >> (n - 1 - q)) & 1)]
            }
        });
        // entangle neighbours with a controlled phase
        let cz = CMatrix::from_fn(d, d, |i, j| {
            if i != j {
                C64::new(0.0, 0.0)
            } else if n > 1 && i & 1 == 1 && (i >> 1) & 1 == 1 {
                C64::from_polar(1.0, w[0])
            } else {
                C64::new(1.0, 0.0)
            }
        });
        u = cz * op * u;
    }
    u
}

fn simulated_tomography(e: &SuperOperator, n: usize) -> SuperOperator {
    let inputs = input_settings(n);
    let ins: Vec<CMatrix> = inputs.iter().map(|l| input_state(l)).collect();
    let outs: Vec<CMatrix> = ins
        .iter()
        .map(|rho| {
            let out = apply_channel(e, rho).unwrap();
            let recs: Vec<SettingRecord> = axis_settings(n)
                .into_iter()
                .map(|axes| SettingRecord {
                    probabilities: exact_probabilities(&out, &axes),
                    axes,
                })
                .collect();
            state_tomography(&recs, n).unwrap().into_matrix()
        })
        .collect();
    process_tomography(&ins, &outs).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn chi_round_trip(angles in prop::collection::vec(-3.0..3.0f64, 12), p in 0.0..1.0f64) {
        let u = unitary_from(2, &angles);
        let v = unitary_from(2, &angles[3..]);
        let kraus = [u * C64::new(p.sqrt(), 0.0), v * C64::new((1.0 - p).sqrt(), 0.0)];
        let e = SuperOperator::from_kraus(&kraus).unwrap();
        let chi = superop_to_chi(&e).unwrap();
        let back = chi_to_superop(&chi).unwrap();
        prop_assert!(max_abs_diff(e.matrix(), back.matrix()) < 1e-10);
        // chi of a CPTP map is Hermitian with unit trace
        prop_assert!((chi.trace().re - 1.0).abs() < 1e-10, "trace {}", chi.trace());
        prop_assert!(max_abs_diff(&chi, &chi.adjoint()) < 1e-10);
    }

    #[test]
    fn tomography_of_unitaries_scores_one(angles in prop::collection::vec(-3.0..3.0f64, 9)) {
        let u = unitary_from(2, &angles);
        let e = simulated_tomography(&SuperOperator::from_unitary(&u), 2);
        prop_assert!(average_gate_fidelity(&e, &u).unwrap() > 1.0 - 1e-9);
        // extra local z phases are absorbed by compensation
        let z = local_phase_operator(&[0.4, -1.1]);
        let est = ProcessEstimate::new(SuperOperator::from_unitary(&(z * &u)), &u).unwrap();
        prop_assert!(est.fidelity > 1.0 - 1e-6);
    }

    #[test]
    fn misassignment_round_trip(p in prop::collection::vec(0.0..1.0f64, 8)) {
        let s: f64 = p.iter().sum::<f64>().max(1e-9);
        let p: Vec<f64> = p.iter().map(|x| x / s).collect();
        let m = MisassignmentModel::new(0.88, 0.85).unwrap();
        let raw = m.apply(&p).unwrap();
        let back = m.correct(&raw).unwrap();
        for (a, b) in p.iter().zip(&back) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn three_qubit_tomography_recovers_qft() {
    let u = phonon_qc::compiler::qft_target(3);
    let e = simulated_tomography(&SuperOperator::from_unitary(&u), 3);
    assert!(average_gate_fidelity(&e, &u).unwrap() > 1.0 - 1e-9);
    let chi = superop_to_chi(&e).unwrap();
    assert_eq!(chi_export(&chi).unwrap().labels.len(), 64);
}

#[test]
fn planted_phase_is_recovered() {
    let u = CMatrix::identity(2, 2);
    let e = SuperOperator::from_unitary(&local_phase_operator(&[0.7]));
    let c = compensate_local_phases(&e, &u).unwrap();
    assert!((c.phases[0] - 0.7).abs() < 1e-4, "{:?}", c.phases);
    assert!(c.fidelity > 1.0 - 1e-6);
}
