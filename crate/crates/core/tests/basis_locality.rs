mod common;

use common::{brute_locality, label_mask, pauli_labels, random_hermitian, rng};
use ltm_core::basis::{enumerate_basis_str, LocalFrame};
use ltm_core::mc::haar_unitary;
use ltm_core::operator::{trace_product, CMatrix, DenseOperator, C64};
use ltm_core::{enumerate_basis, weighted_dot, Locality, LocalityVector, SubsystemPartition};
use proptest::prelude::*;
use rand::Rng;

#[test]
fn single_qubit_sectors() {
    let p = SubsystemPartition::qubits(1).unwrap();
    let trivial = enumerate_basis_str(&p, "0").unwrap();
    assert_eq!(trivial.len(), 1);
    let m = trivial[0].matrix(&p);
    assert!((m.matrix() - CMatrix::identity(2, 2).unscale(2f64.sqrt())).iter().all(|z| z.norm() < 1e-15));
    let labels: Vec<String> = enumerate_basis_str(&p, "1")
        .unwrap()
        .iter()
        .map(|e| e.pauli_label().unwrap())
        .collect();
    assert_eq!(labels.len(), 3);
    for l in ["X", "Y", "Z"] {
        assert!(labels.iter().any(|x| x == l), "{labels:?}");
    }
}

#[test]
fn two_qubit_full_support_matches_pauli_filter() {
    let p = SubsystemPartition::qubits(2).unwrap();
    let oracle: Vec<String> = pauli_labels(2)
        .into_iter()
        .filter(|l| l.chars().all(|c| c != 'I'))
        .collect();
    let mut got: Vec<String> = enumerate_basis_str(&p, "11")
        .unwrap()
        .iter()
        .map(|e| e.pauli_label().unwrap())
        .collect();
    got.sort();
    let mut expected = oracle;
    expected.sort();
    assert_eq!(got, expected);
    assert!(enumerate_basis_str(&p, "1").is_err());
}

#[test]
fn basis_is_orthonormal_for_mixed_dimensions() {
    let p = SubsystemPartition::new(vec![2, 3]).unwrap();
    let elements: Vec<DenseOperator> = p
        .localities()
        .flat_map(|k| enumerate_basis(&p, k).unwrap())
        .map(|e| e.matrix(&p))
        .collect();
    assert_eq!(elements.len(), 36);
    for (i, a) in elements.iter().enumerate() {
        assert!(a.is_hermitian(1e-14));
        for (j, b) in elements.iter().enumerate() {
            let ip = trace_product(a.matrix(), b.matrix());
            let expected = if i == j { 1.0 } else { 0.0 };
            assert!((ip - C64::new(expected, 0.0)).norm() < 1e-12, "({i}, {j})");
        }
    }
}

#[test]
fn sector_sizes_sum_to_d_squared() {
    for dims in [vec![2, 2, 2], vec![3, 2], vec![4]] {
        let p = SubsystemPartition::new(dims).unwrap();
        let d = p.dim() as f64;
        let total: f64 = p.sector_dims().iter().sum();
        assert_eq!(total, d * d);
        for k in p.localities() {
            assert_eq!(enumerate_basis(&p, k).unwrap().len() as f64, p.sector_dim(k));
        }
        assert_eq!(p.sector_dim(Locality::TRIVIAL), 1.0);
    }
}

#[test]
fn locality_vector_matches_direct_pauli_projection() {
    let mut r = rng(3);
    let p = SubsystemPartition::qubits(3).unwrap();
    for _ in 0..5 {
        let a = random_hermitian(8, &mut r);
        let lv = LocalityVector::from_operator(&DenseOperator::new(a.clone(), p.clone()).unwrap()).unwrap();
        let oracle = brute_locality(&a, 3);
        for (x, y) in lv.weights().iter().zip(&oracle) {
            assert!((x - y).abs() < 1e-12);
        }
    }
    assert_eq!(label_mask("XIZ"), 0b101);
}

#[test]
fn non_hermitian_operators_use_squared_moduli() {
    let p = SubsystemPartition::qubits(1).unwrap();
    let sigma_plus = CMatrix::from_row_slice(2, 2, &[C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)]);
    let lv = LocalityVector::from_operator(&DenseOperator::new(sigma_plus, p).unwrap()).unwrap();
    assert!(lv.weights()[0].abs() < 1e-15);
    assert!((lv.weights()[1] - 1.0).abs() < 1e-15);
}

#[test]
fn dimension_mismatch_is_rejected() {
    let p = SubsystemPartition::qubits(2).unwrap();
    assert!(DenseOperator::new(CMatrix::identity(2, 2), p).is_err());
}

#[test]
fn weighted_dot_of_rho_and_h_is_zero_depth_variance() {
    // ρ = |0⟩⟨0|, H = Z on one qubit.
    let p = SubsystemPartition::qubits(1).unwrap();
    let rho = ltm_core::operator::zero_state(&p);
    let h = DenseOperator::new(ltm_core::operator::pauli('Z'), p).unwrap();
    let v = weighted_dot(
        &LocalityVector::from_operator(&rho).unwrap(),
        &LocalityVector::from_operator(&h).unwrap(),
    )
    .unwrap();
    assert!((v - 1.0 / 3.0).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn locality_total_is_hs_norm(dims in prop::collection::vec(2usize..4, 1..4), seed in any::<u64>()) {
        let p = SubsystemPartition::new(dims).unwrap();
        let d = p.dim();
        let mut r = rng(seed);
        let a = CMatrix::from_fn(d, d, |_, _| C64::new(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5));
        let op = DenseOperator::new(a, p).unwrap();
        let lv = LocalityVector::from_operator(&op).unwrap();
        let norm = op.hs_norm_sqr();
        prop_assert!((lv.total() - norm).abs() <= 1e-10 * norm.max(1.0));
        prop_assert!(lv.weights().iter().all(|w| *w >= 0.0));
    }

    #[test]
    fn locality_is_independent_of_the_local_frame(dims in prop::collection::vec(2usize..4, 1..4), seed in any::<u64>()) {
        let p = SubsystemPartition::new(dims.clone()).unwrap();
        let mut r = rng(seed);
        let a = random_hermitian(p.dim(), &mut r);
        let op = DenseOperator::new(a, p.clone()).unwrap();
        let rotations: Vec<CMatrix> = dims.iter().map(|&d| haar_unitary(d, &mut r)).collect();
        let frame = LocalFrame::rotated(&p, &rotations).unwrap();
        let standard = LocalityVector::from_operator(&op).unwrap();
        let rotated = LocalityVector::from_operator_in_frame(&op, &frame).unwrap();
        for (x, y) in standard.weights().iter().zip(rotated.weights()) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }
}
