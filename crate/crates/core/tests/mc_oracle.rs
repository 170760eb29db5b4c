mod common;

use common::{random_kraus_channel, random_traceless_hermitian, rng};
use ltm_core::channels::{amplitude_damping, depolarizing, uniform_single_qubit};
use ltm_core::gates::swap;
use ltm_core::mc::{
    estimate_variance, haar_unitary, qresnet_estimate, qresnet_mean_ltm, sample_rng, LayeredCircuitSpec, MCEstimate,
    QResNetSpec,
};
use ltm_core::operator::{ghz_state, kron_all, pauli, pauli_string, trace_product, zero_state, CMatrix, DenseOperator};
use ltm_core::variance::variance_exact;
use ltm_core::{ltm_exact, Channel, LocalityVector, SubsystemPartition};

fn lv(op: &DenseOperator) -> LocalityVector {
    LocalityVector::from_operator(op).unwrap()
}

fn analytic(spec_rho: &DenseOperator, channels: &[Channel], h: &DenseOperator) -> f64 {
    let p = spec_rho.partition();
    let ltms: Vec<_> = channels.iter().map(|c| ltm_exact(c, true, p).unwrap()).collect();
    variance_exact(&lv(spec_rho), &ltms, &lv(h), h.trace().re, p.dim()).unwrap().value
}

#[test]
fn haar_first_and_second_moments() {
    let mut r = rng(1);
    let n = 20_000;
    let (mut m2, mut m4) = (0.0, 0.0);
    for _ in 0..n {
        let u = haar_unitary(2, &mut r);
        let a = u[(0, 0)].norm_sqr();
        m2 += a;
        m4 += a * a;
    }
    m2 /= n as f64;
    m4 /= n as f64;
    // |U₀₀|² is uniform on [0, 1] for d = 2.
    assert!((m2 - 0.5).abs() < 4.0 * (1.0f64 / 12.0 / n as f64).sqrt());
    assert!((m4 - 1.0 / 3.0).abs() < 0.01);
    let u = haar_unitary(5, &mut r);
    assert!(ltm_core::operator::max_abs(&(u.adjoint() * &u - CMatrix::identity(5, 5))) < 1e-12);
}

#[test]
fn weingarten_second_moment_for_single_qubit() {
    let mut r = sample_rng(7, 0);
    let norm = |c: char| pauli(c).scale(std::f64::consts::FRAC_1_SQRT_2);
    let labels = ['X', 'Y', 'Z'];
    let n = 40_000;
    let mut diag = 0.0;
    let mut off = 0.0;
    for _ in 0..n {
        let u = haar_unitary(2, &mut r);
        let conj = |i: char, j: char| trace_product(&norm(i), &(u.adjoint() * norm(j) * &u)).re;
        let a = conj(labels[0], labels[2]);
        let b = conj(labels[1], labels[0]);
        diag += a * a;
        off += a * b;
    }
    diag /= n as f64;
    off /= n as f64;
    assert!((diag - 1.0 / 3.0).abs() < 0.01, "{diag}");
    assert!(off.abs() < 0.01, "{off}");
}

#[test]
fn global_haar_variance_is_one_over_d_plus_one() {
    let p = SubsystemPartition::qubits(3).unwrap();
    let d = p.dim();
    let rho = zero_state(&p).into_matrix();
    let h = pauli_string("XZY").unwrap();
    let values: Vec<f64> = (0..4000u64)
        .map(|i| {
            let u = haar_unitary(d, &mut sample_rng(11, i));
            trace_product(&(&u * &rho * u.adjoint()), &h).re
        })
        .collect();
    let est = MCEstimate::from_samples(&values, 11).unwrap();
    assert!(est.z_score(1.0 / (d as f64 + 1.0)).abs() < 4.0, "{est:?}");
}

#[test]
fn analytic_matches_monte_carlo_on_small_circuits() {
    let mut r = rng(2);
    let p2 = SubsystemPartition::qubits(2).unwrap();
    let p3 = SubsystemPartition::qubits(3).unwrap();
    let cases: Vec<(DenseOperator, Vec<Channel>, DenseOperator)> = vec![
        (
            zero_state(&p2),
            vec![ltm_core::gates::cnot_double_cascade(2).unwrap(); 2],
            DenseOperator::new(pauli_string("ZZ").unwrap(), p2.clone()).unwrap(),
        ),
        (
            ghz_state(&p3).unwrap(),
            vec![ltm_core::gates::crx_cascade(3, 0.7).unwrap(); 3],
            ltm_core::experiments::zz_chain(3, 1.0).unwrap(),
        ),
        (
            zero_state(&p2),
            vec![
                random_kraus_channel(4, 2, &mut r),
                uniform_single_qubit(&amplitude_damping(0.3).unwrap(), 2).unwrap(),
            ],
            DenseOperator::new(random_traceless_hermitian(4, &mut r), p2.clone()).unwrap(),
        ),
        (
            zero_state(&p3),
            vec![Channel::composition(vec![
                ltm_core::gates::cnot_double_cascade(3).unwrap(),
                uniform_single_qubit(&depolarizing(0.1).unwrap(), 3).unwrap(),
            ])
            .unwrap()],
            DenseOperator::new(pauli_string("ZIZ").unwrap(), p3.clone()).unwrap(),
        ),
    ];
    for (k, (rho, channels, h)) in cases.into_iter().enumerate() {
        let expected = analytic(&rho, &channels, &h);
        let spec = LayeredCircuitSpec::new(rho, channels, h).unwrap();
        let est = estimate_variance(&spec, 6000, 100 + k as u64).unwrap();
        assert!(est.z_score(expected).abs() < 4.0, "case {k}: analytic {expected}, {est:?}");
    }
}

#[test]
fn swap_parity_is_visible_in_simulation() {
    let p = SubsystemPartition::qubits(2).unwrap();
    let rho = DenseOperator::new(
        kron_all([&CMatrix::identity(2, 2).scale(0.5), &zero_state(&SubsystemPartition::qubits(1).unwrap()).into_matrix()]),
        p.clone(),
    )
    .unwrap();
    let h = DenseOperator::new(pauli_string("IZ").unwrap(), p).unwrap();
    let swap_ch = ltm_core::gates::gate(vec![0, 1], swap()).unwrap();
    let odd = estimate_variance(&LayeredCircuitSpec::homogeneous(rho.clone(), swap_ch.clone(), 3, h.clone()).unwrap(), 500, 3).unwrap();
    assert!(odd.variance < 1e-20);
    let even_expected = analytic(&rho, &vec![swap_ch.clone(); 2], &h);
    assert!((even_expected - 1.0 / 3.0).abs() < 1e-12);
    let even = estimate_variance(&LayeredCircuitSpec::homogeneous(rho, swap_ch, 2, h).unwrap(), 5000, 4).unwrap();
    assert!(even.z_score(even_expected).abs() < 4.0, "{even:?}");
}

#[test]
fn estimates_are_reproducible_and_seed_sensitive() {
    let p = SubsystemPartition::qubits(2).unwrap();
    let spec = LayeredCircuitSpec::homogeneous(
        zero_state(&p),
        ltm_core::gates::cnot_double_cascade(2).unwrap(),
        2,
        DenseOperator::new(pauli_string("ZZ").unwrap(), p).unwrap(),
    )
    .unwrap();
    let a = estimate_variance(&spec, 200, 5).unwrap();
    let b = estimate_variance(&spec, 200, 5).unwrap();
    let c = estimate_variance(&spec, 200, 6).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.variance, c.variance);
    assert!(estimate_variance(&spec, 10, 5).is_err());
}

#[test]
fn qresnet_mean_ltm_predicts_simulated_variance() {
    let p = SubsystemPartition::qubits(2).unwrap();
    let generator = DenseOperator::new(pauli_string("XY").unwrap() + pauli_string("ZI").unwrap().scale(0.5), p.clone()).unwrap();
    let noise = uniform_single_qubit(&depolarizing(0.05).unwrap(), 2).unwrap();
    let h = DenseOperator::new(pauli_string("ZZ").unwrap(), p.clone()).unwrap();
    let depth = 3;
    let sigma = 0.8;
    let mean = qresnet_mean_ltm(generator.matrix(), sigma, Some(&noise), &p, 40).unwrap();
    let rho = zero_state(&p);
    let expected = variance_exact(&lv(&rho), &vec![mean; depth], &lv(&h), 0.0, 4).unwrap().value;
    let spec = QResNetSpec {
        partition: p,
        depth,
        generator,
        sigma,
        noise: Some(noise),
        initial_state: rho,
        observable: h,
    };
    let est = qresnet_estimate(&spec, 6000, 21).unwrap();
    assert!(est.z_score(expected).abs() < 4.0, "analytic {expected}, {est:?}");
}
