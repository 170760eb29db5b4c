#![allow(dead_code)]

use ltm_core::mc::{haar_unitary, random_kraus, sample_rng};
use ltm_core::operator::{pauli_string, trace_product, CMatrix, DenseOperator, C64};
use ltm_core::{Channel, SubsystemPartition};
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    sample_rng(seed, 0)
}

/// All Pauli labels on `n` qubits, qubit 0 first.
pub fn pauli_labels(n: usize) -> Vec<String> {
    let mut out = vec![String::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|s| "IXYZ".chars().map(move |c| format!("{s}{c}")))
            .collect();
    }
    out
}

/// Locality bitmask of a Pauli label (qubit m at bit m).
pub fn label_mask(label: &str) -> usize {
    label
        .chars()
        .enumerate()
        .filter(|(_, c)| *c != 'I')
        .map(|(m, _)| 1usize << m)
        .sum()
}

/// Locality vector by direct projection onto normalized Pauli strings.
pub fn brute_locality(a: &CMatrix, n: usize) -> Vec<f64> {
    let d = (1usize << n) as f64;
    let mut out = vec![0.0; 1 << n];
    for label in pauli_labels(n) {
        let p = pauli_string(&label).unwrap();
        let c = trace_product(&p, a) / d.sqrt();
        out[label_mask(&label)] += c.norm_sqr();
    }
    out
}

/// `T[κ, λ] = (1/d_λ) Σ_{P ∈ λ} (ℓ_{Λ(P)})_κ`, using `Λ†` when `adjoint`.
pub fn brute_ltm(channel: &Channel, adjoint: bool, n: usize) -> DMatrix<f64> {
    let partition = SubsystemPartition::qubits(n).unwrap();
    let d = (1usize << n) as f64;
    let size = 1usize << n;
    let mut t = DMatrix::zeros(size, size);
    for label in pauli_labels(n) {
        let p = pauli_string(&label).unwrap().unscale(d.sqrt());
        let op = DenseOperator::new(p, partition.clone()).unwrap();
        let image = if adjoint {
            channel.apply_adjoint(&op).unwrap()
        } else {
            channel.apply(&op).unwrap()
        };
        let l = brute_locality(image.matrix(), n);
        let lambda = label_mask(&label);
        for (k, v) in l.iter().enumerate() {
            t[(k, lambda)] += v;
        }
    }
    for lambda in 0..size {
        let dl = partition.sector_dims()[lambda];
        for k in 0..size {
            t[(k, lambda)] /= dl;
        }
    }
    t
}

pub fn random_hermitian<R: Rng>(d: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(d, d, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    (&g + g.adjoint()).scale(0.5)
}

pub fn random_traceless_hermitian<R: Rng>(d: usize, rng: &mut R) -> CMatrix {
    let mut h = random_hermitian(d, rng);
    let tr = h.trace() / d as f64;
    for i in 0..d {
        h[(i, i)] -= tr;
    }
    h
}

/// A random density matrix of rank `rank`.
pub fn random_state<R: Rng>(d: usize, rank: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(d, rank, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let rho = &g * g.adjoint();
    let tr = rho.trace();
    rho / tr
}

pub fn random_unitary_channel<R: Rng>(d: usize, rng: &mut R) -> Channel {
    Channel::unitary(haar_unitary(d, rng)).unwrap()
}

pub fn random_kraus_channel<R: Rng>(d: usize, count: usize, rng: &mut R) -> Channel {
    Channel::kraus(random_kraus(d, count, rng)).unwrap()
}
