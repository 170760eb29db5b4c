//! Dense operators on a partitioned Hilbert space and the index arithmetic
//! for acting on a few subsystems at a time.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::partition::SubsystemPartition;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// A `d × d` complex matrix tied to a partition.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    matrix: CMatrix,
    partition: SubsystemPartition,
}

impl DenseOperator {
    pub fn new(matrix: CMatrix, partition: SubsystemPartition) -> Result<Self> {
        let d = partition.dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return invalid(format!(
                "operator is {}x{} but the partition has dimension {d}",
                matrix.nrows(),
                matrix.ncols()
            ));
        }
        Ok(DenseOperator { matrix, partition })
    }

    pub fn identity(partition: &SubsystemPartition) -> Self {
        let d = partition.dim();
        DenseOperator {
            matrix: CMatrix::identity(d, d),
            partition: partition.clone(),
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn partition(&self) -> &SubsystemPartition {
        &self.partition
    }

    pub fn dim(&self) -> usize {
        self.partition.dim()
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    /// Squared Hilbert–Schmidt norm `Tr[A†A]`.
    pub fn hs_norm_sqr(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        is_hermitian(&self.matrix, tol)
    }

    /// `Tr[self · other]`.
    /// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

pub fn trace_product(&self, other: &DenseOperator) -> C64 {
        trace_product(&self.matrix, &other.matrix)
    }

    /// Largest absolute eigenvalue of a Hermitian operator.
    pub fn operator_norm_hermitian(&self) -> f64 {
        hermitian_eigenvalues(&self.matrix)
            .iter()
            .fold(0.0f64, |acc, e| acc.max(e.abs()))
    }

    pub fn with_matrix(&self, matrix: CMatrix) -> Result<Self> {
        DenseOperator::new(matrix, self.partition.clone())
    }
}

pub fn is_hermitian(m: &CMatrix, tol: f64) -> bool {
    m.nrows() == m.ncols() && (m - m.adjoint()).iter().all(|z| z.norm() <= tol)
}

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

pub fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let herm = (m + m.adjoint()).scale(0.5);
    let mut ev: Vec<f64> = herm.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Kronecker product of a list of matrices, first factor most significant.
pub fn kron_all<'a>(factors: impl IntoIterator<Item = &'a CMatrix>) -> CMatrix {
    factors
        .into_iter()
        .fold(CMatrix::identity(1, 1), |acc, f| acc.kronecker(f))
}

pub fn pauli(which: char) -> CMatrix {
    match which {
        'I' => CMatrix::identity(2, 2),
        'X' => CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        'Y' => CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]),
        'Z' => CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
        other => panic!("unknown Pauli symbol {other:?}"),
    }
}

/// Unnormalized Pauli string, e.g. `"ZIZ"` (qubit 0 first).
pub fn pauli_string(label: &str) -> Result<CMatrix> {
    if label.is_empty() || !label.chars().all(|c| "IXYZ".contains(c)) {
        return invalid(format!("bad Pauli label {label:?}"));
    }
    let factors: Vec<CMatrix> = label.chars().map(pauli).collect();
    Ok(kron_all(factors.iter()))
}

/// `|ψ⟩⟨ψ|` for a state vector (normalized on the way).
pub fn projector(psi: &[C64]) -> CMatrix {
    let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let v = nalgebra::DVector::from_iterator(psi.len(), psi.iter().map(|z| z / norm));
    &v * v.adjoint()
}

/// `|0…0⟩⟨0…0|`.
pub fn zero_state(partition: &SubsystemPartition) -> DenseOperator {
    let d = partition.dim();
    let mut m = CMatrix::zeros(d, d);
    m[(0, 0)] = ONE;
    DenseOperator::new(m, partition.clone()).expect("dimension matches")
}

/// `(|0…0⟩ + |1…1⟩)/√2` on qubits.
pub fn ghz_state(partition: &SubsystemPartition) -> Result<DenseOperator> {
    if !partition.is_qubits() {
        return invalid("GHZ state needs a qubit partition");
    }
    let d = partition.dim();
    let mut psi = vec![ZERO; d];
    psi[0] = ONE;
    psi[d - 1] = ONE;
    DenseOperator::new(projector(&psi), partition.clone())
}

pub fn maximally_mixed(partition: &SubsystemPartition) -> DenseOperator {
    let d = partition.dim();
    DenseOperator::new(
        CMatrix::identity(d, d).scale(1.0 / d as f64),
        partition.clone(),
    )
    .expect("dimension matches")
}

/// Index bookkeeping for an operator acting on a subset of subsystems.
///
/// For a full index `i`, `base[i]` is `i` with the site digits zeroed and
/// `local[i]` is the site-local index; `offsets[s]` rebuilds the full index
/// contribution of site-local index `s`.
#[derive(Debug, Clone)]
pub(crate) struct SiteMap {
    base: Vec<usize>,
    local: Vec<usize>,
    offsets: Vec<usize>,
}

impl SiteMap {
    pub(crate) fn new(partition: &SubsystemPartition, sites: &[usize]) -> Result<Self> {
        let m = partition.num_subsystems();
        for (i, &s) in sites.iter().enumerate() {
            if s >= m || sites[..i].contains(&s) {
                return invalid(format!("bad site list {sites:?} for {m} subsystems"));
            }
        }
        let dims = partition.dims();
        let strides = partition.strides();
        let local_dims: Vec<usize> = sites.iter().map(|&s| dims[s]).collect();
        let local_dim: usize = local_dims.iter().product();
        let mut offsets = vec![0usize; local_dim];
        for (s, off) in offsets.iter_mut().enumerate() {
            let mut rem = s;
            for k in (0..sites.len()).rev() {
                let digit = rem % local_dims[k];
                rem /= local_dims[k];
                *off += digit * strides[sites[k]];
            }
        }
        let d = partition.dim();
        let mut base = vec![0usize; d];
        let mut local = vec![0usize; d];
        for i in 0..d {
            let mut b = i;
            let mut l = 0usize;
            for (k, &site) in sites.iter().enumerate() {
                let digit = (i / strides[site]) % dims[site];
                b -= digit * strides[site];
                l = l * local_dims[k] + digit;
            }
            base[i] = b;
            local[i] = l;
        }
        Ok(SiteMap {
            base,
            local,
            offsets,
        })
    }

    pub(crate) fn local_dim(&self) -> usize {
        self.offsets.len()
    }

    /// `(G ⊗ 1) · A`.
    pub(crate) fn left_mul(&self, g: &CMatrix, a: &CMatrix) -> CMatrix {
        let d = a.nrows();
        let k = self.local_dim();
        let mut out = CMatrix::zeros(d, a.ncols());
        for c in 0..a.ncols() {
            let col = a.column(c);
            for i in 0..d {
                let b = self.base[i];
                let li = self.local[i];
                let mut acc = ZERO;
                for s in 0..k {
                    let gv = g[(li, s)];
                    if gv != ZERO {
                        acc += gv * col[b + self.offsets[s]];
                    }
                }
                out[(i, c)] = acc;
            }
        }
        out
    }

    /// `A · (G ⊗ 1)`.
    pub(crate) fn right_mul(&self, a: &CMatrix, g: &CMatrix) -> CMatrix {
        let d = a.ncols();
        let k = self.local_dim();
        let mut out = CMatrix::zeros(a.nrows(), d);
        for i in 0..d {
            let b = self.base[i];
            let li = self.local[i];
            for s in 0..k {
                let gv = g[(s, li)];
                if gv == ZERO {
                    continue;
                }
                let src = a.column(b + self.offsets[s]);
                let mut dst = out.column_mut(i);
                dst.axpy(gv, &src, ONE);
            }
        }
        out
    }

    /// `(G ⊗ 1) A (G ⊗ 1)†`.
    pub(crate) fn conjugate(&self, g: &CMatrix, a: &CMatrix) -> CMatrix {
        let left = self.left_mul(g, a);
        self.right_mul(&left, &g.adjoint())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_matrix(d: usize, seed: u64) -> CMatrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        CMatrix::from_fn(d, d, |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    #[test]
    fn site_multiplication_matches_kron() {
        let p = SubsystemPartition::new(vec![2, 3, 2]).unwrap();
        let a = random_matrix(12, 1);
        let g = random_matrix(4, 2);
        // sites (2, 0): local index = digit2 * 2 + digit0
        let map = SiteMap::new(&p, &[2, 0]).unwrap();
        let mut full = CMatrix::zeros(12, 12);
        let strides = p.strides();
        for i in 0..12 {
            for j in 0..12 {
                let di = [i / strides[0] % 2, i / strides[1] % 3, i / strides[2] % 2];
                let dj = [j / strides[0] % 2, j / strides[1] % 3, j / strides[2] % 2];
                if di[1] == dj[1] {
                    full[(i, j)] = g[(di[2] * 2 + di[0], dj[2] * 2 + dj[0])];
                }
            }
        }
        let expected_left = &full * &a;
        let expected_right = &a * &full;
        assert!((map.left_mul(&g, &a) - expected_left).norm() < 1e-12);
        assert!((map.right_mul(&a, &g) - expected_right).norm() < 1e-12);
    }

    #[test]
    fn ghz_is_pure() {
        let p = SubsystemPartition::qubits(3).unwrap();
        let g = ghz_state(&p).unwrap();
        assert!((g.trace() - ONE).norm() < 1e-14);
        assert!((g.hs_norm_sqr() - 1.0).abs() < 1e-14);
    }
}
