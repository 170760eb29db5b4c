//! Local orthonormal Hermitian bases and the operator ↔ coefficient transform.
//!
//! A basis element is identified by its multi-index `j = (j_0, …, j_{M−1})`
//! with `j_m ∈ {0, …, d_m² − 1}`; `j_m = 0` is the normalized identity. The
//! flat index packs the multi-index in mixed radix `d_m²`, subsystem 0 most
//! significant, matching the tensor order of dense matrices.

use crate::error::{invalid, Result};
use crate::operator::{kron_all, CMatrix, DenseOperator, C64, ZERO};
use crate::partition::{Locality, SubsystemPartition};

/// Normalized local basis on a single `d`-dimensional factor: element 0 is
/// `1/√d`, the rest are traceless, Hermitian and Hilbert–Schmidt orthonormal.
///
/// For `d = 2` these are the Paulis `(1, X, Y, Z)/√2`; otherwise the
/// generalized Gell-Mann matrices.
pub fn standard_local_basis(d: usize) -> Vec<CMatrix> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    if d == 2 {
        return ['I', 'X', 'Y', 'Z']
            .into_iter()
            .map(|c| crate::operator::pauli(c).scale(s))
            .collect();
    }
    let mut out = vec![CMatrix::identity(d, d).scale(1.0 / (d as f64).sqrt())];
    for a in 0..d {
        for b in a + 1..d {
            let mut sym = CMatrix::zeros(d, d);
            sym[(a, b)] = C64::new(s, 0.0);
            sym[(b, a)] = C64::new(s, 0.0);
            out.push(sym);
            let mut anti = CMatrix::zeros(d, d);
            anti[(a, b)] = C64::new(0.0, -s);
            anti[(b, a)] = C64::new(0.0, s);
            out.push(anti);
        }
    }
    for l in 1..d {
        let norm = 1.0 / ((l * (l + 1)) as f64).sqrt();
        let mut diag = CMatrix::zeros(d, d);
        for k in 0..l {
            diag[(k, k)] = C64::new(norm, 0.0);
        }
        diag[(l, l)] = C64::new(-(l as f64) * norm, 0.0);
        out.push(diag);
    }
    out
}

/// One orthonormal local basis per subsystem.
#[derive(Debug, Clone)]
pub struct LocalFrame {
    partition: SubsystemPartition,
    locals: Vec<Vec<CMatrix>>,
    /// `coeff_maps[m][(j, a·d_m + b)] = P^m_j[a, b]`.
    coeff_maps: Vec<CMatrix>,
}

impl LocalFrame {
    pub fn standard(partition: &SubsystemPartition) -> Self {
        let locals = partition
            .dims()
            .iter()
            .map(|&d| standard_local_basis(d))
            .collect();
        Self::from_locals(partition, locals)
    }

    /// The standard frame with every local element conjugated, `U_m P U_m†`.
    /// The identity element is unaffected, so sector membership is kept.
    pub fn rotated(partition: &SubsystemPartition, unitaries: &[CMatrix]) -> Result<Self> {
        if unitaries.len() != partition.num_subsystems() {
            return invalid("one local unitary per subsystem is required");
        }
        let mut locals = Vec::with_capacity(unitaries.len());
        for (&d, u) in partition.dims().iter().zip(unitaries) {
            if u.nrows() != d || u.ncols() != d {
                return invalid(format!("local unitary must be {d}x{d}"));
            }
            if (u.adjoint() * u - CMatrix::identity(d, d)).norm() > 1e-10 {
                return invalid("local rotation is not unitary");
            }
            let rotated = standard_local_basis(d)
                .into_iter()
                .map(|p| u * p * u.adjoint())
                .collect();
            locals.push(rotated);
        }
        Ok(Self::from_locals(partition, locals))
    }

    fn from_locals(partition: &SubsystemPartition, locals: Vec<Vec<CMatrix>>) -> Self {
        let coeff_maps = locals
            .iter()
            .map(|basis| {
                let d = basis[0].nrows();
                CMatrix::from_fn(d * d, d * d, |j, p| basis[j][(p / d, p % d)])
            })
            .collect();
        LocalFrame {
            partition: partition.clone(),
            locals,
            coeff_maps,
        }
    }

    pub fn partition(&self) -> &SubsystemPartition {
        &self.partition
    }

    pub fn local(&self, m: usize, j: usize) -> &CMatrix {
        &self.locals[m][j]
    }

    /// Dense matrix of the basis element with the given multi-index.
    pub fn element_matrix(&self, multi_index: &[usize]) -> CMatrix {
        kron_all(
            multi_index
                .iter()
                .enumerate()
                .map(|(m, &j)| &self.locals[m][j]),
        )
    }

    /// All coefficients `c_j = Tr[P_j A]`, indexed by flat basis index.
    ///
    /// Works by contracting one subsystem at a time, so the cost is
    /// `d² Σ_m d_m²` rather than the `d⁴` of a naive projection.
    pub fn coefficients(&self, a: &CMatrix) -> Result<Vec<C64>> {
        let d = self.partition.dim();
        if a.nrows() != d || a.ncols() != d {
            return invalid(format!(
                "operator is {}x{}, expected {d}x{d}",
                a.nrows(),
                a.ncols()
            ));
        }
        let dims = self.partition.dims();
        let strides = self.partition.strides();
        let pair_strides = basis_strides(dims);
        // Tr[P A] = Σ_{a,b} P[a,b] A[b,a]: entry A[r,c] sits at pair digits
        // p_m = c_m d_m + r_m.
        let mut tensor = vec![ZERO; d * d];
        for c in 0..d {
            for r in 0..d {
                let mut idx = 0;
                for m in 0..dims.len() {
                    let rm = r / strides[m] % dims[m];
                    let cm = c / strides[m] % dims[m];
                    idx += (cm * dims[m] + rm) * pair_strides[m];
                }
                tensor[idx] = a[(r, c)];
            }
        }
        for (m, map) in self.coeff_maps.iter().enumerate() {
            tensor = mode_product(&tensor, map, pair_strides[m], dims[m] * dims[m]);
        }
        Ok(tensor)
    }
}

/// Applies `map` along one mode of a tensor stored with the given mode
/// stride and extent.
fn mode_product(input: &[C64], map: &CMatrix, stride: usize, extent: usize) -> Vec<C64> {
    let block = stride * extent;
    let mut out = vec![ZERO; input.len()];
    for (src, dst) in input.chunks(block).zip(out.chunks_mut(block)) {
        for j in 0..extent {
            let dst_row = &mut dst[j * stride..(j + 1) * stride];
            for p in 0..extent {
                let coeff = map[(j, p)];
                if coeff == ZERO {
                    continue;
                }
                let src_row = &src[p * stride..(p + 1) * stride];
                for (o, &x) in dst_row.iter_mut().zip(src_row) {
                    *o += coeff * x;
                }
            }
        }
    }
    out
}

/// Mixed-radix strides of the flat basis index.
pub(crate) fn basis_strides(dims: &[usize]) -> Vec<usize> {
    let mut strides = vec![1usize; dims.len()];
    for m in (0..dims.len().saturating_sub(1)).rev() {
        strides[m] = strides[m + 1] * dims[m + 1] * dims[m + 1];
    }
    strides
}

/// Locality of a flat basis index.
pub(crate) fn index_locality(dims: &[usize], strides: &[usize], j: usize) -> Locality {
    let mut mask = 0;
    for m in 0..dims.len() {
        if !(j / strides[m]).is_multiple_of(dims[m] * dims[m]) {
            mask |= 1 << m;
        }
    }
    Locality(mask)
}

/// Locality of every flat basis index, precomputed.
pub(crate) fn locality_table(partition: &SubsystemPartition) -> Vec<u32> {
    let dims = partition.dims();
    let strides = basis_strides(dims);
    let n = partition.dim() * partition.dim();
    (0..n)
        .map(|j| index_locality(dims, &strides, j).0 as u32)
        .collect()
}

/// One element of the product basis, stored symbolically.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LocalBasisElement {
    pub multi_index: Vec<usize>,
    pub flat_index: usize,
}

impl LocalBasisElement {
    pub fn locality(&self) -> Locality {
        Locality(
            self.multi_index
                .iter()
                .enumerate()
                .filter(|(_, &j)| j != 0)
                .fold(0, |acc, (m, _)| acc | 1 << m),
        )
    }

    /// Dense matrix in the standard frame.
    pub fn matrix(&self, partition: &SubsystemPartition) -> DenseOperator {
        let frame = LocalFrame::standard(partition);
        DenseOperator::new(frame.element_matrix(&self.multi_index), partition.clone())
            .expect("element has the partition dimension")
    }

    /// Pauli label such as `"XIZ"`, for qubit factors.
    pub fn pauli_label(&self) -> Option<String> {
        self.multi_index
            .iter()
            .map(|&j| ['I', 'X', 'Y', 'Z'].get(j).copied())
            .collect()
    }
}

/// Multi-indices of the `d_κ` basis elements in sector `κ`, in flat-index order.
pub fn sector_indices(partition: &SubsystemPartition, k: Locality) -> Result<Vec<usize>> {
    partition.check_locality(k)?;
    let dims = partition.dims();
    let strides = basis_strides(dims);
    let mut out = vec![0usize];
    for m in 0..dims.len() {
        if !k.is_active(m) {
            continue;
        }
        let n = dims[m] * dims[m];
        let stride = strides[m];
        out = out
            .iter()
            .flat_map(|&base| (1..n).map(move |j| base + j * stride))
            .collect();
    }
    out.sort_unstable();
    Ok(out)
}

/// Decodes a flat basis index into its multi-index.
pub fn multi_index(partition: &SubsystemPartition, flat: usize) -> Vec<usize> {
    let dims = partition.dims();
    let strides = basis_strides(dims);
    (0..dims.len())
        .map(|m| flat / strides[m] % (dims[m] * dims[m]))
        .collect()
}

/// All basis elements acting non-trivially on exactly the subsystems of `κ`.
pub fn enumerate_basis(
    partition: &SubsystemPartition,
    k: Locality,
) -> Result<Vec<LocalBasisElement>> {
    Ok(sector_indices(partition, k)?
        .into_iter()
        .map(|flat| LocalBasisElement {
            multi_index: multi_index(partition, flat),
            flat_index: flat,
        })
        .collect())
}

/// Same as [`enumerate_basis`] with `κ` given as a bitstring, subsystem 0 first.
pub fn enumerate_basis_str(
    partition: &SubsystemPartition,
    k: &str,
) -> Result<Vec<LocalBasisElement>> {
    if k.len() != partition.num_subsystems() {
        return invalid(format!(
            "locality string {k:?} has length {} but the partition has {} subsystems",
            k.len(),
            partition.num_subsystems()
        ));
    }
    enumerate_basis(partition, k.parse()?)
}

/// Real transfer matrix `R[i, j] = Tr[P_i Λ(P_j)]` of a small map, in the
/// standard frame of the given partition.
pub(crate) fn transfer_matrix<F>(partition: &SubsystemPartition, map: F) -> Result<nalgebra::DMatrix<f64>>
where
    F: Fn(&CMatrix) -> Result<CMatrix>,
{
    let frame = LocalFrame::standard(partition);
    let n = partition.dim() * partition.dim();
    let mut out = nalgebra::DMatrix::zeros(n, n);
    for j in 0..n {
        let element = frame.element_matrix(&multi_index(partition, j));
        let image = map(&element)?;
        for (i, c) in frame.coefficients(&image)?.into_iter().enumerate() {
            out[(i, j)] = c.re;
        }
    }
    Ok(out)
}
