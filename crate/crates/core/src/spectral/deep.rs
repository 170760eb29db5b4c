//! Limits of `T^L` as `L → ∞`: Perron projectors, absorption through the
//! inessential part, and residue-class limits for periodic blocks.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::decompose::CanonicalDecomposition;
use super::perron::perron;
use super::scc::lcm;
use crate::error::{invalid, Error, Result};

/// Inessential radii at or above `1 − SINGULAR_MARGIN` make `1 − Q` singular.
pub const SINGULAR_MARGIN: f64 = 1e-12;

/// Absorption matrix, essential rows × inessential columns.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Absorption {
    /// Original indices of the rows.
    pub rows: Vec<usize>,
    /// Original indices of the columns.
    pub cols: Vec<usize>,
    pub matrix: DMatrix<f64>,
    /// `true` when periodic blocks forced the Cesàro-averaged form.
    pub cesaro: bool,
}

impl Absorption {
    /// Embeds the matrix in the original index space, zero elsewhere.
    pub fn to_full(&self, n: usize) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(n, n);
        for (i, &r) in self.rows.iter().enumerate() {
            for (j, &c) in self.cols.iter().enumerate() {
                out[(r, c)] = self.matrix[(i, j)];
            }
        }
        out
    }
}

/// Limits of `T^L` along each residue class of `L` modulo the period.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeepLimit {
    /// Least common multiple of the periods of the unit-radius essential blocks.
    pub period: usize,
    /// `T^L` itself converges, i.e. `period == 1`.
    pub converged: bool,
    /// `residues[m] = lim_k T^{k·period + m}`, in original coordinates.
    pub residues: Vec<DMatrix<f64>>,
    /// Average of the residue limits, the Cesàro limit of `T^L`.
    pub cesaro: DMatrix<f64>,
}

impl DeepLimit {
    /// Limit matrix for depth `l` (its residue class).
    pub fn for_depth(&self, l: usize) -> &DMatrix<f64> {
        &self.residues[l % self.period]
    }
}

fn check_radii(dec: &CanonicalDecomposition) -> Result<()> {
    let tol = dec.options.unit_tolerance;
    if let Some(b) = dec.essential_blocks().find(|b| b.radius > 1.0 + tol) {
        return invalid(format!(
            "essential block {:?} has radius {} > 1; powers diverge",
            b.indices, b.radius
        ));
    }
    if !dec.inessential.is_empty() && dec.q_radius >= 1.0 - SINGULAR_MARGIN {
        return Err(Error::SingularAbsorption { radius: dec.q_radius });
    }
    Ok(())
}

fn deep_period(dec: &CanonicalDecomposition) -> usize {
    dec.unit_blocks().map(|b| b.period).fold(1, lcm)
}

fn inverse(m: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    if n == 0 {
        return Ok(m);
    }
    m.try_inverse().ok_or(Error::NumericalFailure {
        message: "matrix 1 − Q is numerically singular".into(),
        residual: f64::NAN,
    })
}

/// `A = R(1 − Q)⁻¹` when every unit-radius essential block is aperiodic;
/// otherwise the Cesàro absorption `(1/p) Σ_m [T^{(p∞)} A^{(m)} + A^{(p∞)} Q^m]`.
pub fn absorption(dec: &CanonicalDecomposition) -> Result<Absorption> {
    check_radii(dec)?;
    let period = deep_period(dec);
    let matrix = if period == 1 {
        let q = dec.q.nrows();
        &dec.r * inverse(DMatrix::identity(q, q) - &dec.q)?
    } else {
        let parts = residue_parts(dec, period)?;
        let mut sum = DMatrix::zeros(dec.essential.len(), dec.inessential.len());
        for (_, coupling) in &parts {
            sum += coupling;
        }
        sum / period as f64
    };
    Ok(Absorption {
        rows: dec.essential.clone(),
        cols: dec.inessential.clone(),
        matrix,
        cesaro: period > 1,
    })
}

/// `T^{(p∞)} = lim_k T_E^{kp}`, block diagonal over essential blocks, in
/// canonical essential coordinates.
fn essential_projector(dec: &CanonicalDecomposition) -> Result<DMatrix<f64>> {
    let e = dec.essential.len();
    let tol = dec.options.unit_tolerance;
    let mut out = DMatrix::zeros(e, e);
    let mut offset = 0;
    for block in dec.essential_blocks() {
        let size = block.indices.len();
        if block.is_unit(tol) {
            let sub = dec.t_essential.view((offset, offset), (size, size)).clone_owned();
            let power = matrix_power(&sub, block.period);
            for class in 0..block.period {
                let members: Vec<usize> = (0..size).filter(|&i| block.cyclic_class[i] == class).collect();
                let class_block =
                    DMatrix::from_fn(members.len(), members.len(), |i, j| power[(members[i], members[j])]);
                let pair = perron(&class_block)?;
                for (i, &a) in members.iter().enumerate() {
                    for (j, &b) in members.iter().enumerate() {
                        out[(offset + a, offset + b)] = pair.right[i] * pair.left[j];
                    }
                }
            }
        }
        offset += size;
    }
    Ok(out)
}

/// For each residue `m < period`: the essential-block limit
/// `T^{(p∞)} T_E^m` and the coupling limit `T^{(p∞)} A^{(m)} + A^{(p∞)} Q^m`.
fn residue_parts(dec: &CanonicalDecomposition, period: usize) -> Result<Vec<(DMatrix<f64>, DMatrix<f64>)>> {
    let e = dec.essential.len();
    let q = dec.inessential.len();
    let projector = essential_projector(dec)?;

    // A^{(m)} for m = 0..=period, via A^{(m+1)} = T_E A^{(m)} + R Q^m.
    let mut couplings = vec![DMatrix::zeros(e, q)];
    let mut q_powers = vec![DMatrix::identity(q, q)];
    for m in 0..period {
        let next = &dec.t_essential * &couplings[m] + &dec.r * &q_powers[m];
        couplings.push(next);
        q_powers.push(&q_powers[m] * &dec.q);
    }
    let a_limit = &projector * &couplings[period] * inverse(DMatrix::identity(q, q) - &q_powers[period])?;

    let mut parts = Vec::with_capacity(period);
    let mut t_power = DMatrix::identity(e, e);
    for m in 0..period {
        let block = &projector * &t_power;
        let coupling = &projector * &couplings[m] + &a_limit * &q_powers[m];
        parts.push((block, coupling));
        t_power = &t_power * &dec.t_essential;
    }
    Ok(parts)
}

/// Assembles the deep-circuit limit of `T^L`.
pub fn deep_limit_matrix(dec: &CanonicalDecomposition) -> Result<DeepLimit> {
    check_radii(dec)?;
    let period = deep_period(dec);
    let n = dec.dim();
    let parts = residue_parts(dec, period)?;
    let mut residues = Vec::with_capacity(period);
    for (block, coupling) in &parts {
        let mut full = DMatrix::zeros(n, n);
        for (i, &r) in dec.essential.iter().enumerate() {
            for (j, &c) in dec.essential.iter().enumerate() {
                full[(r, c)] = block[(i, j)];
            }
            for (j, &c) in dec.inessential.iter().enumerate() {
                full[(r, c)] = coupling[(i, j)];
            }
        }
        residues.push(full);
    }
    let cesaro = residues.iter().fold(DMatrix::zeros(n, n), |acc, m| acc + m) / period as f64;
    Ok(DeepLimit {
        period,
        converged: period == 1,
        residues,
        cesaro,
    })
}

pub(crate) fn matrix_power(m: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let n = m.nrows();
    let mut result = DMatrix::identity(n, n);
    let mut base = m.clone();
    let mut e = k;
    while e > 0 {
        if e & 1 == 1 {
            result = &result * &base;
        }
        base = &base * &base;
        e >>= 1;
    }
    result
}
