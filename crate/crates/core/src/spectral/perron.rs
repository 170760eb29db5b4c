//! Perron–Frobenius eigenpairs of irreducible non-negative matrices.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Leading eigenvalue with strictly positive eigenvectors, normalized so
/// that `right` sums to one and `leftᵗ right = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerronPair {
    pub radius: f64,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

const MAX_ITERATIONS: usize = 100_000;
const TOLERANCE: f64 = 1e-12;

/// Perron pair of an irreducible non-negative matrix.
///
/// The radius comes from a dense eigenvalue solve (the block sizes here are
/// at most `2^M`); the vectors from inverse iteration with a shift just
/// above the radius, where `σ − T` is a non-singular M-matrix with a positive
/// inverse. Power iteration on `(1 + T)/2` is the fallback.
pub fn perron(block: &DMatrix<f64>) -> Result<PerronPair> {
    let n = block.nrows();
    if n == 0 || block.ncols() != n {
        return invalid("Perron analysis requires a non-empty square matrix");
    }
    if block.iter().any(|x| *x < 0.0 || !x.is_finite()) {
        return invalid("Perron analysis requires a finite non-negative matrix");
    }
    if n == 1 {
        return Ok(PerronPair {
            radius: block[(0, 0)],
            left: vec![1.0],
            right: vec![1.0],
        });
    }
    let scale = block.amax().max(f64::MIN_POSITIVE);
    let estimate = block
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0f64, f64::max);

    let right = leading_vector(block, estimate, scale)?;
    let left = leading_vector(&block.transpose(), estimate, scale)?;
    let t_right = block * &right;
    let radius = left.dot(&t_right) / left.dot(&right);
    let residual = (&t_right - &right * radius).amax();
    if residual > 1e-10 * scale {
        return Err(Error::NumericalFailure {
            message: "Perron vector residual above tolerance".into(),
            residual,
        });
    }
    let right = &right / right.sum();
    let left = &left / left.dot(&right);
    Ok(PerronPair {
        radius,
        left: left.iter().copied().collect(),
        right: right.iter().copied().collect(),
    })
}

fn leading_vector(m: &DMatrix<f64>, estimate: f64, scale: f64) -> Result<DVector<f64>> {
    let n = m.nrows();
    let shift = estimate + scale * 1e-9 + 1e-14;
    let shifted = DMatrix::identity(n, n) * shift - m;
    if let Some(lu) = shifted.lu().try_inverse() {
        let mut x = DVector::from_element(n, 1.0 / n as f64);
        for _ in 0..50 {
            let next = &lu * &x;
            let norm = next.sum().abs();
            if !norm.is_finite() || norm == 0.0 {
                break;
            }
            let next = next / norm;
            let delta = (&next - &x).amax();
            x = next;
            if delta < TOLERANCE {
                break;
            }
        }
        if x.iter().all(|v| v.is_finite() && *v > 0.0) {
            let residual = (m * &x - &x * estimate).amax();
            if residual <= 1e-9 * scale {
                return Ok(x);
            }
        }
    }
    power_iteration(m, scale)
}

fn power_iteration(m: &DMatrix<f64>, scale: f64) -> Result<DVector<f64>> {
    let n = m.nrows();
    let lazy = (DMatrix::identity(n, n) * scale + m) / (2.0 * scale);
    let mut x = DVector::from_element(n, 1.0 / n as f64);
    let mut delta = f64::INFINITY;
    for _ in 0..MAX_ITERATIONS {
        let next = &lazy * &x;
        let next = &next / next.sum();
        delta = (&next - &x).amax();
        x = next;
        if delta < TOLERANCE {
            return Ok(x);
        }
    }
    Err(Error::NumericalFailure {
        message: "power iteration did not converge".into(),
        residual: delta,
    })
}
