//! Locality vectors and the `d_κ`-weighted scalar product.

use serde::{Deserialize, Serialize};

use crate::basis::{locality_table, LocalFrame};
use crate::error::{invalid, Result};
use crate::operator::{CMatrix, DenseOperator, C64};
use crate::partition::{Locality, SubsystemPartition};

/// Squared Hilbert–Schmidt mass of an operator per locality sector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalityVector {
    partition: SubsystemPartition,
    weights: Vec<f64>,
}

impl LocalityVector {
    /// Builds a vector from explicit weights in bitmask order.
    pub fn from_weights(partition: &SubsystemPartition, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != partition.num_localities() {
            return invalid(format!(
                "{} weights given for {} localities",
                weights.len(),
                partition.num_localities()
            ));
        }
        if let Some(w) = weights.iter().find(|w| **w < 0.0 || !w.is_finite()) {
            return invalid(format!("locality weight {w} is not a finite non-negative number"));
        }
        Ok(LocalityVector {
            partition: partition.clone(),
            weights,
        })
    }

    pub fn zeros(partition: &SubsystemPartition) -> Self {
        LocalityVector {
            partition: partition.clone(),
            weights: vec![0.0; partition.num_localities()],
        }
    }

    /// A unit mass on a single sector.
    pub fn unit(partition: &SubsystemPartition, k: Locality) -> Result<Self> {
        partition.check_locality(k)?;
        let mut v = Self::zeros(partition);
        v.weights[k.0] = 1.0;
        Ok(v)
    }

    /// `ℓ_A` in the standard local frame.
    pub fn from_operator(a: &DenseOperator) -> Result<Self> {
        Self::from_operator_in_frame(a, &LocalFrame::standard(a.partition()))
    }

    /// `ℓ_A` computed with an arbitrary local frame; the result does not depend
    /// on the frame up to rounding.
    pub fn from_operator_in_frame(a: &DenseOperator, frame: &LocalFrame) -> Result<Self> {
        a.partition().ensure_same(frame.partition())?;
        Self::from_matrix(frame, a.matrix())
    }

    pub(crate) fn from_matrix(frame: &LocalFrame, a: &CMatrix) -> Result<Self> {
        let coeffs = frame.coefficients(a)?;
        Ok(Self::from_coefficients(frame.partition(), &coeffs))
    }

    pub(crate) fn from_coefficients(partition: &SubsystemPartition, coeffs: &[C64]) -> Self {
        let table = locality_table(partition);
        let mut weights = vec![0.0; partition.num_localities()];
        for (c, &k) in coeffs.iter().zip(&table) {
            weights[k as usize] += c.norm_sqr();
        }
        LocalityVector {
            partition: partition.clone(),
            weights,
        }
    }

    pub fn partition(&self) -> &SubsystemPartition {
        &self.partition
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn get(&self, k: Locality) -> f64 {
        self.weights[k.0]
    }

    /// `Σ_κ ℓ_κ`, which equals `‖A‖₂²` for `ℓ = ℓ_A`.
    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Copy keeping only the sectors selected by `keep`.
    pub fn restricted(&self, keep: impl Fn(Locality) -> bool) -> Self {
        let weights = self
            .weights
            .iter()
            .enumerate()
            .map(|(k, &w)| if keep(Locality(k)) { w } else { 0.0 })
            .collect();
        LocalityVector {
            partition: self.partition.clone(),
            weights,
        }
    }

    /// Copy with the trivial sector removed.
    pub fn traceless_part(&self) -> Self {
        self.restricted(|k| k != Locality::TRIVIAL)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        LocalityVector {
            partition: self.partition.clone(),
            weights: self.weights.iter().map(|w| w * factor).collect(),
        }
    }

    pub(crate) fn as_dvector(&self) -> nalgebra::DVector<f64> {
        nalgebra::DVector::from_column_slice(&self.weights)
    }
}

/// `(a, b) = Σ_κ a_κ b_κ / d_κ`.
pub fn weighted_dot(a: &LocalityVector, b: &LocalityVector) -> Result<f64> {
    a.partition.ensure_same(&b.partition)?;
    Ok(weighted_dot_slices(a.partition.sector_dims(), &a.weights, &b.weights))
}

pub(crate) fn weighted_dot_slices(dims: &[f64], a: &[f64], b: &[f64]) -> f64 {
    dims.iter()
        .zip(a.iter().zip(b))
        .map(|(d, (x, y))| x * y / d)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{ghz_state, pauli_string, zero_state};

    #[test]
    fn single_qubit_z_and_zero_state() {
        let p = SubsystemPartition::qubits(1).unwrap();
        let rho = LocalityVector::from_operator(&zero_state(&p)).unwrap();
        assert!((rho.weights()[0] - 0.5).abs() < 1e-15);
        assert!((rho.weights()[1] - 0.5).abs() < 1e-15);
        let z = DenseOperator::new(pauli_string("Z").unwrap(), p.clone()).unwrap();
        let h = LocalityVector::from_operator(&z).unwrap();
        assert!((weighted_dot(&rho, &h).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn z_on_first_qubit_is_pure_sector() {
        let p = SubsystemPartition::qubits(2).unwrap();
        let z = DenseOperator::new(pauli_string("ZI").unwrap(), p.clone()).unwrap();
        let l = LocalityVector::from_operator(&z).unwrap();
        let expected = [0.0, 4.0, 0.0, 0.0];
        for (w, e) in l.weights().iter().zip(expected) {
            assert!((w - e).abs() < 1e-12);
        }
    }

    #[test]
    fn ghz_mass_sits_on_even_weight_or_full_sectors() {
        let p = SubsystemPartition::qubits(4).unwrap();
        let l = LocalityVector::from_operator(&ghz_state(&p).unwrap()).unwrap();
        for k in p.localities() {
            if k.weight() % 2 == 1 && k.weight() != 4 {
                assert!(l.get(k) < 1e-14);
            }
        }
        assert!((l.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_negative_weights() {
        let p = SubsystemPartition::qubits(1).unwrap();
        assert!(LocalityVector::from_weights(&p, vec![1.0, -0.1]).is_err());
        assert!(LocalityVector::from_weights(&p, vec![1.0]).is_err());
    }
}
