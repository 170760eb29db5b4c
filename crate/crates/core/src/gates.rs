//! Standard gates and the entangling circuits used in the experiments.
//!
//! Two-qubit gate matrices take their first site as the most significant
//! tensor factor, so `cnot()` placed on sites `[c, t]` is controlled by `c`.

use crate::channels::Channel;
use crate::error::{invalid, Result};
use crate::operator::{pauli, CMatrix, C64, ONE, ZERO};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn hadamard() -> CMatrix {
    (pauli('X') + pauli('Z')).scale(std::f64::consts::FRAC_1_SQRT_2)
}

pub fn phase_s() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, c(0.0, 1.0)])
}

/// `RX(θ) = e^{iθX/2}`.
pub fn rx(theta: f64) -> CMatrix {
    let (s, co) = (theta / 2.0).sin_cos();
    CMatrix::from_row_slice(2, 2, &[c(co, 0.0), c(0.0, s), c(0.0, s), c(co, 0.0)])
}

/// `RY(θ) = e^{iθY/2}`.
pub fn ry(theta: f64) -> CMatrix {
    let (s, co) = (theta / 2.0).sin_cos();
    CMatrix::from_row_slice(2, 2, &[c(co, 0.0), c(s, 0.0), c(-s, 0.0), c(co, 0.0)])
}

/// `RZ(θ) = e^{iθZ/2}`.
pub fn rz(theta: f64) -> CMatrix {
    let (s, co) = (theta / 2.0).sin_cos();
    CMatrix::from_row_slice(2, 2, &[c(co, s), ZERO, ZERO, c(co, -s)])
}

pub fn cnot() -> CMatrix {
    controlled(&pauli('X'))
}

pub fn cz() -> CMatrix {
    controlled(&pauli('Z'))
}

pub fn swap() -> CMatrix {
    let mut m = CMatrix::zeros(4, 4);
    m[(0, 0)] = ONE;
    m[(1, 2)] = ONE;
    m[(2, 1)] = ONE;
    m[(3, 3)] = ONE;
    m
}

/// `|0⟩⟨0| ⊗ 1 + |1⟩⟨1| ⊗ RX(θ)`.
pub fn crx(theta: f64) -> CMatrix {
    controlled(&rx(theta))
}

/// `|0⟩⟨0| ⊗ 1 + |1⟩⟨1| ⊗ U` for a single-qubit `U`.
pub fn controlled(u: &CMatrix) -> CMatrix {
    let mut m = CMatrix::identity(4, 4);
    m.view_mut((2, 2), (2, 2)).copy_from(u);
    m
}

/// A unitary gate on the given sites, as a channel.
pub fn gate(sites: Vec<usize>, u: CMatrix) -> Result<Channel> {
    Channel::local(sites, Channel::unitary(u)?)
}

/// `CNOT(k, k+1)` for `k = 0, …, n−2`, applied in that order.
pub fn cnot_cascade(n: usize) -> Result<Vec<Channel>> {
    ladder(n, cnot())
}

/// Two consecutive forward CNOT cascades.
pub fn cnot_double_cascade(n: usize) -> Result<Channel> {
    let mut gates = cnot_cascade(n)?;
    gates.extend(cnot_cascade(n)?);
    Channel::composition(gates)
}

/// `CRX_θ(k, k+1)` for `k = 0, …, n−2`.
pub fn crx_cascade(n: usize, theta: f64) -> Result<Channel> {
    Channel::composition(ladder(n, crx(theta))?)
}

fn ladder(n: usize, u: CMatrix) -> Result<Vec<Channel>> {
    if n < 2 {
        return invalid("a cascade needs at least two qubits");
    }
    (0..n - 1).map(|k| gate(vec![k, k + 1], u.clone())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::max_abs;

    #[test]
    fn gates_are_unitary() {
        for g in [hadamard(), phase_s(), rx(0.3), ry(1.1), rz(-0.7), cnot(), cz(), swap(), crx(0.2)] {
            let d = g.nrows();
            assert!(max_abs(&(g.adjoint() * &g - CMatrix::identity(d, d))) < 1e-14);
        }
    }

    #[test]
    fn rx_matches_exponential() {
        let theta = 0.37;
        let generator = pauli('X') * C64::new(0.0, theta / 2.0);
        assert!(max_abs(&(generator.exp() - rx(theta))) < 1e-14);
    }

    #[test]
    fn cnot_flips_target_when_control_set() {
        let g = cnot();
        assert_eq!(g[(3, 2)], ONE);
        assert_eq!(g[(1, 1)], ONE);
    }
}
