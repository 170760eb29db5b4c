//! Canonical form of single-qubit channels under unitary pre- and
//! post-processing.

use nalgebra::{DMatrix, Matrix3, Vector3};

use crate::basis::transfer_matrix;
use crate::channels::Channel;
use crate::error::{invalid, Error, Result};
use crate::operator::{pauli, CMatrix, C64};
use crate::partition::SubsystemPartition;

/// `(t, λ, U, V)` such that `N'(·) = U† N(V† · V) U` acts on normalized
/// Paulis as `P₀ ↦ P₀ + Σ t_i P_i` and `P_i ↦ λ_i P_i`.
#[derive(Debug, Clone)]
pub struct SingleQubitNormalForm {
    pub t: [f64; 3],
    pub lambda: [f64; 3],
    /// Unitary applied after the channel (as `U† · U`).
    pub u: CMatrix,
    /// Unitary applied before the channel (as `V† · V`).
    pub v: CMatrix,
}

impl SingleQubitNormalForm {
    /// Bloch-ball image of `α` under the normal form.
    pub fn image(&self, alpha: [f64; 3]) -> [f64; 3] {
        std::array::from_fn(|i| self.t[i] + self.lambda[i] * alpha[i])
    }
}

/// Real 4×4 transfer matrix `R[i, j] = Tr[P_i N(P_j)]` of a qubit channel.
pub fn pauli_transfer_matrix(channel: &Channel) -> Result<DMatrix<f64>> {
    let qubit = SubsystemPartition::qubits(1)?;
    channel.check_partition(&qubit)?;
    transfer_matrix(&qubit, |e| channel.act(&qubit, e, false))
}

/// Computes the normal form of a single-qubit channel.
pub fn normal_form(channel: &Channel) -> Result<SingleQubitNormalForm> {
    if channel.dim() != Some(2) {
        return invalid("normal form requires a single-qubit channel");
    }
    let r = pauli_transfer_matrix(channel)?;
    let m = Matrix3::from_fn(|i, j| r[(i + 1, j + 1)]);
    let t = Vector3::from_fn(|i, _| r[(i + 1, 0)]);

    let off_diagonal = (0..3)
        .flat_map(|i| (0..3).filter(move |&j| j != i).map(move |j| (i, j)))
        .fold(0.0f64, |acc, (i, j)| acc.max(m[(i, j)].abs()));
    let (a, sigma, b) = if off_diagonal < 1e-12 {
        (Matrix3::identity(), m.diagonal(), Matrix3::identity())
    } else {
        signed_svd(&m)?
    };

    let u = su2_from_rotation(&a)?;
    let v = su2_from_rotation(&b.transpose())?;
    let t_prime = a.transpose() * t;
    let form = SingleQubitNormalForm {
        t: [t_prime[0], t_prime[1], t_prime[2]],
        lambda: [sigma[0], sigma[1], sigma[2]],
        u,
        v,
    };
    verify(channel, &form)?;
    Ok(form)
}

/// `M = A diag(σ) Bᵗ` with `A, B ∈ SO(3)`, `|σ|` descending, and any sign
/// needed for `det` consistency carried by `σ_3`.
fn signed_svd(m: &Matrix3<f64>) -> Result<(Matrix3<f64>, Vector3<f64>, Matrix3<f64>)> {
    let svd = m.svd(true, true);
    let (Some(u), Some(vt)) = (svd.u, svd.v_t) else {
        return Err(Error::NumericalFailure {
            message: "SVD of the Bloch block did not return singular vectors".into(),
            residual: f64::NAN,
        });
    };
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let mut a = Matrix3::from_fn(|r, c| u[(r, order[c])]);
    let mut b = Matrix3::from_fn(|r, c| vt[(order[c], r)]);
    let mut sigma = Vector3::from_fn(|i, _| svd.singular_values[order[i]]);
    if a.determinant() < 0.0 {
        a.column_mut(2).neg_mut();
        sigma[2] = -sigma[2];
    }
    if b.determinant() < 0.0 {
        b.column_mut(2).neg_mut();
        sigma[2] = -sigma[2];
    }
    Ok((a, sigma, b))
}

/// Unitary `W` with `W σ_i W† = Σ_k O[k, i] σ_k` for a rotation `O`.
pub fn su2_from_rotation(o: &Matrix3<f64>) -> Result<CMatrix> {
    let rot = nalgebra::Rotation3::from_matrix_unchecked(*o);
    let q = nalgebra::UnitQuaternion::from_rotation_matrix(&rot);
    let (w, x, y, z) = (q.w, q.i, q.j, q.k);
    let sigmas = [pauli('X'), pauli('Y'), pauli('Z')];
    let candidate = CMatrix::identity(2, 2).scale(w)
        - (sigmas[0].scale(x) + sigmas[1].scale(y) + sigmas[2].scale(z)) * C64::new(0.0, 1.0);
    let residual = |wm: &CMatrix| {
        (0..3)
            .map(|i| {
                let lhs = wm * &sigmas[i] * wm.adjoint();
                let rhs = (0..3).fold(CMatrix::zeros(2, 2), |acc, k| acc + sigmas[k].scale(o[(k, i)]));
                crate::operator::max_abs(&(lhs - rhs))
            })
            .fold(0.0f64, f64::max)
    };
    for w_mat in [candidate.clone(), candidate.adjoint()] {
        if residual(&w_mat) < 1e-9 {
            return Ok(w_mat);
        }
    }
    Err(Error::NumericalFailure {
        message: "rotation could not be lifted to SU(2)".into(),
        residual: residual(&candidate),
    })
}

fn verify(channel: &Channel, form: &SingleQubitNormalForm) -> Result<()> {
    let conjugated = Channel::composition(vec![
        Channel::unitary(form.v.adjoint())?,
        channel.clone(),
        Channel::unitary(form.u.adjoint())?,
    ])?;
    let r = pauli_transfer_matrix(&conjugated)?;
    let mut expected = DMatrix::zeros(4, 4);
    expected[(0, 0)] = 1.0;
    for i in 0..3 {
        expected[(i + 1, 0)] = form.t[i];
        expected[(i + 1, i + 1)] = form.lambda[i];
    }
    let residual = (r - expected).amax();
    if residual > 1e-8 {
        return Err(Error::NumericalFailure {
            message: "normal form does not reproduce the transfer matrix".into(),
            residual,
        });
    }
    Ok(())
}
