//! Completely positive maps and their Hilbert–Schmidt adjoints.

use crate::error::{invalid, Error, Result};
use crate::operator::{
    hermitian_eigenvalues, is_hermitian, max_abs, CMatrix, DenseOperator, SiteMap, C64,
};
use crate::partition::SubsystemPartition;

/// Tolerance for unitarity, trace preservation and state validity checks.
pub const VALIDATION_TOL: f64 = 1e-10;

/// Default ceiling on the number of Kraus operators produced by flattening.
pub const DEFAULT_KRAUS_LIMIT: usize = 64;

/// The representation of a [`Channel`].
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelKind {
    /// `ρ ↦ UρU†` on the full space.
    Unitary(CMatrix),
    /// `ρ ↦ Σ_i K_i ρ K_i†` on the full space.
    Kraus(Vec<CMatrix>),
    /// `ρ ↦ (1−p)·inner(ρ) + p·Tr[ρ]·ρ̃`.
    MixtureWithReplacement {
        p: f64,
        fixed_point: CMatrix,
        inner: Box<Channel>,
    },
    /// One single-qubit channel per qubit, in subsystem order.
    TensorSingleQubit(Vec<Channel>),
    /// Sequential application, first element first.
    Composition(Vec<Channel>),
    /// A small channel acting on the listed subsystems only. `kraus` caches
    /// the flattened Kraus form of `inner` on the local space.
    Local {
        sites: Vec<usize>,
        inner: Box<Channel>,
        kraus: Vec<CMatrix>,
    },
}

/// A completely positive map, validated on construction.
///
/// Every public constructor except [`Channel::kraus_unnormalized`] produces a
/// trace-preserving map.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    kind: ChannelKind,
}

impl Channel {
    pub fn kind(&self) -> &ChannelKind {
        &self.kind
    }

    pub fn identity(d: usize) -> Self {
        Channel {
            kind: ChannelKind::Unitary(CMatrix::identity(d, d)),
        }
    }

    pub fn unitary(u: CMatrix) -> Result<Self> {
        let d = u.nrows();
        if u.ncols() != d || d == 0 {
            return invalid("unitary must be square and non-empty");
        }
        let err = max_abs(&(u.adjoint() * &u - CMatrix::identity(d, d)));
        if err > VALIDATION_TOL {
            return invalid(format!("matrix is not unitary (‖U†U − 1‖ = {err:e})"));
        }
        Ok(Channel {
            kind: ChannelKind::Unitary(u),
        })
    }

    /// A trace-preserving Kraus channel.
    pub fn kraus(ops: Vec<CMatrix>) -> Result<Self> {
        let ch = Self::kraus_unnormalized(ops)?;
        if let ChannelKind::Kraus(ops) = &ch.kind {
            let d = ops[0].nrows();
            let sum = ops
                .iter()
                .fold(CMatrix::zeros(d, d), |acc, k| acc + k.adjoint() * k);
            let err = max_abs(&(sum - CMatrix::identity(d, d)));
            if err > VALIDATION_TOL {
                return invalid(format!("Kraus operators are not trace preserving (error {err:e})"));
            }
        }
        Ok(ch)
    }

    /// A completely positive map from Kraus operators with no trace
    /// condition, e.g. a single member `A ↦ E_φ A E_φ†` of an unravelling.
    pub fn kraus_unnormalized(ops: Vec<CMatrix>) -> Result<Self> {
        let Some(first) = ops.first() else {
            return invalid("at least one Kraus operator is required");
        };
        let d = first.nrows();
        if d == 0 || ops.iter().any(|k| k.nrows() != d || k.ncols() != d) {
            return invalid("Kraus operators must be square with a common dimension");
        }
        Ok(Channel {
            kind: ChannelKind::Kraus(ops),
        })
    }

    /// `(1−p)·inner + p·Tr[·]·ρ̃`.
    pub fn mixture_with_replacement(p: f64, fixed_point: CMatrix, inner: Channel) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return invalid(format!("replacement probability {p} outside [0, 1]"));
        }
        validate_state(&fixed_point)?;
        if let Some(d) = inner.dim() {
            if d != fixed_point.nrows() {
                return invalid("fixed point and inner channel dimensions differ");
            }
        }
        Ok(Channel {
            kind: ChannelKind::MixtureWithReplacement {
                p,
                fixed_point,
                inner: Box::new(inner),
            },
        })
    }

    pub fn tensor_single_qubit(channels: Vec<Channel>) -> Result<Self> {
        if channels.is_empty() {
            return invalid("tensor product needs at least one factor");
        }
        if channels.iter().any(|c| c.dim() != Some(2)) {
            return invalid("every factor must be a single-qubit channel");
        }
        Ok(Channel {
            kind: ChannelKind::TensorSingleQubit(channels),
        })
    }

    /// Applies `channels[0]` first.
    pub fn composition(channels: Vec<Channel>) -> Result<Self> {
        if channels.is_empty() {
            return invalid("composition needs at least one channel");
        }
        let dims: Vec<usize> = channels.iter().filter_map(Channel::dim).collect();
        if dims.windows(2).any(|w| w[0] != w[1]) {
            return invalid("composed channels have different dimensions");
        }
        Ok(Channel {
            kind: ChannelKind::Composition(channels),
        })
    }

    /// Embeds a channel acting on `sites` (in the listed order) into the
    /// full space; identity elsewhere.
    pub fn local(sites: Vec<usize>, inner: Channel) -> Result<Self> {
        if sites.is_empty() {
            return invalid("a local channel needs at least one site");
        }
        for (i, s) in sites.iter().enumerate() {
            if sites[..i].contains(s) {
                return invalid(format!("repeated site {s}"));
            }
        }
        if inner.dim().is_none() {
            return invalid("the embedded channel must have a definite dimension");
        }
        let kraus = inner.to_kraus(DEFAULT_KRAUS_LIMIT)?;
        Ok(Channel {
            kind: ChannelKind::Local {
                sites,
                inner: Box::new(inner),
                kraus,
            },
        })
    }

    /// Hilbert-space dimension, when it does not depend on the partition.
    pub fn dim(&self) -> Option<usize> {
        match &self.kind {
            ChannelKind::Unitary(u) => Some(u.nrows()),
            ChannelKind::Kraus(ops) => Some(ops[0].nrows()),
            ChannelKind::MixtureWithReplacement { fixed_point, .. } => Some(fixed_point.nrows()),
            ChannelKind::TensorSingleQubit(chs) => Some(1 << chs.len()),
            ChannelKind::Composition(chs) => chs.iter().find_map(Channel::dim),
            ChannelKind::Local { .. } => None,
        }
    }

    /// Checks that the channel can act on operators of `partition`.
    pub fn check_partition(&self, partition: &SubsystemPartition) -> Result<()> {
        match &self.kind {
            ChannelKind::TensorSingleQubit(chs) => {
                if !partition.is_qubits() || partition.num_subsystems() != chs.len() {
                    return invalid(format!(
                        "{} single-qubit factors need a partition into {} qubits",
                        chs.len(),
                        chs.len()
                    ));
                }
                Ok(())
            }
            ChannelKind::Composition(chs) => chs.iter().try_for_each(|c| c.check_partition(partition)),
            ChannelKind::MixtureWithReplacement { inner, fixed_point, .. } => {
                if fixed_point.nrows() != partition.dim() {
                    return invalid("fixed point does not match the partition dimension");
                }
                inner.check_partition(partition)
            }
            ChannelKind::Local { sites, inner, .. } => {
                let m = partition.num_subsystems();
                if let Some(&bad) = sites.iter().find(|&&s| s >= m) {
                    return invalid(format!("site {bad} out of range for {m} subsystems"));
                }
                let local: usize = sites.iter().map(|&s| partition.dims()[s]).product();
                if inner.dim() != Some(local) {
                    return invalid(format!(
                        "local channel has dimension {:?} but its sites span {local}",
                        inner.dim()
                    ));
                }
                Ok(())
            }
            _ => match self.dim() {
                Some(d) if d == partition.dim() => Ok(()),
                other => invalid(format!(
                    "channel dimension {other:?} does not match the partition dimension {}",
                    partition.dim()
                )),
            },
        }
    }

    /// `Λ(ρ)`.
    pub fn apply(&self, rho: &DenseOperator) -> Result<DenseOperator> {
        self.check_partition(rho.partition())?;
        let out = self.act(rho.partition(), rho.matrix(), false)?;
        rho.with_matrix(out)
    }

    /// `Λ†(A)`, the Hilbert–Schmidt adjoint.
    pub fn apply_adjoint(&self, a: &DenseOperator) -> Result<DenseOperator> {
        self.check_partition(a.partition())?;
        let out = self.act(a.partition(), a.matrix(), true)?;
        a.with_matrix(out)
    }

    /// Matrix-level action; the partition has already been checked.
    pub(crate) fn act(&self, partition: &SubsystemPartition, a: &CMatrix, adjoint: bool) -> Result<CMatrix> {
        Ok(match &self.kind {
            ChannelKind::Unitary(u) => {
                if adjoint {
                    u.adjoint() * a * u
                } else {
                    u * a * u.adjoint()
                }
            }
            ChannelKind::Kraus(ops) => {
                let mut out = CMatrix::zeros(a.nrows(), a.ncols());
                for k in ops {
                    if adjoint {
                        out += k.adjoint() * a * k;
                    } else {
                        out += k * a * k.adjoint();
                    }
                }
                out
            }
            ChannelKind::MixtureWithReplacement { p, fixed_point, inner } => {
                let mut out = inner.act(partition, a, adjoint)?.scale(1.0 - p);
                if adjoint {
                    let overlap = crate::operator::trace_product(fixed_point, a);
                    for i in 0..out.nrows() {
                        out[(i, i)] += overlap * *p;
                    }
                } else {
                    out += fixed_point * (a.trace() * *p);
                }
                out
            }
            ChannelKind::TensorSingleQubit(chs) => {
                let mut out = a.clone();
                for (m, ch) in chs.iter().enumerate() {
                    let map = SiteMap::new(partition, &[m])?;
                    out = act_local(&map, &ch.to_kraus(DEFAULT_KRAUS_LIMIT)?, &out, adjoint);
                }
                out
            }
            ChannelKind::Composition(chs) => {
                let mut out = a.clone();
                if adjoint {
                    for ch in chs.iter().rev() {
                        out = ch.act(partition, &out, true)?;
                    }
                } else {
                    for ch in chs {
                        out = ch.act(partition, &out, false)?;
                    }
                }
                out
            }
            ChannelKind::Local { sites, kraus, .. } => {
                let map = SiteMap::new(partition, sites)?;
                act_local(&map, kraus, a, adjoint)
            }
        })
    }

    /// Flattens to Kraus operators on the channel's own space. Refuses when
    /// more than `limit` operators would be produced.
    pub fn to_kraus(&self, limit: usize) -> Result<Vec<CMatrix>> {
        let ops = match &self.kind {
            ChannelKind::Unitary(u) => vec![u.clone()],
            ChannelKind::Kraus(ops) => ops.clone(),
            ChannelKind::MixtureWithReplacement { p, fixed_point, inner } => {
                let d = fixed_point.nrows();
                let mut ops: Vec<CMatrix> = inner
                    .to_kraus(limit)?
                    .into_iter()
                    .map(|k| k.scale((1.0 - p).sqrt()))
                    .collect();
                if *p > 0.0 {
                    let herm = (fixed_point + fixed_point.adjoint()).scale(0.5);
                    let eig = herm.symmetric_eigen();
                    for (idx, &lambda) in eig.eigenvalues.iter().enumerate() {
                        if lambda <= 1e-14 {
                            continue;
                        }
                        let v = eig.eigenvectors.column(idx);
                        for b in 0..d {
                            let mut k = CMatrix::zeros(d, d);
                            k.column_mut(b).copy_from(&v.scale((p * lambda).sqrt()));
                            ops.push(k);
                        }
                    }
                }
                ops
            }
            ChannelKind::TensorSingleQubit(chs) => {
                let mut ops = vec![CMatrix::identity(1, 1)];
                for ch in chs {
                    let local = ch.to_kraus(limit)?;
                    ensure_count(ops.len() * local.len(), limit)?;
                    ops = ops
                        .iter()
                        .flat_map(|a| local.iter().map(move |b| a.kronecker(b)))
                        .collect();
                }
                ops
            }
            ChannelKind::Composition(chs) => {
                let d = self
                    .dim()
                    .ok_or_else(|| Error::InvalidArgument("composition of local channels has no intrinsic dimension".into()))?;
                let mut ops = vec![CMatrix::identity(d, d)];
                for ch in chs {
                    let next = ch.to_kraus(limit)?;
                    ensure_count(ops.len() * next.len(), limit)?;
                    ops = next
                        .iter()
                        .flat_map(|k| ops.iter().map(move |o| k * o))
                        .collect();
                }
                ops
            }
            ChannelKind::Local { .. } => {
                return invalid("a local channel needs a partition to be flattened; use to_kraus_on");
            }
        };
        ensure_count(ops.len(), limit)?;
        Ok(ops)
    }

    /// Flattens to Kraus operators on the full space of `partition`.
    pub fn to_kraus_on(&self, partition: &SubsystemPartition, limit: usize) -> Result<Vec<CMatrix>> {
        self.check_partition(partition)?;
        let d = partition.dim();
        match &self.kind {
            ChannelKind::Local { sites, kraus, .. } => {
                let map = SiteMap::new(partition, sites)?;
                let id = CMatrix::identity(d, d);
                Ok(kraus.iter().map(|k| map.left_mul(k, &id)).collect())
            }
            ChannelKind::Composition(chs) => {
                let mut ops = vec![CMatrix::identity(d, d)];
                for ch in chs {
                    let next = ch.to_kraus_on(partition, limit)?;
                    ensure_count(ops.len() * next.len(), limit)?;
                    ops = next
                        .iter()
                        .flat_map(|k| ops.iter().map(move |o| k * o))
                        .collect();
                }
                Ok(ops)
            }
            _ => self.to_kraus(limit),
        }
    }

    /// Whether the map is a single unitary conjugation (possibly composed
    /// of several). Checked structurally, not numerically.
    pub fn is_unitary(&self) -> bool {
        match &self.kind {
            ChannelKind::Unitary(_) => true,
            ChannelKind::Kraus(_) => false,
            ChannelKind::MixtureWithReplacement { p, inner, .. } => *p == 0.0 && inner.is_unitary(),
            ChannelKind::TensorSingleQubit(chs) | ChannelKind::Composition(chs) => {
                chs.iter().all(Channel::is_unitary)
            }
            ChannelKind::Local { inner, .. } => inner.is_unitary(),
        }
    }

    /// Choi matrix `Σ_{ab} |a⟩⟨b| ⊗ Λ(|a⟩⟨b|)` on `partition`.
    pub fn choi(&self, partition: &SubsystemPartition) -> Result<CMatrix> {
        self.check_partition(partition)?;
        let d = partition.dim();
        let mut out = CMatrix::zeros(d * d, d * d);
        for a in 0..d {
            for b in 0..d {
                let mut e = CMatrix::zeros(d, d);
                e[(a, b)] = C64::new(1.0, 0.0);
                let img = self.act(partition, &e, false)?;
                out.view_mut((a * d, b * d), (d, d)).copy_from(&img);
            }
        }
        Ok(out)
    }
}

fn act_local(map: &SiteMap, kraus: &[CMatrix], a: &CMatrix, adjoint: bool) -> CMatrix {
    let mut out = CMatrix::zeros(a.nrows(), a.ncols());
    for k in kraus {
        let g = if adjoint { k.adjoint() } else { k.clone() };
        out += map.conjugate(&g, a);
    }
    out
}

fn ensure_count(count: usize, limit: usize) -> Result<()> {
    if count > limit {
        return Err(Error::KrausLimit { count, limit });
    }
    Ok(())
}

/// Checks that `rho` is a density matrix within [`VALIDATION_TOL`].
pub fn validate_state(rho: &CMatrix) -> Result<()> {
    if rho.nrows() != rho.ncols() || rho.nrows() == 0 {
        return invalid("state must be square and non-empty");
    }
    if !is_hermitian(rho, VALIDATION_TOL) {
        return invalid("state is not Hermitian");
    }
    if (rho.trace().re - 1.0).abs() > VALIDATION_TOL {
        return invalid(format!("state has trace {}", rho.trace().re));
    }
    let min = hermitian_eigenvalues(rho)[0];
    if min < -VALIDATION_TOL {
        return invalid(format!("state has negative eigenvalue {min:e}"));
    }
    Ok(())
}

/// Single-qubit depolarizing channel `ρ ↦ (1−p)ρ + p·1/2`.
pub fn depolarizing(p: f64) -> Result<Channel> {
    if !(0.0..=1.0).contains(&p) {
        return invalid(format!("depolarizing probability {p} outside [0, 1]"));
    }
    let a = (1.0 - 0.75 * p).sqrt();
    let b = (p / 4.0).sqrt();
    Channel::kraus(vec![
        crate::operator::pauli('I').scale(a),
        crate::operator::pauli('X').scale(b),
        crate::operator::pauli('Y').scale(b),
        crate::operator::pauli('Z').scale(b),
    ])
}

/// Amplitude damping with decay probability `γ` towards `|0⟩`.
pub fn amplitude_damping(gamma: f64) -> Result<Channel> {
    if !(0.0..=1.0).contains(&gamma) {
        return invalid(format!("damping {gamma} outside [0, 1]"));
    }
    let c = |x: f64| C64::new(x, 0.0);
    let k0 = CMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c((1.0 - gamma).sqrt())]);
    let k1 = CMatrix::from_row_slice(2, 2, &[c(0.0), c(gamma.sqrt()), c(0.0), c(0.0)]);
    Channel::kraus(vec![k0, k1])
}

/// Dephasing `ρ ↦ (1−p)ρ + p·ZρZ`.
pub fn dephasing(p: f64) -> Result<Channel> {
    if !(0.0..=1.0).contains(&p) {
        return invalid(format!("dephasing probability {p} outside [0, 1]"));
    }
    Channel::kraus(vec![
        crate::operator::pauli('I').scale((1.0 - p).sqrt()),
        crate::operator::pauli('Z').scale(p.sqrt()),
    ])
}

/// The same single-qubit channel on each of `n` qubits.
pub fn uniform_single_qubit(channel: &Channel, n: usize) -> Result<Channel> {
    Channel::tensor_single_qubit(vec![channel.clone(); n])
}
