//! Locality transfer matrices.
//!
//! For a map `Λ` and the product basis `{P_j}`, the LTM is the non-negative
//! `2^M × 2^M` matrix
//!
//! ```text
//! T[κ, λ] = (1/d_λ) Σ_{j ∈ λ} (ℓ_{Λ(P_j)})_κ
//! ```
//!
//! so column `λ` is the input sector and row `κ` the output sector. With this
//! orientation the loss variance reads `(ℓ_ρ, T_1 ⋯ T_L ℓ_H)` when each `T_l`
//! is built from the adjoint of the `l`-th intermediate channel, the columns
//! of adjoint LTMs of trace-preserving maps are sub-stochastic, and the
//! all-ones vector is a left eigenvector of every unit-radius essential block.
//!
//! Two exact evaluation strategies exist. The dense one materializes each
//! `P_j`, applies the channel to the matrix and projects back. The
//! propagation one keeps the image as a sparse list of basis coefficients
//! and pushes it through the channel's local transfer matrices; it needs no
//! dense `d × d` matrices at all and is exact for Clifford circuits with a
//! single term per element.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{basis_strides, index_locality, multi_index, sector_indices, transfer_matrix, LocalFrame};
use crate::channels::{Channel, ChannelKind};
use crate::error::{invalid, Error, Result};
use crate::locality::LocalityVector;
use crate::operator::CMatrix;
use crate::partition::{Locality, SubsystemPartition};

/// Whether an LTM describes the map itself or its Hilbert–Schmidt adjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Picture {
    /// Heisenberg picture, `Λ†`. This is what the variance formulas consume.
    Adjoint,
    Forward,
}

impl Picture {
    pub fn from_adjoint_flag(adjoint: bool) -> Self {
        if adjoint {
            Picture::Adjoint
        } else {
            Picture::Forward
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Picture::Adjoint => Picture::Forward,
            Picture::Forward => Picture::Adjoint,
        }
    }
}

/// How an LTM was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum LtmSource {
    Exact,
    Sampled { samples_per_block: usize, seed: u64 },
    Ensemble { members: usize },
    ClosedForm,
    Supplied,
}

/// A locality transfer matrix with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ltm {
    partition: SubsystemPartition,
    matrix: DMatrix<f64>,
    std_errors: Option<DMatrix<f64>>,
    picture: Picture,
    source: LtmSource,
}

/// Evaluation strategy for [`ltm_exact_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LtmMethod {
    /// Propagation when the channel decomposes into small local pieces,
    /// dense otherwise.
    #[default]
    Auto,
    Dense,
    Propagation,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LtmOptions {
    /// Largest `d` accepted by the dense evaluation.
    pub exact_limit: usize,
    /// Largest `d` accepted by the propagation evaluation.
    pub propagation_limit: usize,
    pub method: LtmMethod,
}

impl Default for LtmOptions {
    fn default() -> Self {
        LtmOptions {
            exact_limit: 128,
            propagation_limit: 1024,
            method: LtmMethod::Auto,
        }
    }
}

impl Ltm {
    /// Wraps a user-supplied matrix, checking shape and sign.
    pub fn from_matrix(partition: &SubsystemPartition, matrix: DMatrix<f64>, picture: Picture) -> Result<Self> {
        let n = partition.num_localities();
        if matrix.nrows() != n || matrix.ncols() != n {
            return invalid(format!(
                "LTM must be {n}x{n}, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            ));
        }
        if let Some(bad) = matrix.iter().find(|x| **x < 0.0 || !x.is_finite()) {
            return invalid(format!("LTM entry {bad} is not a finite non-negative number"));
        }
        Ok(Ltm {
            partition: partition.clone(),
            matrix,
            std_errors: None,
            picture,
            source: LtmSource::Supplied,
        })
    }

    pub fn identity(partition: &SubsystemPartition) -> Self {
        let n = partition.num_localities();
        Ltm {
            partition: partition.clone(),
            matrix: DMatrix::identity(n, n),
            std_errors: None,
            picture: Picture::Adjoint,
            source: LtmSource::ClosedForm,
        }
    }

    pub fn partition(&self) -> &SubsystemPartition {
        &self.partition
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn std_errors(&self) -> Option<&DMatrix<f64>> {
        self.std_errors.as_ref()
    }

    pub fn picture(&self) -> Picture {
        self.picture
    }

    pub fn source(&self) -> &LtmSource {
        &self.source
    }

    /// `T[κ, λ]`: mass moved from input sector `λ` to output sector `κ`.
    pub fn entry(&self, output: Locality, input: Locality) -> f64 {
        self.matrix[(output.0, input.0)]
    }

    /// [`Ltm::entry`] addressed with bitstrings, subsystem 0 first.
    pub fn entry_str(&self, output: &str, input: &str) -> Result<f64> {
        let (o, i): (Locality, Locality) = (output.parse()?, input.parse()?);
        self.partition.check_locality(o)?;
        self.partition.check_locality(i)?;
        Ok(self.entry(o, i))
    }

    pub fn column_sums(&self) -> Vec<f64> {
        self.matrix.column_iter().map(|c| c.sum()).collect()
    }

    /// `T · v` for a locality vector.
    pub fn apply(&self, v: &LocalityVector) -> Result<LocalityVector> {
        self.partition.ensure_same(v.partition())?;
        let out = &self.matrix * v.as_dvector();
        LocalityVector::from_weights(&self.partition, out.iter().map(|x| x.max(0.0)).collect())
    }

    /// `max |T D − (T' D)ᵗ|` where `T'` should be the LTM of the dual map.
    pub fn duality_residual(&self, dual: &Ltm) -> Result<f64> {
        self.partition.ensure_same(&dual.partition)?;
        let d = DMatrix::from_diagonal(&DVector::from_column_slice(self.partition.sector_dims()));
        let lhs = &self.matrix * &d;
        let rhs = (&dual.matrix * &d).transpose();
        Ok((lhs - rhs).amax())
    }

    /// `T^k`.
    pub fn power(&self, k: usize) -> DMatrix<f64> {
        let n = self.matrix.nrows();
        let mut result = DMatrix::identity(n, n);
        let mut base = self.matrix.clone();
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
}

/// Exact LTM with default options. `adjoint = true` gives the LTM of `Λ†`.
pub fn ltm_exact(channel: &Channel, adjoint: bool, partition: &SubsystemPartition) -> Result<Ltm> {
    ltm_exact_with(channel, Picture::from_adjoint_flag(adjoint), partition, &LtmOptions::default())
}

pub fn ltm_exact_with(
    channel: &Channel,
    picture: Picture,
    partition: &SubsystemPartition,
    options: &LtmOptions,
) -> Result<Ltm> {
    channel.check_partition(partition)?;
    let d = partition.dim();
    let program = match options.method {
        LtmMethod::Dense => None,
        LtmMethod::Auto | LtmMethod::Propagation => TransferProgram::build(channel, partition, picture)?,
    };
    if options.method == LtmMethod::Propagation && program.is_none() {
        return invalid("channel has no local decomposition for the propagation method");
    }
    let evaluator = match program {
        Some(program) => {
            if d > options.propagation_limit {
                return Err(Error::ExactLimitExceeded {
                    dim: d,
                    limit: options.propagation_limit,
                });
            }
            Evaluator::Propagation(program)
        }
        None => {
            if d > options.exact_limit {
                return Err(Error::ExactLimitExceeded {
                    dim: d,
                    limit: options.exact_limit,
                });
            }
            Evaluator::Dense {
                channel,
                frame: LocalFrame::standard(partition),
                adjoint: picture == Picture::Adjoint,
            }
        }
    };
    let matrix = exact_matrix(partition, &evaluator)?;
    Ok(Ltm {
        partition: partition.clone(),
        matrix,
        std_errors: None,
        picture,
        source: LtmSource::Exact,
    })
}

/// Exact LTM computed densely in an arbitrary local frame. The result is
/// frame independent; this exists to check exactly that.
pub fn ltm_exact_in_frame(channel: &Channel, picture: Picture, frame: &LocalFrame) -> Result<Ltm> {
    let partition = frame.partition();
    channel.check_partition(partition)?;
    let limit = LtmOptions::default().exact_limit;
    if partition.dim() > limit {
        return Err(Error::ExactLimitExceeded {
            dim: partition.dim(),
            limit,
        });
    }
    let evaluator = Evaluator::Dense {
        channel,
        frame: frame.clone(),
        adjoint: picture == Picture::Adjoint,
    };
    let matrix = exact_matrix(partition, &evaluator)?;
    Ok(Ltm {
        partition: partition.clone(),
        matrix,
        std_errors: None,
        picture,
        source: LtmSource::Exact,
    })
}

const CHUNK: usize = 64;

fn exact_matrix(partition: &SubsystemPartition, evaluator: &Evaluator<'_>) -> Result<DMatrix<f64>> {
    let n = partition.num_localities();
    let mut matrix = DMatrix::zeros(n, n);
    for input in partition.localities() {
        let indices = sector_indices(partition, input)?;
        let partials: Vec<Result<Vec<f64>>> = indices
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut acc = vec![0.0; n];
                for &j in chunk {
                    let image = evaluator.image_locality(partition, j)?;
                    for (a, x) in acc.iter_mut().zip(image) {
                        *a += x;
                    }
                }
                Ok(acc)
            })
            .collect();
        let mut column = vec![0.0; n];
        for partial in partials {
            for (c, x) in column.iter_mut().zip(partial?) {
                *c += x;
            }
        }
        let dk = partition.sector_dim(input);
        for (k, c) in column.into_iter().enumerate() {
            matrix[(k, input.0)] = c / dk;
        }
    }
    Ok(matrix)
}

/// Monte Carlo estimate of the LTM from `samples_per_block` uniformly drawn
/// basis elements per input sector, with per-entry standard errors.
pub fn ltm_sampled(
    channel: &Channel,
    adjoint: bool,
    partition: &SubsystemPartition,
    samples_per_block: usize,
    seed: u64,
) -> Result<Ltm> {
    if samples_per_block == 0 {
        return invalid("at least one sample per block is required");
    }
    channel.check_partition(partition)?;
    let picture = Picture::from_adjoint_flag(adjoint);
    let options = LtmOptions::default();
    let evaluator = match TransferProgram::build(channel, partition, picture)? {
        Some(p) if partition.dim() <= options.propagation_limit => Evaluator::Propagation(p),
        _ => Evaluator::Dense {
            channel,
            frame: LocalFrame::standard(partition),
            adjoint,
        },
    };
    let n = partition.num_localities();
    let dims = partition.dims().to_vec();
    let strides = basis_strides(&dims);
    let columns: Vec<Result<(Vec<f64>, Vec<f64>)>> = partition
        .localities()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|input| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(input.0 as u64);
            let mut sum = vec![0.0; n];
            let mut sum_sq = vec![0.0; n];
            for _ in 0..samples_per_block {
                let mut j = 0;
                for m in 0..dims.len() {
                    if input.is_active(m) {
                        j += rng.random_range(1..dims[m] * dims[m]) * strides[m];
                    }
                }
                let image = evaluator.image_locality(partition, j)?;
                for k in 0..n {
                    sum[k] += image[k];
                    sum_sq[k] += image[k] * image[k];
                }
            }
            let s = samples_per_block as f64;
            let mean: Vec<f64> = sum.iter().map(|x| x / s).collect();
            let se = mean
                .iter()
                .zip(&sum_sq)
                .map(|(m, sq)| {
                    if samples_per_block < 2 {
                        f64::INFINITY
                    } else {
                        let var = ((sq - s * m * m) / (s - 1.0)).max(0.0);
                        (var / s).sqrt()
                    }
                })
                .collect();
            Ok((mean, se))
        })
        .collect();
    let mut matrix = DMatrix::zeros(n, n);
    let mut errors = DMatrix::zeros(n, n);
    for (input, column) in columns.into_iter().enumerate() {
        let (mean, se) = column?;
        for k in 0..n {
            matrix[(k, input)] = mean[k];
            errors[(k, input)] = se[k];
        }
    }
    Ok(Ltm {
        partition: partition.clone(),
        matrix,
        std_errors: Some(errors),
        picture,
        source: LtmSource::Sampled {
            samples_per_block,
            seed,
        },
    })
}

/// `Σ_φ w_φ T_φ` over an ensemble of maps.
pub fn mean_ltm_over_ensemble(
    members: &[(f64, Channel)],
    adjoint: bool,
    partition: &SubsystemPartition,
) -> Result<Ltm> {
    if members.is_empty() {
        return invalid("ensemble is empty");
    }
    if members.iter().any(|(w, _)| w.is_nan() || *w < 0.0) {
        return invalid("ensemble weights must be non-negative");
    }
    let total: f64 = members.iter().map(|(w, _)| w).sum();
    if (total - 1.0).abs() > 1e-10 {
        return invalid(format!("ensemble weights sum to {total}, not 1"));
    }
    let n = partition.num_localities();
    let mut matrix = DMatrix::zeros(n, n);
    for (w, ch) in members {
        let t = ltm_exact(ch, adjoint, partition)?;
        matrix += t.matrix * *w;
    }
    Ok(Ltm {
        partition: partition.clone(),
        matrix,
        std_errors: None,
        picture: Picture::from_adjoint_flag(adjoint),
        source: LtmSource::Ensemble {
            members: members.len(),
        },
    })
}

/// Splits a Kraus channel `Σ_i K_i · K_i†` into the ensemble of maps
/// `E_i = K_i / √w_i` with weights `w_i = Tr[K_i† K_i] / d`, whose mean is the
/// channel itself. Zero operators are dropped.
pub fn kraus_unravelling(kraus: &[CMatrix]) -> Result<Vec<(f64, Channel)>> {
    let d = match kraus.first() {
        Some(k) => k.nrows(),
        None => return invalid("unravelling needs at least one Kraus operator"),
    };
    let mut members = Vec::with_capacity(kraus.len());
    for k in kraus {
        let w = k.iter().map(|z| z.norm_sqr()).sum::<f64>() / d as f64;
        if w > 0.0 {
            members.push((w, Channel::kraus_unnormalized(vec![k.unscale(w.sqrt())])?));
        }
    }
    Ok(members)
}

/// `E_i{T(E_i)} − T(Σ_i K_i · K_i†)`, entrywise non-negative for any Kraus
/// unravelling.
pub fn unravelling_excess(kraus: &[CMatrix], adjoint: bool, partition: &SubsystemPartition) -> Result<DMatrix<f64>> {
    let members = kraus_unravelling(kraus)?;
    let mean = mean_ltm_over_ensemble(&members, adjoint, partition)?;
    let whole = ltm_exact(&Channel::kraus(kraus.to_vec())?, adjoint, partition)?;
    Ok(mean.matrix - whole.matrix)
}

/// Closed-form adjoint LTM of `(1−p)·W + p·Tr[·]ρ̃` for a unital inner map
/// `W` with adjoint LTM `t_inner`:
///
/// ```text
/// T = [ 1   r            ]     r_λ = p² d (ℓ_ρ̃)_λ / d_λ
///     [ 0   (1−p)² T_W   ]
/// ```
pub fn replacement_noise_ltm(p: f64, t_inner: &Ltm, fixed_point: &LocalityVector) -> Result<Ltm> {
    if !(0.0..=1.0).contains(&p) {
        return invalid(format!("replacement probability {p} outside [0, 1]"));
    }
    if t_inner.picture != Picture::Adjoint {
        return invalid("the inner LTM must be in the adjoint picture");
    }
    let partition = t_inner.partition();
    partition.ensure_same(fixed_point.partition())?;
    let d = partition.dim() as f64;
    let n = partition.num_localities();
    let mut matrix = t_inner.matrix.clone() * (1.0 - p).powi(2);
    for l in 0..n {
        matrix[(0, l)] = 0.0;
    }
    for k in 0..n {
        matrix[(k, 0)] = 0.0;
    }
    matrix[(0, 0)] = 1.0;
    for l in 1..n {
        matrix[(0, l)] = p * p * d * fixed_point.weights()[l] / partition.sector_dims()[l];
    }
    Ok(Ltm {
        partition: partition.clone(),
        matrix,
        std_errors: None,
        picture: Picture::Adjoint,
        source: LtmSource::ClosedForm,
    })
}

enum Evaluator<'a> {
    Dense {
        channel: &'a Channel,
        frame: LocalFrame,
        adjoint: bool,
    },
    Propagation(TransferProgram),
}

impl Evaluator<'_> {
    /// `ℓ_{Λ(P_j)}` as a plain vector.
    fn image_locality(&self, partition: &SubsystemPartition, j: usize) -> Result<Vec<f64>> {
        match self {
            Evaluator::Dense {
                channel,
                frame,
                adjoint,
            } => {
                let element = frame.element_matrix(&multi_index(partition, j));
                let image = channel.act(partition, &element, *adjoint)?;
                Ok(LocalityVector::from_matrix(frame, &image)?.weights().to_vec())
            }
            Evaluator::Propagation(program) => Ok(program.image_locality(j)),
        }
    }
}

/// A channel expressed as a sequence of real transfer matrices on a few
/// subsystems each, plus replacement branches.
#[derive(Debug, Clone)]
struct TransferProgram {
    ops: Vec<Op>,
    dims: Vec<usize>,
    strides: Vec<usize>,
    num_localities: usize,
}

#[derive(Debug, Clone)]
enum Op {
    Local {
        sites: Vec<usize>,
        /// Flat-index contribution of each local basis index.
        offsets: Vec<usize>,
        /// Column `l` lists the non-zero `(i, R[i, l])`.
        columns: Vec<Vec<(usize, f64)>>,
    },
    Mixture {
        p: f64,
        inner: Vec<Op>,
        /// Non-zero coefficients of `ρ̃`.
        fixed_sparse: Vec<(usize, f64)>,
        /// All coefficients of `ρ̃`, for overlaps in the adjoint picture.
        fixed_dense: std::sync::Arc<Vec<f64>>,
        adjoint: bool,
        sqrt_d: f64,
    },
}

/// Largest local space (in basis elements) turned into a dense transfer matrix.
const MAX_LOCAL_TRANSFER: usize = 256;

impl TransferProgram {
    fn build(channel: &Channel, partition: &SubsystemPartition, picture: Picture) -> Result<Option<Self>> {
        let adjoint = picture == Picture::Adjoint;
        let Some(mut ops) = Self::ops_for(channel, partition, adjoint)? else {
            return Ok(None);
        };
        if adjoint {
            ops.reverse();
        }
        let dims = partition.dims().to_vec();
        let strides = basis_strides(&dims);
        Ok(Some(TransferProgram {
            ops,
            dims,
            strides,
            num_localities: partition.num_localities(),
        }))
    }

    /// Operations in forward order with each local matrix already in the
    /// requested picture; the caller reverses the order for the adjoint.
    fn ops_for(channel: &Channel, partition: &SubsystemPartition, adjoint: bool) -> Result<Option<Vec<Op>>> {
        let all_sites: Vec<usize> = (0..partition.num_subsystems()).collect();
        Ok(match channel.kind() {
            ChannelKind::Unitary(_) | ChannelKind::Kraus(_) => {
                let d = partition.dim();
                if d * d > MAX_LOCAL_TRANSFER {
                    return Ok(None);
                }
                Some(vec![Self::local_op(partition, &all_sites, channel, adjoint)?])
            }
            ChannelKind::Local { sites, inner, .. } => {
                let local: usize = sites.iter().map(|&s| partition.dims()[s].pow(2)).product();
                if local > MAX_LOCAL_TRANSFER {
                    return Ok(None);
                }
                Some(vec![Self::local_op(partition, sites, inner, adjoint)?])
            }
            ChannelKind::TensorSingleQubit(chs) => Some(
                chs.iter()
                    .enumerate()
                    .map(|(m, ch)| Self::local_op(partition, &[m], ch, adjoint))
                    .collect::<Result<Vec<_>>>()?,
            ),
            ChannelKind::Composition(chs) => {
                let mut ops = Vec::new();
                for ch in chs {
                    match Self::ops_for(ch, partition, adjoint)? {
                        Some(more) => ops.extend(more),
                        None => return Ok(None),
                    }
                }
                Some(ops)
            }
            ChannelKind::MixtureWithReplacement { p, fixed_point, inner } => {
                let Some(mut inner_ops) = Self::ops_for(inner, partition, adjoint)? else {
                    return Ok(None);
                };
                if adjoint {
                    inner_ops.reverse();
                }
                let coeffs: Vec<f64> = LocalFrame::standard(partition)
                    .coefficients(fixed_point)?
                    .into_iter()
                    .map(|c| c.re)
                    .collect();
                let fixed_sparse = coeffs
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| c.abs() > 1e-15)
                    .map(|(j, &c)| (j, c))
                    .collect();
                Some(vec![Op::Mixture {
                    p: *p,
                    inner: inner_ops,
                    fixed_sparse,
                    fixed_dense: std::sync::Arc::new(coeffs),
                    adjoint,
                    sqrt_d: (partition.dim() as f64).sqrt(),
                }])
            }
        })
    }

    fn local_op(partition: &SubsystemPartition, sites: &[usize], channel: &Channel, adjoint: bool) -> Result<Op> {
        let local_dims: Vec<usize> = sites.iter().map(|&s| partition.dims()[s]).collect();
        let local_partition = SubsystemPartition::new(local_dims.clone())?;
        channel.check_partition(&local_partition)?;
        let mut r = transfer_matrix(&local_partition, |e| channel.act(&local_partition, e, false))?;
        if adjoint {
            r = r.transpose();
        }
        let size = r.nrows();
        let columns = (0..size)
            .map(|l| {
                (0..size)
                    .filter(|&i| r[(i, l)].abs() > 1e-14)
                    .map(|i| (i, r[(i, l)]))
                    .collect()
            })
            .collect();
        let strides = basis_strides(partition.dims());
        let offsets = (0..size)
            .map(|local| {
                let mut rem = local;
                let mut off = 0;
                for k in (0..sites.len()).rev() {
                    let n = local_dims[k] * local_dims[k];
                    off += (rem % n) * strides[sites[k]];
                    rem /= n;
                }
                off
            })
            .collect();
        Ok(Op::Local {
            sites: sites.to_vec(),
            offsets,
            columns,
        })
    }

    fn image_locality(&self, j: usize) -> Vec<f64> {
        let state = self.run(&self.ops, vec![(j, 1.0)]);
        let mut out = vec![0.0; self.num_localities];
        for (idx, c) in state {
            out[index_locality(&self.dims, &self.strides, idx).0] += c * c;
        }
        out
    }

    fn run(&self, ops: &[Op], mut state: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
        for op in ops {
            state = self.apply(op, state);
        }
        state
    }

    fn apply(&self, op: &Op, state: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
        match op {
            Op::Local {
                sites,
                offsets,
                columns,
            } => {
                let mut out = Vec::with_capacity(state.len() * 2);
                for (idx, c) in state {
                    let mut local = 0;
                    let mut base = idx;
                    for &s in sites {
                        let n = self.dims[s] * self.dims[s];
                        let digit = idx / self.strides[s] % n;
                        local = local * n + digit;
                        base -= digit * self.strides[s];
                    }
                    for &(i, r) in &columns[local] {
                        out.push((base + offsets[i], r * c));
                    }
                }
                merge(out)
            }
            Op::Mixture {
                p,
                inner,
                fixed_sparse,
                fixed_dense,
                adjoint,
                sqrt_d,
            } => {
                let mut out = Vec::new();
                if *adjoint {
                    let overlap: f64 = state.iter().map(|&(j, c)| c * fixed_dense[j]).sum();
                    out.push((0, p * overlap * sqrt_d));
                } else {
                    let trace = state.iter().find(|(j, _)| *j == 0).map_or(0.0, |&(_, c)| c) * sqrt_d;
                    out.extend(fixed_sparse.iter().map(|&(j, c)| (j, p * trace * c)));
                }
                let inner_state = self.run(inner, state);
                out.extend(inner_state.into_iter().map(|(j, c)| (j, (1.0 - p) * c)));
                merge(out)
            }
        }
    }
}

fn merge(mut terms: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    terms.sort_unstable_by_key(|t| t.0);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
    for (j, c) in terms {
        match out.last_mut() {
            Some(last) if last.0 == j => last.1 += c,
            _ => out.push((j, c)),
        }
    }
    out.retain(|t| t.1.abs() > 1e-18);
    out
}

/// Dense images of every basis element, mostly for diagnostics: column `j`
/// of the result holds the coefficients of `Λ(P_j)`.
pub fn dense_transfer_matrix(channel: &Channel, picture: Picture, partition: &SubsystemPartition) -> Result<DMatrix<f64>> {
    channel.check_partition(partition)?;
    let limit = LtmOptions::default().exact_limit;
    if partition.dim() > limit.min(16) {
        return Err(Error::ExactLimitExceeded {
            dim: partition.dim(),
            limit: limit.min(16),
        });
    }
    let adjoint = picture == Picture::Adjoint;
    transfer_matrix(partition, |e: &CMatrix| channel.act(partition, e, adjoint))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::depolarizing;
    use crate::gates::{cnot, gate, swap};

    fn two_qubits() -> SubsystemPartition {
        SubsystemPartition::qubits(2).unwrap()
    }

    #[test]
    fn identity_gives_identity() {
        let p = SubsystemPartition::new(vec![2, 3]).unwrap();
        let t = ltm_exact(&Channel::identity(6), true, &p).unwrap();
        assert!((t.matrix() - DMatrix::<f64>::identity(4, 4)).amax() < 1e-12);
    }

    #[test]
    fn swap_permutes_single_site_sectors() {
        let t = ltm_exact(&Channel::unitary(swap()).unwrap(), true, &two_qubits()).unwrap();
        let expected = DMatrix::from_row_slice(4, 4, &[
            1.0, 0.0, 0.0, 0.0, //
            0.0, 0.0, 1.0, 0.0, //
            0.0, 1.0, 0.0, 0.0, //
            0.0, 0.0, 0.0, 1.0,
        ]);
        assert!((t.matrix() - expected).amax() < 1e-12);
    }

    #[test]
    fn cnot_entries_by_brute_force() {
        // Control on the first qubit. Inputs on the target only: X_t stays,
        // Y_t and Z_t pick up Z_c. So from "01" one third stays in "01" and
        // two thirds go to "11".
        let t = ltm_exact(&Channel::unitary(cnot()).unwrap(), true, &two_qubits()).unwrap();
        assert!((t.entry_str("01", "01").unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!((t.entry_str("11", "01").unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!((t.entry_str("01", "11").unwrap() - 2.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn dense_and_propagation_agree() {
        let p = SubsystemPartition::qubits(3).unwrap();
        let ch = Channel::composition(vec![
            gate(vec![0, 1], cnot()).unwrap(),
            Channel::local(vec![2], depolarizing(0.3).unwrap()).unwrap(),
            gate(vec![2, 1], crate::gates::crx(0.4)).unwrap(),
        ])
        .unwrap();
        for picture in [Picture::Adjoint, Picture::Forward] {
            let mut options = LtmOptions {
                method: LtmMethod::Dense,
                ..LtmOptions::default()
            };
            let dense = ltm_exact_with(&ch, picture, &p, &options).unwrap();
            options.method = LtmMethod::Propagation;
            let prop = ltm_exact_with(&ch, picture, &p, &options).unwrap();
            assert!((dense.matrix() - prop.matrix()).amax() < 1e-12);
        }
    }

    #[test]
    fn sampled_identity_is_exact() {
        let p = two_qubits();
        let t = ltm_sampled(&Channel::identity(4), true, &p, 3, 7).unwrap();
        assert!((t.matrix() - DMatrix::<f64>::identity(4, 4)).amax() < 1e-12);
    }

    #[test]
    fn ensemble_weights_validated() {
        let p = two_qubits();
        let members = vec![(0.6, Channel::identity(4)), (0.6, Channel::identity(4))];
        assert!(mean_ltm_over_ensemble(&members, true, &p).is_err());
    }

    #[test]
    fn exact_limit_enforced_for_dense_channels() {
        let p = SubsystemPartition::qubits(8).unwrap();
        let err = ltm_exact(&Channel::identity(256), true, &p).unwrap_err();
        assert!(matches!(err, Error::ExactLimitExceeded { dim: 256, limit: 128 }));
    }

    #[test]
    fn unravelling_dominates_the_channel() {
        let p = SubsystemPartition::qubits(1).unwrap();
        let kraus = crate::channels::amplitude_damping(0.4).unwrap().to_kraus(8).unwrap();
        let excess = unravelling_excess(&kraus, true, &p).unwrap();
        assert!(excess.iter().all(|x| *x >= -1e-12));
        assert!(excess.amax() > 1e-3);
        let unitary = vec![crate::gates::rx(0.7)];
        assert!(unravelling_excess(&unitary, true, &p).unwrap().amax() < 1e-14);
    }
}
