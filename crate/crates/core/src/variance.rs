//! Variance of a loss `Tr[Φ_θ(ρ) H]` over local Haar parameters, from
//! locality vectors and LTMs.
//!
//! Every formula expects adjoint-picture LTMs and the full locality vector of
//! `H`. The trivial component `(ℓ_H)_0 = Tr[H]²/d` is removed internally; for
//! unital adjoint maps that removal cancels exactly against the `−Tr[H]²/d²`
//! offset, and what survives in the trivial row is the absorption term of
//! non-unital noise.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fit::{linear_fit, log_log_fit, LinearFit};
use crate::locality::{weighted_dot, weighted_dot_slices, LocalityVector};
use crate::ltm::Ltm;
use crate::partition::{Locality, SubsystemPartition};
use crate::spectral::{absorption, deep_limit_matrix, CanonicalDecomposition};

/// Values in `[−NEGATIVE_TOLERANCE, 0)` are reported as zero.
pub const NEGATIVE_TOLERANCE: f64 = 1e-10;
/// Threshold on `‖T² − T‖∞` below which an LTM counts as a projection.
pub const PROJECTION_TOLERANCE: f64 = 1e-8;
const UNIT_COLUMN_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarianceMethod {
    ExactFiniteL,
    DeepLimit,
    DeepCesaro,
    LowerBound,
    NoiseModel,
}

impl VarianceMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            VarianceMethod::ExactFiniteL => "exact-finite-L",
            VarianceMethod::DeepLimit => "deep-limit",
            VarianceMethod::DeepCesaro => "deep-cesaro",
            VarianceMethod::LowerBound => "lower-bound",
            VarianceMethod::NoiseModel => "noise-model",
        }
    }
}

/// Contribution of one unit-radius essential block to a deep limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSummand {
    pub indices: Vec<usize>,
    pub period: usize,
    /// `(ℓ_ρ, w_z) · v_zᵗ(ℓ_H + A ℓ_H)_z`.
    pub summand: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub blocks: Vec<BlockSummand>,
    /// Largest entry of the absorption matrix, when one was formed.
    pub absorption_max: Option<f64>,
    /// Perron vectors came from a numerical solve rather than `w_κ = d_κ/d_z`.
    pub numerical_perron: bool,
    /// Difference between two independent evaluations of the same value.
    pub cross_check: Option<f64>,
    /// `‖T² − T‖∞` for the noise model.
    pub projection_defect: Option<f64>,
    /// Amount clamped from a slightly negative raw value.
    pub clamped: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    /// Non-negative variance; the Cesàro average for periodic deep limits.
    pub value: f64,
    pub method: VarianceMethod,
    /// `false` when the deep sequence oscillates with a period above one.
    pub converged: bool,
    /// For periodic deep limits, the value along `L ≡ m (mod period)`.
    pub residues: Option<Vec<f64>>,
    /// Fitted mixing speed, when a depth sweep was available.
    pub beta: Option<f64>,
    pub diagnostics: Diagnostics,
}

impl VarianceReport {
    fn new(raw: f64, method: VarianceMethod, diagnostics: Diagnostics) -> Result<Self> {
        let (value, clamped) = clamp(raw)?;
        Ok(VarianceReport {
            value,
            method,
            converged: true,
            residues: None,
            beta: None,
            diagnostics: Diagnostics { clamped, ..diagnostics },
        })
    }
}

fn clamp(raw: f64) -> Result<(f64, Option<f64>)> {
    if !raw.is_finite() {
        return Err(Error::NumericalFailure {
            message: "variance is not finite".into(),
            residual: raw,
        });
    }
    if raw < -NEGATIVE_TOLERANCE {
        return Err(Error::NegativeVariance(raw));
    }
    if raw < 0.0 {
        Ok((0.0, Some(-raw)))
    } else {
        Ok((raw, None))
    }
}

fn ensure_all_same(partition: &SubsystemPartition, ltms: &[Ltm]) -> Result<()> {
    ltms.iter().try_for_each(|t| partition.ensure_same(t.partition()))
}

/// `Π_l T_l · v` with the product written layer-1-first, so `T_L` acts first.
fn propagate(ltms: &[Ltm], v: DVector<f64>) -> DVector<f64> {
    ltms.iter().rev().fold(v, |acc, t| t.matrix() * acc)
}

fn traceless(h: &LocalityVector) -> DVector<f64> {
    let mut v = DVector::from_column_slice(h.weights());
    v[0] = 0.0;
    v
}

/// `(ℓ_ρ, T_1⋯T_L ℓ_H) − Tr[H]²/d²`.
pub fn variance_exact(
    rho: &LocalityVector,
    ltms: &[Ltm],
    h: &LocalityVector,
    tr_h: f64,
    d: usize,
) -> Result<VarianceReport> {
    let partition = rho.partition();
    partition.ensure_same(h.partition())?;
    ensure_all_same(partition, ltms)?;
    if d != partition.dim() {
        return invalid(format!("dimension {d} does not match the partition ({})", partition.dim()));
    }
    let v = propagate(ltms, DVector::from_column_slice(h.weights()));
    let raw = weighted_dot_slices(partition.sector_dims(), rho.weights(), v.as_slice())
        - tr_h * tr_h / (d * d) as f64;
    VarianceReport::new(raw, VarianceMethod::ExactFiniteL, Diagnostics::default())
}

/// Exact variances for a homogeneous channel at depths `0..=max_depth`, with
/// the trivial sector removed from `ℓ_H` (the offset of a CPU adjoint map).
pub fn variance_by_depth(rho: &LocalityVector, t: &Ltm, h: &LocalityVector, max_depth: usize) -> Result<Vec<f64>> {
    let partition = rho.partition();
    partition.ensure_same(h.partition())?;
    partition.ensure_same(t.partition())?;
    let dims = partition.sector_dims();
    let mut v = traceless(h);
    let mut out = Vec::with_capacity(max_depth + 1);
    for l in 0..=max_depth {
        if l > 0 {
            v = t.matrix() * v;
        }
        out.push(weighted_dot_slices(dims, rho.weights(), v.as_slice()));
    }
    Ok(out)
}

/// Deep-circuit limit of the variance for a homogeneous channel whose adjoint
/// LTM was decomposed into `dec`.
///
/// With `single_qubit_noise` the right Perron vectors are taken in closed
/// form, `w_κ = d_κ / d_z` with left vector all ones, which holds when the
/// channel is a unitary followed by single-qubit noise. Otherwise the
/// numerical Perron pair enters through the deep-limit matrix.
pub fn variance_deep(
    dec: &CanonicalDecomposition,
    rho: &LocalityVector,
    h: &LocalityVector,
    single_qubit_noise: bool,
) -> Result<VarianceReport> {
    let partition = rho.partition();
    partition.ensure_same(h.partition())?;
    if dec.dim() != partition.num_localities() {
        return invalid("decomposition size does not match the partition");
    }
    let dims = partition.sector_dims();
    let hv = traceless(h);
    let limit = deep_limit_matrix(dec)?;
    let absorbed = absorption(dec)?;
    let cesaro_image = &limit.cesaro * &hv;
    let numerical = weighted_dot_slices(dims, rho.weights(), cesaro_image.as_slice());

    let a_h = absorbed.to_full(dec.dim()) * &hv;
    let mut blocks = Vec::new();
    let mut closed_form = 0.0;
    for block in dec.unit_blocks() {
        let summand = if single_qubit_noise {
            let rho_z: f64 = block.indices.iter().map(|&k| rho.weights()[k]).sum();
            let h_z: f64 = block.indices.iter().map(|&k| hv[k] + a_h[k]).sum();
            rho_z * h_z / block.block_dim
        } else {
            block
                .indices
                .iter()
                .map(|&k| rho.weights()[k] * cesaro_image[k] / dims[k])
                .sum()
        };
        closed_form += summand;
        blocks.push(BlockSummand {
            indices: block.indices.clone(),
            period: block.period,
            summand,
        });
    }

    let raw = if single_qubit_noise { closed_form } else { numerical };
    let residues = if limit.converged {
        None
    } else {
        let mut values = Vec::with_capacity(limit.period);
        for m in &limit.residues {
            let image = m * &hv;
            values.push(clamp(weighted_dot_slices(dims, rho.weights(), image.as_slice()))?.0);
        }
        Some(values)
    };
    let diagnostics = Diagnostics {
        blocks,
        absorption_max: Some(absorbed.matrix.iter().fold(0.0f64, |m, x| m.max(x.abs()))),
        numerical_perron: !single_qubit_noise,
        cross_check: single_qubit_noise.then(|| (closed_form - numerical).abs()),
        ..Diagnostics::default()
    };
    let method = if limit.converged {
        VarianceMethod::DeepLimit
    } else {
        VarianceMethod::DeepCesaro
    };
    let mut report = VarianceReport::new(raw, method, diagnostics)?;
    report.converged = limit.converged;
    report.residues = residues;
    Ok(report)
}

/// Deep limit for a unitary homogeneous channel:
/// `Σ_{z>0} (ℓ_ρ)_z (ℓ_H)_z / d_z`, summing over the irreducible blocks.
pub fn variance_deep_unitary(
    dec: &CanonicalDecomposition,
    rho: &LocalityVector,
    h: &LocalityVector,
) -> Result<VarianceReport> {
    let partition = rho.partition();
    partition.ensure_same(h.partition())?;
    if dec.dim() != partition.num_localities() {
        return invalid("decomposition size does not match the partition");
    }
    if let Some((j, s)) = dec
        .matrix
        .column_iter()
        .map(|c| c.sum())
        .enumerate()
        .find(|(_, s)| (s - 1.0).abs() > UNIT_COLUMN_TOLERANCE)
    {
        return invalid(format!("column {j} sums to {s}; the channel is not unitary"));
    }
    let absorption_max = dec.r.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if absorption_max > UNIT_COLUMN_TOLERANCE {
        return Err(Error::NumericalFailure {
            message: "a unitary LTM must not couple inessential sectors into essential ones".into(),
            residual: absorption_max,
        });
    }
    let hv = traceless(h);
    let mut blocks = Vec::new();
    let mut raw = 0.0;
    for block in dec.essential_blocks() {
        let rho_z: f64 = block.indices.iter().map(|&k| rho.weights()[k]).sum();
        let h_z: f64 = block.indices.iter().map(|&k| hv[k]).sum();
        let summand = rho_z * h_z / block.block_dim;
        raw += summand;
        blocks.push(BlockSummand {
            indices: block.indices.clone(),
            period: block.period,
            summand,
        });
    }
    let diagnostics = Diagnostics {
        blocks,
        absorption_max: Some(absorption_max),
        ..Diagnostics::default()
    };
    let converged = dec.essential_blocks().all(|b| b.period == 1);
    let method = if converged {
        VarianceMethod::DeepLimit
    } else {
        VarianceMethod::DeepCesaro
    };
    let mut report = VarianceReport::new(raw, method, diagnostics)?;
    report.converged = converged;
    Ok(report)
}

/// Result of [`lower_bound`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBound {
    pub bound: f64,
    /// Geometric mean of the per-layer minima; 1 for an empty circuit.
    pub alpha: f64,
    pub layer_alphas: Vec<f64>,
}

/// `α^L · (ℓ_ρ, ℓ_{K(H)})` with `α_l = min_{κ∈K} (T_l)_{κκ}`.
pub fn lower_bound(rho: &LocalityVector, ltms: &[Ltm], h: &LocalityVector, k: &[Locality]) -> Result<LowerBound> {
    let partition = rho.partition();
    partition.ensure_same(h.partition())?;
    ensure_all_same(partition, ltms)?;
    if k.is_empty() {
        return invalid("the locality subset K must not be empty");
    }
    for &kappa in k {
        partition.check_locality(kappa)?;
    }
    let layer_alphas: Vec<f64> = ltms
        .iter()
        .map(|t| k.iter().map(|&kappa| t.entry(kappa, kappa)).fold(f64::INFINITY, f64::min))
        .collect();
    let product: f64 = layer_alphas.iter().product();
    let alpha = if layer_alphas.is_empty() {
        1.0
    } else {
        product.powf(1.0 / layer_alphas.len() as f64)
    };
    let kept = h.restricted(|kappa| k.contains(&kappa));
    let bound = product * weighted_dot(rho, &kept)?;
    Ok(LowerBound {
        bound,
        alpha,
        layer_alphas,
    })
}

/// One scaling sample `(n, L, α)` for [`check_corollary3`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingSample {
    pub n: f64,
    pub depth: f64,
    pub alpha: f64,
}

/// Diagnostic report on whether `F(n) = α^L` decays at most polynomially.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthScalingReport {
    /// `F(n)` for every sample, in input order.
    pub f: Vec<f64>,
    /// Fitted `F ≈ c · n^{−k}`; `None` when some `F` vanishes.
    pub power_law: Option<PowerLaw>,
    /// `R²` of `ln F` against `n` (exponential decay hypothesis).
    pub exponential_r_squared: Option<f64>,
    /// `α > 0` bounded away from zero and `L` growing at most like `ln n`.
    pub condition_a: bool,
    /// `(1 − α) L / ln n` stays bounded.
    pub condition_b: bool,
    /// Every `F(n)` lies above half the fitted power law and the power law
    /// explains the data at least as well as an exponential.
    pub passes: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLaw {
    pub c: f64,
    pub k: f64,
    pub r_squared: f64,
}

/// Growth exponent of `y` against `x` in log–log scale, treating a constant
/// sequence as exponent zero.
fn growth_exponent(x: &[f64], y: &[f64]) -> Option<f64> {
    if y.iter().all(|v| *v == 0.0) {
        return Some(0.0);
    }
    log_log_fit(x, y).ok().map(|f| f.slope)
}

pub fn check_corollary3(samples: &[ScalingSample]) -> Result<DepthScalingReport> {
    if samples.len() < 3 {
        return invalid("at least three scaling samples are required");
    }
    for s in samples {
        if !(0.0..=1.0).contains(&s.alpha) || s.n <= 1.0 || s.depth < 0.0 {
            return invalid(format!("invalid scaling sample {s:?}"));
        }
    }
    let ns: Vec<f64> = samples.iter().map(|s| s.n).collect();
    let f: Vec<f64> = samples.iter().map(|s| s.alpha.powf(s.depth)).collect();
    let log_n: Vec<f64> = ns.iter().map(|n| n.ln()).collect();

    let (power_law, exponential_r_squared) = if f.iter().all(|v| *v > 0.0) {
        let log_f: Vec<f64> = f.iter().map(|v| v.ln()).collect();
        let power: LinearFit = linear_fit(&log_n, &log_f)?;
        let exponential = linear_fit(&ns, &log_f)?;
        (
            Some(PowerLaw {
                c: power.intercept.exp(),
                k: -power.slope,
                r_squared: power.r_squared,
            }),
            Some(exponential.r_squared),
        )
    } else {
        (None, None)
    };
    let passes = match (power_law, exponential_r_squared) {
        (Some(p), Some(exp_r2)) => {
            let above = ns.iter().zip(&f).all(|(n, v)| *v >= 0.5 * p.c * n.powf(-p.k));
            above && p.r_squared + 1e-12 >= exp_r2
        }
        _ => false,
    };

    let alphas: Vec<f64> = samples.iter().map(|s| s.alpha).collect();
    let depths: Vec<f64> = samples.iter().map(|s| s.depth).collect();
    let min_alpha = alphas.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_alpha = alphas.iter().cloned().fold(0.0, f64::max);
    let depth_growth = growth_exponent(&log_n, &depths);
    let condition_a =
        min_alpha > 0.0 && min_alpha >= 0.5 * max_alpha && depth_growth.is_some_and(|g| g <= 1.2);
    let defect: Vec<f64> = samples
        .iter()
        .map(|s| (1.0 - s.alpha) * s.depth / s.n.ln())
        .collect();
    let condition_b = growth_exponent(&ns, &defect).is_some_and(|g| g <= 0.2);

    Ok(DepthScalingReport {
        f,
        power_law,
        exponential_r_squared,
        condition_a,
        condition_b,
        passes,
    })
}

/// `‖M‖∞`, the largest absolute row sum.
fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Deep variance under replacement noise `(1−p)·U(·)U† + p·Tr[·]ρ̃`:
/// `p² (ℓ_ρ̃, (1 − (1−p)² T)⁻¹ ℓ_H)` over the traceless sectors, where `T` is
/// the adjoint LTM of the unitary entangler.
///
/// When `T` restricted to traceless sectors is a projection the closed form
/// `(p/(2−p) − p²)(ℓ_ρ̃, T ℓ_H) + p² (ℓ_ρ̃, ℓ_H)` is evaluated as well and the
/// discrepancy lands in the diagnostics.
pub fn noise_model_deep(
    p: f64,
    t_unitary: &Ltm,
    rho_tilde: &LocalityVector,
    h: &LocalityVector,
) -> Result<VarianceReport> {
    if !(p > 0.0 && p <= 1.0) {
        return invalid(format!("noise probability {p} must lie in (0, 1]"));
    }
    let partition = t_unitary.partition();
    partition.ensure_same(rho_tilde.partition())?;
    partition.ensure_same(h.partition())?;
    let n = partition.num_localities();
    let dims = partition.sector_dims();
    let mut t = t_unitary.matrix().clone();
    t.row_mut(0).fill(0.0);
    t.column_mut(0).fill(0.0);
    let hv = traceless(h);
    let rho = traceless(rho_tilde);

    let q = 1.0 - p;
    let system = DMatrix::identity(n, n) - &t * (q * q);
    let solved = system.lu().solve(&hv).ok_or(Error::NumericalFailure {
        message: "1 − (1−p)²T is singular".into(),
        residual: f64::NAN,
    })?;
    let raw = p * p * weighted_dot_slices(dims, rho.as_slice(), solved.as_slice());

    let defect = inf_norm(&(&t * &t - &t));
    let cross_check = (defect < PROJECTION_TOLERANCE).then(|| {
        let th = &t * &hv;
        let closed = (p / (2.0 - p) - p * p) * weighted_dot_slices(dims, rho.as_slice(), th.as_slice())
            + p * p * weighted_dot_slices(dims, rho.as_slice(), hv.as_slice());
        (closed - raw).abs()
    });
    let diagnostics = Diagnostics {
        projection_defect: Some(defect),
        cross_check,
        ..Diagnostics::default()
    };
    VarianceReport::new(raw, VarianceMethod::NoiseModel, diagnostics)
}

/// Log-linear fit of `|Var^L − Var^∞|` against `L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceFit {
    pub fit: LinearFit,
    /// Depths that entered the fit.
    pub depths: Vec<usize>,
    /// Mixing speed `β = −slope`.
    pub beta: f64,
}

/// Fits `ln |values[i] − limit|` against `depths[i]`, keeping points whose
/// deviation exceeds `floor`.
pub fn fit_convergence(depths: &[usize], values: &[f64], limit: f64, floor: f64) -> Result<ConvergenceFit> {
    if depths.len() != values.len() {
        return invalid("depth and value sequences differ in length");
    }
    let (used, logs): (Vec<usize>, Vec<f64>) = depths
        .iter()
        .zip(values)
        .filter_map(|(&l, v)| {
            let dev = (v - limit).abs();
            (dev > floor).then(|| (l, dev.ln()))
        })
        .unzip();
    let x: Vec<f64> = used.iter().map(|&l| l as f64).collect();
    let fit = linear_fit(&x, &logs)?;
    Ok(ConvergenceFit {
        beta: -fit.slope,
        fit,
        depths: used,
    })
}
