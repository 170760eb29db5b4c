//! Generic pipeline: channel, LTM, decomposition, variance formulas and an
//! optional simulation cross-check, one output row per `(p, L)` grid point.

use std::path::{Path, PathBuf};

use ltm_core::ltm::replacement_noise_ltm;
use ltm_core::mc::{estimate_variance, LayeredCircuitSpec, MCEstimate};
use ltm_core::variance::{fit_convergence, lower_bound, noise_model_deep, variance_deep, variance_deep_unitary, variance_exact};
use ltm_core::{decompose_ltm, ltm_exact, ltm_sampled, unravelling_excess, Channel, LocalityVector, Ltm};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, LtmConfig, ResolvedExperiment};
use crate::error::{CliError, CliResult, Stage};
use crate::output::{ensure_dir, write_csv, write_sidecar};

const LOWER_BOUND_SLACK: f64 = 1e-9;
const PROP4_SLACK: f64 = 1e-9;
const COROLLARY1_TOLERANCE: f64 = 1e-9;
const FIT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct RunRow {
    pub name: String,
    pub p: Option<f64>,
    pub depth: usize,
    pub ltm_method: &'static str,
    pub variance_exact: f64,
    pub variance_deep: f64,
    pub deep_method: &'static str,
    pub deep_converged: bool,
    pub deep_unitary: Option<f64>,
    pub noise_model: Option<f64>,
    pub lower_bound: Option<f64>,
    pub beta: Option<f64>,
    pub beta_r_squared: Option<f64>,
    pub mc_variance: Option<f64>,
    pub mc_se: Option<f64>,
    pub mc_z: Option<f64>,
    pub samples: usize,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct UnravellingReport {
    /// `E{T_φ} − T` over the Kraus unravelling, rows are outputs.
    pub excess: Vec<Vec<f64>>,
    pub min_entry: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub rows: usize,
    pub checks: Vec<CheckOutcome>,
    pub unravelling: Option<UnravellingReport>,
}

impl RunSummary {
    pub fn failures(&self) -> Vec<String> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{}: {}", c.name, c.detail))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub rows: Vec<RunRow>,
    pub summary: RunSummary,
    pub files: Vec<PathBuf>,
}

fn base_ltm(exp: &ResolvedExperiment) -> CliResult<Ltm> {
    match exp.config.ltm {
        LtmConfig::Exact => ltm_exact(&exp.circuit, true, &exp.partition).stage("computing the exact LTM"),
        LtmConfig::Sampled { samples_per_block } => {
            ltm_sampled(&exp.circuit, true, &exp.partition, samples_per_block, exp.config.seed)
                .stage("sampling the LTM")
        }
    }
}

/// Distance between a simulated and an exact variance in standard errors;
/// differences at rounding level count as zero.
pub fn z_of(est: &MCEstimate, exact: f64) -> f64 {
    if (est.variance - exact).abs() <= 1e-12 {
        0.0
    } else if est.standard_error_of_variance > 0.0 {
        est.z_score(exact)
    } else {
        f64::INFINITY
    }
}

/// Evaluates every grid point of a resolved experiment.
pub fn run_generic(exp: &ResolvedExperiment) -> CliResult<(Vec<RunRow>, RunSummary)> {
    let cfg = &exp.config;
    let d = exp.partition.dim();
    let rho = LocalityVector::from_operator(&exp.initial_state).stage("locality of ρ")?;
    let h = LocalityVector::from_operator(&exp.observable).stage("locality of H")?;
    let tr_h = exp.observable.trace().re;
    let fixed = match &exp.fixed_point {
        Some(f) => Some(LocalityVector::from_operator(f).stage("locality of the fixed point")?),
        None => None,
    };
    let base = base_ltm(exp)?;
    let ltm_method = match cfg.ltm {
        LtmConfig::Exact => "exact",
        LtmConfig::Sampled { .. } => "sampled",
    };
    let circuit_unitary = exp.circuit.is_unitary();
    let mut depths = cfg.depths.clone();
    depths.sort_unstable();
    depths.dedup();
    let max_depth = *depths.last().expect("depths validated non-empty");

    let per_p = exp
        .p_values
        .par_iter()
        .enumerate()
        .map(|(pi, &p)| {
            let t = match (p, &fixed) {
                (Some(p), Some(f)) => replacement_noise_ltm(p, &base, f).stage("building the noisy LTM")?,
                _ => base.clone(),
            };
            let channel = match (p, &exp.fixed_point) {
                (Some(p), Some(f)) => Channel::mixture_with_replacement(p, f.matrix().clone(), exp.circuit.clone())
                    .stage("building the noisy channel")?,
                _ => exp.circuit.clone(),
            };
            let dec = decompose_ltm(&t).stage("decomposing the LTM")?;
            let deep = variance_deep(&dec, &rho, &h, false).stage("deep limit")?;
            let unitary = circuit_unitary && p.is_none_or(|p| p == 0.0);
            let deep_unitary = if unitary {
                Some(variance_deep_unitary(&dec, &rho, &h).stage("unitary deep limit")?.value)
            } else {
                None
            };
            let noise_model = match (p, &fixed) {
                (Some(p), Some(f)) if circuit_unitary && p > 0.0 => {
                    Some(noise_model_deep(p, &base, f, &h).stage("noise model")?.value)
                }
                _ => None,
            };
            let layers = vec![t.clone(); max_depth];
            let mut rows = Vec::with_capacity(depths.len());
            for (li, &depth) in depths.iter().enumerate() {
                let exact = variance_exact(&rho, &layers[..depth], &h, tr_h, d).stage("exact variance")?.value;
                let bound = match &exp.lower_bound_set {
                    Some(k) => Some(lower_bound(&rho, &layers[..depth], &h, k).stage("lower bound")?.bound),
                    None => None,
                };
                let (mc_variance, mc_se, mc_z, seed) = if cfg.n_samples > 0 {
                    let spec = LayeredCircuitSpec::homogeneous(
                        exp.initial_state.clone(),
                        channel.clone(),
                        depth,
                        exp.observable.clone(),
                    )
                    .stage("building the simulation")?;
                    let seed = cfg.seed.wrapping_add((pi * depths.len() + li) as u64);
                    let est = estimate_variance(&spec, cfg.n_samples, seed).stage("simulating")?;
                    (Some(est.variance), Some(est.standard_error_of_variance), Some(z_of(&est, exact)), Some(seed))
                } else {
                    (None, None, None, None)
                };
                rows.push(RunRow {
                    name: cfg.name.clone(),
                    p,
                    depth,
                    ltm_method,
                    variance_exact: exact,
                    variance_deep: deep.value,
                    deep_method: deep.method.as_str(),
                    deep_converged: deep.converged,
                    deep_unitary,
                    noise_model,
                    lower_bound: bound,
                    beta: None,
                    beta_r_squared: None,
                    mc_variance,
                    mc_se,
                    mc_z,
                    samples: cfg.n_samples,
                    seed,
                });
            }
            if deep.converged && depths.len() >= 3 {
                let values: Vec<f64> = rows.iter().map(|r| r.variance_exact).collect();
                let floor = FIT_FLOOR * deep.value.abs().max(1.0);
                if let Ok(fit) = fit_convergence(&depths, &values, deep.value, floor) {
                    for row in &mut rows {
                        row.beta = Some(fit.beta);
                        row.beta_r_squared = Some(fit.fit.r_squared);
                    }
                }
            }
            Ok(rows)
        })
        .collect::<CliResult<Vec<_>>>()?;
    let rows: Vec<RunRow> = per_p.into_iter().flatten().collect();

    let mut checks = Vec::new();
    if cfg.n_samples > 0 {
        let worst = rows.iter().filter_map(|r| r.mc_z).map(f64::abs).fold(0.0, f64::max);
        checks.push(CheckOutcome {
            name: "monte-carlo".into(),
            passed: worst <= cfg.checks.mc_z_max,
            detail: format!("largest |z| = {worst:.3}, limit {}", cfg.checks.mc_z_max),
        });
    }
    if exp.lower_bound_set.is_some() {
        let worst = rows
            .iter()
            .filter_map(|r| r.lower_bound.map(|b| b - r.variance_exact))
            .fold(f64::NEG_INFINITY, f64::max);
        checks.push(CheckOutcome {
            name: "lower-bound".into(),
            passed: worst <= LOWER_BOUND_SLACK,
            detail: format!("largest bound − exact = {worst:e}"),
        });
    }
    if rows.iter().any(|r| r.deep_unitary.is_some()) {
        let worst = rows
            .iter()
            .filter_map(|r| r.deep_unitary.map(|u| (u - r.variance_deep).abs()))
            .fold(0.0, f64::max);
        checks.push(CheckOutcome {
            name: "unitary-deep-limit".into(),
            passed: worst <= COROLLARY1_TOLERANCE,
            detail: format!("largest |unitary − general| = {worst:e}"),
        });
    }
    let unravelling = match (&exp.kraus, cfg.checks.unravelling) {
        (Some(kraus), true) => {
            let excess = unravelling_excess(kraus, true, &exp.partition).stage("unravelling excess")?;
            let min_entry = excess.iter().copied().fold(f64::INFINITY, f64::min);
            checks.push(CheckOutcome {
                name: "unravelling-dominance".into(),
                passed: min_entry >= -PROP4_SLACK,
                detail: format!("smallest entry of E{{T_φ}} − T = {min_entry:e}"),
            });
            Some(UnravellingReport {
                excess: (0..excess.nrows()).map(|i| excess.row(i).iter().copied().collect()).collect(),
                min_entry,
            })
        }
        _ => None,
    };
    let summary = RunSummary {
        rows: rows.len(),
        checks,
        unravelling,
    };
    Ok((rows, summary))
}

/// Loads, runs and writes one configuration. With `check`, failed checks turn
/// into [`CliError::Check`] after the outputs are written.
pub fn run_config_file(path: &Path, out: Option<&Path>, check: bool) -> CliResult<RunOutput> {
    let (config, base) = ExperimentConfig::from_path(path)?;
    let resolved = config.resolve(&base)?;
    run_resolved(&resolved, out, check)
}

pub fn run_resolved(resolved: &ResolvedExperiment, out: Option<&Path>, check: bool) -> CliResult<RunOutput> {
    let cfg = &resolved.config;
    let (rows, summary) = run_generic(resolved)?;
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.outputs.directory.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    ensure_dir(&dir)?;
    let stem = cfg.outputs.stem.clone().unwrap_or_else(|| cfg.name.clone());
    let csv = dir.join(format!("{stem}.csv"));
    let sidecar = dir.join(format!("{stem}.json"));
    write_csv(&csv, &rows)?;
    let files = vec![csv, sidecar.clone()];
    write_sidecar(&sidecar, "run", cfg, &files, &summary)?;
    let failures = summary.failures();
    if check && !failures.is_empty() {
        return Err(CliError::Check(failures));
    }
    Ok(RunOutput { rows, summary, files })
}
