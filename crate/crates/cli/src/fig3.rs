//! Deep-circuit variance against noise strength for a rapidly and a slowly
//! entangling layer, with GHZ replacement noise and a ZZ-ring observable.
//!
//! Every variance is reported in units of `(ℓ_ρ̃, ℓ_H)`, the `p = 1` value.

use ltm_core::experiments::{zz_unit_coupling, Entangler, NoiseScalingSetup, DEFAULT_CRX_THETA};
use ltm_core::fit::log_log_fit;
use ltm_core::mc::{estimate_variance, LayeredCircuitSpec};
use ltm_core::operator::zero_state;
use ltm_core::variance::{fit_convergence, noise_model_deep, variance_by_depth, ConvergenceFit};
use ltm_core::LocalityVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CliError, CliResult, Stage};

/// Largest system simulated densely.
pub const MC_MAX_QUBITS: usize = 12;

#[derive(Debug, Clone, Serialize)]
pub struct Fig3Options {
    pub n: usize,
    pub p_grid: Vec<f64>,
    pub seed: u64,
    /// Monte Carlo samples per grid point; zero skips simulation.
    pub samples: usize,
    pub rapid_depth: usize,
    pub slow_depth: usize,
    pub theta: f64,
    pub convergence_p: f64,
    pub convergence_max_depth: usize,
    pub fit_min_depth: usize,
    /// Deviations at or below this (normalized) level are left out of the fit.
    pub fit_floor: f64,
}

impl Default for Fig3Options {
    fn default() -> Self {
        Fig3Options {
            n: 6,
            p_grid: (0..19).map(|k| 0.05 + 0.05 * k as f64).collect(),
            seed: 0,
            samples: 2000,
            rapid_depth: 8,
            slow_depth: 20,
            theta: DEFAULT_CRX_THETA,
            convergence_p: 0.1,
            convergence_max_depth: 40,
            fit_min_depth: 5,
            fit_floor: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Fig3Row {
    pub entangler: &'static str,
    pub n: usize,
    pub depth: usize,
    pub p: f64,
    pub deep: f64,
    pub finite_depth: f64,
    pub prediction: f64,
    pub prediction_kind: &'static str,
    pub mc_variance: Option<f64>,
    pub mc_se: Option<f64>,
    pub mc_z: Option<f64>,
    pub samples: usize,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub entangler: &'static str,
    pub p: f64,
    pub depth: usize,
    pub variance: f64,
    pub deep: f64,
    pub deviation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EntanglerSummary {
    pub entangler: &'static str,
    pub depth: usize,
    /// Raw `(ℓ_ρ̃, ℓ_H)` used as the unit.
    pub normalization: f64,
    pub convergence_fit: Option<ConvergenceFit>,
    /// Log–log slope of the deep value over grid points in `[0.05, 0.5]`.
    pub log_log_slope: Option<f64>,
    pub log_log_r_squared: Option<f64>,
    /// Largest `|Var∞/(p/(2−p)) − 1|` over grid points in `[0.2, 0.8]`.
    pub max_relative_deviation_linear: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Fig3Result {
    pub rows: Vec<Fig3Row>,
    pub convergence: Vec<ConvergenceRow>,
    pub summaries: Vec<EntanglerSummary>,
}

const SLOPE_RANGE: (f64, f64) = (0.05, 0.5);
const LINEAR_RANGE: (f64, f64) = (0.2, 0.8);

fn in_range(p: f64, (lo, hi): (f64, f64)) -> bool {
    p >= lo - 1e-9 && p <= hi + 1e-9
}

struct Arm {
    setup: NoiseScalingSetup,
    rho: LocalityVector,
    depth: usize,
    quadratic: bool,
}

impl Arm {
    fn new(n: usize, entangler: Entangler, depth: usize, quadratic: bool) -> CliResult<Self> {
        let h = zz_unit_coupling(n).config("ZZ coupling")?;
        let setup = NoiseScalingSetup::ghz_zz(n, entangler, h).stage("building the noise-scaling setup")?;
        let rho = LocalityVector::from_operator(&zero_state(&setup.partition)).stage("locality of ρ")?;
        Ok(Arm {
            setup,
            rho,
            depth,
            quadratic,
        })
    }

    fn id(&self) -> &'static str {
        self.setup.entangler.id()
    }

    fn deep(&self, p: f64) -> CliResult<f64> {
        let s = &self.setup;
        let report = noise_model_deep(p, &s.entangler_ltm, &s.fixed_point_locality, &s.observable_locality)
            .stage("evaluating the noise model")?;
        Ok(report.value / s.normalization)
    }

    fn by_depth(&self, p: f64, max_depth: usize) -> CliResult<Vec<f64>> {
        let s = &self.setup;
        let t = s.noisy_ltm(p).stage("building the noisy LTM")?;
        let values = variance_by_depth(&self.rho, &t, &s.observable_locality, max_depth).stage("depth sweep")?;
        Ok(values.into_iter().map(|v| v / s.normalization).collect())
    }
}

pub fn run_fig3(options: &Fig3Options) -> CliResult<Fig3Result> {
    if options.n < 2 {
        return Err(CliError::Config("fig3 needs at least two qubits".into()));
    }
    if options.p_grid.is_empty() {
        return Err(CliError::Config("the p grid must not be empty".into()));
    }
    if let Some(p) = options.p_grid.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
        return Err(CliError::Config(format!("noise strength {p} outside (0, 1]")));
    }
    if !(options.convergence_p > 0.0 && options.convergence_p <= 1.0) {
        return Err(CliError::Config("the convergence p must lie in (0, 1]".into()));
    }
    if options.samples > 0 && options.n > MC_MAX_QUBITS {
        return Err(CliError::Config(format!(
            "Monte Carlo columns need n ≤ {MC_MAX_QUBITS}; pass --samples 0 for the analytic path only"
        )));
    }
    if options.samples > 0 && options.samples < ltm_core::mc::MIN_SAMPLES {
        return Err(CliError::Config(format!("samples must be 0 or at least {}", ltm_core::mc::MIN_SAMPLES)));
    }
    let arms = [
        Arm::new(options.n, Entangler::CnotDoubleCascade, options.rapid_depth, true)?,
        Arm::new(options.n, Entangler::CrxCascade { theta: options.theta }, options.slow_depth, false)?,
    ];

    let jobs: Vec<(usize, usize, f64)> = arms
        .iter()
        .enumerate()
        .flat_map(|(a, _)| options.p_grid.iter().enumerate().map(move |(i, &p)| (a, i, p)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(a, i, p)| {
            let arm = &arms[a];
            let deep = arm.deep(p)?;
            let finite_depth = arm.by_depth(p, arm.depth)?[arm.depth];
            let prediction = if arm.quadratic { p * p } else { p / (2.0 - p) };
            let (mc_variance, mc_se, mc_z, seed) = if options.samples > 0 {
                let s = &arm.setup;
                let channel = s.noisy_channel(p).stage("building the noisy channel")?;
                let spec = LayeredCircuitSpec::homogeneous(zero_state(&s.partition), channel, arm.depth, s.observable.clone())
                    .stage("building the simulation")?;
                let seed = options.seed.wrapping_add((a * options.p_grid.len() + i) as u64);
                let est = estimate_variance(&spec, options.samples, seed).stage("simulating")?;
                let z = crate::run::z_of(&est, finite_depth * s.normalization);
                let var = est.variance / s.normalization;
                let se = est.standard_error_of_variance / s.normalization;
                (Some(var), Some(se), Some(z), Some(seed))
            } else {
                (None, None, None, None)
            };
            Ok(Fig3Row {
                entangler: arm.id(),
                n: options.n,
                depth: arm.depth,
                p,
                deep,
                finite_depth,
                prediction,
                prediction_kind: if arm.quadratic { "quadratic" } else { "linear" },
                mc_variance,
                mc_se,
                mc_z,
                samples: options.samples,
                seed,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;

    let mut convergence = Vec::new();
    let mut summaries = Vec::new();
    for arm in &arms {
        let p = options.convergence_p;
        let deep = arm.deep(p)?;
        let values = arm.by_depth(p, options.convergence_max_depth)?;
        for (depth, &variance) in values.iter().enumerate().skip(1) {
            convergence.push(ConvergenceRow {
                entangler: arm.id(),
                p,
                depth,
                variance,
                deep,
                deviation: (variance - deep).abs(),
            });
        }
        let depths: Vec<usize> = (options.fit_min_depth..=options.convergence_max_depth).collect();
        let window: Vec<f64> = depths.iter().map(|&l| values[l]).collect();
        let convergence_fit = fit_convergence(&depths, &window, deep, options.fit_floor).ok();

        let own: Vec<&Fig3Row> = rows.iter().filter(|r| r.entangler == arm.id()).collect();
        let (xs, ys): (Vec<f64>, Vec<f64>) = own
            .iter()
            .filter(|r| in_range(r.p, SLOPE_RANGE) && r.deep > 0.0)
            .map(|r| (r.p, r.deep))
            .unzip();
        let slope = log_log_fit(&xs, &ys).ok();
        let max_relative_deviation_linear = own
            .iter()
            .filter(|r| in_range(r.p, LINEAR_RANGE))
            .map(|r| (r.deep / (r.p / (2.0 - r.p)) - 1.0).abs())
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))));
        summaries.push(EntanglerSummary {
            entangler: arm.id(),
            depth: arm.depth,
            normalization: arm.setup.normalization,
            convergence_fit,
            log_log_slope: slope.map(|f| f.slope),
            log_log_r_squared: slope.map(|f| f.r_squared),
            max_relative_deviation_linear,
        });
    }
    Ok(Fig3Result {
        rows,
        convergence,
        summaries,
    })
}
