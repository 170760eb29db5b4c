//! The two-qubit SWAP circuit: a deep limit that oscillates with period two.

use ltm_core::gates::swap;
use ltm_core::mc::{estimate_variance, LayeredCircuitSpec};
use ltm_core::operator::{kron_all, pauli, zero_state};
use ltm_core::variance::{variance_deep, variance_exact};
use ltm_core::{decompose_ltm, ltm_exact, CMatrix, Channel, DenseOperator, LocalityVector, SubsystemPartition};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CliResult, Stage};

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SwapOptions {
    /// Monte Carlo samples per depth; zero skips simulation.
    pub samples: usize,
    pub seed: u64,
    pub max_depth: usize,
}

impl Default for SwapOptions {
    fn default() -> Self {
        SwapOptions {
            samples: 4000,
            seed: 0,
            max_depth: 8,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SwapRow {
    pub depth: usize,
    pub exact: f64,
    pub closed_form: f64,
    pub abs_error: f64,
    pub mc_variance: Option<f64>,
    pub mc_se: Option<f64>,
    pub mc_z: Option<f64>,
    pub samples: usize,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SwapBlock {
    /// Member localities as bitstrings, subsystem 0 first.
    pub localities: Vec<String>,
    pub essential: bool,
    pub period: usize,
    pub radius: f64,
    pub right_perron: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SwapReport {
    /// `‖ρ₂‖²` of the single-qubit state.
    pub rho_purity: f64,
    /// `‖H₂‖²` of the single-qubit observable.
    pub h_norm_sqr: f64,
    pub even_closed_form: f64,
    pub cesaro: f64,
    pub cesaro_closed_form: f64,
    pub residues: Option<Vec<f64>>,
    pub localities: Vec<String>,
    /// Adjoint LTM, rows are outputs.
    pub ltm: Vec<Vec<f64>>,
    pub blocks: Vec<SwapBlock>,
    pub rows: Vec<SwapRow>,
    pub max_abs_error: f64,
}

fn hs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// `ρ = 1/2 ⊗ |0⟩⟨0|`, `H = 1 ⊗ Z`, SWAP between the local layers.
pub fn run_swap_example(options: &SwapOptions) -> CliResult<SwapReport> {
    let p = SubsystemPartition::qubits(2).stage("building the partition")?;
    let one = SubsystemPartition::qubits(1).stage("building the partition")?;
    let rho2 = zero_state(&one).into_matrix();
    let h2 = pauli('Z');
    let half = CMatrix::identity(2, 2).scale(0.5);
    let rho = DenseOperator::new(kron_all([&half, &rho2]), p.clone()).stage("building ρ")?;
    let h = DenseOperator::new(kron_all([&CMatrix::identity(2, 2), &h2]), p.clone()).stage("building H")?;
    let rho_l = LocalityVector::from_operator(&rho).stage("locality of ρ")?;
    let h_l = LocalityVector::from_operator(&h).stage("locality of H")?;

    let channel = Channel::unitary(swap()).stage("building SWAP")?;
    let t = ltm_exact(&channel, true, &p).stage("computing the SWAP LTM")?;
    let dec = decompose_ltm(&t).stage("decomposing the SWAP LTM")?;
    let deep = variance_deep(&dec, &rho_l, &h_l, false).stage("deep limit")?;

    let rho_purity = hs(&rho2);
    let h_norm_sqr = hs(&h2);
    let even = (rho_purity - 0.5) * h_norm_sqr / 3.0;

    let rows = (1..=options.max_depth)
        .into_par_iter()
        .map(|depth| {
            let layers = vec![t.clone(); depth];
            let exact = variance_exact(&rho_l, &layers, &h_l, 0.0, 4).stage("exact variance")?.value;
            let closed_form = if depth % 2 == 0 { even } else { 0.0 };
            let (mc_variance, mc_se, mc_z, seed) = if options.samples > 0 {
                let spec = LayeredCircuitSpec::homogeneous(rho.clone(), channel.clone(), depth, h.clone())
                    .stage("building the simulation")?;
                let seed = options.seed.wrapping_add(depth as u64);
                let est = estimate_variance(&spec, options.samples, seed).stage("simulating")?;
                (Some(est.variance), Some(est.standard_error_of_variance), Some(crate::run::z_of(&est, exact)), Some(seed))
            } else {
                (None, None, None, None)
            };
            Ok(SwapRow {
                depth,
                exact,
                closed_form,
                abs_error: (exact - closed_form).abs(),
                mc_variance,
                mc_se,
                mc_z,
                samples: options.samples,
                seed,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;

    let bits = |k: usize| ltm_core::Locality(k).to_bitstring(2);
    let matrix = t.matrix();
    Ok(SwapReport {
        rho_purity,
        h_norm_sqr,
        even_closed_form: even,
        cesaro: deep.value,
        cesaro_closed_form: (rho_purity - 0.5) * h_norm_sqr / 6.0,
        residues: deep.residues.clone(),
        localities: (0..4).map(bits).collect(),
        ltm: (0..4).map(|i| (0..4).map(|j| matrix[(i, j)]).collect()).collect(),
        blocks: dec
            .blocks
            .iter()
            .map(|b| SwapBlock {
                localities: b.indices.iter().map(|&k| bits(k)).collect(),
                essential: b.essential,
                period: b.period,
                radius: b.radius,
                right_perron: b.right.clone(),
            })
            .collect(),
        max_abs_error: rows.iter().map(|r| r.abs_error).fold(0.0, f64::max),
        rows,
    })
}
