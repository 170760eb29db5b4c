//! JSON experiment configuration and its resolution into library objects.
//!
//! Relative file paths inside a configuration are resolved against the
//! directory of the configuration file.

use std::fs;
use std::path::{Path, PathBuf};

use ltm_core::experiments::{zz_chain, zz_unit_coupling, Entangler, DEFAULT_CRX_THETA};
use ltm_core::operator::{ghz_state, maximally_mixed, pauli_string, zero_state};
use ltm_core::{CMatrix, Channel, DenseOperator, Locality, SubsystemPartition, C64};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult, Stage};

fn default_theta() -> f64 {
    DEFAULT_CRX_THETA
}

fn default_z_max() -> f64 {
    4.0
}

fn default_samples_per_block() -> usize {
    2000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    /// Local dimensions, subsystem 0 first.
    pub partition: Vec<usize>,
    pub circuit: CircuitConfig,
    #[serde(default)]
    pub noise: Option<NoiseConfig>,
    pub observable: ObservableConfig,
    #[serde(default)]
    pub initial_state: StateConfig,
    /// Circuit depths `L` to evaluate.
    pub depths: Vec<usize>,
    /// Noise strengths; overrides `noise.p` when non-empty.
    #[serde(default)]
    pub p_grid: Vec<f64>,
    /// Monte Carlo samples per grid point; zero disables simulation.
    #[serde(default)]
    pub n_samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub ltm: LtmConfig,
    #[serde(default)]
    pub checks: ChecksConfig,
    #[serde(default)]
    pub outputs: OutputsConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CircuitConfig {
    CnotDoubleCascade,
    CrxCascade {
        #[serde(default = "default_theta")]
        theta: f64,
    },
    Swap,
    CustomKrausFile {
        path: PathBuf,
    },
}

/// Replacement noise `(1−p)·E + p·Tr[·]ρ̃` after every intermediate channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default)]
    pub p: Option<f64>,
    pub fixed_point: StateConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ObservableConfig {
    /// `h Σ Z_a Z_b` over the ring; `h` defaults to the unit-overlap coupling.
    ZzChain {
        #[serde(default)]
        h: Option<f64>,
    },
    SinglePauli {
        label: String,
    },
    Custom {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StateConfig {
    #[default]
    Zero,
    Ghz,
    MaximallyMixed,
    Custom {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LtmConfig {
    #[default]
    Exact,
    Sampled {
        #[serde(default = "default_samples_per_block")]
        samples_per_block: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksConfig {
    /// Locality subset `K` as bitstrings (subsystem 0 first) for the lower bound.
    #[serde(default)]
    pub lower_bound: Option<Vec<String>>,
    /// Compare the mean LTM of the Kraus unravelling against the channel LTM.
    #[serde(default)]
    pub unravelling: bool,
    /// Largest accepted `|z|` between Monte Carlo and the exact value.
    #[serde(default = "default_z_max")]
    pub mc_z_max: f64,
}

impl Default for ChecksConfig {
    fn default() -> Self {
        ChecksConfig {
            lower_bound: None,
            unravelling: false,
            mc_z_max: default_z_max(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsConfig {
    #[serde(default)]
    pub directory: Option<PathBuf>,
    /// File stem of the CSV and its sidecar; defaults to the experiment name.
    #[serde(default)]
    pub stem: Option<String>,
}

/// On-disk format of a Kraus list: operators, rows, `[re, im]` entries.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KrausFile {
    pub kraus: Vec<Vec<Vec<[f64; 2]>>>,
}

/// On-disk format of a single operator.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixFile {
    pub matrix: Vec<Vec<[f64; 2]>>,
}

pub fn matrix_to_rows(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

fn rows_to_matrix(rows: &[Vec<[f64; 2]>], what: &str) -> CliResult<CMatrix> {
    let d = rows.len();
    if d == 0 || rows.iter().any(|r| r.len() != d) {
        return Err(CliError::Config(format!("{what} is not a non-empty square matrix")));
    }
    if rows.iter().flatten().flatten().any(|x| !x.is_finite()) {
        return Err(CliError::Config(format!("{what} has non-finite entries")));
    }
    Ok(CMatrix::from_fn(d, d, |i, j| C64::new(rows[i][j][0], rows[i][j][1])))
}

pub fn read_kraus_file(path: &Path) -> CliResult<Vec<CMatrix>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let file: KrausFile =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if file.kraus.is_empty() {
        return Err(CliError::Config(format!("{}: empty Kraus list", path.display())));
    }
    file.kraus
        .iter()
        .enumerate()
        .map(|(i, rows)| rows_to_matrix(rows, &format!("Kraus operator {i} in {}", path.display())))
        .collect()
}

pub fn read_matrix_file(path: &Path) -> CliResult<CMatrix> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let file: MatrixFile =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    rows_to_matrix(&file.matrix, &path.display().to_string())
}

/// Parses `start:stop:count` into `count` evenly spaced points, both ends
/// included.
pub fn parse_grid(spec: &str) -> CliResult<Vec<f64>> {
    let bad = || CliError::Config(format!("grid `{spec}` is not of the form start:stop:count"));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let start: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let stop: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if count == 0 || !start.is_finite() || !stop.is_finite() {
        return Err(bad());
    }
    if count == 1 {
        return Ok(vec![start]);
    }
    let step = (stop - start) / (count - 1) as f64;
    Ok((0..count).map(|k| if k + 1 == count { stop } else { start + step * k as f64 }).collect())
}

/// A configuration with every reference turned into a concrete object.
#[derive(Debug, Clone)]
pub struct ResolvedExperiment {
    pub config: ExperimentConfig,
    pub partition: SubsystemPartition,
    pub circuit: Channel,
    /// Kraus operators when the circuit came from a file.
    pub kraus: Option<Vec<CMatrix>>,
    pub fixed_point: Option<DenseOperator>,
    pub observable: DenseOperator,
    pub initial_state: DenseOperator,
    /// One entry per grid point; `None` means no noise.
    pub p_values: Vec<Option<f64>>,
    pub lower_bound_set: Option<Vec<Locality>>,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> CliResult<(Self, PathBuf)> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let config: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((config, base))
    }

    pub fn resolve(&self, base: &Path) -> CliResult<ResolvedExperiment> {
        if self.name.trim().is_empty() {
            return Err(CliError::Config("name must not be empty".into()));
        }
        if self.depths.is_empty() {
            return Err(CliError::Config("depths must not be empty".into()));
        }
        if self.n_samples > 0 && self.n_samples < ltm_core::mc::MIN_SAMPLES {
            return Err(CliError::Config(format!(
                "n_samples must be 0 or at least {}",
                ltm_core::mc::MIN_SAMPLES
            )));
        }
        if self.checks.mc_z_max.is_nan() || self.checks.mc_z_max <= 0.0 {
            return Err(CliError::Config("checks.mc_z_max must be positive".into()));
        }
        let partition = SubsystemPartition::new(self.partition.clone()).config("partition")?;
        let n = partition.num_subsystems();

        let (circuit, kraus) = match &self.circuit {
            CircuitConfig::CustomKrausFile { path } => {
                let ops = read_kraus_file(&resolve_path(base, path))?;
                if ops[0].nrows() != partition.dim() {
                    return Err(CliError::Config(format!(
                        "Kraus operators act on dimension {}, partition has {}",
                        ops[0].nrows(),
                        partition.dim()
                    )));
                }
                (Channel::kraus(ops.clone()).config("custom Kraus channel")?, Some(ops))
            }
            builtin => {
                let entangler = match *builtin {
                    CircuitConfig::CnotDoubleCascade => Entangler::CnotDoubleCascade,
                    CircuitConfig::CrxCascade { theta } => Entangler::CrxCascade { theta },
                    _ => Entangler::Swap,
                };
                if !partition.is_qubits() {
                    return Err(CliError::Config(format!("entangler {} needs a qubit partition", entangler.id())));
                }
                (entangler.channel(n).config("entangler")?, None)
            }
        };
        self.finish(base, partition, circuit, kraus)
    }

    fn finish(
        &self,
        base: &Path,
        partition: SubsystemPartition,
        circuit: Channel,
        kraus: Option<Vec<CMatrix>>,
    ) -> CliResult<ResolvedExperiment> {
        let fixed_point = match &self.noise {
            Some(noise) => Some(resolve_state(&noise.fixed_point, &partition, base, "noise fixed point")?),
            None => None,
        };
        let p_values = match (&self.noise, self.p_grid.is_empty()) {
            (None, true) => vec![None],
            (None, false) => return Err(CliError::Config("p_grid given without a noise section".into())),
            (Some(noise), true) => match noise.p {
                Some(p) => vec![Some(p)],
                None => return Err(CliError::Config("noise needs p or a non-empty p_grid".into())),
            },
            (Some(_), false) => self.p_grid.iter().map(|&p| Some(p)).collect(),
        };
        for p in p_values.iter().flatten() {
            if !(0.0..=1.0).contains(p) {
                return Err(CliError::Config(format!("noise strength {p} outside [0, 1]")));
            }
        }
        let observable = match &self.observable {
            ObservableConfig::ZzChain { h } => {
                if !partition.is_qubits() {
                    return Err(CliError::Config("zz-chain needs a qubit partition".into()));
                }
                let n = partition.num_subsystems();
                let h = match h {
                    Some(h) => *h,
                    None => zz_unit_coupling(n).config("zz-chain")?,
                };
                zz_chain(n, h).config("zz-chain")?
            }
            ObservableConfig::SinglePauli { label } => {
                if !partition.is_qubits() || label.chars().count() != partition.num_subsystems() {
                    return Err(CliError::Config(format!(
                        "Pauli label `{label}` does not match the partition"
                    )));
                }
                DenseOperator::new(pauli_string(label).config("single-pauli")?, partition.clone())
                    .config("single-pauli")?
            }
            ObservableConfig::Custom { path } => {
                let m = read_matrix_file(&resolve_path(base, path))?;
                let op = DenseOperator::new(m, partition.clone()).config("custom observable")?;
                if !op.is_hermitian(1e-10) {
                    return Err(CliError::Config("custom observable is not Hermitian".into()));
                }
                op
            }
        };
        let initial_state = resolve_state(&self.initial_state, &partition, base, "initial state")?;
        let lower_bound_set = match &self.checks.lower_bound {
            None => None,
            Some(labels) => {
                if labels.is_empty() {
                    return Err(CliError::Config("checks.lower_bound must not be empty".into()));
                }
                Some(
                    labels
                        .iter()
                        .map(|s| parse_locality(s, &partition))
                        .collect::<CliResult<Vec<_>>>()?,
                )
            }
        };
        if self.checks.unravelling && kraus.is_none() {
            return Err(CliError::Config("checks.unravelling needs a custom-kraus-file circuit".into()));
        }
        Ok(ResolvedExperiment {
            config: self.clone(),
            partition,
            circuit,
            kraus,
            fixed_point,
            observable,
            initial_state,
            p_values,
            lower_bound_set,
        })
    }
}

fn resolve_path(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

fn resolve_state(
    spec: &StateConfig,
    partition: &SubsystemPartition,
    base: &Path,
    what: &str,
) -> CliResult<DenseOperator> {
    match spec {
        StateConfig::Zero => Ok(zero_state(partition)),
        StateConfig::Ghz => ghz_state(partition).config(what),
        StateConfig::MaximallyMixed => Ok(maximally_mixed(partition)),
        StateConfig::Custom { path } => {
            let m = read_matrix_file(&resolve_path(base, path))?;
            ltm_core::channels::validate_state(&m).config(what)?;
            DenseOperator::new(m, partition.clone()).config(what)
        }
    }
}

/// Bitstring with subsystem 0 first, `1` marking an active subsystem.
pub fn parse_locality(s: &str, partition: &SubsystemPartition) -> CliResult<Locality> {
    let n = partition.num_subsystems();
    if s.len() != n || !s.chars().all(|c| c == '0' || c == '1') {
        return Err(CliError::Config(format!("`{s}` is not a {n}-character locality bitstring")));
    }
    let mask = s.chars().enumerate().filter(|(_, c)| *c == '1').fold(0usize, |acc, (m, _)| acc | (1 << m));
    Ok(Locality(mask))
}
