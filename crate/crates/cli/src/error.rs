use serde_json::json;
use thiserror::Error;

/// Failure of a CLI command, carrying the process exit code it maps to.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical failure while {stage}: {source}")]
    Numerical {
        stage: String,
        #[source]
        source: ltm_core::Error,
    },

    #[error("output error: {0}")]
    Output(String),

    #[error("{} check(s) failed: {}", .0.len(), .0.join("; "))]
    Check(Vec<String>),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical { .. } => 3,
            CliError::Output(_) => 1,
            CliError::Check(_) => 4,
        }
    }

    /// Machine-readable description, printed to stderr on numerical failures.
    pub fn diagnostics(&self) -> serde_json::Value {
        match self {
            CliError::Numerical { stage, source } => {
                let (kind, residual) = match source {
                    ltm_core::Error::NumericalFailure { residual, .. } => ("numerical-failure", Some(*residual)),
                    ltm_core::Error::SingularAbsorption { radius } => ("singular-absorption", Some(*radius)),
                    ltm_core::Error::NegativeVariance(v) => ("negative-variance", Some(*v)),
                    ltm_core::Error::ExactLimitExceeded { .. } => ("exact-limit-exceeded", None),
                    ltm_core::Error::SimulationCap { .. } => ("simulation-cap", None),
                    ltm_core::Error::KrausLimit { .. } => ("kraus-limit", None),
                    ltm_core::Error::InvalidArgument(_) => ("invalid-argument", None),
                };
                json!({
                    "error": kind,
                    "stage": stage,
                    "message": source.to_string(),
                    "residual": residual.filter(|r| r.is_finite()),
                    "exit_code": self.exit_code(),
                })
            }
            other => json!({ "error": other.to_string(), "exit_code": other.exit_code() }),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Attaches a stage name to library errors.
pub(crate) trait Stage<T> {
    fn stage(self, stage: &str) -> CliResult<T>;
    fn config(self, what: &str) -> CliResult<T>;
}

impl<T> Stage<T> for ltm_core::Result<T> {
    fn stage(self, stage: &str) -> CliResult<T> {
        self.map_err(|source| CliError::Numerical {
            stage: stage.to_string(),
            source,
        })
    }

    fn config(self, what: &str) -> CliResult<T> {
        self.map_err(|e| CliError::Config(format!("{what}: {e}")))
    }
}
