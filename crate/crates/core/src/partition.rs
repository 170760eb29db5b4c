//! Subsystem partitions and locality labels.
//!
//! A partition groups the Hilbert space into `M` subsystems of dimensions
//! `d_m`. Operator space then splits into `2^M` sectors, one per binary
//! string `κ`: the sector `κ` is spanned by traceless-on-each-active-factor
//! operators acting non-trivially exactly on the subsystems with `κ_m = 1`.
//!
//! `κ` is stored as a bitmask with subsystem `m` at bit `m`. Every matrix or
//! vector indexed by `κ` in this crate uses bitmask-ascending order.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Largest number of subsystems supported (so that `2^M` vectors stay small).
pub const MAX_SUBSYSTEMS: usize = 16;

/// A locality label `κ ∈ {0,1}^M`, encoded as a bitmask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Locality(pub usize);

impl Locality {
    pub const TRIVIAL: Locality = Locality(0);

    pub fn index(self) -> usize {
        self.0
    }

    pub fn is_active(self, m: usize) -> bool {
        self.0 >> m & 1 == 1
    }

    pub fn weight(self) -> u32 {
        self.0.count_ones()
    }

    /// Renders the label as a string of length `m`, subsystem 0 first.
    pub fn to_bitstring(self, m: usize) -> String {
        (0..m).map(|i| if self.is_active(i) { '1' } else { '0' }).collect()
    }
}

impl fmt::Display for Locality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "κ#{}", self.0)
    }
}

impl FromStr for Locality {
    type Err = Error;

    /// Parses a bitstring written subsystem 0 first, e.g. `"01"` is active
    /// on subsystem 1 only.
    fn from_str(s: &str) -> Result<Self> {
        if s.is_empty() || s.len() > MAX_SUBSYSTEMS {
            return invalid(format!("locality string {s:?} has bad length"));
        }
        let mut mask = 0usize;
        for (m, ch) in s.chars().enumerate() {
            match ch {
                '0' => {}
                '1' => mask |= 1 << m,
                _ => return invalid(format!("locality string {s:?} is not binary")),
            }
        }
        Ok(Locality(mask))
    }
}

/// How the Hilbert space is divided into subsystems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PartitionRepr", into = "PartitionRepr")]
pub struct SubsystemPartition {
    dims: Vec<usize>,
    dim: usize,
    sector_dims: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PartitionRepr {
    dims: Vec<usize>,
}

impl TryFrom<PartitionRepr> for SubsystemPartition {
    type Error = Error;
    fn try_from(r: PartitionRepr) -> Result<Self> {
        SubsystemPartition::new(r.dims)
    }
}

impl From<SubsystemPartition> for PartitionRepr {
    fn from(p: SubsystemPartition) -> Self {
        PartitionRepr { dims: p.dims }
    }
}

impl SubsystemPartition {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return invalid("a partition needs at least one subsystem");
        }
        if dims.len() > MAX_SUBSYSTEMS {
            return invalid(format!(
                "{} subsystems exceeds the supported maximum {MAX_SUBSYSTEMS}",
                dims.len()
            ));
        }
        if let Some(&bad) = dims.iter().find(|&&d| d < 2) {
            return invalid(format!("subsystem dimension {bad} is below 2"));
        }
        let dim = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .filter(|&d| d <= 1 << 20)
            .ok_or_else(|| Error::InvalidArgument("total dimension too large".into()))?;
        let m = dims.len();
        let sector_dims = (0..1usize << m)
            .map(|k| {
                dims.iter()
                    .enumerate()
                    .filter(|(i, _)| k >> i & 1 == 1)
                    .map(|(_, &d)| (d * d - 1) as f64)
                    .product()
            })
            .collect();
        Ok(SubsystemPartition {
            dims,
            dim,
            sector_dims,
        })
    }

    /// `n` qubits, one per subsystem.
    pub fn qubits(n: usize) -> Result<Self> {
        Self::new(vec![2; n])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn num_subsystems(&self) -> usize {
        self.dims.len()
    }

    /// Total Hilbert-space dimension `d`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of locality sectors, `2^M`.
    pub fn num_localities(&self) -> usize {
        1 << self.dims.len()
    }

    pub fn localities(&self) -> impl Iterator<Item = Locality> {
        (0..self.num_localities()).map(Locality)
    }

    /// `d_κ = Π_m (d_m² − 1)^{κ_m}`.
    pub fn sector_dim(&self, k: Locality) -> f64 {
        self.sector_dims[k.0]
    }

    /// All `d_κ` in bitmask order.
    pub fn sector_dims(&self) -> &[f64] {
        &self.sector_dims
    }

    pub fn is_qubits(&self) -> bool {
        self.dims.iter().all(|&d| d == 2)
    }

    /// Checks that `k` has exactly `M` bits.
    pub fn check_locality(&self, k: Locality) -> Result<()> {
        if k.0 >= self.num_localities() {
            return invalid(format!(
                "locality {} does not fit a partition with {} subsystems",
                k.0,
                self.num_subsystems()
            ));
        }
        Ok(())
    }

    pub(crate) fn ensure_same(&self, other: &SubsystemPartition) -> Result<()> {
        if self != other {
            return invalid(format!(
                "partition mismatch: {:?} vs {:?}",
                self.dims, other.dims
            ));
        }
        Ok(())
    }

    /// Row-major strides of the Hilbert-space index, subsystem 0 most significant.
    pub(crate) fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dims.len()];
        for m in (0..self.dims.len().saturating_sub(1)).rev() {
            strides[m] = strides[m + 1] * self.dims[m + 1];
        }
        strides
    }
}
