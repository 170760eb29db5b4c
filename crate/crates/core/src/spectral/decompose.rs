//! Canonical block-triangular form of a non-negative matrix.
//!
//! After relabeling, the matrix reads
//!
//! ```text
//! [ T_E  R ]
//! [ 0    Q ]
//! ```
//!
//! where `T_E` is block diagonal over the essential (closed) classes, `Q`
//! collects every inessential class and `R` carries the flow from inessential
//! inputs into essential outputs.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::perron::{perron, PerronPair};
use super::scc::{period_on, successors, tarjan};
use crate::error::{invalid, Result};
use crate::ltm::Ltm;

/// Knobs for [`decompose_with`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DecomposeOptions {
    /// Entries at or below this value are not edges of the support graph.
    pub edge_threshold: f64,
    /// `|r − 1|` below this value classifies a block as unit-radius.
    pub unit_tolerance: f64,
    /// Entries in `[−clamp, 0)` are treated as zero; anything more negative
    /// is rejected.
    pub negative_clamp: f64,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        DecomposeOptions {
            edge_threshold: 1e-12,
            unit_tolerance: 1e-9,
            negative_clamp: 1e-12,
        }
    }
}

/// One strongly connected class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrreducibleBlock {
    /// Member indices (`κ` bitmasks for LTMs), ascending.
    pub indices: Vec<usize>,
    /// No mass leaves the block.
    pub essential: bool,
    pub period: usize,
    pub radius: f64,
    /// Left Perron vector, aligned with `indices`.
    pub left: Vec<f64>,
    /// Right Perron vector, aligned with `indices`, summing to one.
    pub right: Vec<f64>,
    /// `d_z = Σ_{κ ∈ z} d_κ`; equals the block size for plain matrices.
    pub block_dim: f64,
    /// Cyclic class of each member (all zero for aperiodic blocks).
    pub cyclic_class: Vec<usize>,
}

impl IrreducibleBlock {
    pub fn is_unit(&self, tolerance: f64) -> bool {
        (self.radius - 1.0).abs() < tolerance
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.binary_search(&index).is_ok()
    }
}

/// Output of [`decompose`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CanonicalDecomposition {
    /// `permutation[c]` is the original index placed at canonical position `c`.
    pub permutation: Vec<usize>,
    /// Essential blocks first (ordered by smallest member), then inessential
    /// blocks.
    pub blocks: Vec<IrreducibleBlock>,
    /// Original indices of the essential part, in canonical order.
    pub essential: Vec<usize>,
    /// Original indices of the inessential part, in canonical order.
    pub inessential: Vec<usize>,
    pub t_essential: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    /// Spectral radius of `Q`, zero when `Q` is empty.
    pub q_radius: f64,
    /// Largest entry found in the structurally zero lower-left block.
    pub leak: f64,
    /// The clamped input matrix.
    pub matrix: DMatrix<f64>,
    pub options: DecomposeOptions,
}

impl CanonicalDecomposition {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn essential_blocks(&self) -> impl Iterator<Item = &IrreducibleBlock> {
        self.blocks.iter().filter(|b| b.essential)
    }

    pub fn inessential_blocks(&self) -> impl Iterator<Item = &IrreducibleBlock> {
        self.blocks.iter().filter(|b| !b.essential)
    }

    /// Essential blocks with radius one, within tolerance.
    pub fn unit_blocks(&self) -> impl Iterator<Item = &IrreducibleBlock> {
        let tol = self.options.unit_tolerance;
        self.essential_blocks().filter(move |b| b.is_unit(tol))
    }

    /// The block containing `index`.
    pub fn block_of(&self, index: usize) -> Option<&IrreducibleBlock> {
        self.blocks.iter().find(|b| b.contains(index))
    }

    /// The permuted matrix rebuilt from `T_E`, `R` and `Q`.
    pub fn reassemble(&self) -> DMatrix<f64> {
        let e = self.essential.len();
        let n = self.dim();
        let mut out = DMatrix::zeros(n, n);
        out.view_mut((0, 0), (e, e)).copy_from(&self.t_essential);
        out.view_mut((0, e), (e, n - e)).copy_from(&self.r);
        out.view_mut((e, e), (n - e, n - e)).copy_from(&self.q);
        out
    }

    /// The input with rows and columns in canonical order.
    pub fn permuted(&self) -> DMatrix<f64> {
        let p = &self.permutation;
        DMatrix::from_fn(self.dim(), self.dim(), |i, j| self.matrix[(p[i], p[j])])
    }
}

/// Decomposes a non-negative square matrix with default options.
pub fn decompose(t: &DMatrix<f64>) -> Result<CanonicalDecomposition> {
    decompose_with(t, None, DecomposeOptions::default())
}

/// Decomposes an LTM, recording `d_z` for every block.
pub fn decompose_ltm(t: &Ltm) -> Result<CanonicalDecomposition> {
    decompose_with(
        t.matrix(),
        Some(t.partition().sector_dims()),
        DecomposeOptions::default(),
    )
}

pub fn decompose_with(
    t: &DMatrix<f64>,
    sector_dims: Option<&[f64]>,
    options: DecomposeOptions,
) -> Result<CanonicalDecomposition> {
    let n = t.nrows();
    if n == 0 || t.ncols() != n {
        return invalid(format!("decomposition needs a square matrix, got {}x{}", n, t.ncols()));
    }
    if let Some(dims) = sector_dims {
        if dims.len() != n {
            return invalid("sector dimensions do not match the matrix size");
        }
    }
    let mut matrix = t.clone();
    for x in matrix.iter_mut() {
        if !x.is_finite() || *x < -options.negative_clamp {
            return invalid(format!("entry {x} is negative beyond tolerance or not finite"));
        }
        if *x < 0.0 {
            *x = 0.0;
        }
    }

    let adj = successors(&matrix, options.edge_threshold);
    let components = tarjan(&adj);
    let mut component_of = vec![0usize; n];
    for (c, members) in components.iter().enumerate() {
        for &m in members {
            component_of[m] = c;
        }
    }
    let closed: Vec<bool> = components
        .iter()
        .enumerate()
        .map(|(c, members)| {
            members
                .iter()
                .all(|&v| adj[v].iter().all(|&w| component_of[w] == c))
        })
        .collect();

    let mut essential_ids: Vec<usize> = (0..components.len()).filter(|&c| closed[c]).collect();
    essential_ids.sort_by_key(|&c| components[c][0]);
    let inessential_ids: Vec<usize> = (0..components.len()).filter(|&c| !closed[c]).collect();

    let mut blocks = Vec::with_capacity(components.len());
    for &c in essential_ids.iter().chain(&inessential_ids) {
        let members = &components[c];
        let sub = DMatrix::from_fn(members.len(), members.len(), |i, j| matrix[(members[i], members[j])]);
        let PerronPair { radius, left, right } = perron(&sub)?;
        let period = period_on(&adj, members);
        let cyclic_class = super::scc::cyclic_classes(&adj, members, period);
        let block_dim = match sector_dims {
            Some(dims) => members.iter().map(|&m| dims[m]).sum(),
            None => members.len() as f64,
        };
        blocks.push(IrreducibleBlock {
            indices: members.clone(),
            essential: closed[c],
            period,
            radius,
            left,
            right,
            block_dim,
            cyclic_class,
        });
    }

    let essential: Vec<usize> = blocks
        .iter()
        .filter(|b| b.essential)
        .flat_map(|b| b.indices.iter().copied())
        .collect();
    let inessential: Vec<usize> = blocks
        .iter()
        .filter(|b| !b.essential)
        .flat_map(|b| b.indices.iter().copied())
        .collect();
    let sub = |rows: &[usize], cols: &[usize]| {
        DMatrix::from_fn(rows.len(), cols.len(), |i, j| matrix[(rows[i], cols[j])])
    };
    let t_essential = sub(&essential, &essential);
    let q = sub(&inessential, &inessential);
    let r = sub(&essential, &inessential);
    let leak = sub(&inessential, &essential).iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let q_radius = blocks
        .iter()
        .filter(|b| !b.essential)
        .map(|b| b.radius)
        .fold(0.0f64, f64::max);
    let permutation = essential.iter().chain(&inessential).copied().collect();

    Ok(CanonicalDecomposition {
        permutation,
        blocks,
        essential,
        inessential,
        t_essential,
        q,
        r,
        q_radius,
        leak,
        matrix,
        options,
    })
}
