//! Simple models and their decomposability data.
//!
//! Each model carries the ground truth `x₀`, the subspace `T` on which the
//! subdifferential of its norm is pinned to a fixed vector `e`, and the
//! dual norm that governs the free part on `T⊥`.

mod block;
mod lowrank;
pub mod norms;
mod sparse;

use std::fmt;

use nalgebra::DVector;

pub use block::BlockModel;
pub use lowrank::{LowRankModel, RANK_TOLERANCE};
pub use norms::{GroupNorm, L1Norm, NuclearNorm, Regularizer};
pub use sparse::SparseModel;

use crate::ensembles::AmbientShape;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Sparse,
    Block,
    LowRank,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Sparse => "sparse",
            ModelKind::Block => "block",
            ModelKind::LowRank => "lowrank",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How to read `x₀`: which model class, and its kind-specific layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    Sparse,
    /// `blocks` contiguous blocks of `block_size` coordinates each.
    Block {
        blocks: usize,
        block_size: usize,
    },
    /// `x₀` is `vec(X₀)` of a `rows × cols` matrix.
    LowRank {
        rows: usize,
        cols: usize,
    },
}

impl Layout {
    pub fn kind(&self) -> ModelKind {
        match self {
            Layout::Sparse => ModelKind::Sparse,
            Layout::Block { .. } => ModelKind::Block,
            Layout::LowRank { .. } => ModelKind::LowRank,
        }
    }
}

/// A norm decomposable at `x₀`: `∂‖x₀‖ = {z : P_T z = e, ‖P_{T⊥} z‖* ≤ 1}`.
pub trait DecomposableModel: Send + Sync + fmt::Debug {
    fn kind(&self) -> ModelKind;

    fn ambient(&self) -> AmbientShape;

    fn x0(&self) -> &DVector<f64>;

    /// `dim(T)`.
    fn dim_t(&self) -> usize;

    /// The vector `e ∈ T`.
    fn sign_pattern(&self) -> &DVector<f64>;

    fn regularizer(&self) -> &dyn Regularizer;

    fn project_tperp(&self, z: &DVector<f64>) -> Result<DVector<f64>>;

    fn project_t(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(z - self.project_tperp(z)?)
    }

    /// `‖P_{T⊥} z‖*`.
    fn dual_norm_off_t(&self, z: &DVector<f64>) -> Result<f64> {
        self.regularizer().dual_norm(&self.project_tperp(z)?)
    }

    /// Coordinates spanning `T` when `T` is a coordinate subspace.
    fn coordinate_support(&self) -> Option<&[usize]> {
        None
    }
}

pub fn build_model(x0: DVector<f64>, layout: Layout) -> Result<Box<dyn DecomposableModel>> {
    if x0.iter().all(|&v| v == 0.0) {
        return Err(Error::parameter("x0 must be nonzero"));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::parameter("x0 has non-finite entries"));
    }
    Ok(match layout {
        Layout::Sparse => Box::new(SparseModel::new(x0)?),
        Layout::Block { blocks, block_size } => Box::new(BlockModel::new(x0, blocks, block_size)?),
        Layout::LowRank { rows, cols } => Box::new(LowRankModel::new(x0, rows, cols)?),
    })
}

/// Zero out everything outside a coordinate set.
pub(crate) fn restrict_to(z: &DVector<f64>, coords: &[usize]) -> DVector<f64> {
    let mut out = DVector::zeros(z.len());
    for &i in coords {
        out[i] = z[i];
    }
    out
}
