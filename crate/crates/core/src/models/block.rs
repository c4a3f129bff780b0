use nalgebra::DVector;

use super::{DecomposableModel, GroupNorm, ModelKind, Regularizer};
use crate::ensembles::AmbientShape;
use crate::error::{Error, Result};

/// `x₀` nonzero on `k` of `M` contiguous blocks of size `B`; norm `ℓ₁/ℓ₂`.
#[derive(Debug, Clone)]
pub struct BlockModel {
    x0: DVector<f64>,
    norm: GroupNorm,
    active_blocks: Vec<usize>,
    coords: Vec<usize>,
    pattern: DVector<f64>,
}

impl BlockModel {
    pub fn new(x0: DVector<f64>, blocks: usize, block_size: usize) -> Result<Self> {
        if blocks == 0 || block_size == 0 || blocks * block_size != x0.len() {
            return Err(Error::parameter(format!(
                "block layout {blocks} x {block_size} does not tile length {}",
                x0.len()
            )));
        }
        let mut pattern = DVector::zeros(x0.len());
        let mut active_blocks = Vec::new();
        let mut coords = Vec::new();
        for b in 0..blocks {
            let range = b * block_size..(b + 1) * block_size;
            let norm = x0.rows(range.start, block_size).norm();
            if norm > 0.0 {
                active_blocks.push(b);
                for i in range {
                    pattern[i] = x0[i] / norm;
                    coords.push(i);
                }
            }
        }
        if active_blocks.is_empty() {
            return Err(Error::parameter("x0 must be nonzero"));
        }
        Ok(BlockModel {
            x0,
            norm: GroupNorm { block_size },
            active_blocks,
            coords,
            pattern,
        })
    }

    pub fn active_blocks(&self) -> &[usize] {
        &self.active_blocks
    }

    pub fn block_size(&self) -> usize {
        self.norm.block_size
    }

    pub fn blocks(&self) -> usize {
        self.x0.len() / self.norm.block_size
    }
}

impl DecomposableModel for BlockModel {
    fn kind(&self) -> ModelKind {
        ModelKind::Block
    }

    fn ambient(&self) -> AmbientShape {
        AmbientShape::Vector { n: self.x0.len() }
    }

    fn x0(&self) -> &DVector<f64> {
        &self.x0
    }

    fn dim_t(&self) -> usize {
        self.coords.len()
    }

    fn sign_pattern(&self) -> &DVector<f64> {
        &self.pattern
    }

    fn regularizer(&self) -> &dyn Regularizer {
        &self.norm
    }

    fn project_tperp(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        self.ambient().check(z, "z")?;
        let mut out = z.clone();
        for &i in &self.coords {
            out[i] = 0.0;
        }
        Ok(out)
    }

    fn project_t(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        self.ambient().check(z, "z")?;
        Ok(super::restrict_to(z, &self.coords))
    }

    fn coordinate_support(&self) -> Option<&[usize]> {
        Some(&self.coords)
    }
}
