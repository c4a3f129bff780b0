//! The three decomposable norms, their duals and proximal operators.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::ensembles::vectorize;
use crate::error::{Error, Result};

/// A norm on a flattened ambient space together with its dual and prox.
pub trait Regularizer: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    fn norm(&self, x: &DVector<f64>) -> Result<f64>;

    fn dual_norm(&self, x: &DVector<f64>) -> Result<f64>;

    /// `argmin_z ½‖z − v‖₂² + κ‖z‖`.
    fn prox(&self, v: &DVector<f64>, kappa: f64) -> Result<DVector<f64>>;
}

fn check_kappa(kappa: f64) -> Result<()> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::domain(format!(
            "prox weight must be positive, got {kappa}"
        )));
    }
    Ok(())
}

/// `‖x‖₁`, dual `‖x‖∞`.
#[derive(Debug, Clone, Copy, Default)]
pub struct L1Norm;

impl Regularizer for L1Norm {
    fn name(&self) -> &'static str {
        "l1"
    }

    fn norm(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(x.lp_norm(1))
    }

    fn dual_norm(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(x.amax())
    }

    fn prox(&self, v: &DVector<f64>, kappa: f64) -> Result<DVector<f64>> {
        check_kappa(kappa)?;
        Ok(v.map(|vi| vi.signum() * (vi.abs() - kappa).max(0.0)))
    }
}

/// `Σ_b ‖x_b‖₂` over contiguous blocks of equal size, dual `max_b ‖x_b‖₂`.
#[derive(Debug, Clone, Copy)]
pub struct GroupNorm {
    pub block_size: usize,
}

impl GroupNorm {
    fn block_norms<'a>(&self, x: &'a DVector<f64>) -> Result<impl Iterator<Item = f64> + 'a> {
        if self.block_size == 0 || !x.len().is_multiple_of(self.block_size) {
            return Err(Error::parameter(format!(
                "length {} is not a multiple of block size {}",
                x.len(),
                self.block_size
            )));
        }
        Ok(x.as_slice()
            .chunks(self.block_size)
            .map(|b| b.iter().map(|v| v * v).sum::<f64>().sqrt()))
    }
}

impl Regularizer for GroupNorm {
    fn name(&self) -> &'static str {
        "l1/l2"
    }

    fn norm(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(self.block_norms(x)?.sum())
    }

    fn dual_norm(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(self.block_norms(x)?.fold(0.0, f64::max))
    }

    fn prox(&self, v: &DVector<f64>, kappa: f64) -> Result<DVector<f64>> {
        check_kappa(kappa)?;
        let norms: Vec<f64> = self.block_norms(v)?.collect();
        let mut out = v.clone();
        for (block, norm) in out.as_mut_slice().chunks_mut(self.block_size).zip(norms) {
            let scale = if norm > kappa {
                1.0 - kappa / norm
            } else {
                0.0
            };
            block.iter_mut().for_each(|x| *x *= scale);
        }
        Ok(out)
    }
}

/// Sum of singular values of a `rows × cols` matrix stored as `vec(X)`; dual is
/// the spectral norm.
#[derive(Debug, Clone, Copy)]
pub struct NuclearNorm {
    pub rows: usize,
    pub cols: usize,
}

impl NuclearNorm {
    fn reshape(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        if x.len() != self.rows * self.cols {
            return Err(Error::parameter(format!(
                "length {} does not match a {}x{} matrix",
                x.len(),
                self.rows,
                self.cols
            )));
        }
        Ok(DMatrix::from_column_slice(
            self.rows,
            self.cols,
            x.as_slice(),
        ))
    }
}

impl Regularizer for NuclearNorm {
    fn name(&self) -> &'static str {
        "nuclear"
    }

    fn norm(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(self.reshape(x)?.singular_values().sum())
    }

    fn dual_norm(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(spectral_norm(&self.reshape(x)?))
    }

    fn prox(&self, v: &DVector<f64>, kappa: f64) -> Result<DVector<f64>> {
        check_kappa(kappa)?;
        let mut svd = self.reshape(v)?.svd(true, true);
        svd.singular_values.apply(|s| *s = (*s - kappa).max(0.0));
        let z = svd
            .recompose()
            .map_err(|e| Error::structural(format!("singular value thresholding: {e}")))?;
        Ok(vectorize(&z))
    }
}

pub(crate) fn spectral_norm(z: &DMatrix<f64>) -> f64 {
    if z.is_empty() {
        return 0.0;
    }
    z.singular_values().max()
}
