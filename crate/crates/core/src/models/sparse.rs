use nalgebra::DVector;

use super::{DecomposableModel, L1Norm, ModelKind, Regularizer};
use crate::ensembles::AmbientShape;
use crate::error::{Error, Result};

/// `x₀` with support `T`; `e = sgn(x₀)`, norm `ℓ₁`.
#[derive(Debug, Clone)]
pub struct SparseModel {
    x0: DVector<f64>,
    support: Vec<usize>,
    sign: DVector<f64>,
}

impl SparseModel {
    pub fn new(x0: DVector<f64>) -> Result<Self> {
        let support: Vec<usize> = (0..x0.len()).filter(|&i| x0[i] != 0.0).collect();
        if support.is_empty() {
            return Err(Error::parameter("x0 must be nonzero"));
        }
        let sign = x0.map(|v| if v == 0.0 { 0.0 } else { v.signum() });
        Ok(SparseModel { x0, support, sign })
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }
}

impl DecomposableModel for SparseModel {
    fn kind(&self) -> ModelKind {
        ModelKind::Sparse
    }

    fn ambient(&self) -> AmbientShape {
        AmbientShape::Vector { n: self.x0.len() }
    }

    fn x0(&self) -> &DVector<f64> {
        &self.x0
    }

    fn dim_t(&self) -> usize {
        self.support.len()
    }

    fn sign_pattern(&self) -> &DVector<f64> {
        &self.sign
    }

    fn regularizer(&self) -> &dyn Regularizer {
        &L1Norm
    }

    fn project_tperp(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        self.ambient().check(z, "z")?;
        let mut out = z.clone();
        for &i in &self.support {
            out[i] = 0.0;
        }
        Ok(out)
    }

    fn project_t(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        self.ambient().check(z, "z")?;
        Ok(super::restrict_to(z, &self.support))
    }

    fn coordinate_support(&self) -> Option<&[usize]> {
        Some(&self.support)
    }
}
