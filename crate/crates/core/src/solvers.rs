//! Equality-constrained norm minimization by ADMM.
//!
//! Solves `min ‖x‖ s.t. Φx = b` by splitting `x = z`: `x` is projected onto
//! the affine set using a Cholesky factor of `ΦΦ*`, `z` takes the prox of
//! the norm, and a scaled dual accumulates the disagreement.

use nalgebra::{Cholesky, DVector, Dyn};

use crate::ensembles::MeasurementMap;
use crate::error::{Error, Result};
use crate::models::Regularizer;

/// Relative error below which a recovery counts as exact.
pub const DEFAULT_SUCCESS_THRESHOLD: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub rho: f64,
    pub max_iterations: usize,
    pub eps_abs: f64,
    pub eps_rel: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            rho: 1.0,
            max_iterations: 10_000,
            eps_abs: 1e-9,
            eps_rel: 1e-9,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.rho) {
            return Err(Error::parameter(format!(
                "rho must be positive (got {})",
                self.rho
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::parameter("max_iterations must be positive"));
        }
        if !positive(self.eps_abs) || !positive(self.eps_rel) {
            return Err(Error::parameter("tolerances must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub x_hat: DVector<f64>,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// `‖x_hat‖`.
    pub objective: f64,
    pub converged: bool,
}

/// `argmin_z ½‖z − v‖² + κ‖z‖`.
pub fn prox(norm: &dyn Regularizer, v: &DVector<f64>, kappa: f64) -> Result<DVector<f64>> {
    norm.prox(v, kappa)
}

/// Cholesky factor of `ΦΦ*`, rejecting numerically singular Gram matrices.
struct AffineProjector<'a> {
    map: &'a MeasurementMap,
    chol: Cholesky<f64, Dyn>,
}

impl<'a> AffineProjector<'a> {
    fn new(map: &'a MeasurementMap) -> Result<Self> {
        let phi = map.entries();
        let gram = phi * phi.transpose();
        let chol = Cholesky::new(gram).ok_or_else(|| Error::structural("Phi Phi* is singular"))?;
        let diag = chol.l_dirty().diagonal();
        let (lo, hi) = (diag.min(), diag.max());
        if !(lo > 1e-7 * hi) {
            return Err(Error::structural(format!(
                "Phi Phi* is singular to working precision (Cholesky pivots {lo:e} .. {hi:e})"
            )));
        }
        Ok(AffineProjector { map, chol })
    }

    /// `w − Φ*(ΦΦ*)⁻¹(Φw − b)`.
    fn project(&self, w: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
        let phi = self.map.entries();
        let gap = phi * w - b;
        w - phi.tr_mul(&self.chol.solve(&gap))
    }
}

pub fn solve_min_norm(
    map: &MeasurementMap,
    b: &DVector<f64>,
    norm: &dyn Regularizer,
    opts: &SolverOptions,
) -> Result<Solution> {
    opts.validate()?;
    if b.len() != map.rows() {
        return Err(Error::parameter(format!(
            "b has length {} but the map has {} rows",
            b.len(),
            map.rows()
        )));
    }
    let projector = AffineProjector::new(map)?;
    let dim = map.shape().dim();
    let scale = (dim as f64).sqrt();
    let kappa = 1.0 / opts.rho;

    // Start from the least-norm feasible point.
    let mut x = projector.project(&DVector::zeros(dim), b);
    let mut z = x.clone();
    let mut u = DVector::zeros(dim);
    let (mut primal, mut dual) = (f64::INFINITY, f64::INFINITY);
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iterations {
        iterations += 1;
        x = projector.project(&(&z - &u), b);
        let z_prev = std::mem::replace(&mut z, norm.prox(&(&x + &u), kappa)?);
        let gap = &x - &z;
        u += &gap;

        primal = gap.norm();
        dual = opts.rho * (&z - &z_prev).norm();
        let tol = opts.eps_abs * scale + opts.eps_rel * x.norm().max(z.norm());
        if primal <= tol && dual <= tol {
            converged = true;
            break;
        }
    }

    let objective = norm.norm(&x)?;
    Ok(Solution {
        x_hat: x,
        iterations,
        primal_residual: primal,
        dual_residual: dual,
        objective,
        converged,
    })
}

/// `‖x_hat − x₀‖₂ / ‖x₀‖₂ ≤ threshold`.
pub fn recovery_success(x_hat: &DVector<f64>, x0: &DVector<f64>, threshold: f64) -> Result<bool> {
    if x_hat.len() != x0.len() {
        return Err(Error::parameter(format!(
            "x_hat has length {} but x0 has length {}",
            x_hat.len(),
            x0.len()
        )));
    }
    let scale = x0.norm();
    if scale == 0.0 {
        return Err(Error::domain("x0 must be nonzero"));
    }
    Ok((x_hat - x0).norm() / scale <= threshold)
}
