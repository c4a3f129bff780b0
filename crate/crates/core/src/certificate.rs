//! The least-squares dual multiplier and its uniqueness verdict.
//!
//! `q` is the minimum-norm solution of `P_T(Φ*q) = e`, i.e.
//! `q = Φ_T (Φ_T* Φ_T)⁻¹ e`, and `y = Φ*q`. If `Φ` is injective on `T` and
//! `‖P_{T⊥} y‖* < 1`, then `x₀` is the unique minimizer of `‖x‖` over
//! `{x : Φx = Φx₀}`.
//!
//! Two strategies solve the restricted normal equations. [`CholeskyGram`]
//! materializes `Φ_T` for coordinate subspaces. [`ConjugateGradientGram`] works
//! on any `T` through `w ↦ P_T Φ*Φ w` and recovers the extreme singular values
//! of `Φ_T` from the Lanczos tridiagonal implied by the CG coefficients.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use crate::ensembles::{derive_seed, make_map, AmbientShape, GaussianEnsemble, MeasurementMap};
use crate::error::{Error, Result};
use crate::models::{DecomposableModel, SparseModel};

/// Largest `dim(T)` for which the dense Gram route is the default.
pub const DENSE_GRAM_LIMIT: usize = 2000;

#[derive(Debug, Clone, PartialEq)]
pub struct DualCertificate {
    pub q: DVector<f64>,
    /// `Φ*q`, flattened like the ambient space.
    pub y: DVector<f64>,
    pub dim_t: usize,
    /// `‖P_T(y) − e‖₂`.
    pub residual_t: f64,
    /// `‖P_{T⊥}(y)‖*`.
    pub off_t_dual_norm: f64,
    pub sigma_min_t: f64,
    pub sigma_max_t: f64,
    pub q_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerdictReason {
    Ok,
    NotInjective,
    DualNormGeOne,
    IllConditioned,
}

impl VerdictReason {
    pub fn name(&self) -> &'static str {
        match self {
            VerdictReason::Ok => "ok",
            VerdictReason::NotInjective => "not_injective",
            VerdictReason::DualNormGeOne => "dual_norm_ge_one",
            VerdictReason::IllConditioned => "ill_conditioned",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verdict {
    pub certified: bool,
    pub reason: VerdictReason,
    /// `1 − ‖P_{T⊥}(y)‖*`.
    pub margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// `Φ_T` counts as injective when `σ_min > injectivity · σ_max`.
    pub injectivity: f64,
    /// Allowed `‖P_T(y) − e‖` per `√dim(T)`.
    pub residual: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            injectivity: 1e-8,
            residual: 1e-8,
        }
    }
}

/// Output of a restricted solve: `q` and the extreme singular values of `Φ_T`.
#[derive(Debug, Clone)]
pub struct RestrictedSolve {
    pub q: DVector<f64>,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

/// A strategy for solving `Φ_T*Φ_T w = e` and forming `q = Φ_T w`.
pub trait RestrictedSolver: Send + Sync {
    fn name(&self) -> &'static str;

    fn solve(
        &self,
        map: &MeasurementMap,
        model: &dyn DecomposableModel,
        tol: &Tolerances,
    ) -> Result<RestrictedSolve>;
}

fn check_conditioning(sigma_min: f64, sigma_max: f64, tol: &Tolerances) -> Result<()> {
    if sigma_min > tol.injectivity * sigma_max {
        Ok(())
    } else {
        Err(Error::IllConditioned {
            sigma_min,
            sigma_max,
        })
    }
}

/// Dense Gram matrix of the selected columns, Cholesky solve.
#[derive(Debug, Clone, Copy, Default)]
pub struct CholeskyGram;

impl RestrictedSolver for CholeskyGram {
    fn name(&self) -> &'static str {
        "cholesky"
    }

    fn solve(
        &self,
        map: &MeasurementMap,
        model: &dyn DecomposableModel,
        tol: &Tolerances,
    ) -> Result<RestrictedSolve> {
        let support = model.coordinate_support().ok_or_else(|| {
            Error::structural(format!(
                "the dense Gram route needs a coordinate subspace; {} models have none",
                model.kind()
            ))
        })?;
        let phi_t = map.columns(support);
        let gram = phi_t.tr_mul(&phi_t);
        let eig = SymmetricEigen::new(gram.clone());
        let sigma_min = eig.eigenvalues.min().max(0.0).sqrt();
        let sigma_max = eig.eigenvalues.max().max(0.0).sqrt();
        check_conditioning(sigma_min, sigma_max, tol)?;

        let e = model.sign_pattern();
        let e_t = DVector::from_iterator(support.len(), support.iter().map(|&i| e[i]));
        let chol = gram.cholesky().ok_or(Error::IllConditioned {
            sigma_min,
            sigma_max,
        })?;
        let w = chol.solve(&e_t);
        Ok(RestrictedSolve {
            q: phi_t * w,
            sigma_min,
            sigma_max,
        })
    }
}

/// Matrix-free conjugate gradients on `T`.
#[derive(Debug, Clone, Copy)]
pub struct ConjugateGradientGram {
    /// Stop when `‖r‖ ≤ rel_tol · ‖e‖`.
    pub rel_tol: f64,
    /// Iteration cap; `None` means `4·dim(T) + 100`.
    pub max_iter: Option<usize>,
}

impl Default for ConjugateGradientGram {
    fn default() -> Self {
        ConjugateGradientGram {
            rel_tol: 1e-12,
            max_iter: None,
        }
    }
}

impl RestrictedSolver for ConjugateGradientGram {
    fn name(&self) -> &'static str {
        "cg"
    }

    fn solve(
        &self,
        map: &MeasurementMap,
        model: &dyn DecomposableModel,
        tol: &Tolerances,
    ) -> Result<RestrictedSolve> {
        let gram = |p: &DVector<f64>| -> Result<DVector<f64>> {
            model.project_t(&map.adjoint(&map.apply(p)?)?)
        };
        let e = model.sign_pattern();
        let target = self.rel_tol * e.norm();
        let max_iter = self.max_iter.unwrap_or(4 * model.dim_t() + 100);

        let mut w = DVector::zeros(e.len());
        let mut r = e.clone();
        let mut p = r.clone();
        let mut rr = r.norm_squared();
        let mut alphas = Vec::new();
        let mut betas = Vec::new();
        let mut converged = rr.sqrt() <= target;
        while !converged && alphas.len() < max_iter {
            let ap = gram(&p)?;
            let curvature = p.dot(&ap);
            if !(curvature > 0.0) {
                return Err(Error::IllConditioned {
                    sigma_min: 0.0,
                    sigma_max: ritz_extremes(&alphas, &betas).1,
                });
            }
            let alpha = rr / curvature;
            w.axpy(alpha, &p, 1.0);
            r.axpy(-alpha, &ap, 1.0);
            let rr_next = r.norm_squared();
            let beta = rr_next / rr;
            alphas.push(alpha);
            betas.push(beta);
            rr = rr_next;
            converged = rr.sqrt() <= target;
            p = &r + &p * beta;
        }
        let (sigma_min, sigma_max) = ritz_extremes(&alphas, &betas);
        if !converged {
            return Err(Error::IllConditioned {
                sigma_min,
                sigma_max,
            });
        }
        check_conditioning(sigma_min, sigma_max, tol)?;
        Ok(RestrictedSolve {
            q: map.apply(&w)?,
            sigma_min,
            sigma_max,
        })
    }
}

/// Square roots of the extreme eigenvalues of the CG-Lanczos tridiagonal.
fn ritz_extremes(alphas: &[f64], betas: &[f64]) -> (f64, f64) {
    let k = alphas.len();
    if k == 0 {
        return (0.0, 0.0);
    }
    let mut tri = DMatrix::zeros(k, k);
    for j in 0..k {
        tri[(j, j)] = 1.0 / alphas[j]
            + if j > 0 {
                betas[j - 1] / alphas[j - 1]
            } else {
                0.0
            };
        if j + 1 < k {
            let off = betas[j].sqrt() / alphas[j];
            tri[(j, j + 1)] = off;
            tri[(j + 1, j)] = off;
        }
    }
    let eig = SymmetricEigen::new(tri).eigenvalues;
    (eig.min().max(0.0).sqrt(), eig.max().max(0.0).sqrt())
}

/// Dense Cholesky for small coordinate subspaces, CG otherwise.
pub fn default_solver(model: &dyn DecomposableModel) -> &'static dyn RestrictedSolver {
    static CHOLESKY: CholeskyGram = CholeskyGram;
    static CG: ConjugateGradientGram = ConjugateGradientGram {
        rel_tol: 1e-12,
        max_iter: None,
    };
    match model.coordinate_support() {
        Some(_) if model.dim_t() <= DENSE_GRAM_LIMIT => &CHOLESKY,
        _ => &CG,
    }
}

pub fn construct_multiplier(
    map: &MeasurementMap,
    model: &dyn DecomposableModel,
) -> Result<DualCertificate> {
    construct_multiplier_with(map, model, default_solver(model), &Tolerances::default())
}

pub fn construct_multiplier_with(
    map: &MeasurementMap,
    model: &dyn DecomposableModel,
    solver: &dyn RestrictedSolver,
    tol: &Tolerances,
) -> Result<DualCertificate> {
    if map.shape() != model.ambient() {
        return Err(Error::parameter(format!(
            "map acts on {:?} but the model lives in {:?}",
            map.shape(),
            model.ambient()
        )));
    }
    let dim_t = model.dim_t();
    if map.rows() < dim_t {
        return Err(Error::structural(format!(
            "m < dim(T): {} measurements cannot be injective on a {dim_t}-dimensional T",
            map.rows()
        )));
    }
    let solved = solver.solve(map, model, tol)?;
    let y = map.adjoint(&solved.q)?;
    let residual_t = (model.project_t(&y)? - model.sign_pattern()).norm();
    let off_t_dual_norm = model.dual_norm_off_t(&y)?;
    Ok(DualCertificate {
        q_norm: solved.q.norm(),
        q: solved.q,
        y,
        dim_t,
        residual_t,
        off_t_dual_norm,
        sigma_min_t: solved.sigma_min,
        sigma_max_t: solved.sigma_max,
    })
}

/// Injectivity, exactness on `T`, then the strict dual-norm condition.
pub fn certify(cert: &DualCertificate, tol: &Tolerances) -> Verdict {
    let margin = 1.0 - cert.off_t_dual_norm;
    let reason = if !(cert.sigma_min_t > tol.injectivity * cert.sigma_max_t) {
        VerdictReason::NotInjective
    } else if !(cert.residual_t <= tol.residual * (cert.dim_t as f64).sqrt()) {
        VerdictReason::IllConditioned
    } else if !(cert.off_t_dual_norm < 1.0) {
        VerdictReason::DualNormGeOne
    } else {
        VerdictReason::Ok
    };
    Verdict {
        certified: reason == VerdictReason::Ok,
        reason,
        margin,
    }
}

/// Draws of `‖q‖²/‖e‖²` from fresh Gaussian `m × d_T` restrictions.
///
/// With `e` the all-ones vector on a `d_T`-sparse support filling the whole
/// ambient space, only `Φ_T` enters. Trial `i` uses seed `derive_seed(seed, [i])`.
pub fn q_squared_distribution_probe(
    m: usize,
    dim_t: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if dim_t == 0 || trials == 0 {
        return Err(Error::parameter("dim(T) and trials must be at least 1"));
    }
    if m < dim_t {
        return Err(Error::structural(format!("m < dim(T): {m} < {dim_t}")));
    }
    let shape = AmbientShape::vector(dim_t)?;
    let model = SparseModel::new(DVector::from_element(dim_t, 1.0))?;
    (0..trials)
        .into_par_iter()
        .map(|i| {
            let map = make_map(&GaussianEnsemble, shape, m, derive_seed(seed, &[i as u64]))?;
            let solved = CholeskyGram.solve(&map, &model, &Tolerances::default())?;
            Ok(solved.q.norm_squared() / dim_t as f64)
        })
        .collect()
}
