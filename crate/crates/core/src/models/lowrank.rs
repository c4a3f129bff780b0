use nalgebra::{DMatrix, DVector};

use super::{DecomposableModel, ModelKind, NuclearNorm, Regularizer};
use crate::ensembles::{vectorize, AmbientShape};
use crate::error::{Error, Result};

/// Singular values above this fraction of the largest one count toward the rank.
pub const RANK_TOLERANCE: f64 = 1e-9;

/// A rank-`r` matrix `X₀ = UΣV*`. `T = {UY* + XV*}`, `e = UV*`, norm nuclear.
#[derive(Debug, Clone)]
pub struct LowRankModel {
    x0: DVector<f64>,
    norm: NuclearNorm,
    u: DMatrix<f64>,
    v: DMatrix<f64>,
    sigma: DVector<f64>,
    pattern: DVector<f64>,
}

impl LowRankModel {
    pub fn new(x0: DVector<f64>, rows: usize, cols: usize) -> Result<Self> {
        let shape = AmbientShape::matrix(rows, cols)?;
        shape.check(&x0, "x0")?;
        let svd = shape.to_matrix(&x0).svd(true, true);
        let (full_u, full_vt) = match (svd.u, svd.v_t) {
            (Some(u), Some(vt)) => (u, vt),
            _ => {
                return Err(Error::structural(
                    "SVD of x0 did not return singular vectors",
                ))
            }
        };
        let smax = svd.singular_values.max();
        if !(smax > 0.0) {
            return Err(Error::parameter("x0 must be nonzero"));
        }
        let mut order: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&i| svd.singular_values[i] > RANK_TOLERANCE * smax)
            .collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

        let u = full_u.select_columns(&order);
        let v = full_vt.select_rows(&order).transpose();
        let sigma =
            DVector::from_iterator(order.len(), order.iter().map(|&i| svd.singular_values[i]));
        let pattern = vectorize(&(&u * v.transpose()));
        Ok(LowRankModel {
            x0,
            norm: NuclearNorm { rows, cols },
            u,
            v,
            sigma,
            pattern,
        })
    }

    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// Left singular vectors, `n1 × r`, orthonormal columns.
    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    /// Right singular vectors, `n2 × r`, orthonormal columns.
    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn singular_values(&self) -> &DVector<f64> {
        &self.sigma
    }

    fn shape(&self) -> (usize, usize) {
        (self.norm.rows, self.norm.cols)
    }

    /// `(I − P_U) Z (I − P_V)` on the matrix form.
    pub fn project_tperp_matrix(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        let ut_z = self.u.transpose() * z;
        let z_v = z * &self.v;
        let core = &ut_z * &self.v;
        z - &self.u * ut_z - z_v * self.v.transpose() + &self.u * core * self.v.transpose()
    }

    /// An orthonormal basis of `T`, one flattened matrix per column (`N × d_T`).
    ///
    /// Spans `{u_a w*}` for all `w` plus `{x v_b*}` for `x ⊥ U`.
    pub fn tangent_basis(&self) -> DMatrix<f64> {
        let (rows, cols) = self.shape();
        let r = self.rank();
        let mut basis = DMatrix::zeros(rows * cols, r * (rows + cols - r));
        let mut col = 0;
        for a in 0..r {
            for j in 0..cols {
                let mut e = DMatrix::zeros(rows, cols);
                e.column_mut(j).copy_from(&self.u.column(a));
                basis.column_mut(col).copy_from_slice(e.as_slice());
                col += 1;
            }
        }
        // Orthonormal complement of U from the full QR of U.
        let complement = {
            let mut padded = DMatrix::zeros(rows, r + rows);
            padded.columns_mut(0, r).copy_from(&self.u);
            padded.columns_mut(r, rows).fill_with_identity();
            gram_schmidt(&padded, rows)
        };
        for x in complement.column_iter().skip(r) {
            for b in 0..r {
                let e = x * self.v.column(b).transpose();
                basis.column_mut(col).copy_from_slice(e.as_slice());
                col += 1;
            }
        }
        basis
    }
}

/// Orthonormalize columns left to right, dropping dependent ones, until `target` are kept.
fn gram_schmidt(cols: &DMatrix<f64>, target: usize) -> DMatrix<f64> {
    let mut kept: Vec<DVector<f64>> = Vec::with_capacity(target);
    for c in cols.column_iter() {
        if kept.len() == target {
            break;
        }
        let mut w = c.clone_owned();
        for _ in 0..2 {
            for q in &kept {
                let proj = q.dot(&w);
                w.axpy(-proj, q, 1.0);
            }
        }
        let norm = w.norm();
        if norm > 1e-8 {
            kept.push(w / norm);
        }
    }
    DMatrix::from_columns(&kept)
}

impl DecomposableModel for LowRankModel {
    fn kind(&self) -> ModelKind {
        ModelKind::LowRank
    }

    fn ambient(&self) -> AmbientShape {
        let (rows, cols) = self.shape();
        AmbientShape::Matrix { rows, cols }
    }

    fn x0(&self) -> &DVector<f64> {
        &self.x0
    }

    fn dim_t(&self) -> usize {
        let (rows, cols) = self.shape();
        let r = self.rank();
        r * (rows + cols - r)
    }

    fn sign_pattern(&self) -> &DVector<f64> {
        &self.pattern
    }

    fn regularizer(&self) -> &dyn Regularizer {
        &self.norm
    }

    fn project_tperp(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        let shape = self.ambient();
        shape.check(z, "z")?;
        Ok(vectorize(&self.project_tperp_matrix(&shape.to_matrix(z))))
    }
}
