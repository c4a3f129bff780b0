//! Random measurement maps over vector and matrix ambient spaces.
//!
//! A map is stored densely as an `m × N` matrix whose row `i` is `vec(Φ_i)`.
//! Matrix-valued ambient elements are flattened column-major (columns stacked),
//! which is also nalgebra's storage order, so `vec(Z)` is `Z.as_slice()`.
//!
//! Every column is drawn from its own ChaCha stream keyed by the column index,
//! so column `j` of a map depends only on `(ensemble, m, seed, j)`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// The space a model lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmbientShape {
    Vector { n: usize },
    Matrix { rows: usize, cols: usize },
}

impl AmbientShape {
    pub fn vector(n: usize) -> Result<Self> {
        let shape = AmbientShape::Vector { n };
        shape.validate()?;
        Ok(shape)
    }

    pub fn matrix(rows: usize, cols: usize) -> Result<Self> {
        let shape = AmbientShape::Matrix { rows, cols };
        shape.validate()?;
        Ok(shape)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            AmbientShape::Vector { n: 0 } => Err(Error::parameter(
                "vector ambient dimension must be at least 1",
            )),
            AmbientShape::Matrix { rows, cols } if rows == 0 || cols == 0 => Err(Error::parameter(
                format!("matrix ambient shape {rows}x{cols} has an empty side"),
            )),
            _ => Ok(()),
        }
    }

    /// Total dimension `N`.
    pub fn dim(&self) -> usize {
        match *self {
            AmbientShape::Vector { n } => n,
            AmbientShape::Matrix { rows, cols } => rows * cols,
        }
    }

    pub fn check(&self, x: &DVector<f64>, what: &str) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::parameter(format!(
                "{what} has length {} but the ambient dimension is {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// View a flattened ambient element as a matrix. Vectors become a single column.
    pub fn to_matrix(&self, x: &DVector<f64>) -> DMatrix<f64> {
        match *self {
            AmbientShape::Vector { n } => DMatrix::from_column_slice(n, 1, x.as_slice()),
            AmbientShape::Matrix { rows, cols } => {
                DMatrix::from_column_slice(rows, cols, x.as_slice())
            }
        }
    }
}

/// Flatten a matrix to `vec(Z)`.
pub fn vectorize(z: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(z.as_slice())
}

/// SplitMix64 finalizer.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a base seed and a path of indices.
///
/// `h(base, [a, b, ..]) = sm(...sm(sm(base) ^ a) ^ b ...)` with `sm` the SplitMix64
/// finalizer. Stable across releases; changing it changes every recorded result.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(base), |acc, &part| splitmix64(acc ^ part))
}

/// An i.i.d. entry law for measurement maps.
pub trait Ensemble: Send + Sync {
    fn name(&self) -> &'static str;

    /// Fill one column of an `m`-row map.
    fn fill_column(&self, rng: &mut ChaCha8Rng, column: &mut [f64]);
}

/// Entries `N(0, 1/m)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct GaussianEnsemble;

impl Ensemble for GaussianEnsemble {
    fn name(&self) -> &'static str {
        "gaussian"
    }

    fn fill_column(&self, rng: &mut ChaCha8Rng, column: &mut [f64]) {
        let scale = 1.0 / (column.len() as f64).sqrt();
        for entry in column.iter_mut() {
            let g: f64 = rng.sample(StandardNormal);
            *entry = scale * g;
        }
    }
}

/// Entries `±m^{-1/2}` with equal probability.
#[derive(Debug, Clone, Copy, Default)]
pub struct SignEnsemble;

impl Ensemble for SignEnsemble {
    fn name(&self) -> &'static str {
        "sign"
    }

    fn fill_column(&self, rng: &mut ChaCha8Rng, column: &mut [f64]) {
        let scale = 1.0 / (column.len() as f64).sqrt();
        for entry in column.iter_mut() {
            *entry = if rng.random::<bool>() { scale } else { -scale };
        }
    }
}

/// A dense linear map `Φ : ℝ^N → ℝ^m`. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementMap {
    shape: AmbientShape,
    kind: &'static str,
    entries: DMatrix<f64>,
    seed: u64,
}

/// Draw an `m`-row map from `ensemble` over `shape`, deterministically in `seed`.
pub fn make_map(
    ensemble: &dyn Ensemble,
    shape: AmbientShape,
    m: usize,
    seed: u64,
) -> Result<MeasurementMap> {
    shape.validate()?;
    if m == 0 {
        return Err(Error::parameter(
            "a measurement map needs at least one row (m >= 1)",
        ));
    }
    let n = shape.dim();
    let mut entries = DMatrix::zeros(m, n);
    for (j, mut column) in entries.column_iter_mut().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(j as u64);
        ensemble.fill_column(&mut rng, column.as_mut_slice());
    }
    Ok(MeasurementMap {
        shape,
        kind: ensemble.name(),
        entries,
        seed,
    })
}

impl MeasurementMap {
    /// Wrap an explicit matrix, e.g. for hand-checked examples.
    pub fn from_entries(shape: AmbientShape, entries: DMatrix<f64>) -> Result<Self> {
        shape.validate()?;
        if entries.ncols() != shape.dim() {
            return Err(Error::parameter(format!(
                "map has {} columns but the ambient dimension is {}",
                entries.ncols(),
                shape.dim()
            )));
        }
        if entries.nrows() == 0 {
            return Err(Error::parameter(
                "a measurement map needs at least one row (m >= 1)",
            ));
        }
        Ok(MeasurementMap {
            shape,
            kind: "explicit",
            entries,
            seed: 0,
        })
    }

    pub fn shape(&self) -> AmbientShape {
        self.shape
    }

    /// Number of measurements.
    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn kind(&self) -> &'static str {
        self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// `Φx`; for matrix ambient spaces the entries are `Tr(Φ_i* X)`.
    pub fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.shape.check(x, "input")?;
        Ok(&self.entries * x)
    }

    /// `Φ*v`, flattened like the ambient space.
    pub fn adjoint(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        if v.len() != self.rows() {
            return Err(Error::parameter(format!(
                "adjoint input has length {} but the map has {} rows",
                v.len(),
                self.rows()
            )));
        }
        Ok(self.entries.tr_mul(v))
    }

    /// The submatrix of the given columns, `Φ_T` for a coordinate subspace.
    pub fn columns(&self, indices: &[usize]) -> DMatrix<f64> {
        self.entries.select_columns(indices)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;

    fn hand_map() -> MeasurementMap {
        let entries = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 1.0]);
        MeasurementMap::from_entries(AmbientShape::vector(3).unwrap(), entries).unwrap()
    }

    fn random_vec(rng: &mut StdRng, n: usize) -> DVector<f64> {
        DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
    }

    #[test]
    fn same_seed_same_map() {
        let shape = AmbientShape::vector(3).unwrap();
        let a = make_map(&GaussianEnsemble, shape, 2, 7).unwrap();
        let b = make_map(&GaussianEnsemble, shape, 2, 7).unwrap();
        assert_eq!(a.entries().shape(), (2, 3));
        assert_eq!(a, b);
        let c = make_map(&GaussianEnsemble, shape, 2, 8).unwrap();
        assert_ne!(a.entries(), c.entries());
    }

    #[test]
    fn sign_entries_are_plus_minus_half() {
        let map = make_map(&SignEnsemble, AmbientShape::vector(4).unwrap(), 4, 1).unwrap();
        assert!(map.entries().iter().all(|&v| v.abs() == 0.5));
    }

    #[test]
    fn sign_map_has_two_values() {
        let map = make_map(&SignEnsemble, AmbientShape::matrix(5, 6).unwrap(), 9, 3).unwrap();
        let scale = 1.0 / 3.0;
        let plus = map.entries().iter().filter(|&&v| v == scale).count();
        let minus = map.entries().iter().filter(|&&v| v == -scale).count();
        assert_eq!(plus + minus, 9 * 30);
        assert!(plus > 0 && minus > 0);
    }

    #[test]
    fn gaussian_entry_mean_is_centered() {
        // 500k entries of variance 1/500; the sample mean has sd (1/√500)/√500000.
        let map = make_map(
            &GaussianEnsemble,
            AmbientShape::vector(1000).unwrap(),
            500,
            3,
        )
        .unwrap();
        let count = (500 * 1000) as f64;
        let mean = map.entries().sum() / count;
        let sd_of_mean = (1.0 / 500f64.sqrt()) / count.sqrt();
        assert!(
            mean.abs() <= 4.0 * sd_of_mean,
            "mean {mean} vs 4sd {}",
            4.0 * sd_of_mean
        );
        let var = map
            .entries()
            .iter()
            .map(|v| (v - mean).powi(2))
            .sum::<f64>()
            / count;
        assert_relative_eq!(var, 1.0 / 500.0, max_relative = 0.01);
    }

    #[test]
    fn column_streams_do_not_depend_on_width() {
        let narrow = make_map(&GaussianEnsemble, AmbientShape::vector(5).unwrap(), 6, 11).unwrap();
        let wide = make_map(&GaussianEnsemble, AmbientShape::vector(40).unwrap(), 6, 11).unwrap();
        assert_eq!(narrow.entries(), &wide.entries().columns(0, 5).into_owned());
    }

    #[test]
    fn hand_apply_and_adjoint() {
        let map = hand_map();
        let y = map.apply(&DVector::from_vec(vec![2.0, 0.0, 0.0])).unwrap();
        assert_eq!(y.as_slice(), &[2.0, 0.0]);
        let x = map.adjoint(&DVector::from_vec(vec![1.0, 0.0])).unwrap();
        assert_eq!(x.as_slice(), &[1.0, 0.0, 1.0]);
        assert_eq!(map.apply(&DVector::zeros(3)).unwrap(), DVector::zeros(2));
        assert_eq!(map.adjoint(&DVector::zeros(2)).unwrap(), DVector::zeros(3));
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let map = hand_map();
        assert!(matches!(
            map.apply(&DVector::zeros(4)),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(
            map.adjoint(&DVector::zeros(3)),
            Err(Error::Parameter(_))
        ));
        assert!(AmbientShape::vector(0).is_err());
        assert!(AmbientShape::matrix(3, 0).is_err());
        let shape = AmbientShape::vector(3).unwrap();
        assert!(matches!(
            make_map(&GaussianEnsemble, shape, 0, 1),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn apply_is_linear() {
        let mut rng = StdRng::seed_from_u64(5);
        let map = make_map(&SignEnsemble, AmbientShape::matrix(3, 4).unwrap(), 7, 2).unwrap();
        let x = random_vec(&mut rng, 12);
        let y = random_vec(&mut rng, 12);
        let lhs = map.apply(&(&x * 2.5 - &y * 0.75)).unwrap();
        let rhs = map.apply(&x).unwrap() * 2.5 - map.apply(&y).unwrap() * 0.75;
        assert_relative_eq!(lhs, rhs, epsilon = 1e-12);
    }

    #[test]
    fn adjoint_identity_both_ensembles() {
        let mut rng = StdRng::seed_from_u64(17);
        let ensembles: [&dyn Ensemble; 2] = [&GaussianEnsemble, &SignEnsemble];
        for ensemble in ensembles {
            for shape in [
                AmbientShape::vector(30).unwrap(),
                AmbientShape::matrix(4, 6).unwrap(),
            ] {
                let map = make_map(ensemble, shape, 13, 99).unwrap();
                for _ in 0..100 {
                    let x = random_vec(&mut rng, shape.dim());
                    let v = random_vec(&mut rng, 13);
                    let lhs = map.apply(&x).unwrap().dot(&v);
                    let rhs = x.dot(&map.adjoint(&v).unwrap());
                    assert!((lhs - rhs).abs() <= 1e-10 * x.norm() * v.norm());
                }
            }
        }
    }

    #[test]
    fn matrix_apply_is_trace_pairing() {
        let shape = AmbientShape::matrix(2, 3).unwrap();
        let map = make_map(&GaussianEnsemble, shape, 4, 21).unwrap();
        let z = DMatrix::from_fn(2, 3, |i, j| (i * 3 + j) as f64 - 2.0);
        let out = map.apply(&vectorize(&z)).unwrap();
        for i in 0..4 {
            let phi_i = shape.to_matrix(&map.entries().row(i).transpose());
            let trace = (phi_i.transpose() * &z).trace();
            assert_relative_eq!(out[i], trace, epsilon = 1e-12);
        }
    }
}
