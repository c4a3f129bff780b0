//! Name-keyed registries of model families and measurement ensembles.
//!
//! A family knows how to validate its size parameters, draw a ground-truth
//! signal, and evaluate its recovery bound; the Monte Carlo harness and the
//! command line only ever see the trait objects.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::bounds::{self, BoundReport, UnspecifiedConstants};
use crate::ensembles::{vectorize, AmbientShape, Ensemble, GaussianEnsemble, SignEnsemble};
use crate::error::{Error, Result};
use crate::models::{Layout, ModelKind};

/// Size parameters; each family reads the ones it needs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ModelParams {
    pub n: Option<usize>,
    pub n1: Option<usize>,
    pub n2: Option<usize>,
    pub s: Option<usize>,
    pub k: Option<usize>,
    pub r: Option<usize>,
    /// `B`.
    pub block_size: Option<usize>,
    /// `M`.
    pub blocks: Option<usize>,
}

fn need(value: Option<usize>, flag: &str) -> Result<usize> {
    value.ok_or_else(|| Error::parameter(format!("missing parameter {flag}")))
}

/// How nonzero amplitudes of the ground truth are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SignalDistribution {
    /// Sparse: ±1 on the support. Block: standard normal entries. Low-rank: `G₁G₂*`.
    #[default]
    Canonical,
    /// Standard normal amplitudes in every family.
    Normal,
}

impl SignalDistribution {
    pub fn name(&self) -> &'static str {
        match self {
            SignalDistribution::Canonical => "canonical",
            SignalDistribution::Normal => "normal",
        }
    }
}

/// Extra inputs for the sign-ensemble bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignBoundParams {
    pub epsilon: f64,
    pub constants: UnspecifiedConstants,
}

impl Default for SignBoundParams {
    fn default() -> Self {
        SignBoundParams {
            epsilon: 0.5,
            constants: UnspecifiedConstants::default(),
        }
    }
}

pub trait ModelFamily: Send + Sync {
    fn name(&self) -> &'static str;

    fn kind(&self) -> ModelKind;

    /// The parameter swept as "complexity": `s`, `k` or `r`.
    fn complexity_name(&self) -> &'static str;

    fn with_complexity(&self, params: ModelParams, value: usize) -> ModelParams;

    fn complexity(&self, params: &ModelParams) -> Option<usize>;

    /// Validate and fill derived fields (e.g. `n = M·B`).
    fn normalize(&self, params: ModelParams) -> Result<ModelParams>;

    fn ambient(&self, params: &ModelParams) -> Result<AmbientShape>;

    fn layout(&self, params: &ModelParams) -> Result<Layout>;

    fn dim_t(&self, params: &ModelParams) -> Result<usize>;

    fn generate(
        &self,
        params: &ModelParams,
        signal: SignalDistribution,
        rng: &mut ChaCha8Rng,
    ) -> Result<DVector<f64>>;

    fn gaussian_bound(&self, params: &ModelParams, beta: f64) -> Result<BoundReport>;

    /// Largest `β` whose threshold does not exceed `m` for the given ensemble,
    /// or `None` when the ensemble has no bound for this family.
    fn implied_beta(
        &self,
        params: &ModelParams,
        ensemble: &str,
        m: usize,
        sign: &SignBoundParams,
    ) -> Result<Option<f64>>;

    /// The bound evaluated at the implied `β`; `None` when `β` falls outside
    /// the theorem's range or no theorem covers the ensemble.
    fn theory_bound(
        &self,
        params: &ModelParams,
        ensemble: &str,
        m: usize,
        sign: &SignBoundParams,
    ) -> Result<Option<BoundReport>>;
}

fn random_sign(rng: &mut ChaCha8Rng) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn finite(beta: f64) -> Option<f64> {
    beta.is_finite().then_some(beta)
}

pub struct SparseFamily;

impl SparseFamily {
    fn sizes(params: &ModelParams) -> Result<(usize, usize)> {
        let (n, s) = (need(params.n, "n")?, need(params.s, "s")?);
        if s == 0 || s > n {
            return Err(Error::parameter(format!(
                "need 1 <= s <= n (s = {s}, n = {n})"
            )));
        }
        Ok((n, s))
    }
}

impl ModelFamily for SparseFamily {
    fn name(&self) -> &'static str {
        "sparse"
    }

    fn kind(&self) -> ModelKind {
        ModelKind::Sparse
    }

    fn complexity_name(&self) -> &'static str {
        "s"
    }

    fn with_complexity(&self, params: ModelParams, value: usize) -> ModelParams {
        ModelParams {
            s: Some(value),
            ..params
        }
    }

    fn complexity(&self, params: &ModelParams) -> Option<usize> {
        params.s
    }

    fn normalize(&self, params: ModelParams) -> Result<ModelParams> {
        let (n, s) = Self::sizes(&params)?;
        Ok(ModelParams {
            n: Some(n),
            s: Some(s),
            ..Default::default()
        })
    }

    fn ambient(&self, params: &ModelParams) -> Result<AmbientShape> {
        AmbientShape::vector(Self::sizes(params)?.0)
    }

    fn layout(&self, params: &ModelParams) -> Result<Layout> {
        Self::sizes(params)?;
        Ok(Layout::Sparse)
    }

    fn dim_t(&self, params: &ModelParams) -> Result<usize> {
        Ok(Self::sizes(params)?.1)
    }

    fn generate(
        &self,
        params: &ModelParams,
        signal: SignalDistribution,
        rng: &mut ChaCha8Rng,
    ) -> Result<DVector<f64>> {
        let (n, s) = Self::sizes(params)?;
        let mut x0 = DVector::zeros(n);
        for i in sample(rng, n, s).iter() {
            x0[i] = match signal {
                SignalDistribution::Canonical => random_sign(rng),
                SignalDistribution::Normal => normal(rng),
            };
        }
        Ok(x0)
    }

    fn gaussian_bound(&self, params: &ModelParams, beta: f64) -> Result<BoundReport> {
        let (n, s) = Self::sizes(params)?;
        bounds::sparse_gaussian_bound(beta, s, n)
    }

    fn implied_beta(
        &self,
        params: &ModelParams,
        ensemble: &str,
        m: usize,
        sign: &SignBoundParams,
    ) -> Result<Option<f64>> {
        let (n, s) = Self::sizes(params)?;
        let beta = bounds::sparse_beta_for(m, s, n);
        Ok(match ensemble {
            "gaussian" => finite(beta),
            "sign" => finite(beta * (1.0 - sign.epsilon).powi(2)),
            _ => None,
        })
    }

    fn theory_bound(
        &self,
        params: &ModelParams,
        ensemble: &str,
        m: usize,
        sign: &SignBoundParams,
    ) -> Result<Option<BoundReport>> {
        let (n, s) = Self::sizes(params)?;
        let Some(beta) = self.implied_beta(params, ensemble, m, sign)? else {
            return Ok(None);
        };
        Ok(match ensemble {
            "gaussian" if beta > 1.0 => Some(bounds::sparse_gaussian_bound(beta, s, n)?),
            "sign" if beta >= 1.0 => {
                let c = sign.constants;
                Some(bounds::bernoulli_sparse_bound(
                    beta,
                    sign.epsilon,
                    s,
                    n,
                    c.c0,
                    c.c1,
                )?)
            }
            _ => None,
        })
    }
}

pub struct BlockFamily;

impl BlockFamily {
    fn sizes(params: &ModelParams) -> Result<(usize, usize, usize)> {
        let k = need(params.k, "k")?;
        let b = need(params.block_size, "B (block size)")?;
        let m = need(params.blocks, "M (number of blocks)")?;
        if b == 0 {
            return Err(Error::parameter("block size B must be at least 1"));
        }
        if k == 0 || k > m {
            return Err(Error::parameter(format!(
                "need 1 <= k <= M (k = {k}, M = {m})"
            )));
        }
        if let Some(n) = params.n {
            if n != m * b {
                return Err(Error::parameter(format!(
                    "n = {n} disagrees with M*B = {}",
                    m * b
                )));
            }
        }
        Ok((k, b, m))
    }
}

impl ModelFamily for BlockFamily {
    fn name(&self) -> &'static str {
        "block"
    }

    fn kind(&self) -> ModelKind {
        ModelKind::Block
    }

    fn complexity_name(&self) -> &'static str {
        "k"
    }

    fn with_complexity(&self, params: ModelParams, value: usize) -> ModelParams {
        ModelParams {
            k: Some(value),
            ..params
        }
    }

    fn complexity(&self, params: &ModelParams) -> Option<usize> {
        params.k
    }

    fn normalize(&self, params: ModelParams) -> Result<ModelParams> {
        let (k, b, m) = Self::sizes(&params)?;
        Ok(ModelParams {
            n: Some(m * b),
            k: Some(k),
            block_size: Some(b),
            blocks: Some(m),
            ..Default::default()
        })
    }

    fn ambient(&self, params: &ModelParams) -> Result<AmbientShape> {
        let (_, b, m) = Self::sizes(params)?;
        AmbientShape::vector(m * b)
    }

    fn layout(&self, params: &ModelParams) -> Result<Layout> {
        let (_, b, m) = Self::sizes(params)?;
        Ok(Layout::Block {
            blocks: m,
            block_size: b,
        })
    }

    fn dim_t(&self, params: &ModelParams) -> Result<usize> {
        let (k, b, _) = Self::sizes(params)?;
        Ok(k * b)
    }

    fn generate(
        &self,
        params: &ModelParams,
        _signal: SignalDistribution,
        rng: &mut ChaCha8Rng,
    ) -> Result<DVector<f64>> {
        let (k, b, m) = Self::sizes(params)?;
        let mut x0 = DVector::zeros(m * b);
        for block in sample(rng, m, k).iter() {
            for i in 0..b {
                x0[block * b + i] = normal(rng);
            }
        }
        Ok(x0)
    }

    fn gaussian_bound(&self, params: &ModelParams, beta: f64) -> Result<BoundReport> {
        let (k, b, m) = Self::sizes(params)?;
        bounds::block_gaussian_bound(beta, k, b, m)
    }

    fn implied_beta(
        &self,
        params: &ModelParams,
        ensemble: &str,
        m: usize,
        sign: &SignBoundParams,
    ) -> Result<Option<f64>> {
        let (k, b, blocks) = Self::sizes(params)?;
        Ok(match ensemble {
            "gaussian" => finite(bounds::block_beta_for(m, k, b, blocks)),
            "sign" => {
                let (kf, bf) = (k as f64, b as f64);
                let beta = (m as f64 - 2.0 * kf * bf) * (1.0 - sign.epsilon).powi(2)
                    / (4.0 * kf * (blocks as f64).ln());
                finite(beta)
            }
            _ => None,
        })
    }

    fn theory_bound(
        &self,
        params: &ModelParams,
        ensemble: &str,
        m: usize,
        sign: &SignBoundParams,
    ) -> Result<Option<BoundReport>> {
        let (k, b, blocks) = Self::sizes(params)?;
        let Some(beta) = self.implied_beta(params, ensemble, m, sign)? else {
            return Ok(None);
        };
        Ok(match ensemble {
            "gaussian" if beta > 0.0 => Some(bounds::block_gaussian_bound(beta, k, b, blocks)?),
            "sign" if beta >= 1.0 => {
                let c = sign.constants;
                Some(bounds::bernoulli_block_bound(
                    beta,
                    sign.epsilon,
                    k,
                    b,
                    blocks,
                    c.c0,
                    c.c1,
                )?)
            }
            _ => None,
        })
    }
}

pub struct LowRankFamily;

impl LowRankFamily {
    fn sizes(params: &ModelParams) -> Result<(usize, usize, usize)> {
        let r = need(params.r, "r")?;
        let n1 = need(params.n1.or(params.n), "n1")?;
        let n2 = need(params.n2.or(params.n), "n2")?;
        if n1 == 0 || n2 == 0 {
            return Err(Error::parameter("n1 and n2 must be at least 1"));
        }
        if r == 0 || r > n1.min(n2) {
            return Err(Error::parameter(format!(
                "need 1 <= r <= min(n1, n2) (r = {r}, n1 = {n1}, n2 = {n2})"
            )));
        }
        Ok((r, n1, n2))
    }
}

impl ModelFamily for LowRankFamily {
    fn name(&self) -> &'static str {
        "lowrank"
    }

    fn kind(&self) -> ModelKind {
        ModelKind::LowRank
    }

    fn complexity_name(&self) -> &'static str {
        "r"
    }

    fn with_complexity(&self, params: ModelParams, value: usize) -> ModelParams {
        ModelParams {
            r: Some(value),
            ..params
        }
    }

    fn complexity(&self, params: &ModelParams) -> Option<usize> {
        params.r
    }

    fn normalize(&self, params: ModelParams) -> Result<ModelParams> {
        let (r, n1, n2) = Self::sizes(&params)?;
        Ok(ModelParams {
            n1: Some(n1),
            n2: Some(n2),
            r: Some(r),
            ..Default::default()
        })
    }

    fn ambient(&self, params: &ModelParams) -> Result<AmbientShape> {
        let (_, n1, n2) = Self::sizes(params)?;
        AmbientShape::matrix(n1, n2)
    }

    fn layout(&self, params: &ModelParams) -> Result<Layout> {
        let (_, n1, n2) = Self::sizes(params)?;
        Ok(Layout::LowRank { rows: n1, cols: n2 })
    }

    fn dim_t(&self, params: &ModelParams) -> Result<usize> {
        let (r, n1, n2) = Self::sizes(params)?;
        Ok(r * (n1 + n2 - r))
    }

    /// `X₀ = G₁G₂*` with standard normal `n1 × r` and `n2 × r` factors.
    fn generate(
        &self,
        params: &ModelParams,
        _signal: SignalDistribution,
        rng: &mut ChaCha8Rng,
    ) -> Result<DVector<f64>> {
        let (r, n1, n2) = Self::sizes(params)?;
        let g1 = DMatrix::from_fn(n1, r, |_, _| normal(rng));
        let g2 = DMatrix::from_fn(n2, r, |_, _| normal(rng));
        Ok(vectorize(&(g1 * g2.transpose())))
    }

    fn gaussian_bound(&self, params: &ModelParams, beta: f64) -> Result<BoundReport> {
        let (r, n1, n2) = Self::sizes(params)?;
        bounds::lowrank_gaussian_bound(beta, r, n1, n2)
    }

    fn implied_beta(
        &self,
        params: &ModelParams,
        ensemble: &str,
        m: usize,
        _sign: &SignBoundParams,
    ) -> Result<Option<f64>> {
        let (r, n1, n2) = Self::sizes(params)?;
        Ok(match ensemble {
            "gaussian" => finite(bounds::lowrank_beta_for(m, r, n1, n2)),
            _ => None,
        })
    }

    fn theory_bound(
        &self,
        params: &ModelParams,
        ensemble: &str,
        m: usize,
        sign: &SignBoundParams,
    ) -> Result<Option<BoundReport>> {
        let (r, n1, n2) = Self::sizes(params)?;
        Ok(match self.implied_beta(params, ensemble, m, sign)? {
            Some(beta) if beta > 1.0 => Some(bounds::lowrank_gaussian_bound(beta, r, n1, n2)?),
            _ => None,
        })
    }
}

/// A name → strategy table.
pub struct Registry<T: ?Sized> {
    what: &'static str,
    entries: BTreeMap<&'static str, Arc<T>>,
}

impl<T: ?Sized> Registry<T> {
    pub fn empty(what: &'static str) -> Self {
        Registry {
            what,
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, name: &'static str, entry: Arc<T>) {
        self.entries.insert(name, entry);
    }

    pub fn get(&self, name: &str) -> Result<Arc<T>> {
        self.entries.get(name).cloned().ok_or_else(|| {
            Error::parameter(format!(
                "unknown {} '{name}' (known: {})",
                self.what,
                self.names().join(", ")
            ))
        })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }
}

/// Strategies that carry their own registry key.
pub trait Named {
    fn key(&self) -> &'static str;
}

impl Named for dyn ModelFamily {
    fn key(&self) -> &'static str {
        self.name()
    }
}

impl Named for dyn Ensemble {
    fn key(&self) -> &'static str {
        self.name()
    }
}

impl<T: ?Sized + Named> Registry<T> {
    pub fn register(&mut self, entry: Arc<T>) {
        self.insert(entry.key(), entry);
    }
}

pub fn model_families() -> Registry<dyn ModelFamily> {
    let mut registry: Registry<dyn ModelFamily> = Registry::empty("model");
    registry.register(Arc::new(SparseFamily));
    registry.register(Arc::new(BlockFamily));
    registry.register(Arc::new(LowRankFamily));
    registry
}

pub fn ensembles() -> Registry<dyn Ensemble> {
    let mut registry: Registry<dyn Ensemble> = Registry::empty("ensemble");
    registry.register(Arc::new(GaussianEnsemble));
    registry.register(Arc::new(SignEnsemble));
    registry
}
