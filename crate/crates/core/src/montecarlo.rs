//! Seeded recovery trials and parameter sweeps.
//!
//! Trial `j` of grid cell `c` draws its measurement map from
//! `derive_seed(base, [c, j, 0])` and its ground truth from
//! `derive_seed(base, [c, j, 1])`, so results do not depend on scheduling.
//! Sweeps fan trials out with rayon and reduce each cell in trial order.

use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bounds::BoundReport;
use crate::certificate::{
    certify, construct_multiplier_with, default_solver, Tolerances, VerdictReason,
};
use crate::ensembles::{derive_seed, make_map, Ensemble, MeasurementMap};
use crate::error::{Error, Result};
use crate::models::{build_model, DecomposableModel};
use crate::registry::{ModelFamily, ModelParams, SignBoundParams, SignalDistribution};
use crate::solvers::{recovery_success, solve_min_norm, SolverOptions, DEFAULT_SUCCESS_THRESHOLD};
use crate::stats::binomial_se;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckMode {
    CertificateOnly,
    SolverOnly,
    Both,
}

impl CheckMode {
    pub fn name(&self) -> &'static str {
        match self {
            CheckMode::CertificateOnly => "certificate",
            CheckMode::SolverOnly => "solver",
            CheckMode::Both => "both",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "certificate" | "certificate_only" => Ok(CheckMode::CertificateOnly),
            "solver" | "solver_only" => Ok(CheckMode::SolverOnly),
            "both" => Ok(CheckMode::Both),
            other => Err(Error::parameter(format!(
                "unknown check mode '{other}' (known: certificate, solver, both)"
            ))),
        }
    }

    fn certificate(&self) -> bool {
        !matches!(self, CheckMode::SolverOnly)
    }

    fn solver(&self) -> bool {
        !matches!(self, CheckMode::CertificateOnly)
    }
}

#[derive(Clone)]
pub struct TrialConfig {
    pub family: Arc<dyn ModelFamily>,
    pub params: ModelParams,
    pub ensemble: Arc<dyn Ensemble>,
    pub m: usize,
    pub signal: SignalDistribution,
    pub base_seed: u64,
    /// Grid cell index, mixed into every trial seed.
    pub cell: u64,
    pub threshold: f64,
    pub solver: SolverOptions,
    pub tolerances: Tolerances,
    pub check_mode: CheckMode,
}

impl TrialConfig {
    /// Certificate-only checks with default tolerances and signal.
    pub fn new(
        family: Arc<dyn ModelFamily>,
        params: ModelParams,
        ensemble: Arc<dyn Ensemble>,
        m: usize,
        base_seed: u64,
    ) -> Result<Self> {
        let params = family.normalize(params)?;
        if m == 0 {
            return Err(Error::parameter("m must be at least 1"));
        }
        Ok(TrialConfig {
            family,
            params,
            ensemble,
            m,
            signal: SignalDistribution::default(),
            base_seed,
            cell: 0,
            threshold: DEFAULT_SUCCESS_THRESHOLD,
            solver: SolverOptions::default(),
            tolerances: Tolerances::default(),
            check_mode: CheckMode::CertificateOnly,
        })
    }

    pub fn with_check_mode(mut self, mode: CheckMode) -> Self {
        self.check_mode = mode;
        self
    }
}

/// `(map seed, signal seed)` for one trial.
pub fn trial_seeds(base_seed: u64, cell: u64, trial: u64) -> (u64, u64) {
    (
        derive_seed(base_seed, &[cell, trial, 0]),
        derive_seed(base_seed, &[cell, trial, 1]),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: u64,
    pub certified: Option<bool>,
    pub reason: Option<VerdictReason>,
    pub solver_success: Option<bool>,
    pub solver_converged: Option<bool>,
    pub off_t_dual_norm: Option<f64>,
    pub q_norm: Option<f64>,
    pub iterations: Option<usize>,
    pub wall_time: Duration,
}

pub fn run_trial(config: &TrialConfig, trial: u64) -> Result<TrialRecord> {
    run_trial_inner(config, trial).map_err(|e| e.in_context(format!("trial {trial}")))
}

/// The measurement map and ground-truth model of one trial.
pub fn draw_instance(
    config: &TrialConfig,
    trial: u64,
) -> Result<(MeasurementMap, Box<dyn DecomposableModel>)> {
    let family = config.family.as_ref();
    let (map_seed, signal_seed) = trial_seeds(config.base_seed, config.cell, trial);
    let shape = family.ambient(&config.params)?;
    let map = make_map(config.ensemble.as_ref(), shape, config.m, map_seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(signal_seed);
    let x0 = family.generate(&config.params, config.signal, &mut rng)?;
    let model = build_model(x0, family.layout(&config.params)?)?;
    Ok((map, model))
}

fn run_trial_inner(config: &TrialConfig, trial: u64) -> Result<TrialRecord> {
    let started = Instant::now();
    let dim_t = config.family.dim_t(&config.params)?;
    if config.m < dim_t {
        return Err(Error::structural(format!(
            "m < dim(T) (m = {}, dim(T) = {dim_t})",
            config.m
        )));
    }
    let (map, model) = draw_instance(config, trial)?;

    let mut record = TrialRecord {
        trial,
        certified: None,
        reason: None,
        solver_success: None,
        solver_converged: None,
        off_t_dual_norm: None,
        q_norm: None,
        iterations: None,
        wall_time: Duration::ZERO,
    };
    if config.check_mode.certificate() {
        let solver = default_solver(model.as_ref());
        match construct_multiplier_with(&map, model.as_ref(), solver, &config.tolerances) {
            Ok(cert) => {
                let verdict = certify(&cert, &config.tolerances);
                record.certified = Some(verdict.certified);
                record.reason = Some(verdict.reason);
                record.off_t_dual_norm = Some(cert.off_t_dual_norm);
                record.q_norm = Some(cert.q_norm);
            }
            // A singular restriction is a failed draw, not a failed experiment.
            Err(Error::IllConditioned { .. }) => {
                record.certified = Some(false);
                record.reason = Some(VerdictReason::NotInjective);
            }
            Err(e) => return Err(e),
        }
    }
    if config.check_mode.solver() {
        let b = map.apply(model.x0())?;
        let solution = solve_min_norm(&map, &b, model.regularizer(), &config.solver)?;
        record.solver_success = Some(
            solution.converged && recovery_success(&solution.x_hat, model.x0(), config.threshold)?,
        );
        record.solver_converged = Some(solution.converged);
        record.iterations = Some(solution.iterations);
    }
    record.wall_time = started.elapsed();
    Ok(record)
}

/// A sweep over `m` (and optionally the complexity parameter) for one family
/// and ensemble.
#[derive(Clone)]
pub struct GridSpec {
    pub family: Arc<dyn ModelFamily>,
    pub ensemble: Arc<dyn Ensemble>,
    pub params: ModelParams,
    pub ms: Vec<usize>,
    /// Values of `s`, `k` or `r`; empty means the value in `params`.
    pub complexities: Vec<usize>,
    pub signal: SignalDistribution,
    pub threshold: f64,
    pub solver: SolverOptions,
    pub tolerances: Tolerances,
    pub sign_bound: SignBoundParams,
}

impl GridSpec {
    pub fn new(
        family: Arc<dyn ModelFamily>,
        ensemble: Arc<dyn Ensemble>,
        params: ModelParams,
        ms: Vec<usize>,
    ) -> Self {
        GridSpec {
            family,
            ensemble,
            params,
            ms,
            complexities: Vec::new(),
            signal: SignalDistribution::default(),
            threshold: DEFAULT_SUCCESS_THRESHOLD,
            solver: SolverOptions::default(),
            tolerances: Tolerances::default(),
            sign_bound: SignBoundParams::default(),
        }
    }

    /// Cells in output order: complexity outer, `m` inner.
    pub fn cells(&self) -> Result<Vec<(ModelParams, usize)>> {
        let complexities = if self.complexities.is_empty() {
            vec![None]
        } else {
            self.complexities.iter().map(|&c| Some(c)).collect()
        };
        let mut cells = Vec::new();
        for c in complexities {
            let params = match c {
                Some(c) => self.family.with_complexity(self.params, c),
                None => self.params,
            };
            let params = self.family.normalize(params)?;
            for &m in &self.ms {
                cells.push((params, m));
            }
        }
        if cells.is_empty() {
            return Err(Error::parameter("empty grid"));
        }
        Ok(cells)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub model: &'static str,
    pub ensemble: &'static str,
    pub params: ModelParams,
    pub m: usize,
    /// The `β` at which this `m` is the threshold, when a bound applies.
    pub beta: Option<f64>,
    pub trials: usize,
    pub cert_successes: Option<usize>,
    pub solver_successes: Option<usize>,
    pub mean_dual_norm: Option<f64>,
    pub max_dual_norm: Option<f64>,
    pub theory_lower_bound: Option<f64>,
    pub base_seed: u64,
    /// Trials certified by the multiplier that the solver failed to recover.
    pub disagreements: usize,
    pub bound: Option<BoundReport>,
}

impl SweepRow {
    /// Certificate success rate if certificates were checked, else solver rate.
    pub fn success_rate(&self) -> f64 {
        let hits = self.cert_successes.or(self.solver_successes).unwrap_or(0);
        hits as f64 / self.trials as f64
    }
}

pub fn sweep(
    grid: &GridSpec,
    trials: usize,
    base_seed: u64,
    check_mode: CheckMode,
) -> Result<Vec<SweepRow>> {
    if trials == 0 {
        return Err(Error::parameter("trials must be at least 1"));
    }
    let cells = grid.cells()?;
    let configs: Vec<TrialConfig> = cells
        .iter()
        .enumerate()
        .map(|(cell, &(params, m))| {
            let mut config = TrialConfig::new(
                grid.family.clone(),
                params,
                grid.ensemble.clone(),
                m,
                base_seed,
            )?;
            config.cell = cell as u64;
            config.signal = grid.signal;
            config.threshold = grid.threshold;
            config.solver = grid.solver;
            config.tolerances = grid.tolerances;
            config.check_mode = check_mode;
            Ok(config)
        })
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, u64)> = (0..configs.len())
        .flat_map(|c| (0..trials as u64).map(move |t| (c, t)))
        .collect();
    let records: Vec<Result<TrialRecord>> = jobs
        .par_iter()
        .map(|&(c, t)| run_trial(&configs[c], t))
        .collect();

    let mut rows = Vec::with_capacity(configs.len());
    for (cell, (config, chunk)) in configs.iter().zip(records.chunks(trials)).enumerate() {
        let context = || format!("cell {cell} (m = {})", config.m);
        let records = chunk
            .iter()
            .cloned()
            .collect::<Result<Vec<_>>>()
            .map_err(|e| e.in_context(context()))?;
        rows.push(
            aggregate(grid, config, &records, base_seed).map_err(|e| e.in_context(context()))?,
        );
    }
    Ok(rows)
}

fn aggregate(
    grid: &GridSpec,
    config: &TrialConfig,
    records: &[TrialRecord],
    base_seed: u64,
) -> Result<SweepRow> {
    let count = |f: fn(&TrialRecord) -> Option<bool>| -> Option<usize> {
        let flags: Option<Vec<bool>> = records.iter().map(f).collect();
        flags.map(|flags| flags.into_iter().filter(|&hit| hit).count())
    };
    let cert_successes = count(|r| r.certified);
    let solver_successes = count(|r| r.solver_success);
    let norms: Vec<f64> = records.iter().filter_map(|r| r.off_t_dual_norm).collect();
    let (mean_dual_norm, max_dual_norm) = if norms.is_empty() {
        (None, None)
    } else {
        let sum: f64 = norms.iter().sum();
        (
            Some(sum / norms.len() as f64),
            Some(norms.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
        )
    };
    let disagreements = records
        .iter()
        .filter(|r| r.certified == Some(true) && r.solver_success == Some(false))
        .count();

    let family = config.family.as_ref();
    let ensemble = config.ensemble.name();
    let beta = family.implied_beta(&config.params, ensemble, config.m, &grid.sign_bound)?;
    let bound = family.theory_bound(&config.params, ensemble, config.m, &grid.sign_bound)?;
    let theory_lower_bound = bound
        .as_ref()
        .filter(|b| b.gate_holds != Some(false))
        .map(|b| b.success_prob_lower);

    Ok(SweepRow {
        model: family.name(),
        ensemble,
        params: config.params,
        m: config.m,
        beta,
        trials: records.len(),
        cert_successes,
        solver_successes,
        mean_dual_norm,
        max_dual_norm,
        theory_lower_bound,
        base_seed,
        disagreements,
        bound,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub row: usize,
    pub rate: f64,
    pub bound: f64,
    /// Binomial standard deviation at the bound, `√(b(1−b)/trials)`.
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub violations: Vec<Violation>,
    /// `√(p̂(1−p̂)/trials)` per row.
    pub standard_errors: Vec<f64>,
    pub disagreements: usize,
}

/// Flags rows whose empirical rate falls more than three binomial standard
/// deviations below a positive theoretical bound.
pub fn summarize(rows: &[SweepRow]) -> Summary {
    let mut violations = Vec::new();
    let mut standard_errors = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let rate = row.success_rate();
        standard_errors.push(binomial_se(rate, row.trials));
        if let Some(bound) = row.theory_lower_bound.filter(|&b| b > 0.0) {
            let sd = binomial_se(bound, row.trials);
            if rate < bound - 3.0 * sd {
                violations.push(Violation {
                    row: i,
                    rate,
                    bound,
                    sd,
                });
            }
        }
    }
    Summary {
        violations,
        standard_errors,
        disagreements: rows.iter().map(|r| r.disagreements).sum(),
    }
}
