//! Command-line front end: bounds, single-instance certification and
//! solving, and Monte Carlo sweeps written as CSV.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use dualcert_core::bounds::{self, BoundReport, UnspecifiedConstants};
use dualcert_core::certificate::{certify, construct_multiplier_with, default_solver, Tolerances};
use dualcert_core::montecarlo::{
    draw_instance, summarize, sweep, CheckMode, GridSpec, SweepRow, TrialConfig,
};
use dualcert_core::registry::{
    ensembles, model_families, ModelFamily, ModelParams, SignBoundParams, SignalDistribution,
};
use dualcert_core::solvers::{
    recovery_success, solve_min_norm, SolverOptions, DEFAULT_SUCCESS_THRESHOLD,
};
use dualcert_core::{Error, Result};

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_NEGATIVE: u8 = 2;
pub const EXIT_UNCONVERGED: u8 = 3;

pub const CSV_HEADER: [&str; 19] = [
    "model",
    "ensemble",
    "n",
    "n1",
    "n2",
    "s",
    "k",
    "r",
    "B",
    "M",
    "m",
    "beta",
    "trials",
    "cert_successes",
    "solver_successes",
    "mean_dual_norm",
    "max_dual_norm",
    "theory_lower_bound",
    "base_seed",
];

#[derive(Debug, Parser)]
#[command(
    name = "dualcert",
    version,
    about = "Dual certificates and exact recovery of sparse, block-sparse and low-rank models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate a sample threshold and success-probability lower bound.
    ///
    /// All logarithms are natural (base e).
    Bounds(BoundsArgs),
    /// Draw one instance and test the least-squares dual certificate.
    ///
    /// Exit code 0 if certified, 2 if not, 1 on error.
    Certify(InstanceArgs),
    /// Draw one instance and solve the norm-minimization problem.
    ///
    /// Exit code 0 if recovered, 2 if not, 3 if the solver did not converge, 1 on error.
    Solve(SolveArgs),
    /// Run a Monte Carlo sweep and write one CSV row per grid cell.
    ///
    /// Exit code 0 unless some cell falls more than three binomial standard
    /// deviations below its theoretical bound (2), or on error (1).
    Sweep(SweepArgs),
}

/// A list of nonnegative integers: `40`, `40,60,93` or `40:110:10` (inclusive), or a mix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntList(pub Vec<usize>);

impl FromStr for IntList {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("'{v}': {e}"));
        let mut out = Vec::new();
        for item in s.split(',').filter(|p| !p.trim().is_empty()) {
            let parts: Vec<&str> = item.split(':').collect();
            match parts.as_slice() {
                [one] => out.push(parse(one)?),
                [lo, hi] | [lo, hi, _] => {
                    let (lo, hi) = (parse(lo)?, parse(hi)?);
                    let step = if parts.len() == 3 {
                        parse(parts[2])?
                    } else {
                        1
                    };
                    if step == 0 {
                        return Err(format!("'{item}': step must be positive"));
                    }
                    out.extend((lo..=hi).step_by(step));
                }
                _ => return Err(format!("'{item}': expected a, a:b or a:b:step")),
            }
        }
        Ok(IntList(out))
    }
}

impl IntList {
    fn single(&self, flag: &str) -> Result<usize> {
        match self.0.as_slice() {
            [v] => Ok(*v),
            _ => Err(Error::Parameter(format!(
                "--{flag} takes a single value here"
            ))),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Model family: sparse, block or lowrank.
    #[arg(long, default_value = "sparse")]
    pub model: String,
    /// Ambient dimension (sparse), or n1 = n2 = n (lowrank).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub n1: Option<usize>,
    #[arg(long)]
    pub n2: Option<usize>,
    /// Sparsity. Sweeps accept a list.
    #[arg(long)]
    pub s: Option<IntList>,
    /// Number of active blocks. Sweeps accept a list.
    #[arg(long)]
    pub k: Option<IntList>,
    /// Rank. Sweeps accept a list.
    #[arg(long)]
    pub r: Option<IntList>,
    /// Block size B.
    #[arg(long = "block-size", visible_alias = "B")]
    pub block_size: Option<usize>,
    /// Number of blocks M.
    #[arg(long = "blocks", visible_alias = "M")]
    pub blocks: Option<usize>,
}

impl ModelArgs {
    fn family(&self) -> Result<std::sync::Arc<dyn ModelFamily>> {
        model_families().get(&self.model)
    }

    /// Parameters with every complexity list collapsed to one value.
    fn single_params(&self) -> Result<ModelParams> {
        Ok(ModelParams {
            s: self.s.as_ref().map(|l| l.single("s")).transpose()?,
            k: self.k.as_ref().map(|l| l.single("k")).transpose()?,
            r: self.r.as_ref().map(|l| l.single("r")).transpose()?,
            ..self.base_params()
        })
    }

    fn base_params(&self) -> ModelParams {
        ModelParams {
            n: self.n,
            n1: self.n1,
            n2: self.n2,
            block_size: self.block_size,
            blocks: self.blocks,
            ..Default::default()
        }
    }

    fn complexity_list(&self, family: &dyn ModelFamily) -> Option<&IntList> {
        match family.complexity_name() {
            "s" => self.s.as_ref(),
            "k" => self.k.as_ref(),
            _ => self.r.as_ref(),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SignArgs {
    /// Slack ε in (0, 1) for the sign-ensemble bounds.
    #[arg(long, default_value_t = 0.5)]
    pub epsilon: f64,
    /// Size-gate constant c0 (illustrative; the theory leaves it unspecified).
    #[arg(long, default_value_t = UnspecifiedConstants::default().c0)]
    pub c0: f64,
    /// Exponent constant c1 (illustrative; the theory leaves it unspecified).
    #[arg(long, default_value_t = UnspecifiedConstants::default().c1)]
    pub c1: f64,
}

impl SignArgs {
    fn params(&self) -> SignBoundParams {
        SignBoundParams {
            epsilon: self.epsilon,
            constants: UnspecifiedConstants {
                c0: self.c0,
                c1: self.c1,
                ..Default::default()
            },
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Oversampling factor β.
    #[arg(long)]
    pub beta: f64,
    /// gaussian or sign.
    #[arg(long, default_value = "gaussian")]
    pub ensemble: String,
    #[command(flatten)]
    pub sign: SignArgs,
}

#[derive(Debug, Clone, Args)]
pub struct InstanceArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Number of measurements.
    #[arg(long)]
    pub m: usize,
    /// gaussian or sign.
    #[arg(long, default_value = "gaussian")]
    pub ensemble: String,
    /// Base seed; the instance is trial 0 of a sweep with this seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Ground-truth amplitudes: canonical or normal.
    #[arg(long, default_value = "canonical")]
    pub signal: String,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// ADMM penalty ρ.
    #[arg(long, default_value_t = SolverOptions::default().rho)]
    pub rho: f64,
    #[arg(long = "max-iter", default_value_t = SolverOptions::default().max_iterations)]
    pub max_iter: usize,
    #[arg(long = "eps-abs", default_value_t = SolverOptions::default().eps_abs)]
    pub eps_abs: f64,
    #[arg(long = "eps-rel", default_value_t = SolverOptions::default().eps_rel)]
    pub eps_rel: f64,
    /// Relative ℓ2 error counted as exact recovery.
    #[arg(long, default_value_t = DEFAULT_SUCCESS_THRESHOLD)]
    pub threshold: f64,
}

impl SolverArgs {
    fn options(&self) -> Result<SolverOptions> {
        let opts = SolverOptions {
            rho: self.rho,
            max_iterations: self.max_iter,
            eps_abs: self.eps_abs,
            eps_rel: self.eps_rel,
        };
        opts.validate()?;
        if !(self.threshold > 0.0) {
            return Err(Error::Parameter(format!(
                "threshold must be positive (got {})",
                self.threshold
            )));
        }
        Ok(opts)
    }
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Measurement counts: a list or a:b:step range.
    #[arg(long)]
    pub m: IntList,
    /// gaussian or sign.
    #[arg(long, default_value = "gaussian")]
    pub ensemble: String,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// certificate, solver or both.
    #[arg(long, default_value = "certificate")]
    pub check: String,
    /// Ground-truth amplitudes: canonical or normal.
    #[arg(long, default_value = "canonical")]
    pub signal: String,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    pub threads: Option<usize>,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub sign: SignArgs,
}

fn parse_signal(name: &str) -> Result<SignalDistribution> {
    match name {
        "canonical" => Ok(SignalDistribution::Canonical),
        "normal" => Ok(SignalDistribution::Normal),
        other => Err(Error::Parameter(format!(
            "unknown signal '{other}' (known: canonical, normal)"
        ))),
    }
}

/// Runs a parsed command, writing results to `out` and diagnostics to `err`.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    let result = match cli.command {
        Command::Bounds(args) => cmd_bounds(&args, out),
        Command::Certify(args) => cmd_certify(&args, out),
        Command::Solve(args) => cmd_solve(&args, out),
        Command::Sweep(args) => cmd_sweep(&args, out, err),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_ERROR
        }
    }
}

fn io(e: impl fmt::Display) -> Error {
    Error::Parameter(format!("I/O failure: {e}"))
}

fn print_report(report: &BoundReport, out: &mut dyn Write) -> Result<()> {
    let mut lines = vec![
        format!("model={}", report.model),
        format!("ensemble={}", report.ensemble),
    ];
    lines.extend(report.parameters.iter().map(|(k, v)| format!("{k}={v}")));
    lines.push(format!("dim_t={}", report.dim_t));
    lines.push(format!("m_threshold={}", report.m_threshold));
    lines.push(format!(
        "success_prob_lower={:.9}",
        report.success_prob_lower
    ));
    lines.push(format!("vacuous={}", report.vacuous));
    if let Some(gate) = report.gate_holds {
        lines.push(format!("gate_holds={gate}"));
    }
    lines.extend(report.internals.iter().map(|(k, v)| format!("{k}={v:.9e}")));
    lines.extend(report.notes.iter().map(|n| format!("note: {n}")));
    for line in lines {
        writeln!(out, "{line}").map_err(io)?;
    }
    Ok(())
}

pub fn cmd_bounds(args: &BoundsArgs, out: &mut dyn Write) -> Result<u8> {
    let family = args.model.family()?;
    let params = family.normalize(args.model.single_params()?)?;
    let sign = args.sign.params();
    let report = match args.ensemble.as_str() {
        "gaussian" => family.gaussian_bound(&params, args.beta)?,
        "sign" => {
            let c = sign.constants;
            match family.name() {
                "sparse" => bounds::bernoulli_sparse_bound(
                    args.beta,
                    sign.epsilon,
                    params.s.unwrap_or(0),
                    params.n.unwrap_or(0),
                    c.c0,
                    c.c1,
                )?,
                "block" => bounds::bernoulli_block_bound(
                    args.beta,
                    sign.epsilon,
                    params.k.unwrap_or(0),
                    params.block_size.unwrap_or(0),
                    params.blocks.unwrap_or(0),
                    c.c0,
                    c.c1,
                )?,
                other => {
                    return Err(Error::Parameter(format!(
                        "no sign-ensemble bound for the {other} model"
                    )))
                }
            }
        }
        other => {
            return Err(Error::Parameter(format!(
                "unknown ensemble '{other}' (known: gaussian, sign)"
            )))
        }
    };
    print_report(&report, out)?;
    Ok(EXIT_OK)
}

fn instance_config(args: &InstanceArgs) -> Result<TrialConfig> {
    let family = args.model.family()?;
    let ensemble = ensembles().get(&args.ensemble)?;
    let mut config = TrialConfig::new(
        family,
        args.model.single_params()?,
        ensemble,
        args.m,
        args.seed,
    )?;
    config.signal = parse_signal(&args.signal)?;
    Ok(config)
}

pub fn cmd_certify(args: &InstanceArgs, out: &mut dyn Write) -> Result<u8> {
    let config = instance_config(args)?;
    let (map, model) = draw_instance(&config, 0)?;
    let tol = Tolerances::default();
    let solver = default_solver(model.as_ref());
    let cert = construct_multiplier_with(&map, model.as_ref(), solver, &tol)?;
    let verdict = certify(&cert, &tol);
    let lines = [
        format!("model={}", config.family.name()),
        format!("ensemble={}", config.ensemble.name()),
        format!("m={}", config.m),
        format!("d_T={}", cert.dim_t),
        format!("gram_solver={}", solver.name()),
        format!("certified={}", verdict.certified),
        format!("reason={}", verdict.reason.name()),
        format!("off_t_dual_norm={:.9e}", cert.off_t_dual_norm),
        format!("margin={:.9e}", verdict.margin),
        format!("residual_t={:.9e}", cert.residual_t),
        format!("sigma_min_t={:.9e}", cert.sigma_min_t),
        format!("sigma_max_t={:.9e}", cert.sigma_max_t),
        format!("q_norm={:.9e}", cert.q_norm),
    ];
    for line in lines {
        writeln!(out, "{line}").map_err(io)?;
    }
    Ok(if verdict.certified {
        EXIT_OK
    } else {
        EXIT_NEGATIVE
    })
}

pub fn cmd_solve(args: &SolveArgs, out: &mut dyn Write) -> Result<u8> {
    let opts = args.solver.options()?;
    let config = instance_config(&args.instance)?;
    let (map, model) = draw_instance(&config, 0)?;
    let b = map.apply(model.x0())?;
    let solution = solve_min_norm(&map, &b, model.regularizer(), &opts)?;
    let rel_error = (&solution.x_hat - model.x0()).norm() / model.x0().norm();
    let recovered = recovery_success(&solution.x_hat, model.x0(), args.solver.threshold)?;
    let lines = [
        format!("model={}", config.family.name()),
        format!("ensemble={}", config.ensemble.name()),
        format!("m={}", config.m),
        format!("converged={}", solution.converged),
        format!("iterations={}", solution.iterations),
        format!("primal_residual={:.9e}", solution.primal_residual),
        format!("dual_residual={:.9e}", solution.dual_residual),
        format!("objective={:.9e}", solution.objective),
        format!("rel_error={rel_error:.9e}"),
        format!("recovered={recovered}"),
    ];
    for line in lines {
        writeln!(out, "{line}").map_err(io)?;
    }
    Ok(if !solution.converged {
        EXIT_UNCONVERGED
    } else if recovered {
        EXIT_OK
    } else {
        EXIT_NEGATIVE
    })
}

pub fn cmd_sweep(args: &SweepArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<u8> {
    let family = args.model.family()?;
    let ensemble = ensembles().get(&args.ensemble)?;
    let check = CheckMode::parse(&args.check)?;
    let mut params = args.model.base_params();
    let complexities = match args.model.complexity_list(family.as_ref()) {
        Some(list) if list.0.len() == 1 => {
            params = family.with_complexity(params, list.0[0]);
            Vec::new()
        }
        Some(list) if list.0.is_empty() => return Err(Error::Parameter("empty grid".into())),
        Some(list) => list.0.clone(),
        None => Vec::new(),
    };
    let mut grid = GridSpec::new(family, ensemble, params, args.m.0.clone());
    grid.complexities = complexities;
    grid.signal = parse_signal(&args.signal)?;
    grid.solver = args.solver.options()?;
    grid.threshold = args.solver.threshold;
    grid.sign_bound = args.sign.params();

    let pool = match args.threads {
        Some(0) => return Err(Error::Parameter("threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    }
    .map_err(io)?;
    let rows = pool.install(|| sweep(&grid, args.trials, args.seed, check))?;

    write_csv(&args.out, &rows)?;
    writeln!(out, "wrote {} rows to {}", rows.len(), args.out.display()).map_err(io)?;

    let summary = summarize(&rows);
    for v in &summary.violations {
        let row = &rows[v.row];
        writeln!(
            err,
            "violation: m={} rate={:.4} < bound {:.4} - 3*{:.4}",
            row.m, v.rate, v.bound, v.sd
        )
        .map_err(io)?;
    }
    if summary.disagreements > 0 {
        writeln!(
            err,
            "warning: {} certified trials were not recovered by the solver",
            summary.disagreements
        )
        .map_err(io)?;
    }
    Ok(if summary.violations.is_empty() {
        EXIT_OK
    } else {
        EXIT_NEGATIVE
    })
}

/// Nine significant digits, trailing zeros trimmed.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let magnitude = x.abs().log10().floor() as i32;
    if !(-5..=15).contains(&magnitude) {
        return format!("{x:.8e}");
    }
    let decimals = (8 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn opt_int(v: Option<usize>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn opt_float(v: Option<f64>) -> String {
    v.map(format_sig9).unwrap_or_default()
}

pub fn csv_record(row: &SweepRow) -> Vec<String> {
    let p = &row.params;
    vec![
        row.model.to_string(),
        row.ensemble.to_string(),
        opt_int(p.n),
        opt_int(p.n1),
        opt_int(p.n2),
        opt_int(p.s),
        opt_int(p.k),
        opt_int(p.r),
        opt_int(p.block_size),
        opt_int(p.blocks),
        row.m.to_string(),
        opt_float(row.beta),
        row.trials.to_string(),
        opt_int(row.cert_successes),
        opt_int(row.solver_successes),
        opt_float(row.mean_dual_norm),
        opt_float(row.max_dual_norm),
        opt_float(row.theory_lower_bound),
        row.base_seed.to_string(),
    ]
}

pub fn write_csv(path: &std::path::Path, rows: &[SweepRow]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(io)?;
    writer.write_record(CSV_HEADER).map_err(io)?;
    for row in rows {
        writer.write_record(csv_record(row)).map_err(io)?;
    }
    writer.flush().map_err(io)
}
