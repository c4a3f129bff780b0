//! Closed-form sample thresholds and success-probability lower bounds.
//!
//! Logarithms are natural throughout. Thresholds are rounded up to the next
//! integer row count. Bounds that fall to zero or below are reported as
//! computed and flagged `vacuous`.

use crate::error::{Error, Result};
use crate::models::ModelKind;

/// Illustrative values for constants that are only known to exist.
///
/// They appear in reports when the caller does not supply their own; no
/// acceptance check depends on them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnspecifiedConstants {
    pub theta: f64,
    pub gamma: f64,
    pub c0: f64,
    pub c1: f64,
}

impl Default for UnspecifiedConstants {
    fn default() -> Self {
        UnspecifiedConstants {
            theta: 1.0,
            gamma: 1.0 / 16.0,
            c0: 1.0,
            c1: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub model: ModelKind,
    pub ensemble: &'static str,
    pub parameters: Vec<(&'static str, f64)>,
    pub dim_t: usize,
    pub m_threshold: u64,
    pub success_prob_lower: f64,
    /// Intermediate quantities: `t`, `τ`, the individual failure terms.
    pub internals: Vec<(&'static str, f64)>,
    pub vacuous: bool,
    /// Whether the asymptotic size gate `n ≥ exp(c0/ε²)` holds (sign ensembles only).
    pub gate_holds: Option<bool>,
    pub notes: Vec<String>,
}

impl BoundReport {
    fn new(
        model: ModelKind,
        ensemble: &'static str,
        dim_t: usize,
        m_threshold: f64,
        success: f64,
    ) -> Self {
        BoundReport {
            model,
            ensemble,
            parameters: Vec::new(),
            dim_t,
            m_threshold: m_threshold.ceil() as u64,
            success_prob_lower: success,
            internals: Vec::new(),
            vacuous: success <= 0.0,
            gate_holds: None,
            notes: Vec::new(),
        }
    }

    pub fn internal(&self, name: &str) -> Option<f64> {
        self.internals
            .iter()
            .find(|(k, _)| *k == name)
            .map(|&(_, v)| v)
    }
}

fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::domain(msg()))
    }
}

fn require_beta_above_one(beta: f64) -> Result<()> {
    require(beta > 1.0 && beta.is_finite(), || {
        format!("beta must exceed 1 (got {beta})")
    })
}

/// `f(β,s) = [√(β/2s + β − 1) − √(β/2s)]²`.
pub fn f_exponent(beta: f64, s: f64) -> Result<f64> {
    require_beta_above_one(beta)?;
    require(s >= 1.0 && s.is_finite(), || {
        format!("s must be at least 1 (got {s})")
    })?;
    let a = beta / (2.0 * s);
    // Difference of square roots rewritten to avoid cancellation near β = 1.
    let diff = (beta - 1.0) / ((a + beta - 1.0).sqrt() + a.sqrt());
    Ok(diff * diff)
}

/// `t = 2β ln(n) (√(1 + 2s(β−1)/β) − 1)`, which balances the two failure terms.
pub fn sparse_t_choice(beta: f64, s: f64, n: f64) -> Result<f64> {
    require_beta_above_one(beta)?;
    require(s >= 1.0, || format!("s must be at least 1 (got {s})"))?;
    require(n >= 1.0, || format!("n must be at least 1 (got {n})"))?;
    Ok(2.0 * beta * n.ln() * ((1.0 + 2.0 * s * (beta - 1.0) / beta).sqrt() - 1.0))
}

/// `τ = √(ms/(m − s + 1 − t))`.
pub fn sparse_tau(m: f64, s: f64, t: f64) -> Result<f64> {
    let dof = m - s + 1.0 - t;
    require(dof > 0.0, || {
        format!("m - s + 1 - t must be positive (got {dof})")
    })?;
    Ok((m * s / dof).sqrt())
}

/// `n·exp(−m/(2τ²))`, unclipped.
pub fn sparse_union_term(n: f64, s: f64, m: f64, tau: f64) -> Result<f64> {
    require(n >= 1.0 && s >= 1.0 && s <= n, || {
        format!("need 1 <= s <= n (s = {s}, n = {n})")
    })?;
    require(m > 0.0, || format!("m must be positive (got {m})"))?;
    require(tau > 0.0, || format!("tau must be positive (got {tau})"))?;
    Ok(n * (-m / (2.0 * tau * tau)).exp())
}

/// The union bound on `P[‖P_{T⊥}y‖∞ ≥ 1 | ‖q‖ ≤ τ]`, clipped at 1.
pub fn sparse_conditional_term(n: f64, s: f64, m: f64, tau: f64) -> Result<f64> {
    Ok(sparse_union_term(n, s, m, tau)?.min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QNormTail {
    /// `exp(−t²/(4(m − d_T + 1)))`.
    pub probability: f64,
    /// `√(m/(m − d_T + 1 − t))`; the conditioning radius is this times `‖e‖₂`.
    pub radius_factor: f64,
}

pub fn q_norm_tail(m: f64, dim_t: f64, t: f64) -> Result<QNormTail> {
    require(m >= dim_t && dim_t >= 0.0, || {
        format!("need m >= dim(T) (m = {m}, dim(T) = {dim_t})")
    })?;
    let dof = m - dim_t + 1.0;
    require(t > 0.0 && t < dof, || {
        format!("t must lie in (0, m - dim(T) + 1) = (0, {dof}) (got {t})")
    })?;
    Ok(QNormTail {
        probability: (-t * t / (4.0 * dof)).exp(),
        radius_factor: (m / (dof - t)).sqrt(),
    })
}

/// `1 − conditional_term − q_norm_tail(m, d_T, t)`.
pub fn generic_failure(m: f64, dim_t: f64, t: f64, conditional_term: f64) -> Result<f64> {
    require((0.0..=1.0).contains(&conditional_term), || {
        format!("conditional term must lie in [0, 1] (got {conditional_term})")
    })?;
    Ok(1.0 - conditional_term - q_norm_tail(m, dim_t, t)?.probability)
}

/// The two failure terms at sample size `m` with the balancing `t`:
/// `(n·exp(−m/(2τ²)), exp(−t²/(4(m − s + 1))))`.
pub fn sparse_failure_terms(beta: f64, s: f64, n: f64, m: f64) -> Result<(f64, f64)> {
    let t = sparse_t_choice(beta, s, n)?;
    let tau = sparse_tau(m, s, t)?;
    Ok((
        sparse_union_term(n, s, m, tau)?,
        q_norm_tail(m, s, t)?.probability,
    ))
}

/// The same two terms at the real-valued `m = 2βs ln n + s` with `m − s`
/// chi-square degrees of freedom in place of `m − s + 1`. In this form both
/// terms equal `n^{−f(β,s)}` exactly.
pub fn sparse_leading_order_terms(beta: f64, s: f64, n: f64) -> Result<(f64, f64)> {
    let t = sparse_t_choice(beta, s, n)?;
    let dof = 2.0 * beta * s * n.ln();
    require(t < dof, || {
        format!("t = {t} exceeds the available degrees of freedom {dof}")
    })?;
    let union = n * (-(dof - t) / (2.0 * s)).exp();
    let tail = (-t * t / (4.0 * dof)).exp();
    Ok((union, tail))
}

fn check_sparse(s: usize, n: usize) -> Result<()> {
    require(s >= 1 && s <= n, || {
        format!("need 1 <= s <= n (s = {s}, n = {n})")
    })
}

/// Gaussian ℓ₁ recovery: `m ≥ 2βs ln n + s`, success `≥ 1 − 2n^{−f(β,s)}`.
pub fn sparse_gaussian_bound(beta: f64, s: usize, n: usize) -> Result<BoundReport> {
    require_beta_above_one(beta)?;
    check_sparse(s, n)?;
    let (sf, nf) = (s as f64, n as f64);
    let f = f_exponent(beta, sf)?;
    let m_real = 2.0 * beta * sf * nf.ln() + sf;
    let mut report = BoundReport::new(
        ModelKind::Sparse,
        "gaussian",
        s,
        m_real,
        1.0 - 2.0 * nf.powf(-f),
    );
    report.parameters = vec![("beta", beta), ("s", sf), ("n", nf)];
    report.internals.push(("f", f));
    let t = sparse_t_choice(beta, sf, nf)?;
    report.internals.push(("t", t));
    let m = report.m_threshold as f64;
    if let Ok(tau) = sparse_tau(m, sf, t) {
        report.internals.push(("tau", tau));
        report
            .internals
            .push(("union_term", sparse_union_term(nf, sf, m, tau)?));
        if let Ok(tail) = q_norm_tail(m, sf, t) {
            report.internals.push(("q_tail", tail.probability));
        }
    }
    report
        .notes
        .push("t balances the union-bound and q-norm failure terms at leading order".into());
    if report.m_threshold >= n as u64 {
        report.notes.push(format!(
            "degenerate: m_threshold {} >= n = {n}",
            report.m_threshold
        ));
    }
    Ok(report)
}

fn check_block(k: usize, block_size: usize, blocks: usize) -> Result<()> {
    require(block_size >= 1, || "block size B must be at least 1".into())?;
    require(k >= 1 && k <= blocks, || {
        format!("need 1 <= k <= M (k = {k}, M = {blocks})")
    })
}

/// `(√B + √(2 ln M))²`.
fn block_width(block_size: f64, blocks: f64) -> f64 {
    (block_size.sqrt() + (2.0 * blocks.ln()).sqrt()).powi(2)
}

/// `t = (β/2) k (√B + √(2 ln M))²`.
pub fn block_t_choice(beta: f64, k: usize, block_size: usize, blocks: usize) -> Result<f64> {
    require(beta > 0.0, || format!("beta must be positive (got {beta})"))?;
    check_block(k, block_size, blocks)?;
    Ok(0.5 * beta * k as f64 * block_width(block_size as f64, blocks as f64))
}

/// `(M exp(−½[√((m−kB+1−t)/k) − √B]²), exp(−t²/4/(m−kB+1)))`.
///
/// The first term uses the Borell tail, which needs `√((m−kB+1−t)/k) ≥ √B`;
/// outside that range it is replaced by the trivial bound 1.
pub fn block_failure_terms(
    k: usize,
    block_size: usize,
    blocks: usize,
    m: f64,
    t: f64,
) -> Result<(f64, f64)> {
    check_block(k, block_size, blocks)?;
    let (kf, bf) = (k as f64, block_size as f64);
    let dim_t = kf * bf;
    let tail = q_norm_tail(m, dim_t, t)?.probability;
    let radius = ((m - dim_t + 1.0 - t) / kf).sqrt();
    let borell = if radius >= bf.sqrt() {
        blocks as f64 * (-0.5 * (radius - bf.sqrt()).powi(2)).exp()
    } else {
        1.0
    };
    Ok((borell, tail))
}

/// Gaussian ℓ₁/ℓ₂ recovery: `m ≥ (1+β)k(√B + √(2 ln M))² + kB`.
///
/// Success is reported as `1 − M^{−β/4} − M^{−β²/(8+8β)}`; the sum is what the
/// argument bounds the failure probability by.
pub fn block_gaussian_bound(
    beta: f64,
    k: usize,
    block_size: usize,
    blocks: usize,
) -> Result<BoundReport> {
    require(beta > 0.0 && beta.is_finite(), || {
        format!("beta must be positive (got {beta})")
    })?;
    check_block(k, block_size, blocks)?;
    let (kf, bf, mf) = (k as f64, block_size as f64, blocks as f64);
    let m_real = (1.0 + beta) * kf * block_width(bf, mf) + kf * bf;
    let success = 1.0 - mf.powf(-beta / 4.0) - mf.powf(-beta * beta / (8.0 + 8.0 * beta));
    let mut report = BoundReport::new(
        ModelKind::Block,
        "gaussian",
        k * block_size,
        m_real,
        success,
    );
    report.parameters = vec![("beta", beta), ("k", kf), ("B", bf), ("M", mf)];
    let t = block_t_choice(beta, k, block_size, blocks)?;
    report.internals.push(("t", t));
    let m = report.m_threshold as f64;
    if let Ok((borell, tail)) = block_failure_terms(k, block_size, blocks, m, t) {
        report
            .internals
            .push(("tau", (m * kf / (m - kf * bf + 1.0 - t)).sqrt()));
        report.internals.push(("borell_term", borell));
        report.internals.push(("q_tail", tail));
    }
    report.notes.push(
        "stated as 'success at least M^(-beta/4) + M^(-beta^2/(8+8beta))'; the derivation bounds failure by that sum, so 1 minus it is reported".into(),
    );
    report.notes.push(
        "hypothesis is strict (m >); threshold uses the same ceiling as the other bounds".into(),
    );
    Ok(report)
}

fn check_lowrank(r: usize, rows: usize, cols: usize) -> Result<()> {
    require(r >= 1 && r <= rows.min(cols), || {
        format!("need 1 <= r <= min(n1, n2) (r = {r}, n1 = {rows}, n2 = {cols})")
    })
}

/// `t = (√(2r+1) − 1)(β − 1)(3n1 + 3n2 − 5r)`.
pub fn lowrank_t_choice(beta: f64, r: usize, rows: usize, cols: usize) -> Result<f64> {
    require_beta_above_one(beta)?;
    check_lowrank(r, rows, cols)?;
    let width = (3 * rows + 3 * cols - 5 * r) as f64;
    Ok(((2.0 * r as f64 + 1.0).sqrt() - 1.0) * (beta - 1.0) * width)
}

/// Davidson–Szarek bound `exp(−½(√m/τ − √(n1−r) − √(n2−r))²)` with
/// `τ = √(mr/(m − d_T + 1 − t))`; 1 when the bracket is negative.
pub fn lowrank_conditional_term(m: f64, r: usize, rows: usize, cols: usize, t: f64) -> Result<f64> {
    check_lowrank(r, rows, cols)?;
    let rf = r as f64;
    let dim_t = rf * (rows + cols - r) as f64;
    let dof = m - dim_t + 1.0 - t;
    require(dof > 0.0, || {
        format!("m - dim(T) + 1 - t must be positive (got {dof})")
    })?;
    let tau = (m * rf / dof).sqrt();
    let gap = m.sqrt() / tau - ((rows - r) as f64).sqrt() - ((cols - r) as f64).sqrt();
    Ok(if gap >= 0.0 {
        (-0.5 * gap * gap).exp()
    } else {
        1.0
    })
}

/// Smallest `m` making the Davidson–Szarek bracket nonnegative:
/// `r(n1+n2−r) + (√(r(n1−r)) + √(r(n2−r)))² + t − 1`.
pub fn lowrank_raw_condition(r: usize, rows: usize, cols: usize, t: f64) -> Result<f64> {
    check_lowrank(r, rows, cols)?;
    let rf = r as f64;
    let cross = (rf * (rows - r) as f64).sqrt() + (rf * (cols - r) as f64).sqrt();
    Ok(rf * (rows + cols - r) as f64 + cross * cross + t - 1.0)
}

/// Gaussian nuclear-norm recovery: `m ≥ βr(3n1 + 3n2 − 5r)`, success
/// `≥ 1 − 2exp((1−β) max(n1,n2)/8)`.
pub fn lowrank_gaussian_bound(
    beta: f64,
    r: usize,
    rows: usize,
    cols: usize,
) -> Result<BoundReport> {
    require_beta_above_one(beta)?;
    check_lowrank(r, rows, cols)?;
    let rf = r as f64;
    let width = (3 * rows + 3 * cols - 5 * r) as f64;
    let n = rows.max(cols) as f64;
    let success = 1.0 - 2.0 * ((1.0 - beta) * n / 8.0).exp();
    let dim_t = r * (rows + cols - r);
    let mut report = BoundReport::new(
        ModelKind::LowRank,
        "gaussian",
        dim_t,
        beta * rf * width,
        success,
    );
    report.parameters = vec![
        ("beta", beta),
        ("r", rf),
        ("n1", rows as f64),
        ("n2", cols as f64),
    ];
    report.internals.push(("d_T", dim_t as f64));
    let t = lowrank_t_choice(beta, r, rows, cols)?;
    report.internals.push(("t", t));
    let m = report.m_threshold as f64;
    if let Ok(cond) = lowrank_conditional_term(m, r, rows, cols, t) {
        report
            .internals
            .push(("tau", (m * rf / (m - dim_t as f64 + 1.0 - t)).sqrt()));
        report.internals.push(("davidson_szarek_term", cond));
    }
    if let Ok(tail) = q_norm_tail(m, dim_t as f64, t) {
        report.internals.push(("q_tail", tail.probability));
    }
    if let Ok(raw) = lowrank_raw_condition(r, rows, cols, t) {
        report.internals.push(("raw_sufficient_m", raw));
    }
    Ok(report)
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    require(epsilon > 0.0 && epsilon < 1.0, || {
        format!("epsilon must lie in (0, 1) (got {epsilon})")
    })
}

fn check_bernoulli_beta(beta: f64) -> Result<()> {
    require(beta >= 1.0 && beta.is_finite(), || {
        format!("beta must be at least 1 (got {beta})")
    })
}

fn gate(size: f64, epsilon: f64, c0: f64) -> bool {
    size.ln() >= c0 / (epsilon * epsilon)
}

/// Sign-ensemble ℓ₁ recovery: `m ≥ 2β(1−ε)⁻² s ln n + s`, success
/// `≥ 1 − n^{1−β} − n^{−c1βε²}`, valid once `n ≥ exp(c0/ε²)`.
pub fn bernoulli_sparse_bound(
    beta: f64,
    epsilon: f64,
    s: usize,
    n: usize,
    c0: f64,
    c1: f64,
) -> Result<BoundReport> {
    check_bernoulli_beta(beta)?;
    check_epsilon(epsilon)?;
    check_sparse(s, n)?;
    require(c0 > 0.0 && c1 > 0.0, || {
        "constants c0, c1 must be positive".into()
    })?;
    let (sf, nf) = (s as f64, n as f64);
    let m_real = 2.0 * beta * sf * nf.ln() / (1.0 - epsilon).powi(2) + sf;
    let success = 1.0 - nf.powf(1.0 - beta) - nf.powf(-c1 * beta * epsilon * epsilon);
    let mut report = BoundReport::new(ModelKind::Sparse, "sign", s, m_real, success);
    report.parameters = vec![
        ("beta", beta),
        ("epsilon", epsilon),
        ("s", sf),
        ("n", nf),
        ("c0", c0),
        ("c1", c1),
    ];
    let holds = gate(nf, epsilon, c0);
    report.gate_holds = Some(holds);
    if !holds {
        report.notes.push(format!(
            "size gate fails: n = {n} < exp(c0/epsilon^2) = exp({})",
            c0 / (epsilon * epsilon)
        ));
    }
    Ok(report)
}

/// Sign-ensemble ℓ₁/ℓ₂ recovery: `m ≥ 4kβ(1−ε)⁻² ln M + 2kB`, success
/// `≥ 1 − M^{1−β} − M^{−c1βε²}`, valid once `M ≥ exp(c0/ε²)`.
pub fn bernoulli_block_bound(
    beta: f64,
    epsilon: f64,
    k: usize,
    block_size: usize,
    blocks: usize,
    c0: f64,
    c1: f64,
) -> Result<BoundReport> {
    check_bernoulli_beta(beta)?;
    check_epsilon(epsilon)?;
    check_block(k, block_size, blocks)?;
    require(c0 > 0.0 && c1 > 0.0, || {
        "constants c0, c1 must be positive".into()
    })?;
    let (kf, bf, mf) = (k as f64, block_size as f64, blocks as f64);
    let m_real = 4.0 * kf * beta * mf.ln() / (1.0 - epsilon).powi(2) + 2.0 * kf * bf;
    let success = 1.0 - mf.powf(1.0 - beta) - mf.powf(-c1 * beta * epsilon * epsilon);
    let mut report = BoundReport::new(ModelKind::Block, "sign", k * block_size, m_real, success);
    report.parameters = vec![
        ("beta", beta),
        ("epsilon", epsilon),
        ("k", kf),
        ("B", bf),
        ("M", mf),
        ("c0", c0),
        ("c1", c1),
    ];
    let holds = gate(mf, epsilon, c0);
    report.gate_holds = Some(holds);
    if !holds {
        report.notes.push(format!(
            "size gate fails: M = {blocks} < exp(c0/epsilon^2) = exp({})",
            c0 / (epsilon * epsilon)
        ));
    }
    Ok(report)
}

/// Supporting tail inequalities, evaluated at their right-hand sides.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AuxTail {
    /// `P(√χ²_B ≥ √B + t) ≤ e^{−t²/2}`.
    Borell { block_size: usize, t: f64 },
    /// `P[σ_min(Φ_T) ≤ 1 − θ√(d_T/m) − t] ≤ e^{−γmt²}`.
    SmallestSingularValue {
        theta: f64,
        gamma: f64,
        m: usize,
        dim_t: usize,
        t: f64,
    },
    /// `P[‖Mv‖₂ ≥ 1] ≤ exp(−(‖v‖₂⁻² − d₁)/4)` for a `d₁ × d₂` sign matrix, `‖v‖ ≤ √d₁`.
    SignMatrixNorm { v_norm: f64, d1: usize },
}

impl AuxTail {
    pub fn evaluate(&self) -> Result<f64> {
        match *self {
            AuxTail::Borell { block_size, t } => {
                require(block_size >= 1, || "block size must be at least 1".into())?;
                require(t >= 0.0, || format!("t must be nonnegative (got {t})"))?;
                Ok((-t * t / 2.0).exp())
            }
            AuxTail::SmallestSingularValue {
                theta,
                gamma,
                m,
                dim_t,
                t,
            } => {
                require(theta > 0.0 && gamma > 0.0, || {
                    "theta and gamma must be positive".into()
                })?;
                require(m >= 1 && dim_t <= m, || {
                    format!("need dim(T) <= m (dim(T) = {dim_t}, m = {m})")
                })?;
                require(t >= 0.0, || format!("t must be nonnegative (got {t})"))?;
                Ok((-gamma * m as f64 * t * t).exp())
            }
            AuxTail::SignMatrixNorm { v_norm, d1 } => {
                require(d1 >= 1, || "d1 must be at least 1".into())?;
                require(v_norm > 0.0 && v_norm <= (d1 as f64).sqrt(), || {
                    format!("need 0 < ||v|| <= sqrt(d1) (||v|| = {v_norm}, d1 = {d1})")
                })?;
                Ok((-(v_norm.powi(-2) - d1 as f64) / 4.0).exp())
            }
        }
    }

    /// The deviation level the bound refers to, where it has one.
    pub fn level(&self) -> Option<f64> {
        match *self {
            AuxTail::Borell { block_size, t } => Some((block_size as f64).sqrt() + t),
            AuxTail::SmallestSingularValue {
                theta, m, dim_t, t, ..
            } => Some(1.0 - theta * (dim_t as f64 / m as f64).sqrt() - t),
            AuxTail::SignMatrixNorm { .. } => None,
        }
    }
}

/// Largest `β` whose sparse Gaussian threshold does not exceed `m`.
pub fn sparse_beta_for(m: usize, s: usize, n: usize) -> f64 {
    (m as f64 - s as f64) / (2.0 * s as f64 * (n as f64).ln())
}

/// Largest `β` whose block Gaussian threshold does not exceed `m`.
pub fn block_beta_for(m: usize, k: usize, block_size: usize, blocks: usize) -> f64 {
    let (kf, bf) = (k as f64, block_size as f64);
    (m as f64 - kf * bf) / (kf * block_width(bf, blocks as f64)) - 1.0
}

/// Largest `β` whose low-rank Gaussian threshold does not exceed `m`.
pub fn lowrank_beta_for(m: usize, r: usize, rows: usize, cols: usize) -> f64 {
    m as f64 / (r * (3 * rows + 3 * cols - 5 * r)) as f64
}
