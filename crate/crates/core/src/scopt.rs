//! Span-constrained planning.
//!
//! `T_c` applies the optimal Bellman operator and then clips every entry to
//! at most `min_s Lv(s) + c`, so the result always has span at most `c`.
//! ScOpt runs relative value iteration with `T_c` in place of `L` and returns
//! a randomized policy attaining `T_c v` exactly.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::mdp::{self, bellman_into, best_action, min_max, DiscreteMdp, RandomizedPolicy};

/// Default iteration ceiling for a single ScOpt call.
pub const DEFAULT_MAX_ITER: usize = 1_000_000;

/// Absolute rounding allowance used when comparing values of magnitude `x`.
fn slack(x: f64) -> f64 {
    1e-12 * (1.0 + x.abs())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScOptConfig {
    /// Span cap `c`.
    pub span_cap: f64,
    /// Stopping accuracy `eps`: iterate until `span(T_c v - v) <= eps`.
    pub accuracy: f64,
    /// Reference state used to re-centre iterates.
    pub reference_state: usize,
    pub max_iter: usize,
    /// Certified contraction factor. When absent the exact ergodic
    /// coefficient is computed.
    pub contraction_factor: Option<f64>,
}

impl ScOptConfig {
    pub fn new(span_cap: f64, accuracy: f64) -> Self {
        Self {
            span_cap,
            accuracy,
            reference_state: 0,
            max_iter: DEFAULT_MAX_ITER,
            contraction_factor: None,
        }
    }

    fn check(&self, num_states: usize) -> Result<()> {
        if !(self.span_cap >= 0.0 && self.span_cap.is_finite()) {
            return Err(Error::BadParams(format!("span cap {} must be >= 0", self.span_cap)));
        }
        if !(self.accuracy > 0.0) {
            return Err(Error::BadParams(format!("accuracy {} must be > 0", self.accuracy)));
        }
        if self.reference_state >= num_states {
            return Err(Error::BadParams(format!(
                "reference state {} out of range",
                self.reference_state
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::BadParams("max_iter must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScOptResult {
    /// Final iterate `v_n`.
    pub value: Vec<f64>,
    /// `(max + min) / 2` of `T_c v_n - v_n`.
    pub gain_estimate: f64,
    pub policy: RandomizedPolicy,
    pub iterations: usize,
    pub contraction_factor: f64,
    /// Largest span over all iterates; never above `span_cap` up to rounding.
    pub max_iterate_span: f64,
    /// A priori iteration bound `ln(eps / r_0) / ln(gamma)` when `gamma < 1`.
    pub iteration_bound: Option<u64>,
}

impl ScOptResult {
    /// Plain-text record for logs: gain, iterations, contraction factor and
    /// the per-state policy support.
    pub fn to_record(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "gain {}", self.gain_estimate);
        let _ = writeln!(out, "iterations {}", self.iterations);
        let _ = writeln!(out, "contraction_factor {}", self.contraction_factor);
        for s in 0..self.policy.num_states() {
            let _ = write!(out, "policy {s}");
            for a in self.policy.support(s) {
                let _ = write!(out, " {a}:{}", self.policy.prob(s, a));
            }
            out.push('\n');
        }
        out
    }
}

fn check_len(mdp: &DiscreteMdp, v: &[f64]) -> Result<()> {
    if v.len() != mdp.num_states() {
        return Err(Error::DimensionMismatch {
            expected: mdp.num_states(),
            found: v.len(),
        });
    }
    Ok(())
}

/// Clips `lv` in place to `min(lv) + c` and returns the minimum.
fn truncate_in_place(lv: &mut [f64], c: f64) -> f64 {
    let (lo, _) = min_max(lv);
    let cap = lo + c;
    for x in lv.iter_mut() {
        if *x > cap {
            *x = cap;
        }
    }
    lo
}

/// `T_c v`: `Lv(s)` where `Lv(s) <= min Lv + c`, and `min Lv + c` elsewhere.
pub fn truncated_operator(mdp: &DiscreteMdp, v: &[f64], c: f64) -> Result<Vec<f64>> {
    check_len(mdp, v)?;
    let mut out = vec![0.0; v.len()];
    bellman_into(mdp, v, &mut out);
    truncate_in_place(&mut out, c);
    Ok(out)
}

/// True iff at every state some action's q-value is at most `min Lv + c`.
/// Requires `span(v) <= c`.
pub fn global_feasibility(mdp: &DiscreteMdp, v: &[f64], c: f64) -> Result<bool> {
    check_len(mdp, v)?;
    let sp = mdp::span(v)?;
    if sp > c + slack(c) {
        return Err(Error::SpanPrecondition { span: sp, cap: c });
    }
    Ok(feasible_unchecked(mdp, v, c))
}

fn feasible_unchecked(mdp: &DiscreteMdp, v: &[f64], c: f64) -> bool {
    let mut lv = vec![0.0; v.len()];
    bellman_into(mdp, v, &mut lv);
    let target = min_max(&lv).0 + c;
    (0..mdp.num_states()).all(|s| {
        let q_low = (0..mdp.num_actions())
            .map(|a| mdp.q_value(s, a, v))
            .fold(f64::INFINITY, f64::min);
        q_low <= target + slack(target)
    })
}

/// Randomized policy `pi` with `r_pi + P_pi v = T_c v`, supported on at most
/// two actions per state.
///
/// Untruncated states play the lowest-index greedy action. Truncated states
/// mix the greedy action with a lower-valued partner: an action with the same
/// kernel row when one is low enough (in an augmented MDP, the zero-reward
/// copy of the greedy action, so the mixture keeps its dynamics), otherwise
/// the lowest-index action of smallest q-value.
pub fn constrained_greedy(mdp: &DiscreteMdp, v: &[f64], c: f64) -> Result<RandomizedPolicy> {
    check_len(mdp, v)?;
    let na = mdp.num_actions();
    let greedy: Vec<(usize, f64)> = (0..mdp.num_states()).map(|s| best_action(mdp, s, v)).collect();
    let target = greedy.iter().map(|g| g.1).fold(f64::INFINITY, f64::min) + c;
    let mut probs = vec![0.0; mdp.num_states() * na];
    for (s, &(a_high, q_high)) in greedy.iter().enumerate() {
        let row = &mut probs[s * na..(s + 1) * na];
        if q_high <= target {
            row[a_high] = 1.0;
            continue;
        }
        let lowest = |same_kernel: bool| {
            (0..na)
                .filter(|&a| !same_kernel || (a != a_high && mdp.kernel(s, a) == mdp.kernel(s, a_high)))
                .map(|a| (a, mdp.q_value(s, a, v)))
                .fold(None, |best: Option<(usize, f64)>, (a, q)| match best {
                    Some((_, qb)) if qb <= q => best,
                    _ => Some((a, q)),
                })
        };
        let (a_low, q_low) = match lowest(true) {
            Some(partner) if partner.1 <= target => partner,
            _ => lowest(false).expect("at least one action"),
        };
        if q_low > target + slack(target) {
            return Err(Error::InfeasibleTruncation { state: s });
        }
        let mu = ((target - q_low) / (q_high - q_low)).clamp(0.0, 1.0);
        row[a_high] += mu;
        row[a_low] += 1.0 - mu;
    }
    RandomizedPolicy::new(mdp.num_states(), na, probs)
}

/// Ergodic coefficient `1 - min_{(s,a),(u,b)} sum_j min(p(j|s,a), p(j|u,b))`.
pub fn ergodic_coefficient(mdp: &DiscreteMdp) -> f64 {
    let rows: Vec<&[f64]> = (0..mdp.num_states())
        .flat_map(|s| (0..mdp.num_actions()).map(move |a| (s, a)))
        .map(|(s, a)| mdp.kernel(s, a))
        .collect();
    let mut min_overlap = f64::INFINITY;
    for (i, x) in rows.iter().enumerate() {
        for y in &rows[i + 1..] {
            let overlap: f64 = x.iter().zip(y.iter()).map(|(p, q)| p.min(*q)).sum();
            min_overlap = min_overlap.min(overlap);
        }
    }
    if rows.len() < 2 {
        // A single row overlaps itself fully.
        min_overlap = 1.0;
    }
    (1.0 - min_overlap).clamp(0.0, 1.0)
}

/// ScOpt: `v_{n+1} = T_c v_n - (T_c v_n)(ref) e` from `v_0 = 0` until
/// `span(T_c v_n - v_n) <= eps`.
///
/// Global feasibility is checked at `v_0`; debug builds re-check it at every
/// iterate together with the span invariant.
pub fn scopt(mdp: &DiscreteMdp, cfg: &ScOptConfig) -> Result<ScOptResult> {
    let n = mdp.num_states();
    cfg.check(n)?;
    let c = cfg.span_cap;
    let mut v = vec![0.0; n];
    if !feasible_unchecked(mdp, &v, c) {
        return Err(Error::FeasibilityViolation);
    }
    let gamma = cfg.contraction_factor.unwrap_or_else(|| ergodic_coefficient(mdp));
    let mut w = vec![0.0; n];
    let mut max_iterate_span = 0.0f64;
    let mut iteration_bound = None;
    for iter in 0..cfg.max_iter {
        bellman_into(mdp, &v, &mut w);
        truncate_in_place(&mut w, c);
        let (lo, hi) = w
            .iter()
            .zip(&v)
            .map(|(a, b)| a - b)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)));
        let residual = hi - lo;
        if iter == 0 && gamma < 1.0 && residual > cfg.accuracy {
            let bound = ((cfg.accuracy / residual).ln() / gamma.ln()).ceil();
            iteration_bound = Some(if gamma == 0.0 { 1 } else { bound as u64 });
        }
        if residual <= cfg.accuracy {
            let policy = constrained_greedy(mdp, &v, c)?;
            return Ok(ScOptResult {
                value: v,
                gain_estimate: (hi + lo) / 2.0,
                policy,
                iterations: iter,
                contraction_factor: gamma,
                max_iterate_span,
                iteration_bound: iteration_bound.or(Some(0)),
            });
        }
        if cfg!(debug_assertions) && !feasible_unchecked(mdp, &v, c) {
            return Err(Error::FeasibilityViolation);
        }
        let anchor = w[cfg.reference_state];
        for (x, y) in v.iter_mut().zip(&w) {
            *x = y - anchor;
        }
        let (vlo, vhi) = min_max(&v);
        max_iterate_span = max_iterate_span.max(vhi - vlo);
        debug_assert!(
            vhi - vlo <= c + 1e-12,
            "ScOpt iterate span {} exceeds cap {c}",
            vhi - vlo
        );
    }
    Err(Error::NoConvergence { max_iter: cfg.max_iter })
}
