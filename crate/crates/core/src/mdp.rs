//! Finite average-reward MDPs, the optimal Bellman operator and the exact
//! gain/bias oracle used as ground truth by the rest of the crate.
//!
//! The oracle is relative value iteration anchored at state 0. It assumes the
//! MDP is weakly communicating; that precondition is documented but not
//! verified (checking it requires a reachability analysis the solver does
//! not need).

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Default accuracy of [`solve_gain_bias`] and [`policy_gain`].
pub const DEFAULT_TOL: f64 = 1e-9;
/// Default iteration ceiling of the oracle.
pub const DEFAULT_MAX_ITER: usize = 1_000_000;

const ROW_SUM_TOL: f64 = 1e-12;
/// Iterations without a new residual minimum before the oracle switches to the
/// aperiodicity transform `v <- v/2 + Lv/2`.
const OSCILLATION_WINDOW: usize = 1000;

/// Finite MDP with dense kernel `p(s' | s, a)` and mean rewards in `[0, r_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMdp {
    num_states: usize,
    num_actions: usize,
    /// Row-major `[s][a][s']`.
    kernel: Vec<f64>,
    /// Row-major `[s][a]`.
    reward: Vec<f64>,
    r_max: f64,
}

impl DiscreteMdp {
    /// Builds and validates an MDP from flat row-major arrays.
    pub fn new(num_states: usize, num_actions: usize, kernel: Vec<f64>, reward: Vec<f64>, r_max: f64) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(Error::BadParams(
                "an MDP needs at least one state and one action".into(),
            ));
        }
        if !(r_max > 0.0 && r_max.is_finite()) {
            return Err(Error::BadParams(format!("r_max must be positive, got {r_max}")));
        }
        let pairs = num_states * num_actions;
        if kernel.len() != pairs * num_states {
            return Err(Error::DimensionMismatch {
                expected: pairs * num_states,
                found: kernel.len(),
            });
        }
        if reward.len() != pairs {
            return Err(Error::DimensionMismatch {
                expected: pairs,
                found: reward.len(),
            });
        }
        let mdp = Self {
            num_states,
            num_actions,
            kernel,
            reward,
            r_max,
        };
        validate(&mdp)?;
        Ok(mdp)
    }

    /// Builds an MDP from a closure returning `(reward, kernel row)` per pair.
    pub fn from_fn<F>(num_states: usize, num_actions: usize, r_max: f64, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize) -> (f64, Vec<f64>),
    {
        let mut kernel = Vec::with_capacity(num_states * num_actions * num_states);
        let mut reward = Vec::with_capacity(num_states * num_actions);
        for s in 0..num_states {
            for a in 0..num_actions {
                let (r, row) = f(s, a);
                if row.len() != num_states {
                    return Err(Error::DimensionMismatch {
                        expected: num_states,
                        found: row.len(),
                    });
                }
                reward.push(r);
                kernel.extend_from_slice(&row);
            }
        }
        Self::new(num_states, num_actions, kernel, reward, r_max)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// Next-state distribution `p(. | s, a)`.
    pub fn kernel(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.num_actions + a) * self.num_states;
        &self.kernel[start..start + self.num_states]
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.num_actions + a]
    }

    /// `r(s,a) + p(.|s,a)^T v`.
    pub fn q_value(&self, s: usize, a: usize, v: &[f64]) -> f64 {
        self.reward(s, a) + dot(self.kernel(s, a), v)
    }

    /// Serialises to the plain-text MDP format (see [`DiscreteMdp::from_text`]).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# states actions r_max");
        let _ = writeln!(out, "{} {} {}", self.num_states, self.num_actions, self.r_max);
        let _ = writeln!(
            out,
            "# one line per (state, action), state-major: reward p(0) .. p(S-1)"
        );
        for s in 0..self.num_states {
            for a in 0..self.num_actions {
                let _ = write!(out, "{}", self.reward(s, a));
                for p in self.kernel(s, a) {
                    let _ = write!(out, " {p}");
                }
                out.push('\n');
            }
        }
        out
    }

    /// Parses the plain-text MDP format.
    ///
    /// The first record is `S A r_max`; it is followed by `S * A` records, one
    /// per state-action pair in state-major order, each holding the mean reward
    /// then the `S` kernel entries. Fields are whitespace separated decimals and
    /// `#` starts a comment running to the end of the line.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut tokens = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or(""))
            .flat_map(str::split_whitespace);
        let mut next = |what: &str| {
            tokens
                .next()
                .ok_or_else(|| Error::Parse(format!("unexpected end of input reading {what}")))
        };
        let num_states: usize = parse_token(next("state count")?)?;
        let num_actions: usize = parse_token(next("action count")?)?;
        let r_max: f64 = parse_token(next("r_max")?)?;
        let pairs = num_states * num_actions;
        let mut reward = Vec::with_capacity(pairs);
        let mut kernel = Vec::with_capacity(pairs * num_states);
        for _ in 0..pairs {
            reward.push(parse_token(next("reward")?)?);
            for _ in 0..num_states {
                kernel.push(parse_token(next("kernel entry")?)?);
            }
        }
        if let Some(extra) = tokens.next() {
            return Err(Error::Parse(format!("trailing token {extra:?}")));
        }
        Self::new(num_states, num_actions, kernel, reward, r_max)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

fn parse_token<T: std::str::FromStr>(tok: &str) -> Result<T> {
    tok.parse().map_err(|_| Error::Parse(format!("cannot parse {tok:?}")))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Checks that every kernel row is a distribution and every reward is in
/// `[0, r_max]`.
pub fn validate(mdp: &DiscreteMdp) -> Result<()> {
    for s in 0..mdp.num_states {
        for a in 0..mdp.num_actions {
            let row = mdp.kernel(s, a);
            let sum: f64 = row.iter().sum();
            let bad_entry = row.iter().any(|p| !(p.is_finite() && *p >= 0.0));
            if bad_entry || (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::NonStochasticRow { state: s, action: a });
            }
            let r = mdp.reward(s, a);
            if !(r >= 0.0 && r <= mdp.r_max) {
                return Err(Error::RewardOutOfRange { state: s, action: a });
            }
        }
    }
    Ok(())
}

fn check_len(mdp: &DiscreteMdp, v: &[f64]) -> Result<()> {
    if v.len() != mdp.num_states {
        return Err(Error::DimensionMismatch {
            expected: mdp.num_states,
            found: v.len(),
        });
    }
    Ok(())
}

/// Maximum q-value and its lowest-index maximiser at state `s`.
pub(crate) fn best_action(mdp: &DiscreteMdp, s: usize, v: &[f64]) -> (usize, f64) {
    let mut best = (0, mdp.q_value(s, 0, v));
    for a in 1..mdp.num_actions {
        let q = mdp.q_value(s, a, v);
        if q > best.1 {
            best = (a, q);
        }
    }
    best
}

pub(crate) fn bellman_into(mdp: &DiscreteMdp, v: &[f64], out: &mut [f64]) {
    for (s, o) in out.iter_mut().enumerate() {
        *o = best_action(mdp, s, v).1;
    }
}

/// Optimal Bellman operator `Lv(s) = max_a { r(s,a) + p(.|s,a)^T v }`.
pub fn bellman(mdp: &DiscreteMdp, v: &[f64]) -> Result<Vec<f64>> {
    check_len(mdp, v)?;
    let mut out = vec![0.0; mdp.num_states];
    bellman_into(mdp, v, &mut out);
    Ok(out)
}

pub(crate) fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
        (lo.min(x), hi.max(x))
    })
}

/// `max(v) - min(v)`.
pub fn span(v: &[f64]) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::EmptyVector);
    }
    let (lo, hi) = min_max(v);
    Ok(hi - lo)
}

/// Solution `(g, h)` of the average-reward optimality equation.
#[derive(Debug, Clone, PartialEq)]
pub struct GainBias {
    pub gain: f64,
    pub bias: Vec<f64>,
    pub span: f64,
}

/// Stationary randomized policy: one distribution over actions per state.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomizedPolicy {
    num_actions: usize,
    probs: Vec<f64>,
}

impl RandomizedPolicy {
    pub fn new(num_states: usize, num_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != num_states * num_actions {
            return Err(Error::DimensionMismatch {
                expected: num_states * num_actions,
                found: probs.len(),
            });
        }
        for (s, row) in probs.chunks(num_actions).enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) || (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::BadParams(format!(
                    "policy row for state {s} is not a distribution"
                )));
            }
        }
        Ok(Self { num_actions, probs })
    }

    pub fn deterministic(num_actions: usize, actions: &[usize]) -> Result<Self> {
        let mut probs = vec![0.0; actions.len() * num_actions];
        for (s, &a) in actions.iter().enumerate() {
            if a >= num_actions {
                return Err(Error::BadParams(format!("action {a} out of range")));
            }
            probs[s * num_actions + a] = 1.0;
        }
        Self::new(actions.len(), num_actions, probs)
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        let p = 1.0 / num_actions as f64;
        Self {
            num_actions,
            probs: vec![p; num_states * num_actions],
        }
    }

    pub fn num_states(&self) -> usize {
        self.probs.len() / self.num_actions
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.num_actions..(s + 1) * self.num_actions]
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.num_actions + a]
    }

    /// Actions with strictly positive probability at `s`.
    pub fn support(&self, s: usize) -> Vec<usize> {
        self.row(s)
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .map(|(a, _)| a)
            .collect()
    }

    /// `r_pi(s) + P_pi(s, .)^T v`.
    pub fn backup(&self, mdp: &DiscreteMdp, s: usize, v: &[f64]) -> f64 {
        self.row(s)
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .map(|(a, p)| p * mdp.q_value(s, a, v))
            .sum()
    }
}

/// Relative value iteration for a monotone operator with affine-shift
/// identity. Returns `(gain, relative value anchored at state 0)`.
fn relative_iteration<F>(num_states: usize, op: F, tol: f64, max_iter: usize) -> Result<(f64, Vec<f64>)>
where
    F: Fn(&[f64], &mut [f64]),
{
    let mut v = vec![0.0; num_states];
    let mut lv = vec![0.0; num_states];
    let mut best = f64::INFINITY;
    let mut since_best = 0;
    let mut step = 1.0;
    for _ in 0..max_iter {
        op(&v, &mut lv);
        let diff: Vec<f64> = lv.iter().zip(&v).map(|(a, b)| a - b).collect();
        let (lo, hi) = min_max(&diff);
        let residual = hi - lo;
        if residual <= tol {
            return Ok(((hi + lo) / 2.0, v));
        }
        if residual < best {
            best = residual;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= OSCILLATION_WINDOW && step == 1.0 {
                step = 0.5;
                best = f64::INFINITY;
            }
        }
        let anchor = v[0] + step * diff[0];
        for (x, d) in v.iter_mut().zip(&diff) {
            *x += step * d - anchor;
        }
    }
    Err(Error::NoConvergence { max_iter })
}

/// Exact optimal gain and bias of a weakly communicating MDP, by relative
/// value iteration anchored at state 0. Stops when `span(Lv - v) <= tol`.
pub fn solve_gain_bias(mdp: &DiscreteMdp, tol: f64, max_iter: usize) -> Result<GainBias> {
    let (gain, bias) = relative_iteration(mdp.num_states, |v, out| bellman_into(mdp, v, out), tol, max_iter)?;
    let span = span(&bias)?;
    Ok(GainBias { gain, bias, span })
}

/// Lowest-index greedy deterministic policy with respect to `v`.
pub fn greedy_policy(mdp: &DiscreteMdp, v: &[f64]) -> Result<RandomizedPolicy> {
    check_len(mdp, v)?;
    let actions: Vec<usize> = (0..mdp.num_states).map(|s| best_action(mdp, s, v).0).collect();
    RandomizedPolicy::deterministic(mdp.num_actions, &actions)
}

/// Gain of a stationary policy whose induced chain is unichain, by policy
/// evaluation iteration.
pub fn policy_gain(mdp: &DiscreteMdp, policy: &RandomizedPolicy, tol: f64) -> Result<f64> {
    if policy.num_states() != mdp.num_states || policy.num_actions() != mdp.num_actions {
        return Err(Error::DimensionMismatch {
            expected: mdp.num_states * mdp.num_actions,
            found: policy.probs.len(),
        });
    }
    let (gain, _) = relative_iteration(
        mdp.num_states,
        |v, out| {
            for (s, o) in out.iter_mut().enumerate() {
                *o = policy.backup(mdp, s, v);
            }
        },
        tol,
        DEFAULT_MAX_ITER,
    )?;
    Ok(gain)
}

/// Largest number of strictly positive entries in any kernel row.
pub fn max_support(mdp: &DiscreteMdp) -> usize {
    (0..mdp.num_states)
        .flat_map(|s| (0..mdp.num_actions).map(move |a| (s, a)))
        .map(|(s, a)| mdp.kernel(s, a).iter().filter(|p| **p > 0.0).count())
        .max()
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_cycle() -> DiscreteMdp {
        DiscreteMdp::new(2, 1, vec![0.0, 1.0, 1.0, 0.0], vec![0.0, 1.0], 1.0).unwrap()
    }

    #[test]
    fn validate_accepts_identity_kernel() {
        let mdp = DiscreteMdp::new(1, 1, vec![1.0], vec![0.5], 1.0).unwrap();
        assert!(validate(&mdp).is_ok());
    }

    #[test]
    fn validate_rejects_bad_rows_and_rewards() {
        let err = DiscreteMdp::new(2, 1, vec![0.5, 0.4, 0.0, 1.0], vec![0.0, 0.0], 1.0);
        assert!(matches!(err, Err(Error::NonStochasticRow { state: 0, action: 0 })));
        let err = DiscreteMdp::new(1, 1, vec![1.0], vec![1.5], 1.0);
        assert!(matches!(err, Err(Error::RewardOutOfRange { state: 0, action: 0 })));
        let err = DiscreteMdp::new(2, 1, vec![1.2, -0.2, 0.0, 1.0], vec![0.0, 0.0], 1.0);
        assert!(matches!(err, Err(Error::NonStochasticRow { .. })));
    }

    #[test]
    fn bellman_examples() {
        let single = DiscreteMdp::new(1, 1, vec![1.0], vec![0.5], 1.0).unwrap();
        assert_eq!(bellman(&single, &[0.0]).unwrap(), vec![0.5]);
        assert_eq!(bellman(&two_cycle(), &[0.0, 0.0]).unwrap(), vec![0.0, 1.0]);
        assert!(matches!(
            bellman(&two_cycle(), &[0.0]),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn span_examples() {
        assert_eq!(span(&[1.0, 3.0, 2.0]).unwrap(), 2.0);
        assert_eq!(span(&[4.2; 5]).unwrap(), 0.0);
        assert_eq!(span(&[-1.0, 4.0]).unwrap(), 5.0);
        assert!(matches!(span(&[]), Err(Error::EmptyVector)));
    }

    #[test]
    fn oracle_on_two_cycle_uses_aperiodicity_transform() {
        let gb = solve_gain_bias(&two_cycle(), DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!((gb.gain - 0.5).abs() < 1e-9);
        let lh = bellman(&two_cycle(), &gb.bias).unwrap();
        for (l, h) in lh.iter().zip(&gb.bias) {
            assert!((l - h - gb.gain).abs() <= DEFAULT_TOL);
        }
    }

    #[test]
    fn oracle_single_state() {
        let mdp = DiscreteMdp::new(1, 1, vec![1.0], vec![0.7], 1.0).unwrap();
        let gb = solve_gain_bias(&mdp, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!((gb.gain - 0.7).abs() < 1e-12);
        assert_eq!(gb.bias, vec![0.0]);
        assert_eq!(gb.span, 0.0);
    }

    #[test]
    fn oracle_reports_no_convergence() {
        let err = solve_gain_bias(&two_cycle(), DEFAULT_TOL, 10);
        assert!(matches!(err, Err(Error::NoConvergence { max_iter: 10 })));
    }

    #[test]
    fn policy_gain_examples() {
        let pi = RandomizedPolicy::deterministic(1, &[0, 0]).unwrap();
        assert!((policy_gain(&two_cycle(), &pi, 1e-10).unwrap() - 0.5).abs() < 1e-9);

        let bandit = DiscreteMdp::new(1, 2, vec![1.0, 1.0], vec![0.0, 1.0], 1.0).unwrap();
        let uniform = RandomizedPolicy::uniform(1, 2);
        assert!((policy_gain(&bandit, &uniform, 1e-10).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn max_support_examples() {
        let identity = DiscreteMdp::from_fn(3, 2, 1.0, |s, _| {
            let mut row = vec![0.0; 3];
            row[s] = 1.0;
            (0.0, row)
        })
        .unwrap();
        assert_eq!(max_support(&identity), 1);
        let uniform = DiscreteMdp::from_fn(4, 1, 1.0, |_, _| (0.0, vec![0.25; 4])).unwrap();
        assert_eq!(max_support(&uniform), 4);
        assert_eq!(max_support(&two_cycle()), 1);
    }

    #[test]
    fn text_format_round_trips() {
        let mdp = DiscreteMdp::new(
            2,
            2,
            vec![0.1, 0.9, 1.0, 0.0, 0.3, 0.7, 0.5, 0.5],
            vec![0.25, 1.0, 0.0, 1.0 / 3.0],
            1.0,
        )
        .unwrap();
        let back = DiscreteMdp::from_text(&mdp.to_text()).unwrap();
        assert_eq!(back, mdp);
        assert!(matches!(DiscreteMdp::from_text("1 1 1.0\n0.5"), Err(Error::Parse(_))));
        assert!(matches!(
            DiscreteMdp::from_text("1 1 1.0\n0.5 1.0 7"),
            Err(Error::Parse(_))
        ));
    }

    #[test]
    fn policy_rows_must_be_distributions() {
        assert!(RandomizedPolicy::new(1, 2, vec![0.6, 0.6]).is_err());
        assert!(RandomizedPolicy::deterministic(2, &[2]).is_err());
        let pi = RandomizedPolicy::new(1, 3, vec![0.2, 0.0, 0.8]).unwrap();
        assert_eq!(pi.support(0), vec![0, 2]);
    }
}
