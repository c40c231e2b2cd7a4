//! Exploration bonuses.
//!
//! The transition part of every bonus is Hoeffding-based. The reward part is
//! either Hoeffding (`r_max * beta`) or empirical Bernstein, which exploits a
//! small observed reward variance. All logarithms are natural.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BonusVariant {
    Hoeffding,
    BernsteinReward,
}

/// Hölder constants `(L, alpha)` of a continuous environment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Holder {
    pub lipschitz: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BonusParams {
    pub span_cap: f64,
    pub r_max: f64,
    pub delta: f64,
    /// Number of states, or of intervals in the continuous case.
    pub num_states: usize,
    pub num_actions: usize,
    pub holder: Option<Holder>,
    pub variant: BonusVariant,
    /// Use the capped form `c min(beta + 1/(n+1), 2) + min(beta_r, r_max)`.
    /// The uncapped form `c (beta + 1/(n+1)) + beta_r` is kept for ablations.
    pub capped: bool,
}

impl BonusParams {
    pub fn new(span_cap: f64, r_max: f64, delta: f64, num_states: usize, num_actions: usize) -> Self {
        Self {
            span_cap,
            r_max,
            delta,
            num_states,
            num_actions,
            holder: None,
            variant: BonusVariant::Hoeffding,
            capped: true,
        }
    }

    pub fn with_holder(mut self, lipschitz: f64, alpha: f64) -> Self {
        self.holder = Some(Holder { lipschitz, alpha });
        self
    }

    pub fn with_variant(mut self, variant: BonusVariant) -> Self {
        self.variant = variant;
        self
    }

    pub fn check(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::BadParams(format!("delta {} not in (0, 1)", self.delta)));
        }
        if let Some(h) = self.holder {
            // L = 0 is allowed: it describes piecewise-constant environments.
            if !(h.lipschitz >= 0.0 && h.alpha > 0.0) {
                return Err(Error::BadParams(format!(
                    "Hölder constants L = {}, alpha = {} are invalid",
                    h.lipschitz, h.alpha
                )));
            }
        }
        Ok(())
    }

    fn log_term(&self, scale: f64, t_k: u64) -> f64 {
        (scale * (self.num_states * self.num_actions) as f64 * t_k as f64 / self.delta).ln()
    }

    /// `ln(2 S A t_k / delta)`, also used as the Bernstein log factor.
    pub fn hoeffding_log(&self, t_k: u64) -> f64 {
        self.log_term(2.0, t_k)
    }
}

fn floor_one(n: u64) -> f64 {
    n.max(1) as f64
}

/// `sqrt(7 ln(2 S A t_k / delta) / max(1, n))`.
pub fn beta(n: u64, t_k: u64, params: &BonusParams) -> f64 {
    (7.0 * params.hoeffding_log(t_k) / floor_one(n)).sqrt()
}

/// Empirical-Bernstein reward confidence width
/// `sqrt(14 var b / max(1, n)) + (49/3) r_max b / max(1, n - 1)`
/// with `b = ln(2 S A t_k / delta)`.
pub fn bernstein_reward_beta(n: u64, t_k: u64, variance: f64, params: &BonusParams) -> f64 {
    let b = params.hoeffding_log(t_k);
    (14.0 * variance * b / floor_one(n)).sqrt() + (49.0 / 3.0) * params.r_max * b / floor_one(n.saturating_sub(1))
}

fn reward_width(n: u64, t_k: u64, variance: f64, params: &BonusParams) -> f64 {
    match params.variant {
        BonusVariant::Hoeffding => params.r_max * beta(n, t_k, params),
        BonusVariant::BernsteinReward => bernstein_reward_beta(n, t_k, variance, params),
    }
}

/// Combines a transition width and a reward width into a bonus.
fn combine(transition: f64, reward: f64, n: u64, params: &BonusParams) -> f64 {
    let bias = 1.0 / (n as f64 + 1.0);
    if params.capped {
        params.span_cap * (transition + bias).min(2.0) + reward.min(params.r_max)
    } else {
        params.span_cap * (transition + bias) + reward
    }
}

/// Bonus of a discrete state-action pair visited `n` times before episode
/// start `t_k`.
pub fn bonus_discrete(n: u64, t_k: u64, variance: f64, params: &BonusParams) -> f64 {
    combine(beta(n, t_k, params), reward_width(n, t_k, variance, params), n, params)
}

/// `(c + r_max) L S^-alpha`, the aggregation error of an interval partition.
pub fn smoothness_term(params: &BonusParams) -> Result<f64> {
    let h = params.holder.ok_or(Error::MissingHolderParams)?;
    Ok((params.span_cap + params.r_max) * h.lipschitz * (params.num_states as f64).powf(-h.alpha))
}

/// Bonus of an aggregated interval-action pair: the discrete bonus plus the
/// smoothness term.
pub fn bonus_continuous(n: u64, t_k: u64, variance: f64, params: &BonusParams) -> Result<f64> {
    let extra = smoothness_term(params)?;
    Ok(bonus_discrete(n, t_k, variance, params) + extra)
}

/// Wider bonus `d_k` used when bounding regret.
///
/// Discrete (`continuous == false`): `gamma_or_intervals` is the support size
/// `Gamma`, and the transition width is
/// `sqrt(7 (Gamma - 1) l / n+) + 14 S l / n+` with `l = ln(3 S A t_k / delta)`.
/// Continuous: `gamma_or_intervals` is the interval count `S`, the width is
/// `sqrt(7 S l / n+) + 14 S l / n+`, and the smoothness term is added.
pub fn diagnostic_d(
    n: u64,
    t_k: u64,
    gamma_or_intervals: usize,
    variance: f64,
    params: &BonusParams,
    continuous: bool,
) -> Result<f64> {
    let l = params.log_term(3.0, t_k);
    let n_plus = floor_one(n);
    let s = params.num_states as f64;
    let spread = if continuous {
        gamma_or_intervals as f64
    } else {
        gamma_or_intervals.saturating_sub(1) as f64
    };
    let phi = (7.0 * spread * l / n_plus).sqrt() + 14.0 * s * l / n_plus;
    let mut d = combine(phi, reward_width(n, t_k, variance, params), n, params);
    if continuous {
        d += smoothness_term(params)?;
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> BonusParams {
        BonusParams::new(2.0, 1.0, 0.05, 6, 2)
    }

    #[test]
    fn beta_inverts_to_one() {
        let p = params();
        let t_k = 1000;
        let n = (7.0 * p.hoeffding_log(t_k)).round() as u64;
        // Pick a delta making 7 ln(2 S A t_k / delta) exactly n.
        let delta = 2.0 * 12.0 * t_k as f64 / (n as f64 / 7.0).exp();
        let p = BonusParams { delta, ..p };
        assert!((beta(n, t_k, &p) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn beta_floor_and_monotonicity() {
        let p = params();
        assert_eq!(beta(0, 50, &p), beta(1, 50, &p));
        let mut prev = beta(1, 50, &p);
        for k in 1..20 {
            let cur = beta(1 << k, 50, &p);
            assert!(cur < prev);
            prev = cur;
        }
    }

    #[test]
    fn caps_bind_without_data() {
        let p = params();
        assert_eq!(bonus_discrete(0, 1, 0.0, &p), 2.0 * p.span_cap + p.r_max);
    }

    #[test]
    fn bonus_vanishes_with_data() {
        let p = params();
        let b = bonus_discrete(1 << 40, 10, 0.0, &p);
        assert!(b < 1e-4);
        assert!(b > p.span_cap / ((1u64 << 40) as f64 + 1.0));
    }

    #[test]
    fn bernstein_zero_variance_keeps_only_linear_term() {
        let p = params().with_variant(BonusVariant::BernsteinReward);
        let b = p.hoeffding_log(100);
        assert_eq!(bernstein_reward_beta(10, 100, 0.0, &p), 49.0 / 3.0 * b / 9.0);
        assert_eq!(bernstein_reward_beta(1, 100, 0.0, &p), 49.0 / 3.0 * b);
        assert_eq!(bernstein_reward_beta(0, 100, 0.0, &p), 49.0 / 3.0 * b);
    }

    #[test]
    fn continuous_bonus_examples() {
        let p = params().with_holder(0.0, 1.0);
        assert_eq!(
            bonus_continuous(5, 30, 0.0, &p).unwrap(),
            bonus_discrete(5, 30, 0.0, &p)
        );
        let p = params().with_holder(2.0, 1.0);
        let half = BonusParams {
            num_states: 12,
            ..p.clone()
        };
        let t1 = smoothness_term(&p).unwrap();
        let t2 = smoothness_term(&half).unwrap();
        assert!((t2 - t1 / 2.0).abs() < 1e-15);
        let limit = bonus_continuous(1 << 50, 10, 0.0, &p).unwrap();
        assert!((limit - t1).abs() < 1e-6);
        assert!(matches!(
            bonus_continuous(1, 1, 0.0, &params()),
            Err(Error::MissingHolderParams)
        ));
    }

    #[test]
    fn diagnostic_caps_at_zero_count() {
        let p = params();
        let d = diagnostic_d(0, 1, 2, 0.0, &p, false).unwrap();
        assert_eq!(d, 2.0 * p.span_cap + p.r_max);
    }

    #[test]
    fn uncapped_form_matches_closed_form() {
        let p = BonusParams {
            capped: false,
            ..params()
        };
        let (n, t_k) = (3, 7);
        let beta = beta(n, t_k, &p);
        let expected = (p.span_cap + p.r_max) * beta + p.span_cap / 4.0;
        assert!((bonus_discrete(n, t_k, 0.0, &p) - expected).abs() < 1e-12);
    }

    #[test]
    fn check_validates_params() {
        assert!(params().check().is_ok());
        assert!(BonusParams { delta: 1.0, ..params() }.check().is_err());
        assert!(params().with_holder(-1.0, 1.0).check().is_err());
        assert!(params().with_holder(1.0, 0.0).check().is_err());
    }
}
