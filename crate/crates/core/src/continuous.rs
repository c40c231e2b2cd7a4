//! C-SCAL+: SCAL+ on a uniform interval partition of `[0, 1]`.
//!
//! States are aggregated into `S` intervals `I_1 = [0, 1/S]` and
//! `I_j = ((j-1)/S, j/S]`. Counts, rewards and transitions are kept per
//! interval, the bonus gains a smoothness term `(c + r_max) L S^-alpha`, and
//! the planned interval policy is applied to every state of an interval.

use crate::agent::{AgentConfig, EpisodeLog, Learner, ScalPlus};
use crate::bonus::{BonusParams, Holder};
use crate::error::{Error, Result};
use crate::harness::sim::{simulate, RegretTrace};
use crate::seeding::StreamRng;

/// 1-based index of the interval containing `s`; ties at `j/S` go to `j`.
pub fn interval_index(s: f64, num_intervals: usize) -> Result<usize> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::OutOfDomain(s));
    }
    if num_intervals == 0 {
        return Err(Error::BadParams("number of intervals must be positive".into()));
    }
    let n = num_intervals as f64;
    let mut j = ((s * n).ceil() as usize).clamp(1, num_intervals);
    // Guard against rounding in `s * n` near the right endpoints.
    if j > 1 && s <= (j - 1) as f64 / n {
        j -= 1;
    } else if j < num_intervals && s > j as f64 / n {
        j += 1;
    }
    Ok(j)
}

/// `max(1, ceil((alpha L sqrt(T / A))^(1 / (alpha + 1))))`.
pub fn choose_num_intervals(horizon: u64, num_actions: usize, lipschitz: f64, alpha: f64) -> usize {
    let base = alpha * lipschitz * (horizon as f64 / num_actions as f64).sqrt();
    let x = base.powf(1.0 / (alpha + 1.0));
    if x.is_finite() && x > 1.0 {
        x.ceil() as usize
    } else {
        1
    }
}

/// Warning text when the horizon is below `L^(2/alpha) A`, the range in which
/// the regret guarantee for the tuned partition applies.
pub fn horizon_warning(horizon: u64, num_actions: usize, holder: Holder) -> Option<String> {
    let needed = holder.lipschitz.powf(2.0 / holder.alpha) * num_actions as f64;
    ((horizon as f64) < needed)
        .then(|| format!("horizon {horizon} is below L^(2/alpha) A = {needed:.1}; the partition may be too coarse"))
}

/// Uniform partition of `[0, 1]` into `num_intervals` intervals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Discretization {
    num_intervals: usize,
}

impl Discretization {
    pub fn new(num_intervals: usize) -> Result<Self> {
        if num_intervals == 0 {
            return Err(Error::BadParams("number of intervals must be positive".into()));
        }
        Ok(Self { num_intervals })
    }

    pub fn num_intervals(&self) -> usize {
        self.num_intervals
    }

    /// 0-based interval index of `s`.
    pub fn index(&self, s: f64) -> Result<usize> {
        interval_index(s, self.num_intervals).map(|j| j - 1)
    }

    /// Midpoint of the 0-based interval `j`.
    pub fn centre(&self, j: usize) -> f64 {
        (j as f64 + 0.5) / self.num_intervals as f64
    }
}

/// A continuous-state environment on `[0, 1]` with Hölder-continuous rewards
/// and transitions.
pub trait HolderEnv {
    fn num_actions(&self) -> usize;
    fn r_max(&self) -> f64;
    /// Documented constants `(L, alpha)`.
    fn holder(&self) -> Holder;
    fn initial_state(&self) -> f64 {
        0.0
    }
    /// Samples `(reward, next state)`.
    fn step(&self, s: f64, a: usize, rng: &mut StreamRng) -> (f64, f64);
    /// Optimal gain, when the environment author supplies one.
    fn true_gain(&self) -> Option<f64>;
}

#[derive(Debug, Clone)]
pub struct ContinuousScalPlus {
    inner: ScalPlus,
    grid: Discretization,
}

impl ContinuousScalPlus {
    pub fn new(grid: Discretization, num_actions: usize, holder: Holder, cfg: AgentConfig) -> Result<Self> {
        let params = BonusParams::new(cfg.span_cap, cfg.r_max, cfg.delta, grid.num_intervals(), num_actions)
            .with_holder(holder.lipschitz, holder.alpha);
        Ok(Self {
            inner: ScalPlus::with_bonus(params, cfg)?,
            grid,
        })
    }

    pub fn discretization(&self) -> Discretization {
        self.grid
    }

    /// The underlying learner on interval indices.
    pub fn aggregated(&self) -> &ScalPlus {
        &self.inner
    }

    /// Action distribution at `s`, lifted from its interval.
    pub fn policy_at(&self, s: f64) -> Result<&[f64]> {
        Ok(self.inner.policy().row(self.grid.index(s)?))
    }
}

impl Learner<f64> for ContinuousScalPlus {
    fn act(&mut self, s: f64) -> Result<usize> {
        self.inner.act(self.grid.index(s)?)
    }

    fn observe(&mut self, s: f64, a: usize, reward: f64, s_next: f64) -> Result<bool> {
        let (i, j) = (self.grid.index(s)?, self.grid.index(s_next)?);
        self.inner.observe(i, a, reward, j)
    }

    fn episode(&self) -> usize {
        Learner::<usize>::episode(&self.inner)
    }

    /// Traces label continuous states by their 0-based interval.
    fn label(&self, s: f64) -> usize {
        self.grid.index(s).unwrap_or(0)
    }

    fn episode_log(&self) -> &[EpisodeLog] {
        Learner::<usize>::episode_log(&self.inner)
    }
}

/// Runs C-SCAL+ for `horizon` steps. The partition size is tuned to the
/// horizon unless `num_intervals` is given. Regret is measured against the
/// environment's declared gain (NaN when it declares none).
pub fn run_continuous_agent<E: HolderEnv>(
    env: &E,
    cfg: AgentConfig,
    horizon: u64,
    num_intervals: Option<usize>,
) -> Result<RegretTrace> {
    let holder = env.holder();
    let na = env.num_actions();
    let s = num_intervals.unwrap_or_else(|| choose_num_intervals(horizon, na, holder.lipschitz, holder.alpha));
    let seed = cfg.seed;
    let mut agent = ContinuousScalPlus::new(Discretization::new(s)?, na, holder, cfg)?;
    simulate(env, &mut agent, horizon, seed)
}
