//! The SCAL+ learner for finite MDPs.
//!
//! Episodes follow the doubling schedule: an episode ends right after the
//! step on which some in-episode count `nu(s,a)` reaches `max(1, N(s,a))`.
//! At every episode start the learner builds the biased empirical MDP with
//! bonus-inflated rewards, augments it with zero-reward action copies and
//! plans with ScOpt at accuracy `r_max / sqrt(t_k)`.

use serde::{Deserialize, Serialize};

use crate::bonus::{self, BonusParams, BonusVariant};
use crate::error::{Error, Result};
use crate::mdp::RandomizedPolicy;
use crate::scopt::{self, ScOptConfig};
use crate::seeding::{self, Role, StreamRng};
use crate::statistics::{augment, project_policy, VisitStatistics};

/// Iteration ceiling of the per-episode planner.
pub const PLANNER_MAX_ITER: usize = 100_000;

/// Anything that picks actions and learns from transitions.
pub trait Learner<S> {
    fn act(&mut self, s: S) -> Result<usize>;
    /// Returns `true` when this transition closed an episode.
    fn observe(&mut self, s: S, a: usize, reward: f64, s_next: S) -> Result<bool>;
    /// Current episode index (1-based).
    fn episode(&self) -> usize;
    /// State label written to traces.
    fn label(&self, s: S) -> usize;
    fn episode_log(&self) -> &[EpisodeLog] {
        &[]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub span_cap: f64,
    pub delta: f64,
    pub r_max: f64,
    pub bonus_variant: BonusVariant,
    pub capped_bonus: bool,
    pub reference_state: usize,
    pub seed: u64,
}

impl AgentConfig {
    pub fn new(span_cap: f64, delta: f64, r_max: f64, seed: u64) -> Self {
        Self {
            span_cap,
            delta,
            r_max,
            bonus_variant: BonusVariant::Hoeffding,
            capped_bonus: true,
            reference_state: 0,
            seed,
        }
    }

    fn check(&self, num_states: usize) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!("delta {} not in (0, 1)", self.delta)));
        }
        if !(self.span_cap > 0.0) {
            return Err(Error::Config(format!("span cap {} must be > 0", self.span_cap)));
        }
        if !(self.r_max > 0.0) {
            return Err(Error::Config(format!("r_max {} must be > 0", self.r_max)));
        }
        if self.reference_state >= num_states {
            return Err(Error::Config(format!(
                "reference state {} out of range",
                self.reference_state
            )));
        }
        Ok(())
    }
}

/// Per-episode planner diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub k: usize,
    pub t_k: u64,
    pub planner_gain: f64,
    pub epsilon: f64,
    pub iterations: usize,
    pub contraction: f64,
    pub max_iterate_span: f64,
    pub min_bonus: f64,
    pub max_bonus: f64,
}

#[derive(Debug, Clone)]
pub struct ScalPlus {
    cfg: AgentConfig,
    params: BonusParams,
    stats: VisitStatistics,
    policy: RandomizedPolicy,
    episode: usize,
    planner_gain: f64,
    epsilon: f64,
    rng: StreamRng,
    log: Vec<EpisodeLog>,
}

impl ScalPlus {
    /// Discrete learner over `num_states` states; plans the first episode.
    pub fn new(num_states: usize, num_actions: usize, cfg: AgentConfig) -> Result<Self> {
        let params = BonusParams::new(cfg.span_cap, cfg.r_max, cfg.delta, num_states, num_actions);
        Self::with_bonus(params, cfg)
    }

    /// Learner with explicit bonus parameters. Hölder constants in `params`
    /// switch on the continuous (aggregated) bonus.
    pub fn with_bonus(mut params: BonusParams, cfg: AgentConfig) -> Result<Self> {
        cfg.check(params.num_states)?;
        params.variant = cfg.bonus_variant;
        params.capped = cfg.capped_bonus;
        params.check()?;
        let (ns, na) = (params.num_states, params.num_actions);
        let mut agent = Self {
            stats: VisitStatistics::new(ns, na, cfg.r_max),
            policy: RandomizedPolicy::uniform(ns, na),
            rng: seeding::stream(cfg.seed, Role::Agent),
            cfg,
            params,
            episode: 0,
            planner_gain: f64::NAN,
            epsilon: f64::NAN,
            log: Vec::new(),
        };
        agent.start_episode()?;
        Ok(agent)
    }

    pub fn config(&self) -> &AgentConfig {
        &self.cfg
    }

    pub fn stats(&self) -> &VisitStatistics {
        &self.stats
    }

    pub fn policy(&self) -> &RandomizedPolicy {
        &self.policy
    }

    /// Optimistic gain returned by the planner for the current episode.
    pub fn planner_gain(&self) -> f64 {
        self.planner_gain
    }

    /// Planner accuracy `r_max / sqrt(t_k)` of the current episode.
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn pair_bonus(&self, n: u64, t_k: u64, variance: f64) -> Result<f64> {
        if self.params.holder.is_some() {
            bonus::bonus_continuous(n, t_k, variance, &self.params)
        } else {
            Ok(bonus::bonus_discrete(n, t_k, variance, &self.params))
        }
    }

    /// Plans the policy of a new episode starting at the current step.
    pub fn start_episode(&mut self) -> Result<()> {
        let t_k = self.stats.t_k();
        let s_ref = self.cfg.reference_state;
        let model = self.stats.empirical_model(s_ref);
        let (ns, na) = (self.params.num_states, self.params.num_actions);
        let mut rewards = Vec::with_capacity(ns * na);
        let (mut min_bonus, mut max_bonus) = (f64::INFINITY, f64::NEG_INFINITY);
        for s in 0..ns {
            for a in 0..na {
                let b = self.pair_bonus(self.stats.n_sa(s, a), t_k, model.variance(s, a))?;
                min_bonus = min_bonus.min(b);
                max_bonus = max_bonus.max(b);
                rewards.push(model.r_bar(s, a) + b);
            }
        }
        let empirical = model.to_mdp(rewards, self.cfg.r_max)?;
        let augmented = augment(&empirical);
        let gamma = self.stats.contraction_bound(s_ref);
        debug_assert!(
            scopt::ergodic_coefficient(&empirical) <= gamma + 1e-12,
            "ergodic coefficient exceeds the count-based bound"
        );
        let epsilon = self.cfg.r_max / (t_k as f64).sqrt();
        let plan_cfg = ScOptConfig {
            span_cap: self.cfg.span_cap,
            accuracy: epsilon,
            reference_state: s_ref,
            max_iter: PLANNER_MAX_ITER,
            contraction_factor: Some(gamma),
        };
        let plan = scopt::scopt(&augmented, &plan_cfg)?;
        self.policy = project_policy(&plan.policy)?;
        self.episode += 1;
        self.planner_gain = plan.gain_estimate;
        self.epsilon = epsilon;
        self.log.push(EpisodeLog {
            k: self.episode,
            t_k,
            planner_gain: plan.gain_estimate,
            epsilon,
            iterations: plan.iterations,
            contraction: gamma,
            max_iterate_span: plan.max_iterate_span,
            min_bonus,
            max_bonus,
        });
        Ok(())
    }
}

impl Learner<usize> for ScalPlus {
    fn act(&mut self, s: usize) -> Result<usize> {
        if s >= self.params.num_states {
            return Err(Error::BadParams(format!("state {s} out of range")));
        }
        Ok(seeding::sample_index(self.policy.row(s), &mut self.rng))
    }

    fn observe(&mut self, s: usize, a: usize, reward: f64, s_next: usize) -> Result<bool> {
        self.stats.record(s, a, reward, s_next)?;
        let threshold = self.stats.n_sa(s, a).max(1);
        if self.stats.nu_sa(s, a) >= threshold {
            self.stats.end_episode();
            self.start_episode()?;
            return Ok(true);
        }
        Ok(false)
    }

    fn episode(&self) -> usize {
        self.episode
    }

    fn label(&self, s: usize) -> usize {
        s
    }

    fn episode_log(&self) -> &[EpisodeLog] {
        &self.log
    }
}

/// Baseline choosing every action uniformly at random.
#[derive(Debug, Clone)]
pub struct UniformRandom {
    num_actions: usize,
    rng: StreamRng,
    label_intervals: usize,
}

impl UniformRandom {
    pub fn new(num_actions: usize, seed: u64) -> Self {
        Self {
            num_actions,
            rng: seeding::stream(seed, Role::Agent),
            label_intervals: 1,
        }
    }

    /// Number of equal intervals used to label continuous states in traces.
    pub fn with_label_intervals(mut self, intervals: usize) -> Self {
        self.label_intervals = intervals.max(1);
        self
    }

    fn draw(&mut self) -> usize {
        use rand::Rng;
        self.rng.random_range(0..self.num_actions)
    }
}

impl Learner<usize> for UniformRandom {
    fn act(&mut self, _s: usize) -> Result<usize> {
        Ok(self.draw())
    }

    fn observe(&mut self, _: usize, _: usize, _: f64, _: usize) -> Result<bool> {
        Ok(false)
    }

    fn episode(&self) -> usize {
        1
    }

    fn label(&self, s: usize) -> usize {
        s
    }
}

impl Learner<f64> for UniformRandom {
    fn act(&mut self, _s: f64) -> Result<usize> {
        Ok(self.draw())
    }

    fn observe(&mut self, _: f64, _: usize, _: f64, _: f64) -> Result<bool> {
        Ok(false)
    }

    fn episode(&self) -> usize {
        1
    }

    fn label(&self, s: f64) -> usize {
        crate::continuous::Discretization::new(self.label_intervals)
            .map(|d| d.index(s).unwrap_or(0))
            .unwrap_or(0)
    }
}

/// Plays a fixed stationary policy; used for baselines and oracle runs.
#[derive(Debug, Clone)]
pub struct FixedPolicy {
    policy: RandomizedPolicy,
    rng: StreamRng,
}

impl FixedPolicy {
    pub fn new(policy: RandomizedPolicy, seed: u64) -> Self {
        Self {
            policy,
            rng: seeding::stream(seed, Role::Agent),
        }
    }
}

impl Learner<usize> for FixedPolicy {
    fn act(&mut self, s: usize) -> Result<usize> {
        Ok(seeding::sample_index(self.policy.row(s), &mut self.rng))
    }

    fn observe(&mut self, _: usize, _: usize, _: f64, _: usize) -> Result<bool> {
        Ok(false)
    }

    fn episode(&self) -> usize {
        1
    }

    fn label(&self, s: usize) -> usize {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> AgentConfig {
        AgentConfig::new(1.0, 0.05, 1.0, 3)
    }

    #[test]
    fn first_episode_plans_on_bonus_only_model() {
        let agent = ScalPlus::new(2, 2, cfg()).unwrap();
        // No data: every pair jumps to the reference state with the capped
        // bonus 2c + r_max as reward.
        assert!((agent.planner_gain() - 3.0).abs() < 1e-9);
        assert_eq!(agent.episode(), 1);
        assert_eq!(agent.epsilon(), 1.0);
    }

    #[test]
    fn first_visit_ends_episode() {
        let mut agent = ScalPlus::new(2, 1, cfg()).unwrap();
        assert!(agent.observe(0, 0, 0.0, 1).unwrap());
        assert_eq!(agent.episode(), 2);
        assert_eq!(agent.stats().n_sa(0, 0), 1);
    }

    #[test]
    fn episode_ends_when_count_doubles() {
        let mut agent = ScalPlus::new(1, 1, cfg()).unwrap();
        // N goes 0 -> 1 -> 2 -> 4.
        assert!(agent.observe(0, 0, 0.0, 0).unwrap());
        assert!(agent.observe(0, 0, 0.0, 0).unwrap());
        assert!(!agent.observe(0, 0, 0.0, 0).unwrap());
        assert!(agent.observe(0, 0, 0.0, 0).unwrap());
        assert_eq!(agent.stats().n_sa(0, 0), 4);
        let ended: Vec<bool> = (0..4).map(|_| agent.observe(0, 0, 0.0, 0).unwrap()).collect();
        assert_eq!(ended, vec![false, false, false, true]);
    }

    #[test]
    fn epsilon_scales_as_inverse_root_of_episode_start() {
        let mut agent = ScalPlus::new(1, 1, cfg()).unwrap();
        for _ in 0..40 {
            agent.observe(0, 0, 0.5, 0).unwrap();
        }
        let log = agent.episode_log();
        assert!(log.len() >= 5);
        for e in log {
            assert!((e.epsilon * (e.t_k as f64).sqrt() - 1.0).abs() < 1e-12);
        }
        // Episodes start at t_k = 1, 2, 3, 5, 9, ...
        let (e2, e9) = (log[1].epsilon, log[4].epsilon);
        assert_eq!((log[1].t_k, log[4].t_k), (2, 9));
        assert!((e2 / e9 - (9.0f64 / 2.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn deterministic_policy_always_acts_the_same() {
        let pi = RandomizedPolicy::deterministic(3, &[2, 0]).unwrap();
        let mut agent = FixedPolicy::new(pi, 9);
        for _ in 0..50 {
            assert_eq!(agent.act(0).unwrap(), 2);
            assert_eq!(agent.act(1).unwrap(), 0);
        }
    }

    #[test]
    fn uniform_sampling_is_reproducible() {
        let draw = |seed| {
            let mut agent = FixedPolicy::new(RandomizedPolicy::uniform(1, 2), seed);
            (0..64).map(|_| agent.act(0).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(draw(11), draw(11));
        assert_ne!(draw(11), draw(12));
    }

    #[test]
    fn config_is_validated() {
        assert!(ScalPlus::new(2, 2, AgentConfig::new(1.0, 1.0, 1.0, 0)).is_err());
        assert!(ScalPlus::new(2, 2, AgentConfig::new(0.0, 0.1, 1.0, 0)).is_err());
        let mut bad_ref = cfg();
        bad_ref.reference_state = 5;
        assert!(ScalPlus::new(2, 2, bad_ref).is_err());
    }
}
