//! Visit counts, empirical models and the action-duplicating augmentation.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::mdp::{DiscreteMdp, RandomizedPolicy};

/// Running counts of an episodic learner.
///
/// `n_*` and the folded reward sums describe everything observed before the
/// current episode; `nu_*` and the episode sums hold the current episode.
/// [`VisitStatistics::end_episode`] folds the latter into the former.
#[derive(Debug, Clone, PartialEq)]
pub struct VisitStatistics {
    num_states: usize,
    num_actions: usize,
    r_max: f64,
    n_sas: Vec<u64>,
    n_sa: Vec<u64>,
    nu_sas: Vec<u64>,
    nu_sa: Vec<u64>,
    reward_sum: Vec<f64>,
    reward_sq_sum: Vec<f64>,
    ep_reward_sum: Vec<f64>,
    ep_reward_sq_sum: Vec<f64>,
    t: u64,
    t_k: u64,
}

impl VisitStatistics {
    pub fn new(num_states: usize, num_actions: usize, r_max: f64) -> Self {
        let pairs = num_states * num_actions;
        Self {
            num_states,
            num_actions,
            r_max,
            n_sas: vec![0; pairs * num_states],
            n_sa: vec![0; pairs],
            nu_sas: vec![0; pairs * num_states],
            nu_sa: vec![0; pairs],
            reward_sum: vec![0.0; pairs],
            reward_sq_sum: vec![0.0; pairs],
            ep_reward_sum: vec![0.0; pairs],
            ep_reward_sq_sum: vec![0.0; pairs],
            t: 1,
            t_k: 1,
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    fn pair(&self, s: usize, a: usize) -> usize {
        s * self.num_actions + a
    }

    /// Records one transition in the current episode.
    pub fn record(&mut self, s: usize, a: usize, reward: f64, s_next: usize) -> Result<()> {
        if s >= self.num_states || s_next >= self.num_states || a >= self.num_actions {
            return Err(Error::BadParams(format!(
                "transition ({s}, {a}, {s_next}) out of range"
            )));
        }
        if !(0.0..=self.r_max).contains(&reward) {
            return Err(Error::RewardOutOfRange { state: s, action: a });
        }
        let i = self.pair(s, a);
        self.nu_sa[i] += 1;
        self.nu_sas[i * self.num_states + s_next] += 1;
        self.ep_reward_sum[i] += reward;
        self.ep_reward_sq_sum[i] += reward * reward;
        self.t += 1;
        Ok(())
    }

    /// Folds the episode counts into the totals and starts a new episode at
    /// the current step.
    pub fn end_episode(&mut self) {
        for (n, nu) in self.n_sa.iter_mut().zip(self.nu_sa.iter_mut()) {
            *n += std::mem::take(nu);
        }
        for (n, nu) in self.n_sas.iter_mut().zip(self.nu_sas.iter_mut()) {
            *n += std::mem::take(nu);
        }
        for (r, e) in self.reward_sum.iter_mut().zip(self.ep_reward_sum.iter_mut()) {
            *r += std::mem::take(e);
        }
        for (r, e) in self.reward_sq_sum.iter_mut().zip(self.ep_reward_sq_sum.iter_mut()) {
            *r += std::mem::take(e);
        }
        self.t_k = self.t;
    }

    /// Visits of `(s, a)` before the current episode.
    pub fn n_sa(&self, s: usize, a: usize) -> u64 {
        self.n_sa[self.pair(s, a)]
    }

    pub fn n_sas(&self, s: usize, a: usize, s_next: usize) -> u64 {
        self.n_sas[self.pair(s, a) * self.num_states + s_next]
    }

    /// Visits of `(s, a)` in the current episode.
    pub fn nu_sa(&self, s: usize, a: usize) -> u64 {
        self.nu_sa[self.pair(s, a)]
    }

    /// Sum of every reward recorded for `(s, a)`, current episode included.
    pub fn reward_sum(&self, s: usize, a: usize) -> f64 {
        let i = self.pair(s, a);
        self.reward_sum[i] + self.ep_reward_sum[i]
    }

    pub fn reward_sq_sum(&self, s: usize, a: usize) -> f64 {
        let i = self.pair(s, a);
        self.reward_sq_sum[i] + self.ep_reward_sq_sum[i]
    }

    /// Index of the next step to be recorded (starts at 1).
    pub fn t(&self) -> u64 {
        self.t
    }

    /// Step at which the current episode started.
    pub fn t_k(&self) -> u64 {
        self.t_k
    }

    /// Empirical model from the counts gathered before the current episode.
    ///
    /// Unvisited pairs get `p_bar = p_hat = indicator(reference)`, zero mean
    /// reward and zero variance.
    pub fn empirical_model(&self, reference_state: usize) -> EmpiricalModel {
        let (ns, na) = (self.num_states, self.num_actions);
        let pairs = ns * na;
        let mut p_bar = vec![0.0; pairs * ns];
        let mut p_hat = vec![0.0; pairs * ns];
        let mut r_bar = vec![0.0; pairs];
        let mut variance = vec![0.0; pairs];
        for i in 0..pairs {
            let n = self.n_sa[i];
            let row = i * ns..(i + 1) * ns;
            if n == 0 {
                p_bar[row.start + reference_state] = 1.0;
                p_hat[row.start + reference_state] = 1.0;
                continue;
            }
            let nf = n as f64;
            for (j, &count) in self.n_sas[row.clone()].iter().enumerate() {
                p_bar[row.start + j] = count as f64 / nf;
                let attract = if j == reference_state { 1.0 } else { 0.0 };
                p_hat[row.start + j] = (count as f64 + attract) / (nf + 1.0);
            }
            let mean = self.reward_sum[i] / nf;
            r_bar[i] = mean;
            variance[i] = (self.reward_sq_sum[i] / nf - mean * mean).max(0.0);
        }
        EmpiricalModel {
            num_states: ns,
            num_actions: na,
            p_bar,
            r_bar,
            p_hat,
            variance,
            reference_state,
        }
    }

    /// Certified contraction factor `1 - min_{s,a} (N(s,a,ref)+1)/(N(s,a)+1)`
    /// of the biased empirical model.
    pub fn contraction_bound(&self, reference_state: usize) -> f64 {
        let eta = (0..self.n_sa.len())
            .map(|i| {
                let to_ref = self.n_sas[i * self.num_states + reference_state];
                (to_ref as f64 + 1.0) / (self.n_sa[i] as f64 + 1.0)
            })
            .fold(f64::INFINITY, f64::min);
        1.0 - eta
    }

    /// Human-readable dump of the counts and the empirical model. The layout
    /// is meant for debugging and may change.
    pub fn dump(&self, reference_state: usize) -> String {
        let model = self.empirical_model(reference_state);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "t {} t_k {} states {} actions {} reference {}",
            self.t, self.t_k, self.num_states, self.num_actions, reference_state
        );
        for s in 0..self.num_states {
            for a in 0..self.num_actions {
                let i = self.pair(s, a);
                let _ = writeln!(
                    out,
                    "pair {s} {a} n {} nu {} r_bar {} var {}",
                    self.n_sa[i], self.nu_sa[i], model.r_bar[i], model.variance[i]
                );
                let counts: Vec<String> = self.n_sas[i * self.num_states..(i + 1) * self.num_states]
                    .iter()
                    .map(u64::to_string)
                    .collect();
                let _ = writeln!(out, "  counts {}", counts.join(" "));
                let hat: Vec<String> = model.p_hat(s, a).iter().map(f64::to_string).collect();
                let _ = writeln!(out, "  p_hat {}", hat.join(" "));
            }
        }
        out
    }
}

/// Snapshot of empirical estimates at the start of an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalModel {
    num_states: usize,
    num_actions: usize,
    p_bar: Vec<f64>,
    r_bar: Vec<f64>,
    p_hat: Vec<f64>,
    variance: Vec<f64>,
    reference_state: usize,
}

impl EmpiricalModel {
    fn row(&self, s: usize, a: usize) -> std::ops::Range<usize> {
        let start = (s * self.num_actions + a) * self.num_states;
        start..start + self.num_states
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn reference_state(&self) -> usize {
        self.reference_state
    }

    pub fn p_bar(&self, s: usize, a: usize) -> &[f64] {
        &self.p_bar[self.row(s, a)]
    }

    /// Biased estimate `(N p_bar + indicator(ref)) / (N + 1)`.
    pub fn p_hat(&self, s: usize, a: usize) -> &[f64] {
        &self.p_hat[self.row(s, a)]
    }

    pub fn r_bar(&self, s: usize, a: usize) -> f64 {
        self.r_bar[s * self.num_actions + a]
    }

    /// Population variance of the observed rewards.
    pub fn variance(&self, s: usize, a: usize) -> f64 {
        self.variance[s * self.num_actions + a]
    }

    /// MDP with kernel `p_hat` and the given per-pair rewards.
    ///
    /// `r_max` of the result is the larger of `r_max` and the largest reward,
    /// so bonus-inflated rewards are accepted unclipped.
    pub fn to_mdp(&self, rewards: Vec<f64>, r_max: f64) -> Result<DiscreteMdp> {
        let bound = rewards.iter().cloned().fold(r_max, f64::max);
        DiscreteMdp::new(self.num_states, self.num_actions, self.p_hat.clone(), rewards, bound)
    }
}

/// Duplicates every action: action `a` keeps its reward, action `A + a` has
/// the same kernel and zero reward.
pub fn augment(mdp: &DiscreteMdp) -> DiscreteMdp {
    let na = mdp.num_actions();
    DiscreteMdp::from_fn(mdp.num_states(), 2 * na, mdp.r_max(), |s, a| {
        let base = a % na;
        let reward = if a < na { mdp.reward(s, base) } else { 0.0 };
        (reward, mdp.kernel(s, base).to_vec())
    })
    .expect("augmenting a valid MDP yields a valid MDP")
}

/// Sums the probabilities of the two copies of every action.
pub fn project_policy(aug: &RandomizedPolicy) -> Result<RandomizedPolicy> {
    let na2 = aug.num_actions();
    if !na2.is_multiple_of(2) {
        return Err(Error::BadParams(format!(
            "augmented policy has an odd action count {na2}"
        )));
    }
    let na = na2 / 2;
    let probs = (0..aug.num_states())
        .flat_map(|s| (0..na).map(move |a| aug.prob(s, a) + aug.prob(s, na + a)))
        .collect();
    RandomizedPolicy::new(aug.num_states(), na, probs)
}
