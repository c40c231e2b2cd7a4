//! Simulation loop and regret traces.

use std::io::Write;

use crate::agent::Learner;
use crate::error::{Error, Result};
use crate::harness::env::Environment;
use crate::seeding::{self, Role};

/// CSV header of trace files.
pub const TRACE_COLUMNS: [&str; 7] = ["t", "state", "action", "reward", "episode", "cum_reward", "regret"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    /// 1-based step index.
    pub t: u64,
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    /// Episode during which the step was taken.
    pub episode: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace {
    pub records: Vec<StepRecord>,
    /// `cum[t]` is the reward collected in the first `t` steps.
    cum: Vec<f64>,
    pub optimal_gain: f64,
    /// Episodes started, including the one running at the end.
    pub episodes: usize,
    pub mean_planning_iterations: f64,
}

impl RegretTrace {
    pub fn new(optimal_gain: f64) -> Self {
        Self {
            records: Vec::new(),
            cum: vec![0.0],
            optimal_gain,
            episodes: 0,
            mean_planning_iterations: 0.0,
        }
    }

    pub fn push(&mut self, rec: StepRecord) {
        let last = *self.cum.last().expect("cum starts non-empty");
        self.cum.push(last + rec.reward);
        self.records.push(rec);
    }

    pub fn horizon(&self) -> u64 {
        self.records.len() as u64
    }

    pub fn cumulative_reward(&self) -> f64 {
        *self.cum.last().expect("cum starts non-empty")
    }

    /// Reward collected during the first `t` steps.
    pub fn cumulative_reward_at(&self, t: u64) -> f64 {
        self.cum[t as usize]
    }

    /// `t g* - (reward of the first t steps)`.
    pub fn regret_at(&self, t: u64) -> f64 {
        t as f64 * self.optimal_gain - self.cum[t as usize]
    }

    pub fn final_regret(&self) -> f64 {
        self.regret_at(self.horizon())
    }

    /// Writes every `stride`-th step and the last step as CSV.
    pub fn write_csv<W: Write>(&self, out: W, stride: u64) -> Result<()> {
        let stride = stride.max(1);
        let mut w = csv::Writer::from_writer(out);
        w.write_record(TRACE_COLUMNS).map_err(csv_err)?;
        let horizon = self.horizon();
        for rec in &self.records {
            if rec.t % stride != 0 && rec.t != horizon {
                continue;
            }
            w.write_record(&[
                rec.t.to_string(),
                rec.state.to_string(),
                rec.action.to_string(),
                rec.reward.to_string(),
                rec.episode.to_string(),
                self.cum[rec.t as usize].to_string(),
                self.regret_at(rec.t).to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse(format!("{other:?}")),
    }
}

/// Runs `horizon` interaction steps. The environment draws from the
/// environment stream of `seed`; the learner owns its own stream.
pub fn simulate<E, L>(env: &E, learner: &mut L, horizon: u64, seed: u64) -> Result<RegretTrace>
where
    E: Environment + ?Sized,
    L: Learner<E::State> + ?Sized,
{
    if horizon == 0 {
        return Err(Error::Config("horizon must be at least 1".into()));
    }
    let mut rng = seeding::stream(seed, Role::Environment);
    let mut trace = RegretTrace::new(env.optimal_gain());
    trace.records.reserve(horizon as usize);
    trace.cum.reserve(horizon as usize);
    let mut s = env.initial_state();
    for t in 1..=horizon {
        let episode = learner.episode();
        let a = learner.act(s)?;
        if a >= env.num_actions() {
            return Err(Error::BadParams(format!("learner chose invalid action {a}")));
        }
        let (reward, s_next) = env.step(s, a, &mut rng);
        trace.push(StepRecord {
            t,
            state: learner.label(s),
            action: a,
            reward,
            episode,
        });
        learner.observe(s, a, reward, s_next)?;
        s = s_next;
    }
    trace.episodes = learner.episode();
    let log = learner.episode_log();
    if !log.is_empty() {
        trace.mean_planning_iterations = log.iter().map(|e| e.iterations as f64).sum::<f64>() / log.len() as f64;
    }
    Ok(trace)
}
