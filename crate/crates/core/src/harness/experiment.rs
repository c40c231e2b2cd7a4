//! Multi-seed experiments and CSV output.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::agent::{AgentConfig, EpisodeLog, Learner, ScalPlus, UniformRandom};
use crate::continuous::{choose_num_intervals, ContinuousScalPlus, Discretization, HolderEnv};
use crate::error::{Error, Result};
use crate::harness::config::{Algorithm, EnvKind, ExperimentConfig};
use crate::harness::env::{chain_env, random_mdp, two_cycle, DiscreteEnv, SmoothEnv};
use crate::harness::sim::{csv_err, simulate, RegretTrace};
use crate::mdp::DiscreteMdp;

/// Final numbers of one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedSummary {
    pub seed: u64,
    pub horizon: u64,
    pub final_regret: f64,
    pub episodes: usize,
    pub mean_planning_iterations: f64,
}

/// Trace and planner log of one seed.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub trace: RegretTrace,
    pub log: Vec<EpisodeLog>,
}

impl SeedRun {
    pub fn summary(&self, seed: u64) -> SeedSummary {
        SeedSummary {
            seed,
            horizon: self.trace.horizon(),
            final_regret: self.trace.final_regret(),
            episodes: self.trace.episodes,
            mean_planning_iterations: self.trace.mean_planning_iterations,
        }
    }
}

/// The environment described by a config, built once per experiment.
#[derive(Debug, Clone)]
pub enum BuiltEnv {
    Discrete(DiscreteEnv),
    Smooth(SmoothEnv),
}

pub fn build_env(cfg: &ExperimentConfig) -> Result<BuiltEnv> {
    let mdp: DiscreteMdp = match cfg.env {
        EnvKind::File => {
            let path = cfg
                .env_file
                .as_ref()
                .ok_or_else(|| Error::Config("missing env_file".into()))?;
            DiscreteMdp::load(path)?
        }
        EnvKind::Random => random_mdp(
            cfg.env_states,
            cfg.env_actions,
            cfg.env_gamma.unwrap_or(cfg.env_states),
            cfg.env_seed,
        )?,
        EnvKind::TwoCycle => two_cycle(),
        EnvKind::Chain => chain_env(cfg.env_states)?,
        EnvKind::Smooth => return Ok(BuiltEnv::Smooth(SmoothEnv::new(cfg.holder_l, cfg.holder_alpha)?)),
    };
    Ok(BuiltEnv::Discrete(DiscreteEnv::new(mdp, cfg.env_reward)?))
}

fn agent_config(cfg: &ExperimentConfig, r_max: f64, seed: u64) -> AgentConfig {
    AgentConfig {
        span_cap: cfg.span_cap,
        delta: cfg.delta,
        r_max,
        bonus_variant: cfg.bonus,
        capped_bonus: cfg.bonus_capped,
        reference_state: cfg.reference_state,
        seed,
    }
}

fn drive<E, L>(env: &E, mut learner: L, horizon: u64, seed: u64) -> Result<SeedRun>
where
    E: crate::harness::env::Environment,
    L: Learner<E::State>,
{
    let trace = simulate(env, &mut learner, horizon, seed)?;
    Ok(SeedRun {
        trace,
        log: learner.episode_log().to_vec(),
    })
}

/// Interval count used by C-SCAL+ (and for labelling baseline traces).
pub fn interval_count(cfg: &ExperimentConfig, env: &SmoothEnv) -> usize {
    let h = env.holder();
    cfg.num_intervals
        .unwrap_or_else(|| choose_num_intervals(cfg.horizon, HolderEnv::num_actions(env), h.lipschitz, h.alpha))
}

/// Runs one seed of a validated config on a prebuilt environment.
pub fn run_seed(cfg: &ExperimentConfig, env: &BuiltEnv, seed: u64) -> Result<SeedRun> {
    match env {
        BuiltEnv::Discrete(env) => {
            let mdp = env.mdp();
            match cfg.algorithm {
                Algorithm::ScalPlus => {
                    let agent = ScalPlus::new(
                        mdp.num_states(),
                        mdp.num_actions(),
                        agent_config(cfg, mdp.r_max(), seed),
                    )?;
                    drive(env, agent, cfg.horizon, seed)
                }
                Algorithm::Random => drive(env, UniformRandom::new(mdp.num_actions(), seed), cfg.horizon, seed),
                Algorithm::CScalPlus => Err(Error::Config("c-scal-plus needs the smooth environment".into())),
            }
        }
        BuiltEnv::Smooth(env) => {
            let intervals = interval_count(cfg, env);
            let na = HolderEnv::num_actions(env);
            match cfg.algorithm {
                Algorithm::CScalPlus => {
                    let agent = ContinuousScalPlus::new(
                        Discretization::new(intervals)?,
                        na,
                        env.holder(),
                        agent_config(cfg, env.r_max(), seed),
                    )?;
                    drive(env, agent, cfg.horizon, seed)
                }
                Algorithm::Random => {
                    let agent = UniformRandom::new(na, seed).with_label_intervals(intervals);
                    drive(env, agent, cfg.horizon, seed)
                }
                Algorithm::ScalPlus => Err(Error::Config("scal-plus needs a discrete environment".into())),
            }
        }
    }
}

pub fn trace_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("trace_seed{seed}.csv"))
}

pub fn episode_log_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("episodes_seed{seed}.csv"))
}

pub fn summary_path(dir: &Path) -> PathBuf {
    dir.join("summary.csv")
}

fn output_files(cfg: &ExperimentConfig, dir: &Path) -> Vec<PathBuf> {
    let mut files = vec![summary_path(dir)];
    for &seed in &cfg.seeds {
        files.push(trace_path(dir, seed));
        if cfg.verbose {
            files.push(episode_log_path(dir, seed));
        }
    }
    files
}

fn write_episode_log(path: &Path, log: &[EpisodeLog]) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record([
        "k",
        "t_k",
        "planner_gain",
        "epsilon",
        "iterations",
        "contraction",
        "max_iterate_span",
        "min_bonus",
        "max_bonus",
    ])
    .map_err(csv_err)?;
    for e in log {
        w.write_record(&[
            e.k.to_string(),
            e.t_k.to_string(),
            e.planner_gain.to_string(),
            e.epsilon.to_string(),
            e.iterations.to_string(),
            e.contraction.to_string(),
            e.max_iterate_span.to_string(),
            e.min_bonus.to_string(),
            e.max_bonus.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary(path: &Path, rows: &[SeedSummary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(["seed", "T", "final_regret", "episodes", "mean_planning_iterations"])
        .map_err(csv_err)?;
    for r in rows {
        w.write_record(&[
            r.seed.to_string(),
            r.horizon.to_string(),
            r.final_regret.to_string(),
            r.episodes.to_string(),
            r.mean_planning_iterations.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Runs every seed (in parallel) and writes one trace per seed plus
/// `summary.csv` into the output directory. Existing files are only
/// replaced with `force`.
pub fn run_experiment(cfg: &ExperimentConfig, force: bool) -> Result<Vec<SeedSummary>> {
    cfg.validate()?;
    let dir = cfg.output_dir();
    if !force {
        if let Some(existing) = output_files(cfg, &dir).into_iter().find(|p| p.exists()) {
            return Err(Error::Io(std::io::Error::new(
                std::io::ErrorKind::AlreadyExists,
                format!("{} exists; pass --force to overwrite", existing.display()),
            )));
        }
    }
    let env = build_env(cfg)?;
    fs::create_dir_all(&dir)?;
    let rows = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let run = run_seed(cfg, &env, seed)?;
            let file = BufWriter::new(File::create(trace_path(&dir, seed))?);
            run.trace.write_csv(file, cfg.checkpoint_stride)?;
            if cfg.verbose {
                write_episode_log(&episode_log_path(&dir, seed), &run.log)?;
            }
            Ok(run.summary(seed))
        })
        .collect::<Result<Vec<_>>>()?;
    write_summary(&summary_path(&dir), &rows)?;
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SweepParam {
    SpanCap,
    Delta,
}

/// Runs the experiment once per value of `param`, each into its own
/// subdirectory `<output>/<param>_<value>`.
pub fn sweep(
    cfg: &ExperimentConfig,
    param: SweepParam,
    values: &[f64],
    force: bool,
) -> Result<Vec<(f64, Vec<SeedSummary>)>> {
    let base = cfg.output_dir();
    values
        .iter()
        .map(|&value| {
            let mut run = cfg.clone();
            let name = match param {
                SweepParam::SpanCap => {
                    run.span_cap = value;
                    "span_cap"
                }
                SweepParam::Delta => {
                    run.delta = value;
                    "delta"
                }
            };
            run.output = Some(base.join(format!("{name}_{value}")));
            Ok((value, run_experiment(&run, force)?))
        })
        .collect()
}
