//! Experiment configuration: a flat TOML file whose keys can all be
//! overridden from the command line.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bonus::BonusVariant;
use crate::error::{Error, Result};
use crate::harness::env::RewardKind;

/// Environment variable giving the default output directory.
pub const OUTPUT_DIR_VAR: &str = "SCALPLUS_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum EnvKind {
    /// MDP read from `env_file`.
    File,
    /// `random_mdp(env_states, env_actions, env_gamma, env_seed)`.
    Random,
    TwoCycle,
    /// RiverSwim-style chain with `env_states` states.
    Chain,
    /// Continuous smooth environment with `holder_L`, `holder_alpha`.
    Smooth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    ScalPlus,
    CScalPlus,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub env: EnvKind,
    pub env_states: usize,
    pub env_actions: usize,
    /// Support size of random MDPs; defaults to `env_states`.
    pub env_gamma: Option<usize>,
    pub env_seed: u64,
    pub env_file: Option<PathBuf>,
    pub env_reward: RewardKind,
    #[serde(rename = "holder_L")]
    pub holder_l: f64,
    pub holder_alpha: f64,

    pub algorithm: Algorithm,
    pub span_cap: f64,
    pub delta: f64,
    pub bonus: BonusVariant,
    pub bonus_capped: bool,
    pub reference_state: usize,
    /// Overrides the horizon-tuned interval count of C-SCAL+.
    pub num_intervals: Option<usize>,

    pub horizon: u64,
    pub seeds: Vec<u64>,
    /// Output directory; defaults to `$SCALPLUS_OUTPUT_DIR` or `results`.
    pub output: Option<PathBuf>,
    pub checkpoint_stride: u64,
    /// Also write per-episode planner logs.
    pub verbose: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            env: EnvKind::Chain,
            env_states: 6,
            env_actions: 2,
            env_gamma: None,
            env_seed: 0,
            env_file: None,
            env_reward: RewardKind::Bernoulli,
            holder_l: 4.0,
            holder_alpha: 1.0,
            algorithm: Algorithm::ScalPlus,
            span_cap: 5.0,
            delta: 0.05,
            bonus: BonusVariant::Hoeffding,
            bonus_capped: true,
            reference_state: 0,
            num_intervals: None,
            horizon: 10_000,
            seeds: vec![0],
            output: None,
            checkpoint_stride: 1,
            verbose: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml(&text)?;
        // Relative MDP paths are resolved against the config file.
        if let (Some(file), Some(dir)) = (&cfg.env_file, path.parent()) {
            if file.is_relative() {
                cfg.env_file = Some(dir.join(file));
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Output directory after applying the environment default.
    pub fn output_dir(&self) -> PathBuf {
        self.output
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_DIR_VAR).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("results"))
    }

    pub fn is_continuous(&self) -> bool {
        self.env == EnvKind::Smooth
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.horizon < 1 {
            return fail("horizon must be at least 1".into());
        }
        if self.seeds.is_empty() {
            return fail("seeds must be non-empty".into());
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return fail(format!("delta {} not in (0, 1)", self.delta));
        }
        if !(self.span_cap > 0.0) {
            return fail(format!("span_cap {} must be > 0", self.span_cap));
        }
        if self.env == EnvKind::File && self.env_file.is_none() {
            return fail("env = \"file\" needs env_file".into());
        }
        match (self.is_continuous(), self.algorithm) {
            (true, Algorithm::ScalPlus) => return fail("scal-plus needs a discrete environment".into()),
            (false, Algorithm::CScalPlus) => return fail("c-scal-plus needs the smooth environment".into()),
            _ => {}
        }
        if self.num_intervals == Some(0) {
            return fail("num_intervals must be positive".into());
        }
        Ok(())
    }
}
