//! Environments, simulation, regret traces, experiment configuration and
//! CSV output.

pub mod config;
pub mod env;
pub mod experiment;
pub mod sim;

pub use config::{Algorithm, EnvKind, ExperimentConfig};
pub use env::{chain_env, random_mdp, two_cycle, AlignedEnv, DiscreteEnv, Environment, RewardKind, SmoothEnv};
pub use experiment::{run_experiment, run_seed, SeedSummary};
pub use sim::{simulate, RegretTrace, StepRecord};
