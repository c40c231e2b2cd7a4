//! Span-constrained planning and exploration-bonus learning for
//! average-reward MDPs.
//!
//! * [`mdp`]: finite MDPs, Bellman operator and the exact gain/bias oracle.
//! * [`scopt`]: the truncated operator `T_c` and the ScOpt planner.
//! * [`statistics`], [`bonus`]: visit counts, empirical models, bonuses.
//! * [`agent`]: the SCAL+ learner; [`continuous`]: its aggregated variant
//!   for states in `[0, 1]`.
//! * [`harness`]: environments, simulation, regret and experiments.

pub mod agent;
pub mod bonus;
pub mod continuous;
pub mod error;
pub mod harness;
pub mod mdp;
pub mod scopt;
pub mod seeding;
pub mod statistics;

pub use error::{Error, Result};
