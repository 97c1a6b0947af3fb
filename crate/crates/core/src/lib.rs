//! Bayesian policy recognition from state-only demonstrations.
//!
//! Given observed state trajectories of an expert and a known transition
//! model, the samplers in [`samplers`] infer the latent actions, a partition
//! of the state space into regions, and one stochastic local controller per
//! region. Parametric (static, finite mixture) and nonparametric (Dirichlet
//! process mixture, distance-dependent CRP) variants are provided, each in a
//! plain and, where applicable, a collapsed form.
//!
//! [`envs`] contains the two benchmark systems, [`metrics`] the earth mover's
//! distance evaluation and [`harness`] the Monte Carlo experiment driver.

pub mod dists;
pub mod envs;
pub mod error;
pub mod exec;
pub mod harness;
pub mod metrics;
pub mod priors;
pub mod problem;
pub mod samplers;
pub mod stats;
pub mod trajectory;
pub mod types;

pub use error::{Error, Result};
pub use exec::Execution;
pub use problem::Problem;
pub use stats::{Delta, SuffStats};
pub use trajectory::Trajectory;
pub use types::{ActionSet, FiniteTable, LocalController, State, StateSpace, TransitionModel};
