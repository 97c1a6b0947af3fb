//! Benchmark systems: continuous circular motion and the discretized grid world.

mod circular;
mod grid;

pub use circular::{
    expert_policy_circular, optimal_action, sector, step_circular, CircularWorld, SECTORS,
};
pub use grid::{
    discretize_grid, perturb_model, perturbation_factor, sample_reward_world, value_iteration,
    GridWorld, ValueSolution, VALUE_MAX_ITERATIONS, VALUE_TOLERANCE,
};
