//! Benchmark tasks: data generation and evaluation sets for one run.

use crate::dists::RngStream;
use crate::envs::{perturb_model, sample_reward_world, value_iteration, CircularWorld, GridWorld};
use crate::error::{Error, Result};
use crate::metrics::EvalSet;
use crate::problem::Problem;
use crate::trajectory::Trajectory;
use crate::types::{ActionSet, FiniteTable, LocalController, StateSpace, TransitionModel};

// Sub-stream tags below a task seed.
const TAG_REWARDS: u64 = 0;
const TAG_PERTURB: u64 = 1;
const TAG_TRAJECTORIES: u64 = 2;

/// Which benchmark world an experiment runs in.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvSpec {
    Circular {
        sigma: f64,
        n_actions: usize,
        reversal_radius: f64,
        n_traj: usize,
        length: usize,
    },
    Grid {
        half_width: usize,
        sigma: f64,
        n_actions: usize,
        discount: f64,
        /// Perturbation of the learner's transition model.
        eta: f64,
        n_traj: usize,
        length: usize,
    },
}

impl EnvSpec {
    /// The continuous example with its standard settings.
    pub fn circular() -> Self {
        EnvSpec::Circular { sigma: 0.2, n_actions: 24, reversal_radius: 5.0, n_traj: 10, length: 100 }
    }

    /// The reward-driven grid world with its standard settings.
    pub fn grid() -> Self {
        EnvSpec::Grid {
            half_width: 10,
            sigma: 1.0,
            n_actions: 8,
            discount: 0.9,
            eta: 0.0,
            n_traj: 10,
            length: 10,
        }
    }

    pub fn n_actions(&self) -> usize {
        match *self {
            EnvSpec::Circular { n_actions, .. } | EnvSpec::Grid { n_actions, .. } => n_actions,
        }
    }

    pub fn is_grid(&self) -> bool {
        matches!(self, EnvSpec::Grid { .. })
    }
}

/// A grid world with a reward-optimal expert and the learner's (possibly
/// perturbed) copy of the dynamics.
#[derive(Debug, Clone)]
pub struct GridTask {
    pub world: GridWorld,
    pub rewards: Vec<f64>,
    pub policy: Vec<usize>,
    pub assumed: FiniteTable,
}

impl GridTask {
    pub fn new(half_width: usize, sigma: f64, n_actions: usize, discount: f64, eta: f64, seed: u64) -> Result<Self> {
        let world = GridWorld::new(half_width, sigma, n_actions)?;
        let rewards = sample_reward_world(world.n_states(), &mut RngStream::derive(seed, &[TAG_REWARDS]))?;
        let policy = value_iteration(&world.table, &rewards, discount)?.policy;
        let assumed = perturb_model(&world.table, eta, &mut RngStream::derive(seed, &[TAG_PERTURB]))?;
        Ok(Self { world, rewards, policy, assumed })
    }

    pub fn expert(&self, s: usize) -> LocalController {
        LocalController::point_mass(self.world.actions.count(), self.policy[s])
    }

    pub fn space(&self) -> StateSpace {
        StateSpace::FiniteGrid { half_width: self.world.half_width }
    }

    pub fn positions(&self) -> Result<Vec<[f64; 2]>> {
        let space = self.space();
        (0..self.world.n_states()).map(|i| space.position(i)).collect()
    }
}

/// The world behind one run.
#[derive(Debug, Clone)]
pub enum World {
    Circular(CircularWorld),
    Grid(GridTask),
}

impl World {
    pub fn new(env: &EnvSpec, seed: u64) -> Result<Self> {
        Ok(match *env {
            EnvSpec::Circular { sigma, n_actions, reversal_radius, .. } => World::Circular(CircularWorld {
                step: 1.0,
                sigma,
                actions: ActionSet::new(n_actions)?,
                reversal_radius,
            }),
            EnvSpec::Grid { half_width, sigma, n_actions, discount, eta, .. } => {
                World::Grid(GridTask::new(half_width, sigma, n_actions, discount, eta, seed)?)
            }
        })
    }

    pub fn actions(&self) -> ActionSet {
        match self {
            World::Circular(w) => w.actions,
            World::Grid(t) => t.world.actions,
        }
    }

    pub fn simulate(&self, n_traj: usize, length: usize, seed: u64) -> Result<Trajectory> {
        if length < 2 {
            return Err(Error::Config(format!("trajectories need at least 2 states, got {length}")));
        }
        let mut rng = RngStream::derive(seed, &[TAG_TRAJECTORIES]);
        match self {
            World::Circular(w) => w.simulate(n_traj, length, &mut rng),
            World::Grid(t) => t.world.simulate(|s| t.expert(s), n_traj, length, &mut rng),
        }
    }

    /// The sampler's view of `traj`, under the learner's transition model.
    pub fn problem(&self, traj: &Trajectory) -> Result<Problem> {
        match self {
            World::Circular(w) => {
                Problem::from_trajectory(traj, &w.transition_model()?, &StateSpace::Continuous2D)
            }
            World::Grid(t) => Problem::from_trajectory(
                traj,
                &TransitionModel::FiniteTable(t.assumed.clone()),
                &t.space(),
            ),
        }
    }

    /// Expert action distribution at a site position.
    pub fn expert_at(&self, p: [f64; 2]) -> Result<Vec<f64>> {
        match self {
            World::Circular(w) => Ok(w.expert(p).into_probs()),
            World::Grid(t) => {
                let hw = t.world.half_width;
                let s = crate::types::grid_index(hw, p[0].round() as i64, p[1].round() as i64)
                    .ok_or_else(|| Error::Domain(format!("point {p:?} is off the grid")))?;
                Ok(t.expert(s).into_probs())
            }
        }
    }

    /// Every state visited by the trajectories.
    pub fn trajectory_eval(&self, problem: &Problem) -> Result<EvalSet> {
        let mut sites = problem.state_sites().to_vec();
        sites.sort_unstable();
        sites.dedup();
        let experts = sites
            .iter()
            .map(|&i| self.expert_at(problem.positions()[i]))
            .collect::<Result<Vec<_>>>()?;
        EvalSet::new(sites, experts)
    }

    /// States off the trajectories: a lattice for the continuous world, the
    /// whole grid otherwise.
    pub fn grid_eval(&self, problem: &Problem, extent: f64, spacing: f64) -> Result<EvalSet> {
        match self {
            World::Circular(_) => {
                let pts = EvalSet::lattice(extent, spacing);
                let experts = pts.iter().map(|&p| self.expert_at(p)).collect::<Result<Vec<_>>>()?;
                EvalSet::new(pts.iter().map(|&p| problem.nearest_site(p)).collect(), experts)
            }
            World::Grid(t) => {
                let n = t.world.n_states();
                EvalSet::new((0..n).collect(), (0..n).map(|s| t.expert(s).into_probs()).collect())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circular_run_data() {
        let env = EnvSpec::circular();
        let world = World::new(&env, 1).unwrap();
        let traj = world.simulate(2, 10, 1).unwrap();
        assert_eq!(traj.len(), 20);
        let problem = world.problem(&traj).unwrap();
        let eval = world.trajectory_eval(&problem).unwrap();
        assert_eq!(eval.len(), problem.n_sites());
        let grid = world.grid_eval(&problem, 7.0, 1.0).unwrap();
        assert_eq!(grid.len(), 225);
        assert_eq!(world.simulate(2, 10, 1).unwrap(), traj);
    }

    #[test]
    fn grid_run_data() {
        let env = EnvSpec::Grid { half_width: 3, sigma: 1.0, n_actions: 8, discount: 0.9, eta: 0.2, n_traj: 3, length: 5, };
        let world = World::new(&env, 4).unwrap();
        let World::Grid(task) = &world else { unreachable!() };
        assert_eq!(task.policy.len(), 49);
        assert_ne!(task.assumed, task.world.table);
        task.assumed.check_rows().unwrap();
        let traj = world.simulate(3, 5, 4).unwrap();
        let problem = world.problem(&traj).unwrap();
        assert_eq!(problem.n_sites(), 49);
        let eval = world.trajectory_eval(&problem).unwrap();
        assert!(eval.len() <= 15);
        for (q, &s) in eval.query_sites().iter().enumerate() {
            assert_eq!(eval.expert(q)[task.policy[s]], 1.0);
        }
        assert_eq!(world.grid_eval(&problem, 0.0, 1.0).unwrap().len(), 49);
    }
}
