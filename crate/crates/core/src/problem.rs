//! The observation model seen by the samplers.
//!
//! A [`Problem`] flattens a trajectory set into indicator sites and action
//! steps, and caches the transition likelihood of every action at every step.
//! Finite spaces get one site per system state, visited or not; continuous
//! spaces get one site per distinct trajectory point, so exact duplicates share
//! a site.

use std::collections::HashMap;

use crate::dists::{log_transition_density, LOG_WEIGHT_FLOOR};
use crate::error::{Error, Result};
use crate::trajectory::Trajectory;
use crate::types::{State, StateSpace, TransitionModel};

#[derive(Debug, Clone)]
pub struct Problem {
    n_actions: usize,
    positions: Vec<[f64; 2]>,
    /// Site of every trajectory state, in trajectory order.
    state_sites: Vec<usize>,
    /// Site of every action step.
    step_sites: Vec<usize>,
    /// `lik[t * A + j]`: transition likelihood of action `j` at step `t`,
    /// scaled so the largest entry of each step is 1.
    lik: Vec<f64>,
    /// Same values in log space, unscaled.
    loglik: Vec<f64>,
    site_steps: Vec<Vec<usize>>,
}

impl Problem {
    pub fn from_trajectory(
        traj: &Trajectory,
        model: &TransitionModel,
        space: &StateSpace,
    ) -> Result<Self> {
        let n_actions = model.n_actions();
        let (positions, state_sites) = match (space, model, traj.is_continuous()) {
            (StateSpace::Continuous2D, TransitionModel::GaussianKernel { .. }, true) => {
                continuous_sites(traj.states())
            }
            (StateSpace::Continuous2D, _, _) => {
                return Err(Error::Structural(
                    "continuous space needs point states and a Gaussian kernel".into(),
                ))
            }
            (_, TransitionModel::FiniteTable(table), false) => {
                let n = space.n_states().expect("finite space");
                if table.n_states() != n {
                    return Err(Error::Structural(format!(
                        "transition table has {} states, space has {n}",
                        table.n_states()
                    )));
                }
                let positions = (0..n).map(|i| space.position(i)).collect::<Result<Vec<_>>>()?;
                let mut sites = Vec::with_capacity(traj.len());
                for s in traj.states() {
                    let i = s.index().expect("finite trajectory");
                    if i >= n {
                        return Err(Error::Domain(format!("state {i} outside the {n}-state space")));
                    }
                    sites.push(i);
                }
                (positions, sites)
            }
            _ => {
                return Err(Error::Structural(
                    "finite space needs index states and a transition table".into(),
                ))
            }
        };

        let n_steps = traj.n_transitions();
        let mut step_sites = Vec::with_capacity(n_steps);
        let mut lik = Vec::with_capacity(n_steps * n_actions);
        let mut loglik = Vec::with_capacity(n_steps * n_actions);
        let mut row = vec![0.0; n_actions];
        for t in traj.action_indices() {
            let (s, next) = (traj.states()[t], traj.states()[t + 1]);
            for (j, r) in row.iter_mut().enumerate() {
                *r = log_transition_density(model, s, j, next)?;
            }
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if max == f64::NEG_INFINITY {
                log::warn!(
                    "transition at step {t} is impossible under every action; \
                     using prior-only action weights there"
                );
                row.iter_mut().for_each(|r| *r = 0.0);
            }
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            for &l in &row {
                let d = l - max;
                lik.push(if d < LOG_WEIGHT_FLOOR { 0.0 } else { d.exp() });
            }
            loglik.extend_from_slice(&row);
            step_sites.push(state_sites[t]);
        }
        Self::assemble(n_actions, positions, state_sites, step_sites, lik, loglik)
    }

    /// Builds a problem directly from sites and per-step log-likelihoods.
    /// `step_loglik` holds one row of `n_actions` entries per step.
    pub fn from_parts(
        n_actions: usize,
        positions: Vec<[f64; 2]>,
        step_sites: Vec<usize>,
        step_loglik: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if step_sites.len() != step_loglik.len() {
            return Err(Error::Structural("one likelihood row per step required".into()));
        }
        let mut lik = Vec::new();
        let mut loglik = Vec::new();
        for row in &step_loglik {
            if row.len() != n_actions {
                return Err(Error::Structural("likelihood row has wrong length".into()));
            }
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !max.is_finite() {
                return Err(Error::Domain("likelihood row has no finite entry".into()));
            }
            lik.extend(row.iter().map(|l| {
                let d = l - max;
                if d < LOG_WEIGHT_FLOOR {
                    0.0
                } else {
                    d.exp()
                }
            }));
            loglik.extend_from_slice(row);
        }
        let state_sites = step_sites.clone();
        Self::assemble(n_actions, positions, state_sites, step_sites, lik, loglik)
    }

    fn assemble(
        n_actions: usize,
        positions: Vec<[f64; 2]>,
        state_sites: Vec<usize>,
        step_sites: Vec<usize>,
        lik: Vec<f64>,
        loglik: Vec<f64>,
    ) -> Result<Self> {
        if n_actions == 0 {
            return Err(Error::Domain("need at least one action".into()));
        }
        if positions.is_empty() {
            return Err(Error::Structural("problem has no sites".into()));
        }
        let mut site_steps = vec![Vec::new(); positions.len()];
        for (t, &i) in step_sites.iter().enumerate() {
            if i >= positions.len() {
                return Err(Error::Structural(format!("step {t} refers to missing site {i}")));
            }
            site_steps[i].push(t);
        }
        Ok(Self {
            n_actions,
            positions,
            state_sites,
            step_sites,
            lik,
            loglik,
            site_steps,
        })
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_sites(&self) -> usize {
        self.positions.len()
    }

    pub fn n_steps(&self) -> usize {
        self.step_sites.len()
    }

    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }

    pub fn state_sites(&self) -> &[usize] {
        &self.state_sites
    }

    pub fn step_site(&self, t: usize) -> usize {
        self.step_sites[t]
    }

    pub fn step_sites(&self) -> &[usize] {
        &self.step_sites
    }

    /// Steps whose action is taken at site `i`.
    pub fn site_steps(&self, i: usize) -> &[usize] {
        &self.site_steps[i]
    }

    /// Scaled transition likelihoods of every action at step `t`.
    pub fn lik(&self, t: usize) -> &[f64] {
        &self.lik[t * self.n_actions..(t + 1) * self.n_actions]
    }

    pub fn loglik(&self, t: usize) -> &[f64] {
        &self.loglik[t * self.n_actions..(t + 1) * self.n_actions]
    }

    /// Index of the site closest to `p` (first one on ties).
    pub fn nearest_site(&self, p: [f64; 2]) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (i, q) in self.positions.iter().enumerate() {
            let d = (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2);
            if d < best.0 {
                best = (d, i);
            }
        }
        best.1
    }
}

fn continuous_sites(states: &[State]) -> (Vec<[f64; 2]>, Vec<usize>) {
    let mut index: HashMap<(u64, u64), usize> = HashMap::new();
    let mut positions = Vec::new();
    let mut sites = Vec::with_capacity(states.len());
    for s in states {
        let p = s.point().expect("continuous trajectory");
        // +0.0 folds -0.0 onto 0.0 so the two compare equal as keys.
        let key = ((p[0] + 0.0).to_bits(), (p[1] + 0.0).to_bits());
        let i = *index.entry(key).or_insert_with(|| {
            positions.push(p);
            positions.len() - 1
        });
        sites.push(i);
    }
    (positions, sites)
}
