//! Discretized grid world with a reward-driven optimal expert.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dists::sample_categorical;
use crate::error::{domain, Result};
use crate::trajectory::Trajectory;
use crate::types::{grid_coords, ActionSet, FiniteTable, LocalController, State};

/// Transition table of the grid `{|x|, |y| <= half_width}` whose rows are
/// proportional to the Gaussian step density `N(s' | s + e_a, σ² I)` at the
/// lattice points.
///
/// The density is evaluated on a lattice three times as wide as the grid.
/// Mass at points outside the grid goes to the nearest grid point, i.e. the
/// point with both coordinates clamped into range. Gaussian and clamp both
/// factor over the axes, so every row is an outer product of two per-axis
/// vectors.
pub fn discretize_grid(sigma: f64, actions: &ActionSet, half_width: usize) -> Result<FiniteTable> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return domain(format!("grid noise must be positive, got {sigma}"));
    }
    let side = 2 * half_width + 1;
    let n = side * side;
    let a_count = actions.count();
    let hw = half_width as i64;
    let outer = 3 * hw.max(1);
    let mut probs = vec![0.0; n * a_count * n];
    let mut wx = vec![0.0; side];
    let mut wy = vec![0.0; side];
    let axis = |mean: f64, w: &mut [f64]| {
        w.iter_mut().for_each(|v| *v = 0.0);
        for x in -outer..=outer {
            let d = x as f64 - mean;
            let g = (-(d * d) / (2.0 * sigma * sigma)).exp();
            let c = x.clamp(-hw, hw);
            w[(c + hw) as usize] += g;
        }
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= total);
    };
    for s in 0..n {
        let (x, y) = grid_coords(half_width, s)?;
        for a in 0..a_count {
            let e = actions.unit(a);
            axis(x as f64 + e[0], &mut wx);
            axis(y as f64 + e[1], &mut wy);
            let row = &mut probs[(s * a_count + a) * n..(s * a_count + a + 1) * n];
            for (iy, py) in wy.iter().enumerate() {
                for (ix, px) in wx.iter().enumerate() {
                    row[iy * side + ix] = px * py;
                }
            }
            let total: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= total);
        }
    }
    FiniteTable::new(n, a_count, probs)
}

/// Rewards for `n_states` states: each state is rewarded with probability
/// 0.01 by a standard normal value. Worlds without any reward are redrawn.
pub fn sample_reward_world<R: Rng + ?Sized>(n_states: usize, rng: &mut R) -> Result<Vec<f64>> {
    if n_states == 0 {
        return domain("reward world needs at least one state");
    }
    loop {
        let mut any = false;
        let rewards: Vec<f64> = (0..n_states)
            .map(|_| {
                if rng.random::<f64>() < 0.01 {
                    any = true;
                    StandardNormal.sample(rng)
                } else {
                    0.0
                }
            })
            .collect();
        if any && rewards.iter().any(|&r| r != 0.0) {
            return Ok(rewards);
        }
    }
}

/// Optimal values and greedy policy of a finite MDP with state rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueSolution {
    pub values: Vec<f64>,
    /// Greedy action per state, lowest index on ties.
    pub policy: Vec<usize>,
    pub iterations: usize,
    /// Sup-norm of the last Bellman update.
    pub residual: f64,
}

pub const VALUE_TOLERANCE: f64 = 1e-12;
pub const VALUE_MAX_ITERATIONS: usize = 100_000;

/// Iterates `V(s) = r(s) + γ max_a Σ_{s'} P[s][a][s'] V(s')` from zero until
/// the update changes no entry by `1e-12` or more, or `10⁵` iterations pass.
pub fn value_iteration(model: &FiniteTable, rewards: &[f64], discount: f64) -> Result<ValueSolution> {
    if !(0.0..1.0).contains(&discount) {
        return domain(format!("discount must lie in [0, 1), got {discount}"));
    }
    if rewards.len() != model.n_states() {
        return domain(format!(
            "{} rewards for {} states",
            rewards.len(),
            model.n_states()
        ));
    }
    model.check_rows()?;
    let n = model.n_states();
    let mut v = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut policy = vec![0; n];
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    while iterations < VALUE_MAX_ITERATIONS {
        iterations += 1;
        residual = bellman(model, rewards, discount, &v, &mut next, &mut policy);
        std::mem::swap(&mut v, &mut next);
        if residual < VALUE_TOLERANCE {
            break;
        }
    }
    // The greedy policy of the converged values.
    bellman(model, rewards, discount, &v, &mut next, &mut policy);
    Ok(ValueSolution {
        values: v,
        policy,
        iterations,
        residual,
    })
}

fn bellman(
    model: &FiniteTable,
    rewards: &[f64],
    discount: f64,
    v: &[f64],
    out: &mut [f64],
    policy: &mut [usize],
) -> f64 {
    let mut residual: f64 = 0.0;
    for s in 0..model.n_states() {
        let mut best = f64::NEG_INFINITY;
        let mut arg = 0;
        for a in 0..model.n_actions() {
            let q: f64 = model.row(s, a).iter().zip(v).map(|(p, x)| p * x).sum();
            if q > best {
                best = q;
                arg = a;
            }
        }
        out[s] = rewards[s] + discount * best;
        policy[s] = arg;
        residual = residual.max((out[s] - v[s]).abs());
    }
    residual
}

/// Multiplies every entry by `tan(π/4 (u + 1))` with `u ~ Uniform(-η, η)` and
/// renormalizes each row.
pub fn perturb_model<R: Rng + ?Sized>(model: &FiniteTable, eta: f64, rng: &mut R) -> Result<FiniteTable> {
    if !(0.0..1.0).contains(&eta) {
        return domain(format!("perturbation strength must lie in [0, 1), got {eta}"));
    }
    if eta == 0.0 {
        return Ok(model.clone());
    }
    let mut out = model.clone();
    for s in 0..model.n_states() {
        for a in 0..model.n_actions() {
            let row = out.row_mut(s, a);
            for p in row.iter_mut() {
                let u = eta * (2.0 * rng.random::<f64>() - 1.0);
                *p *= perturbation_factor(u);
            }
            let total: f64 = row.iter().sum();
            row.iter_mut().for_each(|p| *p /= total);
        }
    }
    Ok(out)
}

/// `f(u) = tan(π/4 (u + 1))`.
pub fn perturbation_factor(u: f64) -> f64 {
    (PI / 4.0 * (u + 1.0)).tan()
}

/// A grid world: lattice, actions and dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct GridWorld {
    pub half_width: usize,
    pub sigma: f64,
    pub actions: ActionSet,
    pub table: FiniteTable,
}

impl GridWorld {
    pub fn new(half_width: usize, sigma: f64, n_actions: usize) -> Result<Self> {
        let actions = ActionSet::new(n_actions)?;
        Ok(Self {
            half_width,
            sigma,
            actions,
            table: discretize_grid(sigma, &actions, half_width)?,
        })
    }

    pub fn n_states(&self) -> usize {
        self.table.n_states()
    }

    /// `n_traj` demonstrations of `len` states started uniformly on the grid,
    /// following `policy(state)`.
    pub fn simulate<R, F>(&self, policy: F, n_traj: usize, len: usize, rng: &mut R) -> Result<Trajectory>
    where
        R: Rng + ?Sized,
        F: Fn(usize) -> LocalController,
    {
        let n = self.n_states();
        let mut segments = Vec::with_capacity(n_traj);
        for _ in 0..n_traj {
            let mut s = rng.random_range(0..n);
            let mut seg = vec![State::Index(s)];
            for _ in 1..len {
                let a = sample_categorical(policy(s).probs(), rng)?;
                s = sample_categorical(self.table.row(s, a), rng)?;
                seg.push(State::Index(s));
            }
            segments.push(seg);
        }
        Trajectory::new(segments)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dists::RngStream;
    use crate::types::grid_index;

    #[test]
    fn grid_rows_are_stochastic_with_gaussian_mode() {
        let actions = ActionSet::new(8).unwrap();
        let table = discretize_grid(1.0, &actions, 10).unwrap();
        assert_eq!(table.n_states(), 441);
        table.check_rows().unwrap();
        for a in 0..8 {
            let s = grid_index(10, 2, -3).unwrap();
            let row = table.row(s, a);
            let arg = (0..441).max_by(|&i, &j| row[i].total_cmp(&row[j])).unwrap();
            let e = actions.unit(a);
            let target = grid_index(10, (2.0 + e[0]).round() as i64, (-3.0 + e[1]).round() as i64);
            assert_eq!(Some(arg), target);
        }
    }

    #[test]
    fn border_states_absorb_outside_mass() {
        let actions = ActionSet::new(4).unwrap();
        let table = discretize_grid(1.0, &actions, 2).unwrap();
        let corner = grid_index(2, 2, 2).unwrap();
        // Pushing right from the right edge keeps almost everything on the edge column.
        let row = table.row(corner, 0);
        let edge: f64 = (-2..=2).map(|y| row[grid_index(2, 2, y).unwrap()]).sum();
        assert!(edge > 0.8);
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reward_worlds_are_never_empty() {
        let mut rng = RngStream::new(3, 0);
        let mut nonzero = Vec::new();
        let mut count = 0usize;
        for _ in 0..1000 {
            let r = sample_reward_world(441, &mut rng).unwrap();
            let nz: Vec<f64> = r.into_iter().filter(|&x| x != 0.0).collect();
            assert!(!nz.is_empty());
            count += nz.len();
            nonzero.extend(nz);
        }
        let n = nonzero.len() as f64;
        let mean = nonzero.iter().sum::<f64>() / n;
        assert!(mean.abs() < 3.0 / n.sqrt());
        // Conditioned on at least one reward, E[count] = 4.41 / (1 - 0.99^441).
        let expected = 4.41 / (1.0 - 0.99f64.powi(441));
        assert!((count as f64 / 1000.0 - expected).abs() < 0.3);
    }

    #[test]
    fn value_iteration_on_a_chain() {
        // 0 -> 1 -> 2 (absorbing, reward 1). One action.
        let table = FiniteTable::new(
            3,
            1,
            vec![0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0],
        )
        .unwrap();
        let sol = value_iteration(&table, &[0.0, 0.0, 1.0], 0.9).unwrap();
        let g: f64 = 0.9;
        assert!((sol.values[2] - 1.0 / (1.0 - g)).abs() < 1e-9);
        assert!((sol.values[1] - g / (1.0 - g)).abs() < 1e-9);
        assert!((sol.values[0] - g * g / (1.0 - g)).abs() < 1e-9);
        assert!(sol.residual < 1e-10);
    }

    #[test]
    fn zero_rewards_give_zero_values_and_first_action() {
        let table = discretize_grid(1.0, &ActionSet::new(8).unwrap(), 3).unwrap();
        let sol = value_iteration(&table, &vec![0.0; 49], 0.9).unwrap();
        assert!(sol.values.iter().all(|&v| v == 0.0));
        assert!(sol.policy.iter().all(|&a| a == 0));
        assert!(value_iteration(&table, &vec![0.0; 49], 1.0).is_err());
    }

    #[test]
    fn value_iteration_is_monotone_from_zero() {
        let table = discretize_grid(1.0, &ActionSet::new(8).unwrap(), 3).unwrap();
        let mut rewards = vec![0.0; 49];
        rewards[10] = 1.0;
        rewards[40] = 0.5;
        let mut v = vec![0.0; 49];
        let mut next = vec![0.0; 49];
        let mut policy = vec![0; 49];
        for _ in 0..50 {
            bellman(&table, &rewards, 0.9, &v, &mut next, &mut policy);
            assert!(next.iter().zip(&v).all(|(a, b)| a >= b));
            std::mem::swap(&mut v, &mut next);
        }
    }

    #[test]
    fn perturbation_edge_cases() {
        assert_eq!(perturbation_factor(-1.0), 0.0);
        assert!((perturbation_factor(0.5) - 2.414213562373095).abs() < 1e-12);
        let table = discretize_grid(1.0, &ActionSet::new(8).unwrap(), 3).unwrap();
        let mut rng = RngStream::new(2, 2);
        let same = perturb_model(&table, 0.0, &mut rng).unwrap();
        assert_eq!(same, table);
        let p = perturb_model(&table, 0.9, &mut rng).unwrap();
        p.check_rows().unwrap();
        assert_ne!(p, table);
        assert!(perturb_model(&table, 1.0, &mut rng).is_err());
    }

    #[test]
    fn grid_simulation_stays_on_grid() {
        let world = GridWorld::new(10, 1.0, 8).unwrap();
        let mut rng = RngStream::new(6, 0);
        let traj = world
            .simulate(|_| LocalController::uniform(8), 5, 10, &mut rng)
            .unwrap();
        assert_eq!(traj.len(), 50);
        assert!(traj.states().iter().all(|s| s.index().unwrap() < 441));
    }
}
