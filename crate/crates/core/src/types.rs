//! Domain types shared by every module.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// A single system state: a point in the plane or an index into a finite space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum State {
    Point([f64; 2]),
    Index(usize),
}

impl State {
    pub fn point(&self) -> Option<[f64; 2]> {
        match *self {
            State::Point(p) => Some(p),
            State::Index(_) => None,
        }
    }

    pub fn index(&self) -> Option<usize> {
        match *self {
            State::Index(i) => Some(i),
            State::Point(_) => None,
        }
    }
}

/// The system state space.
#[derive(Debug, Clone, PartialEq)]
pub enum StateSpace {
    /// All of the plane.
    Continuous2D,
    /// Lattice points `{(x, y) : |x|, |y| <= half_width}`, indexed row-major
    /// starting from `(-half_width, -half_width)`.
    FiniteGrid { half_width: usize },
    /// An abstract finite space without geometry. State `i` is placed at `(i, 0)`
    /// whenever a position is required.
    Finite { n_states: usize },
}

impl StateSpace {
    pub fn is_finite(&self) -> bool {
        !matches!(self, StateSpace::Continuous2D)
    }

    /// Number of states, `None` for the continuous space.
    pub fn n_states(&self) -> Option<usize> {
        match *self {
            StateSpace::Continuous2D => None,
            StateSpace::FiniteGrid { half_width } => {
                let side = 2 * half_width + 1;
                Some(side * side)
            }
            StateSpace::Finite { n_states } => Some(n_states),
        }
    }

    /// Geometric position of a finite state.
    pub fn position(&self, index: usize) -> Result<[f64; 2]> {
        match *self {
            StateSpace::Continuous2D => domain("continuous space has no state indices"),
            StateSpace::FiniteGrid { half_width } => {
                let (x, y) = grid_coords(half_width, index)?;
                Ok([x as f64, y as f64])
            }
            StateSpace::Finite { n_states } => {
                if index >= n_states {
                    return domain(format!("state {index} out of range (n = {n_states})"));
                }
                Ok([index as f64, 0.0])
            }
        }
    }
}

/// Integer coordinates of grid state `index`.
pub fn grid_coords(half_width: usize, index: usize) -> Result<(i64, i64)> {
    let side = 2 * half_width + 1;
    if index >= side * side {
        return domain(format!("grid index {index} out of range ({} states)", side * side));
    }
    let hw = half_width as i64;
    Ok(((index % side) as i64 - hw, (index / side) as i64 - hw))
}

/// Grid index of integer coordinates, `None` when outside the grid.
pub fn grid_index(half_width: usize, x: i64, y: i64) -> Option<usize> {
    let hw = half_width as i64;
    if x.abs() > hw || y.abs() > hw {
        return None;
    }
    let side = 2 * half_width + 1;
    Some((y + hw) as usize * side + (x + hw) as usize)
}

/// A finite set of movement directions evenly dividing the circle.
///
/// Actions are 0-based: action `j` points at angle `j * 2π / count`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionSet {
    count: usize,
}

impl ActionSet {
    pub fn new(count: usize) -> Result<Self> {
        if count == 0 {
            return domain("action set must contain at least one action");
        }
        Ok(Self { count })
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Direction of action `j` in radians, in `[0, 2π)`.
    pub fn angle(&self, j: usize) -> f64 {
        j as f64 * 2.0 * PI / self.count as f64
    }

    /// Unit vector of action `j`.
    pub fn unit(&self, j: usize) -> [f64; 2] {
        let (s, c) = self.angle(j).sin_cos();
        [c, s]
    }

    /// Action whose direction is closest to `angle` (radians, any range).
    pub fn nearest(&self, angle: f64) -> usize {
        let step = 2.0 * PI / self.count as f64;
        let k = (angle / step).round() as i64;
        k.rem_euclid(self.count as i64) as usize
    }

    /// Wrapped angular distance between two actions.
    pub fn angular_distance(&self, a: usize, b: usize) -> f64 {
        let d = a.abs_diff(b) % self.count;
        self.angle(d.min(self.count - d))
    }
}

/// A categorical action distribution (a point on the action simplex).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalController {
    probs: Vec<f64>,
}

impl LocalController {
    /// Wraps a probability vector, checking the simplex constraints.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return domain("controller needs at least one action");
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return domain("controller probabilities must be finite and non-negative");
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return domain(format!("controller probabilities sum to {sum}, not 1"));
        }
        Ok(Self { probs })
    }

    /// Normalizes non-negative weights onto the simplex.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0) || !sum.is_finite() || weights.iter().any(|w| *w < 0.0) {
            return domain("weights must be non-negative with a positive finite sum");
        }
        Ok(Self {
            probs: weights.iter().map(|w| w / sum).collect(),
        })
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            probs: vec![1.0 / n as f64; n],
        }
    }

    /// Point mass on action `j`.
    pub fn point_mass(n: usize, j: usize) -> Self {
        let mut probs = vec![0.0; n];
        probs[j] = 1.0;
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_probs(self) -> Vec<f64> {
        self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Row-stochastic transition tensor `P[s][a][s']` of a finite system.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteTable {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl FiniteTable {
    /// Builds a table from a flat `[s][a][s']` vector, checking every row.
    pub fn new(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != n_states * n_actions * n_states {
            return Err(Error::Structural(format!(
                "transition tensor has {} entries, expected {}",
                probs.len(),
                n_states * n_actions * n_states
            )));
        }
        let table = Self {
            n_states,
            n_actions,
            probs,
        };
        table.check_rows()?;
        Ok(table)
    }

    /// Verifies that each `(s, a)` row is non-negative and sums to 1 within 1e-12.
    pub fn check_rows(&self) -> Result<()> {
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                let row = self.row(s, a);
                if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                    return domain(format!("row ({s}, {a}) has negative or non-finite entries"));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > 1e-12 {
                    return domain(format!("row ({s}, {a}) sums to {sum}"));
                }
            }
        }
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.probs[start..start + self.n_states]
    }

    pub(crate) fn row_mut(&mut self, s: usize, a: usize) -> &mut [f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &mut self.probs[start..start + self.n_states]
    }

    pub fn prob(&self, s: usize, a: usize, next: usize) -> f64 {
        self.probs[(s * self.n_actions + a) * self.n_states + next]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }
}

/// Known system dynamics, queried as a likelihood of observed transitions.
#[derive(Debug, Clone, PartialEq)]
pub enum TransitionModel {
    /// `s' = s + step * e_a + N(0, sigma² I)` on the plane.
    GaussianKernel {
        step: f64,
        sigma: f64,
        actions: ActionSet,
    },
    FiniteTable(FiniteTable),
}

impl TransitionModel {
    pub fn gaussian(step: f64, sigma: f64, actions: ActionSet) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return domain("Gaussian kernel needs sigma > 0");
        }
        Ok(TransitionModel::GaussianKernel {
            step,
            sigma,
            actions,
        })
    }

    pub fn n_actions(&self) -> usize {
        match self {
            TransitionModel::GaussianKernel { actions, .. } => actions.count(),
            TransitionModel::FiniteTable(t) => t.n_actions(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_of_half_width_ten_has_441_states() {
        let space = StateSpace::FiniteGrid { half_width: 10 };
        assert_eq!(space.n_states(), Some(441));
        let mut seen = std::collections::HashSet::new();
        for i in 0..441 {
            let (x, y) = grid_coords(10, i).unwrap();
            assert!(x.abs() <= 10 && y.abs() <= 10);
            assert_eq!(grid_index(10, x, y), Some(i));
            seen.insert((x, y));
        }
        assert_eq!(seen.len(), 441);
        assert!(grid_coords(10, 441).is_err());
    }

    #[test]
    fn action_angles_are_increasing_in_range() {
        let actions = ActionSet::new(24).unwrap();
        let angles: Vec<f64> = (0..24).map(|j| actions.angle(j)).collect();
        assert_eq!(angles[0], 0.0);
        assert!(angles.windows(2).all(|w| w[1] > w[0]));
        assert!(*angles.last().unwrap() < 2.0 * PI);
        assert_eq!(actions.nearest(PI / 2.0), 6);
        assert_eq!(actions.nearest(-PI / 2.0), 18);
        assert!((actions.angular_distance(0, 23) - PI / 12.0).abs() < 1e-15);
        assert!(ActionSet::new(0).is_err());
    }

    #[test]
    fn controller_simplex_checks() {
        assert!(LocalController::new(vec![0.5, 0.5]).is_ok());
        assert!(LocalController::new(vec![0.5, 0.6]).is_err());
        assert!(LocalController::new(vec![-0.1, 1.1]).is_err());
        let c = LocalController::from_weights(&[3.0, 1.0]).unwrap();
        assert_eq!(c.probs(), &[0.75, 0.25]);
        assert!(LocalController::from_weights(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn finite_table_rejects_non_stochastic_rows() {
        assert!(FiniteTable::new(2, 1, vec![0.5, 0.5, 1.0, 0.0]).is_ok());
        assert!(FiniteTable::new(2, 1, vec![0.5, 0.6, 1.0, 0.0]).is_err());
        assert!(FiniteTable::new(2, 1, vec![0.5, 0.5]).is_err());
    }
}
