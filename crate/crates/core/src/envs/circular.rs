//! Continuous circular-motion system with a region-based stochastic expert.
//!
//! The plane is cut into eight 45° sectors centered on the multiples of 45°.
//! Inside the reversal radius the expert circles counter-clockwise, outside it
//! clockwise. In every region it picks the action closest to the tangent at the
//! sector center, or one of its two angular neighbors, with equal probability.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::trajectory::Trajectory;
use crate::types::{ActionSet, LocalController, State, TransitionModel};

pub const SECTORS: usize = 8;

/// Sector of `s` in `0..8`; sector `m` covers angles `[m·45° - 22.5°, m·45° + 22.5°)`,
/// so a point on a boundary belongs to the counter-clockwise sector.
pub fn sector(s: [f64; 2]) -> usize {
    let phi = s[1].atan2(s[0]);
    let m = ((phi + PI / 8.0) / (PI / 4.0)).floor() as i64;
    m.rem_euclid(SECTORS as i64) as usize
}

/// Action closest to the direction of travel in the region of `s`.
pub fn optimal_action(s: [f64; 2], actions: &ActionSet, reversal_radius: f64) -> usize {
    let center = sector(s) as f64 * PI / 4.0;
    let norm = s[0].hypot(s[1]);
    let tangent = if norm <= reversal_radius {
        center + PI / 2.0
    } else {
        center - PI / 2.0
    };
    actions.nearest(tangent)
}

/// Expert action distribution at `s`: 1/3 on the optimal action and on each of
/// its two angular neighbors.
pub fn expert_policy_circular(s: [f64; 2], actions: &ActionSet, reversal_radius: f64) -> LocalController {
    let n = actions.count();
    let t = optimal_action(s, actions, reversal_radius);
    let mut probs = vec![0.0; n];
    for d in [n - 1, 0, 1] {
        probs[(t + d) % n] += 1.0 / 3.0;
    }
    LocalController::from_weights(&probs).expect("three positive entries")
}

/// `s + step · e_a + N(0, σ² I)`.
pub fn step_circular<R: Rng + ?Sized>(
    s: [f64; 2],
    a: usize,
    step: f64,
    sigma: f64,
    actions: &ActionSet,
    rng: &mut R,
) -> [f64; 2] {
    let e = actions.unit(a);
    let mut next = [s[0] + step * e[0], s[1] + step * e[1]];
    if sigma > 0.0 {
        let nx: f64 = StandardNormal.sample(rng);
        let ny: f64 = StandardNormal.sample(rng);
        next[0] += sigma * nx;
        next[1] += sigma * ny;
    }
    next
}

/// The continuous benchmark system.
#[derive(Debug, Clone, PartialEq)]
pub struct CircularWorld {
    pub step: f64,
    pub sigma: f64,
    pub actions: ActionSet,
    pub reversal_radius: f64,
}

impl CircularWorld {
    /// Step length 1, 24 actions, reversal at radius 5.
    pub fn standard(sigma: f64) -> Self {
        Self {
            step: 1.0,
            sigma,
            actions: ActionSet::new(24).expect("non-empty"),
            reversal_radius: 5.0,
        }
    }

    pub fn transition_model(&self) -> Result<TransitionModel> {
        TransitionModel::gaussian(self.step, self.sigma, self.actions)
    }

    /// Region in `0..16`: the sector, offset by 8 outside the reversal radius.
    /// Regions and expert controllers coincide one to one.
    pub fn region(&self, s: [f64; 2]) -> usize {
        let outer = s[0].hypot(s[1]) > self.reversal_radius;
        sector(s) + if outer { SECTORS } else { 0 }
    }

    pub fn expert(&self, s: [f64; 2]) -> LocalController {
        expert_policy_circular(s, &self.actions, self.reversal_radius)
    }

    pub fn step<R: Rng + ?Sized>(&self, s: [f64; 2], a: usize, rng: &mut R) -> [f64; 2] {
        step_circular(s, a, self.step, self.sigma, &self.actions, rng)
    }

    /// `n_traj` demonstrations of `len` states, each started uniformly on the
    /// unit circle. Only states are returned.
    pub fn simulate<R: Rng + ?Sized>(&self, n_traj: usize, len: usize, rng: &mut R) -> Result<Trajectory> {
        let mut segments = Vec::with_capacity(n_traj);
        for _ in 0..n_traj {
            let phi = rng.random::<f64>() * 2.0 * PI;
            let mut s = [phi.cos(), phi.sin()];
            let mut seg = Vec::with_capacity(len);
            seg.push(State::Point(s));
            for _ in 1..len {
                let policy = self.expert(s);
                let a = crate::dists::sample_categorical(policy.probs(), rng)?;
                s = self.step(s, a, rng);
                seg.push(State::Point(s));
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

    fn support(c: &LocalController) -> Vec<usize> {
        c.probs()
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .map(|(j, _)| j)
            .collect()
    }

    #[test]
    fn expert_worked_points() {
        let actions = ActionSet::new(24).unwrap();
        let inner = expert_policy_circular([2.0, 0.0], &actions, 5.0);
        assert_eq!(support(&inner), vec![5, 6, 7]); // 75°, 90°, 105°
        for p in inner.probs().iter().filter(|p| **p > 0.0) {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        let outer = expert_policy_circular([6.0, 0.0], &actions, 5.0);
        assert_eq!(support(&outer), vec![17, 18, 19]); // 255°, 270°, 285°
    }

    #[test]
    fn expert_rotates_with_the_state() {
        let actions = ActionSet::new(24).unwrap();
        let mut rng = RngStream::new(4, 0);
        for _ in 0..1000 {
            let r = rng.random_range(0.1..9.0);
            let phi = rng.random_range(-PI..PI);
            let s = [r * phi.cos(), r * phi.sin()];
            let (sn, cs) = (PI / 4.0).sin_cos();
            let rotated = [cs * s[0] - sn * s[1], sn * s[0] + cs * s[1]];
            let a = expert_policy_circular(s, &actions, 5.0);
            let b = expert_policy_circular(rotated, &actions, 5.0);
            assert_eq!(support(&a).len(), 3);
            // Skip points that a rounding error may push across a sector boundary.
            let frac = ((phi + PI / 8.0) / (PI / 4.0)).fract().abs();
            if frac < 1e-9 || frac > 1.0 - 1e-9 {
                continue;
            }
            let shifted: Vec<usize> = support(&a).iter().map(|j| (j + 3) % 24).collect();
            let mut shifted = shifted;
            shifted.sort();
            assert_eq!(shifted, support(&b));
        }
    }

    #[test]
    fn boundary_points_go_counter_clockwise() {
        let phi = PI / 8.0;
        assert_eq!(sector([phi.cos(), phi.sin()]), 1);
        assert_eq!(sector([1.0, -1e-12]), 0);
        assert_eq!(sector([-1.0, 0.0]), 4);
    }

    #[test]
    fn noiseless_and_noisy_steps() {
        let actions = ActionSet::new(24).unwrap();
        let mut rng = RngStream::new(8, 1);
        let s = step_circular([1.0, 2.0], 6, 1.0, 0.0, &actions, &mut rng);
        let e = actions.unit(6);
        assert_eq!(s, [1.0 + e[0], 2.0 + e[1]]);

        let n = 100_000;
        let (mut m, mut v) = ([0.0; 2], [0.0; 2]);
        for _ in 0..n {
            let t = step_circular([0.0, 0.0], 6, 1.0, 0.2, &actions, &mut rng);
            for d in 0..2 {
                m[d] += t[d];
                v[d] += (t[d] - e[d]).powi(2);
            }
        }
        assert!((m[0] / n as f64).abs() < 0.003);
        assert!((m[1] / n as f64 - 1.0).abs() < 0.003);
        for d in 0..2 {
            assert!((v[d] / n as f64 - 0.04).abs() < 0.002);
        }
    }

    #[test]
    fn simulation_shape_and_determinism() {
        let world = CircularWorld::standard(0.2);
        let a = world.simulate(10, 100, &mut RngStream::new(1, 0)).unwrap();
        let b = world.simulate(10, 100, &mut RngStream::new(1, 0)).unwrap();
        assert_eq!(a.len(), 1000);
        assert_eq!(a.n_transitions(), 990);
        assert_eq!(a, b);
        let short = world.simulate(3, 2, &mut RngStream::new(1, 0)).unwrap();
        assert_eq!(short.n_transitions(), 3);
        for k in 0..10 {
            let p = a.segment(k)[0].point().unwrap();
            assert!((p[0].hypot(p[1]) - 1.0).abs() < 1e-12);
        }
    }
}
