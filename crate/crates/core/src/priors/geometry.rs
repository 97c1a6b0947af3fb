//! Distances between sites, decay kernels and nearest-neighbor structure.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Site count up to which all pairwise distances are stored.
pub const DENSE_LIMIT: usize = 5_000;

/// Euclidean distances between sites.
#[derive(Debug, Clone)]
pub enum DistanceTable {
    Dense { n: usize, d: Vec<f64> },
    OnDemand { positions: Vec<[f64; 2]> },
}

pub fn euclidean(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

impl DistanceTable {
    pub fn new(positions: &[[f64; 2]]) -> Self {
        let n = positions.len();
        if n > DENSE_LIMIT {
            return DistanceTable::OnDemand {
                positions: positions.to_vec(),
            };
        }
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = euclidean(positions[i], positions[j]);
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        DistanceTable::Dense { n, d }
    }

    pub fn len(&self) -> usize {
        match self {
            DistanceTable::Dense { n, .. } => *n,
            DistanceTable::OnDemand { positions } => positions.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            DistanceTable::Dense { n, d } => d[i * n + j],
            DistanceTable::OnDemand { positions } => euclidean(positions[i], positions[j]),
        }
    }
}

/// Similarity as a function of distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DecayKernel {
    /// `exp(-d² / σ_f²)`.
    Potts { sigma_f: f64 },
    /// `(1 - ε) exp(-d² / σ_f²) + ε`.
    DdcrpOffset { sigma_f: f64, epsilon: f64 },
}

impl DecayKernel {
    pub fn potts(sigma_f: f64) -> Result<Self> {
        if !(sigma_f > 0.0) || !sigma_f.is_finite() {
            return domain(format!("kernel width must be positive, got {sigma_f}"));
        }
        Ok(DecayKernel::Potts { sigma_f })
    }

    pub fn ddcrp(sigma_f: f64, epsilon: f64) -> Result<Self> {
        Self::potts(sigma_f)?;
        if !(0.0..=1.0).contains(&epsilon) {
            return domain(format!("kernel offset must lie in [0, 1], got {epsilon}"));
        }
        Ok(DecayKernel::DdcrpOffset { sigma_f, epsilon })
    }

    #[inline]
    pub fn eval(&self, d: f64) -> f64 {
        match *self {
            DecayKernel::Potts { sigma_f } => (-(d * d) / (sigma_f * sigma_f)).exp(),
            DecayKernel::DdcrpOffset { sigma_f, epsilon } => {
                (1.0 - epsilon) * (-(d * d) / (sigma_f * sigma_f)).exp() + epsilon
            }
        }
    }
}

/// Symmetric neighbor lists with kernel weights `f(d_ij)`.
#[derive(Debug, Clone)]
pub struct Neighborhood {
    lists: Vec<Vec<(usize, f64)>>,
}

impl Neighborhood {
    /// The `k` nearest sites of every site (ties broken by index), made
    /// symmetric by taking the union of both directions.
    pub fn knn(positions: &[[f64; 2]], k: usize, kernel: &DecayKernel) -> Self {
        let n = positions.len();
        let mut sets: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut cand: Vec<(f64, usize)> = Vec::with_capacity(n);
        for i in 0..n {
            cand.clear();
            cand.extend(
                (0..n)
                    .filter(|&j| j != i)
                    .map(|j| (euclidean(positions[i], positions[j]), j)),
            );
            let k = k.min(cand.len());
            if k == 0 {
                continue;
            }
            let by_dist = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            cand.select_nth_unstable_by(k - 1, by_dist);
            for &(_, j) in &cand[..k] {
                sets[i].push(j);
                sets[j].push(i);
            }
        }
        let lists = sets
            .into_iter()
            .enumerate()
            .map(|(i, mut js)| {
                js.sort_unstable();
                js.dedup();
                js.into_iter()
                    .map(|j| (j, kernel.eval(euclidean(positions[i], positions[j]))))
                    .collect()
            })
            .collect();
        Self { lists }
    }

    pub fn from_lists(lists: Vec<Vec<(usize, f64)>>) -> Self {
        Self { lists }
    }

    pub fn len(&self) -> usize {
        self.lists.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lists.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.lists[i]
    }

    pub fn is_symmetric(&self) -> bool {
        self.lists.iter().enumerate().all(|(i, l)| {
            l.iter()
                .all(|&(j, _)| j != i && self.lists[j].iter().any(|&(m, _)| m == i))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(n: usize, seed: u64) -> Vec<[f64; 2]> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)])
            .collect()
    }

    #[test]
    fn distance_table_is_a_metric() {
        let pts = cloud(40, 1);
        let d = DistanceTable::new(&pts);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for i in 0..40 {
            assert_eq!(d.get(i, i), 0.0);
            for j in 0..40 {
                assert_eq!(d.get(i, j), d.get(j, i));
            }
        }
        for _ in 0..500 {
            let (a, b, c) = (
                rng.random_range(0..40),
                rng.random_range(0..40),
                rng.random_range(0..40),
            );
            assert!(d.get(a, c) <= d.get(a, b) + d.get(b, c) + 1e-12);
        }
        let lazy = DistanceTable::OnDemand { positions: pts };
        assert_eq!(lazy.get(3, 7), d.get(3, 7));
    }

    #[test]
    fn kernels_decay_within_unit_range() {
        let p = DecayKernel::potts(1.0).unwrap();
        let q = DecayKernel::ddcrp(1.0, 0.01).unwrap();
        let mut last = (f64::INFINITY, f64::INFINITY);
        for step in 0..200 {
            let d = step as f64 * 0.05;
            let (a, b) = (p.eval(d), q.eval(d));
            assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b));
            assert!(a <= last.0 && b <= last.1);
            assert!(b >= 0.01);
            last = (a, b);
        }
        assert_eq!(p.eval(0.0), 1.0);
        assert!(DecayKernel::potts(0.0).is_err());
        assert!(DecayKernel::ddcrp(1.0, 1.5).is_err());
    }

    #[test]
    fn knn_is_symmetric_and_irreflexive() {
        let pts = cloud(100, 3);
        let nb = Neighborhood::knn(&pts, 8, &DecayKernel::potts(1.0).unwrap());
        assert!(nb.is_symmetric());
        for i in 0..100 {
            assert!(nb.neighbors(i).len() >= 8);
        }
    }

    #[test]
    fn knn_picks_the_closest_points() {
        let pts: Vec<[f64; 2]> = (0..6).map(|i| [i as f64, 0.0]).collect();
        let nb = Neighborhood::knn(&pts, 1, &DecayKernel::potts(1.0).unwrap());
        // site 0 -> 1; site 5 -> 4; interior ties go to the lower index
        let ids = |i: usize| nb.neighbors(i).iter().map(|p| p.0).collect::<Vec<_>>();
        assert_eq!(ids(0), vec![1]);
        assert_eq!(ids(5), vec![4]);
        assert!(ids(1).contains(&0));
    }
}
