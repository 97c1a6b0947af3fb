//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use polrec::types::{FiniteTable, State, StateSpace, TransitionModel};
use polrec::{Problem, Trajectory};

/// Minimizes `c·x` subject to `A x = b`, `x >= 0` with a dense two-phase
/// tableau simplex and Bland's rule. `b` must be non-negative.
pub fn lp_min(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> f64 {
    const EPS: f64 = 1e-12;
    let m = a.len();
    let n = c.len();
    // Columns: n structural, m artificial, then the right-hand side.
    let width = n + m + 1;
    let mut t: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let mut row = vec![0.0; width];
            row[..n].copy_from_slice(&a[i]);
            row[n + i] = 1.0;
            row[width - 1] = b[i];
            row
        })
        .collect();
    let mut basis: Vec<usize> = (n..n + m).collect();

    fn pivot(t: &mut [Vec<f64>], r: usize, col: usize) {
        let p = t[r][col];
        t[r].iter_mut().for_each(|x| *x /= p);
        let pivot_row = t[r].clone();
        for (i, row) in t.iter_mut().enumerate() {
            if i != r && row[col] != 0.0 {
                let f = row[col];
                row.iter_mut().zip(&pivot_row).for_each(|(x, y)| *x -= f * y);
            }
        }
    }

    fn run(t: &mut [Vec<f64>], basis: &mut [usize], cost: &[f64], allowed: usize) {
        let width = t[0].len();
        loop {
            // Reduced costs from the current basis.
            let entering = (0..allowed).find(|&j| {
                if basis.contains(&j) {
                    return false;
                }
                let z: f64 = basis.iter().enumerate().map(|(i, &bj)| cost[bj] * t[i][j]).sum();
                cost[j] - z < -EPS
            });
            let Some(col) = entering else { return };
            let mut best: Option<(f64, usize)> = None;
            for i in 0..t.len() {
                if t[i][col] > EPS {
                    let ratio = t[i][width - 1] / t[i][col];
                    best = match best {
                        Some((br, bi)) if br < ratio - EPS || (ratio - br).abs() <= EPS && basis[bi] < basis[i] => {
                            Some((br, bi))
                        }
                        _ => Some((ratio, i)),
                    };
                }
            }
            let (_, r) = best.expect("transport LPs are bounded");
            pivot(t, r, col);
            basis[r] = col;
        }
    }

    // Phase 1: minimize the sum of artificials.
    let mut phase1 = vec![0.0; n + m];
    phase1[n..].iter_mut().for_each(|x| *x = 1.0);
    run(&mut t, &mut basis, &phase1, n + m);
    // Drive zero-level artificials out of the basis where possible.
    let mut keep = vec![true; m];
    for r in 0..m {
        if basis[r] >= n {
            match (0..n).find(|&j| t[r][j].abs() > 1e-9) {
                Some(col) => {
                    pivot(&mut t, r, col);
                    basis[r] = col;
                }
                None => keep[r] = false,
            }
        }
    }
    let mut t2 = Vec::new();
    let mut b2 = Vec::new();
    for r in 0..m {
        if keep[r] {
            t2.push(t[r].clone());
            b2.push(basis[r]);
        }
    }
    let mut cost = c.to_vec();
    cost.extend(std::iter::repeat_n(0.0, m));
    run(&mut t2, &mut b2, &cost, n);
    b2.iter().enumerate().map(|(i, &j)| cost[j] * t2[i][width - 1]).sum()
}

/// Optimal transport cost via [`lp_min`].
pub fn transport_lp(p: &[f64], q: &[f64], cost: impl Fn(usize, usize) -> f64) -> f64 {
    let (m, n) = (p.len(), q.len());
    let c: Vec<f64> = (0..m * n).map(|k| cost(k / n, k % n)).collect();
    let mut a = Vec::new();
    let mut b = Vec::new();
    for i in 0..m {
        let mut row = vec![0.0; m * n];
        (0..n).for_each(|j| row[i * n + j] = 1.0);
        a.push(row);
        b.push(p[i]);
    }
    for j in 0..n {
        let mut row = vec![0.0; m * n];
        (0..m).for_each(|i| row[i * n + j] = 1.0);
        a.push(row);
        b.push(q[j]);
    }
    lp_min(&c, &a, &b)
}

/// Probability of an action sequence with these counts under a symmetric
/// Dirichlet-multinomial, by drawing balls from a Pólya urn one at a time.
pub fn polya_urn(counts: &[u32], alpha: f64) -> f64 {
    let a = counts.len() as f64;
    let mut drawn = vec![0u32; counts.len()];
    let mut p = 1.0;
    let mut total = 0u32;
    for (j, &c) in counts.iter().enumerate() {
        for _ in 0..c {
            p *= (drawn[j] as f64 + alpha) / (total as f64 + a * alpha);
            drawn[j] += 1;
            total += 1;
        }
    }
    p
}

/// Calls `f` on every vector in `{0..base}^len`.
pub fn for_each_tuple(len: usize, base: usize, mut f: impl FnMut(&[usize])) {
    let mut v = vec![0; len];
    loop {
        f(&v);
        let mut i = 0;
        loop {
            if i == len {
                return;
            }
            v[i] += 1;
            if v[i] < base {
                break;
            }
            v[i] = 0;
            i += 1;
        }
    }
}

/// A three-state, two-action MDP with a fixed six-state trajectory.
pub struct TinyMdp {
    pub table: FiniteTable,
    pub states: Vec<usize>,
}

impl TinyMdp {
    pub fn new() -> Self {
        let rows = [
            [0.6, 0.3, 0.1],
            [0.2, 0.5, 0.3],
            [0.1, 0.7, 0.2],
            [0.4, 0.2, 0.4],
            [0.3, 0.3, 0.4],
            [0.5, 0.1, 0.4],
        ];
        let table = FiniteTable::new(3, 2, rows.concat()).unwrap();
        Self { table, states: vec![0, 1, 1, 2, 0, 2] }
    }

    pub fn with_states(table: FiniteTable, states: Vec<usize>) -> Self {
        Self { table, states }
    }

    pub fn problem(&self) -> Problem {
        let traj = Trajectory::new(vec![self.states.iter().map(|&s| State::Index(s)).collect()]).unwrap();
        Problem::from_trajectory(
            &traj,
            &TransitionModel::FiniteTable(self.table.clone()),
            &StateSpace::Finite { n_states: self.table.n_states() },
        )
        .unwrap()
    }

    pub fn n_steps(&self) -> usize {
        self.states.len() - 1
    }

    /// `Π_t P(s_{t+1} | s_t, a_t)`.
    pub fn likelihood(&self, actions: &[usize]) -> f64 {
        actions
            .iter()
            .enumerate()
            .map(|(t, &a)| self.table.prob(self.states[t], a, self.states[t + 1]))
            .product()
    }

    /// Action counts per cluster given a label per state.
    pub fn cluster_counts(&self, actions: &[usize], z: &[usize], k: usize) -> Vec<Vec<u32>> {
        let mut c = vec![vec![0u32; self.table.n_actions()]; k];
        for (t, &a) in actions.iter().enumerate() {
            c[z[self.states[t]]][a] += 1;
        }
        c
    }
}

/// Relabels `z` by order of first appearance.
pub fn canonical(z: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    z.iter()
        .map(|&k| {
            let next = map.len();
            *map.entry(k).or_insert(next)
        })
        .collect()
}

/// Total variation distance between two distributions given as (key, prob).
pub fn tv<K: std::hash::Hash + Eq + Clone>(p: &[(K, f64)], q: &[(K, f64)]) -> f64 {
    let mut m: std::collections::HashMap<K, (f64, f64)> = std::collections::HashMap::new();
    for (k, v) in p {
        m.entry(k.clone()).or_default().0 += v;
    }
    for (k, v) in q {
        m.entry(k.clone()).or_default().1 += v;
    }
    m.values().map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0
}
