//! Exact transportation problem solver (transportation simplex with u-v
//! potentials).
//!
//! The initial basis is built greedily from the cheapest cells. Entering cells are
//! chosen by partial pricing over blocks of cells; after a run of degenerate pivots
//! the solver switches to Bland's smallest-index rule, which cannot cycle.

use crate::error::{Error, Result};

/// Degenerate pivots in a row before switching to Bland's rule.
const DEGENERATE_STREAK: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct TransportSolution {
    pub cost: f64,
    /// Basic cells `(source, sink, flow)`, zero flows included.
    pub flows: Vec<(usize, usize, f64)>,
    pub iterations: usize,
}

/// Minimum-cost transport of `supply` onto `demand`. Both must be non-negative
/// with equal totals (up to rounding); `cost(i, j)` is the unit cost.
pub fn solve_transport<C>(supply: &[f64], demand: &[f64], cost: C) -> Result<TransportSolution>
where
    C: Fn(usize, usize) -> f64,
{
    let m = supply.len();
    let n = demand.len();
    if m == 0 || n == 0 {
        return Err(Error::Domain("transport problem with an empty side".into()));
    }
    let c: Vec<f64> = (0..m * n).map(|idx| cost(idx / n, idx % n)).collect();
    let cmax = c.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let tol = 1e-12 * cmax.max(1.0);

    // Greedy start in order of increasing cost. Each allocation retires one
    // row or column, so the basis is a spanning tree of m + n - 1 cells.
    let mut order: Vec<usize> = (0..m * n).collect();
    order.sort_by(|&x, &y| c[x].total_cmp(&c[y]).then(x.cmp(&y)));
    let mut basis: Vec<(usize, usize)> = Vec::with_capacity(m + n - 1);
    let mut flow: Vec<f64> = Vec::with_capacity(m + n - 1);
    let mut a = supply.to_vec();
    let mut b = demand.to_vec();
    let mut row_done = vec![false; m];
    let mut col_done = vec![false; n];
    let (mut rows_left, mut cols_left) = (m, n);
    for idx in order {
        let (i, j) = (idx / n, idx % n);
        if row_done[i] || col_done[j] {
            continue;
        }
        let x = a[i].min(b[j]);
        basis.push((i, j));
        flow.push(x);
        a[i] -= x;
        b[j] -= x;
        if rows_left == 1 && cols_left == 1 {
            break;
        }
        if (a[i] <= b[j] && rows_left > 1) || cols_left == 1 {
            row_done[i] = true;
            rows_left -= 1;
        } else {
            col_done[j] = true;
            cols_left -= 1;
        }
    }
    debug_assert_eq!(basis.len(), m + n - 1);

    let mut is_basic = vec![false; m * n];
    for &(r, s) in &basis {
        is_basic[r * n + s] = true;
    }

    let nodes = m + n;
    let mut u = vec![0.0; m];
    let mut v = vec![0.0; n];
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    let mut parent: Vec<usize> = vec![usize::MAX; nodes];
    let mut seen = vec![false; nodes];
    let mut queue: Vec<usize> = Vec::with_capacity(nodes);
    let mut streak = 0;
    let block = (m * n / 8).max(m + n).min(m * n);
    let mut cursor = 0;
    let cap = 50 * nodes * nodes + 1000;
    let mut iterations = 0;

    loop {
        // Tree adjacency: node r < m is source r, node m + s is sink s.
        adj.iter_mut().for_each(Vec::clear);
        for (e, &(r, s)) in basis.iter().enumerate() {
            adj[r].push(e);
            adj[m + s].push(e);
        }
        // Potentials with u_0 = 0 and u_r + v_s = c_rs on basic cells.
        seen.iter_mut().for_each(|x| *x = false);
        queue.clear();
        queue.push(0);
        seen[0] = true;
        u[0] = 0.0;
        let mut head = 0;
        while head < queue.len() {
            let node = queue[head];
            head += 1;
            for &e in &adj[node] {
                let (r, s) = basis[e];
                let other = if node < m { m + s } else { r };
                if !seen[other] {
                    seen[other] = true;
                    if other < m {
                        u[r] = c[r * n + s] - v[s];
                    } else {
                        v[s] = c[r * n + s] - u[r];
                    }
                    queue.push(other);
                }
            }
        }
        if queue.len() != nodes {
            return Err(Error::Consistency("transport basis is not a spanning tree".into()));
        }

        // Entering cell.
        let bland = streak >= DEGENERATE_STREAK;
        let mut entering: Option<(usize, usize)> = None;
        if bland {
            'scan: for r in 0..m {
                for s in 0..n {
                    if !is_basic[r * n + s] && c[r * n + s] - u[r] - v[s] < -tol {
                        entering = Some((r, s));
                        break 'scan;
                    }
                }
            }
        } else {
            // Partial pricing: the most negative cell of the first block, in
            // cyclic order from where the last scan stopped, that has one.
            let cells = m * n;
            let mut best = -tol;
            let mut scanned = 0;
            while scanned < cells {
                let end = (scanned + block).min(cells);
                for k in scanned..end {
                    let idx = (cursor + k) % cells;
                    if is_basic[idx] {
                        continue;
                    }
                    let (r, s) = (idx / n, idx % n);
                    let red = c[idx] - u[r] - v[s];
                    if red < best {
                        best = red;
                        entering = Some((r, s));
                    }
                }
                scanned = end;
                if entering.is_some() {
                    break;
                }
            }
            cursor = (cursor + scanned) % cells;
        }
        let Some((ei, ej)) = entering else {
            break;
        };
        iterations += 1;
        if iterations > cap {
            return Err(Error::Consistency(format!(
                "transport solver exceeded {cap} pivots"
            )));
        }

        // Tree path from sink ej to source ei closes the cycle.
        parent.iter_mut().for_each(|p| *p = usize::MAX);
        seen.iter_mut().for_each(|x| *x = false);
        queue.clear();
        let start = m + ej;
        queue.push(start);
        seen[start] = true;
        let mut head = 0;
        while head < queue.len() {
            let node = queue[head];
            head += 1;
            if node == ei {
                break;
            }
            for &e in &adj[node] {
                let (r, s) = basis[e];
                let other = if node < m { m + s } else { r };
                if !seen[other] {
                    seen[other] = true;
                    parent[other] = e;
                    queue.push(other);
                }
            }
        }
        // Walk back from ei to the start; edges alternate -, +, -, ... from the sink side.
        let mut path: Vec<usize> = Vec::new();
        let mut node = ei;
        while node != start {
            let e = parent[node];
            path.push(e);
            let (r, s) = basis[e];
            node = if node < m { m + s } else { r };
        }
        path.reverse();

        let mut theta = f64::INFINITY;
        let mut leave = usize::MAX;
        for (pos, &e) in path.iter().enumerate() {
            if pos % 2 == 0 {
                let (r, s) = basis[e];
                let better = flow[e] < theta
                    || (bland && flow[e] == theta && {
                        let (lr, ls) = basis[leave];
                        r * n + s < lr * n + ls
                    });
                if better {
                    theta = flow[e];
                    leave = e;
                }
            }
        }
        if theta == 0.0 {
            streak += 1;
        } else {
            streak = 0;
        }
        for (pos, &e) in path.iter().enumerate() {
            if pos % 2 == 0 {
                flow[e] -= theta;
            } else {
                flow[e] += theta;
            }
        }
        let (lr, ls) = basis[leave];
        is_basic[lr * n + ls] = false;
        is_basic[ei * n + ej] = true;
        basis[leave] = (ei, ej);
        flow[leave] = theta;
    }

    let cost = basis
        .iter()
        .zip(&flow)
        .map(|(&(r, s), &f)| f.max(0.0) * c[r * n + s])
        .sum();
    Ok(TransportSolution {
        cost,
        flows: basis
            .iter()
            .zip(&flow)
            .map(|(&(r, s), &f)| (r, s, f))
            .collect(),
        iterations,
    })
}
