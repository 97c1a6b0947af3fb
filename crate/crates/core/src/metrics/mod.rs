//! Policy extraction, earth mover's distances and learning curves.

mod curve;
mod policy;
mod transport;

pub use curve::{learning_curve, CurveMetric, CurvePoint, EvalSet};
pub use policy::{extract_policy, extract_policy_at, posterior_average, PredictedPolicy, Provenance};
pub use transport::{solve_transport, TransportSolution};

use crate::error::{domain, Error, Result};
use crate::types::{ActionSet, FiniteTable};

/// Mass tolerance of [`emd`] inputs.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// Per-bin excess mass ignored by [`emd`]. Smooth transition kernels carry
/// far-tail masses near 1e-90 that would otherwise dominate solve time.
pub const EXCESS_FLOOR: f64 = 1e-16;

/// Ground metric of an earth mover's distance.
#[derive(Debug, Clone, PartialEq)]
pub enum EmdGround {
    /// Bins are actions; cost is the wrapped angle between their directions.
    CircularAngle(ActionSet),
    /// Bins are points in the plane; cost is their Euclidean distance.
    Euclidean2D(Vec<[f64; 2]>),
}

impl EmdGround {
    pub fn len(&self) -> usize {
        match self {
            EmdGround::CircularAngle(a) => a.count(),
            EmdGround::Euclidean2D(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cost(&self, i: usize, j: usize) -> f64 {
        match self {
            EmdGround::CircularAngle(a) => a.angular_distance(i, j),
            EmdGround::Euclidean2D(p) => {
                let (a, b) = (p[i], p[j]);
                (a[0] - b[0]).hypot(a[1] - b[1])
            }
        }
    }
}

fn check_distribution(p: &[f64], name: &str) -> Result<()> {
    if p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return domain(format!("{name} has a negative or non-finite entry"));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > NORMALIZATION_TOL {
        return domain(format!("{name} sums to {total}, not 1"));
    }
    Ok(())
}

/// Exact earth mover's distance between two distributions over the bins of
/// `ground`.
///
/// The pair is put in a canonical order before solving, so the result is
/// bitwise symmetric.
pub fn emd(p: &[f64], q: &[f64], ground: &EmdGround) -> Result<f64> {
    let n = ground.len();
    if p.len() != n || q.len() != n {
        return Err(Error::Structural(format!(
            "distributions of length {} and {} over {n} bins",
            p.len(),
            q.len()
        )));
    }
    check_distribution(p, "first distribution")?;
    check_distribution(q, "second distribution")?;
    if p == q {
        return Ok(0.0);
    }
    let (p, q) = if p.iter().map(|x| x.to_bits()).lt(q.iter().map(|x| x.to_bits())) {
        (p, q)
    } else {
        (q, p)
    };
    // Mass shared by both sides stays in place under a metric ground, so only
    // the excess of each side is transported. Excess at or below the floor is
    // left out; that moves the result by at most n * floor * max cost.
    let src: Vec<usize> = (0..n).filter(|&i| p[i] - q[i] > EXCESS_FLOOR).collect();
    let dst: Vec<usize> = (0..n).filter(|&j| q[j] - p[j] > EXCESS_FLOOR).collect();
    let supply: Vec<f64> = src.iter().map(|&i| p[i] - q[i]).collect();
    let excess: Vec<f64> = dst.iter().map(|&j| q[j] - p[j]).collect();
    if src.is_empty() || dst.is_empty() {
        // Differences below rounding on one side only.
        return Ok(0.0);
    }
    let (ps, qs): (f64, f64) = (supply.iter().sum(), excess.iter().sum());
    let demand: Vec<f64> = excess.iter().map(|x| x * ps / qs).collect();
    let sol = solve_transport(&supply, &demand, |a, b| ground.cost(src[a], dst[b]))?;
    Ok(sol.cost.max(0.0))
}

/// Next-state law `P(s'|s) = Σ_a π(a) P[s][a][s']` under `policy` at `s`.
pub fn next_state_distribution(model: &FiniteTable, s: usize, policy: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; model.n_states()];
    for (a, &w) in policy.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for (o, &r) in out.iter_mut().zip(model.row(s, a)) {
            *o += w * r;
        }
    }
    out
}
