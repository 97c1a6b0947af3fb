//! Prior conditionals over cluster indicators and ddCRP links.
//!
//! Every conditional returns unnormalized weights of one indicator given all
//! others. Joint normalizers are never computed.

mod geometry;

pub use geometry::{euclidean, DecayKernel, DistanceTable, Neighborhood, DENSE_LIMIT};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dists::sample_dirichlet;
use crate::error::{domain, Error, Result};
use crate::types::LocalController;

/// Prior over the indicators of a finite mixture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorKind {
    /// All assignments equally likely.
    None,
    /// Explicit mixing weights `q ~ Dir(γ/K)`, resampled every sweep.
    Mixing,
    /// Mixing weights integrated out.
    MixingCollapsed,
    /// Potts random field over the neighbor graph.
    Potts,
}

impl std::str::FromStr for PriorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(PriorKind::None),
            "mixing" => Ok(PriorKind::Mixing),
            "mixing_collapsed" | "mixing-collapsed" => Ok(PriorKind::MixingCollapsed),
            "potts" => Ok(PriorKind::Potts),
            _ => Err(Error::Config(format!("unknown prior '{s}'"))),
        }
    }
}

impl std::fmt::Display for PriorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PriorKind::None => "none",
            PriorKind::Mixing => "mixing",
            PriorKind::MixingCollapsed => "mixing_collapsed",
            PriorKind::Potts => "potts",
        })
    }
}

/// Potts weights `exp(β Σ_{j ∈ N(i)} f_ij 1(z_j = k))` for `k < K`.
pub fn potts_conditional(
    z: &[usize],
    i: usize,
    neighborhood: &Neighborhood,
    beta: f64,
    n_clusters: usize,
) -> Result<Vec<f64>> {
    if !(beta >= 0.0) {
        return domain(format!("Potts temperature must be non-negative, got {beta}"));
    }
    let mut w = vec![0.0; n_clusters];
    potts_log_weights_into(z, i, neighborhood, beta, &mut w);
    Ok(w.into_iter().map(f64::exp).collect())
}

/// Log form of [`potts_conditional`], written into `out` (length K).
pub fn potts_log_weights_into(
    z: &[usize],
    i: usize,
    neighborhood: &Neighborhood,
    beta: f64,
    out: &mut [f64],
) {
    out.iter_mut().for_each(|w| *w = 0.0);
    for &(j, f) in neighborhood.neighbors(i) {
        out[z[j]] += beta * f;
    }
}

/// Collapsed mixing weights `ζ^{(\i)}_k + γ/K`.
pub fn mixing_conditional_collapsed(zeta_without: &[u32], gamma: f64) -> Vec<f64> {
    let k = zeta_without.len() as f64;
    zeta_without.iter().map(|&n| n as f64 + gamma / k).collect()
}

/// Draws mixing weights from `Dir(ζ + γ/K)`.
pub fn sample_mixing_weights<R: Rng + ?Sized>(
    zeta: &[u32],
    gamma: f64,
    rng: &mut R,
) -> Result<LocalController> {
    if !(gamma > 0.0) {
        return domain(format!("mixing concentration must be positive, got {gamma}"));
    }
    let k = zeta.len() as f64;
    let conc: Vec<f64> = zeta.iter().map(|&n| n as f64 + gamma / k).collect();
    sample_dirichlet(&conc, rng)
}

/// CRP weights: the sizes of the occupied clusters, then `γ` for a new one.
pub fn crp_conditional(zeta_without: &[u32], gamma: f64) -> Vec<f64> {
    let mut w: Vec<f64> = zeta_without.iter().map(|&n| n as f64).collect();
    w.push(gamma);
    w
}

/// Normalized ddCRP link prior of site `i` and the log of its normalizer
/// `ln(ν + Σ_{j≠i} f(d_ij))`.
pub fn ddcrp_link_prior(
    i: usize,
    distances: &DistanceTable,
    kernel: &DecayKernel,
    nu: f64,
) -> Result<(Vec<f64>, f64)> {
    if !(nu >= 0.0) || !nu.is_finite() {
        return domain(format!("self-link weight must be finite and non-negative, got {nu}"));
    }
    let n = distances.len();
    let mut w: Vec<f64> = (0..n)
        .map(|j| if j == i { nu } else { kernel.eval(distances.get(i, j)) })
        .collect();
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        return domain("ddCRP link weights are all zero");
    }
    w.iter_mut().for_each(|v| *v /= total);
    Ok((w, total.ln()))
}

/// `Σ_{j≠i} f(d_ij)` for every site: the non-self part of each link normalizer.
pub fn off_diagonal_sums(distances: &DistanceTable, kernel: &DecayKernel) -> Vec<f64> {
    let n = distances.len();
    (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| kernel.eval(distances.get(i, j)))
                .sum()
        })
        .collect()
}

/// The part of `ln p(c | ν)` that depends on `ν`:
/// `n_self ln ν - Σ_i ln(ν + F_i)`.
pub fn self_link_log_likelihood(nu: f64, n_self: usize, off_sums: &[f64]) -> f64 {
    let self_term = if n_self == 0 { 0.0 } else { n_self as f64 * nu.ln() };
    self_term - off_sums.iter().map(|f| (nu + f).ln()).sum::<f64>()
}

/// Weakly connected components of the link graph `i -> links[i]`, labeled
/// `0..K` in order of their smallest site.
pub fn connected_components(links: &[usize]) -> Result<(Vec<usize>, usize)> {
    let n = links.len();
    if let Some(i) = links.iter().position(|&c| c >= n) {
        return Err(Error::Structural(format!("site {i} links outside the site set")));
    }
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (i, &c) in links.iter().enumerate() {
        let (a, b) = (find(&mut parent, i), find(&mut parent, c));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut label = vec![usize::MAX; n];
    let mut z = vec![0; n];
    let mut k = 0;
    for i in 0..n {
        let r = find(&mut parent, i);
        if label[r] == usize::MAX {
            label[r] = k;
            k += 1;
        }
        z[i] = label[r];
    }
    Ok((z, k))
}
