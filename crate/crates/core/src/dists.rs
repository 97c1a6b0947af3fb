//! Probability primitives.
//!
//! All likelihood arithmetic happens in log space. Conditional weights are
//! exponentiated only after subtracting their maximum, and anything more than
//! `e^-700` below the maximum counts as zero.

use std::f64::consts::PI;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{domain, Error, Result};
use crate::types::{LocalController, State, TransitionModel};

/// Relative log-weight below which a conditional weight is treated as zero.
pub const LOG_WEIGHT_FLOOR: f64 = -700.0;

/// A reproducible random stream identified by a root seed and a stream id.
///
/// Backed by ChaCha8, whose output is fully specified, so identical
/// `(seed, stream)` pairs give identical draws on every platform.
#[derive(Debug, Clone)]
pub struct RngStream {
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { inner }
    }

    /// Stream addressed by a path such as `[run, chain]` below a root seed.
    pub fn derive(seed: u64, path: &[u64]) -> Self {
        Self::new(seed, stream_id(path))
    }
}

/// Hashes a stream path into a 64-bit stream id (splitmix64 finalizer chain).
pub fn stream_id(path: &[u64]) -> u64 {
    let mut h: u64 = 0x243F_6A88_85A3_08D3;
    for &p in path {
        h ^= p.wrapping_add(0x9E37_79B9_7F4A_7C15);
        h = splitmix(h);
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

pub fn log_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// `ln Γ(x + n) - ln Γ(x)`, the log of the rising factorial `x (x+1) ... (x+n-1)`.
pub fn log_rising(x: f64, n: u32) -> f64 {
    match n {
        0 => 0.0,
        1 => x.ln(),
        2..=16 => {
            let mut p = x;
            for m in 1..n {
                p *= x + m as f64;
            }
            p.ln()
        }
        _ => log_gamma(x + n as f64) - log_gamma(x),
    }
}

/// Log marginal probability of one particular action sequence with the given
/// per-action counts under a symmetric `Dir(alpha)` prior on the controller:
///
/// `ln[ Γ(Aα) / Γ(N + Aα) · Π_j Γ(n_j + α) / Γ(α) ]`.
///
/// Counts are unsigned, so negative counts cannot be expressed.
pub fn log_dirmult(counts: &[u32], alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return domain(format!("Dirichlet-multinomial needs alpha > 0, got {alpha}"));
    }
    Ok(log_dirmult_unchecked(counts, alpha))
}

pub(crate) fn log_dirmult_unchecked(counts: &[u32], alpha: f64) -> f64 {
    let total: u32 = counts.iter().sum();
    let per_action: f64 = counts.iter().map(|&n| log_rising(alpha, n)).sum();
    per_action - log_rising(counts.len() as f64 * alpha, total)
}

/// `log_rising(x, n)` for a fixed `x`, tabulated for `n` up to a bound and
/// computed directly beyond it.
#[derive(Debug, Clone)]
pub struct LogRisingTable {
    x: f64,
    values: Vec<f64>,
}

impl LogRisingTable {
    pub fn new(x: f64, max_n: usize) -> Self {
        let mut values = Vec::with_capacity(max_n + 1);
        let mut acc = 0.0;
        values.push(0.0);
        for m in 0..max_n {
            acc += (x + m as f64).ln();
            values.push(acc);
        }
        // Long running sums drift; anchor the tail on the gamma-function form.
        for (n, v) in values.iter_mut().enumerate().skip(64) {
            *v = log_gamma(x + n as f64) - log_gamma(x);
        }
        Self { x, values }
    }

    #[inline]
    pub fn get(&self, n: u32) -> f64 {
        match self.values.get(n as usize) {
            Some(v) => *v,
            None => log_rising(self.x, n),
        }
    }
}

/// Dirichlet-multinomial marginals for a fixed symmetric `alpha` and action
/// count, backed by rising-factorial tables.
#[derive(Debug, Clone)]
pub struct DirMultTable {
    alpha: f64,
    n_actions: usize,
    per_action: LogRisingTable,
    total: LogRisingTable,
}

impl DirMultTable {
    /// Tables cover counts up to `max_count` exactly; larger counts fall back
    /// to direct evaluation.
    pub fn new(alpha: f64, n_actions: usize, max_count: usize) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return domain(format!("Dirichlet-multinomial needs alpha > 0, got {alpha}"));
        }
        if n_actions == 0 {
            return domain("need at least one action");
        }
        Ok(Self {
            alpha,
            n_actions,
            per_action: LogRisingTable::new(alpha, max_count),
            total: LogRisingTable::new(n_actions as f64 * alpha, max_count),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn log_dirmult(&self, counts: &[u32]) -> f64 {
        let mut total = 0;
        let mut acc = 0.0;
        for &n in counts {
            if n > 0 {
                acc += self.per_action.get(n);
                total += n;
            }
        }
        acc - self.total.get(total)
    }

    /// `log DirMult(base + add) - log DirMult(base)`, touching only the
    /// non-zero entries of `add`.
    pub fn log_ratio(&self, base: &[u32], base_total: u32, add: &[u32], add_total: u32) -> f64 {
        if add_total == 0 {
            return 0.0;
        }
        let mut acc = 0.0;
        for (&b, &n) in base.iter().zip(add) {
            if n > 0 {
                acc += self.per_action.get(b + n) - self.per_action.get(b);
            }
        }
        acc - (self.total.get(base_total + add_total) - self.total.get(base_total))
    }

    /// `log DirMult(a + b) - log DirMult(a) - log DirMult(b)`.
    pub fn log_merge_ratio(&self, a: &[u32], a_total: u32, b: &[u32], b_total: u32) -> f64 {
        let mut acc = 0.0;
        for (&x, &y) in a.iter().zip(b) {
            if x > 0 && y > 0 {
                acc += self.per_action.get(x + y) - self.per_action.get(x) - self.per_action.get(y);
            }
        }
        acc - (self.total.get(a_total + b_total) - self.total.get(a_total) - self.total.get(b_total))
    }
}

/// Draws from `Dir(conc)`.
pub fn sample_dirichlet<R: Rng + ?Sized>(conc: &[f64], rng: &mut R) -> Result<LocalController> {
    if conc.is_empty() {
        return domain("Dirichlet needs at least one component");
    }
    if conc.iter().any(|c| !(*c > 0.0) || !c.is_finite()) {
        return domain(format!("Dirichlet concentrations must be positive, got {conc:?}"));
    }
    let mut draws: Vec<f64> = Vec::with_capacity(conc.len());
    for &c in conc {
        let g = Gamma::new(c, 1.0).map_err(|e| Error::Domain(e.to_string()))?;
        draws.push(g.sample(rng));
    }
    let sum: f64 = draws.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        return LocalController::from_weights(&draws);
    }
    // Every gamma draw underflowed; only possible for tiny concentrations,
    // where the Dirichlet is essentially a point mass on one vertex.
    let j = sample_categorical(conc, rng)?;
    Ok(LocalController::point_mass(conc.len(), j))
}

/// Draws index `j` with probability `w_j / Σ w`.
pub fn sample_categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Result<usize> {
    let mut total = 0.0;
    for &w in weights {
        if !w.is_finite() || w < 0.0 {
            return domain(format!("categorical weights must be finite and non-negative: {weights:?}"));
        }
        total += w;
    }
    if !(total > 0.0) || !total.is_finite() {
        return domain("categorical weights are all zero");
    }
    Ok(draw_unchecked(weights, total, rng))
}

/// Categorical draw from unnormalized log weights.
pub fn sample_log_categorical<R: Rng + ?Sized>(log_weights: &[f64], rng: &mut R) -> Result<usize> {
    let max = log_weights
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return domain("log weights are all -inf or non-finite");
    }
    let mut total = 0.0;
    let mut w = Vec::with_capacity(log_weights.len());
    for &l in log_weights {
        if l.is_nan() {
            return domain("NaN log weight");
        }
        let d = l - max;
        let v = if d < LOG_WEIGHT_FLOOR { 0.0 } else { d.exp() };
        total += v;
        w.push(v);
    }
    Ok(draw_unchecked(&w, total, rng))
}

/// Linear-scan draw; `total` must be the positive sum of `weights`.
pub(crate) fn draw_unchecked<R: Rng + ?Sized>(weights: &[f64], total: f64, rng: &mut R) -> usize {
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (j, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = j;
            if u < acc {
                return j;
            }
        }
    }
    last_positive
}

/// Normalizes log weights in place into probabilities (max-subtracted).
pub fn normalize_log_weights(log_weights: &[f64]) -> Result<Vec<f64>> {
    let max = log_weights
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return domain("log weights are all -inf");
    }
    let w: Vec<f64> = log_weights
        .iter()
        .map(|l| {
            let d = l - max;
            if d < LOG_WEIGHT_FLOOR {
                0.0
            } else {
                d.exp()
            }
        })
        .collect();
    let total: f64 = w.iter().sum();
    Ok(w.into_iter().map(|v| v / total).collect())
}

/// Log density (continuous) or log probability (finite) of reaching `next`
/// from `from` under action `action`.
pub fn log_transition_density(
    model: &TransitionModel,
    from: State,
    action: usize,
    next: State,
) -> Result<f64> {
    if action >= model.n_actions() {
        return domain(format!("action {action} out of range"));
    }
    match (model, from, next) {
        (
            TransitionModel::GaussianKernel {
                step,
                sigma,
                actions,
            },
            State::Point(s),
            State::Point(t),
        ) => Ok(gaussian_log_density(s, t, *step, *sigma, actions.unit(action))),
        (TransitionModel::FiniteTable(table), State::Index(s), State::Index(t)) => {
            if s >= table.n_states() || t >= table.n_states() {
                return domain(format!(
                    "state out of range ({s} -> {t}, {} states)",
                    table.n_states()
                ));
            }
            Ok(table.prob(s, action, t).ln())
        }
        _ => Err(Error::Structural(
            "state kind does not match the transition model".into(),
        )),
    }
}

pub(crate) fn gaussian_log_density(
    from: [f64; 2],
    to: [f64; 2],
    step: f64,
    sigma: f64,
    dir: [f64; 2],
) -> f64 {
    let dx = to[0] - from[0] - step * dir[0];
    let dy = to[1] - from[1] - step * dir[1];
    let var = sigma * sigma;
    -(dx * dx + dy * dy) / (2.0 * var) - (2.0 * PI * var).ln()
}
