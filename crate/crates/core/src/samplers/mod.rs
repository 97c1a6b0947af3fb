//! Gibbs samplers over actions, indicators, links and controllers.
//!
//! One [`Chain`] implements all six models. A sweep resamples every action in
//! time order, then every indicator (or ddCRP link) in site order, then the
//! controllers and mixing weights of the non-collapsed models and finally the
//! ddCRP self-link weight. Nonparametric models renumber their clusters at
//! the end of each sweep.

mod chain;
mod links;

pub use chain::{mh_update_self_link, Chain};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::priors::PriorKind;
use crate::problem::Problem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// One controller per site, sampled explicitly.
    Static,
    /// One controller per site, integrated out.
    StaticCollapsed,
    /// `K` shared controllers with explicit parameters.
    Mixture,
    /// `K` shared controllers integrated out.
    MixtureCollapsed,
    /// Dirichlet process mixture with explicit controllers.
    Dpmm,
    /// Distance-dependent CRP with controllers integrated out.
    Ddcrp,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Static,
        ModelKind::StaticCollapsed,
        ModelKind::Mixture,
        ModelKind::MixtureCollapsed,
        ModelKind::Dpmm,
        ModelKind::Ddcrp,
    ];

    /// Whether the controllers are integrated out.
    pub fn is_collapsed(self) -> bool {
        matches!(
            self,
            ModelKind::StaticCollapsed | ModelKind::MixtureCollapsed | ModelKind::Ddcrp
        )
    }

    pub fn is_nonparametric(self) -> bool {
        matches!(self, ModelKind::Dpmm | ModelKind::Ddcrp)
    }

    pub fn is_static(self) -> bool {
        matches!(self, ModelKind::Static | ModelKind::StaticCollapsed)
    }

    pub fn is_mixture(self) -> bool {
        matches!(self, ModelKind::Mixture | ModelKind::MixtureCollapsed)
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Static => "static",
            ModelKind::StaticCollapsed => "static-collapsed",
            ModelKind::Mixture => "mixture",
            ModelKind::MixtureCollapsed => "mixture-collapsed",
            ModelKind::Dpmm => "dpmm",
            ModelKind::Ddcrp => "ddcrp",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|m| m.name() == s || m.name().replace('-', "_") == s)
            .ok_or_else(|| Error::Config(format!("unknown model '{s}'")))
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Everything that controls one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub model: ModelKind,
    /// Indicator prior of the finite mixtures; ignored by the other models.
    pub prior: PriorKind,
    pub sweeps: usize,
    /// Sweeps discarded before the first recorded one.
    pub burn_in: usize,
    /// Record every `thin`-th sweep after burn-in.
    pub thin: usize,
    /// Symmetric Dirichlet concentration of every controller.
    pub alpha: f64,
    /// Mixing / CRP concentration.
    pub gamma: f64,
    /// Potts temperature.
    pub beta: f64,
    /// Number of mixture components.
    pub n_clusters: usize,
    /// Width of the decay kernels.
    pub sigma_f: f64,
    /// Offset of the ddCRP kernel.
    pub epsilon: f64,
    /// Nearest neighbors per site in the Potts graph.
    pub knn: usize,
    pub nu_init: f64,
    /// Rate of the exponential prior on the self-link weight.
    pub lambda: f64,
    pub seed: u64,
    pub stream: u64,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::Ddcrp,
            prior: PriorKind::None,
            sweeps: 1000,
            burn_in: 0,
            thin: 1,
            alpha: 1.0,
            gamma: 1.0,
            beta: 1.6,
            n_clusters: 8,
            sigma_f: 1.0,
            epsilon: 0.01,
            knn: 8,
            nu_init: 1.0,
            lambda: 0.1,
            seed: 0,
            stream: 0,
            execution: Execution::default(),
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.sweeps > 0 && self.burn_in >= self.sweeps {
            return bad(format!(
                "burn-in ({}) must be smaller than the sweep count ({})",
                self.burn_in, self.sweeps
            ));
        }
        if self.thin == 0 {
            return bad("thinning must be at least 1".into());
        }
        for (name, v) in [("alpha", self.alpha), ("gamma", self.gamma), ("lambda", self.lambda), ("sigma_f", self.sigma_f)] {
            if !(v > 0.0) || !v.is_finite() {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return bad(format!("beta must be non-negative, got {}", self.beta));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return bad(format!("epsilon must lie in [0, 1], got {}", self.epsilon));
        }
        if !(self.nu_init >= 0.0) || !self.nu_init.is_finite() {
            return bad(format!("nu_init must be non-negative, got {}", self.nu_init));
        }
        if self.model.is_mixture() && self.n_clusters == 0 {
            return bad("mixture models need at least one cluster".into());
        }
        Ok(())
    }

    /// Whether sweep `s` (counted from 1) is recorded.
    pub fn is_recorded(&self, s: usize) -> bool {
        s > self.burn_in && (s - self.burn_in).is_multiple_of(self.thin)
    }
}

/// The latent configuration after one sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub sweep: usize,
    pub model: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    /// Cluster label per site, `0..K`.
    pub z: Vec<usize>,
    /// Action per step.
    pub actions: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub links: Option<Vec<usize>>,
    /// Controller per cluster (non-collapsed models).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controllers: Option<Vec<Vec<f64>>>,
    /// Action counts per cluster (collapsed models).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster_counts: Option<Vec<Vec<u32>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixing: Option<Vec<f64>>,
}

impl SampleRecord {
    /// Number of distinct clusters in use.
    pub fn n_active_clusters(&self) -> usize {
        let mut seen: Vec<usize> = self.z.clone();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }
}

/// Runs a chain and collects every recorded sweep.
pub fn run_chain(problem: &Problem, config: &SamplerConfig) -> Result<Vec<SampleRecord>> {
    let mut chain = Chain::new(problem, config.clone())?;
    let mut records = Vec::new();
    chain.run(|c| {
        records.push(c.record());
        Ok(())
    })?;
    Ok(records)
}

/// Writes records as JSON lines, one record per line.
pub fn write_records<W: std::io::Write>(mut out: W, records: &[SampleRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads records written by [`write_records`]. Blank lines are skipped.
pub fn read_records<R: std::io::BufRead>(input: R) -> Result<Vec<SampleRecord>> {
    let mut out = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: idx + 1,
            msg: e.to_string(),
        })?);
    }
    Ok(out)
}
