//! Monte Carlo experiments: configuration, seeding, aggregation and output.
//!
//! An experiment simulates fresh data for every run, fits every requested
//! model variant to it and records a learning curve per chain. Runs are
//! seeded from the root seed alone, so results do not depend on the worker
//! count or schedule.

mod config;
mod tasks;

pub use config::FlatConfig;
pub use tasks::{EnvSpec, GridTask, World};

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::dists::stream_id;
use crate::error::{domain, Error, Result};
use crate::exec::Execution;
use crate::metrics::{learning_curve, CurveMetric, CurvePoint, EvalSet};
use crate::priors::PriorKind;
use crate::samplers::{Chain, ModelKind, SampleRecord, SamplerConfig};

/// Environment variable capping the worker pool.
pub const THREADS_VAR: &str = "POLREC_THREADS";

/// Worker cap from `POLREC_THREADS`, if set to a positive integer.
pub fn worker_threads() -> Option<usize> {
    std::env::var(THREADS_VAR).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    ActionEmd,
    NextStateEmd,
}

impl std::str::FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "action-emd" | "action_emd" => Ok(MetricKind::ActionEmd),
            "next-state-emd" | "next_state_emd" => Ok(MetricKind::NextStateEmd),
            _ => Err(Error::Config(format!("unknown metric '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSpec {
    pub metric: MetricKind,
    /// Also evaluate off-trajectory states.
    pub grid: bool,
    pub extent: f64,
    pub spacing: f64,
    /// Evaluate every `every`-th sweep (sweep 0 is always included).
    pub every: usize,
}

impl Default for EvalSpec {
    fn default() -> Self {
        Self { metric: MetricKind::ActionEmd, grid: false, extent: 7.0, spacing: 1.0, every: 1 }
    }
}

/// A model together with its indicator prior.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Variant {
    pub model: ModelKind,
    pub prior: PriorKind,
}

impl Variant {
    pub fn new(model: ModelKind, prior: PriorKind) -> Self {
        let prior = if model.is_mixture() { prior } else { PriorKind::None };
        Self { model, prior }
    }

    /// `model` or, for mixtures, `model_prior`.
    pub fn label(&self) -> String {
        if self.model.is_mixture() {
            format!("{}_{}", self.model, self.prior)
        } else {
            self.model.to_string()
        }
    }

    /// Parses `model` or `model:prior`; mixtures without a prior get `default_prior`.
    pub fn parse(s: &str, default_prior: PriorKind) -> Result<Self> {
        let (m, p) = match s.split_once(':') {
            Some((m, p)) => (m.trim(), Some(p.trim().parse()?)),
            None => (s.trim(), None),
        };
        let model: ModelKind = m.parse()?;
        if p.is_some() && !model.is_mixture() {
            return Err(Error::Config(format!("model '{model}' takes no indicator prior")));
        }
        Ok(Self::new(model, p.unwrap_or(default_prior)))
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub env: EnvSpec,
    /// Shared sampler settings; model and prior come from each variant.
    pub sampler: SamplerConfig,
    pub variants: Vec<Variant>,
    pub eval: EvalSpec,
    pub runs: usize,
    pub root_seed: u64,
    pub out_dir: Option<PathBuf>,
    pub hash: String,
}

impl ExperimentSpec {
    /// Parses a flat configuration. Relative output directories are resolved
    /// against `base`.
    pub fn parse(text: &str, base: Option<&Path>) -> Result<Self> {
        let c = FlatConfig::parse(text)?;
        let kind = c.get_or("env.kind", "circular".to_string())?;
        let env = match kind.as_str() {
            "circular" => {
                let d = EnvSpec::circular();
                let EnvSpec::Circular { sigma, n_actions, reversal_radius, n_traj, length } = d else {
                    unreachable!()
                };
                EnvSpec::Circular {
                    sigma: c.get_or("env.sigma", sigma)?,
                    n_actions: c.get_or("env.actions", n_actions)?,
                    reversal_radius: c.get_or("env.reversal_radius", reversal_radius)?,
                    n_traj: c.get_or("env.n_traj", n_traj)?,
                    length: c.get_or("env.length", length)?,
                }
            }
            "grid" => {
                let d = EnvSpec::grid();
                let EnvSpec::Grid { half_width, sigma, n_actions, discount, eta, n_traj, length } = d else {
                    unreachable!()
                };
                EnvSpec::Grid {
                    half_width: c.get_or("env.half_width", half_width)?,
                    sigma: c.get_or("env.sigma", sigma)?,
                    n_actions: c.get_or("env.actions", n_actions)?,
                    discount: c.get_or("env.discount", discount)?,
                    eta: c.get_or("env.eta", eta)?,
                    n_traj: c.get_or("env.n_traj", n_traj)?,
                    length: c.get_or("env.length", length)?,
                }
            }
            other => return Err(Error::Config(format!("unknown environment '{other}'"))),
        };

        let d = SamplerConfig::default();
        let sampler = SamplerConfig {
            sweeps: c.get_or("sampler.sweeps", d.sweeps)?,
            burn_in: c.get_or("sampler.burn_in", d.burn_in)?,
            thin: c.get_or("sampler.thin", d.thin)?,
            alpha: c.get_or("sampler.alpha", d.alpha)?,
            n_clusters: c.get_or("sampler.n_clusters", d.n_clusters)?,
            gamma: c.get_or("crp.gamma", d.gamma)?,
            beta: c.get_or("potts.beta", d.beta)?,
            knn: c.get_or("potts.knn", d.knn)?,
            sigma_f: c.get_or("kernel.sigma_f", d.sigma_f)?,
            epsilon: c.get_or("kernel.epsilon", d.epsilon)?,
            nu_init: c.get_or("ddcrp.nu_init", d.nu_init)?,
            lambda: c.get_or("ddcrp.lambda", d.lambda)?,
            ..d
        };
        let default_prior: PriorKind = c.get_or("sampler.prior", PriorKind::Potts)?;
        let variants = match c.list("sampler.models") {
            Some(list) => list
                .iter()
                .map(|s| Variant::parse(s, default_prior))
                .collect::<Result<Vec<_>>>()?,
            None => vec![Variant::new(ModelKind::Ddcrp, PriorKind::None)],
        };

        let metric_default = if env.is_grid() { MetricKind::NextStateEmd } else { MetricKind::ActionEmd };
        let e = EvalSpec::default();
        let eval = EvalSpec {
            metric: c.get_or("eval.metric", metric_default)?,
            grid: c.get_or("eval.grid", e.grid)?,
            extent: c.get_or("eval.extent", e.extent)?,
            spacing: c.get_or("eval.spacing", e.spacing)?,
            every: c.get_or("eval.every", e.every)?,
        };
        let runs = c.get_or("monte_carlo.runs", 10usize)?;
        let root_seed = c.get_or("monte_carlo.root_seed", 0u64)?;
        let out_dir = c.get::<PathBuf>("monte_carlo.out_dir")?.map(|p| match base {
            Some(b) if p.is_relative() => b.join(p),
            _ => p,
        });
        c.reject_unused()?;

        let spec = Self { env, sampler, variants, eval, runs, root_seed, out_dir, hash: c.hash() };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text, path.parent())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.runs == 0 {
            return bad("at least one Monte Carlo run is required".into());
        }
        if self.variants.is_empty() {
            return bad("no models to run".into());
        }
        if self.eval.every == 0 {
            return bad("eval.every must be at least 1".into());
        }
        if !(self.eval.spacing > 0.0) || !(self.eval.extent >= 0.0) {
            return bad("evaluation lattice needs a positive spacing and a non-negative extent".into());
        }
        if self.eval.metric == MetricKind::NextStateEmd && !self.env.is_grid() {
            return bad("next-state EMD needs the finite grid world".into());
        }
        for v in &self.variants {
            SamplerConfig { model: v.model, prior: v.prior, ..self.sampler.clone() }.validate()?;
        }
        Ok(())
    }

    /// Seed of run `run`, derived from the root seed only.
    pub fn run_seed(&self, run: usize) -> u64 {
        stream_id(&[self.root_seed, run as u64])
    }

    /// Sampler settings of one chain.
    pub fn chain_config(&self, variant: usize, run: usize) -> SamplerConfig {
        let v = self.variants[variant];
        SamplerConfig {
            model: v.model,
            prior: v.prior,
            burn_in: 0,
            thin: 1,
            seed: self.run_seed(run),
            stream: 1 + variant as u64,
            execution: Execution::Sequential,
            ..self.sampler.clone()
        }
    }
}

/// Everything kept from one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub run: usize,
    pub seed: u64,
    pub curve: Vec<CurvePoint>,
    pub grid_curve: Option<Vec<CurvePoint>>,
    /// Active cluster count of every retained sample after burn-in.
    pub cluster_counts: Vec<usize>,
    /// Self-link weight of every retained sample after burn-in (ddCRP).
    pub nus: Vec<f64>,
}

/// Across-run mean and population standard deviation at one sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggPoint {
    pub sweep: usize,
    pub mean: f64,
    pub std: f64,
    pub n_runs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NuSummary {
    pub mean: f64,
    pub std: f64,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariantResult {
    pub variant: Variant,
    pub runs: Vec<RunResult>,
    pub curve: Vec<AggPoint>,
    pub grid_curve: Option<Vec<AggPoint>>,
    pub cluster_histogram: Option<Vec<(usize, f64)>>,
    pub nu: Option<NuSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub spec_hash: String,
    pub root_seed: u64,
    pub variants: Vec<VariantResult>,
}

impl ExperimentResult {
    pub fn variant(&self, model: ModelKind, prior: PriorKind) -> Option<&VariantResult> {
        let v = Variant::new(model, prior);
        self.variants.iter().find(|r| r.variant == v)
    }
}

fn sorted_sum(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v.iter().sum()
}

/// Mean and population standard deviation. The values are sorted before
/// summation, so the result does not depend on their order.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = sorted_sum(values.to_vec()) / n;
    let var = sorted_sum(values.iter().map(|x| (x - mean) * (x - mean)).collect()) / n;
    (mean, var.sqrt())
}

/// Per-sweep mean and standard deviation across runs.
pub fn aggregate(curves: &[Vec<CurvePoint>]) -> Result<Vec<AggPoint>> {
    let Some(first) = curves.first() else {
        return domain("nothing to aggregate");
    };
    let mut out = Vec::with_capacity(first.len());
    for (idx, p) in first.iter().enumerate() {
        let mut vals = Vec::with_capacity(curves.len());
        for c in curves {
            match c.get(idx) {
                Some(q) if q.sweep == p.sweep => vals.push(q.mean_emd),
                _ => return Err(Error::Structural("runs recorded different sweeps".into())),
            }
        }
        let (mean, std) = mean_std(&vals);
        out.push(AggPoint { sweep: p.sweep, mean, std, n_runs: curves.len() });
    }
    if curves.iter().any(|c| c.len() != first.len()) {
        return Err(Error::Structural("runs recorded different sweeps".into()));
    }
    Ok(out)
}

fn histogram(counts: impl IntoIterator<Item = usize>) -> Vec<(usize, f64)> {
    let mut h: BTreeMap<usize, usize> = BTreeMap::new();
    let mut n = 0;
    for k in counts {
        *h.entry(k).or_insert(0) += 1;
        n += 1;
    }
    h.into_iter().map(|(k, c)| (k, c as f64 / n as f64)).collect()
}

/// Normalized histogram of active cluster counts.
pub fn cluster_count_histogram(records: &[SampleRecord]) -> Result<Vec<(usize, f64)>> {
    if records.is_empty() {
        return domain("no records");
    }
    if let Some(r) = records.iter().find(|r| !r.model.is_nonparametric()) {
        return domain(format!("model '{}' has a fixed cluster count", r.model));
    }
    Ok(histogram(records.iter().map(SampleRecord::n_active_clusters)))
}

/// The most frequent count, smallest on ties.
pub fn histogram_mode(h: &[(usize, f64)]) -> Option<usize> {
    h.iter()
        .fold(None, |best: Option<(usize, f64)>, &(k, p)| match best {
            Some((_, bp)) if bp >= p => best,
            _ => Some((k, p)),
        })
        .map(|(k, _)| k)
}

/// Mean curve level over the trailing `fraction` of the points.
pub fn final_level(curve: &[AggPoint], fraction: f64) -> f64 {
    let n = ((curve.len() as f64 * fraction).ceil() as usize).clamp(1, curve.len().max(1));
    let tail = &curve[curve.len() - n..];
    tail.iter().map(|p| p.mean).sum::<f64>() / n as f64
}

/// First sweep at which the mean curve is within `tol` (relative) of `level`.
pub fn settling_sweep(curve: &[AggPoint], level: f64, tol: f64) -> Option<usize> {
    curve.iter().find(|p| p.mean <= level * (1.0 + tol)).map(|p| p.sweep)
}

struct RunData {
    world: World,
    problem: crate::problem::Problem,
    eval: EvalSet,
    grid: Option<EvalSet>,
}

fn prepare(spec: &ExperimentSpec, run: usize) -> Result<RunData> {
    let seed = spec.run_seed(run);
    let world = World::new(&spec.env, seed)?;
    let (n_traj, length) = match spec.env {
        EnvSpec::Circular { n_traj, length, .. } | EnvSpec::Grid { n_traj, length, .. } => (n_traj, length),
    };
    let traj = world.simulate(n_traj, length, seed)?;
    let problem = world.problem(&traj)?;
    let eval = world.trajectory_eval(&problem)?;
    let grid = if spec.eval.grid {
        Some(world.grid_eval(&problem, spec.eval.extent, spec.eval.spacing)?)
    } else {
        None
    };
    Ok(RunData { world, problem, eval, grid })
}

fn run_one(spec: &ExperimentSpec, data: &RunData, variant: usize, run: usize) -> Result<RunResult> {
    let cfg = spec.chain_config(variant, run);
    let alpha = cfg.alpha;
    let positions;
    let metric = match (&data.world, spec.eval.metric) {
        (w, MetricKind::ActionEmd) => CurveMetric::ActionEmd(w.actions()),
        (World::Grid(t), MetricKind::NextStateEmd) => {
            positions = t.positions()?;
            CurveMetric::NextStateEmd { truth: &t.world.table, assumed: &t.assumed, positions: &positions }
        }
        (World::Circular(_), MetricKind::NextStateEmd) => {
            return Err(Error::Config("next-state EMD needs the finite grid world".into()))
        }
    };
    let seq = Execution::Sequential;
    let point = |r: &SampleRecord, set: &EvalSet| -> Result<CurvePoint> {
        Ok(learning_curve(std::slice::from_ref(r), set, metric, alpha, seq)?[0])
    };

    let mut chain = Chain::new(&data.problem, cfg)?;
    let first = chain.record();
    let mut curve = vec![point(&first, &data.eval)?];
    let mut grid_curve = match &data.grid {
        Some(g) => Some(vec![point(&first, g)?]),
        None => None,
    };
    let mut cluster_counts = Vec::new();
    let mut nus = Vec::new();
    let (every, burn_in) = (spec.eval.every, spec.sampler.burn_in);
    let keep = |s: usize| spec.sampler.is_recorded(s);
    chain.run(|c| {
        let s = c.sweep_index();
        let evaluate = s % every == 0 || s == spec.sampler.sweeps;
        if !evaluate && !(s > burn_in && keep(s)) {
            return Ok(());
        }
        let r = c.record();
        if evaluate {
            curve.push(point(&r, &data.eval)?);
            if let (Some(g), Some(gc)) = (&data.grid, grid_curve.as_mut()) {
                gc.push(point(&r, g)?);
            }
        }
        if keep(s) {
            cluster_counts.push(r.n_active_clusters());
            if let Some(nu) = r.nu {
                nus.push(nu);
            }
        }
        Ok(())
    })?;
    Ok(RunResult { run, seed: spec.run_seed(run), curve, grid_curve, cluster_counts, nus })
}

/// Runs every variant on every Monte Carlo run and aggregates the curves.
pub fn run_experiment(spec: &ExperimentSpec, exec: Execution) -> Result<ExperimentResult> {
    spec.validate()?;
    let wrap = |run: usize, e: Error| Error::Run { run, seed: spec.run_seed(run), source: Box::new(e) };
    let n_var = spec.variants.len();
    let results: Vec<Result<RunResult>> = exec.install(worker_threads(), || {
        let data: Vec<Result<RunData>> = exec.map_range(spec.runs, |run| prepare(spec, run));
        let data = data
            .into_iter()
            .enumerate()
            .map(|(run, d)| d.map_err(|e| wrap(run, e)))
            .collect::<Result<Vec<_>>>()?;
        Ok::<_, Error>(exec.map_range(spec.runs * n_var, |job| {
            let (run, variant) = (job / n_var, job % n_var);
            log::info!("run {run}: {}", spec.variants[variant].label());
            run_one(spec, &data[run], variant, run).map_err(|e| wrap(run, e))
        }))
    })?;

    let mut per_variant: Vec<Vec<RunResult>> = vec![Vec::new(); n_var];
    for (job, r) in results.into_iter().enumerate() {
        per_variant[job % n_var].push(r?);
    }
    let variants = spec
        .variants
        .iter()
        .zip(per_variant)
        .map(|(&variant, runs)| -> Result<VariantResult> {
            let curves: Vec<_> = runs.iter().map(|r| r.curve.clone()).collect();
            let grid_curve = if spec.eval.grid {
                let g: Vec<_> = runs.iter().map(|r| r.grid_curve.clone().unwrap_or_default()).collect();
                Some(aggregate(&g)?)
            } else {
                None
            };
            let cluster_histogram = variant
                .model
                .is_nonparametric()
                .then(|| histogram(runs.iter().flat_map(|r| r.cluster_counts.iter().copied())));
            let nus: Vec<f64> = runs.iter().flat_map(|r| r.nus.iter().copied()).collect();
            let nu = (!nus.is_empty()).then(|| {
                let (mean, std) = mean_std(&nus);
                NuSummary { mean, std, n_samples: nus.len() }
            });
            Ok(VariantResult { variant, curve: aggregate(&curves)?, grid_curve, cluster_histogram, nu, runs })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentResult { spec_hash: spec.hash.clone(), root_seed: spec.root_seed, variants })
}

/// Header comment line shared by every output file.
pub fn header_line(spec_hash: &str, root_seed: u64) -> String {
    format!("# spec_hash={spec_hash} root_seed={root_seed}\n")
}

fn write_csv<F>(path: &Path, header: &str, fill: F) -> Result<()>
where
    F: FnOnce(&mut csv::Writer<&mut fs::File>) -> Result<()>,
{
    let mut file = fs::File::create(path)?;
    file.write_all(header.as_bytes())?;
    let mut w = csv::Writer::from_writer(&mut file);
    fill(&mut w)?;
    w.flush()?;
    Ok(())
}

fn write_agg(path: &Path, header: &str, curve: &[AggPoint]) -> Result<()> {
    write_csv(path, header, |w| {
        w.write_record(["sweep", "mean", "std", "n_runs"])?;
        for p in curve {
            w.write_record([p.sweep.to_string(), p.mean.to_string(), p.std.to_string(), p.n_runs.to_string()])?;
        }
        Ok(())
    })
}

/// Writes a curve as `sweep,mean_emd,n_states`.
pub fn write_curve(path: &Path, header: &str, curve: &[CurvePoint]) -> Result<()> {
    write_csv(path, header, |w| {
        w.write_record(["sweep", "mean_emd", "n_states"])?;
        for p in curve {
            w.write_record([p.sweep.to_string(), p.mean_emd.to_string(), p.n_states.to_string()])?;
        }
        Ok(())
    })
}

/// Writes one directory per variant plus a `summary.csv` under `dir`.
pub fn write_outputs(result: &ExperimentResult, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let header = header_line(&result.spec_hash, result.root_seed);
    for v in &result.variants {
        let sub = dir.join(v.variant.label());
        fs::create_dir_all(&sub)?;
        write_agg(&sub.join("curve_agg.csv"), &header, &v.curve)?;
        if let Some(g) = &v.grid_curve {
            write_agg(&sub.join("grid_curve_agg.csv"), &header, g)?;
        }
        for r in &v.runs {
            write_curve(&sub.join(format!("run_{:03}.csv", r.run)), &header, &r.curve)?;
            if let Some(g) = &r.grid_curve {
                write_curve(&sub.join(format!("grid_run_{:03}.csv", r.run)), &header, g)?;
            }
        }
        if let Some(h) = &v.cluster_histogram {
            write_csv(&sub.join("cluster_hist.csv"), &header, |w| {
                w.write_record(["clusters", "probability"])?;
                for (k, p) in h {
                    w.write_record([k.to_string(), p.to_string()])?;
                }
                Ok(())
            })?;
        }
        if let Some(nu) = &v.nu {
            write_csv(&sub.join("nu_summary.csv"), &header, |w| {
                w.write_record(["mean", "std", "n_samples"])?;
                w.write_record([nu.mean.to_string(), nu.std.to_string(), nu.n_samples.to_string()])?;
                Ok(())
            })?;
        }
    }
    write_csv(&dir.join("summary.csv"), &header, |w| {
        w.write_record(["model", "initial_mean", "final_mean", "final_std"])?;
        for v in &result.variants {
            let last = v.curve.last().expect("curves are never empty");
            w.write_record([
                v.variant.label(),
                v.curve[0].mean.to_string(),
                final_level(&v.curve, 0.1).to_string(),
                last.std.to_string(),
            ])?;
        }
        Ok(())
    })
}
