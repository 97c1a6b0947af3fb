use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use polrec::harness::{self, EnvSpec, ExperimentSpec, GridTask, World};
use polrec::metrics::{learning_curve, CurveMetric, EvalSet};
use polrec::priors::PriorKind;
use polrec::samplers::{read_records, write_records, Chain, ModelKind, SamplerConfig};
use polrec::{Execution, Trajectory};

#[derive(Parser)]
#[command(name = "polrec", version, about = "Bayesian policy recognition from state trajectories")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate expert trajectories.
    Simulate(SimulateArgs),
    /// Run one Gibbs chain on a trajectory file.
    Infer(InferArgs),
    /// Compute a learning curve from sample records.
    Evaluate(EvaluateArgs),
    /// Run a Monte Carlo experiment described by a spec file.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum EnvKind {
    Circular,
    Grid,
}

/// The world the trajectories come from.
#[derive(Args)]
struct EnvArgs {
    #[arg(long, value_enum, default_value = "circular")]
    env: EnvKind,
    /// Motion noise (default 0.2 circular, 1.0 grid).
    #[arg(long)]
    sigma: Option<f64>,
    /// Number of actions (default 24 circular, 8 grid).
    #[arg(long)]
    actions: Option<usize>,
    #[arg(long, default_value_t = 10)]
    half_width: usize,
    #[arg(long, default_value_t = 0.9)]
    discount: f64,
    /// Seed of the grid-world rewards and model perturbation.
    #[arg(long, default_value_t = 0)]
    reward_seed: u64,
    /// Perturbation strength of the learner's grid model.
    #[arg(long, default_value_t = 0.0)]
    eta: f64,
}

impl EnvArgs {
    fn world(&self, kind: EnvKind) -> Result<World> {
        let spec = match kind {
            EnvKind::Circular => {
                let EnvSpec::Circular { sigma, n_actions, reversal_radius, n_traj, length } = EnvSpec::circular()
                else {
                    unreachable!()
                };
                EnvSpec::Circular {
                    sigma: self.sigma.unwrap_or(sigma),
                    n_actions: self.actions.unwrap_or(n_actions),
                    reversal_radius,
                    n_traj,
                    length,
                }
            }
            EnvKind::Grid => {
                let EnvSpec::Grid { sigma, n_actions, n_traj, length, .. } = EnvSpec::grid() else {
                    unreachable!()
                };
                EnvSpec::Grid {
                    half_width: self.half_width,
                    sigma: self.sigma.unwrap_or(sigma),
                    n_actions: self.actions.unwrap_or(n_actions),
                    discount: self.discount,
                    eta: self.eta,
                    n_traj,
                    length,
                }
            }
        };
        Ok(World::new(&spec, self.reward_seed)?)
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    env: EnvArgs,
    #[arg(long = "traj", default_value_t = 10)]
    n_traj: usize,
    #[arg(long = "len", default_value_t = 100)]
    length: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct InferArgs {
    #[command(flatten)]
    env: EnvArgs,
    #[arg(long, default_value = "ddcrp")]
    model: ModelKind,
    /// Indicator prior of the mixture models.
    #[arg(long, default_value = "potts")]
    prior: PriorKind,
    #[arg(long = "K", default_value_t = 8)]
    n_clusters: usize,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = 1.6)]
    beta: f64,
    #[arg(long, default_value_t = 1000)]
    sweeps: usize,
    #[arg(long = "burnin", default_value_t = 0)]
    burn_in: usize,
    #[arg(long, default_value_t = 1)]
    thin: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    traj: PathBuf,
    /// Output directory; records go to `records.jsonl` inside it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExpertKind {
    Circular,
    GridMdp,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    ActionEmd,
    NextStateEmd,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    env: EnvArgs,
    /// Directory holding `records.jsonl`.
    #[arg(long)]
    records: PathBuf,
    #[arg(long)]
    traj: PathBuf,
    #[arg(long, value_enum, default_value = "circular")]
    expert: ExpertKind,
    #[arg(long, value_enum, default_value = "action-emd")]
    metric: MetricArg,
    /// Evaluate off-trajectory states instead of the trajectory states.
    #[arg(long)]
    grid_eval: bool,
    #[arg(long, default_value_t = 7.0)]
    extent: f64,
    #[arg(long, default_value_t = 1.0)]
    spacing: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    spec: PathBuf,
    /// Overrides the spec's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read_trajectory(path: &Path) -> Result<Trajectory> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(Trajectory::read_csv(BufReader::new(file))?)
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let world = a.env.world(a.env.env)?;
    let traj = world.simulate(a.n_traj, a.length, a.seed)?;
    traj.write_csv(BufWriter::new(File::create(&a.out)?))?;
    log::info!("wrote {} states to {}", traj.len(), a.out.display());
    Ok(())
}

fn infer(a: InferArgs) -> Result<()> {
    let world = a.env.world(a.env.env)?;
    let traj = read_trajectory(&a.traj)?;
    let problem = world.problem(&traj)?;
    let cfg = SamplerConfig {
        model: a.model,
        prior: a.prior,
        n_clusters: a.n_clusters,
        alpha: a.alpha,
        gamma: a.gamma,
        beta: a.beta,
        sweeps: a.sweeps,
        burn_in: a.burn_in,
        thin: a.thin,
        seed: a.seed,
        ..Default::default()
    };
    let mut chain = Chain::new(&problem, cfg)?;
    let mut records = vec![chain.record()];
    chain.run(|c| {
        records.push(c.record());
        Ok(())
    })?;
    fs::create_dir_all(&a.out)?;
    let path = a.out.join("records.jsonl");
    write_records(BufWriter::new(File::create(&path)?), &records)?;
    if let Some((acc, prop)) = chain.nu_acceptance() {
        log::info!("self-link acceptance {acc}/{prop}");
    }
    log::info!("wrote {} records to {}", records.len(), path.display());
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let kind = match a.expert {
        ExpertKind::Circular => EnvKind::Circular,
        ExpertKind::GridMdp => EnvKind::Grid,
    };
    let world = a.env.world(kind)?;
    let traj = read_trajectory(&a.traj)?;
    let problem = world.problem(&traj)?;
    let file = File::open(a.records.join("records.jsonl"))
        .with_context(|| format!("opening records in {}", a.records.display()))?;
    let records = read_records(BufReader::new(file))?;
    if records.is_empty() {
        bail!("no records found");
    }
    let eval: EvalSet = if a.grid_eval {
        world.grid_eval(&problem, a.extent, a.spacing)?
    } else {
        world.trajectory_eval(&problem)?
    };
    let positions;
    let metric = match (a.metric, &world) {
        (MetricArg::ActionEmd, w) => CurveMetric::ActionEmd(w.actions()),
        (MetricArg::NextStateEmd, World::Grid(t)) => {
            let t: &GridTask = t;
            positions = t.positions()?;
            CurveMetric::NextStateEmd { truth: &t.world.table, assumed: &t.assumed, positions: &positions }
        }
        (MetricArg::NextStateEmd, World::Circular(_)) => bail!("next-state EMD needs the grid-mdp expert"),
    };
    let curve = learning_curve(&records, &eval, metric, a.alpha, Execution::default())?;
    harness::write_curve(&a.out, "", &curve)?;
    Ok(())
}

fn experiment(a: ExperimentArgs) -> Result<()> {
    let spec = ExperimentSpec::from_file(&a.spec)?;
    let out = a.out.or_else(|| spec.out_dir.clone()).context("no output directory: set monte_carlo.out_dir or --out")?;
    let result = harness::run_experiment(&spec, Execution::default())?;
    harness::write_outputs(&result, &out)?;
    for v in &result.variants {
        let fin = harness::final_level(&v.curve, 0.1);
        print!("{:<32} initial {:.4} final {:.4}", v.variant.label(), v.curve[0].mean, fin);
        if let Some(h) = &v.cluster_histogram {
            print!(" cluster mode {}", harness::histogram_mode(h).unwrap_or(0));
        }
        if let Some(nu) = &v.nu {
            print!(" nu {:.4} ± {:.4}", nu.mean, nu.std);
        }
        println!();
    }
    log::info!("results in {}", out.display());
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Infer(a) => infer(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Experiment(a) => experiment(a),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
