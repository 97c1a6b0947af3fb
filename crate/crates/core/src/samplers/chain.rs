use rand::Rng;
use rand_distr::{Distribution, Exp};

use super::links::LinkGraph;
use super::{ModelKind, SampleRecord, SamplerConfig};
use crate::dists::{
    draw_unchecked, sample_categorical, sample_dirichlet, sample_log_categorical, DirMultTable,
    RngStream,
};
use crate::error::{Error, Result};
use crate::priors::{
    connected_components, potts_log_weights_into, sample_mixing_weights, self_link_log_likelihood,
    DecayKernel, DistanceTable, Neighborhood, PriorKind, DENSE_LIMIT,
};
use crate::problem::Problem;
use crate::stats::SuffStats;

/// Steps per independently seeded block of non-collapsed action draws.
const ACTION_BLOCK: usize = 256;

// Sub-stream tags below the chain's own stream.
const TAG_MAIN: u64 = 0;
const TAG_ACTIONS: u64 = 1;
const TAG_CONTROLLERS: u64 = 2;

/// The state of one Gibbs chain.
#[derive(Debug, Clone)]
pub struct Chain<'p> {
    problem: &'p Problem,
    cfg: SamplerConfig,
    rng: RngStream,
    sweep: usize,
    actions: Vec<usize>,
    z: Vec<usize>,
    stats: SuffStats,
    /// Controller per cluster slot (non-collapsed models).
    theta: Vec<Vec<f64>>,
    log_theta: Vec<Vec<f64>>,
    /// Mixing weights (`PriorKind::Mixing` only).
    q: Option<Vec<f64>>,
    /// Empty cluster slots available for reuse.
    free: Vec<usize>,
    table: DirMultTable,
    neighborhood: Option<Neighborhood>,
    ddcrp: Option<DdcrpState>,
    weights: Vec<f64>,
}

#[derive(Debug, Clone)]
struct DdcrpState {
    graph: LinkGraph,
    nu: f64,
    kernel: DecayKernel,
    /// `f(d_ij)` for all pairs when the site count allows it.
    dense: Option<Vec<f64>>,
    distances: Option<DistanceTable>,
    off_sums: Vec<f64>,
    accepted: usize,
    proposed: usize,
    row: Vec<f64>,
    merge: Vec<f64>,
}

impl DdcrpState {
    fn kernel_row(&mut self, i: usize, n: usize) {
        match &self.dense {
            Some(f) => self.row.copy_from_slice(&f[i * n..(i + 1) * n]),
            None => {
                let d = self.distances.as_ref().expect("distances kept when not dense");
                for j in 0..n {
                    self.row[j] = self.kernel.eval(d.get(i, j));
                }
            }
        }
        self.row[i] = 0.0;
    }
}

impl<'p> Chain<'p> {
    /// Initializes a chain: actions uniform, controllers from the prior.
    /// Mixture indicators start uniformly at random, the Dirichlet process
    /// mixture starts with one cluster and the ddCRP with all self-links.
    pub fn new(problem: &'p Problem, cfg: SamplerConfig) -> Result<Self> {
        cfg.validate()?;
        let n = problem.n_sites();
        let a = problem.n_actions();
        let mut rng = RngStream::derive(cfg.seed, &[cfg.stream, TAG_MAIN]);
        let actions: Vec<usize> = (0..problem.n_steps()).map(|_| rng.random_range(0..a)).collect();
        let (z, n_slots) = match cfg.model {
            ModelKind::Static | ModelKind::StaticCollapsed => ((0..n).collect(), n),
            ModelKind::Mixture | ModelKind::MixtureCollapsed => {
                let k = cfg.n_clusters;
                ((0..n).map(|_| rng.random_range(0..k)).collect(), k)
            }
            ModelKind::Dpmm => (vec![0; n], 1),
            ModelKind::Ddcrp => ((0..n).collect(), n),
        };
        let stats = SuffStats::build(problem, &actions, &z, n_slots)?;
        let table = DirMultTable::new(cfg.alpha, a, problem.n_steps() + 1)?;

        let mut theta = Vec::new();
        let mut log_theta = Vec::new();
        if !cfg.model.is_collapsed() {
            let prior = vec![cfg.alpha; a];
            for _ in 0..n_slots {
                let t = sample_dirichlet(&prior, &mut rng)?.into_probs();
                log_theta.push(t.iter().map(|p| p.ln()).collect());
                theta.push(t);
            }
        }
        let q = if cfg.model.is_mixture() && cfg.prior == PriorKind::Mixing {
            Some(sample_mixing_weights(&vec![0; cfg.n_clusters], cfg.gamma, &mut rng)?.into_probs())
        } else {
            None
        };
        let neighborhood = if cfg.model.is_mixture() && cfg.prior == PriorKind::Potts {
            Some(Neighborhood::knn(
                problem.positions(),
                cfg.knn,
                &DecayKernel::potts(cfg.sigma_f)?,
            ))
        } else {
            None
        };
        let ddcrp = if cfg.model == ModelKind::Ddcrp {
            let kernel = DecayKernel::ddcrp(cfg.sigma_f, cfg.epsilon)?;
            let distances = DistanceTable::new(problem.positions());
            let (dense, distances) = if n <= DENSE_LIMIT {
                let mut f = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..n {
                        if i != j {
                            f[i * n + j] = kernel.eval(distances.get(i, j));
                        }
                    }
                }
                (Some(f), None)
            } else {
                (None, Some(distances))
            };
            let mut state = DdcrpState {
                graph: LinkGraph::self_links(n),
                nu: cfg.nu_init,
                kernel,
                dense,
                distances,
                off_sums: Vec::with_capacity(n),
                accepted: 0,
                proposed: 0,
                row: vec![0.0; n],
                merge: Vec::new(),
            };
            for i in 0..n {
                state.kernel_row(i, n);
                let s: f64 = state.row.iter().sum();
                state.off_sums.push(s);
            }
            if cfg.nu_init == 0.0 && state.off_sums.iter().any(|&s| !(s > 0.0)) {
                return Err(Error::Domain("ddCRP link weights are all zero for some site".into()));
            }
            Some(state)
        } else {
            None
        };

        Ok(Self {
            problem,
            cfg,
            rng,
            sweep: 0,
            actions,
            z,
            stats,
            theta,
            log_theta,
            q,
            free: Vec::new(),
            table,
            neighborhood,
            ddcrp,
            weights: Vec::new(),
        })
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.cfg
    }

    pub fn problem(&self) -> &Problem {
        self.problem
    }

    /// Number of completed sweeps.
    pub fn sweep_index(&self) -> usize {
        self.sweep
    }

    pub fn actions(&self) -> &[usize] {
        &self.actions
    }

    pub fn indicators(&self) -> &[usize] {
        &self.z
    }

    pub fn stats(&self) -> &SuffStats {
        &self.stats
    }

    pub fn links(&self) -> Option<&[usize]> {
        self.ddcrp.as_ref().map(|d| d.graph.links.as_slice())
    }

    pub fn nu(&self) -> Option<f64> {
        self.ddcrp.as_ref().map(|d| d.nu)
    }

    /// Accepted and proposed self-link updates so far.
    pub fn nu_acceptance(&self) -> Option<(usize, usize)> {
        self.ddcrp.as_ref().map(|d| (d.accepted, d.proposed))
    }

    pub fn n_active_clusters(&self) -> usize {
        self.stats.zetas().iter().filter(|&&n| n > 0).count()
    }

    /// Runs the configured number of sweeps, calling `on_record` after every
    /// recorded one.
    pub fn run<F>(&mut self, mut on_record: F) -> Result<()>
    where
        F: FnMut(&Chain<'p>) -> Result<()>,
    {
        for s in 1..=self.cfg.sweeps {
            self.sweep()?;
            if self.cfg.is_recorded(s) {
                on_record(self)?;
            }
        }
        Ok(())
    }

    /// One full Gibbs sweep.
    pub fn sweep(&mut self) -> Result<()> {
        self.sweep += 1;
        if self.cfg.model.is_collapsed() {
            self.update_actions_collapsed()?;
        } else {
            self.update_actions_explicit()?;
        }
        match self.cfg.model {
            ModelKind::Static | ModelKind::StaticCollapsed => {}
            ModelKind::Mixture | ModelKind::MixtureCollapsed => self.update_indicators_finite()?,
            ModelKind::Dpmm => self.update_indicators_dpmm()?,
            ModelKind::Ddcrp => self.update_links()?,
        }
        if !self.cfg.model.is_collapsed() {
            self.update_controllers()?;
        }
        if self.q.is_some() {
            let q = sample_mixing_weights(self.stats.zetas(), self.cfg.gamma, &mut self.rng)?;
            self.q = Some(q.into_probs());
        }
        if self.ddcrp.is_some() {
            self.update_nu()?;
        }
        if self.cfg.model.is_nonparametric() {
            self.compact()?;
        }
        Ok(())
    }

    /// Non-collapsed actions are conditionally independent given the
    /// controllers, so they are drawn in blocks with one stream per block.
    fn update_actions_explicit(&mut self) -> Result<()> {
        let n_steps = self.problem.n_steps();
        let n_blocks = n_steps.div_ceil(ACTION_BLOCK);
        let problem = self.problem;
        let z = &self.z;
        let theta = &self.theta;
        let log_theta = &self.log_theta;
        let (seed, stream, sweep) = (self.cfg.seed, self.cfg.stream, self.sweep as u64);
        let a = problem.n_actions();
        let blocks = self.cfg.execution.map_range(n_blocks, |b| -> Result<Vec<usize>> {
            let mut rng = RngStream::derive(seed, &[stream, TAG_ACTIONS, sweep, b as u64]);
            let mut w = vec![0.0; a];
            let end = ((b + 1) * ACTION_BLOCK).min(n_steps);
            (b * ACTION_BLOCK..end)
                .map(|t| {
                    let k = z[problem.step_site(t)];
                    draw_explicit_action(
                        problem.lik(t),
                        problem.loglik(t),
                        &theta[k],
                        &log_theta[k],
                        &mut w,
                        &mut rng,
                    )
                })
                .collect()
        });
        let mut t = 0;
        for block in blocks {
            for new in block? {
                let old = self.actions[t];
                if new != old {
                    let i = self.problem.step_site(t);
                    self.stats.flip_action(i, self.z[i], old, new)?;
                    self.actions[t] = new;
                }
                t += 1;
            }
        }
        Ok(())
    }

    /// `P(a_t = j) ∝ T(s_{t+1} | s_t, j) (ϑ_{t,j} + α)`, one step at a time.
    fn update_actions_collapsed(&mut self) -> Result<()> {
        let a = self.problem.n_actions();
        let alpha = self.cfg.alpha;
        self.weights.resize(a, 0.0);
        for t in 0..self.problem.n_steps() {
            let i = self.problem.step_site(t);
            let k = self.z[i];
            let old = self.actions[t];
            self.stats.remove_action(i, k, old)?;
            let lik = self.problem.lik(t);
            let xi = self.stats.xi(k);
            let mut total = 0.0;
            for j in 0..a {
                let w = lik[j] * (xi[j] as f64 + alpha);
                self.weights[j] = w;
                total += w;
            }
            let new = draw_unchecked(&self.weights, total, &mut self.rng);
            self.stats.add_action(i, k, new);
            self.actions[t] = new;
        }
        Ok(())
    }

    /// Log-likelihood of the actions at site `i` under controller slot `k`.
    fn site_log_lik_explicit(&self, i: usize, k: usize) -> f64 {
        let lt = &self.log_theta[k];
        self.problem
            .site_steps(i)
            .iter()
            .map(|&t| lt[self.actions[t]])
            .sum()
    }

    fn update_indicators_finite(&mut self) -> Result<()> {
        let k_count = self.cfg.n_clusters;
        let collapsed = self.cfg.model.is_collapsed();
        let gamma = self.cfg.gamma;
        let mut lw = vec![0.0; k_count];
        for i in 0..self.problem.n_sites() {
            let old = self.z[i];
            if collapsed {
                self.stats.remove_site(i, old)?;
            }
            match self.cfg.prior {
                PriorKind::None => lw.iter_mut().for_each(|w| *w = 0.0),
                PriorKind::Mixing => {
                    let q = self.q.as_ref().expect("mixing weights present");
                    for (w, p) in lw.iter_mut().zip(q) {
                        *w = p.ln();
                    }
                }
                PriorKind::MixingCollapsed => {
                    for (k, w) in lw.iter_mut().enumerate() {
                        let mut n = self.stats.zeta(k);
                        if !collapsed && k == old {
                            n -= 1;
                        }
                        *w = (n as f64 + gamma / k_count as f64).ln();
                    }
                }
                PriorKind::Potts => {
                    let nb = self.neighborhood.as_ref().expect("Potts neighborhood present");
                    potts_log_weights_into(&self.z, i, nb, self.cfg.beta, &mut lw);
                }
            }
            if self.stats.site_total(i) > 0 {
                for (k, w) in lw.iter_mut().enumerate() {
                    *w += if collapsed {
                        self.table.log_ratio(
                            self.stats.xi(k),
                            self.stats.xi_total(k),
                            self.stats.phi(i),
                            self.stats.site_total(i),
                        )
                    } else {
                        self.site_log_lik_explicit(i, k)
                    };
                }
            }
            let new = sample_log_or_uniform(&lw, &mut self.rng);
            if collapsed {
                self.stats.add_site(i, new);
            } else {
                self.stats.move_site(i, old, new)?;
            }
            self.z[i] = new;
        }
        Ok(())
    }

    fn alloc_slot(&mut self) -> usize {
        if let Some(k) = self.free.pop() {
            return k;
        }
        let k = self.stats.push_cluster();
        if !self.cfg.model.is_collapsed() {
            self.theta.push(Vec::new());
            self.log_theta.push(Vec::new());
        }
        k
    }

    /// Existing cluster `k`: `ζ_k^{(\i)} Π_t θ_k(a_t)`; new cluster:
    /// `γ DirMult(φ_i | α)`, whose controller is drawn from `Dir(φ_i + α)`.
    fn update_indicators_dpmm(&mut self) -> Result<()> {
        let mut slots: Vec<usize> = Vec::new();
        let mut lw: Vec<f64> = Vec::new();
        for i in 0..self.problem.n_sites() {
            let old = self.z[i];
            self.stats.remove_site(i, old)?;
            if self.stats.zeta(old) == 0 {
                self.free.push(old);
            }
            slots.clear();
            lw.clear();
            for k in 0..self.stats.n_clusters() {
                let n = self.stats.zeta(k);
                if n > 0 {
                    slots.push(k);
                    lw.push((n as f64).ln() + self.site_log_lik_explicit(i, k));
                }
            }
            lw.push(self.cfg.gamma.ln() + self.table.log_dirmult(self.stats.phi(i)));
            let pick = sample_log_categorical(&lw, &mut self.rng)?;
            let k = if pick == slots.len() {
                let k = self.alloc_slot();
                let conc: Vec<f64> = self
                    .stats
                    .phi(i)
                    .iter()
                    .map(|&c| c as f64 + self.cfg.alpha)
                    .collect();
                let t = sample_dirichlet(&conc, &mut self.rng)?.into_probs();
                self.log_theta[k] = t.iter().map(|p| p.ln()).collect();
                self.theta[k] = t;
                k
            } else {
                slots[pick]
            };
            self.stats.add_site(i, k);
            self.z[i] = k;
        }
        Ok(())
    }

    /// `θ_k ~ Dir(ξ_k + α)` for every occupied slot (all slots of a finite
    /// mixture), each slot on its own stream.
    fn update_controllers(&mut self) -> Result<()> {
        let n_slots = self.stats.n_clusters();
        let skip_empty = self.cfg.model.is_nonparametric();
        let stats = &self.stats;
        let alpha = self.cfg.alpha;
        let (seed, stream, sweep) = (self.cfg.seed, self.cfg.stream, self.sweep as u64);
        let draws = self.cfg.execution.map_range(n_slots, |k| -> Result<Option<Vec<f64>>> {
            if skip_empty && stats.zeta(k) == 0 {
                return Ok(None);
            }
            let mut rng = RngStream::derive(seed, &[stream, TAG_CONTROLLERS, sweep, k as u64]);
            let conc: Vec<f64> = stats.xi(k).iter().map(|&c| c as f64 + alpha).collect();
            Ok(Some(sample_dirichlet(&conc, &mut rng)?.into_probs()))
        });
        for (k, d) in draws.into_iter().enumerate() {
            if let Some(t) = d? {
                self.log_theta[k] = t.iter().map(|p| p.ln()).collect();
                self.theta[k] = t;
            }
        }
        Ok(())
    }

    /// Resamples every link `c_i` given all others.
    fn update_links(&mut self) -> Result<()> {
        let n = self.problem.n_sites();
        let mut dd = self.ddcrp.take().expect("ddCRP state present");
        let result = (|| -> Result<()> {
            for i in 0..n {
                let old = dd.graph.detach(i);
                let a = self.z[i];
                if old != i && !dd.graph.search(i, Some(old)) {
                    // Removing the link split the component; i's side moves to a new slot.
                    let k = self.alloc_slot();
                    for idx in 0..dd.graph.visited().len() {
                        let v = dd.graph.visited()[idx];
                        self.stats.move_site(v, a, k)?;
                        self.z[v] = k;
                    }
                }
                let a = self.z[i];

                // Log merge ratio of i's component with every other component.
                let n_slots = self.stats.n_clusters();
                dd.merge.resize(n_slots, 0.0);
                let mut max = 0.0f64;
                for k in 0..n_slots {
                    let m = if k == a || self.stats.zeta(k) == 0 {
                        0.0
                    } else {
                        self.table.log_merge_ratio(
                            self.stats.xi(a),
                            self.stats.xi_total(a),
                            self.stats.xi(k),
                            self.stats.xi_total(k),
                        )
                    };
                    dd.merge[k] = m;
                    max = max.max(m);
                }
                for m in dd.merge.iter_mut() {
                    *m = (*m - max).exp();
                }
                dd.kernel_row(i, n);
                let mut total = 0.0;
                for j in 0..n {
                    let w = dd.row[j] * dd.merge[self.z[j]];
                    dd.row[j] = w;
                    total += w;
                }
                dd.row[i] = dd.nu * (-max).exp();
                total += dd.row[i];
                if !(total > 0.0) || !total.is_finite() {
                    return Err(Error::Domain(format!("link weights of site {i} vanished")));
                }
                let c = draw_unchecked(&dd.row, total, &mut self.rng);
                let b = self.z[c];
                if b != a {
                    // Relabel the smaller component before the new edge joins them.
                    let (small, large, rep) = if self.stats.zeta(a) <= self.stats.zeta(b) {
                        (a, b, i)
                    } else {
                        (b, a, c)
                    };
                    dd.graph.search(rep, None);
                    for idx in 0..dd.graph.visited().len() {
                        self.z[dd.graph.visited()[idx]] = large;
                    }
                    self.stats.merge_clusters(small, large);
                    self.free.push(small);
                }
                dd.graph.attach(i, c);
            }
            Ok(())
        })();
        self.ddcrp = Some(dd);
        result
    }

    fn update_nu(&mut self) -> Result<()> {
        let lambda = self.cfg.lambda;
        let dd = self.ddcrp.as_mut().expect("ddCRP state present");
        let n_self = dd
            .graph
            .links
            .iter()
            .enumerate()
            .filter(|(i, &c)| *i == c)
            .count();
        let (nu, accepted) =
            mh_update_self_link(dd.nu, n_self, &dd.off_sums, lambda, &mut self.rng)?;
        dd.nu = nu;
        dd.proposed += 1;
        dd.accepted += usize::from(accepted);
        Ok(())
    }

    /// Renumbers occupied clusters `0..K` in order of their smallest site.
    fn compact(&mut self) -> Result<()> {
        let n_slots = self.stats.n_clusters();
        let mut map: Vec<Option<usize>> = vec![None; n_slots];
        let mut next = 0;
        for &k in &self.z {
            if map[k].is_none() {
                map[k] = Some(next);
                next += 1;
            }
        }
        for k in self.z.iter_mut() {
            *k = map[*k].expect("labels of occupied slots are mapped");
        }
        self.stats.relabel(&map, next)?;
        if !self.cfg.model.is_collapsed() {
            let mut theta = vec![Vec::new(); next];
            let mut log_theta = vec![Vec::new(); next];
            for (k, m) in map.iter().enumerate() {
                if let Some(m) = *m {
                    theta[m] = std::mem::take(&mut self.theta[k]);
                    log_theta[m] = std::mem::take(&mut self.log_theta[k]);
                }
            }
            self.theta = theta;
            self.log_theta = log_theta;
        }
        self.free.clear();
        Ok(())
    }

    /// Snapshot of the current configuration.
    pub fn record(&self) -> SampleRecord {
        let collapsed = self.cfg.model.is_collapsed();
        let slots = 0..self.stats.n_clusters();
        SampleRecord {
            sweep: self.sweep,
            model: self.cfg.model,
            nu: self.nu(),
            z: self.z.clone(),
            actions: self.actions.clone(),
            links: self.links().map(<[usize]>::to_vec),
            controllers: (!collapsed).then(|| self.theta.clone()),
            cluster_counts: collapsed.then(|| slots.map(|k| self.stats.xi(k).to_vec()).collect()),
            mixing: self.q.clone(),
        }
    }

    /// Verifies the bookkeeping against a from-scratch recount.
    pub fn check_invariants(&self) -> Result<()> {
        let recount = SuffStats::build(self.problem, &self.actions, &self.z, self.stats.n_clusters())?;
        if recount != self.stats {
            return Err(Error::Consistency(format!(
                "statistics diverged from a recount after sweep {}",
                self.sweep
            )));
        }
        if let Some(dd) = &self.ddcrp {
            if !dd.graph.is_consistent() {
                return Err(Error::Consistency("link graph reverse index is stale".into()));
            }
            let (cz, _) = connected_components(&dd.graph.links)?;
            if !same_partition(&cz, &self.z) {
                return Err(Error::Consistency(
                    "indicators differ from the link components".into(),
                ));
            }
        }
        if self.cfg.model == ModelKind::Dpmm && self.free.is_empty() {
            let k = self.n_active_clusters();
            if self.theta.len() != k || self.z.iter().any(|&z| z >= k) {
                return Err(Error::Consistency("controller list does not match the clusters".into()));
            }
        }
        Ok(())
    }
}

/// Whether two labelings describe the same partition.
pub(crate) fn same_partition(a: &[usize], b: &[usize]) -> bool {
    use std::collections::HashMap;
    if a.len() != b.len() {
        return false;
    }
    let mut fwd = HashMap::new();
    let mut bwd = HashMap::new();
    a.iter().zip(b).all(|(&x, &y)| {
        *fwd.entry(x).or_insert(y) == y && *bwd.entry(y).or_insert(x) == x
    })
}

fn draw_explicit_action<R: Rng + ?Sized>(
    lik: &[f64],
    loglik: &[f64],
    theta: &[f64],
    log_theta: &[f64],
    w: &mut [f64],
    rng: &mut R,
) -> Result<usize> {
    let mut total = 0.0;
    for j in 0..w.len() {
        w[j] = lik[j] * theta[j];
        total += w[j];
    }
    if total > 0.0 && total.is_finite() {
        return Ok(draw_unchecked(w, total, rng));
    }
    for j in 0..w.len() {
        w[j] = loglik[j] + log_theta[j];
    }
    match sample_log_categorical(w, rng) {
        Ok(j) => Ok(j),
        Err(_) => {
            log::warn!("action weights vanished; drawing from the controller alone");
            sample_categorical(theta, rng)
        }
    }
}

fn sample_log_or_uniform<R: Rng + ?Sized>(lw: &[f64], rng: &mut R) -> usize {
    match sample_log_categorical(lw, rng) {
        Ok(k) => k,
        Err(_) => {
            log::warn!("indicator weights vanished; drawing uniformly");
            rng.random_range(0..lw.len())
        }
    }
}

/// One independence Metropolis-Hastings step for the ddCRP self-link weight
/// with the `Exp(λ)` prior as proposal. Returns the new value and whether the
/// proposal was accepted.
pub fn mh_update_self_link<R: Rng + ?Sized>(
    nu: f64,
    n_self: usize,
    off_sums: &[f64],
    lambda: f64,
    rng: &mut R,
) -> Result<(f64, bool)> {
    let exp = Exp::new(lambda).map_err(|e| Error::Domain(e.to_string()))?;
    let proposal: f64 = exp.sample(rng);
    let log_ratio = self_link_log_likelihood(proposal, n_self, off_sums)
        - self_link_log_likelihood(nu, n_self, off_sums);
    let u: f64 = rng.random();
    if log_ratio >= 0.0 || u.ln() < log_ratio {
        Ok((proposal, true))
    } else {
        Ok((nu, false))
    }
}
