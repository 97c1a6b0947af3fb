//! Sufficient statistics of a sampler configuration.
//!
//! `φ[i][j]` counts action `j` at site `i`, `ξ[k][j]` counts action `j` in
//! cluster `k` and `ζ[k]` counts the sites of cluster `k`. Samplers keep these
//! tables in step with their latent state through small updates; every update
//! is checked so that a count never goes negative.

use crate::error::{Error, Result};
use crate::problem::Problem;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuffStats {
    n_actions: usize,
    phi: Vec<u32>,
    site_totals: Vec<u32>,
    xi: Vec<Vec<u32>>,
    xi_totals: Vec<u32>,
    zeta: Vec<u32>,
}

/// A single change to a sampler configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delta {
    /// The action at a step of `site` (whose cluster is `cluster`) changes.
    ActionFlip {
        site: usize,
        cluster: usize,
        from: usize,
        to: usize,
    },
    /// Site `site` moves from cluster `from` to cluster `to`.
    IndicatorMove { site: usize, from: usize, to: usize },
}

fn underflow(what: &str) -> Error {
    Error::Consistency(format!("decrement of a zero count in {what}"))
}

impl SuffStats {
    /// Counts the statistics of `actions` (one per step) and `z` (one per site)
    /// with `n_clusters` cluster slots.
    pub fn build(
        problem: &Problem,
        actions: &[usize],
        z: &[usize],
        n_clusters: usize,
    ) -> Result<Self> {
        let a = problem.n_actions();
        if actions.len() != problem.n_steps() {
            return Err(Error::Structural(format!(
                "{} actions given for {} action steps",
                actions.len(),
                problem.n_steps()
            )));
        }
        if z.len() != problem.n_sites() {
            return Err(Error::Structural(format!(
                "{} indicators given for {} sites",
                z.len(),
                problem.n_sites()
            )));
        }
        let mut stats = Self::empty(a, problem.n_sites(), n_clusters);
        for &k in z {
            if k >= n_clusters {
                return Err(Error::Structural(format!("indicator {k} beyond {n_clusters} clusters")));
            }
            stats.zeta[k] += 1;
        }
        for (t, &j) in actions.iter().enumerate() {
            if j >= a {
                return Err(Error::Structural(format!("action {j} at step {t} out of range")));
            }
            let i = problem.step_site(t);
            stats.phi[i * a + j] += 1;
            stats.site_totals[i] += 1;
            stats.xi[z[i]][j] += 1;
            stats.xi_totals[z[i]] += 1;
        }
        Ok(stats)
    }

    fn empty(n_actions: usize, n_sites: usize, n_clusters: usize) -> Self {
        Self {
            n_actions,
            phi: vec![0; n_sites * n_actions],
            site_totals: vec![0; n_sites],
            xi: vec![vec![0; n_actions]; n_clusters],
            xi_totals: vec![0; n_clusters],
            zeta: vec![0; n_clusters],
        }
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_sites(&self) -> usize {
        self.site_totals.len()
    }

    /// Number of cluster slots, occupied or not.
    pub fn n_clusters(&self) -> usize {
        self.zeta.len()
    }

    pub fn phi(&self, i: usize) -> &[u32] {
        &self.phi[i * self.n_actions..(i + 1) * self.n_actions]
    }

    pub fn site_total(&self, i: usize) -> u32 {
        self.site_totals[i]
    }

    pub fn xi(&self, k: usize) -> &[u32] {
        &self.xi[k]
    }

    pub fn xi_total(&self, k: usize) -> u32 {
        self.xi_totals[k]
    }

    pub fn zeta(&self, k: usize) -> u32 {
        self.zeta[k]
    }

    pub fn zetas(&self) -> &[u32] {
        &self.zeta
    }

    /// `ψ[i][·][k]`: counts of cluster `k` without site `i`'s contribution,
    /// where `z_i` is the current cluster of site `i`.
    pub fn psi(&self, i: usize, k: usize, z_i: usize) -> Vec<u32> {
        if k == z_i {
            self.xi[k].iter().zip(self.phi(i)).map(|(x, p)| x - p).collect()
        } else {
            self.xi[k].clone()
        }
    }

    /// `ϑ[t][·]`: counts of the cluster of step `t` without the action `a_t`.
    pub fn vartheta(&self, cluster: usize, a_t: usize) -> Vec<u32> {
        let mut v = self.xi[cluster].clone();
        v[a_t] -= 1;
        v
    }

    /// `ζ` without site `i`, which currently sits in cluster `z_i`.
    pub fn zeta_without(&self, z_i: usize) -> Vec<u32> {
        let mut v = self.zeta.clone();
        v[z_i] -= 1;
        v
    }

    /// Appends an empty cluster slot and returns its label.
    pub fn push_cluster(&mut self) -> usize {
        self.xi.push(vec![0; self.n_actions]);
        self.xi_totals.push(0);
        self.zeta.push(0);
        self.zeta.len() - 1
    }

    pub fn add_action(&mut self, site: usize, cluster: usize, action: usize) {
        self.phi[site * self.n_actions + action] += 1;
        self.site_totals[site] += 1;
        self.xi[cluster][action] += 1;
        self.xi_totals[cluster] += 1;
    }

    pub fn remove_action(&mut self, site: usize, cluster: usize, action: usize) -> Result<()> {
        let p = &mut self.phi[site * self.n_actions + action];
        let x = &mut self.xi[cluster][action];
        if *p == 0 || *x == 0 || self.xi_totals[cluster] == 0 || self.site_totals[site] == 0 {
            return Err(underflow("action counts"));
        }
        *p -= 1;
        *x -= 1;
        self.site_totals[site] -= 1;
        self.xi_totals[cluster] -= 1;
        Ok(())
    }

    pub fn flip_action(&mut self, site: usize, cluster: usize, from: usize, to: usize) -> Result<()> {
        self.remove_action(site, cluster, from)?;
        self.add_action(site, cluster, to);
        Ok(())
    }

    /// Takes site `i` and its action counts out of cluster `k`.
    pub fn remove_site(&mut self, i: usize, k: usize) -> Result<()> {
        if self.zeta[k] == 0 {
            return Err(underflow("cluster sizes"));
        }
        let a = self.n_actions;
        let phi = &self.phi[i * a..(i + 1) * a];
        let xi = &mut self.xi[k];
        if phi.iter().zip(xi.iter()).any(|(p, x)| p > x) {
            return Err(underflow("cluster action counts"));
        }
        for (x, p) in xi.iter_mut().zip(phi) {
            *x -= p;
        }
        self.xi_totals[k] -= self.site_totals[i];
        self.zeta[k] -= 1;
        Ok(())
    }

    pub fn add_site(&mut self, i: usize, k: usize) {
        let a = self.n_actions;
        let phi = &self.phi[i * a..(i + 1) * a];
        for (x, p) in self.xi[k].iter_mut().zip(phi) {
            *x += p;
        }
        self.xi_totals[k] += self.site_totals[i];
        self.zeta[k] += 1;
    }

    pub fn move_site(&mut self, i: usize, from: usize, to: usize) -> Result<()> {
        if from != to {
            self.remove_site(i, from)?;
            self.add_site(i, to);
        }
        Ok(())
    }

    /// Moves all of cluster `from` into cluster `into`, leaving `from` empty.
    pub fn merge_clusters(&mut self, from: usize, into: usize) {
        if from == into {
            return;
        }
        let src = std::mem::replace(&mut self.xi[from], vec![0; self.n_actions]);
        for (x, s) in self.xi[into].iter_mut().zip(&src) {
            *x += s;
        }
        self.xi_totals[into] += std::mem::take(&mut self.xi_totals[from]);
        self.zeta[into] += std::mem::take(&mut self.zeta[from]);
    }

    pub fn apply(&mut self, delta: &Delta) -> Result<()> {
        match *delta {
            Delta::ActionFlip {
                site,
                cluster,
                from,
                to,
            } => self.flip_action(site, cluster, from, to),
            Delta::IndicatorMove { site, from, to } => self.move_site(site, from, to),
        }
    }

    /// Renumbers cluster slots: slot `k` becomes `map[k]` (or is dropped when
    /// `None`, which requires it to be empty).
    pub fn relabel(&mut self, map: &[Option<usize>], n_new: usize) -> Result<()> {
        if map.len() != self.zeta.len() {
            return Err(Error::Consistency("relabel map has the wrong length".into()));
        }
        let mut xi = vec![Vec::new(); n_new];
        let mut xi_totals = vec![0; n_new];
        let mut zeta = vec![0; n_new];
        for (k, target) in map.iter().enumerate() {
            match *target {
                Some(m) => {
                    xi[m] = std::mem::take(&mut self.xi[k]);
                    xi_totals[m] = self.xi_totals[k];
                    zeta[m] = self.zeta[k];
                }
                None if self.zeta[k] != 0 => {
                    return Err(Error::Consistency(format!("dropping occupied cluster {k}")))
                }
                None => {}
            }
        }
        if xi.iter().any(Vec::is_empty) {
            return Err(Error::Consistency("relabel map is not onto".into()));
        }
        self.xi = xi;
        self.xi_totals = xi_totals;
        self.zeta = zeta;
        Ok(())
    }

    /// Total number of counted actions.
    pub fn total_actions(&self) -> u64 {
        self.site_totals.iter().map(|&n| n as u64).sum()
    }
}
