//! Samplers against brute-force enumeration of tiny posteriors.

mod common;

use std::collections::HashMap;

use common::{canonical, for_each_tuple, polya_urn, tv, TinyMdp};
use polrec::priors::PriorKind;
use polrec::samplers::{Chain, ModelKind, SamplerConfig};
use polrec::FiniteTable;

fn normalize<K: Clone>(w: Vec<(K, f64)>) -> Vec<(K, f64)> {
    let total: f64 = w.iter().map(|x| x.1).sum();
    w.into_iter().map(|(k, v)| (k, v / total)).collect()
}

fn empirical<K: std::hash::Hash + Eq + Clone>(counts: HashMap<K, usize>) -> Vec<(K, f64)> {
    let n: usize = counts.values().sum();
    counts.into_iter().map(|(k, c)| (k, c as f64 / n as f64)).collect()
}

#[test]
fn static_collapsed_detailed_balance_smoke() {
    // Two states, two actions, three observed states.
    let table = FiniteTable::new(2, 2, vec![0.7, 0.3, 0.2, 0.8, 0.4, 0.6, 0.9, 0.1]).unwrap();
    let mdp = TinyMdp::with_states(table, vec![0, 1, 0]);
    let mut exact = Vec::new();
    for_each_tuple(2, 2, |a| {
        let z = [0, 1];
        let prior: f64 = mdp.cluster_counts(a, &z, 2).iter().map(|c| polya_urn(c, 1.0)).product();
        exact.push((a.to_vec(), mdp.likelihood(a) * prior));
    });
    let exact = normalize(exact);

    let problem = mdp.problem();
    let cfg = SamplerConfig { model: ModelKind::StaticCollapsed, sweeps: 0, seed: 1, ..Default::default() };
    let mut chain = Chain::new(&problem, cfg).unwrap();
    let mut counts = HashMap::new();
    for _ in 0..1_000_000 {
        chain.sweep().unwrap();
        *counts.entry(chain.actions().to_vec()).or_insert(0usize) += 1;
    }
    let d = tv(&exact, &empirical(counts));
    assert!(d < 0.02, "tv {d}");
}

#[test]
fn dpmm_partition_posterior_matches_enumeration() {
    let mdp = TinyMdp::new();
    let gamma: f64 = 1.0;
    let mut exact: HashMap<Vec<usize>, f64> = HashMap::new();
    for_each_tuple(3, 3, |z| {
        if canonical(z) != z {
            return;
        }
        // CRP(γ) probability of the partition of three items.
        let k = z.iter().max().unwrap() + 1;
        let sizes: Vec<usize> = (0..k).map(|c| z.iter().filter(|&&x| x == c).count()).collect();
        let crp = gamma.powi(k as i32) * sizes.iter().map(|&s| (1..s).product::<usize>() as f64).product::<f64>()
            / (gamma * (gamma + 1.0) * (gamma + 2.0));
        for_each_tuple(mdp.n_steps(), 2, |a| {
            let dm: f64 = mdp.cluster_counts(a, z, k).iter().map(|c| polya_urn(c, 1.0)).product();
            *exact.entry(z.to_vec()).or_insert(0.0) += crp * mdp.likelihood(a) * dm;
        });
    });
    let exact = normalize(exact.into_iter().collect());

    let problem = mdp.problem();
    let cfg = SamplerConfig { model: ModelKind::Dpmm, gamma, sweeps: 0, seed: 2, ..Default::default() };
    let mut chain = Chain::new(&problem, cfg).unwrap();
    let mut counts = HashMap::new();
    for s in 0..220_000 {
        chain.sweep().unwrap();
        if s >= 20_000 {
            *counts.entry(canonical(chain.indicators())).or_insert(0usize) += 1;
        }
    }
    let d = tv(&exact, &empirical(counts));
    assert!(d < 0.02, "tv {d}");
}

#[test]
fn ddcrp_partition_and_self_link_posterior_match_quadrature() {
    let mdp = TinyMdp::new();
    let (lambda, sigma_f, eps) = (1.0, 1.0, 0.01);
    // Sites of a finite space sit at (i, 0).
    let f = |i: usize, j: usize| {
        let d = i.abs_diff(j) as f64;
        (1.0 - eps) * (-d * d / (sigma_f * sigma_f)).exp() + eps
    };
    let off: Vec<f64> = (0..3).map(|i| (0..3).filter(|&j| j != i).map(|j| f(i, j)).sum()).collect();
    // ∫ λ e^{-λν} Π_i w_i(ν) dν and the matching first moment, by midpoint rule.
    let integrals = |links: &[usize]| -> (f64, f64) {
        let (h, top) = (2e-4, 60.0);
        let (mut m0, mut m1) = (0.0, 0.0);
        let mut k = 0;
        loop {
            let nu = (k as f64 + 0.5) * h;
            if nu > top {
                break;
            }
            let mut w = lambda * (-lambda * nu).exp();
            for (i, &c) in links.iter().enumerate() {
                w *= if c == i { nu } else { f(i, c) } / (nu + off[i]);
            }
            m0 += w * h;
            m1 += w * nu * h;
            k += 1;
        }
        (m0, m1)
    };
    let mut exact: HashMap<Vec<usize>, f64> = HashMap::new();
    let (mut total, mut nu_moment) = (0.0, 0.0);
    for_each_tuple(3, 3, |links| {
        let (m0, m1) = integrals(links);
        // Components of the link graph.
        let mut z: Vec<usize> = (0..3).collect();
        for _ in 0..3 {
            for (i, &c) in links.iter().enumerate() {
                let m = z[i].min(z[c]);
                z[i] = m;
                z[c] = m;
            }
        }
        let z = canonical(&z);
        let k = z.iter().max().unwrap() + 1;
        let mut data = 0.0;
        for_each_tuple(mdp.n_steps(), 2, |a| {
            let dm: f64 = mdp.cluster_counts(a, &z, k).iter().map(|c| polya_urn(c, 1.0)).product();
            data += mdp.likelihood(a) * dm;
        });
        *exact.entry(z).or_insert(0.0) += m0 * data;
        total += m0 * data;
        nu_moment += m1 * data;
    });
    let exact = normalize(exact.into_iter().collect());
    let exact_nu = nu_moment / total;

    let problem = mdp.problem();
    let cfg = SamplerConfig {
        model: ModelKind::Ddcrp,
        prior: PriorKind::None,
        lambda,
        sigma_f,
        epsilon: eps,
        sweeps: 0,
        seed: 3,
        ..Default::default()
    };
    let mut chain = Chain::new(&problem, cfg).unwrap();
    let mut counts = HashMap::new();
    let mut nu_sum = 0.0;
    let n = 300_000;
    for s in 0..n + 20_000 {
        chain.sweep().unwrap();
        if s >= 20_000 {
            *counts.entry(chain.indicators().to_vec()).or_insert(0usize) += 1;
            nu_sum += chain.nu().unwrap();
        }
    }
    let d = tv(&exact, &empirical(counts));
    assert!(d < 0.02, "tv {d}");
    let nu_mean = nu_sum / n as f64;
    assert!((nu_mean - exact_nu).abs() < 0.03 * exact_nu, "{nu_mean} vs {exact_nu}");
}
