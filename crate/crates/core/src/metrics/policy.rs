//! Predictive action distributions from sampler records.

use crate::error::{domain, Error, Result};
use crate::problem::Problem;
use crate::samplers::SampleRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    SingleSample,
    PosteriorAveraged,
}

/// One action distribution per query state.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedPolicy {
    pub rows: Vec<Vec<f64>>,
    pub provenance: Provenance,
}

/// Predictive action distribution of the cluster that holds `site`.
///
/// Explicit models return the sampled controller; collapsed models return the
/// Dirichlet posterior mean `(ξ + α) / (N + Aα)`.
pub fn extract_policy(record: &SampleRecord, site: usize, alpha: f64) -> Result<Vec<f64>> {
    let Some(&k) = record.z.get(site) else {
        return domain(format!("site {site} outside a record with {} sites", record.z.len()));
    };
    if let Some(theta) = &record.controllers {
        return theta
            .get(k)
            .cloned()
            .ok_or_else(|| Error::Structural(format!("record has no controller {k}")));
    }
    let counts = record
        .cluster_counts
        .as_ref()
        .and_then(|c| c.get(k))
        .ok_or_else(|| Error::Structural(format!("record has no counts for cluster {k}")))?;
    let total: u32 = counts.iter().sum();
    let denom = total as f64 + counts.len() as f64 * alpha;
    Ok(counts.iter().map(|&c| (c as f64 + alpha) / denom).collect())
}

/// Prediction at an arbitrary point, taken from the nearest site.
pub fn extract_policy_at(
    record: &SampleRecord,
    problem: &Problem,
    point: [f64; 2],
    alpha: f64,
) -> Result<Vec<f64>> {
    if problem.n_sites() == 0 {
        return domain("no sites to extrapolate from");
    }
    extract_policy(record, problem.nearest_site(point), alpha)
}

/// Predictions at `sites` averaged over all `records`.
pub fn posterior_average(records: &[SampleRecord], sites: &[usize], alpha: f64) -> Result<PredictedPolicy> {
    if records.is_empty() {
        return domain("no records to average");
    }
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(sites.len());
    for &s in sites {
        let mut acc = extract_policy(&records[0], s, alpha)?;
        for r in &records[1..] {
            for (a, p) in acc.iter_mut().zip(extract_policy(r, s, alpha)?) {
                *a += p;
            }
        }
        let n = records.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        rows.push(acc);
    }
    Ok(PredictedPolicy { rows, provenance: Provenance::PosteriorAveraged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::ModelKind;

    fn collapsed(counts: Vec<Vec<u32>>, z: Vec<usize>) -> SampleRecord {
        SampleRecord {
            sweep: 1,
            model: ModelKind::MixtureCollapsed,
            nu: None,
            z,
            actions: vec![],
            links: None,
            controllers: None,
            cluster_counts: Some(counts),
            mixing: None,
        }
    }

    #[test]
    fn dirichlet_posterior_mean() {
        let r = collapsed(vec![vec![3, 0], vec![0, 0]], vec![0, 1]);
        assert_eq!(extract_policy(&r, 0, 1.0).unwrap(), vec![0.8, 0.2]);
        assert_eq!(extract_policy(&r, 1, 1.0).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn explicit_controller_is_returned() {
        let mut r = collapsed(vec![], vec![1, 0]);
        r.cluster_counts = None;
        r.controllers = Some(vec![vec![1.0, 0.0], vec![0.25, 0.75]]);
        assert_eq!(extract_policy(&r, 0, 1.0).unwrap(), vec![0.25, 0.75]);
        assert!(extract_policy(&r, 2, 1.0).is_err());
    }

    #[test]
    fn converges_to_empirical_frequencies() {
        let counts = vec![5000, 2500, 1500, 1000];
        let r = collapsed(vec![counts.clone()], vec![0]);
        let p = extract_policy(&r, 0, 1.0).unwrap();
        for (pi, c) in p.iter().zip(&counts) {
            let f = *c as f64 / 1e4;
            assert!((pi - f).abs() / f < 0.01);
        }
    }

    #[test]
    fn nearest_site_extrapolation() {
        let problem =
            Problem::from_parts(2, vec![[0.0, 0.0], [5.0, 0.0]], vec![0, 1], vec![vec![0.0, 0.0]; 2])
                .unwrap();
        let r = collapsed(vec![vec![3, 0], vec![0, 3]], vec![0, 1]);
        let at = extract_policy_at(&r, &problem, [4.0, 1.0], 1.0).unwrap();
        assert_eq!(at, extract_policy(&r, 1, 1.0).unwrap());
        let exact = extract_policy_at(&r, &problem, [0.0, 0.0], 1.0).unwrap();
        assert_eq!(exact, extract_policy(&r, 0, 1.0).unwrap());
    }

    #[test]
    fn averaging_over_records() {
        let a = collapsed(vec![vec![3, 0]], vec![0]);
        let b = collapsed(vec![vec![0, 3]], vec![0]);
        let avg = posterior_average(&[a, b], &[0], 1.0).unwrap();
        assert_eq!(avg.rows, vec![vec![0.5, 0.5]]);
        assert_eq!(avg.provenance, Provenance::PosteriorAveraged);
    }
}
