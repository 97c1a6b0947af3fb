//! Learning curves: mean EMD between predicted and expert behavior per sweep.

use std::collections::HashMap;

use super::{emd, extract_policy, next_state_distribution, EmdGround};
use crate::error::{domain, Error, Result};
use crate::exec::Execution;
use crate::problem::Problem;
use crate::samplers::SampleRecord;
use crate::types::{ActionSet, FiniteTable};

/// How a prediction is compared with the expert.
#[derive(Debug, Clone, Copy)]
pub enum CurveMetric<'a> {
    /// Angular EMD between action distributions.
    ActionEmd(ActionSet),
    /// Euclidean EMD between next-state laws. The expert acts in `truth`, the
    /// learned policy in `assumed`; `positions` locate the states.
    NextStateEmd {
        truth: &'a FiniteTable,
        assumed: &'a FiniteTable,
        positions: &'a [[f64; 2]],
    },
}

/// Query states with their expert action distributions.
///
/// Each query is answered by one sampler site. Identical expert rows share a
/// class, which lets action curves reuse EMDs across queries.
#[derive(Debug, Clone)]
pub struct EvalSet {
    sites: Vec<usize>,
    class: Vec<usize>,
    classes: Vec<Vec<f64>>,
}

impl EvalSet {
    pub fn new(sites: Vec<usize>, experts: Vec<Vec<f64>>) -> Result<Self> {
        if sites.len() != experts.len() {
            return Err(Error::Structural("one expert row per query required".into()));
        }
        let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut classes = Vec::new();
        let mut class = Vec::with_capacity(experts.len());
        for e in experts {
            let key: Vec<u64> = e.iter().map(|x| x.to_bits()).collect();
            let c = *index.entry(key).or_insert_with(|| {
                classes.push(e);
                classes.len() - 1
            });
            class.push(c);
        }
        Ok(Self { sites, class, classes })
    }

    /// Every site of `problem`, with the expert evaluated at its position.
    pub fn sites<F>(problem: &Problem, expert: F) -> Result<Self>
    where
        F: Fn([f64; 2]) -> Vec<f64>,
    {
        let pos = problem.positions();
        Self::new((0..pos.len()).collect(), pos.iter().map(|&p| expert(p)).collect())
    }

    /// Arbitrary query points, each answered by its nearest site.
    pub fn points<F>(problem: &Problem, points: &[[f64; 2]], expert: F) -> Result<Self>
    where
        F: Fn([f64; 2]) -> Vec<f64>,
    {
        if problem.n_sites() == 0 {
            return domain("no sites to extrapolate from");
        }
        Self::new(
            points.iter().map(|&p| problem.nearest_site(p)).collect(),
            points.iter().map(|&p| expert(p)).collect(),
        )
    }

    /// Lattice with the given spacing covering `[-extent, extent]²`.
    pub fn lattice(extent: f64, spacing: f64) -> Vec<[f64; 2]> {
        let n = (extent / spacing + 1e-9).floor() as i64;
        let mut out = Vec::new();
        for y in -n..=n {
            for x in -n..=n {
                out.push([x as f64 * spacing, y as f64 * spacing]);
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn query_sites(&self) -> &[usize] {
        &self.sites
    }

    pub fn expert(&self, q: usize) -> &[f64] {
        &self.classes[self.class[q]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub sweep: usize,
    pub mean_emd: f64,
    pub n_states: usize,
}

/// Mean EMD over `eval` for every record, in record order.
pub fn learning_curve(
    records: &[SampleRecord],
    eval: &EvalSet,
    metric: CurveMetric<'_>,
    alpha: f64,
    exec: Execution,
) -> Result<Vec<CurvePoint>> {
    if records.is_empty() {
        return domain("learning curve needs at least one record");
    }
    if eval.is_empty() {
        return domain("learning curve needs at least one query state");
    }
    let truth: Vec<Vec<f64>> = match metric {
        CurveMetric::ActionEmd(_) => Vec::new(),
        CurveMetric::NextStateEmd { truth, .. } => (0..eval.len())
            .map(|q| next_state_distribution(truth, eval.sites[q], eval.expert(q)))
            .collect(),
    };
    let ground = match metric {
        CurveMetric::ActionEmd(a) => EmdGround::CircularAngle(a),
        CurveMetric::NextStateEmd { positions, .. } => EmdGround::Euclidean2D(positions.to_vec()),
    };
    let out = exec.map_range(records.len(), |r| -> Result<CurvePoint> {
        let rec = &records[r];
        let mut preds: HashMap<usize, Vec<f64>> = HashMap::new();
        let mut memo: HashMap<(usize, usize), f64> = HashMap::new();
        let mut total = 0.0;
        for (q, &site) in eval.sites.iter().enumerate() {
            let k = *rec.z.get(site).ok_or_else(|| {
                Error::Structural(format!("query site {site} outside the record"))
            })?;
            if !preds.contains_key(&k) {
                preds.insert(k, extract_policy(rec, site, alpha)?);
            }
            let pred = &preds[&k];
            let d = match metric {
                CurveMetric::ActionEmd(_) => match memo.get(&(k, eval.class[q])) {
                    Some(&d) => d,
                    None => {
                        let d = emd(pred, eval.expert(q), &ground)?;
                        memo.insert((k, eval.class[q]), d);
                        d
                    }
                },
                CurveMetric::NextStateEmd { assumed, .. } => {
                    let p = next_state_distribution(assumed, site, pred);
                    emd(&p, &truth[q], &ground)?
                }
            };
            total += d;
        }
        Ok(CurvePoint {
            sweep: rec.sweep,
            mean_emd: total / eval.len() as f64,
            n_states: eval.len(),
        })
    });
    out.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::ModelKind;

    fn record(sweep: usize, controllers: Vec<Vec<f64>>, z: Vec<usize>) -> SampleRecord {
        SampleRecord {
            sweep,
            model: ModelKind::Mixture,
            nu: None,
            z,
            actions: vec![],
            links: None,
            controllers: Some(controllers),
            cluster_counts: None,
            mixing: None,
        }
    }

    #[test]
    fn perfect_prediction_gives_zero_curve() {
        let a = ActionSet::new(4).unwrap();
        let rows = vec![vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 0.5, 0.5, 0.0]];
        let eval = EvalSet::new(vec![0, 1, 2], vec![rows[0].clone(), rows[1].clone(), rows[1].clone()]).unwrap();
        let recs: Vec<_> = (0..3).map(|s| record(s, rows.clone(), vec![0, 1, 1])).collect();
        let curve = learning_curve(&recs, &eval, CurveMetric::ActionEmd(a), 1.0, Execution::Sequential).unwrap();
        assert_eq!(curve.len(), 3);
        assert!(curve.iter().all(|p| p.mean_emd == 0.0 && p.n_states == 3));
        assert_eq!(curve.iter().map(|p| p.sweep).collect::<Vec<_>>(), vec![0, 1, 2]);
    }

    #[test]
    fn mean_over_queries() {
        let a = ActionSet::new(4).unwrap();
        let east = vec![1.0, 0.0, 0.0, 0.0];
        let north = vec![0.0, 1.0, 0.0, 0.0];
        let eval = EvalSet::new(vec![0, 1], vec![east.clone(), east.clone()]).unwrap();
        let recs = vec![record(5, vec![east, north], vec![0, 1])];
        let seq = learning_curve(&recs, &eval, CurveMetric::ActionEmd(a), 1.0, Execution::Sequential).unwrap();
        let par = learning_curve(&recs, &eval, CurveMetric::ActionEmd(a), 1.0, Execution::Parallel).unwrap();
        assert!((seq[0].mean_emd - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
        assert_eq!(seq, par);
    }

    #[test]
    fn next_state_metric_uses_both_models() {
        // Two states on a line; action 0 stays, action 1 jumps.
        let stay_jump = vec![1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0];
        let t = FiniteTable::new(2, 2, stay_jump).unwrap();
        let pos = [[0.0, 0.0], [2.0, 0.0]];
        let eval = EvalSet::new(vec![0], vec![vec![1.0, 0.0]]).unwrap();
        let recs = vec![record(1, vec![vec![0.5, 0.5]], vec![0, 0])];
        let m = CurveMetric::NextStateEmd { truth: &t, assumed: &t, positions: &pos };
        let c = learning_curve(&recs, &eval, m, 1.0, Execution::Sequential).unwrap();
        assert!((c[0].mean_emd - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lattice_covers_the_square() {
        let l = EvalSet::lattice(7.0, 1.0);
        assert_eq!(l.len(), 225);
        assert_eq!(l[0], [-7.0, -7.0]);
        assert_eq!(l[224], [7.0, 7.0]);
    }

    #[test]
    fn empty_inputs_are_rejected() {
        let a = ActionSet::new(2).unwrap();
        let eval = EvalSet::new(vec![0], vec![vec![0.5, 0.5]]).unwrap();
        assert!(learning_curve(&[], &eval, CurveMetric::ActionEmd(a), 1.0, Execution::Sequential).is_err());
    }
}
