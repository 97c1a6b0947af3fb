mod common;

use polrec::dists::RngStream;
use polrec::metrics::{emd, solve_transport, EmdGround};
use polrec::ActionSet;
use rand::Rng;

fn random_simplex(n: usize, rng: &mut RngStream) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| if rng.random::<f64>() < 0.2 { 0.0 } else { rng.random() }).collect();
    let s: f64 = w.iter().sum();
    if s == 0.0 {
        let mut v = vec![0.0; n];
        v[0] = 1.0;
        return v;
    }
    w.iter().map(|x| x / s).collect()
}

#[test]
fn lp_oracle_agrees_with_textbook_value() {
    let c = [[10.0, 2.0, 20.0, 11.0], [12.0, 7.0, 9.0, 20.0], [4.0, 14.0, 16.0, 18.0]];
    let v = common::transport_lp(&[15.0, 25.0, 10.0], &[5.0, 15.0, 15.0, 15.0], |i, j| c[i][j]);
    assert!((v - 435.0).abs() < 1e-9);
}

#[test]
fn euclidean_emd_matches_lp_on_random_points() {
    let mut rng = RngStream::new(21, 0);
    for _ in 0..200 {
        let pts: Vec<[f64; 2]> = (0..5).map(|_| [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)]).collect();
        let (p, q) = (random_simplex(5, &mut rng), random_simplex(5, &mut rng));
        let g = EmdGround::Euclidean2D(pts.clone());
        let got = emd(&p, &q, &g).unwrap();
        let want = common::transport_lp(&p, &q, |i, j| g.cost(i, j));
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }
}

#[test]
fn circular_emd_matches_lp_and_median_formula() {
    // On a circle with unit slot spacing Δ, EMD = Δ min_c Σ_k |F_k - c|.
    let a = ActionSet::new(24).unwrap();
    let g = EmdGround::CircularAngle(a);
    let delta = 2.0 * std::f64::consts::PI / 24.0;
    let mut rng = RngStream::new(22, 0);
    for case in 0..100 {
        let (p, q) = (random_simplex(24, &mut rng), random_simplex(24, &mut rng));
        let got = emd(&p, &q, &g).unwrap();
        let mut f = Vec::with_capacity(24);
        let mut acc = 0.0;
        for k in 0..24 {
            acc += p[k] - q[k];
            f.push(acc);
        }
        let median = {
            let mut s = f.clone();
            s.sort_by(f64::total_cmp);
            s[12]
        };
        let closed = delta * f.iter().map(|x| (x - median).abs()).sum::<f64>();
        assert!((got - closed).abs() < 1e-9, "{got} vs {closed}");
        if case < 20 {
            let lp = common::transport_lp(&p, &q, |i, j| g.cost(i, j));
            assert!((got - lp).abs() < 1e-9, "{got} vs {lp}");
        }
    }
}

#[test]
fn solver_handles_unbalanced_shapes() {
    let mut rng = RngStream::new(23, 0);
    for _ in 0..100 {
        let m = rng.random_range(1..8);
        let n = rng.random_range(1..8);
        let p = random_simplex(m, &mut rng);
        let q = random_simplex(n, &mut rng);
        let c: Vec<f64> = (0..m * n).map(|_| rng.random_range(0.0..5.0)).collect();
        let sol = solve_transport(&p, &q, |i, j| c[i * n + j]).unwrap();
        let lp = common::transport_lp(&p, &q, |i, j| c[i * n + j]);
        assert!((sol.cost - lp).abs() < 1e-9, "{} vs {lp}", sol.cost);
        // Flows are feasible.
        let mut rows = vec![0.0; m];
        let mut cols = vec![0.0; n];
        for &(i, j, f) in &sol.flows {
            assert!(f >= -1e-12);
            rows[i] += f;
            cols[j] += f;
        }
        rows.iter().zip(&p).for_each(|(a, b)| assert!((a - b).abs() < 1e-9));
        cols.iter().zip(&q).for_each(|(a, b)| assert!((a - b).abs() < 1e-9));
    }
}
