use std::collections::BTreeSet;

use dropletlab::formulation::Formulation;
use dropletlab::optimizer::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn matern52(a: &[f64], b: &[f64], h: &GpHyper<f64>) -> f64 {
    let r = a.iter().zip(b).zip(&h.lengthscales).map(|((p, q), l)| ((p - q) / l).powi(2)).sum::<f64>().sqrt();
    let s = 5f64.sqrt() * r;
    h.signal_var * (1.0 + s + 5.0 * r * r / 3.0) * (-s).exp()
}

/// Textbook posterior: mean m + K*^T (K + s I)^-1 (y - m), variance k** - K*^T (K + s I)^-1 K*.
fn dense_posterior(x: &[Vec<f64>], y: &[f64], h: &GpHyper<f64>, q: &[f64]) -> (f64, f64) {
    let n = y.len();
    let mean = y.iter().sum::<f64>() / n as f64;
    let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let k = DMatrix::from_fn(n, n, |i, j| matern52(&x[i], &x[j], h) + if i == j { h.noise_var } else { 0.0 });
    let z = DVector::from_iterator(n, y.iter().map(|v| (v - mean) / sd));
    let ks = DVector::from_iterator(n, x.iter().map(|xi| matern52(xi, q, h)));
    let inv = k.try_inverse().expect("invertible");
    let m = (ks.transpose() * &inv * z)[0];
    let v = matern52(q, q, h) - (ks.transpose() * &inv * &ks)[0];
    (mean + sd * m, v * sd * sd)
}

fn random_set(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let x: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect();
    let y = x.iter().map(|p| p.iter().map(|v| (4.0 * v).sin()).sum::<f64>() + 0.1 * rng.random::<f64>()).collect();
    (x, y)
}

#[test]
fn grid_counts() {
    let one = build_search_space(vec![ParameterRange::new("ethanol", 0.0, 50.0, 0.5)]).unwrap();
    assert_eq!(one.len(), 101);
    let two = build_search_space(vec![
        ParameterRange::new("SDS94", 0.04, 0.60, 0.04),
        ParameterRange::new("Tween20", 0.04, 1.2, 0.04),
    ])
    .unwrap();
    assert_eq!(two.len(), 450);
    assert_eq!(two.values(0), vec![0.04, 0.04]);
    assert_eq!(two.values(449), vec![0.6, 1.2]);
    assert_eq!(two.values(30), vec![0.08, 0.04]);
    let single = build_search_space(vec![ParameterRange::new("SDS99", 0.3, 0.3, 0.1)]).unwrap();
    assert_eq!(single.len(), 1);
    assert_eq!(single.unit_point(0), vec![0.0]);
}

#[test]
fn grid_errors() {
    assert_eq!(build_search_space(vec![ParameterRange::new("a", 1.0, 0.0, 0.1)]), Err(OptimizerError::EmptySpace));
    assert!(matches!(
        build_search_space(vec![ParameterRange::new("a", 0.0, 1.0, 0.0)]),
        Err(OptimizerError::InvalidParameter(_))
    ));
    let big: Vec<_> = ["a", "b", "c"].iter().map(|n| ParameterRange::new(*n, 0.0, 1.0, 0.001)).collect();
    assert!(matches!(build_search_space(big), Err(OptimizerError::SpaceTooLarge { .. })));
}

#[test]
fn space_index_round_trip() {
    let s = build_search_space(vec![
        ParameterRange::new("SDS94", 0.04, 0.60, 0.04),
        ParameterRange::new("Tween20", 0.04, 1.2, 0.04),
    ])
    .unwrap();
    for i in [0, 1, 29, 30, 217, 449] {
        assert_eq!(s.index_of(&s.formulation(i)), Some(i));
    }
    assert_eq!(s.index_of(&Formulation::new().with("SDS94", 0.05).with("Tween20", 0.04)), None);
    assert_eq!(s.index_of(&Formulation::new().with("SDS94", 0.04)), None);
}

#[test]
fn transformation_examples() {
    let tri = TargetSpec::matching(CONTACT_ANGLE, 72.0, [22.0, 122.0], Transformation::Triangular);
    assert_eq!(normalize_target(72.0, &tri), 1.0);
    assert!((normalize_target(97.0, &tri) - 0.5).abs() < 1e-15);
    assert_eq!(normalize_target(10.0, &tri), 0.0);
    let bell = TargetSpec::matching(CONTACT_ANGLE, 72.0, [22.0, 122.0], Transformation::Bell);
    assert_eq!(normalize_target(72.0, &bell), 1.0);
    assert!((normalize_target(97.0, &bell) - 0.5).abs() < 1e-12);
    let lin = TargetSpec::minimize(TOTAL_SURFACTANT, [0.08, 1.80]);
    assert_eq!(normalize_target(0.08, &lin), 1.0);
    assert_eq!(normalize_target(1.80, &lin), 0.0);
    assert!((normalize_target(0.94, &lin) - 0.5).abs() < 1e-12);
    let max = TargetSpec::maximize(CONTACT_ANGLE, [0.0, 100.0]);
    assert!((normalize_target(25.0, &max) - 0.25).abs() < 1e-15);
}

#[test]
fn desirability_closed_forms() {
    assert_eq!(desirability(&[0.81, 1.0], &[1.0, 1.0]), Ok(0.9));
    assert_eq!(desirability(&[0.0, 1.0], &[1.0, 5.0]), Ok(0.0));
    assert_eq!(desirability(&[1.0, 1.0], &[1.0, 1.0]), Ok(1.0));
    assert_eq!(desirability(&[0.5], &[1.0, 1.0]), Err(OptimizerError::LengthMismatch { targets: 1, weights: 2 }));
    assert!(desirability(&[1.2], &[1.0]).is_err());
    assert!(desirability(&[0.5], &[0.0]).is_err());
}

proptest! {
    #[test]
    fn desirability_is_bounded_and_monotone(t in prop::collection::vec(0.0f64..=1.0, 1..5), k in 0usize..5, bump in 0.0f64..1.0, w in prop::collection::vec(0.1f64..5.0, 5)) {
        let w = &w[..t.len()];
        let d = desirability(&t, w).unwrap();
        prop_assert!((0.0..=1.0).contains(&d));
        let lo = t.iter().cloned().fold(1.0, f64::min);
        let hi = t.iter().cloned().fold(0.0, f64::max);
        prop_assert!(d >= lo - 1e-12 && d <= hi + 1e-12);
        let mut up = t.clone();
        let k = k % t.len();
        up[k] = (up[k] + bump).min(1.0);
        prop_assert!(desirability(&up, w).unwrap() >= d - 1e-12);
    }

    #[test]
    fn desirability_is_permutation_invariant(t in prop::collection::vec(0.0f64..=1.0, 2..5), w in prop::collection::vec(0.1f64..5.0, 5)) {
        let w = &w[..t.len()];
        let d = desirability(&t, w).unwrap();
        let rt: Vec<f64> = t.iter().rev().cloned().collect();
        let rw: Vec<f64> = w.iter().rev().cloned().collect();
        prop_assert!((desirability(&rt, &rw).unwrap() - d).abs() < 1e-12);
    }

    #[test]
    fn annihilation(t in prop::collection::vec(0.0f64..=1.0, 2..5), k in 0usize..5) {
        let mut t = t;
        let k = k % t.len();
        t[k] = 0.0;
        prop_assert_eq!(desirability(&t, &vec![1.0; t.len()]).unwrap(), 0.0);
    }

    #[test]
    fn weight_scaling_keeps_the_argmax(cands in prop::collection::vec((0.01f64..=1.0, 0.01f64..=1.0), 2..30), w in (0.2f64..5.0, 0.2f64..5.0), c in 0.1f64..10.0) {
        let argmax = |w: [f64; 2]| {
            let ds: Vec<f64> = cands.iter().map(|&(a, b)| desirability(&[a, b], &w).unwrap()).collect();
            let best = ds.iter().cloned().fold(f64::MIN, f64::max);
            let second = ds.iter().cloned().filter(|&d| d < best).fold(f64::MIN, f64::max);
            (ds.iter().position(|&d| d == best).unwrap(), best - second)
        };
        let (a, gap) = argmax([w.0, w.1]);
        let (b, _) = argmax([w.0 * c, w.1 * c]);
        prop_assume!(gap > 1e-9);
        prop_assert_eq!(a, b);
    }
}

#[test]
fn gp_matches_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for set in 0..10 {
        let dim = 1 + set % 2;
        let n = 5 + rng.random_range(0..15);
        let (x, y) = random_set(&mut rng, n, dim);
        let h = GpHyper {
            lengthscales: (0..dim).map(|_| rng.random_range(0.1..1.0)).collect(),
            signal_var: rng.random_range(0.3..3.0),
            noise_var: rng.random_range(1e-3..0.1),
        };
        let gp = gp_fit(&x, &y, dim, &HyperPolicy::Fixed(h.clone())).unwrap();
        for _ in 0..20 {
            let q: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
            let (m, v) = gp.predict(&q);
            let (m0, v0) = dense_posterior(&x, &y, &h, &q);
            assert!((m - m0).abs() < 1e-8, "set {set}: mean {m} vs {m0}");
            assert!((v - v0).abs() < 1e-8, "set {set}: var {v} vs {v0}");
        }
    }
}

#[test]
fn noise_free_gp_interpolates() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for dim in [1, 2] {
        let (x, y) = random_set(&mut rng, 12, dim);
        let h = GpHyper::isotropic(dim, 0.3, 1.0, 1e-12);
        let gp = gp_fit(&x, &y, dim, &HyperPolicy::Fixed(h)).unwrap();
        for (p, &t) in x.iter().zip(&y) {
            assert!((gp.predict(p).0 - t).abs() < 1e-6);
        }
    }
}

#[test]
fn gp_variance_limits() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (x, y) = random_set(&mut rng, 10, 1);
    let h = GpHyper::isotropic(1, 0.05, 1.0, 0.01);
    let gp = gp_fit(&x, &y, 1, &HyperPolicy::Fixed(h)).unwrap();
    let s2 = gp.y_scale * gp.y_scale;
    for p in &x {
        assert!(gp.predict(p).1 <= 0.01 * s2 + 1e-12);
    }
    let far = gp.predict(&[0.0 - 5.0 * 0.05 - 1.0]);
    assert!((far.0 - gp.y_mean).abs() < 1e-3 * gp.y_scale);
    assert!((far.1 - s2).abs() < 1e-3 * s2);
}

#[test]
fn gp_grid_search_matches_fixed_refit() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let (x, y) = random_set(&mut rng, 15, 2);
    let gp = gp_fit(&x, &y, 2, &HyperPolicy::default()).unwrap();
    let refit = gp_fit(&x, &y, 2, &HyperPolicy::Fixed(gp.hyper.clone())).unwrap();
    assert_eq!(gp.log_marginal_likelihood, refit.log_marginal_likelihood);
    let grid = HyperGrid::<f64>::default();
    for &l in &grid.lengthscales {
        let h = GpHyper { lengthscales: vec![l, l], ..gp.hyper.clone() };
        let other = gp_fit(&x, &y, 2, &HyperPolicy::Fixed(h)).unwrap();
        assert!(other.log_marginal_likelihood <= gp.log_marginal_likelihood + 1e-12);
    }
}

#[test]
fn gp_runs_in_single_precision() {
    let x: Vec<Vec<f32>> = (0..8).map(|i| vec![i as f32 / 7.0]).collect();
    let y: Vec<f32> = x.iter().map(|p| (3.0 * p[0]).sin()).collect();
    let gp = gp_fit(&x, &y, 1, &HyperPolicy::Fixed(GpHyper::isotropic(1, 0.3, 1.0, 1e-4))).unwrap();
    assert!((gp.predict(&[0.5]).0 - 1.5f32.sin()).abs() < 0.02);
}

#[test]
fn thompson_frequencies_match_monte_carlo() {
    let mean = [0.0, 0.3, 0.1];
    let cov_rows = [[1.0, 0.5, 0.2], [0.5, 0.8, 0.1], [0.2, 0.1, 1.2]];
    let cov = linalg::Matrix::from_fn(3, 3, |i, j| cov_rows[i][j]);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let draws = 2000;
    let mut counts = [0usize; 3];
    for _ in 0..draws {
        counts[sample_argmax(&mean, &cov, &mut rng).unwrap()] += 1;
    }
    let l = DMatrix::from_fn(3, 3, |i, j| cov_rows[i][j]).cholesky().unwrap().l();
    let mut mc = [0usize; 3];
    let reference = 200_000;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..reference {
        let xi = DVector::from_iterator(3, (0..3).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let d = &l * xi + DVector::from_row_slice(&mean);
        mc[d.argmax().0] += 1;
    }
    for k in 0..3 {
        let p = mc[k] as f64 / reference as f64;
        let f = counts[k] as f64 / draws as f64;
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        assert!((f - p).abs() < 4.0 * se, "candidate {k}: {f} vs {p}");
    }
}

fn ethanol_campaign(seed: u64) -> CampaignRecord {
    let space = build_search_space(vec![ParameterRange::new("ethanol", 0.0, 50.0, 0.5)]).unwrap();
    let t = TargetSpec::matching(CONTACT_ANGLE, 87.5, [37.5, 137.5], Transformation::Triangular);
    CampaignRecord::new("ethanol", seed, space, vec![t], BTreeSet::new()).unwrap()
}

fn toy_angle(f: &Formulation) -> f64 {
    104.0 - 1.4 * f.get("ethanol")
}

#[test]
fn one_candidate_space() {
    let space = build_search_space(vec![ParameterRange::new("ethanol", 20.0, 20.0, 1.0)]).unwrap();
    let t = TargetSpec::matching(CONTACT_ANGLE, 87.5, [37.5, 137.5], Transformation::Triangular);
    let mut c = CampaignRecord::new("one", 0, space, vec![t], BTreeSet::new()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let f = c.recommend_next(&mut rng).unwrap();
    assert_eq!(f.get("ethanol"), 20.0);
    c.record_result(&f, &[76.0, 77.0]).unwrap();
    assert_eq!(c.status, CampaignStatus::Exhausted);
    assert_eq!(c.recommend_next(&mut rng), Err(OptimizerError::SpaceExhausted));
}

#[test]
fn full_budget_visits_every_candidate_once() {
    let mut c = ethanol_campaign(3);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..101 {
        let f = c.recommend_next(&mut rng).unwrap();
        let a = toy_angle(&f);
        c.record_result(&f, &[a]).unwrap();
    }
    let unique: BTreeSet<usize> = c.history.iter().map(|h| h.candidate).collect();
    assert_eq!(unique.len(), 101);
    assert_eq!(c.history.iter().map(|h| h.iteration).collect::<Vec<_>>(), (1..=101).collect::<Vec<_>>());
    assert_eq!(c.recommend_next(&mut rng), Err(OptimizerError::SpaceExhausted));
}

#[test]
fn campaigns_are_deterministic() {
    let run = |seed| {
        let mut c = ethanol_campaign(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..15 {
            let f = c.recommend_next(&mut rng).unwrap();
            c.record_result(&f, &[toy_angle(&f)]).unwrap();
        }
        c.history.iter().map(|h| h.candidate).collect::<Vec<_>>()
    };
    assert_eq!(run(4), run(4));
    assert_ne!(run(4), run(5));
}

#[test]
fn result_protocol_errors() {
    let mut c = ethanol_campaign(1);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let f = c.recommend_next(&mut rng).unwrap();
    let other = if f.get("ethanol") == 0.0 {
        Formulation::new().with("ethanol", 0.5)
    } else {
        Formulation::new().with("ethanol", 0.0)
    };
    assert_eq!(c.record_result(&other, &[90.0]).unwrap_err(), OptimizerError::UnknownFormulation);
    assert_eq!(
        c.record_result(&Formulation::new().with("ethanol", 0.25), &[90.0]).unwrap_err(),
        OptimizerError::UnknownFormulation
    );
    c.record_result(&f, &[90.0]).unwrap();
    assert_eq!(c.record_result(&f, &[90.0]).unwrap_err(), OptimizerError::DuplicateResult);
    let bad = TargetSpec::matching("surface_tension", 30.0, [0.0, 60.0], Transformation::Triangular);
    assert!(matches!(
        CampaignRecord::new("x", 0, c.space.clone(), vec![bad], BTreeSet::new()),
        Err(OptimizerError::InvalidTarget(_))
    ));
}

#[test]
fn optimal_formulation_desirability() {
    let space = build_search_space(vec![
        ParameterRange::new("SDS94", 0.04, 0.60, 0.04),
        ParameterRange::new("Tween20", 0.04, 1.2, 0.04),
    ])
    .unwrap();
    let targets = vec![
        TargetSpec::matching(CONTACT_ANGLE, 72.0, [22.0, 122.0], Transformation::Triangular),
        TargetSpec::minimize(TOTAL_SURFACTANT, [0.08, 1.80]),
    ];
    let surf: BTreeSet<String> = ["SDS94", "Tween20"].iter().map(|s| s.to_string()).collect();
    let c = CampaignRecord::new("multi", 0, space, targets, surf).unwrap();
    let f = Formulation::new().with("SDS94", 0.08).with("Tween20", 0.20);
    let e = c.evaluate(&f, 71.14).unwrap();
    assert!((e.raw[1] - 0.28).abs() < 1e-12);
    assert!((e.desirability - 0.92).abs() < 0.015, "{}", e.desirability);
    let best = Formulation::new().with("SDS94", 0.04).with("Tween20", 0.04);
    assert_eq!(c.evaluate(&best, 72.0).unwrap().desirability, 1.0);
}

#[test]
fn campaign_record_serde_round_trip() {
    let mut c = ethanol_campaign(2);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..3 {
        let f = c.recommend_next(&mut rng).unwrap();
        c.record_result(&f, &[toy_angle(&f)]).unwrap();
    }
    let s = serde_json::to_string(&c).unwrap();
    let back: CampaignRecord = serde_json::from_str(&s).unwrap();
    assert_eq!(back, c);
}
