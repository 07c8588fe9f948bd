//! Monte Carlo checks of the sampler, the inner-product identity and the
//! estimators. Seeds are fixed; tolerances are a few standard errors.

use std::sync::Arc;

use copula_rank::estimators::{estimate, normal_scores_matrix, one_step, rank_transform, Method, OneStepOptions};
use copula_rank::geometry::{quad_influence_value, EfficiencyBundle};
use copula_rank::mc::{run_experiment, summarize, McConfig};
use copula_rank::models::{eval_geometry, ModelSpec};
use copula_rank::numcore::{normal, theta_inner, InnerProductContext, SymMatrix};
use copula_rank::sampler::{apply_margins, sample_copula, CopulaSampler, MarginSpec, MonotoneTransform};
use nalgebra::DMatrix;

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample covariance of two sequences and its standard error.
fn cov_with_se(x: &[f64], y: &[f64]) -> (f64, f64) {
    let (mx, my) = (mean(x), mean(y));
    let prod: Vec<f64> = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).collect();
    let c = mean(&prod);
    let n = prod.len() as f64;
    let var = prod.iter().map(|p| (p - c).powi(2)).sum::<f64>() / (n - 1.0);
    (c, (var / n).sqrt())
}

#[test]
fn quadratic_form_covariance_matches_inner_product() {
    let model = ModelSpec::Toeplitz { p: 4 }.build().unwrap();
    let r = model.correlation(&[0.5, 0.2, -0.1]).unwrap();
    let ctx = InnerProductContext::new(r.clone()).unwrap();
    let a = SymMatrix::from_fn(4, |i, j| ((i + 2 * j) as f64 * 0.37).sin());
    let b = SymMatrix::from_fn(4, |i, j| if i == j { 0.5 } else { ((i * j) as f64 - 1.0) * 0.3 });
    let n = 1_000_000;
    let z = CopulaSampler::new(&r).unwrap().sample_normal(n, 21, 0);
    let mut qa = Vec::with_capacity(n);
    let mut qb = Vec::with_capacity(n);
    let mut row = vec![0.0; 4];
    for i in 0..n {
        for j in 0..4 {
            row[j] = z[(i, j)];
        }
        qa.push(0.5 * a.quad_form(&row));
        qb.push(0.5 * b.quad_form(&row));
    }
    for (x, y, m1, m2) in [(&qa, &qb, &a, &b), (&qa, &qa, &a, &a)] {
        let (c, se) = cov_with_se(x, y);
        let want = theta_inner(m1, m2, &ctx).unwrap();
        assert!((c - want).abs() <= 3.0 * se, "{c} vs {want} (se {se})");
    }
}

#[test]
fn influence_values_are_centered() {
    let model = ModelSpec::Circular.build().unwrap();
    let theta = [0.5];
    let geom = eval_geometry(model.as_ref(), &theta).unwrap();
    let bundle = EfficiencyBundle::compute(&geom).unwrap();
    let u = sample_copula(&geom.r, 200_000, 22).unwrap();
    for a in bundle.efficient_influence().iter().chain(&bundle.ple_a) {
        let vals: Vec<f64> = (0..u.nrows())
            .map(|i| quad_influence_value(a, &geom, &u.row(i).iter().copied().collect::<Vec<_>>()).unwrap())
            .collect();
        let m = mean(&vals);
        let sd = (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / vals.len() as f64).sqrt();
        assert!(m.abs() <= 4.0 * sd / (vals.len() as f64).sqrt(), "mean {m}");
    }
    // the variance of the efficient influence is the bound
    let eff = &bundle.efficient_influence()[0];
    let vals: Vec<f64> = (0..u.nrows())
        .map(|i| quad_influence_value(eff, &geom, &u.row(i).iter().copied().collect::<Vec<_>>()).unwrap())
        .collect();
    let (var, se) = cov_with_se(&vals, &vals);
    assert!((var - 0.140625).abs() <= 4.0 * se, "{var}");
}

fn ks_uniform(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| (x - i as f64 / n).abs().max(((i + 1) as f64 / n - x).abs()))
        .fold(0.0, f64::max)
}

#[test]
fn copula_margins_are_uniform_and_correlation_is_r() {
    let model = ModelSpec::Exchangeable { p: 3 }.build().unwrap();
    let r = model.correlation(&[0.6]).unwrap();
    let n = 20_000;
    let u = sample_copula(&r, n, 23).unwrap();
    for j in 0..3 {
        let d = ks_uniform(u.column(j).iter().copied().collect());
        // 1% critical value of the Kolmogorov distribution
        assert!(d < 1.63 / (n as f64).sqrt(), "column {j}: D = {d}");
    }
    let z = u.map(|x| normal::quantile(x).unwrap());
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let (c, _) = cov_with_se(&z.column(i).iter().copied().collect::<Vec<_>>(), &z.column(j).iter().copied().collect::<Vec<_>>());
        // se of a correlation ≈ (1 − ρ²)/√n
        assert!((c - 0.6).abs() < 4.0 * 0.64 / (n as f64).sqrt(), "{c}");
    }
}

#[test]
fn seeds_and_streams() {
    let r = ModelSpec::Circular.build().unwrap().correlation(&[0.3]).unwrap();
    let a = sample_copula(&r, 50, 42).unwrap();
    let b = sample_copula(&r, 50, 42).unwrap();
    assert_eq!(a, b);
    let s = CopulaSampler::new(&r).unwrap();
    assert_eq!(s.sample(50, 42, 0), a);
    assert_ne!(s.sample(50, 42, 1), a);
    assert_ne!(sample_copula(&r, 50, 43).unwrap(), a);
}

#[test]
fn normal_scores_variance_approaches_one() {
    let mut last = 0.0;
    for n in [10, 100, 1000, 10_000] {
        let col = DMatrix::from_fn(n, 1, |i, _| ((i * 7919) % n) as f64);
        let s2 = normal_scores_matrix(&rank_transform(&col).unwrap()).get(0, 0);
        assert!(s2 < 1.0 && s2 > last);
        last = s2;
    }
    assert!(1.0 - last < 2e-3);
}

#[test]
fn estimators_at_independence_with_large_n() {
    for (spec, k) in [(ModelSpec::Exchangeable { p: 4 }, 1), (ModelSpec::Toeplitz { p: 3 }, 2), (ModelSpec::Circular, 1)] {
        let model = spec.build().unwrap();
        let theta = vec![0.0; k];
        let u = sample_copula(&model.correlation(&theta).unwrap(), 10_000, 24).unwrap();
        let sample = rank_transform(&u).unwrap();
        for method in [Method::Ple, Method::OneStep, Method::PilotMoment] {
            let res = estimate(model.as_ref(), &sample, method).unwrap();
            for (t, se) in res.theta_hat.iter().zip(&res.std_errors) {
                assert!(t.abs() <= 3.0 * se, "{} {}: {t} (se {se})", model.name(), method.as_str());
            }
        }
    }
}

#[test]
fn estimates_are_invariant_under_monotone_margins() {
    let model = ModelSpec::Toeplitz { p: 4 }.build().unwrap();
    let u = sample_copula(&model.correlation(&[0.5, 0.1, -0.2]).unwrap(), 300, 25).unwrap();
    let warp = MarginSpec::Transform(MonotoneTransform {
        name: "power".into(),
        f: Arc::new(|j, u| u.powf(1.0 + j as f64) - 7.0),
    });
    let x = apply_margins(&u, &warp).unwrap();
    let (a, b) = (rank_transform(&u).unwrap(), rank_transform(&x).unwrap());
    assert_eq!(a, b);
    let opts = OneStepOptions { iterate_twice: true };
    let ea = one_step(model.as_ref(), &a, None, opts).unwrap();
    let eb = one_step(model.as_ref(), &b, None, opts).unwrap();
    assert_eq!(ea.theta_hat, eb.theta_hat);
}

#[test]
fn one_step_from_own_estimate_is_stationary() {
    // Iterating the update from its own output changes it by far less than the first step.
    let model = ModelSpec::Toeplitz { p: 4 }.build().unwrap();
    let u = sample_copula(&model.correlation(&[0.4, -0.2, 0.1]).unwrap(), 2000, 26).unwrap();
    let s = rank_transform(&u).unwrap();
    let first = one_step(model.as_ref(), &s, None, OneStepOptions::default()).unwrap();
    let again = one_step(model.as_ref(), &s, Some(&first.theta_hat), OneStepOptions::default()).unwrap();
    let pilot = estimate(model.as_ref(), &s, Method::PilotMoment).unwrap();
    let step1: f64 = first.theta_hat.iter().zip(&pilot.theta_hat).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let step2: f64 = again.theta_hat.iter().zip(&first.theta_hat).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(step2 < 0.1 * step1, "{step1} then {step2}");
}

#[test]
fn summaries_of_reports() {
    assert!(summarize(&[]).unwrap().rows.is_empty());
    let mut cfg = McConfig::new(ModelSpec::Circular, vec![0.3], 60, 10);
    cfg.seed = 27;
    let a = run_experiment(&cfg).unwrap();
    assert_eq!(summarize(std::slice::from_ref(&a)).unwrap().rows.len(), 2);
    let mut other = McConfig::new(ModelSpec::Exchangeable { p: 3 }, vec![0.3], 60, 10);
    other.estimators = vec![Method::OneStep];
    let b = run_experiment(&other).unwrap();
    assert!(summarize(&[a, b]).is_err());
}
