//! Randomized invariants of the inner product, projections and geometry.

use copula_rank::geometry::{
    adaptivity_check, efficiency_criterion, project_tangent, regularity_check, EfficiencyBundle, DEFAULT_DIAG_TOL,
};
use copula_rank::models::{eval_geometry, CorrelationModel, FactorConstraint, ModelSpec};
use copula_rank::numcore::{gram, linalg, span_residual, theta_inner, InnerProductContext, SymMatrix};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn sym_strategy(p: usize) -> impl Strategy<Value = SymMatrix> {
    prop::collection::vec(-2.0f64..2.0, p * p).prop_map(move |v| SymMatrix::symmetrize(DMatrix::from_vec(p, p, v)))
}

/// Random correlation matrix: normalized Gram matrix of random vectors, shifted away from singular.
fn corr_strategy(p: usize) -> impl Strategy<Value = SymMatrix> {
    prop::collection::vec(-1.0f64..1.0, p * p).prop_map(move |v| {
        let x = DMatrix::from_vec(p, p, v);
        let g = &x * x.transpose() + DMatrix::identity(p, p) * 0.2;
        let d: Vec<f64> = (0..p).map(|i| g[(i, i)].sqrt()).collect();
        SymMatrix::from_fn(p, |i, j| if i == j { 1.0 } else { g[(i, j)] / (d[i] * d[j]) })
    })
}

fn ctx(r: &SymMatrix) -> InnerProductContext {
    InnerProductContext::new(r.clone()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inner_product_is_symmetric(r in corr_strategy(4), a in sym_strategy(4), b in sym_strategy(4)) {
        let c = ctx(&r);
        let ab = theta_inner(&a, &b, &c).unwrap();
        let ba = theta_inner(&b, &a, &c).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-12 * ab.abs().max(1.0));
    }

    #[test]
    fn inner_product_is_positive(r in corr_strategy(5), a in sym_strategy(5)) {
        prop_assume!(a.frobenius_norm() > 1e-6);
        prop_assert!(theta_inner(&a, &a, &ctx(&r)).unwrap() > 0.0);
    }

    #[test]
    fn gram_is_pairwise_and_psd(r in corr_strategy(4), basis in prop::collection::vec(sym_strategy(4), 1..6)) {
        let c = ctx(&r);
        let g = gram(&basis, &c).unwrap();
        for i in 0..basis.len() {
            for j in 0..basis.len() {
                let direct = theta_inner(&basis[i], &basis[j], &c).unwrap();
                prop_assert!((g[(i, j)] - direct).abs() <= 1e-12 * direct.abs().max(1.0));
            }
        }
        prop_assert!(linalg::min_eigenvalue(&g) >= -1e-10);
    }

    #[test]
    fn span_residual_ignores_span_components(
        m in sym_strategy(4),
        basis in prop::collection::vec(sym_strategy(4), 1..5),
        coef in prop::collection::vec(-3.0f64..3.0, 5),
    ) {
        let mut shifted = m.clone();
        for (b, c) in basis.iter().zip(&coef) {
            shifted = &shifted + &b.scale(*c);
        }
        let r0 = span_residual(&m, &basis).unwrap().residual_norm;
        let r1 = span_residual(&shifted, &basis).unwrap().residual_norm;
        prop_assert!((r0 - r1).abs() <= 1e-9);
    }

    #[test]
    fn projection_is_idempotent_and_orthogonal(th in -0.4f64..0.9, a in sym_strategy(3)) {
        let model = ModelSpec::Exchangeable { p: 3 }.build().unwrap();
        let geom = eval_geometry(model.as_ref(), &[th]).unwrap();
        let (_, proj) = project_tangent(&a, &geom).unwrap();
        let (_, again) = project_tangent(&proj, &geom).unwrap();
        prop_assert!((&again - &proj).max_abs() <= 1e-9 * (1.0 + proj.max_abs()));
        // the residual A − proj is orthogonal to the tangent space: diag(R(A − proj)) = 0
        let res = &a - &proj;
        let rr = geom.r.as_matrix() * res.as_matrix();
        for j in 0..3 {
            prop_assert!(rr[(j, j)].abs() <= 1e-9 * (1.0 + a.max_abs()));
        }
    }
}

#[test]
fn unrestricted_p2_gram_closed_form() {
    let model = ModelSpec::Unrestricted { p: 2 }.build().unwrap();
    for r in [-0.8, -0.3, 0.0, 0.45, 0.9] {
        let geom = eval_geometry(model.as_ref(), &[r]).unwrap();
        let basis = vec![-&geom.s_dots[0]];
        let g = gram(&basis, &geom.ctx).unwrap();
        let want = (1.0 + r * r) / (1.0f64 - r * r).powi(2);
        assert!((g[(0, 0)] - want).abs() <= 1e-12 * want, "r = {r}");
    }
}

#[test]
fn exchangeable_p4_criterion_matrices_lie_in_span() {
    let model = ModelSpec::Exchangeable { p: 4 }.build().unwrap();
    let geom = eval_geometry(model.as_ref(), &[0.3]).unwrap();
    let rep = efficiency_criterion(&geom, None, None).unwrap();
    assert!(rep.max_residual() < 1e-10);
}

fn models() -> Vec<Box<dyn CorrelationModel>> {
    [
        ModelSpec::Unrestricted { p: 4 },
        ModelSpec::Exchangeable { p: 5 },
        ModelSpec::Toeplitz { p: 5 },
        ModelSpec::Circular,
        ModelSpec::Factor { p: 4, q: 1, constraint: FactorConstraint::LowerTriangular },
        ModelSpec::Factor { p: 5, q: 2, constraint: FactorConstraint::LowerTriangular },
        ModelSpec::Factor { p: 4, q: 2, constraint: FactorConstraint::None },
        ModelSpec::AdaptivityDemo,
    ]
    .iter()
    .map(|s| s.build().unwrap())
    .collect()
}

fn random_points(model: &dyn CorrelationModel, count: usize, seed: u64) -> Vec<Vec<f64>> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let t: Vec<f64> = (0..model.n_params()).map(|_| rng.random_range(-0.9..0.9)).collect();
        if model.in_domain(&t) && linalg::min_eigenvalue(model.correlation(&t).unwrap().as_matrix()) > 0.05 {
            out.push(t);
        }
    }
    out
}

#[test]
fn derivatives_match_finite_differences() {
    for model in models() {
        for theta in random_points(model.as_ref(), 20, 1) {
            for m in 0..model.n_params() {
                let h = 1e-5;
                let mut up = theta.clone();
                let mut dn = theta.clone();
                up[m] += h;
                dn[m] -= h;
                let fd = (&model.correlation(&up).unwrap() - &model.correlation(&dn).unwrap()).scale(0.5 / h);
                let err = (&model.derivative(&theta, m).unwrap() - &fd).max_abs();
                assert!(err <= 1e-6, "{} at {theta:?}, m = {m}: {err:e}", model.name());
            }
        }
    }
}

#[test]
fn geometry_invariants_at_random_points() {
    for model in models() {
        // The unconstrained factor model is not identified; its information is singular.
        let identified = !model.name().contains("none");
        for theta in random_points(model.as_ref(), 20, 2) {
            let geom = eval_geometry(model.as_ref(), &theta).unwrap();
            let rs = geom.r.as_matrix() * geom.s.as_matrix();
            assert!((rs - DMatrix::identity(geom.dim(), geom.dim())).amax() < 1e-10);
            if !identified {
                continue;
            }
            let b = EfficiencyBundle::compute(&geom).unwrap();
            for a in &b.eff_matrices {
                let ra = geom.r.as_matrix() * a.as_matrix();
                for j in 0..geom.dim() {
                    assert!(ra[(j, j)].abs() <= 1e-9, "{}", model.name());
                }
                assert!(a.trace_product(&geom.r).abs() <= 1e-9);
            }
            let loss = SymMatrix::symmetrize(&b.fisher - &b.eff_info);
            assert!(linalg::min_eigenvalue(loss.as_matrix()) >= -1e-9 * (1.0 + b.fisher.amax()));
            // the bound never exceeds the pseudo-likelihood variance
            for m in 0..geom.n_params() {
                assert!(b.eff_info_inv[(m, m)] <= b.ple_cov[(m, m)] * (1.0 + 1e-9));
            }
            assert!(regularity_check(&b.efficient_influence(), &geom, 1e-7).unwrap().passed);
            assert!(regularity_check(&b.ple_a, &geom, 1e-7).unwrap().passed);
            // the efficient influence attains the bound
            let cov = gram(&b.efficient_influence(), &geom.ctx).unwrap();
            assert!((&cov - &b.eff_info_inv).amax() <= 1e-8 * (1.0 + b.eff_info_inv.amax()));
        }
    }
}

#[test]
fn efficient_verdict_iff_bound_equals_ple_covariance() {
    for model in models().into_iter().filter(|m| !m.name().contains("none")) {
        for theta in random_points(model.as_ref(), 5, 3) {
            let geom = eval_geometry(model.as_ref(), &theta).unwrap();
            let b = EfficiencyBundle::compute(&geom).unwrap();
            let gap = (&b.ple_cov - &b.eff_info_inv).amax() / (1.0 + b.ple_cov.amax());
            let verdict = efficiency_criterion(&geom, None, None).unwrap().passed;
            assert_eq!(verdict, gap < 1e-8, "{} at {theta:?}: gap {gap:e}", model.name());
        }
    }
}

#[test]
fn adaptivity_cross_check_agrees() {
    for model in models().into_iter().filter(|m| !m.name().contains("none")) {
        for theta in random_points(model.as_ref(), 5, 4) {
            let geom = eval_geometry(model.as_ref(), &theta).unwrap();
            let rep = adaptivity_check(&geom, DEFAULT_DIAG_TOL).unwrap();
            assert_eq!(rep.extra["cross_check_consistent"], serde_json::Value::Bool(true), "{}", model.name());
        }
    }
}
