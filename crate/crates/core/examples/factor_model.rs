//! One-factor and two-factor copulas: bounds, the efficiency verdict and an
//! estimate from simulated data, reported as loadings.
//!
//! cargo run --example factor_model

use copula_rank::estimators::{estimate, rank_transform, Method};
use copula_rank::geometry::{efficiency_criterion, EfficiencyBundle};
use copula_rank::mc::simulate_data;
use copula_rank::models::{eval_geometry, FactorConstraint, FactorModel};
use copula_rank::sampler::MarginSpec;

fn main() -> copula_rank::Result<()> {
    for (q, theta) in [(1, vec![0.7, 0.5, -0.4, 0.6, 0.3]), (2, vec![0.7, 0.5, 0.3, -0.4, 0.2, 0.6, 0.1, 0.4, -0.3])] {
        let model = FactorModel::new(5, q, FactorConstraint::LowerTriangular)?;
        let geom = eval_geometry(&model, &theta)?;
        let bundle = EfficiencyBundle::compute(&geom)?;
        let verdict = efficiency_criterion(&geom, None, None)?;
        println!("{q}-factor model, loadings\n{:.3}", model.loadings(&theta)?);
        println!("  PLE efficient: {} (max residual {:.1e})", verdict.passed, verdict.max_residual());
        println!("  ARE: {:?}", bundle.are().iter().map(|a| format!("{a:.4}")).collect::<Vec<_>>());

        let data = simulate_data(&model, &theta, 1000, 11, &MarginSpec::default())?;
        let fit = estimate(&model, &rank_transform(&data)?, Method::OneStep)?;
        println!("  one-step loadings\n{:.3}", model.loadings(&fit.theta_hat)?);
        for note in &fit.notes {
            println!("  note: {note}");
        }
    }
    Ok(())
}
