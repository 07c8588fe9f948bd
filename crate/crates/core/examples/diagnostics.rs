//! Regularity, efficiency and adaptivity diagnostics side by side.
//!
//! cargo run --example diagnostics

use copula_rank::geometry::{
    adaptivity_check, efficiency_criterion, regularity_check, EfficiencyBundle, DEFAULT_DIAG_TOL,
};
use copula_rank::models::{eval_geometry, FactorConstraint, ModelSpec};

fn main() -> copula_rank::Result<()> {
    let cases = [
        (ModelSpec::Toeplitz { p: 3 }, vec![0.5, 0.3]),
        (ModelSpec::Toeplitz { p: 4 }, vec![0.4945460, -0.4592764, -0.8462492]),
        (ModelSpec::Circular, vec![0.5]),
        (ModelSpec::Factor { p: 4, q: 1, constraint: FactorConstraint::LowerTriangular }, vec![0.6, -0.3, 0.7, 0.4]),
        (ModelSpec::AdaptivityDemo, vec![0.0]),
        (ModelSpec::Exchangeable { p: 3 }, vec![0.5]),
    ];
    println!("{:<36} {:>10} {:>10} {:>15} {:>14}", "model", "OSE reg", "PLE reg", "PLE efficiency", "adaptivity");
    for (spec, theta) in cases {
        let model = spec.build()?;
        let geom = eval_geometry(model.as_ref(), &theta)?;
        let bundle = EfficiencyBundle::compute(&geom)?;
        let ose = regularity_check(&bundle.efficient_influence(), &geom, DEFAULT_DIAG_TOL)?;
        let ple = regularity_check(&bundle.ple_a, &geom, DEFAULT_DIAG_TOL)?;
        let eff = efficiency_criterion(&geom, None, None)?;
        let ada = adaptivity_check(&geom, DEFAULT_DIAG_TOL)?;
        println!(
            "{:<36} {:>10} {:>10} {:>15} {:>14}",
            model.name(),
            ose.verdict,
            ple.verdict,
            format!("{} ({:.0e})", if eff.passed { "yes" } else { "no" }, eff.max_residual()),
            ada.verdict
        );
    }
    Ok(())
}
