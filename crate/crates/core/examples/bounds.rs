//! Efficient information and its inverse for a few built-in models.
//!
//! cargo run --example bounds

use copula_rank::geometry::EfficiencyBundle;
use copula_rank::models::{eval_geometry, ModelSpec};
use nalgebra::DMatrix;

fn rows(m: &DMatrix<f64>) -> String {
    m.row_iter()
        .map(|r| r.iter().map(|v| format!("{v:9.6}")).collect::<Vec<_>>().join(" "))
        .collect::<Vec<_>>()
        .join(" | ")
}

fn main() -> copula_rank::Result<()> {
    let cases = [
        (ModelSpec::Exchangeable { p: 3 }, vec![0.5]),
        (ModelSpec::Exchangeable { p: 4 }, vec![0.5]),
        (ModelSpec::Circular, vec![0.5]),
        (ModelSpec::Toeplitz { p: 3 }, vec![0.5, 0.3]),
    ];
    for (spec, theta) in cases {
        let model = spec.build()?;
        let bundle = EfficiencyBundle::compute(&eval_geometry(model.as_ref(), &theta)?)?;
        println!("{} at θ = {theta:?}", model.name());
        println!("  Fisher information     {}", rows(&bundle.fisher));
        println!("  efficient information  {}", rows(&bundle.eff_info));
        println!("  variance bound I*⁻¹    {}", rows(&bundle.eff_info_inv));
    }
    Ok(())
}
