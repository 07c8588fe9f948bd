//! Asymptotic relative efficiency of the pseudo-likelihood estimator along a
//! line through the Toeplitz p = 4 parameter space.
//!
//! cargo run --example are_table

use copula_rank::geometry::EfficiencyBundle;
use copula_rank::models::{eval_geometry, ModelSpec};

fn main() -> copula_rank::Result<()> {
    let model = ModelSpec::Toeplitz { p: 4 }.build()?;
    let target = [0.4945460, -0.4592764, -0.8462492];
    println!("{:>5}  {:>8} {:>8} {:>8}", "s", "ARE 1", "ARE 2", "ARE 3");
    for i in 0..=10 {
        let s = i as f64 / 10.0;
        let theta: Vec<f64> = target.iter().map(|t| s * t).collect();
        if !model.in_domain(&theta) {
            continue;
        }
        let are = EfficiencyBundle::compute(&eval_geometry(model.as_ref(), &theta)?)?.are();
        println!("{s:>5.1}  {:>8.4} {:>8.4} {:>8.4}", are[0], are[1], are[2]);
    }
    Ok(())
}
