//! Writes a simulated data set with skewed margins to CSV, reads it back and
//! runs the three estimators on it.
//!
//! cargo run --example estimate_csv

use std::io::Write;

use copula_rank::estimators::{estimate, rank_transform, Method};
use copula_rank::mc::simulate_data;
use copula_rank::models::ModelSpec;
use copula_rank::sampler::{MarginKind, MarginSpec};
use nalgebra::DMatrix;

fn main() -> copula_rank::Result<()> {
    let model = ModelSpec::Toeplitz { p: 4 }.build()?;
    let theta = [0.5, 0.2, -0.1];
    let margins = MarginSpec::PerColumn(vec![
        MarginKind::Exponential,
        MarginKind::Cauchy,
        MarginKind::Gaussian,
        MarginKind::Uniform,
    ]);
    let data = simulate_data(model.as_ref(), &theta, 500, 7, &margins)?;

    let path = std::env::temp_dir().join("copula_rank_example.csv");
    let mut file = std::fs::File::create(&path)?;
    writeln!(file, "a,b,c,d")?;
    for row in data.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(file, "{}", cells.join(","))?;
    }
    drop(file);

    let mut reader = csv::Reader::from_path(&path)?;
    let mut values = Vec::new();
    let mut n = 0;
    for record in reader.records() {
        for cell in record?.iter() {
            values.push(cell.parse::<f64>().map_err(|e| copula_rank::Error::Data(e.to_string()))?);
        }
        n += 1;
    }
    let back = DMatrix::from_row_slice(n, 4, &values);
    let sample = rank_transform(&back)?;

    println!("true θ = {theta:?}, n = {n}, file {}", path.display());
    for method in [Method::PilotMoment, Method::Ple, Method::OneStep] {
        let res = estimate(model.as_ref(), &sample, method)?;
        let est: Vec<String> = res
            .theta_hat
            .iter()
            .zip(&res.std_errors)
            .map(|(t, s)| format!("{t:+.4} ({s:.4})"))
            .collect();
        println!("{:<13} {}", method.as_str(), est.join("  "));
    }
    std::fs::remove_file(&path)?;
    Ok(())
}
