use super::{check_theta_len, default_in_domain, CorrelationModel, ModelSpec};
use crate::error::{Error, Result};
use crate::numcore::SymMatrix;

/// Four variables on a cycle: neighbours correlate θ, opposite corners θ².
#[derive(Debug, Clone, Default)]
pub struct CircularModel;

const NEIGHBOURS: [(usize, usize); 4] = [(0, 1), (1, 2), (2, 3), (0, 3)];

impl CorrelationModel for CircularModel {
    fn name(&self) -> String {
        "circular".into()
    }

    fn dim(&self) -> usize {
        4
    }

    fn n_params(&self) -> usize {
        1
    }

    fn correlation(&self, theta: &[f64]) -> Result<SymMatrix> {
        check_theta_len(1, theta)?;
        let t = theta[0];
        Ok(SymMatrix::from_fn(4, |i, j| match j - i {
            0 => 1.0,
            2 => t * t,
            _ => t,
        }))
    }

    fn derivative(&self, theta: &[f64], m: usize) -> Result<SymMatrix> {
        check_theta_len(1, theta)?;
        if m != 0 {
            return Err(Error::Shape(format!("parameter index {m} out of range")));
        }
        let t = theta[0];
        Ok(SymMatrix::from_fn(4, |i, j| match j - i {
            0 => 0.0,
            2 => 2.0 * t,
            _ => 1.0,
        }))
    }

    fn in_domain(&self, theta: &[f64]) -> bool {
        // Eigenvalues are (1 ± θ)² and 1 − θ² (twice).
        theta.len() == 1 && theta[0].abs() < 1.0 - super::DOMAIN_EPS
    }

    fn moment_weights(&self) -> Option<Vec<SymMatrix>> {
        let mut w = SymMatrix::zeros(4);
        for (i, j) in NEIGHBOURS {
            w = &w + &SymMatrix::unit_pair(4, i, j).scale(0.25);
        }
        Some(vec![w])
    }

    fn default_init(&self, rhat: &SymMatrix) -> Vec<f64> {
        vec![NEIGHBOURS.iter().map(|&(i, j)| rhat.get(i, j)).sum::<f64>() / 4.0]
    }

    fn spec(&self) -> Option<ModelSpec> {
        Some(ModelSpec::Circular)
    }
}

/// Three variables with R₁₂ = R₁₃ = θ² + ½ and R₂₃ = θ + ¼.
/// Adaptive at θ = 0 although R(0) is not the identity.
#[derive(Debug, Clone, Default)]
pub struct AdaptivityDemoModel;

impl CorrelationModel for AdaptivityDemoModel {
    fn name(&self) -> String {
        "adaptivity_demo".into()
    }

    fn dim(&self) -> usize {
        3
    }

    fn n_params(&self) -> usize {
        1
    }

    fn correlation(&self, theta: &[f64]) -> Result<SymMatrix> {
        check_theta_len(1, theta)?;
        let t = theta[0];
        let a = t * t + 0.5;
        let b = t + 0.25;
        Ok(SymMatrix::from_fn(3, |i, j| match (i, j) {
            _ if i == j => 1.0,
            (1, 2) => b,
            _ => a,
        }))
    }

    fn derivative(&self, theta: &[f64], m: usize) -> Result<SymMatrix> {
        check_theta_len(1, theta)?;
        if m != 0 {
            return Err(Error::Shape(format!("parameter index {m} out of range")));
        }
        let t = theta[0];
        Ok(SymMatrix::from_fn(3, |i, j| match (i, j) {
            _ if i == j => 0.0,
            (1, 2) => 1.0,
            _ => 2.0 * t,
        }))
    }

    fn in_domain(&self, theta: &[f64]) -> bool {
        default_in_domain(self, theta)
    }

    fn default_init(&self, rhat: &SymMatrix) -> Vec<f64> {
        vec![rhat.get(1, 2) - 0.25]
    }

    fn spec(&self) -> Option<ModelSpec> {
        Some(ModelSpec::AdaptivityDemo)
    }
}
