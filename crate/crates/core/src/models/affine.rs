use nalgebra::DMatrix;

use super::{check_theta_len, default_in_domain, CorrelationModel, ModelSpec, DOMAIN_EPS};
use crate::error::{Error, Result};
use crate::numcore::linalg;
use crate::numcore::SymMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AffineKind {
    Unrestricted,
    Exchangeable,
    Toeplitz,
    Custom,
}

/// R(θ) = I + Σ θ_m G_m with fixed zero-diagonal symmetric generators.
#[derive(Debug, Clone)]
pub struct AffineModel {
    kind: AffineKind,
    p: usize,
    generators: Vec<SymMatrix>,
    weights: Option<Vec<SymMatrix>>,
    /// Parameter labels, e.g. "r21" or "lag1".
    labels: Vec<String>,
}

impl AffineModel {
    /// Unrestricted correlation: one parameter per pair, ordered by rows of
    /// the strict lower triangle: (2,1), (3,1), (3,2), (4,1), …
    pub fn unrestricted(p: usize) -> Result<Self> {
        check_p(p)?;
        let mut gens = Vec::new();
        let mut labels = Vec::new();
        for i in 1..p {
            for j in 0..i {
                gens.push(SymMatrix::unit_pair(p, i, j));
                labels.push(format!("r{}{}", i + 1, j + 1));
            }
        }
        Ok(Self::with_generators(AffineKind::Unrestricted, p, gens, labels))
    }

    pub fn exchangeable(p: usize) -> Result<Self> {
        check_p(p)?;
        let g = SymMatrix::from_fn(p, |i, j| if i == j { 0.0 } else { 1.0 });
        Ok(Self::with_generators(
            AffineKind::Exchangeable,
            p,
            vec![g],
            vec!["rho".into()],
        ))
    }

    /// R_ij = θ_{|i-j|}; k = p − 1.
    pub fn toeplitz(p: usize) -> Result<Self> {
        check_p(p)?;
        let gens = (1..p)
            .map(|lag| SymMatrix::from_fn(p, |i, j| if j - i == lag { 1.0 } else { 0.0 }))
            .collect();
        let labels = (1..p).map(|l| format!("lag{l}")).collect();
        Ok(Self::with_generators(AffineKind::Toeplitz, p, gens, labels))
    }

    pub fn custom(p: usize, generators: Vec<SymMatrix>) -> Result<Self> {
        check_p(p)?;
        if generators.is_empty() {
            return Err(Error::config("generators", "at least one generator is required"));
        }
        for (m, g) in generators.iter().enumerate() {
            if g.dim() != p {
                return Err(Error::config(
                    format!("generators[{m}]"),
                    format!("expected a {p}x{p} matrix, got dim {}", g.dim()),
                ));
            }
            if g.diagonal().iter().any(|d| *d != 0.0) {
                return Err(Error::config(
                    format!("generators[{m}]"),
                    "generator diagonal must be zero",
                ));
            }
        }
        let labels = (1..=generators.len()).map(|m| format!("theta{m}")).collect();
        Ok(Self::with_generators(AffineKind::Custom, p, generators, labels))
    }

    fn with_generators(kind: AffineKind, p: usize, generators: Vec<SymMatrix>, labels: Vec<String>) -> Self {
        let weights = moment_weights_for(&generators);
        Self {
            kind,
            p,
            generators,
            weights,
            labels,
        }
    }

    pub fn kind(&self) -> AffineKind {
        self.kind
    }

    pub fn generators(&self) -> &[SymMatrix] {
        &self.generators
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

fn check_p(p: usize) -> Result<()> {
    if p < 2 {
        Err(Error::config("p", format!("dimension must be at least 2, got {p}")))
    } else {
        Ok(())
    }
}

/// W_m = 2 Σ_l (G⁻¹)_{ml} G_l with G the Frobenius Gram matrix of the
/// generators, so that ½ tr(W_m R̂) is the least-squares coefficient.
fn moment_weights_for(generators: &[SymMatrix]) -> Option<Vec<SymMatrix>> {
    let k = generators.len();
    let gram = DMatrix::from_fn(k, k, |a, b| generators[a].trace_product(&generators[b]));
    let inv = linalg::spd_inverse(&gram, "generator Gram").ok()?;
    let p = generators[0].dim();
    Some(
        (0..k)
            .map(|m| {
                let mut w = SymMatrix::zeros(p);
                for (l, g) in generators.iter().enumerate() {
                    w = &w + &g.scale(2.0 * inv[(m, l)]);
                }
                w
            })
            .collect(),
    )
}

impl CorrelationModel for AffineModel {
    fn name(&self) -> String {
        match self.kind {
            AffineKind::Unrestricted => format!("unrestricted({})", self.p),
            AffineKind::Exchangeable => format!("exchangeable({})", self.p),
            AffineKind::Toeplitz => format!("toeplitz({})", self.p),
            AffineKind::Custom => format!("custom_affine({}, k={})", self.p, self.generators.len()),
        }
    }

    fn dim(&self) -> usize {
        self.p
    }

    fn n_params(&self) -> usize {
        self.generators.len()
    }

    fn correlation(&self, theta: &[f64]) -> Result<SymMatrix> {
        check_theta_len(self.n_params(), theta)?;
        let mut r = SymMatrix::identity(self.p).into_inner();
        for (t, g) in theta.iter().zip(&self.generators) {
            r += g.as_matrix() * *t;
        }
        Ok(SymMatrix::symmetrize(r))
    }

    fn derivative(&self, theta: &[f64], m: usize) -> Result<SymMatrix> {
        check_theta_len(self.n_params(), theta)?;
        self.generators
            .get(m)
            .cloned()
            .ok_or_else(|| Error::Shape(format!("parameter index {m} out of range")))
    }

    fn in_domain(&self, theta: &[f64]) -> bool {
        match self.kind {
            AffineKind::Exchangeable => {
                theta.len() == 1 && {
                    let lo = -1.0 / (self.p as f64 - 1.0) + DOMAIN_EPS;
                    theta[0] > lo && theta[0] < 1.0 - DOMAIN_EPS
                }
            }
            _ => default_in_domain(self, theta),
        }
    }

    fn moment_weights(&self) -> Option<Vec<SymMatrix>> {
        self.weights.clone()
    }

    fn default_init(&self, rhat: &SymMatrix) -> Vec<f64> {
        match &self.weights {
            Some(w) => w.iter().map(|w| 0.5 * w.trace_product(rhat)).collect(),
            None => vec![0.0; self.n_params()],
        }
    }

    fn spec(&self) -> Option<ModelSpec> {
        Some(match self.kind {
            AffineKind::Unrestricted => ModelSpec::Unrestricted { p: self.p },
            AffineKind::Exchangeable => ModelSpec::Exchangeable { p: self.p },
            AffineKind::Toeplitz => ModelSpec::Toeplitz { p: self.p },
            AffineKind::Custom => ModelSpec::CustomAffine {
                p: self.p,
                generators: self.generators.iter().map(|g| g.to_rows()).collect(),
            },
        })
    }

    fn notes(&self) -> Vec<String> {
        if self.kind == AffineKind::Custom && self.weights.is_none() {
            vec!["generators are linearly dependent; no moment pilot available".into()]
        } else {
            Vec::new()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exchangeable_matrix() {
        let m = AffineModel::exchangeable(3).unwrap();
        let r = m.correlation(&[0.5]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(r.get(i, j), if i == j { 1.0 } else { 0.5 });
            }
        }
        let d = m.derivative(&[0.5], 0).unwrap();
        assert_eq!(d.get(0, 1), 1.0);
        assert_eq!(d.get(1, 1), 0.0);
    }

    #[test]
    fn exchangeable_domain() {
        let m = AffineModel::exchangeable(3).unwrap();
        assert!(m.in_domain(&[0.5]));
        assert!(m.in_domain(&[-0.49]));
        assert!(!m.in_domain(&[-0.5]));
        assert!(!m.in_domain(&[-0.6]));
        assert!(!m.in_domain(&[1.0]));
    }

    #[test]
    fn unrestricted_ordering() {
        let m = AffineModel::unrestricted(3).unwrap();
        let r = m.correlation(&[0.1, 0.2, 0.3]).unwrap();
        assert_eq!(r.get(1, 0), 0.1);
        assert_eq!(r.get(2, 0), 0.2);
        assert_eq!(r.get(2, 1), 0.3);
    }

    #[test]
    fn weights_recover_parameters() {
        for m in [
            AffineModel::toeplitz(5).unwrap(),
            AffineModel::unrestricted(4).unwrap(),
            AffineModel::exchangeable(6).unwrap(),
        ] {
            let k = m.n_params();
            let theta: Vec<f64> = (0..k).map(|i| 0.05 * (i as f64 + 1.0) / k as f64).collect();
            let r = m.correlation(&theta).unwrap();
            let back = m.default_init(&r);
            for (a, b) in theta.iter().zip(back) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn toeplitz3_pilot_is_lag_means() {
        let m = AffineModel::toeplitz(3).unwrap();
        let rhat = SymMatrix::from_rows(&[
            vec![0.9, 0.4, 0.1],
            vec![0.4, 1.1, 0.6],
            vec![0.1, 0.6, 1.0],
        ])
        .unwrap();
        let t = m.default_init(&rhat);
        assert!((t[0] - 0.5).abs() < 1e-15);
        assert!((t[1] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn custom_validation() {
        assert!(matches!(
            AffineModel::custom(3, vec![]),
            Err(Error::Config { ref field, .. }) if field == "generators"
        ));
        let bad = SymMatrix::identity(3);
        assert!(AffineModel::custom(3, vec![bad]).is_err());
        assert!(AffineModel::custom(3, vec![SymMatrix::unit_pair(2, 0, 1)]).is_err());
    }
}
