//! Seeded sampling from a Gaussian copula.
//!
//! Each replication owns a ChaCha20 stream selected by (seed, stream index),
//! so parallel runs reproduce sequential ones exactly.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::{linalg, normal, SymMatrix};

/// Largest double below 1.
const ONE_MINUS: f64 = 1.0 - f64::EPSILON / 2.0;

#[derive(Debug, Clone)]
pub struct CopulaSampler {
    chol_l: DMatrix<f64>,
}

impl CopulaSampler {
    /// Factorizes R. A matrix within round-off of singular gets one retry
    /// with 1e-12 added to the diagonal.
    pub fn new(r: &SymMatrix) -> Result<Self> {
        let chol = match linalg::cholesky(r, "copula correlation") {
            Ok(c) => c,
            Err(_) => {
                let jittered = r.as_matrix() + DMatrix::identity(r.dim(), r.dim()) * 1e-12;
                linalg::cholesky_dense(&jittered, "copula correlation (jittered)")?
            }
        };
        Ok(Self { chol_l: chol.l() })
    }

    pub fn dim(&self) -> usize {
        self.chol_l.nrows()
    }

    /// n×p Gaussian draws Z ~ N(0, R) from stream `stream` of `seed`.
    pub fn sample_normal(&self, n: usize, seed: u64, stream: u64) -> DMatrix<f64> {
        let p = self.dim();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let mut out = DMatrix::zeros(n, p);
        let mut e = DVector::zeros(p);
        for i in 0..n {
            for v in e.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
            let z = &self.chol_l * &e;
            out.row_mut(i).copy_from(&z.transpose());
        }
        out
    }

    /// n×p copula draws U = Φ(Z), strictly inside (0, 1).
    pub fn sample(&self, n: usize, seed: u64, stream: u64) -> DMatrix<f64> {
        self.sample_normal(n, seed, stream)
            .map(|z| normal::cdf(z).clamp(f64::MIN_POSITIVE, ONE_MINUS))
    }
}

/// n draws from the Gaussian copula with correlation R, using stream 0 of `seed`.
pub fn sample_copula(r: &SymMatrix, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    if n == 0 {
        return Err(Error::Config {
            field: "n".into(),
            message: "sample size must be at least 1".into(),
        });
    }
    Ok(CopulaSampler::new(r)?.sample(n, seed, 0))
}

/// Marginal distribution applied to a uniform column through its quantile function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginKind {
    Uniform,
    Gaussian,
    Exponential,
    Cauchy,
}

impl MarginKind {
    pub fn quantile(self, u: f64) -> f64 {
        match self {
            MarginKind::Uniform => u,
            MarginKind::Gaussian => normal::quantile(u).unwrap_or(f64::NAN),
            MarginKind::Exponential => -(-u).ln_1p(),
            MarginKind::Cauchy => (std::f64::consts::PI * (u - 0.5)).tan(),
        }
    }
}

/// A strictly increasing transform of the uniform variate, per column index.
#[derive(Clone)]
pub struct MonotoneTransform {
    pub name: String,
    pub f: Arc<dyn Fn(usize, f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for MonotoneTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MonotoneTransform({})", self.name)
    }
}

/// Margins for every column: one kind for all, one kind per column, or a
/// user transform (code only, not serializable).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MarginSpec {
    All(MarginKind),
    PerColumn(Vec<MarginKind>),
    #[serde(skip)]
    Transform(MonotoneTransform),
}

impl Default for MarginSpec {
    fn default() -> Self {
        MarginSpec::All(MarginKind::Uniform)
    }
}

/// Applies the margin quantile functions columnwise.
pub fn apply_margins(u: &DMatrix<f64>, spec: &MarginSpec) -> Result<DMatrix<f64>> {
    let (n, p) = u.shape();
    match spec {
        MarginSpec::All(kind) => Ok(u.map(|v| kind.quantile(v))),
        MarginSpec::PerColumn(kinds) => {
            if kinds.len() != p {
                return Err(Error::Shape(format!(
                    "{} margins given for {p} columns",
                    kinds.len()
                )));
            }
            Ok(DMatrix::from_fn(n, p, |i, j| kinds[j].quantile(u[(i, j)])))
        }
        MarginSpec::Transform(t) => Ok(DMatrix::from_fn(n, p, |i, j| (t.f)(j, u[(i, j)]))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exch(p: usize, t: f64) -> SymMatrix {
        SymMatrix::from_fn(p, |i, j| if i == j { 1.0 } else { t })
    }

    #[test]
    fn deterministic_and_stream_separated() {
        let r = exch(3, 0.5);
        let a = sample_copula(&r, 50, 42).unwrap();
        let b = sample_copula(&r, 50, 42).unwrap();
        assert_eq!(a, b);
        let s = CopulaSampler::new(&r).unwrap();
        assert_ne!(s.sample(50, 42, 1), a);
        assert_eq!(s.sample(50, 42, 0), a);
        assert!(a.iter().all(|u| *u > 0.0 && *u < 1.0));
    }

    #[test]
    fn rejects_non_pd() {
        assert!(matches!(
            sample_copula(&exch(3, -0.6), 10, 1),
            Err(Error::Singular { .. })
        ));
    }

    #[test]
    fn margins() {
        let u = DMatrix::from_row_slice(2, 2, &[0.25, 0.5, 0.75, 0.1]);
        assert_eq!(apply_margins(&u, &MarginSpec::All(MarginKind::Uniform)).unwrap(), u);
        let g = apply_margins(&u, &MarginSpec::All(MarginKind::Gaussian)).unwrap();
        assert_eq!(g[(0, 1)], 0.0);
        let per = MarginSpec::PerColumn(vec![MarginKind::Exponential, MarginKind::Cauchy]);
        let x = apply_margins(&u, &per).unwrap();
        assert!((x[(0, 0)] - (4.0f64 / 3.0).ln()).abs() < 1e-15);
        assert!(x[(0, 1)].abs() < 1e-15);
        assert!(apply_margins(&u, &MarginSpec::PerColumn(vec![MarginKind::Uniform])).is_err());
    }

    #[test]
    fn margin_spec_json() {
        let s: MarginSpec = serde_json::from_str("\"cauchy\"").unwrap();
        assert!(matches!(s, MarginSpec::All(MarginKind::Cauchy)));
        let s: MarginSpec = serde_json::from_str("[\"uniform\", \"exponential\"]").unwrap();
        assert!(matches!(s, MarginSpec::PerColumn(ref v) if v.len() == 2));
    }
}
