//! Correlation models θ ↦ R(θ) and their evaluation into a [`Geometry`].
//!
//! Built-in families are constructed from a [`ModelSpec`]; code-level
//! extensions implement [`CorrelationModel`] directly. Only [`CorrelationModel::dim`],
//! [`CorrelationModel::n_params`], [`CorrelationModel::name`] and
//! [`CorrelationModel::correlation`] are required; derivatives default to
//! central finite differences.

mod affine;
mod factor;
mod nonlinear;
mod spec;

use std::fmt::Debug;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numcore::linalg;
use crate::numcore::{InnerProductContext, SymMatrix};

pub use affine::{AffineKind, AffineModel};
pub use factor::{FactorConstraint, FactorModel};
pub use nonlinear::{AdaptivityDemoModel, CircularModel};
pub use spec::ModelSpec;

/// Margin kept between θ and the boundary of the parameter space.
pub const DOMAIN_EPS: f64 = 1e-6;

pub trait CorrelationModel: Send + Sync + Debug {
    fn name(&self) -> String;

    /// Dimension p of the observations.
    fn dim(&self) -> usize;

    /// Number k of free parameters.
    fn n_params(&self) -> usize;

    /// R(θ). Implementations must return a unit-diagonal symmetric matrix for
    /// every θ of the right length, inside the domain or not.
    fn correlation(&self, theta: &[f64]) -> Result<SymMatrix>;

    /// Ṙ_m(θ). The default is a central difference with step max(1e-6, 1e-8|θ_m|).
    fn derivative(&self, theta: &[f64], m: usize) -> Result<SymMatrix> {
        check_index(self, m)?;
        let h = (1e-8 * theta[m].abs()).max(1e-6);
        let mut up = theta.to_vec();
        let mut down = theta.to_vec();
        up[m] += h;
        down[m] -= h;
        let d = &self.correlation(&up)? - &self.correlation(&down)?;
        Ok(d.scale(0.5 / h).off_diagonal())
    }

    fn derivatives(&self, theta: &[f64]) -> Result<Vec<SymMatrix>> {
        (0..self.n_params())
            .map(|m| self.derivative(theta, m))
            .collect()
    }

    /// Membership in the open parameter set, with margin [`DOMAIN_EPS`].
    /// The default requires R(θ) to be positive definite with smallest
    /// eigenvalue above the margin.
    fn in_domain(&self, theta: &[f64]) -> bool {
        default_in_domain(self, theta)
    }

    /// Weight matrices W_m such that θ_m = ½ tr(W_m R̂) is the least-squares
    /// fit of R(θ) to R̂. Only affine-type families have them.
    fn moment_weights(&self) -> Option<Vec<SymMatrix>> {
        None
    }

    /// Starting value computed from a normal-scores matrix. Need not lie in the domain.
    fn default_init(&self, rhat: &SymMatrix) -> Vec<f64>;

    /// Point toward which out-of-domain starting values are shrunk.
    fn shrink_center(&self) -> Vec<f64> {
        vec![0.0; self.n_params()]
    }

    /// Caveats that should accompany any report on this model.
    fn notes(&self) -> Vec<String> {
        Vec::new()
    }

    /// Descriptor that rebuilds this model, when one exists.
    fn spec(&self) -> Option<ModelSpec> {
        None
    }
}

fn check_index<M: CorrelationModel + ?Sized>(model: &M, m: usize) -> Result<()> {
    if m < model.n_params() {
        Ok(())
    } else {
        Err(Error::Shape(format!(
            "parameter index {m} out of range for k = {}",
            model.n_params()
        )))
    }
}

pub(crate) fn check_theta_len(k: usize, theta: &[f64]) -> Result<()> {
    if theta.len() != k {
        return Err(Error::Shape(format!(
            "expected {k} parameter values, got {}",
            theta.len()
        )));
    }
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(Error::Domain("parameter values must be finite".into()));
    }
    Ok(())
}

pub(crate) fn default_in_domain<M: CorrelationModel + ?Sized>(model: &M, theta: &[f64]) -> bool {
    if theta.len() != model.n_params() || theta.iter().any(|t| !t.is_finite()) {
        return false;
    }
    match model.correlation(theta) {
        Ok(r) => {
            linalg::cholesky(&r, "domain").is_ok()
                && linalg::min_eigenvalue(r.as_matrix()) > DOMAIN_EPS
        }
        Err(_) => false,
    }
}

/// Returns a [`Error::Domain`] naming the model unless θ is in its domain.
pub fn require_domain(model: &dyn CorrelationModel, theta: &[f64]) -> Result<()> {
    check_theta_len(model.n_params(), theta)?;
    if model.in_domain(theta) {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "theta = {theta:?} is outside the parameter space of {}",
            model.name()
        )))
    }
}

/// Moves θ along the segment toward [`CorrelationModel::shrink_center`]
/// until R(θ) has smallest eigenvalue at least `min_eig`.
/// Returns the shrunk value and whether any shrinking happened.
pub fn shrink_into_domain(
    model: &dyn CorrelationModel,
    theta: &[f64],
    min_eig: f64,
) -> Result<(Vec<f64>, bool)> {
    check_theta_len(model.n_params(), theta)?;
    let center = model.shrink_center();
    let ok = |t: &[f64]| {
        model.in_domain(t)
            && model
                .correlation(t)
                .map(|r| linalg::min_eigenvalue(r.as_matrix()) >= min_eig)
                .unwrap_or(false)
    };
    if ok(theta) {
        return Ok((theta.to_vec(), false));
    }
    let mut s = 1.0;
    for _ in 0..400 {
        s *= 0.9;
        let cand: Vec<f64> = theta
            .iter()
            .zip(&center)
            .map(|(t, c)| c + s * (t - c))
            .collect();
        if ok(&cand) {
            return Ok((cand, true));
        }
    }
    Err(Error::Domain(format!(
        "could not move {theta:?} into the domain of {}",
        model.name()
    )))
}

/// All matrices of the model evaluated at one θ.
#[derive(Debug, Clone)]
pub struct Geometry {
    pub theta: Vec<f64>,
    pub r: SymMatrix,
    /// R⁻¹.
    pub s: SymMatrix,
    /// Ṙ_m.
    pub r_dots: Vec<SymMatrix>,
    /// Ṡ_m = −S Ṙ_m S.
    pub s_dots: Vec<SymMatrix>,
    pub ctx: InnerProductContext,
}

impl Geometry {
    pub fn dim(&self) -> usize {
        self.r.dim()
    }

    pub fn n_params(&self) -> usize {
        self.r_dots.len()
    }

    /// Builds the geometry from R and its derivatives directly.
    pub fn from_parts(theta: Vec<f64>, r: SymMatrix, r_dots: Vec<SymMatrix>) -> Result<Self> {
        let p = r.dim();
        if let Some(bad) = r_dots.iter().find(|d| d.dim() != p) {
            return Err(Error::Shape(format!(
                "derivative has dim {}, correlation has dim {p}",
                bad.dim()
            )));
        }
        let s = SymMatrix::symmetrize(linalg::spd_inverse(r.as_matrix(), "R(theta)")?);
        let s_dots = r_dots.iter().map(|rd| -&s.sandwich(rd)).collect();
        Ok(Self {
            theta,
            ctx: InnerProductContext::new_unchecked(r.clone()),
            r,
            s,
            r_dots,
            s_dots,
        })
    }
}

/// Evaluates R, S, Ṙ_m and Ṡ_m at θ.
pub fn eval_geometry(model: &dyn CorrelationModel, theta: &[f64]) -> Result<Geometry> {
    check_theta_len(model.n_params(), theta)?;
    let r = model.correlation(theta)?;
    let r_dots = model.derivatives(theta)?;
    Geometry::from_parts(theta.to_vec(), r, r_dots)
}

/// Outcome of the regularity conditions checked at one θ.
#[derive(Debug, Clone, Serialize)]
pub struct Assumption1Report {
    pub model: String,
    pub theta: Vec<f64>,
    pub in_domain: bool,
    pub positive_definite: bool,
    pub min_eigenvalue: f64,
    pub unit_diagonal: bool,
    pub max_diagonal_deviation: f64,
    /// Numerical rank of {Ṙ_1, …, Ṙ_k}.
    pub derivative_rank: usize,
    pub n_params: usize,
    pub smallest_singular_value: f64,
    pub tolerance: f64,
    pub violations: Vec<String>,
    pub notes: Vec<String>,
    pub passed: bool,
}

/// Checks positive definiteness, unit diagonal and linear independence of
/// the derivative matrices. Violations are reported, never raised, except
/// for a θ of the wrong length.
pub fn validate_assumption1(model: &dyn CorrelationModel, theta: &[f64]) -> Result<Assumption1Report> {
    check_theta_len(model.n_params(), theta)?;
    const TOL: f64 = 1e-8;
    let r = model.correlation(theta)?;
    let in_domain = model.in_domain(theta);
    let min_eig = linalg::min_eigenvalue(r.as_matrix());
    let positive_definite = linalg::cholesky(&r, "assumption check").is_ok() && min_eig > 0.0;
    let max_dev = r
        .diagonal()
        .iter()
        .map(|d| (d - 1.0).abs())
        .fold(0.0, f64::max);
    let unit_diagonal = max_dev <= 1e-12;

    let dots = model.derivatives(theta)?;
    let p = r.dim();
    let len = p * (p + 1) / 2;
    let k = dots.len();
    let mut design = DMatrix::zeros(len, k);
    for (c, d) in dots.iter().enumerate() {
        let mut idx = 0;
        for i in 0..p {
            for j in i..p {
                let w = if i == j { 1.0 } else { std::f64::consts::SQRT_2 };
                design[(idx, c)] = w * d.get(i, j);
                idx += 1;
            }
        }
    }
    let sv = design.singular_values();
    let smax = sv.max();
    let smallest = if k > len { 0.0 } else { sv.min() };
    let rank = sv.iter().filter(|s| **s > TOL * smax.max(1.0)).count();

    let mut violations = Vec::new();
    if !in_domain {
        violations.push("theta is outside the declared parameter space".to_string());
    }
    if !positive_definite {
        violations.push(format!(
            "R(theta) is not positive definite (smallest eigenvalue {min_eig:e})"
        ));
    }
    if !unit_diagonal {
        violations.push(format!("R(theta) diagonal deviates from 1 by {max_dev:e}"));
    }
    if rank < k {
        violations.push(format!(
            "derivative matrices are linearly dependent: rank {rank} < k = {k}"
        ));
    }
    Ok(Assumption1Report {
        model: model.name(),
        theta: theta.to_vec(),
        in_domain,
        positive_definite,
        min_eigenvalue: min_eig,
        unit_diagonal,
        max_diagonal_deviation: max_dev,
        derivative_rank: rank,
        n_params: k,
        smallest_singular_value: smallest,
        tolerance: TOL,
        passed: violations.is_empty(),
        violations,
        notes: model.notes(),
    })
}
