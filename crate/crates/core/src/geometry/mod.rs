//! Scores, information matrices and influence-matrix diagnostics.
//!
//! Every rank-based quantity here is a quadratic form ½ z'Az in the
//! Gaussianized observation z = Φ⁻¹(u), so each is represented by its
//! symmetric matrix A. Two such forms have covariance ⟨A, B⟩ = ½ tr(ARBR)
//! under the copula, which turns every asymptotic covariance into a Gram
//! matrix.

mod diagnostics;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::Geometry;
use crate::numcore::{gram, linalg, normal, SymMatrix};

pub use diagnostics::{
    adaptivity_check, efficiency_criterion, regularity_check, DiagnosticReport, DEFAULT_DIAG_TOL,
};

/// Score of the parametric copula model at a Gaussianized point z:
/// −½ tr(S Ṙ_m) − ½ z'Ṡ_m z for each m.
pub fn parametric_score(geom: &Geometry, z: &[f64]) -> Result<Vec<f64>> {
    check_len(geom.dim(), z.len(), "z")?;
    Ok(geom
        .r_dots
        .iter()
        .zip(&geom.s_dots)
        .map(|(rd, sd)| -0.5 * geom.s.trace_product(rd) - 0.5 * sd.quad_form(z))
        .collect())
}

/// D(b) = S diag(b) + diag(b) S, i.e. entries S_ij (b_i + b_j).
pub fn d_operator(s: &SymMatrix, b: &[f64]) -> Result<SymMatrix> {
    check_len(s.dim(), b.len(), "b")?;
    Ok(SymMatrix::from_fn(s.dim(), |i, j| s.get(i, j) * (b[i] + b[j])))
}

fn check_len(expected: usize, got: usize, what: &str) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Shape(format!("{what} has length {got}, expected {expected}")))
    }
}

/// I + R∘S, positive definite whenever R is.
fn tangent_system(geom: &Geometry) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let mut m = geom.r.hadamard(&geom.s).into_inner();
    for i in 0..geom.dim() {
        m[(i, i)] += 1.0;
    }
    linalg::cholesky_dense(&m, "I + R∘S")
}

/// g_m = −(I + R∘S)⁻¹ (Ṙ_m∘S) 1 for every m, sharing one factorization.
pub fn score_generators(geom: &Geometry) -> Result<Vec<Vec<f64>>> {
    let chol = tangent_system(geom)?;
    Ok(geom
        .r_dots
        .iter()
        .map(|rd| {
            let rhs = -rd.hadamard(&geom.s).as_matrix().column_sum();
            chol.solve(&rhs).iter().copied().collect()
        })
        .collect())
}

/// Least favourable direction for margin j: g_{j,m} (1 − Φ⁻¹(u)²).
pub fn generator_function(geom: &Geometry, m: usize, j: usize, u: f64) -> Result<f64> {
    let g = score_generators(geom)?;
    generator_value(&g, m, j, u)
}

pub(crate) fn generator_value(g: &[Vec<f64>], m: usize, j: usize, u: f64) -> Result<f64> {
    let gm = g
        .get(m)
        .ok_or_else(|| Error::Shape(format!("parameter index {m} out of range")))?;
    let gjm = *gm
        .get(j)
        .ok_or_else(|| Error::Shape(format!("margin index {j} out of range")))?;
    let z = normal::quantile(u)?;
    Ok(gjm * (1.0 - z * z))
}

fn efficient_from_generators(geom: &Geometry, g: &[Vec<f64>]) -> Result<Vec<SymMatrix>> {
    g.iter()
        .zip(&geom.s_dots)
        .map(|(gm, sd)| Ok(&d_operator(&geom.s, gm)? - sd))
        .collect()
}

/// A*_m = D(g_m) − Ṡ_m; the efficient score at z is ½ z'A*_m z.
pub fn efficient_score_matrices(geom: &Geometry) -> Result<Vec<SymMatrix>> {
    let g = score_generators(geom)?;
    efficient_from_generators(geom, &g)
}

/// Efficient information I* and its inverse.
pub fn efficient_info(geom: &Geometry) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let a = efficient_score_matrices(geom)?;
    let info = gram(&a, &geom.ctx)?;
    let inv = invert_info(&info, "efficient information")?;
    Ok((info, inv))
}

fn invert_info(info: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    linalg::spd_inverse(info, what).map_err(|_| {
        Error::singular(
            format!("{what} (condition number)"),
            Some(linalg::spd_condition(info)),
        )
    })
}

/// Fisher information of the parametric model: Gram matrix of −Ṡ_m.
pub fn fisher_info(geom: &Geometry) -> Result<DMatrix<f64>> {
    let neg: Vec<SymMatrix> = geom.s_dots.iter().map(|s| -s).collect();
    gram(&neg, &geom.ctx)
}

/// Projection of A onto the margin tangent space {D(b)}: solves
/// (I + R∘S) b = diag(RA) and returns (b, D(b)).
pub fn project_tangent(a: &SymMatrix, geom: &Geometry) -> Result<(Vec<f64>, SymMatrix)> {
    if a.dim() != geom.dim() {
        return Err(Error::Shape(format!(
            "matrix has dim {}, geometry has dim {}",
            a.dim(),
            geom.dim()
        )));
    }
    let chol = tangent_system(geom)?;
    let ra = geom.r.as_matrix() * a.as_matrix();
    let rhs = DVector::from_iterator(geom.dim(), (0..geom.dim()).map(|j| ra[(j, j)]));
    let b: Vec<f64> = chol.solve(&rhs).iter().copied().collect();
    let proj = d_operator(&geom.s, &b)?;
    Ok((b, proj))
}

/// Influence matrices of the pseudo-likelihood estimator.
#[derive(Debug, Clone)]
pub struct PleInfluence {
    /// B_m = −Ṡ_m + diag(RṠ_m).
    pub b: Vec<SymMatrix>,
    /// A_m = Σ_m' (I⁻¹)_{mm'} B_m'.
    pub a: Vec<SymMatrix>,
    /// Asymptotic covariance, the Gram matrix of the A_m.
    pub cov: DMatrix<f64>,
}

pub fn ple_influence(geom: &Geometry) -> Result<PleInfluence> {
    let fisher_inv = invert_info(&fisher_info(geom)?, "Fisher information")?;
    ple_influence_with(geom, &fisher_inv)
}

fn ple_influence_with(geom: &Geometry, fisher_inv: &DMatrix<f64>) -> Result<PleInfluence> {
    let b: Vec<SymMatrix> = geom
        .s_dots
        .iter()
        .map(|sd| {
            let rs = geom.r.as_matrix() * sd.as_matrix();
            let diag: Vec<f64> = (0..geom.dim()).map(|j| rs[(j, j)]).collect();
            &SymMatrix::from_diagonal(&diag) - sd
        })
        .collect();
    let a = combine(fisher_inv, &b);
    let cov = gram(&a, &geom.ctx)?;
    Ok(PleInfluence { b, a, cov })
}

/// Σ_m' W_{mm'} B_m' for each m.
pub fn combine(w: &DMatrix<f64>, basis: &[SymMatrix]) -> Vec<SymMatrix> {
    let p = basis[0].dim();
    (0..w.nrows())
        .map(|m| {
            let mut acc = DMatrix::zeros(p, p);
            for (l, b) in basis.iter().enumerate() {
                acc += b.as_matrix() * w[(m, l)];
            }
            SymMatrix::symmetrize(acc)
        })
        .collect()
}

/// Centered quadratic influence value ½(z'Az − tr(AR)) at z = Φ⁻¹(u).
pub fn quad_influence_value(a: &SymMatrix, geom: &Geometry, u: &[f64]) -> Result<f64> {
    check_len(geom.dim(), u.len(), "u")?;
    let z = u
        .iter()
        .map(|&ui| normal::quantile(ui))
        .collect::<Result<Vec<_>>>()?;
    Ok(0.5 * (a.quad_form(&z) - a.trace_product(&geom.r)))
}

/// Everything the efficiency theory attaches to one θ.
#[derive(Debug, Clone)]
pub struct EfficiencyBundle {
    pub geometry: Geometry,
    /// g_m, one length-p vector per parameter.
    pub g: Vec<Vec<f64>>,
    /// A*_m = D(g_m) − Ṡ_m.
    pub eff_matrices: Vec<SymMatrix>,
    pub fisher: DMatrix<f64>,
    pub eff_info: DMatrix<f64>,
    pub eff_info_inv: DMatrix<f64>,
    pub ple_b: Vec<SymMatrix>,
    pub ple_a: Vec<SymMatrix>,
    pub ple_cov: DMatrix<f64>,
}

impl EfficiencyBundle {
    pub fn compute(geom: &Geometry) -> Result<Self> {
        let g = score_generators(geom)?;
        let eff_matrices = efficient_from_generators(geom, &g)?;
        let eff_info = gram(&eff_matrices, &geom.ctx)?;
        let eff_info_inv = invert_info(&eff_info, "efficient information")?;
        let fisher = fisher_info(geom)?;
        let fisher_inv = invert_info(&fisher, "Fisher information")?;
        let ple = ple_influence_with(geom, &fisher_inv)?;
        Ok(Self {
            geometry: geom.clone(),
            g,
            eff_matrices,
            fisher,
            eff_info,
            eff_info_inv,
            ple_b: ple.b,
            ple_a: ple.a,
            ple_cov: ple.cov,
        })
    }

    /// Influence matrices Σ_m' (I*⁻¹)_{mm'} A*_m' of the one-step estimator.
    pub fn efficient_influence(&self) -> Vec<SymMatrix> {
        combine(&self.eff_info_inv, &self.eff_matrices)
    }

    /// Per-component asymptotic relative efficiency of the pseudo-likelihood
    /// estimator, diag(I*⁻¹) / diag(PLE covariance).
    pub fn are(&self) -> Vec<f64> {
        (0..self.eff_info_inv.nrows())
            .map(|m| self.eff_info_inv[(m, m)] / self.ple_cov[(m, m)])
            .collect()
    }

    pub fn generator_function(&self, m: usize, j: usize, u: f64) -> Result<f64> {
        generator_value(&self.g, m, j, u)
    }

    pub fn summary(&self) -> BoundSummary {
        BoundSummary {
            theta: self.geometry.theta.clone(),
            fisher: linalg::to_rows(&self.fisher),
            eff_info: linalg::to_rows(&self.eff_info),
            eff_info_inv: linalg::to_rows(&self.eff_info_inv),
            ple_cov: linalg::to_rows(&self.ple_cov),
            are: self.are(),
        }
    }
}

/// Serializable view of the information matrices of a bundle.
#[derive(Debug, Clone, Serialize)]
pub struct BoundSummary {
    pub theta: Vec<f64>,
    pub fisher: Vec<Vec<f64>>,
    pub eff_info: Vec<Vec<f64>>,
    pub eff_info_inv: Vec<Vec<f64>>,
    pub ple_cov: Vec<Vec<f64>>,
    pub are: Vec<f64>,
}
