use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::{json, Value};

use super::{efficient_info, fisher_info};
use crate::error::{Error, Result};
use crate::models::Geometry;
use crate::numcore::{span_residual, SymMatrix, DEFAULT_SPAN_TOL};

/// Absolute tolerance for the diagonal and trace conditions.
pub const DEFAULT_DIAG_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticReport {
    pub criterion: String,
    pub per_m_residuals: Vec<f64>,
    pub tolerance: f64,
    pub verdict: String,
    pub passed: bool,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, Value>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl DiagnosticReport {
    pub fn max_residual(&self) -> f64 {
        self.per_m_residuals.iter().copied().fold(0.0, f64::max)
    }
}

fn diag_of_product(a: &SymMatrix, b: &SymMatrix) -> Vec<f64> {
    let p = a.dim();
    (0..p)
        .map(|j| (0..p).map(|i| a.get(j, i) * b.get(i, j)).sum())
        .collect()
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// Checks diag(R A_m) = 0 and tr(A_m Ṙ_m') = 2·1{m = m'} for candidate
/// influence matrices. The per-m residual is the larger of the two violations.
pub fn regularity_check(influence: &[SymMatrix], geom: &Geometry, tol: f64) -> Result<DiagnosticReport> {
    if influence.len() != geom.n_params() {
        return Err(Error::Shape(format!(
            "{} influence matrices for k = {}",
            influence.len(),
            geom.n_params()
        )));
    }
    if let Some(bad) = influence.iter().find(|a| a.dim() != geom.dim()) {
        return Err(Error::Shape(format!("influence matrix has dim {}", bad.dim())));
    }
    let mut diag_res = Vec::new();
    let mut trace_res = Vec::new();
    for (m, a) in influence.iter().enumerate() {
        diag_res.push(sup_norm(&diag_of_product(&geom.r, a)));
        let t = geom
            .r_dots
            .iter()
            .enumerate()
            .map(|(l, rd)| (a.trace_product(rd) - if l == m { 2.0 } else { 0.0 }).abs())
            .fold(0.0, f64::max);
        trace_res.push(t);
    }
    let per_m: Vec<f64> = diag_res.iter().zip(&trace_res).map(|(a, b)| a.max(*b)).collect();
    let passed = per_m.iter().all(|r| *r <= tol);
    let mut extra = BTreeMap::new();
    extra.insert("max_diag_violation".into(), json!(sup_norm(&diag_res)));
    extra.insert("max_trace_violation".into(), json!(sup_norm(&trace_res)));
    Ok(DiagnosticReport {
        criterion: "regularity".into(),
        per_m_residuals: per_m,
        tolerance: tol,
        verdict: if passed { "regular" } else { "not_regular" }.into(),
        passed,
        extra,
        notes: Vec::new(),
    })
}

/// Span test for efficiency of an estimator with influence generated by B_m.
///
/// With B_{m,R} = R B_m R, the criterion matrix is
/// M_m = B_{m,R} − ½(diag(B_{m,R}) R + R diag(B_{m,R})) and the estimator is
/// efficient iff every M_m lies in span{Ṙ_1, …, Ṙ_k}. When `b` is `None` the
/// pseudo-likelihood case is tested, with B_{m,R} = R diag(Ṙ_m S) R.
/// `rel_tol` defaults to the span tolerance 1e-8 × (1 + ‖M_m‖).
pub fn efficiency_criterion(
    geom: &Geometry,
    b: Option<&[SymMatrix]>,
    rel_tol: Option<f64>,
) -> Result<DiagnosticReport> {
    let rel_tol = rel_tol.unwrap_or(DEFAULT_SPAN_TOL);
    let r = geom.r.as_matrix();
    let brs: Vec<SymMatrix> = match b {
        Some(bs) => {
            if bs.len() != geom.n_params() || bs.iter().any(|m| m.dim() != geom.dim()) {
                return Err(Error::Shape("B matrices do not match the geometry".into()));
            }
            bs.iter().map(|bm| geom.r.sandwich(bm)).collect()
        }
        None => geom
            .r_dots
            .iter()
            .map(|rd| {
                let rs = rd.as_matrix() * geom.s.as_matrix();
                let d: Vec<f64> = (0..geom.dim()).map(|j| rs[(j, j)]).collect();
                geom.r.sandwich(&SymMatrix::from_diagonal(&d))
            })
            .collect(),
    };
    let mut residuals = Vec::new();
    let mut thresholds = Vec::new();
    let mut coefficients = Vec::new();
    let mut rank = 0;
    for br in &brs {
        let d = SymMatrix::from_diagonal(&br.diagonal());
        let half = (d.as_matrix() * r + r * d.as_matrix()) * 0.5;
        let crit = SymMatrix::symmetrize(br.as_matrix() - half);
        let proj = span_residual(&crit, &geom.r_dots)?;
        thresholds.push(rel_tol * (1.0 + crit.frobenius_norm()));
        residuals.push(proj.residual_norm);
        coefficients.push(proj.coefficients);
        rank = proj.rank;
    }
    let passed = residuals.iter().zip(&thresholds).all(|(r, t)| r <= t);
    let mut extra = BTreeMap::new();
    extra.insert("estimator".into(), json!(if b.is_none() { "ple" } else { "custom" }));
    extra.insert("thresholds".into(), json!(thresholds));
    extra.insert("span_coefficients".into(), json!(coefficients));
    extra.insert("derivative_rank".into(), json!(rank));
    let mut notes = Vec::new();
    if rank < geom.n_params() {
        notes.push(format!(
            "derivative matrices have rank {rank} < k = {}; span computed with a rank-revealing solve",
            geom.n_params()
        ));
    }
    Ok(DiagnosticReport {
        criterion: "efficiency".into(),
        per_m_residuals: residuals,
        tolerance: rel_tol,
        verdict: if passed { "efficient" } else { "not_efficient" }.into(),
        passed,
        extra,
        notes,
    })
}

/// Adaptivity test: diag(R Ṡ_m) = 0 for all m. Cross-checked against
/// ‖I − I*‖ (Frobenius), which must vanish exactly when the test passes.
pub fn adaptivity_check(geom: &Geometry, tol: f64) -> Result<DiagnosticReport> {
    let per_m: Vec<f64> = geom
        .s_dots
        .iter()
        .map(|sd| sup_norm(&diag_of_product(&geom.r, sd)))
        .collect();
    let passed = per_m.iter().all(|r| *r <= tol);
    let mut extra = BTreeMap::new();
    let mut notes = Vec::new();
    match (fisher_info(geom), efficient_info(geom)) {
        (Ok(f), Ok((e, _))) => {
            let gap = (&f - &e).norm();
            let scale = 1.0 + f.norm();
            let gap_says_adaptive = gap <= tol * scale;
            extra.insert("information_gap".into(), json!(gap));
            extra.insert("cross_check_consistent".into(), json!(gap_says_adaptive == passed));
            if gap_says_adaptive != passed {
                notes.push(format!(
                    "information gap {gap:e} disagrees with the diagonal criterion"
                ));
            }
        }
        (Err(e), _) | (_, Err(e)) => notes.push(format!("information cross-check skipped: {e}")),
    }
    Ok(DiagnosticReport {
        criterion: "adaptivity".into(),
        per_m_residuals: per_m,
        tolerance: tol,
        verdict: if passed { "adaptive" } else { "not_adaptive" }.into(),
        passed,
        extra,
        notes,
    })
}
