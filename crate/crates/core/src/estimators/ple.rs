//! Pseudo-likelihood estimation from a normal-scores matrix.
//!
//! Per observation the Gaussian copula log-density averages to
//! ℓ(θ) = −½ log det R(θ) − ½ tr((S(θ) − I) R̂), whose gradient is half the
//! pseudo-score f_m(θ) = tr(Ṡ_m(θ)(R(θ) − R̂)). The solver takes Newton steps
//! on f with a finite-difference Jacobian while ℓ is locally concave, and
//! gradient steps otherwise; every step is backtracked until ℓ increases.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::models::CorrelationModel;
use crate::numcore::{linalg, SymMatrix};

#[derive(Debug, Clone, Copy)]
pub struct PleOptions {
    pub max_iter: usize,
    /// Convergence when the pseudo-score sup-norm is at most `score_tol · k`.
    pub score_tol: f64,
}

impl Default for PleOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            score_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PleOutcome {
    pub theta: Vec<f64>,
    pub iterations: usize,
    pub score_norm: f64,
}

struct Objective<'a> {
    model: &'a dyn CorrelationModel,
    rhat: &'a SymMatrix,
}

impl Objective<'_> {
    /// ℓ(θ), or −∞ outside the domain.
    fn loglik(&self, theta: &[f64]) -> f64 {
        if !self.model.in_domain(theta) {
            return f64::NEG_INFINITY;
        }
        let Ok(r) = self.model.correlation(theta) else {
            return f64::NEG_INFINITY;
        };
        let Ok(chol) = linalg::cholesky(&r, "pseudo-likelihood") else {
            return f64::NEG_INFINITY;
        };
        let s = chol.inverse();
        let tr = s.component_mul(self.rhat.as_matrix()).sum() - self.rhat.trace();
        -0.5 * linalg::log_det_from_cholesky(&chol) - 0.5 * tr
    }

    fn score(&self, theta: &[f64]) -> Result<Vec<f64>> {
        pseudo_score(self.model, self.rhat, theta)
    }
}

/// f_m(θ) = tr(Ṡ_m(θ)(R(θ) − R̂)) = tr(S Ṙ_m S R̂) − tr(S Ṙ_m).
pub fn pseudo_score(model: &dyn CorrelationModel, rhat: &SymMatrix, theta: &[f64]) -> Result<Vec<f64>> {
    let r = model.correlation(theta)?;
    let s = linalg::spd_inverse(r.as_matrix(), "pseudo-score")?;
    let srs = &s * rhat.as_matrix() * &s;
    model
        .derivatives(theta)?
        .iter()
        .map(|rd| {
            let rd = rd.as_matrix();
            Ok(rd.component_mul(&srs).sum() - rd.component_mul(&s).sum())
        })
        .collect()
}

fn sup(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Symmetrized central-difference Jacobian of the pseudo-score.
fn jacobian(obj: &Objective<'_>, theta: &[f64]) -> Result<DMatrix<f64>> {
    let k = theta.len();
    let mut jac = DMatrix::zeros(k, k);
    for j in 0..k {
        let h = (1e-8 * theta[j].abs()).max(1e-6);
        let mut up = theta.to_vec();
        let mut down = theta.to_vec();
        up[j] += h;
        down[j] -= h;
        let fu = obj.score(&up)?;
        let fd = obj.score(&down)?;
        for i in 0..k {
            jac[(i, j)] = (fu[i] - fd[i]) / (2.0 * h);
        }
    }
    Ok(0.5 * (&jac + jac.transpose()))
}

/// Newton direction −J⁻¹f if J is negative definite and the direction
/// ascends; otherwise the gradient direction f.
fn direction(jac: &DMatrix<f64>, f: &[f64]) -> Vec<f64> {
    let neg = -jac;
    if let Some(chol) = nalgebra::Cholesky::new(neg) {
        let d: Vec<f64> = chol.solve(&DVector::from_column_slice(f)).iter().copied().collect();
        if d.iter().all(|v| v.is_finite()) && dot(&d, f) > 0.0 {
            return d;
        }
    }
    f.to_vec()
}

/// Maximizes the pseudo-likelihood starting from `init`, which must lie in
/// the domain.
pub fn ple_from_rhat(
    model: &dyn CorrelationModel,
    rhat: &SymMatrix,
    init: &[f64],
    opts: PleOptions,
) -> Result<PleOutcome> {
    if rhat.dim() != model.dim() {
        return Err(Error::Shape(format!(
            "normal-scores matrix has dim {}, model has p = {}",
            rhat.dim(),
            model.dim()
        )));
    }
    crate::models::require_domain(model, init)?;
    let obj = Objective { model, rhat };
    let k = init.len();
    let tol = opts.score_tol * k as f64;
    let mut theta = init.to_vec();
    let mut ll = obj.loglik(&theta);
    let mut f = obj.score(&theta)?;
    let mut trace = Vec::new();
    for iter in 0..opts.max_iter {
        let fnorm = sup(&f);
        trace.push(format!("iter {iter}: theta = {theta:?}, |score| = {fnorm:e}, loglik = {ll}"));
        if fnorm <= tol {
            return Ok(PleOutcome {
                theta,
                iterations: iter,
                score_norm: fnorm,
            });
        }
        let d = direction(&jacobian(&obj, &theta)?, &f);
        let slope = 0.5 * dot(&d, &f);
        let mut t = 1.0;
        let mut accepted = None;
        while t > 1e-14 {
            let cand: Vec<f64> = theta.iter().zip(&d).map(|(a, b)| a + t * b).collect();
            let ll_new = obj.loglik(&cand);
            if ll_new.is_finite() {
                if ll_new >= ll + 1e-4 * t * slope {
                    accepted = Some((cand, ll_new, None));
                    break;
                }
                // At round-off level ℓ cannot discriminate; accept a step
                // that lowers the score norm instead.
                if (ll_new - ll).abs() <= 1e-10 * (1.0 + ll.abs()) {
                    let f_new = obj.score(&cand)?;
                    if sup(&f_new) < fnorm {
                        accepted = Some((cand, ll_new, Some(f_new)));
                        break;
                    }
                }
            }
            t *= 0.5;
        }
        match accepted {
            Some((cand, ll_new, f_new)) => {
                theta = cand;
                ll = ll_new;
                f = match f_new {
                    Some(f) => f,
                    None => obj.score(&theta)?,
                };
            }
            None => {
                trace.push(format!("iter {iter}: line search failed (step below 1e-14)"));
                return Err(Error::NonConvergence {
                    iterations: iter + 1,
                    last_score_norm: fnorm,
                    trace,
                });
            }
        }
    }
    let fnorm = sup(&f);
    if fnorm <= tol {
        return Ok(PleOutcome {
            theta,
            iterations: opts.max_iter,
            score_norm: fnorm,
        });
    }
    trace.push(format!("stopped after {} iterations, |score| = {fnorm:e}", opts.max_iter));
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        last_score_norm: fnorm,
        trace,
    })
}
