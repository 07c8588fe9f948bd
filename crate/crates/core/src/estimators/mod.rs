//! Rank-based estimators: moment pilot, pseudo-likelihood and the efficient
//! one-step update.
//!
//! All three depend on the data only through the normal-scores matrix R̂, so
//! each has a `*_from_rhat` form used by the Monte Carlo harness and a
//! sample-level form that also attaches standard errors.

mod ple;
mod rank;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, EfficiencyBundle};
use crate::models::{eval_geometry, require_domain, shrink_into_domain, CorrelationModel};
use crate::numcore::{gram, SymMatrix};

pub use ple::{ple_from_rhat, pseudo_score, PleOptions, PleOutcome};
pub use rank::{average_ranks, normal_scores_matrix, rank_transform, RankedSample};

/// Smallest eigenvalue R(θ) must keep after a pilot is shrunk into the domain.
pub const PILOT_MIN_EIGENVALUE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Ple,
    OneStep,
    PilotMoment,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Ple => "ple",
            Method::OneStep => "one_step",
            Method::PilotMoment => "pilot_moment",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ple" => Ok(Method::Ple),
            "one_step" | "one-step" | "ose" => Ok(Method::OneStep),
            "pilot_moment" | "pilot" => Ok(Method::PilotMoment),
            other => Err(Error::config("method", format!("unknown estimator `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateResult {
    pub theta_hat: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub method: Method,
    pub converged: bool,
    pub iterations: usize,
    pub tie_warning: bool,
    /// True when the estimate was pulled back into the parameter space.
    pub clamped: bool,
    pub n: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// Normal-scores rank correlation matrix R̂_ij / √(R̂_ii R̂_jj). Without ties
/// the diagonal of R̂ is n⁻¹ Σ Φ⁻¹(i/(n+1))², which is well below 1 for small n.
pub fn rank_correlation(rhat: &SymMatrix) -> SymMatrix {
    let d: Vec<f64> = rhat.diagonal().iter().map(|v| v.sqrt()).collect();
    SymMatrix::from_fn(rhat.dim(), |i, j| if i == j { 1.0 } else { rhat.get(i, j) / (d[i] * d[j]) })
}

/// Moment pilot θ_m = ½ tr(W_m C) on the rank correlation matrix C, shrunk
/// into the domain when needed. Models without moment weights fall back to
/// their default start. Returns the pilot, whether it was shrunk and whether
/// weights were used.
pub fn pilot_from_rhat(model: &dyn CorrelationModel, rhat: &SymMatrix) -> Result<(Vec<f64>, bool, bool)> {
    check_rhat(model, rhat)?;
    let c = rank_correlation(rhat);
    let (raw, used_weights) = match model.moment_weights() {
        Some(w) => (w.iter().map(|w| 0.5 * w.trace_product(&c)).collect(), true),
        None => (model.default_init(&c), false),
    };
    let (theta, shrunk) = shrink_into_domain(model, &raw, PILOT_MIN_EIGENVALUE)?;
    Ok((theta, shrunk, used_weights))
}

fn check_rhat(model: &dyn CorrelationModel, rhat: &SymMatrix) -> Result<()> {
    if rhat.dim() == model.dim() {
        Ok(())
    } else {
        Err(Error::Shape(format!(
            "data has {} columns, model {} has p = {}",
            rhat.dim(),
            model.name(),
            model.dim()
        )))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct OneStepOptions {
    /// Apply the update a second time from the first update.
    pub iterate_twice: bool,
}

/// θ̂ = pilot + I*⁻¹(pilot) · ½ tr(A*_m(pilot) R̂).
/// Returns the estimate and whether it had to be clamped into the domain.
pub fn one_step_from_rhat(
    model: &dyn CorrelationModel,
    rhat: &SymMatrix,
    pilot: &[f64],
    opts: OneStepOptions,
) -> Result<(Vec<f64>, bool)> {
    check_rhat(model, rhat)?;
    require_domain(model, pilot)?;
    let (mut theta, mut clamped) = one_update(model, rhat, pilot)?;
    if opts.iterate_twice {
        let (t2, c2) = one_update(model, rhat, &theta)?;
        theta = t2;
        clamped |= c2;
    }
    Ok((theta, clamped))
}

fn one_update(model: &dyn CorrelationModel, rhat: &SymMatrix, pilot: &[f64]) -> Result<(Vec<f64>, bool)> {
    let geom = eval_geometry(model, pilot)?;
    let eff = geometry::efficient_score_matrices(&geom)?;
    let info = gram(&eff, &geom.ctx)?;
    let inv = crate::numcore::linalg::spd_inverse(&info, "efficient information")?;
    let score: Vec<f64> = eff.iter().map(|a| 0.5 * a.trace_product(rhat)).collect();
    let step: Vec<f64> = (0..pilot.len())
        .map(|m| (0..pilot.len()).map(|l| inv[(m, l)] * score[l]).sum())
        .collect();
    let full: Vec<f64> = pilot.iter().zip(&step).map(|(a, b)| a + b).collect();
    if model.in_domain(&full) {
        return Ok((full, false));
    }
    // Largest t in [0, 1] with pilot + t·step in the domain, by bisection.
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let cand: Vec<f64> = pilot.iter().zip(&step).map(|(a, b)| a + mid * b).collect();
        if model.in_domain(&cand) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((pilot.iter().zip(&step).map(|(a, b)| a + lo * b).collect(), true))
}

fn diag_se(cov: &DMatrix<f64>, n: usize) -> Vec<f64> {
    (0..cov.nrows())
        .map(|m| (cov[(m, m)].max(0.0) / n as f64).sqrt())
        .collect()
}

/// Asymptotic covariance of the moment pilot: the pilot ½ tr(W_m C) has
/// rank-based influence matrix W_m − diag(R W_m).
pub fn pilot_covariance(model: &dyn CorrelationModel, theta: &[f64]) -> Result<Option<DMatrix<f64>>> {
    let Some(weights) = model.moment_weights() else {
        return Ok(None);
    };
    let geom = eval_geometry(model, theta)?;
    let infl: Vec<SymMatrix> = weights
        .iter()
        .map(|w| {
            let rw = geom.r.as_matrix() * w.as_matrix();
            let d: Vec<f64> = (0..geom.dim()).map(|j| rw[(j, j)]).collect();
            w - &SymMatrix::from_diagonal(&d)
        })
        .collect();
    Ok(Some(gram(&infl, &geom.ctx)?))
}

fn tie_notes(sample: &RankedSample) -> Vec<String> {
    if sample.has_ties() {
        vec![format!(
            "ties in columns {:?} were given average ranks",
            sample.tie_columns
        )]
    } else {
        Vec::new()
    }
}

/// Moment pilot with plug-in standard errors. Families without moment
/// weights get the pseudo-likelihood estimate instead.
pub fn pilot_moment(model: &dyn CorrelationModel, sample: &RankedSample) -> Result<EstimateResult> {
    let rhat = normal_scores_matrix(sample);
    let (theta, shrunk, used_weights) = pilot_from_rhat(model, &rhat)?;
    if !used_weights {
        let mut res = ple_estimate(model, sample, Some(&theta))?;
        res.notes
            .push(format!("{} has no moment pilot; returned the pseudo-likelihood estimate", model.name()));
        return Ok(res);
    }
    let std_errors = match pilot_covariance(model, &theta)? {
        Some(cov) => diag_se(&cov, sample.n),
        None => vec![f64::NAN; theta.len()],
    };
    let mut notes = tie_notes(sample);
    if shrunk {
        notes.push("moment estimate was outside the parameter space and was shrunk toward independence".into());
    }
    notes.extend(model.notes());
    Ok(EstimateResult {
        theta_hat: theta,
        std_errors,
        method: Method::PilotMoment,
        converged: true,
        iterations: 0,
        tie_warning: sample.has_ties(),
        clamped: shrunk,
        n: sample.n,
        notes,
    })
}

/// Pseudo-likelihood estimate. `init` defaults to the moment pilot (or the
/// model's default start); an explicit `init` must lie in the domain.
pub fn ple_estimate(
    model: &dyn CorrelationModel,
    sample: &RankedSample,
    init: Option<&[f64]>,
) -> Result<EstimateResult> {
    let rhat = normal_scores_matrix(sample);
    let start = match init {
        Some(t) => {
            require_domain(model, t)?;
            t.to_vec()
        }
        None => pilot_from_rhat(model, &rhat)?.0,
    };
    let out = ple_from_rhat(model, &rhat, &start, PleOptions::default())?;
    let geom = eval_geometry(model, &out.theta)?;
    let mut notes = tie_notes(sample);
    let std_errors = match geometry::ple_influence(&geom) {
        Ok(ple) => diag_se(&ple.cov, sample.n),
        Err(e) => {
            notes.push(format!("standard errors unavailable: {e}"));
            vec![f64::NAN; out.theta.len()]
        }
    };
    notes.extend(model.notes());
    Ok(EstimateResult {
        theta_hat: out.theta,
        std_errors,
        method: Method::Ple,
        converged: true,
        iterations: out.iterations,
        tie_warning: sample.has_ties(),
        clamped: false,
        n: sample.n,
        notes,
    })
}

/// Efficient one-step estimate from `pilot` (defaults to the moment pilot,
/// or the pseudo-likelihood estimate for families without one).
pub fn one_step(
    model: &dyn CorrelationModel,
    sample: &RankedSample,
    pilot: Option<&[f64]>,
    opts: OneStepOptions,
) -> Result<EstimateResult> {
    let rhat = normal_scores_matrix(sample);
    let mut notes = tie_notes(sample);
    let pilot = match pilot {
        Some(p) => p.to_vec(),
        None => {
            let (t, shrunk, used_weights) = pilot_from_rhat(model, &rhat)?;
            if used_weights {
                if shrunk {
                    notes.push("pilot was shrunk into the parameter space".into());
                }
                t
            } else {
                ple_from_rhat(model, &rhat, &t, PleOptions::default())?.theta
            }
        }
    };
    let (theta, clamped) = one_step_from_rhat(model, &rhat, &pilot, opts)?;
    if clamped {
        notes.push("update left the parameter space and was clamped to its interior".into());
    }
    let std_errors = match eval_geometry(model, &theta).and_then(|g| EfficiencyBundle::compute(&g)) {
        Ok(b) => diag_se(&b.eff_info_inv, sample.n),
        Err(_) => match eval_geometry(model, &pilot).and_then(|g| geometry::efficient_info(&g)) {
            Ok((_, inv)) => diag_se(&inv, sample.n),
            Err(e) => {
                notes.push(format!("standard errors unavailable: {e}"));
                vec![f64::NAN; theta.len()]
            }
        },
    };
    notes.extend(model.notes());
    Ok(EstimateResult {
        theta_hat: theta,
        std_errors,
        method: Method::OneStep,
        converged: true,
        iterations: if opts.iterate_twice { 2 } else { 1 },
        tie_warning: sample.has_ties(),
        clamped,
        n: sample.n,
        notes,
    })
}

/// Runs the named estimator with its default settings.
pub fn estimate(model: &dyn CorrelationModel, sample: &RankedSample, method: Method) -> Result<EstimateResult> {
    if sample.p != model.dim() {
        return Err(Error::Shape(format!(
            "data has {} columns, model {} has p = {}",
            sample.p,
            model.name(),
            model.dim()
        )));
    }
    match method {
        Method::Ple => ple_estimate(model, sample, None),
        Method::OneStep => one_step(model, sample, None, OneStepOptions::default()),
        Method::PilotMoment => pilot_moment(model, sample),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ModelSpec;
    use crate::sampler;

    fn sample(spec: &ModelSpec, theta: &[f64], n: usize, seed: u64) -> RankedSample {
        let model = spec.build().unwrap();
        let r = model.correlation(theta).unwrap();
        let u = sampler::sample_copula(&r, n, seed).unwrap();
        rank_transform(&u).unwrap()
    }

    #[test]
    fn exchangeable_pilot_is_mean_rank_correlation() {
        let spec = ModelSpec::Exchangeable { p: 3 };
        let model = spec.build().unwrap();
        let s = sample(&spec, &[0.4], 200, 1);
        let c = rank_correlation(&normal_scores_matrix(&s));
        assert_eq!(c.diagonal(), vec![1.0; 3]);
        let mean = (c.get(0, 1) + c.get(0, 2) + c.get(1, 2)) / 3.0;
        let res = pilot_moment(model.as_ref(), &s).unwrap();
        assert!((res.theta_hat[0] - mean).abs() < 1e-15);
    }

    #[test]
    fn ple_satisfies_first_order_condition() {
        let spec = ModelSpec::Toeplitz { p: 4 };
        let model = spec.build().unwrap();
        let s = sample(&spec, &[0.5, 0.2, 0.1], 300, 7);
        let res = ple_estimate(model.as_ref(), &s, None).unwrap();
        let rhat = normal_scores_matrix(&s);
        let f = pseudo_score(model.as_ref(), &rhat, &res.theta_hat).unwrap();
        assert!(f.iter().all(|v| v.abs() <= 3e-8), "{f:?}");
    }

    #[test]
    fn exchangeable_ple_matches_bisection() {
        let spec = ModelSpec::Exchangeable { p: 4 };
        let model = spec.build().unwrap();
        let s = sample(&spec, &[0.3], 150, 11);
        let rhat = normal_scores_matrix(&s);
        let res = ple_estimate(model.as_ref(), &s, None).unwrap();
        let f = |t: f64| pseudo_score(model.as_ref(), &rhat, &[t]).unwrap()[0];
        let (mut lo, mut hi) = (-0.3, 0.95);
        assert!(f(lo) > 0.0 && f(hi) < 0.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((res.theta_hat[0] - lo).abs() < 1e-8);
    }

    #[test]
    fn one_step_is_fixed_at_exact_fit() {
        let model = ModelSpec::Circular.build().unwrap();
        let rhat = model.correlation(&[0.45]).unwrap();
        let (t, clamped) = one_step_from_rhat(model.as_ref(), &rhat, &[0.45], OneStepOptions::default()).unwrap();
        assert!(!clamped);
        assert!((t[0] - 0.45).abs() < 1e-14);
    }

    #[test]
    fn one_step_rejects_bad_pilot() {
        let model = ModelSpec::Circular.build().unwrap();
        let rhat = SymMatrix::identity(4);
        assert!(matches!(
            one_step_from_rhat(model.as_ref(), &rhat, &[1.2], OneStepOptions::default()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn method_names() {
        assert_eq!("ose".parse::<Method>().unwrap(), Method::OneStep);
        assert_eq!(serde_json::to_string(&Method::PilotMoment).unwrap(), "\"pilot_moment\"");
        assert!("mle".parse::<Method>().is_err());
    }
}
