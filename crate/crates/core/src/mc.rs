//! Replicated simulation of the estimators at a fixed θ or over a θ grid.
//!
//! Replication r at grid point g draws from ChaCha20 stream (g << 32) | r of
//! the master seed. Results are collected in replication order and reduced
//! sequentially, so reports do not depend on the worker count.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{
    normal_scores_matrix, one_step_from_rhat, pilot_covariance, pilot_from_rhat, ple_from_rhat,
    rank_transform, Method, OneStepOptions, PleOptions,
};
use crate::geometry::{efficient_info, ple_influence};
use crate::models::{eval_geometry, require_domain, CorrelationModel, ModelSpec};
use crate::sampler::{apply_margins, CopulaSampler, MarginSpec};

/// Environment variable consulted when no worker count is given.
pub const WORKERS_ENV: &str = "COPULA_RANK_WORKERS";

/// Share of failed replications above which an experiment is rejected.
pub const MAX_FAILURE_RATE: f64 = 0.05;

fn default_replications() -> usize {
    2000
}

fn default_estimators() -> Vec<Method> {
    vec![Method::Ple, Method::OneStep]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub model: ModelSpec,
    /// True parameter; give this or `theta_grid`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_true: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_grid: Option<Vec<Vec<f64>>>,
    pub n: usize,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<Method>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub margins: MarginSpec,
    /// Output directory for report.json, errors.csv and summary.csv.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

impl McConfig {
    pub fn new(model: ModelSpec, theta_true: Vec<f64>, n: usize, replications: usize) -> Self {
        Self {
            model,
            theta_true: Some(theta_true),
            theta_grid: None,
            n,
            replications,
            estimators: default_estimators(),
            seed: 0,
            margins: MarginSpec::default(),
            output: None,
            workers: None,
        }
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::config("config", e.to_string()))
    }

    /// The θ values to simulate, in order.
    pub fn thetas(&self) -> Result<Vec<Vec<f64>>> {
        match (&self.theta_true, &self.theta_grid) {
            (Some(t), None) => Ok(vec![t.clone()]),
            (None, Some(g)) if !g.is_empty() => Ok(g.clone()),
            (None, Some(_)) => Err(Error::config("theta_grid", "grid is empty")),
            (Some(_), Some(_)) => Err(Error::config("theta_grid", "give theta_true or theta_grid, not both")),
            (None, None) => Err(Error::config("theta_true", "missing true parameter")),
        }
    }

    fn validate(&self, model: &dyn CorrelationModel) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::config("replications", "must be at least 1"));
        }
        if self.n < 2 {
            return Err(Error::config("n", "sample size must be at least 2"));
        }
        if self.estimators.is_empty() {
            return Err(Error::config("estimators", "at least one estimator is required"));
        }
        if self.workers == Some(0) {
            return Err(Error::config("workers", "must be at least 1"));
        }
        if let MarginSpec::PerColumn(kinds) = &self.margins {
            if kinds.len() != model.dim() {
                return Err(Error::config("margins", format!("expected {} margins", model.dim())));
            }
        }
        for t in self.thetas()? {
            require_domain(model, &t).map_err(|e| Error::config("theta_true", e.to_string()))?;
        }
        Ok(())
    }
}

/// Worker count: explicit value, then the environment variable, then the
/// number of logical cores.
pub fn resolve_workers(explicit: Option<usize>) -> usize {
    explicit
        .or_else(|| std::env::var(WORKERS_ENV).ok().and_then(|v| v.trim().parse().ok()))
        .filter(|w| *w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimatorSummary {
    pub estimator: Method,
    pub successes: usize,
    pub failures: usize,
    pub bias: Vec<f64>,
    pub variance: Vec<f64>,
    /// n · variance, on the scale of the asymptotic bounds.
    pub n_var: Vec<f64>,
    /// Diagonal of the efficient information inverse at θ.
    pub eff_bound: Vec<f64>,
    /// Asymptotic variance of this estimator at θ, where known.
    pub asymptotic_var: Option<Vec<f64>>,
    /// Share of replications whose error lies within 1.96 asymptotic standard errors.
    pub coverage_95: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub failure_examples: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct McReport {
    pub model: String,
    pub model_spec: Option<ModelSpec>,
    pub theta_true: Vec<f64>,
    pub n: usize,
    pub replications: usize,
    pub seed: u64,
    /// Index of θ in the configured grid (0 for a single θ).
    pub grid_index: usize,
    pub eff_info_inv_diag: Vec<f64>,
    pub ple_cov_diag: Option<Vec<f64>>,
    pub estimators: Vec<EstimatorSummary>,
    /// Per estimator, (replication, θ̂ − θ) for successful replications.
    #[serde(skip)]
    pub raw_errors: BTreeMap<Method, Vec<(usize, Vec<f64>)>>,
}

impl McReport {
    pub fn estimator(&self, m: Method) -> Option<&EstimatorSummary> {
        self.estimators.iter().find(|e| e.estimator == m)
    }
}

type RepOutcome = Vec<(Method, std::result::Result<Vec<f64>, String>)>;

fn replicate(
    model: &dyn CorrelationModel,
    sampler: &CopulaSampler,
    cfg: &McConfig,
    theta: &[f64],
    stream: u64,
) -> RepOutcome {
    let fail_all = |msg: String| cfg.estimators.iter().map(|m| (*m, Err(msg.clone()))).collect();
    let u = sampler.sample(cfg.n, cfg.seed, stream);
    let x = match apply_margins(&u, &cfg.margins) {
        Ok(x) => x,
        Err(e) => return fail_all(e.to_string()),
    };
    let rhat = match rank_transform(&x) {
        Ok(s) => normal_scores_matrix(&s),
        Err(e) => return fail_all(e.to_string()),
    };
    let pilot = match pilot_from_rhat(model, &rhat) {
        Ok(p) => p,
        Err(e) => return fail_all(format!("pilot: {e}")),
    };
    let (pilot_theta, _, has_weights) = pilot;
    let mut ple_cache: Option<std::result::Result<Vec<f64>, String>> = None;
    let ple = |cache: &mut Option<std::result::Result<Vec<f64>, String>>| {
        cache
            .get_or_insert_with(|| {
                ple_from_rhat(model, &rhat, &pilot_theta, PleOptions::default())
                    .map(|o| o.theta)
                    .map_err(|e| e.to_string())
            })
            .clone()
    };
    let mut out = Vec::with_capacity(cfg.estimators.len());
    for &m in &cfg.estimators {
        let est = match m {
            Method::PilotMoment if has_weights => Ok(pilot_theta.clone()),
            Method::PilotMoment | Method::Ple => ple(&mut ple_cache),
            Method::OneStep => {
                let start = if has_weights { Ok(pilot_theta.clone()) } else { ple(&mut ple_cache) };
                start.and_then(|s| {
                    one_step_from_rhat(model, &rhat, &s, OneStepOptions::default())
                        .map(|(t, _)| t)
                        .map_err(|e| e.to_string())
                })
            }
        };
        let err = est.map(|t| t.iter().zip(theta).map(|(a, b)| a - b).collect());
        out.push((m, err));
    }
    out
}

fn mean_var(rows: &[&Vec<f64>], k: usize) -> (Vec<f64>, Vec<f64>) {
    let cnt = rows.len() as f64;
    let mut mean = vec![0.0; k];
    for r in rows {
        for (m, v) in r.iter().enumerate() {
            mean[m] += v;
        }
    }
    for v in &mut mean {
        *v /= cnt;
    }
    let mut var = vec![0.0; k];
    if rows.len() > 1 {
        for r in rows {
            for (m, v) in r.iter().enumerate() {
                var[m] += (v - mean[m]).powi(2);
            }
        }
        for v in &mut var {
            *v /= cnt - 1.0;
        }
    }
    (mean, var)
}

/// Runs one experiment at `theta` (grid point `grid_index`) on an existing pool.
fn run_point(
    model: &dyn CorrelationModel,
    cfg: &McConfig,
    theta: &[f64],
    grid_index: usize,
    pool: &rayon::ThreadPool,
) -> Result<McReport> {
    let r = model.correlation(theta)?;
    let sampler = CopulaSampler::new(&r)?;
    let outcomes: Vec<RepOutcome> = pool.install(|| {
        (0..cfg.replications)
            .into_par_iter()
            .map(|rep| {
                let stream = ((grid_index as u64) << 32) | rep as u64;
                replicate(model, &sampler, cfg, theta, stream)
            })
            .collect()
    });

    let geom = eval_geometry(model, theta)?;
    let eff_inv = efficient_info(&geom)?.1;
    let eff_diag: Vec<f64> = (0..theta.len()).map(|m| eff_inv[(m, m)]).collect();
    let ple_cov = ple_influence(&geom).ok().map(|p| p.cov);
    let ple_diag = ple_cov.as_ref().map(|c| (0..theta.len()).map(|m| c[(m, m)]).collect::<Vec<_>>());
    let pilot_cov: Option<DMatrix<f64>> = pilot_covariance(model, theta).ok().flatten();

    let mut summaries = Vec::new();
    let mut raw_errors = BTreeMap::new();
    let k = theta.len();
    for (pos, &method) in cfg.estimators.iter().enumerate() {
        let mut ok: Vec<(usize, Vec<f64>)> = Vec::new();
        let mut examples = Vec::new();
        let mut failures = 0;
        for (rep, o) in outcomes.iter().enumerate() {
            match &o[pos].1 {
                Ok(e) => ok.push((rep, e.clone())),
                Err(msg) => {
                    failures += 1;
                    if examples.len() < 5 {
                        examples.push(format!("replication {rep}: {msg}"));
                    }
                }
            }
        }
        if failures as f64 > MAX_FAILURE_RATE * cfg.replications as f64 || ok.is_empty() {
            return Err(Error::Experiment {
                estimator: format!("{method} at theta = {theta:?} ({})", examples.join("; ")),
                failed: failures,
                total: cfg.replications,
            });
        }
        let rows: Vec<&Vec<f64>> = ok.iter().map(|(_, e)| e).collect();
        let (bias, variance) = mean_var(&rows, k);
        let n_var = variance.iter().map(|v| v * cfg.n as f64).collect();
        let asym = match method {
            Method::OneStep => Some(eff_diag.clone()),
            Method::Ple => ple_diag.clone(),
            Method::PilotMoment => match &pilot_cov {
                Some(c) => Some((0..k).map(|m| c[(m, m)]).collect()),
                None => ple_diag.clone(),
            },
        };
        let coverage_95 = asym.as_ref().map(|a| {
            (0..k)
                .map(|m| {
                    let half = 1.959_963_984_540_054 * (a[m] / cfg.n as f64).sqrt();
                    rows.iter().filter(|e| e[m].abs() <= half).count() as f64 / rows.len() as f64
                })
                .collect()
        });
        summaries.push(EstimatorSummary {
            estimator: method,
            successes: ok.len(),
            failures,
            bias,
            variance,
            n_var,
            eff_bound: eff_diag.clone(),
            asymptotic_var: asym,
            coverage_95,
            failure_examples: examples,
        });
        raw_errors.insert(method, ok);
    }
    Ok(McReport {
        model: model.name(),
        model_spec: model.spec(),
        theta_true: theta.to_vec(),
        n: cfg.n,
        replications: cfg.replications,
        seed: cfg.seed,
        grid_index,
        eff_info_inv_diag: eff_diag,
        ple_cov_diag: ple_diag,
        estimators: summaries,
        raw_errors,
    })
}

fn build_pool(cfg: &McConfig) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(resolve_workers(cfg.workers))
        .build()
        .map_err(|e| Error::config("workers", e.to_string()))
}

/// Runs the experiment at `theta_true`.
pub fn run_experiment(cfg: &McConfig) -> Result<McReport> {
    let model = cfg.model.build()?;
    cfg.validate(model.as_ref())?;
    let theta = cfg
        .theta_true
        .clone()
        .ok_or_else(|| Error::config("theta_true", "run_experiment needs theta_true; use run_sweep for grids"))?;
    let pool = build_pool(cfg)?;
    run_point(model.as_ref(), cfg, &theta, 0, &pool)
}

/// Runs the experiment at every configured θ.
pub fn run_sweep(cfg: &McConfig) -> Result<Vec<McReport>> {
    let model = cfg.model.build()?;
    cfg.validate(model.as_ref())?;
    let pool = build_pool(cfg)?;
    cfg.thetas()?
        .iter()
        .enumerate()
        .map(|(g, t)| run_point(model.as_ref(), cfg, t, g, &pool))
        .collect()
}

/// One row per (θ, n, estimator).
#[derive(Debug, Clone, Serialize)]
pub struct SummaryRow {
    pub theta: Vec<f64>,
    pub n: usize,
    pub estimator: Method,
    pub bias: Vec<f64>,
    pub n_var: Vec<f64>,
    pub eff_bound: Vec<f64>,
    pub ple_bound: Option<Vec<f64>>,
    pub successes: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SummaryTable {
    /// Number of parameter components.
    pub k: usize,
    pub rows: Vec<SummaryRow>,
}

/// Flattens reports into a comparison table. All reports must share the
/// model and the estimator list.
pub fn summarize(reports: &[McReport]) -> Result<SummaryTable> {
    let Some(first) = reports.first() else {
        return Ok(SummaryTable::default());
    };
    let methods: Vec<Method> = first.estimators.iter().map(|e| e.estimator).collect();
    let mut rows = Vec::new();
    for rep in reports {
        let these: Vec<Method> = rep.estimators.iter().map(|e| e.estimator).collect();
        if rep.model != first.model || these != methods || rep.theta_true.len() != first.theta_true.len() {
            return Err(Error::Shape(format!(
                "report for {} with estimators {these:?} does not match {} with {methods:?}",
                rep.model, first.model
            )));
        }
        for e in &rep.estimators {
            rows.push(SummaryRow {
                theta: rep.theta_true.clone(),
                n: rep.n,
                estimator: e.estimator,
                bias: e.bias.clone(),
                n_var: e.n_var.clone(),
                eff_bound: e.eff_bound.clone(),
                ple_bound: rep.ple_cov_diag.clone(),
                successes: e.successes,
                failures: e.failures,
            });
        }
    }
    Ok(SummaryTable {
        k: first.theta_true.len(),
        rows,
    })
}

fn fmt_theta(theta: &[f64]) -> String {
    theta.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(";")
}

impl SummaryTable {
    pub fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = vec!["theta".into(), "n".into(), "estimator".into()];
        for col in ["bias", "n_var", "eff_bound", "ple_bound"] {
            for m in 1..=self.k {
                h.push(format!("{col}_{m}"));
            }
        }
        h.push("successes".into());
        h.push("failures".into());
        h
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(self.header())?;
        for r in &self.rows {
            let mut rec = vec![fmt_theta(&r.theta), r.n.to_string(), r.estimator.to_string()];
            for v in r.bias.iter().chain(&r.n_var).chain(&r.eff_bound) {
                rec.push(v.to_string());
            }
            match &r.ple_bound {
                Some(b) => rec.extend(b.iter().map(|v| v.to_string())),
                None => rec.extend(std::iter::repeat_n(String::new(), self.k)),
            }
            rec.push(r.successes.to_string());
            rec.push(r.failures.to_string());
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

/// Per-replication errors as CSV: grid_index, replication, estimator, component, error.
pub fn write_errors_csv<W: Write>(reports: &[McReport], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["grid_index", "replication", "estimator", "component", "error"])?;
    for rep in reports {
        for (method, rows) in &rep.raw_errors {
            for (r, err) in rows {
                for (m, e) in err.iter().enumerate() {
                    wr.write_record([
                        rep.grid_index.to_string(),
                        r.to_string(),
                        method.to_string(),
                        (m + 1).to_string(),
                        e.to_string(),
                    ])?;
                }
            }
        }
    }
    wr.flush()?;
    Ok(())
}

/// Contents of report.json.
#[derive(Debug, Serialize)]
pub struct ReportFile<'a> {
    pub config: &'a McConfig,
    pub reports: &'a [McReport],
}

/// Writes report.json, errors.csv and summary.csv into `dir`.
pub fn write_outputs(cfg: &McConfig, reports: &[McReport], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let file = ReportFile { config: cfg, reports };
    let mut json = serde_json::to_string_pretty(&file)?;
    json.push('\n');
    std::fs::write(dir.join("report.json"), json)?;
    write_errors_csv(reports, std::fs::File::create(dir.join("errors.csv"))?)?;
    summarize(reports)?.write_csv(std::fs::File::create(dir.join("summary.csv"))?)?;
    Ok(())
}

/// Single-sample convenience used by examples: simulate one data set at θ
/// with the given margins and return it.
pub fn simulate_data(
    model: &dyn CorrelationModel,
    theta: &[f64],
    n: usize,
    seed: u64,
    margins: &MarginSpec,
) -> Result<DMatrix<f64>> {
    require_domain(model, theta)?;
    let u = crate::sampler::sample_copula(&model.correlation(theta)?, n, seed)?;
    apply_margins(&u, margins)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(reps: usize) -> McConfig {
        let mut c = McConfig::new(ModelSpec::Exchangeable { p: 3 }, vec![0.5], 40, reps);
        c.estimators = vec![Method::Ple, Method::OneStep, Method::PilotMoment];
        c.seed = 9;
        c.workers = Some(2);
        c
    }

    #[test]
    fn single_replication_has_zero_variance() {
        let rep = run_experiment(&small(1)).unwrap();
        for e in &rep.estimators {
            assert_eq!(e.successes, 1);
            assert_eq!(e.variance, vec![0.0]);
            assert_eq!(e.bias, rep.raw_errors[&e.estimator][0].1);
        }
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let mut a = small(30);
        a.workers = Some(1);
        let mut b = small(30);
        b.workers = Some(3);
        let ra = run_experiment(&a).unwrap();
        let rb = run_experiment(&b).unwrap();
        assert_eq!(
            serde_json::to_string(&ra).unwrap(),
            serde_json::to_string(&rb).unwrap()
        );
    }

    #[test]
    fn summarize_shapes() {
        assert!(summarize(&[]).unwrap().rows.is_empty());
        let rep = run_experiment(&{
            let mut c = small(5);
            c.estimators = vec![Method::OneStep];
            c
        })
        .unwrap();
        let table = summarize(std::slice::from_ref(&rep)).unwrap();
        assert_eq!(table.rows.len(), 1);
        let mut other = rep.clone();
        other.estimators.clear();
        assert!(matches!(summarize(&[rep, other]), Err(Error::Shape(_))));
    }

    #[test]
    fn config_validation() {
        let mut c = small(0);
        assert!(matches!(run_experiment(&c), Err(Error::Config { ref field, .. }) if field == "replications"));
        c.replications = 5;
        c.theta_true = Some(vec![1.5]);
        assert!(run_experiment(&c).is_err());
        let parsed: std::result::Result<McConfig, _> =
            serde_json::from_str(r#"{"model": {"family": "circular"}, "theta_true": [0.5], "n": 10, "bogus": 1}"#);
        assert!(parsed.is_err());
    }

    #[test]
    fn workers_resolution() {
        assert_eq!(resolve_workers(Some(3)), 3);
        assert!(resolve_workers(None) >= 1);
    }
}
