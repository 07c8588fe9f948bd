use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;

use super::output;
use super::{CheckArgs, Cli, Command, EstimateArgs, Format, MethodArg, PointArgs, SimulateArgs};
use crate::error::{Error, Result};
use crate::estimators::{self, EstimateResult, OneStepOptions};
use crate::geometry::{
    adaptivity_check, efficiency_criterion, regularity_check, DiagnosticReport, EfficiencyBundle,
};
use crate::mc::{self, McConfig};
use crate::models::{eval_geometry, require_domain, validate_assumption1, Assumption1Report, CorrelationModel};
use crate::numcore::linalg::to_rows;

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Bound(a) => bound(a, out),
        Command::Check(a) => check(a, out),
        Command::Estimate(a) => estimate(a, out),
        Command::Are(a) => are(a, out),
        Command::Simulate(a) => simulate(a, out),
    }
}

fn model_and_theta(a: &PointArgs) -> Result<(Box<dyn CorrelationModel>, Vec<f64>)> {
    let model = a.model.spec()?.build()?;
    let theta = super::parse_theta(&a.theta)?;
    require_domain(model.as_ref(), &theta)?;
    Ok((model, theta))
}

#[derive(Serialize)]
struct BoundOutput {
    model: String,
    theta: Vec<f64>,
    fisher: Vec<Vec<f64>>,
    eff_info: Vec<Vec<f64>>,
    eff_info_inv: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    notes: Vec<String>,
}

fn bound(a: &PointArgs, out: &mut dyn Write) -> Result<()> {
    let (model, theta) = model_and_theta(a)?;
    let geom = eval_geometry(model.as_ref(), &theta)?;
    let (eff_info, eff_info_inv) = crate::geometry::efficient_info(&geom)?;
    let res = BoundOutput {
        model: model.name(),
        theta,
        fisher: to_rows(&crate::geometry::fisher_info(&geom)?),
        eff_info: to_rows(&eff_info),
        eff_info_inv: to_rows(&eff_info_inv),
        notes: model.notes(),
    };
    match a.output.format {
        Format::Json => output::json(out, &res),
        Format::Csv => output::matrices_csv(
            out,
            &[
                ("fisher", &res.fisher),
                ("eff_info", &res.eff_info),
                ("eff_info_inv", &res.eff_info_inv),
            ],
        ),
        Format::Pretty => {
            writeln!(out, "model: {}", res.model)?;
            output::vector(out, "theta", &res.theta)?;
            output::matrix(out, "Fisher information I(theta)", &res.fisher)?;
            output::matrix(out, "efficient information I*(theta)", &res.eff_info)?;
            output::matrix(out, "efficiency bound I*(theta)^-1", &res.eff_info_inv)?;
            for n in &res.notes {
                writeln!(out, "note: {n}")?;
            }
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct AreOutput {
    model: String,
    theta: Vec<f64>,
    are: Vec<f64>,
    eff_info_inv_diag: Vec<f64>,
    ple_cov_diag: Vec<f64>,
}

fn are(a: &PointArgs, out: &mut dyn Write) -> Result<()> {
    let (model, theta) = model_and_theta(a)?;
    let bundle = EfficiencyBundle::compute(&eval_geometry(model.as_ref(), &theta)?)?;
    let k = theta.len();
    let res = AreOutput {
        model: model.name(),
        are: bundle.are(),
        eff_info_inv_diag: (0..k).map(|m| bundle.eff_info_inv[(m, m)]).collect(),
        ple_cov_diag: (0..k).map(|m| bundle.ple_cov[(m, m)]).collect(),
        theta,
    };
    match a.output.format {
        Format::Json => output::json(out, &res),
        Format::Csv => {
            let mut wr = csv::Writer::from_writer(out);
            wr.write_record(["component", "are", "eff_bound", "ple_var"])?;
            for m in 0..k {
                wr.write_record([
                    (m + 1).to_string(),
                    res.are[m].to_string(),
                    res.eff_info_inv_diag[m].to_string(),
                    res.ple_cov_diag[m].to_string(),
                ])?;
            }
            wr.flush()?;
            Ok(())
        }
        Format::Pretty => {
            writeln!(out, "model: {}", res.model)?;
            output::vector(out, "theta", &res.theta)?;
            writeln!(out, "{:>9} {:>12} {:>12} {:>12}", "component", "ARE", "bound", "PLE var")?;
            for m in 0..k {
                writeln!(
                    out,
                    "{:>9} {:>12.6} {:>12.6} {:>12.6}",
                    m + 1,
                    res.are[m],
                    res.eff_info_inv_diag[m],
                    res.ple_cov_diag[m]
                )?;
            }
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct CheckOutput {
    model: String,
    theta: Vec<f64>,
    assumption1: Assumption1Report,
    regularity_ose: Option<DiagnosticReport>,
    regularity_ple: Option<DiagnosticReport>,
    efficiency: DiagnosticReport,
    adaptivity: DiagnosticReport,
    ple_efficient: bool,
    adaptive: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    notes: Vec<String>,
}

fn check(a: &CheckArgs, out: &mut dyn Write) -> Result<()> {
    let (model, theta) = model_and_theta(&a.point)?;
    let assumption1 = validate_assumption1(model.as_ref(), &theta)?;
    let geom = eval_geometry(model.as_ref(), &theta)?;
    let mut notes = Vec::new();
    let (regularity_ose, regularity_ple) = match EfficiencyBundle::compute(&geom) {
        Ok(b) => (
            Some(regularity_check(&b.efficient_influence(), &geom, a.diag_tol)?),
            Some(regularity_check(&b.ple_a, &geom, a.diag_tol)?),
        ),
        Err(e) => {
            notes.push(format!("influence matrices unavailable: {e}"));
            (None, None)
        }
    };
    let efficiency = efficiency_criterion(&geom, None, Some(a.tol))?;
    let adaptivity = adaptivity_check(&geom, a.diag_tol)?;
    let res = CheckOutput {
        model: model.name(),
        theta,
        ple_efficient: efficiency.passed,
        adaptive: adaptivity.passed,
        assumption1,
        regularity_ose,
        regularity_ple,
        efficiency,
        adaptivity,
        notes,
    };
    let reports: Vec<(&str, &DiagnosticReport)> = [
        ("regularity_ose", res.regularity_ose.as_ref()),
        ("regularity_ple", res.regularity_ple.as_ref()),
        ("efficiency", Some(&res.efficiency)),
        ("adaptivity", Some(&res.adaptivity)),
    ]
    .into_iter()
    .filter_map(|(n, r)| r.map(|r| (n, r)))
    .collect();
    match a.point.output.format {
        Format::Json => output::json(out, &res),
        Format::Csv => {
            let mut wr = csv::Writer::from_writer(out);
            wr.write_record(["check", "component", "residual", "tolerance", "verdict"])?;
            for (name, r) in &reports {
                for (m, v) in r.per_m_residuals.iter().enumerate() {
                    wr.write_record([
                        name.to_string(),
                        (m + 1).to_string(),
                        v.to_string(),
                        r.tolerance.to_string(),
                        r.verdict.clone(),
                    ])?;
                }
            }
            wr.flush()?;
            Ok(())
        }
        Format::Pretty => {
            writeln!(out, "model: {}", res.model)?;
            output::vector(out, "theta", &res.theta)?;
            let a1 = &res.assumption1;
            writeln!(
                out,
                "assumption 1: {} (min eigenvalue {:.3e}, derivative rank {}/{})",
                if a1.passed { "ok" } else { "violated" },
                a1.min_eigenvalue,
                a1.derivative_rank,
                a1.n_params
            )?;
            for v in &a1.violations {
                writeln!(out, "  violation: {v}")?;
            }
            for (name, r) in &reports {
                writeln!(
                    out,
                    "{name:<15} {:<14} max residual {:.3e} (tolerance {:.1e})",
                    r.verdict,
                    r.max_residual(),
                    r.tolerance
                )?;
            }
            writeln!(out, "ple_efficient = {}, adaptive = {}", res.ple_efficient, res.adaptive)?;
            for n in res.notes.iter().chain(&a1.notes) {
                writeln!(out, "note: {n}")?;
            }
            Ok(())
        }
    }
}

/// Reads an n×p numeric CSV. A first row that does not parse as numbers is
/// treated as a header.
pub fn read_data_csv(path: &Path) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(v) => rows.push(v),
            Err(_) if line == 0 => continue,
            Err(_) => {
                return Err(Error::Data(format!(
                    "{}: line {} is not numeric",
                    path.display(),
                    line + 1
                )))
            }
        }
    }
    let n = rows.len();
    if n == 0 {
        return Err(Error::Data(format!("{}: no data rows", path.display())));
    }
    let p = rows[0].len();
    if let Some(i) = rows.iter().position(|r| r.len() != p) {
        return Err(Error::Data(format!("row {} has {} fields, expected {p}", i + 1, rows[i].len())));
    }
    Ok(DMatrix::from_fn(n, p, |i, j| rows[i][j]))
}

#[derive(Serialize)]
struct EstimateOutput<'a> {
    model: String,
    #[serde(flatten)]
    result: &'a EstimateResult,
}

fn estimate(a: &EstimateArgs, out: &mut dyn Write) -> Result<()> {
    let model = a.model.spec()?.build()?;
    let data = read_data_csv(&a.data)?;
    if data.ncols() != model.dim() {
        return Err(Error::Data(format!(
            "data has {} columns, model {} needs {}",
            data.ncols(),
            model.name(),
            model.dim()
        )));
    }
    let sample = estimators::rank_transform(&data)?;
    let res = match a.method {
        MethodArg::Ple => estimators::ple_estimate(model.as_ref(), &sample, None)?,
        MethodArg::Pilot => estimators::pilot_moment(model.as_ref(), &sample)?,
        MethodArg::OneStep => estimators::one_step(
            model.as_ref(),
            &sample,
            None,
            OneStepOptions {
                iterate_twice: a.iterate_twice,
            },
        )?,
    };
    match a.output.format {
        Format::Json => output::json(
            out,
            &EstimateOutput {
                model: model.name(),
                result: &res,
            },
        ),
        Format::Csv => {
            let mut wr = csv::Writer::from_writer(out);
            wr.write_record(["component", "theta_hat", "std_error"])?;
            for (m, (t, s)) in res.theta_hat.iter().zip(&res.std_errors).enumerate() {
                wr.write_record([(m + 1).to_string(), t.to_string(), s.to_string()])?;
            }
            wr.flush()?;
            Ok(())
        }
        Format::Pretty => {
            writeln!(out, "model: {}  method: {}  n = {}", model.name(), res.method, res.n)?;
            writeln!(out, "{:>9} {:>12} {:>12}", "component", "estimate", "std error")?;
            for (m, (t, s)) in res.theta_hat.iter().zip(&res.std_errors).enumerate() {
                writeln!(out, "{:>9} {t:>12.6} {s:>12.6}", m + 1)?;
            }
            writeln!(out, "converged: {}  iterations: {}", res.converged, res.iterations)?;
            if res.tie_warning {
                writeln!(out, "warning: ties in the data were given average ranks")?;
            }
            for n in &res.notes {
                writeln!(out, "note: {n}")?;
            }
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct SimulateOutput<'a> {
    output_dir: Option<String>,
    summary: &'a mc::SummaryTable,
}

fn simulate(a: &SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let mut cfg = McConfig::from_path(&a.config)?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(w) = a.workers {
        cfg.workers = Some(w);
    }
    if let Some(r) = a.replications {
        cfg.replications = r;
    }
    if let Some(d) = &a.output_dir {
        cfg.output = Some(d.clone());
    }
    let reports = mc::run_sweep(&cfg)?;
    if let Some(dir) = &cfg.output {
        mc::write_outputs(&cfg, &reports, dir)?;
    }
    let table = mc::summarize(&reports)?;
    match a.output.format {
        Format::Json => output::json(
            out,
            &SimulateOutput {
                output_dir: cfg.output.as_ref().map(|d| d.display().to_string()),
                summary: &table,
            },
        ),
        Format::Csv => table.write_csv(out),
        Format::Pretty => {
            if let Some(first) = reports.first() {
                writeln!(
                    out,
                    "model: {}  n = {}  replications = {}  seed = {}",
                    first.model, cfg.n, cfg.replications, cfg.seed
                )?;
            }
            writeln!(
                out,
                "{:<24} {:<13} {:>10} {:>10} {:>10} {:>10} {:>6}",
                "theta", "estimator", "bias", "n*var", "bound", "ple var", "fail"
            )?;
            for row in &table.rows {
                let theta = row.theta.iter().map(|t| format!("{t}")).collect::<Vec<_>>().join(",");
                for m in 0..table.k {
                    writeln!(
                        out,
                        "{:<24} {:<13} {:>10.5} {:>10.5} {:>10.5} {:>10} {:>6}",
                        if m == 0 { theta.clone() } else { format!("  [{}]", m + 1) },
                        if m == 0 { row.estimator.to_string() } else { String::new() },
                        row.bias[m],
                        row.n_var[m],
                        row.eff_bound[m],
                        row.ple_bound
                            .as_ref()
                            .map(|b| format!("{:.5}", b[m]))
                            .unwrap_or_else(|| "-".into()),
                        if m == 0 { row.failures.to_string() } else { String::new() },
                    )?;
                }
            }
            if let Some(dir) = &cfg.output {
                writeln!(out, "wrote report.json, errors.csv, summary.csv to {}", dir.display())?;
            }
            Ok(())
        }
    }
}
