use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use logdiff_core::analysis::{comparison_harness, fit_rate, ComparisonReport, RateFit, RateModel};

use crate::error::{exit, CliError, CliResult};
use crate::execute::{execute, fmt_float, summary_json, RunOutput};
use crate::output::write_atomic;
use crate::scenario::{AnalysisTask, LoadedScenario, Problem, SWEEPABLE};
use crate::verify;

/// Paths written by a run.
#[derive(Debug, Clone)]
pub struct RunFiles {
    pub csv: PathBuf,
    pub summary: PathBuf,
}

pub fn run_files(out: &Path, name: &str) -> RunFiles {
    RunFiles { csv: out.join(format!("{name}.csv")), summary: out.join(format!("{name}.summary.json")) }
}

/// Runs a loaded scenario and writes `<name>.csv` and `<name>.summary.json`.
/// Nothing is written when the run fails before producing a trajectory.
pub fn run_scenario(sc: &LoadedScenario, out: &Path) -> CliResult<(RunOutput, RunFiles)> {
    let output = execute(sc)?;
    let files = run_files(out, &sc.scenario.name);
    let summary = summary_json(&output.summary);
    write_atomic(&files.csv, output.csv.as_bytes())?;
    write_atomic(&files.summary, summary.as_bytes())?;
    Ok((output, files))
}

pub fn cmd_run(path: &Path, out: &Path) -> CliResult<i32> {
    let sc = LoadedScenario::from_file(path)?;
    let (output, files) = run_scenario(&sc, out)?;
    let s = &output.summary;
    println!("{}: {} at t = {} after {} steps", s.name, s.termination.name(), s.t_stop, s.steps);
    if let Some(t) = s.t_est.value() {
        println!("  T_est = {t}");
    }
    println!("  wrote {} and {}", files.csv.display(), files.summary.display());
    Ok(if s.is_clean() { exit::OK } else { exit::FAILURE })
}

/// One line of the sweep table.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub termination: String,
    pub t_est: Option<f64>,
    pub key_fit: Option<String>,
    pub key_fit_parameter: Option<f64>,
    pub error: Option<String>,
}

/// Label and fitted parameter of the scenario's first fit task.
fn key_fit(sc: &LoadedScenario, output: &RunOutput) -> (Option<String>, Option<f64>) {
    let Some(task) = sc.scenario.analysis.iter().find(|t| matches!(t, AnalysisTask::Fit { .. })) else {
        return (None, None);
    };
    let label = task.label();
    let param = output.summary.analysis(&label).and_then(|v| v.get("parameter")).and_then(|v| v.as_f64());
    (Some(label), param)
}

/// Runs every value concurrently; a failed run becomes a row with its error.
pub fn sweep(sc: &LoadedScenario, param: &str, values: &[f64], out: &Path) -> CliResult<(Vec<SweepRow>, PathBuf)> {
    if !SWEEPABLE.contains(&param) {
        return Err(CliError::Usage(format!("'{param}' is not sweepable; choose one of {SWEEPABLE:?}")));
    }
    if values.is_empty() {
        return Err(CliError::Usage("no sweep values given".into()));
    }
    let failed = |value: f64, e: CliError| SweepRow {
        value,
        termination: "error".into(),
        t_est: None,
        key_fit: None,
        key_fit_parameter: None,
        error: Some(e.to_string()),
    };
    let rows: Vec<SweepRow> = values
        .par_iter()
        .map(|&value| {
            let variant = match sc.with_parameter(param, value) {
                Ok(v) => v,
                Err(e) => return failed(value, e),
            };
            match run_scenario(&variant, out) {
                Ok((output, _)) => {
                    let (key_fit, key_fit_parameter) = key_fit(&variant, &output);
                    SweepRow {
                        value,
                        termination: output.summary.termination.name().into(),
                        t_est: output.summary.t_est.value().copied(),
                        key_fit,
                        key_fit_parameter,
                        error: None,
                    }
                }
                Err(e) => failed(value, e),
            }
        })
        .collect();

    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Csv(e.to_string());
    w.write_record(["value", "termination", "t_est", "key_fit", "key_fit_parameter", "error"]).map_err(csv_err)?;
    let opt = |v: Option<f64>| v.map(fmt_float).unwrap_or_else(|| "not_applicable".into());
    for r in &rows {
        w.write_record([
            fmt_float(r.value),
            r.termination.clone(),
            opt(r.t_est),
            r.key_fit.clone().unwrap_or_else(|| "not_applicable".into()),
            opt(r.key_fit_parameter),
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Csv(e.to_string()))?;
    let table = out.join(format!("{}.sweep_{param}.csv", sc.scenario.name));
    write_atomic(&table, &bytes)?;
    Ok((rows, table))
}

pub fn cmd_sweep(path: &Path, param: &str, values: &[f64], out: &Path) -> CliResult<i32> {
    let sc = LoadedScenario::from_file(path)?;
    let (rows, table) = sweep(&sc, param, values, out)?;
    for r in &rows {
        let t = r.t_est.map_or("-".to_string(), |t| format!("{t:.6}"));
        println!("{param} = {:<10} {:<16} T_est {t}{}", r.value, r.termination, r.error.as_ref().map_or(String::new(), |e| format!("  ({e})")));
    }
    println!("wrote {}", table.display());
    let any_failed = rows.iter().any(|r| r.error.is_some() || r.termination == "step_underflow");
    Ok(if any_failed { exit::FAILURE } else { exit::OK })
}

/// Runs the comparison harness on two line scenarios, `low` below `high`.
pub fn compare(low: &LoadedScenario, high: &LoadedScenario) -> CliResult<ComparisonReport> {
    let (Problem::Line { dom: d1, bc: bc_low, u0: u_low }, Problem::Line { dom: d2, bc: bc_high, u0: u_high }) = (low.build()?, high.build()?) else {
        return Err(CliError::Usage("compare needs two line1d scenarios".into()));
    };
    if d1 != d2 {
        return Err(CliError::Usage("compare needs identical domains".into()));
    }
    let (a, b) = (&low.scenario, &high.scenario);
    let t_final = a.t_final.min(b.t_final);
    let times = low.output_times()?.into_iter().filter(|t| *t <= t_final).collect::<Vec<_>>();
    Ok(comparison_harness(&u_low, &u_high, &bc_low, &bc_high, &d1, &a.config, t_final, &times)?)
}

pub fn cmd_compare(low: &Path, high: &Path, out: &Path) -> CliResult<i32> {
    let (a, b) = (LoadedScenario::from_file(low)?, LoadedScenario::from_file(high)?);
    let report = compare(&a, &b)?;
    let body = json!({
        "low": a.scenario.name,
        "high": b.scenario.name,
        "ordered": report.ordered(),
        "report": report,
    });
    let path = out.join(format!("{}_vs_{}.compare.json", a.scenario.name, b.scenario.name));
    write_atomic(&path, format!("{}\n", serde_json::to_string_pretty(&body).expect("report serializes")).as_bytes())?;
    println!("min(v − u) = {:e} over {} output times; ordered: {}", report.min_gap, report.times_compared, report.ordered());
    println!("wrote {}", path.display());
    Ok(if report.ordered() { exit::OK } else { exit::ORDER_VIOLATED })
}

/// Fits `column` of a run CSV.
pub fn fit_csv(path: &Path, column: &str, model: RateModel, window: Option<(f64, f64)>) -> CliResult<RateFit> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::Csv(format!("{}: {e}", path.display())))?;
    let headers = rdr.headers().map_err(|e| CliError::Csv(e.to_string()))?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name).ok_or_else(|| CliError::Usage(format!("column '{name}' not in {}", path.display())));
    let (ti, vi) = (find("t")?, find(column)?);
    let mut series = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Csv(e.to_string()))?;
        let parse = |i: usize| rec[i].trim().parse::<f64>().map_err(|e| CliError::Csv(format!("{}: row {}: {e}", path.display(), k + 2)));
        series.push((parse(ti)?, parse(vi)?));
    }
    Ok(fit_rate(&series, model, window)?)
}

pub fn cmd_fit(path: &Path, column: &str, model: RateModel, window: Option<(f64, f64)>) -> CliResult<i32> {
    let fit = fit_csv(path, column, model, window)?;
    println!("{}", serde_json::to_string_pretty(&fit).expect("fit serializes"));
    Ok(exit::OK)
}

pub fn cmd_verify(quick: bool) -> CliResult<i32> {
    let checks = verify::battery(quick);
    print!("{}", verify::render_table(&checks));
    Ok(if checks.iter().all(|c| c.passed) { exit::OK } else { exit::FAILURE })
}

