//! Runs a scenario and assembles its CSV table and JSON summary.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use logdiff_core::analysis::{self, SignReport};
use logdiff_core::cylinder::{run_cylinder, EnvelopeReport};
use logdiff_core::disc::run_disc;
use logdiff_core::geometry::area_length_check;
use logdiff_core::{solver1d, DiagnosticRow, Error, Termination, Trajectory};

use crate::error::CliResult;
use crate::scenario::{AnalysisTask, LoadedScenario, Problem, RowSet};

/// A value, or an explicit marker saying why there is none.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Field<T> {
    Value(T),
    NotApplicable { not_applicable: String },
}

impl<T> Field<T> {
    pub fn na(reason: impl Into<String>) -> Self {
        Field::NotApplicable { not_applicable: reason.into() }
    }

    pub fn value(&self) -> Option<&T> {
        match self {
            Field::Value(v) => Some(v),
            Field::NotApplicable { .. } => None,
        }
    }
}

impl<T> From<logdiff_core::Result<T>> for Field<T> {
    fn from(r: logdiff_core::Result<T>) -> Self {
        match r {
            Ok(v) => Field::Value(v),
            Err(e) => Field::na(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignVerdict {
    #[serde(flatten)]
    pub report: SignReport,
    pub c: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Monitors {
    pub sign_preservation: Field<SignVerdict>,
    pub mass_law_max_residual: Field<f64>,
    pub gauss_bonnet_max_residual: Field<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub name: String,
    pub solver: String,
    pub termination: Termination,
    pub t_est: Field<f64>,
    pub t_stop: f64,
    pub steps: usize,
    pub monitors: Monitors,
    pub analyses: BTreeMap<String, Field<Value>>,
    /// The only field that varies between identical runs.
    pub wall_time_s: f64,
}

impl RunSummary {
    pub fn is_clean(&self) -> bool {
        !matches!(self.termination, Termination::StepUnderflow { .. })
    }

    pub fn analysis(&self, label: &str) -> Option<&Value> {
        self.analyses.get(label).and_then(Field::value)
    }
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub trajectory: Trajectory,
    pub envelope: Option<EnvelopeReport>,
    pub csv: String,
}

pub const BASE_COLUMNS: [&str; 9] = ["t", "u_min", "u_max", "mass", "R_min", "R_max", "area", "length", "gb_residual"];

/// Column names for a solver: the base set, plus `u_boundary, mass_flux`
/// on the disc and `envelope_gap` on the cylinder.
pub fn csv_columns(problem: &Problem) -> Vec<&'static str> {
    let mut cols = BASE_COLUMNS.to_vec();
    match problem {
        Problem::Line { .. } => {}
        Problem::Disc { .. } => cols.extend(["u_boundary", "mass_flux"]),
        Problem::Cylinder { .. } => cols.push("envelope_gap"),
    }
    cols
}

pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn execute(sc: &LoadedScenario) -> CliResult<RunOutput> {
    let problem = sc.build()?;
    let s = &sc.scenario;
    let times = sc.output_times()?;
    let start = Instant::now();
    let (trajectory, envelope) = match &problem {
        Problem::Line { dom, bc, u0 } => (solver1d::run(u0, bc, dom, &s.config, s.t_final, &times)?, None),
        Problem::Disc { grid, bcd, u0 } => (run_disc(u0, bcd, grid, &s.config, s.t_final, &times)?, None),
        Problem::Cylinder { grid, phi, u0 } => {
            let run = run_cylinder(u0, phi, grid, &s.config, s.t_final, &times)?;
            (run.trajectory, Some(run.envelope))
        }
    };
    let wall = start.elapsed().as_secs_f64();

    let t_est = match trajectory.termination {
        Termination::BlowUp { t_est: Some(t), .. } | Termination::BlowDown { t_est: Some(t), .. } => Field::Value(t),
        Termination::BlowUp { .. } | Termination::BlowDown { .. } => Field::na("too few steps near the singular time to extrapolate"),
        _ => Field::na(format!("no singular event ({})", trajectory.termination.name())),
    };
    let h = problem.spacing();
    let monitors = Monitors {
        sign_preservation: match problem {
            Problem::Line { .. } => sign_verdict(&trajectory, h, 10.0),
            _ => Field::na("sign monitor applies to line1d runs"),
        },
        mass_law_max_residual: finite_or_na(analysis::mass_law_residual(&trajectory)),
        gauss_bonnet_max_residual: finite_or_na(trajectory.all_rows().iter().map(|r| r.gb_residual.abs()).fold(0.0, f64::max)),
    };

    let mut analyses = BTreeMap::new();
    for task in &s.analysis {
        let mut key = task.label();
        let mut k = 2;
        while analyses.contains_key(&key) {
            key = format!("{}_{k}", task.label());
            k += 1;
        }
        analyses.insert(key, run_task(task, &problem, &trajectory, envelope.as_ref()));
    }

    let summary = RunSummary {
        name: s.name.clone(),
        solver: s.solver.name().into(),
        termination: trajectory.termination,
        t_est,
        t_stop: trajectory.final_row.t,
        steps: trajectory.rows.len(),
        monitors,
        analyses,
        wall_time_s: wall,
    };
    let csv = render_csv(&problem, &trajectory, envelope.as_ref())?;
    Ok(RunOutput { summary, trajectory, envelope, csv })
}

fn finite_or_na(v: f64) -> Field<f64> {
    if v.is_finite() {
        Field::Value(v)
    } else {
        Field::na("not finite")
    }
}

fn sign_verdict(traj: &Trajectory, h: f64, c: f64) -> Field<SignVerdict> {
    let report = analysis::sign_preservation(traj, h);
    if report.initial_sign == 0 {
        return Field::na("initial log-curvature changes sign");
    }
    Field::Value(SignVerdict { report, c, holds: report.holds(c) })
}

fn rows_for(traj: &Trajectory, set: RowSet) -> Vec<DiagnosticRow> {
    match set {
        RowSet::Output => traj.sample_rows.clone(),
        RowSet::Steps => traj.all_rows(),
    }
}

fn run_task(task: &AnalysisTask, problem: &Problem, traj: &Trajectory, envelope: Option<&EnvelopeReport>) -> Field<Value> {
    let line = match problem {
        Problem::Line { dom, bc, .. } => Some((dom, bc)),
        _ => None,
    };
    let only_line = || Field::na("applies to line1d runs");
    let to = |v: Value| Field::Value(v);
    match task {
        AnalysisTask::Fit { quantity, model, window, rows } => {
            let series = analysis::series(&rows_for(traj, *rows), |r| quantity.pick(r));
            let fit = analysis::fit_rate(&series, *model, window.map(|w| (w[0], w[1])));
            Field::from(fit).map_json()
        }
        AnalysisTask::SingularTime => match solver1d::detect_singularity(traj) {
            Ok(ev) => match ev.t_est() {
                Some(t) => to(json!({ "event": traj.termination.name(), "t_est": t })),
                None => Field::na("no singular event"),
            },
            Err(e) => Field::na(e.to_string()),
        },
        AnalysisTask::MassBound => {
            let Some((dom, bc)) = line else { return only_line() };
            let bound = if bc.p < 1.0 && bc.gamma < 0.0 {
                analysis::check_mass_bound_blowdown(traj, bc, dom)
            } else if bc.p > 2.0 && bc.gamma > 0.0 {
                analysis::check_mass_bound_blowup(traj, bc, dom)
            } else {
                Err(Error::NotApplicable(format!("no finite-time mass bound for p = {}, gamma = {}", bc.p, bc.gamma)))
            };
            match bound {
                Ok(b) => {
                    let ratio = traj.termination.t_est().map(|t| t / b.deadline);
                    to(json!({ "deadline": b.deadline, "worst_slack": b.worst_slack, "t_est_over_deadline": ratio.map_or(Value::Null, Value::from) }))
                        .fill_null("t_est_over_deadline", "no singular time estimate")
                }
                Err(e) => Field::na(e.to_string()),
            }
        }
        AnalysisTask::SignPreservation { c } => match line {
            Some((dom, _)) => sign_verdict(traj, dom.spacing(), *c).map_json(),
            None => only_line(),
        },
        AnalysisTask::MassLaw => {
            let mut v = json!({ "max_step_residual": analysis::mass_law_residual(traj) });
            if let Some((_, bc)) = line {
                if bc.p == 1.0 {
                    let rows = traj.all_rows();
                    let m0 = rows[0].mass;
                    let (worst, scaled) = rows.iter().fold((0.0f64, 0.0f64), |(w, s), r| {
                        let d = (r.mass - m0 - 4.0 * bc.gamma * (r.t - rows[0].t)).abs();
                        (w.max(d), s.max(d / (1.0 + bc.gamma.abs() * r.t)))
                    });
                    v["linear_law_max"] = json!(worst);
                    v["linear_law_scaled_max"] = json!(scaled);
                }
            }
            to(v)
        }
        AnalysisTask::AreaLaw => to(json!({ "max_step_residual": analysis::area_law_residual(traj) })),
        AnalysisTask::LengthLaw => to(json!({ "max_relative_gap": analysis::length_law_residual(traj) })),
        AnalysisTask::GaussBonnet => {
            let rows = traj.all_rows();
            let worst = rows.iter().map(|r| r.gb_residual.abs()).fold(0.0, f64::max);
            // Scaled by the size of the curvature integral, which grows with u.
            let relative = rows.iter().map(|r| r.gb_residual.abs() / r.total_curvature.abs().max(1.0)).fold(0.0, f64::max);
            to(json!({ "max_residual": worst, "max_relative_residual": relative, "initial_residual": rows[0].gb_residual }))
        }
        AnalysisTask::AreaLength { alpha } => {
            let Some((dom, bc)) = line else { return only_line() };
            let n = dom.len();
            let (mut applicable, mut min_slack, mut all_hold, mut bounded) = (0usize, f64::INFINITY, true, true);
            for st in traj.output_states() {
                let u = st.u();
                let a = alpha.unwrap_or_else(|| bc.geodesic_curvature(u[0]).abs().max(bc.geodesic_curvature(u[n - 1]).abs()).max(1e-12));
                if let Ok(rep) = area_length_check(&st, bc, dom, a) {
                    applicable += 1;
                    min_slack = min_slack.min(rep.slack);
                    all_hold &= rep.holds;
                    bounded &= rep.curvature_bounded;
                }
            }
            if applicable == 0 {
                Field::na("curvature is negative on every output state")
            } else {
                to(json!({ "applicable_states": applicable, "min_slack": min_slack, "all_hold": all_hold, "curvature_bounded": bounded }))
            }
        }
        AnalysisTask::Flatness => {
            let f = analysis::flatness_ratio(traj);
            let initial = f[0].1;
            let max = f.iter().map(|p| p.1).fold(0.0, f64::max);
            let last = f[f.len() - 1].1;
            let increasing = f.windows(2).all(|p| p[1].1 >= p[0].1);
            to(json!({ "initial": initial, "max": max, "final": last, "max_over_initial": max / initial, "nondecreasing": increasing }))
        }
        AnalysisTask::CurvatureEnvelope { slack } => {
            let rows = traj.all_rows();
            let b = rows[0].r_max;
            let mut worst = f64::NEG_INFINITY;
            let mut checked = 0usize;
            for r in &rows {
                if 1.0 - b * r.t > 0.0 {
                    checked += 1;
                    worst = worst.max(r.r_max - logdiff_core::geometry::curvature_envelope(b, r.t));
                }
            }
            to(json!({ "b": b, "rows_checked": checked, "worst_excess": worst, "holds": worst <= *slack, "slack": slack }))
        }
        AnalysisTask::Ceiling { window } => {
            let series = analysis::series(&traj.all_rows(), |r| r.u_max);
            match analysis::split_suprema(&series, (window[0], window[1]), |t, v| v.ln() / t) {
                Ok((early, late)) => to(json!({ "early_sup": early, "late_sup": late, "bounded": late <= early + 0.5 * early.abs() })),
                Err(e) => Field::na(e.to_string()),
            }
        }
        AnalysisTask::Floor { window } => {
            let series = analysis::series(&traj.all_rows(), |r| r.u_min);
            match analysis::split_suprema(&series, (window[0], window[1]), |t, v| -v.ln() / (t * t)) {
                Ok((early, late)) => to(json!({ "early_inf": -early, "late_inf": -late, "bounded": late <= early + 0.5 * early.abs() })),
                Err(e) => Field::na(e.to_string()),
            }
        }
        AnalysisTask::Envelope { tol } => match envelope {
            Some(e) => to(json!({
                "contained": e.contained(*tol),
                "times_checked": e.times_checked,
                "worst_upper_excess": e.worst_upper_excess,
                "worst_lower_excess": e.worst_lower_excess,
                "gamma_lower": e.gamma_lower,
                "gamma_upper": e.gamma_upper,
            })),
            None => Field::na("applies to cylinder2d runs"),
        },
    }
}

trait JsonField {
    fn map_json(self) -> Field<Value>;
}

impl<T: Serialize> JsonField for Field<T> {
    fn map_json(self) -> Field<Value> {
        match self {
            Field::Value(v) => match serde_json::to_value(v) {
                Ok(v) => Field::Value(v),
                Err(e) => Field::na(e.to_string()),
            },
            Field::NotApplicable { not_applicable } => Field::NotApplicable { not_applicable },
        }
    }
}

impl Field<Value> {
    /// Replaces a `null` entry by an explicit not-applicable marker.
    fn fill_null(mut self, key: &str, reason: &str) -> Self {
        if let Field::Value(Value::Object(map)) = &mut self {
            if map.get(key).is_some_and(Value::is_null) {
                map.insert(key.into(), json!({ "not_applicable": reason }));
            }
        }
        self
    }
}

fn render_csv(problem: &Problem, traj: &Trajectory, envelope: Option<&EnvelopeReport>) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let to_err = |e: csv::Error| crate::error::CliError::Csv(e.to_string());
    w.write_record(csv_columns(problem)).map_err(to_err)?;
    for (k, r) in traj.sample_rows.iter().enumerate() {
        let mut rec: Vec<String> = [r.t, r.u_min, r.u_max, r.mass, r.r_min, r.r_max, r.area, r.length, r.gb_residual]
            .iter()
            .map(|v| fmt_float(*v))
            .collect();
        match problem {
            Problem::Line { .. } => {}
            Problem::Disc { .. } => rec.extend([fmt_float(r.u_boundary), fmt_float(r.mass_flux)]),
            Problem::Cylinder { .. } => {
                let gap = envelope.and_then(|e| e.gaps.get(k)).map_or(f64::NAN, |g| g.1);
                rec.push(fmt_float(gap));
            }
        }
        w.write_record(&rec).map_err(to_err)?;
    }
    let bytes = w.into_inner().map_err(|e| crate::error::CliError::Csv(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is ascii"))
}

/// Summary as pretty JSON.
pub fn summary_json(summary: &RunSummary) -> String {
    let mut s = serde_json::to_string_pretty(summary).expect("summary serializes");
    s.push('\n');
    s
}
