//! Backward-Euler time integration shared by the line, disc and cylinder
//! solvers.
//!
//! Every model advances `u = e^w` with the conservative implicit update
//! `e^{w⁺} − e^{w} = dt · L(w⁺, t⁺)`, solved for `w⁺` by damped Newton.
//! Writing the time difference in `u` (rather than `e^{w⁺}(w⁺ − w)`) makes
//! the discrete mass law exact and keeps separable solutions exact in time.

use serde::{Deserialize, Serialize};

use crate::domain::{SolutionState, SolverConfig};
use crate::error::{Error, Result};

/// A semi-discrete problem `du/dt = L(w, t)` in log variables.
pub trait ImplicitModel {
    fn size(&self) -> usize;

    /// Writes `L(w, t)` (including any source term) into `out`.
    fn rate(&self, w: &[f64], t: f64, out: &mut [f64]);

    /// Solves `(diag(e^w) − dt ∂L/∂w) δ = rhs`. Returns `false` if the
    /// linear solve fails.
    fn solve_linearized(&self, w: &[f64], t: f64, dt: f64, rhs: &[f64], delta: &mut [f64]) -> bool;

    /// Monitored quantities for the state `w` at time `t`.
    fn diagnostics(&self, w: &[f64], t: f64) -> DiagnosticRow;

    /// Quadrature weights `W` with `mass = Σ W u`.
    fn quadrature_weights(&self) -> Vec<f64>;

    /// Exponent used to extrapolate a blow-up time, if the model has one.
    fn blow_up_exponent(&self) -> Option<f64> {
        None
    }
}

/// One line of monitored quantities. `dt` and `newton_iters` describe the
/// step that produced the row (zero for the initial row).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DiagnosticRow {
    pub t: f64,
    pub dt: f64,
    pub newton_iters: usize,
    pub u_min: f64,
    pub u_max: f64,
    /// `Σ W u`; for the line and cylinder this is `A/(2π)`.
    pub mass: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub area: f64,
    pub length: f64,
    pub gb_residual: f64,
    /// Extremes of the discrete `Δ log u` over interior nodes.
    pub wxx_min: f64,
    pub wxx_max: f64,
    /// Discrete `dm/dt` implied by the boundary flux at this state.
    pub mass_flux: f64,
    /// Boundary average curvature `r_∂ = (1/L)∮ R ds`.
    pub r_boundary: f64,
    /// `∫ R dA`.
    pub total_curvature: f64,
    /// Boundary value of `u` (upper end for the line, rim for the disc,
    /// maximum over both ends for the cylinder).
    pub u_boundary: f64,
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    ReachedFinal,
    BlowUp { t_stop: f64, t_est: Option<f64> },
    BlowDown { t_stop: f64, t_est: Option<f64> },
    StepUnderflow { t_stop: f64, dt: f64 },
}

impl Termination {
    pub fn name(&self) -> &'static str {
        match self {
            Termination::ReachedFinal => "reached_t_final",
            Termination::BlowUp { .. } => "blow_up",
            Termination::BlowDown { .. } => "blow_down",
            Termination::StepUnderflow { .. } => "step_underflow",
        }
    }

    pub fn is_singular(&self) -> bool {
        matches!(self, Termination::BlowUp { .. } | Termination::BlowDown { .. })
    }

    pub fn t_est(&self) -> Option<f64> {
        match self {
            Termination::BlowUp { t_est, .. } | Termination::BlowDown { t_est, .. } => *t_est,
            _ => None,
        }
    }
}

/// States at the requested output times plus one diagnostic row per
/// accepted step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// The initial state followed by the state at every output time reached.
    pub samples: Vec<SolutionState>,
    /// Diagnostics of `samples`, index for index.
    pub sample_rows: Vec<DiagnosticRow>,
    /// One row per accepted step.
    pub rows: Vec<DiagnosticRow>,
    pub termination: Termination,
    pub final_state: SolutionState,
    pub final_row: DiagnosticRow,
    pub weights: Vec<f64>,
    pub blow_up_exponent: Option<f64>,
}

impl Trajectory {
    pub fn initial_row(&self) -> &DiagnosticRow {
        &self.sample_rows[0]
    }

    /// Sample rows, with the terminal row appended when the run stopped
    /// between output times.
    pub fn output_rows(&self) -> Vec<DiagnosticRow> {
        let mut out = self.sample_rows.clone();
        if out.last().map(|r| r.t) != Some(self.final_row.t) {
            out.push(self.final_row);
        }
        out
    }

    /// Output states, matching [`Trajectory::output_rows`].
    pub fn output_states(&self) -> Vec<SolutionState> {
        let mut out = self.samples.clone();
        if out.last().map(|s| s.t) != Some(self.final_state.t) {
            out.push(self.final_state.clone());
        }
        out
    }

    /// Initial row followed by every per-step row.
    pub fn all_rows(&self) -> Vec<DiagnosticRow> {
        let mut out = Vec::with_capacity(self.rows.len() + 1);
        out.push(self.sample_rows[0]);
        out.extend_from_slice(&self.rows);
        out
    }
}

pub(crate) struct NewtonOutcome {
    pub w: Vec<f64>,
    pub iters: usize,
    pub converged: bool,
}

// e^w overflows past ~709; stay well clear so residuals remain finite
const W_CAP: f64 = 650.0;

fn scaled_residual<M: ImplicitModel + ?Sized>(
    model: &M,
    w_new: &[f64],
    w_old: &[f64],
    t_new: f64,
    dt: f64,
    f: &mut [f64],
) -> f64 {
    model.rate(w_new, t_new, f);
    let mut norm = 0.0f64;
    for i in 0..f.len() {
        let (a, b) = (w_new[i].exp(), w_old[i].exp());
        f[i] = a - b - dt * f[i];
        let r = f[i].abs() / a.max(b);
        if !r.is_finite() {
            return f64::INFINITY;
        }
        norm = norm.max(r);
    }
    norm
}

/// Damped Newton for one implicit step from `(t, w_old)` to `t + dt`.
pub(crate) fn newton_step<M: ImplicitModel + ?Sized>(
    model: &M,
    w_old: &[f64],
    t: f64,
    dt: f64,
    cfg: &SolverConfig,
) -> NewtonOutcome {
    let n = w_old.len();
    let t_new = t + dt;
    let mut w = w_old.to_vec();
    let mut f = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut f_trial = vec![0.0; n];
    let mut delta = vec![0.0; n];
    let mut norm = scaled_residual(model, &w, w_old, t_new, dt, &mut f);
    let mut iters = 1;
    while iters <= cfg.newton_max_iter {
        if norm < cfg.newton_tol {
            return NewtonOutcome { w, iters, converged: true };
        }
        if !norm.is_finite() {
            break;
        }
        let rhs: Vec<f64> = f.iter().map(|v| -v).collect();
        if !model.solve_linearized(&w, t_new, dt, &rhs, &mut delta) {
            break;
        }
        // a full step this small is below what the residual can resolve
        // once cancellation in the rate dominates (tiny u, large dt/h²)
        if delta.iter().all(|d| d.abs() < cfg.newton_tol) {
            for i in 0..n {
                w[i] += delta[i];
            }
            return NewtonOutcome { w, iters: iters.min(cfg.newton_max_iter), converged: true };
        }
        let mut lambda = 1.0;
        let mut improved = false;
        for _ in 0..20 {
            for i in 0..n {
                trial[i] = w[i] + lambda * delta[i];
            }
            if trial.iter().all(|v| v.is_finite() && *v < W_CAP) {
                let nt = scaled_residual(model, &trial, w_old, t_new, dt, &mut f_trial);
                if nt < norm {
                    std::mem::swap(&mut w, &mut trial);
                    std::mem::swap(&mut f, &mut f_trial);
                    norm = nt;
                    improved = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        iters += 1;
        if !improved {
            break;
        }
    }
    let converged = norm < cfg.newton_tol;
    NewtonOutcome { w, iters: iters.min(cfg.newton_max_iter), converged }
}

/// Largest nodewise relative change `|u⁺/u − 1|`.
pub(crate) fn max_relative_change(w_new: &[f64], w_old: &[f64]) -> f64 {
    w_new
        .iter()
        .zip(w_old)
        .map(|(a, b)| (a - b).exp_m1().abs())
        .fold(0.0, f64::max)
}

/// Checks and normalizes requested output times: sorted, inside
/// `(t0, t_final]`, with `t_final` appended if missing.
pub(crate) fn output_schedule(t0: f64, t_final: f64, output_times: &[f64]) -> Result<Vec<f64>> {
    if !(t_final > t0) || !t_final.is_finite() {
        return Err(Error::InvalidArgument(format!("t_final = {t_final} must exceed the start time {t0}")));
    }
    let mut out = Vec::with_capacity(output_times.len() + 1);
    for &s in output_times {
        if !(s > t0 && s <= t_final) {
            return Err(Error::InvalidArgument(format!("output time {s} outside ({t0}, {t_final}]")));
        }
        if let Some(&last) = out.last() {
            if s <= last {
                return Err(Error::InvalidArgument("output times must be strictly increasing".into()));
            }
        }
        out.push(s);
    }
    if out.last() != Some(&t_final) {
        out.push(t_final);
    }
    Ok(out)
}

/// Adaptive backward-Euler integration of `model` from `w0`.
pub fn integrate<M: ImplicitModel + ?Sized>(
    model: &M,
    w0: &SolutionState,
    cfg: &SolverConfig,
    t_final: f64,
    output_times: &[f64],
) -> Result<Trajectory> {
    cfg.validate()?;
    if w0.w.len() != model.size() {
        return Err(Error::InvalidArgument(format!(
            "state has {} values, model expects {}",
            w0.w.len(),
            model.size()
        )));
    }
    let schedule = output_schedule(w0.t, t_final, output_times)?;

    let initial_row = model.diagnostics(&w0.w, w0.t);
    let mut samples = vec![w0.clone()];
    let mut sample_rows = vec![initial_row];
    let mut rows = Vec::new();
    let mut t = w0.t;
    let mut w = w0.w.clone();
    let mut dt = cfg.dt_init;
    let mut next = 0;
    let mut last_row = initial_row;
    let mut termination = Termination::ReachedFinal;

    while next < schedule.len() {
        let target = schedule[next];
        let remaining = target - t;
        // land exactly on the output time; also absorb a sliver that would
        // otherwise leave a step far below dt_min
        let clipped = remaining <= dt * (1.0 + 1e-9);
        let step = if clipped { remaining } else { dt };
        let outcome = newton_step(model, &w, t, step, cfg);
        let rel = if outcome.converged { max_relative_change(&outcome.w, &w) } else { f64::INFINITY };
        if !(outcome.converged && rel <= cfg.step_rel_change) {
            dt = 0.5 * step;
            if dt < cfg.dt_min {
                termination = Termination::StepUnderflow { t_stop: t, dt };
                break;
            }
            continue;
        }

        t = if clipped { target } else { t + step };
        w = outcome.w;
        let mut row = model.diagnostics(&w, t);
        row.dt = step;
        row.newton_iters = outcome.iters;
        rows.push(row);
        last_row = row;

        let easy = outcome.iters <= 5 && rel <= 0.5 * cfg.step_rel_change;
        let base = if clipped { dt } else { step };
        dt = if easy { (1.2 * base).min(cfg.dt_max) } else { base.min(cfg.dt_max) };

        if clipped {
            samples.push(SolutionState { t, w: w.clone() });
            sample_rows.push(row);
            next += 1;
        }
        if row.u_max > cfg.blow_up_threshold {
            termination = Termination::BlowUp { t_stop: t, t_est: None };
            break;
        }
        if row.u_min < cfg.blow_down_threshold {
            termination = Termination::BlowDown { t_stop: t, t_est: None };
            break;
        }
    }

    let exponent = model.blow_up_exponent();
    termination = match termination {
        Termination::BlowUp { t_stop, .. } => Termination::BlowUp {
            t_stop,
            t_est: extrapolate_singular_time(&rows, SingularKind::BlowUp, exponent),
        },
        Termination::BlowDown { t_stop, .. } => Termination::BlowDown {
            t_stop,
            t_est: extrapolate_singular_time(&rows, SingularKind::BlowDown, exponent),
        },
        other => other,
    };

    Ok(Trajectory {
        samples,
        sample_rows,
        rows,
        termination,
        final_state: SolutionState { t, w },
        final_row: last_row,
        weights: model.quadrature_weights(),
        blow_up_exponent: exponent,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SingularKind {
    BlowUp,
    BlowDown,
}

/// Minimum number of rows for singular-time extrapolation.
pub const MIN_ROWS_FOR_EXTRAPOLATION: usize = 10;

/// Root of the least-squares line through the last 20% of rows, fitted to
/// `u_min` (blow-down) or to a quantity vanishing at a blow-up: `u_max^{2−p}`
/// when `p > 2`, otherwise `1/u_max`.
pub fn extrapolate_singular_time(rows: &[DiagnosticRow], kind: SingularKind, p: Option<f64>) -> Option<f64> {
    if rows.len() < MIN_ROWS_FOR_EXTRAPOLATION {
        return None;
    }
    let take = (rows.len() / 5).max(3);
    let tail = &rows[rows.len() - take..];
    let y = |r: &DiagnosticRow| match kind {
        SingularKind::BlowDown => r.u_min,
        SingularKind::BlowUp => match p {
            Some(p) if p > 2.0 => r.u_max.powf(2.0 - p),
            _ => 1.0 / r.u_max,
        },
    };
    let pts: Vec<(f64, f64)> = tail.iter().map(|r| (r.t, y(r))).collect();
    let (slope, intercept) = crate::analysis::least_squares_line(&pts)?;
    if !(slope < 0.0) {
        return None;
    }
    let t_est = -intercept / slope;
    t_est.is_finite().then_some(t_est)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `du/dt = -k` at every node, a linear decay with a known vanishing time.
    struct Decay {
        n: usize,
        k: f64,
    }

    impl ImplicitModel for Decay {
        fn size(&self) -> usize {
            self.n
        }
        fn rate(&self, _w: &[f64], _t: f64, out: &mut [f64]) {
            out.iter_mut().for_each(|o| *o = -self.k);
        }
        fn solve_linearized(&self, w: &[f64], _t: f64, _dt: f64, rhs: &[f64], delta: &mut [f64]) -> bool {
            for i in 0..self.n {
                delta[i] = rhs[i] / w[i].exp();
            }
            true
        }
        fn diagnostics(&self, w: &[f64], t: f64) -> DiagnosticRow {
            let u: Vec<f64> = w.iter().map(|v| v.exp()).collect();
            DiagnosticRow {
                t,
                u_min: u.iter().copied().fold(f64::INFINITY, f64::min),
                u_max: u.iter().copied().fold(0.0, f64::max),
                mass: u.iter().sum(),
                ..Default::default()
            }
        }
        fn quadrature_weights(&self) -> Vec<f64> {
            vec![1.0; self.n]
        }
    }

    #[test]
    fn schedule_validation() {
        assert_eq!(output_schedule(0.0, 1.0, &[0.5]).unwrap(), vec![0.5, 1.0]);
        assert_eq!(output_schedule(0.0, 1.0, &[0.5, 1.0]).unwrap(), vec![0.5, 1.0]);
        assert!(output_schedule(0.0, 1.0, &[0.5, 0.4]).is_err());
        assert!(output_schedule(0.0, 1.0, &[2.0]).is_err());
        assert!(output_schedule(0.0, 0.0, &[]).is_err());
    }

    #[test]
    fn linear_decay_blows_down_on_time() {
        let model = Decay { n: 3, k: 2.0 };
        let w0 = SolutionState::from_u(0.0, &[2.0, 2.0, 2.0]).unwrap();
        let cfg = SolverConfig::default();
        let traj = integrate(&model, &w0, &cfg, 5.0, &[0.25, 0.5]).unwrap();
        match traj.termination {
            Termination::BlowDown { t_stop, t_est } => {
                assert!((t_stop - 1.0).abs() < 1e-6, "{t_stop}");
                assert!((t_est.unwrap() - 1.0).abs() < 1e-6);
            }
            other => panic!("unexpected termination {other:?}"),
        }
        assert_eq!(traj.samples.len(), 3);
        assert_eq!(traj.samples[1].t, 0.25);
        assert_eq!(traj.samples[2].t, 0.5);
        // backward Euler is exact on linear data
        assert!((traj.samples[2].u()[0] - 1.0).abs() < 1e-9);
        for pair in traj.rows.windows(2) {
            assert!(pair[1].t > pair[0].t);
        }
    }

    #[test]
    fn accepted_steps_respect_the_change_limit() {
        let model = Decay { n: 2, k: 1.0 };
        let w0 = SolutionState::from_u(0.0, &[1.0, 1.0]).unwrap();
        let cfg = SolverConfig { dt_init: 1e-2, dt_max: 1.0, ..Default::default() };
        let traj = integrate(&model, &w0, &cfg, 0.9, &[]).unwrap();
        assert_eq!(traj.termination, Termination::ReachedFinal);
        let mut prev = 1.0;
        for r in &traj.rows {
            assert!((r.u_min / prev - 1.0).abs() <= cfg.step_rel_change + 1e-12);
            prev = r.u_min;
        }
        assert!((traj.final_state.u()[0] - 0.1).abs() < 1e-9);
    }
}
