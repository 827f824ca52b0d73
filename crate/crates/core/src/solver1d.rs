//! Method-of-lines solver for `u_t = (log u)_xx` on `[-l, l]` with the
//! nonlinear Robin condition, written in `w = log u`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::{compatibility_residual, Interval1D, LogFlux, Side, SolutionState, SolverConfig};
use crate::error::{Error, Result};
use crate::integrate::{self, DiagnosticRow, ImplicitModel, SingularKind, Termination, Trajectory};
use crate::{geometry, tridiag};

/// Flux data handed to a stencil: `(q, dq/dw)` at each end.
pub type FluxPair = (f64, f64);

/// Discrete `∂_xx w` on a uniform line, with boundary rows closed by the
/// outward log-flux.
pub trait LineStencil: Send + Sync {
    fn apply(&self, w: &[f64], h: f64, lower: FluxPair, upper: FluxPair, out: &mut [f64]);

    /// Tridiagonal `∂(apply)/∂w` as (sub, diag, super).
    fn jacobian(
        &self,
        w: &[f64],
        h: f64,
        lower: FluxPair,
        upper: FluxPair,
        sub: &mut [f64],
        diag: &mut [f64],
        sup: &mut [f64],
    );
}

/// Central differences with the ghost node eliminated through the flux:
/// `w_ghost = w_1 + 2h q` at each end.
#[derive(Debug, Clone, Copy, Default)]
pub struct GhostNode;

impl LineStencil for GhostNode {
    fn apply(&self, w: &[f64], h: f64, lower: FluxPair, upper: FluxPair, out: &mut [f64]) {
        let n = w.len();
        let h2 = h * h;
        out[0] = 2.0 * (w[1] - w[0]) / h2 + 2.0 * lower.0 / h;
        for i in 1..n - 1 {
            out[i] = (w[i - 1] - 2.0 * w[i] + w[i + 1]) / h2;
        }
        out[n - 1] = 2.0 * (w[n - 2] - w[n - 1]) / h2 + 2.0 * upper.0 / h;
    }

    fn jacobian(
        &self,
        w: &[f64],
        h: f64,
        lower: FluxPair,
        upper: FluxPair,
        sub: &mut [f64],
        diag: &mut [f64],
        sup: &mut [f64],
    ) {
        let n = w.len();
        let h2 = h * h;
        diag[0] = -2.0 / h2 + 2.0 * lower.1 / h;
        sup[0] = 2.0 / h2;
        for i in 1..n - 1 {
            sub[i - 1] = 1.0 / h2;
            diag[i] = -2.0 / h2;
            sup[i] = 1.0 / h2;
        }
        sub[n - 2] = 2.0 / h2;
        diag[n - 1] = -2.0 / h2 + 2.0 * upper.1 / h;
    }
}

/// Right-hand-side forcing `f(x, t)`; empty for every physical run.
#[derive(Clone, Default)]
pub struct SourceTerm {
    f: Option<Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>>,
}

impl SourceTerm {
    pub fn none() -> Self {
        Self { f: None }
    }

    pub fn new(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { f: Some(Arc::new(f)) }
    }

    pub fn is_zero(&self) -> bool {
        self.f.is_none()
    }

    pub fn eval(&self, x: f64, t: f64) -> f64 {
        self.f.as_ref().map_or(0.0, |f| f(x, t))
    }
}

impl std::fmt::Debug for SourceTerm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(if self.is_zero() { "SourceTerm(none)" } else { "SourceTerm(fn)" })
    }
}

pub(crate) fn end_fluxes<B: LogFlux + ?Sized>(bc: &B, w: &[f64], t: f64) -> (FluxPair, FluxPair) {
    (bc.log_flux(Side::Lower, w[0], t), bc.log_flux(Side::Upper, w[w.len() - 1], t))
}

/// Semi-discrete line problem.
pub struct LineModel<'a> {
    pub dom: Interval1D,
    pub bc: &'a dyn LogFlux,
    pub stencil: &'a dyn LineStencil,
    pub src: &'a SourceTerm,
    x: Vec<f64>,
    exponent: Option<f64>,
}

impl<'a> LineModel<'a> {
    pub fn new(
        dom: Interval1D,
        bc: &'a dyn LogFlux,
        stencil: &'a dyn LineStencil,
        src: &'a SourceTerm,
        exponent: Option<f64>,
    ) -> Self {
        Self { dom, bc, stencil, src, x: dom.nodes(), exponent }
    }
}

impl ImplicitModel for LineModel<'_> {
    fn size(&self) -> usize {
        self.dom.len()
    }

    fn rate(&self, w: &[f64], t: f64, out: &mut [f64]) {
        let (lo, hi) = end_fluxes(self.bc, w, t);
        self.stencil.apply(w, self.dom.spacing(), lo, hi, out);
        if !self.src.is_zero() {
            for (o, x) in out.iter_mut().zip(&self.x) {
                *o += self.src.eval(*x, t);
            }
        }
    }

    fn solve_linearized(&self, w: &[f64], t: f64, dt: f64, rhs: &[f64], delta: &mut [f64]) -> bool {
        let n = w.len();
        let (lo, hi) = end_fluxes(self.bc, w, t);
        let mut sub = vec![0.0; n - 1];
        let mut diag = vec![0.0; n];
        let mut sup = vec![0.0; n - 1];
        self.stencil.jacobian(w, self.dom.spacing(), lo, hi, &mut sub, &mut diag, &mut sup);
        for i in 0..n {
            diag[i] = w[i].exp() - dt * diag[i];
        }
        sub.iter_mut().for_each(|v| *v *= -dt);
        sup.iter_mut().for_each(|v| *v *= -dt);
        delta.copy_from_slice(rhs);
        tridiag::solve_in_place(&mut sub, &mut diag, &mut sup, delta)
    }

    fn diagnostics(&self, w: &[f64], t: f64) -> DiagnosticRow {
        geometry::line_row(w, t, self.bc, &self.dom, self.stencil)
    }

    fn quadrature_weights(&self) -> Vec<f64> {
        self.dom.trapezoid_weights()
    }

    fn blow_up_exponent(&self) -> Option<f64> {
        self.exponent
    }
}

fn check_grid(state: &SolutionState, dom: &Interval1D) -> Result<()> {
    if state.w.len() != dom.len() {
        return Err(Error::InvalidArgument(format!(
            "state has {} values, grid has {} nodes",
            state.w.len(),
            dom.len()
        )));
    }
    Ok(())
}

/// Discrete `du/dt = ∂_xx log u` with the standard ghost-node boundary rows.
pub fn apply_log_diffusion<B: LogFlux + ?Sized>(state: &SolutionState, bc: &B, dom: &Interval1D) -> Vec<f64> {
    apply_with_stencil(state, bc, dom, &GhostNode)
}

pub fn apply_with_stencil<B: LogFlux + ?Sized>(
    state: &SolutionState,
    bc: &B,
    dom: &Interval1D,
    stencil: &dyn LineStencil,
) -> Vec<f64> {
    let mut out = vec![0.0; state.w.len()];
    let (lo, hi) = end_fluxes(bc, &state.w, state.t);
    stencil.apply(&state.w, dom.spacing(), lo, hi, &mut out);
    out
}

/// Result of a single implicit step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub state: SolutionState,
    pub dt_used: f64,
    pub newton_iters: usize,
    pub accepted: bool,
}

/// One backward-Euler step of size `dt`. On rejection the returned state
/// is the input state and the caller is expected to retry with `dt/2`.
pub fn step_implicit<B: LogFlux>(
    state: &SolutionState,
    bc: &B,
    dom: &Interval1D,
    cfg: &SolverConfig,
    dt: f64,
    src: &SourceTerm,
) -> Result<StepOutcome> {
    cfg.validate()?;
    check_grid(state, dom)?;
    if !(dt >= cfg.dt_min && dt <= cfg.dt_max) {
        return Err(Error::StepOutOfRange { dt, dt_min: cfg.dt_min, dt_max: cfg.dt_max });
    }
    let model = LineModel::new(*dom, bc, &GhostNode, src, None);
    let out = integrate::newton_step(&model, &state.w, state.t, dt, cfg);
    let accepted = out.converged && integrate::max_relative_change(&out.w, &state.w) <= cfg.step_rel_change;
    let state = if accepted { SolutionState { t: state.t + dt, w: out.w } } else { state.clone() };
    Ok(StepOutcome { state, dt_used: dt, newton_iters: out.iters, accepted })
}

/// Rejects initial data whose compatibility residual exceeds `cfg.compat_tol`.
pub(crate) fn require_compatible<B: LogFlux + ?Sized>(
    u0: &SolutionState,
    bc: &B,
    dom: &Interval1D,
    cfg: &SolverConfig,
) -> Result<()> {
    let (lower, upper) = compatibility_residual(u0, bc, dom);
    if !(lower.abs() < cfg.compat_tol && upper.abs() < cfg.compat_tol) {
        return Err(Error::Incompatible { lower, upper, tol: cfg.compat_tol });
    }
    Ok(())
}

/// Integrates the Robin problem from compatible data `u0` to `t_final`.
pub fn run(
    u0: &SolutionState,
    bc: &crate::domain::RobinBoundary,
    dom: &Interval1D,
    cfg: &SolverConfig,
    t_final: f64,
    output_times: &[f64],
) -> Result<Trajectory> {
    check_grid(u0, dom)?;
    require_compatible(u0, bc, dom, cfg)?;
    run_with_stencil(u0, bc, dom, cfg, t_final, output_times, &GhostNode, &SourceTerm::none(), Some(bc.p))
}

/// Integrates with an explicit stencil, source term and flux, skipping the
/// compatibility check. Used by the verification harness.
pub fn run_with_stencil(
    u0: &SolutionState,
    bc: &dyn LogFlux,
    dom: &Interval1D,
    cfg: &SolverConfig,
    t_final: f64,
    output_times: &[f64],
    stencil: &dyn LineStencil,
    src: &SourceTerm,
    blow_up_exponent: Option<f64>,
) -> Result<Trajectory> {
    check_grid(u0, dom)?;
    let model = LineModel::new(*dom, bc, stencil, src, blow_up_exponent);
    integrate::integrate(&model, u0, cfg, t_final, output_times)
}

/// Singular event read off a finished trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SingularEvent {
    None,
    BlowUp { t_est: f64 },
    BlowDown { t_est: f64 },
}

impl SingularEvent {
    pub fn t_est(&self) -> Option<f64> {
        match self {
            SingularEvent::None => None,
            SingularEvent::BlowUp { t_est } | SingularEvent::BlowDown { t_est } => Some(*t_est),
        }
    }
}

/// Classifies the run's end and extrapolates the singular time from the
/// last fifth of the per-step rows.
pub fn detect_singularity(traj: &Trajectory) -> Result<SingularEvent> {
    let kind = match traj.termination {
        Termination::BlowUp { .. } => SingularKind::BlowUp,
        Termination::BlowDown { .. } => SingularKind::BlowDown,
        _ => return Ok(SingularEvent::None),
    };
    let needed = integrate::MIN_ROWS_FOR_EXTRAPOLATION;
    if traj.rows.len() < needed {
        return Err(Error::InsufficientPoints { needed, got: traj.rows.len() });
    }
    let t_est = integrate::extrapolate_singular_time(&traj.rows, kind, traj.blow_up_exponent)
        .ok_or_else(|| Error::NotApplicable("singular quantity does not decrease over the fit window".into()))?;
    Ok(match kind {
        SingularKind::BlowUp => SingularEvent::BlowUp { t_est },
        SingularKind::BlowDown => SingularEvent::BlowDown { t_est },
    })
}

/// Manufactured solution `u* = 2 + sin(πx/l) e^{−t}` for order checks.
pub mod manufactured {
    use std::f64::consts::PI;

    use super::*;

    pub fn exact(x: f64, t: f64, l: f64) -> f64 {
        2.0 + (PI * x / l).sin() * (-t).exp()
    }

    /// The outward log-flux of `u*`, which is independent of `u`.
    #[derive(Debug, Clone, Copy)]
    pub struct ExactFlux {
        pub l: f64,
    }

    impl LogFlux for ExactFlux {
        fn log_flux(&self, side: Side, _w: f64, t: f64) -> (f64, f64) {
            // u*(±l) = 2 and ∂ₓu*(±l) = −(π/l)e^{−t} at both ends
            let dx_log = -(PI / self.l) * (-t).exp() / 2.0;
            let q = match side {
                Side::Upper => dx_log,
                Side::Lower => -dx_log,
            };
            (q, 0.0)
        }
    }

    /// `∂_t u* − ∂_xx log u*`.
    pub fn source(l: f64) -> SourceTerm {
        SourceTerm::new(move |x, t| {
            let k = PI / l;
            let e = (-t).exp();
            let u = 2.0 + (k * x).sin() * e;
            let ux = k * (k * x).cos() * e;
            let uxx = -k * k * (k * x).sin() * e;
            -(k * x).sin() * e - (uxx / u - (ux / u) * (ux / u))
        })
    }

    /// Max-norm error in `u` at `t_final` after fixed steps of size `dt`.
    pub fn error(n: usize, l: f64, t_final: f64, dt: f64, stencil: &dyn LineStencil) -> Result<f64> {
        let dom = Interval1D::new(l, n)?;
        let u0: Vec<f64> = dom.nodes().iter().map(|&x| exact(x, 0.0, l)).collect();
        let state = SolutionState::from_u(0.0, &u0)?;
        let cfg = SolverConfig {
            dt_init: dt,
            dt_min: dt * 1e-6,
            dt_max: dt,
            step_rel_change: 10.0,
            ..SolverConfig::default()
        };
        let src = source(l);
        let traj = run_with_stencil(&state, &ExactFlux { l }, &dom, &cfg, t_final, &[], stencil, &src, None)?;
        if traj.termination != Termination::ReachedFinal {
            return Err(Error::NotApplicable(format!("manufactured run ended with {}", traj.termination.name())));
        }
        let u = traj.final_state.u();
        Ok(dom
            .nodes()
            .iter()
            .zip(&u)
            .map(|(&x, v)| (v - exact(x, t_final, l)).abs())
            .fold(0.0, f64::max))
    }

    /// Observed orders `log2(e_k / e_{k+1})` between successive levels.
    pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
        errors.windows(2).map(|e| (e[0] / e[1]).log2()).collect()
    }

    /// Spatial study on `n = n0, 2n0−1, …` with `dt = h²` so the time error
    /// shrinks with the space error.
    pub fn spatial_errors(n0: usize, levels: usize, l: f64, t_final: f64, stencil: &dyn LineStencil) -> Result<Vec<f64>> {
        let mut dom = Interval1D::new(l, n0)?;
        let mut out = Vec::with_capacity(levels);
        for _ in 0..levels {
            let h = dom.spacing();
            out.push(error(dom.len(), l, t_final, h * h, stencil)?);
            dom = dom.refined();
        }
        Ok(out)
    }

    /// Temporal study at fixed fine grid, halving `dt` from `dt0`.
    pub fn temporal_errors(n: usize, dt0: f64, levels: usize, l: f64, t_final: f64) -> Result<Vec<f64>> {
        (0..levels)
            .map(|k| error(n, l, t_final, dt0 / f64::powi(2.0, k as i32), &GhostNode))
            .collect()
    }
}

/// Exact separable solutions used as oracles.
pub mod oracles {
    /// `u = (T − t)·2c²sech²(cx)`, the blow-down solution for `p = 1`,
    /// `γ = −c tanh(cl)`.
    pub fn sech2(x: f64, t: f64, c: f64, t_blow: f64) -> f64 {
        (t_blow - t) * 2.0 * c * c / (c * x).cosh().powi(2)
    }

    pub fn sech2_gamma(c: f64, l: f64) -> f64 {
        -c * (c * l).tanh()
    }
}
