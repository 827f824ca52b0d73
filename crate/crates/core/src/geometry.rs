//! Ricci-flow dictionary for rotationally symmetric metrics `g = u (dx² + dθ²)`
//! on the cylinder `[-l, l] × S¹`.
//!
//! Scalar curvature is `R = −(log u)_xx / u`, the boundary geodesic
//! curvature is `k = q / (2√u)` with `q` the outward log-flux, and Gauss–Bonnet
//! on the cylinder reads `∫R dA + 2∮k ds = 0`.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::{Interval1D, LogFlux, SolutionState};
use crate::error::{Error, Result};
use crate::integrate::DiagnosticRow;
use crate::solver1d::{end_fluxes, GhostNode, LineStencil};

/// Curvature and size of one state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometricDiagnostics {
    pub r: Vec<f64>,
    pub r_min: f64,
    pub r_max: f64,
    pub area: f64,
    pub length: f64,
    pub r_boundary: f64,
    pub gb_residual: f64,
}

/// Nodewise `R = −(∂_xx w)/u`, using the solver's stencil so that
/// `R = −(du/dt)/u` holds exactly at the discrete level.
pub fn curvature_field<B: LogFlux + ?Sized>(state: &SolutionState, bc: &B, dom: &Interval1D) -> Vec<f64> {
    curvature_with_stencil(state, bc, dom, &GhostNode)
}

pub fn curvature_with_stencil<B: LogFlux + ?Sized>(
    state: &SolutionState,
    bc: &B,
    dom: &Interval1D,
    stencil: &dyn LineStencil,
) -> Vec<f64> {
    let lw = crate::solver1d::apply_with_stencil(state, bc, dom, stencil);
    lw.iter().zip(&state.w).map(|(l, w)| -l * (-w).exp()).collect()
}

/// `2π ∫ u dx` by the trapezoid rule.
pub fn area(state: &SolutionState, dom: &Interval1D) -> f64 {
    2.0 * PI * dom.integrate(&state.u())
}

/// Total length `2π(√u(−l) + √u(l))` of both boundary circles.
pub fn boundary_length(state: &SolutionState, _dom: &Interval1D) -> f64 {
    let n = state.w.len();
    2.0 * PI * ((0.5 * state.w[0]).exp() + (0.5 * state.w[n - 1]).exp())
}

/// Intrinsic distance from a boundary circle to the middle circle, `½∫√u dx`.
pub fn intrinsic_half_length(state: &SolutionState, dom: &Interval1D) -> f64 {
    let s: Vec<f64> = state.w.iter().map(|w| (0.5 * w).exp()).collect();
    0.5 * dom.integrate(&s)
}

/// Boundary geodesic curvature `k = q/(2√u)` induced by an outward log-flux.
pub fn geodesic_curvature_from_flux(q: f64, w_boundary: f64) -> f64 {
    0.5 * q * (-0.5 * w_boundary).exp()
}

/// `∫R dA + 2∮k ds`. The boundary values of `R u` are reconstructed from
/// interior data by one-sided second differences, so the residual measures
/// the discretization error of the identity rather than an algebraic
/// cancellation in the shared boundary rows.
pub fn gauss_bonnet_residual<B: LogFlux + ?Sized>(state: &SolutionState, bc: &B, dom: &Interval1D) -> f64 {
    let lw = crate::solver1d::apply_log_diffusion(state, bc, dom);
    let (lo, hi) = end_fluxes(bc, &state.w, state.t);
    gb_from_parts(&state.w, &lw, dom, lo.0, hi.0)
}

fn gb_from_parts(w: &[f64], lw: &[f64], dom: &Interval1D, q_lo: f64, q_hi: f64) -> f64 {
    let n = w.len();
    let h = dom.spacing();
    let h2 = h * h;
    let mut ru: Vec<f64> = lw.iter().map(|v| -v).collect();
    ru[0] = -(w[0] - 2.0 * w[1] + w[2]) / h2;
    ru[n - 1] = -(w[n - 1] - 2.0 * w[n - 2] + w[n - 3]) / h2;
    let total = 2.0 * PI * dom.integrate(&ru);
    // 2∮k ds = 2 Σ_ends 2π k √u = 2π (q_lo + q_hi)
    total + 2.0 * PI * (q_lo + q_hi)
}

pub fn geometric_diagnostics<B: LogFlux + ?Sized>(state: &SolutionState, bc: &B, dom: &Interval1D) -> GeometricDiagnostics {
    let row = line_row(&state.w, state.t, bc, dom, &GhostNode);
    GeometricDiagnostics {
        r: curvature_field(state, bc, dom),
        r_min: row.r_min,
        r_max: row.r_max,
        area: row.area,
        length: row.length,
        r_boundary: row.r_boundary,
        gb_residual: row.gb_residual,
    }
}

pub(crate) fn line_row(
    w: &[f64],
    t: f64,
    bc: &(impl LogFlux + ?Sized),
    dom: &Interval1D,
    stencil: &dyn LineStencil,
) -> DiagnosticRow {
    let n = w.len();
    let h = dom.spacing();
    let (lo, hi) = end_fluxes(bc, w, t);
    let mut lw = vec![0.0; n];
    stencil.apply(w, h, lo, hi, &mut lw);
    let u: Vec<f64> = w.iter().map(|v| v.exp()).collect();
    let r: Vec<f64> = lw.iter().zip(&u).map(|(l, u)| -l / u).collect();
    let mass = dom.integrate(&u);
    let length = 2.0 * PI * (u[0].sqrt() + u[n - 1].sqrt());
    let minmax = |v: &[f64]| v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(*x), b.max(*x)));
    let (u_min, u_max) = minmax(&u);
    let (r_min, r_max) = minmax(&r);
    let (wxx_min, wxx_max) = minmax(&lw[1..n - 1]);
    DiagnosticRow {
        t,
        dt: 0.0,
        newton_iters: 0,
        u_min,
        u_max,
        mass,
        r_min,
        r_max,
        area: 2.0 * PI * mass,
        length,
        gb_residual: gb_from_parts(w, &lw, dom, lo.0, hi.0),
        wxx_min,
        wxx_max,
        mass_flux: lo.0 + hi.0,
        r_boundary: 2.0 * PI * (r[0] * u[0].sqrt() + r[n - 1] * u[n - 1].sqrt()) / length,
        total_curvature: -2.0 * PI * dom.integrate(&lw),
        u_boundary: u[n - 1],
    }
}

/// Outcome of the area–length comparison `A ≤ (2L/α) sinh(α ℓ)`, with `L`
/// the total boundary length and `ℓ` the intrinsic half-length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreaLengthReport {
    pub holds: bool,
    /// Right-hand side minus area.
    pub slack: f64,
    /// Whether `|k| ≤ α` at both boundary circles.
    pub curvature_bounded: bool,
}

/// Checks the area–length inequality. Not applicable when the curvature is
/// negative somewhere beyond an `h²` allowance.
pub fn area_length_check<B: LogFlux + ?Sized>(
    state: &SolutionState,
    bc: &B,
    dom: &Interval1D,
    alpha: f64,
) -> Result<AreaLengthReport> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!("alpha must be positive, got {alpha}")));
    }
    let r = curvature_field(state, bc, dom);
    let h = dom.spacing();
    if let Some(i) = r.iter().position(|v| *v < -h * h) {
        return Err(Error::NotApplicable(format!("curvature {:e} < 0 at x = {}", r[i], dom.node(i))));
    }
    let n = state.w.len();
    let (lo, hi) = end_fluxes(bc, &state.w, state.t);
    let k_lo = geodesic_curvature_from_flux(lo.0, state.w[0]);
    let k_hi = geodesic_curvature_from_flux(hi.0, state.w[n - 1]);
    let a = area(state, dom);
    let rhs = 2.0 * boundary_length(state, dom) / alpha * (alpha * intrinsic_half_length(state, dom)).sinh();
    Ok(AreaLengthReport {
        holds: a <= rhs,
        slack: rhs - a,
        curvature_bounded: k_lo.abs() <= alpha && k_hi.abs() <= alpha,
    })
}

/// Upper envelope `B/(1 − Bt)` for the maximal curvature when `B < 0`.
pub fn curvature_envelope(b: f64, t: f64) -> f64 {
    b / (1.0 - b * t)
}

/// Whether `R` is non-increasing from the middle node outwards on both halves.
pub fn curvature_decreasing_from_middle(r: &[f64]) -> bool {
    let mid = r.len() / 2;
    r[mid..].windows(2).all(|p| p[1] <= p[0]) && r[..=mid].windows(2).all(|p| p[0] <= p[1])
}

/// Warped-product metric `dx² + f(x)² dθ²` on `[-l, l] × S¹`.
#[derive(Clone)]
pub struct MetricProfile {
    pub f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub l: f64,
}

impl std::fmt::Debug for MetricProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MetricProfile").field("l", &self.l).finish_non_exhaustive()
    }
}

impl MetricProfile {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static, l: f64) -> Self {
        Self { f: Arc::new(f), l }
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }
}

/// Half-length used for the example metric run.
pub const EXAMPLE_HALF_LENGTH: f64 = 0.74013;

/// `f(x) = cos x − x²/4`, with derivatives up to third order.
pub mod example {
    pub fn f(x: f64) -> f64 {
        x.cos() - 0.25 * x * x
    }
    pub fn df(x: f64) -> f64 {
        -x.sin() - 0.5 * x
    }
    pub fn d2f(x: f64) -> f64 {
        -x.cos() - 0.5
    }
    pub fn d3f(x: f64) -> f64 {
        x.sin()
    }

    /// `R = −2f''/f`.
    pub fn curvature(x: f64) -> f64 {
        -2.0 * d2f(x) / f(x)
    }

    /// `∂R/∂N − kR` at `x = l` with `k = f'/f`.
    pub fn compatibility_defect(l: f64) -> f64 {
        let (f0, f1, f2, f3) = (f(l), df(l), d2f(l), d3f(l));
        let dr = -2.0 * (f3 * f0 - f2 * f1) / (f0 * f0);
        dr - (f1 / f0) * curvature(l)
    }
}

pub fn example_profile() -> MetricProfile {
    MetricProfile::new(example::f, EXAMPLE_HALF_LENGTH)
}

/// Bisection for a sign change of `g` on `[lo, hi]` down to `tol`.
pub fn bisect(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let (mut g_lo, g_hi) = (g(lo), g(hi));
    if g_lo == 0.0 {
        return Ok(lo);
    }
    if g_hi == 0.0 {
        return Ok(hi);
    }
    if g_lo.signum() == g_hi.signum() || !g_lo.is_finite() || !g_hi.is_finite() {
        return Err(Error::NoSignChange { lo, hi });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let g_mid = g(mid);
        if g_mid == 0.0 {
            return Ok(mid);
        }
        if g_mid.signum() == g_lo.signum() {
            lo = mid;
            g_lo = g_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Half-length at which the example metric satisfies `∂R/∂N = kR` on its
/// boundary, searched on `(0.5, 1.0)`.
pub fn find_compatible_length() -> Result<f64> {
    bisect(example::compatibility_defect, 0.5, 1.0, 1e-8)
}

/// Rewrites `dx² + f² dθ²` as `u (dy² + dθ²)` with `dy = dx/f`, so `u = f²`
/// in the new coordinate. Returns the conformal grid (centered, `n` nodes)
/// and the state on it.
pub fn profile_to_conformal(mp: &MetricProfile, n: usize) -> Result<(Interval1D, SolutionState)> {
    let l = mp.l;
    const M: usize = 4096;
    let hx = 2.0 * l / M as f64;
    for k in 0..=M {
        let x = -l + hx * k as f64;
        let v = mp.eval(x);
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::DegenerateProfile(x));
        }
    }
    // conformal length by composite Simpson
    let mut y_len = 0.0;
    for k in 0..=M {
        let x = -l + hx * k as f64;
        let c = if k == 0 || k == M { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
        y_len += c / mp.eval(x);
    }
    y_len *= hx / 3.0;
    let dom = Interval1D::new(0.5 * y_len, n)?;

    // x(y) from dx/dy = f(x), RK4 with substeps
    let sub = 16;
    let hy = dom.spacing() / sub as f64;
    let mut x = -l;
    let mut xs = Vec::with_capacity(n);
    xs.push(x);
    for _ in 1..n {
        for _ in 0..sub {
            let k1 = mp.eval(x);
            let k2 = mp.eval(x + 0.5 * hy * k1);
            let k3 = mp.eval(x + 0.5 * hy * k2);
            let k4 = mp.eval(x + hy * k3);
            x += hy / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        xs.push(x);
    }
    let u: Vec<f64> = xs.iter().map(|&x| mp.eval(x.clamp(-l, l)).powi(2)).collect();
    Ok((dom, SolutionState::from_u(0.0, &u)?))
}
