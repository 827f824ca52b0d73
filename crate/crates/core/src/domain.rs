//! Grid, boundary and configuration types shared by every solver, plus the
//! compatibility-condition utilities.
//!
//! The unknown is always stored as `w = log u`, so positivity of `u` is
//! structural. In these variables the Robin condition
//! `∂ₓu(±l) = ±2γ uᵖ(±l)` reads `∂_η w = 2γ e^{(p−1)w}` with `η` the
//! outward normal.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid on `[-l, l]` with `n` nodes, both end points included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval1D {
    l: f64,
    n: usize,
}

impl Interval1D {
    pub fn new(l: f64, n: usize) -> Result<Self> {
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::InvalidDomain(format!("half-length must be positive, got {l}")));
        }
        if n < 3 {
            return Err(Error::InvalidDomain(format!("need at least 3 nodes, got {n}")));
        }
        Ok(Self { l, n })
    }

    pub fn half_length(&self) -> f64 {
        self.l
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.l / (self.n - 1) as f64
    }

    /// Node `i`; written so that the last node lands on `+l` exactly.
    pub fn node(&self, i: usize) -> f64 {
        -self.l + 2.0 * self.l * (i as f64 / (self.n - 1) as f64)
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }

    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let h = self.spacing();
        let mut wts = vec![h; self.n];
        wts[0] = 0.5 * h;
        wts[self.n - 1] = 0.5 * h;
        wts
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.n);
        let h = self.spacing();
        let inner: f64 = values[1..self.n - 1].iter().sum();
        h * (inner + 0.5 * (values[0] + values[self.n - 1]))
    }

    /// Grid with half the spacing; every old node is kept.
    pub fn refined(&self) -> Self {
        Self { l: self.l, n: 2 * self.n - 1 }
    }
}

/// Which end of a one-dimensional domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    /// `x = -l` (or the inner end of a radial grid).
    Lower,
    /// `x = +l` (or `r = a`).
    Upper,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Lower, Side::Upper];
}

/// Boundary data expressed as the outward normal derivative of `w = log u`.
///
/// Implementors return the flux and its derivative with respect to the
/// boundary value of `w`; the latter feeds the Newton Jacobian.
pub trait LogFlux: Send + Sync {
    fn log_flux(&self, side: Side, w: f64, t: f64) -> (f64, f64);
}

/// The nonlinear Robin condition `∂_η u = 2γ uᵖ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobinBoundary {
    pub gamma: f64,
    pub p: f64,
}

impl RobinBoundary {
    pub fn new(gamma: f64, p: f64) -> Result<Self> {
        if !gamma.is_finite() || !p.is_finite() {
            return Err(Error::InvalidArgument(format!("non-finite Robin data (gamma={gamma}, p={p})")));
        }
        Ok(Self { gamma, p })
    }

    /// Geodesic curvature `γ u^{p−3/2}` induced at a boundary point with value `u`.
    pub fn geodesic_curvature(&self, u: f64) -> f64 {
        self.gamma * u.powf(self.p - 1.5)
    }
}

impl LogFlux for RobinBoundary {
    fn log_flux(&self, _side: Side, w: f64, _t: f64) -> (f64, f64) {
        let q = 2.0 * self.gamma * ((self.p - 1.0) * w).exp();
        (q, (self.p - 1.0) * q)
    }
}

/// Grid values of `w = log u` at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionState {
    pub t: f64,
    pub w: Vec<f64>,
}

impl SolutionState {
    pub fn from_log(t: f64, w: Vec<f64>) -> Result<Self> {
        if let Some(i) = w.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInitialData(format!("log value at node {i} is not finite")));
        }
        Ok(Self { t, w })
    }

    pub fn from_u(t: f64, u: &[f64]) -> Result<Self> {
        if let Some(i) = u.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidInitialData(format!("u[{i}] = {} is not positive", u[i])));
        }
        Ok(Self { t, w: u.iter().map(|v| v.ln()).collect() })
    }

    pub fn u(&self) -> Vec<f64> {
        self.w.iter().map(|w| w.exp()).collect()
    }

    pub fn u_min(&self) -> f64 {
        self.w.iter().copied().fold(f64::INFINITY, f64::min).exp()
    }

    pub fn u_max(&self) -> f64 {
        self.w.iter().copied().fold(f64::NEG_INFINITY, f64::max).exp()
    }
}

/// Time-stepping and event-detection parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    /// Newton stops once `max |F_i| / u_i` falls below this.
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Largest accepted per-step relative change of `u` at any node.
    pub step_rel_change: f64,
    pub blow_up_threshold: f64,
    pub blow_down_threshold: f64,
    /// Largest compatibility residual accepted for initial data.
    pub compat_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt_init: 1e-4,
            dt_min: 1e-14,
            dt_max: 1e-2,
            newton_tol: 1e-10,
            newton_max_iter: 30,
            step_rel_change: 0.1,
            blow_up_threshold: 1e10,
            blow_down_threshold: 1e-10,
            compat_tol: 1e-6,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt_init && self.dt_init <= self.dt_max) {
            return bad(format!(
                "need 0 < dt_min <= dt_init <= dt_max, got {} / {} / {}",
                self.dt_min, self.dt_init, self.dt_max
            ));
        }
        if !(self.newton_tol > 0.0) || self.newton_max_iter == 0 {
            return bad("Newton tolerance and iteration cap must be positive".into());
        }
        if !(self.step_rel_change > 0.0) {
            return bad("step_rel_change must be positive".into());
        }
        if !(self.blow_down_threshold > 0.0 && self.blow_down_threshold < 1.0 && self.blow_up_threshold > 1.0) {
            return bad(format!(
                "need 0 < blow_down_threshold < 1 < blow_up_threshold, got {} / {}",
                self.blow_down_threshold, self.blow_up_threshold
            ));
        }
        if !(self.compat_tol > 0.0) {
            return bad("compat_tol must be positive".into());
        }
        Ok(())
    }
}

/// Second-order one-sided outward derivative of `w` at the given end of a
/// uniform grid with spacing `h`.
pub(crate) fn one_sided_outward_derivative(w: &[f64], h: f64, side: Side) -> f64 {
    let n = w.len();
    match side {
        Side::Upper => (3.0 * w[n - 1] - 4.0 * w[n - 2] + w[n - 3]) / (2.0 * h),
        Side::Lower => (3.0 * w[0] - 4.0 * w[1] + w[2]) / (2.0 * h),
    }
}

/// Residuals `∂_η log u₀ − 2γ u₀^{p−1}` at `(−l, +l)`, with the outward
/// derivative taken by three-point one-sided differences.
pub fn compatibility_residual<B: LogFlux + ?Sized>(state: &SolutionState, bc: &B, dom: &Interval1D) -> (f64, f64) {
    let h = dom.spacing();
    let n = state.w.len();
    let r = |side: Side, wb: f64| one_sided_outward_derivative(&state.w, h, side) - bc.log_flux(side, wb, state.t).0;
    (r(Side::Lower, state.w[0]), r(Side::Upper, state.w[n - 1]))
}

/// Smooth transition from 0 (at `s <= 0`) to 1 (at `s >= 1`) with all
/// derivatives vanishing at both ends.
fn smooth_step(s: f64) -> f64 {
    let bump = |x: f64| if x > 0.0 { (-1.0 / x).exp() } else { 0.0 };
    let a = bump(s);
    let b = bump(1.0 - s);
    if a + b == 0.0 {
        0.0
    } else {
        a / (a + b)
    }
}

/// Adds `κ·d(x)·χ(x)` to `w` near the end `side`, where `d` is the signed
/// outward distance to the boundary (zero at the boundary node) and `χ`
/// blends from 0 at the collar's inner edge to 1 at the boundary. The value
/// at the boundary node is untouched, so the Robin target is fixed and `κ`
/// follows from one linear equation.
pub(crate) fn correct_collar(
    w: &mut [f64],
    h: f64,
    width: f64,
    side: Side,
    target: impl Fn(f64) -> f64,
) {
    let n = w.len();
    let shape: Vec<f64> = (0..n)
        .map(|k| {
            // distance measured from the boundary node along the grid
            let d = match side {
                Side::Upper => (n - 1 - k) as f64 * h,
                Side::Lower => k as f64 * h,
            };
            if d >= width {
                0.0
            } else {
                -d * smooth_step(1.0 - d / width)
            }
        })
        .collect();
    let wb = match side {
        Side::Upper => w[n - 1],
        Side::Lower => w[0],
    };
    let goal = target(wb);
    let current = one_sided_outward_derivative(w, h, side);
    let slope = one_sided_outward_derivative(&shape, h, side);
    let kappa = (goal - current) / slope;
    for (wk, sk) in w.iter_mut().zip(&shape) {
        *wk += kappa * sk;
    }
}

/// Builds initial data satisfying the compatibility condition by correcting
/// `log u` inside boundary collars of width `blend_width`; the profile is
/// unchanged elsewhere.
pub fn make_compatible_initial_data<B: LogFlux + ?Sized>(
    profile: &[f64],
    bc: &B,
    dom: &Interval1D,
    blend_width: f64,
) -> Result<SolutionState> {
    if profile.len() != dom.len() {
        return Err(Error::InvalidArgument(format!(
            "profile has {} values, grid has {} nodes",
            profile.len(),
            dom.len()
        )));
    }
    if blend_width >= dom.half_length() {
        return Err(Error::CollarTooWide { width: blend_width, half_length: dom.half_length() });
    }
    let h = dom.spacing();
    if !(blend_width >= 2.0 * h) {
        return Err(Error::InvalidArgument(format!(
            "collar width {blend_width} must cover at least two cells (h = {h})"
        )));
    }
    let mut state = SolutionState::from_u(0.0, profile)?;
    for side in Side::BOTH {
        correct_collar(&mut state.w, h, blend_width, side, |wb| bc.log_flux(side, wb, 0.0).0);
    }
    Ok(state)
}
