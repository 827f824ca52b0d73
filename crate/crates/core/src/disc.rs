//! Radially symmetric problem `u_t = Δ log u` on the disc of radius `a`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::domain::{correct_collar, one_sided_outward_derivative, LogFlux, RobinBoundary, Side, SolutionState, SolverConfig};
use crate::error::{Error, Result};
use crate::integrate::{self, DiagnosticRow, ImplicitModel, Trajectory};
use crate::tridiag;

/// Nodes `r_i = i h`, `h = a/(n−1)`, origin included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    a: f64,
    n: usize,
}

impl RadialGrid {
    pub fn new(a: f64, n: usize) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::InvalidDomain(format!("radius must be positive, got {a}")));
        }
        if n < 3 {
            return Err(Error::InvalidDomain(format!("need at least 3 nodes, got {n}")));
        }
        Ok(Self { a, n })
    }

    pub fn radius(&self) -> f64 {
        self.a
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.a / (self.n - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        self.a * (i as f64 / (self.n - 1) as f64)
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }

    pub fn refined(&self) -> Self {
        Self { a: self.a, n: 2 * self.n - 1 }
    }

    /// Control-volume weights `∫ r dr` over each node's cell, so that
    /// `2π Σ W u` is the area.
    pub fn weights(&self) -> Vec<f64> {
        let h = self.spacing();
        let mut w: Vec<f64> = self.nodes().iter().map(|r| r * h).collect();
        w[0] = h * h / 8.0;
        w[self.n - 1] = boundary_cell(self.a, h);
        w
    }
}

/// Boundary data at `r = a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiscBoundary {
    /// `∂_r u = 2γ uᵖ`
    Robin(RobinBoundary),
    /// Boundary geodesic curvature `β`: `∂_r u = (2β√u − 2/a) u`.
    Curvature { beta: f64, a: f64 },
}

impl LogFlux for DiscBoundary {
    fn log_flux(&self, side: Side, w: f64, t: f64) -> (f64, f64) {
        match self {
            DiscBoundary::Robin(bc) => bc.log_flux(side, w, t),
            DiscBoundary::Curvature { beta, a } => {
                let s = beta * (0.5 * w).exp();
                (2.0 * s - 2.0 / a, s)
            }
        }
    }
}

impl DiscBoundary {
    fn exponent(&self) -> Option<f64> {
        match self {
            DiscBoundary::Robin(bc) => Some(bc.p),
            DiscBoundary::Curvature { .. } => None,
        }
    }
}

fn boundary_cell(a: f64, h: f64) -> f64 {
    (a - 0.25 * h) * h / 2.0
}

fn radial_operator(w: &[f64], h: f64, q: f64, out: &mut [f64]) {
    let n = w.len();
    let a = h * (n - 1) as f64;
    let h2 = h * h;
    out[0] = 4.0 * (w[1] - w[0]) / h2;
    for i in 1..n - 1 {
        let r = i as f64 * h;
        out[i] = ((r + 0.5 * h) * (w[i + 1] - w[i]) - (r - 0.5 * h) * (w[i] - w[i - 1])) / (r * h2);
    }
    // the half cell [a − h/2, a] closed by the exact flux a·q at r = a
    out[n - 1] = (a * q - (a - 0.5 * h) * (w[n - 1] - w[n - 2]) / h) / boundary_cell(a, h);
}

fn radial_jacobian(n: usize, h: f64, dq: f64, sub: &mut [f64], diag: &mut [f64], sup: &mut [f64]) {
    let a = h * (n - 1) as f64;
    let h2 = h * h;
    diag[0] = -4.0 / h2;
    sup[0] = 4.0 / h2;
    for i in 1..n - 1 {
        let r = i as f64 * h;
        sub[i - 1] = (r - 0.5 * h) / (r * h2);
        sup[i] = (r + 0.5 * h) / (r * h2);
        diag[i] = -2.0 / h2;
    }
    let cell = boundary_cell(a, h);
    sub[n - 2] = (a - 0.5 * h) / (h * cell);
    diag[n - 1] = (a * dq - (a - 0.5 * h) / h) / cell;
}

/// Discrete `du/dt = (1/r)∂_r(r ∂_r log u)`: the symmetry row at the origin,
/// central rows inside, and at `r = a` a half-cell balance in which the
/// Robin relation replaces the unknown outer derivative.
pub fn apply_radial_log_diffusion(state: &SolutionState, bcd: &DiscBoundary, grid: &RadialGrid) -> Vec<f64> {
    let n = state.w.len();
    let (q, _) = bcd.log_flux(Side::Upper, state.w[n - 1], state.t);
    let mut out = vec![0.0; n];
    radial_operator(&state.w, grid.spacing(), q, &mut out);
    out
}

/// `8(T − t)/(1 + r²)²`, a shrinking round hemisphere.
pub fn hemisphere_oracle(r: f64, t: f64, t_blow: f64) -> f64 {
    8.0 * (t_blow - t) / (1.0 + r * r).powi(2)
}

/// `∂_r log u₀(a) − q(u₀(a))` with a one-sided second-order derivative.
pub fn disc_compatibility_residual(state: &SolutionState, bcd: &DiscBoundary, grid: &RadialGrid) -> f64 {
    let n = state.w.len();
    one_sided_outward_derivative(&state.w, grid.spacing(), Side::Upper) - bcd.log_flux(Side::Upper, state.w[n - 1], state.t).0
}

/// Collar correction near `r = a`; see
/// [`crate::domain::make_compatible_initial_data`].
pub fn make_compatible_disc(profile: &[f64], bcd: &DiscBoundary, grid: &RadialGrid, blend_width: f64) -> Result<SolutionState> {
    if profile.len() != grid.len() {
        return Err(Error::InvalidArgument(format!("profile has {} values, grid has {} nodes", profile.len(), grid.len())));
    }
    if blend_width >= grid.radius() {
        return Err(Error::CollarTooWide { width: blend_width, half_length: grid.radius() });
    }
    let h = grid.spacing();
    if !(blend_width >= 2.0 * h) {
        return Err(Error::InvalidArgument(format!("collar width {blend_width} must cover at least two cells (h = {h})")));
    }
    let mut state = SolutionState::from_u(0.0, profile)?;
    correct_collar(&mut state.w, h, blend_width, Side::Upper, |wb| bcd.log_flux(Side::Upper, wb, 0.0).0);
    Ok(state)
}

struct DiscModel<'a> {
    grid: RadialGrid,
    bcd: &'a DiscBoundary,
    weights: Vec<f64>,
}

impl ImplicitModel for DiscModel<'_> {
    fn size(&self) -> usize {
        self.grid.len()
    }

    fn rate(&self, w: &[f64], t: f64, out: &mut [f64]) {
        let (q, _) = self.bcd.log_flux(Side::Upper, w[w.len() - 1], t);
        radial_operator(w, self.grid.spacing(), q, out);
    }

    fn solve_linearized(&self, w: &[f64], t: f64, dt: f64, rhs: &[f64], delta: &mut [f64]) -> bool {
        let n = w.len();
        let (_, dq) = self.bcd.log_flux(Side::Upper, w[n - 1], t);
        let (mut sub, mut diag, mut sup) = (vec![0.0; n - 1], vec![0.0; n], vec![0.0; n - 1]);
        radial_jacobian(n, self.grid.spacing(), dq, &mut sub, &mut diag, &mut sup);
        for i in 0..n {
            diag[i] = w[i].exp() - dt * diag[i];
        }
        sub.iter_mut().for_each(|v| *v *= -dt);
        sup.iter_mut().for_each(|v| *v *= -dt);
        delta.copy_from_slice(rhs);
        tridiag::solve_in_place(&mut sub, &mut diag, &mut sup, delta)
    }

    fn diagnostics(&self, w: &[f64], t: f64) -> DiagnosticRow {
        disc_row(w, t, self.bcd, &self.grid, &self.weights)
    }

    fn quadrature_weights(&self) -> Vec<f64> {
        self.weights.clone()
    }

    fn blow_up_exponent(&self) -> Option<f64> {
        self.bcd.exponent()
    }
}

fn disc_row(w: &[f64], t: f64, bcd: &DiscBoundary, grid: &RadialGrid, weights: &[f64]) -> DiagnosticRow {
    let n = w.len();
    let h = grid.spacing();
    let a = grid.radius();
    let (q, _) = bcd.log_flux(Side::Upper, w[n - 1], t);
    let mut lw = vec![0.0; n];
    radial_operator(w, h, q, &mut lw);
    let u: Vec<f64> = w.iter().map(|v| v.exp()).collect();
    let r: Vec<f64> = lw.iter().zip(&u).map(|(l, u)| -l / u).collect();
    let minmax = |v: &[f64]| v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(x, y), z| (x.min(*z), y.max(*z)));
    let (u_min, u_max) = minmax(&u);
    let (r_min, r_max) = minmax(&r);
    let (wxx_min, wxx_max) = minmax(&lw[..n - 1]);
    let area = 2.0 * PI * weights.iter().zip(&u).map(|(c, u)| c * u).sum::<f64>();
    let total_curvature = -2.0 * PI * weights.iter().zip(&lw).map(|(c, l)| c * l).sum::<f64>();
    // Gauss–Bonnet with χ(disc) = 1 and ∮k ds = 2π + π a q; the rim value of
    // Δ log u is rebuilt from one-sided differences (the shared row would
    // make the identity exact by construction)
    let rim = (w[n - 1] - 2.0 * w[n - 2] + w[n - 3]) / (h * h) + one_sided_outward_derivative(w, h, Side::Upper) / a;
    let rebuilt = total_curvature - 2.0 * PI * weights[n - 1] * (rim - lw[n - 1]);
    let gb_residual = rebuilt + 2.0 * (2.0 * PI + PI * a * q) - 4.0 * PI;
    DiagnosticRow {
        t,
        dt: 0.0,
        newton_iters: 0,
        u_min,
        u_max,
        mass: area,
        r_min,
        r_max,
        area,
        length: 2.0 * PI * a * u[n - 1].sqrt(),
        gb_residual,
        wxx_min,
        wxx_max,
        mass_flux: 2.0 * PI * a * q,
        r_boundary: r[n - 1],
        total_curvature,
        u_boundary: u[n - 1],
    }
}

/// Integrates the disc problem from compatible data. The row `mass` is the
/// area `2π∫u r dr`.
pub fn run_disc(
    u0: &SolutionState,
    bcd: &DiscBoundary,
    grid: &RadialGrid,
    cfg: &SolverConfig,
    t_final: f64,
    output_times: &[f64],
) -> Result<Trajectory> {
    if u0.w.len() != grid.len() {
        return Err(Error::InvalidArgument(format!("state has {} values, grid has {} nodes", u0.w.len(), grid.len())));
    }
    let res = disc_compatibility_residual(u0, bcd, grid);
    if !(res.abs() < cfg.compat_tol) {
        return Err(Error::Incompatible { lower: 0.0, upper: res, tol: cfg.compat_tol });
    }
    let model = DiscModel { grid: *grid, bcd, weights: grid.weights() };
    integrate::integrate(&model, u0, cfg, t_final, output_times)
}
