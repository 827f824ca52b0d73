//! Two-variable problem on `[-l, l] × S¹` with boundary geodesic curvature
//! `φ(±l, θ, t)`, i.e. `∂_η u = 2φ u^{3/2}`.
//!
//! States are flattened θ-line by θ-line: node `(i, j)` (axial `i`,
//! angular `j`) sits at index `j·nx + i`.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::{correct_collar, one_sided_outward_derivative, Interval1D, RobinBoundary, Side, SolutionState, SolverConfig};
use crate::error::{Error, Result};
use crate::integrate::{self, DiagnosticRow, ImplicitModel, Termination, Trajectory};
use crate::krylov;
use crate::solver1d::{self, GhostNode, LineStencil};
use crate::tridiag;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CylinderGrid {
    l: f64,
    nx: usize,
    ntheta: usize,
}

impl CylinderGrid {
    pub fn new(l: f64, nx: usize, ntheta: usize) -> Result<Self> {
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::InvalidDomain(format!("half-length must be positive, got {l}")));
        }
        if nx < 3 || ntheta < 4 {
            return Err(Error::InvalidDomain(format!("need nx >= 3 and ntheta >= 4, got {nx} x {ntheta}")));
        }
        Ok(Self { l, nx, ntheta })
    }

    pub fn half_length(&self) -> f64 {
        self.l
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ntheta(&self) -> usize {
        self.ntheta
    }
    pub fn len(&self) -> usize {
        self.nx * self.ntheta
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn hx(&self) -> f64 {
        2.0 * self.l / (self.nx - 1) as f64
    }
    pub fn htheta(&self) -> f64 {
        2.0 * PI / self.ntheta as f64
    }
    pub fn theta(&self, j: usize) -> f64 {
        self.htheta() * j as f64
    }
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }
    pub fn line(&self) -> Interval1D {
        Interval1D::new(self.l, self.nx).expect("grid already validated")
    }
}

type PhiFn = dyn Fn(Side, f64, f64) -> f64 + Send + Sync;

/// Boundary geodesic curvature `φ(side, θ, t)` and a bound `M_φ` valid on
/// the time range of interest.
#[derive(Clone)]
pub struct BoundaryCurvature {
    phi: Arc<PhiFn>,
    pub bound: f64,
}

impl std::fmt::Debug for BoundaryCurvature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BoundaryCurvature").field("bound", &self.bound).finish_non_exhaustive()
    }
}

impl BoundaryCurvature {
    pub fn new(phi: impl Fn(Side, f64, f64) -> f64 + Send + Sync + 'static, bound: f64) -> Self {
        Self { phi: Arc::new(phi), bound }
    }

    pub fn constant(gamma: f64) -> Self {
        Self::new(move |_, _, _| gamma, gamma.abs())
    }

    /// `0.5 + 0.25 sin θ cos t` on both circles.
    pub fn oscillating() -> Self {
        Self::new(|_, theta, t| 0.5 + 0.25 * theta.sin() * t.cos(), 0.75)
    }

    /// The same data rotated by `shift` in θ.
    pub fn rotated(&self, shift: f64) -> Self {
        let inner = self.phi.clone();
        Self { phi: Arc::new(move |s, th, t| inner(s, th - shift, t)), bound: self.bound }
    }

    pub fn eval(&self, side: Side, theta: f64, t: f64) -> f64 {
        (self.phi)(side, theta, t)
    }

    /// Extremes of `φ` over grid angles, both sides and `t ∈ [0, t_final]`
    /// sampled every `dt`.
    pub fn sampled_range(&self, grid: &CylinderGrid, t_final: f64, dt: f64) -> (f64, f64) {
        let steps = (t_final / dt).ceil().max(1.0) as usize;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for k in 0..=steps {
            let t = (k as f64 * dt).min(t_final);
            for j in 0..grid.ntheta() {
                for side in Side::BOTH {
                    let v = self.eval(side, grid.theta(j), t);
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
        }
        (lo, hi)
    }
}

fn flux(phi: f64, w: f64) -> (f64, f64) {
    let s = phi * (0.5 * w).exp();
    (2.0 * s, s)
}

struct CylinderModel<'a> {
    grid: CylinderGrid,
    phi: &'a BoundaryCurvature,
    weights_x: Vec<f64>,
}

impl CylinderModel<'_> {
    fn line_fluxes(&self, w: &[f64], j: usize, t: f64) -> ((f64, f64), (f64, f64)) {
        let nx = self.grid.nx();
        let th = self.grid.theta(j);
        let base = j * nx;
        (
            flux(self.phi.eval(Side::Lower, th, t), w[base]),
            flux(self.phi.eval(Side::Upper, th, t), w[base + nx - 1]),
        )
    }

    fn theta_laplacian(&self, w: &[f64], out: &mut [f64], scale: f64) {
        let (nx, nt) = (self.grid.nx(), self.grid.ntheta());
        let c = scale / self.grid.htheta().powi(2);
        for j in 0..nt {
            let (jm, jp) = ((j + nt - 1) % nt, (j + 1) % nt);
            for i in 0..nx {
                out[j * nx + i] += c * (w[jm * nx + i] - 2.0 * w[j * nx + i] + w[jp * nx + i]);
            }
        }
    }

    fn x_part(&self, w: &[f64], t: f64, out: &mut [f64]) {
        let nx = self.grid.nx();
        let hx = self.grid.hx();
        for j in 0..self.grid.ntheta() {
            let (lo, hi) = self.line_fluxes(w, j, t);
            let r = j * nx..(j + 1) * nx;
            GhostNode.apply(&w[r.clone()], hx, lo, hi, &mut out[r]);
        }
    }
}

impl ImplicitModel for CylinderModel<'_> {
    fn size(&self) -> usize {
        self.grid.len()
    }

    fn rate(&self, w: &[f64], t: f64, out: &mut [f64]) {
        self.x_part(w, t, out);
        self.theta_laplacian(w, out, 1.0);
    }

    fn solve_linearized(&self, w: &[f64], t: f64, dt: f64, rhs: &[f64], delta: &mut [f64]) -> bool {
        let (nx, nt) = (self.grid.nx(), self.grid.ntheta());
        let hx = self.grid.hx();
        let ct = 1.0 / self.grid.htheta().powi(2);
        // per-line tridiagonal blocks of diag(e^w) − dt (J_x − 2/hθ²)
        let mut blocks = Vec::with_capacity(nt);
        for j in 0..nt {
            let (lo, hi) = self.line_fluxes(w, j, t);
            let r = j * nx..(j + 1) * nx;
            let (mut sub, mut diag, mut sup) = (vec![0.0; nx - 1], vec![0.0; nx], vec![0.0; nx - 1]);
            GhostNode.jacobian(&w[r.clone()], hx, lo, hi, &mut sub, &mut diag, &mut sup);
            for (i, k) in r.enumerate() {
                diag[i] = w[k].exp() - dt * (diag[i] - 2.0 * ct);
            }
            sub.iter_mut().for_each(|v| *v *= -dt);
            sup.iter_mut().for_each(|v| *v *= -dt);
            blocks.push((sub, diag, sup));
        }
        let apply = |x: &[f64], y: &mut [f64]| {
            for j in 0..nt {
                let (sub, diag, sup) = &blocks[j];
                let r = j * nx..(j + 1) * nx;
                let line = tridiag::matvec(sub, diag, sup, &x[r.clone()]);
                y[r].copy_from_slice(&line);
            }
            // off-line θ couplings: −dt·(x_{j±1})/hθ²
            for j in 0..nt {
                let (jm, jp) = ((j + nt - 1) % nt, (j + 1) % nt);
                for i in 0..nx {
                    y[j * nx + i] -= dt * ct * (x[jm * nx + i] + x[jp * nx + i]);
                }
            }
        };
        let precond = |r: &[f64], z: &mut [f64]| {
            for j in 0..nt {
                let (sub, diag, sup) = &blocks[j];
                let range = j * nx..(j + 1) * nx;
                let mut b = r[range.clone()].to_vec();
                let ok = tridiag::solve_in_place(&mut sub.clone(), &mut diag.clone(), &mut sup.clone(), &mut b);
                if ok {
                    z[range].copy_from_slice(&b);
                } else {
                    z[range].copy_from_slice(&r[j * nx..(j + 1) * nx]);
                }
            }
        };
        delta.iter_mut().for_each(|d| *d = 0.0);
        let out = krylov::bicgstab(apply, precond, rhs, delta, 1e-12, 500);
        out.converged && delta.iter().all(|v| v.is_finite())
    }

    fn diagnostics(&self, w: &[f64], t: f64) -> DiagnosticRow {
        cylinder_row(self, w, t)
    }

    fn quadrature_weights(&self) -> Vec<f64> {
        let ht = self.grid.htheta();
        let mut out = Vec::with_capacity(self.grid.len());
        for _ in 0..self.grid.ntheta() {
            out.extend(self.weights_x.iter().map(|c| c * ht / (2.0 * PI)));
        }
        out
    }

    fn blow_up_exponent(&self) -> Option<f64> {
        Some(1.5)
    }
}

fn cylinder_row(model: &CylinderModel<'_>, w: &[f64], t: f64) -> DiagnosticRow {
    let g = &model.grid;
    let (nx, nt) = (g.nx(), g.ntheta());
    let (hx, ht) = (g.hx(), g.htheta());
    let mut lw = vec![0.0; w.len()];
    model.rate(w, t, &mut lw);
    let u: Vec<f64> = w.iter().map(|v| v.exp()).collect();
    let mut row = DiagnosticRow { t, ..Default::default() };
    row.u_min = u.iter().copied().fold(f64::INFINITY, f64::min);
    row.u_max = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    row.r_min = f64::INFINITY;
    row.r_max = f64::NEG_INFINITY;
    row.wxx_min = f64::INFINITY;
    row.wxx_max = f64::NEG_INFINITY;
    let (mut area, mut total_curv, mut length, mut flux_sum, mut r_ds, mut gb_interior) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for j in 0..nt {
        let (lo, hi) = model.line_fluxes(w, j, t);
        let base = j * nx;
        for i in 0..nx {
            let k = base + i;
            let r = -lw[k] / u[k];
            row.r_min = row.r_min.min(r);
            row.r_max = row.r_max.max(r);
            if i > 0 && i < nx - 1 {
                row.wxx_min = row.wxx_min.min(lw[k]);
                row.wxx_max = row.wxx_max.max(lw[k]);
            }
            area += model.weights_x[i] * ht * u[k];
            total_curv -= model.weights_x[i] * ht * lw[k];
        }
        let (sl, sh) = (u[base].sqrt(), u[base + nx - 1].sqrt());
        length += ht * (sl + sh);
        flux_sum += ht * (lo.0 + hi.0);
        r_ds += ht * (-lw[base] / u[base] * sl - lw[base + nx - 1] / u[base + nx - 1] * sh);
        // boundary rows of R·u rebuilt from one-sided x differences; the θ
        // part telescopes over the periodic direction
        let line = &w[base..base + nx];
        let rec_lo = (line[0] - 2.0 * line[1] + line[2]) / (hx * hx);
        let rec_hi = (line[nx - 1] - 2.0 * line[nx - 2] + line[nx - 3]) / (hx * hx);
        let xs_lo = lw[base] - theta_second_difference(w, g, 0, j);
        let xs_hi = lw[base + nx - 1] - theta_second_difference(w, g, nx - 1, j);
        gb_interior += ht * 0.5 * hx * ((xs_lo - rec_lo) + (xs_hi - rec_hi));
    }
    row.mass = area / (2.0 * PI);
    row.area = area;
    row.total_curvature = total_curv;
    row.length = length;
    row.mass_flux = flux_sum / (2.0 * PI);
    row.r_boundary = r_ds / length;
    // ∫R dA (reconstructed) + 2∮k ds, with 2∮k ds = Σ hθ (q_lo + q_hi)
    row.gb_residual = total_curv + gb_interior + flux_sum;
    row.u_boundary = (0..nt).map(|j| u[j * nx].max(u[j * nx + nx - 1])).fold(0.0, f64::max);
    row
}

fn theta_second_difference(w: &[f64], g: &CylinderGrid, i: usize, j: usize) -> f64 {
    let (nx, nt) = (g.nx(), g.ntheta());
    let (jm, jp) = ((j + nt - 1) % nt, (j + 1) % nt);
    (w[jm * nx + i] - 2.0 * w[j * nx + i] + w[jp * nx + i]) / g.htheta().powi(2)
}

/// Discrete `du/dt = Δ log u` on the cylinder.
pub fn apply_log_diffusion_2d(state: &SolutionState, phi: &BoundaryCurvature, grid: &CylinderGrid, t: f64) -> Vec<f64> {
    let model = CylinderModel { grid: *grid, phi, weights_x: grid.line().trapezoid_weights() };
    let mut out = vec![0.0; grid.len()];
    model.rate(&state.w, t, &mut out);
    out
}

/// Per-θ-line compatibility residuals at `t = 0`, as `(lower, upper)` pairs.
pub fn compatibility_residual_2d(state: &SolutionState, phi: &BoundaryCurvature, grid: &CylinderGrid) -> Vec<(f64, f64)> {
    let nx = grid.nx();
    (0..grid.ntheta())
        .map(|j| {
            let line = &state.w[j * nx..(j + 1) * nx];
            let th = grid.theta(j);
            let r = |side: Side, wb: f64| {
                one_sided_outward_derivative(line, grid.hx(), side) - flux(phi.eval(side, th, state.t), wb).0
            };
            (r(Side::Lower, line[0]), r(Side::Upper, line[nx - 1]))
        })
        .collect()
}

/// Collar correction on every θ-line.
pub fn make_compatible_2d(profile: &[f64], phi: &BoundaryCurvature, grid: &CylinderGrid, blend_width: f64) -> Result<SolutionState> {
    if profile.len() != grid.len() {
        return Err(Error::InvalidArgument(format!("profile has {} values, grid has {} nodes", profile.len(), grid.len())));
    }
    if blend_width >= grid.half_length() {
        return Err(Error::CollarTooWide { width: blend_width, half_length: grid.half_length() });
    }
    if !(blend_width >= 2.0 * grid.hx()) {
        return Err(Error::InvalidArgument(format!("collar width {blend_width} must cover at least two cells")));
    }
    let mut state = SolutionState::from_u(0.0, profile)?;
    let nx = grid.nx();
    for j in 0..grid.ntheta() {
        let th = grid.theta(j);
        let line = &mut state.w[j * nx..(j + 1) * nx];
        for side in Side::BOTH {
            correct_collar(line, grid.hx(), blend_width, side, |wb| flux(phi.eval(side, th, 0.0), wb).0);
        }
    }
    Ok(state)
}

/// Nodewise comparison of the 2D run against θ-independent 1D envelopes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub gamma_upper: f64,
    pub gamma_lower: f64,
    pub times_checked: usize,
    /// Largest `u − v_upper` over nodes and checked times (≤ 0 when contained).
    pub worst_upper_excess: f64,
    /// Largest `z_lower − u` (≤ 0 when contained).
    pub worst_lower_excess: f64,
    /// Smallest `v_upper − z_lower` gap at each checked output time.
    pub gaps: Vec<(f64, f64)>,
    pub upper_termination: Termination,
    pub lower_termination: Termination,
}

impl EnvelopeReport {
    pub fn contained(&self, tol: f64) -> bool {
        self.times_checked > 0 && self.worst_upper_excess <= tol && self.worst_lower_excess <= tol
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CylinderRun {
    pub trajectory: Trajectory,
    pub envelope: EnvelopeReport,
}

fn constant_envelope(
    c: f64,
    bc: &RobinBoundary,
    line: &Interval1D,
    blend: f64,
    ok: impl Fn(&SolutionState) -> bool,
    factor: f64,
) -> Result<SolutionState> {
    let mut c = c;
    for _ in 0..60 {
        let s = crate::domain::make_compatible_initial_data(&vec![c; line.len()], bc, line, blend)?;
        if ok(&s) {
            return Ok(s);
        }
        c *= factor;
    }
    Err(Error::InvalidInitialData("could not build an ordered envelope".into()))
}

/// Integrates the cylinder problem and checks it against the 1D upper run
/// (`γ⁺ = max φ`, data above `u₀`) and lower run (`γ⁻ = min φ`, data below
/// `u₀`), all three computed concurrently.
pub fn run_cylinder(
    u0: &SolutionState,
    phi: &BoundaryCurvature,
    grid: &CylinderGrid,
    cfg: &SolverConfig,
    t_final: f64,
    output_times: &[f64],
) -> Result<CylinderRun> {
    if u0.w.len() != grid.len() {
        return Err(Error::InvalidArgument(format!("state has {} values, grid has {} nodes", u0.w.len(), grid.len())));
    }
    for (lo, hi) in compatibility_residual_2d(u0, phi, grid) {
        if !(lo.abs() < cfg.compat_tol && hi.abs() < cfg.compat_tol) {
            return Err(Error::Incompatible { lower: lo, upper: hi, tol: cfg.compat_tol });
        }
    }
    let nx = grid.nx();
    let line = grid.line();
    let (g_lo, g_hi) = phi.sampled_range(grid, t_final, 1e-2);
    let bc_hi = RobinBoundary::new(g_hi, 1.5)?;
    let bc_lo = RobinBoundary::new(g_lo, 1.5)?;
    let col_max: Vec<f64> = (0..nx).map(|i| (0..grid.ntheta()).map(|j| u0.w[j * nx + i]).fold(f64::NEG_INFINITY, f64::max)).collect();
    let col_min: Vec<f64> = (0..nx).map(|i| (0..grid.ntheta()).map(|j| u0.w[j * nx + i]).fold(f64::INFINITY, f64::min)).collect();
    let blend = (0.25 * grid.half_length()).max(2.0 * grid.hx());
    let upper0 = constant_envelope(2.0 * col_max.iter().copied().fold(f64::NEG_INFINITY, f64::max).exp(), &bc_hi, &line, blend, |s| s.w.iter().zip(&col_max).all(|(a, b)| a > b), 2.0)?;
    let lower0 = constant_envelope(0.5 * col_min.iter().copied().fold(f64::INFINITY, f64::min).exp(), &bc_lo, &line, blend, |s| s.w.iter().zip(&col_min).all(|(a, b)| a < b), 0.5)?;

    let model = CylinderModel { grid: *grid, phi, weights_x: line.trapezoid_weights() };
    let (main, upper, lower) = std::thread::scope(|s| {
        let up = s.spawn(|| solver1d::run(&upper0, &bc_hi, &line, cfg, t_final, output_times));
        let lo = s.spawn(|| solver1d::run(&lower0, &bc_lo, &line, cfg, t_final, output_times));
        let main = integrate::integrate(&model, u0, cfg, t_final, output_times);
        (main, up.join().expect("upper envelope panicked"), lo.join().expect("lower envelope panicked"))
    });
    let (trajectory, upper, lower) = (main?, upper?, lower?);

    let mut report = EnvelopeReport {
        gamma_upper: g_hi,
        gamma_lower: g_lo,
        times_checked: 0,
        worst_upper_excess: f64::NEG_INFINITY,
        worst_lower_excess: f64::NEG_INFINITY,
        gaps: Vec::new(),
        upper_termination: upper.termination,
        lower_termination: lower.termination,
    };
    for ((s, v), z) in trajectory.samples.iter().zip(&upper.samples).zip(&lower.samples) {
        report.times_checked += 1;
        let (vu, zu) = (v.u(), z.u());
        let mut gap = f64::INFINITY;
        for i in 0..nx {
            gap = gap.min(vu[i] - zu[i]);
            for j in 0..grid.ntheta() {
                let u = s.w[j * nx + i].exp();
                report.worst_upper_excess = report.worst_upper_excess.max(u - vu[i]);
                report.worst_lower_excess = report.worst_lower_excess.max(zu[i] - u);
            }
        }
        report.gaps.push((s.t, gap));
    }
    Ok(CylinderRun { trajectory, envelope: report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::make_compatible_initial_data;
    use crate::solver1d::apply_log_diffusion;

    #[test]
    fn flat_state_is_stationary() {
        let g = CylinderGrid::new(1.0, 9, 8).unwrap();
        let s = SolutionState::from_u(0.0, &vec![1.0; g.len()]).unwrap();
        let phi = BoundaryCurvature::constant(0.0);
        assert!(apply_log_diffusion_2d(&s, &phi, &g, 0.0).iter().all(|v| *v == 0.0));
        let run = run_cylinder(&s, &phi, &g, &SolverConfig::default(), 1.0, &[0.5]).unwrap();
        assert_eq!(run.trajectory.termination, Termination::ReachedFinal);
        assert!(run.trajectory.rows.iter().all(|r| (r.u_max - 1.0).abs() < 1e-12 && (r.u_min - 1.0).abs() < 1e-12));
        assert!(run.envelope.contained(0.0));
    }

    #[test]
    fn theta_independent_rows_match_the_line_operator() {
        let g = CylinderGrid::new(1.0, 17, 8).unwrap();
        let line = g.line();
        let w1: Vec<f64> = line.nodes().iter().map(|x| 0.3 * x * x + 0.1 * x).collect();
        let mut w = Vec::new();
        for _ in 0..g.ntheta() {
            w.extend_from_slice(&w1);
        }
        let s2 = SolutionState::from_log(0.0, w).unwrap();
        let s1 = SolutionState::from_log(0.0, w1).unwrap();
        let gamma = 0.4;
        let f2 = apply_log_diffusion_2d(&s2, &BoundaryCurvature::constant(gamma), &g, 0.0);
        let f1 = apply_log_diffusion(&s1, &RobinBoundary::new(gamma, 1.5).unwrap(), &line);
        for j in 0..g.ntheta() {
            for i in 0..g.nx() {
                assert_eq!(f2[g.index(i, j)], f1[i]);
            }
        }
    }

    #[test]
    fn theta_laplacian_of_sine() {
        let err = |nt: usize| {
            let g = CylinderGrid::new(1.0, 9, nt).unwrap();
            let mut w = vec![0.0; g.len()];
            for j in 0..nt {
                for i in 0..g.nx() {
                    w[g.index(i, j)] = g.theta(j).sin();
                }
            }
            let s = SolutionState::from_log(0.0, w).unwrap();
            let f = apply_log_diffusion_2d(&s, &BoundaryCurvature::constant(0.0), &g, 0.0);
            (0..nt).map(|j| (f[g.index(4, j)] + g.theta(j).sin()).abs()).fold(0.0, f64::max)
        };
        let (e1, e2) = (err(16), err(32));
        assert!(e2 < 5e-3 && (e1 / e2).log2() > 1.9, "{e1} {e2}");
    }

    #[test]
    fn reduction_to_one_dimension() {
        let gamma = 0.3;
        let g = CylinderGrid::new(1.0, 17, 8).unwrap();
        let line = g.line();
        let bc = RobinBoundary::new(gamma, 1.5).unwrap();
        let s1 = make_compatible_initial_data(&[1.0; 17], &bc, &line, 0.3).unwrap();
        let mut w = Vec::new();
        for _ in 0..g.ntheta() {
            w.extend_from_slice(&s1.w);
        }
        let s2 = SolutionState::from_log(0.0, w).unwrap();
        let cfg = SolverConfig::default();
        let r2 = run_cylinder(&s2, &BoundaryCurvature::constant(gamma), &g, &cfg, 1.0, &[0.5]).unwrap();
        let r1 = solver1d::run(&s1, &bc, &line, &cfg, 1.0, &[0.5]).unwrap();
        for (a, b) in r2.trajectory.samples.iter().zip(&r1.samples) {
            for j in 0..g.ntheta() {
                for i in 0..g.nx() {
                    assert!((a.w[g.index(i, j)] - b.w[i]).abs() < 1e-8);
                }
            }
        }
        assert!(r2.envelope.contained(1e-8));
    }

    #[test]
    fn rotation_equivariance() {
        let g = CylinderGrid::new(1.0, 9, 12).unwrap();
        let phi = BoundaryCurvature::oscillating();
        let shift = 3;
        let rot = phi.rotated(g.theta(shift));
        let base: Vec<f64> = (0..g.len()).map(|k| 1.0 + 0.2 * g.theta(k / g.nx()).cos()).collect();
        let s = make_compatible_2d(&base, &phi, &g, 0.5).unwrap();
        let mut rotated = vec![0.0; g.len()];
        for j in 0..g.ntheta() {
            for i in 0..g.nx() {
                rotated[g.index(i, (j + shift) % g.ntheta())] = s.u()[g.index(i, j)];
            }
        }
        let sr = SolutionState::from_u(0.0, &rotated).unwrap();
        let cfg = SolverConfig { compat_tol: 1e-6, ..Default::default() };
        let a = run_cylinder(&s, &phi, &g, &cfg, 0.3, &[]).unwrap();
        let b = run_cylinder(&sr, &rot, &g, &cfg, 0.3, &[]).unwrap();
        let (wa, wb) = (&a.trajectory.final_state.w, &b.trajectory.final_state.w);
        for j in 0..g.ntheta() {
            for i in 0..g.nx() {
                assert!((wa[g.index(i, j)] - wb[g.index(i, (j + shift) % g.ntheta())]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn compatible_constructor_2d() {
        let g = CylinderGrid::new(1.0, 33, 8).unwrap();
        let phi = BoundaryCurvature::oscillating();
        let s = make_compatible_2d(&vec![1.0; g.len()], &phi, &g, 0.3).unwrap();
        for (lo, hi) in compatibility_residual_2d(&s, &phi, &g) {
            assert!(lo.abs() < 1e-8 && hi.abs() < 1e-8);
        }
    }
}
