//! Rate fits, moment functionals, finite-time mass bounds, the comparison
//! harness and invariant monitors over finished trajectories.

use serde::{Deserialize, Serialize};

use crate::domain::{Interval1D, RobinBoundary, SolutionState, SolverConfig};
use crate::error::{Error, Result};
use crate::integrate::{DiagnosticRow, Termination, Trajectory};
use crate::solver1d;

/// Least-squares line `y = slope·x + intercept`; `None` if the abscissae
/// are degenerate.
pub fn least_squares_line(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return None;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for &(x, y) in pts {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if !(sxx > 0.0) {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateModel {
    /// `v ≈ C t^α`
    Power,
    /// `v ≈ C e^{λt}`
    Exponential,
    /// `v ≈ C e^{−Dt²}`
    GaussianLog,
    /// `v ≈ C (T − t)`
    LinearVanishing,
}

impl std::str::FromStr for RateModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "power" => Ok(RateModel::Power),
            "exponential" => Ok(RateModel::Exponential),
            "gaussian_log" => Ok(RateModel::GaussianLog),
            "linear_vanishing" => Ok(RateModel::LinearVanishing),
            other => Err(Error::InvalidArgument(format!("unknown rate model '{other}'"))),
        }
    }
}

/// A fitted rate.
///
/// `parameter` is α, λ, D or C according to the model; `t_vanish` is set
/// only for the linear-vanishing model. `rms_residual` is taken in log
/// space (relative residual for the linear model).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub model: RateModel,
    pub parameter: f64,
    pub t_vanish: Option<f64>,
    pub prefactor: f64,
    pub window: (f64, f64),
    pub rms_residual: f64,
    pub points: usize,
}

pub const MIN_FIT_POINTS: usize = 8;

/// Default window: the later half of the series in log-time.
pub fn default_window(series: &[(f64, f64)]) -> Option<(f64, f64)> {
    let t_last = series.last()?.0;
    let t_first = series.iter().map(|p| p.0).find(|t| *t > 0.0)?;
    Some(((t_first * t_last).sqrt(), t_last))
}

pub fn fit_rate(series: &[(f64, f64)], model: RateModel, window: Option<(f64, f64)>) -> Result<RateFit> {
    let window = match window {
        Some(w) => w,
        None => default_window(series).ok_or(Error::InsufficientPoints { needed: MIN_FIT_POINTS, got: 0 })?,
    };
    let slack = 1e-12 * window.1.abs().max(1.0);
    let pts: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|(t, _)| *t >= window.0 - slack && *t <= window.1 + slack)
        .collect();
    if pts.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientPoints { needed: MIN_FIT_POINTS, got: pts.len() });
    }
    if let Some(&(t, value)) = pts.iter().find(|(_, v)| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::NonPositive { t, value });
    }
    if model == RateModel::Power {
        if let Some(&(t, _)) = pts.iter().find(|(t, _)| !(*t > 0.0)) {
            return Err(Error::InvalidArgument(format!("power fit needs t > 0, got t = {t}")));
        }
    }
    let transformed: Vec<(f64, f64)> = pts
        .iter()
        .map(|&(t, v)| match model {
            RateModel::Power => (t.ln(), v.ln()),
            RateModel::Exponential => (t, v.ln()),
            RateModel::GaussianLog => (t * t, v.ln()),
            RateModel::LinearVanishing => (t, v),
        })
        .collect();
    let (slope, intercept) = least_squares_line(&transformed)
        .ok_or_else(|| Error::InvalidArgument("fit window has a single abscissa".into()))?;
    let rms = (transformed
        .iter()
        .zip(&pts)
        .map(|(&(x, y), &(_, v))| {
            let r = y - (slope * x + intercept);
            if model == RateModel::LinearVanishing {
                (r / v).powi(2)
            } else {
                r * r
            }
        })
        .sum::<f64>()
        / pts.len() as f64)
        .sqrt();
    let (parameter, t_vanish, prefactor) = match model {
        RateModel::Power | RateModel::Exponential => (slope, None, intercept.exp()),
        RateModel::GaussianLog => (-slope, None, intercept.exp()),
        RateModel::LinearVanishing => (-slope, Some(-intercept / slope), -slope),
    };
    Ok(RateFit { model, parameter, t_vanish, prefactor, window, rms_residual: rms, points: pts.len() })
}

/// Named per-row series used by fits.
pub fn series(rows: &[DiagnosticRow], pick: impl Fn(&DiagnosticRow) -> f64) -> Vec<(f64, f64)> {
    rows.iter().map(|r| (r.t, pick(r))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentKind {
    /// `r_n = ∫ uⁿ dx`
    R,
    /// `q_n = ∫ u^{−n} dx`
    Q,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSeries {
    pub n: f64,
    pub kind: MomentKind,
    pub t: Vec<f64>,
    pub values: Vec<f64>,
}

/// Trapezoid moments at every output state of the trajectory.
pub fn moment_series(traj: &Trajectory, n: f64, kind: MomentKind) -> Result<MomentSeries> {
    if !(n >= 1.0) {
        return Err(Error::InvalidArgument(format!("moment order must be at least 1, got {n}")));
    }
    let states = traj.output_states();
    Ok(MomentSeries {
        n,
        kind,
        t: states.iter().map(|s| s.t).collect(),
        values: states.iter().map(|s| moment(s, &traj.weights, n, kind)).collect(),
    })
}

pub fn moment(state: &SolutionState, weights: &[f64], n: f64, kind: MomentKind) -> f64 {
    let sign = match kind {
        MomentKind::R => 1.0,
        MomentKind::Q => -1.0,
    };
    state.w.iter().zip(weights).map(|(w, c)| c * (sign * n * w).exp()).sum()
}

/// Slack of `q_n' ≥ K q_n^{1−(p−2)/n}` with `K = −2nγ/(2l)^{(n+2−p)/n}`,
/// using forward difference quotients and the smaller right-hand side at
/// the two ends of each interval.
pub fn q_moment_slack(q: &MomentSeries, gamma: f64, p: f64, l: f64) -> Result<Vec<f64>> {
    if q.kind != MomentKind::Q {
        return Err(Error::InvalidArgument("q-moment check needs a q series".into()));
    }
    let n = q.n;
    let k = -2.0 * n * gamma / (2.0 * l).powf((n + 2.0 - p) / n);
    let e = 1.0 - (p - 2.0) / n;
    Ok((0..q.t.len().saturating_sub(1))
        .map(|i| {
            let dq = (q.values[i + 1] - q.values[i]) / (q.t[i + 1] - q.t[i]);
            let rhs = (k * q.values[i].powf(e)).min(k * q.values[i + 1].powf(e));
            dq - rhs
        })
        .collect())
}

/// Slack series of a finite-time mass bound and the deadline it implies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassBound {
    pub t: Vec<f64>,
    pub slack: Vec<f64>,
    pub deadline: f64,
    pub worst_slack: f64,
}

fn worst(slack: &[f64]) -> f64 {
    slack.iter().copied().fold(f64::INFINITY, f64::min)
}

/// `m^{1+ε}(0) + αt − m^{1+ε}(t)` with `ε = 1 − p`, `α = 2γ(1+ε)(2l)^ε`.
pub fn mass_bound_blowdown_series(t: &[f64], m: &[f64], gamma: f64, p: f64, l: f64) -> Result<MassBound> {
    if !(p < 1.0 && gamma < 0.0) {
        return Err(Error::NotApplicable(format!("blow-down mass bound needs p < 1 and gamma < 0 (p = {p}, gamma = {gamma})")));
    }
    if m.is_empty() || m.len() != t.len() {
        return Err(Error::InsufficientPoints { needed: 1, got: m.len().min(t.len()) });
    }
    let eps = 1.0 - p;
    let alpha = 2.0 * gamma * (1.0 + eps) * (2.0 * l).powf(eps);
    let m0 = m[0].powf(1.0 + eps);
    let slack: Vec<f64> = t.iter().zip(m).map(|(ti, m)| m0 + alpha * (ti - t[0]) - m.powf(1.0 + eps)).collect();
    let worst_slack = worst(&slack);
    Ok(MassBound { t: t.to_vec(), slack, deadline: t[0] - m0 / alpha, worst_slack })
}

/// `m^{p−2}(t) − 1/(m^{2−p}(0) + βt)` with `β = 2(2−p)γ/(2l)^{p−1}`, on
/// times before the deadline `m^{2−p}(0)/(−β)`.
pub fn mass_bound_blowup_series(t: &[f64], m: &[f64], gamma: f64, p: f64, l: f64) -> Result<MassBound> {
    if !(p > 2.0 && gamma > 0.0) {
        return Err(Error::NotApplicable(format!("blow-up mass bound needs p > 2 and gamma > 0 (p = {p}, gamma = {gamma})")));
    }
    if m.is_empty() || m.len() != t.len() {
        return Err(Error::InsufficientPoints { needed: 1, got: m.len().min(t.len()) });
    }
    let beta = 2.0 * (2.0 - p) * gamma / (2.0 * l).powf(p - 1.0);
    let m0 = m[0].powf(2.0 - p);
    let deadline = t[0] + m0 / (-beta);
    let mut ts = Vec::new();
    let mut slack = Vec::new();
    for (&ti, &mi) in t.iter().zip(m) {
        let denom = m0 + beta * (ti - t[0]);
        if denom <= 0.0 {
            break;
        }
        ts.push(ti);
        slack.push(mi.powf(p - 2.0) - 1.0 / denom);
    }
    let worst_slack = worst(&slack);
    Ok(MassBound { t: ts, slack, deadline, worst_slack })
}

fn mass_rows(traj: &Trajectory) -> (Vec<f64>, Vec<f64>) {
    let rows = traj.all_rows();
    (rows.iter().map(|r| r.t).collect(), rows.iter().map(|r| r.mass).collect())
}

pub fn check_mass_bound_blowdown(traj: &Trajectory, bc: &RobinBoundary, dom: &Interval1D) -> Result<MassBound> {
    let (t, m) = mass_rows(traj);
    mass_bound_blowdown_series(&t, &m, bc.gamma, bc.p, dom.half_length())
}

pub fn check_mass_bound_blowup(traj: &Trajectory, bc: &RobinBoundary, dom: &Interval1D) -> Result<MassBound> {
    let (t, m) = mass_rows(traj);
    mass_bound_blowup_series(&t, &m, bc.gamma, bc.p, dom.half_length())
}

/// Ordering of two runs with ordered initial data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    /// `min (v − u)` over common output times and nodes.
    pub min_gap: f64,
    /// `(t, x)` of the first non-positive gap.
    pub first_violation: Option<(f64, f64)>,
    pub times_compared: usize,
    pub low_termination: Termination,
    pub high_termination: Termination,
}

impl ComparisonReport {
    pub fn ordered(&self) -> bool {
        self.first_violation.is_none() && self.min_gap > 0.0
    }
}

/// Runs a lower and an upper problem concurrently and reports whether the
/// nodewise order `v > u` survives at every common output time.
pub fn comparison_harness(
    u0_low: &SolutionState,
    u0_high: &SolutionState,
    bc_low: &RobinBoundary,
    bc_high: &RobinBoundary,
    dom: &Interval1D,
    cfg: &SolverConfig,
    t_final: f64,
    output_times: &[f64],
) -> Result<ComparisonReport> {
    if u0_low.w.len() != u0_high.w.len() {
        return Err(Error::InvalidArgument("comparison states differ in length".into()));
    }
    if let Some(i) = u0_low.w.iter().zip(&u0_high.w).position(|(a, b)| b <= a) {
        return Err(Error::InvalidArgument(format!(
            "initial data not strictly ordered at x = {} (degenerate or reversed pair)",
            dom.node(i)
        )));
    }
    // the upper flux must dominate the lower one at the upper data's boundary values
    let n = u0_high.w.len();
    for wb in [u0_high.w[0], u0_high.w[n - 1]] {
        let v = wb.exp();
        let hi = 2.0 * bc_high.gamma * v.powf(bc_high.p);
        let lo = 2.0 * bc_low.gamma * v.powf(bc_low.p);
        if hi < lo {
            return Err(Error::InvalidArgument(format!(
                "boundary fluxes are not ordered at u = {v}: {hi} < {lo}"
            )));
        }
    }
    let (low, high) = std::thread::scope(|s| {
        let a = s.spawn(|| solver1d::run(u0_low, bc_low, dom, cfg, t_final, output_times));
        let b = s.spawn(|| solver1d::run(u0_high, bc_high, dom, cfg, t_final, output_times));
        (a.join().expect("lower run panicked"), b.join().expect("upper run panicked"))
    });
    let (low, high) = (low?, high?);
    let mut min_gap = f64::INFINITY;
    let mut first_violation = None;
    let mut times = 0;
    for (a, b) in low.samples.iter().zip(&high.samples) {
        debug_assert_eq!(a.t, b.t);
        times += 1;
        for (i, (wa, wb)) in a.w.iter().zip(&b.w).enumerate() {
            let gap = wb.exp() - wa.exp();
            min_gap = min_gap.min(gap);
            if gap <= 0.0 && first_violation.is_none() {
                first_violation = Some((a.t, dom.node(i)));
            }
        }
    }
    Ok(ComparisonReport {
        min_gap,
        first_violation,
        times_compared: times,
        low_termination: low.termination,
        high_termination: high.termination,
    })
}

/// `u_max/u_min` at every output row.
pub fn flatness_ratio(traj: &Trajectory) -> Vec<(f64, f64)> {
    traj.output_rows().iter().map(|r| (r.t, r.u_max / r.u_min)).collect()
}

/// Sign-preservation monitor for `∂_xx log u` over interior nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignReport {
    /// +1 or −1 when the initial data is strictly signed, 0 otherwise.
    pub initial_sign: i8,
    /// Largest excursion to the wrong side of zero (0 if none).
    pub worst_violation: f64,
    /// `h² + max dt`, the scale against which violations are judged.
    pub scale: f64,
}

impl SignReport {
    pub fn holds(&self, c: f64) -> bool {
        self.worst_violation <= c * self.scale
    }
}

pub fn sign_preservation(traj: &Trajectory, h: f64) -> SignReport {
    let rows = traj.all_rows();
    let first = rows[0];
    let initial_sign = if first.wxx_min > 0.0 {
        1
    } else if first.wxx_max < 0.0 {
        -1
    } else {
        0
    };
    let worst_violation = match initial_sign {
        1 => rows.iter().map(|r| -r.wxx_min).fold(0.0, f64::max),
        -1 => rows.iter().map(|r| r.wxx_max).fold(0.0, f64::max),
        _ => 0.0,
    };
    let max_dt = rows.iter().map(|r| r.dt).fold(0.0, f64::max);
    SignReport { initial_sign, worst_violation, scale: h * h + max_dt }
}

/// Largest `|Δm/Δt − F|` over accepted steps, `F` the boundary flux at the
/// step's end state.
pub fn mass_law_residual(traj: &Trajectory) -> f64 {
    traj.all_rows()
        .windows(2)
        .map(|p| ((p[1].mass - p[0].mass) / (p[1].t - p[0].t) - p[1].mass_flux).abs())
        .fold(0.0, f64::max)
}

/// Largest `|ΔA/Δt + ∫R dA|` over accepted steps.
pub fn area_law_residual(traj: &Trajectory) -> f64 {
    traj.all_rows()
        .windows(2)
        .map(|p| ((p[1].area - p[0].area) / (p[1].t - p[0].t) + p[1].total_curvature).abs())
        .fold(0.0, f64::max)
}

/// Largest relative gap between `L(t)/L(0)` and `exp(−½∫r_∂)`, with the
/// time integral taken by the trapezoid rule over accepted steps.
pub fn length_law_residual(traj: &Trajectory) -> f64 {
    let rows = traj.all_rows();
    let l0 = rows[0].length;
    let mut integral = 0.0;
    let mut worst_gap = 0.0f64;
    for p in rows.windows(2) {
        integral += 0.5 * (p[0].r_boundary + p[1].r_boundary) * (p[1].t - p[0].t);
        let predicted = (-0.5 * integral).exp();
        worst_gap = worst_gap.max((p[1].length / l0 / predicted - 1.0).abs());
    }
    worst_gap
}

/// Suprema of `g(t, v)` over the earlier and later halves of a window; a
/// quantity bounded by a constant has the later supremum not much above the
/// earlier one.
pub fn split_suprema(series: &[(f64, f64)], window: (f64, f64), g: impl Fn(f64, f64) -> f64) -> Result<(f64, f64)> {
    let mid = 0.5 * (window.0 + window.1);
    let (mut early, mut late) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut count = 0;
    for &(t, v) in series {
        if t < window.0 || t > window.1 {
            continue;
        }
        count += 1;
        let val = g(t, v);
        if t < mid {
            early = early.max(val);
        } else {
            late = late.max(val);
        }
    }
    if count < 2 || !early.is_finite() || !late.is_finite() {
        return Err(Error::InsufficientPoints { needed: 2, got: count });
    }
    Ok((early, late))
}
