//! Built-in verification battery: manufactured-solution orders, exact
//! oracles and regression self-checks.

use serde::Serialize;

use logdiff_core::analysis::{fit_rate, RateModel};
use logdiff_core::disc::{hemisphere_oracle, make_compatible_disc, run_disc, DiscBoundary, RadialGrid};
use logdiff_core::domain::make_compatible_initial_data;
use logdiff_core::solver1d::{self, manufactured, oracles, GhostNode, LineStencil, SourceTerm};
use logdiff_core::{Interval1D, RobinBoundary, SolutionState, SolverConfig, Termination};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: String,
    pub criterion: String,
}

fn check(name: &str, passed: bool, measured: String, criterion: String) -> Check {
    Check { name: name.into(), passed, measured, criterion }
}

fn failed(name: &str, err: impl std::fmt::Display) -> Check {
    check(name, false, format!("error: {err}"), String::new())
}

/// Grid sizes and tolerances for one battery mode.
struct Plan {
    space_n0: usize,
    space_levels: usize,
    order_tol: f64,
    time_n: usize,
    time_dt0: f64,
    time_tol: f64,
    oracle_n: Vec<usize>,
    t_est_tol: f64,
    disc_n: usize,
    disc_tol: f64,
}

impl Plan {
    fn new(quick: bool) -> Self {
        if quick {
            Plan {
                space_n0: 17,
                space_levels: 2,
                order_tol: 0.5,
                time_n: 33,
                time_dt0: 0.1,
                time_tol: 0.35,
                oracle_n: vec![17, 33],
                t_est_tol: 0.05,
                disc_n: 33,
                disc_tol: 0.1,
            }
        } else {
            Plan {
                space_n0: 33,
                space_levels: 3,
                order_tol: 0.3,
                time_n: 257,
                time_dt0: 0.05,
                time_tol: 0.2,
                oracle_n: vec![65, 129, 257],
                t_est_tol: 0.02,
                disc_n: 129,
                disc_tol: 0.05,
            }
        }
    }
}

/// Runs the battery with the production stencil.
pub fn battery(quick: bool) -> Vec<Check> {
    battery_with(quick, &GhostNode)
}

/// Runs the battery with `stencil` standing in for the line discretization
/// (tests inject faulty stencils here).
pub fn battery_with(quick: bool, stencil: &dyn LineStencil) -> Vec<Check> {
    let plan = Plan::new(quick);
    vec![
        space_order(&plan, stencil),
        time_order(&plan),
        sech2_oracle(&plan, stencil),
        hemisphere(&plan),
        mass_identity(stencil),
        constant_state(stencil),
        fit_regression(),
    ]
}

fn orders_within(orders: &[f64], target: f64, tol: f64) -> bool {
    !orders.is_empty() && orders.iter().all(|o| (o - target).abs() <= tol)
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(", ")
}

fn space_order(plan: &Plan, stencil: &dyn LineStencil) -> Check {
    let name = "manufactured_space_order";
    match manufactured::spatial_errors(plan.space_n0, plan.space_levels, 1.0, 0.5, stencil) {
        Ok(errors) => {
            let orders = manufactured::observed_orders(&errors);
            check(name, orders_within(&orders, 2.0, plan.order_tol), format!("orders [{}]", fmt_list(&orders)), format!("2 ± {}", plan.order_tol))
        }
        Err(e) => failed(name, e),
    }
}

fn time_order(plan: &Plan) -> Check {
    let name = "manufactured_time_order";
    match manufactured::temporal_errors(plan.time_n, plan.time_dt0, 3, 1.0, 0.5) {
        Ok(errors) => {
            let orders = manufactured::observed_orders(&errors);
            check(name, orders_within(&orders, 1.0, plan.time_tol), format!("orders [{}]", fmt_list(&orders)), format!("1 ± {}", plan.time_tol))
        }
        Err(e) => failed(name, e),
    }
}

/// `(max error at t = 0.5, T_est)` for the sech² blow-down on `n` nodes.
fn sech2_run(n: usize, stencil: &dyn LineStencil) -> logdiff_core::Result<(f64, Option<f64>)> {
    let (c, l, t_blow) = (1.0, 1.0, 1.0);
    let dom = Interval1D::new(l, n)?;
    let bc = RobinBoundary::new(oracles::sech2_gamma(c, l), 1.0)?;
    let u: Vec<f64> = dom.nodes().iter().map(|&x| oracles::sech2(x, 0.0, c, t_blow)).collect();
    let s = make_compatible_initial_data(&u, &bc, &dom, 0.25 * l)?;
    let cfg = SolverConfig { dt_max: 1e-3, ..SolverConfig::default() };
    let traj = solver1d::run_with_stencil(&s, &bc, &dom, &cfg, 2.0, &[0.5], stencil, &SourceTerm::none(), Some(1.0))?;
    let at = traj.samples.iter().find(|s| s.t == 0.5).ok_or_else(|| logdiff_core::Error::NotApplicable("run stopped before t = 0.5".into()))?;
    let err = dom
        .nodes()
        .iter()
        .zip(at.u())
        .map(|(&x, v)| (v - oracles::sech2(x, 0.5, c, t_blow)).abs())
        .fold(0.0, f64::max);
    let t_est = match traj.termination {
        Termination::BlowDown { .. } => solver1d::detect_singularity(&traj)?.t_est(),
        _ => None,
    };
    Ok((err, t_est))
}

fn sech2_oracle(plan: &Plan, stencil: &dyn LineStencil) -> Check {
    let name = "sech2_oracle";
    let runs: logdiff_core::Result<Vec<_>> = plan.oracle_n.iter().map(|&n| sech2_run(n, stencil)).collect();
    match runs {
        Ok(runs) => {
            let errors: Vec<f64> = runs.iter().map(|r| r.0).collect();
            let orders = manufactured::observed_orders(&errors);
            let t_est = runs.last().and_then(|r| r.1);
            let rel = t_est.map_or(f64::INFINITY, |t| (t - 1.0).abs());
            let ok = orders_within(&orders, 2.0, plan.order_tol) && rel <= plan.t_est_tol;
            let t_txt = t_est.map_or("none".to_string(), |t| format!("{t:.5}"));
            check(
                name,
                ok,
                format!("orders [{}], T_est {t_txt}", fmt_list(&orders)),
                format!("2 ± {}, |T_est − 1| ≤ {}", plan.order_tol, plan.t_est_tol),
            )
        }
        Err(e) => failed(name, e),
    }
}

fn hemisphere(plan: &Plan) -> Check {
    let name = "hemisphere_oracle";
    let run = || -> logdiff_core::Result<f64> {
        let grid = RadialGrid::new(1.0, plan.disc_n)?;
        let bcd = DiscBoundary::Curvature { beta: 0.0, a: 1.0 };
        let u0: Vec<f64> = grid.nodes().iter().map(|&r| hemisphere_oracle(r, 0.0, 1.0)).collect();
        let s = make_compatible_disc(&u0, &bcd, &grid, 0.2)?;
        let times: Vec<f64> = (1..=19).map(|k| 0.05 * k as f64).collect();
        let traj = run_disc(&s, &bcd, &grid, &SolverConfig::default(), 2.0, &times)?;
        Ok(traj
            .sample_rows
            .iter()
            .filter(|r| r.t >= 0.5 && r.t < 1.0)
            .map(|r| (r.u_min / (1.0 - r.t) / 2.0 - 1.0).abs())
            .fold(0.0, f64::max))
    };
    match run() {
        Ok(dev) => check(name, dev <= plan.disc_tol, format!("max |u_min/(2(T−t)) − 1| = {dev:.2e}"), format!("≤ {}", plan.disc_tol)),
        Err(e) => failed(name, e),
    }
}

fn mass_identity(stencil: &dyn LineStencil) -> Check {
    let name = "mass_identity_p1";
    let run = || -> logdiff_core::Result<f64> {
        let dom = Interval1D::new(1.0, 65)?;
        let gamma = 0.5;
        let bc = RobinBoundary::new(gamma, 1.0)?;
        let w: Vec<f64> = dom.nodes().iter().map(|x| gamma * (x * x - 1.0)).collect();
        let s = SolutionState::from_log(0.0, w)?;
        let traj = solver1d::run_with_stencil(&s, &bc, &dom, &SolverConfig::default(), 2.0, &[], stencil, &SourceTerm::none(), Some(1.0))?;
        let rows = traj.all_rows();
        let m0 = rows[0].mass;
        Ok(rows.iter().map(|r| (r.mass - m0 - 4.0 * gamma * r.t).abs()).fold(0.0, f64::max))
    };
    match run() {
        Ok(d) => check(name, d <= 1e-6, format!("max |m − m0 − 4γt| = {d:.2e}"), "≤ 1e-6".into()),
        Err(e) => failed(name, e),
    }
}

fn constant_state(stencil: &dyn LineStencil) -> Check {
    let name = "flat_state_stationary";
    let run = || -> logdiff_core::Result<f64> {
        let dom = Interval1D::new(1.0, 33)?;
        let bc = RobinBoundary::new(0.0, 1.5)?;
        let s = SolutionState::from_u(0.0, &vec![3.0; 33])?;
        let traj = solver1d::run_with_stencil(&s, &bc, &dom, &SolverConfig::default(), 1.0, &[], stencil, &SourceTerm::none(), Some(1.5))?;
        Ok(traj.final_state.u().iter().map(|u| (u - 3.0).abs()).fold(0.0, f64::max))
    };
    match run() {
        Ok(d) => check(name, d <= 1e-12, format!("max |u − 3| = {d:.2e}"), "≤ 1e-12".into()),
        Err(e) => failed(name, e),
    }
}

fn fit_regression() -> Check {
    let name = "fit_regression";
    let ts: Vec<f64> = (1..=40).map(|k| k as f64 * 0.25).collect();
    let cases: [(RateModel, f64, Box<dyn Fn(f64) -> f64>); 3] = [
        (RateModel::Power, 1.5, Box::new(|t: f64| 2.0 * t.powf(1.5))),
        (RateModel::Exponential, -0.7, Box::new(|t: f64| 3.0 * (-0.7 * t).exp())),
        (RateModel::GaussianLog, 0.02, Box::new(|t: f64| 0.5 * (-0.02 * t * t).exp())),
    ];
    let mut worst = 0.0f64;
    for (model, truth, f) in &cases {
        let series: Vec<(f64, f64)> = ts.iter().map(|&t| (t, f(t))).collect();
        match fit_rate(&series, *model, Some((ts[0], ts[ts.len() - 1]))) {
            Ok(fit) => worst = worst.max((fit.parameter - truth).abs() / truth.abs()),
            Err(e) => return failed(name, e),
        }
    }
    check(name, worst <= 1e-6, format!("worst relative error {worst:.2e}"), "≤ 1e-6".into())
}

/// Fixed-width pass/fail table.
pub fn render_table(checks: &[Check]) -> String {
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(4).max(5);
    let mut out = format!("{:<width$}  {:<6}  {}\n", "check", "status", "measured (criterion)");
    for c in checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        out.push_str(&format!("{:<width$}  {:<6}  {} ({})\n", c.name, status, c.measured, c.criterion));
    }
    out
}
