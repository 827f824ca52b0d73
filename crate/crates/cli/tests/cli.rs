use std::path::{Path, PathBuf};

use clap::Parser;
use serde_json::Value;

use logdiff_cli::commands::{compare, run_scenario, sweep};
use logdiff_cli::scenario::LoadedScenario;
use logdiff_cli::{exit, run, verify, Cli};
use logdiff_core::solver1d::{FluxPair, GhostNode, LineStencil};

fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/scenarios").join(format!("{name}.toml"))
}

fn scenario(name: &str) -> LoadedScenario {
    LoadedScenario::from_file(&scenario_path(name)).unwrap()
}

fn cli(args: &[&str]) -> i32 {
    run(Cli::parse_from(std::iter::once("logdiff").chain(args.iter().copied())))
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn column(csv_text: &str, name: &str) -> Vec<f64> {
    let mut rdr = csv::Reader::from_reader(csv_text.as_bytes());
    let idx = rdr.headers().unwrap().iter().position(|h| h == name).unwrap();
    rdr.records().map(|r| r.unwrap()[idx].parse().unwrap()).collect()
}

const UNDERFLOW: &str = r#"
name = "underflow"
solver = "line1d"
t_final = 1.0

[domain]
l = 1.0
n = 33

[boundary]
kind = "robin"
gamma = 1.0
p = 3.0

[initial]
preset = "quadratic_log"

[config]
dt_min = 0.01
dt_init = 0.01
"#;

#[test]
fn constant_scenario_stays_flat() {
    let out = tempfile::tempdir().unwrap();
    let code = cli(&["--out", out.path().to_str().unwrap(), "run", scenario_path("constant").to_str().unwrap()]);
    assert_eq!(code, exit::OK);
    let text = std::fs::read_to_string(out.path().join("constant.csv")).unwrap();
    let header = text.lines().next().unwrap();
    assert_eq!(header, "t,u_min,u_max,mass,R_min,R_max,area,length,gb_residual");
    let (lo, hi) = (column(&text, "u_min"), column(&text, "u_max"));
    assert_eq!(lo.len(), 21);
    assert!(lo.iter().chain(&hi).all(|&u| u == 2.0));
    let summary = read_json(&out.path().join("constant.summary.json"));
    assert_eq!(summary["termination"]["kind"], "reached_final");
    assert!(summary["t_est"]["not_applicable"].is_string());
}

#[test]
fn sech2_scenario_recovers_the_blow_down_time() {
    let out = tempfile::tempdir().unwrap();
    let (output, files) = run_scenario(&scenario("sech2"), out.path()).unwrap();
    let t_est = *output.summary.t_est.value().unwrap();
    assert!((t_est - 1.0).abs() <= 0.02, "T_est = {t_est}");
    assert!(files.csv.exists() && files.summary.exists());
    let s = read_json(&files.summary);
    for key in ["singular_time", "mass_law", "gauss_bonnet", "area_law", "length_law", "sign_preservation", "fit_u_min_linear_vanishing"] {
        assert!(s["analyses"].get(key).is_some(), "missing {key}");
    }
}

#[test]
fn growth_p15_scenario_has_linear_u_min() {
    let out = tempfile::tempdir().unwrap();
    let (output, _) = run_scenario(&scenario("growth_p15"), out.path()).unwrap();
    let alpha = output.summary.analysis("fit_u_min_power").unwrap()["parameter"].as_f64().unwrap();
    assert!((0.9..=1.1).contains(&alpha), "exponent {alpha}");
}

#[test]
fn every_requested_analysis_has_an_entry() {
    let out = tempfile::tempdir().unwrap();
    for name in ["growth_p15", "hemisphere", "blowdown_p05"] {
        let sc = scenario(name);
        let (output, _) = run_scenario(&sc, out.path()).unwrap();
        for task in &sc.scenario.analysis {
            assert!(output.summary.analyses.contains_key(&task.label()), "{name}: {}", task.label());
        }
    }
}

#[test]
fn blow_down_sweep_over_p() {
    let out = tempfile::tempdir().unwrap();
    let (rows, table) = sweep(&scenario("sweep_blowdown"), "p", &[0.5, 0.75, 1.0], out.path()).unwrap();
    for r in &rows {
        assert_eq!(r.termination, "blow_down", "p = {}", r.value);
        assert!(r.t_est.is_some_and(f64::is_finite), "p = {}", r.value);
    }
    let text = std::fs::read_to_string(table).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(out.path().join("sweep_blowdown__p=0.75.summary.json").exists());
}

#[test]
fn blow_up_sweep_over_p() {
    let out = tempfile::tempdir().unwrap();
    let (rows, _) = sweep(&scenario("sweep_blowup"), "p", &[2.5, 3.0], out.path()).unwrap();
    for r in &rows {
        assert_eq!(r.termination, "blow_up", "p = {}", r.value);
        assert!(r.t_est.is_some_and(f64::is_finite), "p = {}", r.value);
    }
}

#[test]
fn grid_sweep_converges_at_second_order() {
    let out = tempfile::tempdir().unwrap();
    let (rows, _) = sweep(&scenario("sech2"), "n", &[65.0, 129.0, 257.0], out.path()).unwrap();
    let errs: Vec<f64> = rows.iter().map(|r| (r.t_est.unwrap() - 1.0).abs()).collect();
    assert!(errs.windows(2).all(|e| e[1] < e[0]), "{errs:?}");
    for e in errs.windows(2) {
        let order = (e[0] / e[1]).log2();
        assert!((order - 2.0).abs() < 0.3, "order {order} from {errs:?}");
    }
}

#[test]
fn failed_sweep_values_are_recorded() {
    let out = tempfile::tempdir().unwrap();
    // l = -1 fails validation for that value only
    let (rows, _) = sweep(&scenario("constant"), "l", &[1.0, -1.0], out.path()).unwrap();
    assert!(rows[0].error.is_none());
    assert!(rows[1].error.is_some());
    assert_eq!(rows[1].termination, "error");
}

#[test]
fn unknown_sweep_parameter_is_a_usage_error() {
    let out = tempfile::tempdir().unwrap();
    let code = cli(&["--out", out.path().to_str().unwrap(), "sweep", scenario_path("constant").to_str().unwrap(), "--param", "beta", "--values", "1,2"]);
    assert_eq!(code, exit::VALIDATION);
}

#[test]
fn full_battery_passes() {
    let checks = verify::battery(false);
    assert!(checks.iter().all(|c| c.passed), "{}", verify::render_table(&checks));
    assert_eq!(cli(&["verify"]), exit::OK);
}

#[test]
fn quick_battery_passes() {
    let checks = verify::battery(true);
    assert!(checks.iter().all(|c| c.passed), "{}", verify::render_table(&checks));
}

/// Ghost-node stencil with the boundary flux term halved.
struct HalfFlux;

impl LineStencil for HalfFlux {
    fn apply(&self, w: &[f64], h: f64, lower: FluxPair, upper: FluxPair, out: &mut [f64]) {
        GhostNode.apply(w, h, (0.5 * lower.0, 0.5 * lower.1), (0.5 * upper.0, 0.5 * upper.1), out);
    }

    fn jacobian(&self, w: &[f64], h: f64, lower: FluxPair, upper: FluxPair, sub: &mut [f64], diag: &mut [f64], sup: &mut [f64]) {
        GhostNode.jacobian(w, h, (0.5 * lower.0, 0.5 * lower.1), (0.5 * upper.0, 0.5 * upper.1), sub, diag, sup);
    }
}

#[test]
fn injected_stencil_bug_fails_the_battery() {
    for quick in [true, false] {
        let checks = verify::battery_with(quick, &HalfFlux);
        let space = checks.iter().find(|c| c.name == "manufactured_space_order").unwrap();
        assert!(!space.passed, "{}", verify::render_table(&checks));
    }
}

#[test]
fn runs_are_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for name in ["sech2", "hemisphere", "cylinder_oscillating"] {
        let sc = scenario(name);
        let (_, fa) = run_scenario(&sc, a.path()).unwrap();
        let (_, fb) = run_scenario(&sc, b.path()).unwrap();
        assert_eq!(std::fs::read(&fa.csv).unwrap(), std::fs::read(&fb.csv).unwrap(), "{name}");
        let strip = |p: &Path| {
            let mut v = read_json(p);
            v.as_object_mut().unwrap().remove("wall_time_s");
            v
        };
        assert_eq!(strip(&fa.summary), strip(&fb.summary), "{name}");
    }
}

#[test]
fn exit_codes() {
    let out = tempfile::tempdir().unwrap();
    let dir = out.path();
    let o = dir.to_str().unwrap();
    let write = |name: &str, text: &str| {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    };

    let broken = write("broken.toml", "name = \"broken\"\nsolver = ");
    assert_eq!(cli(&["--out", o, "run", broken.to_str().unwrap()]), exit::VALIDATION);

    let invalid = write("invalid.toml", &UNDERFLOW.replace("n = 33", "n = 3"));
    assert_eq!(cli(&["--out", o, "run", invalid.to_str().unwrap()]), exit::VALIDATION);

    let underflow = write("underflow.toml", UNDERFLOW);
    assert_eq!(cli(&["--out", o, "run", underflow.to_str().unwrap()]), exit::FAILURE);
    let s = read_json(&dir.join("underflow.summary.json"));
    assert_eq!(s["termination"]["kind"], "step_underflow");

    // singular termination is a clean exit
    assert_eq!(cli(&["--out", o, "run", scenario_path("blowup_p3").to_str().unwrap()]), exit::OK);

    let missing = dir.join("nope.toml");
    assert_ne!(cli(&["--out", o, "run", missing.to_str().unwrap()]), exit::OK);
}

#[test]
fn invalid_scenarios_write_nothing() {
    let out = tempfile::tempdir().unwrap();
    let dir = out.path().join("runs");
    let bad = out.path().join("bad.toml");
    std::fs::write(&bad, UNDERFLOW.replace("t_final = 1.0", "t_final = -1.0")).unwrap();
    assert_eq!(cli(&["--out", dir.to_str().unwrap(), "run", bad.to_str().unwrap()]), exit::VALIDATION);
    assert!(!dir.exists() || std::fs::read_dir(&dir).unwrap().next().is_none());
}

#[test]
fn concurrent_sweep_leaves_only_complete_files() {
    let out = tempfile::tempdir().unwrap();
    sweep(&scenario("sech2"), "dt_init", &[1e-4, 2e-4, 5e-4, 1e-3], out.path()).unwrap();
    let names: Vec<String> = std::fs::read_dir(out.path()).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    assert!(names.iter().all(|n| !n.ends_with(".tmp")), "{names:?}");
    let csvs = names.iter().filter(|n| n.ends_with(".csv") && !n.contains(".sweep_")).count();
    let summaries = names.iter().filter(|n| n.ends_with(".summary.json")).count();
    assert_eq!((csvs, summaries), (4, 4));
}

#[test]
fn ordered_pair_compares_clean_and_reversed_pair_is_rejected() {
    let out = tempfile::tempdir().unwrap();
    let o = out.path().to_str().unwrap();
    let (low, high) = (scenario_path("compare_low"), scenario_path("compare_high"));
    assert_eq!(cli(&["--out", o, "compare", low.to_str().unwrap(), high.to_str().unwrap()]), exit::OK);
    let report = read_json(&out.path().join("compare_low_vs_compare_high.compare.json"));
    assert_eq!(report["ordered"], true);
    assert!(compare(&scenario("compare_high"), &scenario("compare_low")).is_err());
}

#[test]
fn overtaking_pair_reports_order_violation() {
    let out = tempfile::tempdir().unwrap();
    let dir = out.path();
    let base = |name: &str, p: f64, level: f64| {
        format!(
            "name = \"{name}\"\nsolver = \"line1d\"\nt_final = 5.0\n\n[domain]\nl = 1.0\nn = 33\n\n\
             [boundary]\nkind = \"robin\"\ngamma = 0.2\np = {p}\n\n[initial]\npreset = \"quadratic_log\"\nlevel = {level}\n"
        )
    };
    // the p = 3 solution starts below but blows up through the p = 1 one
    let low = dir.join("low.toml");
    let high = dir.join("high.toml");
    std::fs::write(&low, base("fast", 3.0, 0.9)).unwrap();
    std::fs::write(&high, base("slow", 1.0, 1.0)).unwrap();
    let code = cli(&["--out", dir.to_str().unwrap(), "compare", low.to_str().unwrap(), high.to_str().unwrap()]);
    assert_eq!(code, exit::ORDER_VIOLATED);
}

#[test]
fn fit_command_reads_a_run_table() {
    let out = tempfile::tempdir().unwrap();
    let (_, files) = run_scenario(&scenario("growth_p1"), out.path()).unwrap();
    let fit = logdiff_cli::commands::fit_csv(&files.csv, "u_max", "power".parse().unwrap(), Some((10.0, 100.0))).unwrap();
    assert!((0.9..=1.1).contains(&fit.parameter), "{}", fit.parameter);
    let code = cli(&["fit", files.csv.to_str().unwrap(), "--model", "power", "--window", "10,100", "--column", "u_max"]);
    assert_eq!(code, exit::OK);
    assert_ne!(cli(&["fit", files.csv.to_str().unwrap(), "--model", "power", "--column", "nope"]), exit::OK);
}

#[test]
fn every_shipped_scenario_validates() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/scenarios");
    let mut count = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let sc = LoadedScenario::from_file(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            sc.build().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            count += 1;
        }
    }
    assert!(count >= 10);
}

#[test]
fn disc_and_cylinder_tables_carry_extra_columns() {
    let out = tempfile::tempdir().unwrap();
    let (disc, _) = run_scenario(&scenario("hemisphere"), out.path()).unwrap();
    assert!(disc.csv.lines().next().unwrap().ends_with("gb_residual,u_boundary,mass_flux"));
    let (cyl, _) = run_scenario(&scenario("cylinder_oscillating"), out.path()).unwrap();
    assert!(cyl.csv.lines().next().unwrap().ends_with("gb_residual,envelope_gap"));
}
