//! Scenario files: TOML documents naming a solver, its domain, boundary
//! data, initial profile, solver settings, output times and analysis tasks.
//! The schema is documented in `docs/scenarios.md`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use logdiff_core::analysis::RateModel;
use logdiff_core::cylinder::{make_compatible_2d, BoundaryCurvature, CylinderGrid};
use logdiff_core::disc::{hemisphere_oracle, make_compatible_disc, DiscBoundary, RadialGrid};
use logdiff_core::domain::make_compatible_initial_data;
use logdiff_core::geometry::{self, MetricProfile};
use logdiff_core::solver1d::oracles;
use logdiff_core::{Interval1D, RobinBoundary, SolutionState, SolverConfig};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolverKind {
    #[serde(rename = "line1d")]
    Line1d,
    #[serde(rename = "disc")]
    Disc,
    #[serde(rename = "cylinder2d")]
    Cylinder2d,
}

impl SolverKind {
    pub fn name(&self) -> &'static str {
        match self {
            SolverKind::Line1d => "line1d",
            SolverKind::Disc => "disc",
            SolverKind::Cylinder2d => "cylinder2d",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub solver: SolverKind,
    pub t_final: f64,
    pub domain: DomainSpec,
    pub boundary: BoundarySpec,
    pub initial: InitialSpec,
    #[serde(default)]
    pub compatibility: CompatibilitySpec,
    #[serde(default)]
    pub config: SolverConfig,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub analysis: Vec<AnalysisTask>,
}

/// `l` is the half-length of the line or cylinder (for `example_metric`, of
/// the metric coordinate) and the radius of the disc.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub l: f64,
    pub n: usize,
    #[serde(default)]
    pub ntheta: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundarySpec {
    /// `∂u/∂η = 2γuᵖ`. `gamma` may be left out for the `sech2` and
    /// `example_metric` profiles, which determine it.
    Robin {
        #[serde(default)]
        gamma: Option<f64>,
        p: f64,
    },
    /// Disc rim with geodesic curvature `beta`.
    Curvature { beta: f64 },
    /// Cylinder boundary curvature `φ(θ, t)`.
    Phi {
        preset: PhiPreset,
        #[serde(default)]
        value: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiPreset {
    /// `φ = value`
    Constant,
    /// `φ = 0.5 + 0.25 sin θ cos t`
    Oscillating,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    Constant { c: f64 },
    /// `(T − t)·2c² sech²(cx)` at `t = 0`.
    Sech2 { c: f64, t_blow: f64 },
    /// `8T/(1 + r²)²`
    Hemisphere { t_blow: f64 },
    /// `dx² + (cos x − x²/4)² dθ²` on `[-l, l]`, in conformal form.
    ExampleMetric,
    /// `log u = log a + s (x² − l²)/l` with boundary value `a = level`
    /// (default 1). `s` defaults to `γ aᵖ⁻¹`, which makes the data exactly
    /// compatible.
    QuadraticLog {
        #[serde(default)]
        slope: Option<f64>,
        #[serde(default)]
        level: Option<f64>,
    },
    /// Node table interpolated linearly onto the grid.
    Custom { x: Vec<f64>, u: Vec<f64> },
}

impl InitialSpec {
    pub fn name(&self) -> &'static str {
        match self {
            InitialSpec::Constant { .. } => "constant",
            InitialSpec::Sech2 { .. } => "sech2",
            InitialSpec::Hemisphere { .. } => "hemisphere",
            InitialSpec::ExampleMetric => "example_metric",
            InitialSpec::QuadraticLog { .. } => "quadratic_log",
            InitialSpec::Custom { .. } => "custom",
        }
    }
}

/// Boundary collar applied to make the initial data compatible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompatibilitySpec {
    #[serde(default = "yes")]
    pub collar: bool,
    /// Defaults to a quarter of the half-length (radius).
    #[serde(default)]
    pub width: Option<f64>,
}

fn yes() -> bool {
    true
}

impl Default for CompatibilitySpec {
    fn default() -> Self {
        Self { collar: true, width: None }
    }
}

/// Exactly one of `times`, `every` or `count`; `count = 100` when empty.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub times: Option<Vec<f64>>,
    #[serde(default)]
    pub every: Option<f64>,
    #[serde(default)]
    pub count: Option<usize>,
}

/// Scalar series a fit can be taken on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    UMin,
    UMax,
    Mass,
    Area,
    Length,
    Flatness,
}

impl Quantity {
    pub fn name(&self) -> &'static str {
        match self {
            Quantity::UMin => "u_min",
            Quantity::UMax => "u_max",
            Quantity::Mass => "mass",
            Quantity::Area => "area",
            Quantity::Length => "length",
            Quantity::Flatness => "flatness",
        }
    }

    pub fn pick(&self, row: &logdiff_core::DiagnosticRow) -> f64 {
        match self {
            Quantity::UMin => row.u_min,
            Quantity::UMax => row.u_max,
            Quantity::Mass => row.mass,
            Quantity::Area => row.area,
            Quantity::Length => row.length,
            Quantity::Flatness => row.u_max / row.u_min,
        }
    }
}

/// Which rows a series is read from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowSet {
    /// Initial state and the requested output times.
    #[default]
    Output,
    /// Every accepted step.
    Steps,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case", deny_unknown_fields)]
pub enum AnalysisTask {
    Fit {
        quantity: Quantity,
        model: RateModel,
        #[serde(default)]
        window: Option<[f64; 2]>,
        #[serde(default)]
        rows: RowSet,
    },
    SingularTime,
    /// Finite-time mass bound for `p < 1, γ < 0` or `p > 2, γ > 0`.
    MassBound,
    /// `∂_xx log u` keeps its initial sign up to `c (h² + dt)`.
    SignPreservation {
        #[serde(default = "default_sign_c")]
        c: f64,
    },
    MassLaw,
    AreaLaw,
    LengthLaw,
    GaussBonnet,
    /// Area–length inequality with `α` the largest boundary `|k|` of each
    /// state unless given.
    AreaLength {
        #[serde(default)]
        alpha: Option<f64>,
    },
    Flatness,
    /// `R_max(t) ≤ B/(1 − Bt) + slack` with `B = R_max(0)`.
    CurvatureEnvelope {
        #[serde(default = "default_envelope_slack")]
        slack: f64,
    },
    /// Early and late suprema of `log u_max / t` over the window.
    Ceiling { window: [f64; 2] },
    /// Early and late infima of `log u_min / t²` over the window.
    Floor { window: [f64; 2] },
    /// Cylinder runs: containment between the 1D envelope runs.
    Envelope {
        #[serde(default = "default_envelope_tol")]
        tol: f64,
    },
}

fn default_sign_c() -> f64 {
    10.0
}

fn default_envelope_slack() -> f64 {
    1e-3
}

fn default_envelope_tol() -> f64 {
    1e-8
}

impl AnalysisTask {
    /// Stable key for the summary.
    pub fn label(&self) -> String {
        match self {
            AnalysisTask::Fit { quantity, model, .. } => {
                let m = serde_json::to_value(model).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
                format!("fit_{}_{}", quantity.name(), m)
            }
            AnalysisTask::SingularTime => "singular_time".into(),
            AnalysisTask::MassBound => "mass_bound".into(),
            AnalysisTask::SignPreservation { .. } => "sign_preservation".into(),
            AnalysisTask::MassLaw => "mass_law".into(),
            AnalysisTask::AreaLaw => "area_law".into(),
            AnalysisTask::LengthLaw => "length_law".into(),
            AnalysisTask::GaussBonnet => "gauss_bonnet".into(),
            AnalysisTask::AreaLength { .. } => "area_length".into(),
            AnalysisTask::Flatness => "flatness".into(),
            AnalysisTask::CurvatureEnvelope { .. } => "curvature_envelope".into(),
            AnalysisTask::Ceiling { .. } => "ceiling".into(),
            AnalysisTask::Floor { .. } => "floor".into(),
            AnalysisTask::Envelope { .. } => "envelope".into(),
        }
    }
}

/// Concrete problem built from a scenario.
#[derive(Debug, Clone)]
pub enum Problem {
    Line { dom: Interval1D, bc: RobinBoundary, u0: SolutionState },
    Disc { grid: RadialGrid, bcd: DiscBoundary, u0: SolutionState },
    Cylinder { grid: CylinderGrid, phi: BoundaryCurvature, u0: SolutionState },
}

impl Problem {
    pub fn initial(&self) -> &SolutionState {
        match self {
            Problem::Line { u0, .. } | Problem::Disc { u0, .. } | Problem::Cylinder { u0, .. } => u0,
        }
    }

    /// Spacing in the `x` (or `r`) direction.
    pub fn spacing(&self) -> f64 {
        match self {
            Problem::Line { dom, .. } => dom.spacing(),
            Problem::Disc { grid, .. } => grid.spacing(),
            Problem::Cylinder { grid, .. } => grid.hx(),
        }
    }
}

/// A scenario together with the text it was read from, for error locations.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub path: PathBuf,
    pub text: String,
    pub scenario: Scenario,
}

pub const SWEEPABLE: [&str; 5] = ["p", "gamma", "l", "n", "dt_init"];

impl LoadedScenario {
    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_str(path, &text)
    }

    pub fn from_str(path: &Path, text: &str) -> CliResult<Self> {
        let scenario: Scenario = toml::from_str(text).map_err(|e| CliError::Parse { path: path.to_owned(), message: e.to_string() })?;
        let loaded = Self { path: path.to_owned(), text: text.to_owned(), scenario };
        loaded.validate()?;
        Ok(loaded)
    }

    /// Validation error pointed at the first line mentioning `key`.
    pub fn invalid(&self, key: &str, message: impl Into<String>) -> CliError {
        CliError::Validation { path: self.path.clone(), line: line_of(&self.text, key), message: message.into() }
    }

    fn validate(&self) -> CliResult<()> {
        let s = &self.scenario;
        if s.name.is_empty() || !s.name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.=".contains(c)) {
            return Err(self.invalid("name", format!("name '{}' must be non-empty and use only [A-Za-z0-9-_.=]", s.name)));
        }
        if !(s.t_final.is_finite() && s.t_final > 0.0) {
            return Err(self.invalid("t_final", "t_final must be positive"));
        }
        if !(s.domain.l.is_finite() && s.domain.l > 0.0) {
            return Err(self.invalid("l", "domain.l must be positive"));
        }
        if s.domain.n < 5 {
            return Err(self.invalid("n", "domain.n must be at least 5"));
        }
        s.config.validate().map_err(|e| self.invalid("[config]", e.to_string()))?;
        self.output_times()?;

        match (s.solver, &s.boundary) {
            (SolverKind::Line1d, BoundarySpec::Robin { .. }) => {}
            (SolverKind::Disc, BoundarySpec::Robin { .. } | BoundarySpec::Curvature { .. }) => {}
            (SolverKind::Cylinder2d, BoundarySpec::Phi { preset, value }) => {
                if *preset == PhiPreset::Constant && value.is_none() {
                    return Err(self.invalid("preset", "phi preset 'constant' needs a value"));
                }
            }
            (kind, _) => {
                return Err(self.invalid("kind", format!("boundary kind does not apply to solver '{}'", kind.name())));
            }
        }
        if s.solver == SolverKind::Cylinder2d && s.domain.ntheta.is_none_or(|m| m < 4) {
            return Err(self.invalid("ntheta", "cylinder2d needs domain.ntheta >= 4"));
        }
        if s.solver != SolverKind::Cylinder2d && s.domain.ntheta.is_some() {
            return Err(self.invalid("ntheta", "ntheta only applies to cylinder2d"));
        }

        let allowed: &[&str] = match s.solver {
            SolverKind::Line1d => &["constant", "sech2", "example_metric", "quadratic_log", "custom"],
            SolverKind::Disc => &["constant", "hemisphere", "custom"],
            SolverKind::Cylinder2d => &["constant", "quadratic_log", "custom"],
        };
        if !allowed.contains(&s.initial.name()) {
            return Err(self.invalid("preset", format!("initial preset '{}' is not available for {}", s.initial.name(), s.solver.name())));
        }
        if let BoundarySpec::Robin { gamma: None, .. } = s.boundary {
            if !matches!(s.initial, InitialSpec::Sech2 { .. } | InitialSpec::ExampleMetric) {
                return Err(self.invalid("[boundary]", "boundary.gamma is required for this initial preset"));
            }
        }
        if let InitialSpec::Sech2 { .. } = s.initial {
            if let BoundarySpec::Robin { p, .. } = s.boundary {
                if p != 1.0 {
                    return Err(self.invalid("p", "the sech2 profile is a solution only for p = 1"));
                }
            }
        }
        if let InitialSpec::QuadraticLog { level: Some(a), .. } = s.initial {
            if !(a > 0.0 && a.is_finite()) {
                return Err(self.invalid("level", "initial.level must be positive"));
            }
        }
        if let InitialSpec::QuadraticLog { slope: None, .. } = s.initial {
            if let BoundarySpec::Phi { preset: PhiPreset::Oscillating, .. } = s.boundary {
                return Err(self.invalid("preset", "the quadratic_log profile needs an explicit slope with oscillating phi"));
            }
        }
        if let InitialSpec::Custom { x, u } = &s.initial {
            if x.len() != u.len() || x.len() < 2 {
                return Err(self.invalid("x", "custom table needs matching x and u arrays of length >= 2"));
            }
            if !x.windows(2).all(|p| p[1] > p[0]) {
                return Err(self.invalid("x", "custom x values must increase"));
            }
            if !u.iter().all(|v| v.is_finite() && *v > 0.0) {
                return Err(self.invalid("u", "custom u values must be positive"));
            }
            let (lo, hi) = if s.solver == SolverKind::Disc { (0.0, s.domain.l) } else { (-s.domain.l, s.domain.l) };
            let eps = 1e-12 * s.domain.l;
            if x[0] > lo + eps || x[x.len() - 1] < hi - eps {
                return Err(self.invalid("x", format!("custom x must cover [{lo}, {hi}]")));
            }
        }
        for task in &s.analysis {
            if let AnalysisTask::Fit { window: Some([a, b]), .. } | AnalysisTask::Ceiling { window: [a, b] } | AnalysisTask::Floor { window: [a, b] } = task {
                if !(a < b) {
                    return Err(self.invalid("window", format!("window [{a}, {b}] is empty")));
                }
            }
        }
        Ok(())
    }

    /// Output times strictly inside `(0, t_final]`.
    pub fn output_times(&self) -> CliResult<Vec<f64>> {
        let s = &self.scenario;
        let o = &s.output;
        let set = [o.times.is_some(), o.every.is_some(), o.count.is_some()].iter().filter(|b| **b).count();
        if set > 1 {
            return Err(self.invalid("[output]", "give only one of output.times, output.every, output.count"));
        }
        let times = if let Some(t) = &o.times {
            if !t.windows(2).all(|p| p[1] > p[0]) || t.iter().any(|v| !(*v > 0.0 && *v <= s.t_final)) {
                return Err(self.invalid("times", "output times must increase and lie in (0, t_final]"));
            }
            t.clone()
        } else if let Some(every) = o.every {
            if !(every > 0.0) {
                return Err(self.invalid("every", "output.every must be positive"));
            }
            let k = (s.t_final / every * (1.0 + 1e-12)).floor() as usize;
            (1..=k).map(|i| (i as f64 * every).min(s.t_final)).collect()
        } else {
            let k = o.count.unwrap_or(100);
            if k == 0 {
                return Err(self.invalid("count", "output.count must be positive"));
            }
            (1..=k).map(|i| s.t_final * (i as f64 / k as f64)).collect()
        };
        Ok(times)
    }

    fn gamma(&self) -> CliResult<f64> {
        match (self.scenario.boundary, &self.scenario.initial) {
            (BoundarySpec::Robin { gamma: Some(g), .. }, _) => Ok(g),
            (BoundarySpec::Robin { gamma: None, .. }, InitialSpec::Sech2 { c, .. }) => Ok(oracles::sech2_gamma(*c, self.scenario.domain.l)),
            (BoundarySpec::Robin { gamma: None, .. }, InitialSpec::ExampleMetric) => {
                let l = self.scenario.domain.l;
                Ok(geometry::example::df(l) / geometry::example::f(l))
            }
            _ => Err(self.invalid("[boundary]", "boundary.gamma is required")),
        }
    }

    fn collar_width(&self, extent: f64) -> f64 {
        self.scenario.compatibility.width.unwrap_or(0.25 * extent)
    }

    /// Builds grid, boundary data and (compatible) initial state.
    pub fn build(&self) -> CliResult<Problem> {
        let s = &self.scenario;
        let d = s.domain;
        let wrap = |key: &str, e: logdiff_core::Error| self.invalid(key, e.to_string());
        match s.solver {
            SolverKind::Line1d => {
                let BoundarySpec::Robin { p, .. } = s.boundary else { unreachable!("validated") };
                let bc = RobinBoundary::new(self.gamma()?, p).map_err(|e| wrap("[boundary]", e))?;
                let (dom, profile) = match &s.initial {
                    InitialSpec::ExampleMetric => {
                        let mut mp: MetricProfile = geometry::example_profile();
                        mp.l = d.l;
                        let (dom, st) = geometry::profile_to_conformal(&mp, d.n).map_err(|e| wrap("preset", e))?;
                        (dom, st.u())
                    }
                    other => {
                        let dom = Interval1D::new(d.l, d.n).map_err(|e| wrap("[domain]", e))?;
                        let u = self.line_profile(other, &dom.nodes(), bc.gamma, p)?;
                        (dom, u)
                    }
                };
                let u0 = if s.compatibility.collar {
                    make_compatible_initial_data(&profile, &bc, &dom, self.collar_width(dom.half_length()))
                } else {
                    SolutionState::from_u(0.0, &profile)
                }
                .map_err(|e| wrap("[compatibility]", e))?;
                Ok(Problem::Line { dom, bc, u0 })
            }
            SolverKind::Disc => {
                let grid = RadialGrid::new(d.l, d.n).map_err(|e| wrap("[domain]", e))?;
                let bcd = match s.boundary {
                    BoundarySpec::Robin { p, .. } => DiscBoundary::Robin(RobinBoundary::new(self.gamma()?, p).map_err(|e| wrap("[boundary]", e))?),
                    BoundarySpec::Curvature { beta } => DiscBoundary::Curvature { beta, a: d.l },
                    BoundarySpec::Phi { .. } => unreachable!("validated"),
                };
                let r = grid.nodes();
                let profile: Vec<f64> = match &s.initial {
                    InitialSpec::Constant { c } => vec![*c; r.len()],
                    InitialSpec::Hemisphere { t_blow } => r.iter().map(|&r| hemisphere_oracle(r, 0.0, *t_blow)).collect(),
                    InitialSpec::Custom { x, u } => r.iter().map(|&r| interpolate(x, u, r)).collect(),
                    _ => unreachable!("validated"),
                };
                let u0 = if s.compatibility.collar {
                    make_compatible_disc(&profile, &bcd, &grid, self.collar_width(d.l))
                } else {
                    SolutionState::from_u(0.0, &profile)
                }
                .map_err(|e| wrap("[compatibility]", e))?;
                Ok(Problem::Disc { grid, bcd, u0 })
            }
            SolverKind::Cylinder2d => {
                let ntheta = d.ntheta.expect("validated");
                let grid = CylinderGrid::new(d.l, d.n, ntheta).map_err(|e| wrap("[domain]", e))?;
                let BoundarySpec::Phi { preset, value } = s.boundary else { unreachable!("validated") };
                let phi = match preset {
                    PhiPreset::Constant => BoundaryCurvature::constant(value.expect("validated")),
                    PhiPreset::Oscillating => BoundaryCurvature::oscillating(),
                };
                let line = grid.line();
                // the cylinder flux 2φu^{1/2} is the Robin flux with p = 3/2
                let gamma = value.unwrap_or(0.0);
                let column = self.line_profile(&s.initial, &line.nodes(), gamma, 1.5)?;
                let profile: Vec<f64> = (0..ntheta).flat_map(|_| column.iter().copied()).collect();
                let u0 = if s.compatibility.collar {
                    make_compatible_2d(&profile, &phi, &grid, self.collar_width(d.l))
                } else {
                    SolutionState::from_u(0.0, &profile)
                }
                .map_err(|e| wrap("[compatibility]", e))?;
                Ok(Problem::Cylinder { grid, phi, u0 })
            }
        }
    }

    fn line_profile(&self, init: &InitialSpec, x: &[f64], gamma: f64, p: f64) -> CliResult<Vec<f64>> {
        let l = self.scenario.domain.l;
        let u = match init {
            InitialSpec::Constant { c } => vec![*c; x.len()],
            InitialSpec::Sech2 { c, t_blow } => x.iter().map(|&x| oracles::sech2(x, 0.0, *c, *t_blow)).collect(),
            InitialSpec::QuadraticLog { slope, level } => {
                let a = level.unwrap_or(1.0);
                let s = slope.unwrap_or(gamma * a.powf(p - 1.0));
                x.iter().map(|&x| a * (s * (x * x - l * l) / l).exp()).collect()
            }
            InitialSpec::Custom { x: xs, u } => x.iter().map(|&x| interpolate(xs, u, x)).collect(),
            _ => unreachable!("validated"),
        };
        if let Some(i) = u.iter().position(|v: &f64| !(v.is_finite() && *v > 0.0)) {
            return Err(self.invalid("preset", format!("initial profile is not positive at x = {}", x[i])));
        }
        Ok(u)
    }

    /// Copy with one sweepable parameter replaced and the name suffixed.
    pub fn with_parameter(&self, param: &str, value: f64) -> CliResult<LoadedScenario> {
        let mut next = self.clone();
        let s = &mut next.scenario;
        match (param, &mut s.boundary) {
            ("p", BoundarySpec::Robin { p, .. }) => *p = value,
            ("gamma", BoundarySpec::Robin { gamma, .. }) => *gamma = Some(value),
            ("gamma", BoundarySpec::Phi { preset: PhiPreset::Constant, value: v }) => *v = Some(value),
            ("l", _) => s.domain.l = value,
            ("n", _) => {
                if value.fract() != 0.0 || value < 5.0 {
                    return Err(CliError::Usage(format!("n must be an integer >= 5, got {value}")));
                }
                s.domain.n = value as usize;
            }
            ("dt_init", _) => s.config.dt_init = value,
            ("p" | "gamma", _) => return Err(self.invalid("[boundary]", format!("'{param}' is not a parameter of this boundary"))),
            _ => return Err(CliError::Usage(format!("'{param}' is not sweepable; choose one of {SWEEPABLE:?}"))),
        }
        s.name = format!("{}__{param}={value}", s.name);
        next.validate()?;
        Ok(next)
    }
}

fn interpolate(x: &[f64], u: &[f64], at: f64) -> f64 {
    let k = x.partition_point(|v| *v <= at).clamp(1, x.len() - 1);
    let (x0, x1) = (x[k - 1], x[k]);
    let s = ((at - x0) / (x1 - x0)).clamp(0.0, 1.0);
    u[k - 1] + s * (u[k] - u[k - 1])
}

/// 1-based line of the first occurrence of `key` as a key or table header.
fn line_of(text: &str, key: &str) -> usize {
    let bare = key.trim_matches(|c| c == '[' || c == ']');
    for (i, line) in text.lines().enumerate() {
        let t = line.trim_start();
        if key.starts_with('[') {
            if t.starts_with('[') && t.trim_matches(|c| c == '[' || c == ']' || c == ' ') == bare {
                return i + 1;
            }
        } else if let Some(rest) = t.strip_prefix(bare) {
            if rest.trim_start().starts_with('=') {
                return i + 1;
            }
        }
    }
    1
}
