//! Scenario configs, the engine pipeline behind `fickjacobs evolve`, and the
//! tables written by the other subcommands.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::analytic::{self, ClosedFormInit, EigenmodeInit, GaussianInit, Prefactor};
use crate::error::Error;
use crate::fdsolver::{self, BoundaryCondition, SolverConfig};
use crate::field::{error_norms_in_window, total_mass, uniform_grid, ConcentrationField};
use crate::geometry::{ChannelProfile, DiffusionModel, Family};
use crate::interp::resample;
use crate::mapping::{self, build_schrodinger_map, SchrodingerMap};
use crate::spectral::{self, SpectralBoundary, DEFAULT_TAIL_TOL, MAX_AUTO_MODES};

pub const SCHEMA_VERSION: u32 = 1;

/// A config problem, attributed to the offending field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("{engine} failed: {source}")]
    Engine { engine: &'static str, source: Error },
    #[error("cannot write {}: {message}", path.display())]
    Output { path: PathBuf, message: String },
}

impl ScenarioError {
    /// 2 for config errors, 3 for anything raised while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            ScenarioError::Config(_) => 2,
            _ => 3,
        }
    }
}

pub type ScenarioResult<T> = std::result::Result<T, ScenarioError>;

fn config_error<T>(field: &str, message: impl Into<String>) -> ScenarioResult<T> {
    Err(ConfigError { field: field.into(), message: message.into() }.into())
}

fn engine(name: &'static str) -> impl Fn(Error) -> ScenarioError {
    move |source| ScenarioError::Engine { engine: name, source }
}

// Config schema.

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSpec {
    Conical {
        lambda: f64,
    },
    Throat {
        alpha: f64,
        #[serde(default)]
        beta: f64,
    },
    Cylinder {
        area: f64,
    },
    Sinusoidal {
        amplitude: f64,
        gamma: f64,
        #[serde(default)]
        cell: i64,
    },
    GaussianArea {
        a: f64,
        #[serde(default)]
        b: f64,
        #[serde(default)]
        c: f64,
    },
    Tabulated {
        x: Vec<f64>,
        area: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiffusionSpec {
    Constant { d0: f64 },
    RegueraRubi { d0: f64 },
    Exponential { d0: f64, rate: f64 },
    Tabulated { x: Vec<f64>, d: Vec<f64> },
}

impl Default for DiffusionSpec {
    fn default() -> Self {
        DiffusionSpec::Constant { d0: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrefactorSpec {
    #[default]
    Evolved,
    Initial,
}

impl From<PrefactorSpec> for Prefactor {
    fn from(p: PrefactorSpec) -> Self {
        match p {
            PrefactorSpec::Evolved => Prefactor::Evolved,
            PrefactorSpec::Initial => Prefactor::Initial,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    Gaussian {
        sigma: f64,
        a0: f64,
        #[serde(default)]
        prefactor: PrefactorSpec,
    },
    Eigenmode {
        n: usize,
        #[serde(default)]
        prefactor: PrefactorSpec,
    },
    /// Sampled `(x, C)` pairs, resampled onto the grid.
    Tabulated { x: Vec<f64>, c: Vec<f64> },
    /// `e^{f}` anchored at `x0`.
    Stationary {},
}

impl InitialSpec {
    fn kind(&self) -> &'static str {
        match self {
            InitialSpec::Gaussian { .. } => "gaussian",
            InitialSpec::Eigenmode { .. } => "eigenmode",
            InitialSpec::Tabulated { .. } => "tabulated",
            InitialSpec::Stationary {} => "stationary",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Analytic,
    Spectral,
    Numeric,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::Analytic => "analytic",
            Engine::Spectral => "spectral",
            Engine::Numeric => "numeric",
        }
    }

    /// Parses `a`, `s`, `n` or the full engine name.
    pub fn parse(s: &str) -> Option<Engine> {
        match s.trim() {
            "a" | "analytic" => Some(Engine::Analytic),
            "s" | "spectral" => Some(Engine::Spectral),
            "n" | "numeric" => Some(Engine::Numeric),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparisonSpec {
    #[serde(default = "yes")]
    pub mass_normalize: bool,
    /// Restrict norms to nodes inside `[lo, hi]`.
    #[serde(default)]
    pub window: Option<[f64; 2]>,
}

fn yes() -> bool {
    true
}

impl Default for ComparisonSpec {
    fn default() -> Self {
        Self { mass_normalize: true, window: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundarySpec {
    NoFlux,
    DirichletZero,
    DirichletAnalytic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericSpec {
    /// Defaults to `dirichlet_zero` when an end sits on a zero of `A`,
    /// `dirichlet_analytic` when a reference solution exists, else `no_flux`.
    #[serde(default)]
    pub bc: Option<BoundarySpec>,
    #[serde(default)]
    pub startup_steps: usize,
    #[serde(default = "default_solver_tolerance")]
    pub tolerance: f64,
}

fn default_solver_tolerance() -> f64 {
    1e-12
}

impl Default for NumericSpec {
    fn default() -> Self {
        Self { bc: None, startup_steps: 0, tolerance: default_solver_tolerance() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralSpec {
    /// Fixed mode count; otherwise chosen by the Parseval tail criterion.
    #[serde(default)]
    pub n_modes: Option<usize>,
    #[serde(default = "default_max_modes")]
    pub max_modes: usize,
    #[serde(default = "default_parseval_tolerance")]
    pub parseval_tolerance: f64,
    /// Largest admissible share of `∫φ0²` next to the truncation boundary.
    #[serde(default = "default_tail_tolerance")]
    pub tail_tolerance: f64,
}

fn default_max_modes() -> usize {
    MAX_AUTO_MODES
}

fn default_parseval_tolerance() -> f64 {
    DEFAULT_TAIL_TOL
}

fn default_tail_tolerance() -> f64 {
    1e-12
}

impl Default for SpectralSpec {
    fn default() -> Self {
        Self {
            n_modes: None,
            max_modes: default_max_modes(),
            parseval_tolerance: default_parseval_tolerance(),
            tail_tolerance: default_tail_tolerance(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SusySpec {
    /// CSV with columns `x,W`, relative to the config file.
    pub w_file: PathBuf,
    #[serde(default = "one")]
    pub alpha2: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema: u32,
    #[serde(default)]
    pub name: Option<String>,
    pub profile: ProfileSpec,
    #[serde(default)]
    pub diffusion: DiffusionSpec,
    #[serde(default)]
    pub initial: Option<InitialSpec>,
    pub domain: [f64; 2],
    pub grid_points: usize,
    /// Anchor of `y` and `f`; defaults to 0 when inside the domain, else the midpoint.
    #[serde(default)]
    pub x0: Option<f64>,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub t_final: Option<f64>,
    #[serde(default)]
    pub snapshots: Vec<f64>,
    #[serde(default)]
    pub engines: Vec<Engine>,
    #[serde(default)]
    pub comparison: ComparisonSpec,
    #[serde(default)]
    pub numeric: NumericSpec,
    #[serde(default)]
    pub spectral: SpectralSpec,
    #[serde(default)]
    pub susy: Option<SusySpec>,
    /// Directory for relative paths inside the config; set by [`load_config`].
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> ScenarioResult<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| ConfigError {
            field: "<document>".into(),
            message: e.to_string(),
        })?;
        if cfg.schema != SCHEMA_VERSION {
            return config_error("schema", format!("unsupported version {}, expected {SCHEMA_VERSION}", cfg.schema));
        }
        Ok(cfg)
    }

    pub fn display_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| "scenario".into())
    }
}

/// Reads a config; the file stem names scenarios that carry no `name`.
pub fn load_config(path: &Path) -> ScenarioResult<ScenarioConfig> {
    let text = fs::read_to_string(path).map_err(|e| ConfigError {
        field: "<file>".into(),
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    let mut cfg = ScenarioConfig::from_json(&text)?;
    if cfg.name.is_none() {
        cfg.name = path.file_stem().map(|s| s.to_string_lossy().into_owned());
    }
    cfg.base_dir = path.parent().map(Path::to_path_buf);
    Ok(cfg)
}

// Validated problem.

/// A config resolved into library objects.
#[derive(Debug, Clone)]
pub struct Problem {
    pub profile: ChannelProfile,
    pub model: DiffusionModel,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    pub x0: f64,
}

impl Problem {
    pub fn from_config(cfg: &ScenarioConfig) -> ScenarioResult<Self> {
        let profile = build_profile(&cfg.profile)?;
        let model = build_model(&cfg.diffusion)?;
        let [lo, hi] = cfg.domain;
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return config_error("domain", format!("need finite x_lo < x_hi, got [{lo}, {hi}]"));
        }
        let dom = profile.domain();
        for (end, x) in [("lower", lo), ("upper", hi)] {
            if !(dom.contains(x) || dom.is_open_endpoint(x)) {
                return config_error(
                    "domain",
                    format!("{end} end {x} lies outside the profile domain ({}, {})", dom.lo, dom.hi),
                );
            }
        }
        if cfg.grid_points < 3 {
            return config_error("grid_points", format!("need at least 3, got {}", cfg.grid_points));
        }
        let x0 = match cfg.x0 {
            Some(x0) if !(dom.contains(x0) && x0 >= lo && x0 <= hi) => {
                return config_error("x0", format!("{x0} must lie inside the truncation and the profile domain"));
            }
            Some(x0) => x0,
            None if lo <= 0.0 && 0.0 <= hi && dom.contains(0.0) => 0.0,
            None => 0.5 * (lo + hi),
        };
        Ok(Self { profile, model, lo, hi, n: cfg.grid_points, x0 })
    }

    /// True when either truncation end sits on a zero of the area.
    pub fn touches_wall(&self) -> bool {
        let dom = self.profile.domain();
        dom.is_open_endpoint(self.lo) || dom.is_open_endpoint(self.hi)
    }

    fn map(&self, field: &str) -> ScenarioResult<SchrodingerMap> {
        if self.touches_wall() {
            return config_error(field, "the transformed problem needs a truncation strictly inside the profile domain");
        }
        build_schrodinger_map(&self.model, &self.profile, self.x0, (self.lo, self.hi), self.n).map_err(engine("mapping"))
    }

    /// Geometry or diffusion taken from a table, whose second derivatives are approximate.
    pub fn derivative_warning(&self) -> bool {
        matches!(self.profile.family(), Family::Tabulated(_)) || matches!(self.model, DiffusionModel::Tabulated(_))
    }
}

fn build_profile(spec: &ProfileSpec) -> ScenarioResult<ChannelProfile> {
    let built = match spec {
        ProfileSpec::Conical { lambda } => ChannelProfile::conical(*lambda),
        ProfileSpec::Throat { alpha, beta } => ChannelProfile::throat(*alpha, *beta),
        ProfileSpec::Cylinder { area } => ChannelProfile::cylinder(*area),
        ProfileSpec::Sinusoidal { amplitude, gamma, cell } => ChannelProfile::sinusoidal(*amplitude, *gamma, *cell),
        ProfileSpec::GaussianArea { a, b, c } => ChannelProfile::gaussian_area(*a, *b, *c),
        ProfileSpec::Tabulated { x, area } => ChannelProfile::tabulated(x.clone(), area.clone()),
    };
    built.map_err(|e| ConfigError { field: "profile".into(), message: e.to_string() }.into())
}

fn build_model(spec: &DiffusionSpec) -> ScenarioResult<DiffusionModel> {
    let built = match spec {
        DiffusionSpec::Constant { d0 } => DiffusionModel::constant(*d0),
        DiffusionSpec::RegueraRubi { d0 } => DiffusionModel::reguera_rubi(*d0),
        DiffusionSpec::Exponential { d0, rate } => DiffusionModel::exponential(*d0, *rate),
        DiffusionSpec::Tabulated { x, d } => DiffusionModel::tabulated(x.clone(), d.clone()),
    };
    built.map_err(|e| ConfigError { field: "diffusion".into(), message: e.to_string() }.into())
}

/// Closed form available for this initial condition, if any.
fn closed_form_init(problem: &Problem, init: &InitialSpec) -> ScenarioResult<Option<ClosedFormInit>> {
    let constant = problem.model.constant_value().is_some();
    let family = problem.profile.family();
    match init {
        InitialSpec::Gaussian { sigma, a0, prefactor } => {
            let g = GaussianInit::new(*sigma, *a0, (*prefactor).into())
                .map_err(|e| ConfigError { field: "initial".into(), message: e.to_string() })?;
            let has = constant && matches!(family, Family::Conical { .. } | Family::Throat { .. } | Family::Sinusoidal { .. });
            Ok(has.then_some(ClosedFormInit::Gaussian(g)))
        }
        InitialSpec::Eigenmode { n, prefactor } => match family {
            Family::GaussianArea { a, .. } if constant => {
                let m = EigenmodeInit::new(*n, *a, (*prefactor).into())
                    .map_err(|e| ConfigError { field: "initial".into(), message: e.to_string() })?;
                Ok(Some(ClosedFormInit::Eigenmode(m)))
            }
            _ => config_error("initial", "eigenmode data need a gaussian_area channel with constant diffusion"),
        },
        InitialSpec::Tabulated { .. } | InitialSpec::Stationary {} => Ok(None),
    }
}

fn initial_field(problem: &Problem, init: &InitialSpec, closed: Option<&ClosedFormInit>) -> ScenarioResult<ConcentrationField> {
    let (lo, hi, n) = (problem.lo, problem.hi, problem.n);
    match (init, closed) {
        (_, Some(c)) => ConcentrationField::try_from_fn(lo, hi, n, 0.0, |x| {
            analytic::closed_form(&problem.profile, &problem.model, c, x, 0.0)
        })
        .map_err(engine("analytic")),
        (InitialSpec::Gaussian { sigma, a0, prefactor }, None) => {
            // C0 = e^{f} g, the same lift the closed forms use.
            let g = GaussianInit::new(*sigma, *a0, (*prefactor).into()).map_err(engine("initial"))?;
            let lift = analytic::stationary_profile(&problem.profile, &problem.model, problem.x0, (lo, hi), n)
                .map_err(engine("initial"))?;
            let values = lift.field.x().iter().zip(lift.field.values()).map(|(&x, e)| e * g.spread(1.0, x, 0.0)).collect();
            lift.field.with_values(values, 0.0).map_err(engine("initial"))
        }
        (InitialSpec::Tabulated { x, c }, None) => {
            let grid = uniform_grid(lo, hi, n);
            let values = resample(x, c, &grid).map_err(|e| ConfigError { field: "initial".into(), message: e.to_string() })?;
            ConcentrationField::new(grid, values, 0.0).map_err(engine("initial"))
        }
        (InitialSpec::Stationary {}, None) => {
            analytic::stationary_profile(&problem.profile, &problem.model, problem.x0, (lo, hi), n)
                .map(|s| s.field)
                .map_err(engine("initial"))
        }
        (InitialSpec::Eigenmode { .. }, None) => unreachable!("eigenmode data always have a closed form"),
    }
}

/// Source of exact values for the analytic engine and analytic boundaries.
#[derive(Clone)]
enum Exact {
    Closed(ClosedFormInit),
    /// A time-independent profile, given by its values at the grid nodes.
    Steady(ConcentrationField),
}

// Evolve.

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioSummary {
    pub name: String,
    pub profile: String,
    pub diffusion: String,
    pub initial: String,
    pub domain: [f64; 2],
    pub grid_points: usize,
    pub x0: f64,
    pub dt: f64,
    pub t_final: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnapshotEntry {
    pub engine: String,
    pub t: f64,
    pub mass: f64,
    /// CSV holding this snapshot, relative to the scenario directory.
    pub file: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormEntry {
    pub a: String,
    pub b: String,
    pub t: f64,
    pub l2: f64,
    pub linf: f64,
    pub mass_drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MassHistory {
    pub engine: String,
    pub t: Vec<f64>,
    pub mass: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NumericMeta {
    pub bc: String,
    pub steps: usize,
    pub startup_steps: usize,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralMeta {
    pub n_modes: usize,
    pub max_modes: usize,
    pub parseval_tolerance: f64,
    pub parseval_tail: f64,
    pub parseval_met: bool,
    pub boundary_tail: f64,
    pub tail_tolerance: f64,
    pub lowest_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metadata {
    pub version: String,
    pub dx: f64,
    pub mass_normalize: bool,
    pub window: Option<[f64; 2]>,
    pub derivative_warning: bool,
    pub numeric: Option<NumericMeta>,
    pub spectral: Option<SpectralMeta>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub scenario: ScenarioSummary,
    pub engines: Vec<String>,
    pub snapshots: Vec<SnapshotEntry>,
    pub norms: Vec<NormEntry>,
    pub mass: Vec<MassHistory>,
    pub metadata: Metadata,
}

/// Report plus the snapshot fields of every engine, in engine order.
#[derive(Debug, Clone)]
pub struct Run {
    pub report: Report,
    pub fields: Vec<(Engine, Vec<ConcentrationField>)>,
}

/// How snapshot CSVs are laid out on disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CsvLayout {
    /// `<engine>_<k>.csv` per snapshot.
    #[default]
    PerSnapshot,
    /// One `<engine>.csv` holding every snapshot.
    Long,
}

/// Runs the requested engines. `engines` overrides the config's list when given.
pub fn run(cfg: &ScenarioConfig, engines: Option<&[Engine]>) -> ScenarioResult<Run> {
    let problem = Problem::from_config(cfg)?;
    let mut engines: Vec<Engine> = engines.map(<[Engine]>::to_vec).unwrap_or_else(|| cfg.engines.clone());
    engines.sort_unstable();
    engines.dedup();
    if engines.is_empty() {
        return config_error("engines", "at least one of analytic, spectral, numeric is required");
    }
    let Some(init) = cfg.initial.as_ref() else {
        return config_error("initial", "required by evolve");
    };
    let dt = match cfg.dt {
        Some(dt) if dt > 0.0 && dt.is_finite() => dt,
        Some(dt) => return config_error("dt", format!("must be positive, got {dt}")),
        None => return config_error("dt", "required by evolve"),
    };
    let t_final = match cfg.t_final {
        Some(t) if t >= 0.0 && t.is_finite() => t,
        Some(t) => return config_error("t_final", format!("must be non-negative, got {t}")),
        None => return config_error("t_final", "required by evolve"),
    };
    let times = snapshot_times(&cfg.snapshots, dt, t_final)?;
    if let Some([a, b]) = cfg.comparison.window {
        if !(a < b) {
            return config_error("comparison.window", format!("need lo < hi, got [{a}, {b}]"));
        }
    }

    let closed = closed_form_init(&problem, init)?;
    let c0 = initial_field(&problem, init, closed.as_ref())?;
    let exact = match (&closed, init) {
        (Some(c), _) => Some(Exact::Closed(*c)),
        (None, InitialSpec::Stationary {}) => {
            let steady = analytic::stationary_profile(&problem.profile, &problem.model, problem.x0, (problem.lo, problem.hi), problem.n)
                .map_err(engine("analytic"))?;
            steady.stationary.then_some(Exact::Steady(steady.field))
        }
        _ => None,
    };

    let mut fields = Vec::new();
    let mut numeric_meta = None;
    let mut spectral_meta = None;
    for &e in &engines {
        let snaps = match e {
            Engine::Analytic => run_analytic(&problem, exact.as_ref(), init, &times)?,
            Engine::Numeric => {
                let (snaps, meta) = run_numeric(cfg, &problem, exact.as_ref(), &c0, dt, t_final, &times)?;
                numeric_meta = Some(meta);
                snaps
            }
            Engine::Spectral => {
                let (snaps, meta) = run_spectral(cfg, &problem, &c0, &times)?;
                spectral_meta = Some(meta);
                snaps
            }
        };
        fields.push((e, snaps));
    }

    let window = cfg.comparison.window.map(|[a, b]| (a, b));
    let mut norms = Vec::new();
    for i in 0..fields.len() {
        for j in i + 1..fields.len() {
            for (a, b) in fields[i].1.iter().zip(&fields[j].1) {
                let en = error_norms_in_window(a, b, cfg.comparison.mass_normalize, window).map_err(engine("comparison"))?;
                norms.push(NormEntry {
                    a: fields[i].0.name().into(),
                    b: fields[j].0.name().into(),
                    t: a.time(),
                    l2: en.l2,
                    linf: en.linf,
                    mass_drift: en.mass_drift,
                });
            }
        }
    }

    let mut snapshots = Vec::new();
    let mut mass = Vec::new();
    for (e, snaps) in &fields {
        let history: Vec<f64> = snaps.iter().map(total_mass).collect();
        for (s, m) in snaps.iter().zip(&history) {
            snapshots.push(SnapshotEntry { engine: e.name().into(), t: s.time(), mass: *m, file: None });
        }
        mass.push(MassHistory { engine: e.name().into(), t: snaps.iter().map(ConcentrationField::time).collect(), mass: history });
    }

    let report = Report {
        scenario: ScenarioSummary {
            name: cfg.display_name(),
            profile: problem.profile.family_name().into(),
            diffusion: problem.model.kind_name().into(),
            initial: init.kind().into(),
            domain: cfg.domain,
            grid_points: problem.n,
            x0: problem.x0,
            dt,
            t_final,
        },
        engines: engines.iter().map(|e| e.name().to_string()).collect(),
        snapshots,
        norms,
        mass,
        metadata: Metadata {
            version: env!("CARGO_PKG_VERSION").into(),
            dx: (problem.hi - problem.lo) / (problem.n - 1) as f64,
            mass_normalize: cfg.comparison.mass_normalize,
            window: cfg.comparison.window,
            derivative_warning: problem.derivative_warning(),
            numeric: numeric_meta,
            spectral: spectral_meta,
        },
    };
    Ok(Run { report, fields })
}

/// Snapshot times snapped to the `dt` lattice; `[t_final]` when none are given.
fn snapshot_times(requested: &[f64], dt: f64, t_final: f64) -> ScenarioResult<Vec<f64>> {
    let total = (t_final / dt).round();
    if ((total * dt) - t_final).abs() > 1e-9 * dt.max(t_final) {
        return config_error("t_final", format!("{t_final} is not a whole number of steps of {dt}"));
    }
    if requested.is_empty() {
        return Ok(vec![total * dt]);
    }
    let mut out = Vec::with_capacity(requested.len());
    for (i, &s) in requested.iter().enumerate() {
        let field = format!("snapshots[{i}]");
        if !(s >= 0.0 && s <= t_final * (1.0 + 1e-12)) {
            return config_error(&field, format!("{s} lies outside [0, t_final = {t_final}]"));
        }
        let k = (s / dt).round();
        if (k * dt - s).abs() > 1e-9 * dt.max(s) {
            return config_error(&field, format!("{s} is not a multiple of dt = {dt}"));
        }
        if out.last().is_some_and(|&prev: &f64| k * dt <= prev) {
            return config_error(&field, "snapshot times must be strictly increasing");
        }
        out.push(k * dt);
    }
    Ok(out)
}

fn exact_value(problem: &Problem, exact: &Exact, x: f64, t: f64) -> crate::Result<f64> {
    match exact {
        Exact::Closed(c) => analytic::closed_form(&problem.profile, &problem.model, c, x, t),
        Exact::Steady(field) => {
            let i = ((x - field.lo()) / field.dx()).round() as usize;
            Ok(field.values()[i.min(field.len() - 1)])
        }
    }
}

fn run_analytic(problem: &Problem, exact: Option<&Exact>, init: &InitialSpec, times: &[f64]) -> ScenarioResult<Vec<ConcentrationField>> {
    let Some(exact) = exact else {
        let why = match init {
            InitialSpec::Stationary {} => "e^f is not stationary here (the transformed potential does not vanish)",
            _ => "no closed form exists for this channel, diffusion model and initial condition",
        };
        return config_error("engines", format!("analytic: {why}"));
    };
    times
        .iter()
        .map(|&t| {
            ConcentrationField::try_from_fn(problem.lo, problem.hi, problem.n, t, |x| exact_value(problem, exact, x, t))
        })
        .collect::<crate::Result<Vec<_>>>()
        .map_err(engine("analytic"))
}

fn run_numeric(
    cfg: &ScenarioConfig,
    problem: &Problem,
    exact: Option<&Exact>,
    c0: &ConcentrationField,
    dt: f64,
    t_final: f64,
    times: &[f64],
) -> ScenarioResult<(Vec<ConcentrationField>, NumericMeta)> {
    let spec = cfg.numeric.bc.unwrap_or(if problem.touches_wall() {
        BoundarySpec::DirichletZero
    } else if exact.is_some() {
        BoundarySpec::DirichletAnalytic
    } else {
        BoundarySpec::NoFlux
    });
    let bc = match spec {
        BoundarySpec::NoFlux => BoundaryCondition::NoFlux,
        BoundarySpec::DirichletZero => BoundaryCondition::DirichletZero,
        BoundarySpec::DirichletAnalytic => {
            let Some(exact) = exact.cloned() else {
                return config_error("numeric.bc", "dirichlet_analytic needs an initial condition with a reference solution");
            };
            let problem = problem.clone();
            BoundaryCondition::DirichletAnalytic(Arc::new(move |x, t| exact_value(&problem, &exact, x, t).unwrap_or(f64::NAN)))
        }
    };
    if !(cfg.numeric.tolerance > 0.0) {
        return config_error("numeric.tolerance", format!("must be positive, got {}", cfg.numeric.tolerance));
    }
    let bc_name = bc.name().to_string();
    let solver = SolverConfig::new(dt, bc)
        .map_err(|e| ConfigError { field: "dt".into(), message: e.to_string() })?
        .with_startup_steps(cfg.numeric.startup_steps)
        .with_tolerance(cfg.numeric.tolerance);
    let snaps = fdsolver::evolve(&problem.profile, &problem.model, c0, t_final, times, &solver).map_err(engine("numeric"))?;
    let meta = NumericMeta {
        bc: bc_name,
        steps: (t_final / dt).round() as usize,
        startup_steps: cfg.numeric.startup_steps,
        tolerance: cfg.numeric.tolerance,
    };
    Ok((snaps, meta))
}

fn run_spectral(
    cfg: &ScenarioConfig,
    problem: &Problem,
    c0: &ConcentrationField,
    times: &[f64],
) -> ScenarioResult<(Vec<ConcentrationField>, SpectralMeta)> {
    let spec = &cfg.spectral;
    let map = problem.map("engines")?;
    let phi0 = spectral::transformed_initial(&map, c0).map_err(engine("spectral"))?;
    let boundary_tail = spectral::boundary_tail_fraction(&map, &phi0);
    if !(boundary_tail < spec.tail_tolerance) {
        return config_error(
            "domain",
            format!(
                "the transformed initial condition keeps a fraction {boundary_tail:.3e} of its norm next to the \
                 truncation boundary, above spectral.tail_tolerance = {:e}; widen the domain",
                spec.tail_tolerance
            ),
        );
    }
    let (basis, coeffs, parseval_tail, parseval_met) = match spec.n_modes {
        Some(0) => return config_error("spectral.n_modes", "must be positive"),
        Some(n) if n > map.len() - 2 => {
            return config_error("spectral.n_modes", format!("{n} exceeds the {} interior nodes", map.len() - 2));
        }
        Some(n) => {
            let basis = spectral::build_basis(&map, n, SpectralBoundary::DirichletZero).map_err(engine("spectral"))?;
            let coeffs = basis.project_phi(&phi0).map_err(engine("spectral"))?;
            let norm2 = spectral::interior_norm2(&phi0, map.dy());
            let captured: f64 = coeffs.iter().map(|a| a * a).sum();
            let tail = if norm2 > 0.0 { ((norm2 - captured) / norm2).max(0.0) } else { 0.0 };
            (basis, coeffs, tail, tail < spec.parseval_tolerance)
        }
        None => {
            if spec.max_modes == 0 {
                return config_error("spectral.max_modes", "must be positive");
            }
            let auto = spectral::build_basis_for_initial(&map, c0, spec.max_modes, spec.parseval_tolerance)
                .map_err(engine("spectral"))?;
            (auto.basis, auto.coeffs, auto.tail, auto.tail_met)
        }
    };
    let snaps = times
        .iter()
        .map(|&t| spectral::propagate(&basis, &map, &coeffs, t))
        .collect::<crate::Result<Vec<_>>>()
        .map_err(engine("spectral"))?;
    let meta = SpectralMeta {
        n_modes: basis.n_modes(),
        max_modes: spec.max_modes,
        parseval_tolerance: spec.parseval_tolerance,
        parseval_tail,
        parseval_met,
        boundary_tail,
        tail_tolerance: spec.tail_tolerance,
        lowest_energy: basis.energies()[0],
    };
    Ok((snaps, meta))
}

// Output.

/// A table of named real columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    /// CSV with 17 significant digits and LF line endings.
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(|v| format_real(*v))).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ASCII output")
    }

    pub fn write(&self, path: &Path) -> ScenarioResult<()> {
        write_file(path, &self.to_csv())
    }
}

pub fn format_real(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_file(path: &Path, contents: &str) -> ScenarioResult<()> {
    let fail = |e: std::io::Error| ScenarioError::Output { path: path.to_path_buf(), message: e.to_string() };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(fail)?;
    }
    fs::write(path, contents).map_err(fail)
}

fn snapshot_table(fields: &[ConcentrationField]) -> Table {
    let mut table = Table::new(&["x", "C", "t"]);
    for f in fields {
        for (x, c) in f.x().iter().zip(f.values()) {
            table.rows.push(vec![*x, *c, f.time()]);
        }
    }
    table
}

impl Run {
    /// Writes snapshot CSVs and `report.json` into `dir`, returning every path written.
    pub fn write(&mut self, dir: &Path, layout: CsvLayout) -> ScenarioResult<Vec<PathBuf>> {
        let mut written = Vec::new();
        let mut files = Vec::new();
        for (e, snaps) in &self.fields {
            match layout {
                CsvLayout::PerSnapshot => {
                    for (k, s) in snaps.iter().enumerate() {
                        let name = format!("{}_{k:03}.csv", e.name());
                        let path = dir.join(&name);
                        snapshot_table(std::slice::from_ref(s)).write(&path)?;
                        written.push(path);
                        files.push(name);
                    }
                }
                CsvLayout::Long => {
                    let name = format!("{}.csv", e.name());
                    let path = dir.join(&name);
                    snapshot_table(snaps).write(&path)?;
                    written.push(path);
                    files.extend(std::iter::repeat_n(name, snaps.len()));
                }
            }
        }
        for (entry, file) in self.report.snapshots.iter_mut().zip(files) {
            entry.file = Some(file);
        }
        let path = dir.join("report.json");
        let mut json = serde_json::to_string_pretty(&self.report).expect("report serializes");
        json.push('\n');
        write_file(&path, &json)?;
        written.push(path);
        Ok(written)
    }
}

// Tables for the other subcommands.

/// `x, y, V_x, V_y, f` on the map's uniform `y` nodes. `V_x` is the
/// geometric potential of the constant-diffusion problem, `V_y` the
/// potential of the transformed problem and `f` the drift function.
pub fn potential_table(cfg: &ScenarioConfig) -> ScenarioResult<Table> {
    let problem = Problem::from_config(cfg)?;
    let map = problem.map("domain")?;
    let mut table = Table::new(&["x", "y", "V_x", "V_y", "f"]);
    for i in 0..map.len() {
        let x = map.x_of_y()[i];
        let vx = problem.profile.entropic_potential(x).map_err(engine("geometry"))?;
        table.rows.push(vec![x, map.y_grid()[i], vx, map.potential()[i], map.f()[i]]);
    }
    Ok(table)
}

/// `x, y, x_of_y` on a uniform `x` grid, the last column inverting the second.
pub fn transform_table(cfg: &ScenarioConfig) -> ScenarioResult<Table> {
    let problem = Problem::from_config(cfg)?;
    let map = problem.map("domain")?;
    let mut table = Table::new(&["x", "y", "x_of_y"]);
    for x in uniform_grid(problem.lo, problem.hi, problem.n) {
        let y = mapping::transform_coordinate(&problem.model, &problem.profile, x, problem.x0).map_err(engine("mapping"))?;
        // guard the ends against the last ulp of the forward quadrature
        let (ylo, yhi) = (map.y_grid()[0], map.y_grid()[map.len() - 1]);
        let back = map.invert(y.clamp(ylo, yhi)).map_err(engine("mapping"))?;
        table.rows.push(vec![x, y, back]);
    }
    Ok(table)
}

/// Default mode count for `spectrum` when the config gives none.
pub const SPECTRUM_MODES: usize = 10;

/// Energies as `n, E, E_total`, and optionally the modes as `y, psi_0, …`.
///
/// `E_total` is the eigenvalue of `P² + V`. For a Gaussian-area channel under
/// constant diffusion `E` drops the constant `D0·a` part of `V`, leaving the
/// oscillator levels `2 D0 a (n + ½)`; elsewhere `E = E_total`.
pub fn spectrum_tables(cfg: &ScenarioConfig, with_modes: bool) -> ScenarioResult<(Table, Option<Table>)> {
    let problem = Problem::from_config(cfg)?;
    let map = problem.map("domain")?;
    let n_modes = cfg.spectral.n_modes.unwrap_or(SPECTRUM_MODES);
    if n_modes == 0 || n_modes > map.len() - 2 {
        return config_error("spectral.n_modes", format!("need 1 ..= {}, got {n_modes}", map.len() - 2));
    }
    let basis = spectral::build_basis(&map, n_modes, SpectralBoundary::DirichletZero).map_err(engine("spectral"))?;
    let shift = match (problem.profile.family(), problem.model.constant_value()) {
        (Family::GaussianArea { a, .. }, Some(d0)) => d0 * a,
        _ => 0.0,
    };
    let mut energies = Table::new(&["n", "E", "E_total"]);
    for (n, e) in basis.energies().iter().enumerate() {
        energies.rows.push(vec![n as f64, e - shift, *e]);
    }
    let modes = with_modes.then(|| {
        let mut header = vec!["y".to_string()];
        header.extend((0..n_modes).map(|k| format!("psi_{k}")));
        let rows = (0..map.len())
            .map(|i| std::iter::once(basis.y_grid()[i]).chain(basis.modes().iter().map(|m| m[i])).collect())
            .collect();
        Table { header, rows }
    });
    Ok((energies, modes))
}

/// `x, W, V_plus, V_minus` from the file named in `susy.w_file`.
pub fn susy_table(cfg: &ScenarioConfig) -> ScenarioResult<Table> {
    let Some(spec) = cfg.susy.as_ref() else {
        return config_error("susy", "required by the susy subcommand");
    };
    let path = match &cfg.base_dir {
        Some(base) if spec.w_file.is_relative() => base.join(&spec.w_file),
        _ => spec.w_file.clone(),
    };
    let (x, w) = read_superpotential(&path)?;
    let pair = mapping::susy_partner_potentials(&x, &w, spec.alpha2)
        .map_err(|e| ConfigError { field: "susy.w_file".into(), message: e.to_string() })?;
    let mut table = Table::new(&["x", "W", "V_plus", "V_minus"]);
    for i in 0..x.len() {
        table.rows.push(vec![x[i], w[i], pair.v_plus[i], pair.v_minus[i]]);
    }
    Ok(table)
}

fn read_superpotential(path: &Path) -> ScenarioResult<(Vec<f64>, Vec<f64>)> {
    let bad = |message: String| ConfigError { field: "susy.w_file".into(), message };
    let mut reader = csv::Reader::from_path(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| bad(format!("{} has no `{name}` column", path.display())))
    };
    let (ix, iw) = (col("x")?, col("W")?);
    let (mut x, mut w) = (Vec::new(), Vec::new());
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let parse = |i: usize| -> ScenarioResult<f64> {
            let text = record.get(i).unwrap_or("").trim();
            text.parse().map_err(|_| bad(format!("row {}: `{text}` is not a number", line + 1)).into())
        };
        x.push(parse(ix)?);
        w.push(parse(iw)?);
    }
    Ok((x, w))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn conical(engines: &str) -> String {
        format!(
            r#"{{
                "schema": 1,
                "name": "cone",
                "profile": {{"family": "conical", "lambda": 1.0}},
                "initial": {{"kind": "gaussian", "sigma": 1.0, "a0": 5.0}},
                "domain": [0.0, 12.0],
                "grid_points": 601,
                "dt": 1e-3,
                "t_final": 0.5,
                "snapshots": [0.25, 0.5],
                "engines": [{engines}],
                "spectral": {{"tail_tolerance": 1e-6}}
            }}"#
        )
    }

    fn parse(text: &str) -> ScenarioConfig {
        ScenarioConfig::from_json(text).unwrap()
    }

    fn config_field(err: ScenarioError) -> String {
        match err {
            ScenarioError::Config(c) => c.field,
            other => panic!("expected a config error, got {other}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = conical(r#""analytic""#).replace(r#""grid_points""#, r#""colour": 1, "grid_points""#);
        assert!(ScenarioConfig::from_json(&text).is_err());
        let text = conical(r#""analytic""#).replace(r#""lambda": 1.0"#, r#""lambda": 1.0, "slope": 2"#);
        assert!(ScenarioConfig::from_json(&text).is_err());
    }

    #[test]
    fn schema_version_is_checked() {
        let text = conical(r#""analytic""#).replace(r#""schema": 1"#, r#""schema": 2"#);
        assert_eq!(config_field(ScenarioConfig::from_json(&text).unwrap_err()), "schema");
    }

    #[test]
    fn analytic_only_has_no_comparisons() {
        let run = run(&parse(&conical(r#""analytic""#)), None).unwrap();
        assert!(run.report.norms.is_empty());
        assert_eq!(run.report.snapshots.len(), 2);
    }

    #[test]
    fn every_pair_is_compared_at_every_snapshot() {
        let run = run(&parse(&conical(r#""numeric", "analytic", "spectral""#)), None).unwrap();
        assert_eq!(run.report.engines, ["analytic", "spectral", "numeric"]);
        assert_eq!(run.report.norms.len(), 3 * 2);
        for n in &run.report.norms {
            assert!(n.linf <= 1e-3, "{n:?}");
        }
        assert_eq!(run.report.metadata.numeric.as_ref().unwrap().bc, "dirichlet_analytic");
    }

    #[test]
    fn engine_override_replaces_config_list() {
        let run = run(&parse(&conical(r#""analytic""#)), Some(&[Engine::Numeric])).unwrap();
        assert_eq!(run.report.engines, ["numeric"]);
    }

    #[test]
    fn eigenmode_engines_agree_closely() {
        let text = r#"{
            "schema": 1,
            "profile": {"family": "gaussian_area", "a": 1.0},
            "initial": {"kind": "eigenmode", "n": 0},
            "domain": [-8.0, 8.0],
            "grid_points": 8001,
            "dt": 0.01,
            "t_final": 0.2,
            "snapshots": [0.1, 0.2],
            "engines": ["analytic", "spectral"],
            "comparison": {"window": [-2.0, 2.0]}
        }"#;
        let run = run(&parse(text), None).unwrap();
        for n in &run.report.norms {
            assert!(n.linf <= 1e-6, "{n:?}");
        }
    }

    #[test]
    fn field_level_errors() {
        let cases = [
            (r#""domain": [0.0, 12.0]"#, r#""domain": [-2.0, 12.0]"#, "domain"),
            (r#""snapshots": [0.25, 0.5]"#, r#""snapshots": [0.25, 0.9]"#, "snapshots[1]"),
            (r#""snapshots": [0.25, 0.5]"#, r#""snapshots": [0.5, 0.25]"#, "snapshots[1]"),
            (r#""snapshots": [0.25, 0.5]"#, r#""snapshots": [0.2505]"#, "snapshots[0]"),
            (r#""engines": ["analytic"]"#, r#""engines": []"#, "engines"),
            (r#""grid_points": 601"#, r#""grid_points": 2"#, "grid_points"),
        ];
        for (from, to, field) in cases {
            let text = conical(r#""analytic""#).replace(from, to);
            assert_eq!(config_field(run(&parse(&text), None).unwrap_err()), field, "{to}");
        }
    }

    #[test]
    fn spectral_refuses_boundary_tail() {
        let text = conical(r#""spectral""#).replace(r#""tail_tolerance": 1e-6"#, r#""tail_tolerance": 1e-12"#);
        assert_eq!(config_field(run(&parse(&text), None).unwrap_err()), "domain");
    }

    #[test]
    fn analytic_unavailable_is_a_config_error() {
        let text = conical(r#""analytic""#).replace(
            r#"{"kind": "gaussian", "sigma": 1.0, "a0": 5.0}"#,
            r#"{"kind": "tabulated", "x": [0.0, 6.0, 12.0], "c": [0.0, 1.0, 0.0]}"#,
        );
        assert_eq!(config_field(run(&parse(&text), None).unwrap_err()), "engines");
    }

    #[test]
    fn csv_uses_seventeen_digits_and_lf() {
        let mut table = Table::new(&["x", "C", "t"]);
        table.rows.push(vec![0.1, -2.5e-300, 1.0 / 3.0]);
        let csv = table.to_csv();
        assert_eq!(csv, "x,C,t\n1.0000000000000001e-1,-2.5000000000000000e-300,3.3333333333333331e-1\n");
        let back: f64 = "3.3333333333333331e-1".parse().unwrap();
        assert_eq!(back, 1.0 / 3.0);
    }

    #[test]
    fn potential_of_throat_is_constant() {
        let text = r#"{"schema": 1, "profile": {"family": "throat", "alpha": 2.0},
                       "domain": [-1.0, 1.0], "grid_points": 11}"#;
        let table = potential_table(&parse(text)).unwrap();
        for row in &table.rows {
            assert!((row[2] - 1.0).abs() < 1e-12 && (row[3] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn transform_with_constant_diffusion_halves_x() {
        let text = r#"{"schema": 1, "profile": {"family": "cylinder", "area": 1.0},
                       "diffusion": {"kind": "constant", "d0": 4.0},
                       "domain": [-3.0, 5.0], "grid_points": 9}"#;
        let table = transform_table(&parse(text)).unwrap();
        for row in &table.rows {
            assert!((row[1] - row[0] / 2.0).abs() < 1e-14);
            assert!((row[2] - row[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_channel_spectrum_reads_odd_integers() {
        let text = r#"{"schema": 1, "profile": {"family": "gaussian_area", "a": 1.0},
                       "domain": [-12.0, 12.0], "grid_points": 4001, "spectral": {"n_modes": 4}}"#;
        let (energies, modes) = spectrum_tables(&parse(text), true).unwrap();
        for (n, row) in energies.rows.iter().enumerate() {
            let want = (2 * n + 1) as f64;
            assert!((row[1] - want).abs() < 1e-3 * want, "{row:?}");
            assert!((row[2] - row[1] - 1.0).abs() < 1e-12);
        }
        let modes = modes.unwrap();
        assert_eq!(modes.header.len(), 5);
        assert_eq!(modes.rows.len(), 4001);
    }

    #[test]
    fn sinusoidal_walls_default_to_dirichlet_zero() {
        let text = format!(
            r#"{{"schema": 1, "profile": {{"family": "sinusoidal", "amplitude": 1.0, "gamma": 1.0}},
                 "initial": {{"kind": "tabulated", "x": [0.0, 1.5707963267948966, 3.141592653589793], "c": [0.0, 1.0, 0.0]}},
                 "domain": [0.0, {}], "grid_points": 201, "dt": 1e-3, "t_final": 0.01, "engines": ["numeric"],
                 "numeric": {{"startup_steps": 4}}}}"#,
            std::f64::consts::PI
        );
        let run = run(&parse(&text), None).unwrap();
        assert_eq!(run.report.metadata.numeric.unwrap().bc, "dirichlet_zero");
    }
}
