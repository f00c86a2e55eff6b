//! Scenario configs and the pipeline runner.
//!
//! A scenario is a TOML file:
//!
//! ```toml
//! schema_version = 1
//! name = "smoothing-rates"
//! dim = 2
//! resolutions = [64, 128]
//! seed = 7
//!
//! [rough]
//! kind = "hoelder_fourier"
//! amplitude = 0.03
//! alpha = 0.3
//!
//! [flow]
//! final_time = 0.1
//!
//! [[analysis]]
//! kind = "smoothing_rates"
//! k = [1, 2]
//! ```
//!
//! Every resolution writes into `n{res}/` below the output directory; the
//! top level holds `config.toml` (the effective config) and `manifest.toml`.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    beta_weak_inf, drift_report, max_principle_check, norm_report, perturbation_stability, residual_report,
    rigidity_probe, smoothing_rates, solve, AnalysisReport, BetaWeakQuery, InitialBound, StabilityQuery,
};
use crate::container::save_trajectory;
use crate::error::{Error, Result};
use crate::field::MetricField;
use crate::flow::{FlowConfig, FlowTrajectory};
use crate::gauge::{integrate_diffeo, GaugeOptions, GaugeTrajectory};
use crate::geometry::scalar_curvature;
use crate::grid::TorusGrid;
use crate::rough::{generate, second_order_pair, RoughSpec};

pub const SCHEMA_VERSION: u32 = 1;

/// Name of the environment variable holding the worker count.
pub const WORKERS_ENV: &str = "ROUGHFLOW_WORKERS";

const BUILTINS: &[(&str, &str)] = &[
    ("flat-smoke", include_str!("../scenarios/flat-smoke.toml")),
    ("max-principle-kappa", include_str!("../scenarios/max-principle-kappa.toml")),
    ("rough-max-principle", include_str!("../scenarios/rough-max-principle.toml")),
    ("smoothing-rates", include_str!("../scenarios/smoothing-rates.toml")),
    ("perturbation-stability", include_str!("../scenarios/perturbation-stability.toml")),
    ("gauge-drift", include_str!("../scenarios/gauge-drift.toml")),
    ("beta-weak-smooth", include_str!("../scenarios/beta-weak-smooth.toml")),
    ("ricci-residual-smooth", include_str!("../scenarios/ricci-residual-smooth.toml")),
];

/// Names of the scenarios shipped with the crate.
pub fn builtin_names() -> Vec<&'static str> {
    BUILTINS.iter().map(|(n, _)| *n).collect()
}

pub fn builtin_source(name: &str) -> Option<&'static str> {
    BUILTINS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

fn default_dim() -> usize {
    2
}

fn default_stability() -> f64 {
    0.15
}

/// One analysis request. `kind` selects the variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AnalysisRequest {
    MaxPrinciple {
        #[serde(default = "no_bound")]
        bound: InitialBound,
        tol: Option<f64>,
    },
    BetaWeak {
        /// Defaults to the grid point where `R(g₀)` is smallest.
        point: Option<Vec<f64>>,
        beta: f64,
        c_list: Vec<f64>,
        /// Gate `|diagnostic − R(g₀)(point)|` at this tolerance.
        compare_classical: Option<f64>,
    },
    SmoothingRates {
        k: Vec<u32>,
    },
    PerturbationStability {
        eta: f64,
        beta: f64,
        c_list: Vec<f64>,
        fixed_radius: f64,
        amplitude: f64,
        point: Vec<f64>,
        cutoff_radius: Option<f64>,
        seed: Option<u64>,
        #[serde(default = "default_max_residual")]
        max_residual: f64,
        #[serde(default = "default_fit_fraction")]
        fit_fraction: f64,
    },
    Rigidity,
    RicciResidual {
        #[serde(default = "default_residual")]
        max_residual: f64,
        #[serde(default = "default_order_tol")]
        order_tol: f64,
    },
    Drift {
        #[serde(default)]
        t_min: f64,
        #[serde(default = "default_exponent")]
        exponent: f64,
        #[serde(default = "default_exponent_tol")]
        tolerance: f64,
    },
    Norms {
        #[serde(default = "default_levels")]
        levels: usize,
    },
}

fn no_bound() -> InitialBound {
    InitialBound::None
}
fn default_max_residual() -> f64 {
    0.2
}
fn default_fit_fraction() -> f64 {
    0.25
}
fn default_residual() -> f64 {
    1e-3
}
fn default_order_tol() -> f64 {
    0.5
}
fn default_exponent() -> f64 {
    0.5
}
fn default_exponent_tol() -> f64 {
    0.1
}
fn default_levels() -> usize {
    6
}

impl AnalysisRequest {
    pub fn kind(&self) -> &'static str {
        match self {
            AnalysisRequest::MaxPrinciple { .. } => "max_principle",
            AnalysisRequest::BetaWeak { .. } => "beta_weak",
            AnalysisRequest::SmoothingRates { .. } => "smoothing_rates",
            AnalysisRequest::PerturbationStability { .. } => "perturbation_stability",
            AnalysisRequest::Rigidity => "rigidity",
            AnalysisRequest::RicciResidual { .. } => "ricci_residual",
            AnalysisRequest::Drift { .. } => "drift",
            AnalysisRequest::Norms { .. } => "x_norm",
        }
    }

    fn needs_gauge(&self) -> bool {
        matches!(self, AnalysisRequest::Rigidity | AnalysisRequest::RicciResidual { .. } | AnalysisRequest::Drift { .. })
    }

    fn fits_exponent(&self) -> bool {
        matches!(
            self,
            AnalysisRequest::SmoothingRates { .. }
                | AnalysisRequest::PerturbationStability { .. }
                | AnalysisRequest::Drift { .. }
        )
    }

    fn validate(&self, dim: usize) -> Result<()> {
        let point_ok = |p: &[f64]| {
            if p.len() == dim {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("point has {} coordinates, dim is {dim}", p.len())))
            }
        };
        match self {
            AnalysisRequest::BetaWeak { point, beta, c_list, .. } => {
                if let Some(p) = point {
                    point_ok(p)?;
                }
                BetaWeakQuery { point: point.clone().unwrap_or(vec![0.0; dim]), beta: *beta, c_list: c_list.clone(), times: None }
                    .validate()
            }
            AnalysisRequest::SmoothingRates { k } if k.is_empty() => Err(Error::InvalidArgument("k is empty".into())),
            AnalysisRequest::PerturbationStability { eta, beta, c_list, point, fixed_radius, .. } => {
                point_ok(point)?;
                let lower = 1.0 / (2.0 + eta);
                if !(*eta > 0.0) {
                    return Err(Error::InvalidArgument("eta must be positive".into()));
                }
                if !(*beta > lower && *beta < 0.5) {
                    return Err(Error::InvalidArgument(format!("beta {beta} outside ({lower}, 1/2)")));
                }
                if c_list.is_empty() || c_list.iter().any(|c| !(*c > 0.0)) {
                    return Err(Error::InvalidArgument("c_list must be non-empty and positive".into()));
                }
                if !(*fixed_radius > 0.0) {
                    return Err(Error::InvalidArgument("fixed_radius must be positive".into()));
                }
                Ok(())
            }
            AnalysisRequest::Norms { levels } if *levels == 0 => Err(Error::InvalidArgument("levels must be positive".into())),
            _ => Ok(()),
        }
    }
}

/// A scenario config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    #[serde(default = "default_dim")]
    pub dim: usize,
    pub resolutions: Vec<usize>,
    /// Overrides `rough.seed` when set.
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    /// Largest spread of a fitted slope across resolutions.
    #[serde(default = "default_stability")]
    pub resolution_stability: f64,
    #[serde(default)]
    pub rough: RoughSpec,
    #[serde(default)]
    pub flow: FlowConfig,
    pub gauge: Option<GaugeOptions>,
    #[serde(default)]
    pub analysis: Vec<AnalysisRequest>,
}

fn invalid(path: impl Into<String>, e: impl std::fmt::Display) -> Error {
    Error::ConfigInvalid { path: path.into(), message: e.to_string() }
}

impl Scenario {
    /// Parses and validates a TOML scenario.
    pub fn from_toml_str(src: &str) -> Result<Self> {
        let de = toml::Deserializer::new(src);
        let scn: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            invalid(if path == "." { String::new() } else { path }, e.into_inner().message().trim())
        })?;
        scn.validate()?;
        Ok(scn)
    }

    /// Reads a scenario file; a built-in name is accepted when no such file exists.
    pub fn load(path: &Path) -> Result<Self> {
        match fs::read_to_string(path) {
            Ok(s) => Self::from_toml_str(&s),
            Err(e) => match path.to_str().and_then(builtin_source) {
                Some(s) => Self::from_toml_str(s),
                None => Err(invalid(path.display().to_string(), e)),
            },
        }
    }

    pub fn builtin(name: &str) -> Result<Self> {
        let src = builtin_source(name).ok_or_else(|| invalid("name", format!("no built-in scenario `{name}`")))?;
        Self::from_toml_str(src)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid("schema_version", format!("expected {SCHEMA_VERSION}, found {}", self.schema_version)));
        }
        if self.name.is_empty() {
            return Err(invalid("name", "must not be empty"));
        }
        if self.resolutions.is_empty() {
            return Err(invalid("resolutions", "at least one resolution is required"));
        }
        for (i, &n) in self.resolutions.iter().enumerate() {
            TorusGrid::new(self.dim, n).map_err(|e| invalid(format!("resolutions[{i}]"), e))?;
        }
        if self.analysis.is_empty() {
            return Err(invalid("analysis", "at least one analysis request is required"));
        }
        if self.analysis.iter().any(AnalysisRequest::fits_exponent) && self.resolutions.len() < 2 {
            return Err(invalid("resolutions", "fitted exponents are gated at two or more resolutions"));
        }
        if !(self.resolution_stability > 0.0) {
            return Err(invalid("resolution_stability", "must be positive"));
        }
        self.rough.validate().map_err(|e| invalid("rough", e))?;
        self.flow.validate().map_err(|e| invalid("flow", e))?;
        if self.rough.amplitude >= self.flow.epsilon_guard {
            return Err(invalid("rough.amplitude", format!("must stay below flow.epsilon_guard = {}", self.flow.epsilon_guard)));
        }
        let mut seen = BTreeSet::new();
        for (i, a) in self.analysis.iter().enumerate() {
            if !seen.insert(a.kind()) {
                return Err(invalid(format!("analysis[{i}].kind"), format!("duplicate analysis `{}`", a.kind())));
            }
            a.validate(self.dim).map_err(|e| invalid(format!("analysis[{i}]"), e))?;
        }
        Ok(())
    }

    pub fn needs_gauge(&self) -> bool {
        self.analysis.iter().any(AnalysisRequest::needs_gauge)
    }
}

/// Command-line overrides of a scenario.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Run only at this resolution.
    pub resolution: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub plots: bool,
    /// Worker threads; `None` reads the environment.
    pub workers: Option<usize>,
}

/// Reads the worker count from the environment.
pub fn workers_from_env() -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(invalid(WORKERS_ENV, format!("expected a positive integer, found `{v}`"))),
        },
    }
}

/// One gate outcome as recorded in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateRecord {
    pub analysis: String,
    pub flag: String,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugeRecord {
    pub id: String,
    /// Id of the trajectory the gauge was integrated from.
    pub source: String,
    pub file: String,
    pub limit_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub resolution: usize,
    pub directory: String,
    pub trajectory_id: String,
    pub trajectory: String,
    pub seed: u64,
    pub times: Vec<f64>,
    /// `sup |g(t) − ḡ|` per stored time.
    pub sup_perturbation: Vec<f64>,
    pub gauge: Option<GaugeRecord>,
    pub files: Vec<String>,
    pub gates: Vec<GateRecord>,
}

/// Top-level record of a run. Contains nothing that differs between reruns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub scenario: String,
    pub seed: u64,
    pub passed: bool,
    pub config: String,
    pub runs: Vec<RunRecord>,
    pub cross_gates: Vec<GateRecord>,
}

impl Manifest {
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join("manifest.toml");
        let src = fs::read_to_string(&path).map_err(|_| Error::ManifestMissing(path.clone()))?;
        toml::from_str(&src).map_err(|_| Error::ManifestMissing(path))
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.toml");
        fs::write(&path, toml::to_string(self).map_err(|e| Error::Format(e.to_string()))?)?;
        Ok(path)
    }

    pub fn gates(&self) -> impl Iterator<Item = (Option<usize>, &GateRecord)> {
        self.runs
            .iter()
            .flat_map(|r| r.gates.iter().map(move |g| (Some(r.resolution), g)))
            .chain(self.cross_gates.iter().map(|g| (None, g)))
    }
}

/// Result of [`run`].
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: Manifest,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.manifest.passed
    }

    /// 0 when every gate passed, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            2
        }
    }
}

/// Process exit code for a failed run: 3 for configuration errors, 4 for
/// numerical aborts, 1 otherwise.
pub fn error_exit_code(err: &Error) -> i32 {
    match err.root() {
        Error::ConfigInvalid { .. } => 3,
        e if e.is_numerical_abort() => 4,
        _ => 1,
    }
}

/// Applies `opts` to `scn`, returning the effective scenario and output directory.
pub fn effective(scn: &Scenario, opts: &RunOptions) -> Result<(Scenario, PathBuf)> {
    let mut s = scn.clone();
    if let Some(n) = opts.resolution {
        TorusGrid::new(s.dim, n).map_err(|e| invalid("resolution", e))?;
        s.resolutions = vec![n];
    }
    let seed = opts.seed.or(s.seed).unwrap_or(s.rough.seed);
    s.seed = Some(seed);
    s.rough.seed = seed;
    let dir = opts
        .out
        .clone()
        .or_else(|| s.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("runs").join(&s.name));
    Ok((s, dir))
}

/// Runs `scn` under `opts`: every resolution (in parallel over the worker
/// pool), then the cross-resolution gates, the manifest and the report.
pub fn run(scn: &Scenario, opts: &RunOptions) -> Result<RunOutcome> {
    scn.validate()?;
    let (s, dir) = effective(scn, opts)?;
    let workers = match opts.workers {
        Some(w) => Some(w),
        None => workers_from_env()?,
    };
    fs::create_dir_all(&dir)?;
    let config = s.to_toml()?;
    fs::write(dir.join("config.toml"), &config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let results: Vec<Result<(RunRecord, Vec<AnalysisReport>)>> =
        pool.install(|| s.resolutions.par_iter().map(|&n| run_resolution(&s, n, &dir)).collect());
    let mut runs = Vec::new();
    let mut reports = Vec::new();
    for r in results {
        let (rec, rep) = r?;
        runs.push(rec);
        reports.push(rep);
    }
    let cross_gates = cross_resolution_gates(&s, &reports);
    let passed = runs.iter().flat_map(|r| &r.gates).chain(&cross_gates).all(|g| g.passed);
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        scenario: s.name.clone(),
        seed: s.rough.seed,
        passed,
        config,
        runs,
        cross_gates,
    };
    manifest.write(&dir)?;
    crate::report::report(&dir, opts.plots)?;
    Ok(RunOutcome { dir, manifest })
}

fn cross_resolution_gates(s: &Scenario, reports: &[Vec<AnalysisReport>]) -> Vec<GateRecord> {
    let mut gates = Vec::new();
    if reports.len() < 2 {
        return gates;
    }
    let Some(first) = reports[0].iter().find(|r| r.name == "smoothing_rates") else {
        return gates;
    };
    for fit in &first.fits {
        let slopes: Vec<f64> = reports
            .iter()
            .filter_map(|rs| rs.iter().find(|r| r.name == "smoothing_rates").and_then(|r| r.fit(&fit.name)))
            .map(|f| f.slope)
            .collect();
        let spread = slopes.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - slopes.iter().cloned().fold(f64::INFINITY, f64::min);
        gates.push(GateRecord {
            analysis: "smoothing_rates".into(),
            flag: format!("{}_resolution_spread", fit.name),
            passed: spread <= s.resolution_stability,
            value: spread,
            tolerance: s.resolution_stability,
        });
    }
    gates
}

fn rel(dir: &Path, p: &Path) -> String {
    p.strip_prefix(dir).unwrap_or(p).to_string_lossy().replace('\\', "/")
}

fn run_resolution(s: &Scenario, n: usize, root: &Path) -> Result<(RunRecord, Vec<AnalysisReport>)> {
    let ctx = |e: Error| match e {
        Error::ConfigInvalid { .. } => e,
        e => Error::Scenario { scenario: s.name.clone(), resolution: n, source: Box::new(e) },
    };
    let sub = format!("n{n}");
    let dir = root.join(&sub);
    fs::create_dir_all(&dir).map_err(|e| ctx(e.into()))?;
    let grid = TorusGrid::new(s.dim, n).map_err(ctx)?;
    let g0 = generate(&grid, &s.rough).map_err(ctx)?;
    let flat = MetricField::flat(&grid);
    let mut traj = solve(&g0, &flat, &s.flow).map_err(ctx)?;
    traj.seed = Some(s.rough.seed);

    let mut files = Vec::new();
    let bin = dir.join("trajectory.bin");
    save_trajectory(&bin, &traj).map_err(ctx)?;
    files.push(rel(root, &bin));
    let csv_path = dir.join("trajectory.csv");
    let sup = write_trajectory_csv(&csv_path, &traj).map_err(ctx)?;
    files.push(rel(root, &csv_path));

    let traj_id = format!("traj-{sub}");
    let gauge = if s.needs_gauge() {
        let opts = s.gauge.clone().unwrap_or_default();
        Some(integrate_diffeo(&traj, &opts).map_err(ctx)?)
    } else {
        None
    };
    let gauge_record = match &gauge {
        Some(gt) => {
            let p = dir.join("gauge.csv");
            gt.write_csv(fs::File::create(&p).map_err(|e| ctx(e.into()))?).map_err(ctx)?;
            files.push(rel(root, &p));
            Some(GaugeRecord { id: format!("gauge-{sub}"), source: traj_id.clone(), file: rel(root, &p), limit_error: gt.limit_error })
        }
        None => None,
    };

    let mut reports = Vec::new();
    let mut gates = Vec::new();
    for a in &s.analysis {
        let report = run_analysis(s, a, &traj, gauge.as_ref()).map_err(ctx)?;
        for p in report.write_dir(&dir).map_err(ctx)? {
            files.push(rel(root, &p));
        }
        for f in &report.flags {
            gates.push(GateRecord {
                analysis: report.name.clone(),
                flag: f.name.clone(),
                passed: f.passed,
                value: f.value,
                tolerance: f.tolerance,
            });
        }
        reports.push(report);
    }
    let record = RunRecord {
        resolution: n,
        directory: sub,
        trajectory_id: traj_id,
        trajectory: rel(root, &bin),
        seed: s.rough.seed,
        times: traj.times.clone(),
        sup_perturbation: sup,
        gauge: gauge_record,
        files,
        gates,
    };
    Ok((record, reports))
}

fn write_trajectory_csv(path: &Path, traj: &FlowTrajectory) -> Result<Vec<f64>> {
    let mut wr = csv::Writer::from_path(path)?;
    wr.write_record(["t", "sup_perturbation", "min_r", "max_r"])?;
    let mut sup = Vec::with_capacity(traj.len());
    for (t, g) in traj.times.iter().zip(&traj.states) {
        let h = g.difference(&traj.background)?.max_abs_entry();
        let r = scalar_curvature(g);
        let lo = r.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        wr.write_record([*t, h, lo, hi].map(crate::analysis::format_value))?;
        sup.push(h);
    }
    wr.flush()?;
    Ok(sup)
}

fn argmin_curvature(g: &MetricField) -> Vec<f64> {
    let r = scalar_curvature(g);
    let idx = r.iter().enumerate().fold(0, |best, (i, v)| if *v < r[best] { i } else { best });
    let c = g.grid().coord(idx);
    c[..g.grid().dim()].to_vec()
}

fn run_analysis(
    s: &Scenario,
    a: &AnalysisRequest,
    traj: &FlowTrajectory,
    gauge: Option<&GaugeTrajectory>,
) -> Result<AnalysisReport> {
    let gauge = || gauge.ok_or_else(|| Error::InvalidArgument("gauge trajectory missing".into()));
    match a {
        AnalysisRequest::MaxPrinciple { bound, tol } => Ok(max_principle_check(traj, *bound, *tol)),
        AnalysisRequest::BetaWeak { point, beta, c_list, compare_classical } => {
            let point = point.clone().unwrap_or_else(|| argmin_curvature(&traj.initial));
            let q = BetaWeakQuery { point: point.clone(), beta: *beta, c_list: c_list.clone(), times: None };
            let mut report = beta_weak_inf(traj, &q)?;
            let grid = traj.grid();
            let idx = grid.nearest_index(&point);
            let classical = scalar_curvature(&traj.initial)[idx];
            report.set("classical", classical);
            if let Some(tol) = compare_classical {
                let d = report.scalar("diagnostic").unwrap_or(f64::NAN);
                let err = (d - classical).abs();
                report.gate("matches_classical", err <= *tol, err, *tol);
            }
            Ok(report)
        }
        AnalysisRequest::SmoothingRates { k } => smoothing_rates(traj, k),
        AnalysisRequest::PerturbationStability {
            eta,
            beta,
            c_list,
            fixed_radius,
            amplitude,
            point,
            cutoff_radius,
            seed,
            max_residual,
            fit_fraction,
        } => {
            let pair = second_order_pair(
                &traj.initial,
                point,
                *eta,
                *amplitude,
                seed.unwrap_or(s.rough.seed.wrapping_add(1)),
                *cutoff_radius,
            )?;
            let q = StabilityQuery {
                beta: *beta,
                c_list: c_list.clone(),
                fixed_radius: *fixed_radius,
                max_residual: *max_residual,
                fit_fraction: *fit_fraction,
            };
            perturbation_stability(&pair, &q, &s.flow)
        }
        AnalysisRequest::Rigidity => rigidity_probe(gauge()?),
        AnalysisRequest::RicciResidual { max_residual, order_tol } => residual_report(gauge()?, *max_residual, *order_tol),
        AnalysisRequest::Drift { t_min, exponent, tolerance } => drift_report(gauge()?, *t_min, *exponent, *tolerance),
        AnalysisRequest::Norms { levels } => norm_report(traj, *levels),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_parse() {
        for name in builtin_names() {
            let s = Scenario::builtin(name).unwrap();
            assert_eq!(s.name, name);
        }
    }

    #[test]
    fn missing_field_is_named() {
        let src = r#"
schema_version = 1
name = "x"
resolutions = [16]
[[analysis]]
kind = "beta_weak"
c_list = [1.0]
"#;
        match Scenario::from_toml_str(src) {
            Err(Error::ConfigInvalid { path, message }) => {
                assert!(message.contains("beta"), "{message}");
                assert!(path.contains("analysis"), "{path}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_field_has_path() {
        let src = "schema_version = 1\nname = \"x\"\nresolutions = [16]\n[flow]\nfinal_tme = 0.1\n";
        match Scenario::from_toml_str(src) {
            Err(Error::ConfigInvalid { path, .. }) => assert_eq!(path, "flow.final_tme"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn semantic_checks() {
        let base = "schema_version = 1\nname = \"x\"\nresolutions = [16]\n";
        let cases = [
            (format!("{base}"), "analysis"),
            (format!("{base}[[analysis]]\nkind = \"smoothing_rates\"\nk = [1]\n"), "resolutions"),
            (format!("{base}[[analysis]]\nkind = \"beta_weak\"\nbeta = 0.7\nc_list = [1.0]\n"), "analysis[0]"),
            (
                "schema_version = 2\nname = \"x\"\nresolutions = [16]\n[[analysis]]\nkind = \"rigidity\"\n".to_string(),
                "schema_version",
            ),
        ];
        for (src, want) in cases {
            match Scenario::from_toml_str(&src) {
                Err(Error::ConfigInvalid { path, .. }) => assert_eq!(path, want, "{src}"),
                other => panic!("{src}: {other:?}"),
            }
        }
    }

    #[test]
    fn exit_codes() {
        assert_eq!(error_exit_code(&invalid("a", "b")), 3);
        let abort = Error::Scenario {
            scenario: "s".into(),
            resolution: 8,
            source: Box::new(Error::StepUnstable { time: 0.1, norm: 2.0 }),
        };
        assert_eq!(error_exit_code(&abort), 4);
        assert_eq!(error_exit_code(&Error::Format("x".into())), 1);
    }

    #[test]
    fn overrides_apply() {
        let s = Scenario::builtin("flat-smoke").unwrap();
        let opts = RunOptions { resolution: Some(8), seed: Some(9), out: Some("o".into()), ..Default::default() };
        let (e, dir) = effective(&s, &opts).unwrap();
        assert_eq!(e.resolutions, vec![8]);
        assert_eq!(e.rough.seed, 9);
        assert_eq!(dir, PathBuf::from("o"));
    }
}
