//! Diagnostics on computed flows: weak scalar-curvature lower bounds,
//! maximum-principle checks, perturbation stability, smoothing rates and a
//! flat-defect experiment.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::MetricField;
use crate::fit::{power_law_fit, LinearFit};
use crate::flow::{mol_evolve, picard_solve, FlowConfig, FlowTrajectory, SolverKind};
use crate::gauge::{drift_fit, ricci_flow_residual, GaugeTrajectory};
use crate::geometry::{covariant_derivative, flat_ball_mask, scalar_curvature};
use crate::norms::{x_norm, NormOptions};
use crate::rough::SecondOrderPair;

/// A fitted power law `y ≈ c·x^slope` with its log-space residual.
#[derive(Debug, Clone, PartialEq)]
pub struct Fit {
    pub name: String,
    pub slope: f64,
    pub coefficient: f64,
    pub residual: f64,
    /// Half-width of the 95% interval on the slope.
    pub ci95: f64,
    pub points: usize,
}

impl Fit {
    fn from_linear(name: impl Into<String>, f: &LinearFit, points: usize) -> Self {
        Self {
            name: name.into(),
            slope: f.slope,
            coefficient: f.intercept,
            residual: f.residual,
            ci95: f.slope_ci95(),
            points,
        }
    }
}

/// A pass/fail gate and the tolerance it used.
#[derive(Debug, Clone, PartialEq)]
pub struct Flag {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
}

/// A numeric table written as one CSV file; `NaN` marks masked cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let c = self.columns.iter().position(|n| n == name)?;
        Some(self.rows.iter().map(|r| r[c]).collect())
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(&self.columns)?;
        for r in &self.rows {
            wr.write_record(r.iter().map(|v| format_value(*v)))?;
        }
        wr.flush()?;
        Ok(())
    }
}

pub fn format_value(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v:.12e}")
    }
}

/// Named results of one analysis.
#[derive(Debug, Clone, Default)]
pub struct AnalysisReport {
    pub name: String,
    pub scalars: Vec<(String, f64)>,
    pub fits: Vec<Fit>,
    pub tables: Vec<Table>,
    pub flags: Vec<Flag>,
}

impl AnalysisReport {
    pub fn new(name: &str) -> Self {
        Self { name: name.into(), ..Self::default() }
    }

    pub fn scalar(&self, name: &str) -> Option<f64> {
        self.scalars.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn fit(&self, name: &str) -> Option<&Fit> {
        self.fits.iter().find(|f| f.name == name)
    }

    pub fn flag(&self, name: &str) -> Option<&Flag> {
        self.flags.iter().find(|f| f.name == name)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn passed(&self) -> bool {
        self.flags.iter().all(|f| f.passed)
    }

    pub fn set(&mut self, name: &str, v: f64) {
        self.scalars.push((name.into(), v));
    }

    pub fn gate(&mut self, name: &str, passed: bool, value: f64, tolerance: f64) {
        self.flags.push(Flag { name: name.into(), passed, value, tolerance });
    }

    /// Key-value summary, one entry per line.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "analysis = {}", self.name);
        for (k, v) in &self.scalars {
            let _ = writeln!(s, "{k} = {}", format_value(*v));
        }
        for f in &self.fits {
            let _ = writeln!(
                s,
                "fit.{}.slope = {}\nfit.{}.ci95 = {}\nfit.{}.residual = {}",
                f.name,
                format_value(f.slope),
                f.name,
                format_value(f.ci95),
                f.name,
                format_value(f.residual)
            );
        }
        for f in &self.flags {
            let _ = writeln!(
                s,
                "flag.{} = {} (value {}, tolerance {})",
                f.name,
                if f.passed { "pass" } else { "fail" },
                format_value(f.value),
                format_value(f.tolerance)
            );
        }
        let _ = writeln!(s, "passed = {}", self.passed());
        s
    }

    pub fn write_fits_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["name", "slope", "coefficient", "residual", "ci95", "points"])?;
        for f in &self.fits {
            wr.write_record([
                f.name.clone(),
                format_value(f.slope),
                format_value(f.coefficient),
                format_value(f.residual),
                format_value(f.ci95),
                f.points.to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Writes `<name>_summary.txt`, `<name>_fits.csv` when there are fits, and
    /// one `<name>_<table>.csv` per table.
    pub fn write_dir(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut out = Vec::new();
        let p = dir.join(format!("{}_summary.txt", self.name));
        fs::write(&p, self.summary())?;
        out.push(p);
        if !self.fits.is_empty() {
            let p = dir.join(format!("{}_fits.csv", self.name));
            self.write_fits_csv(fs::File::create(&p)?)?;
            out.push(p);
        }
        for t in &self.tables {
            let p = dir.join(format!("{}_{}.csv", self.name, t.name));
            t.write_csv(fs::File::create(&p)?)?;
            out.push(p);
        }
        Ok(out)
    }
}

/// Parameters of the weak lower-bound estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaWeakQuery {
    pub point: Vec<f64>,
    pub beta: f64,
    /// Radius multipliers, positive and increasing.
    pub c_list: Vec<f64>,
    /// Indices into the trajectory's stored times (all when absent).
    #[serde(default)]
    pub times: Option<Vec<usize>>,
}

impl BetaWeakQuery {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 0.5) {
            return Err(Error::InvalidArgument(format!("beta {} outside (0, 1/2)", self.beta)));
        }
        if self.c_list.is_empty() {
            return Err(Error::InvalidArgument("c_list is empty".into()));
        }
        if self.c_list[0] <= 0.0 || self.c_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("c_list must be positive and increasing".into()));
        }
        Ok(())
    }
}

/// `min R` over flat balls `B(x, C t^β)`, its small-time liminf estimate per `C`
/// and the infimum over `C`.
///
/// Balls below two grid spacings are masked. The liminf per `C` is the minimum
/// over the three smallest unmasked times.
pub fn beta_weak_inf(traj: &FlowTrajectory, q: &BetaWeakQuery) -> Result<AnalysisReport> {
    q.validate()?;
    let idx: Vec<usize> = q.times.clone().unwrap_or_else(|| (0..traj.len()).collect());
    if idx.iter().any(|&i| i >= traj.len()) {
        return Err(Error::InvalidArgument("time index outside the trajectory".into()));
    }
    let ts: Vec<f64> = idx.iter().map(|&i| traj.times[i]).collect();
    let (lo, hi) = ts.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &t| (a.min(t), b.max(t)));
    if ts.is_empty() || hi / lo < 100.0 {
        return Err(Error::InsufficientLattice { needed: 2, found: 0 });
    }
    let grid = traj.grid();
    let spacing = grid.min_spacing();
    let curv: Vec<Vec<f64>> = idx.iter().map(|&i| scalar_curvature(&traj.states[i])).collect();
    let mut m = Table::new("matrix", &["t", "C", "radius", "min_r"]);
    let mut report = AnalysisReport::new("beta_weak");
    let mut liminf = Table::new("liminf", &["C", "liminf"]);
    let mut masked = 0usize;
    let mut diagnostic = f64::INFINITY;
    let mut largest_radius: f64 = 0.0;
    for &c in &q.c_list {
        let mut valid: Vec<(f64, f64)> = Vec::new();
        for (k, &t) in ts.iter().enumerate() {
            let radius = c * t.powf(q.beta);
            largest_radius = largest_radius.max(radius);
            let value = if radius < 2.0 * spacing {
                masked += 1;
                f64::NAN
            } else {
                let v = flat_ball_mask(grid, &q.point, radius).iter().map(|&p| curv[k][p]).fold(f64::INFINITY, f64::min);
                valid.push((t, v));
                v
            };
            m.push(vec![t, c, radius, value]);
        }
        valid.sort_by(|a, b| a.0.total_cmp(&b.0));
        let est = valid.iter().take(3).map(|v| v.1).fold(f64::INFINITY, f64::min);
        let est = if valid.is_empty() { f64::NAN } else { est };
        if est.is_finite() {
            diagnostic = diagnostic.min(est);
        }
        liminf.push(vec![c, est]);
    }
    if !diagnostic.is_finite() {
        return Err(Error::BallUnresolved { radius: largest_radius, spacing });
    }
    let mut monotone = true;
    for k in 0..ts.len() {
        let col: Vec<f64> = (0..q.c_list.len()).map(|c| m.rows[c * ts.len() + k][3]).filter(|v| v.is_finite()).collect();
        monotone &= col.windows(2).all(|w| w[1] <= w[0]);
    }
    report.set("beta", q.beta);
    report.set("masked_cells", masked as f64);
    report.set("diagnostic", diagnostic);
    report.gate("monotone_in_c", monotone, if monotone { 1.0 } else { 0.0 }, 1.0);
    report.tables.push(m);
    report.tables.push(liminf);
    Ok(report)
}

/// `min_x R(x, t)` at every stored time.
pub fn min_curvature(traj: &FlowTrajectory) -> Vec<f64> {
    traj.states.iter().map(|g| scalar_curvature(g).into_iter().fold(f64::INFINITY, f64::min)).collect()
}

/// What is known about the initial scalar curvature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "kappa")]
pub enum InitialBound {
    None,
    /// Smooth data with `min R(g₀) = κ`.
    Smooth(f64),
    /// Uniform limit of smooth metrics with `R ≥ κ`.
    RoughLimit(f64),
}

/// Maximum-principle bounds on `min R(t)`; `tol = None` uses `1e−3(1 + |κ|)`.
pub fn max_principle_check(traj: &FlowTrajectory, bound: InitialBound, tol: Option<f64>) -> AnalysisReport {
    let n = traj.dim() as f64;
    let kappa = match bound {
        InitialBound::None => 0.0,
        InitialBound::Smooth(k) | InitialBound::RoughLimit(k) => k,
    };
    let tol = tol.unwrap_or(1e-3 * (1.0 + kappa.abs()));
    let mins = min_curvature(traj);
    let mut table = Table::new("bounds", &["t", "min_r", "universal_bound", "universal_margin", "kappa_bound", "kappa_margin"]);
    let (mut worst_u, mut worst_k) = (f64::INFINITY, f64::INFINITY);
    for (&t, &r) in traj.times.iter().zip(&mins) {
        let ub = -n / (2.0 * t);
        let kb = match bound {
            InitialBound::None => f64::NAN,
            InitialBound::Smooth(k) => k / (1.0 - 2.0 * k / n * t),
            InitialBound::RoughLimit(k) => k,
        };
        worst_u = worst_u.min(r - ub);
        if kb.is_finite() {
            worst_k = worst_k.min(r - kb);
        }
        table.push(vec![t, r, ub, r - ub, kb, r - kb]);
    }
    let mut report = AnalysisReport::new("max_principle");
    report.set("kappa", kappa);
    report.set("min_r", mins.iter().cloned().fold(f64::INFINITY, f64::min));
    report.set("universal_margin", worst_u);
    report.gate("universal_bound", worst_u >= -tol, worst_u, tol);
    if bound != InitialBound::None {
        report.set("kappa_margin", worst_k);
        report.gate("kappa_bound", worst_k >= -tol, worst_k, tol);
    }
    report.tables.push(table);
    report
}

/// Runs the configured solver; an unconverged Picard solve is a [`Error::NoContraction`].
pub fn solve(g0: &MetricField, background: &MetricField, config: &FlowConfig) -> Result<FlowTrajectory> {
    match config.solver {
        SolverKind::Mol => mol_evolve(g0, background, config),
        SolverKind::Picard => {
            let out = picard_solve(g0, background, config)?;
            if !out.converged {
                return Err(Error::NoContraction { history: out.differences });
            }
            Ok(out.trajectory)
        }
    }
}

/// Parameters of the perturbation-stability experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityQuery {
    pub beta: f64,
    pub c_list: Vec<f64>,
    /// Radius of the fixed (non-shrinking) contrast ball.
    pub fixed_radius: f64,
    #[serde(default = "default_fit_residual")]
    pub max_residual: f64,
    /// Largest time entering the fit, as a fraction of the final time.
    #[serde(default = "default_fit_fraction")]
    pub fit_fraction: f64,
}

fn default_fit_fraction() -> f64 {
    0.25
}

fn default_fit_residual() -> f64 {
    0.2
}

/// Flows both metrics of `pair` and fits `sup_{B(x₀, C t^β)} |R′ − R″| ~ t^ω` per `C`.
///
/// Passes iff every fitted `ω` is positive with log-space residual below
/// `max_residual`, and the sup over the fixed ball at the first stored time is
/// at least twice every shrinking-ball value there. Only times up to
/// `fit_fraction · T` enter the fit; balls below two grid spacings, or reaching
/// past the region where the cutoff equals one, are left out.
pub fn perturbation_stability(
    pair: &SecondOrderPair,
    q: &StabilityQuery,
    config: &FlowConfig,
) -> Result<AnalysisReport> {
    let lower = 1.0 / (2.0 + pair.eta);
    if !(q.beta > lower && q.beta < 0.5) {
        return Err(Error::InvalidArgument(format!("beta {} outside ({lower}, 1/2)", q.beta)));
    }
    if q.c_list.is_empty() {
        return Err(Error::InvalidArgument("c_list is empty".into()));
    }
    let background = MetricField::flat(pair.first.grid());
    let a = solve(&pair.first, &background, config)?;
    let b = solve(&pair.second, &background, config)?;
    let diff: Vec<Vec<f64>> = a
        .states
        .iter()
        .zip(&b.states)
        .map(|(x, y)| scalar_curvature(x).iter().zip(scalar_curvature(y)).map(|(u, v)| (u - v).abs()).collect())
        .collect();
    stability_from_differences(&a, &diff, pair, q)
}

fn stability_from_differences(
    traj: &FlowTrajectory,
    diff: &[Vec<f64>],
    pair: &SecondOrderPair,
    q: &StabilityQuery,
) -> Result<AnalysisReport> {
    let grid = traj.grid();
    let spacing = grid.min_spacing();
    let sup_ball = |k: usize, r: f64| flat_ball_mask(grid, &pair.x0, r).iter().map(|&p| diff[k][p]).fold(0.0, f64::max);
    let mut cols = vec!["t".to_string()];
    for c in &q.c_list {
        cols.push(format!("s_c{c}"));
    }
    cols.push("fixed_radius".into());
    let mut table = Table { name: "sup_difference".into(), columns: cols, rows: Vec::new() };
    let mut report = AnalysisReport::new("perturbation_stability");
    let mut per_c: Vec<(Vec<f64>, Vec<f64>)> = vec![(Vec::new(), Vec::new()); q.c_list.len()];
    let mut contrast: f64 = 0.0;
    let t_fit = q.fit_fraction * traj.times.last().copied().unwrap_or(0.0);
    for (k, &t) in traj.times.iter().enumerate() {
        let mut row = vec![t];
        for (ci, &c) in q.c_list.iter().enumerate() {
            let r = c * t.powf(q.beta);
            if r < 2.0 * spacing || r > 0.5 * pair.cutoff_radius {
                row.push(f64::NAN);
            } else {
                let s = sup_ball(k, r);
                if t <= t_fit {
                    per_c[ci].0.push(t);
                    per_c[ci].1.push(s);
                }
                row.push(s);
            }
        }
        let fixed = sup_ball(k, q.fixed_radius);
        contrast = contrast.max(fixed);
        row.push(fixed);
        table.push(row);
    }
    let mut all_ok = true;
    let mut min_omega = f64::INFINITY;
    let mut max_resid: f64 = 0.0;
    for ((ts, ss), c) in per_c.iter().zip(&q.c_list) {
        if ss.iter().all(|v| *v == 0.0) {
            report.set(&format!("omega_c{c}_identical"), 1.0);
            continue;
        }
        if ts.len() < 3 {
            all_ok = false;
            continue;
        }
        let f = power_law_fit(ts, ss);
        min_omega = min_omega.min(f.slope);
        max_resid = max_resid.max(f.residual);
        all_ok &= f.slope > 0.0 && f.residual < q.max_residual;
        report.fits.push(Fit::from_linear(format!("omega_c{c}"), &f, ts.len()));
    }
    let first = &table.rows[0];
    let fixed_first = first[first.len() - 1];
    let shrinking_first = first[1..first.len() - 1].iter().filter(|v| v.is_finite()).cloned().fold(0.0, f64::max);
    report.set("beta", q.beta);
    report.set("eta", pair.eta);
    report.set("fixed_radius_first", fixed_first);
    report.gate(
        "contrast_nonvanishing",
        fixed_first > 0.0 && fixed_first >= 2.0 * shrinking_first,
        fixed_first,
        2.0 * shrinking_first,
    );
    report.set("fixed_radius_contrast", contrast);
    report.set("min_omega", min_omega);
    report.gate("omega_positive", all_ok, min_omega, 0.0);
    report.gate("fit_residual", max_resid < q.max_residual, max_resid, q.max_residual);
    report.tables.push(table);
    Ok(report)
}

/// Stored times in `[T/100, T]` used by rate fits.
pub fn fit_window(traj: &FlowTrajectory) -> Vec<usize> {
    let t_max = traj.times.last().copied().unwrap_or(0.0);
    (0..traj.len()).filter(|&i| traj.times[i] >= t_max / 100.0).collect()
}

/// `sup_x |∇^k h(t)|` at every stored time, derivatives taken with the background connection.
pub fn derivative_norms(traj: &FlowTrajectory, k: u32) -> Vec<f64> {
    traj.perturbations()
        .iter()
        .map(|h| {
            let t = h.to_tensor();
            match k {
                0 => t.sup_norm(),
                1 | 2 => covariant_derivative(&t, &traj.background, k).sup_norm(),
                _ => {
                    let mut d = covariant_derivative(&t, &traj.background, 2);
                    for _ in 2..k {
                        d = covariant_derivative(&d, &traj.background, 1);
                    }
                    d.sup_norm()
                }
            }
        })
        .collect()
}

/// Fits `log sup|∇^k h(t)|` against `log t` over `[T/100, T]`; passes iff the
/// slope is at least `−k/2 − 0.1`. Also records `‖g(t) − g₀‖_∞` and whether it
/// decreases as `t ↓`.
pub fn smoothing_rates(traj: &FlowTrajectory, k_list: &[u32]) -> Result<AnalysisReport> {
    let window = fit_window(traj);
    if window.len() < 3 {
        return Err(Error::InsufficientLattice { needed: 3, found: window.len() });
    }
    let mut report = AnalysisReport::new("smoothing_rates");
    let mut cols: Vec<String> = vec!["t".into(), "distance_to_initial".into()];
    let norms: Vec<Vec<f64>> = k_list.iter().map(|&k| derivative_norms(traj, k)).collect();
    for k in k_list {
        cols.push(format!("grad{k}"));
    }
    let dist: Vec<f64> =
        traj.states.iter().map(|g| g.difference(&traj.initial).map(|d| d.max_abs_entry())).collect::<Result<_>>()?;
    let mut table = Table { name: "norms".into(), columns: cols, rows: Vec::new() };
    for j in 0..traj.len() {
        let mut row = vec![traj.times[j], dist[j]];
        row.extend(norms.iter().map(|n| n[j]));
        table.push(row);
    }
    let ts: Vec<f64> = window.iter().map(|&j| traj.times[j]).collect();
    for (k, n) in k_list.iter().zip(&norms) {
        let ys: Vec<f64> = window.iter().map(|&j| n[j]).collect();
        let f = power_law_fit(&ts, &ys);
        let floor = -(*k as f64) / 2.0 - 0.1;
        report.fits.push(Fit::from_linear(format!("grad{k}"), &f, ts.len()));
        report.gate(&format!("grad{k}_rate"), f.slope >= floor, f.slope, floor);
    }
    let monotone = dist.windows(2).all(|w| w[1] >= w[0]);
    report.set("distance_at_first_time", dist[0]);
    report.set("distance_at_final_time", *dist.last().unwrap());
    report.gate("uniform_convergence", monotone, dist[0], 0.0);
    report.tables.push(table);
    Ok(report)
}

/// `min_c ‖g − c‖_∞` over constant symmetric `c`, attained by the componentwise midrange.
pub fn flat_defect(g: &MetricField) -> f64 {
    g.sym()
        .packed()
        .iter()
        .map(|c| {
            let (lo, hi) = c.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            0.5 * (hi - lo)
        })
        .fold(0.0, f64::max)
}

/// Tracks the flat defect of the pulled-back flow. An experiment, not a proof of rigidity.
pub fn rigidity_probe(gtraj: &GaugeTrajectory) -> Result<AnalysisReport> {
    if gtraj.is_empty() {
        return Err(Error::InsufficientLattice { needed: 1, found: 0 });
    }
    let mut table = Table::new("defect", &["t", "defect"]);
    let defects: Vec<f64> = gtraj.metrics.iter().map(flat_defect).collect();
    for (t, d) in gtraj.times.iter().zip(&defects) {
        table.push(vec![*t, *d]);
    }
    let t_final = *gtraj.times.last().unwrap();
    let tenth = gtraj.times.partition_point(|t| *t < t_final / 10.0).min(gtraj.len() - 1);
    let final_defect = *defects.last().unwrap();
    let earlier = defects[tenth];
    let mut report = AnalysisReport::new("rigidity");
    report.set("final_defect", final_defect);
    report.set("defect_at_tenth", earlier);
    report.set("decreasing", if final_defect <= earlier { 1.0 } else { 0.0 });
    report.gate("defect_not_increasing", final_defect <= earlier + 1e-12, final_defect, earlier);
    report.tables.push(table);
    Ok(report)
}

/// Ricci-flow residual of a gauge trajectory as a report, gated on
/// `max_residual` and on a refinement order within `order_tol` of 2.
pub fn residual_report(gtraj: &GaugeTrajectory, max_residual: f64, order_tol: f64) -> Result<AnalysisReport> {
    let r = ricci_flow_residual(gtraj)?;
    let mut report = AnalysisReport::new("ricci_residual");
    let mut table = Table::new("residual", &["t", "residual", "residual_high"]);
    for ((t, a), b) in r.times.iter().zip(&r.residuals).zip(&r.residuals_high) {
        table.push(vec![*t, *a, *b]);
    }
    report.set("max_residual", r.max_residual);
    report.set("max_residual_high", r.max_residual_high);
    report.set("fine_common", r.fine_common);
    report.set("coarse_common", r.coarse_common);
    let resolved = r.fine_common > 1e-12;
    let order = if resolved { r.refinement_order } else { 0.0 };
    report.set("refinement_order", order);
    report.gate("residual", r.max_residual <= max_residual, r.max_residual, max_residual);
    report.gate("refinement_order", !resolved || (order - 2.0).abs() <= order_tol, order, order_tol);
    report.tables.push(table);
    Ok(report)
}

/// Gauge drift from the first stored time `≥ t_min`, gated on the fitted
/// exponent lying within `tol` of `expected`.
pub fn drift_report(gtraj: &GaugeTrajectory, t_min: f64, expected: f64, tol: f64) -> Result<AnalysisReport> {
    let d = drift_fit(gtraj, t_min)?;
    let mut report = AnalysisReport::new("drift");
    let mut table = Table::new("drift", &["t1", "t2", "sqrt_gap", "drift"]);
    for (t2, dr) in d.t2.iter().zip(&d.drift) {
        table.push(vec![d.t1, *t2, t2.sqrt() - d.t1.sqrt(), *dr]);
    }
    report.fits.push(Fit::from_linear("drift", &d.fit, d.t2.len()));
    report.set("t1", d.t1);
    report.set("constant", d.constant);
    report.set("exponent", d.exponent);
    report.set("limit_error", gtraj.limit_error);
    report.gate("exponent", (d.exponent - expected).abs() <= tol, d.exponent, tol);
    report.tables.push(table);
    Ok(report)
}

/// The X norm of `h = g − ḡ` over the stored times, as a report.
pub fn norm_report(traj: &FlowTrajectory, levels: usize) -> Result<AnalysisReport> {
    let mut opts = NormOptions::new(traj.times.last().copied().unwrap_or(0.0));
    opts.levels = levels;
    let n = x_norm(&traj.times, &traj.perturbations(), &opts)?;
    let mut report = AnalysisReport::new("x_norm");
    let mut table = Table::new("balls", &["center", "radius", "sup", "full", "upper", "weight", "value"]);
    for b in &n.balls {
        table.push(vec![b.center as f64, b.radius, b.sup, b.full, b.upper, b.weight, b.value]);
    }
    report.set("aggregate", n.aggregate);
    report.set("census", n.census_size() as f64);
    report.set("initial_sup", traj.initial_perturbation().sup_norm());
    report.tables.push(table);
    Ok(report)
}

/// `sup_x |R(g)|` of a metric, for quick reporting.
pub fn max_abs_curvature(g: &MetricField) -> f64 {
    scalar_curvature(g).iter().fold(0.0, |a, v| a.max(v.abs()))
}

/// Pointwise `|R(g′) − R(g″)|`.
pub fn curvature_difference(a: &MetricField, b: &MetricField) -> Vec<f64> {
    scalar_curvature(a).iter().zip(scalar_curvature(b)).map(|(u, v)| (u - v).abs()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauge::{integrate_diffeo, GaugeOptions};
    use crate::grid::TorusGrid;
    use crate::rough::{conformal_bump_with_min_curvature, second_order_pair, smooth_metric};

    fn flat_traj(n: usize) -> FlowTrajectory {
        let grid = TorusGrid::new(2, n).unwrap();
        let flat = MetricField::flat(&grid);
        let cfg = FlowConfig { max_dt: 0.01, ..FlowConfig::default() };
        mol_evolve(&flat, &flat, &cfg).unwrap()
    }

    fn query(point: &[f64]) -> BetaWeakQuery {
        BetaWeakQuery { point: point.to_vec(), beta: 0.4, c_list: vec![8.0, 12.0, 16.0], times: None }
    }

    #[test]
    fn flat_beta_weak_is_zero() {
        let traj = flat_traj(32);
        let r = beta_weak_inf(&traj, &query(&[1.0, 2.0])).unwrap();
        assert!(r.scalar("diagnostic").unwrap().abs() <= 1e-9);
        assert!(r.scalar("masked_cells").unwrap() > 0.0);
    }

    #[test]
    fn beta_query_validation() {
        let traj = flat_traj(16);
        let mut q = query(&[0.0, 0.0]);
        q.beta = 0.6;
        assert!(beta_weak_inf(&traj, &q).is_err());
        q.beta = 0.3;
        q.c_list = vec![2.0, 1.0];
        assert!(beta_weak_inf(&traj, &q).is_err());
        let tiny = BetaWeakQuery { c_list: vec![1e-3], ..query(&[0.0, 0.0]) };
        assert!(matches!(beta_weak_inf(&traj, &tiny), Err(Error::BallUnresolved { .. })));
    }

    #[test]
    fn beta_weak_recovers_classical_value_and_is_monotone_in_c() {
        let grid = TorusGrid::new(2, 64).unwrap();
        let g0 = smooth_metric(&grid, 0.02, 2, 5).unwrap();
        let r0 = scalar_curvature(&g0);
        let (p, &rmin) = r0.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        let flat = MetricField::flat(&grid);
        let traj = mol_evolve(&g0, &flat, &FlowConfig::default()).unwrap();
        let r = beta_weak_inf(&traj, &query(&grid.coord(p))).unwrap();
        let diag = r.scalar("diagnostic").unwrap();
        assert!((diag - rmin).abs() <= 1e-2, "{diag} vs {rmin}");
        let m = r.table("matrix").unwrap();
        for t in &traj.times {
            let vals: Vec<f64> = m.rows.iter().filter(|row| row[0] == *t && row[3].is_finite()).map(|row| row[3]).collect();
            assert!(vals.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn max_principle_on_flat_and_kappa_data() {
        let traj = flat_traj(16);
        let r = max_principle_check(&traj, InitialBound::None, None);
        assert!(r.passed());
        assert_eq!(r.scalar("min_r").unwrap(), 0.0);
        let grid = TorusGrid::new(2, 64).unwrap();
        let g0 = conformal_bump_with_min_curvature(&grid, 2, -1.0).unwrap();
        let flat = MetricField::flat(&grid);
        let cfg = FlowConfig { epsilon_guard: 0.3, ..FlowConfig::default() };
        let traj = mol_evolve(&g0, &flat, &cfg).unwrap();
        let r = max_principle_check(&traj, InitialBound::Smooth(-1.0), Some(1e-3));
        assert!(r.passed(), "{}", r.summary());
    }

    #[test]
    fn identical_pair_has_zero_difference() {
        let grid = TorusGrid::new(2, 32).unwrap();
        let g = smooth_metric(&grid, 0.02, 2, 3).unwrap();
        let pair = second_order_pair(&g, &[3.0, 3.0], 1.0, 0.0, 1, None).unwrap();
        let q = StabilityQuery { beta: 0.4, c_list: vec![2.0], fixed_radius: 1.0, max_residual: 0.2, fit_fraction: 0.25 };
        let cfg = FlowConfig { output_steps: 8, max_dt: 1e-3, ..FlowConfig::default() };
        let r = perturbation_stability(&pair, &q, &cfg).unwrap();
        assert_eq!(r.scalar("fixed_radius_contrast").unwrap(), 0.0);
        assert_eq!(r.scalar("omega_c2_identical"), Some(1.0));
    }

    #[test]
    fn smooth_data_has_bounded_derivatives() {
        let grid = TorusGrid::new(2, 32).unwrap();
        let g0 = smooth_metric(&grid, 0.02, 2, 9).unwrap();
        let flat = MetricField::flat(&grid);
        let traj = mol_evolve(&g0, &flat, &FlowConfig { max_dt: 1e-3, ..FlowConfig::default() }).unwrap();
        let r = smoothing_rates(&traj, &[1, 2]).unwrap();
        assert!(r.passed(), "{}", r.summary());
        assert!(r.fit("grad1").unwrap().slope.abs() < 0.1);
    }

    #[test]
    fn flat_defect_of_constant_metrics() {
        let grid = TorusGrid::new(2, 16).unwrap();
        let c = MetricField::constant(&grid, &[[1.2, 0.0, 0.0], [0.0, 0.8, 0.0], [0.0; 3]]).unwrap();
        assert_eq!(flat_defect(&c), 0.0);
        let traj = mol_evolve(&c, &c, &FlowConfig { output_steps: 8, max_dt: 0.01, ..FlowConfig::default() }).unwrap();
        let gt = integrate_diffeo(&traj, &GaugeOptions::default()).unwrap();
        let r = rigidity_probe(&gt).unwrap();
        assert!(r.table("defect").unwrap().rows.iter().all(|row| row[1] <= 1e-12));
    }

    #[test]
    fn report_summary_and_files() {
        let traj = flat_traj(16);
        let r = max_principle_check(&traj, InitialBound::Smooth(0.0), None);
        let s = r.summary();
        assert!(s.contains("flag.universal_bound = pass"));
        let dir = tempfile::tempdir().unwrap();
        let files = r.write_dir(dir.path()).unwrap();
        assert_eq!(files.len(), 2);
        let text = std::fs::read_to_string(&files[1]).unwrap();
        assert!(text.starts_with("t,min_r"));
    }
}
