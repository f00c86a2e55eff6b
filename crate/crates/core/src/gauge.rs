//! DeTurck vector field, the gauge diffeomorphisms and pullback to Ricci flow.
//!
//! A Ricci–DeTurck solution `g(t)` becomes a Ricci flow `g̃(t) = χ_t^* g(t)`
//! once `χ` solves `∂_t χ_t(p) = X_t(χ_t(p))` with `X` the DeTurck vector field.
//! Maps are stored as periodic displacements `χ(p) = p + u(p)` on grid points.

use std::io::Write;

use crate::error::{Error, Result};
use crate::field::{determinant, invert, MetricField, Slot, SymTensorField, TensorField};
use crate::fit::{power_law_fit, LinearFit};
use crate::flow::FlowTrajectory;
use crate::geometry::{christoffel_with_inverse, ricci};
use crate::grid::TorusGrid;
use crate::spectral::{derivative, LocalInterpolator};

/// `X^k = g^{ij}(Γ̄^k_{ij} − Γ^k_{ij})`.
pub fn deturck_vector(g: &MetricField, background: &MetricField) -> TensorField {
    let grid = *g.grid();
    let d = grid.dim();
    let n = grid.len();
    let ginv = g.inverse();
    let gamma = christoffel_with_inverse(g, &ginv);
    let gamma_bar = christoffel_with_inverse(background, &background.inverse());
    let mut x = TensorField::zeros(&grid, &[Slot::Contra]);
    for k in 0..d {
        let mut v = vec![0.0; n];
        for i in 0..d {
            for j in 0..d {
                let gij = ginv.get(i, j);
                let a = gamma_bar.component(&[k, i, j]);
                let b = gamma.component(&[k, i, j]);
                for p in 0..n {
                    v[p] += gij[p] * (a[p] - b[p]);
                }
            }
        }
        *x.component_mut(&[k]) = v;
    }
    x
}

/// A map `χ(p) = p + u(p)` of the torus, sampled on grid points.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffeoField {
    grid: TorusGrid,
    displacement: Vec<Vec<f64>>,
    time: f64,
}

impl DiffeoField {
    pub fn identity(grid: &TorusGrid, time: f64) -> Self {
        Self { grid: *grid, displacement: vec![vec![0.0; grid.len()]; grid.dim()], time }
    }

    pub fn from_displacement(grid: &TorusGrid, displacement: Vec<Vec<f64>>, time: f64) -> Result<Self> {
        if displacement.len() != grid.dim() || displacement.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::ShapeMismatch("displacement needs one full-grid component per axis".into()));
        }
        Ok(Self { grid: *grid, displacement, time })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn displacement(&self) -> &[Vec<f64>] {
        &self.displacement
    }

    /// `χ(p)` for grid point `p`, not wrapped into the fundamental domain.
    pub fn image(&self, p: usize) -> [f64; 3] {
        let mut x = self.grid.coord(p);
        for (a, u) in self.displacement.iter().enumerate() {
            x[a] += u[p];
        }
        x
    }

    /// `Dχ = I + ∂u` at every grid point, as `jac[p][a][i] = ∂_i χ^a`.
    pub fn jacobian(&self) -> Vec<[[f64; 3]; 3]> {
        let d = self.grid.dim();
        let mut jac = vec![[[0.0; 3]; 3]; self.grid.len()];
        for a in 0..d {
            for i in 0..d {
                let du = derivative(&self.grid, &self.displacement[a], i, 1);
                for (p, v) in du.into_iter().enumerate() {
                    jac[p][a][i] = v + if a == i { 1.0 } else { 0.0 };
                }
            }
        }
        jac
    }

    /// Minimum of `det Dχ` and the point where it is attained.
    pub fn min_jacobian_det(&self) -> (usize, f64) {
        let d = self.grid.dim();
        self.jacobian()
            .iter()
            .map(|j| determinant(d, j))
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (p, v)| if v < acc.1 { (p, v) } else { acc })
    }

    pub fn check_invertible(&self) -> Result<()> {
        let (point, det) = self.min_jacobian_det();
        if !(det > 0.0) {
            return Err(Error::JacobianDegenerate { point, det });
        }
        Ok(())
    }

    /// `max_p |u(p)|`.
    pub fn max_displacement(&self) -> f64 {
        (0..self.grid.len())
            .map(|p| self.displacement.iter().map(|u| u[p] * u[p]).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// `max_p dist(χ(p), ψ(p))` in the flat torus distance.
    pub fn distance_to(&self, other: &DiffeoField) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::ShapeMismatch("maps live on different grids".into()));
        }
        Ok((0..self.grid.len())
            .map(|p| self.grid.distance(&self.image(p), &other.image(p)))
            .fold(0.0, f64::max))
    }

    /// `χ⁻¹(y)` by fixed-point iteration `q ← y − u(q)`.
    pub fn invert_point(&self, y: &[f64], interps: &[LocalInterpolator], tol: f64) -> Result<[f64; 3]> {
        let d = self.grid.dim();
        let mut q = [0.0; 3];
        q[..d].copy_from_slice(&y[..d]);
        for _ in 0..200 {
            let mut next = [0.0; 3];
            let mut step: f64 = 0.0;
            for a in 0..d {
                next[a] = y[a] - interps[a].eval(&q);
                step = step.max((next[a] - q[a]).abs());
            }
            q = next;
            if step < tol {
                return Ok(q);
            }
        }
        Err(Error::InvalidArgument("fixed-point inversion of the displacement did not converge".into()))
    }
}

/// Interpolation and time-stepping parameters for the gauge ODE.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaugeOptions {
    /// Anchor time `t₀` with `χ_{t₀} = id`; `None` picks the final stored time.
    pub anchor: Option<f64>,
    /// RK4 steps between consecutive stored times.
    pub substeps: usize,
    /// Spectral refinement factor before local interpolation.
    pub oversample: usize,
    /// Half the number of Lagrange nodes per axis.
    pub stencil_half: usize,
}

impl Default for GaugeOptions {
    fn default() -> Self {
        Self { anchor: None, substeps: 4, oversample: 4, stencil_half: 4 }
    }
}

fn interpolators(grid: &TorusGrid, comps: &[Vec<f64>], opts: &GaugeOptions) -> Vec<LocalInterpolator> {
    let factor = if grid.dim() == 3 { opts.oversample.min(2) } else { opts.oversample };
    comps.iter().map(|c| LocalInterpolator::oversampled(grid, c, factor.max(1), opts.stencil_half)).collect()
}

/// Cubic Lagrange weights in time over the four stored times nearest to `t`.
fn time_stencil(times: &[f64], t: f64) -> Vec<(usize, f64)> {
    let m = times.len();
    if m == 1 {
        return vec![(0, 1.0)];
    }
    let right = times.partition_point(|&s| s < t).clamp(1, m - 1);
    let width = 4.min(m);
    let start = (right as isize - 2).clamp(0, (m - width) as isize) as usize;
    let idx: Vec<usize> = (start..start + width).collect();
    idx.iter()
        .map(|&j| {
            let w = idx
                .iter()
                .filter(|&&k| k != j)
                .map(|&k| (t - times[k]) / (times[j] - times[k]))
                .product();
            (j, w)
        })
        .collect()
}

/// The DeTurck field of a trajectory, interpolated in space and time.
#[derive(Debug, Clone)]
pub struct VelocityField {
    grid: TorusGrid,
    times: Vec<f64>,
    /// `fields[j][k]` interpolates `X^k` at `times[j]`.
    fields: Vec<Vec<LocalInterpolator>>,
}

impl VelocityField {
    pub fn new(traj: &FlowTrajectory, opts: &GaugeOptions) -> Self {
        let grid = *traj.grid();
        let fields = traj
            .states
            .iter()
            .map(|g| interpolators(&grid, deturck_vector(g, &traj.background).components(), opts))
            .collect();
        Self { grid, times: traj.times.clone(), fields }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// `X_t` as one interpolator per component.
    pub fn at_time(&self, t: f64) -> Vec<LocalInterpolator> {
        let stencil = time_stencil(&self.times, t);
        (0..self.grid.dim())
            .map(|k| {
                let parts: Vec<(&LocalInterpolator, f64)> =
                    stencil.iter().map(|&(j, w)| (&self.fields[j][k], w)).collect();
                LocalInterpolator::combine(&parts)
            })
            .collect()
    }

    fn rate(&self, x: &[[f64; 3]], t: f64) -> Vec<[f64; 3]> {
        let xs = self.at_time(t);
        let d = self.grid.dim();
        x.iter()
            .map(|p| {
                let mut v = [0.0; 3];
                for k in 0..d {
                    v[k] = xs[k].eval(p);
                }
                v
            })
            .collect()
    }

    /// Integrates `∂_t χ = X_t(χ)` from `chi.time()` to `t_end` with `steps` RK4 steps.
    pub fn advance(&self, chi: &DiffeoField, t_end: f64, steps: usize) -> DiffeoField {
        let d = self.grid.dim();
        let n = self.grid.len();
        let mut x: Vec<[f64; 3]> = (0..n).map(|p| chi.image(p)).collect();
        let steps = steps.max(1);
        let dt = (t_end - chi.time) / steps as f64;
        let mut t = chi.time;
        let axpy = |x: &[[f64; 3]], k: &[[f64; 3]], s: f64| -> Vec<[f64; 3]> {
            x.iter()
                .zip(k)
                .map(|(a, b)| {
                    let mut o = *a;
                    for c in 0..d {
                        o[c] += s * b[c];
                    }
                    o
                })
                .collect()
        };
        for _ in 0..steps {
            let k1 = self.rate(&x, t);
            let k2 = self.rate(&axpy(&x, &k1, 0.5 * dt), t + 0.5 * dt);
            let k3 = self.rate(&axpy(&x, &k2, 0.5 * dt), t + 0.5 * dt);
            let k4 = self.rate(&axpy(&x, &k3, dt), t + dt);
            for p in 0..n {
                for c in 0..d {
                    x[p][c] += dt / 6.0 * (k1[p][c] + 2.0 * k2[p][c] + 2.0 * k3[p][c] + k4[p][c]);
                }
            }
            t += dt;
        }
        let displacement = (0..d)
            .map(|c| (0..n).map(|p| x[p][c] - self.grid.coord(p)[c]).collect())
            .collect();
        DiffeoField { grid: self.grid, displacement, time: t_end }
    }
}

/// `(χ^*g)_{ij}(p) = ∂_iχ^a ∂_jχ^b g_{ab}(χ(p))`.
pub fn pullback_metric(g: &MetricField, chi: &DiffeoField) -> Result<MetricField> {
    pullback_with(g, chi, &GaugeOptions::default())
}

fn pullback_with(g: &MetricField, chi: &DiffeoField, opts: &GaugeOptions) -> Result<MetricField> {
    let grid = *g.grid();
    if grid != chi.grid {
        return Err(Error::ShapeMismatch("metric and map live on different grids".into()));
    }
    chi.check_invertible()?;
    let d = grid.dim();
    let interps = interpolators(&grid, g.sym().packed(), opts);
    let jac = chi.jacobian();
    let mut out = SymTensorField::zeros(&grid);
    for p in 0..grid.len() {
        let y = chi.image(p);
        let mut m = [[0.0; 3]; 3];
        for i in 0..d {
            for j in i..d {
                let v = interps[crate::grid::sym_index(d, i, j)].eval(&y);
                m[i][j] = v;
                m[j][i] = v;
            }
        }
        out.set(p, &congruence(d, &jac[p], &m));
    }
    MetricField::new(out)
}

/// `Jᵀ M J` with `J[a][i]`.
fn congruence(d: usize, jac: &[[f64; 3]; 3], m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut r = [[0.0; 3]; 3];
    for i in 0..d {
        for j in 0..d {
            let mut s = 0.0;
            for a in 0..d {
                for b in 0..d {
                    s += jac[a][i] * jac[b][j] * m[a][b];
                }
            }
            r[i][j] = s;
        }
    }
    r
}

/// `(χ_*g̃)(y) = (Dχ^{−T} g̃ Dχ^{−1})(χ^{−1}(y))`, inverting `χ` pointwise to `1e−10`.
pub fn pushforward_metric(g_tilde: &MetricField, chi: &DiffeoField) -> Result<MetricField> {
    let grid = *g_tilde.grid();
    if grid != chi.grid {
        return Err(Error::ShapeMismatch("metric and map live on different grids".into()));
    }
    chi.check_invertible()?;
    let d = grid.dim();
    let opts = GaugeOptions::default();
    let u_int = interpolators(&grid, &chi.displacement, &opts);
    let g_int = interpolators(&grid, g_tilde.sym().packed(), &opts);
    let jac = chi.jacobian();
    let mut jcomps = Vec::with_capacity(d * d);
    for a in 0..d {
        for i in 0..d {
            jcomps.push(jac.iter().map(|j| j[a][i]).collect::<Vec<f64>>());
        }
    }
    let j_int = interpolators(&grid, &jcomps, &opts);
    let mut out = SymTensorField::zeros(&grid);
    for p in 0..grid.len() {
        let q = chi.invert_point(&grid.coord(p), &u_int, 1e-10)?;
        let mut jq = [[0.0; 3]; 3];
        for a in 0..d {
            for i in 0..d {
                jq[a][i] = j_int[a * d + i].eval(&q);
            }
        }
        let jinv = invert(d, &jq);
        let mut m = [[0.0; 3]; 3];
        for i in 0..d {
            for j in i..d {
                let v = g_int[crate::grid::sym_index(d, i, j)].eval(&q);
                m[i][j] = v;
                m[j][i] = v;
            }
        }
        out.set(p, &congruence(d, &jinv, &m));
    }
    MetricField::new(out)
}

/// Gauge maps and the pulled-back Ricci flow on the stored times of a trajectory.
#[derive(Debug, Clone)]
pub struct GaugeTrajectory {
    pub times: Vec<f64>,
    pub anchor: f64,
    pub maps: Vec<DiffeoField>,
    pub metrics: Vec<MetricField>,
    /// `χ₀` extrapolated linearly in `√t` from the two smallest stored times.
    pub limit_map: DiffeoField,
    /// Error bar `c√t₁` on `limit_map`, with `c` the measured drift constant.
    pub limit_error: f64,
}

impl GaugeTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "max_displacement", "min_jacobian_det"])?;
        for m in &self.maps {
            wr.write_record([
                format!("{:.12e}", m.time()),
                format!("{:.12e}", m.max_displacement()),
                format!("{:.12e}", m.min_jacobian_det().1),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Solves the gauge ODE across the stored times of `traj`, anchored at `opts.anchor`.
///
/// Backward integration stops at the smallest stored time.
pub fn integrate_diffeo(traj: &FlowTrajectory, opts: &GaugeOptions) -> Result<GaugeTrajectory> {
    if traj.is_empty() {
        return Err(Error::InsufficientLattice { needed: 1, found: 0 });
    }
    let anchor = opts.anchor.unwrap_or(*traj.times.last().unwrap());
    let ai = traj
        .times
        .iter()
        .position(|t| (t - anchor).abs() <= 1e-12 * anchor.abs().max(1.0))
        .ok_or_else(|| Error::InvalidArgument(format!("anchor {anchor} is not a stored time")))?;
    if !(anchor > 0.0) {
        return Err(Error::NonPositiveTime(anchor));
    }
    let grid = *traj.grid();
    let vel = VelocityField::new(traj, opts);
    let m = traj.len();
    let mut maps: Vec<Option<DiffeoField>> = vec![None; m];
    maps[ai] = Some(DiffeoField::identity(&grid, traj.times[ai]));
    for j in ai + 1..m {
        let next = vel.advance(maps[j - 1].as_ref().unwrap(), traj.times[j], opts.substeps);
        next.check_invertible()?;
        maps[j] = Some(next);
    }
    for j in (0..ai).rev() {
        let next = vel.advance(maps[j + 1].as_ref().unwrap(), traj.times[j], opts.substeps);
        next.check_invertible()?;
        maps[j] = Some(next);
    }
    let maps: Vec<DiffeoField> = maps.into_iter().map(Option::unwrap).collect();
    let metrics = traj
        .states
        .iter()
        .zip(&maps)
        .map(|(g, chi)| pullback_with(g, chi, opts))
        .collect::<Result<Vec<_>>>()?;
    let (limit_map, limit_error) = extrapolate_limit(&grid, &traj.times, &maps)?;
    Ok(GaugeTrajectory { times: traj.times.clone(), anchor, maps, metrics, limit_map, limit_error })
}

fn extrapolate_limit(grid: &TorusGrid, times: &[f64], maps: &[DiffeoField]) -> Result<(DiffeoField, f64)> {
    if maps.len() < 2 {
        return Ok((DiffeoField { time: 0.0, ..maps[0].clone() }, f64::NAN));
    }
    let (s1, s2) = (times[0].sqrt(), times[1].sqrt());
    let lam = s1 / (s2 - s1);
    let disp: Vec<Vec<f64>> = maps[0]
        .displacement
        .iter()
        .zip(&maps[1].displacement)
        .map(|(u1, u2)| u1.iter().zip(u2).map(|(a, b)| a - lam * (b - a)).collect())
        .collect();
    let c = maps[0].distance_to(&maps[1])? / (s2 - s1);
    Ok((DiffeoField::from_displacement(grid, disp, 0.0)?, c * s1))
}

/// First-derivative weights at `at` from the Lagrange interpolant through `nodes`.
fn derivative_weights(nodes: &[f64], at: f64) -> Vec<f64> {
    let k = nodes.len();
    (0..k)
        .map(|j| {
            let denom: f64 = (0..k).filter(|&m| m != j).map(|m| nodes[j] - nodes[m]).product();
            let mut num = 0.0;
            for skip in 0..k {
                if skip == j {
                    continue;
                }
                num += (0..k).filter(|&m| m != j && m != skip).map(|m| at - nodes[m]).product::<f64>();
            }
            num / denom
        })
        .collect()
}

/// `max_p |∂_t g̃ + 2Ric(g̃)|` at interior stored times.
#[derive(Debug, Clone)]
pub struct ResidualReport {
    pub times: Vec<f64>,
    /// Three-point time derivative.
    pub residuals: Vec<f64>,
    /// Five-point time derivative (`NaN` within two points of an end).
    pub residuals_high: Vec<f64>,
    pub max_residual: f64,
    pub max_residual_high: f64,
    /// Maximum three-point residual over the even-index times, on the full lattice.
    pub fine_common: f64,
    /// Same times, differentiated on the even-index sublattice.
    pub coarse_common: f64,
    /// `log₂(coarse_common / fine_common)`.
    pub refinement_order: f64,
}

impl ResidualReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "residual", "residual_high"])?;
        for ((t, r), h) in self.times.iter().zip(&self.residuals).zip(&self.residuals_high) {
            wr.write_record([format!("{t:.12e}"), format!("{r:.12e}"), format!("{h:.12e}")])?;
        }
        wr.flush()?;
        Ok(())
    }
}

fn residual_at(times: &[f64], metrics: &[MetricField], rics: &[SymTensorField], j: usize, idx: &[usize]) -> Result<f64> {
    let nodes: Vec<f64> = idx.iter().map(|&i| times[i]).collect();
    let w = derivative_weights(&nodes, times[j]);
    let mut dt = SymTensorField::zeros(metrics[j].grid());
    for (&i, wi) in idx.iter().zip(&w) {
        dt = dt.add(&metrics[i].sym().scaled(*wi))?;
    }
    Ok(dt.add(&rics[j].scaled(2.0))?.max_abs_entry())
}

/// Compares the time derivative of `g̃` with `−2Ric(g̃)`.
pub fn ricci_flow_residual(gtraj: &GaugeTrajectory) -> Result<ResidualReport> {
    let m = gtraj.len();
    if m < 3 {
        return Err(Error::InsufficientLattice { needed: 3, found: m });
    }
    let times = &gtraj.times;
    let metrics = &gtraj.metrics;
    let rics: Vec<SymTensorField> = metrics.iter().map(ricci).collect();
    let mut out_t = Vec::new();
    let mut res = Vec::new();
    let mut res_high = Vec::new();
    for j in 1..m - 1 {
        out_t.push(times[j]);
        res.push(residual_at(times, metrics, &rics, j, &[j - 1, j, j + 1])?);
        res_high.push(if j >= 2 && j + 2 < m {
            residual_at(times, metrics, &rics, j, &[j - 2, j - 1, j, j + 1, j + 2])?
        } else {
            f64::NAN
        });
    }
    let (mut fine, mut coarse) = (0.0f64, 0.0f64);
    let mut j = 2;
    while j + 2 < m {
        fine = fine.max(residual_at(times, metrics, &rics, j, &[j - 1, j, j + 1])?);
        coarse = coarse.max(residual_at(times, metrics, &rics, j, &[j - 2, j, j + 2])?);
        j += 2;
    }
    let max_residual = res.iter().cloned().fold(0.0, f64::max);
    let max_residual_high = res_high.iter().filter(|v| v.is_finite()).cloned().fold(0.0, f64::max);
    Ok(ResidualReport {
        times: out_t,
        residuals: res,
        residuals_high: res_high,
        max_residual,
        max_residual_high,
        fine_common: fine,
        coarse_common: coarse,
        refinement_order: (coarse / fine).log2(),
    })
}

/// Drift of the gauge maps away from the smallest stored time.
#[derive(Debug, Clone)]
pub struct DriftReport {
    pub t1: f64,
    pub t2: Vec<f64>,
    /// `max_p dist(χ_{t₁}(p), χ_{t₂}(p))`.
    pub drift: Vec<f64>,
    /// `max drift / (√t₂ − √t₁)`.
    pub constant: f64,
    /// Power-law fit of the drift against `√t₂ − √t₁`.
    pub fit: LinearFit,
    /// Fitted exponent in `t`, half the fitted slope.
    pub exponent: f64,
}

impl DriftReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t1", "t2", "sqrt_gap", "drift"])?;
        for (t2, dr) in self.t2.iter().zip(&self.drift) {
            wr.write_record([
                format!("{:.12e}", self.t1),
                format!("{t2:.12e}"),
                format!("{:.12e}", t2.sqrt() - self.t1.sqrt()),
                format!("{dr:.12e}"),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Measures drift from the map at the first stored time `≥ t_min` out to every later time.
pub fn drift_fit(gtraj: &GaugeTrajectory, t_min: f64) -> Result<DriftReport> {
    let start = gtraj.times.iter().position(|t| *t >= t_min).unwrap_or(gtraj.len());
    if gtraj.len() < start + 3 {
        return Err(Error::InsufficientLattice { needed: 3, found: gtraj.len().saturating_sub(start) });
    }
    let t1 = gtraj.times[start];
    let base = &gtraj.maps[start];
    let mut t2 = Vec::new();
    let mut drift = Vec::new();
    for j in start + 1..gtraj.len() {
        t2.push(gtraj.times[j]);
        drift.push(base.distance_to(&gtraj.maps[j])?);
    }
    let gaps: Vec<f64> = t2.iter().map(|t| t.sqrt() - t1.sqrt()).collect();
    let constant = drift.iter().zip(&gaps).map(|(d, g)| d / g).fold(0.0, f64::max);
    let fit = power_law_fit(&gaps, &drift);
    Ok(DriftReport { t1, t2, drift, constant, fit, exponent: fit.slope / 2.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{mol_evolve, FlowConfig};
    use crate::geometry::scalar_curvature;
    use crate::spectral::TrigInterpolator;

    fn smooth_flow(n: usize, steps: usize) -> FlowTrajectory {
        let grid = TorusGrid::new(2, n).unwrap();
        let flat = MetricField::flat(&grid);
        let h = SymTensorField::from_fn(&grid, |x| {
            let a = 0.01 * (x[0] + x[1]).sin();
            let b = 0.01 * (x[0] - 2.0 * x[1]).cos();
            [[a, b, 0.0], [b, -0.5 * a, 0.0], [0.0; 3]]
        });
        let g0 = flat.perturbed(&h).unwrap();
        let cfg = FlowConfig { output_steps: steps, max_dt: 1e-3, ..FlowConfig::default() };
        mol_evolve(&g0, &flat, &cfg).unwrap()
    }

    #[test]
    fn deturck_vanishes_on_background_and_2d_conformal() {
        let grid = TorusGrid::new(2, 32).unwrap();
        let flat = MetricField::flat(&grid);
        assert_eq!(deturck_vector(&flat, &flat).sup_norm(), 0.0);
        let g = MetricField::new(SymTensorField::from_fn(&grid, |x| {
            let e = (0.2 * x[0].sin() * x[1].cos()).exp();
            [[e, 0.0, 0.0], [0.0, e, 0.0], [0.0; 3]]
        }))
        .unwrap();
        assert!(deturck_vector(&g, &flat).sup_norm() < 1e-12);
    }

    #[test]
    fn deturck_matches_3d_conformal_oracle() {
        let grid = TorusGrid::new(3, 16).unwrap();
        let flat = MetricField::flat(&grid);
        let phi = |x: &[f64; 3]| 0.1 * x[0].sin() * x[1].cos() + 0.05 * x[2].sin();
        let g = MetricField::new(SymTensorField::from_fn(&grid, |x| {
            let e = (2.0 * phi(x)).exp();
            [[e, 0.0, 0.0], [0.0, e, 0.0], [0.0, 0.0, e]]
        }))
        .unwrap();
        let x = deturck_vector(&g, &flat);
        for p in 0..grid.len() {
            let c = grid.coord(p);
            let e = (-2.0 * phi(&c)).exp();
            let grad = [
                0.1 * c[0].cos() * c[1].cos(),
                -0.1 * c[0].sin() * c[1].sin(),
                0.05 * c[2].cos(),
            ];
            for k in 0..3 {
                assert!((x.component(&[k])[p] - e * grad[k]).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn flat_flow_has_identity_gauge() {
        let grid = TorusGrid::new(2, 16).unwrap();
        let flat = MetricField::flat(&grid);
        let cfg = FlowConfig { output_steps: 8, max_dt: 0.01, ..FlowConfig::default() };
        let traj = mol_evolve(&flat, &flat, &cfg).unwrap();
        let gt = integrate_diffeo(&traj, &GaugeOptions::default()).unwrap();
        assert!(gt.maps.iter().all(|m| m.max_displacement() == 0.0));
        let r = ricci_flow_residual(&gt).unwrap();
        assert!(r.max_residual <= 1e-12);
    }

    #[test]
    fn pullback_by_identity_and_translation() {
        let grid = TorusGrid::new(2, 32).unwrap();
        let g = crate::rough::smooth_metric(&grid, 0.05, 3, 7).unwrap();
        let id = DiffeoField::identity(&grid, 0.0);
        let same = pullback_metric(&g, &id).unwrap();
        assert!(same.difference(&g).unwrap().max_abs_entry() <= 1e-12);
        let shift = 3.0 * grid.spacing(0);
        let tr = DiffeoField::from_displacement(&grid, vec![vec![shift; grid.len()], vec![0.0; grid.len()]], 0.0).unwrap();
        let moved = pullback_metric(&g, &tr).unwrap();
        let r0 = scalar_curvature(&g);
        let r1 = scalar_curvature(&moved);
        for p in 0..grid.len() {
            let q = grid.shifted(p, 0, 3);
            assert!((r1[p] - r0[q]).abs() <= 1e-10);
        }
    }

    #[test]
    fn scalar_curvature_is_diffeomorphism_invariant() {
        let grid = TorusGrid::new(2, 64).unwrap();
        let g = crate::rough::smooth_metric(&grid, 0.05, 3, 11).unwrap();
        let u = |x: &[f64; 3], a: usize| 0.05 * if a == 0 { (x[1] + 0.3).sin() } else { (x[0] - x[1]).cos() };
        let disp = (0..2).map(|a| (0..grid.len()).map(|p| u(&grid.coord(p), a)).collect()).collect();
        let chi = DiffeoField::from_displacement(&grid, disp, 0.0).unwrap();
        let pulled = pullback_metric(&g, &chi).unwrap();
        let r = TrigInterpolator::new(&grid, &scalar_curvature(&g));
        let rp = scalar_curvature(&pulled);
        let worst = (0..grid.len()).map(|p| (rp[p] - r.eval(&chi.image(p))).abs()).fold(0.0, f64::max);
        assert!(worst <= 1e-6, "{worst}");
        let back = pushforward_metric(&pulled, &chi).unwrap();
        assert!(back.difference(&g).unwrap().max_abs_entry() <= 1e-7);
    }

    #[test]
    fn degenerate_map_is_rejected() {
        let grid = TorusGrid::new(2, 16).unwrap();
        let disp = vec![(0..grid.len()).map(|p| -2.0 * grid.coord(p)[0].sin()).collect(), vec![0.0; grid.len()]];
        let chi = DiffeoField::from_displacement(&grid, disp, 0.0).unwrap();
        assert!(matches!(
            pullback_metric(&MetricField::flat(&grid), &chi),
            Err(Error::JacobianDegenerate { .. })
        ));
    }

    #[test]
    fn time_stencil_reproduces_cubics() {
        let times = [0.1, 0.2, 0.4, 0.5, 0.9, 1.0];
        for t in [0.15, 0.45, 0.95, 0.1] {
            let w = time_stencil(&times, t);
            let v: f64 = w.iter().map(|&(j, wj)| wj * times[j].powi(3)).sum();
            assert!((v - t.powi(3)).abs() < 1e-13);
        }
        let w = derivative_weights(&[0.0, 0.1, 0.3], 0.1);
        let d: f64 = w.iter().zip([0.0f64, 0.1, 0.3]).map(|(a, t)| a * t * t).sum();
        assert!((d - 0.2).abs() < 1e-13);
    }

    #[test]
    fn rk4_step_matches_refined_integration() {
        let traj = smooth_flow(32, 16);
        let vel = VelocityField::new(&traj, &GaugeOptions::default());
        let t0 = traj.times[8];
        let t1 = traj.times[9];
        let id = DiffeoField::identity(traj.grid(), t0);
        let one = vel.advance(&id, t1, 1);
        let fine = vel.advance(&id, t1, 10);
        assert!(one.distance_to(&fine).unwrap() <= 1e-8);
        assert!(one.max_displacement() > 0.0);
    }

    #[test]
    fn composition_matches_direct_integration() {
        let traj = smooth_flow(32, 16);
        let vel = VelocityField::new(&traj, &GaugeOptions::default());
        let (t0, t1, t2) = (traj.times[15], traj.times[10], traj.times[4]);
        let grid = *traj.grid();
        let direct = vel.advance(&DiffeoField::identity(&grid, t0), t2, 24);
        let first = vel.advance(&DiffeoField::identity(&grid, t0), t1, 12);
        let second = vel.advance(&DiffeoField::identity(&grid, t1), t2, 12);
        let interp = interpolators(&grid, second.displacement(), &GaugeOptions::default());
        let mut worst: f64 = 0.0;
        for p in 0..grid.len() {
            let y = first.image(p);
            let mut z = y;
            for a in 0..2 {
                z[a] += interp[a].eval(&y);
            }
            worst = worst.max(grid.distance(&z, &direct.image(p)));
        }
        assert!(worst <= 1e-7, "{worst}");
    }

    #[test]
    fn smooth_flow_pulls_back_to_ricci_flow() {
        let traj = smooth_flow(32, 32);
        let gt = integrate_diffeo(&traj, &GaugeOptions::default()).unwrap();
        assert!(gt.maps.last().unwrap().max_displacement() == 0.0);
        let r = ricci_flow_residual(&gt).unwrap();
        assert!(r.max_residual <= 1e-3, "{}", r.max_residual);
        assert!(r.max_residual_high <= r.max_residual);
        assert!((r.refinement_order - 2.0).abs() < 0.5, "order {}", r.refinement_order);
    }
}
