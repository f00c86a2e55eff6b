//! Discrete Koch–Lamm norms `X`, `Y⁰`, `Y¹`, their weighted variants and an
//! interpolation-inequality diagnostic.
//!
//! Every norm is a maximum over a ball census: all grid points as centers and
//! dyadic radii `r = 2^{−j}√T`. Space integrals are grid sums over flat balls;
//! time integrals integrate the piecewise-linear interpolant of the stored
//! samples, extended by its first value down to `t = 0`.

use std::io::Write;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{MetricField, SymTensorField, TensorField};
use crate::geometry::{ball_offsets, christoffel, nabla_once, offset_index};
use crate::grid::TorusGrid;
use crate::spectral::{forward, inverse, Spectrum};

/// Parameters of the weight `w_a(x,t) = max{(d(x₀,x) + √t + a)^{−2−η}, 1}`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WeightSpec {
    pub center: [f64; 3],
    pub eta: f64,
    pub a: f64,
}

impl WeightSpec {
    pub fn new(center: &[f64], eta: f64, a: f64) -> Result<Self> {
        if !(eta > 0.0) || !(a >= 0.0) {
            return Err(Error::InvalidArgument(format!("weight needs η > 0 and a ≥ 0, got η = {eta}, a = {a}")));
        }
        let mut c = [0.0; 3];
        c[..center.len().min(3)].copy_from_slice(&center[..center.len().min(3)]);
        Ok(Self { center: c, eta, a })
    }

    /// `sup w_a`, attained at `(x₀, 0)`.
    pub fn sup(&self) -> f64 {
        if self.a == 0.0 {
            f64::INFINITY
        } else {
            self.a.powf(-2.0 - self.eta).max(1.0)
        }
    }
}

/// The weight `w_a(x, t)` with flat-torus distance.
pub fn weight_w(grid: &TorusGrid, x: &[f64], t: f64, spec: &WeightSpec) -> Result<f64> {
    let s = grid.distance(&spec.center, x) + t.max(0.0).sqrt() + spec.a;
    if s == 0.0 {
        return Err(Error::UndefinedAtCenter);
    }
    Ok(s.powf(-2.0 - spec.eta).max(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    X,
    Y0,
    Y1,
}

impl NormKind {
    pub fn name(&self) -> &'static str {
        match self {
            NormKind::X => "X",
            NormKind::Y0 => "Y0",
            NormKind::Y1 => "Y1",
        }
    }
}

/// One ball of the census with its terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallTerms {
    pub center: usize,
    pub radius: f64,
    pub sup: f64,
    /// Integral over the full cylinder `B × (0, r²)`, already scaled.
    pub full: f64,
    /// Integral over the upper half cylinder `B × (r²/2, r²)`, already scaled.
    pub upper: f64,
    pub weight: f64,
    pub value: f64,
}

/// Per-ball terms and their maximum.
#[derive(Debug, Clone)]
pub struct NormReport {
    pub kind: NormKind,
    pub weighted: bool,
    pub radii: Vec<f64>,
    pub balls: Vec<BallTerms>,
    pub aggregate: f64,
}

impl NormReport {
    pub fn census_size(&self) -> usize {
        self.balls.len()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["center", "radius", "sup", "full", "upper", "weight", "value"])?;
        for b in &self.balls {
            wr.write_record([
                b.center.to_string(),
                format!("{:.12e}", b.radius),
                format!("{:.12e}", b.sup),
                format!("{:.12e}", b.full),
                format!("{:.12e}", b.upper),
                format!("{:.12e}", b.weight),
                format!("{:.12e}", b.value),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> String {
        format!(
            "norm = {}\nweighted = {}\ncensus = {}\naggregate = {:.12e}\n",
            self.kind.name(),
            self.weighted,
            self.census_size(),
            self.aggregate
        )
    }
}

/// Ball census and weight shared by the norm evaluations.
#[derive(Debug, Clone)]
pub struct NormOptions {
    pub final_time: f64,
    pub levels: usize,
    pub weight: Option<WeightSpec>,
    /// Sampled centers (all grid points when `None`).
    pub centers: Option<Vec<usize>>,
}

impl NormOptions {
    pub fn new(final_time: f64) -> Self {
        Self { final_time, levels: 6, weight: None, centers: None }
    }

    pub fn weighted(mut self, w: WeightSpec) -> Self {
        self.weight = Some(w);
        self
    }

    pub fn radii(&self) -> Vec<f64> {
        (0..self.levels).map(|j| self.final_time.sqrt() / 2f64.powi(j as i32)).collect()
    }
}

const MIN_TIMES: usize = 4;

/// Sum over each flat ball of radius `r`, for every center at once, by FFT correlation.
fn ball_sums(grid: &TorusGrid, f: &[f64], indicator_hat: &[Complex64]) -> Vec<f64> {
    let fh = forward(grid, f);
    let prod: Vec<Complex64> = fh.iter().zip(indicator_hat).map(|(a, b)| a * b.conj()).collect();
    inverse(grid, prod).into_iter().map(|v| v.max(0.0)).collect()
}

fn indicator(grid: &TorusGrid, radius: f64) -> (Vec<Complex64>, Vec<[isize; 3]>) {
    let offs = ball_offsets(grid, radius);
    let mut ind = vec![0.0; grid.len()];
    for o in &offs {
        ind[offset_index(grid, 0, o)] = 1.0;
    }
    (forward(grid, &ind), offs)
}

/// `∫_a^b` of the piecewise-linear interpolant through `(times, vals)`,
/// constant to the left of the first sample.
pub fn integrate_lattice(times: &[f64], vals: &[f64], a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mut total = 0.0;
    let t0 = times[0];
    if a < t0 {
        total += vals[0] * (b.min(t0) - a);
    }
    for k in 1..times.len() {
        let (l, r) = (times[k - 1], times[k]);
        let lo = a.max(l);
        let hi = b.min(r);
        if hi <= lo {
            continue;
        }
        let lerp = |t: f64| vals[k - 1] + (vals[k] - vals[k - 1]) * (t - l) / (r - l);
        total += 0.5 * (lerp(lo) + lerp(hi)) * (hi - lo);
    }
    total
}

struct Spec {
    kind: NormKind,
    /// (exponent p, scale exponent on r) for the full and upper cylinders.
    full: (f64, f64),
    upper: (f64, f64),
}

fn spec_for(kind: NormKind, n: f64) -> Spec {
    match kind {
        NormKind::X | NormKind::Y1 => Spec { kind, full: (2.0, -n / 2.0), upper: (n + 4.0, 2.0 / (n + 4.0)) },
        NormKind::Y0 => Spec { kind, full: (1.0, -n), upper: ((n + 4.0) / 2.0, 4.0 / (n + 4.0)) },
    }
}

/// Shared census evaluation. `mags[k][p]` is the pointwise magnitude entering the
/// integrals at time `times[k]`; `sup_mags` (X only) the magnitude entering the sup term.
fn census(
    grid: &TorusGrid,
    times: &[f64],
    mags: &[Vec<f64>],
    sup_mags: Option<&[Vec<f64>]>,
    spec: Spec,
    opts: &NormOptions,
) -> Result<NormReport> {
    let usable = times.iter().filter(|t| **t > 0.0 && **t <= opts.final_time).count();
    if usable < MIN_TIMES || times.len() != mags.len() {
        return Err(Error::InsufficientLattice { needed: MIN_TIMES, found: usable });
    }
    let dv = grid.cell_volume();
    let radii = opts.radii();
    let centers: Vec<usize> = opts.centers.clone().unwrap_or_else(|| (0..grid.len()).collect());
    // pointwise sup over time, with the weight folded in
    let sup_field: Option<Vec<f64>> = match sup_mags {
        None => None,
        Some(s) => {
            let mut out = vec![0.0f64; grid.len()];
            for (k, m) in s.iter().enumerate() {
                for p in 0..grid.len() {
                    let w = match &opts.weight {
                        Some(ws) => weight_w(grid, &grid.coord(p), times[k], ws)?,
                        None => 1.0,
                    };
                    out[p] = out[p].max(w * m[p]);
                }
            }
            Some(out)
        }
    };
    let pow_full: Vec<Vec<f64>> = mags.iter().map(|m| m.iter().map(|v| v.powf(spec.full.0)).collect()).collect();
    let pow_upper: Vec<Vec<f64>> = mags.iter().map(|m| m.iter().map(|v| v.powf(spec.upper.0)).collect()).collect();
    let mut balls = Vec::with_capacity(centers.len() * radii.len());
    for &r in &radii {
        let (ind, offs) = indicator(grid, r);
        let s_full: Vec<Vec<f64>> = pow_full.iter().map(|f| ball_sums(grid, f, &ind)).collect();
        let s_upper: Vec<Vec<f64>> = pow_upper.iter().map(|f| ball_sums(grid, f, &ind)).collect();
        let r2 = r * r;
        let mut series = vec![0.0; times.len()];
        for &c in &centers {
            for k in 0..times.len() {
                series[k] = s_full[k][c] * dv;
            }
            let full = r.powf(spec.full.1) * integrate_lattice(times, &series, 0.0, r2).powf(1.0 / spec.full.0);
            for k in 0..times.len() {
                series[k] = s_upper[k][c] * dv;
            }
            let upper =
                r.powf(spec.upper.1) * integrate_lattice(times, &series, r2 / 2.0, r2).powf(1.0 / spec.upper.0);
            let sup = match &sup_field {
                Some(sf) => offs.iter().map(|o| sf[offset_index(grid, c, o)]).fold(0.0, f64::max),
                None => 0.0,
            };
            let weight = match &opts.weight {
                Some(ws) => weight_w(grid, &grid.coord(c), r2, ws)?,
                None => 1.0,
            };
            let value = sup + weight * (full + upper);
            balls.push(BallTerms { center: c, radius: r, sup, full, upper, weight, value });
        }
    }
    let aggregate = balls.iter().map(|b| b.value).fold(0.0, f64::max);
    Ok(NormReport { kind: spec.kind, weighted: opts.weight.is_some(), radii, balls, aggregate })
}

/// Pointwise `|∇h|` (Frobenius over all index slots) of a symmetric 2-tensor.
pub fn gradient_magnitude(h: &SymTensorField) -> Vec<f64> {
    let grid = h.grid();
    let d = grid.dim();
    let mut out = vec![0.0; grid.len()];
    for i in 0..d {
        for j in i..d {
            let mult = if i == j { 1.0 } else { 2.0 };
            let sp = Spectrum::new(grid, h.get(i, j));
            for a in 0..d {
                let v = sp.derivative(a, 1);
                for p in 0..grid.len() {
                    out[p] += mult * v[p] * v[p];
                }
            }
        }
    }
    out.iter_mut().for_each(|v| *v = v.sqrt());
    out
}

/// `‖h‖_X` (or `‖h‖_{X̃_a}` with a weight) of a time series of perturbations.
pub fn x_norm(times: &[f64], h: &[SymTensorField], opts: &NormOptions) -> Result<NormReport> {
    let Some(first) = h.first() else {
        return Err(Error::InsufficientLattice { needed: MIN_TIMES, found: 0 });
    };
    let grid = *first.grid();
    let sups: Vec<Vec<f64>> = h.iter().map(|f| f.pointwise_norm()).collect();
    let grads: Vec<Vec<f64>> = h.iter().map(gradient_magnitude).collect();
    census(&grid, times, &grads, Some(&sups), spec_for(NormKind::X, grid.dim() as f64), opts)
}

/// `Y⁰` and `Y¹` norms of a decomposition `Q = Q⁰ + div Q¹`, with the fitted product constant.
#[derive(Debug, Clone)]
pub struct YNormReport {
    pub y0: NormReport,
    pub y1: NormReport,
    pub total: f64,
}

pub fn y_norms(times: &[f64], q0: &[SymTensorField], q1: &[TensorField], opts: &NormOptions) -> Result<YNormReport> {
    let Some(first) = q0.first() else {
        return Err(Error::InsufficientLattice { needed: MIN_TIMES, found: 0 });
    };
    let grid = *first.grid();
    let n = grid.dim() as f64;
    let m0: Vec<Vec<f64>> = q0.iter().map(|f| f.pointwise_norm()).collect();
    let m1: Vec<Vec<f64>> = q1.iter().map(|f| f.pointwise_norm()).collect();
    let y0 = census(&grid, times, &m0, None, spec_for(NormKind::Y0, n), opts)?;
    let y1 = census(&grid, times, &m1, None, spec_for(NormKind::Y1, n), opts)?;
    let total = y0.aggregate + y1.aggregate;
    Ok(YNormReport { y0, y1, total })
}

/// The constant `c` in `‖Q‖_{Ỹ_a} ≤ c ‖h‖_X ‖h‖_{X̃_a}` measured on one instance.
pub fn product_constant(y: &YNormReport, x: &NormReport, x_weighted: &NormReport) -> f64 {
    let denom = x.aggregate * x_weighted.aggregate;
    if denom == 0.0 {
        0.0
    } else {
        y.total / denom
    }
}

/// Outcome of the interpolation-inequality diagnostic.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationReport {
    pub k: usize,
    pub l: usize,
    /// Largest sampled ratio, an empirical constant.
    pub constant: f64,
    pub worst_radius: f64,
    pub worst_offset: f64,
    pub samples: usize,
}

fn repeated_nabla(f: &TensorField, gamma: Option<&TensorField>, order: usize) -> Vec<f64> {
    let mut t = f.clone();
    for _ in 0..order {
        t = nabla_once(&t, gamma);
    }
    t.pointwise_norm()
}

/// Empirical constant of `‖∇^k f‖_{B(x,r)} ≤ C(a^{−k}‖f‖_{B(x,r+a)} + a^{ℓ−k}‖∇^ℓ f‖_{B(x,r+a)})`
/// over all grid centers, `radii`, and offsets `a ≤ r` from `offsets`, with sup norms on balls.
pub fn interpolation_diagnostic(
    f: &TensorField,
    g: &MetricField,
    k: usize,
    l: usize,
    radii: &[f64],
    offsets: &[f64],
) -> Result<InterpolationReport> {
    if !(1 <= k && k < l && l <= 4) {
        return Err(Error::InvalidArgument(format!("need 1 ≤ k < ℓ ≤ 4, got k = {k}, ℓ = {l}")));
    }
    let grid = *f.grid();
    let gamma = if g.is_constant() { None } else { Some(christoffel(g)) };
    let f0 = f.pointwise_norm();
    let fk = repeated_nabla(f, gamma.as_ref(), k);
    let fl = repeated_nabla(f, gamma.as_ref(), l);
    let ball_max = |field: &[f64], r: f64| -> Vec<f64> {
        let offs = ball_offsets(&grid, r);
        (0..grid.len()).map(|c| offs.iter().map(|o| field[offset_index(&grid, c, o)]).fold(0.0, f64::max)).collect()
    };
    let mut best = InterpolationReport { k, l, constant: 0.0, worst_radius: 0.0, worst_offset: 0.0, samples: 0 };
    for &r in radii {
        let num = ball_max(&fk, r);
        for &a in offsets.iter().filter(|a| **a > 0.0 && **a <= r) {
            let big0 = ball_max(&f0, r + a);
            let bigl = ball_max(&fl, r + a);
            for c in 0..grid.len() {
                let den = a.powi(-(k as i32)) * big0[c] + a.powi((l - k) as i32) * bigl[c];
                best.samples += 1;
                if den > 0.0 {
                    let ratio = num[c] / den;
                    if ratio > best.constant {
                        best.constant = ratio;
                        best.worst_radius = r;
                        best.worst_offset = a;
                    }
                }
            }
        }
    }
    Ok(best)
}
