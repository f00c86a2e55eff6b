//! Generators of rough initial metrics and of metric pairs agreeing to
//! greater than second order at a point.
//!
//! All randomness is keyed by `(seed, component, mode)` so a field generated
//! at two resolutions shares its low modes exactly and reruns are bit-identical.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{MetricField, SymTensorField};
use crate::geometry::scalar_curvature;
use crate::grid::TorusGrid;
use crate::spectral::{inverse, wavevector, Spectrum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoughKind {
    /// Random Weierstrass-type spectrum `|k|^{−n/2−α}`.
    HoelderFourier,
    /// Random low-mode perturbation.
    SmoothFourier,
    /// `e^{2φ}δ` with `φ = a Π sin(m x_a)`.
    ConformalBump,
    /// `(I + Du)ᵀ(I + Du)` for a rough displacement `u`: flat, but rough in coordinates.
    FlatPullback,
}

/// Parameters of a generated initial metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoughSpec {
    pub kind: RoughKind,
    /// Target `‖g − δ‖_∞`.
    pub amplitude: f64,
    pub alpha: f64,
    pub seed: u64,
    /// Largest mode of `smooth_fourier` data, and the frequency `m` of `conformal_bump`.
    pub modes: usize,
    /// For `conformal_bump`: choose the amplitude so that `min R = kappa` instead.
    pub kappa: Option<f64>,
}

impl Default for RoughSpec {
    fn default() -> Self {
        Self { kind: RoughKind::HoelderFourier, amplitude: 0.03, alpha: 0.3, seed: 1, modes: 2, kappa: None }
    }
}

impl RoughSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0 && self.amplitude < 1.0) {
            return Err(Error::InvalidArgument(format!("amplitude {} outside [0, 1)", self.amplitude)));
        }
        if self.kind == RoughKind::HoelderFourier && !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        if matches!(self.kind, RoughKind::SmoothFourier | RoughKind::ConformalBump) && self.modes == 0 {
            return Err(Error::InvalidArgument("modes must be positive".into()));
        }
        Ok(())
    }
}

/// Generates the initial metric described by `spec`.
pub fn generate(grid: &TorusGrid, spec: &RoughSpec) -> Result<MetricField> {
    spec.validate()?;
    match spec.kind {
        RoughKind::HoelderFourier => hoelder_metric(grid, spec),
        RoughKind::SmoothFourier => smooth_metric(grid, spec.amplitude, spec.modes, spec.seed),
        RoughKind::ConformalBump => match spec.kappa {
            Some(k) => conformal_bump_with_min_curvature(grid, spec.modes, k),
            None => conformal_bump(grid, spec.modes, spec.amplitude),
        },
        RoughKind::FlatPullback => flat_pullback(grid, spec.amplitude, spec.alpha, spec.seed),
    }
}

fn mode_rng(seed: u64, component: usize, signed: &[i64; 3]) -> ChaCha8Rng {
    let key = ((component as u64) << 48)
        | (((signed[0] + 0x8000) as u64 & 0xffff) << 32)
        | (((signed[1] + 0x8000) as u64 & 0xffff) << 16)
        | ((signed[2] + 0x8000) as u64 & 0xffff);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(key);
    rng
}

fn signed_modes(grid: &TorusGrid, idx: usize) -> [i64; 3] {
    let m = grid.multi_index(idx);
    let mut s = [0i64; 3];
    for a in 0..grid.dim() {
        s[a] = grid.signed_mode(m[a]);
    }
    s
}

/// Random real field `Σ_m A(m) cos(k·x + φ_m)` over modes with `0 < |m|_∞ ≤ max_mode`
/// (and below Nyquist), with phases keyed by `(seed, component, m)`.
fn random_field<F: Fn(&[f64; 3]) -> f64>(
    grid: &TorusGrid,
    seed: u64,
    component: usize,
    max_mode: i64,
    amplitude: F,
) -> Vec<f64> {
    let nyq = grid.n() as i64 / 2;
    let mut coeffs = vec![Complex64::new(0.0, 0.0); grid.len()];
    for idx in 0..grid.len() {
        let s = signed_modes(grid, idx);
        let top = s[..grid.dim()].iter().map(|v| v.abs()).max().unwrap_or(0);
        if top == 0 || top > max_mode || top >= nyq {
            continue;
        }
        let k = wavevector(grid, idx);
        let a = amplitude(&k);
        let mut rng = mode_rng(seed, component, &s);
        let phase: f64 = rng.gen_range(0.0..2.0 * PI);
        let c = Complex64::from_polar(0.5 * a, phase);
        coeffs[idx] += c;
        let mut neg = grid.multi_index(idx);
        for ax in 0..grid.dim() {
            neg[ax] = (grid.n() - neg[ax]) % grid.n();
        }
        coeffs[grid.flat_index(&neg)] += c.conj();
    }
    let scale = grid.len() as f64;
    inverse(grid, coeffs.into_iter().map(|c| c * scale).collect())
}

fn normalized(grid: &TorusGrid, packed: Vec<Vec<f64>>, amplitude: f64) -> Result<SymTensorField> {
    let h = SymTensorField::from_packed(grid, packed)?;
    let s = h.sup_norm();
    if amplitude == 0.0 || s == 0.0 {
        return Ok(SymTensorField::zeros(grid));
    }
    Ok(h.scaled(amplitude / s))
}

/// Number of resolved octaves of the spectrum, `log2(n/2)`.
pub fn resolved_octaves(grid: &TorusGrid) -> u32 {
    (grid.n() / 2).trailing_zeros()
}

/// `δ + h` with Hölder-type random `h`, normalized to `‖h‖_∞ = amplitude`.
pub fn hoelder_metric(grid: &TorusGrid, spec: &RoughSpec) -> Result<MetricField> {
    let octaves = resolved_octaves(grid);
    if octaves < 3 {
        return Err(Error::ResolutionTooCoarse { points: grid.n(), octaves });
    }
    let n = grid.dim() as f64;
    let expo = -n / 2.0 - spec.alpha;
    let packed: Vec<Vec<f64>> = (0..grid.sym_len())
        .map(|c| {
            random_field(grid, spec.seed, c, i64::MAX, |k| {
                let norm = k[..grid.dim()].iter().map(|v| v * v).sum::<f64>().sqrt();
                norm.powf(expo)
            })
        })
        .collect();
    let h = normalized(grid, packed, spec.amplitude)?;
    MetricField::flat(grid).perturbed(&h)
}

/// `δ + h` with random modes `|m|_∞ ≤ modes`, normalized to `‖h‖_∞ = amplitude`.
pub fn smooth_metric(grid: &TorusGrid, amplitude: f64, modes: usize, seed: u64) -> Result<MetricField> {
    let packed: Vec<Vec<f64>> = (0..grid.sym_len())
        .map(|c| {
            random_field(grid, seed, c, modes as i64, |k| {
                let norm2 = k[..grid.dim()].iter().map(|v| v * v).sum::<f64>();
                1.0 / (1.0 + norm2)
            })
        })
        .collect();
    let h = normalized(grid, packed, amplitude)?;
    MetricField::flat(grid).perturbed(&h)
}

/// `e^{2φ}δ` with `φ = a Π_a sin(m x_a)` and `a` fixed by `‖g − δ‖_∞ = amplitude`.
pub fn conformal_bump(grid: &TorusGrid, m: usize, amplitude: f64) -> Result<MetricField> {
    let n = grid.dim() as f64;
    // ‖e^{2φ} − 1‖ √n is largest where φ = +a
    let a = 0.5 * (1.0 + amplitude / n.sqrt()).ln();
    conformal_bump_with_coefficient(grid, m, a)
}

pub fn conformal_bump_with_coefficient(grid: &TorusGrid, m: usize, a: f64) -> Result<MetricField> {
    let d = grid.dim();
    let mf = m as f64;
    let s = SymTensorField::from_fn(grid, |x| {
        let phi = a * (0..d).map(|ax| (mf * x[ax] * 2.0 * PI / grid.length(ax)).sin()).product::<f64>();
        let e = (2.0 * phi).exp();
        let mut out = [[0.0; 3]; 3];
        for ax in 0..d {
            out[ax][ax] = e;
        }
        out
    });
    MetricField::new(s)
}

/// Conformal bump whose minimum scalar curvature on the grid equals `kappa < 0`.
pub fn conformal_bump_with_min_curvature(grid: &TorusGrid, m: usize, kappa: f64) -> Result<MetricField> {
    if !(kappa < 0.0) {
        return Err(Error::InvalidArgument(format!("target curvature {kappa} must be negative")));
    }
    let min_r = |a: f64| -> Result<f64> {
        let g = conformal_bump_with_coefficient(grid, m, a)?;
        Ok(scalar_curvature(&g).into_iter().fold(f64::INFINITY, f64::min))
    };
    let (mut lo, mut hi) = (0.0, 0.05);
    while min_r(hi)? > kappa {
        hi *= 2.0;
        if hi > 1.0 {
            return Err(Error::InvalidArgument(format!("curvature {kappa} unreachable with mode {m}")));
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if min_r(mid)? > kappa {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    conformal_bump_with_coefficient(grid, m, 0.5 * (lo + hi))
}

/// `(I + Du)ᵀ(I + Du)` for a random displacement `u` with spectrum `|k|^{−1−n/2−α}`
/// band-limited to `n/4` (so the product is resolved exactly), scaled so
/// `‖g − δ‖_∞ = amplitude`. The metric is flat: it is the pullback of `δ` by `x ↦ x + u`.
pub fn flat_pullback(grid: &TorusGrid, amplitude: f64, alpha: f64, seed: u64) -> Result<MetricField> {
    let d = grid.dim();
    let nd = d as f64;
    let band = (grid.n() / 4) as i64 - 1;
    let raw: Vec<Vec<f64>> = (0..d)
        .map(|c| {
            random_field(grid, seed, c, band, |k| {
                let norm = k[..d].iter().map(|v| v * v).sum::<f64>().sqrt();
                norm.powf(-1.0 - nd / 2.0 - alpha)
            })
        })
        .collect();
    let jac = |u: &[Vec<f64>]| -> Vec<Vec<Vec<f64>>> {
        u.iter()
            .map(|c| {
                let sp = Spectrum::new(grid, c);
                (0..d).map(|ax| sp.derivative(ax, 1)).collect()
            })
            .collect()
    };
    let build = |scale: f64| -> Result<SymTensorField> {
        let u: Vec<Vec<f64>> = raw.iter().map(|c| c.iter().map(|v| v * scale).collect()).collect();
        let du = jac(&u);
        let mut s = SymTensorField::zeros(grid);
        for p in 0..grid.len() {
            let mut f = [[0.0; 3]; 3];
            for a in 0..d {
                for b in 0..d {
                    f[a][b] = if a == b { 1.0 } else { 0.0 } + du[a][b][p];
                }
            }
            let mut m = [[0.0; 3]; 3];
            for i in 0..d {
                for j in 0..d {
                    m[i][j] = (0..d).map(|a| f[a][i] * f[a][j]).sum::<f64>() - if i == j { 1.0 } else { 0.0 };
                }
            }
            s.set(p, &m);
        }
        Ok(s)
    };
    if amplitude == 0.0 {
        return Ok(MetricField::flat(grid));
    }
    // ‖g − δ‖ is increasing in the scale; bisect for the target amplitude
    let size = |scale: f64| build(scale).map(|s| s.sup_norm());
    let (mut lo, mut hi) = (0.0, 1.0);
    while size(hi)? < amplitude {
        hi *= 2.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if size(mid)? < amplitude {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    MetricField::flat(grid).perturbed(&build(0.5 * (lo + hi))?)
}

/// C^∞ cutoff equal to 1 on `[0, 1/2]` and 0 on `[1, ∞)`.
pub fn smooth_cutoff(s: f64) -> f64 {
    let f = |x: f64| if x > 0.0 { (-1.0 / x).exp() } else { 0.0 };
    let u = 2.0 * (1.0 - s);
    f(u) / (f(u) + f(1.0 - u))
}

/// A pair agreeing to greater than second order at `x0`.
#[derive(Debug, Clone)]
pub struct SecondOrderPair {
    pub first: MetricField,
    pub second: MetricField,
    pub x0: [f64; 3],
    pub eta: f64,
    pub cutoff_radius: f64,
    /// `max |g′ − g″| / d^{2+η}` over the grid.
    pub constant: f64,
}

/// `g′ = g`, `g″ = g + ψ(d(x, x₀)) B` with `ψ(d) = d^{2+η} χ(d/R₀)` and `B` a
/// constant symmetric matrix drawn from `seed`, scaled so `‖g″ − g′‖_∞ = amplitude`.
/// `R₀` defaults to a quarter of the torus side.
pub fn second_order_pair(
    g: &MetricField,
    x0: &[f64],
    eta: f64,
    amplitude: f64,
    seed: u64,
    cutoff_radius: Option<f64>,
) -> Result<SecondOrderPair> {
    if !(eta > 0.0) {
        return Err(Error::InvalidArgument(format!("eta must be positive, got {eta}")));
    }
    let grid = *g.grid();
    let d = grid.dim();
    let r0 = cutoff_radius.unwrap_or(grid.length(0) / 4.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = [[0.0; 3]; 3];
    for i in 0..d {
        for j in i..d {
            let v: f64 = rng.gen_range(-1.0..1.0);
            b[i][j] = v;
            b[j][i] = v;
        }
    }
    let mut center = [0.0; 3];
    center[..d].copy_from_slice(&x0[..d]);
    let psi = |x: &[f64; 3]| {
        let r = grid.distance(&center, x);
        r.powf(2.0 + eta) * smooth_cutoff(r / r0)
    };
    let raw = SymTensorField::from_fn(&grid, |x| {
        let p = psi(x);
        let mut m = [[0.0; 3]; 3];
        for i in 0..d {
            for j in 0..d {
                m[i][j] = p * b[i][j];
            }
        }
        m
    });
    let s = raw.sup_norm();
    let diff = if s > 0.0 { raw.scaled(amplitude / s) } else { raw };
    let second = g.perturbed(&diff)?;
    let norms = diff.pointwise_norm();
    let mut constant: f64 = 0.0;
    for p in 0..grid.len() {
        let r = grid.distance(&center, &grid.coord(p));
        if r > 0.0 {
            constant = constant.max(norms[p] / r.powf(2.0 + eta));
        }
    }
    Ok(SecondOrderPair { first: g.clone(), second, x0: center, eta, cutoff_radius: r0, constant })
}

/// `δ + χ(r/R₀) r² G(ω)` around `x0`, with `ω` the unit direction and `G`
/// required to satisfy `ω^i ω^j G_ij(ω) = 0`.
pub fn homogeneous_germ<G>(grid: &TorusGrid, x0: &[f64], cutoff_radius: f64, profile: G) -> Result<MetricField>
where
    G: Fn(&[f64; 3]) -> [[f64; 3]; 3],
{
    let d = grid.dim();
    let mut center = [0.0; 3];
    center[..d].copy_from_slice(&x0[..d]);
    let mut s = SymTensorField::zeros(grid);
    for p in 0..grid.len() {
        let disp = grid.displacement(&center, &grid.coord(p));
        let r = disp[..d].iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut m = [[0.0; 3]; 3];
        if r > 0.0 {
            let mut w = [0.0; 3];
            for a in 0..d {
                w[a] = disp[a] / r;
            }
            let gw = profile(&w);
            let mut radial = 0.0;
            for i in 0..d {
                for j in 0..d {
                    radial += w[i] * w[j] * gw[i][j];
                }
            }
            if radial.abs() > 1e-10 {
                return Err(Error::RadialTangencyViolated { value: radial });
            }
            let scale = smooth_cutoff(r / cutoff_radius) * r * r;
            for i in 0..d {
                for j in 0..d {
                    m[i][j] = scale * 0.5 * (gw[i][j] + gw[j][i]);
                }
            }
        }
        for i in 0..d {
            m[i][i] += 1.0;
        }
        s.set(p, &m);
    }
    MetricField::new(s)
}

/// Fitted Hölder exponent of a field from its largest increments at dyadic
/// separations `2^j` grid spacings (`j = 0..levels`), along every axis.
/// Returns `(exponent, rms residual of the log-log fit)`.
pub fn hoelder_exponent(grid: &TorusGrid, f: &[f64], levels: u32) -> (f64, f64) {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for j in 0..levels {
        let step = 1isize << j;
        let mut osc: f64 = 0.0;
        for ax in 0..grid.dim() {
            for p in 0..grid.len() {
                osc = osc.max((f[grid.shifted(p, ax, step)] - f[p]).abs());
            }
        }
        xs.push((step as f64 * grid.spacing(0)).ln());
        ys.push(osc.ln());
    }
    let fit = crate::fit::linear_fit(&xs, &ys);
    (fit.slope, fit.residual)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_amplitude_is_flat() {
        let g = TorusGrid::new(2, 32).unwrap();
        let spec = RoughSpec { amplitude: 0.0, ..RoughSpec::default() };
        assert_eq!(generate(&g, &spec).unwrap().difference(&MetricField::flat(&g)).unwrap().max_abs_entry(), 0.0);
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let g = TorusGrid::new(2, 8).unwrap();
        assert!(matches!(
            hoelder_metric(&g, &RoughSpec::default()),
            Err(Error::ResolutionTooCoarse { points: 8, octaves: 2 })
        ));
    }

    #[test]
    fn hoelder_data_is_deterministic_normalized_and_positive() {
        let g = TorusGrid::new(2, 64).unwrap();
        let spec = RoughSpec { amplitude: 0.03, ..RoughSpec::default() };
        let a = hoelder_metric(&g, &spec).unwrap();
        let b = hoelder_metric(&g, &spec).unwrap();
        assert_eq!(a.sym().packed(), b.sym().packed());
        let h = a.difference(&MetricField::flat(&g)).unwrap();
        assert!((h.sup_norm() - 0.03).abs() < 1e-14);
        assert!(a.min_eigenvalue() >= 1.0 - 0.03 - 1e-12);
        let other = hoelder_metric(&g, &RoughSpec { seed: 2, ..spec }).unwrap();
        assert_ne!(a.sym().packed(), other.sym().packed());
    }

    #[test]
    fn low_modes_are_shared_across_resolutions() {
        let spec = RoughSpec::default();
        let coarse = TorusGrid::new(2, 32).unwrap();
        let fine = TorusGrid::new(2, 64).unwrap();
        let raw = |g: &TorusGrid| {
            random_field(g, spec.seed, 0, i64::MAX, |k| (k[0] * k[0] + k[1] * k[1]).sqrt().powf(-1.3))
        };
        let a = Spectrum::new(&coarse, &raw(&coarse));
        let b = Spectrum::new(&fine, &raw(&fine));
        // mode (1, 2): compare normalized coefficients
        let ia = coarse.flat_index(&[1, 2]);
        let ib = fine.flat_index(&[1, 2]);
        let ca = a.coeffs()[ia] / coarse.len() as f64;
        let cb = b.coeffs()[ib] / fine.len() as f64;
        assert!((ca - cb).norm() < 1e-12);
    }

    #[test]
    fn hoelder_exponent_fit() {
        let g = TorusGrid::new(2, 256).unwrap();
        for alpha in [0.3, 0.6] {
            let m = hoelder_metric(&g, &RoughSpec { alpha, amplitude: 0.03, ..RoughSpec::default() }).unwrap();
            let h = m.difference(&MetricField::flat(&g)).unwrap();
            let (fit, _) = hoelder_exponent(&g, h.get(0, 0), 5);
            assert!((fit - alpha).abs() <= 0.15, "alpha {alpha}: fitted {fit}");
        }
    }

    #[test]
    fn conformal_bump_hits_target_curvature() {
        let g = TorusGrid::new(2, 64).unwrap();
        let m = conformal_bump_with_min_curvature(&g, 4, -1.0).unwrap();
        let r = scalar_curvature(&m);
        let min = r.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!((min + 1.0).abs() < 1e-9);
        let size = m.difference(&MetricField::flat(&g)).unwrap().sup_norm();
        assert!(size < 0.05, "{size}");
        let c = conformal_bump(&g, 2, 0.02).unwrap();
        assert!((c.difference(&MetricField::flat(&g)).unwrap().sup_norm() - 0.02).abs() < 1e-12);
    }

    #[test]
    fn flat_pullback_is_flat_and_normalized() {
        let g = TorusGrid::new(2, 64).unwrap();
        let m = flat_pullback(&g, 0.03, 0.3, 9).unwrap();
        let size = m.difference(&MetricField::flat(&g)).unwrap().sup_norm();
        assert!((size - 0.03).abs() < 1e-9);
        let r = scalar_curvature(&m);
        let worst = r.iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(worst < 1e-2, "{worst}");
    }

    #[test]
    fn cutoff_is_smooth_partition() {
        assert_eq!(smooth_cutoff(0.0), 1.0);
        assert_eq!(smooth_cutoff(0.5), 1.0);
        assert_eq!(smooth_cutoff(1.0), 0.0);
        assert!((smooth_cutoff(0.75) - 0.5).abs() < 1e-15);
        let mut prev = 1.0;
        for i in 0..=100 {
            let v = smooth_cutoff(i as f64 / 100.0);
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn second_order_pair_agrees_at_marked_point() {
        let g = TorusGrid::new(2, 64).unwrap();
        let base = smooth_metric(&g, 0.01, 2, 4).unwrap();
        let x0 = g.coord(g.flat_index(&[20, 40]));
        let pair = second_order_pair(&base, &x0, 1.0, 0.02, 3, None).unwrap();
        let diff = pair.second.difference(&pair.first).unwrap();
        let p0 = g.flat_index(&[20, 40]);
        assert_eq!(diff.at(p0), [[0.0; 3]; 3]);
        assert!(pair.constant.is_finite() && pair.constant > 0.0);
        // first and second differences at x0 are O(spacing^{2+η}) relative to the spacing powers
        let h = g.spacing(0);
        let f = diff.get(0, 0);
        let first = (f[g.shifted(p0, 0, 1)] - f[g.shifted(p0, 0, -1)]) / (2.0 * h);
        let second = (f[g.shifted(p0, 0, 1)] - 2.0 * f[p0] + f[g.shifted(p0, 0, -1)]) / (h * h);
        assert!(first.abs() <= 2.0 * pair.constant * h.powf(2.0));
        assert!(second.abs() <= 4.0 * pair.constant * h.powf(1.0));
        let same = second_order_pair(&base, &x0, 1.0, 0.0, 3, None).unwrap();
        assert_eq!(same.second.sym().packed(), same.first.sym().packed());
    }

    #[test]
    fn germ_tangency_and_homogeneity() {
        let g = TorusGrid::new(2, 64).unwrap();
        let x0 = [PI, PI];
        let tangential = |w: &[f64; 3]| {
            // G = c (ω^⊥ ⊗ ω^⊥) is tangential
            let perp = [-w[1], w[0]];
            let mut m = [[0.0; 3]; 3];
            for i in 0..2 {
                for j in 0..2 {
                    m[i][j] = 0.05 * perp[i] * perp[j];
                }
            }
            m
        };
        let m = homogeneous_germ(&g, &x0, 2.0, tangential).unwrap();
        let flat = homogeneous_germ(&g, &x0, 2.0, |_| [[0.0; 3]; 3]).unwrap();
        assert_eq!(flat.difference(&MetricField::flat(&g)).unwrap().max_abs_entry(), 0.0);
        // within the cutoff plateau the perturbation at half the distance is a quarter
        let h = m.difference(&MetricField::flat(&g)).unwrap();
        let p = g.flat_index(&[32 + 8, 32 + 4]);
        let q = g.flat_index(&[32 + 4, 32 + 2]);
        for (i, j) in [(0, 0), (0, 1), (1, 1)] {
            assert!((h.get(i, j)[q] - 0.25 * h.get(i, j)[p]).abs() < 1e-15);
        }
        let radial = |w: &[f64; 3]| {
            let mut m = [[0.0; 3]; 3];
            m[0][0] = w[0] * w[0];
            m
        };
        assert!(matches!(homogeneous_germ(&g, &x0, 2.0, radial), Err(Error::RadialTangencyViolated { .. })));
    }
}
