//! Flat-torus heat kernels and heat-semigroup convolution.
//!
//! The periodic kernel is evaluated by whichever of its two exact series
//! converges faster: the Fourier series for large times and the Gaussian image
//! sum for small times. On `T^n` the kernel is the product of one-dimensional
//! kernels along the axes.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{SymTensorField, TensorField};
use crate::grid::TorusGrid;
use crate::spectral::Spectrum;

/// Times below `CROSSOVER * (L / 2π)^2` use the image sum.
pub const CROSSOVER: f64 = 0.3;

const MAX_TERMS: usize = 100_000;

/// Separation and time at which to evaluate the heat kernel.
///
/// The periodized kernel is not radial, so the separation is a displacement
/// vector; [`KernelQuery::radial`] places a scalar separation along the first axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelQuery {
    pub dim: usize,
    pub side_length: f64,
    pub displacement: [f64; 3],
    pub t: f64,
}

impl KernelQuery {
    pub fn new(dim: usize, side_length: f64, displacement: &[f64], t: f64) -> Self {
        let mut d = [0.0; 3];
        d[..dim].copy_from_slice(&displacement[..dim]);
        Self { dim, side_length, displacement: d, t }
    }

    pub fn radial(dim: usize, side_length: f64, d: f64, t: f64) -> Self {
        Self::new(dim, side_length, &[d, 0.0, 0.0], t)
    }

    pub fn separation(&self) -> f64 {
        self.displacement[..self.dim].iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// One-dimensional periodic kernel by its Fourier series
/// `(1/L) Σ_k e^{−k² t} cos(k d)`, `k = 2πm/L`.
pub fn fourier_series_1d(d: f64, t: f64, side: f64) -> f64 {
    let k0 = 2.0 * PI / side;
    let mut sum = 1.0;
    for m in 1..MAX_TERMS {
        let k = k0 * m as f64;
        let w = (-k * k * t).exp();
        if w < 1e-18 {
            break;
        }
        sum += 2.0 * w * (k * d).cos();
    }
    sum / side
}

/// One-dimensional periodic kernel by the image sum
/// `(4πt)^{−1/2} Σ_m exp(−(d + mL)² / 4t)`.
pub fn image_sum_1d(d: f64, t: f64, side: f64) -> f64 {
    let d = d.rem_euclid(side);
    let norm = (4.0 * PI * t).sqrt();
    let term = |m: i64| {
        let x = d + m as f64 * side;
        (-x * x / (4.0 * t)).exp()
    };
    let mut sum = term(0) + term(-1);
    for m in 1..MAX_TERMS as i64 {
        let a = term(m);
        let b = term(-1 - m);
        sum += a + b;
        if a + b < 1e-300 || (a + b) < 1e-18 * sum {
            break;
        }
    }
    sum / norm
}

/// One-dimensional kernel choosing the faster series.
pub fn kernel_1d(d: f64, t: f64, side: f64) -> f64 {
    let scale = side / (2.0 * PI);
    if t < CROSSOVER * scale * scale {
        image_sum_1d(d, t, side)
    } else {
        fourier_series_1d(d, t, side)
    }
}

/// Scalar heat kernel `Φ(x, t)` of the flat torus with equal sides.
pub fn kernel_value(q: &KernelQuery) -> Result<f64> {
    if !(q.t > 0.0) {
        return Err(Error::NonPositiveTime(q.t));
    }
    Ok((0..q.dim).map(|a| kernel_1d(q.displacement[a], q.t, q.side_length)).product())
}

/// Kernel evaluated by one named series on every axis.
pub fn kernel_by_series(q: &KernelQuery, fourier: bool) -> Result<f64> {
    if !(q.t > 0.0) {
        return Err(Error::NonPositiveTime(q.t));
    }
    let f = if fourier { fourier_series_1d } else { image_sum_1d };
    Ok((0..q.dim).map(|a| f(q.displacement[a], q.t, q.side_length)).product())
}

/// Fourier multiplier `exp(−b^{pq} k_p k_q t)` of the heat semigroup of a
/// constant metric with inverse `b` (the identity for the flat metric).
pub fn heat_symbol(inverse_metric: &[[f64; 3]; 3], dim: usize, k: &[f64; 3], t: f64) -> f64 {
    let mut q = 0.0;
    for p in 0..dim {
        for r in 0..dim {
            q += inverse_metric[p][r] * k[p] * k[r];
        }
    }
    (-q * t).exp()
}

pub(crate) const IDENTITY: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

/// Heat semigroup applied to a scalar array: each Fourier mode is multiplied by `e^{−|k|² t}`.
pub fn heat_convolve_scalar(grid: &TorusGrid, f: &[f64], t: f64) -> Vec<f64> {
    if t == 0.0 {
        return f.to_vec();
    }
    let d = grid.dim();
    Spectrum::new(grid, f)
        .multiplied(|k| Complex64::new(heat_symbol(&IDENTITY, d, k, t), 0.0))
        .to_physical()
}

/// Componentwise heat semigroup on a tensor field (flat background, so the
/// curvature term of the tensor Laplacian vanishes).
pub fn heat_convolve(f: &TensorField, t: f64) -> TensorField {
    let mut out = f.clone();
    for c in out.components_mut() {
        *c = heat_convolve_scalar(f.grid(), c, t);
    }
    out
}

/// Componentwise heat semigroup on a symmetric 2-tensor field.
pub fn heat_convolve_sym(f: &SymTensorField, t: f64) -> SymTensorField {
    let mut out = f.clone();
    for c in out.packed_mut() {
        *c = heat_convolve_scalar(f.grid(), c, t);
    }
    out
}

/// One sampled comparison between the kernel and its fitted Gaussian bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundSample {
    pub d: f64,
    pub t: f64,
    pub kernel: f64,
    pub bound: f64,
    pub slack: f64,
}

/// Fitted constants for `Φ ≤ C t^{−n/2} exp(−d²/(Dt))` and the tail bound
/// `∫_{M∖B(x,r)} Φ ≤ C′ exp(−r²/(2Dt))`.
#[derive(Debug, Clone)]
pub struct GaussianBoundReport {
    pub dim: usize,
    pub t_range: (f64, f64),
    pub c: f64,
    pub d: f64,
    pub c_tail: f64,
    pub worst_slack: f64,
    pub samples: Vec<BoundSample>,
}

impl GaussianBoundReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["d", "t", "kernel", "bound", "slack"])?;
        for s in &self.samples {
            wr.write_record([s.d, s.t, s.kernel, s.bound, s.slack].map(|v| format!("{v:.12e}")))?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> String {
        format!(
            "dim = {}\nt_min = {:.6e}\nt_max = {:.6e}\nC = {:.6e}\nD = {:.6e}\nC_tail = {:.6e}\nworst_slack = {:.6e}\n",
            self.dim, self.t_range.0, self.t_range.1, self.c, self.d, self.c_tail, self.worst_slack
        )
    }
}

/// Log-spaced times in `[lo, hi]`.
pub fn log_times(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![hi];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect()
}

/// Tail mass `∫_{M∖B(0,r)} Φ(·, t)` by grid quadrature.
pub fn tail_integral(grid: &TorusGrid, r: f64, t: f64) -> Result<f64> {
    if r >= grid.diameter() {
        return Ok(0.0);
    }
    let origin = [0.0; 3];
    let mut sum = 0.0;
    for p in 0..grid.len() {
        let x = grid.coord(p);
        let disp = grid.displacement(&origin, &x);
        let d = disp[..grid.dim()].iter().map(|v| v * v).sum::<f64>().sqrt();
        if d >= r {
            sum += kernel_value(&KernelQuery::new(grid.dim(), grid.length(0), &disp, t))?;
        }
    }
    Ok(sum * grid.cell_volume())
}

/// Fits the Gaussian upper bound of the flat kernel over sampled separations
/// (all grid displacements) and `times` log-spaced in `t_range`.
///
/// `C` is pinned to `2^n sup_t Φ(0,t) t^{n/2}` and `D` is then the smallest
/// constant making the bound hold at every sample.
pub fn gaussian_bound_report(grid: &TorusGrid, t_range: (f64, f64), times: usize) -> Result<GaussianBoundReport> {
    let (lo, hi) = t_range;
    if !(lo > 0.0) {
        return Err(Error::NonPositiveTime(lo));
    }
    if hi > 1.0 || hi < lo {
        return Err(Error::InvalidArgument(format!("t-range ({lo}, {hi}) must lie within (0, 1]")));
    }
    let n = grid.dim();
    let side = grid.length(0);
    let ts = log_times(lo, hi, times);
    let half = n as f64 / 2.0;
    let mut peak: f64 = 0.0;
    for &t in &ts {
        peak = peak.max(kernel_value(&KernelQuery::radial(n, side, 0.0, t))? * t.powf(half));
    }
    let c = 2f64.powi(n as i32) * peak;
    let origin = [0.0; 3];
    let disps: Vec<[f64; 3]> = (0..grid.len()).map(|p| grid.displacement(&origin, &grid.coord(p))).collect();
    let mut raw = Vec::with_capacity(ts.len() * disps.len());
    let mut dfit: f64 = 0.0;
    for &t in &ts {
        for disp in &disps {
            let q = KernelQuery::new(n, side, disp, t);
            let phi = kernel_value(&q)?;
            let d = q.separation();
            let ratio = (c * t.powf(-half) / phi).ln();
            if d > 0.0 {
                dfit = dfit.max(d * d / (t * ratio));
            }
            raw.push((d, t, phi));
        }
    }
    let mut worst = f64::INFINITY;
    let samples: Vec<BoundSample> = raw
        .into_iter()
        .map(|(d, t, kernel)| {
            let bound = c * t.powf(-half) * (-d * d / (dfit * t)).exp();
            let slack = bound - kernel;
            worst = worst.min(slack);
            BoundSample { d, t, kernel, bound, slack }
        })
        .collect();
    let mut c_tail: f64 = 0.0;
    let radii: Vec<f64> = (1..=8).map(|i| grid.diameter() * i as f64 / 8.0).collect();
    for &t in &ts {
        for &r in &radii {
            let tail = tail_integral(grid, r, t)?;
            if tail > 0.0 {
                c_tail = c_tail.max(tail * (r * r / (2.0 * dfit * t)).exp());
            }
        }
    }
    Ok(GaussianBoundReport { dim: n, t_range, c, d: dfit, c_tail, worst_slack: worst, samples })
}

/// One line of [`kernel_check`].
#[derive(Debug, Clone)]
pub struct KernelCheckItem {
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
}

impl KernelCheckItem {
    pub fn passed(&self) -> bool {
        self.value <= self.tolerance
    }
}

/// Self-test of the kernel on the unit circle `T¹ = R/2πZ` and `T²`: agreement
/// of the two series, the value `Φ(0, 1/4) = 1/√π`, the semigroup law by
/// periodic quadrature and mass conservation.
pub fn kernel_check() -> Result<Vec<KernelCheckItem>> {
    let side = 2.0 * PI;
    let mut duality: f64 = 0.0;
    for &t in &[0.05, 0.1, 0.3, 0.5, 1.0, 2.0] {
        for i in 0..16 {
            let d = side * i as f64 / 16.0;
            duality = duality.max((fourier_series_1d(d, t, side) - image_sum_1d(d, t, side)).abs());
        }
    }
    let reference = (kernel_value(&KernelQuery::radial(1, side, 0.0, 0.25))? - 1.0 / PI.sqrt()).abs();
    let n = 512;
    let h = side / n as f64;
    let mut semigroup: f64 = 0.0;
    let mut mass: f64 = 0.0;
    for &(t, s) in &[(0.1, 0.2), (0.3, 0.05), (0.5, 0.5)] {
        for &x in &[0.0, 0.7, 2.0, PI] {
            let conv: f64 = (0..n).map(|j| {
                let y = j as f64 * h;
                kernel_1d(x - y, t, side) * kernel_1d(y, s, side)
            }).sum::<f64>() * h;
            semigroup = semigroup.max((conv - kernel_1d(x, t + s, side)).abs());
        }
        let m: f64 = (0..n).map(|j| kernel_1d(j as f64 * h, t, side)).sum::<f64>() * h;
        mass = mass.max((m - 1.0).abs());
    }
    Ok(vec![
        KernelCheckItem { name: "series_duality", value: duality, tolerance: 1e-10 },
        KernelCheckItem { name: "phi_0_quarter", value: reference, tolerance: 1e-7 },
        KernelCheckItem { name: "semigroup", value: semigroup, tolerance: 1e-12 },
        KernelCheckItem { name: "unit_mass", value: mass, tolerance: 1e-12 },
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_check_passes() {
        for item in kernel_check().unwrap() {
            assert!(item.passed(), "{} = {:e}", item.name, item.value);
        }
    }
    use crate::field::Slot;
    use proptest::prelude::*;

    const TAU: f64 = 2.0 * PI;

    #[test]
    fn unit_circle_value_at_quarter_time() {
        let q = KernelQuery::radial(1, TAU, 0.0, 0.25);
        let v = kernel_value(&q).unwrap();
        assert!((v - 0.5641896).abs() <= 1e-6);
        let f = kernel_by_series(&q, true).unwrap();
        let g = kernel_by_series(&q, false).unwrap();
        assert!((f - g).abs() <= 1e-12);
        assert!((g - PI.powf(-0.5)).abs() <= 1e-15);
    }

    #[test]
    fn long_time_limit_is_inverse_volume() {
        let v = kernel_value(&KernelQuery::radial(1, TAU, 1.0, 20.0)).unwrap();
        assert!((v - 1.0 / TAU).abs() <= 1e-9);
    }

    #[test]
    fn nonpositive_time_is_rejected() {
        assert!(matches!(kernel_value(&KernelQuery::radial(2, TAU, 0.0, 0.0)), Err(Error::NonPositiveTime(_))));
    }

    #[test]
    fn parabolic_scaling() {
        for &lambda in &[0.25, 2.0, 9.0] {
            for &(d, t) in &[(0.3, 0.05), (1.0, 0.4), (2.5, 1.5)] {
                for n in 1..=3 {
                    let s = f64::sqrt(lambda);
                    let a = kernel_value(&KernelQuery::radial(n, s * TAU, s * d, lambda * t)).unwrap();
                    let b = kernel_value(&KernelQuery::radial(n, TAU, d, t)).unwrap();
                    let expect = lambda.powf(-(n as f64) / 2.0) * b;
                    assert!((a - expect).abs() <= 1e-10 * expect.max(1.0), "{a} vs {expect}");
                }
            }
        }
    }

    #[test]
    fn eigenfunction_decay() {
        let g = TorusGrid::new(2, 32).unwrap();
        let e = [[0.3, -0.2, 0.0], [-0.2, 1.1, 0.0], [0.0; 3]];
        let f = SymTensorField::from_fn(&g, |x| {
            let c = (3.0 * x[0]).cos();
            let mut m = [[0.0; 3]; 3];
            for i in 0..2 {
                for j in 0..2 {
                    m[i][j] = e[i][j] * c;
                }
            }
            m
        });
        let t = 0.07;
        let out = heat_convolve_sym(&f, t);
        let expect = f.scaled((-9.0 * t).exp());
        assert!(out.sub(&expect).unwrap().max_abs_entry() <= 1e-14);
        assert_eq!(heat_convolve_sym(&f, 0.0).packed(), f.packed());
    }

    #[test]
    fn spike_spectrum_reproduces_kernel() {
        // all-ones spectrum ↔ N·δ at the origin; its heat flow sampled at 0 is the periodic kernel
        let g = TorusGrid::new(1, 64).unwrap();
        let mut spike = vec![0.0; g.len()];
        spike[0] = 1.0 / g.cell_volume();
        let u = heat_convolve_scalar(&g, &spike, 0.25);
        assert!((u[0] - 0.5641896).abs() <= 1e-6);
    }

    #[test]
    fn gaussian_fit_on_flat_two_torus() {
        let g = TorusGrid::new(2, 32).unwrap();
        let rep = gaussian_bound_report(&g, (1e-3, 1.0), 10).unwrap();
        assert!(rep.d <= 4.5, "D = {}", rep.d);
        assert!(rep.worst_slack >= -1e-12);
        let inner = gaussian_bound_report(&g, (1e-3, 0.1), 7).unwrap();
        assert!(inner.c <= rep.c);
        assert_eq!(tail_integral(&g, g.diameter(), 0.1).unwrap(), 0.0);
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("d,t,kernel,bound,slack"));
    }

    proptest! {
        #[test]
        fn series_agree_and_stay_positive(ld in -1.5f64..0.5, lt in -2.0f64..0.3, n in 1usize..3) {
            let d = 10f64.powf(ld).min(PI);
            let t = 10f64.powf(lt);
            let q = KernelQuery::new(n, TAU, &[d, 0.5 * d, 0.0], t);
            let a = kernel_by_series(&q, true).unwrap();
            let b = kernel_by_series(&q, false).unwrap();
            prop_assert!((a - b).abs() <= 1e-10 * a.max(1.0));
            prop_assert!(kernel_value(&q).unwrap() > 0.0);
        }

        #[test]
        fn semigroup_and_mass(s in 0.0f64..0.5, t in 0.0f64..0.5, seed in 0u64..1000) {
            let g = TorusGrid::new(2, 16).unwrap();
            let f: Vec<f64> = (0..g.len()).map(|p| ((p as u64 * 2654435761 + seed) % 1000) as f64 / 1000.0).collect();
            let tf = TensorField::from_components(&g, &[Slot::Co], vec![f.clone(), f.iter().map(|v| v * v).collect()]).unwrap();
            let a = heat_convolve(&heat_convolve(&tf, s), t);
            let b = heat_convolve(&tf, s + t);
            prop_assert!(a.sub(&b).unwrap().sup_norm() <= 1e-12);
            for (x, y) in a.components().iter().zip(tf.components()) {
                let mx: f64 = x.iter().sum::<f64>() / x.len() as f64;
                let my: f64 = y.iter().sum::<f64>() / y.len() as f64;
                prop_assert!((mx - my).abs() <= 1e-12);
            }
        }
    }
}
