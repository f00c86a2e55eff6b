//! Fourier transforms, multipliers and trigonometric interpolation on [`TorusGrid`]s.
//!
//! Forward transforms are unnormalized; [`inverse`] divides by the number of
//! grid points. Odd-order derivatives zero the Nyquist mode so that real
//! fields stay real.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::TorusGrid;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if forward {
            p.plan_fft_forward(n)
        } else {
            p.plan_fft_inverse(n)
        }
    })
}

fn transform_axes(grid: &TorusGrid, data: &mut [Complex64], forward: bool) {
    let n = grid.n();
    let fft = plan(n, forward);
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let total = grid.len();
    for axis in 0..grid.dim() {
        let stride = grid.stride(axis);
        if stride == 1 {
            fft.process_with_scratch(data, &mut scratch);
            continue;
        }
        let outer = total / (n * stride);
        let mut lines = vec![Complex64::new(0.0, 0.0); total];
        let mut l = 0;
        for o in 0..outer {
            for i in 0..stride {
                let base = o * n * stride + i;
                for k in 0..n {
                    lines[l * n + k] = data[base + k * stride];
                }
                l += 1;
            }
        }
        fft.process_with_scratch(&mut lines, &mut scratch);
        let mut l = 0;
        for o in 0..outer {
            for i in 0..stride {
                let base = o * n * stride + i;
                for k in 0..n {
                    data[base + k * stride] = lines[l * n + k];
                }
                l += 1;
            }
        }
    }
}

/// Unnormalized forward DFT of a real field.
pub fn forward(grid: &TorusGrid, data: &[f64]) -> Vec<Complex64> {
    debug_assert_eq!(data.len(), grid.len());
    let mut buf: Vec<Complex64> = data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform_axes(grid, &mut buf, true);
    buf
}

/// Inverse DFT, returning the real part.
pub fn inverse(grid: &TorusGrid, mut spec: Vec<Complex64>) -> Vec<f64> {
    transform_axes(grid, &mut spec, false);
    let scale = 1.0 / grid.len() as f64;
    spec.into_iter().map(|c| c.re * scale).collect()
}

/// Storage index of the mode along each axis for spectral index `idx`.
#[inline]
fn modes(grid: &TorusGrid, idx: usize) -> [usize; 3] {
    grid.multi_index(idx)
}

/// Multiplier for `∂_axis^order`, with the Nyquist mode removed for odd orders.
fn derivative_symbol(grid: &TorusGrid, axis: usize, m: usize, order: u32) -> Complex64 {
    let k = grid.wavenumber(axis, m);
    match order {
        0 => Complex64::new(1.0, 0.0),
        1 if grid.is_nyquist(m) => Complex64::new(0.0, 0.0),
        1 => Complex64::new(0.0, k),
        2 => Complex64::new(-k * k, 0.0),
        _ => {
            if order % 2 == 1 && grid.is_nyquist(m) {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, k).powu(order)
            }
        }
    }
}

/// The Fourier coefficients of a real field, kept around to take many derivatives cheaply.
#[derive(Debug, Clone)]
pub struct Spectrum {
    grid: TorusGrid,
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn new(grid: &TorusGrid, data: &[f64]) -> Self {
        Self { grid: *grid, coeffs: forward(grid, data) }
    }

    pub fn from_coeffs(grid: &TorusGrid, coeffs: Vec<Complex64>) -> Self {
        Self { grid: *grid, coeffs }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// Partial derivative of order `order` along `axis`.
    pub fn derivative(&self, axis: usize, order: u32) -> Vec<f64> {
        let g = &self.grid;
        let spec = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| c * derivative_symbol(g, axis, modes(g, i)[axis], order))
            .collect();
        inverse(g, spec)
    }

    /// Mixed second derivative `∂_a ∂_b`.
    pub fn second(&self, a: usize, b: usize) -> Vec<f64> {
        if a == b {
            return self.derivative(a, 2);
        }
        let g = &self.grid;
        let spec = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let m = modes(g, i);
                c * derivative_symbol(g, a, m[a], 1) * derivative_symbol(g, b, m[b], 1)
            })
            .collect();
        inverse(g, spec)
    }

    /// Applies an arbitrary Fourier multiplier given as a function of the wavevector.
    pub fn multiplied<F>(&self, symbol: F) -> Spectrum
    where
        F: Fn(&[f64; 3]) -> Complex64,
    {
        let g = &self.grid;
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| c * symbol(&wavevector(g, i)))
            .collect();
        Spectrum { grid: *g, coeffs }
    }

    pub fn to_physical(&self) -> Vec<f64> {
        inverse(&self.grid, self.coeffs.clone())
    }

    /// Mean value of the field (the zero mode).
    pub fn mean(&self) -> f64 {
        self.coeffs[0].re / self.grid.len() as f64
    }
}

/// Angular wavevector of spectral index `idx`.
pub fn wavevector(grid: &TorusGrid, idx: usize) -> [f64; 3] {
    let m = modes(grid, idx);
    let mut k = [0.0; 3];
    for a in 0..grid.dim() {
        k[a] = grid.wavenumber(a, m[a]);
    }
    k
}

/// Spectral partial derivative `∂_axis^order f`.
pub fn derivative(grid: &TorusGrid, f: &[f64], axis: usize, order: u32) -> Vec<f64> {
    Spectrum::new(grid, f).derivative(axis, order)
}

/// True when spectral index `idx` survives the 2/3 truncation rule.
pub fn within_two_thirds(grid: &TorusGrid, idx: usize) -> bool {
    let cutoff = grid.n() as i64 / 3;
    let m = modes(grid, idx);
    (0..grid.dim()).all(|a| grid.signed_mode(m[a]).abs() <= cutoff)
}

/// Zeroes every mode outside the 2/3 box in place.
pub fn dealias_coeffs(grid: &TorusGrid, coeffs: &mut [Complex64]) {
    for (i, c) in coeffs.iter_mut().enumerate() {
        if !within_two_thirds(grid, i) {
            *c = Complex64::new(0.0, 0.0);
        }
    }
}

/// 2/3-rule truncation of a physical field.
pub fn dealias(grid: &TorusGrid, f: &[f64]) -> Vec<f64> {
    let mut c = forward(grid, f);
    dealias_coeffs(grid, &mut c);
    inverse(grid, c)
}

/// Evaluates the trigonometric interpolant of grid data at arbitrary points.
///
/// The Nyquist mode is treated as a cosine so the interpolant is real and
/// reproduces the grid values exactly.
#[derive(Debug, Clone)]
pub struct TrigInterpolator {
    grid: TorusGrid,
    coeffs: Vec<Complex64>,
}

impl TrigInterpolator {
    pub fn new(grid: &TorusGrid, data: &[f64]) -> Self {
        let scale = 1.0 / grid.len() as f64;
        let coeffs = forward(grid, data).into_iter().map(|c| c * scale).collect();
        Self { grid: *grid, coeffs }
    }

    pub fn from_spectrum(spec: &Spectrum) -> Self {
        let scale = 1.0 / spec.grid.len() as f64;
        Self { grid: spec.grid, coeffs: spec.coeffs.iter().map(|c| c * scale).collect() }
    }

    fn axis_weights(&self, axis: usize, x: f64) -> Vec<Complex64> {
        let g = &self.grid;
        (0..g.n())
            .map(|m| {
                let k = g.wavenumber(axis, m);
                if g.is_nyquist(m) {
                    Complex64::new((k * x).cos(), 0.0)
                } else {
                    Complex64::new(0.0, k * x).exp()
                }
            })
            .collect()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let g = &self.grid;
        let n = g.n();
        match g.dim() {
            1 => {
                let w = self.axis_weights(0, x[0]);
                self.coeffs.iter().zip(&w).map(|(c, w)| (c * w).re).sum()
            }
            2 => {
                let w0 = self.axis_weights(0, x[0]);
                let w1 = self.axis_weights(1, x[1]);
                let mut acc = Complex64::new(0.0, 0.0);
                for (m0, w0m) in w0.iter().enumerate() {
                    let row = &self.coeffs[m0 * n..(m0 + 1) * n];
                    let inner: Complex64 = row.iter().zip(&w1).map(|(c, w)| c * w).sum();
                    acc += inner * w0m;
                }
                acc.re
            }
            _ => {
                let w0 = self.axis_weights(0, x[0]);
                let w1 = self.axis_weights(1, x[1]);
                let w2 = self.axis_weights(2, x[2]);
                let mut acc = Complex64::new(0.0, 0.0);
                for (m0, w0m) in w0.iter().enumerate() {
                    let mut plane = Complex64::new(0.0, 0.0);
                    for (m1, w1m) in w1.iter().enumerate() {
                        let base = (m0 * n + m1) * n;
                        let row = &self.coeffs[base..base + n];
                        let inner: Complex64 = row.iter().zip(&w2).map(|(c, w)| c * w).sum();
                        plane += inner * w1m;
                    }
                    acc += plane * w0m;
                }
                acc.re
            }
        }
    }
}

/// Values of the trigonometric interpolant of `data` on a grid refined by `factor`.
///
/// The Nyquist coefficient is split evenly between `±n/2` so the refined field
/// stays real and agrees with [`TrigInterpolator`].
pub fn upsample(grid: &TorusGrid, data: &[f64], factor: usize) -> (TorusGrid, Vec<f64>) {
    let fine = grid.with_resolution(grid.n() * factor).expect("refined grid is valid");
    let coarse = forward(grid, data);
    let n = grid.n();
    let nf = fine.n();
    let d = grid.dim();
    let mut out = vec![Complex64::new(0.0, 0.0); fine.len()];
    for (idx, c) in coarse.iter().enumerate() {
        let m = grid.multi_index(idx);
        // each Nyquist axis splits into two targets
        let mut targets: Vec<([usize; 3], f64)> = vec![([0; 3], 1.0)];
        for a in 0..d {
            let s = grid.signed_mode(m[a]);
            let mut next = Vec::with_capacity(targets.len() * 2);
            for (t, w) in targets {
                if grid.is_nyquist(m[a]) {
                    let mut lo = t;
                    lo[a] = nf - n / 2;
                    let mut hi = t;
                    hi[a] = n / 2;
                    next.push((lo, w * 0.5));
                    next.push((hi, w * 0.5));
                } else {
                    let mut u = t;
                    u[a] = s.rem_euclid(nf as i64) as usize;
                    next.push((u, w));
                }
            }
            targets = next;
        }
        for (t, w) in targets {
            out[fine.flat_index(&t)] += c * w;
        }
    }
    let scale = (fine.len() / grid.len()) as f64;
    let vals = inverse(&fine, out).into_iter().map(|v| v * scale).collect();
    (fine, vals)
}

/// Local Lagrange interpolation of periodic grid data with `2·half` nodes per axis.
#[derive(Debug, Clone)]
pub struct LocalInterpolator {
    grid: TorusGrid,
    data: Vec<f64>,
    half: usize,
}

impl LocalInterpolator {
    pub fn new(grid: &TorusGrid, data: Vec<f64>, half: usize) -> Self {
        Self { grid: *grid, data, half: half.max(1) }
    }

    /// Refines `data` spectrally by `factor`, then interpolates locally.
    pub fn oversampled(grid: &TorusGrid, data: &[f64], factor: usize, half: usize) -> Self {
        let (fine, vals) = upsample(grid, data, factor);
        Self::new(&fine, vals, half)
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// A linear combination `Σ wᵢ fᵢ` of interpolators on the same grid.
    pub fn combine(parts: &[(&LocalInterpolator, f64)]) -> Self {
        let first = parts[0].0;
        let mut data = vec![0.0; first.data.len()];
        for (p, w) in parts {
            for (d, v) in data.iter_mut().zip(&p.data) {
                *d += w * v;
            }
        }
        Self { grid: first.grid, data, half: first.half }
    }

    fn axis_weights(&self, axis: usize, x: f64) -> (isize, [f64; 16]) {
        let h = self.grid.spacing(axis);
        let s = x / h;
        let base = s.floor();
        let frac = s - base;
        let k = 2 * self.half;
        let start = base as isize - self.half as isize + 1;
        let mut w = [0.0; 16];
        for j in 0..k {
            let xj = j as f64 - (self.half as f64 - 1.0);
            let mut v = 1.0;
            for m in 0..k {
                if m != j {
                    let xm = m as f64 - (self.half as f64 - 1.0);
                    v *= (frac - xm) / (xj - xm);
                }
            }
            w[j] = v;
        }
        (start, w)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let g = &self.grid;
        let n = g.n() as isize;
        let k = 2 * self.half;
        let d = g.dim();
        let mut starts = [0isize; 3];
        let mut ws = [[0.0; 16]; 3];
        for a in 0..d {
            let (s, w) = self.axis_weights(a, x[a]);
            starts[a] = s;
            ws[a] = w;
        }
        let wrap = |i: isize| i.rem_euclid(n) as usize;
        let nn = g.n();
        match d {
            1 => (0..k).map(|j| ws[0][j] * self.data[wrap(starts[0] + j as isize)]).sum(),
            2 => {
                let mut acc = 0.0;
                for i in 0..k {
                    let row = wrap(starts[0] + i as isize) * nn;
                    let mut inner = 0.0;
                    for j in 0..k {
                        inner += ws[1][j] * self.data[row + wrap(starts[1] + j as isize)];
                    }
                    acc += ws[0][i] * inner;
                }
                acc
            }
            _ => {
                let mut acc = 0.0;
                for i in 0..k {
                    let r0 = wrap(starts[0] + i as isize) * nn;
                    let mut plane = 0.0;
                    for j in 0..k {
                        let r1 = (r0 + wrap(starts[1] + j as isize)) * nn;
                        let mut inner = 0.0;
                        for l in 0..k {
                            inner += ws[2][l] * self.data[r1 + wrap(starts[2] + l as isize)];
                        }
                        plane += ws[1][j] * inner;
                    }
                    acc += ws[0][i] * plane;
                }
                acc
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn derivative_of_single_mode() {
        let g = TorusGrid::new(1, 64).unwrap();
        let f: Vec<f64> = (0..64).map(|i| (3.0 * g.coord(i)[0]).cos()).collect();
        let df = derivative(&g, &f, 0, 1);
        for i in 0..64 {
            let x = g.coord(i)[0];
            assert!((df[i] + 3.0 * (3.0 * x).sin()).abs() <= 1e-12);
        }
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        let g = TorusGrid::new(2, 16).unwrap();
        let f = vec![2.5; g.len()];
        for axis in 0..2 {
            for order in 1..=2 {
                assert!(derivative(&g, &f, axis, order).iter().all(|v| v.abs() < 1e-13));
            }
        }
    }

    #[test]
    fn second_derivative_matches_central_difference() {
        // oracle: central difference of exp(sin x) at x = 0 with step 1e-4
        let g = TorusGrid::new(1, 64).unwrap();
        let f: Vec<f64> = (0..64).map(|i| g.coord(i)[0].sin().exp()).collect();
        let d2 = derivative(&g, &f, 0, 2);
        let s = 1e-4;
        let fd = ((s as f64).sin().exp() - 2.0 + (-s as f64).sin().exp()) / (s * s);
        assert!((d2[0] - fd).abs() <= 1e-6, "{} vs {}", d2[0], fd);
    }

    #[test]
    fn mixed_derivative_in_two_dimensions() {
        let g = TorusGrid::new(2, 32).unwrap();
        let f: Vec<f64> = (0..g.len())
            .map(|i| {
                let x = g.coord(i);
                (2.0 * x[0]).sin() * (x[1]).cos()
            })
            .collect();
        let s = Spectrum::new(&g, &f);
        let fxy = s.second(0, 1);
        for i in 0..g.len() {
            let x = g.coord(i);
            let exact = -2.0 * (2.0 * x[0]).cos() * x[1].sin();
            assert!((fxy[i] - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolant_reproduces_band_limited_function() {
        let g = TorusGrid::new(2, 16).unwrap();
        let f = |x: f64, y: f64| (x + 2.0 * y).sin() + 0.3 * (3.0 * x).cos() + 0.1 * (8.0 * y).cos();
        let data: Vec<f64> = (0..g.len()).map(|i| { let c = g.coord(i); f(c[0], c[1]) }).collect();
        let interp = TrigInterpolator::new(&g, &data);
        assert!((interp.eval(&g.coord(37)) - data[37]).abs() < 1e-12);
        for &(x, y) in &[(0.123, 4.56), (PI, 0.7), (5.9, 6.1)] {
            let exact = f(x, y);
            let approx = interp.eval(&[x, y]);
            assert!((approx - exact).abs() < 1e-12, "{approx} vs {exact}");
        }
    }

    #[test]
    fn dealias_keeps_low_modes() {
        let g = TorusGrid::new(1, 32).unwrap();
        let low: Vec<f64> = (0..32).map(|i| (4.0 * g.coord(i)[0]).sin()).collect();
        let high: Vec<f64> = (0..32).map(|i| (12.0 * g.coord(i)[0]).cos()).collect();
        let sum: Vec<f64> = low.iter().zip(&high).map(|(a, b)| a + b).collect();
        let d = dealias(&g, &sum);
        for i in 0..32 {
            assert!((d[i] - low[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn upsample_matches_trig_interpolant() {
        let g = TorusGrid::new(2, 16).unwrap();
        let data: Vec<f64> = (0..g.len()).map(|i| { let c = g.coord(i); (c[0] + 3.0 * c[1]).sin() + 0.2 * (8.0 * c[0]).cos() }).collect();
        let (fine, vals) = upsample(&g, &data, 4);
        let interp = TrigInterpolator::new(&g, &data);
        for idx in [0, 5, 77, 1000, fine.len() - 1] {
            assert!((vals[idx] - interp.eval(&fine.coord(idx))).abs() < 1e-12);
        }
    }

    #[test]
    fn local_interpolation_is_accurate_when_oversampled() {
        let g = TorusGrid::new(2, 32).unwrap();
        let f = |x: f64, y: f64| (x.sin() + 0.5 * (2.0 * y).cos()).exp();
        let data: Vec<f64> = (0..g.len()).map(|i| { let c = g.coord(i); f(c[0], c[1]) }).collect();
        let li = LocalInterpolator::oversampled(&g, &data, 4, 4);
        for &(x, y) in &[(0.123, 4.56), (PI, 0.7), (6.2, 6.27)] {
            assert!((li.eval(&[x, y]) - f(x, y)).abs() < 1e-9);
        }
        let c = LocalInterpolator::combine(&[(&li, 2.0), (&li, -1.0)]);
        assert!((c.eval(&[1.0, 2.0]) - li.eval(&[1.0, 2.0])).abs() < 1e-14);
    }
}
