//! Uniform periodic grids on flat tori.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A uniform grid on the flat torus `R^dim / (L_0 Z x ... )`.
///
/// Points are stored row-major with the last axis contiguous. Coordinates
/// of index `i` along axis `a` are `i * L_a / n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusGrid {
    dim: usize,
    n: usize,
    lengths: [f64; 3],
}

impl TorusGrid {
    /// Grid with side length `2π` along every axis.
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        Self::with_lengths(dim, n, &[2.0 * PI; 3][..dim.min(3)])
    }

    pub fn with_lengths(dim: usize, n: usize, lengths: &[f64]) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..=3")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be a power of two >= 8, got {n}"
            )));
        }
        if lengths.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "expected {dim} side lengths, got {}",
                lengths.len()
            )));
        }
        let mut l = [0.0; 3];
        for (a, &len) in lengths.iter().enumerate() {
            if !(len.is_finite() && len > 0.0) {
                return Err(Error::InvalidGrid(format!("side length {len} is not positive")));
            }
            l[a] = len;
        }
        Ok(Self { dim, n, lengths: l })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Points per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Total number of grid points.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn length(&self, axis: usize) -> f64 {
        self.lengths[axis]
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths[..self.dim]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.lengths[axis] / self.n as f64
    }

    /// Smallest spacing over all axes.
    pub fn min_spacing(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).fold(f64::INFINITY, f64::min)
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).product()
    }

    pub fn volume(&self) -> f64 {
        self.lengths().iter().product()
    }

    /// Largest flat distance between two points of the torus.
    pub fn diameter(&self) -> f64 {
        self.lengths().iter().map(|l| 0.25 * l * l).sum::<f64>().sqrt()
    }

    /// Stride of `axis` in the flat storage.
    pub fn stride(&self, axis: usize) -> usize {
        self.n.pow((self.dim - 1 - axis) as u32)
    }

    pub fn multi_index(&self, mut idx: usize) -> [usize; 3] {
        let mut out = [0; 3];
        for a in (0..self.dim).rev() {
            out[a] = idx % self.n;
            idx /= self.n;
        }
        out
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi[..self.dim].iter().fold(0, |acc, &i| acc * self.n + (i % self.n))
    }

    /// Index of the point `offset` cells away from `idx` along `axis`, wrapping around.
    pub fn shifted(&self, idx: usize, axis: usize, offset: isize) -> usize {
        let mut m = self.multi_index(idx);
        let n = self.n as isize;
        m[axis] = (((m[axis] as isize + offset) % n + n) % n) as usize;
        self.flat_index(&m)
    }

    pub fn coord(&self, idx: usize) -> [f64; 3] {
        let m = self.multi_index(idx);
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = m[a] as f64 * self.spacing(a);
        }
        x
    }

    /// Signed Fourier mode number of storage index `m` (0, 1, .., n/2, -n/2+1, .., -1).
    pub fn signed_mode(&self, m: usize) -> i64 {
        if m <= self.n / 2 {
            m as i64
        } else {
            m as i64 - self.n as i64
        }
    }

    pub fn is_nyquist(&self, m: usize) -> bool {
        m == self.n / 2
    }

    /// Angular wavenumber `2π m / L_axis` for storage index `m`.
    pub fn wavenumber(&self, axis: usize, m: usize) -> f64 {
        2.0 * PI * self.signed_mode(m) as f64 / self.lengths[axis]
    }

    /// Minimal-image displacement `b - a`, componentwise in `[-L/2, L/2]`.
    pub fn displacement(&self, a: &[f64], b: &[f64]) -> [f64; 3] {
        let mut d = [0.0; 3];
        for ax in 0..self.dim {
            let l = self.lengths[ax];
            let mut v = (b[ax] - a[ax]) % l;
            if v > 0.5 * l {
                v -= l;
            } else if v < -0.5 * l {
                v += l;
            }
            d[ax] = v;
        }
        d
    }

    /// Flat torus distance (Euclidean norm of the minimal-image displacement).
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        let d = self.displacement(a, b);
        d[..self.dim].iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Index of the grid point closest to `x`.
    pub fn nearest_index(&self, x: &[f64]) -> usize {
        let w = self.wrap(x);
        let mut m = [0usize; 3];
        for a in 0..self.dim {
            m[a] = (w[a] / self.spacing(a)).round() as usize % self.n;
        }
        self.flat_index(&m)
    }

    /// Wraps a point into the fundamental domain `[0, L)`.
    pub fn wrap(&self, x: &[f64]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for a in 0..self.dim {
            out[a] = x[a].rem_euclid(self.lengths[a]);
        }
        out
    }

    /// Same torus, different resolution.
    pub fn with_resolution(&self, n: usize) -> Result<Self> {
        Self::with_lengths(self.dim, n, self.lengths())
    }

    /// Number of independent components of a symmetric 2-tensor.
    pub fn sym_len(&self) -> usize {
        self.dim * (self.dim + 1) / 2
    }
}

/// Packed position of `(i, j)` in symmetric storage of a `dim x dim` matrix.
pub fn sym_index(dim: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * dim - i * i.saturating_sub(1) / 2 + (j - i)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sym_index_is_a_bijection() {
        for dim in 1..=3 {
            let mut seen = vec![false; dim * (dim + 1) / 2];
            for i in 0..dim {
                for j in i..dim {
                    let k = sym_index(dim, i, j);
                    assert!(!seen[k]);
                    seen[k] = true;
                    assert_eq!(k, sym_index(dim, j, i));
                }
            }
            assert!(seen.iter().all(|&s| s));
        }
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(TorusGrid::new(2, 4).is_err());
        assert!(TorusGrid::new(2, 12).is_err());
        assert!(TorusGrid::new(4, 16).is_err());
        assert!(TorusGrid::with_lengths(2, 16, &[1.0, -1.0]).is_err());
    }

    #[test]
    fn index_roundtrip_and_shift() {
        let g = TorusGrid::new(3, 8).unwrap();
        for idx in [0, 7, 63, 511, 300] {
            assert_eq!(g.flat_index(&g.multi_index(idx)), idx);
        }
        let i = g.flat_index(&[7, 0, 3]);
        assert_eq!(g.multi_index(g.shifted(i, 0, 1)), [0, 0, 3]);
        assert_eq!(g.multi_index(g.shifted(i, 1, -1)), [7, 7, 3]);
    }

    #[test]
    fn minimal_image_distance() {
        let g = TorusGrid::new(1, 8).unwrap();
        let d = g.distance(&[0.1], &[2.0 * PI - 0.1]);
        assert!((d - 0.2).abs() < 1e-12);
        let g2 = TorusGrid::new(2, 8).unwrap();
        assert!((g2.diameter() - PI * 2f64.sqrt()).abs() < 1e-12);
    }
}
