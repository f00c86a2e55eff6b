//! Tensor fields sampled on a [`TorusGrid`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{sym_index, TorusGrid};

/// Smallest eigenvalue a metric may have at any grid point.
pub const PD_THRESHOLD: f64 = 1e-10;

/// Variance of one tensor slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Slot {
    Co,
    Contra,
}

/// A general tensor field; components are stored per multi-index, slot order
/// as declared, last slot fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    grid: TorusGrid,
    slots: Vec<Slot>,
    comps: Vec<Vec<f64>>,
}

impl TensorField {
    pub fn zeros(grid: &TorusGrid, slots: &[Slot]) -> Self {
        let count = grid.dim().pow(slots.len() as u32);
        Self { grid: *grid, slots: slots.to_vec(), comps: vec![vec![0.0; grid.len()]; count] }
    }

    pub fn from_components(grid: &TorusGrid, slots: &[Slot], comps: Vec<Vec<f64>>) -> Result<Self> {
        let count = grid.dim().pow(slots.len() as u32);
        if comps.len() != count || comps.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::ShapeMismatch(format!(
                "expected {count} components of length {}",
                grid.len()
            )));
        }
        Ok(Self { grid: *grid, slots: slots.to_vec(), comps })
    }

    pub fn scalar(grid: &TorusGrid, data: Vec<f64>) -> Self {
        Self { grid: *grid, slots: Vec::new(), comps: vec![data] }
    }

    pub fn vector(grid: &TorusGrid, comps: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_components(grid, &[Slot::Contra], comps)
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn rank(&self) -> usize {
        self.slots.len()
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.comps
    }

    pub fn components_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.comps
    }

    pub fn into_components(self) -> Vec<Vec<f64>> {
        self.comps
    }

    /// Flat component index of a multi-index.
    pub fn index_of(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank());
        let d = self.grid.dim();
        idx.iter().fold(0, |acc, &i| acc * d + i)
    }

    pub fn component(&self, idx: &[usize]) -> &[f64] {
        &self.comps[self.index_of(idx)]
    }

    pub fn component_mut(&mut self, idx: &[usize]) -> &mut Vec<f64> {
        let k = self.index_of(idx);
        &mut self.comps[k]
    }

    /// Pointwise Euclidean (Frobenius) norm of the components.
    pub fn pointwise_norm(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.len()];
        for c in &self.comps {
            for (o, v) in out.iter_mut().zip(c) {
                *o += v * v;
            }
        }
        out.iter_mut().for_each(|v| *v = v.sqrt());
        out
    }

    /// `max_x |T(x)|` with the Frobenius norm of the components.
    pub fn sup_norm(&self) -> f64 {
        self.pointwise_norm().into_iter().fold(0.0, f64::max)
    }

    /// Componentwise `self - other`.
    pub fn sub(&self, other: &TensorField) -> Result<TensorField> {
        self.check_same(other)?;
        let comps = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
            .collect();
        Ok(TensorField { grid: self.grid, slots: self.slots.clone(), comps })
    }

    pub fn scaled(&self, s: f64) -> TensorField {
        let comps = self.comps.iter().map(|c| c.iter().map(|v| v * s).collect()).collect();
        TensorField { grid: self.grid, slots: self.slots.clone(), comps }
    }

    fn check_same(&self, other: &TensorField) -> Result<()> {
        if self.grid != other.grid || self.slots != other.slots {
            return Err(Error::ShapeMismatch("tensor fields differ in grid or signature".into()));
        }
        Ok(())
    }

    /// Scalar field data when rank is 0.
    pub fn as_scalar(&self) -> Option<&[f64]> {
        if self.slots.is_empty() {
            Some(&self.comps[0])
        } else {
            None
        }
    }
}

/// Symmetric 2-tensor field in packed storage, so symmetry holds bitwise.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTensorField {
    grid: TorusGrid,
    comps: Vec<Vec<f64>>,
}

impl SymTensorField {
    pub fn zeros(grid: &TorusGrid) -> Self {
        Self { grid: *grid, comps: vec![vec![0.0; grid.len()]; grid.sym_len()] }
    }

    /// Constant field with the given matrix (only the upper triangle is read).
    pub fn constant(grid: &TorusGrid, m: &[[f64; 3]; 3]) -> Self {
        Self::from_fn(grid, |_| *m)
    }

    pub fn identity(grid: &TorusGrid) -> Self {
        Self::constant(grid, &[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    }

    /// Builds a field from a function of the grid coordinates; the upper triangle is used.
    pub fn from_fn<F>(grid: &TorusGrid, f: F) -> Self
    where
        F: Fn(&[f64; 3]) -> [[f64; 3]; 3],
    {
        let d = grid.dim();
        let mut comps = vec![vec![0.0; grid.len()]; grid.sym_len()];
        for p in 0..grid.len() {
            let m = f(&grid.coord(p));
            for i in 0..d {
                for j in i..d {
                    comps[sym_index(d, i, j)][p] = m[i][j];
                }
            }
        }
        Self { grid: *grid, comps }
    }

    pub fn from_packed(grid: &TorusGrid, comps: Vec<Vec<f64>>) -> Result<Self> {
        if comps.len() != grid.sym_len() || comps.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::ShapeMismatch(format!(
                "expected {} packed components of length {}",
                grid.sym_len(),
                grid.len()
            )));
        }
        Ok(Self { grid: *grid, comps })
    }

    /// Symmetrizes a rank-2 tensor field.
    pub fn from_tensor(t: &TensorField) -> Result<Self> {
        if t.rank() != 2 {
            return Err(Error::ShapeMismatch("expected a rank-2 tensor".into()));
        }
        let grid = *t.grid();
        let d = grid.dim();
        let mut comps = vec![vec![0.0; grid.len()]; grid.sym_len()];
        for i in 0..d {
            for j in i..d {
                let a = t.component(&[i, j]);
                let b = t.component(&[j, i]);
                comps[sym_index(d, i, j)] = a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect();
            }
        }
        Ok(Self { grid, comps })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn get(&self, i: usize, j: usize) -> &[f64] {
        &self.comps[sym_index(self.grid.dim(), i, j)]
    }

    pub fn get_mut(&mut self, i: usize, j: usize) -> &mut Vec<f64> {
        let k = sym_index(self.grid.dim(), i, j);
        &mut self.comps[k]
    }

    pub fn packed(&self) -> &[Vec<f64>] {
        &self.comps
    }

    pub fn packed_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.comps
    }

    pub fn into_packed(self) -> Vec<Vec<f64>> {
        self.comps
    }

    /// The matrix at grid point `p`, zero-padded to 3x3.
    pub fn at(&self, p: usize) -> [[f64; 3]; 3] {
        let d = self.grid.dim();
        let mut m = [[0.0; 3]; 3];
        for i in 0..d {
            for j in i..d {
                let v = self.comps[sym_index(d, i, j)][p];
                m[i][j] = v;
                m[j][i] = v;
            }
        }
        m
    }

    pub fn set(&mut self, p: usize, m: &[[f64; 3]; 3]) {
        let d = self.grid.dim();
        for i in 0..d {
            for j in i..d {
                self.comps[sym_index(d, i, j)][p] = m[i][j];
            }
        }
    }

    /// Full (unpacked) rank-2 covariant tensor.
    pub fn to_tensor(&self) -> TensorField {
        let d = self.grid.dim();
        let mut comps = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                comps.push(self.get(i, j).to_vec());
            }
        }
        TensorField::from_components(&self.grid, &[Slot::Co, Slot::Co], comps)
            .expect("shape is consistent by construction")
    }

    /// Pointwise Frobenius norm, counting off-diagonal entries twice.
    pub fn pointwise_norm(&self) -> Vec<f64> {
        let d = self.grid.dim();
        let mut out = vec![0.0; self.grid.len()];
        for i in 0..d {
            for j in i..d {
                let w = if i == j { 1.0 } else { 2.0 };
                for (o, v) in out.iter_mut().zip(self.get(i, j)) {
                    *o += w * v * v;
                }
            }
        }
        out.iter_mut().for_each(|v| *v = v.sqrt());
        out
    }

    pub fn sup_norm(&self) -> f64 {
        self.pointwise_norm().into_iter().fold(0.0, f64::max)
    }

    /// Largest absolute entry over all points and components.
    pub fn max_abs_entry(&self) -> f64 {
        self.comps.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn add(&self, other: &SymTensorField) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &SymTensorField) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            grid: self.grid,
            comps: self.comps.iter().map(|c| c.iter().map(|v| v * s).collect()).collect(),
        }
    }

    pub fn zip_with<F: Fn(f64, f64) -> f64>(&self, other: &SymTensorField, f: F) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::ShapeMismatch("symmetric fields on different grids".into()));
        }
        let comps = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| f(*x, *y)).collect())
            .collect();
        Ok(Self { grid: self.grid, comps })
    }

    /// True when every component is bitwise constant over the grid.
    pub fn is_constant(&self) -> bool {
        self.comps.iter().all(|c| c.iter().all(|v| v.to_bits() == c[0].to_bits()))
    }

    /// Circular shift by `offset` cells along `axis`: `out(x) = self(x - offset * h)`.
    pub fn translated(&self, axis: usize, offset: isize) -> Self {
        let comps = self.comps.iter().map(|c| translate_scalar(&self.grid, c, axis, offset)).collect();
        Self { grid: self.grid, comps }
    }
}

/// Circular shift of a scalar field: `out[p] = f[p - offset e_axis]`.
pub fn translate_scalar(grid: &TorusGrid, f: &[f64], axis: usize, offset: isize) -> Vec<f64> {
    (0..grid.len()).map(|p| f[grid.shifted(p, axis, -offset)]).collect()
}

/// A Riemannian metric: a symmetric 2-tensor field that is positive definite everywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricField {
    sym: SymTensorField,
}

impl MetricField {
    /// Validates positive-definiteness at every grid point.
    pub fn new(sym: SymTensorField) -> Result<Self> {
        let d = sym.grid().dim();
        for p in 0..sym.grid().len() {
            let m = sym.at(p);
            let ev = min_eigenvalue(d, &m);
            if !(ev > PD_THRESHOLD) {
                return Err(Error::NonPositiveDefinite { point: p, eigenvalue: ev });
            }
        }
        Ok(Self { sym })
    }

    pub fn flat(grid: &TorusGrid) -> Self {
        Self { sym: SymTensorField::identity(grid) }
    }

    pub fn constant(grid: &TorusGrid, m: &[[f64; 3]; 3]) -> Result<Self> {
        Self::new(SymTensorField::constant(grid, m))
    }

    pub fn grid(&self) -> &TorusGrid {
        self.sym.grid()
    }

    pub fn dim(&self) -> usize {
        self.sym.grid().dim()
    }

    pub fn sym(&self) -> &SymTensorField {
        &self.sym
    }

    pub fn into_sym(self) -> SymTensorField {
        self.sym
    }

    pub fn get(&self, i: usize, j: usize) -> &[f64] {
        self.sym.get(i, j)
    }

    pub fn at(&self, p: usize) -> [[f64; 3]; 3] {
        self.sym.at(p)
    }

    pub fn is_constant(&self) -> bool {
        self.sym.is_constant()
    }

    /// `self + h`, validated.
    pub fn perturbed(&self, h: &SymTensorField) -> Result<Self> {
        Self::new(self.sym.add(h)?)
    }

    /// `self - other` as a plain symmetric field.
    pub fn difference(&self, other: &MetricField) -> Result<SymTensorField> {
        self.sym.sub(&other.sym)
    }

    /// Smallest eigenvalue over all grid points.
    pub fn min_eigenvalue(&self) -> f64 {
        let d = self.dim();
        (0..self.grid().len()).map(|p| min_eigenvalue(d, &self.at(p))).fold(f64::INFINITY, f64::min)
    }

    /// Pointwise inverse `g^{ij}`.
    pub fn inverse(&self) -> SymTensorField {
        let d = self.dim();
        let g = self.grid();
        let mut out = SymTensorField::zeros(g);
        for p in 0..g.len() {
            out.set(p, &invert(d, &self.at(p)));
        }
        out
    }

    /// Pointwise `sqrt(det g)`.
    pub fn volume_density(&self) -> Vec<f64> {
        let d = self.dim();
        (0..self.grid().len()).map(|p| determinant(d, &self.at(p)).sqrt()).collect()
    }
}

/// Smallest eigenvalue of the leading `d x d` block of a symmetric matrix.
pub fn min_eigenvalue(d: usize, m: &[[f64; 3]; 3]) -> f64 {
    match d {
        1 => m[0][0],
        2 => {
            let tr = m[0][0] + m[1][1];
            let diff = m[0][0] - m[1][1];
            0.5 * (tr - (diff * diff + 4.0 * m[0][1] * m[0][1]).sqrt())
        }
        _ => {
            let mat = nalgebra::Matrix3::new(
                m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2],
            );
            mat.symmetric_eigenvalues().min()
        }
    }
}

pub fn determinant(d: usize, m: &[[f64; 3]; 3]) -> f64 {
    match d {
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        _ => {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        }
    }
}

/// Inverse of the leading `d x d` block via the adjugate.
pub fn invert(d: usize, m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    let det = determinant(d, m);
    match d {
        1 => out[0][0] = 1.0 / m[0][0],
        2 => {
            out[0][0] = m[1][1] / det;
            out[1][1] = m[0][0] / det;
            out[0][1] = -m[0][1] / det;
            out[1][0] = -m[1][0] / det;
        }
        _ => {
            for i in 0..3 {
                for j in 0..3 {
                    let (i1, i2) = ((j + 1) % 3, (j + 2) % 3);
                    let (j1, j2) = ((i + 1) % 3, (i + 2) % 3);
                    out[i][j] = (m[i1][j1] * m[i2][j2] - m[i1][j2] * m[i2][j1]) / det;
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invert_three_by_three() {
        let m = [[2.0, 0.3, 0.1], [0.3, 1.5, -0.2], [0.1, -0.2, 1.1]];
        let inv = invert(3, &m);
        for i in 0..3 {
            for j in 0..3 {
                let s: f64 = (0..3).map(|k| m[i][k] * inv[k][j]).sum();
                assert!((s - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn rejects_indefinite_metric() {
        let g = TorusGrid::new(2, 8).unwrap();
        let bad = SymTensorField::constant(&g, &[[1.0, 2.0, 0.0], [2.0, 1.0, 0.0], [0.0; 3]]);
        assert!(matches!(MetricField::new(bad), Err(Error::NonPositiveDefinite { .. })));
        let tiny = SymTensorField::constant(&g, &[[1.0, 0.0, 0.0], [0.0, 1e-12, 0.0], [0.0; 3]]);
        assert!(MetricField::new(tiny).is_err());
    }

    #[test]
    fn min_eigenvalue_matches_nalgebra_in_2d() {
        let m: [[f64; 3]; 3] = [[1.3, 0.4, 0.0], [0.4, 0.7, 0.0], [0.0; 3]];
        let na: f64 = nalgebra::Matrix2::<f64>::new(1.3, 0.4, 0.4, 0.7).symmetric_eigenvalues().min();
        assert!((min_eigenvalue(2, &m) - na).abs() < 1e-14);
    }

    #[test]
    fn symmetrization_is_exact() {
        let g = TorusGrid::new(2, 8).unwrap();
        let mut t = TensorField::zeros(&g, &[Slot::Co, Slot::Co]);
        t.component_mut(&[0, 1])[3] = 1.0;
        t.component_mut(&[1, 0])[3] = 3.0;
        let s = SymTensorField::from_tensor(&t).unwrap();
        let full = s.to_tensor();
        assert_eq!(full.component(&[0, 1])[3].to_bits(), full.component(&[1, 0])[3].to_bits());
        assert_eq!(full.component(&[0, 1])[3], 2.0);
    }
}
