//! Uniform tensor-product grids on box domains.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Uniform grid on the box `[lo_1, hi_1] x ... x [lo_n, hi_n]` with `m_d`
/// points along axis `d` (boundary points included).
///
/// Linear indexing is axis-0-fastest: `lin = i_0 + m_0 (i_1 + m_1 i_2)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Grid {
    lo: Vec<f64>,
    hi: Vec<f64>,
    m: Vec<usize>,
    #[serde(skip)]
    h: Vec<f64>,
    #[serde(skip)]
    strides: Vec<usize>,
}

impl Grid {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, m: Vec<usize>) -> Result<Self> {
        let n = lo.len();
        if n != 2 && n != 3 {
            return Err(Error::argument(format!("grid dimension n = {n} must be 2 or 3")));
        }
        if hi.len() != n || m.len() != n {
            return Err(Error::argument("grid lo/hi/m must share one length"));
        }
        for d in 0..n {
            if !(hi[d] > lo[d]) || !lo[d].is_finite() || !hi[d].is_finite() {
                return Err(Error::argument(format!(
                    "grid axis {d}: need finite lo < hi, got [{}, {}]",
                    lo[d], hi[d]
                )));
            }
            if m[d] < 5 {
                return Err(Error::argument(format!(
                    "grid axis {d}: need at least 5 points for the interior stencils, got {}",
                    m[d]
                )));
            }
        }
        let h = (0..n).map(|d| (hi[d] - lo[d]) / (m[d] - 1) as f64).collect();
        let mut strides = vec![1usize; n];
        for d in 1..n {
            strides[d] = strides[d - 1] * m[d - 1];
        }
        Ok(Grid { lo, hi, m, h, strides })
    }

    /// Rebuild derived fields after deserialization.
    pub fn revalidate(self) -> Result<Self> {
        Grid::new(self.lo, self.hi, self.m)
    }

    pub fn n(&self) -> usize {
        self.lo.len()
    }

    /// Total number of grid points.
    pub fn len(&self) -> usize {
        self.m.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn points_per_axis(&self) -> &[usize] {
        &self.m
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    /// Grid spacings per axis.
    pub fn spacing(&self) -> &[f64] {
        &self.h
    }

    /// Largest spacing over the axes; the `h` appearing in error bounds.
    pub fn h_max(&self) -> f64 {
        self.h.iter().cloned().fold(0.0, f64::max)
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    /// Decompose a linear index into per-axis indices (no allocation).
    #[inline]
    pub fn decompose(&self, lin: usize, out: &mut [usize]) {
        let mut rest = lin;
        for d in 0..self.n() {
            out[d] = rest % self.m[d];
            rest /= self.m[d];
        }
    }

    pub fn multi_index(&self, lin: usize) -> Vec<usize> {
        let mut out = vec![0; self.n()];
        self.decompose(lin, &mut out);
        out
    }

    #[inline]
    pub fn linear_index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    /// Coordinate of a grid point. Endpoints are reproduced exactly
    /// (convex-combination form, not `lo + i*h`).
    pub fn coord_axis(&self, d: usize, i: usize) -> f64 {
        let s = i as f64 / (self.m[d] - 1) as f64;
        self.lo[d] * (1.0 - s) + self.hi[d] * s
    }

    pub fn coord(&self, lin: usize, out: &mut [f64]) {
        let mut idx = [0usize; 3];
        self.decompose(lin, &mut idx[..self.n()]);
        for d in 0..self.n() {
            out[d] = self.coord_axis(d, idx[d]);
        }
    }

    pub fn coord_vec(&self, lin: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n()];
        self.coord(lin, &mut out);
        out
    }

    /// True when the point lies on the box boundary.
    #[inline]
    pub fn is_boundary(&self, lin: usize) -> bool {
        let mut idx = [0usize; 3];
        self.decompose(lin, &mut idx[..self.n()]);
        (0..self.n()).any(|d| idx[d] == 0 || idx[d] == self.m[d] - 1)
    }

    pub fn interior_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&p| !self.is_boundary(p)).collect()
    }

    pub fn boundary_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&p| self.is_boundary(p)).collect()
    }
}

/// Scalar field sampled on a grid, aligned with the grid's linear indexing.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(grid: &Grid) -> Self {
        GridFunction { values: vec![0.0; grid.len()] }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        let mut x = vec![0.0; grid.n()];
        let values = (0..grid.len())
            .map(|p| {
                grid.coord(p, &mut x);
                f(&x)
            })
            .collect();
        GridFunction { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Max-norm of the difference with another field.
    pub fn linf_diff(&self, other: &GridFunction) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn linf(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing_round_trips() {
        let grid = Grid::new(vec![0.0, 0.0, 0.0], vec![1.0, 2.0, 3.0], vec![5, 6, 7]).unwrap();
        assert_eq!(grid.len(), 5 * 6 * 7);
        for lin in [0, 1, 17, 5 * 6 * 7 - 1] {
            let multi = grid.multi_index(lin);
            assert_eq!(grid.linear_index(&multi), lin);
        }
    }

    #[test]
    fn endpoints_exact() {
        let grid = Grid::new(vec![0.1, -0.3], vec![0.9, 0.7], vec![7, 11]).unwrap();
        assert_eq!(grid.coord_axis(0, 0), 0.1);
        assert_eq!(grid.coord_axis(0, 6), 0.9);
        assert_eq!(grid.coord_axis(1, 10), 0.7);
    }

    #[test]
    fn boundary_classification() {
        let grid = Grid::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![5, 5]).unwrap();
        let interior = grid.interior_indices();
        assert_eq!(interior.len(), 9);
        assert_eq!(grid.boundary_indices().len(), 16);
        assert!(interior.iter().all(|&p| !grid.is_boundary(p)));
    }

    #[test]
    fn rejects_bad_axes() {
        assert!(Grid::new(vec![0.0], vec![1.0], vec![5]).is_err());
        assert!(Grid::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![4, 5]).is_err());
        assert!(Grid::new(vec![0.0, 1.0], vec![1.0, 0.0], vec![5, 5]).is_err());
    }
}
