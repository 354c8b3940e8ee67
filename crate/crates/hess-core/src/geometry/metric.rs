//! Metric presets and the cached discrete metric field.
//!
//! Metrics are supplied analytically by a small preset registry and sampled at
//! grid points. Christoffel symbols of the sampled metric are computed with
//! the module's finite-difference stencils; every preset also exposes its
//! exact Levi-Civita symbols, which tests use as an oracle and manufactured
//! right-hand sides use to stay discretization-free.

use super::diff;
use super::grid::Grid;
use super::tensor::{sym_index, sym_len, SymTensorField};
use crate::error::{Error, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// One diagonal entry of a [`MetricPreset::DiagPoly`] metric:
/// `d(x) = constant + coeff * x[var]^power`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AxisTerm {
    pub constant: f64,
    #[serde(default)]
    pub coeff: f64,
    #[serde(default)]
    pub var: usize,
    #[serde(default)]
    pub power: u32,
}

impl AxisTerm {
    pub fn constant(c: f64) -> Self {
        AxisTerm { constant: c, coeff: 0.0, var: 0, power: 0 }
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.coeff * x[self.var].powi(self.power as i32)
    }

    /// Derivative with respect to `x[l]`.
    fn deriv(&self, x: &[f64], l: usize) -> f64 {
        if l != self.var || self.power == 0 {
            return 0.0;
        }
        self.coeff * self.power as f64 * x[self.var].powi(self.power as i32 - 1)
    }
}

/// Analytic metric families available to problem configurations.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricPreset {
    /// Euclidean metric.
    Flat,
    /// Diagonal metric `g = diag(d_1(x), ..., d_n(x))` with polynomial
    /// single-variable entries.
    DiagPoly { entries: Vec<AxisTerm> },
    /// Conformal metric `g = exp(2 psi) I` with affine `psi = c0 + c1 . x`.
    Conformal { c0: f64, c1: Vec<f64> },
}

impl MetricPreset {
    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            MetricPreset::Flat => Ok(()),
            MetricPreset::DiagPoly { entries } => {
                if entries.len() != n {
                    return Err(Error::argument(format!(
                        "diag_poly metric needs {n} entries, got {}",
                        entries.len()
                    )));
                }
                if let Some(t) = entries.iter().find(|t| t.var >= n) {
                    return Err(Error::argument(format!(
                        "diag_poly metric references coordinate {} beyond dimension {n}",
                        t.var
                    )));
                }
                Ok(())
            }
            MetricPreset::Conformal { c1, .. } => {
                if c1.len() != n {
                    return Err(Error::argument(format!(
                        "conformal metric needs {n} gradient coefficients, got {}",
                        c1.len()
                    )));
                }
                Ok(())
            }
        }
    }

    /// Metric components at a point, packed upper triangle.
    pub fn eval(&self, n: usize, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        match self {
            MetricPreset::Flat => {
                for i in 0..n {
                    out[sym_index(n, i, i)] = 1.0;
                }
            }
            MetricPreset::DiagPoly { entries } => {
                for i in 0..n {
                    out[sym_index(n, i, i)] = entries[i].eval(x);
                }
            }
            MetricPreset::Conformal { c0, c1 } => {
                let psi = c0 + c1.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                let w = (2.0 * psi).exp();
                for i in 0..n {
                    out[sym_index(n, i, i)] = w;
                }
            }
        }
    }

    /// Analytic `d g_ij / d x_l`, packed upper triangle.
    pub fn eval_deriv(&self, n: usize, x: &[f64], l: usize, out: &mut [f64]) {
        out.fill(0.0);
        match self {
            MetricPreset::Flat => {}
            MetricPreset::DiagPoly { entries } => {
                for i in 0..n {
                    out[sym_index(n, i, i)] = entries[i].deriv(x, l);
                }
            }
            MetricPreset::Conformal { c0, c1 } => {
                let psi = c0 + c1.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                let w = 2.0 * c1[l] * (2.0 * psi).exp();
                for i in 0..n {
                    out[sym_index(n, i, i)] = w;
                }
            }
        }
    }

    /// Exact Levi-Civita symbols `Gamma^k_{ij}` at a point; layout matches
    /// [`MetricField::gamma`]: `out[k * sym_len(n) + sym_index(i, j)]`.
    pub fn christoffel_exact(&self, n: usize, x: &[f64], out: &mut [f64]) {
        let w = sym_len(n);
        let mut g = vec![0.0; w];
        self.eval(n, x, &mut g);
        let ginv =
            super::tensor::unpack(n, &g).try_inverse().expect("preset metric must be invertible");
        let mut dg = vec![0.0; n * w];
        for l in 0..n {
            self.eval_deriv(n, x, l, &mut dg[l * w..(l + 1) * w]);
        }
        christoffel_from_derivs(n, &ginv, &dg, out);
    }
}

/// Levi-Civita formula from metric derivatives:
/// `Gamma^k_ij = 1/2 g^{kl} (d_i g_jl + d_j g_il - d_l g_ij)`.
fn christoffel_from_derivs(n: usize, ginv: &DMatrix<f64>, dg: &[f64], out: &mut [f64]) {
    let w = sym_len(n);
    for k in 0..n {
        for i in 0..n {
            for j in i..n {
                let mut acc = 0.0;
                for l in 0..n {
                    let term = dg[i * w + sym_index(n, j, l)] + dg[j * w + sym_index(n, i, l)]
                        - dg[l * w + sym_index(n, i, j)];
                    acc += ginv[(k, l)] * term;
                }
                out[k * w + sym_index(n, i, j)] = 0.5 * acc;
            }
        }
    }
}

/// Metric sampled on a grid with cached inverse, Cholesky factors, and
/// finite-difference Christoffel symbols.
#[derive(Debug, Clone)]
pub struct MetricField {
    n: usize,
    g: SymTensorField,
    g_inv: SymTensorField,
    /// Packed lower-triangular Cholesky factor of `g` per point (row-major
    /// lower triangle, same packing as the symmetric fields).
    chol_l: Vec<f64>,
    /// `Gamma^k_{(ij)}` per point: `[pt][k][sym(i,j)]`.
    gamma: Vec<f64>,
}

impl MetricField {
    /// Sample a preset on a grid and build all cached data. Fails with the
    /// offending grid point if the preset is not SPD somewhere.
    pub fn build(preset: &MetricPreset, grid: &Grid) -> Result<Self> {
        let n = grid.n();
        preset.validate(n)?;
        let npts = grid.len();
        let w = sym_len(n);

        let mut g = SymTensorField::zeros(n, npts);
        let mut x = vec![0.0; n];
        for p in 0..npts {
            grid.coord(p, &mut x);
            preset.eval(n, &x, g.components_mut(p));
        }

        let mut g_inv = SymTensorField::zeros(n, npts);
        let mut chol_l = vec![0.0; npts * w];
        for p in 0..npts {
            let gm = g.matrix(p);
            let chol = nalgebra::Cholesky::new(gm)
                .ok_or_else(|| Error::MetricNotSpd { index: grid.multi_index(p) })?;
            let inv = chol.inverse();
            for i in 0..n {
                for j in i..n {
                    g_inv.set(p, i, j, inv[(i, j)]);
                }
            }
            let l = chol.l();
            for i in 0..n {
                for j in 0..=i {
                    chol_l[p * w + sym_index(n, j, i)] = l[(i, j)];
                }
            }
        }

        // Finite-difference Christoffels from the sampled metric components.
        let mut dg_fields = vec![vec![0.0; npts]; n * w];
        for c in 0..w {
            let comp: Vec<f64> = (0..npts).map(|p| g.components(p)[c]).collect();
            for l in 0..n {
                dg_fields[l * w + c] = diff::deriv1_field(grid, &comp, l);
            }
        }
        let mut gamma = vec![0.0; npts * n * w];
        let mut dg_local = vec![0.0; n * w];
        for p in 0..npts {
            for l in 0..n {
                for c in 0..w {
                    dg_local[l * w + c] = dg_fields[l * w + c][p];
                }
            }
            let ginv = g_inv.matrix(p);
            christoffel_from_derivs(n, &ginv, &dg_local, &mut gamma[p * n * w..(p + 1) * n * w]);
        }

        Ok(MetricField { n, g, g_inv, chol_l, gamma })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn g(&self) -> &SymTensorField {
        &self.g
    }

    pub fn g_inv(&self) -> &SymTensorField {
        &self.g_inv
    }

    /// Christoffel `Gamma^k_{ij}` at a point.
    #[inline]
    pub fn gamma(&self, pt: usize, k: usize, i: usize, j: usize) -> f64 {
        let w = sym_len(self.n);
        self.gamma[(pt * self.n + k) * w + sym_index(self.n, i, j)]
    }

    /// Cholesky factor of `g` at a point as a dense lower-triangular matrix.
    pub fn chol_matrix(&self, pt: usize) -> DMatrix<f64> {
        let n = self.n;
        let w = sym_len(n);
        let mut l = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                l[(i, j)] = self.chol_l[pt * w + sym_index(n, j, i)];
            }
        }
        l
    }

    /// Trace of a packed symmetric tensor against `g^{-1}` at a point.
    #[inline]
    pub fn trace_g(&self, pt: usize, packed: &[f64]) -> f64 {
        let n = self.n;
        let mut acc = 0.0;
        for i in 0..n {
            for j in i..n {
                let w = if i == j { 1.0 } else { 2.0 };
                acc += w * self.g_inv.get(pt, i, j) * packed[sym_index(n, i, j)];
            }
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_metric_has_zero_gamma() {
        let grid = Grid::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![7, 7]).unwrap();
        let mf = MetricField::build(&MetricPreset::Flat, &grid).unwrap();
        for p in 0..grid.len() {
            for k in 0..2 {
                for i in 0..2 {
                    for j in i..2 {
                        assert_eq!(mf.gamma(p, k, i, j), 0.0);
                    }
                }
            }
            assert_eq!(mf.g().get(p, 0, 0), 1.0);
            assert_eq!(mf.g_inv().get(p, 1, 1), 1.0);
        }
    }

    #[test]
    fn diag_metric_exact_christoffels() {
        // g = diag(1, x_1^2) on x_1 >= 0.5: Gamma^1_22 = -x_1, Gamma^2_12 = 1/x_1.
        let preset = MetricPreset::DiagPoly {
            entries: vec![
                AxisTerm::constant(1.0),
                AxisTerm { constant: 0.0, coeff: 1.0, var: 0, power: 2 },
            ],
        };
        let x = [0.8, 0.3];
        let w = sym_len(2);
        let mut gamma = vec![0.0; 2 * w];
        preset.christoffel_exact(2, &x, &mut gamma);
        let g1_22 = gamma[sym_index(2, 1, 1)];
        let g2_12 = gamma[w + sym_index(2, 0, 1)];
        assert!((g1_22 + 0.8).abs() < 1e-12);
        assert!((g2_12 - 1.0 / 0.8).abs() < 1e-12);
    }

    #[test]
    fn fd_christoffels_match_exact_to_h2() {
        let preset = MetricPreset::DiagPoly {
            entries: vec![
                AxisTerm::constant(1.0),
                AxisTerm { constant: 1.0, coeff: 0.25, var: 0, power: 2 },
            ],
        };
        let mut errs = Vec::new();
        for &m in &[9usize, 17, 33] {
            let grid = Grid::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![m, m]).unwrap();
            let mf = MetricField::build(&preset, &grid).unwrap();
            let mut x = vec![0.0; 2];
            let mut exact = vec![0.0; 2 * sym_len(2)];
            let mut worst: f64 = 0.0;
            for p in 0..grid.len() {
                grid.coord(p, &mut x);
                preset.christoffel_exact(2, &x, &mut exact);
                for k in 0..2 {
                    for i in 0..2 {
                        for j in i..2 {
                            let fd = mf.gamma(p, k, i, j);
                            let ex = exact[k * sym_len(2) + sym_index(2, i, j)];
                            worst = worst.max((fd - ex).abs());
                        }
                    }
                }
            }
            errs.push(worst);
        }
        // Derivatives of quadratics are captured exactly up to roundoff by
        // second-order stencils, so just require a tight absolute bound.
        assert!(errs.iter().all(|&e| e < 1e-10), "errors {errs:?}");
    }

    #[test]
    fn conformal_christoffels_converge_at_h2() {
        let preset = MetricPreset::Conformal { c0: 0.1, c1: vec![0.4, -0.3] };
        let mut errs = Vec::new();
        for &m in &[9usize, 17, 33] {
            let grid = Grid::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![m, m]).unwrap();
            let mf = MetricField::build(&preset, &grid).unwrap();
            let mut x = vec![0.0; 2];
            let mut exact = vec![0.0; 2 * sym_len(2)];
            let mut worst: f64 = 0.0;
            for p in 0..grid.len() {
                grid.coord(p, &mut x);
                preset.christoffel_exact(2, &x, &mut exact);
                for k in 0..2 {
                    for i in 0..2 {
                        for j in i..2 {
                            worst = worst.max(
                                (mf.gamma(p, k, i, j) - exact[k * sym_len(2) + sym_index(2, i, j)])
                                    .abs(),
                            );
                        }
                    }
                }
            }
            errs.push(worst);
        }
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!(ratio > 3.5 && ratio < 4.5, "ratio {ratio}, errors {errs:?}");
        }
    }

    #[test]
    fn non_spd_preset_is_rejected() {
        let preset = MetricPreset::DiagPoly {
            entries: vec![AxisTerm::constant(1.0), AxisTerm::constant(-1.0)],
        };
        let grid = Grid::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![5, 5]).unwrap();
        let err = MetricField::build(&preset, &grid).unwrap_err();
        assert!(matches!(err, Error::MetricNotSpd { .. }));
    }
}
