//! Covariant differential operators on grid functions.
//!
//! All operators act on sampled scalar fields and return full-grid data;
//! interior points use central stencils, boundary points one-sided ones (the
//! latter only feed diagnostics and field dumps, never the solve itself).

use super::diff;
use super::grid::Grid;
use super::metric::MetricField;
use super::tensor::{sym_index, sym_len, SymTensorField};

/// All first derivative fields `d_a u`, one per axis.
pub fn gradient_fields(grid: &Grid, u: &[f64]) -> Vec<Vec<f64>> {
    (0..grid.n()).map(|a| diff::deriv1_field(grid, u, a)).collect()
}

/// Covariant Hessian `nabla_ij u = d_i d_j u - Gamma^k_ij d_k u` at every
/// grid point.
pub fn covariant_hessian_field(grid: &Grid, metric: &MetricField, u: &[f64]) -> SymTensorField {
    let n = grid.n();
    let npts = grid.len();
    let d1 = gradient_fields(grid, u);

    // Pure and mixed coordinate second derivatives.
    let mut second: Vec<Vec<f64>> = vec![Vec::new(); sym_len(n)];
    for a in 0..n {
        for b in a..n {
            second[sym_index(n, a, b)] = if a == b {
                (0..npts).map(|p| diff::deriv2_at(grid, u, p, a)).collect()
            } else {
                diff::deriv1_field(grid, &d1[b], a)
            };
        }
    }

    let mut hess = SymTensorField::zeros(n, npts);
    for p in 0..npts {
        for i in 0..n {
            for j in i..n {
                let mut v = second[sym_index(n, i, j)][p];
                for k in 0..n {
                    v -= metric.gamma(p, k, i, j) * d1[k][p];
                }
                hess.set(p, i, j, v);
            }
        }
    }
    hess
}

/// Covariant Hessian at a single point (same stencils as the field version).
pub fn covariant_hessian_at(grid: &Grid, metric: &MetricField, u: &[f64], p: usize) -> Vec<f64> {
    let n = grid.n();
    let mut out = vec![0.0; sym_len(n)];
    for i in 0..n {
        for j in i..n {
            let dd = if i == j {
                diff::deriv2_at(grid, u, p, i)
            } else {
                // Composition D_i (D_j u) expanded locally.
                let m = grid.points_per_axis()[i];
                let s = grid.strides()[i];
                let h = grid.spacing()[i];
                let mut idx = [0usize; 3];
                grid.decompose(p, &mut idx[..n]);
                let pos = idx[i];
                let d = |q: usize| diff::deriv1_at(grid, u, q, j);
                if pos == 0 {
                    (-3.0 * d(p) + 4.0 * d(p + s) - d(p + 2 * s)) / (2.0 * h)
                } else if pos == m - 1 {
                    (3.0 * d(p) - 4.0 * d(p - s) + d(p - 2 * s)) / (2.0 * h)
                } else {
                    (d(p + s) - d(p - s)) / (2.0 * h)
                }
            };
            let mut v = dd;
            for k in 0..n {
                v -= metric.gamma(p, k, i, j) * diff::deriv1_at(grid, u, p, k);
            }
            out[sym_index(n, i, j)] = v;
        }
    }
    out
}

/// Laplace-Beltrami operator `g^{ij} nabla_ij u` at every grid point.
pub fn laplacian_field(grid: &Grid, metric: &MetricField, u: &[f64]) -> Vec<f64> {
    let hess = covariant_hessian_field(grid, metric, u);
    (0..grid.len()).map(|p| metric.trace_g(p, hess.components(p))).collect()
}

/// `chi_1 = (tr_g chi / (n-1)) g - chi`, the shift appearing in the
/// reformulated operator.
pub fn chi1_of(metric: &MetricField, chi: &SymTensorField) -> SymTensorField {
    let n = metric.n();
    let npts = chi.npts();
    let mut out = SymTensorField::zeros(n, npts);
    for p in 0..npts {
        let t = metric.trace_g(p, chi.components(p)) / (n as f64 - 1.0);
        for i in 0..n {
            for j in i..n {
                out.set(p, i, j, t * metric.g().get(p, i, j) - chi.get(p, i, j));
            }
        }
    }
    out
}

/// The tensor `eta = (Delta u) g - nabla^2 u + chi` at every grid point.
pub fn eta_field(
    grid: &Grid,
    metric: &MetricField,
    chi: &SymTensorField,
    u: &[f64],
) -> SymTensorField {
    let n = grid.n();
    let npts = grid.len();
    let hess = covariant_hessian_field(grid, metric, u);
    let mut out = SymTensorField::zeros(n, npts);
    for p in 0..npts {
        let lap = metric.trace_g(p, hess.components(p));
        for i in 0..n {
            for j in i..n {
                out.set(
                    p,
                    i,
                    j,
                    lap * metric.g().get(p, i, j) - hess.get(p, i, j) + chi.get(p, i, j),
                );
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::metric::{AxisTerm, MetricPreset};

    fn flat_grid_2d(m: usize) -> (Grid, MetricField) {
        let grid = Grid::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![m, m]).unwrap();
        let metric = MetricField::build(&MetricPreset::Flat, &grid).unwrap();
        (grid, metric)
    }

    #[test]
    fn flat_laplacian_of_quadratic() {
        let (grid, metric) = flat_grid_2d(9);
        let u: Vec<f64> = (0..grid.len())
            .map(|p| {
                let x = grid.coord_vec(p);
                0.5 * (x[0] * x[0] + x[1] * x[1])
            })
            .collect();
        let lap = laplacian_field(&grid, &metric, &u);
        for v in lap {
            assert!((v - 2.0).abs() < 1e-10);
        }
    }

    #[test]
    fn curved_hessian_picks_up_christoffel() {
        // g = diag(1, x_1^2) on x_1 in [0.5, 1.5], u = x_1:
        // nabla_22 u = -Gamma^1_22 * d_1 u = x_1.
        let preset = MetricPreset::DiagPoly {
            entries: vec![
                AxisTerm::constant(1.0),
                AxisTerm { constant: 0.0, coeff: 1.0, var: 0, power: 2 },
            ],
        };
        let grid = Grid::new(vec![0.5, 0.0], vec![1.5, 1.0], vec![17, 17]).unwrap();
        let metric = MetricField::build(&preset, &grid).unwrap();
        let u: Vec<f64> = (0..grid.len()).map(|p| grid.coord_vec(p)[0]).collect();
        let hess = covariant_hessian_field(&grid, &metric, &u);
        for p in 0..grid.len() {
            let x1 = grid.coord_vec(p)[0];
            assert!((hess.get(p, 1, 1) - x1).abs() < 1e-8, "point {p}");
            assert!(hess.get(p, 0, 0).abs() < 1e-8);
        }
    }

    #[test]
    fn chi1_of_metric_multiple() {
        // chi = g in dimension 3: tr_g chi = 3, chi_1 = (3/2) g - g = g/2.
        let grid = Grid::new(vec![0.0; 3], vec![1.0; 3], vec![5, 5, 5]).unwrap();
        let metric = MetricField::build(&MetricPreset::Flat, &grid).unwrap();
        let mut chi = SymTensorField::zeros(3, grid.len());
        for p in 0..grid.len() {
            for i in 0..3 {
                chi.set(p, i, i, 1.0);
            }
        }
        let chi1 = chi1_of(&metric, &chi);
        for p in 0..grid.len() {
            for i in 0..3 {
                for j in i..3 {
                    let want = if i == j { 0.5 } else { 0.0 };
                    assert!((chi1.get(p, i, j) - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn eta_matrix_identity_route() {
        // eta = tr_g(U) g - U with U = hess + chi_1 must reproduce eta
        // assembled directly, pointwise to roundoff.
        let preset = MetricPreset::Conformal { c0: 0.05, c1: vec![0.2, -0.1] };
        let grid = Grid::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![9, 9]).unwrap();
        let metric = MetricField::build(&preset, &grid).unwrap();
        let u: Vec<f64> = (0..grid.len())
            .map(|p| {
                let x = grid.coord_vec(p);
                (x[0] - 0.3).powi(2) + 0.7 * (x[1] + 0.2).powi(2) + 0.1 * x[0] * x[1]
            })
            .collect();
        let mut chi = SymTensorField::zeros(2, grid.len());
        for p in 0..grid.len() {
            chi.set(p, 0, 0, 0.4);
            chi.set(p, 1, 1, 0.9);
            chi.set(p, 0, 1, 0.1);
        }
        let eta = eta_field(&grid, &metric, &chi, &u);
        let hess = covariant_hessian_field(&grid, &metric, &u);
        let chi1 = chi1_of(&metric, &chi);
        for p in 0..grid.len() {
            let mut upacked = vec![0.0; sym_len(2)];
            for c in 0..sym_len(2) {
                upacked[c] = hess.components(p)[c] + chi1.components(p)[c];
            }
            let tr = metric.trace_g(p, &upacked);
            for i in 0..2 {
                for j in i..2 {
                    let via_u = tr * metric.g().get(p, i, j) - upacked[sym_index(2, i, j)];
                    assert!(
                        (via_u - eta.get(p, i, j)).abs() <= 1e-9 * via_u.abs().max(1.0),
                        "mismatch at {p} ({i}{j})"
                    );
                }
            }
        }
    }

    #[test]
    fn hessian_at_matches_field() {
        let preset = MetricPreset::Conformal { c0: 0.0, c1: vec![0.3, 0.1] };
        let grid = Grid::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![7, 7]).unwrap();
        let metric = MetricField::build(&preset, &grid).unwrap();
        let u: Vec<f64> = (0..grid.len())
            .map(|p| {
                let x = grid.coord_vec(p);
                (1.3 * x[0]).sin() * (0.7 * x[1]).cosh()
            })
            .collect();
        let field = covariant_hessian_field(&grid, &metric, &u);
        for p in 0..grid.len() {
            let local = covariant_hessian_at(&grid, &metric, &u, p);
            for c in 0..sym_len(2) {
                assert!((local[c] - field.components(p)[c]).abs() < 1e-12);
            }
        }
    }
}
