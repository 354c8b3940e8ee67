//! Second-order finite-difference stencils on uniform grids.
//!
//! Interior points use central stencils; boundary points fall back to
//! one-sided stencils of the same order, so max-norm errors of first and
//! second derivatives are `O(h^2)` over the whole closed box. Mixed second
//! derivatives are compositions `D_a (D_b u)`, which at interior points
//! reduces to the usual 4-point cross stencil.

use super::grid::Grid;

/// First derivative along `axis` at the point with linear index `lin`.
#[inline]
pub fn deriv1_at(grid: &Grid, f: &[f64], lin: usize, axis: usize) -> f64 {
    let m = grid.points_per_axis()[axis];
    let s = grid.strides()[axis];
    let h = grid.spacing()[axis];
    let mut idx = [0usize; 3];
    grid.decompose(lin, &mut idx[..grid.n()]);
    let i = idx[axis];
    if i == 0 {
        (-3.0 * f[lin] + 4.0 * f[lin + s] - f[lin + 2 * s]) / (2.0 * h)
    } else if i == m - 1 {
        (3.0 * f[lin] - 4.0 * f[lin - s] + f[lin - 2 * s]) / (2.0 * h)
    } else {
        (f[lin + s] - f[lin - s]) / (2.0 * h)
    }
}

/// Pure second derivative along `axis` at a point.
#[inline]
pub fn deriv2_at(grid: &Grid, f: &[f64], lin: usize, axis: usize) -> f64 {
    let m = grid.points_per_axis()[axis];
    let s = grid.strides()[axis];
    let h2 = grid.spacing()[axis] * grid.spacing()[axis];
    let mut idx = [0usize; 3];
    grid.decompose(lin, &mut idx[..grid.n()]);
    let i = idx[axis];
    if i == 0 {
        (2.0 * f[lin] - 5.0 * f[lin + s] + 4.0 * f[lin + 2 * s] - f[lin + 3 * s]) / h2
    } else if i == m - 1 {
        (2.0 * f[lin] - 5.0 * f[lin - s] + 4.0 * f[lin - 2 * s] - f[lin - 3 * s]) / h2
    } else {
        (f[lin + s] - 2.0 * f[lin] + f[lin - s]) / h2
    }
}

/// Full-grid first derivative along `axis`.
pub fn deriv1_field(grid: &Grid, f: &[f64], axis: usize) -> Vec<f64> {
    (0..grid.len()).map(|p| deriv1_at(grid, f, p, axis)).collect()
}

/// Mixed second derivative `d_a d_b f` at a point, as the composition of
/// one-dimensional stencils applied to the precomputed field `df_b = D_b f`.
#[inline]
pub fn cross_deriv_at(grid: &Grid, df_b: &[f64], lin: usize, axis_a: usize) -> f64 {
    deriv1_at(grid, df_b, lin, axis_a)
}
