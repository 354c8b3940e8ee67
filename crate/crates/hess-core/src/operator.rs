//! Pointwise operator evaluation, residuals, and the exact sparse
//! linearization.
//!
//! At each interior point the discrete tensor
//! `eta = (Delta_h u) g - nabla_h^2 u + chi` is diagonalized against `g`; the
//! equation residual is `sigma_k(lambda(eta))^(1/k) - f(x,u,grad u)^(1/k)`.
//! The derivative matrices come out of first-order eigenvalue perturbation in
//! the g-orthonormal eigenframe:
//!
//! ```text
//!     G^{ij} = sum_m w_m v_m v_m^T,       w = grad of sigma_k^(1/k) at lambda(eta),
//!     F^{ij} = <G, g> g^{ij} - G^{ij},
//! ```
//!
//! where `F^{ij}` is the derivative with respect to `U = nabla^2 u + chi_1`.
//! Because the discrete `eta[u]` is linear in `u`, the row
//! `F^{ij} nabla_ij w - ftilde_p . grad w - ftilde_z w` built from the same
//! stencils is the exact Jacobian of the discrete residual.

use crate::error::{Error, Result};
use crate::geometry::grid::{Grid, GridFunction};
use crate::geometry::tensor::{gen_eig_with_chol, sym_index};
use crate::geometry::{self, MetricField};
use crate::linsolve::CsrMatrix;
use crate::problem::ProblemSpec;
use crate::rhs::{ftilde_chain, Rhs};
use crate::symfun::{self, ConeSpec};
use nalgebra::DMatrix;
use rayon::prelude::*;

/// Operator data at one grid point.
///
/// `lambda_eta` are the generalized eigenvalues of `(eta, g)` in descending
/// order; `lambda_u` the matching eigenvalues of `(U, g)` recovered through
/// the inverse mu-transform. `margin` is `min_{j<=k} sigma_j(lambda_eta)`;
/// the derivative fields are present only when it is positive.
#[derive(Debug, Clone)]
pub struct OperatorEval {
    pub lambda_eta: Vec<f64>,
    pub lambda_u: Vec<f64>,
    pub margin: f64,
    /// g-orthonormal eigenframe of the pencil, columns aligned with `lambda_eta`.
    pub frame: DMatrix<f64>,
    pub admissible: Option<AdmissiblePart>,
}

/// Fields defined only for admissible points.
#[derive(Debug, Clone)]
pub struct AdmissiblePart {
    /// `G = sigma_k(lambda(eta))^(1/k)`.
    pub value: f64,
    /// `dG / d eta_ij` (full-sum convention over i, j).
    pub gij: DMatrix<f64>,
    /// `dG / d U_ij` via the algebraic identity.
    pub fij: DMatrix<f64>,
}

/// Diagonalize `eta` against `g` and assemble the derivative matrices.
pub fn eval_eta_matrix(
    eta: &DMatrix<f64>,
    g: &DMatrix<f64>,
    g_inv: &DMatrix<f64>,
    chol: &nalgebra::Cholesky<f64, nalgebra::Dyn>,
    cone: &ConeSpec,
) -> OperatorEval {
    let n = cone.n();
    let eig = gen_eig_with_chol(eta, chol);
    let lambda_eta = eig.lambda;
    let lambda_u = symfun::mu_inverse(&lambda_eta).expect("n >= 2");
    let margin = {
        let e = symfun::sigma_all(cone.k(), &lambda_eta);
        e[1..=cone.k()].iter().cloned().fold(f64::INFINITY, f64::min)
    };

    let admissible = if margin > 0.0 {
        match symfun::sigma_root_eval(&lambda_eta, cone.k()) {
            Ok((value, weights)) => {
                let mut gij = DMatrix::zeros(n, n);
                for m in 0..n {
                    let v = eig.vectors.column(m);
                    for i in 0..n {
                        for j in 0..n {
                            gij[(i, j)] += weights[m] * v[i] * v[j];
                        }
                    }
                }
                // <G, g> g^{ij} - G^{ij}
                let mut trace = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        trace += gij[(i, j)] * g[(i, j)];
                    }
                }
                let fij = g_inv * trace - &gij;
                Some(AdmissiblePart { value, gij, fij })
            }
            // Margin numerically positive but a partial sigma collapsed:
            // treat as inadmissible rather than panic.
            Err(_) => None,
        }
    } else {
        None
    };

    OperatorEval { lambda_eta, lambda_u, margin, frame: eig.vectors, admissible }
}

/// Evaluate the operator at a single grid point (boundary points use the
/// one-sided stencils and are diagnostic only).
pub fn eval_point(prob: &ProblemSpec, u: &[f64], p: usize) -> Result<OperatorEval> {
    let n = prob.grid.n();
    let hess = geometry::ops::covariant_hessian_at(&prob.grid, &prob.metric, u, p);
    let lap = prob.metric.trace_g(p, &hess);
    let g = prob.metric.g().matrix(p);
    let mut eta = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            eta[(i, j)] = lap * g[(i, j)] - hess[sym_index(n, i, j)] + prob.chi.get(p, i, j);
        }
    }
    let chol = nalgebra::Cholesky::new(g.clone())
        .ok_or_else(|| Error::MetricNotSpd { index: prob.grid.multi_index(p) })?;
    Ok(eval_eta_matrix(&eta, &g, &prob.metric.g_inv().matrix(p), &chol, &prob.cone))
}

/// Batched operator evaluation over a set of points, with the shared
/// derivative fields computed once.
pub struct BatchEval {
    /// Linear indices evaluated, in ascending order.
    pub points: Vec<usize>,
    /// Parallel to `points`.
    pub evals: Vec<OperatorEval>,
    /// First-derivative fields of `u`, one per axis, full grid.
    pub grad_fields: Vec<Vec<f64>>,
    /// Smallest margin over `points`.
    pub min_margin: f64,
}

/// Evaluate the operator at every listed point (typically the interior).
pub fn eval_batch(prob: &ProblemSpec, u: &[f64], points: Vec<usize>) -> BatchEval {
    let n = prob.grid.n();
    let grad_fields = geometry::gradient_fields(&prob.grid, u);
    let hess = geometry::covariant_hessian_field(&prob.grid, &prob.metric, u);

    let evals: Vec<OperatorEval> = points
        .par_iter()
        .map(|&p| {
            let lap = prob.metric.trace_g(p, hess.components(p));
            let g = prob.metric.g().matrix(p);
            let mut eta = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    eta[(i, j)] = lap * g[(i, j)] - hess.get(p, i, j) + prob.chi.get(p, i, j);
                }
            }
            let chol = nalgebra::Cholesky::new(g.clone()).expect("metric SPD was checked at build");
            eval_eta_matrix(&eta, &g, &prob.metric.g_inv().matrix(p), &chol, &prob.cone)
        })
        .collect();

    let min_margin = evals.iter().map(|e| e.margin).fold(f64::INFINITY, f64::min);
    BatchEval { points, evals, grad_fields, min_margin }
}

/// Residual of the discrete problem for a trial state.
pub struct ResidualEval {
    /// Full-grid residual: interior rows `G - ftilde`, boundary rows `u - phi`.
    pub values: GridFunction,
    pub norm_inf: f64,
    pub min_margin: f64,
    /// False when some interior point is inadmissible (values are then
    /// meaningless at those points).
    pub admissible: bool,
    pub worst_point: usize,
    pub batch: BatchEval,
}

/// Residual with full diagnostics; inadmissible states are reported, not
/// errors (the line search probes them deliberately).
pub fn residual_eval(prob: &ProblemSpec, u: &[f64], rhs: &dyn Rhs) -> Result<ResidualEval> {
    let grid = &prob.grid;
    let n = grid.n();
    let batch = eval_batch(prob, u, grid.interior_indices());

    let mut values = GridFunction::zeros(grid);
    for p in grid.boundary_indices() {
        values.values[p] = u[p] - prob.phi.values[p];
    }

    let mut admissible = true;
    let mut worst_point = batch.points.first().copied().unwrap_or(0);
    let mut worst_margin = f64::INFINITY;
    let mut x = vec![0.0; n];
    let mut pvec = vec![0.0; n];
    for (slot, &p) in batch.points.iter().enumerate() {
        let ev = &batch.evals[slot];
        if ev.margin < worst_margin {
            worst_margin = ev.margin;
            worst_point = p;
        }
        match &ev.admissible {
            Some(adm) => {
                grid.coord(p, &mut x);
                for d in 0..n {
                    pvec[d] = batch.grad_fields[d][p];
                }
                let f = rhs.eval(p, &x, u[p], &pvec);
                if !(f > 0.0) {
                    return Err(Error::domain(format!(
                        "right-hand side nonpositive ({f:.3e}) at grid point {:?}",
                        grid.multi_index(p)
                    )));
                }
                let ftilde = f.powf(1.0 / prob.cone.k() as f64);
                values.values[p] = adm.value - ftilde;
            }
            None => {
                admissible = false;
            }
        }
    }

    let norm_inf = if admissible { values.linf() } else { f64::INFINITY };
    Ok(ResidualEval {
        values,
        norm_inf,
        min_margin: batch.min_margin,
        admissible,
        worst_point,
        batch,
    })
}

/// Residual as a grid function; errors if the state is inadmissible anywhere.
pub fn residual(prob: &ProblemSpec, u: &[f64], rhs: &dyn Rhs) -> Result<GridFunction> {
    let ev = residual_eval(prob, u, rhs)?;
    if !ev.admissible {
        return Err(Error::Inadmissible {
            index: prob.grid.multi_index(ev.worst_point),
            margin: ev.min_margin,
        });
    }
    Ok(ev.values)
}

/// The assembled Newton system for the interior unknowns.
pub struct LinearizedSystem {
    pub matrix: CsrMatrix,
    /// Linear grid index of each interior row/column.
    pub interior: Vec<usize>,
    /// Position of each grid point in `interior` (usize::MAX for boundary).
    pub slot_of: Vec<usize>,
}

/// Assemble the interior stencil matrix of the linear operator
///
/// ```text
///     L w = A^{ij} (d_i d_j w - Gamma^k_ij d_k w) - c_k d_k w - c0 w,
/// ```
///
/// with per-row coefficients `(A, c, c0)` supplied by the callback and the
/// same central stencils the residual uses. Boundary columns carry zero
/// increments (Dirichlet rows held fixed) and are dropped.
pub(crate) fn assemble_interior_matrix(
    grid: &Grid,
    metric: &MetricField,
    interior: &[usize],
    slot_of: &[usize],
    mut row_coeffs: impl FnMut(usize, usize) -> Result<(DMatrix<f64>, Vec<f64>, f64)>,
) -> Result<CsrMatrix> {
    let n = grid.n();
    let h = grid.spacing().to_vec();
    let strides = grid.strides().to_vec();

    struct RowBuf {
        cols: Vec<usize>,
        vals: Vec<f64>,
    }

    let mut rows: Vec<RowBuf> = Vec::with_capacity(interior.len());
    for (slot, &p) in interior.iter().enumerate() {
        let (a_mat, c_vec, c0) = row_coeffs(slot, p)?;

        let mut cols: Vec<usize> = Vec::with_capacity(19);
        let mut vals: Vec<f64> = Vec::with_capacity(19);
        let push =
            |slot_of: &[usize], q: usize, v: f64, cols: &mut Vec<usize>, vals: &mut Vec<f64>| {
                if slot_of[q] != usize::MAX {
                    cols.push(slot_of[q]);
                    vals.push(v);
                }
            };

        let mut center = 0.0;
        for a in 0..n {
            let s = strides[a];
            let w = a_mat[(a, a)] / (h[a] * h[a]);
            push(slot_of, p + s, w, &mut cols, &mut vals);
            push(slot_of, p - s, w, &mut cols, &mut vals);
            center += -2.0 * w;
        }
        for a in 0..n {
            for b in (a + 1)..n {
                let c = 2.0 * a_mat[(a, b)] / (4.0 * h[a] * h[b]);
                let (sa, sb) = (strides[a], strides[b]);
                push(slot_of, p + sa + sb, c, &mut cols, &mut vals);
                push(slot_of, p - sa - sb, c, &mut cols, &mut vals);
                push(slot_of, p + sa - sb, -c, &mut cols, &mut vals);
                push(slot_of, p - sa + sb, -c, &mut cols, &mut vals);
            }
        }
        for k in 0..n {
            let mut drift = 0.0;
            for i in 0..n {
                for j in 0..n {
                    drift -= a_mat[(i, j)] * metric.gamma(p, k, i, j);
                }
            }
            drift -= c_vec[k];
            let w = drift / (2.0 * h[k]);
            push(slot_of, p + strides[k], w, &mut cols, &mut vals);
            push(slot_of, p - strides[k], -w, &mut cols, &mut vals);
        }
        center -= c0;
        cols.push(slot);
        vals.push(center);

        // Merge duplicate columns (first-order and axis terms share columns).
        let mut order: Vec<usize> = (0..cols.len()).collect();
        order.sort_by_key(|&i| cols[i]);
        let mut mcols: Vec<usize> = Vec::with_capacity(cols.len());
        let mut mvals: Vec<f64> = Vec::with_capacity(vals.len());
        for &i in &order {
            if let Some(last) = mcols.last() {
                if *last == cols[i] {
                    *mvals.last_mut().unwrap() += vals[i];
                    continue;
                }
            }
            mcols.push(cols[i]);
            mvals.push(vals[i]);
        }
        rows.push(RowBuf { cols: mcols, vals: mvals });
    }

    Ok(CsrMatrix::from_rows(
        interior.len(),
        rows.iter().map(|r| (r.cols.as_slice(), r.vals.as_slice())),
    ))
}

/// Exact Jacobian of the interior residual with respect to interior values
/// (boundary increments vanish: Dirichlet rows are held fixed).
///
/// Row `p`: `F^{ij} (d_i d_j - Gamma^k_ij d_k) - ftilde_{p_k} d_k - ftilde_z`,
/// discretized with the same interior stencils as the residual.
pub fn linearize(
    prob: &ProblemSpec,
    u: &[f64],
    rhs: &dyn Rhs,
    batch: &BatchEval,
) -> Result<LinearizedSystem> {
    let grid = &prob.grid;
    let n = grid.n();

    let interior = batch.points.clone();
    let mut slot_of = vec![usize::MAX; grid.len()];
    for (slot, &p) in interior.iter().enumerate() {
        slot_of[p] = slot;
    }

    let mut x = vec![0.0; n];
    let mut pvec = vec![0.0; n];
    let matrix = assemble_interior_matrix(grid, &prob.metric, &interior, &slot_of, |slot, p| {
        let ev = &batch.evals[slot];
        let adm = ev
            .admissible
            .as_ref()
            .ok_or_else(|| Error::Inadmissible { index: grid.multi_index(p), margin: ev.margin })?;
        grid.coord(p, &mut x);
        for d in 0..n {
            pvec[d] = batch.grad_fields[d][p];
        }
        let parts = rhs.partials(p, &x, u[p], &pvec);
        let (_ft, ftz, ftp) = ftilde_chain(&parts, prob.cone.k())?;
        Ok((adm.fij.clone(), ftp, ftz))
    })?;
    Ok(LinearizedSystem { matrix, interior, slot_of })
}

/// Result of the subsolution inspection.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SubsolutionReport {
    /// True when `sigma_k(lambda(eta[usub])) >= f(x, usub, grad usub)` at
    /// every interior point.
    pub ok: bool,
    pub min_slack: f64,
    pub worst_point: Vec<usize>,
    /// Largest uniform shift with `lambda(eta[usub] - eps g)` still in the
    /// cone everywhere (1e-6 resolution).
    pub eps0: f64,
}

/// Check the strict-subsolution inequality and measure the interior cone
/// slack of `usub`. Errors if `usub` is inadmissible somewhere.
pub fn check_subsolution(prob: &ProblemSpec) -> Result<SubsolutionReport> {
    let grid = &prob.grid;
    let n = grid.n();
    let u = &prob.usub.values;
    let batch = eval_batch(prob, u, grid.interior_indices());

    let mut min_slack = f64::INFINITY;
    let mut worst = batch.points[0];
    let mut x = vec![0.0; n];
    let mut pvec = vec![0.0; n];
    for (slot, &p) in batch.points.iter().enumerate() {
        let ev = &batch.evals[slot];
        if ev.admissible.is_none() {
            return Err(Error::Inadmissible { index: grid.multi_index(p), margin: ev.margin });
        }
        let sk = symfun::sigma(prob.cone.k(), &ev.lambda_eta)?;
        grid.coord(p, &mut x);
        for d in 0..n {
            pvec[d] = batch.grad_fields[d][p];
        }
        let f = prob.rhs.eval(p, &x, u[p], &pvec);
        let slack = sk - f;
        if slack < min_slack {
            min_slack = slack;
            worst = p;
        }
    }

    // eps0: lambda(eta - eps g) = lambda(eta) - eps, so the search only needs
    // the stored eigenvalues. Doubling scan for a bracket, then bisection.
    let pred = |eps: f64| -> bool {
        batch.evals.iter().all(|ev| {
            let shifted: Vec<f64> = ev.lambda_eta.iter().map(|&l| l - eps).collect();
            symfun::in_gamma_k(&shifted, &prob.cone, 0.0)
        })
    };
    let eps0 = if !pred(f64::MIN_POSITIVE) {
        0.0
    } else {
        let mut lo;
        let mut hi;
        if pred(1.0) {
            lo = 1.0;
            hi = 2.0;
            while pred(hi) && hi < 1e12 {
                lo = hi;
                hi *= 2.0;
            }
        } else {
            let mut j = 1;
            while !pred(2.0_f64.powi(-j)) && j < 60 {
                j += 1;
            }
            if j == 60 {
                lo = 0.0;
                hi = 2.0_f64.powi(-59);
            } else {
                lo = 2.0_f64.powi(-j);
                hi = 2.0_f64.powi(-(j - 1));
            }
        }
        while hi - lo > 1e-6 {
            let mid = 0.5 * (lo + hi);
            if pred(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };

    Ok(SubsolutionReport {
        ok: min_slack >= 0.0,
        min_slack,
        worst_point: grid.multi_index(worst),
        eps0,
    })
}

/// Convenience: `sigma_k(lambda(eta[u]))` at the interior points, used to
/// freeze the homotopy base. Errors on inadmissible points.
pub fn sigma_k_field(prob: &ProblemSpec, u: &[f64]) -> Result<GridFunction> {
    let grid = &prob.grid;
    let batch = eval_batch(prob, u, grid.interior_indices());
    let mut out = GridFunction::zeros(grid);
    for (slot, &p) in batch.points.iter().enumerate() {
        let ev = &batch.evals[slot];
        if ev.admissible.is_none() {
            return Err(Error::Inadmissible { index: grid.multi_index(p), margin: ev.margin });
        }
        out.values[p] = symfun::sigma(prob.cone.k(), &ev.lambda_eta)?;
    }
    Ok(out)
}
