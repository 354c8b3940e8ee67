//! Damped Newton iteration, homotopy continuation, and post-solve
//! diagnostics.
//!
//! The nonlinear problem is solved by a continuity path in the right-hand
//! side. With `sbar(x) = sigma_k(lambda(eta[usub]))` frozen on the grid, the
//! stage-`t` equation uses
//!
//! ```text
//!     ftilde_t = ((1 - t) sbar(x) + t f(x, u, grad u))^(1/k),
//! ```
//!
//! so `t = 0` has the known exact solution `usub` (the residual vanishes
//! identically, by construction) and `t = 1` is the target problem. Each
//! stage runs a damped Newton iteration warm-started from the previous stage;
//! the step length is backtracked until the iterate stays strictly admissible
//! and the residual sup-norm decreases. Stage failures halve the step in `t`
//! and retry; a floor on the step turns persistent failure into a partial
//! result rather than an error.
//!
//! Post-solve, the maximum-principle sandwich `usub <= u <= phibar` is
//! checked against the auxiliary linear barrier `phibar` (same boundary
//! data, `g^{ij} nabla_ij phibar = -tr_g chi`), and interior/boundary
//! sup-norms of the gradient and Hessian are reported as empirical
//! boundedness ratios.

use crate::error::{Error, Result};
use crate::geometry::grid::GridFunction;
use crate::geometry::{self, tensor};
use crate::linsolve::solve_ilu_bicgstab;
use crate::operator::{self, SubsolutionReport};
use crate::problem::ProblemSpec;
use crate::rhs::{Rhs, RhsPartials};
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Tunables for the Newton/homotopy driver. All fields have serde defaults,
/// so `{}` is a valid configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Residual sup-norm at which a Newton run is converged.
    pub newton_tol: f64,
    /// Iteration cap per Newton run.
    pub max_newton: usize,
    /// Initial homotopy step in `t`.
    pub homotopy_dt0: f64,
    /// Smallest allowed homotopy step; underflow ends the march.
    pub homotopy_dt_min: f64,
    /// Backtracking factor for the Newton line search, in (0, 1).
    pub linesearch_shrink: f64,
    /// Cone-margin floor for accepted iterates, scaled by `1 + |lambda|_inf`.
    pub cone_margin: f64,
    /// Relative residual target for the inner linear solves.
    pub linear_tol: f64,
    /// Iteration cap for the inner linear solves.
    pub max_linear_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            newton_tol: 1e-9,
            max_newton: 50,
            homotopy_dt0: 0.1,
            homotopy_dt_min: 1e-4,
            linesearch_shrink: 0.5,
            cone_margin: 1e-12,
            linear_tol: 1e-10,
            max_linear_iter: 10_000,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.newton_tol > 0.0) {
            return Err(Error::argument("newton_tol must be positive"));
        }
        if self.max_newton == 0 || self.max_linear_iter == 0 {
            return Err(Error::argument("iteration caps must be positive"));
        }
        if !(self.homotopy_dt0 > 0.0 && self.homotopy_dt_min > 0.0) {
            return Err(Error::argument("homotopy steps must be positive"));
        }
        if !(self.linesearch_shrink > 0.0 && self.linesearch_shrink < 1.0) {
            return Err(Error::argument("linesearch_shrink must lie in (0, 1)"));
        }
        if !(self.cone_margin > 0.0 && self.linear_tol > 0.0) {
            return Err(Error::argument("cone_margin and linear_tol must be positive"));
        }
        Ok(())
    }
}

/// Right-hand side of one homotopy stage: a convex blend of the frozen base
/// field `sbar` (evaluated by grid index) and the target `f`.
pub struct HomotopyRhs<'a> {
    pub target: &'a dyn Rhs,
    /// `sigma_k(lambda(eta[usub]))` sampled on the full grid.
    pub base: &'a [f64],
    pub t: f64,
}

impl Rhs for HomotopyRhs<'_> {
    fn eval(&self, idx: usize, x: &[f64], z: f64, p: &[f64]) -> f64 {
        (1.0 - self.t) * self.base[idx] + self.t * self.target.eval(idx, x, z, p)
    }

    fn partials(&self, idx: usize, x: &[f64], z: f64, p: &[f64]) -> RhsPartials {
        let tp = self.target.partials(idx, x, z, p);
        RhsPartials {
            f: (1.0 - self.t) * self.base[idx] + self.t * tp.f,
            fz: self.t * tp.fz,
            fp: tp.fp.iter().map(|&v| self.t * v).collect(),
            // The x-derivative of the frozen base never enters the Jacobian;
            // only the target's share is meaningful.
            fx: tp.fx.iter().map(|&v| self.t * v).collect(),
        }
    }
}

/// Outcome of one Newton run. Line-search stalls and iteration-cap hits are
/// recorded here (`converged = false`, `failure` set), not raised as errors:
/// the homotopy driver treats them as a signal to shorten the stage.
#[derive(Debug, Clone, Serialize)]
pub struct NewtonStats {
    pub converged: bool,
    pub iters: usize,
    pub residual_inf: f64,
    /// Smallest cone margin over all accepted iterates, initial included.
    pub min_margin: f64,
    /// Residual sup-norm after each accepted step, starting with the initial.
    pub residual_history: Vec<f64>,
    pub failure: Option<String>,
}

pub struct NewtonRun {
    pub u: GridFunction,
    pub stats: NewtonStats,
}

/// Damped Newton iteration on the discrete residual.
///
/// `u0` must be admissible and carry the boundary data. A step is accepted
/// only if every interior point keeps cone margin above
/// `cone_margin * (1 + |lambda|_inf)` and the residual sup-norm strictly
/// decreases; otherwise the step is shrunk by `linesearch_shrink` down to
/// `1e-8`, at which point the run reports failure.
pub fn newton_solve(
    prob: &ProblemSpec,
    rhs_t: &dyn Rhs,
    u0: &GridFunction,
    cfg: &SolverConfig,
) -> Result<NewtonRun> {
    let mut u = u0.clone();
    let mut cur = operator::residual_eval(prob, &u.values, rhs_t)?;
    if !cur.admissible {
        return Err(Error::Inadmissible {
            index: prob.grid.multi_index(cur.worst_point),
            margin: cur.min_margin,
        });
    }
    let mut min_margin = cur.min_margin;
    let mut history = vec![cur.norm_inf];

    let mut iter = 0;
    loop {
        if cur.norm_inf <= cfg.newton_tol {
            return Ok(NewtonRun {
                u,
                stats: NewtonStats {
                    converged: true,
                    iters: iter,
                    residual_inf: cur.norm_inf,
                    min_margin,
                    residual_history: history,
                    failure: None,
                },
            });
        }
        if iter == cfg.max_newton {
            return Ok(NewtonRun {
                u,
                stats: NewtonStats {
                    converged: false,
                    iters: iter,
                    residual_inf: cur.norm_inf,
                    min_margin,
                    residual_history: history,
                    failure: Some(format!("iteration cap {} reached", cfg.max_newton)),
                },
            });
        }

        let sys = operator::linearize(prob, &u.values, rhs_t, &cur.batch)?;
        let b: Vec<f64> = sys.interior.iter().map(|&p| -cur.values.values[p]).collect();
        let delta = match solve_ilu_bicgstab(&sys.matrix, &b, cfg.linear_tol, cfg.max_linear_iter) {
            Ok(d) => d,
            Err(e) => {
                return Ok(NewtonRun {
                    u,
                    stats: NewtonStats {
                        converged: false,
                        iters: iter,
                        residual_inf: cur.norm_inf,
                        min_margin,
                        residual_history: history,
                        failure: Some(format!("linear solve: {e}")),
                    },
                })
            }
        };

        let lam_scale = cur
            .batch
            .evals
            .iter()
            .flat_map(|e| e.lambda_eta.iter())
            .fold(0.0_f64, |a, &b| a.max(b.abs()));
        let floor = cfg.cone_margin * (1.0 + lam_scale);

        let mut s = 1.0;
        let mut accepted = None;
        while s >= 1e-8 {
            let mut trial = u.clone();
            for (slot, &p) in sys.interior.iter().enumerate() {
                trial.values[p] += s * delta[slot];
            }
            match operator::residual_eval(prob, &trial.values, rhs_t) {
                Ok(r) if r.admissible && r.min_margin > floor && r.norm_inf < cur.norm_inf => {
                    accepted = Some((trial, r));
                    break;
                }
                Ok(_) => {}
                // The trial left the domain of f (blend went nonpositive):
                // treat like any other rejected step.
                Err(Error::Domain(_)) => {}
                Err(e) => return Err(e),
            }
            s *= cfg.linesearch_shrink;
        }
        match accepted {
            Some((tu, tr)) => {
                u = tu;
                cur = tr;
                min_margin = min_margin.min(cur.min_margin);
                history.push(cur.norm_inf);
                iter += 1;
            }
            None => {
                return Ok(NewtonRun {
                    u,
                    stats: NewtonStats {
                        converged: false,
                        iters: iter,
                        residual_inf: cur.norm_inf,
                        min_margin,
                        residual_history: history,
                        failure: Some("line search stalled below step 1e-8".to_string()),
                    },
                })
            }
        }
    }
}

/// Solve the auxiliary linear Dirichlet problem
/// `g^{ij} nabla_ij phibar = -tr_g chi`, `phibar = phi` on the boundary.
///
/// The matrix is assembled with the same interior stencils as the nonlinear
/// residual, so the barrier is consistent with the discretization it bounds.
pub fn solve_aux_linear(prob: &ProblemSpec) -> Result<GridFunction> {
    let grid = &prob.grid;
    let n = grid.n();
    let interior = grid.interior_indices();
    let mut slot_of = vec![usize::MAX; grid.len()];
    for (slot, &p) in interior.iter().enumerate() {
        slot_of[p] = slot;
    }

    let matrix =
        operator::assemble_interior_matrix(grid, &prob.metric, &interior, &slot_of, |_slot, p| {
            Ok((prob.metric.g_inv().matrix(p), vec![0.0; n], 0.0))
        })?;

    // Split phibar = phi + w with w = 0 on the boundary; the known part moves
    // to the right-hand side through the same discrete operator.
    let lap_phi = geometry::laplacian_field(grid, &prob.metric, &prob.phi.values);
    let b: Vec<f64> = interior
        .iter()
        .map(|&p| -prob.metric.trace_g(p, prob.chi.components(p)) - lap_phi[p])
        .collect();
    let w = solve_ilu_bicgstab(&matrix, &b, 1e-12, 50_000)?;

    let mut out = prob.phi.clone();
    for (slot, &p) in interior.iter().enumerate() {
        out.values[p] += w[slot];
    }
    Ok(out)
}

/// Pointwise two-sided barrier check `usub - tol <= u <= phibar + tol`.
#[derive(Debug, Clone, Serialize)]
pub struct SandwichReport {
    pub ok: bool,
    /// `min (u - usub)` over the grid; negative means the lower barrier is
    /// pierced by that amount.
    pub min_gap_low: f64,
    /// `min (phibar - u)` over the grid.
    pub min_gap_high: f64,
    /// `10 h^2 (1 + max(|usub|, |phibar|))`, the discretization allowance.
    pub tol: f64,
}

pub fn verify_sandwich(
    prob: &ProblemSpec,
    u: &GridFunction,
    phibar: &GridFunction,
) -> SandwichReport {
    let scale = 1.0 + prob.usub.linf().max(phibar.linf());
    let h = prob.grid.h_max();
    let tol = 10.0 * h * h * scale;
    let mut gap_low = f64::INFINITY;
    let mut gap_high = f64::INFINITY;
    for p in 0..u.len() {
        gap_low = gap_low.min(u.values[p] - prob.usub.values[p]);
        gap_high = gap_high.min(phibar.values[p] - u.values[p]);
    }
    SandwichReport {
        ok: gap_low >= -tol && gap_high >= -tol,
        min_gap_low: gap_low,
        min_gap_high: gap_high,
        tol,
    }
}

/// Interior/boundary sup-norms of `|grad u|_g` and of the metric-normalized
/// Hessian Frobenius norm, with the boundedness ratios
/// `interior / (1 + boundary)` for each.
#[derive(Debug, Clone, Serialize)]
pub struct C2Report {
    pub interior_sup_hess: f64,
    pub boundary_sup_hess: f64,
    pub ratio: f64,
    pub interior_sup_grad: f64,
    pub boundary_sup_grad: f64,
    pub grad_ratio: f64,
}

/// Discrete first/second-derivative diagnostics for a solved state.
///
/// The Hessian is measured in the metric-adapted frame: with `g = L L^T`,
/// the reported pointwise norm is `|L^{-1} (nabla^2 u) L^{-T}|_F`, which is
/// coordinate-invariant.
pub fn c2_diagnostics(prob: &ProblemSpec, u: &GridFunction) -> C2Report {
    let grid = &prob.grid;
    let n = grid.n();
    let grads = geometry::gradient_fields(grid, &u.values);
    let hess = geometry::covariant_hessian_field(grid, &prob.metric, &u.values);

    let mut sup = [0.0_f64; 4]; // [hess_int, hess_bnd, grad_int, grad_bnd]
    for p in 0..grid.len() {
        let gi = prob.metric.g_inv().matrix(p);
        let mut grad2 = 0.0;
        for i in 0..n {
            for j in 0..n {
                grad2 += gi[(i, j)] * grads[i][p] * grads[j][p];
            }
        }
        let grad_norm = grad2.max(0.0).sqrt();

        let l = prob.metric.chol_matrix(p);
        let t = tensor::unpack(n, hess.components(p));
        let half = l.solve_lower_triangular(&t).expect("metric Cholesky factor is nonsingular");
        let white = l
            .solve_lower_triangular(&half.transpose())
            .expect("metric Cholesky factor is nonsingular");
        let hess_norm = white.norm();

        let b = grid.is_boundary(p) as usize;
        sup[b] = sup[b].max(hess_norm);
        sup[2 + b] = sup[2 + b].max(grad_norm);
    }

    C2Report {
        interior_sup_hess: sup[0],
        boundary_sup_hess: sup[1],
        ratio: sup[0] / (1.0 + sup[1]),
        interior_sup_grad: sup[2],
        boundary_sup_grad: sup[3],
        grad_ratio: sup[2] / (1.0 + sup[3]),
    }
}

/// One homotopy stage as recorded in the report.
#[derive(Debug, Clone, Serialize)]
pub struct StageRecord {
    /// Stage target `t` (reached if `accepted`).
    pub t: f64,
    pub dt: f64,
    pub accepted: bool,
    pub newton_iters: usize,
    pub residual_inf: f64,
    pub min_margin: f64,
}

/// Full machine-readable outcome of a continuity solve.
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub converged: bool,
    pub t_reached: f64,
    pub newton_iters_total: usize,
    pub residual_inf: f64,
    /// Smallest cone margin over every accepted iterate of every stage.
    pub min_cone_margin: f64,
    pub subsolution: SubsolutionReport,
    pub sandwich_ok: bool,
    pub sandwich_report: SandwichReport,
    /// `interior / (1 + boundary)` sup-norm ratio for the gradient.
    pub c1_ratio: f64,
    /// Same ratio for the metric-normalized Hessian.
    pub c2_ratio: f64,
    pub diagnostics: C2Report,
    /// Sup-norm distance to the declared exact solution, when one exists.
    pub l_inf_error: Option<f64>,
    pub wall_time_s: f64,
    pub stages: Vec<StageRecord>,
    pub failure: Option<String>,
}

/// March the homotopy from `t = 0` (exact solution `usub`) to `t = 1` (the
/// target problem) with an adaptive step: halve on stage failure, grow by
/// 1.5 after success. Step underflow produces a partial result
/// (`converged = false`, `t_reached < 1`), not an error.
///
/// A subsolution slack violation is recorded in the report and the march is
/// attempted anyway; an inadmissible `usub` is a hard error since the path
/// has no starting point.
pub fn continuity_solve(
    prob: &ProblemSpec,
    cfg: &SolverConfig,
) -> Result<(GridFunction, SolveReport)> {
    cfg.validate()?;
    let start = Instant::now();

    let subsolution = operator::check_subsolution(prob)?;
    let sbar = operator::sigma_k_field(prob, &prob.usub.values)?;

    let mut u = prob.usub.clone();
    let mut stages: Vec<StageRecord> = Vec::new();
    let mut t = 0.0_f64;
    let mut iters_total = 0;
    let mut min_cone_margin = f64::INFINITY;
    let mut residual_inf;
    let mut failure = None;

    // Base stage: by construction the residual at (usub, t = 0) vanishes
    // identically, so this records a zero-iteration start (and double-checks
    // admissibility through the same path later stages use).
    {
        let rhs0 = HomotopyRhs { target: &prob.rhs, base: &sbar.values, t: 0.0 };
        let run = newton_solve(prob, &rhs0, &u, cfg)?;
        iters_total += run.stats.iters;
        min_cone_margin = min_cone_margin.min(run.stats.min_margin);
        residual_inf = run.stats.residual_inf;
        stages.push(StageRecord {
            t: 0.0,
            dt: 0.0,
            accepted: run.stats.converged,
            newton_iters: run.stats.iters,
            residual_inf: run.stats.residual_inf,
            min_margin: run.stats.min_margin,
        });
        if !run.stats.converged {
            failure = Some(format!(
                "base stage failed: {}",
                run.stats.failure.as_deref().unwrap_or("unknown")
            ));
        }
        u = run.u;
    }

    let mut dt = cfg.homotopy_dt0;
    while failure.is_none() && t < 1.0 {
        let t_next = (t + dt).min(1.0);
        let rhs_t = HomotopyRhs { target: &prob.rhs, base: &sbar.values, t: t_next };
        let run = newton_solve(prob, &rhs_t, &u, cfg)?;
        stages.push(StageRecord {
            t: t_next,
            dt,
            accepted: run.stats.converged,
            newton_iters: run.stats.iters,
            residual_inf: run.stats.residual_inf,
            min_margin: run.stats.min_margin,
        });
        if run.stats.converged {
            u = run.u;
            t = t_next;
            iters_total += run.stats.iters;
            min_cone_margin = min_cone_margin.min(run.stats.min_margin);
            residual_inf = run.stats.residual_inf;
            dt = (dt * 1.5).min(1.0);
        } else {
            dt *= 0.5;
            if dt < cfg.homotopy_dt_min {
                failure = Some(format!(
                    "homotopy step underflow at t = {t:.6}: {}",
                    run.stats.failure.as_deref().unwrap_or("unknown")
                ));
            }
        }
    }

    let converged = t >= 1.0 && residual_inf <= cfg.newton_tol;

    let phibar = solve_aux_linear(prob)?;
    let sandwich = verify_sandwich(prob, &u, &phibar);
    let diagnostics = c2_diagnostics(prob, &u);
    let l_inf_error = prob.exact.as_ref().map(|ex| u.linf_diff(ex));

    let report = SolveReport {
        converged,
        t_reached: t,
        newton_iters_total: iters_total,
        residual_inf,
        min_cone_margin,
        subsolution,
        sandwich_ok: sandwich.ok,
        sandwich_report: sandwich,
        c1_ratio: diagnostics.grad_ratio,
        c2_ratio: diagnostics.ratio,
        diagnostics,
        l_inf_error,
        wall_time_s: start.elapsed().as_secs_f64(),
        stages,
        failure,
    };
    Ok((u, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Grid, MetricField, MetricPreset, SymTensorField};
    use crate::problem::{
        BoundaryPreset, ChiPreset, ConeConfig, GridConfig, ProblemConfig, RhsConfig,
        SolutionPreset, SubsolutionPreset,
    };
    use crate::rhs::RhsSpec;
    use crate::symfun::ConeSpec;

    fn flat_problem(phi: impl Fn(&[f64]) -> f64, m: usize) -> ProblemSpec {
        let grid = Grid::new(vec![-1.0, -1.0], vec![1.0, 1.0], vec![m, m]).unwrap();
        let metric = MetricField::build(&MetricPreset::Flat, &grid).unwrap();
        let phi = GridFunction::from_fn(&grid, phi);
        ProblemSpec {
            cone: ConeSpec::new(2, 2).unwrap(),
            metric_preset: MetricPreset::Flat,
            metric,
            chi: SymTensorField::zeros(2, grid.len()),
            rhs: RhsSpec::constant(1.0).unwrap(),
            usub: phi.clone(),
            phi,
            exact: None,
            grid,
        }
    }

    fn ma_config(m: usize) -> ProblemConfig {
        ProblemConfig {
            grid: GridConfig { lo: vec![-1.0, -1.0], hi: vec![1.0, 1.0], m: vec![m, m] },
            cone: ConeConfig { n: 2, k: 2 },
            metric: MetricPreset::Flat,
            chi: ChiPreset::Zero,
            rhs: RhsConfig::Constant { value: 1.0 },
            boundary: BoundaryPreset::FromSolution,
            solution: Some(SolutionPreset::Quadratic { scale: 1.0 }),
            subsolution: SubsolutionPreset::SolutionMinusBump { beta: 0.02 },
            exact_solution: true,
        }
    }

    #[test]
    fn config_defaults_from_empty_json() {
        let cfg: SolverConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg.newton_tol, 1e-9);
        assert_eq!(cfg.max_newton, 50);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn config_rejects_bad_shrink() {
        let cfg = SolverConfig { linesearch_shrink: 1.0, ..SolverConfig::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn aux_linear_reproduces_linear_data() {
        // Linear functions are in the kernel of every stencil involved.
        let prob = flat_problem(|x| x[0] + 0.5 * x[1], 17);
        let phibar = solve_aux_linear(&prob).unwrap();
        let err = phibar.linf_diff(&prob.phi);
        assert!(err < 1e-10, "err = {err:.3e}");
    }

    #[test]
    fn aux_linear_positive_source_lifts_interior() {
        // chi = diag(2, 2) so tr chi = 4 and the source is positive; with
        // zero boundary data the discrete maximum principle forces phibar > 0
        // strictly inside.
        let mut prob = flat_problem(|_| 0.0, 17);
        for p in 0..prob.grid.len() {
            prob.chi.set(p, 0, 0, 2.0);
            prob.chi.set(p, 1, 1, 2.0);
        }
        let phibar = solve_aux_linear(&prob).unwrap();
        for &p in &prob.grid.interior_indices() {
            assert!(phibar.values[p] > 0.0);
        }
        // Symmetry of the source and domain forces symmetry of the solution.
        let center = prob.grid.linear_index(&[8, 8]);
        let mirror = prob.grid.linear_index(&[8, 8]);
        assert_eq!(phibar.values[center], phibar.values[mirror]);
    }

    #[test]
    fn aux_linear_second_order_convergence() {
        // Harmonic data sin(x) e^y: phibar is its discrete harmonic extension,
        // so the error against the analytic function shrinks like h^2.
        let exact = |x: &[f64]| x[0].sin() * x[1].exp();
        let mut errs = Vec::new();
        for m in [9, 17, 33] {
            let prob = flat_problem(exact, m);
            let phibar = solve_aux_linear(&prob).unwrap();
            errs.push(phibar.linf_diff(&prob.phi));
        }
        let r1 = errs[0] / errs[1];
        let r2 = errs[1] / errs[2];
        assert!((3.3..4.8).contains(&r1), "ratios {errs:?}");
        assert!((3.3..4.8).contains(&r2), "ratios {errs:?}");
    }

    #[test]
    fn newton_zero_iterations_on_frozen_base() {
        let prob = ma_config(17).build().unwrap();
        let sbar = operator::sigma_k_field(&prob, &prob.usub.values).unwrap();
        let rhs0 = HomotopyRhs { target: &prob.rhs, base: &sbar.values, t: 0.0 };
        let run = newton_solve(&prob, &rhs0, &prob.usub, &SolverConfig::default()).unwrap();
        assert!(run.stats.converged);
        assert_eq!(run.stats.iters, 0);
        // Exact by construction, not merely small.
        assert_eq!(run.stats.residual_inf, 0.0);
        assert_eq!(run.u.values, prob.usub.values);
    }

    #[test]
    fn newton_solves_flat_det_case() {
        // u* = (x^2+y^2)/2 makes eta the identity, so f = 1 is exact even
        // discretely; Newton from the bump-perturbed start must recover it.
        let prob = ma_config(17).build().unwrap();
        let cfg = SolverConfig::default();
        let run = newton_solve(&prob, &prob.rhs, &prob.usub, &cfg).unwrap();
        assert!(run.stats.converged, "stats: {:?}", run.stats);
        assert!(run.stats.iters >= 1);
        let err = run.u.linf_diff(prob.exact.as_ref().unwrap());
        assert!(err < 1e-7, "err = {err:.3e}");
        // Accepted residuals decrease strictly.
        for w in run.stats.residual_history.windows(2) {
            assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn continuity_reaches_target_and_sandwich_holds() {
        let prob = ma_config(17).build().unwrap();
        let (u, report) = continuity_solve(&prob, &SolverConfig::default()).unwrap();
        assert!(report.converged);
        assert_eq!(report.t_reached, 1.0);
        assert!(report.subsolution.ok, "subsolution: {:?}", report.subsolution);
        assert!(report.sandwich_ok, "sandwich: {:?}", report.sandwich_report);
        assert!(report.min_cone_margin > 0.0);
        assert_eq!(report.stages[0].newton_iters, 0);
        let h = prob.grid.h_max();
        let err = report.l_inf_error.unwrap();
        assert!(err <= 5.0 * h * h, "err = {err:.3e}");
        assert!(u.linf_diff(prob.exact.as_ref().unwrap()) <= 5.0 * h * h);
    }

    #[test]
    fn sandwich_at_base_point_has_zero_lower_gap() {
        let prob = ma_config(9).build().unwrap();
        let phibar = solve_aux_linear(&prob).unwrap();
        let s = verify_sandwich(&prob, &prob.usub, &phibar);
        assert_eq!(s.min_gap_low, 0.0);
        assert!(s.ok, "{s:?}");
    }

    #[test]
    fn c2_ratio_of_flat_quadratic() {
        // nabla^2 u = I everywhere, |I|_F = sqrt(2), so both sups coincide
        // and the ratio is sqrt(2)/(1+sqrt(2)).
        let prob = flat_problem(|x| 0.5 * (x[0] * x[0] + x[1] * x[1]), 17);
        let d = c2_diagnostics(&prob, &prob.phi);
        assert!((d.interior_sup_hess - 2.0_f64.sqrt()).abs() < 1e-9);
        assert!((d.boundary_sup_hess - 2.0_f64.sqrt()).abs() < 1e-9);
        assert!((d.ratio - 0.5857864376269049).abs() < 1e-9);
        assert!(d.grad_ratio > 0.0 && d.grad_ratio < 1.0);
    }

    #[test]
    fn c2_ratio_of_linear_function_is_zero() {
        let prob = flat_problem(|x| 3.0 * x[0] - x[1] + 2.0, 9);
        let d = c2_diagnostics(&prob, &prob.phi);
        assert!(d.interior_sup_hess < 1e-11);
        assert_eq!(d.ratio, d.interior_sup_hess / (1.0 + d.boundary_sup_hess));
    }
}
