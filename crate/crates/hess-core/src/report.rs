//! Artifact emission: CSV field dumps, JSON reports, and the grid-refinement
//! study.
//!
//! All floating-point output uses `{:.16e}` (17 significant digits), which
//! round-trips f64 exactly and makes re-runs byte-comparable.

use crate::error::{Error, Result};
use crate::geometry::grid::{Grid, GridFunction};
use crate::operator;
use crate::problem::{ProblemConfig, ProblemSpec};
use crate::solver::{continuity_solve, SolveReport, SolverConfig};
use std::io::Write;
use std::path::Path;

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// `x1,..,xn,u` rows in grid linear order.
pub fn write_solution_csv(path: &Path, grid: &Grid, u: &GridFunction) -> Result<()> {
    let n = grid.n();
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for d in 0..n {
        write!(out, "x{},", d + 1)?;
    }
    writeln!(out, "u")?;
    let mut x = vec![0.0; n];
    for p in 0..grid.len() {
        grid.coord(p, &mut x);
        for &c in &x {
            write!(out, "{},", fmt(c))?;
        }
        writeln!(out, "{}", fmt(u.values[p]))?;
    }
    out.flush()?;
    Ok(())
}

/// `x1,..,xn,lam1,..,lamn,margin` rows: the transformed-Hessian eigenvalues
/// and cone margin of `u` at every grid point (boundary rows use the
/// one-sided stencils and are diagnostic).
pub fn write_fields_csv(path: &Path, prob: &ProblemSpec, u: &GridFunction) -> Result<()> {
    let grid = &prob.grid;
    let n = grid.n();
    let batch = operator::eval_batch(prob, &u.values, (0..grid.len()).collect());

    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for d in 0..n {
        write!(out, "x{},", d + 1)?;
    }
    for d in 0..n {
        write!(out, "lam{},", d + 1)?;
    }
    writeln!(out, "margin")?;
    let mut x = vec![0.0; n];
    for (slot, &p) in batch.points.iter().enumerate() {
        grid.coord(p, &mut x);
        for &c in &x {
            write!(out, "{},", fmt(c))?;
        }
        let ev = &batch.evals[slot];
        for &l in &ev.lambda_eta {
            write!(out, "{},", fmt(l))?;
        }
        writeln!(out, "{}", fmt(ev.margin))?;
    }
    out.flush()?;
    Ok(())
}

/// One level of a refinement study.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ConvRow {
    pub level: usize,
    /// Points per axis (first axis).
    pub m: usize,
    pub h: f64,
    pub error_inf: f64,
    /// Observed order against the previous level; absent on the first row.
    pub order: Option<f64>,
    pub report: SolveReport,
}

/// `level,m,h,error_inf,order` with the order cell empty on the first row.
pub fn write_errors_csv(path: &Path, rows: &[ConvRow]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "level,m,h,error_inf,order")?;
    for r in rows {
        let order = r.order.map(fmt).unwrap_or_default();
        writeln!(out, "{},{},{},{},{}", r.level, r.m, fmt(r.h), fmt(r.error_inf), order)?;
    }
    out.flush()?;
    Ok(())
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

/// Solve the configured problem at `levels` nested grids (each level doubles
/// the cell count per axis: `m -> 2(m-1)+1`) and measure the sup-norm error
/// against the declared exact solution.
pub fn convergence_study(
    base: &ProblemConfig,
    levels: usize,
    cfg: &SolverConfig,
) -> Result<Vec<ConvRow>> {
    if levels == 0 {
        return Err(Error::argument("refinement study needs at least one level"));
    }
    let mut rows: Vec<ConvRow> = Vec::with_capacity(levels);
    for level in 0..levels {
        let config = base.refined(1 << level);
        let prob = config.build()?;
        if prob.exact.is_none() {
            return Err(Error::argument(
                "refinement study requires a declared exact solution (rhs from_solution or exact_solution = true)",
            ));
        }
        let (u, report) = continuity_solve(&prob, cfg)?;
        let error_inf = u.linf_diff(prob.exact.as_ref().expect("checked above"));
        let h = prob.grid.h_max();
        let order =
            rows.last().map(|prev: &ConvRow| (prev.error_inf / error_inf).ln() / (prev.h / h).ln());
        rows.push(ConvRow {
            level,
            m: prob.grid.points_per_axis()[0],
            h,
            error_inf,
            order,
            report,
        });
    }
    Ok(rows)
}
