//! Sparse linear algebra for the Newton systems: CSR storage, ILU(0), and
//! right-preconditioned BiCGSTAB.
//!
//! The Jacobians here are nonsymmetric (Christoffel drift and gradient terms)
//! but elliptic-dominated, which is the textbook habitat of ILU(0)+BiCGSTAB.
//! Everything is sequential and allocation-reusing, so solves are bitwise
//! deterministic run to run.

use crate::error::{Error, Result};

/// Compressed sparse row matrix with sorted column indices per row.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl CsrMatrix {
    /// Build from per-row (columns, values) slices; columns must be sorted
    /// and duplicate-free within each row.
    pub fn from_rows<'a>(n: usize, rows: impl Iterator<Item = (&'a [usize], &'a [f64])>) -> Self {
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for (c, v) in rows {
            debug_assert_eq!(c.len(), v.len());
            debug_assert!(c.windows(2).all(|w| w[0] < w[1]), "columns must be sorted");
            cols.extend_from_slice(c);
            vals.extend_from_slice(v);
            row_ptr.push(cols.len());
        }
        debug_assert_eq!(row_ptr.len(), n + 1);
        CsrMatrix { n, row_ptr, cols, vals }
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut acc = 0.0;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[p] * x[self.cols[p]];
            }
            y[i] = acc;
        }
    }

    /// Apply to a vector, allocating the result.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        y
    }
}

/// Zero-fill-in incomplete LU factorization (unit lower diagonal).
pub struct Ilu0 {
    lu: Vec<f64>,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let n = a.n;
        let mut lu = a.vals.clone();
        let mut diag = vec![usize::MAX; n];
        for i in 0..n {
            for p in a.row_ptr[i]..a.row_ptr[i + 1] {
                if a.cols[p] == i {
                    diag[i] = p;
                }
            }
            if diag[i] == usize::MAX {
                return Err(Error::numeric(format!("ILU(0): missing diagonal in row {i}")));
            }
        }

        // Column-position scatter for the current row.
        let mut work = vec![usize::MAX; n];
        for i in 0..n {
            let (lo, hi) = (a.row_ptr[i], a.row_ptr[i + 1]);
            for p in lo..hi {
                work[a.cols[p]] = p;
            }
            for p in lo..hi {
                let k = a.cols[p];
                if k >= i {
                    break;
                }
                let pivot = lu[diag[k]];
                if pivot == 0.0 || !pivot.is_finite() {
                    for q in lo..hi {
                        work[a.cols[q]] = usize::MAX;
                    }
                    return Err(Error::numeric(format!("ILU(0): zero pivot in row {k}")));
                }
                let factor = lu[p] / pivot;
                lu[p] = factor;
                for q in (diag[k] + 1)..a.row_ptr[k + 1] {
                    let j = a.cols[q];
                    let pos = work[j];
                    if pos != usize::MAX {
                        lu[pos] -= factor * lu[q];
                    }
                }
            }
            for p in lo..hi {
                work[a.cols[p]] = usize::MAX;
            }
            if lu[diag[i]] == 0.0 || !lu[diag[i]].is_finite() {
                return Err(Error::numeric(format!("ILU(0): zero pivot in row {i}")));
            }
        }
        Ok(Ilu0 { lu, diag })
    }

    /// Solve `L U x = b` in place of `x`.
    pub fn solve(&self, a: &CsrMatrix, b: &[f64], x: &mut [f64]) {
        let n = a.n;
        // Forward: unit lower triangle.
        for i in 0..n {
            let mut acc = b[i];
            for p in a.row_ptr[i]..self.diag[i] {
                acc -= self.lu[p] * x[a.cols[p]];
            }
            x[i] = acc;
        }
        // Backward: upper triangle.
        for i in (0..n).rev() {
            let mut acc = x[i];
            for p in (self.diag[i] + 1)..a.row_ptr[i + 1] {
                acc -= self.lu[p] * x[a.cols[p]];
            }
            x[i] = acc / self.lu[self.diag[i]];
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solve `A x = b` with ILU(0)-preconditioned BiCGSTAB to relative residual
/// `tol`. Returns the solution; fails if the iteration stalls or breaks down.
pub fn solve_ilu_bicgstab(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = a.n;
    if b.len() != n {
        return Err(Error::argument("right-hand side length mismatch"));
    }
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let ilu = Ilu0::new(a)?;

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let rhat = r.clone();
    let mut rho = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut phat = vec![0.0; n];
    let mut shat = vec![0.0; n];
    let mut t = vec![0.0; n];
    let target = tol * bnorm;

    for _ in 0..max_iter {
        let rho_new = dot(&rhat, &r);
        if rho_new.abs() < 1e-300 {
            return Err(Error::numeric("BiCGSTAB breakdown: rho ~ 0"));
        }
        let beta = (rho_new / rho) * (alpha / omega);
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        ilu.solve(a, &p, &mut phat);
        a.matvec(&phat, &mut v);
        let denom = dot(&rhat, &v);
        if denom.abs() < 1e-300 {
            return Err(Error::numeric("BiCGSTAB breakdown: rhat . v ~ 0"));
        }
        alpha = rho_new / denom;
        // s lives in r.
        for i in 0..n {
            r[i] -= alpha * v[i];
        }
        if norm2(&r) <= target {
            for i in 0..n {
                x[i] += alpha * phat[i];
            }
            return Ok(x);
        }
        ilu.solve(a, &r, &mut shat);
        a.matvec(&shat, &mut t);
        let tt = dot(&t, &t);
        if tt == 0.0 {
            return Err(Error::numeric("BiCGSTAB breakdown: t = 0"));
        }
        omega = dot(&t, &r) / tt;
        if omega == 0.0 || !omega.is_finite() {
            return Err(Error::numeric("BiCGSTAB breakdown: omega degenerate"));
        }
        for i in 0..n {
            x[i] += alpha * phat[i] + omega * shat[i];
            r[i] -= omega * t[i];
        }
        if norm2(&r) <= target {
            return Ok(x);
        }
        rho = rho_new;
    }
    Err(Error::numeric(format!(
        "BiCGSTAB: no convergence in {max_iter} iterations (residual {:.3e}, target {:.3e})",
        norm2(&r),
        target
    )))
}
