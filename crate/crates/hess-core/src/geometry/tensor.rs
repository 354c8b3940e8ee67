//! Symmetric 2-tensor fields and the generalized (pencil) eigenproblem.

use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Index into the packed upper triangle, lexicographic in `(i, j)` with
/// `i <= j`: for n = 3 the order is (0,0),(0,1),(0,2),(1,1),(1,2),(2,2).
#[inline]
pub fn sym_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * n - i * (i + 1) / 2 + j
}

/// Number of packed components of a symmetric n x n tensor.
#[inline]
pub fn sym_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Field of symmetric 2-tensors, one packed upper triangle per grid point.
#[derive(Debug, Clone)]
pub struct SymTensorField {
    n: usize,
    npts: usize,
    data: Vec<f64>,
}

impl SymTensorField {
    pub fn zeros(n: usize, npts: usize) -> Self {
        SymTensorField { n, npts, data: vec![0.0; npts * sym_len(n)] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn npts(&self) -> usize {
        self.npts
    }

    #[inline]
    pub fn get(&self, pt: usize, i: usize, j: usize) -> f64 {
        self.data[pt * sym_len(self.n) + sym_index(self.n, i, j)]
    }

    #[inline]
    pub fn set(&mut self, pt: usize, i: usize, j: usize, v: f64) {
        self.data[pt * sym_len(self.n) + sym_index(self.n, i, j)] = v;
    }

    /// Packed components at one point.
    #[inline]
    pub fn components(&self, pt: usize) -> &[f64] {
        let w = sym_len(self.n);
        &self.data[pt * w..(pt + 1) * w]
    }

    #[inline]
    pub fn components_mut(&mut self, pt: usize) -> &mut [f64] {
        let w = sym_len(self.n);
        &mut self.data[pt * w..(pt + 1) * w]
    }

    /// Unpack to a dense symmetric matrix.
    pub fn matrix(&self, pt: usize) -> DMatrix<f64> {
        unpack(self.n, self.components(pt))
    }

    pub fn set_matrix(&mut self, pt: usize, m: &DMatrix<f64>) {
        let n = self.n;
        for i in 0..n {
            for j in i..n {
                self.set(pt, i, j, 0.5 * (m[(i, j)] + m[(j, i)]));
            }
        }
    }
}

/// Unpack a packed upper triangle into a dense symmetric matrix.
pub fn unpack(n: usize, packed: &[f64]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = packed[sym_index(n, i, j)];
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Generalized eigendecomposition of the pencil `(a, g)` with `g` SPD.
#[derive(Debug, Clone)]
pub struct GenEig {
    /// Eigenvalues in descending order.
    pub lambda: Vec<f64>,
    /// Matching eigenvectors as columns, normalized so `v^T g v = 1`.
    pub vectors: DMatrix<f64>,
}

/// Solve `a v = lambda g v` by Cholesky whitening: with `g = L L^T` the
/// pencil eigenvalues are the ordinary eigenvalues of `L^-1 a L^-T`, and the
/// whitened eigenvectors pull back through `L^-T`.
pub fn gen_eigenvalues(a: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<GenEig> {
    let chol = nalgebra::Cholesky::new(g.clone())
        .ok_or_else(|| Error::domain("pencil metric is not positive definite"))?;
    Ok(gen_eig_with_chol(a, &chol))
}

/// Same as [`gen_eigenvalues`] with a precomputed Cholesky factor of `g`.
pub fn gen_eig_with_chol(
    a: &DMatrix<f64>,
    chol: &nalgebra::Cholesky<f64, nalgebra::Dyn>,
) -> GenEig {
    let l = chol.l();
    // w = L^-1 a L^-T, symmetrized against roundoff.
    let t = l.solve_lower_triangular(a).expect("cholesky factor is nonsingular");
    let mut w = l
        .solve_lower_triangular(&t.transpose())
        .expect("cholesky factor is nonsingular")
        .transpose();
    let n = w.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (w[(i, j)] + w[(j, i)]);
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
    }
    let eig = nalgebra::SymmetricEigen::new(w);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap());

    let mut lambda = Vec::with_capacity(n);
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        lambda.push(eig.eigenvalues[src]);
        // v = L^-T q: g-orthonormal generalized eigenvector.
        let q = eig.eigenvectors.column(src).into_owned();
        let v = l.transpose().solve_upper_triangular(&q).expect("cholesky factor is nonsingular");
        vectors.set_column(col, &v);
    }
    GenEig { lambda, vectors }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packed_indexing() {
        assert_eq!(sym_len(3), 6);
        let pairs = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];
        for (c, &(i, j)) in pairs.iter().enumerate() {
            assert_eq!(sym_index(3, i, j), c);
            assert_eq!(sym_index(3, j, i), c);
        }
    }

    #[test]
    fn diagonal_pencil() {
        // a = diag(2, 8), g = diag(1, 4): eigenvalues (2, 2).
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 8.0]);
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 4.0]);
        let res = gen_eigenvalues(&a, &g).unwrap();
        assert!((res.lambda[0] - 2.0).abs() < 1e-12);
        assert!((res.lambda[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn eigenvectors_are_g_orthonormal() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 0.4, -0.1, 0.4, 1.0, 0.3, -0.1, 0.3, 0.7]);
        let g = DMatrix::from_row_slice(3, 3, &[1.5, 0.2, 0.0, 0.2, 1.1, -0.1, 0.0, -0.1, 0.9]);
        let res = gen_eigenvalues(&a, &g).unwrap();
        // Descending order.
        assert!(res.lambda[0] >= res.lambda[1] && res.lambda[1] >= res.lambda[2]);
        let vt_g_v = res.vectors.transpose() * &g * &res.vectors;
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((vt_g_v[(i, j)] - want).abs() < 1e-10);
            }
        }
        // a v = lambda g v.
        for m in 0..3 {
            let v = res.vectors.column(m);
            let lhs = &a * v;
            let rhs = &g * v * res.lambda[m];
            assert!((lhs - rhs).norm() < 1e-10);
        }
    }

    #[test]
    fn congruence_invariance() {
        // lambda(S^T a S, S^T g S) = lambda(a, g) for invertible S.
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 0.3, 0.0, 0.3, 2.0, -0.2, 0.0, -0.2, 0.5]);
        let g = DMatrix::from_row_slice(3, 3, &[2.0, 0.1, 0.2, 0.1, 1.0, 0.0, 0.2, 0.0, 1.5]);
        let s = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, -0.3, 0.0, 1.2, 0.4, 0.2, 0.0, 0.9]);
        let base = gen_eigenvalues(&a, &g).unwrap();
        let cong = gen_eigenvalues(&(s.transpose() * &a * &s), &(s.transpose() * &g * &s)).unwrap();
        for m in 0..3 {
            let scale = base.lambda[m].abs().max(1.0);
            assert!((base.lambda[m] - cong.lambda[m]).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn rejects_indefinite_metric() {
        let a = DMatrix::identity(2, 2);
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(gen_eigenvalues(&a, &g).is_err());
    }
}
