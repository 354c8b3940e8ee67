//! Elementary symmetric functions, Garding cones, and the transformed operator
//! `h`.
//!
//! The equation treated by this crate is driven by the map
//!
//! ```text
//!     h(lambda) = sigma_k(mu)^(1/k),    mu_i = sum_{j != i} lambda_j,
//! ```
//!
//! defined on the pullback cone `Gamma = { lambda : mu(lambda) in Gamma_k }`,
//! where `Gamma_k` is the usual cone `{ sigma_j > 0, j = 1..k }`. This module
//! implements the scalar calculus on that cone: sigma evaluation, cone
//! membership, the mu-transform and its inverse, `h` with both gradient
//! flavours, and the shift search used to build barrier data.
//!
//! Everything here is plain `f64` arithmetic on short vectors (`n <= 16` in
//! practice); no external linear algebra is involved.

use crate::error::{Error, Result};

/// Dimension / order pair `(n, k)` with `2 <= n` and `1 <= k <= n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConeSpec {
    n: usize,
    k: usize,
}

impl ConeSpec {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::argument(format!("cone dimension n = {n} must be >= 2")));
        }
        if k < 1 || k > n {
            return Err(Error::argument(format!(
                "cone order k = {k} must satisfy 1 <= k <= n = {n}"
            )));
        }
        Ok(ConeSpec { n, k })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

/// Value and gradients of `h(lambda) = sigma_k(mu)^(1/k)` at a cone point.
///
/// `tilde_grad[i]` is the derivative with respect to `mu_i`; `grad[i]` the
/// derivative with respect to `lambda_i`. They are related by
/// `grad_i = sum_{l != i} tilde_grad_l`.
#[derive(Debug, Clone)]
pub struct HEval {
    pub value: f64,
    pub grad: Vec<f64>,
    pub tilde_grad: Vec<f64>,
}

/// Elementary symmetric function `sigma_k(lam)` (`sigma_0 = 1`).
///
/// One pass of the coefficient recurrence for `prod_i (1 + t lam_i)`; cost
/// `O(n k)`, no combinatorial blowup.
pub fn sigma(k: usize, lam: &[f64]) -> Result<f64> {
    if k > lam.len() {
        return Err(Error::argument(format!(
            "sigma order k = {k} exceeds vector length n = {}",
            lam.len()
        )));
    }
    Ok(sigma_all(k, lam)[k])
}

/// All of `sigma_0..=sigma_kmax` in one pass. `kmax <= lam.len()` is the
/// caller's responsibility (internal helper, also used by cone tests).
pub fn sigma_all(kmax: usize, lam: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; kmax + 1];
    e[0] = 1.0;
    for &x in lam {
        for j in (1..=kmax).rev() {
            e[j] += x * e[j - 1];
        }
    }
    e
}

/// `sigma_k` of `lam` with entry `i` deleted (the classical `sigma_{k;i}`).
pub fn sigma_partial(k: usize, i: usize, lam: &[f64]) -> Result<f64> {
    let n = lam.len();
    if i >= n {
        return Err(Error::argument(format!("sigma_partial index i = {i} out of range (n = {n})")));
    }
    if k + 1 > n {
        return Err(Error::argument(format!(
            "sigma_partial order k = {k} exceeds reduced length n - 1 = {}",
            n - 1
        )));
    }
    let mut e = vec![0.0; k + 1];
    e[0] = 1.0;
    for (j, &x) in lam.iter().enumerate() {
        if j == i {
            continue;
        }
        for q in (1..=k).rev() {
            e[q] += x * e[q - 1];
        }
    }
    Ok(e[k])
}

/// Membership in `Gamma_k = { sigma_j(lam) > margin, j = 1..k }`.
pub fn in_gamma_k(lam: &[f64], cone: &ConeSpec, margin: f64) -> bool {
    assert_eq!(lam.len(), cone.n, "lambda length must equal cone dimension");
    assert!(margin >= 0.0, "cone margin must be nonnegative");
    let e = sigma_all(cone.k, lam);
    e[1..=cone.k].iter().all(|&s| s > margin)
}

/// The mu-transform `mu_i = sum_{j != i} lambda_j`.
pub fn mu_transform(lam: &[f64]) -> Vec<f64> {
    let s: f64 = lam.iter().sum();
    lam.iter().map(|&x| s - x).collect()
}

/// Inverse of the mu-transform: `lambda_i = sum(mu)/(n-1) - mu_i`.
pub fn mu_inverse(mu: &[f64]) -> Result<Vec<f64>> {
    let n = mu.len();
    if n < 2 {
        return Err(Error::argument("mu_inverse needs dimension n >= 2"));
    }
    let s: f64 = mu.iter().sum::<f64>() / (n as f64 - 1.0);
    Ok(mu.iter().map(|&x| s - x).collect())
}

/// Membership in the pullback cone `Gamma = { lambda : mu(lambda) in Gamma_k }`.
pub fn in_gamma(lam: &[f64], cone: &ConeSpec, margin: f64) -> bool {
    in_gamma_k(&mu_transform(lam), cone, margin)
}

/// Smallest `sigma_j(mu(lam))` for `j = 1..k`; positive exactly on the open
/// pullback cone. Used as the admissibility margin throughout the solver.
pub fn gamma_margin(lam: &[f64], cone: &ConeSpec) -> f64 {
    let mu = mu_transform(lam);
    let e = sigma_all(cone.k, &mu);
    e[1..=cone.k].iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Value and gradient of `sigma_k^(1/k)` at a point of `Gamma_k`.
///
/// This is the normalized operator applied directly in `mu` variables; both
/// `h_eval` and the tensor-side `G^{ij}` assembly are built on it. The
/// per-component scale `sigma_k^(1/k - 1)` is formed in log space so that
/// tiny `sigma_k` near the cone boundary cannot overflow the intermediate
/// before the (bounded) product with `sigma_{k-1;i}` is taken.
pub fn sigma_root_eval(mu: &[f64], k: usize) -> Result<(f64, Vec<f64>)> {
    let n = mu.len();
    let e = sigma_all(k, mu);
    if e[1..=k].iter().any(|&s| !(s > 0.0)) {
        return Err(Error::domain(format!("mu = {mu:?} is outside Gamma_{k}")));
    }
    let sk = e[k];
    let kf = k as f64;
    let value = sk.powf(1.0 / kf);
    let log_sk = sk.ln();
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let sig = sigma_partial(k - 1, i, mu)?;
        if !(sig > 0.0) {
            return Err(Error::domain(format!(
                "sigma_(k-1;{i})(mu) = {sig:.3e} not positive; mu = {mu:?} too close to the cone boundary"
            )));
        }
        weights[i] = ((1.0 / kf - 1.0) * log_sk + sig.ln()).exp() / kf;
    }
    Ok((value, weights))
}

/// Evaluate `h(lambda) = sigma_k(mu)^(1/k)` together with both gradients.
///
/// Requires `lambda` strictly inside the pullback cone.
pub fn h_eval(lam: &[f64], cone: &ConeSpec) -> Result<HEval> {
    let n = cone.n;
    if lam.len() != n {
        return Err(Error::argument(format!(
            "lambda length {} does not match cone dimension {n}",
            lam.len()
        )));
    }
    if lam.iter().any(|x| !x.is_finite()) {
        return Err(Error::argument("lambda entries must be finite"));
    }
    let mu = mu_transform(lam);
    let (value, tilde_grad) = sigma_root_eval(&mu, cone.k).map_err(|_| {
        Error::domain(format!(
            "lambda = {lam:?} is outside the pullback cone (n = {n}, k = {})",
            cone.k
        ))
    })?;
    // Sum the complementary weights directly rather than forming
    // `total - tilde_grad[i]`: near the cone boundary one weight dominates
    // the sum and the subtraction cancels catastrophically, while a sum of
    // positive terms stays accurate to machine precision.
    let grad: Vec<f64> = (0..n)
        .map(|i| tilde_grad.iter().enumerate().filter_map(|(l, &t)| (l != i).then_some(t)).sum())
        .collect();
    Ok(HEval { value, grad, tilde_grad })
}

/// Value of `h` after shifting the last coordinate: `h(lam + r e_n)`.
///
/// The shift keeps the point inside the cone (adding a nonnegative vector
/// never leaves `Gamma_k`), so only positivity of `sigma_k` needs a check.
fn h_value_shifted(lam: &[f64], cone: &ConeSpec, r: f64) -> Result<f64> {
    let mut shifted = lam.to_vec();
    *shifted.last_mut().unwrap() += r;
    let mu = mu_transform(&shifted);
    let e = sigma_all(cone.k, &mu);
    let sk = e[cone.k];
    if !(sk > 0.0) {
        return Err(Error::domain("shifted point left the cone".to_string()));
    }
    Ok(sk.powf(1.0 / cone.k as f64))
}

/// Smallest `R >= 0` with `h(lam + R e_n) >= a`, found by doubling then
/// bisection to relative tolerance `1e-8`.
///
/// `h` is nondecreasing along the shift direction and grows without bound
/// (the shift feeds `sigma_k` at least linearly), so the bracket always
/// closes; 200 doublings without a bracket is reported as a numeric failure.
pub fn find_shift_r(lam: &[f64], cone: &ConeSpec, a: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::argument(format!("shift target a = {a} must be positive")));
    }
    if !in_gamma(lam, cone, 0.0) {
        return Err(Error::domain(format!("lambda = {lam:?} is outside the pullback cone")));
    }
    if h_value_shifted(lam, cone, 0.0)? >= a {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    let mut doublings = 0;
    while h_value_shifted(lam, cone, hi)? < a {
        hi *= 2.0;
        doublings += 1;
        if doublings > 200 {
            return Err(Error::numeric(format!(
                "find_shift_r: no bracket after 200 doublings (target {a:.3e})"
            )));
        }
    }
    let mut lo = if doublings == 0 { 0.0 } else { hi / 2.0 };
    while hi - lo > 1e-8 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if h_value_shifted(lam, cone, mid)? >= a {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
