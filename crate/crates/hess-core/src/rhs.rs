//! Right-hand sides `f(x, z, p)` and their partial derivatives.
//!
//! The solver consumes `f` through the [`Rhs`] trait so that the homotopy can
//! blend a grid-frozen base value into the target without the rest of the
//! pipeline noticing. Preset families carry analytic partials; anything
//! without an analytic form falls back to central differences with step
//! `1e-6`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Value and first partials of `f` at one evaluation point.
#[derive(Debug, Clone)]
pub struct RhsPartials {
    pub f: f64,
    pub fz: f64,
    pub fp: Vec<f64>,
    pub fx: Vec<f64>,
}

/// Interface the solver sees: `f` and its partials at a grid point.
///
/// `idx` is the linear grid index of the point being evaluated; grid-frozen
/// right-hand sides (the homotopy stages) key on it, analytic ones ignore it.
pub trait Rhs: Sync {
    fn eval(&self, idx: usize, x: &[f64], z: f64, p: &[f64]) -> f64;
    fn partials(&self, idx: usize, x: &[f64], z: f64, p: &[f64]) -> RhsPartials;
}

/// Spatial factor `a(x)`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpaceFactor {
    /// `a(x) = c0 + c1 . x`
    Affine { c0: f64, c1: Vec<f64> },
    /// `a(x) = exp(c0 + c1 . x)`
    Exp { c0: f64, c1: Vec<f64> },
}

impl SpaceFactor {
    fn eval(&self, x: &[f64]) -> f64 {
        match self {
            SpaceFactor::Affine { c0, c1 } => c0 + dot(c1, x),
            SpaceFactor::Exp { c0, c1 } => (c0 + dot(c1, x)).exp(),
        }
    }

    fn deriv(&self, x: &[f64], l: usize) -> f64 {
        match self {
            SpaceFactor::Affine { c1, .. } => c1[l],
            SpaceFactor::Exp { c0, c1 } => c1[l] * (c0 + dot(c1, x)).exp(),
        }
    }
}

/// Zero-order factor `b(z)`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ZFactor {
    One,
    /// `b(z) = exp(rate * z)`; monotone decreasing in `z` when `rate < 0`,
    /// giving `-f_z / f = -rate`.
    Exp {
        rate: f64,
    },
}

impl ZFactor {
    fn eval(&self, z: f64) -> f64 {
        match self {
            ZFactor::One => 1.0,
            ZFactor::Exp { rate } => (rate * z).exp(),
        }
    }

    /// `b'(z) / b(z)`.
    fn log_deriv(&self) -> f64 {
        match self {
            ZFactor::One => 0.0,
            ZFactor::Exp { rate } => *rate,
        }
    }
}

/// Gradient factor `c(s)` with `s = |p|^2`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PFactor {
    One,
    /// `c(s) = (offset + s)^exponent`
    Power {
        offset: f64,
        exponent: f64,
    },
}

impl PFactor {
    fn eval(&self, s: f64) -> f64 {
        match self {
            PFactor::One => 1.0,
            PFactor::Power { offset, exponent } => (offset + s).powf(*exponent),
        }
    }

    /// `c'(s) / c(s)`.
    fn log_deriv(&self, s: f64) -> f64 {
        match self {
            PFactor::One => 0.0,
            PFactor::Power { offset, exponent } => exponent / (offset + s),
        }
    }
}

/// Declared growth data for the structural gradient-estimate conditions:
/// `p . grad_p f^(1/k) <= fbar (1 + |p|^gamma1)` with `gamma1 < 2`, and
/// `p . grad_x f^(1/k) + |p|^2 f^(1/k)_z >= -fbar (1 + |p|^gamma2)` with
/// `gamma2 < 4`, checked for `|p| >= 10`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GrowthSpec {
    pub gamma1: f64,
    pub gamma2: f64,
    pub fbar: f64,
    #[serde(default = "default_z_lo")]
    pub z_lo: f64,
    #[serde(default = "default_z_hi")]
    pub z_hi: f64,
}

fn default_z_lo() -> f64 {
    -1.0
}

fn default_z_hi() -> f64 {
    1.0
}

/// Positive spatial field supplied as a shared closure.
pub type FieldFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A concrete right-hand side.
#[derive(Clone)]
pub enum RhsKind {
    /// `f = value > 0`.
    Constant(f64),
    /// `f = a(x) b(z) c(|p|^2)`.
    Separable { a: SpaceFactor, b: ZFactor, c: PFactor },
    /// `f = f(x)` supplied as a closure (manufactured right-hand sides).
    Field(FieldFn),
}

impl std::fmt::Debug for RhsKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RhsKind::Constant(v) => write!(f, "Constant({v})"),
            RhsKind::Separable { a, b, c } => {
                write!(f, "Separable {{ a: {a:?}, b: {b:?}, c: {c:?} }}")
            }
            RhsKind::Field(_) => write!(f, "Field(<closure>)"),
        }
    }
}

/// Right-hand side plus optional growth metadata.
#[derive(Debug, Clone)]
pub struct RhsSpec {
    pub kind: RhsKind,
    pub growth: Option<GrowthSpec>,
}

/// Finite-difference step for fallback partials.
pub const FD_STEP: f64 = 1e-6;

impl RhsSpec {
    pub fn constant(value: f64) -> Result<Self> {
        if !(value > 0.0) {
            return Err(Error::argument(format!(
                "constant right-hand side must be positive, got {value}"
            )));
        }
        Ok(RhsSpec { kind: RhsKind::Constant(value), growth: None })
    }

    pub fn field(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        RhsSpec { kind: RhsKind::Field(Arc::new(f)), growth: None }
    }

    pub fn separable(a: SpaceFactor, b: ZFactor, c: PFactor, growth: Option<GrowthSpec>) -> Self {
        RhsSpec { kind: RhsKind::Separable { a, b, c }, growth }
    }
}

impl Rhs for RhsSpec {
    fn eval(&self, _idx: usize, x: &[f64], z: f64, p: &[f64]) -> f64 {
        match &self.kind {
            RhsKind::Constant(v) => *v,
            RhsKind::Separable { a, b, c } => a.eval(x) * b.eval(z) * c.eval(norm2(p)),
            RhsKind::Field(f) => f(x),
        }
    }

    fn partials(&self, idx: usize, x: &[f64], z: f64, p: &[f64]) -> RhsPartials {
        let n = x.len();
        match &self.kind {
            RhsKind::Constant(v) => {
                RhsPartials { f: *v, fz: 0.0, fp: vec![0.0; n], fx: vec![0.0; n] }
            }
            RhsKind::Separable { a, b, c } => {
                let s = norm2(p);
                let f = a.eval(x) * b.eval(z) * c.eval(s);
                let fz = f * b.log_deriv();
                let cs = c.log_deriv(s);
                let fp = p.iter().map(|&pl| f * cs * 2.0 * pl).collect();
                let fx = (0..n)
                    .map(|l| {
                        let av = a.eval(x);
                        if av == 0.0 {
                            0.0
                        } else {
                            f * a.deriv(x, l) / av
                        }
                    })
                    .collect();
                RhsPartials { f, fz, fp, fx }
            }
            RhsKind::Field(func) => {
                // z/p do not enter; x-partials by central differences.
                let f = func(x);
                let mut fx = vec![0.0; n];
                let mut xs = x.to_vec();
                for l in 0..n {
                    let x0 = xs[l];
                    xs[l] = x0 + FD_STEP;
                    let fp_ = func(&xs);
                    xs[l] = x0 - FD_STEP;
                    let fm = func(&xs);
                    xs[l] = x0;
                    fx[l] = (fp_ - fm) / (2.0 * FD_STEP);
                }
                let _ = idx;
                RhsPartials { f, fz: 0.0, fp: vec![0.0; n], fx }
            }
        }
    }
}

/// `f^(1/k)` and its z/p partials from `f` and its partials (chain rule).
/// Fails if `f` is not strictly positive.
pub fn ftilde_chain(parts: &RhsPartials, k: usize) -> Result<(f64, f64, Vec<f64>)> {
    if !(parts.f > 0.0) {
        return Err(Error::domain(format!(
            "right-hand side must be positive, got f = {:.6e}",
            parts.f
        )));
    }
    let kf = k as f64;
    let ft = parts.f.powf(1.0 / kf);
    let scale = ft / (kf * parts.f); // (1/k) f^(1/k - 1)
    let ftz = scale * parts.fz;
    let ftp = parts.fp.iter().map(|&v| scale * v).collect();
    Ok((ft, ftz, ftp))
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn norm2(p: &[f64]) -> f64 {
    p.iter().map(|v| v * v).sum()
}
