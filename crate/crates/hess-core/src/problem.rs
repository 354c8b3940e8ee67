//! Problem assembly: grid + cone + metric + chi + right-hand side + boundary
//! data + subsolution, built from declarative preset configurations.
//!
//! The configuration types all speak serde with unknown keys rejected, so a
//! JSON config is validated structurally before any numerics run. Building a
//! [`ProblemSpec`] samples everything onto the grid and enforces the cheap
//! structural invariants (dimensions agree, subsolution matches the boundary
//! data on the boundary).

use crate::error::{Error, Result};
use crate::geometry::tensor::{sym_index, sym_len, unpack};
use crate::geometry::{Grid, GridFunction, MetricField, MetricPreset, SymTensorField};
use crate::rhs::{GrowthSpec, PFactor, RhsSpec, SpaceFactor, ZFactor};
use crate::symfun::{sigma, ConeSpec};
use serde::{Deserialize, Serialize};

/// Analytic reference solutions used for boundary data, subsolutions,
/// manufactured right-hand sides, and error measurement.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum SolutionPreset {
    /// `u(x) = scale * |x|^2 / 2`
    Quadratic { scale: f64 },
    /// `u(x) = exp(scale * |x|^2 / 2)`
    ExpRadial { scale: f64 },
}

impl SolutionPreset {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        match self {
            SolutionPreset::Quadratic { scale } => 0.5 * scale * r2,
            SolutionPreset::ExpRadial { scale } => (0.5 * scale * r2).exp(),
        }
    }

    pub fn grad(&self, x: &[f64], out: &mut [f64]) {
        match self {
            SolutionPreset::Quadratic { scale } => {
                for (o, &v) in out.iter_mut().zip(x) {
                    *o = scale * v;
                }
            }
            SolutionPreset::ExpRadial { scale } => {
                let u = self.eval(x);
                for (o, &v) in out.iter_mut().zip(x) {
                    *o = u * scale * v;
                }
            }
        }
    }

    /// Coordinate second derivatives (no Christoffel terms), packed.
    pub fn hess(&self, x: &[f64], out: &mut [f64]) {
        let n = x.len();
        out.fill(0.0);
        match self {
            SolutionPreset::Quadratic { scale } => {
                for i in 0..n {
                    out[sym_index(n, i, i)] = *scale;
                }
            }
            SolutionPreset::ExpRadial { scale } => {
                let u = self.eval(x);
                for i in 0..n {
                    for j in i..n {
                        let mut v = u * scale * scale * x[i] * x[j];
                        if i == j {
                            v += u * scale;
                        }
                        out[sym_index(n, i, j)] = v;
                    }
                }
            }
        }
    }
}

/// The tensor `chi` appearing in `eta = (Delta u) g - nabla^2 u + chi`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChiPreset {
    Zero,
    /// `chi = alpha g`
    MetricMultiple {
        alpha: f64,
    },
    /// Constant diagonal tensor in coordinates.
    DiagConst {
        values: Vec<f64>,
    },
}

impl ChiPreset {
    pub fn validate(&self, n: usize) -> Result<()> {
        if let ChiPreset::DiagConst { values } = self {
            if values.len() != n {
                return Err(Error::argument(format!(
                    "chi diag_const needs {n} values, got {}",
                    values.len()
                )));
            }
        }
        Ok(())
    }

    /// Packed components at a point.
    pub fn eval(&self, n: usize, x: &[f64], metric: &MetricPreset, out: &mut [f64]) {
        out.fill(0.0);
        match self {
            ChiPreset::Zero => {}
            ChiPreset::MetricMultiple { alpha } => {
                metric.eval(n, x, out);
                for v in out.iter_mut() {
                    *v *= alpha;
                }
            }
            ChiPreset::DiagConst { values } => {
                for i in 0..n {
                    out[sym_index(n, i, i)] = values[i];
                }
            }
        }
    }
}

/// Dirichlet boundary data.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundaryPreset {
    /// Trace of the configured solution preset.
    FromSolution,
    Constant {
        value: f64,
    },
}

/// Subsolution choices.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum SubsolutionPreset {
    /// `u_ = u*` (equality subsolution).
    FromSolution,
    /// `u_ = u* - beta * bump`, where `bump` is the normalized polynomial
    /// bubble `prod_d (x_d - lo_d)(hi_d - x_d)`, zero on the boundary and one
    /// at the center. Keeps the boundary data exact while making the homotopy
    /// start genuinely away from the target.
    SolutionMinusBump { beta: f64 },
}

/// Right-hand-side configuration.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum RhsConfig {
    Constant {
        value: f64,
    },
    /// Manufactured: `f(x) = sigma_k(lambda(eta[u*](x)))` evaluated with the
    /// analytic metric/Christoffel data, so `u*` is the exact continuum
    /// solution.
    FromSolution,
    Separable {
        a: SpaceFactor,
        #[serde(default = "default_zfactor")]
        b: ZFactor,
        #[serde(default = "default_pfactor")]
        c: PFactor,
        #[serde(default)]
        growth: Option<GrowthSpec>,
    },
}

fn default_zfactor() -> ZFactor {
    ZFactor::One
}

fn default_pfactor() -> PFactor {
    PFactor::One
}

/// Grid part of a problem configuration.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub m: Vec<usize>,
}

/// Cone part of a problem configuration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConeConfig {
    pub n: usize,
    pub k: usize,
}

/// Full declarative description of one Dirichlet problem.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub grid: GridConfig,
    pub cone: ConeConfig,
    pub metric: MetricPreset,
    #[serde(default = "default_chi")]
    pub chi: ChiPreset,
    pub rhs: RhsConfig,
    #[serde(default = "default_boundary")]
    pub boundary: BoundaryPreset,
    #[serde(default)]
    pub solution: Option<SolutionPreset>,
    #[serde(default = "default_subsolution")]
    pub subsolution: SubsolutionPreset,
    /// Declare that the configured solution preset solves the problem exactly
    /// (automatic for manufactured right-hand sides); enables error reporting.
    #[serde(default)]
    pub exact_solution: bool,
}

fn default_chi() -> ChiPreset {
    ChiPreset::Zero
}

fn default_boundary() -> BoundaryPreset {
    BoundaryPreset::FromSolution
}

fn default_subsolution() -> SubsolutionPreset {
    SubsolutionPreset::FromSolution
}

/// A fully sampled problem, ready for the solver.
#[derive(Debug)]
pub struct ProblemSpec {
    pub grid: Grid,
    pub cone: ConeSpec,
    pub metric_preset: MetricPreset,
    pub metric: MetricField,
    pub chi: SymTensorField,
    pub rhs: RhsSpec,
    /// Dirichlet data, sampled on the full grid (only boundary entries used).
    pub phi: GridFunction,
    /// Admissible subsolution; equals `phi` on the boundary.
    pub usub: GridFunction,
    /// Reference solution when the configuration declares one.
    pub exact: Option<GridFunction>,
}

impl ProblemConfig {
    /// Same problem on a refined grid (`m -> factor (m - 1) + 1` per axis).
    pub fn refined(&self, factor: usize) -> ProblemConfig {
        let mut out = self.clone();
        out.grid.m = self.grid.m.iter().map(|&m| factor * (m - 1) + 1).collect();
        out
    }

    pub fn build(&self) -> Result<ProblemSpec> {
        let grid = Grid::new(self.grid.lo.clone(), self.grid.hi.clone(), self.grid.m.clone())?;
        let n = grid.n();
        let cone = ConeSpec::new(self.cone.n, self.cone.k)?;
        if cone.n() != n {
            return Err(Error::argument(format!(
                "cone dimension n = {} must match grid dimension {n}",
                cone.n()
            )));
        }
        self.chi.validate(n)?;
        let metric = MetricField::build(&self.metric, &grid)?;

        let npts = grid.len();
        let mut chi = SymTensorField::zeros(n, npts);
        let mut x = vec![0.0; n];
        for p in 0..npts {
            grid.coord(p, &mut x);
            self.chi.eval(n, &x, &self.metric, chi.components_mut(p));
        }

        let needs_solution = matches!(self.rhs, RhsConfig::FromSolution)
            || matches!(self.boundary, BoundaryPreset::FromSolution)
            || self.exact_solution;
        let solution = match (&self.solution, needs_solution) {
            (Some(s), _) => Some(s.clone()),
            (None, false) => None,
            (None, true) => {
                return Err(Error::argument(
                    "configuration references the solution preset (rhs/boundary/exact) but none is given",
                ))
            }
        };

        let phi = match &self.boundary {
            BoundaryPreset::FromSolution => {
                let s = solution.as_ref().unwrap();
                GridFunction::from_fn(&grid, |x| s.eval(x))
            }
            BoundaryPreset::Constant { value } => {
                let v = *value;
                GridFunction::from_fn(&grid, |_| v)
            }
        };

        let usub = match &self.subsolution {
            SubsolutionPreset::FromSolution => phi_base(&grid, &solution, &phi)?,
            SubsolutionPreset::SolutionMinusBump { beta } => {
                let base = phi_base(&grid, &solution, &phi)?;
                let b = *beta;
                let mut out = base;
                let mut x = vec![0.0; n];
                for p in 0..grid.len() {
                    grid.coord(p, &mut x);
                    out.values[p] -= b * bump(&grid, &x);
                }
                out
            }
        };

        // Subsolution must carry the boundary data exactly.
        for p in grid.boundary_indices() {
            if (usub.values[p] - phi.values[p]).abs() > 1e-12 {
                return Err(Error::argument(format!(
                    "subsolution differs from boundary data at boundary point {:?}",
                    grid.multi_index(p)
                )));
            }
        }

        let rhs = match &self.rhs {
            RhsConfig::Constant { value } => RhsSpec::constant(*value)?,
            RhsConfig::Separable { a, b, c, growth } => {
                RhsSpec::separable(a.clone(), b.clone(), c.clone(), growth.clone())
            }
            RhsConfig::FromSolution => {
                let f = manufactured_rhs(
                    cone,
                    self.metric.clone(),
                    self.chi.clone(),
                    solution.clone().unwrap(),
                );
                RhsSpec::field(f)
            }
        };

        let exact = if matches!(self.rhs, RhsConfig::FromSolution) || self.exact_solution {
            let s = solution.as_ref().unwrap();
            Some(GridFunction::from_fn(&grid, |x| s.eval(x)))
        } else {
            None
        };

        Ok(ProblemSpec {
            grid,
            cone,
            metric_preset: self.metric.clone(),
            metric,
            chi,
            rhs,
            phi,
            usub,
            exact,
        })
    }
}

fn phi_base(
    grid: &Grid,
    solution: &Option<SolutionPreset>,
    phi: &GridFunction,
) -> Result<GridFunction> {
    match solution {
        Some(s) => Ok(GridFunction::from_fn(grid, |x| s.eval(x))),
        // Without a solution preset the only interior extension of the
        // boundary data we can offer is the data itself (constant case).
        None => Ok(phi.clone()),
    }
}

/// Normalized polynomial bubble: zero on the boundary, one at the center.
pub fn bump(grid: &Grid, x: &[f64]) -> f64 {
    let mut v = 1.0;
    for d in 0..grid.n() {
        let lo = grid.lo()[d];
        let hi = grid.hi()[d];
        let half = 0.5 * (hi - lo);
        v *= (x[d] - lo) * (hi - x[d]) / (half * half);
    }
    v
}

/// Build the manufactured right-hand side
/// `f(x) = sigma_k(lambda(eta[u*](x)))` from analytic data only: exact
/// Christoffel symbols, exact solution derivatives, no grid anywhere.
fn manufactured_rhs(
    cone: ConeSpec,
    metric: MetricPreset,
    chi: ChiPreset,
    solution: SolutionPreset,
) -> impl Fn(&[f64]) -> f64 + Send + Sync + 'static {
    move |x: &[f64]| {
        let n = x.len();
        let w = sym_len(n);
        let mut gp = vec![0.0; w];
        metric.eval(n, x, &mut gp);
        let g = unpack(n, &gp);

        let mut gamma = vec![0.0; n * w];
        metric.christoffel_exact(n, x, &mut gamma);

        let mut grad = vec![0.0; n];
        solution.grad(x, &mut grad);
        let mut hess = vec![0.0; w];
        solution.hess(x, &mut hess);
        // Covariant correction.
        for i in 0..n {
            for j in i..n {
                let mut v = hess[sym_index(n, i, j)];
                for k in 0..n {
                    v -= gamma[k * w + sym_index(n, i, j)] * grad[k];
                }
                hess[sym_index(n, i, j)] = v;
            }
        }

        let mut chip = vec![0.0; w];
        chi.eval(n, x, &metric, &mut chip);

        let ginv = g.clone().try_inverse().expect("preset metric invertible");
        let mut lap = 0.0;
        for i in 0..n {
            for j in 0..n {
                lap += ginv[(i, j)] * hess[sym_index(n, i, j)];
            }
        }

        let mut eta = nalgebra::DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                eta[(i, j)] = lap * g[(i, j)] - hess[sym_index(n, i, j)] + chip[sym_index(n, i, j)];
            }
        }
        let eig = crate::geometry::gen_eigenvalues(&eta, &g).expect("preset metric SPD");
        sigma(cone.k(), &eig.lambda).expect("k <= n by construction")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ma_config(m: usize) -> ProblemConfig {
        ProblemConfig {
            grid: GridConfig { lo: vec![0.0, 0.0], hi: vec![1.0, 1.0], m: vec![m, m] },
            cone: ConeConfig { n: 2, k: 2 },
            metric: MetricPreset::Flat,
            chi: ChiPreset::Zero,
            rhs: RhsConfig::FromSolution,
            boundary: BoundaryPreset::FromSolution,
            solution: Some(SolutionPreset::ExpRadial { scale: 1.0 }),
            subsolution: SubsolutionPreset::SolutionMinusBump { beta: 0.02 },
            exact_solution: false,
        }
    }

    #[test]
    fn manufactured_rhs_matches_closed_form() {
        // n = k = 2 flat: sigma_2(lambda(eta[u])) = det Hess u, and for
        // u = exp((x^2+y^2)/2) that determinant is e^(x^2+y^2)(1+x^2+y^2).
        let prob = ma_config(9).build().unwrap();
        for xy in [[0.3, 0.7], [0.0, 0.0], [0.9, 0.1]] {
            let f = crate::rhs::Rhs::eval(&prob.rhs, 0, &xy, 0.0, &[0.0, 0.0]);
            let r2 = xy[0] * xy[0] + xy[1] * xy[1];
            let want = (r2).exp() * (1.0 + r2);
            assert!((f - want).abs() <= 1e-10 * want, "x = {xy:?}: {f} vs {want}");
        }
    }

    #[test]
    fn subsolution_matches_boundary() {
        let prob = ma_config(9).build().unwrap();
        for p in prob.grid.boundary_indices() {
            assert_eq!(prob.usub.values[p], prob.phi.values[p]);
        }
        // ... and sits strictly below the solution preset inside.
        let exact = prob.exact.as_ref().unwrap();
        let interior = prob.grid.interior_indices();
        assert!(interior.iter().all(|&p| prob.usub.values[p] < exact.values[p]));
    }

    #[test]
    fn missing_solution_preset_is_an_error() {
        let mut cfg = ma_config(9);
        cfg.solution = None;
        let err = cfg.build().unwrap_err();
        assert!(matches!(err, Error::Argument(_)), "{err}");
    }

    #[test]
    fn cone_grid_dimension_mismatch_is_an_error() {
        let mut cfg = ma_config(9);
        cfg.cone = ConeConfig { n: 3, k: 2 };
        assert!(cfg.build().is_err());
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = ma_config(17);
        let s = serde_json::to_string_pretty(&cfg).unwrap();
        let back: ProblemConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_rejected() {
        let js = r#"{
            "grid": {"lo": [0,0], "hi": [1,1], "m": [9,9], "gird": 3},
            "cone": {"n": 2, "k": 2},
            "metric": {"preset": "flat"},
            "rhs": {"preset": "constant", "value": 1.0},
            "solution": {"preset": "quadratic", "scale": 1.0}
        }"#;
        let err = serde_json::from_str::<ProblemConfig>(js).unwrap_err();
        assert!(err.to_string().contains("gird"), "{err}");
    }
}
