//! Discrete Riemannian geometry on box grids: grids and scalar fields,
//! symmetric tensor fields, metric presets with cached Christoffel data, and
//! the covariant operators feeding the nonlinear solver.

pub mod diff;
pub mod grid;
pub mod metric;
pub mod ops;
pub mod tensor;

pub use grid::{Grid, GridFunction};
pub use metric::{AxisTerm, MetricField, MetricPreset};
pub use ops::{chi1_of, covariant_hessian_field, eta_field, gradient_fields, laplacian_field};
pub use tensor::{gen_eigenvalues, GenEig, SymTensorField};
