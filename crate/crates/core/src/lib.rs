//! Physics-informed linear models.
//!
//! Solutions of linear ODEs and PDEs are expanded in cubic B-splines. The
//! integrated squared residual of the equation becomes an exact quadratic
//! form `aᵀGa`, so fitting data under the equation is a closed-form
//! regularized least-squares problem. On top of that sit profile-likelihood
//! coefficient estimation, marginal-likelihood hyperparameter selection,
//! and a GNSS strain-rate application.
// `!(x > 0.0)` deliberately rejects NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod bayes;
pub mod error;
pub mod forms;
pub mod integrals;
pub mod inverse;
pub mod linalg;
pub mod report;
pub mod solver;
pub mod strain;
pub mod synth;

pub use basis::{BSplineBasis1D, ReferenceSpline, TensorBasis};
pub use error::{PilmError, Result};
pub use forms::{PenaltyKind, PenaltyMatrix, Spectrum};
pub use integrals::IntegralMatrixSet;
pub use solver::{ObservationSystem, PilmFit};
