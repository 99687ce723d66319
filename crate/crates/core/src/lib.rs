//! Pseudospectral reduction of delay differential equations to ODEs and
//! numerical Hopf bifurcation analysis of the result.

// NaN-rejecting `!(a < b)` tests and index loops over matrix entries are
// deliberate in the numerical kernels.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analytic;
pub mod charfn;
pub mod discretize;
pub mod eigen;
pub mod error;
pub mod hopf;
pub mod mesh;
pub mod model;
pub mod serde_cx;
pub mod simulate;

pub use analytic::CharFn0;
pub use charfn::CharFn;
pub use discretize::{CharFnN, PsSystem};
pub use error::{Error, Result};
pub use hopf::{find_hopf, Discretization, HopfPoint, StabilityCurve};
pub use mesh::{DiffOp, Mesh};
pub use model::expr::{parse, Expr};
pub use model::jet::{Jet3, Scalar};
pub use model::{DdeModel, LinearPart, ModelFile};
pub use num_complex::Complex64;
pub use simulate::{History, PeriodEstimate, Trajectory};
