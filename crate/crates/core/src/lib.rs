//! Time-dependent contact Hamiltonian dynamics on the extended phase space
//! `(q, p, S, t)`, together with machinery that constructs and verifies
//! generalized Noether symmetries and their dissipated quantities.

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod noether;
pub mod point;
pub mod sampling;
pub mod scaling;
pub mod scenario;
pub mod systems;

pub use error::Error;
pub use expr::{EvalError, ParamRates, ParseError, ScalarField, Var};
pub use geometry::{ContactSystem, DomainGuard, OneFormValue, VectorFieldSpec};
pub use point::{EvalContext, ExtendedPoint, Params};
