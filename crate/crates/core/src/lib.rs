//! Action-minimizing simple choreographies for `n` equal moving masses in the
//! field of two equal fixed centers.
//!
//! Two independent routes to the same orbit live here. [`analytic`] predicts the
//! circular minimizer's radius by splitting the action and solving a scalar
//! equation; [`minimize`] descends the reduced action directly over truncated
//! Fourier loops. [`verify`] cross-checks both against the inequalities the
//! splitting relies on and against Newton's equations.

// `!(x > 0.0)` style guards are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod action;
pub mod analytic;
pub mod error;
pub mod minimize;
pub mod params;
pub mod trajectory;
pub mod verify;

pub use action::{
    action_full, action_gradient, action_reduced, ActionBreakdown, QuadratureSpec, ReducedAction,
};
pub use analytic::{predict, solve_lambda, PredictReport};
pub use error::{Error, Result, SeparationKind};
pub use minimize::{minimize, multistart, MinimizeOptions, MinimizeReport, MultistartReport};
pub use params::{Point, ProblemParams};
pub use trajectory::{ChoreographySystem, FourierPath};
