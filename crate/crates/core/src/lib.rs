//! Minimum-expected-payment contract menus.
//!
//! A menu of contracts offered to an agent is represented as a piecewise-linear
//! convex function on the outcome simplex (the pointwise maximum of the expected
//! payment functions of its contracts). The crate solves three regimes:
//!
//! - [`ia`]: the agent only acquires a costly signal; closed-form optimal menu.
//! - [`contracts`]: the agent only takes a hidden costly action; optimal single
//!   contract from the convexified cost curve, extra menu members, and strict
//!   elicitation.
//! - [`general`]: acquisition followed by signal-dependent actions; linear
//!   programs over subtangent pieces.
//!
//! Every solver output can be certified by the brute-force checks in [`verify`].

pub mod contracts;
pub mod error;
pub mod format;
pub mod general;
pub mod geometry;
pub mod ia;
pub mod lp;
pub mod plot;
pub mod report;
pub mod verify;

pub use error::{Error, Result};
pub use geometry::{
    expected_payment, prior_decomposition, AffinePiece, Belief, Contract, Menu, OutcomeSpace,
    Plan, PriorDecomposition, ProblemInstance,
};
pub use report::{Flag, Regime, SolveReport};
pub use verify::{Certificate, Verdict};

/// Absolute tolerance used for equality comparisons on beliefs and payments.
pub const ABS_TOL: f64 = 1e-9;
/// Relative tolerance paired with [`ABS_TOL`].
pub const REL_TOL: f64 = 1e-7;
/// Default tolerance for certificates.
pub const DEFAULT_VERIFY_TOL: f64 = 1e-7;

/// `a == b` up to [`ABS_TOL`] + [`REL_TOL`] scaled by magnitude.
pub fn approx_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= ABS_TOL + REL_TOL * a.abs().max(b.abs())
}
