//! Constrained Kalman filtering.
//!
//! This crate implements discrete-time Kalman filtering (linear and
//! extended) together with two families of methods for enforcing state
//! constraints on the estimate:
//!
//! * **estimate projection** — replace the unconstrained update with the
//!   nearest point (in a chosen weighted norm) satisfying the constraints,
//! * **gain restriction** — pick a suboptimal Kalman gain so the update
//!   lands in the constrained space by construction.
//!
//! Equality constraints admit closed forms for both; inequality constraints
//! are handled numerically with a dense active-set quadratic program.
//! Support code covers nonlinear-constraint linearization, three strategies
//! for constraining the state *prediction*, and seeded simulation scenarios
//! (a sine-tracking problem and an AR(6) tracker) used by the companion CLI.
//!
//! The crate is `no_std` (requires `alloc`); all transcendental math goes
//! through [`libm`] so results are bit-reproducible across platforms.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

use alloc::string::String;
use core::fmt;

pub mod constraints;
pub mod eq_filter;
pub mod experiments;
pub mod ineq_filter;
pub mod kalman;
pub mod matops;
pub mod prediction;
pub mod qp;
pub mod rng;

pub use constraints::ConstraintSet;
pub use kalman::{GaussianState, Innovation, LinearModelStep, NonlinearModel};
pub use matops::DenseMatrix;
pub use qp::{QpProblem, QpSolution};

/// Errors shared across the crate.
#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// Operand shapes do not conform.
    Dimension { op: &'static str, detail: String },
    /// A factorization reported a (near-)singular matrix.
    Singular { what: &'static str },
    /// A matrix required to be symmetric positive definite is not.
    NotPositiveDefinite { what: &'static str },
    /// A constraint matrix does not have full row rank.
    RankDeficient { what: &'static str },
    /// A function evaluation produced a non-finite value.
    NonFinite { what: &'static str },
    /// The constraint set admits no feasible point.
    Infeasible,
    /// The innovation is too small to carry the gain correction
    /// (ν'S⁻¹ν below threshold while a constraint is violated).
    DegenerateInnovation,
    /// The active-set loop changed working sets without moving too many
    /// times in a row.
    Cycling,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Dimension { op, detail } => write!(f, "dimension mismatch in {op}: {detail}"),
            Error::Singular { what } => write!(f, "singular matrix: {what}"),
            Error::NotPositiveDefinite { what } => {
                write!(f, "matrix not positive definite: {what}")
            }
            Error::RankDeficient { what } => write!(f, "rank-deficient matrix: {what}"),
            Error::NonFinite { what } => write!(f, "non-finite value in {what}"),
            Error::Infeasible => write!(f, "constraints are infeasible"),
            Error::DegenerateInnovation => {
                write!(f, "innovation too small to correct a violated constraint")
            }
            Error::Cycling => write!(f, "active-set iteration is cycling"),
        }
    }
}

impl core::error::Error for Error {}

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;
