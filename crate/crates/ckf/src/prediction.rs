//! Constraining the state *prediction*.
//!
//! Three strategies:
//!
//! 1. [`project_transition`] — replace `F` with `F_P = (I − ΥA)F` so the
//!    prediction made from a feasible estimate stays on the equality plane.
//!    Only meaningful for equality constraints. `A F_P x = 0` for every
//!    `x`, so for `b ≠ 0` the literal formula misses the plane; the affine
//!    correction adds the constant `Υb` to the predicted mean, which makes
//!    `A x̂_pred = b` hold for affine constraints (on by default in the
//!    scenario runner, with a switch for the literal form).
//! 2. [`project_prediction`] — project the prediction itself onto the full
//!    constraint region, exactly like projecting an updated estimate.
//! 3. [`lookahead_constraints`] — compose next-step constraints with the
//!    next transition and append them to the current step, so the chosen
//!    estimate already predicts into the feasible region.

use alloc::vec::Vec;

use crate::constraints::ConstraintSet;
use crate::eq_filter::{resolve_upsilon, upsilon, upsilon_identity, ProjectionWeighting};
use crate::ineq_filter::{project_estimate_ineq, IneqDiagnostics, IneqOptions};
use crate::kalman::{predict, GaussianState, LinearModelStep};
use crate::matops::{self, DenseMatrix};
use crate::{Error, Result};

/// `F_P = (I − ΥA) F`. Passing `None` for the weighting uses `W = I`.
pub fn project_transition(
    f: &DenseMatrix,
    a: &DenseMatrix,
    w: Option<&DenseMatrix>,
) -> Result<DenseMatrix> {
    if a.rows() == 0 {
        return Ok(f.clone());
    }
    if a.cols() != f.rows() || !f.is_square() {
        return Err(Error::Dimension {
            op: "project_transition",
            detail: alloc::format!(
                "A {}x{} against F {}x{}",
                a.rows(),
                a.cols(),
                f.rows(),
                f.cols()
            ),
        });
    }
    let ups = match w {
        None => upsilon_identity(a)?,
        Some(w) => upsilon(a, w)?,
    };
    let proj = &DenseMatrix::identity(f.rows()) - &(&ups * a);
    Ok(&proj * f)
}

/// The constant offset `Υb` that puts `F_P`-predictions on `A x = b`.
pub fn affine_prediction_offset(
    a: &DenseMatrix,
    b: &[f64],
    w: Option<&DenseMatrix>,
) -> Result<Vec<f64>> {
    if a.rows() == 0 {
        return Ok(Vec::new());
    }
    let ups = match w {
        None => upsilon_identity(a)?,
        Some(w) => upsilon(a, w)?,
    };
    Ok(ups.matvec(b))
}

/// Project a prediction onto the constraint region; identical machinery to
/// projecting an updated estimate.
pub fn project_prediction(
    pred: &GaussianState,
    cs: &ConstraintSet,
    weighting: &ProjectionWeighting,
    opts: &IneqOptions,
) -> Result<(GaussianState, IneqDiagnostics)> {
    project_estimate_ineq(pred, cs, weighting, opts)
}

/// Compose next-step constraints with the next transition:
/// `{A₊F, b₊, C₊F, d₊}`. Appending these to the current step's constraints
/// makes the constrained estimate predict into next step's feasible region.
pub fn lookahead_constraints(
    cs_next: &ConstraintSet,
    f_next: &DenseMatrix,
) -> Result<ConstraintSet> {
    if f_next.rows() != cs_next.state_dim() || !f_next.is_square() {
        return Err(Error::Dimension {
            op: "lookahead_constraints",
            detail: alloc::format!(
                "F {}x{} against {}-dim constraints",
                f_next.rows(),
                f_next.cols(),
                cs_next.state_dim()
            ),
        });
    }
    ConstraintSet::new(
        cs_next.eq_mat() * f_next,
        cs_next.eq_rhs().to_vec(),
        cs_next.ineq_mat() * f_next,
        cs_next.ineq_rhs().to_vec(),
    )
}

/// Strategy selector for the scenario runner and the step helpers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PredictionStrategy {
    /// Leave the prediction unconstrained.
    None,
    /// Equality-project the transition matrix; `affine` adds the `Υb`
    /// offset so affine (b ≠ 0) constraints hold exactly.
    ProjectTransition { affine: bool },
    /// Run the QP projection on the prediction.
    ProjectPrediction,
    /// Handled at the update: append one-step-lookahead constraints.
    Lookahead,
}

/// Linear-model prediction with the chosen constraining strategy applied.
/// `Lookahead` leaves the prediction itself alone (the composed constraints
/// act on the update instead).
pub fn constrained_predict(
    state: &GaussianState,
    model: &LinearModelStep,
    cs: &ConstraintSet,
    strategy: PredictionStrategy,
    weighting: &ProjectionWeighting,
    opts: &IneqOptions,
) -> Result<(GaussianState, Option<IneqDiagnostics>)> {
    match strategy {
        PredictionStrategy::None | PredictionStrategy::Lookahead => {
            Ok((predict(state, model)?, None))
        }
        PredictionStrategy::ProjectTransition { affine } => {
            if cs.n_eq() == 0 {
                return Ok((predict(state, model)?, None));
            }
            let ups = resolve_upsilon(cs.eq_mat(), weighting, &state.cov)?;
            let proj = &DenseMatrix::identity(state.dim()) - &(&ups * cs.eq_mat());
            let f_p = &proj * &model.f_mat;
            let mut mean = f_p.matvec(&state.mean);
            if affine {
                mean = matops::add_vec(&mean, &ups.matvec(cs.eq_rhs()));
            }
            let cov =
                (&(&(&f_p * &state.cov) * &f_p.transpose()) + &model.q_cov).symmetrized();
            Ok((GaussianState { mean, cov }, None))
        }
        PredictionStrategy::ProjectPrediction => {
            let pred = predict(state, model)?;
            let (projected, diag) = project_prediction(&pred, cs, weighting, opts)?;
            Ok((projected, Some(diag)))
        }
    }
}
