//! Constraint data model and linearization of nonlinear constraints.
//!
//! A [`ConstraintSet`] carries an equality family `A x = b` and an
//! inequality family `C x ≤ d`; either may be empty. Equality matrices must
//! have full row rank — the projection formulas invert `A W⁻¹ A'`, and a
//! silently rank-deficient `A` would mask a modeling error, so it is
//! rejected at construction.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

use crate::kalman::{central_difference_jacobian, JacobianSpec};
use crate::matops::{self, DenseMatrix, Qr};
use crate::{Error, Result};

/// Relative tolerance for the full-row-rank check on equality matrices.
pub const RANK_TOL: f64 = 1e-10;

/// Default absolute tolerance for feasibility checks.
pub const FEASIBILITY_TOL: f64 = 1e-8;

/// Linear equality and inequality constraints on an `n`-dimensional state.
#[derive(Clone, Debug)]
pub struct ConstraintSet {
    state_dim: usize,
    eq_mat: DenseMatrix,
    eq_rhs: Vec<f64>,
    ineq_mat: DenseMatrix,
    ineq_rhs: Vec<f64>,
}

impl ConstraintSet {
    /// An unconstrained set for an `n`-dimensional state.
    pub fn empty(state_dim: usize) -> Self {
        ConstraintSet {
            state_dim,
            eq_mat: DenseMatrix::zeros(0, state_dim),
            eq_rhs: Vec::new(),
            ineq_mat: DenseMatrix::zeros(0, state_dim),
            ineq_rhs: Vec::new(),
        }
    }

    pub fn new(
        eq_mat: DenseMatrix,
        eq_rhs: Vec<f64>,
        ineq_mat: DenseMatrix,
        ineq_rhs: Vec<f64>,
    ) -> Result<Self> {
        let state_dim = if eq_mat.rows() > 0 {
            eq_mat.cols()
        } else {
            ineq_mat.cols()
        };
        if eq_mat.cols() != state_dim
            || ineq_mat.cols() != state_dim
            || eq_mat.rows() != eq_rhs.len()
            || ineq_mat.rows() != ineq_rhs.len()
        {
            return Err(Error::Dimension {
                op: "ConstraintSet::new",
                detail: format!(
                    "A {}x{} with {} rhs, C {}x{} with {} rhs",
                    eq_mat.rows(),
                    eq_mat.cols(),
                    eq_rhs.len(),
                    ineq_mat.rows(),
                    ineq_mat.cols(),
                    ineq_rhs.len()
                ),
            });
        }
        if eq_mat.rows() > state_dim {
            return Err(Error::RankDeficient {
                what: "more equality rows than state dimensions",
            });
        }
        if eq_mat.rows() > 0 {
            let qr = Qr::factor(&eq_mat.transpose());
            if !qr.has_full_column_rank(RANK_TOL) {
                return Err(Error::RankDeficient {
                    what: "equality constraint matrix",
                });
            }
        }
        Ok(ConstraintSet {
            state_dim,
            eq_mat,
            eq_rhs,
            ineq_mat,
            ineq_rhs,
        })
    }

    pub fn equalities_only(eq_mat: DenseMatrix, eq_rhs: Vec<f64>) -> Result<Self> {
        let n = eq_mat.cols();
        Self::new(eq_mat, eq_rhs, DenseMatrix::zeros(0, n), Vec::new())
    }

    pub fn inequalities_only(ineq_mat: DenseMatrix, ineq_rhs: Vec<f64>) -> Result<Self> {
        let n = ineq_mat.cols();
        Self::new(DenseMatrix::zeros(0, n), Vec::new(), ineq_mat, ineq_rhs)
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn n_eq(&self) -> usize {
        self.eq_mat.rows()
    }

    pub fn n_ineq(&self) -> usize {
        self.ineq_mat.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.n_eq() == 0 && self.n_ineq() == 0
    }

    pub fn eq_mat(&self) -> &DenseMatrix {
        &self.eq_mat
    }

    pub fn eq_rhs(&self) -> &[f64] {
        &self.eq_rhs
    }

    pub fn ineq_mat(&self) -> &DenseMatrix {
        &self.ineq_mat
    }

    pub fn ineq_rhs(&self) -> &[f64] {
        &self.ineq_rhs
    }

    /// Append the rows of `other` (same state dimension) to this set.
    pub fn merged(&self, other: &ConstraintSet) -> Result<ConstraintSet> {
        if other.state_dim != self.state_dim {
            return Err(Error::Dimension {
                op: "ConstraintSet::merged",
                detail: format!("state dims {} vs {}", self.state_dim, other.state_dim),
            });
        }
        let eq_mat = DenseMatrix::vstack(&[&self.eq_mat, &other.eq_mat]);
        let mut eq_rhs = self.eq_rhs.clone();
        eq_rhs.extend_from_slice(&other.eq_rhs);
        let ineq_mat = DenseMatrix::vstack(&[&self.ineq_mat, &other.ineq_mat]);
        let mut ineq_rhs = self.ineq_rhs.clone();
        ineq_rhs.extend_from_slice(&other.ineq_rhs);
        ConstraintSet::new(eq_mat, eq_rhs, ineq_mat, ineq_rhs)
    }
}

/// `true` iff `‖A x − b‖∞ ≤ tol` and every component of `C x − d ≤ tol`.
pub fn is_feasible(x: &[f64], cs: &ConstraintSet, tol: f64) -> bool {
    if cs.n_eq() > 0 {
        let r = matops::sub_vec(&cs.eq_mat.matvec(x), &cs.eq_rhs);
        if matops::norm_inf(&r) > tol {
            return false;
        }
    }
    if cs.n_ineq() > 0 {
        let cx = cs.ineq_mat.matvec(x);
        for (v, d) in cx.iter().zip(&cs.ineq_rhs) {
            if v - d > tol {
                return false;
            }
        }
    }
    true
}

/// Largest violation of any constraint row at `x` (0 when feasible).
pub fn max_violation(x: &[f64], cs: &ConstraintSet) -> f64 {
    let mut worst = 0.0f64;
    if cs.n_eq() > 0 {
        let r = matops::sub_vec(&cs.eq_mat.matvec(x), &cs.eq_rhs);
        worst = worst.max(matops::norm_inf(&r));
    }
    if cs.n_ineq() > 0 {
        let cx = cs.ineq_mat.matvec(x);
        for (v, d) in cx.iter().zip(&cs.ineq_rhs) {
            worst = worst.max(v - d);
        }
    }
    worst
}

/// Whether a nonlinear constraint is an equality `c(x) = d` or an
/// inequality `c(x) ≤ d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstraintKind {
    Equality,
    Inequality,
}

/// A nonlinear constraint `c(x) = d` (or `≤ d`), linearized on demand.
pub struct NonlinearConstraint {
    pub value_fn: Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
    pub rhs: Vec<f64>,
    pub jacobian: JacobianSpec,
    pub kind: ConstraintKind,
}

/// First-order approximation about `x_ref`: returns `(C̃, d̃)` with
/// `C̃` the Jacobian of `c` at `x_ref` and `d̃ = d + C̃ x_ref − c(x_ref)`,
/// so that `C̃ x ≤ d̃` (or `= d̃`) stands in for the nonlinear constraint.
pub fn linearize_constraint(
    nc: &NonlinearConstraint,
    x_ref: &[f64],
) -> Result<(DenseMatrix, Vec<f64>)> {
    let p = nc.rhs.len();
    let c_ref = (nc.value_fn)(x_ref);
    if c_ref.len() != p {
        return Err(Error::Dimension {
            op: "linearize_constraint",
            detail: format!("constraint value has {} rows, rhs has {}", c_ref.len(), p),
        });
    }
    if c_ref.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "constraint value",
        });
    }
    let jac = match &nc.jacobian {
        JacobianSpec::Analytic(j) => j(x_ref),
        JacobianSpec::FiniteDifference => central_difference_jacobian(&*nc.value_fn, x_ref, p),
    };
    if !jac.is_finite() {
        return Err(Error::NonFinite {
            what: "constraint Jacobian",
        });
    }
    let mut d_tilde = matops::add_vec(&nc.rhs, &jac.matvec(x_ref));
    for (dt, c) in d_tilde.iter_mut().zip(&c_ref) {
        *dt -= c;
    }
    Ok((jac, d_tilde))
}

/// Source of per-step constraints: fixed, time-varying, or derived from the
/// current reference state (re-linearized nonlinear constraints).
pub trait ConstraintProvider {
    fn constraint_set(&self, step: usize, x_ref: &[f64]) -> Result<ConstraintSet>;
}

/// The same linear constraints at every step.
pub struct FixedConstraints(pub ConstraintSet);

impl ConstraintProvider for FixedConstraints {
    fn constraint_set(&self, _step: usize, _x_ref: &[f64]) -> Result<ConstraintSet> {
        Ok(self.0.clone())
    }
}

/// Nonlinear constraints re-linearized about the reference state each call.
pub struct LinearizedConstraints {
    pub constraints: Vec<NonlinearConstraint>,
    pub state_dim: usize,
}

impl ConstraintProvider for LinearizedConstraints {
    fn constraint_set(&self, _step: usize, x_ref: &[f64]) -> Result<ConstraintSet> {
        let mut set = ConstraintSet::empty(self.state_dim);
        for nc in &self.constraints {
            let (c_mat, d_vec) = linearize_constraint(nc, x_ref)?;
            let piece = match nc.kind {
                ConstraintKind::Equality => ConstraintSet::equalities_only(c_mat, d_vec)?,
                ConstraintKind::Inequality => ConstraintSet::inequalities_only(c_mat, d_vec)?,
            };
            set = set.merged(&piece)?;
        }
        Ok(set)
    }
}
