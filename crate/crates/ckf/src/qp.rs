//! Dense convex quadratic programming by a primal active-set method.
//!
//! Problems have the form
//!
//! ```text
//! minimize    x' Q x + c' x
//! subject to  A x  = b
//!             C x ≤ d
//! ```
//!
//! Note the quadratic term carries no ½ factor, so stationarity reads
//! `2 Q x + c + A' μ + C_act' λ = 0` with `λ ≥ 0` on active rows.
//!
//! The solver starts from a feasible point with an empty working set,
//! solves the equality-restricted problem (declared constraints plus the
//! working set) through the saddle-point kernel, then moves from the
//! previous iterate toward that solution as far as the inequalities allow.
//! After every move the working set is rebuilt from the rows holding
//! strictly positive multipliers plus the row that blocked the step; at a
//! stationary iterate the row with the most negative multiplier is dropped
//! (ties to the lowest index). Iterates stay on every working-set row and
//! feasible throughout, which makes the objective non-increasing across
//! iterations.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::matops::{self, DenseMatrix, Qr, SaddleSystem};
use crate::{Error, Result};

/// Convex QP data. Construct through [`QpProblem::new`], which checks the
/// shape and curvature invariants.
#[derive(Clone, Debug)]
pub struct QpProblem {
    pub quad: DenseMatrix,
    pub lin: Vec<f64>,
    pub eq_mat: DenseMatrix,
    pub eq_rhs: Vec<f64>,
    pub ineq_mat: DenseMatrix,
    pub ineq_rhs: Vec<f64>,
}

impl QpProblem {
    pub fn new(
        quad: DenseMatrix,
        lin: Vec<f64>,
        eq_mat: DenseMatrix,
        eq_rhs: Vec<f64>,
        ineq_mat: DenseMatrix,
        ineq_rhs: Vec<f64>,
    ) -> Result<Self> {
        let s = lin.len();
        if quad.shape() != (s, s)
            || eq_mat.cols() != s
            || eq_mat.rows() != eq_rhs.len()
            || ineq_mat.cols() != s
            || ineq_mat.rows() != ineq_rhs.len()
        {
            return Err(Error::Dimension {
                op: "QpProblem::new",
                detail: format!(
                    "quad {}x{}, lin {}, A {}x{} ({} rhs), C {}x{} ({} rhs)",
                    quad.rows(),
                    quad.cols(),
                    s,
                    eq_mat.rows(),
                    eq_mat.cols(),
                    eq_rhs.len(),
                    ineq_mat.rows(),
                    ineq_mat.cols(),
                    ineq_rhs.len()
                ),
            });
        }
        if !quad.is_symmetric(1e-9) {
            return Err(Error::NotPositiveDefinite {
                what: "QP quadratic term not symmetric",
            });
        }
        let quad = quad.symmetrized();
        let scale = quad.max_abs().max(1.0);
        if matops::sym_eigenvalues(&quad)
            .first()
            .is_some_and(|&min| min < -1e-10 * scale)
        {
            return Err(Error::NotPositiveDefinite {
                what: "QP quadratic term",
            });
        }
        Ok(QpProblem {
            quad,
            lin,
            eq_mat,
            eq_rhs,
            ineq_mat,
            ineq_rhs,
        })
    }

    pub fn dim(&self) -> usize {
        self.lin.len()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        matops::dot(x, &self.quad.matvec(x)) + matops::dot(&self.lin, x)
    }

    fn is_feasible(&self, x: &[f64], tol: f64) -> bool {
        if self.eq_mat.rows() > 0 {
            let r = matops::sub_vec(&self.eq_mat.matvec(x), &self.eq_rhs);
            if matops::norm_inf(&r) > tol {
                return false;
            }
        }
        for i in 0..self.ineq_mat.rows() {
            if matops::dot(&self.ineq_mat.row(i), x) - self.ineq_rhs[i] > tol {
                return false;
            }
        }
        true
    }
}

/// Solver knobs. `tol` is the KKT/feasibility tolerance, `step_tol` the
/// iterate-movement threshold that declares stationarity.
#[derive(Clone, Copy, Debug)]
pub struct QpOptions {
    pub tol: f64,
    pub step_tol: f64,
    pub max_iter: usize,
}

impl Default for QpOptions {
    fn default() -> Self {
        QpOptions {
            tol: 1e-9,
            step_tol: 1e-10,
            max_iter: 100,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QpStatus {
    Converged,
    MaxIterations,
    Infeasible,
}

/// Solution report. `active_set` lists the inequality rows held as
/// equalities at the final iterate; `multipliers_ineq` is zero off the
/// active set. `last_step` is the movement of the final iteration (the
/// convergence-defining one), which the filters turn into the rank-one
/// safety term.
#[derive(Clone, Debug)]
pub struct QpSolution {
    pub x: Vec<f64>,
    pub active_set: Vec<usize>,
    pub multipliers_eq: Vec<f64>,
    pub multipliers_ineq: Vec<f64>,
    pub status: QpStatus,
    pub iterations: usize,
    pub last_step: Vec<f64>,
}

/// Solve the equality-constrained QP
/// `min x'Qx + c'x  s.t.  A x = b`
/// by assembling the KKT system as a saddle-point problem. Returns the
/// minimizer and the multipliers satisfying `2Qx + c + A'μ = 0`.
pub fn solve_eq_qp(
    quad: &DenseMatrix,
    lin: &[f64],
    eq_mat: &DenseMatrix,
    eq_rhs: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let sys = SaddleSystem {
        a_block: quad.scaled(2.0),
        b_block: eq_mat.clone(),
        c_block: DenseMatrix::zeros(eq_mat.rows(), eq_mat.rows()),
        rhs_top: matops::scale_vec(lin, -1.0),
        rhs_bottom: eq_rhs.to_vec(),
    };
    matops::saddle_solve(&sys)
}

/// Largest `τ ∈ [0, 1]` such that `x_prev + τ s_dir` stays inside
/// `C x ≤ d`, assuming `x_prev` itself is feasible. Returns the first
/// blocking row when `τ < 1`.
pub fn max_step(
    x_prev: &[f64],
    s_dir: &[f64],
    ineq_mat: &DenseMatrix,
    ineq_rhs: &[f64],
) -> (f64, Option<usize>) {
    let mut tau = 1.0f64;
    let mut blocking = None;
    let s_norm = matops::norm2(s_dir);
    for i in 0..ineq_mat.rows() {
        let row = ineq_mat.row(i);
        let advance = matops::dot(&row, s_dir);
        if advance <= 1e-14 * (1.0 + matops::norm2(&row) * s_norm) {
            continue; // moving along or away from this face
        }
        let slack = ineq_rhs[i] - matops::dot(&row, x_prev);
        let ratio = (slack / advance).max(0.0);
        if ratio < tau {
            tau = ratio;
            blocking = Some(i);
        }
    }
    (tau, blocking)
}

/// Cyclic projection onto the constraint rows, used to repair an infeasible
/// starting point. Returns `None` when 100 sweeps fail to reach
/// feasibility.
fn project_onto_constraints(qp: &QpProblem, x0: &[f64], tol: f64) -> Option<Vec<f64>> {
    let mut x = x0.to_vec();
    for _sweep in 0..100 {
        if qp.is_feasible(&x, tol) {
            return Some(x);
        }
        for i in 0..qp.eq_mat.rows() {
            let row = qp.eq_mat.row(i);
            let nn = matops::dot(&row, &row);
            if nn == 0.0 {
                continue;
            }
            let r = qp.eq_rhs[i] - matops::dot(&row, &x);
            for (xj, aj) in x.iter_mut().zip(&row) {
                *xj += aj * r / nn;
            }
        }
        for i in 0..qp.ineq_mat.rows() {
            let row = qp.ineq_mat.row(i);
            let nn = matops::dot(&row, &row);
            if nn == 0.0 {
                continue;
            }
            let viol = matops::dot(&row, &x) - qp.ineq_rhs[i];
            if viol > 0.0 {
                for (xj, cj) in x.iter_mut().zip(&row) {
                    *xj -= cj * viol / nn;
                }
            }
        }
    }
    qp.is_feasible(&x, tol).then_some(x)
}

fn select_rows(mat: &DenseMatrix, rows: &[usize]) -> DenseMatrix {
    DenseMatrix::from_fn(rows.len(), mat.cols(), |i, j| mat[(rows[i], j)])
}

/// Stacked declared equalities plus working-set rows keep full row rank?
fn stack_is_independent(qp: &QpProblem, working: &[usize]) -> bool {
    let total = qp.eq_mat.rows() + working.len();
    if total == 0 {
        return true;
    }
    if total > qp.dim() {
        return false;
    }
    let stacked = DenseMatrix::vstack(&[&qp.eq_mat, &select_rows(&qp.ineq_mat, working)]);
    Qr::factor(&stacked.transpose()).has_full_column_rank(1e-10)
}

/// Active-set solve of a convex QP from the starting point `x0`.
///
/// An infeasible `x0` is first repaired by cyclic projection; failure to
/// repair reports `QpStatus::Infeasible`. Hitting the iteration cap reports
/// `QpStatus::MaxIterations` with the best iterate found.
pub fn solve(qp: &QpProblem, x0: &[f64], opts: &QpOptions) -> Result<QpSolution> {
    let s_dim = qp.dim();
    if x0.len() != s_dim {
        return Err(Error::Dimension {
            op: "qp::solve",
            detail: format!("x0 has {} entries for a {s_dim}-dim problem", x0.len()),
        });
    }
    let n_ineq = qp.ineq_mat.rows();
    let infeasible_solution = |x: Vec<f64>| QpSolution {
        x,
        active_set: Vec::new(),
        multipliers_eq: vec![0.0; qp.eq_mat.rows()],
        multipliers_ineq: vec![0.0; n_ineq],
        status: QpStatus::Infeasible,
        iterations: 0,
        last_step: vec![0.0; s_dim],
    };

    let mut x = if qp.is_feasible(x0, opts.tol) {
        x0.to_vec()
    } else {
        match project_onto_constraints(qp, x0, opts.tol) {
            Some(x) => x,
            None => return Ok(infeasible_solution(x0.to_vec())),
        }
    };

    let mut working: Vec<usize> = Vec::new();
    let mut zero_steps = 0usize;
    let mut last_step = vec![0.0; s_dim];

    for iteration in 1..=opts.max_iter {
        let stacked_mat = DenseMatrix::vstack(&[&qp.eq_mat, &select_rows(&qp.ineq_mat, &working)]);
        let mut stacked_rhs = qp.eq_rhs.clone();
        stacked_rhs.extend(working.iter().map(|&i| qp.ineq_rhs[i]));
        let (x_star, mults) = solve_eq_qp(&qp.quad, &qp.lin, &stacked_mat, &stacked_rhs)?;
        let mult_eq = &mults[..qp.eq_mat.rows()];
        let mult_working = &mults[qp.eq_mat.rows()..];

        let s_dir = matops::sub_vec(&x_star, &x);
        if matops::norm2(&s_dir) <= opts.step_tol * (1.0 + matops::norm2(&x)) {
            // stationary on the working set: optimal or a row must leave
            let mut worst: Option<(usize, f64)> = None;
            for (pos, &lam) in mult_working.iter().enumerate() {
                if lam < -opts.tol && worst.map_or(true, |(_, w)| lam < w) {
                    worst = Some((pos, lam));
                }
            }
            match worst {
                None => {
                    let mut multipliers_ineq = vec![0.0; n_ineq];
                    for (pos, &row) in working.iter().enumerate() {
                        multipliers_ineq[row] = mult_working[pos];
                    }
                    return Ok(QpSolution {
                        x,
                        active_set: working,
                        multipliers_eq: mult_eq.to_vec(),
                        multipliers_ineq,
                        status: QpStatus::Converged,
                        iterations: iteration,
                        last_step: s_dir,
                    });
                }
                Some((pos, _)) => {
                    working.remove(pos);
                    zero_steps += 1;
                    if zero_steps > s_dim {
                        return Err(Error::Cycling);
                    }
                    continue;
                }
            }
        }

        let (tau, blocking) = max_step(&x, &s_dir, &qp.ineq_mat, &qp.ineq_rhs);
        let step = matops::scale_vec(&s_dir, tau);
        x = matops::add_vec(&x, &step);
        last_step = step;
        if tau > 0.0 {
            zero_steps = 0;
        } else {
            zero_steps += 1;
            if zero_steps > s_dim {
                return Err(Error::Cycling);
            }
        }

        // the previous working set is not carried over: keep only rows that
        // still hold a strictly positive multiplier, plus the blocking row
        let mut next: Vec<usize> = working
            .iter()
            .enumerate()
            .filter(|(pos, _)| mult_working[*pos] > opts.tol)
            .map(|(_, &row)| row)
            .collect();
        if tau < 1.0 {
            if let Some(b) = blocking {
                if !next.contains(&b) {
                    let mut candidate = next.clone();
                    candidate.push(b);
                    candidate.sort_unstable();
                    if stack_is_independent(qp, &candidate) {
                        next = candidate;
                    }
                }
            }
        }
        next.sort_unstable();
        working = next;
    }

    Ok(QpSolution {
        x,
        active_set: working,
        multipliers_eq: vec![0.0; qp.eq_mat.rows()],
        multipliers_ineq: vec![0.0; n_ineq],
        status: QpStatus::MaxIterations,
        iterations: opts.max_iter,
        last_step,
    })
}
