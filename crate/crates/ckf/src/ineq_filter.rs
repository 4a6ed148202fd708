//! Inequality-constrained Kalman filtering.
//!
//! The two equality methods generalize through the active-set QP: the
//! estimate is either projected onto `{Ax = b, Cx ≤ d}`, or the gain is
//! re-optimized over the same region in `vec(K)` space. No closed forms
//! exist here, so both routes report diagnostics from the numerical solve.
//!
//! Covariances are projected with the *equality* constraints only — rows in
//! the QP's active set still represent inequalities on the state, and the
//! exact projection onto an inequality region has no simple form. A
//! rank-one "safety" outer product of the solver's final step is added as a
//! bound on the remaining convergence error; it vanishes when the solve
//! converges cleanly.

use alloc::vec;
use alloc::vec::Vec;

use crate::constraints::{self, ConstraintSet};
use crate::eq_filter::{project_covariance, resolve_upsilon, ProjectionWeighting};
use crate::kalman::{
    innovate, optimal_gain, predict, update, GaussianState, Innovation, LinearModelStep,
};
use crate::matops::{self, kron, outer, unvec, Cholesky, DenseMatrix};
use crate::qp::{self, QpOptions, QpProblem, QpStatus};
use crate::{Error, Result};

/// Options for the constrained solves.
#[derive(Clone, Copy, Debug)]
pub struct IneqOptions {
    /// Active-set solver settings; the default caps the inner loop at 20
    /// working-set refreshes and declares convergence at `‖Δx‖ ≤ 1e-10`.
    pub qp: QpOptions,
    /// Add the rank-one convergence-error term to projected covariances.
    pub safety_term: bool,
}

impl Default for IneqOptions {
    fn default() -> Self {
        IneqOptions {
            qp: QpOptions {
                tol: 1e-9,
                step_tol: 1e-10,
                max_iter: 20,
            },
            safety_term: true,
        }
    }
}

/// What the numerical solve did: final active set, iteration count, solve
/// status, and the state-space step backing the safety term.
#[derive(Clone, Debug)]
pub struct IneqDiagnostics {
    pub active_set: Vec<usize>,
    pub iterations: usize,
    pub status: QpStatus,
    pub safety_step: Vec<f64>,
}

impl IneqDiagnostics {
    fn trivial(n: usize) -> Self {
        IneqDiagnostics {
            active_set: Vec::new(),
            iterations: 0,
            status: QpStatus::Converged,
            safety_step: vec![0.0; n],
        }
    }
}

/// Materialize the weighting matrix itself (the QP's quadratic term).
fn weighting_matrix(
    weighting: &ProjectionWeighting,
    cov: &DenseMatrix,
    n: usize,
) -> Result<DenseMatrix> {
    match weighting {
        ProjectionWeighting::Identity => Ok(DenseMatrix::identity(n)),
        ProjectionWeighting::Custom(w) => Ok(w.clone()),
        ProjectionWeighting::InverseUpdatedCov => {
            let chol = match Cholesky::factor(cov, "state covariance") {
                Ok(c) => c,
                Err(_) => {
                    let ridge = 1e-12 * cov.trace() / n as f64;
                    let mut reg = cov.clone();
                    for i in 0..n {
                        reg[(i, i)] += ridge;
                    }
                    Cholesky::factor(&reg, "regularized state covariance")?
                }
            };
            Ok(chol.solve_mat(&DenseMatrix::identity(n)).symmetrized())
        }
    }
}

/// Project the covariance with the equality rows only, then add the safety
/// term when requested.
fn constrained_covariance(
    cov: &DenseMatrix,
    cs: &ConstraintSet,
    weighting: &ProjectionWeighting,
    safety_step: &[f64],
    add_safety: bool,
) -> Result<DenseMatrix> {
    let mut out = if cs.n_eq() > 0 {
        let ups = resolve_upsilon(cs.eq_mat(), weighting, cov)?;
        project_covariance(cov, cs.eq_mat(), &ups)
    } else {
        cov.clone()
    };
    if add_safety {
        out = (&out + &outer(safety_step, safety_step)).symmetrized();
    }
    Ok(out)
}

/// Project a state onto the constraint region: the mean solves
/// `min (x − x̂)' W (x − x̂)` over `{Ax = b, Cx ≤ d}` by the active-set
/// method; the covariance is equality-projected plus the safety term.
pub fn project_estimate_ineq(
    state: &GaussianState,
    cs: &ConstraintSet,
    weighting: &ProjectionWeighting,
    opts: &IneqOptions,
) -> Result<(GaussianState, IneqDiagnostics)> {
    let n = state.dim();
    if cs.is_empty() {
        return Ok((state.clone(), IneqDiagnostics::trivial(n)));
    }
    if cs.state_dim() != n {
        return Err(Error::Dimension {
            op: "project_estimate_ineq",
            detail: alloc::format!("constraints on {} dims, state has {n}", cs.state_dim()),
        });
    }
    let w = weighting_matrix(weighting, &state.cov, n)?;
    let lin = matops::scale_vec(&w.matvec(&state.mean), -2.0);
    let problem = QpProblem::new(
        w,
        lin,
        cs.eq_mat().clone(),
        cs.eq_rhs().to_vec(),
        cs.ineq_mat().clone(),
        cs.ineq_rhs().to_vec(),
    )?;
    let sol = qp::solve(&problem, &state.mean, &opts.qp)?;
    if sol.status == QpStatus::Infeasible {
        return Err(Error::Infeasible);
    }
    let cov = constrained_covariance(
        &state.cov,
        cs,
        weighting,
        &sol.last_step,
        opts.safety_term,
    )?;
    let diagnostics = IneqDiagnostics {
        active_set: sol.active_set,
        iterations: sol.iterations,
        status: sol.status,
        safety_step: sol.last_step,
    };
    Ok((
        GaussianState {
            mean: sol.x,
            cov,
        },
        diagnostics,
    ))
}

/// Re-optimize the gain subject to the update landing inside the
/// constraint region. The QP runs over `l = vec(K − K_opt)` with quadratic
/// term `S ⊗ I`, equality rows `ν' ⊗ A` and inequality rows `ν' ⊗ C`
/// (right-hand sides are the slacks of the unconstrained update), so the
/// unconstrained optimum sits at the origin.
pub fn restricted_gain_ineq(
    pred: &GaussianState,
    model: &LinearModelStep,
    innov: &Innovation,
    cs: &ConstraintSet,
    opts: &IneqOptions,
) -> Result<(DenseMatrix, IneqDiagnostics)> {
    let n = pred.dim();
    let m = model.meas_dim();
    let gain = optimal_gain(&pred.cov, model, innov)?;
    if cs.is_empty() {
        return Ok((gain, IneqDiagnostics::trivial(n)));
    }
    if cs.state_dim() != n {
        return Err(Error::Dimension {
            op: "restricted_gain_ineq",
            detail: alloc::format!("constraints on {} dims, state has {n}", cs.state_dim()),
        });
    }
    let x_upd = matops::add_vec(&pred.mean, &gain.matvec(&innov.residual));
    let feasible = constraints::is_feasible(&x_upd, cs, constraints::FEASIBILITY_TOL);

    let chol_s = Cholesky::factor(&innov.residual_cov, "innovation covariance")?;
    let s_inv_nu = chol_s.solve_vec(&innov.residual);
    if matops::dot(&innov.residual, &s_inv_nu).abs() < 1e-14 {
        return if feasible {
            Ok((gain, IneqDiagnostics::trivial(n)))
        } else {
            Err(Error::DegenerateInnovation)
        };
    }

    let nu_row = DenseMatrix::from_col_major(1, m, innov.residual.clone());
    let quad = kron(&innov.residual_cov, &DenseMatrix::identity(n));
    let eq_mat = kron(&nu_row, cs.eq_mat());
    let eq_rhs = matops::sub_vec(cs.eq_rhs(), &cs.eq_mat().matvec(&x_upd));
    let ineq_mat = kron(&nu_row, cs.ineq_mat());
    let ineq_rhs = matops::sub_vec(cs.ineq_rhs(), &cs.ineq_mat().matvec(&x_upd));
    let problem = QpProblem::new(quad, vec![0.0; n * m], eq_mat, eq_rhs, ineq_mat, ineq_rhs)?;
    let sol = qp::solve(&problem, &vec![0.0; n * m], &opts.qp)?;
    if sol.status == QpStatus::Infeasible {
        return Err(Error::Infeasible);
    }
    let delta = unvec(&sol.x, n, m)?;
    // the safety step lives in state space: (ΔK_last) ν
    let safety_step = unvec(&sol.last_step, n, m)?.matvec(&innov.residual);
    let diagnostics = IneqDiagnostics {
        active_set: sol.active_set,
        iterations: sol.iterations,
        status: sol.status,
        safety_step,
    };
    Ok((&gain + &delta, diagnostics))
}

/// Which inequality-constraining method a step uses.
#[derive(Clone, Debug)]
pub enum IneqMethod {
    Projection(ProjectionWeighting),
    RestrictedGain,
}

/// Gain → update → constrain, given an existing prediction and innovation.
/// This is the tail of [`ineq_constrained_step`], split out so extended
/// (per-step linearized) filters can drive it with their own predictions.
pub fn constrain_update(
    pred: &GaussianState,
    model: &LinearModelStep,
    innov: &Innovation,
    cs: &ConstraintSet,
    method: &IneqMethod,
    opts: &IneqOptions,
) -> Result<(GaussianState, IneqDiagnostics)> {
    if cs.is_empty() {
        let gain = optimal_gain(&pred.cov, model, innov)?;
        let upd = update(pred, &gain, innov, model)?;
        let n = upd.dim();
        return Ok((upd, IneqDiagnostics::trivial(n)));
    }
    match method {
        IneqMethod::Projection(w) => {
            let gain = optimal_gain(&pred.cov, model, innov)?;
            let upd = update(pred, &gain, innov, model)?;
            project_estimate_ineq(&upd, cs, w, opts)
        }
        IneqMethod::RestrictedGain => {
            let (gain, diagnostics) = restricted_gain_ineq(pred, model, innov, cs, opts)?;
            let upd = update(pred, &gain, innov, model)?;
            let cov = constrained_covariance(
                &upd.cov,
                cs,
                &ProjectionWeighting::Identity,
                &diagnostics.safety_step,
                opts.safety_term,
            )?;
            Ok((
                GaussianState {
                    mean: upd.mean,
                    cov,
                },
                diagnostics,
            ))
        }
    }
}

/// One full predict → innovate → gain → update → constrain cycle against a
/// general constraint set. The covariance uses the Joseph form of the gain
/// actually applied, projected with the equality rows only, plus the
/// safety term.
pub fn ineq_constrained_step(
    state: &GaussianState,
    model: &LinearModelStep,
    z: &[f64],
    cs: &ConstraintSet,
    method: &IneqMethod,
    opts: &IneqOptions,
) -> Result<(GaussianState, IneqDiagnostics)> {
    let pred = predict(state, model)?;
    let innov = innovate(&pred, model, z)?;
    constrain_update(&pred, model, &innov, cs, method, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eq_filter::{project_estimate, restricted_gain};
    use crate::rng::{random_matrix, random_spd, random_vec, SplitMix64};

    fn box_constraints(n: usize, row: usize, bound: f64) -> ConstraintSet {
        let mut c = DenseMatrix::zeros(2, n);
        c[(0, row)] = 1.0;
        c[(1, row)] = -1.0;
        ConstraintSet::inequalities_only(c, vec![bound, bound]).unwrap()
    }

    #[test]
    fn feasible_mean_is_untouched_and_safety_vanishes() {
        let cs = box_constraints(2, 1, 1.0);
        let state = GaussianState::new(vec![0.3, 0.4], DenseMatrix::identity(2)).unwrap();
        let (out, diag) = project_estimate_ineq(
            &state,
            &cs,
            &ProjectionWeighting::Identity,
            &IneqOptions::default(),
        )
        .unwrap();
        assert!(matops::norm_inf(&matops::sub_vec(&out.mean, &state.mean)) < 1e-12);
        let safety = outer(&diag.safety_step, &diag.safety_step);
        assert!(safety.max_abs() <= 1e-12);
        assert_eq!(diag.status, QpStatus::Converged);
    }

    #[test]
    fn clamps_to_bound() {
        let cs = box_constraints(2, 1, 1.0);
        let state = GaussianState::new(vec![0.0, 1.5], DenseMatrix::identity(2)).unwrap();
        let (out, diag) = project_estimate_ineq(
            &state,
            &cs,
            &ProjectionWeighting::Identity,
            &IneqOptions::default(),
        )
        .unwrap();
        assert!(out.mean[0].abs() < 1e-12);
        assert!((out.mean[1] - 1.0).abs() < 1e-12);
        assert_eq!(diag.active_set, vec![0]);
    }

    #[test]
    fn infeasible_constraints_error() {
        let c = DenseMatrix::from_row_major(2, 1, &[1.0, -1.0]);
        let cs = ConstraintSet::inequalities_only(c, vec![-1.0, -1.0]).unwrap();
        let state = GaussianState::new(vec![0.0], DenseMatrix::identity(1)).unwrap();
        assert!(matches!(
            project_estimate_ineq(
                &state,
                &cs,
                &ProjectionWeighting::Identity,
                &IneqOptions::default()
            ),
            Err(Error::Infeasible)
        ));
    }

    #[test]
    fn matches_equality_projection_when_no_inequality_is_active() {
        let mut rng = SplitMix64::new(4);
        for _ in 0..20 {
            let n = 3;
            let state = GaussianState::new(
                random_vec(&mut rng, n, -0.3, 0.3),
                random_spd(&mut rng, n, 1.0),
            )
            .unwrap();
            let a = random_matrix(&mut rng, 1, n, -1.0, 1.0);
            let b = vec![0.0];
            // wide bounds stay inactive
            let mut c = DenseMatrix::zeros(2, n);
            c[(0, 0)] = 1.0;
            c[(1, 0)] = -1.0;
            let cs = ConstraintSet::new(a.clone(), b.clone(), c, vec![100.0, 100.0]).unwrap();
            let mut opts = IneqOptions::default();
            opts.safety_term = false;
            let (via_qp, diag) =
                project_estimate_ineq(&state, &cs, &ProjectionWeighting::Identity, &opts)
                    .unwrap();
            assert!(diag.active_set.is_empty());
            let via_eq =
                project_estimate(&state, &a, &b, &ProjectionWeighting::Identity).unwrap();
            assert!(
                matops::norm_inf(&matops::sub_vec(&via_qp.mean, &via_eq.mean)) < 1e-12
            );
            assert!((&via_qp.cov - &via_eq.cov).max_abs() < 1e-12);
        }
    }

    #[test]
    fn restricted_gain_reduces_to_optimal_when_update_feasible() {
        let mut rng = SplitMix64::new(21);
        let n = 2;
        let pred = GaussianState::new(vec![0.0, 0.0], random_spd(&mut rng, n, 1.0)).unwrap();
        let model = LinearModelStep {
            f_mat: DenseMatrix::identity(n),
            q_cov: DenseMatrix::zeros(n, n),
            h_mat: DenseMatrix::identity(n),
            r_cov: random_spd(&mut rng, n, 1.0),
        };
        let innov = innovate(&pred, &model, &[0.1, -0.1]).unwrap();
        let cs = box_constraints(n, 1, 1.0);
        let (k, diag) =
            restricted_gain_ineq(&pred, &model, &innov, &cs, &IneqOptions::default()).unwrap();
        let k_opt = optimal_gain(&pred.cov, &model, &innov).unwrap();
        assert!((&k - &k_opt).max_abs() < 1e-10);
        assert!(diag.active_set.is_empty());
    }

    #[test]
    fn restricted_gain_matches_analytic_equality_formula() {
        let mut rng = SplitMix64::new(42);
        for _ in 0..30 {
            let (n, m) = (3, 2);
            let pred = GaussianState::new(
                random_vec(&mut rng, n, -1.0, 1.0),
                random_spd(&mut rng, n, 1.0),
            )
            .unwrap();
            let model = LinearModelStep {
                f_mat: DenseMatrix::identity(n),
                q_cov: DenseMatrix::zeros(n, n),
                h_mat: random_matrix(&mut rng, m, n, -1.0, 1.0),
                r_cov: random_spd(&mut rng, m, 1.0),
            };
            let z = random_vec(&mut rng, m, -1.0, 1.0);
            let innov = innovate(&pred, &model, &z).unwrap();
            let a = random_matrix(&mut rng, 1, n, -1.0, 1.0);
            let b = random_vec(&mut rng, 1, -0.5, 0.5);
            let cs = ConstraintSet::equalities_only(a.clone(), b.clone()).unwrap();
            let (k_qp, _) =
                restricted_gain_ineq(&pred, &model, &innov, &cs, &IneqOptions::default())
                    .unwrap();
            let k_analytic = restricted_gain(&pred, &model, &innov, &a, &b).unwrap();
            assert!((&k_qp - &k_analytic).max_abs() < 1e-8);
        }
    }

    #[test]
    fn scalar_bound_forces_update_onto_bound() {
        // n = m = 1, the unconstrained update overshoots the bound
        let pred = GaussianState::new(
            vec![0.9],
            DenseMatrix::from_row_major(1, 1, &[4.0]),
        )
        .unwrap();
        let model = LinearModelStep {
            f_mat: DenseMatrix::identity(1),
            q_cov: DenseMatrix::zeros(1, 1),
            h_mat: DenseMatrix::identity(1),
            r_cov: DenseMatrix::from_row_major(1, 1, &[0.25]),
        };
        let innov = innovate(&pred, &model, &[5.0]).unwrap();
        let cs = ConstraintSet::inequalities_only(
            DenseMatrix::from_row_major(1, 1, &[1.0]),
            vec![1.0],
        )
        .unwrap();
        let (k, _) =
            restricted_gain_ineq(&pred, &model, &innov, &cs, &IneqOptions::default()).unwrap();
        let x = pred.mean[0] + k[(0, 0)] * innov.residual[0];
        assert!((x - 1.0).abs() < 1e-10);
    }

    #[test]
    fn empty_constraints_reduce_to_unconstrained_step() {
        let mut rng = SplitMix64::new(9);
        let state = GaussianState::new(
            random_vec(&mut rng, 2, -1.0, 1.0),
            random_spd(&mut rng, 2, 1.0),
        )
        .unwrap();
        let model = LinearModelStep {
            f_mat: DenseMatrix::from_row_major(2, 2, &[1.0, 0.1, 0.0, 1.0]),
            q_cov: DenseMatrix::from_diag(&[0.01, 0.01]),
            h_mat: DenseMatrix::identity(2),
            r_cov: DenseMatrix::from_diag(&[0.5, 0.5]),
        };
        let z = [0.4, -0.2];
        let cs = ConstraintSet::empty(2);
        let (constrained, _) = ineq_constrained_step(
            &state,
            &model,
            &z,
            &cs,
            &IneqMethod::Projection(ProjectionWeighting::Identity),
            &IneqOptions::default(),
        )
        .unwrap();
        let pred = predict(&state, &model).unwrap();
        let innov = innovate(&pred, &model, &z).unwrap();
        let k = optimal_gain(&pred.cov, &model, &innov).unwrap();
        let plain = update(&pred, &k, &innov, &model).unwrap();
        assert_eq!(constrained.mean, plain.mean);
    }

    #[test]
    fn both_methods_feasible_and_projection_is_nearest() {
        let mut rng = SplitMix64::new(1234);
        for _ in 0..25 {
            let n = 2;
            let state = GaussianState::new(
                random_vec(&mut rng, n, -0.5, 0.5),
                random_spd(&mut rng, n, 1.0),
            )
            .unwrap();
            let model = LinearModelStep {
                f_mat: DenseMatrix::identity(n),
                q_cov: DenseMatrix::from_diag(&[0.1, 0.1]),
                h_mat: DenseMatrix::identity(n),
                r_cov: random_spd(&mut rng, n, 0.5),
            };
            let z = random_vec(&mut rng, n, -3.0, 3.0);
            let cs = box_constraints(n, 1, 1.0);
            let opts = IneqOptions::default();
            let (proj, _) = ineq_constrained_step(
                &state,
                &model,
                &z,
                &cs,
                &IneqMethod::Projection(ProjectionWeighting::Identity),
                &opts,
            )
            .unwrap();
            let (gain, _) = ineq_constrained_step(
                &state,
                &model,
                &z,
                &cs,
                &IneqMethod::RestrictedGain,
                &opts,
            )
            .unwrap();
            assert!(constraints::is_feasible(&proj.mean, &cs, 1e-8));
            assert!(constraints::is_feasible(&gain.mean, &cs, 1e-8));
            // the projection is by definition the W=I nearest feasible point
            let pred = predict(&state, &model).unwrap();
            let innov = innovate(&pred, &model, &z).unwrap();
            let k = optimal_gain(&pred.cov, &model, &innov).unwrap();
            let upd = update(&pred, &k, &innov, &model).unwrap();
            let d_proj = matops::norm2(&matops::sub_vec(&proj.mean, &upd.mean));
            let d_gain = matops::norm2(&matops::sub_vec(&gain.mean, &upd.mean));
            assert!(d_proj <= d_gain + 1e-8);
        }
    }
}
