//! Unconstrained discrete-time Kalman filtering.
//!
//! Covers both the linear filter and the extended (linearized) filter:
//! prediction, innovation, the optimal gain, the Joseph-form covariance
//! update, and Jacobian evaluation for nonlinear transition/measurement
//! maps. The Joseph form is used for *every* covariance update because it
//! stays valid for the deliberately suboptimal gains produced by the
//! constrained filters.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

use crate::matops::{self, Cholesky, DenseMatrix};
use crate::{Error, Result};

/// State mean and error covariance.
#[derive(Clone, Debug)]
pub struct GaussianState {
    pub mean: Vec<f64>,
    pub cov: DenseMatrix,
}

impl GaussianState {
    pub fn new(mean: Vec<f64>, cov: DenseMatrix) -> Result<Self> {
        if cov.shape() != (mean.len(), mean.len()) {
            return Err(Error::Dimension {
                op: "GaussianState::new",
                detail: format!(
                    "mean has {} entries, covariance is {}x{}",
                    mean.len(),
                    cov.rows(),
                    cov.cols()
                ),
            });
        }
        Ok(GaussianState {
            mean,
            cov: cov.symmetrized(),
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Symmetry within 1e-10 relative and eigenvalues no lower than
    /// `-1e-10 · trace` (positive semidefinite up to roundoff).
    pub fn check_invariants(&self) -> Result<()> {
        if !self.cov.is_symmetric(1e-10) {
            return Err(Error::NotPositiveDefinite {
                what: "covariance lost symmetry",
            });
        }
        let eigs = matops::sym_eigenvalues(&self.cov);
        let bound = -1e-10 * self.cov.trace();
        if eigs.first().is_some_and(|&min| min < bound) {
            return Err(Error::NotPositiveDefinite {
                what: "covariance has negative eigenvalue",
            });
        }
        Ok(())
    }
}

/// One step of a linear (or per-step linearized) model: transition `F`,
/// process noise `Q`, measurement map `H`, measurement noise `R`.
#[derive(Clone, Debug)]
pub struct LinearModelStep {
    pub f_mat: DenseMatrix,
    pub q_cov: DenseMatrix,
    pub h_mat: DenseMatrix,
    pub r_cov: DenseMatrix,
}

impl LinearModelStep {
    pub fn state_dim(&self) -> usize {
        self.f_mat.rows()
    }

    pub fn meas_dim(&self) -> usize {
        self.h_mat.rows()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.state_dim();
        let m = self.meas_dim();
        let shapes_ok = self.f_mat.shape() == (n, n)
            && self.q_cov.shape() == (n, n)
            && self.h_mat.shape() == (m, n)
            && self.r_cov.shape() == (m, m);
        if !shapes_ok {
            return Err(Error::Dimension {
                op: "LinearModelStep::validate",
                detail: format!(
                    "F {}x{}, Q {}x{}, H {}x{}, R {}x{}",
                    self.f_mat.rows(),
                    self.f_mat.cols(),
                    self.q_cov.rows(),
                    self.q_cov.cols(),
                    self.h_mat.rows(),
                    self.h_mat.cols(),
                    self.r_cov.rows(),
                    self.r_cov.cols()
                ),
            });
        }
        if !self.q_cov.is_symmetric(1e-9) {
            return Err(Error::NotPositiveDefinite {
                what: "process noise covariance not symmetric",
            });
        }
        if !self.r_cov.is_symmetric(1e-9) {
            return Err(Error::NotPositiveDefinite {
                what: "measurement noise covariance not symmetric",
            });
        }
        Ok(())
    }
}

/// Measurement residual and its covariance.
#[derive(Clone, Debug)]
pub struct Innovation {
    pub residual: Vec<f64>,
    pub residual_cov: DenseMatrix,
}

pub type VectorFn = Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type JacobianFn = Box<dyn Fn(&[f64]) -> DenseMatrix + Send + Sync>;

/// How a Jacobian is obtained for a nonlinear map.
pub enum JacobianSpec {
    Analytic(JacobianFn),
    FiniteDifference,
}

/// Nonlinear system model for the extended filter.
pub struct NonlinearModel {
    pub state_dim: usize,
    pub meas_dim: usize,
    pub transition: VectorFn,
    pub transition_jacobian: JacobianSpec,
    pub measurement: VectorFn,
    pub measurement_jacobian: JacobianSpec,
    pub q_cov: DenseMatrix,
    pub r_cov: DenseMatrix,
}

/// Where the transition Jacobian is evaluated: at the reference state, or at
/// the midpoint between the reference state and the prediction made from it.
#[derive(Clone, Copy, Debug)]
pub enum TransitionRef<'a> {
    AtPoint,
    Midpoint(&'a [f64]),
}

fn check_dims(cond: bool, op: &'static str, detail: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Dimension {
            op,
            detail: format!("{detail}"),
        })
    }
}

/// State prediction: `x ← F x`, `P ← F P F' + Q` (re-symmetrized).
pub fn predict(state: &GaussianState, model: &LinearModelStep) -> Result<GaussianState> {
    model.validate()?;
    check_dims(
        model.state_dim() == state.dim(),
        "predict",
        "transition does not match state size",
    )?;
    let mean = model.f_mat.matvec(&state.mean);
    let fpf = &(&model.f_mat * &state.cov) * &model.f_mat.transpose();
    let cov = (&fpf + &model.q_cov).symmetrized();
    Ok(GaussianState { mean, cov })
}

/// Measurement residual `ν = z − H x` with covariance `S = H P H' + R`.
pub fn innovate(pred: &GaussianState, model: &LinearModelStep, z: &[f64]) -> Result<Innovation> {
    model.validate()?;
    check_dims(
        model.state_dim() == pred.dim() && z.len() == model.meas_dim(),
        "innovate",
        "measurement or state size does not match model",
    )?;
    let residual = matops::sub_vec(z, &model.h_mat.matvec(&pred.mean));
    let hph = &(&model.h_mat * &pred.cov) * &model.h_mat.transpose();
    let residual_cov = (&hph + &model.r_cov).symmetrized();
    Ok(Innovation {
        residual,
        residual_cov,
    })
}

/// Optimal gain `K = P H' S⁻¹`, computed through a symmetric factorization
/// of `S` rather than an explicit inverse.
pub fn optimal_gain(
    pred_cov: &DenseMatrix,
    model: &LinearModelStep,
    innov: &Innovation,
) -> Result<DenseMatrix> {
    check_dims(
        pred_cov.shape() == (model.state_dim(), model.state_dim())
            && innov.residual_cov.shape() == (model.meas_dim(), model.meas_dim()),
        "optimal_gain",
        "covariance shapes do not match model",
    )?;
    let chol = Cholesky::factor(&innov.residual_cov, "innovation covariance")?;
    let pht = pred_cov * &model.h_mat.transpose();
    // K' = S⁻¹ (P H')'
    Ok(chol.solve_mat(&pht.transpose()).transpose())
}

/// Joseph-form update: `x ← x + K ν`, `P ← (I−KH) P (I−KH)' + K R K'`.
/// Valid for any gain, not just the optimal one.
pub fn update(
    pred: &GaussianState,
    gain: &DenseMatrix,
    innov: &Innovation,
    model: &LinearModelStep,
) -> Result<GaussianState> {
    let n = pred.dim();
    check_dims(
        gain.shape() == (n, model.meas_dim()) && innov.residual.len() == model.meas_dim(),
        "update",
        "gain shape does not match state/measurement sizes",
    )?;
    let mean = matops::add_vec(&pred.mean, &gain.matvec(&innov.residual));
    let ikh = &DenseMatrix::identity(n) - &(gain * &model.h_mat);
    let joseph = &(&(&ikh * &pred.cov) * &ikh.transpose())
        + &(&(gain * &model.r_cov) * &gain.transpose());
    Ok(GaussianState {
        mean,
        cov: joseph.symmetrized(),
    })
}

/// Central-difference Jacobian with per-coordinate step
/// `h_i = max(1e-7, 1e-7·|x_i|)`.
pub fn central_difference_jacobian(
    f: &dyn Fn(&[f64]) -> Vec<f64>,
    x: &[f64],
    out_dim: usize,
) -> DenseMatrix {
    let n = x.len();
    let mut jac = DenseMatrix::zeros(out_dim, n);
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    for i in 0..n {
        let h = (1e-7f64).max(1e-7 * x[i].abs());
        xp[i] = x[i] + h;
        xm[i] = x[i] - h;
        let fp = f(&xp);
        let fm = f(&xm);
        for r in 0..out_dim {
            jac[(r, i)] = (fp[r] - fm[r]) / (2.0 * h);
        }
        xp[i] = x[i];
        xm[i] = x[i];
    }
    jac
}

fn eval_jacobian(
    spec: &JacobianSpec,
    f: &VectorFn,
    x: &[f64],
    out_dim: usize,
    what: &'static str,
) -> Result<DenseMatrix> {
    let jac = match spec {
        JacobianSpec::Analytic(j) => j(x),
        JacobianSpec::FiniteDifference => central_difference_jacobian(f, x, out_dim),
    };
    if !jac.is_finite() {
        return Err(Error::NonFinite { what });
    }
    Ok(jac)
}

/// Jacobian of the transition map at `x_ref`, or at `(x_ref + x_pred)/2`
/// in midpoint mode.
pub fn linearize_transition(
    model: &NonlinearModel,
    x_ref: &[f64],
    mode: TransitionRef<'_>,
) -> Result<DenseMatrix> {
    let point: Vec<f64> = match mode {
        TransitionRef::AtPoint => x_ref.to_vec(),
        TransitionRef::Midpoint(x_pred) => {
            check_dims(
                x_pred.len() == x_ref.len(),
                "linearize_transition",
                "midpoint state size mismatch",
            )?;
            x_ref
                .iter()
                .zip(x_pred)
                .map(|(a, b)| 0.5 * (a + b))
                .collect()
        }
    };
    eval_jacobian(
        &model.transition_jacobian,
        &model.transition,
        &point,
        model.state_dim,
        "transition Jacobian",
    )
}

/// Jacobian of the measurement map at `x_ref`.
pub fn linearize_measurement(model: &NonlinearModel, x_ref: &[f64]) -> Result<DenseMatrix> {
    eval_jacobian(
        &model.measurement_jacobian,
        &model.measurement,
        x_ref,
        model.meas_dim,
        "measurement Jacobian",
    )
}

/// Extended-filter prediction: the mean transitions through the nonlinear
/// map, the covariance through the Jacobian.
pub fn ekf_predict(
    state: &GaussianState,
    model: &NonlinearModel,
    midpoint: bool,
) -> Result<GaussianState> {
    let mean = (model.transition)(&state.mean);
    if mean.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "transition output",
        });
    }
    let mode = if midpoint {
        TransitionRef::Midpoint(&mean)
    } else {
        TransitionRef::AtPoint
    };
    let f = linearize_transition(model, &state.mean, mode)?;
    let fpf = &(&f * &state.cov) * &f.transpose();
    let cov = (&fpf + &model.q_cov).symmetrized();
    Ok(GaussianState { mean, cov })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{random_spd, random_vec, SplitMix64};
    use alloc::vec;
    use core::f64::consts::PI;

    fn identity_model(n: usize, q_scale: f64) -> LinearModelStep {
        LinearModelStep {
            f_mat: DenseMatrix::identity(n),
            q_cov: DenseMatrix::identity(n).scaled(q_scale),
            h_mat: DenseMatrix::identity(n),
            r_cov: DenseMatrix::identity(n),
        }
    }

    #[test]
    fn predict_identity_dynamics_is_noop() {
        let state = GaussianState::new(
            vec![1.0, -2.0],
            DenseMatrix::from_row_major(2, 2, &[2.0, 0.3, 0.3, 1.0]),
        )
        .unwrap();
        let out = predict(&state, &identity_model(2, 0.0)).unwrap();
        assert_eq!(out.mean, state.mean);
        assert!((&out.cov - &state.cov).max_abs() < 1e-15);
    }

    #[test]
    fn predict_accumulates_process_noise() {
        let state = GaussianState::new(vec![0.0, 0.0], DenseMatrix::identity(2)).unwrap();
        let out = predict(&state, &identity_model(2, 1.0)).unwrap();
        assert!((&out.cov - &DenseMatrix::identity(2).scaled(2.0)).max_abs() < 1e-15);
    }

    #[test]
    fn predict_matches_direct_product() {
        // experiment-1 style Jacobian at the origin
        let t = PI / 10.0;
        let c = libm::cos(t) - 1.0;
        let model = LinearModelStep {
            f_mat: DenseMatrix::from_row_major(2, 2, &[1.0, 0.0, c, 1.0]),
            q_cov: DenseMatrix::from_diag(&[0.1, 0.1]),
            h_mat: DenseMatrix::identity(2),
            r_cov: DenseMatrix::identity(2),
        };
        let p = DenseMatrix::from_row_major(2, 2, &[1.0, 0.1, 0.1, 1.0]);
        let state = GaussianState::new(vec![0.5, -0.25], p.clone()).unwrap();
        let out = predict(&state, &model).unwrap();
        // direct triple-loop oracle
        let mut expected = DenseMatrix::zeros(2, 2);
        for i in 0..2 {
            for j in 0..2 {
                let mut s = model.q_cov[(i, j)];
                for a in 0..2 {
                    for b in 0..2 {
                        s += model.f_mat[(i, a)] * p[(a, b)] * model.f_mat[(j, b)];
                    }
                }
                expected[(i, j)] = s;
            }
        }
        assert!((&out.cov - &expected).max_abs() < 1e-14);
        assert!((out.mean[0] - 0.5).abs() < 1e-15);
        assert!((out.mean[1] - (c * 0.5 - 0.25)).abs() < 1e-15);
    }

    #[test]
    fn innovation_zero_for_perfect_prediction() {
        let state = GaussianState::new(vec![1.0, 2.0], DenseMatrix::identity(2)).unwrap();
        let model = identity_model(2, 0.0);
        let innov = innovate(&state, &model, &[1.0, 2.0]).unwrap();
        assert!(matops::norm_inf(&innov.residual) == 0.0);
        assert!((&innov.residual_cov - &DenseMatrix::identity(2).scaled(2.0)).max_abs() < 1e-15);
    }

    #[test]
    fn innovation_matches_explicit_formula() {
        let mut rng = SplitMix64::new(11);
        for _ in 0..20 {
            let p = random_spd(&mut rng, 3, 1.0);
            let h = crate::rng::random_matrix(&mut rng, 2, 3, -1.0, 1.0);
            let r = random_spd(&mut rng, 2, 1.0);
            let x = random_vec(&mut rng, 3, -2.0, 2.0);
            let z = random_vec(&mut rng, 2, -2.0, 2.0);
            let model = LinearModelStep {
                f_mat: DenseMatrix::identity(3),
                q_cov: DenseMatrix::zeros(3, 3),
                h_mat: h.clone(),
                r_cov: r.clone(),
            };
            let state = GaussianState::new(x.clone(), p.clone()).unwrap();
            let innov = innovate(&state, &model, &z).unwrap();
            for i in 0..2 {
                let mut hx = 0.0;
                for j in 0..3 {
                    hx += h[(i, j)] * x[j];
                }
                assert!((innov.residual[i] - (z[i] - hx)).abs() < 1e-13);
            }
            let s = &(&(&h * &p) * &h.transpose()) + &r;
            assert!((&innov.residual_cov - &s.symmetrized()).max_abs() < 1e-13);
        }
    }

    #[test]
    fn gain_half_identity_in_scalar_symmetric_case() {
        let model = identity_model(2, 0.0);
        let innov = Innovation {
            residual: vec![0.0, 0.0],
            residual_cov: DenseMatrix::identity(2).scaled(2.0),
        };
        let k = optimal_gain(&DenseMatrix::identity(2), &model, &innov).unwrap();
        assert!((&k - &DenseMatrix::identity(2).scaled(0.5)).max_abs() < 1e-14);
    }

    #[test]
    fn gain_vanishes_for_untrusted_measurements() {
        let mut model = identity_model(2, 0.0);
        model.r_cov = DenseMatrix::identity(2).scaled(1e12);
        let state = GaussianState::new(vec![0.0, 0.0], DenseMatrix::identity(2)).unwrap();
        let innov = innovate(&state, &model, &[1.0, 1.0]).unwrap();
        let k = optimal_gain(&state.cov, &model, &innov).unwrap();
        assert!(k.max_abs() < 1e-10);
    }

    #[test]
    fn optimal_gain_locally_minimizes_joseph_trace() {
        let mut rng = SplitMix64::new(5);
        for _ in 0..10 {
            let p = random_spd(&mut rng, 3, 1.0);
            let h = crate::rng::random_matrix(&mut rng, 2, 3, -1.0, 1.0);
            let r = random_spd(&mut rng, 2, 1.0);
            let model = LinearModelStep {
                f_mat: DenseMatrix::identity(3),
                q_cov: DenseMatrix::zeros(3, 3),
                h_mat: h.clone(),
                r_cov: r.clone(),
            };
            let state = GaussianState::new(vec![0.0; 3], p.clone()).unwrap();
            let innov = innovate(&state, &model, &[0.0, 0.0]).unwrap();
            let k = optimal_gain(&p, &model, &innov).unwrap();
            let joseph_trace =
                |kk: &DenseMatrix| update(&state, kk, &innov, &model).unwrap().cov.trace();
            let base = joseph_trace(&k);
            for _ in 0..20 {
                let dir = crate::rng::random_matrix(&mut rng, 3, 2, -1.0, 1.0);
                let perturbed = &k + &dir.scaled(1e-4);
                assert!(joseph_trace(&perturbed) >= base - 1e-12);
            }
        }
    }

    #[test]
    fn update_with_zero_gain_is_noop() {
        let state = GaussianState::new(
            vec![1.0, 2.0],
            DenseMatrix::from_row_major(2, 2, &[1.5, 0.2, 0.2, 0.9]),
        )
        .unwrap();
        let model = identity_model(2, 0.0);
        let innov = innovate(&state, &model, &[5.0, -5.0]).unwrap();
        let out = update(&state, &DenseMatrix::zeros(2, 2), &innov, &model).unwrap();
        assert_eq!(out.mean, state.mean);
        assert!((&out.cov - &state.cov).max_abs() < 1e-15);
    }

    #[test]
    fn update_hand_arithmetic() {
        let state = GaussianState::new(vec![0.0, 0.0], DenseMatrix::identity(2)).unwrap();
        let model = identity_model(2, 0.0);
        let innov = innovate(&state, &model, &[2.0, 4.0]).unwrap();
        let k = DenseMatrix::identity(2).scaled(0.5);
        let out = update(&state, &k, &innov, &model).unwrap();
        assert!((out.mean[0] - 1.0).abs() < 1e-15 && (out.mean[1] - 2.0).abs() < 1e-15);
        assert!((&out.cov - &DenseMatrix::identity(2).scaled(0.5)).max_abs() < 1e-15);
    }

    #[test]
    fn suboptimal_gain_never_beats_optimal() {
        let mut rng = SplitMix64::new(99);
        for _ in 0..20 {
            let p = random_spd(&mut rng, 2, 1.0);
            let r = random_spd(&mut rng, 2, 1.0);
            let model = LinearModelStep {
                f_mat: DenseMatrix::identity(2),
                q_cov: DenseMatrix::zeros(2, 2),
                h_mat: DenseMatrix::identity(2),
                r_cov: r,
            };
            let state = GaussianState::new(vec![0.0; 2], p.clone()).unwrap();
            let innov = innovate(&state, &model, &[0.0, 0.0]).unwrap();
            let k_opt = optimal_gain(&p, &model, &innov).unwrap();
            let best = update(&state, &k_opt, &innov, &model).unwrap().cov.trace();
            let k_rand = crate::rng::random_matrix(&mut rng, 2, 2, -1.0, 1.0);
            let other = update(&state, &k_rand, &innov, &model).unwrap().cov.trace();
            assert!(other >= best - 1e-12);
        }
    }

    #[test]
    fn joseph_equals_short_form_at_optimum() {
        let mut rng = SplitMix64::new(123);
        for _ in 0..20 {
            let n = 3;
            let p = random_spd(&mut rng, n, 1.0);
            let h = crate::rng::random_matrix(&mut rng, 2, n, -1.0, 1.0);
            let r = random_spd(&mut rng, 2, 1.0);
            let model = LinearModelStep {
                f_mat: DenseMatrix::identity(n),
                q_cov: DenseMatrix::zeros(n, n),
                h_mat: h.clone(),
                r_cov: r,
            };
            let state = GaussianState::new(vec![0.0; n], p.clone()).unwrap();
            let innov = innovate(&state, &model, &[0.0, 0.0]).unwrap();
            let k = optimal_gain(&p, &model, &innov).unwrap();
            let joseph = update(&state, &k, &innov, &model).unwrap().cov;
            let short = &(&DenseMatrix::identity(n) - &(&k * &h)) * &p;
            let scale = joseph.max_abs().max(1.0);
            assert!((&joseph - &short.symmetrized()).max_abs() / scale < 1e-9);
        }
    }

    #[test]
    fn linearize_identity_transition() {
        let model = NonlinearModel {
            state_dim: 2,
            meas_dim: 2,
            transition: Box::new(|x| x.to_vec()),
            transition_jacobian: JacobianSpec::FiniteDifference,
            measurement: Box::new(|x| x.to_vec()),
            measurement_jacobian: JacobianSpec::FiniteDifference,
            q_cov: DenseMatrix::zeros(2, 2),
            r_cov: DenseMatrix::identity(2),
        };
        let f = linearize_transition(&model, &[0.3, -0.7], TransitionRef::AtPoint).unwrap();
        assert!((&f - &DenseMatrix::identity(2)).max_abs() < 1e-6);
        let h = linearize_measurement(&model, &[0.3, -0.7]).unwrap();
        assert!((&h - &DenseMatrix::identity(2)).max_abs() < 1e-6);
    }

    #[test]
    fn linearize_linear_measurement_recovers_matrix() {
        let h_true = DenseMatrix::from_row_major(1, 2, &[2.0, -3.0]);
        let h_clone = h_true.clone();
        let model = NonlinearModel {
            state_dim: 2,
            meas_dim: 1,
            transition: Box::new(|x| x.to_vec()),
            transition_jacobian: JacobianSpec::FiniteDifference,
            measurement: Box::new(move |x| h_clone.matvec(x)),
            measurement_jacobian: JacobianSpec::FiniteDifference,
            q_cov: DenseMatrix::zeros(2, 2),
            r_cov: DenseMatrix::identity(1),
        };
        for x_ref in [[0.0, 0.0], [1.0, -2.0], [10.0, 3.5]] {
            let h = linearize_measurement(&model, &x_ref).unwrap();
            assert!((&h - &h_true).max_abs() < 1e-6);
        }
    }

    #[test]
    fn finite_difference_matches_analytic_on_sine_recursion() {
        // transition whose second component accumulates sine increments on
        // top of the previous second component; its exact Jacobian is the
        // closed form used by the sine-tracking scenario
        let t = PI / 10.0;
        let model = NonlinearModel {
            state_dim: 2,
            meas_dim: 2,
            transition: Box::new(move |x| {
                vec![x[0] + t, x[1] + libm::sin(x[0] + t) - libm::sin(x[0])]
            }),
            transition_jacobian: JacobianSpec::Analytic(Box::new(move |x| {
                DenseMatrix::from_row_major(
                    2,
                    2,
                    &[1.0, 0.0, libm::cos(x[0] + t) - libm::cos(x[0]), 1.0],
                )
            })),
            measurement: Box::new(|x| x.to_vec()),
            measurement_jacobian: JacobianSpec::FiniteDifference,
            q_cov: DenseMatrix::zeros(2, 2),
            r_cov: DenseMatrix::identity(2),
        };
        let mut rng = SplitMix64::new(3);
        for _ in 0..20 {
            let x = random_vec(&mut rng, 2, -3.0, 3.0);
            let analytic = linearize_transition(&model, &x, TransitionRef::AtPoint).unwrap();
            let fd = central_difference_jacobian(&*model.transition, &x, 2);
            assert!((&analytic - &fd).max_abs() < 1e-6);
        }
    }

    #[test]
    fn midpoint_mode_moves_the_evaluation_point() {
        let model = NonlinearModel {
            state_dim: 1,
            meas_dim: 1,
            transition: Box::new(|x| vec![x[0] * x[0]]),
            transition_jacobian: JacobianSpec::Analytic(Box::new(|x| {
                DenseMatrix::from_row_major(1, 1, &[2.0 * x[0]])
            })),
            measurement: Box::new(|x| x.to_vec()),
            measurement_jacobian: JacobianSpec::FiniteDifference,
            q_cov: DenseMatrix::zeros(1, 1),
            r_cov: DenseMatrix::identity(1),
        };
        let at = linearize_transition(&model, &[1.0], TransitionRef::AtPoint).unwrap();
        assert!((at[(0, 0)] - 2.0).abs() < 1e-15);
        let mid = linearize_transition(&model, &[1.0], TransitionRef::Midpoint(&[3.0])).unwrap();
        assert!((mid[(0, 0)] - 4.0).abs() < 1e-15);
    }
}
