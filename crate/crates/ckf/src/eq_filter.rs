//! Equality-constrained Kalman filtering.
//!
//! Two routes to an estimate satisfying `A x̂ = b`:
//!
//! * [`project_estimate`] — replace the unconstrained update with the
//!   nearest point in the `W`-weighted norm on the constraint plane, with
//!   the covariance projected through `(I − ΥA) P (I − ΥA)'`;
//! * [`restricted_gain`] — pick the gain minimizing the Joseph-form trace
//!   subject to the update landing on the plane. Its update equals the
//!   `W = I` projection, which the tests pin down.
//!
//! `Υ = W⁻¹A'(AW⁻¹A')⁻¹`; `ΥA` is an oblique projector onto the constraint
//! row space. `(AW⁻¹A')⁻¹` is evaluated through a QR factorization of
//! `L⁻¹A'` (where `W⁻¹ = LL'`) to avoid squaring the condition number.
//!
//! The projected covariance is always the full bilinear form, not the
//! collapsed `(I − ΥA)P`: the collapse is exact only for `W = P⁻¹`, and the
//! bilinear form also keeps symmetry.


use crate::kalman::{
    innovate, optimal_gain, predict, update, GaussianState, Innovation, LinearModelStep,
};
use crate::matops::{self, Cholesky, DenseMatrix, Qr};
use crate::{Error, Result};

/// Weighting matrix choice for the projection.
#[derive(Clone, Debug)]
pub enum ProjectionWeighting {
    Identity,
    /// `W = P⁻¹` with `P` the covariance of the state being projected —
    /// the choice yielding the smallest projected covariance.
    InverseUpdatedCov,
    Custom(DenseMatrix),
}

/// Core of the Υ evaluation given `Y = L_g' A'` where `W⁻¹ = L_g L_g'`:
/// with `Y = QR`, `(AW⁻¹A')⁻¹ = (R'R)⁻¹` and `Υ = L_g Q R⁻ᵀ`.
fn upsilon_core(y: &DenseMatrix, finish: impl FnOnce(DenseMatrix) -> DenseMatrix) -> Result<DenseMatrix> {
    let q_rows = y.cols();
    if q_rows > y.rows() {
        return Err(Error::RankDeficient {
            what: "more equality constraints than state dimensions",
        });
    }
    let qr = Qr::factor(y);
    if !qr.has_full_column_rank(1e-12) {
        return Err(Error::RankDeficient {
            what: "equality constraint matrix (A W⁻¹ A' singular)",
        });
    }
    // Z = Q R⁻ᵀ, column j of Z' solves R z = (Q')_col
    let qt = qr.q().transpose();
    let mut zt = DenseMatrix::zeros(q_rows, y.rows());
    for j in 0..y.rows() {
        zt.set_col(j, &matops::solve_upper_tri(qr.r(), qt.col(j)));
    }
    Ok(finish(zt.transpose()))
}

/// Υ for an explicit positive-definite weighting matrix.
pub fn upsilon(a: &DenseMatrix, w: &DenseMatrix) -> Result<DenseMatrix> {
    let chol = Cholesky::factor(w, "projection weighting matrix")?;
    // Y = L⁻¹ A' since W⁻¹ = L⁻ᵀ L⁻¹
    let y = chol.solve_l_mat(&a.transpose());
    upsilon_core(&y, |z| chol.solve_lt_mat(&z))
}

/// Υ when `W⁻¹` is available as a lower factor `W⁻¹ = L_g L_g'`.
fn upsilon_winv_lower(a: &DenseMatrix, l_g: &DenseMatrix) -> Result<DenseMatrix> {
    let y = &l_g.transpose() * &a.transpose();
    upsilon_core(&y, |z| l_g * &z)
}

/// Υ for `W = I`: `Υ = A'(AA')⁻¹`.
pub(crate) fn upsilon_identity(a: &DenseMatrix) -> Result<DenseMatrix> {
    upsilon_core(&a.transpose(), |z| z)
}

pub(crate) fn resolve_upsilon(
    a: &DenseMatrix,
    weighting: &ProjectionWeighting,
    cov: &DenseMatrix,
) -> Result<DenseMatrix> {
    match weighting {
        ProjectionWeighting::Identity => upsilon_identity(a),
        ProjectionWeighting::Custom(w) => upsilon(a, w),
        ProjectionWeighting::InverseUpdatedCov => {
            // W = P⁻¹ means W⁻¹ = P; factor P directly. Repeated projection
            // drives P rank-deficient, so regularize once before giving up.
            let l = match Cholesky::factor(cov, "state covariance") {
                Ok(c) => c,
                Err(_) => {
                    let n = cov.rows();
                    let ridge = 1e-12 * cov.trace() / n as f64;
                    let mut reg = cov.clone();
                    for i in 0..n {
                        reg[(i, i)] += ridge;
                    }
                    Cholesky::factor(&reg, "regularized state covariance")?
                }
            };
            upsilon_winv_lower(a, l.l())
        }
    }
}

/// Project a state onto `A x = b`: the mean moves by `−Υ(A x̂ − b)`, the
/// covariance becomes `(I − ΥA) P (I − ΥA)'`.
pub fn project_estimate(
    state: &GaussianState,
    a: &DenseMatrix,
    b: &[f64],
    weighting: &ProjectionWeighting,
) -> Result<GaussianState> {
    if a.rows() == 0 {
        return Ok(state.clone());
    }
    if a.cols() != state.dim() || a.rows() != b.len() {
        return Err(Error::Dimension {
            op: "project_estimate",
            detail: alloc::format!(
                "A {}x{} with {} rhs against {}-dim state",
                a.rows(),
                a.cols(),
                b.len(),
                state.dim()
            ),
        });
    }
    let ups = resolve_upsilon(a, weighting, &state.cov)?;
    let violation = matops::sub_vec(&a.matvec(&state.mean), b);
    let mean = matops::sub_vec(&state.mean, &ups.matvec(&violation));
    let cov = project_covariance(&state.cov, a, &ups);
    Ok(GaussianState { mean, cov })
}

/// `(I − ΥA) P (I − ΥA)'`, re-symmetrized.
pub(crate) fn project_covariance(cov: &DenseMatrix, a: &DenseMatrix, ups: &DenseMatrix) -> DenseMatrix {
    let proj = &DenseMatrix::identity(cov.rows()) - &(ups * a);
    (&(&proj * cov) * &proj.transpose()).symmetrized()
}

/// The gain minimizing the Joseph-form covariance trace subject to the
/// updated estimate satisfying `A x̂ = b`:
///
/// ```text
/// K_R = K − A'(AA')⁻¹ (A x̂ − b) (ν'S⁻¹ν)⁻¹ ν'S⁻¹
/// ```
///
/// where `K` is the optimal gain and `x̂` the unconstrained update. The
/// correction is undefined when the innovation carries no information
/// (`ν'S⁻¹ν ≈ 0`) while the constraint is violated.
pub fn restricted_gain(
    pred: &GaussianState,
    model: &LinearModelStep,
    innov: &Innovation,
    a: &DenseMatrix,
    b: &[f64],
) -> Result<DenseMatrix> {
    if a.cols() != pred.dim() || a.rows() != b.len() {
        return Err(Error::Dimension {
            op: "restricted_gain",
            detail: alloc::format!(
                "A {}x{} with {} rhs against {}-dim state",
                a.rows(),
                a.cols(),
                b.len(),
                pred.dim()
            ),
        });
    }
    let gain = optimal_gain(&pred.cov, model, innov)?;
    if a.rows() == 0 {
        return Ok(gain);
    }
    let x_upd = matops::add_vec(&pred.mean, &gain.matvec(&innov.residual));
    let violation = matops::sub_vec(&a.matvec(&x_upd), b);

    let chol_s = Cholesky::factor(&innov.residual_cov, "innovation covariance")?;
    let s_inv_nu = chol_s.solve_vec(&innov.residual);
    let denom = matops::dot(&innov.residual, &s_inv_nu);
    if denom.abs() < 1e-14 {
        return if matops::norm_inf(&violation) <= crate::constraints::FEASIBILITY_TOL {
            Ok(gain)
        } else {
            Err(Error::DegenerateInnovation)
        };
    }
    // g = A'(AA')⁻¹ (A x̂ − b) through QR of A'
    let g = upsilon_identity(a)?.matvec(&violation);
    Ok(&gain - &matops::outer(&g, &s_inv_nu).scaled(1.0 / denom))
}

/// Which equality-constraining method a step uses.
#[derive(Clone, Debug)]
pub enum EqMethod {
    Projection(ProjectionWeighting),
    RestrictedGain,
}

/// One full predict → innovate → gain → update → constrain cycle against
/// equality constraints `A x = b`. With the restricted gain the covariance
/// is the Joseph form of the gain actually used, projected with `W = I`.
pub fn eq_constrained_step(
    state: &GaussianState,
    model: &LinearModelStep,
    z: &[f64],
    a: &DenseMatrix,
    b: &[f64],
    method: &EqMethod,
) -> Result<GaussianState> {
    let pred = predict(state, model)?;
    let innov = innovate(&pred, model, z)?;
    if a.rows() == 0 {
        let gain = optimal_gain(&pred.cov, model, &innov)?;
        return update(&pred, &gain, &innov, model);
    }
    match method {
        EqMethod::Projection(w) => {
            let gain = optimal_gain(&pred.cov, model, &innov)?;
            let upd = update(&pred, &gain, &innov, model)?;
            project_estimate(&upd, a, b, w)
        }
        EqMethod::RestrictedGain => {
            let gain = restricted_gain(&pred, model, &innov, a, b)?;
            let upd = update(&pred, &gain, &innov, model)?;
            project_estimate(&upd, a, b, &ProjectionWeighting::Identity)
        }
    }
}
