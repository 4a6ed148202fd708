//! Seeded simulation scenarios and their runner.
//!
//! Two related tracking problems drive the constrained filters:
//!
//! * **sine tracking** — a car traces a noisy sine curve (noise only in the
//!   frequency state); the filter knows the sine structure and constrains
//!   the traced component to `[-1, 1]`;
//! * **AR(6)** — the same underlying curve, but the filter assumes nothing
//!   beyond the bound and fits an autoregressive model of order 6 embedded
//!   in a 13-dimensional state (value, five lags, six coefficients, and an
//!   intercept), constraining the value and all lags to `[-1, 1]`.
//!
//! Every run is a pure function of its [`ScenarioConfig`]: truth and
//! measurement noise come from fixed sub-streams of the single seed, all
//! methods consume the identical measurement stream, and transcendentals go
//! through `libm`, so a `(config, seed)` pair reproduces bit-identical
//! traces anywhere.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::constraints::{self, ConstraintSet};
use crate::eq_filter::ProjectionWeighting;
use crate::ineq_filter::{
    constrain_update, project_estimate_ineq, IneqMethod, IneqOptions,
};
use crate::kalman::{
    ekf_predict, innovate, linearize_measurement, linearize_transition, optimal_gain, update,
    GaussianState, JacobianSpec, LinearModelStep, NonlinearModel, TransitionRef,
};
use crate::matops::{self, DenseMatrix};
use crate::prediction::lookahead_constraints;
use crate::rng::{psd_factor, substream};
use crate::{Error, Result};

/// Which tracking problem to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScenarioKind {
    SineTracking,
    Ar6,
}

/// Estimation method labels as they appear on the CLI and in CSV headers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MethodKind {
    Unconstrained,
    Project,
    RestrictGain,
}

impl MethodKind {
    pub fn label(&self) -> &'static str {
        match self {
            MethodKind::Unconstrained => "unconstrained",
            MethodKind::Project => "project",
            MethodKind::RestrictGain => "restrict-gain",
        }
    }
}

/// Projection weighting selector exposed by the CLI.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightingChoice {
    Identity,
    InvCov,
}

impl WeightingChoice {
    fn to_projection(self) -> ProjectionWeighting {
        match self {
            WeightingChoice::Identity => ProjectionWeighting::Identity,
            WeightingChoice::InvCov => ProjectionWeighting::InverseUpdatedCov,
        }
    }
}

/// Where the transition Jacobian is evaluated for covariance propagation.
/// The midpoint rule hugs the nonlinearity more closely and is the default
/// for these scenarios.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JacobianMode {
    AtPoint,
    Midpoint,
}

/// Prediction-constraining strategy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PredictionConstraint {
    None,
    /// Equality-project the transition matrix (no-op without equality
    /// constraints). The affine `Υb` offset is applied.
    ProjectF,
    /// QP-project the prediction onto the constraint region.
    ProjectX,
    /// Append one-step-lookahead constraints to the update.
    Lookahead,
}

/// Full description of a run.
#[derive(Clone, Debug)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub seed: u64,
    /// Discretization step `T`.
    pub step_size: f64,
    pub t_final: f64,
    /// Overrides the `t_final / step_size` step count when set.
    pub steps: Option<usize>,
    pub methods: Vec<MethodKind>,
    pub weighting: WeightingChoice,
    pub constrain_prediction: PredictionConstraint,
    pub jacobian: JacobianMode,
    /// Use the variant sine-tracking transition whose second component
    /// accumulates onto the previous estimate rather than the phase.
    pub exp1_recursive_second: bool,
    /// Add the rank-one convergence-error term to projected covariances.
    pub safety_term: bool,
    /// Replace the scenario's built-in constraint set.
    pub constraint_override: Option<ConstraintSet>,
}

impl ScenarioConfig {
    pub fn experiment1(seed: u64) -> Self {
        ScenarioConfig {
            kind: ScenarioKind::SineTracking,
            seed,
            step_size: PI / 10.0,
            t_final: 10.0 * PI,
            steps: None,
            methods: vec![
                MethodKind::Unconstrained,
                MethodKind::Project,
                MethodKind::RestrictGain,
            ],
            weighting: WeightingChoice::Identity,
            constrain_prediction: PredictionConstraint::None,
            jacobian: JacobianMode::Midpoint,
            exp1_recursive_second: false,
            safety_term: true,
            constraint_override: None,
        }
    }

    pub fn experiment2(seed: u64) -> Self {
        ScenarioConfig {
            kind: ScenarioKind::Ar6,
            ..Self::experiment1(seed)
        }
    }

    pub fn num_steps(&self) -> usize {
        self.steps
            .unwrap_or_else(|| (libm::round(self.t_final / self.step_size) as usize).max(1))
    }
}

// ---------------------------------------------------------------------------
// Truth and measurement generation
// ---------------------------------------------------------------------------

/// Process noise used by the driving sine process: noise enters only the
/// frequency state.
pub fn sine_process_noise() -> DenseMatrix {
    DenseMatrix::from_diag(&[0.1, 0.0])
}

/// The driving process `x ← [x₁ + T, sin(x₁ + T)] + w` from `x₀ = (0, 0)`,
/// with `w ~ N(0, q_cov)` drawn from sub-stream 0 of the seed.
pub fn generate_sine_truth_with(
    seed: u64,
    t_step: f64,
    steps: usize,
    q_cov: &DenseMatrix,
) -> Result<Vec<Vec<f64>>> {
    let l = psd_factor(q_cov)?;
    let mut noise = substream(seed, 0);
    let mut x = vec![0.0, 0.0];
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let w = noise.next_shaped(&l);
        x = vec![
            x[0] + t_step + w[0],
            libm::sin(x[0] + t_step) + w[1],
        ];
        out.push(x.clone());
    }
    Ok(out)
}

/// [`generate_sine_truth_with`] at the scenario's process noise.
pub fn generate_sine_truth(seed: u64, t_step: f64, steps: usize) -> Vec<Vec<f64>> {
    generate_sine_truth_with(seed, t_step, steps, &sine_process_noise())
        .expect("fixed PSD process noise")
}

/// `z = H x + v` with `v ~ N(0, R)` drawn from sub-stream 1 of the seed.
pub fn generate_measurements(
    truth: &[Vec<f64>],
    h: &DenseMatrix,
    r: &DenseMatrix,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let l = psd_factor(r)?;
    let mut noise = substream(seed, 1);
    Ok(truth
        .iter()
        .map(|x| matops::add_vec(&h.matvec(x), &noise.next_shaped(&l)))
        .collect())
}

// ---------------------------------------------------------------------------
// Scenario assembly
// ---------------------------------------------------------------------------

struct Scenario {
    model: NonlinearModel,
    initial: GaussianState,
    constraints: ConstraintSet,
    truth: Vec<Vec<f64>>,
    measurements: Vec<Vec<f64>>,
    /// (component of the truth vector, component of the estimate) that
    /// trace the driven sine curve.
    tracked: (usize, usize),
}

/// The sine-tracking filter model. `recursive_second = false` uses the
/// transition whose second component builds on the phase state;
/// `true` accumulates onto the previous second component instead (the form
/// consistent with the closed-form Jacobian).
pub fn sine_tracking_model(t_step: f64, recursive_second: bool) -> NonlinearModel {
    let transition: crate::kalman::VectorFn = if recursive_second {
        Box::new(move |x: &[f64]| {
            vec![
                x[0] + t_step,
                x[1] + libm::sin(x[0] + t_step) - libm::sin(x[0]),
            ]
        })
    } else {
        Box::new(move |x: &[f64]| {
            vec![
                x[0] + t_step,
                x[0] + libm::sin(x[0] + t_step) - libm::sin(x[0]),
            ]
        })
    };
    NonlinearModel {
        state_dim: 2,
        meas_dim: 2,
        transition,
        transition_jacobian: JacobianSpec::Analytic(Box::new(move |x: &[f64]| {
            DenseMatrix::from_row_major(
                2,
                2,
                &[
                    1.0,
                    0.0,
                    libm::cos(x[0] + t_step) - libm::cos(x[0]),
                    1.0,
                ],
            )
        })),
        measurement: Box::new(|x: &[f64]| x.to_vec()),
        measurement_jacobian: JacobianSpec::Analytic(Box::new(|_| DenseMatrix::identity(2))),
        q_cov: DenseMatrix::from_diag(&[0.1, 0.1]),
        r_cov: DenseMatrix::from_diag(&[10.0, 10.0]),
    }
}

/// Bounds `|x₂| ≤ 1` on the traced component.
pub fn sine_tracking_constraints() -> ConstraintSet {
    ConstraintSet::inequalities_only(
        DenseMatrix::from_row_major(2, 2, &[0.0, 1.0, 0.0, -1.0]),
        vec![1.0, 1.0],
    )
    .expect("static constraint set")
}

const AR_DIM: usize = 13;

fn clamp_unit(v: f64) -> f64 {
    v.max(-1.0).min(1.0)
}

/// The AR(6) filter model over the 13-dimensional state
/// `[y_k, y_{k-1}, …, y_{k-5}, α₁, …, α₆, α₇]`. The transition clamps the
/// value and lag components to `[-1, 1]`; its Jacobian ignores the clamps
/// (the derivative is discontinuous across them, and keeping the linear
/// form leaves the covariance larger and better conditioned).
pub fn ar6_model() -> NonlinearModel {
    NonlinearModel {
        state_dim: AR_DIM,
        meas_dim: 1,
        transition: Box::new(|x: &[f64]| {
            let mut out = vec![0.0; AR_DIM];
            let mut acc = x[12];
            for i in 0..6 {
                acc += x[6 + i] * x[i];
            }
            out[0] = clamp_unit(acc);
            for i in 1..6 {
                out[i] = clamp_unit(x[i - 1]);
            }
            out[6..13].copy_from_slice(&x[6..13]);
            out
        }),
        transition_jacobian: JacobianSpec::Analytic(Box::new(|x: &[f64]| {
            let mut jac = DenseMatrix::zeros(AR_DIM, AR_DIM);
            for i in 0..6 {
                jac[(0, i)] = x[6 + i];
                jac[(0, 6 + i)] = x[i];
            }
            jac[(0, 12)] = 1.0;
            for i in 1..6 {
                jac[(i, i - 1)] = 1.0;
            }
            for i in 6..13 {
                jac[(i, i)] = 1.0;
            }
            jac
        })),
        measurement: Box::new(|x: &[f64]| vec![x[0]]),
        measurement_jacobian: JacobianSpec::Analytic(Box::new(|_| {
            let mut h = DenseMatrix::zeros(1, AR_DIM);
            h[(0, 0)] = 1.0;
            h
        })),
        q_cov: {
            let mut d = vec![1e-6; AR_DIM];
            d[0] = 0.1;
            DenseMatrix::from_diag(&d)
        },
        r_cov: DenseMatrix::from_row_major(1, 1, &[0.5]),
    }
}

/// Bounds `|x_i| ≤ 1` on the value and all five lags.
pub fn ar6_constraints() -> ConstraintSet {
    let mut c = DenseMatrix::zeros(12, AR_DIM);
    for i in 0..6 {
        c[(i, i)] = 1.0;
        c[(6 + i, i)] = -1.0;
    }
    ConstraintSet::inequalities_only(c, vec![1.0; 12]).expect("static constraint set")
}

fn assemble(cfg: &ScenarioConfig) -> Result<Scenario> {
    let steps = cfg.num_steps();
    let truth = generate_sine_truth(cfg.seed, cfg.step_size, steps);
    match cfg.kind {
        ScenarioKind::SineTracking => {
            let model = sine_tracking_model(cfg.step_size, cfg.exp1_recursive_second);
            let measurements =
                generate_measurements(&truth, &DenseMatrix::identity(2), &model.r_cov, cfg.seed)?;
            let initial = GaussianState::new(
                vec![0.0, 1.0],
                DenseMatrix::from_row_major(2, 2, &[1.0, 0.1, 0.1, 1.0]),
            )?;
            let constraints = match &cfg.constraint_override {
                Some(cs) => cs.clone(),
                None => sine_tracking_constraints(),
            };
            Ok(Scenario {
                model,
                initial,
                constraints,
                truth,
                measurements,
                tracked: (1, 1),
            })
        }
        ScenarioKind::Ar6 => {
            let model = ar6_model();
            let h_gen = DenseMatrix::from_row_major(1, 2, &[0.0, 1.0]);
            let measurements = generate_measurements(&truth, &h_gen, &model.r_cov, cfg.seed)?;
            let mut mean = vec![0.0; AR_DIM];
            mean[0] = 1.0;
            mean[6] = 1.0;
            let p0 = DenseMatrix::from_fn(AR_DIM, AR_DIM, |i, j| if i == j { 1.0 } else { 0.1 });
            let initial = GaussianState::new(mean, p0)?;
            let constraints = match &cfg.constraint_override {
                Some(cs) => cs.clone(),
                None => ar6_constraints(),
            };
            Ok(Scenario {
                model,
                initial,
                constraints,
                truth,
                measurements,
                tracked: (1, 0),
            })
        }
    }
}

// ---------------------------------------------------------------------------
// Runner
// ---------------------------------------------------------------------------

/// Per-step output of one method.
#[derive(Clone, Debug)]
pub struct MethodStep {
    /// Prediction after any prediction-constraining.
    pub pred: GaussianState,
    /// Final constrained (or plain) update.
    pub post: GaussianState,
    pub feasible: bool,
    pub pred_feasible: bool,
    /// Inner (active-set) iterations spent this step.
    pub iterations: usize,
}

#[derive(Clone, Debug)]
pub struct MethodRun {
    pub method: MethodKind,
    pub steps: Vec<MethodStep>,
    /// Stamped by the caller when a clock is supplied; 0 otherwise.
    pub wall_ms: f64,
}

/// Everything a run produced, for CSV export and metric computation.
#[derive(Clone, Debug)]
pub struct RunTrace {
    pub kind: ScenarioKind,
    pub seed: u64,
    pub step_size: f64,
    pub times: Vec<f64>,
    pub truth: Vec<Vec<f64>>,
    pub measurements: Vec<Vec<f64>>,
    pub constraints: ConstraintSet,
    pub tracked: (usize, usize),
    pub methods: Vec<MethodRun>,
}

/// Summary metrics for one method of a run.
#[derive(Clone, Debug)]
pub struct RunMetrics {
    pub method: MethodKind,
    /// Root-mean-square error on the traced sine component.
    pub rmse: f64,
    /// Steps whose final estimate violates the constraints beyond 1e-8.
    pub violations: usize,
    pub max_violation: f64,
    pub wall_ms: f64,
}

fn run_one_method(
    cfg: &ScenarioConfig,
    scenario: &Scenario,
    method: MethodKind,
) -> Result<Vec<MethodStep>> {
    let model = &scenario.model;
    let cs = &scenario.constraints;
    let midpoint = cfg.jacobian == JacobianMode::Midpoint;
    let weighting = cfg.weighting.to_projection();
    let opts = IneqOptions {
        safety_term: cfg.safety_term,
        ..IneqOptions::default()
    };
    let ineq_method = match method {
        MethodKind::Project => Some(IneqMethod::Projection(weighting.clone())),
        MethodKind::RestrictGain => Some(IneqMethod::RestrictedGain),
        MethodKind::Unconstrained => None,
    };

    let mut state = scenario.initial.clone();
    let mut steps = Vec::with_capacity(scenario.measurements.len());
    for z in &scenario.measurements {
        let mut iterations = 0usize;
        let mut pred = ekf_predict(&state, model, midpoint)?;

        if ineq_method.is_some() {
            match cfg.constrain_prediction {
                PredictionConstraint::None | PredictionConstraint::Lookahead => {}
                PredictionConstraint::ProjectF => {
                    if cs.n_eq() > 0 {
                        let ups = crate::eq_filter::resolve_upsilon(
                            cs.eq_mat(),
                            &weighting,
                            &state.cov,
                        )?;
                        let proj =
                            &DenseMatrix::identity(state.dim()) - &(&ups * cs.eq_mat());
                        let mean = matops::add_vec(
                            &proj.matvec(&pred.mean),
                            &ups.matvec(cs.eq_rhs()),
                        );
                        let propagated = &pred.cov - &model.q_cov;
                        let cov = (&(&(&proj * &propagated) * &proj.transpose())
                            + &model.q_cov)
                            .symmetrized();
                        pred = GaussianState { mean, cov };
                    }
                }
                PredictionConstraint::ProjectX => {
                    let (projected, diag) =
                        project_estimate_ineq(&pred, cs, &weighting, &opts)?;
                    iterations += diag.iterations;
                    pred = projected;
                }
            }
        }

        let h = linearize_measurement(model, &pred.mean)?;
        let step_model = LinearModelStep {
            f_mat: DenseMatrix::identity(model.state_dim),
            q_cov: DenseMatrix::zeros(model.state_dim, model.state_dim),
            h_mat: h,
            r_cov: model.r_cov.clone(),
        };
        let innov = innovate(&pred, &step_model, z)?;

        let post = match &ineq_method {
            None => {
                let gain = optimal_gain(&pred.cov, &step_model, &innov)?;
                update(&pred, &gain, &innov, &step_model)?
            }
            Some(m) => {
                let (mut est, diag) =
                    constrain_update(&pred, &step_model, &innov, cs, m, &opts)?;
                iterations += diag.iterations;
                if cfg.constrain_prediction == PredictionConstraint::Lookahead {
                    // iterate: re-linearize the next transition about the
                    // estimate, append composed constraints, re-solve
                    for _ in 0..10 {
                        let f_next =
                            linearize_transition(model, &est.mean, TransitionRef::AtPoint)?;
                        let composed = lookahead_constraints(cs, &f_next)?;
                        let augmented = cs.merged(&composed)?;
                        let (next, diag) =
                            constrain_update(&pred, &step_model, &innov, &augmented, m, &opts)?;
                        iterations += diag.iterations;
                        let moved =
                            matops::norm_inf(&matops::sub_vec(&next.mean, &est.mean));
                        est = next;
                        if moved <= 1e-8 {
                            break;
                        }
                    }
                }
                est
            }
        };

        steps.push(MethodStep {
            feasible: constraints::is_feasible(&post.mean, cs, constraints::FEASIBILITY_TOL),
            pred_feasible: constraints::is_feasible(
                &pred.mean,
                cs,
                constraints::FEASIBILITY_TOL,
            ),
            pred,
            post: post.clone(),
            iterations,
        });
        state = post;
    }
    Ok(steps)
}

/// Run every configured method over one generated measurement stream.
/// `clock` (nanoseconds) stamps per-method wall time when available.
pub fn run_scenario(
    cfg: &ScenarioConfig,
    clock: Option<&dyn Fn() -> u64>,
) -> Result<RunTrace> {
    let scenario = assemble(cfg)?;
    if let Some(cs) = &cfg.constraint_override {
        if cs.state_dim() != scenario.model.state_dim {
            return Err(Error::Dimension {
                op: "run_scenario",
                detail: alloc::format!(
                    "constraint override on {} dims, state has {}",
                    cs.state_dim(),
                    scenario.model.state_dim
                ),
            });
        }
    }
    let mut methods = Vec::with_capacity(cfg.methods.len());
    for &method in &cfg.methods {
        let started = clock.map(|c| c());
        let steps = run_one_method(cfg, &scenario, method)?;
        let wall_ms = match (started, clock) {
            (Some(t0), Some(c)) => (c().saturating_sub(t0)) as f64 / 1e6,
            _ => 0.0,
        };
        methods.push(MethodRun {
            method,
            steps,
            wall_ms,
        });
    }
    let times = (1..=scenario.measurements.len())
        .map(|k| k as f64 * cfg.step_size)
        .collect();
    Ok(RunTrace {
        kind: cfg.kind,
        seed: cfg.seed,
        step_size: cfg.step_size,
        times,
        truth: scenario.truth,
        measurements: scenario.measurements,
        constraints: scenario.constraints,
        tracked: scenario.tracked,
        methods,
    })
}

/// Run the sine-tracking experiment.
pub fn run_experiment1(cfg: &ScenarioConfig, clock: Option<&dyn Fn() -> u64>) -> Result<RunTrace> {
    debug_assert_eq!(cfg.kind, ScenarioKind::SineTracking);
    run_scenario(cfg, clock)
}

/// Run the AR(6) experiment.
pub fn run_experiment2(cfg: &ScenarioConfig, clock: Option<&dyn Fn() -> u64>) -> Result<RunTrace> {
    debug_assert_eq!(cfg.kind, ScenarioKind::Ar6);
    run_scenario(cfg, clock)
}

/// Per-method RMSE on the traced component, constraint-violation counts
/// at tolerance 1e-8, and the worst violation magnitude.
pub fn compute_metrics(trace: &RunTrace) -> Vec<RunMetrics> {
    let (truth_idx, est_idx) = trace.tracked;
    trace
        .methods
        .iter()
        .map(|run| {
            let mut sq_sum = 0.0;
            let mut violations = 0usize;
            let mut max_violation = 0.0f64;
            for (step, x_true) in run.steps.iter().zip(&trace.truth) {
                let err = step.post.mean[est_idx] - x_true[truth_idx];
                sq_sum += err * err;
                let v = constraints::max_violation(&step.post.mean, &trace.constraints);
                max_violation = max_violation.max(v);
                if v > constraints::FEASIBILITY_TOL {
                    violations += 1;
                }
            }
            let n = run.steps.len().max(1);
            RunMetrics {
                method: run.method,
                rmse: libm::sqrt(sq_sum / n as f64),
                violations,
                max_violation,
                wall_ms: run.wall_ms,
            }
        })
        .collect()
}
