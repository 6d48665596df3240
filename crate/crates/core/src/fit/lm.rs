//! Damped least-squares minimizer over smoothly reparameterized curve models.
//!
//! Positivity constraints are enforced by construction: every constrained
//! parameter is the image of a free scalar under an exponential or
//! softplus map, so the solver itself is a plain unconstrained
//! Levenberg-Marquardt iteration on the free parameters. Robustified
//! objectives (Huber) are handled through iteratively reweighted rows.

use nalgebra::{DMatrix, DVector};

/// How a free scalar maps onto a constrained model parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Transform {
    /// `p = exp(theta)`: strictly positive parameters.
    Exp,
    /// `p = ln(1 + exp(theta))`: non-negative parameters that may reach 0.
    Softplus,
}

impl Transform {
    pub(crate) fn apply(self, theta: f64) -> f64 {
        match self {
            Transform::Exp => theta.exp(),
            Transform::Softplus => softplus(theta),
        }
    }

    /// Derivative of the constrained parameter w.r.t. the free scalar.
    pub(crate) fn derivative(self, theta: f64, value: f64) -> f64 {
        match self {
            Transform::Exp => value,
            Transform::Softplus => sigmoid(theta),
        }
    }

    /// Free scalar whose image is `value`; `value` must satisfy the
    /// transform's range constraint.
    pub(crate) fn invert(self, value: f64) -> f64 {
        match self {
            Transform::Exp => value.max(f64::MIN_POSITIVE).ln(),
            Transform::Softplus => inv_softplus(value),
        }
    }
}

pub(crate) fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn inv_softplus(y: f64) -> f64 {
    if y > 30.0 {
        y
    } else if y > 0.0 {
        y.exp_m1().ln()
    } else {
        // Deep enough that softplus underflows to exactly 0 and the
        // parameter stays pinned there.
        -800.0
    }
}

/// A parametric curve with analytic gradient, evaluated in batch over its
/// constrained parameterization.
///
/// The batch shape lets models share work across points (grid designs
/// repeat axis values, so e.g. `n^-alpha` need only be computed once per
/// distinct `n`).
pub(crate) trait CurveModel {
    fn n_points(&self) -> usize;
    fn n_params(&self) -> usize;
    fn observed(&self, i: usize) -> f64;
    /// Fills `pred[i]` with the prediction at every point.
    fn predictions(&self, params: &[f64], pred: &mut [f64]);
    /// Fills predictions and the gradient matrix `grad[i][j] =
    /// d pred_i / d param_j` (row-major, `n_points x n_params`).
    fn predictions_with_gradients(&self, params: &[f64], pred: &mut [f64], grad: &mut [f64]);
}

/// Residual space the objective is formed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Space {
    Linear,
    Log,
}

pub(crate) struct LmSettings {
    pub max_iterations: usize,
    pub rel_tolerance: f64,
    pub space: Space,
    /// Huber threshold; `None` means pure least squares.
    pub huber_delta: Option<f64>,
}

pub(crate) struct LmOutcome {
    /// Free-parameter vector at the minimum found.
    pub theta: Vec<f64>,
    /// Final robustified objective value.
    pub objective: f64,
    pub converged: bool,
    /// Objective after every accepted step, starting with the initial value.
    /// Its length minus one is the number of accepted iterations.
    pub trace: Vec<f64>,
}

const LAMBDA_INIT: f64 = 1e-3;
const LAMBDA_UP: f64 = 4.0;
const LAMBDA_DOWN: f64 = 0.25;
const LAMBDA_MAX: f64 = 1e15;
const LAMBDA_MIN: f64 = 1e-14;

/// Huber rho: quadratic within `delta`, linear outside.
fn rho(r: f64, delta: Option<f64>) -> f64 {
    match delta {
        None => r * r,
        Some(d) => {
            let a = r.abs();
            if a <= d {
                r * r
            } else {
                2.0 * d * a - d * d
            }
        }
    }
}

/// IRLS row weight for the Huber objective.
fn weight(r: f64, delta: Option<f64>) -> f64 {
    match delta {
        None => 1.0,
        Some(d) => {
            let a = r.abs();
            if a <= d {
                1.0
            } else {
                d / a
            }
        }
    }
}

fn params_of(theta: &[f64], transforms: &[Transform], out: &mut [f64]) {
    for (i, (&t, &tr)) in theta.iter().zip(transforms).enumerate() {
        out[i] = tr.apply(t);
    }
}

/// Residual of point `i` in the requested space.
fn residual(pred: f64, obs: f64, space: Space) -> f64 {
    match space {
        Space::Linear => pred - obs,
        Space::Log => pred.max(1e-300).ln() - obs.max(1e-300).ln(),
    }
}

fn objective_at<M: CurveModel>(
    model: &M,
    theta: &[f64],
    transforms: &[Transform],
    settings: &LmSettings,
    params_buf: &mut [f64],
    pred_buf: &mut [f64],
) -> f64 {
    params_of(theta, transforms, params_buf);
    model.predictions(params_buf, pred_buf);
    let mut total = 0.0;
    for (i, &pred) in pred_buf.iter().enumerate() {
        let r = residual(pred, model.observed(i), settings.space);
        if !r.is_finite() {
            return f64::INFINITY;
        }
        total += rho(r, settings.huber_delta);
    }
    total
}

/// Residuals (space-transformed) at `theta`, without robust weighting.
pub(crate) fn residuals_at<M: CurveModel>(
    model: &M,
    theta: &[f64],
    transforms: &[Transform],
    space: Space,
) -> Vec<f64> {
    let mut params = vec![0.0; theta.len()];
    params_of(theta, transforms, &mut params);
    let mut pred = vec![0.0; model.n_points()];
    model.predictions(&params, &mut pred);
    pred.iter()
        .enumerate()
        .map(|(i, &p)| residual(p, model.observed(i), space))
        .collect()
}

/// Jacobian of the space-transformed residual vector w.r.t. the free
/// parameters, and the residual vector itself.
fn residuals_and_jacobian<M: CurveModel>(
    model: &M,
    theta: &[f64],
    transforms: &[Transform],
    space: Space,
) -> (DVector<f64>, DMatrix<f64>) {
    let m = model.n_points();
    let k = theta.len();
    let mut params = vec![0.0; k];
    params_of(theta, transforms, &mut params);
    // Chain-rule factors d(param)/d(theta).
    let dp: Vec<f64> = theta
        .iter()
        .zip(transforms)
        .enumerate()
        .map(|(j, (&t, &tr))| tr.derivative(t, params[j]))
        .collect();

    let mut pred = vec![0.0; m];
    let mut grad = vec![0.0; m * k];
    model.predictions_with_gradients(&params, &mut pred, &mut grad);

    let mut r = DVector::<f64>::zeros(m);
    let mut jac = DMatrix::<f64>::zeros(m, k);
    for i in 0..m {
        let obs = model.observed(i);
        r[i] = residual(pred[i], obs, space);
        let scale = match space {
            Space::Linear => 1.0,
            Space::Log => 1.0 / pred[i].max(1e-300),
        };
        for j in 0..k {
            jac[(i, j)] = grad[i * k + j] * scale * dp[j];
        }
    }
    (r, jac)
}

/// Minimizes the robustified sum of squared residuals from `theta0`.
///
/// Accepted steps never increase the objective. Convergence is declared when
/// an accepted step improves the objective by less than `rel_tolerance`
/// relative, or when no step of any size can improve it further.
pub(crate) fn minimize<M: CurveModel>(
    model: &M,
    transforms: &[Transform],
    theta0: Vec<f64>,
    settings: &LmSettings,
) -> LmOutcome {
    let k = theta0.len();
    debug_assert_eq!(k, model.n_params());
    let mut params_buf = vec![0.0; k];
    let mut pred_buf = vec![0.0; model.n_points()];

    let mut theta = theta0;
    let mut objective = objective_at(
        model,
        &theta,
        transforms,
        settings,
        &mut params_buf,
        &mut pred_buf,
    );
    let mut trace = vec![objective];
    if !objective.is_finite() {
        return LmOutcome {
            theta,
            objective,
            converged: false,
            trace,
        };
    }
    if objective == 0.0 {
        return LmOutcome {
            theta,
            objective,
            converged: true,
            trace,
        };
    }

    let mut lambda = LAMBDA_INIT;
    let mut converged = false;

    'outer: for _ in 0..settings.max_iterations {
        let (r, jac) = residuals_and_jacobian(model, &theta, transforms, settings.space);
        // IRLS weights for the Huber objective, frozen within this step.
        let w: Vec<f64> = r
            .iter()
            .map(|&ri| weight(ri, settings.huber_delta))
            .collect();
        let mut jtj = DMatrix::<f64>::zeros(k, k);
        let mut jtr = DVector::<f64>::zeros(k);
        for i in 0..model.n_points() {
            let wi = w[i];
            for a in 0..k {
                jtr[a] += wi * jac[(i, a)] * r[i];
                for b in a..k {
                    jtj[(a, b)] += wi * jac[(i, a)] * jac[(i, b)];
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                jtj[(a, b)] = jtj[(b, a)];
            }
        }
        let diag_floor = 1e-12 * jtj.diagonal().max().max(f64::MIN_POSITIVE);

        loop {
            // Marquardt scaling: damp proportionally to the curvature the
            // parameter already has, with a floor for frozen coordinates.
            let mut damped = jtj.clone();
            for a in 0..k {
                damped[(a, a)] += lambda * jtj[(a, a)].max(diag_floor);
            }
            let step = damped.lu().solve(&(-&jtr));
            let trial_obj = match &step {
                Some(delta) => {
                    let trial: Vec<f64> =
                        theta.iter().zip(delta.iter()).map(|(t, d)| t + d).collect();
                    let obj = objective_at(
                        model,
                        &trial,
                        transforms,
                        settings,
                        &mut params_buf,
                        &mut pred_buf,
                    );
                    if obj.is_finite() && obj < objective {
                        let rel_drop = (objective - obj) / objective.max(f64::MIN_POSITIVE);
                        theta = trial;
                        objective = obj;
                        trace.push(objective);
                        lambda = (lambda * LAMBDA_DOWN).max(LAMBDA_MIN);
                        if rel_drop <= settings.rel_tolerance || objective == 0.0 {
                            converged = true;
                            break 'outer;
                        }
                        continue 'outer;
                    }
                    Some(obj)
                }
                None => None,
            };
            lambda *= LAMBDA_UP;
            if lambda > LAMBDA_MAX {
                // No step of any size improves the objective: we are at a
                // numerical stationary point. Report convergence only if the
                // flat region is within tolerance of the current value.
                if let Some(obj) = trial_obj {
                    let rel = (obj - objective).abs() / objective.max(f64::MIN_POSITIVE);
                    converged = obj.is_finite() && rel <= settings.rel_tolerance;
                }
                break 'outer;
            }
        }
    }

    LmOutcome {
        theta,
        objective,
        converged,
        trace,
    }
}
