//! Constrained nonlinear least-squares estimation of scaling-law parameters.
//!
//! Every fit runs the same engine: a damped least-squares iteration over a
//! smoothly reparameterized (and therefore unconstrained) parameter space,
//! started from a deterministic grid of initializations with the linear
//! coefficients solved cheaply per start. Fits are deterministic: identical
//! inputs and config produce bit-identical reports.

mod lm;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Axis, FrontierLaw, JointLaw, MarginalLaw, Observation};
use crate::rng;

pub(crate) use lm::{CurveModel, LmSettings, Space, Transform};

/// Space the residuals are formed in.
///
/// Linear is the default: curves are fit to losses, not log-losses. Log-space
/// residuals are available but can be ill-posed near a fitted floor.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualSpace {
    #[default]
    Linear,
    Log,
}

impl ResidualSpace {
    fn to_space(self) -> Space {
        match self {
            ResidualSpace::Linear => Space::Linear,
            ResidualSpace::Log => Space::Log,
        }
    }
}

/// Robustification of the fit objective.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RobustLoss {
    /// Plain sum of squared residuals.
    #[default]
    LeastSquares,
    /// Huber loss with threshold 1.345 times the median absolute deviation
    /// of the initial residuals.
    HuberAuto,
    /// Huber loss with a fixed threshold.
    Huber(f64),
}

/// Fit engine configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub residual_space: ResidualSpace,
    pub robust: RobustLoss,
    pub max_iterations: usize,
    /// Relative change in the objective below which a fit is converged.
    pub rel_tolerance: f64,
    pub n_starts: usize,
    /// Seed for initializations beyond the deterministic start grid.
    pub seed: u64,
    /// When true, inputs whose losses are all identical are rejected instead
    /// of returning a flat (exponent 0) fit.
    pub error_on_constant: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            residual_space: ResidualSpace::Linear,
            robust: RobustLoss::LeastSquares,
            max_iterations: 1000,
            rel_tolerance: 1e-10,
            n_starts: 64,
            seed: 0,
            error_on_constant: false,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::Domain("max_iterations must be >= 1".into()));
        }
        if !(self.rel_tolerance.is_finite() && self.rel_tolerance > 0.0) {
            return Err(Error::Domain("rel_tolerance must be positive".into()));
        }
        if self.n_starts == 0 {
            return Err(Error::Domain("n_starts must be >= 1".into()));
        }
        if let RobustLoss::Huber(delta) = self.robust {
            if !(delta.is_finite() && delta > 0.0) {
                return Err(Error::Domain("huber delta must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Outcome of a fit: the estimated law plus goodness-of-fit diagnostics.
///
/// `sse` is the minimized (possibly robustified) objective; `r_squared` and
/// `residuals` are always reported in the fitted residual space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport<P> {
    pub params: P,
    /// NaN (serialized as null) when the observations carry no variance to
    /// explain, e.g. for a flat fit of constant losses.
    #[serde(deserialize_with = "crate::serde_util::f64_null_as_nan")]
    pub r_squared: f64,
    pub sse: f64,
    pub n_points: usize,
    pub n_free_params: usize,
    pub converged: bool,
    /// Which initialization won the multi-start tournament.
    pub start_index: usize,
    pub residuals: Vec<f64>,
    /// Input points discarded before fitting (e.g. non-positive excess
    /// losses in transfer fits); 0 for plain curve fits.
    pub n_dropped: usize,
}

/// Coefficient of determination `1 - SSE/TSS`.
pub fn r_squared(predicted: &[f64], observed: &[f64]) -> Result<f64> {
    if predicted.len() != observed.len() || observed.is_empty() {
        return Err(Error::InsufficientData(format!(
            "predicted and observed must be equal-length and non-empty, got {} and {}",
            predicted.len(),
            observed.len()
        )));
    }
    let mean = observed.iter().sum::<f64>() / observed.len() as f64;
    let tss: f64 = observed.iter().map(|&o| (o - mean) * (o - mean)).sum();
    if tss == 0.0 {
        return Err(Error::DegenerateStatistic(
            "observed values are all identical; R^2 is undefined".into(),
        ));
    }
    let sse: f64 = predicted
        .iter()
        .zip(observed)
        .map(|(&p, &o)| (o - p) * (o - p))
        .sum();
    Ok(1.0 - sse / tss)
}

/// Collapses step series to one point per trained configuration: the minimum
/// loss over all steps, i.e. the best checkpoint of each
/// `(arch, paradigm, dataset, split, n_params, n_samples)` group.
///
/// Ties on loss keep the earliest step. Output order is deterministic,
/// sorted by group key.
pub fn reduce_best_per_scale(observations: &[Observation]) -> Vec<Observation> {
    use std::collections::BTreeMap;
    let mut best: BTreeMap<_, &Observation> = BTreeMap::new();
    for obs in observations {
        best.entry(obs.config_key())
            .and_modify(|cur| {
                if obs.loss < cur.loss || (obs.loss == cur.loss && obs.step < cur.step) {
                    *cur = obs;
                }
            })
            .or_insert(obs);
    }
    best.into_values().cloned().collect()
}

fn count_distinct(values: impl Iterator<Item = f64>) -> usize {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.len()
}

fn check_positive_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

fn all_losses_identical(losses: impl Iterator<Item = f64> + Clone) -> bool {
    let mut it = losses;
    match it.next() {
        None => true,
        Some(first) => it.all(|l| l == first),
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Huber threshold from initial residuals: 1.345 times their MAD.
fn auto_huber_delta(residuals: &[f64]) -> Option<f64> {
    let mut r = residuals.to_vec();
    let med = median(&mut r);
    let mut dev: Vec<f64> = residuals.iter().map(|&x| (x - med).abs()).collect();
    let mad = median(&mut dev);
    let delta = 1.345 * mad;
    (delta > 0.0).then_some(delta)
}

const EXPONENT_STARTS: [f64; 4] = [0.05, 0.15, 0.35, 0.7];
const FLOOR_FRACTIONS: [f64; 4] = [0.0, 0.25, 0.5, 0.9];

/// Visits `0..len` exactly once in a scrambled order (a coprime stride), so
/// truncating the start list to any prefix still samples the whole grid
/// rather than one corner of it.
fn scrambled_indices(len: usize) -> impl Iterator<Item = usize> {
    let mut stride = (len * 618 / 1000).max(1);
    fn gcd(mut a: usize, mut b: usize) -> usize {
        while b != 0 {
            (a, b) = (b, a % b);
        }
        a
    }
    while gcd(stride, len) != 1 {
        stride += 1;
    }
    (0..len).map(move |i| (i * stride) % len)
}

/// Log-uniform draw in [lo, hi] from a SplitMix64 stream.
fn log_uniform(state: &mut u64, lo: f64, hi: f64) -> f64 {
    let u = rng::unit_open(rng::splitmix64(state));
    (lo.ln() + u * (hi.ln() - lo.ln())).exp()
}

fn uniform(state: &mut u64, lo: f64, hi: f64) -> f64 {
    lo + rng::unit_open(rng::splitmix64(state)) * (hi - lo)
}

struct MultistartWinner {
    outcome: lm::LmOutcome,
    start_index: usize,
}

fn run_multistart<M: CurveModel>(
    model: &M,
    transforms: &[Transform],
    starts: Vec<Vec<f64>>,
    config: &FitConfig,
) -> Result<MultistartWinner> {
    let huber_delta = match config.robust {
        RobustLoss::LeastSquares => None,
        RobustLoss::Huber(delta) => Some(delta),
        RobustLoss::HuberAuto => {
            let initial = lm::residuals_at(
                model,
                &starts[0],
                transforms,
                config.residual_space.to_space(),
            );
            auto_huber_delta(&initial)
        }
    };
    let settings = LmSettings {
        max_iterations: config.max_iterations,
        rel_tolerance: config.rel_tolerance,
        space: config.residual_space.to_space(),
        huber_delta,
    };

    let mut winner: Option<MultistartWinner> = None;
    for (idx, theta0) in starts.into_iter().enumerate() {
        let outcome = lm::minimize(model, transforms, theta0, &settings);
        debug_assert!(
            outcome.trace.windows(2).all(|w| w[1] <= w[0]),
            "accepted steps must never increase the objective"
        );
        if !outcome.objective.is_finite() {
            continue;
        }
        let better = match &winner {
            None => true,
            // Ties keep the earliest start.
            Some(w) => outcome.objective < w.outcome.objective,
        };
        if better {
            winner = Some(MultistartWinner {
                outcome,
                start_index: idx,
            });
        }
    }
    winner.ok_or_else(|| {
        Error::Numerical("every initialization produced a non-finite objective".into())
    })
}

fn finish_report<P: Clone>(
    params: P,
    winner: &MultistartWinner,
    predicted: Vec<f64>,
    observed: Vec<f64>,
    n_free_params: usize,
) -> Result<FitReport<P>> {
    let residuals: Vec<f64> = predicted
        .iter()
        .zip(&observed)
        .map(|(&p, &o)| p - o)
        .collect();
    let r2 = r_squared(&predicted, &observed)?;
    Ok(FitReport {
        params,
        r_squared: r2,
        sse: winner.outcome.objective,
        n_points: observed.len(),
        n_free_params,
        converged: winner.outcome.converged,
        start_index: winner.start_index,
        residuals,
        n_dropped: 0,
    })
}

// ---------------------------------------------------------------------------
// Joint law L(N, D) = E + A*N^-alpha + B*D^-beta
// ---------------------------------------------------------------------------

struct JointModel {
    n: Vec<f64>,
    d: Vec<f64>,
    loss: Vec<f64>,
    ln_n: Vec<f64>,
    ln_d: Vec<f64>,
    // Grid designs repeat axis values; power terms are computed once per
    // distinct value and gathered per point.
    ln_n_distinct: Vec<f64>,
    ln_d_distinct: Vec<f64>,
    n_index: Vec<usize>,
    d_index: Vec<usize>,
}

impl JointModel {
    fn new(points: &[(f64, f64, f64)]) -> Self {
        let n: Vec<f64> = points.iter().map(|p| p.0).collect();
        let d: Vec<f64> = points.iter().map(|p| p.1).collect();
        let loss: Vec<f64> = points.iter().map(|p| p.2).collect();
        let ln_n: Vec<f64> = n.iter().map(|v| v.ln()).collect();
        let ln_d: Vec<f64> = d.iter().map(|v| v.ln()).collect();
        let (ln_n_distinct, n_index) = dedup_index(&ln_n);
        let (ln_d_distinct, d_index) = dedup_index(&ln_d);
        JointModel {
            n,
            d,
            loss,
            ln_n,
            ln_d,
            ln_n_distinct,
            ln_d_distinct,
            n_index,
            d_index,
        }
    }

    fn power_terms(&self, alpha: f64, beta: f64) -> (Vec<f64>, Vec<f64>) {
        let tn: Vec<f64> = self
            .ln_n_distinct
            .iter()
            .map(|&l| (-alpha * l).exp())
            .collect();
        let td: Vec<f64> = self
            .ln_d_distinct
            .iter()
            .map(|&l| (-beta * l).exp())
            .collect();
        (tn, td)
    }
}

fn dedup_index(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut distinct: Vec<f64> = values.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let index = values
        .iter()
        .map(|v| {
            distinct
                .binary_search_by(|probe| probe.total_cmp(v))
                .unwrap()
        })
        .collect();
    (distinct, index)
}

impl CurveModel for JointModel {
    fn n_points(&self) -> usize {
        self.loss.len()
    }
    fn n_params(&self) -> usize {
        5
    }
    fn observed(&self, i: usize) -> f64 {
        self.loss[i]
    }
    fn predictions(&self, p: &[f64], pred: &mut [f64]) {
        let (tn, td) = self.power_terms(p[2], p[4]);
        for i in 0..self.loss.len() {
            pred[i] = p[0] + p[1] * tn[self.n_index[i]] + p[3] * td[self.d_index[i]];
        }
    }
    fn predictions_with_gradients(&self, p: &[f64], pred: &mut [f64], grad: &mut [f64]) {
        let (tn, td) = self.power_terms(p[2], p[4]);
        for i in 0..self.loss.len() {
            let tni = tn[self.n_index[i]];
            let tdi = td[self.d_index[i]];
            pred[i] = p[0] + p[1] * tni + p[3] * tdi;
            let row = &mut grad[i * 5..(i + 1) * 5];
            row[0] = 1.0;
            row[1] = tni;
            row[2] = -p[1] * self.ln_n[i] * tni;
            row[3] = tdi;
            row[4] = -p[3] * self.ln_d[i] * tdi;
        }
    }
}

/// Least-squares coefficients on the two-term basis {n^-alpha, d^-beta}
/// against targets loss - e, clamped positive so they are usable as a start.
fn solve_two_coefficients(
    n: &[f64],
    d: &[f64],
    loss: &[f64],
    e: f64,
    alpha: f64,
    beta: f64,
) -> (f64, f64) {
    let (mut s11, mut s12, mut s22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..loss.len() {
        let phi = n[i].powf(-alpha);
        let psi = d[i].powf(-beta);
        let y = loss[i] - e;
        s11 += phi * phi;
        s12 += phi * psi;
        s22 += psi * psi;
        b1 += phi * y;
        b2 += psi * y;
    }
    let det = s11 * s22 - s12 * s12;
    let scale = loss.iter().cloned().fold(f64::MIN_POSITIVE, f64::max);
    let floor = 1e-8 * scale;
    if det.abs() < 1e-300 {
        let mean_y = loss.iter().map(|&l| l - e).sum::<f64>() / loss.len() as f64;
        let half = (mean_y / 2.0).max(floor);
        return (half, half);
    }
    let a = (s22 * b1 - s12 * b2) / det;
    let b = (s11 * b2 - s12 * b1) / det;
    (a.max(floor), b.max(floor))
}

fn joint_starts(model: &JointModel, config: &FitConfig) -> Vec<Vec<f64>> {
    let min_loss = model.loss.iter().cloned().fold(f64::INFINITY, f64::min);
    let grid_len = FLOOR_FRACTIONS.len() * EXPONENT_STARTS.len() * EXPONENT_STARTS.len();
    let mut starts = Vec::new();
    for combo in scrambled_indices(grid_len).take(config.n_starts) {
        let e = FLOOR_FRACTIONS[combo / 16] * min_loss;
        let alpha = EXPONENT_STARTS[(combo / 4) % 4];
        let beta = EXPONENT_STARTS[combo % 4];
        let (a, b) = solve_two_coefficients(&model.n, &model.d, &model.loss, e, alpha, beta);
        starts.push(vec![
            Transform::Softplus.invert(e),
            Transform::Exp.invert(a),
            Transform::Exp.invert(alpha),
            Transform::Exp.invert(b),
            Transform::Exp.invert(beta),
        ]);
    }
    let mut state = config.seed ^ 0x6A09_E667_F3BC_C908;
    while starts.len() < config.n_starts {
        let alpha = log_uniform(&mut state, 0.02, 2.0);
        let beta = log_uniform(&mut state, 0.02, 2.0);
        let e = uniform(&mut state, 0.0, 0.95 * min_loss);
        let (a, b) = solve_two_coefficients(&model.n, &model.d, &model.loss, e, alpha, beta);
        starts.push(vec![
            Transform::Softplus.invert(e),
            Transform::Exp.invert(a),
            Transform::Exp.invert(alpha),
            Transform::Exp.invert(b),
            Transform::Exp.invert(beta),
        ]);
    }
    starts
}

fn flat_joint_report(loss: &[f64], space: ResidualSpace) -> FitReport<JointLaw> {
    let c = loss[0];
    let params = JointLaw {
        e: c / 2.0,
        a: c / 4.0,
        alpha: 0.0,
        b: c / 4.0,
        beta: 0.0,
    };
    flat_report(params, |p| p.eval_raw(1.0, 1.0), loss, space, 5)
}

fn flat_report<P: Clone>(
    params: P,
    eval: impl Fn(&P) -> f64,
    loss: &[f64],
    space: ResidualSpace,
    n_free_params: usize,
) -> FitReport<P> {
    let pred = eval(&params);
    let residuals: Vec<f64> = loss
        .iter()
        .map(|&l| match space {
            ResidualSpace::Linear => pred - l,
            ResidualSpace::Log => pred.ln() - l.ln(),
        })
        .collect();
    let sse = residuals.iter().map(|r| r * r).sum();
    FitReport {
        params,
        // All observations identical: the total sum of squares is zero and
        // R^2 is undefined.
        r_squared: f64::NAN,
        sse,
        n_points: loss.len(),
        n_free_params,
        converged: true,
        start_index: 0,
        residuals,
        n_dropped: 0,
    }
}

const JOINT_TRANSFORMS: [Transform; 5] = [
    Transform::Softplus, // E
    Transform::Exp,      // A
    Transform::Exp,      // alpha
    Transform::Exp,      // B
    Transform::Exp,      // beta
];

/// Fits the joint law to `(n, d, loss)` triples.
///
/// Requires at least 5 points with at least 3 distinct values on each axis.
pub fn fit_joint(points: &[(f64, f64, f64)], config: &FitConfig) -> Result<FitReport<JointLaw>> {
    config.validate()?;
    for &(n, d, loss) in points {
        check_positive_finite("n", n)?;
        check_positive_finite("d", d)?;
        check_positive_finite("loss", loss)?;
    }
    if points.len() < 5 {
        return Err(Error::InsufficientData(format!(
            "joint fit needs >= 5 points, got {}",
            points.len()
        )));
    }
    let distinct_n = count_distinct(points.iter().map(|p| p.0));
    let distinct_d = count_distinct(points.iter().map(|p| p.1));
    if distinct_n < 3 {
        return Err(Error::InsufficientData(format!(
            "joint fit needs >= 3 distinct n values, got {distinct_n}"
        )));
    }
    if distinct_d < 3 {
        return Err(Error::InsufficientData(format!(
            "joint fit needs >= 3 distinct d values, got {distinct_d}"
        )));
    }
    let loss: Vec<f64> = points.iter().map(|p| p.2).collect();
    if all_losses_identical(loss.iter().cloned()) {
        if config.error_on_constant {
            return Err(Error::DegenerateFit("all losses are identical".into()));
        }
        return Ok(flat_joint_report(&loss, config.residual_space));
    }

    let model = JointModel::new(points);
    let starts = joint_starts(&model, config);
    let winner = run_multistart(&model, &JOINT_TRANSFORMS, starts, config)?;

    let th = &winner.outcome.theta;
    let params = JointLaw {
        e: Transform::Softplus.apply(th[0]),
        a: Transform::Exp.apply(th[1]),
        alpha: Transform::Exp.apply(th[2]),
        b: Transform::Exp.apply(th[3]),
        beta: Transform::Exp.apply(th[4]),
    };
    params
        .validate()
        .map_err(|e| Error::Numerical(format!("fit produced an invalid law: {e}")))?;

    let mut fitted = vec![0.0; model.n_points()];
    model.predictions(
        &[params.e, params.a, params.alpha, params.b, params.beta],
        &mut fitted,
    );
    let (predicted, observed) = space_values(
        config.residual_space,
        fitted.iter().cloned().zip(model.loss.iter().cloned()),
    );
    finish_report(params, &winner, predicted, observed, 5)
}

fn space_values(
    space: ResidualSpace,
    pairs: impl Iterator<Item = (f64, f64)>,
) -> (Vec<f64>, Vec<f64>) {
    let mut predicted = Vec::new();
    let mut observed = Vec::new();
    for (p, o) in pairs {
        match space {
            ResidualSpace::Linear => {
                predicted.push(p);
                observed.push(o);
            }
            ResidualSpace::Log => {
                predicted.push(p.max(1e-300).ln());
                observed.push(o.max(1e-300).ln());
            }
        }
    }
    (predicted, observed)
}

// ---------------------------------------------------------------------------
// Marginal law L(x) = E + coeff * x^-exponent
// ---------------------------------------------------------------------------

struct MarginalModel {
    x: Vec<f64>,
    loss: Vec<f64>,
    ln_x: Vec<f64>,
}

impl CurveModel for MarginalModel {
    fn n_points(&self) -> usize {
        self.loss.len()
    }
    fn n_params(&self) -> usize {
        3
    }
    fn observed(&self, i: usize) -> f64 {
        self.loss[i]
    }
    fn predictions(&self, p: &[f64], pred: &mut [f64]) {
        for (i, &ln_x) in self.ln_x.iter().enumerate() {
            pred[i] = p[0] + p[1] * (-p[2] * ln_x).exp();
        }
    }
    fn predictions_with_gradients(&self, p: &[f64], pred: &mut [f64], grad: &mut [f64]) {
        for (i, &ln_x) in self.ln_x.iter().enumerate() {
            let t = (-p[2] * ln_x).exp();
            pred[i] = p[0] + p[1] * t;
            let row = &mut grad[i * 3..(i + 1) * 3];
            row[0] = 1.0;
            row[1] = t;
            row[2] = -p[1] * ln_x * t;
        }
    }
}

fn solve_one_coefficient(x: &[f64], loss: &[f64], e: f64, exponent: f64) -> f64 {
    let (mut s, mut b) = (0.0, 0.0);
    for i in 0..loss.len() {
        let phi = x[i].powf(-exponent);
        s += phi * phi;
        b += phi * (loss[i] - e);
    }
    let scale = loss.iter().cloned().fold(f64::MIN_POSITIVE, f64::max);
    if s <= 0.0 {
        return 1e-8 * scale;
    }
    (b / s).max(1e-8 * scale)
}

const MARGINAL_TRANSFORMS: [Transform; 3] = [Transform::Softplus, Transform::Exp, Transform::Exp];

fn marginal_starts(model: &MarginalModel, config: &FitConfig) -> Vec<Vec<f64>> {
    let min_loss = model.loss.iter().cloned().fold(f64::INFINITY, f64::min);
    let grid_len = FLOOR_FRACTIONS.len() * EXPONENT_STARTS.len();
    let mut starts = Vec::new();
    for combo in scrambled_indices(grid_len).take(config.n_starts) {
        let e = FLOOR_FRACTIONS[combo / 4] * min_loss;
        let exponent = EXPONENT_STARTS[combo % 4];
        let coeff = solve_one_coefficient(&model.x, &model.loss, e, exponent);
        starts.push(vec![
            Transform::Softplus.invert(e),
            Transform::Exp.invert(coeff),
            Transform::Exp.invert(exponent),
        ]);
    }
    let mut state = config.seed ^ 0xBB67_AE85_84CA_A73B;
    while starts.len() < config.n_starts {
        let exponent = log_uniform(&mut state, 0.02, 2.0);
        let e = uniform(&mut state, 0.0, 0.95 * min_loss);
        let coeff = solve_one_coefficient(&model.x, &model.loss, e, exponent);
        starts.push(vec![
            Transform::Softplus.invert(e),
            Transform::Exp.invert(coeff),
            Transform::Exp.invert(exponent),
        ]);
    }
    starts
}

/// Fits a single-axis law to `(x, loss)` pairs.
///
/// Requires at least 4 points with at least 4 distinct x values.
pub fn fit_marginal(
    points: &[(f64, f64)],
    axis: Axis,
    config: &FitConfig,
) -> Result<FitReport<MarginalLaw>> {
    config.validate()?;
    for &(x, loss) in points {
        check_positive_finite("x", x)?;
        check_positive_finite("loss", loss)?;
    }
    if points.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "marginal fit needs >= 4 points, got {}",
            points.len()
        )));
    }
    let distinct_x = count_distinct(points.iter().map(|p| p.0));
    if distinct_x < 4 {
        return Err(Error::InsufficientData(format!(
            "marginal fit needs >= 4 distinct x values, got {distinct_x}"
        )));
    }
    let loss: Vec<f64> = points.iter().map(|p| p.1).collect();
    if all_losses_identical(loss.iter().cloned()) {
        if config.error_on_constant {
            return Err(Error::DegenerateFit("all losses are identical".into()));
        }
        let c = loss[0];
        let params = MarginalLaw {
            e: c / 2.0,
            coeff: c / 2.0,
            exponent: 0.0,
            axis,
        };
        return Ok(flat_report(
            params,
            |p| p.eval_raw(1.0),
            &loss,
            config.residual_space,
            3,
        ));
    }

    let model = MarginalModel {
        x: points.iter().map(|p| p.0).collect(),
        ln_x: points.iter().map(|p| p.0.ln()).collect(),
        loss,
    };
    let starts = marginal_starts(&model, config);
    let winner = run_multistart(&model, &MARGINAL_TRANSFORMS, starts, config)?;

    let th = &winner.outcome.theta;
    let params = MarginalLaw {
        e: Transform::Softplus.apply(th[0]),
        coeff: Transform::Exp.apply(th[1]),
        exponent: Transform::Exp.apply(th[2]),
        axis,
    };
    params
        .validate()
        .map_err(|e| Error::Numerical(format!("fit produced an invalid law: {e}")))?;

    let mut fitted = vec![0.0; model.n_points()];
    model.predictions(&[params.e, params.coeff, params.exponent], &mut fitted);
    let (predicted, observed) = space_values(
        config.residual_space,
        fitted.iter().cloned().zip(model.loss.iter().cloned()),
    );
    finish_report(params, &winner, predicted, observed, 3)
}

// ---------------------------------------------------------------------------
// Frontier law L(C) = a * (C + c)^-b + d
// ---------------------------------------------------------------------------

struct FrontierModel {
    compute: Vec<f64>,
    loss: Vec<f64>,
}

impl CurveModel for FrontierModel {
    fn n_points(&self) -> usize {
        self.loss.len()
    }
    fn n_params(&self) -> usize {
        4
    }
    fn observed(&self, i: usize) -> f64 {
        self.loss[i]
    }
    fn predictions(&self, p: &[f64], pred: &mut [f64]) {
        for (i, &c) in self.compute.iter().enumerate() {
            pred[i] = p[3] + p[0] * (c + p[2]).powf(-p[1]);
        }
    }
    fn predictions_with_gradients(&self, p: &[f64], pred: &mut [f64], grad: &mut [f64]) {
        for (i, &c) in self.compute.iter().enumerate() {
            let base = c + p[2];
            let pow = base.powf(-p[1]);
            pred[i] = p[3] + p[0] * pow;
            let row = &mut grad[i * 4..(i + 1) * 4];
            row[0] = pow;
            row[1] = -p[0] * base.ln() * pow;
            row[2] = -p[0] * p[1] * pow / base;
            row[3] = 1.0;
        }
    }
}

const FRONTIER_TRANSFORMS: [Transform; 4] = [
    Transform::Exp,      // a
    Transform::Exp,      // b
    Transform::Exp,      // c
    Transform::Softplus, // d
];

fn solve_frontier_amplitude(compute: &[f64], loss: &[f64], b: f64, c: f64, d: f64) -> f64 {
    let (mut s, mut num) = (0.0, 0.0);
    for i in 0..loss.len() {
        let phi = (compute[i] + c).powf(-b);
        s += phi * phi;
        num += phi * (loss[i] - d);
    }
    let scale = loss.iter().cloned().fold(f64::MIN_POSITIVE, f64::max);
    if s <= 0.0 {
        return 1e-8 * scale;
    }
    (num / s).max(1e-8 * scale)
}

fn frontier_starts(model: &FrontierModel, config: &FitConfig) -> Vec<Vec<f64>> {
    let min_loss = model.loss.iter().cloned().fold(f64::INFINITY, f64::min);
    let min_c = model.compute.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_c = model.compute.iter().cloned().fold(0.0, f64::max);
    let mut sorted = model.compute.clone();
    let median_c = median(&mut sorted);
    let offset_starts = [1e-6 * min_c, 0.1 * median_c, median_c];

    let grid_len = FLOOR_FRACTIONS.len() * EXPONENT_STARTS.len() * offset_starts.len();
    let mut starts = Vec::new();
    for combo in scrambled_indices(grid_len).take(config.n_starts) {
        let d = FLOOR_FRACTIONS[combo / 12] * min_loss;
        let b = EXPONENT_STARTS[(combo / 3) % 4];
        let c = offset_starts[combo % 3];
        let a = solve_frontier_amplitude(&model.compute, &model.loss, b, c, d);
        starts.push(vec![
            Transform::Exp.invert(a),
            Transform::Exp.invert(b),
            Transform::Exp.invert(c),
            Transform::Softplus.invert(d),
        ]);
    }
    let mut state = config.seed ^ 0x3C6E_F372_FE94_F82B;
    while starts.len() < config.n_starts {
        let b = log_uniform(&mut state, 0.02, 2.0);
        let c = log_uniform(&mut state, 1e-6 * min_c, 10.0 * max_c);
        let d = uniform(&mut state, 0.0, 0.95 * min_loss);
        let a = solve_frontier_amplitude(&model.compute, &model.loss, b, c, d);
        starts.push(vec![
            Transform::Exp.invert(a),
            Transform::Exp.invert(b),
            Transform::Exp.invert(c),
            Transform::Softplus.invert(d),
        ]);
    }
    starts
}

/// Fits the compute frontier to `(compute, loss)` pairs.
///
/// Requires at least 5 points with at least 5 distinct compute values. A
/// strictly flat frontier is not representable, so all-identical losses are
/// always a degenerate-fit error here.
pub fn fit_frontier(points: &[(f64, f64)], config: &FitConfig) -> Result<FitReport<FrontierLaw>> {
    config.validate()?;
    for &(c, loss) in points {
        check_positive_finite("compute", c)?;
        check_positive_finite("loss", loss)?;
    }
    if points.len() < 5 {
        return Err(Error::InsufficientData(format!(
            "frontier fit needs >= 5 points, got {}",
            points.len()
        )));
    }
    let distinct_c = count_distinct(points.iter().map(|p| p.0));
    if distinct_c < 5 {
        return Err(Error::InsufficientData(format!(
            "frontier fit needs >= 5 distinct compute values, got {distinct_c}"
        )));
    }
    let loss: Vec<f64> = points.iter().map(|p| p.1).collect();
    if all_losses_identical(loss.iter().cloned()) {
        return Err(Error::DegenerateFit(
            "all losses are identical; a frontier must be strictly decreasing".into(),
        ));
    }

    let model = FrontierModel {
        compute: points.iter().map(|p| p.0).collect(),
        loss,
    };
    let starts = frontier_starts(&model, config);
    let winner = run_multistart(&model, &FRONTIER_TRANSFORMS, starts, config)?;

    let th = &winner.outcome.theta;
    let params = FrontierLaw {
        a: Transform::Exp.apply(th[0]),
        b: Transform::Exp.apply(th[1]),
        c: Transform::Exp.apply(th[2]),
        d: Transform::Softplus.apply(th[3]),
    };
    params
        .validate()
        .map_err(|e| Error::Numerical(format!("fit produced an invalid law: {e}")))?;

    let mut fitted = vec![0.0; model.n_points()];
    model.predictions(&[params.a, params.b, params.c, params.d], &mut fitted);
    let (predicted, observed) = space_values(
        config.residual_space,
        fitted.iter().cloned().zip(model.loss.iter().cloned()),
    );
    finish_report(params, &winner, predicted, observed, 4)
}
