//! Loss-to-loss and fine-tuning transfer fits.
//!
//! With the loss floors fixed, both model classes are exactly log-linear, so
//! the fits reduce to ordinary least squares in log space: closed-form,
//! deterministic, and exact on noiseless data. Floors always come from
//! upstream joint fits and are never re-estimated here.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{r_squared, FitReport};
use crate::model::{excess_loss, LossToLossLaw, TransferLaw};

/// Paired in-distribution / out-of-distribution test losses of one trained
/// checkpoint, tagged with its provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossPair {
    pub l_id: f64,
    pub l_ood: f64,
    pub n_params: u64,
    pub n_samples: u64,
}

impl LossPair {
    pub fn validate(&self) -> Result<()> {
        if !(self.l_id.is_finite() && self.l_id > 0.0) {
            return Err(Error::Domain(format!(
                "l_id must be positive, got {}",
                self.l_id
            )));
        }
        if !(self.l_ood.is_finite() && self.l_ood > 0.0) {
            return Err(Error::Domain(format!(
                "l_ood must be positive, got {}",
                self.l_ood
            )));
        }
        Ok(())
    }
}

/// One observation of effective data transfer: fine-tuning `d_f` samples at
/// model size `n_params` replaced `d_t` samples of from-scratch training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferPoint {
    pub d_f: u64,
    pub n_params: u64,
    pub d_t: f64,
}

impl TransferPoint {
    pub fn validate(&self) -> Result<()> {
        if self.d_f == 0 {
            return Err(Error::Domain("d_f must be >= 1".into()));
        }
        if self.n_params == 0 {
            return Err(Error::Domain("n_params must be >= 1".into()));
        }
        if !(self.d_t.is_finite() && self.d_t > 0.0) {
            return Err(Error::Domain(format!(
                "d_t must be positive, got {}",
                self.d_t
            )));
        }
        Ok(())
    }
}

fn check_floor(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "{name} must be a non-negative finite real, got {v}"
        )))
    }
}

/// Fits `excess OOD loss = K * (excess ID loss)^kappa` by ordinary least
/// squares on `log(excess OOD) ~ log(excess ID)`, with the floors held fixed.
///
/// Pairs whose excess is non-positive on either side have no logarithm and
/// are dropped; the dropped count is recorded in the report. If `kappa_floor`
/// is set and the fitted exponent falls below it, the exponent is pinned to
/// the floor exactly and `K` is re-solved as the OLS intercept.
pub fn fit_loss_to_loss(
    pairs: &[LossPair],
    e_id: f64,
    e_ood: f64,
    kappa_floor: Option<f64>,
) -> Result<FitReport<LossToLossLaw>> {
    check_floor("e_id", e_id)?;
    check_floor("e_ood", e_ood)?;
    if let Some(floor) = kappa_floor {
        if !(floor.is_finite() && floor >= 0.0) {
            return Err(Error::Domain(format!(
                "kappa_floor must be non-negative, got {floor}"
            )));
        }
    }
    for pair in pairs {
        pair.validate()?;
    }

    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut n_dropped = 0usize;
    for pair in pairs {
        let dx = excess_loss(e_id, pair.l_id);
        let dy = excess_loss(e_ood, pair.l_ood);
        if dx > 0.0 && dy > 0.0 {
            x.push(dx.ln());
            y.push(dy.ln());
        } else {
            n_dropped += 1;
        }
    }
    if x.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "loss-to-loss fit needs >= 3 pairs with positive excess on both sides, got {} \
             ({n_dropped} dropped)",
            x.len()
        )));
    }

    let n = x.len() as f64;
    let x_mean = x.iter().sum::<f64>() / n;
    let y_mean = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|&v| (v - x_mean) * (v - x_mean)).sum();
    let sxy: f64 = x
        .iter()
        .zip(&y)
        .map(|(&a, &b)| (a - x_mean) * (b - y_mean))
        .sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit(
            "all excess ID losses are identical; the transfer exponent is unidentifiable".into(),
        ));
    }

    let mut kappa = sxy / sxx;
    let mut pinned = false;
    if let Some(floor) = kappa_floor {
        if kappa < floor {
            kappa = floor;
            pinned = true;
        }
    }
    if kappa <= 0.0 {
        return Err(Error::DegenerateFit(format!(
            "fitted transfer exponent {kappa} is not positive; \
             set kappa_floor to clamp it"
        )));
    }
    let intercept = y_mean - kappa * x_mean;

    let predicted: Vec<f64> = x.iter().map(|&xi| intercept + kappa * xi).collect();
    let residuals: Vec<f64> = predicted.iter().zip(&y).map(|(&p, &o)| p - o).collect();
    let sse: f64 = residuals.iter().map(|r| r * r).sum();
    // A pinned exponent can flatten predictions on flat data; R^2 is then
    // undefined rather than an error.
    let r2 = r_squared(&predicted, &y).unwrap_or(f64::NAN);

    let params = LossToLossLaw::new(intercept.exp(), kappa, e_id, e_ood)?;
    Ok(FitReport {
        params,
        r_squared: r2,
        sse,
        n_points: x.len(),
        n_free_params: if pinned { 1 } else { 2 },
        converged: true,
        start_index: 0,
        residuals,
        n_dropped,
    })
}

/// Predicted OOD loss at an observed ID loss: `e_ood + K*(l_id - e_id)^kappa`.
pub fn predict_ood(law: &LossToLossLaw, l_id: f64) -> Result<f64> {
    law.validate()?;
    if !(l_id.is_finite() && l_id > law.e_id) {
        return Err(Error::Domain(format!(
            "l_id must exceed the ID floor {} for the excess to be defined, got {l_id}",
            law.e_id
        )));
    }
    Ok(law.e_ood + law.k * (l_id - law.e_id).powf(law.kappa))
}

/// Fits `d_t = k * d_f^gamma1 * n^gamma2` by ordinary least squares on
/// `log d_t ~ log d_f + log n`. Exponents are unconstrained in sign.
pub fn fit_transfer(points: &[TransferPoint]) -> Result<FitReport<TransferLaw>> {
    for p in points {
        p.validate()?;
    }
    if points.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "transfer fit needs >= 4 points, got {}",
            points.len()
        )));
    }
    let mut distinct_df: Vec<u64> = points.iter().map(|p| p.d_f).collect();
    distinct_df.sort_unstable();
    distinct_df.dedup();
    if distinct_df.len() < 2 {
        return Err(Error::Collinear {
            column: "d_f".into(),
        });
    }
    let mut distinct_n: Vec<u64> = points.iter().map(|p| p.n_params).collect();
    distinct_n.sort_unstable();
    distinct_n.dedup();
    if distinct_n.len() < 2 {
        return Err(Error::Collinear {
            column: "n_params".into(),
        });
    }

    let x1: Vec<f64> = points.iter().map(|p| (p.d_f as f64).ln()).collect();
    let x2: Vec<f64> = points.iter().map(|p| (p.n_params as f64).ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.d_t.ln()).collect();
    let n = y.len() as f64;
    let m1 = x1.iter().sum::<f64>() / n;
    let m2 = x2.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;

    let (mut s11, mut s22, mut s12, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..y.len() {
        let c1 = x1[i] - m1;
        let c2 = x2[i] - m2;
        let cy = y[i] - my;
        s11 += c1 * c1;
        s22 += c2 * c2;
        s12 += c1 * c2;
        b1 += c1 * cy;
        b2 += c2 * cy;
    }
    let det = s11 * s22 - s12 * s12;
    if det <= 1e-12 * s11 * s22 {
        return Err(Error::Collinear {
            column: "d_f,n_params".into(),
        });
    }
    let gamma1 = (s22 * b1 - s12 * b2) / det;
    let gamma2 = (s11 * b2 - s12 * b1) / det;
    let ln_k = my - gamma1 * m1 - gamma2 * m2;

    let predicted: Vec<f64> = (0..y.len())
        .map(|i| ln_k + gamma1 * x1[i] + gamma2 * x2[i])
        .collect();
    let residuals: Vec<f64> = predicted.iter().zip(&y).map(|(&p, &o)| p - o).collect();
    let sse: f64 = residuals.iter().map(|r| r * r).sum();
    let r2 = r_squared(&predicted, &y)?;

    let params = TransferLaw::new(ln_k.exp(), gamma1, gamma2)?;
    Ok(FitReport {
        params,
        r_squared: r2,
        sse,
        n_points: y.len(),
        n_free_params: 3,
        converged: true,
        start_index: 0,
        residuals,
        n_dropped: 0,
    })
}
