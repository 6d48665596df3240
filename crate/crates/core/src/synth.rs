//! Deterministic synthetic observations and brute-force oracles.
//!
//! The generator and the oracles here are the verification backbone of the
//! crate: fits are checked by generate-and-recover, closed-form allocations
//! against exhaustive grid minimization, and the production crossover
//! scanner against a dense root scan.
//!
//! # Noise generator
//!
//! Observation noise is multiplicative log-normal, drawn from a fixed,
//! documented construction so fixtures can be reproduced bit-exactly in any
//! language:
//!
//! 1. `h = mix(mix(mix(seed) + i) + j)` where `i`/`j` are the 0-based row
//!    (n-grid) and column (d-grid) indices and `mix` is the SplitMix64
//!    output mix (Steele, Lea & Flood 2014);
//! 2. `u1 = toUnit(mix(h))`, `u2 = toUnit(mix(h XOR 0x9E3779B97F4A7C15))`,
//!    where `toUnit(x) = ((x >> 11) + 1) * 2^-53`, so `u1, u2` lie in (0, 1];
//! 3. `z = sqrt(-2 ln u1) * cos(2 pi u2)` (Box-Muller);
//! 4. `loss = L(n, d) * exp(sigma * z)`.
//!
//! Seeding is per-index, so generation order (or parallel generation) cannot
//! change any draw.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{JointLaw, Observation, Split};
use crate::rng::{mix, unit_closed};

/// How observation noise is generated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    /// Log-space standard deviation.
    pub sigma: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    None,
    MultiplicativeLogNormal,
}

impl NoiseModel {
    pub fn none() -> Self {
        NoiseModel {
            kind: NoiseKind::None,
            sigma: 0.0,
            seed: 0,
        }
    }

    pub fn log_normal(sigma: f64, seed: u64) -> Self {
        NoiseModel {
            kind: NoiseKind::MultiplicativeLogNormal,
            sigma,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::Domain(format!(
                "sigma must be non-negative, got {}",
                self.sigma
            )));
        }
        Ok(())
    }

    fn factor(&self, i: u64, j: u64) -> f64 {
        match self.kind {
            NoiseKind::None => 1.0,
            NoiseKind::MultiplicativeLogNormal => {
                (self.sigma * standard_normal(self.seed, i, j)).exp()
            }
        }
    }
}

/// One standard-normal draw keyed by `(seed, i, j)`; see the module docs for
/// the exact construction.
pub fn standard_normal(seed: u64, i: u64, j: u64) -> f64 {
    let h = mix(mix(mix(seed).wrapping_add(i)).wrapping_add(j));
    let u1 = unit_closed(mix(h));
    let u2 = unit_closed(mix(h ^ 0x9E37_79B9_7F4A_7C15));
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Identity tags stamped onto generated observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationTags {
    pub arch: String,
    pub paradigm: String,
    pub dataset: String,
    pub split: Split,
    pub batch_size: u64,
    pub macs_fwd: Option<f64>,
}

impl Default for ObservationTags {
    fn default() -> Self {
        ObservationTags {
            arch: "resnet".into(),
            paradigm: "sl".into(),
            dataset: "synthetic".into(),
            split: Split::Id,
            batch_size: 128,
            macs_fwd: None,
        }
    }
}

/// Generates one observation per `(n, d)` grid cell with loss
/// `L(n, d) * exp(eps)`, `eps ~ Normal(0, sigma^2)` keyed by
/// `(seed, row, column)`. Steps are fixed to 0.
pub fn generate_observations(
    truth: &JointLaw,
    n_grid: &[u64],
    d_grid: &[u64],
    noise: &NoiseModel,
    tags: &ObservationTags,
) -> Result<Vec<Observation>> {
    truth.validate()?;
    noise.validate()?;
    if n_grid.is_empty() || d_grid.is_empty() {
        return Err(Error::Domain("grids must be non-empty".into()));
    }
    if n_grid.contains(&0) || d_grid.contains(&0) {
        return Err(Error::Domain("grid values must be >= 1".into()));
    }
    // Duplicate grid values would collide on the (n, d, step) log key.
    for (name, grid) in [("n_grid", n_grid), ("d_grid", d_grid)] {
        let mut sorted = grid.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != grid.len() {
            return Err(Error::Domain(format!(
                "{name} contains duplicate values (rounding of a dense log grid?); \
                 widen the bounds or lower the count"
            )));
        }
    }

    let mut out = Vec::with_capacity(n_grid.len() * d_grid.len());
    for (i, &n) in n_grid.iter().enumerate() {
        for (j, &d) in d_grid.iter().enumerate() {
            let clean = truth.eval(n as f64, d as f64)?;
            let loss = clean * noise.factor(i as u64, j as u64);
            let obs = Observation {
                arch: tags.arch.clone(),
                paradigm: tags.paradigm.clone(),
                dataset: tags.dataset.clone(),
                split: tags.split,
                n_params: n,
                n_samples: d,
                step: 0,
                loss,
                batch_size: tags.batch_size,
                macs_fwd: tags.macs_fwd,
            };
            // A wild sigma can overflow exp() into a non-positive or
            // non-finite loss; surface that instead of emitting it.
            obs.validate()?;
            out.push(obs);
        }
    }
    Ok(out)
}

/// Log-spaced integer grid with `count` points from `lo` to `hi` inclusive.
pub fn log_grid(lo: u64, hi: u64, count: usize) -> Result<Vec<u64>> {
    if lo == 0 || hi < lo {
        return Err(Error::Domain(format!(
            "grid bounds must satisfy 1 <= lo <= hi, got {lo}..{hi}"
        )));
    }
    if count < 1 {
        return Err(Error::Domain("grid needs at least 1 point".into()));
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    let ln_lo = (lo as f64).ln();
    let ln_hi = (hi as f64).ln();
    Ok((0..count)
        .map(|i| {
            (ln_lo + (ln_hi - ln_lo) * i as f64 / (count - 1) as f64)
                .exp()
                .round() as u64
        })
        .collect())
}

/// Exhaustive grid minimizer of `L(N, c/(kappa*N))`: the oracle the
/// closed-form allocation is checked against.
///
/// Scans a log grid of N spanning three decades each side of the stationary
/// point at `cells_per_decade` resolution and returns the argmin cell as
/// `(n, d, loss)`.
pub fn brute_force_allocation(
    law: &JointLaw,
    c: f64,
    kappa_const: f64,
    cells_per_decade: usize,
) -> Result<(f64, f64, f64)> {
    law.validate()?;
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::Domain(format!("c must be positive, got {c}")));
    }
    if !(kappa_const.is_finite() && kappa_const > 0.0) {
        return Err(Error::Domain(format!(
            "kappa_const must be positive, got {kappa_const}"
        )));
    }
    if law.alpha == 0.0 || law.beta == 0.0 {
        return Err(Error::Domain(
            "allocation requires alpha > 0 and beta > 0".into(),
        ));
    }
    if cells_per_decade == 0 {
        return Err(Error::Domain("cells_per_decade must be >= 1".into()));
    }

    // Center the scan window on the stationary point of the Lagrangian.
    let ln_center = (((law.alpha * law.a) / (law.beta * law.b)).ln()
        + law.beta * (c / kappa_const).ln())
        / (law.alpha + law.beta);
    let decades = 6.0;
    let cells = (decades * cells_per_decade as f64).round() as usize;
    let ln10 = std::f64::consts::LN_10;

    let mut best = (f64::NAN, f64::NAN, f64::INFINITY);
    for k in 0..=cells {
        let ln_n = ln_center + (k as f64 / cells as f64 - 0.5) * decades * ln10;
        let n = ln_n.exp();
        let d = c / (kappa_const * n);
        let loss = law.eval_raw(n, d);
        if loss < best.2 {
            best = (n, d, loss);
        }
    }
    Ok(best)
}

/// Dense root scan: sign-change detection over `n_samples` log-spaced
/// points followed by bisection. Independent of the production crossover
/// scanner; meant for test-time cross-validation at high sample counts.
pub fn dense_scan_roots(
    f: impl Fn(f64) -> f64,
    x_range: (f64, f64),
    n_samples: usize,
) -> Result<Vec<f64>> {
    let (lo, hi) = x_range;
    if !(lo.is_finite() && lo > 0.0 && hi.is_finite() && hi > lo) {
        return Err(Error::Domain(format!(
            "x_range must be positive and increasing, got ({lo}, {hi})"
        )));
    }
    if n_samples < 2 {
        return Err(Error::Domain("need at least 2 samples".into()));
    }

    let ln_lo = lo.ln();
    let span = hi.ln() - ln_lo;
    let sample = |k: usize| (ln_lo + span * k as f64 / (n_samples - 1) as f64).exp();

    let mut roots: Vec<f64> = Vec::new();
    let mut prev_x = sample(0);
    let mut prev_f = f(prev_x);
    for k in 1..n_samples {
        let x = sample(k);
        let fx = f(x);
        if prev_f == 0.0 {
            push_unique(&mut roots, prev_x);
        } else if prev_f * fx < 0.0 {
            let mut a = prev_x;
            let mut b = x;
            let mut fa = prev_f;
            while b / a - 1.0 > 1e-9 {
                let m = (a * b).sqrt();
                let fm = f(m);
                if fm == 0.0 {
                    a = m;
                    b = m;
                    break;
                }
                if fa * fm < 0.0 {
                    b = m;
                } else {
                    a = m;
                    fa = fm;
                }
            }
            push_unique(&mut roots, (a * b).sqrt());
        }
        prev_x = x;
        prev_f = fx;
    }
    if prev_f == 0.0 {
        push_unique(&mut roots, prev_x);
    }
    Ok(roots)
}

fn push_unique(roots: &mut Vec<f64>, x: f64) {
    if roots.last().is_none_or(|&last| (x - last).abs() > 1e-9 * x) {
        roots.push(x);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocate;
    use crate::model::Axis;
    use crate::model::MarginalLaw;

    fn truth() -> JointLaw {
        JointLaw::new(0.05, 3.0, 0.35, 8.0, 0.12).unwrap()
    }

    #[test]
    fn zero_sigma_reproduces_the_law_exactly() {
        let n_grid = log_grid(10_000, 100_000_000, 6).unwrap();
        let d_grid = log_grid(1_000, 1_000_000, 6).unwrap();
        let obs = generate_observations(
            &truth(),
            &n_grid,
            &d_grid,
            &NoiseModel::log_normal(0.0, 7),
            &ObservationTags::default(),
        )
        .unwrap();
        assert_eq!(obs.len(), 36);
        for o in &obs {
            let clean = truth().eval(o.n_params as f64, o.n_samples as f64).unwrap();
            assert_eq!(o.loss, clean);
        }
    }

    #[test]
    fn generation_is_deterministic_and_seed_sensitive() {
        let n_grid = log_grid(1_000, 1_000_000, 4).unwrap();
        let d_grid = log_grid(100, 100_000, 4).unwrap();
        let tags = ObservationTags::default();
        let a = generate_observations(
            &truth(),
            &n_grid,
            &d_grid,
            &NoiseModel::log_normal(0.05, 1),
            &tags,
        )
        .unwrap();
        let b = generate_observations(
            &truth(),
            &n_grid,
            &d_grid,
            &NoiseModel::log_normal(0.05, 1),
            &tags,
        )
        .unwrap();
        assert_eq!(a, b);
        let c = generate_observations(
            &truth(),
            &n_grid,
            &d_grid,
            &NoiseModel::log_normal(0.05, 2),
            &tags,
        )
        .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_degenerate_generation_requests() {
        let tags = ObservationTags::default();
        // Duplicate grid values collide on the log key.
        let err = generate_observations(&truth(), &[1000, 1000], &[500], &NoiseModel::none(), &tags);
        assert!(matches!(err, Err(crate::error::Error::Domain(_))));
        // Absurd sigma overflows the noise factor into an invalid loss.
        let err = generate_observations(
            &truth(),
            &[1000],
            &[500],
            &NoiseModel::log_normal(1e308, 0),
            &tags,
        );
        assert!(err.is_err());
    }

    #[test]
    fn noise_is_keyed_per_index_not_per_iteration() {
        // The draw at cell (i, j) must not depend on grid size or order.
        let tags = ObservationTags::default();
        let noise = NoiseModel::log_normal(0.1, 42);
        let small = generate_observations(&truth(), &[1000], &[500], &noise, &tags).unwrap();
        let large =
            generate_observations(&truth(), &[1000, 2000], &[500, 900], &noise, &tags).unwrap();
        assert_eq!(small[0].loss, large[0].loss);
    }

    #[test]
    fn sample_std_matches_sigma() {
        let sigma = 0.02;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let count = 10_000u64;
        for i in 0..count {
            let z = standard_normal(9, i, 0);
            sum += z;
            sum_sq += z * z;
        }
        let mean = sum / count as f64;
        let var = sum_sq / count as f64 - mean * mean;
        let std = (var.sqrt()) * sigma;
        assert!(
            (std - sigma).abs() <= 0.05 * sigma,
            "sample std {std} deviates from {sigma}"
        );
    }

    #[test]
    fn brute_force_agrees_on_symmetric_law() {
        let law = JointLaw::new(0.1, 2.0, 0.4, 2.0, 0.4).unwrap();
        let (n, d, _) = brute_force_allocation(&law, 1e8, 1.0, 200).unwrap();
        let cell = 1.0 / 200.0;
        assert!((n.log10() - 4.0).abs() <= cell, "n={n}");
        assert!((d.log10() - 4.0).abs() <= cell, "d={d}");
    }

    #[test]
    fn brute_force_converges_to_the_closed_form() {
        let law = truth();
        let c = 1e17;
        let kappa = 6.0 * 1e3 * 50.0;
        let closed = allocate::optimal_allocation(&law, c, kappa).unwrap();
        for cells in [10usize, 100, 1000] {
            let (n, _, loss) = brute_force_allocation(&law, c, kappa, cells).unwrap();
            let gap = (n.log10() - closed.n_star.log10()).abs();
            // The scan lands within half a cell of the unimodal minimum.
            assert!(
                gap <= 0.5 / cells as f64 + 1e-12,
                "cells={cells}: gap {gap}"
            );
            assert!(closed.loss_at_opt <= loss + 1e-9);
        }
    }

    #[test]
    fn dense_scan_finds_a_constructed_root() {
        // ln-linear difference with a single root at 1e5.
        let f = |x: f64| x.ln() - 1e5f64.ln();
        let roots = dense_scan_roots(f, (1e3, 1e8), 10_000).unwrap();
        assert_eq!(roots.len(), 1);
        assert!((roots[0] - 1e5).abs() <= 1e-6 * 1e5);
    }

    #[test]
    fn dense_scan_reports_nothing_without_sign_changes() {
        let f = |x: f64| 1.0 + x * 0.0;
        let roots = dense_scan_roots(f, (1.0, 1e6), 1000).unwrap();
        assert!(roots.is_empty());
    }

    #[test]
    fn dense_scan_cross_validates_the_production_scanner() {
        let mut state = 314u64;
        for _ in 0..20 {
            let e1 = crate::rng::unit_open(crate::rng::splitmix64(&mut state)) * 0.3;
            let e2 = crate::rng::unit_open(crate::rng::splitmix64(&mut state)) * 0.3;
            let c1 = 0.5 + 10.0 * crate::rng::unit_open(crate::rng::splitmix64(&mut state));
            let c2 = 0.5 + 10.0 * crate::rng::unit_open(crate::rng::splitmix64(&mut state));
            let x1 = 0.1 + 0.6 * crate::rng::unit_open(crate::rng::splitmix64(&mut state));
            let x2 = 0.1 + 0.6 * crate::rng::unit_open(crate::rng::splitmix64(&mut state));
            let a = MarginalLaw::new(e1, c1, x1, Axis::Params).unwrap();
            let b = MarginalLaw::new(e2, c2, x2, Axis::Params).unwrap();
            let range = (1e2, 1e9);
            let scan = allocate::crossover(&a, &b, range).unwrap();
            let oracle =
                dense_scan_roots(|x| a.eval(x).unwrap() - b.eval(x).unwrap(), range, 100_000)
                    .unwrap();
            assert_eq!(scan.roots.len(), oracle.len(), "law pair a={a:?} b={b:?}");
            for (r, o) in scan.roots.iter().zip(&oracle) {
                assert!((r - o).abs() <= 1e-6 * o, "{r} vs {o}");
            }
        }
    }
}
