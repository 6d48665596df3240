//! Analytics derived from fitted laws: compute budgets, compute-optimal
//! allocation, iso-loss contours, curve crossovers, and data-requirement
//! bounds.
//!
//! The allocation closed forms follow from minimizing the joint law under
//! the constraint `C = kappa * N * D`: the stationary point balances the
//! marginal loss reductions of model and data scaling,
//! `alpha*A*N^-alpha = beta*B*D^-beta`, giving
//! `N*(C) ~ C^(beta/(alpha+beta))` and the optimal-loss curve
//! `L*(C) = E + G*C^-gamma` with `gamma = alpha*beta/(alpha+beta)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ComputeModel, JointLaw, MarginalLaw};

/// Compute-optimal split of a budget between model size and data size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub n_star: f64,
    pub d_star: f64,
    pub loss_at_opt: f64,
    /// Growth exponent of `N*(C)`: `beta/(alpha+beta)`.
    pub exponent_n: f64,
    /// Growth exponent of `D*(C)`: `alpha/(alpha+beta)`; complements
    /// `exponent_n` to exactly 1.
    pub exponent_d: f64,
    /// Compute efficiency `alpha*beta/(alpha+beta)` of the optimal-loss curve.
    pub gamma: f64,
}

/// Loss surface over a `(compute, model size)` grid at full-budget training,
/// with the per-column optimal model size and the closed-form prediction.
///
/// Cells whose budget cannot support even one unique sample are infeasible
/// and hold `NaN` rather than a fabricated loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourGrid {
    pub compute_axis: Vec<f64>,
    pub n_axis: Vec<f64>,
    /// `loss_matrix[i][j]` is the loss at compute `compute_axis[i]` and model
    /// size `n_axis[j]` when the full budget is spent training to
    /// convergence. Infeasible cells are NaN (null in JSON).
    #[serde(deserialize_with = "crate::serde_util::matrix_null_as_nan")]
    pub loss_matrix: Vec<Vec<f64>>,
    /// Per-column argmin: `(compute, best n on the grid)`.
    pub optimal_path: Vec<(f64, f64)>,
    /// Closed-form `(compute, N*(compute))`, for comparison with the grid
    /// argmin; empty when either exponent is zero.
    pub closed_form_path: Vec<(f64, f64)>,
    /// Largest gap between grid argmin and closed form, in decades of N.
    pub path_gap_decades: f64,
}

/// Result of scanning two curves for intersections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossoverScan {
    pub roots: Vec<f64>,
    /// True when the curves agree everywhere in the scanned range; no
    /// isolated roots are reported in that case.
    pub coincident: bool,
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

/// Total training compute in FLOPs: `6 * macs_fwd * batch * steps`.
///
/// The 6 converts MACs to FLOPs (x2) and accounts for the backward pass
/// being roughly twice the cost of the forward pass (x3).
pub fn compute_budget(macs_fwd: f64, batch: u64, steps: u64) -> Result<f64> {
    check_positive("macs_fwd", macs_fwd)?;
    if batch == 0 {
        return Err(Error::Domain("batch must be >= 1".into()));
    }
    if steps == 0 {
        return Err(Error::Domain("steps must be >= 1".into()));
    }
    Ok(6.0 * macs_fwd * batch as f64 * steps as f64)
}

/// Growth exponents of the compute-optimal allocation and the compute
/// efficiency: `(beta/(alpha+beta), alpha/(alpha+beta), alpha*beta/(alpha+beta))`.
pub fn allocation_exponents(alpha: f64, beta: f64) -> Result<(f64, f64, f64)> {
    check_positive("alpha", alpha)?;
    check_positive("beta", beta)?;
    let exp_n = beta / (alpha + beta);
    // Complement exactly so the pair always sums to 1.
    let exp_d = 1.0 - exp_n;
    let gamma = alpha * beta / (alpha + beta);
    Ok((exp_n, exp_d, gamma))
}

/// Allocation exponents under the generalized constraint `C ~ N^a * D^b`:
/// `(beta/(a*beta + alpha*b), alpha/(a*beta + alpha*b))`.
///
/// These reduce to [`allocation_exponents`] when `a = b = 1`, and need not
/// sum to 1 in general (the sum is `(alpha+beta)/(a*beta+alpha*b)`).
pub fn generalized_allocation_exponents(
    alpha: f64,
    beta: f64,
    a: f64,
    b: f64,
) -> Result<(f64, f64)> {
    check_positive("alpha", alpha)?;
    check_positive("beta", beta)?;
    check_positive("a", a)?;
    check_positive("b", b)?;
    let denom = a * beta + alpha * b;
    Ok((beta / denom, alpha / denom))
}

/// Closed-form compute-optimal allocation for budget `c` under the
/// constraint `c = kappa_const * N * D`.
///
/// Requires strictly positive exponents; with `alpha = 0` or `beta = 0`
/// the constrained problem has no interior optimum.
pub fn optimal_allocation(law: &JointLaw, c: f64, kappa_const: f64) -> Result<Allocation> {
    law.validate()?;
    check_positive("c", c)?;
    check_positive("kappa_const", kappa_const)?;
    if law.alpha == 0.0 || law.beta == 0.0 {
        return Err(Error::Domain(
            "optimal allocation requires alpha > 0 and beta > 0; \
             a zero exponent has no interior optimum"
                .into(),
        ));
    }
    let JointLaw {
        a, alpha, b, beta, ..
    } = *law;
    let ratio = (alpha * a) / (beta * b);
    let n_star = (ratio * (c / kappa_const).powf(beta)).powf(1.0 / (alpha + beta));
    let d_star = c / (kappa_const * n_star);
    if !(n_star.is_finite() && n_star > 0.0 && d_star.is_finite() && d_star > 0.0) {
        return Err(Error::Numerical(format!(
            "allocation overflowed: n_star={n_star}, d_star={d_star}"
        )));
    }

    // The stationary point equalizes the marginal loss reductions from
    // scaling model and data; verify we actually sit on it.
    let lhs = alpha * a * n_star.powf(-alpha);
    let rhs = beta * b * d_star.powf(-beta);
    if (lhs - rhs).abs() > 1e-9 * lhs.abs() {
        return Err(Error::Numerical(format!(
            "balance condition violated: {lhs} vs {rhs}"
        )));
    }

    let (exponent_n, exponent_d, gamma) = allocation_exponents(alpha, beta)?;
    Ok(Allocation {
        n_star,
        d_star,
        loss_at_opt: law.eval_raw(n_star, d_star),
        exponent_n,
        exponent_d,
        gamma,
    })
}

/// Loss at the compute-optimal allocation for each budget in `c_values`.
///
/// The resulting curve is exactly `E + G * C^-gamma` with
/// `gamma = alpha*beta/(alpha+beta)`.
pub fn optimal_loss_curve(
    law: &JointLaw,
    kappa_const: f64,
    c_values: &[f64],
) -> Result<Vec<(f64, f64)>> {
    c_values
        .iter()
        .map(|&c| optimal_allocation(law, c, kappa_const).map(|al| (c, al.loss_at_opt)))
        .collect()
}

fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let ln_lo = lo.ln();
    let ln_hi = hi.ln();
    (0..count)
        .map(|i| (ln_lo + (ln_hi - ln_lo) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Fills a `(compute, N)` grid with the converged loss
/// `L(N, D_unique(C, N))`, where `D_unique = C / (6 * macs_fwd(N) * epochs)`
/// is the unique dataset size the budget supports at full training.
pub fn iso_loss_grid(
    law: &JointLaw,
    compute_model: &ComputeModel,
    c_range: (f64, f64),
    n_range: (f64, f64),
    resolution: (usize, usize),
) -> Result<ContourGrid> {
    law.validate()?;
    compute_model.validate()?;
    let (c_lo, c_hi) = c_range;
    let (n_lo, n_hi) = n_range;
    check_positive("c_range.0", c_lo)?;
    check_positive("n_range.0", n_lo)?;
    if !(c_hi.is_finite() && c_hi > c_lo) {
        return Err(Error::Domain(format!(
            "c_range must be increasing, got ({c_lo}, {c_hi})"
        )));
    }
    if !(n_hi.is_finite() && n_hi > n_lo) {
        return Err(Error::Domain(format!(
            "n_range must be increasing, got ({n_lo}, {n_hi})"
        )));
    }
    let (res_c, res_n) = resolution;
    if res_c < 2 || res_n < 2 {
        return Err(Error::Domain(format!(
            "resolution must be >= 2 per axis, got ({res_c}, {res_n})"
        )));
    }

    let compute_axis = log_spaced(c_lo, c_hi, res_c);
    let n_axis = log_spaced(n_lo, n_hi, res_n);
    let mut loss_matrix = Vec::with_capacity(res_c);
    let mut optimal_path = Vec::new();
    for &c in &compute_axis {
        let mut row = Vec::with_capacity(res_n);
        let mut best: Option<(f64, f64)> = None;
        for &n in &n_axis {
            let d_unique = compute_model.unique_data_for(c, n)?;
            let loss = if d_unique < 1.0 {
                f64::NAN
            } else {
                law.eval_raw(n, d_unique)
            };
            if loss.is_finite() {
                let better = match best {
                    None => true,
                    Some((best_loss, _)) => loss < best_loss,
                };
                if better {
                    best = Some((loss, n));
                }
            }
            row.push(loss);
        }
        loss_matrix.push(row);
        if let Some((_, n)) = best {
            optimal_path.push((c, n));
        }
    }

    let kappa_const = compute_model.kappa_const();
    let closed_form_path: Vec<(f64, f64)> = if law.alpha > 0.0 && law.beta > 0.0 {
        compute_axis
            .iter()
            .map(|&c| optimal_allocation(law, c, kappa_const).map(|al| (c, al.n_star)))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };

    let mut path_gap_decades = 0.0f64;
    for (grid, closed) in optimal_path.iter().zip(&closed_form_path) {
        if grid.0 == closed.0 {
            path_gap_decades = path_gap_decades.max((grid.1.log10() - closed.1.log10()).abs());
        }
    }

    Ok(ContourGrid {
        compute_axis,
        n_axis,
        loss_matrix,
        optimal_path,
        closed_form_path,
        path_gap_decades,
    })
}

/// Number of scan samples used by [`crossover`]. Double roots narrower than
/// the sample spacing can be missed; tests guard this with a dense oracle.
pub const CROSSOVER_SCAN_SAMPLES: usize = 1024;

/// Tolerance below which two scanned curves are reported as coincident.
pub const COINCIDENCE_TOLERANCE: f64 = 1e-12;

/// Finds all crossings of two single-axis curves inside `x_range`.
///
/// Sign changes are located on a log-spaced scan of
/// [`CROSSOVER_SCAN_SAMPLES`] points and refined by bisection to 1e-9
/// relative in x. Curves whose difference never exceeds
/// [`COINCIDENCE_TOLERANCE`] are flagged coincident instead.
pub fn crossover(
    curve_a: &MarginalLaw,
    curve_b: &MarginalLaw,
    x_range: (f64, f64),
) -> Result<CrossoverScan> {
    curve_a.validate()?;
    curve_b.validate()?;
    let (lo, hi) = x_range;
    check_positive("x_range.0", lo)?;
    if !(hi.is_finite() && hi > lo) {
        return Err(Error::Domain(format!(
            "x_range must be increasing, got ({lo}, {hi})"
        )));
    }

    let diff = |x: f64| curve_a.eval_raw(x) - curve_b.eval_raw(x);
    let xs = log_spaced(lo, hi, CROSSOVER_SCAN_SAMPLES);
    let fs: Vec<f64> = xs.iter().map(|&x| diff(x)).collect();

    let max_abs = fs.iter().fold(0.0f64, |m, &f| m.max(f.abs()));
    if max_abs < COINCIDENCE_TOLERANCE {
        return Ok(CrossoverScan {
            roots: Vec::new(),
            coincident: true,
        });
    }

    let mut roots = Vec::new();
    for k in 0..xs.len() {
        if fs[k] == 0.0 {
            push_root(&mut roots, xs[k]);
        } else if k + 1 < xs.len() && fs[k] * fs[k + 1] < 0.0 {
            let root = bisect_log(&diff, xs[k], xs[k + 1], fs[k]);
            push_root(&mut roots, root);
        }
    }
    Ok(CrossoverScan {
        roots,
        coincident: false,
    })
}

fn push_root(roots: &mut Vec<f64>, x: f64) {
    if roots.last().is_none_or(|&last| (x - last).abs() > 1e-9 * x) {
        roots.push(x);
    }
}

/// Bisection on a bracketing interval, geometric midpoints, 1e-9 relative
/// convergence in x.
fn bisect_log(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, mut f_lo: f64) -> f64 {
    while hi / lo - 1.0 > 1e-9 {
        let mid = (lo * hi).sqrt();
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if f_lo * f_mid < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            f_lo = f_mid;
        }
    }
    (lo * hi).sqrt()
}

/// Extent of overfitting from finite data: the loss inflation over the
/// infinite-data floor, `B*d^-beta / (E + A*n^-alpha)`.
///
/// Depends on `(n, d)` only through the collapse variable
/// `X = d * (E + A*n^-alpha)^(1/beta)`, as `B * X^-beta`.
pub fn overfit_extent(law: &JointLaw, n: f64, d: f64) -> Result<f64> {
    law.validate()?;
    check_positive("n", n)?;
    check_positive("d", d)?;
    if law.beta == 0.0 {
        return Err(Error::Domain(
            "overfit extent requires beta > 0; with beta = 0 the data term never decays".into(),
        ));
    }
    let floor = law.e + law.a * n.powf(-law.alpha);
    if floor == 0.0 {
        return Err(Error::Domain(
            "infinite-data loss floor is zero at this n; the relative extent is undefined".into(),
        ));
    }
    Ok(law.b * d.powf(-law.beta) / floor)
}

/// Minimum unique data size keeping the overfitting extent at or below
/// `epsilon`: `(B / (epsilon * (E + A*n^-alpha)))^(1/beta)`.
pub fn min_data_for_tolerance(law: &JointLaw, n: f64, epsilon: f64) -> Result<f64> {
    law.validate()?;
    check_positive("n", n)?;
    check_positive("epsilon", epsilon)?;
    if law.beta == 0.0 {
        return Err(Error::Domain(
            "minimum data requirement requires beta > 0".into(),
        ));
    }
    let floor = law.e + law.a * n.powf(-law.alpha);
    if floor == 0.0 {
        return Err(Error::Domain(
            "infinite-data loss floor is zero at this n; no finite data requirement exists".into(),
        ));
    }
    Ok((law.b / (epsilon * floor)).powf(1.0 / law.beta))
}
