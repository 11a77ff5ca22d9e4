//! Finite-sample bounds for means of variables bounded in an interval of
//! width `R`.
//!
//! With `Δ(n, α) = R sqrt(ln(2/α) / (2n))`, `μ_lo - Δ` is a one-sided lower
//! bound for the population lower bound and `μ̂ + Δ̂` an upper bound for the
//! twin mean, each failing with probability at most `α/2`. The lower
//! hypothesis is rejected at `α` when `μ̂ + Δ̂ < μ_lo - Δ`. Solving that
//! inequality for `α` gives the p-value in closed form:
//!
//! ```text
//! c = (μ_lo - μ̂) / (R (1/√n + 1/√n̂)),   p = min(1, 2 exp(-2 c²))  for c > 0
//! ```

use crate::error::{Error, Result};

/// `R sqrt(ln(2/α) / (2n))`; `α = 1` is accepted and gives the smallest margin.
pub fn hoeffding_margin(n: usize, y_range: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} outside (0, 1]")));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("Hoeffding margin needs n >= 1".into()));
    }
    if !(y_range >= 0.0 && y_range.is_finite()) {
        return Err(Error::InvalidArgument(format!("range {y_range} is not a finite nonnegative number")));
    }
    Ok(y_range * ((2.0 / alpha).ln() / (2.0 * n as f64)).sqrt())
}

fn p_from_gap(gap: f64, n: usize, n_hat: usize, y_range: f64) -> f64 {
    if !(gap > 0.0) || y_range <= 0.0 {
        return 1.0;
    }
    let c = gap / (y_range * (1.0 / (n as f64).sqrt() + 1.0 / (n_hat as f64).sqrt()));
    (2.0 * (-2.0 * c * c).exp()).clamp(f64::MIN_POSITIVE, 1.0)
}

/// p-value of the lower hypothesis `Q̂ >= Q_lo`.
pub fn p_value_hoeffding_lo(mu_lo: f64, n: usize, mu_hat: f64, n_hat: usize, y_range: f64) -> f64 {
    p_from_gap(mu_lo - mu_hat, n, n_hat, y_range)
}

/// p-value of the upper hypothesis `Q̂ <= Q_up`.
pub fn p_value_hoeffding_up(mu_up: f64, n: usize, mu_hat: f64, n_hat: usize, y_range: f64) -> f64 {
    p_from_gap(mu_hat - mu_up, n, n_hat, y_range)
}
