//! Worst-case iteration counts and the Nemirovski constant.

use std::f64::consts::E;

use crate::error::{Error, Result};

/// `⌈x⌉` that ignores representation noise a few ulps above an integer,
/// so that e.g. `280 · ln(1/e⁻¹)` counts as exactly 280.
pub(crate) fn ceil_count(x: f64) -> u64 {
    let rounded = x.round();
    if (x - rounded).abs() <= 1e-9 * rounded.abs().max(1.0) {
        rounded as u64
    } else {
        x.ceil() as u64
    }
}

fn check_positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be positive and finite, got {value}")))
    }
}

fn check_nonnegative(name: &str, value: f64) -> Result<()> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be nonnegative and finite, got {value}")))
    }
}

/// Iterations after which the averaged iterate is an `(ε, ε + 2δ)` primal
/// solution with probability `1 − σ`:
/// `⌈280 · Θ₀² · M² · ln(1/σ) / ε²⌉`.
pub fn theoretical_iterations_primal(theta0_sq: f64, lipschitz: f64, sigma: f64, epsilon: f64) -> Result<u64> {
    check_nonnegative("theta0_sq", theta0_sq)?;
    check_positive("lipschitz", lipschitz)?;
    check_positive("epsilon", epsilon)?;
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(Error::InvalidArgument(format!("sigma must lie in (0, 1), got {sigma}")));
    }
    let n = 280.0 * theta0_sq * lipschitz * lipschitz * (1.0 / sigma).ln() / (epsilon * epsilon);
    Ok(ceil_count(n))
}

/// Iterations after which `(x̂, λ̂)` is a primal-dual `(ε, ε + 2δ)` solution
/// with probability `1 − σ`:
/// `⌈128 · Θ̄₀² · M² · (17 ln(2/σ) + 2κ) / ε²⌉`.
///
/// The high-probability guarantee needs `σ < 1/2`; the count itself is
/// reported for any `σ ∈ (0, 1)`.
pub fn theoretical_iterations_primal_dual(
    theta_bar_sq: f64,
    lipschitz: f64,
    sigma: f64,
    epsilon: f64,
    kappa: f64,
) -> Result<u64> {
    check_nonnegative("theta_bar_sq", theta_bar_sq)?;
    check_positive("lipschitz", lipschitz)?;
    check_positive("epsilon", epsilon)?;
    check_nonnegative("kappa", kappa)?;
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(Error::InvalidArgument(format!("sigma must lie in (0, 1), got {sigma}")));
    }
    let n = 128.0 * theta_bar_sq * lipschitz * lipschitz * (17.0 * (2.0 / sigma).ln() + 2.0 * kappa)
        / (epsilon * epsilon);
    Ok(ceil_count(n))
}

/// Upper bound on the Nemirovski constant of the dual of `(R^d, ℓ_p)`.
/// `p = f64::INFINITY` selects the `ℓ_∞` primal norm.
pub fn nemirovski_kappa(p: f64, d: usize) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidArgument(format!("norm exponent must be at least 1, got {p}")));
    }
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be at least 1".into()));
    }
    let d = d as f64;
    if p == 2.0 {
        return Ok(1.0);
    }
    if p < 2.0 {
        let polynomial = d.powf(2.0 / p - 1.0);
        let logarithmic = (2.0 * E * d.ln() - E).max(1.0);
        Ok(polynomial.min(logarithmic))
    } else if p.is_infinite() {
        Ok(d)
    } else {
        Ok(d.powf(1.0 - 2.0 / p))
    }
}
