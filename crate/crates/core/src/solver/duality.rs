//! Brute-force duality-gap oracle for low-dimensional problems.

use crate::error::{Error, Result};
use crate::prox::ProxGeometry;

use super::ConstrainedProblem;

const MAX_GRID_DIM: usize = 3;

fn axis(lo: f64, hi: f64, resolution: f64) -> Vec<f64> {
    let steps = ((hi - lo) / resolution).ceil().max(0.0) as usize;
    let mut points: Vec<f64> = (0..steps).map(|i| lo + i as f64 * resolution).collect();
    points.push(hi);
    points
}

/// Largest distance from a point of `Q` to the evaluation grid, times the
/// Lipschitz constant of the Lagrangian `f + Σ λ_l g_l`.
pub fn grid_error_bound(lipschitz: f64, lambda: &[f64], geom: &ProxGeometry, resolution: f64) -> f64 {
    let covering_radius = 0.5 * resolution * (geom.dim() as f64).sqrt();
    lipschitz * (1.0 + lambda.iter().sum::<f64>()) * covering_radius
}

/// `f(x̂) − min_{y ∈ grid} [f(y) + Σ λ_l g_l(y)]` using exact oracles.
///
/// Since the grid minimum overestimates the dual function, the result
/// overestimates the true gap by at most [`grid_error_bound`].
pub fn duality_gap_bruteforce<P>(
    problem: &P,
    geom: &ProxGeometry,
    x_hat: &[f64],
    lambda_hat: &[f64],
    resolution: f64,
) -> Result<f64>
where
    P: ConstrainedProblem + ?Sized,
{
    let n = geom.dim();
    if n > MAX_GRID_DIM {
        return Err(Error::InvalidArgument(format!(
            "grid search supports at most {MAX_GRID_DIM} dimensions, got {n}"
        )));
    }
    if lambda_hat.len() != problem.num_constraints() {
        return Err(Error::DimensionMismatch { expected: problem.num_constraints(), actual: lambda_hat.len() });
    }
    if !(resolution > 0.0) {
        return Err(Error::InvalidArgument(format!("grid resolution must be positive, got {resolution}")));
    }
    if let Some(l) = lambda_hat.iter().position(|&l| !(l >= 0.0)) {
        return Err(Error::InvalidArgument(format!("dual variable {l} is negative")));
    }
    let missing = || Error::InvalidArgument("duality gap needs exact objective and constraint oracles".into());
    let f_hat = problem.exact_objective(x_hat).ok_or_else(missing)?;

    let axes: Vec<Vec<f64>> = (0..n).map(|j| axis(geom.lower()[j], geom.upper()[j], resolution)).collect();
    let mut idx = vec![0usize; n];
    let mut y = vec![0.0; n];
    let mut dual_value = f64::INFINITY;
    loop {
        for j in 0..n {
            y[j] = axes[j][idx[j]];
        }
        let mut lagrangian = problem.exact_objective(&y).ok_or_else(missing)?;
        for (l, lam) in lambda_hat.iter().enumerate() {
            if *lam != 0.0 {
                lagrangian += lam * problem.exact_constraint(l, &y).ok_or_else(missing)?;
            }
        }
        dual_value = dual_value.min(lagrangian);

        // odometer increment over the grid
        let mut j = 0;
        loop {
            if j == n {
                return Ok(f_hat - dual_value);
            }
            idx[j] += 1;
            if idx[j] < axes[j].len() {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}
