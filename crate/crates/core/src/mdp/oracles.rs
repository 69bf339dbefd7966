//! Exact evaluation oracles for known models.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{Mdp, Policy};
use crate::error::{Error, Result};
use crate::solver::argmax_lowest;

/// Transition matrix `P^π` and reward vector `r^π` of the chain induced by
/// a policy.
pub fn induced_chain(mdp: &Mdp, policy: &Policy) -> Result<(DMatrix<f64>, Vec<f64>)> {
    policy.validate(mdp)?;
    let n = mdp.num_states();
    let mut chain = DMatrix::zeros(n, n);
    let mut rewards = vec![0.0; n];
    for i in 0..n {
        for (pair, &w) in mdp.pairs_of(i).zip(policy.state_probs(i)) {
            if w == 0.0 {
                continue;
            }
            for (j, &p) in mdp.row(pair).iter().enumerate() {
                chain[(i, j)] += w * p;
            }
            rewards[i] += w * mdp.reward(pair);
        }
    }
    Ok((chain, rewards))
}

fn stationary_residual(chain: &DMatrix<f64>, nu: &[f64]) -> f64 {
    let n = nu.len();
    (0..n)
        .map(|j| {
            let flow: f64 = (0..n).map(|i| nu[i] * chain[(i, j)]).sum();
            (flow - nu[j]).abs()
        })
        .sum()
}

fn check_row_stochastic(chain: &DMatrix<f64>) -> Result<()> {
    if chain.nrows() != chain.ncols() || chain.nrows() == 0 {
        return Err(Error::InvalidArgument(format!(
            "transition matrix must be square and nonempty, got {}x{}",
            chain.nrows(),
            chain.ncols()
        )));
    }
    for (i, row) in chain.row_iter().enumerate() {
        let sum: f64 = row.iter().sum();
        if row.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("row {i} is not a probability vector (sum {sum})")));
        }
    }
    Ok(())
}

/// Power iteration on the lazy chain `(P + I) / 2`, which shares the
/// stationary distribution of `P` but is aperiodic.
fn lazy_power_iteration(chain: &DMatrix<f64>, tol: f64, max_iters: usize) -> Option<Vec<f64>> {
    let n = chain.nrows();
    let lazy = (chain + DMatrix::identity(n, n)) * 0.5;
    let lazy_t = lazy.transpose();
    let mut nu = DVector::from_element(n, 1.0 / n as f64);
    for _ in 0..max_iters {
        let next = &lazy_t * &nu;
        let change = (&next - &nu).abs().sum();
        nu = next;
        if change <= tol * 1e-2 {
            break;
        }
    }
    let sum = nu.sum();
    let nu: Vec<f64> = nu.iter().map(|v| v.max(0.0) / sum).collect();
    (stationary_residual(chain, &nu) <= tol).then_some(nu)
}

/// Unique stationary distribution `ν = νP` of a row-stochastic matrix.
///
/// Solves `(Pᵀ − I)ν = 0, Σν = 1` directly and falls back to power
/// iteration if the direct solution misses `tol` in ℓ₁ residual.
pub fn stationary_distribution(chain: &DMatrix<f64>, tol: f64) -> Result<Vec<f64>> {
    check_row_stochastic(chain)?;
    let n = chain.nrows();
    let mut system = chain.transpose() - DMatrix::identity(n, n);
    system.row_mut(n - 1).fill(1.0);
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;

    let lu = system.lu();
    let pivots = lu.u().diagonal();
    let largest = pivots.amax();
    let smallest = pivots.iter().fold(f64::INFINITY, |m, p| m.min(p.abs()));
    if !(smallest > 1e-12 * largest.max(1.0)) {
        return Err(Error::NoUniqueStationary(format!(
            "balance equations are singular (smallest pivot {smallest:e})"
        )));
    }
    if let Some(solution) = lu.solve(&rhs) {
        // Clip round-off negatives and renormalise.
        let clipped: Vec<f64> = solution.iter().map(|v| v.max(0.0)).collect();
        let sum: f64 = clipped.iter().sum();
        let nu: Vec<f64> = clipped.iter().map(|v| v / sum).collect();
        if stationary_residual(chain, &nu) <= tol {
            return Ok(nu);
        }
    }
    lazy_power_iteration(chain, tol, 1_000_000).ok_or_else(|| {
        Error::NoUniqueStationary(format!("neither direct solve nor power iteration reached residual {tol:e}"))
    })
}

const VALUE_TOL: f64 = 1e-12;

/// Long-run average reward `⟨ν^π, r^π⟩` of a policy.
pub fn policy_value(mdp: &Mdp, policy: &Policy) -> Result<f64> {
    let (chain, rewards) = induced_chain(mdp, policy)?;
    let nu = stationary_distribution(&chain, VALUE_TOL)?;
    Ok(nu.iter().zip(&rewards).map(|(a, b)| a * b).sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RviSolution {
    /// Optimal average reward `v*`.
    pub gain: f64,
    /// Bias vector `h*`, normalised to zero at state 0.
    pub bias: Vec<f64>,
    /// Greedy deterministic policy with respect to the bias.
    pub policy: Policy,
    pub iterations: usize,
    /// `max_i |v* + h_i − max_a (r_(i,a) + ⟨P_(i,a), h⟩)|`.
    pub bellman_residual: f64,
}

/// Weight on the original dynamics in the aperiodicity transform
/// `P' = τP + (1 − τ)I`; the gain is unchanged and the bias scales by 1/τ.
const APERIODICITY: f64 = 0.5;
const REFERENCE_STATE: usize = 0;

fn backup(mdp: &Mdp, h: &[f64], state: usize) -> (usize, f64) {
    let q = mdp
        .pairs_of(state)
        .map(|p| mdp.reward(p) + mdp.row(p).iter().zip(h).map(|(a, b)| a * b).sum::<f64>());
    let (a, v) = argmax_lowest(q).expect("every state has an action");
    (a, v)
}

/// Optimal gain by relative value iteration, stopping once the span of
/// `T h − h` is at most `tol`.
pub fn optimal_gain_rvi(mdp: &Mdp, tol: f64, max_iters: usize) -> Result<RviSolution> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let n = mdp.num_states();
    let tau = APERIODICITY;
    let mut h = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut scaled = vec![0.0; n];
    for iteration in 1..=max_iters {
        for (s, hv) in scaled.iter_mut().zip(&h) {
            *s = tau * hv;
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            // transformed backup: max_a [r + τ⟨P, h⟩] + (1 − τ) h_i
            next[i] = backup(mdp, &scaled, i).1 + (1.0 - tau) * h[i];
            let diff = next[i] - h[i];
            lo = lo.min(diff);
            hi = hi.max(diff);
        }
        let anchor = next[REFERENCE_STATE];
        for (hv, nv) in h.iter_mut().zip(&next) {
            *hv = nv - anchor;
        }
        if hi - lo <= tol {
            let gain = 0.5 * (lo + hi);
            let bias: Vec<f64> = h.iter().map(|v| tau * v).collect();
            let mut choices = Vec::with_capacity(n);
            let mut residual = 0.0f64;
            for i in 0..n {
                let (a, best) = backup(mdp, &bias, i);
                choices.push(a);
                residual = residual.max((gain + bias[i] - best).abs());
            }
            let policy = Policy::deterministic(mdp, &choices)?;
            return Ok(RviSolution { gain, bias, policy, iterations: iteration, bellman_residual: residual });
        }
    }
    Err(Error::NoConvergence(max_iters))
}
