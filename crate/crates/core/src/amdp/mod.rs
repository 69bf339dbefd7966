//! Average-reward MDPs as a constrained program for mirror descent.
//!
//! The linear program `min v̄ s.t. v̄ + h_i − ⟨P_(i,a), h⟩ − r_(i,a) ≥ 0` is
//! written with one constraint per state-action pair,
//!
//! ```text
//! g_(i,a)(v̄, h) = r_(i,a) − v̄ + ⟨P_(i,a), h⟩ − h_i ≤ 0,
//! ```
//!
//! over the box `X = [0, 1] × [−4 t_mix, 4 t_mix]^|S|`. Constraint values
//! are computed from an empirical model `P̃` and subgradients from single
//! generative-model samples `s ~ P_(i,a)`: `(−1, e_s − e_i)`. Counting the
//! non-productive steps per pair yields dual variables `μ̂` which round to
//! a policy `π_(i,a) = μ̂_(i,a) / Σ_b μ̂_(i,b)`.

mod cache;
mod problem;
mod solve;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::EmpiricalModel;
use crate::mdp::{Mdp, Policy};
use crate::prox::ProxGeometry;
use crate::solver::{theoretical_iterations_primal_dual, SolverConfig};

pub use cache::{updated_constraint, ConstraintCache, StepUpdate};
pub use problem::AmdpProblem;
pub use solve::{solve, AmdpSolution, AmdpTraceRecord, PrimalAverager};
pub(crate) use solve::{Decision, Head};

/// Subgradient norm bound: `‖(−1, e_s − e_i)‖₂ ≤ √3 ≤ 2`.
pub const AMDP_LIPSCHITZ: f64 = 2.0;

#[derive(Debug, Clone)]
pub struct AmdpProgram {
    mdp: Mdp,
    model: EmpiricalModel,
    /// Dense copy of the empirical rows, `model_rows[pair][j] = P̃_(pair),j`.
    model_rows: Vec<Vec<f64>>,
    t_mix_bound: f64,
    approx_level: f64,
}

impl AmdpProgram {
    /// `approx_level` is the uniform accuracy `δ` of the constraint values
    /// computed from `model`.
    pub fn new(mdp: Mdp, model: EmpiricalModel, t_mix_bound: f64, approx_level: f64) -> Result<Self> {
        if model.num_states() != mdp.num_states() || model.num_pairs() != mdp.num_pairs() {
            return Err(Error::InvalidArgument(format!(
                "model has {} states and {} pairs, MDP has {} and {}",
                model.num_states(),
                model.num_pairs(),
                mdp.num_states(),
                mdp.num_pairs()
            )));
        }
        if !(t_mix_bound > 0.0 && t_mix_bound.is_finite()) {
            return Err(Error::InvalidArgument(format!("mixing-time bound must be positive, got {t_mix_bound}")));
        }
        if !(approx_level >= 0.0) {
            return Err(Error::InvalidArgument(format!("approximation level must be nonnegative, got {approx_level}")));
        }
        let model_rows = (0..mdp.num_pairs()).map(|p| model.row(p)).collect();
        Ok(Self { mdp, model, model_rows, t_mix_bound, approx_level })
    }

    pub fn mdp(&self) -> &Mdp {
        &self.mdp
    }

    pub fn model(&self) -> &EmpiricalModel {
        &self.model
    }

    pub fn model_row(&self, pair: usize) -> &[f64] {
        &self.model_rows[pair]
    }

    pub fn t_mix_bound(&self) -> f64 {
        self.t_mix_bound
    }

    pub fn approx_level(&self) -> f64 {
        self.approx_level
    }

    pub fn num_states(&self) -> usize {
        self.mdp.num_states()
    }

    pub fn num_pairs(&self) -> usize {
        self.mdp.num_pairs()
    }

    /// `R = 2 t_mix`.
    pub fn radius(&self) -> f64 {
        2.0 * self.t_mix_bound
    }

    /// Half-width of the box for `h`: `2R = 4 t_mix`.
    pub fn box_radius(&self) -> f64 {
        2.0 * self.radius()
    }

    pub fn lipschitz(&self) -> f64 {
        AMDP_LIPSCHITZ
    }

    /// `Θ̄₀² = (4R)² |S| + 1`.
    pub fn theta_bar_sq(&self) -> f64 {
        (4.0 * self.radius()).powi(2) * self.num_states() as f64 + 1.0
    }

    /// `X = [0, 1] × [−2R, 2R]^|S|`, with `v̄` as coordinate 0.
    pub fn geometry(&self) -> ProxGeometry {
        let n = self.num_states();
        let b = self.box_radius();
        let mut lower = vec![-b; n + 1];
        let mut upper = vec![b; n + 1];
        lower[0] = 0.0;
        upper[0] = 1.0;
        ProxGeometry::new(lower, upper).expect("AMDP box is well formed")
    }

    pub fn contains(&self, point: &PrimalPoint) -> bool {
        let b = self.box_radius();
        point.h.len() == self.num_states()
            && (0.0..=1.0).contains(&point.v_bar)
            && point.h.iter().all(|v| (-b..=b).contains(v))
    }

    fn check_pair(&self, pair: usize) -> Result<()> {
        if pair < self.num_pairs() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("pair {pair} out of range (A_tot = {})", self.num_pairs())))
        }
    }

    /// `g_δ(v̄, h) = r − v̄ + ⟨P̃_(i,a), h⟩ − h_i` from the empirical model.
    pub fn constraint_value(&self, pair: usize, point: &PrimalPoint) -> Result<f64> {
        self.check_pair(pair)?;
        if point.h.len() != self.num_states() {
            return Err(Error::DimensionMismatch { expected: self.num_states(), actual: point.h.len() });
        }
        Ok(self.approx_constraint_unchecked(pair, point.v_bar, &point.h))
    }

    pub(crate) fn approx_constraint_unchecked(&self, pair: usize, v_bar: f64, h: &[f64]) -> f64 {
        let i = self.mdp.state_of(pair);
        self.mdp.reward(pair) - v_bar + self.model.dot(pair, h) - h[i]
    }

    /// Same constraint with the true transition row.
    pub fn exact_constraint_value(&self, pair: usize, point: &PrimalPoint) -> Result<f64> {
        self.check_pair(pair)?;
        if point.h.len() != self.num_states() {
            return Err(Error::DimensionMismatch { expected: self.num_states(), actual: point.h.len() });
        }
        Ok(self.exact_constraint_unchecked(pair, point.v_bar, &point.h))
    }

    pub(crate) fn exact_constraint_unchecked(&self, pair: usize, v_bar: f64, h: &[f64]) -> f64 {
        let i = self.mdp.state_of(pair);
        let ph: f64 = self.mdp.row(pair).iter().zip(h).map(|(a, b)| a * b).sum();
        self.mdp.reward(pair) - v_bar + ph - h[i]
    }

    /// Worst-case iteration count for a primal-dual `ε̃`-solution with
    /// probability `1 − σ` (Euclidean setup, so `κ = 1`).
    pub fn theoretical_iterations(&self, sigma: f64, md_epsilon: f64) -> Result<u64> {
        theoretical_iterations_primal_dual(self.theta_bar_sq(), self.lipschitz(), sigma, md_epsilon, 1.0)
    }
}

/// Accuracy split for a target policy accuracy `ε`: the mirror-descent
/// accuracy and the model accuracy are both `ε/16`, and the stepsize is
/// `ε̃ / M² = ε/64`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmdpTolerances {
    pub target: f64,
    pub md_epsilon: f64,
    pub approx_level: f64,
    pub stepsize: f64,
}

impl AmdpTolerances {
    pub fn for_target(epsilon: f64) -> Self {
        let md_epsilon = epsilon / 16.0;
        Self {
            target: epsilon,
            md_epsilon,
            approx_level: epsilon / 16.0,
            stepsize: md_epsilon / (AMDP_LIPSCHITZ * AMDP_LIPSCHITZ),
        }
    }

    pub fn solver_config(&self, iterations: usize, seed: u64) -> SolverConfig {
        SolverConfig::new(self.md_epsilon, iterations).with_seed(seed).with_stepsize(self.stepsize)
    }
}

/// Primal variables `(v̄, h)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimalPoint {
    pub v_bar: f64,
    pub h: Vec<f64>,
}

impl PrimalPoint {
    pub fn origin(num_states: usize) -> Self {
        Self { v_bar: 0.0, h: vec![0.0; num_states] }
    }

    pub fn to_vector(&self) -> Vec<f64> {
        std::iter::once(self.v_bar).chain(self.h.iter().copied()).collect()
    }

    pub fn from_vector(x: &[f64]) -> Self {
        Self { v_bar: x[0], h: x[1..].to_vec() }
    }
}

/// Dual estimate `μ̂` over state-action pairs and its per-state sums `λ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualEstimate {
    pub mu_hat: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl DualEstimate {
    pub fn new(mdp: &Mdp, mu_hat: Vec<f64>) -> Result<Self> {
        if mu_hat.len() != mdp.num_pairs() {
            return Err(Error::DimensionMismatch { expected: mdp.num_pairs(), actual: mu_hat.len() });
        }
        if let Some(p) = mu_hat.iter().position(|&m| !(m >= 0.0)) {
            return Err(Error::InvalidArgument(format!("dual variable of pair {p} is negative")));
        }
        let lambda = (0..mdp.num_states()).map(|i| mdp.pairs_of(i).map(|p| mu_hat[p]).sum()).collect();
        Ok(Self { mu_hat, lambda })
    }

    /// `μ̂_p = count_p / |I|`.
    pub fn from_counts(mdp: &Mdp, counts: &[usize], productive_count: usize) -> Result<Self> {
        let mu_hat = crate::solver::duals_from_counts(counts, productive_count)?;
        Self::new(mdp, mu_hat)
    }
}

/// `π_(i,a) = μ̂_(i,a) / λ_i`; states with `λ_i = 0` get the uniform
/// distribution over their actions.
pub fn round_policy(dual: &DualEstimate, mdp: &Mdp) -> Result<Policy> {
    if dual.mu_hat.len() != mdp.num_pairs() || dual.lambda.len() != mdp.num_states() {
        return Err(Error::DimensionMismatch { expected: mdp.num_pairs(), actual: dual.mu_hat.len() });
    }
    let probabilities = (0..mdp.num_states())
        .map(|i| {
            let total = dual.lambda[i];
            let k = mdp.num_actions(i);
            if total > 0.0 {
                mdp.pairs_of(i).map(|p| dual.mu_hat[p] / total).collect()
            } else {
                vec![1.0 / k as f64; k]
            }
        })
        .collect();
    Policy::new(mdp, probabilities)
}
