//! Stochastic mirror descent for `min f(x)` over a box `Q` subject to
//! `g_l(x) ≤ 0`, where only δ-approximate constraint values and stochastic
//! subgradients are available.
//!
//! Each iteration either steps on the objective ("productive") when every
//! approximate constraint is at most `ε + δ`, or steps on the most violated
//! constraint ("non-productive"). The output is the average of the
//! productive iterates together with dual estimates
//! `λ_l = #{non-productive steps on l} / #{productive steps}`.

mod bounds;
mod duality;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prox::ProxGeometry;
use crate::rng::{self, StreamRng};

pub(crate) use bounds::ceil_count;
pub use bounds::{nemirovski_kappa, theoretical_iterations_primal, theoretical_iterations_primal_dual};
pub use duality::{duality_gap_bruteforce, grid_error_bound};

/// Oracle bundle describing a constrained convex problem.
///
/// Gradient oracles write into `grad` (which arrives zeroed) and may keep
/// internal sampling state, hence `&mut self`. Implementations that need
/// more than the solver-provided stream must derive their own streams
/// deterministically.
pub trait ConstrainedProblem {
    fn dim(&self) -> usize;

    fn num_constraints(&self) -> usize;

    /// Bound `M` on the dual norm of every stochastic subgradient.
    fn lipschitz(&self) -> f64;

    /// Uniform accuracy `δ` of [`ConstrainedProblem::constraint_approx_value`].
    fn approx_level(&self) -> f64;

    fn objective_grad(&mut self, x: &[f64], rng: &mut StreamRng, grad: &mut [f64]);

    fn constraint_approx_value(&self, l: usize, x: &[f64]) -> f64;

    fn constraint_grad(&mut self, l: usize, x: &[f64], rng: &mut StreamRng, grad: &mut [f64]);

    fn exact_objective(&self, _x: &[f64]) -> Option<f64> {
        None
    }

    fn exact_constraint(&self, _l: usize, _x: &[f64]) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub epsilon: f64,
    /// Defaults to `ε / M²` when unset.
    pub stepsize: Option<f64>,
    pub iterations: usize,
    /// Confidence level σ, used only when reporting iteration bounds.
    pub confidence: f64,
    pub seed: u64,
    pub record_trace: bool,
}

impl SolverConfig {
    pub fn new(epsilon: f64, iterations: usize) -> Self {
        Self { epsilon, stepsize: None, iterations, confidence: 0.1, seed: 0, record_trace: true }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_stepsize(mut self, stepsize: f64) -> Self {
        self.stepsize = Some(stepsize);
        self
    }

    pub fn with_confidence(mut self, sigma: f64) -> Self {
        self.confidence = sigma;
        self
    }

    pub fn with_trace(mut self, record: bool) -> Self {
        self.record_trace = record;
        self
    }

    pub fn stepsize_for(&self, lipschitz: f64) -> f64 {
        self.stepsize.unwrap_or(self.epsilon / (lipschitz * lipschitz))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if let Some(eta) = self.stepsize {
            if !(eta > 0.0) {
                return Err(Error::InvalidArgument(format!("stepsize must be positive, got {eta}")));
            }
        }
        if self.iterations == 0 {
            return Err(Error::InvalidArgument("iterations must be at least 1".into()));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "confidence must lie in (0, 1), got {}",
                self.confidence
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub k: usize,
    pub productive: bool,
    /// Constraint stepped on; present exactly for non-productive steps.
    pub chosen_constraint: Option<usize>,
    pub max_approx_constraint: f64,
    pub objective_value: Option<f64>,
    #[serde(skip)]
    pub elapsed: Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOutput {
    pub x_hat: Vec<f64>,
    pub lambda_hat: Vec<f64>,
    pub productive_count: usize,
    pub nonproductive_count: usize,
    pub trace: Vec<TraceRecord>,
}

/// Index and value of the largest entry; the lowest index wins ties.
pub(crate) fn argmax_lowest(values: impl IntoIterator<Item = f64>) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (l, v) in values.into_iter().enumerate() {
        match best {
            Some((_, b)) if !(v > b) => {}
            _ => best = Some((l, v)),
        }
    }
    best
}

/// Dual estimates from per-constraint counts of non-productive steps.
pub fn duals_from_counts(counts: &[usize], productive_count: usize) -> Result<Vec<f64>> {
    if productive_count == 0 {
        return Err(Error::InvalidArgument("dual estimate needs at least one productive step".into()));
    }
    let scale = productive_count as f64;
    Ok(counts.iter().map(|&c| c as f64 / scale).collect())
}

/// `λ_l = (1/|I|) Σ_{k ∈ J} 1{l = l(k)}` recomputed from a trace.
pub fn estimate_duals(trace: &[TraceRecord], productive_count: usize, m: usize) -> Result<Vec<f64>> {
    let mut counts = vec![0usize; m];
    for rec in trace {
        if let Some(l) = rec.chosen_constraint {
            if l >= m {
                return Err(Error::InvalidArgument(format!("trace references constraint {l} but m = {m}")));
            }
            counts[l] += 1;
        }
    }
    duals_from_counts(&counts, productive_count)
}

/// Runs constrained stochastic mirror descent.
pub fn run<P>(problem: &mut P, geom: &ProxGeometry, cfg: &SolverConfig) -> Result<SolverOutput>
where
    P: ConstrainedProblem + ?Sized,
{
    cfg.validate()?;
    let n = geom.dim();
    if problem.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: problem.dim() });
    }
    let lipschitz = problem.lipschitz();
    let delta = problem.approx_level();
    if !(lipschitz > 0.0) {
        return Err(Error::InvalidArgument(format!("Lipschitz constant must be positive, got {lipschitz}")));
    }
    if !(delta >= 0.0) {
        return Err(Error::InvalidArgument(format!("approximation level must be nonnegative, got {delta}")));
    }
    let m = problem.num_constraints();
    let eta = cfg.stepsize_for(lipschitz);
    let threshold = cfg.epsilon + delta;

    let mut rng = rng::solver_stream(cfg.seed);
    let mut x = geom.initial_point();
    let mut grad = vec![0.0; n];
    let mut step = vec![0.0; n];
    let mut x_sum = vec![0.0; n];
    let mut counts = vec![0usize; m];
    let mut productive_count = 0usize;
    let mut trace = Vec::with_capacity(if cfg.record_trace { cfg.iterations } else { 0 });
    let start = Instant::now();

    for k in 0..cfg.iterations {
        let (worst, max_value) = match argmax_lowest((0..m).map(|l| problem.constraint_approx_value(l, &x))) {
            Some(found) => (Some(found.0), found.1),
            None => (None, f64::NEG_INFINITY),
        };
        let productive = worst.is_none() || max_value <= threshold;
        let objective_value = if cfg.record_trace { problem.exact_objective(&x) } else { None };

        grad.iter_mut().for_each(|g| *g = 0.0);
        let chosen = if productive {
            for (s, xj) in x_sum.iter_mut().zip(&x) {
                *s += xj;
            }
            productive_count += 1;
            problem.objective_grad(&x, &mut rng, &mut grad);
            None
        } else {
            let l = worst.expect("non-productive step requires a constraint");
            counts[l] += 1;
            problem.constraint_grad(l, &x, &mut rng, &mut grad);
            Some(l)
        };
        debug_assert!(
            grad.iter().map(|g| g * g).sum::<f64>().sqrt() <= lipschitz * (1.0 + 1e-9),
            "stochastic subgradient exceeds the Lipschitz bound"
        );

        for (s, g) in step.iter_mut().zip(&grad) {
            *s = eta * g;
        }
        geom.mirror_step_in_place(&mut x, &step);

        if cfg.record_trace {
            trace.push(TraceRecord {
                k,
                productive,
                chosen_constraint: chosen,
                max_approx_constraint: max_value,
                objective_value,
                elapsed: start.elapsed(),
            });
        }
    }

    if productive_count == 0 {
        return Err(Error::NoProductiveSteps { iterations: cfg.iterations, trace });
    }
    let inv = 1.0 / productive_count as f64;
    let x_hat = x_sum.iter().enumerate().map(|(j, s)| geom.clamp_coord(j, s * inv)).collect();
    let lambda_hat = duals_from_counts(&counts, productive_count)?;
    Ok(SolverOutput {
        x_hat,
        lambda_hat,
        productive_count,
        nonproductive_count: cfg.iterations - productive_count,
        trace,
    })
}
