//! Incremental constraint values.
//!
//! Steps change at most `v̄` and two coordinates of `h`, so each pair can
//! update `c_(j,a) = g_δ^(j,a)(v̄, h)` in O(1):
//!
//! - productive (`v̄ −= η`): `c += η`;
//! - non-productive on state `i` with sample `s` (`v̄ += η`,
//!   `h −= η(e_s − e_i)`):
//!   `c −= η(1 + P̃_(j,a),s − P̃_(j,a),i + 1{j = i} − 1{j = s})`.
//!
//! Both rules assume the box projection left the step untouched. When a
//! coordinate hits the boundary the head sends the exact coordinate changes
//! instead, and every pair applies them directly.

use serde::{Deserialize, Serialize};

use super::{AmdpProgram, PrimalPoint};

/// How the primal point moved in one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StepUpdate {
    Productive,
    NonProductive { state: usize, sample: usize },
    /// Exact coordinate changes after the box projection clipped the step.
    Clamped { dv_bar: f64, dh: Vec<(usize, f64)> },
}

/// New cached value of the constraint of a pair at state `own_state` with
/// empirical row `row`.
pub fn updated_constraint(c: f64, own_state: usize, row: &[f64], eta: f64, update: &StepUpdate) -> f64 {
    match *update {
        StepUpdate::Productive => c + eta,
        StepUpdate::NonProductive { state: i, sample: s } => {
            let ind_i = if own_state == i { 1.0 } else { 0.0 };
            let ind_s = if own_state == s { 1.0 } else { 0.0 };
            c - eta * (1.0 + row[s] - row[i] + ind_i - ind_s)
        }
        StepUpdate::Clamped { dv_bar, ref dh } => {
            let mut next = c - dv_bar;
            for &(j, d) in dh {
                next += row[j] * d;
                if j == own_state {
                    next -= d;
                }
            }
            next
        }
    }
}

/// Cached constraint values of every pair at the current iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintCache {
    values: Vec<f64>,
    k: usize,
}

impl ConstraintCache {
    /// At `(v̄, h) = (0, 0)` every constraint equals its reward.
    pub fn new(program: &AmdpProgram) -> Self {
        let values = program.mdp().rewards().to_vec();
        debug_assert!({
            let origin = PrimalPoint::origin(program.num_states());
            values
                .iter()
                .enumerate()
                .all(|(p, c)| (program.constraint_value(p, &origin).unwrap() - c).abs() == 0.0)
        });
        Self { values, k: 0 }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iteration(&self) -> usize {
        self.k
    }

    pub fn apply(&mut self, program: &AmdpProgram, eta: f64, update: &StepUpdate) {
        let mdp = program.mdp();
        for (p, c) in self.values.iter_mut().enumerate() {
            *c = updated_constraint(*c, mdp.state_of(p), program.model_row(p), eta, update);
        }
        self.k += 1;
    }

    pub fn apply_productive(&mut self, program: &AmdpProgram, eta: f64) {
        self.apply(program, eta, &StepUpdate::Productive);
    }

    pub fn apply_nonproductive(&mut self, program: &AmdpProgram, eta: f64, state: usize, sample: usize) {
        self.apply(program, eta, &StepUpdate::NonProductive { state, sample });
    }

    /// Largest deviation from direct recomputation at `point`.
    pub fn max_drift(&self, program: &AmdpProgram, point: &PrimalPoint) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(p, c)| (program.approx_constraint_unchecked(p, point.v_bar, &point.h) - c).abs())
            .fold(0.0, f64::max)
    }

    /// Replaces every value by direct recomputation at `point`.
    pub fn recompute(&mut self, program: &AmdpProgram, point: &PrimalPoint) {
        for (p, c) in self.values.iter_mut().enumerate() {
            *c = program.approx_constraint_unchecked(p, point.v_bar, &point.h);
        }
    }
}
