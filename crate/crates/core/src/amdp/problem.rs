//! The AMDP program behind the generic [`ConstrainedProblem`] interface.
//!
//! Constraint values are recomputed densely on every query, so this is an
//! O(A_tot · |S|) per-iteration cross-check of the cached solver rather than
//! a production path.

use super::AmdpProgram;
use crate::mdp::GenerativeModel;
use crate::rng::StreamRng;
use crate::solver::ConstrainedProblem;

use super::solve::pair_streams;

pub struct AmdpProblem<'a> {
    program: &'a AmdpProgram,
    gen: GenerativeModel,
    streams: Vec<StreamRng>,
}

impl<'a> AmdpProblem<'a> {
    /// Samples for pair `p` are drawn from the stream `(seed, p)`, exactly
    /// as in [`super::solve`].
    pub fn new(program: &'a AmdpProgram, seed: u64) -> Self {
        Self {
            program,
            gen: GenerativeModel::new(program.mdp()),
            streams: pair_streams(program.num_pairs(), seed),
        }
    }
}

impl ConstrainedProblem for AmdpProblem<'_> {
    fn dim(&self) -> usize {
        1 + self.program.num_states()
    }

    fn num_constraints(&self) -> usize {
        self.program.num_pairs()
    }

    fn lipschitz(&self) -> f64 {
        self.program.lipschitz()
    }

    fn approx_level(&self) -> f64 {
        self.program.approx_level()
    }

    fn objective_grad(&mut self, _x: &[f64], _rng: &mut StreamRng, grad: &mut [f64]) {
        grad[0] = 1.0;
    }

    fn constraint_approx_value(&self, l: usize, x: &[f64]) -> f64 {
        self.program.approx_constraint_unchecked(l, x[0], &x[1..])
    }

    fn constraint_grad(&mut self, l: usize, _x: &[f64], _rng: &mut StreamRng, grad: &mut [f64]) {
        let i = self.program.mdp().state_of(l);
        let s = self.gen.sample(l, &mut self.streams[l]);
        grad[0] = -1.0;
        grad[1 + s] += 1.0;
        grad[1 + i] -= 1.0;
    }

    fn exact_objective(&self, x: &[f64]) -> Option<f64> {
        Some(x[0])
    }

    fn exact_constraint(&self, l: usize, x: &[f64]) -> Option<f64> {
        Some(self.program.exact_constraint_unchecked(l, x[0], &x[1..]))
    }
}
