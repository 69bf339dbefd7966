//! Sequential reference execution of the AMDP solver.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{AmdpProgram, ConstraintCache, DualEstimate, PrimalPoint, StepUpdate};
use crate::error::{Error, Result};
use crate::mdp::GenerativeModel;
use crate::rng::{self, StreamRng};
use crate::solver::{argmax_lowest, SolverConfig, TraceRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmdpTraceRecord {
    pub k: usize,
    pub productive: bool,
    /// Most violated pair; present exactly for non-productive steps.
    pub chosen_pair: Option<usize>,
    /// Next state sampled from the chosen pair.
    pub sample: Option<usize>,
    /// `v̄` at iterate `k`, before the step.
    pub v_bar: f64,
    pub max_constraint: f64,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl AmdpTraceRecord {
    pub fn to_solver_record(&self) -> TraceRecord {
        TraceRecord {
            k: self.k,
            productive: self.productive,
            chosen_constraint: self.chosen_pair,
            max_approx_constraint: self.max_constraint,
            objective_value: Some(self.v_bar),
            elapsed: self.elapsed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmdpSolution {
    /// Average of the productive iterates.
    pub x_hat: PrimalPoint,
    pub duals: DualEstimate,
    pub productive_count: usize,
    pub nonproductive_count: usize,
    /// Iterate after the last step.
    pub last_point: PrimalPoint,
    pub trace: Vec<AmdpTraceRecord>,
}

/// Running average of the productive iterates in O(1) per step: a
/// coordinate of `h` is only folded into its sum when it changes.
#[derive(Debug, Clone)]
pub struct PrimalAverager {
    v_sum: f64,
    h_sum: Vec<f64>,
    h_since: Vec<usize>,
    count: usize,
}

impl PrimalAverager {
    pub fn new(num_states: usize) -> Self {
        Self { v_sum: 0.0, h_sum: vec![0.0; num_states], h_since: vec![0; num_states], count: 0 }
    }

    /// Records the current iterate as productive.
    pub fn add(&mut self, v_bar: f64) {
        self.v_sum += v_bar;
        self.count += 1;
    }

    /// Must be called before `h[j]` changes away from `old`.
    pub fn before_change(&mut self, j: usize, old: f64) {
        let held = self.count - self.h_since[j];
        if held > 0 {
            self.h_sum[j] += old * held as f64;
        }
        self.h_since[j] = self.count;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn average(&self, h: &[f64]) -> Option<PrimalPoint> {
        if self.count == 0 {
            return None;
        }
        let n = self.count as f64;
        let h_avg = self
            .h_sum
            .iter()
            .zip(&self.h_since)
            .zip(h)
            .map(|((s, &since), &cur)| (s + cur * (self.count - since) as f64) / n)
            .collect();
        Some(PrimalPoint { v_bar: self.v_sum / n, h: h_avg })
    }
}

/// Head-node bookkeeping shared by the sequential and message-passing
/// executions: the primal iterate, its running average, dual counts and
/// the trace.
pub(crate) struct Head {
    point: PrimalPoint,
    averager: PrimalAverager,
    counts: Vec<usize>,
    eta: f64,
    threshold: f64,
    box_radius: f64,
    record: bool,
    trace: Vec<AmdpTraceRecord>,
    start: Instant,
}

/// Outcome of inspecting the constraint values of one iteration.
pub(crate) enum Decision {
    Productive { max: f64 },
    NonProductive { pair: usize, max: f64 },
}

impl Head {
    pub(crate) fn new(program: &AmdpProgram, cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let n = program.num_states();
        Ok(Self {
            point: PrimalPoint::origin(n),
            averager: PrimalAverager::new(n),
            counts: vec![0; program.num_pairs()],
            eta: cfg.stepsize_for(program.lipschitz()),
            threshold: cfg.epsilon + program.approx_level(),
            box_radius: program.box_radius(),
            record: cfg.record_trace,
            trace: Vec::with_capacity(if cfg.record_trace { cfg.iterations } else { 0 }),
            start: Instant::now(),
        })
    }

    pub(crate) fn eta(&self) -> f64 {
        self.eta
    }

    pub(crate) fn decide(&self, values: impl IntoIterator<Item = f64>) -> Decision {
        let (pair, max) = argmax_lowest(values).expect("an MDP has at least one pair");
        if max <= self.threshold {
            Decision::Productive { max }
        } else {
            Decision::NonProductive { pair, max }
        }
    }

    fn push(&mut self, k: usize, chosen: Option<(usize, usize)>, max: f64) {
        if self.record {
            self.trace.push(AmdpTraceRecord {
                k,
                productive: chosen.is_none(),
                chosen_pair: chosen.map(|c| c.0),
                sample: chosen.map(|c| c.1),
                v_bar: self.point.v_bar,
                max_constraint: max,
                elapsed: self.start.elapsed(),
            });
        }
    }

    /// `v̄ −= η`, projected onto `[0, 1]`.
    pub(crate) fn step_productive(&mut self, k: usize, max: f64) -> StepUpdate {
        self.push(k, None, max);
        self.averager.add(self.point.v_bar);
        let old = self.point.v_bar;
        let unclamped = old - self.eta;
        let new = unclamped.clamp(0.0, 1.0);
        self.point.v_bar = new;
        if new == unclamped {
            StepUpdate::Productive
        } else {
            StepUpdate::Clamped { dv_bar: new - old, dh: Vec::new() }
        }
    }

    /// `v̄ += η`, `h −= η(e_s − e_i)`, projected onto the box.
    pub(crate) fn step_nonproductive(&mut self, k: usize, max: f64, pair: usize, state: usize, sample: usize) -> StepUpdate {
        self.push(k, Some((pair, sample)), max);
        self.counts[pair] += 1;
        let eta = self.eta;
        let b = self.box_radius;

        let old_v = self.point.v_bar;
        let unclamped_v = old_v + eta;
        let new_v = unclamped_v.clamp(0.0, 1.0);
        self.point.v_bar = new_v;
        let mut clamped = new_v != unclamped_v;

        let mut dh = Vec::new();
        if sample != state {
            for (j, sign) in [(sample, -1.0), (state, 1.0)] {
                let old = self.point.h[j];
                let unclamped = old + sign * eta;
                let new = unclamped.clamp(-b, b);
                clamped |= new != unclamped;
                self.averager.before_change(j, old);
                self.point.h[j] = new;
                dh.push((j, new - old));
            }
        }
        if clamped {
            StepUpdate::Clamped { dv_bar: new_v - old_v, dh }
        } else {
            StepUpdate::NonProductive { state, sample }
        }
    }

    pub(crate) fn point(&self) -> &PrimalPoint {
        &self.point
    }

    pub(crate) fn finish(self, program: &AmdpProgram, iterations: usize) -> Result<AmdpSolution> {
        let productive_count = self.averager.count();
        let Some(mut x_hat) = self.averager.average(&self.point.h) else {
            let trace = self.trace.iter().map(AmdpTraceRecord::to_solver_record).collect();
            return Err(Error::NoProductiveSteps { iterations, trace });
        };
        // averaging in floating point may overshoot the box by an ulp
        x_hat.v_bar = x_hat.v_bar.clamp(0.0, 1.0);
        let b = self.box_radius;
        x_hat.h.iter_mut().for_each(|v| *v = v.clamp(-b, b));
        let duals = DualEstimate::from_counts(program.mdp(), &self.counts, productive_count)?;
        Ok(AmdpSolution {
            x_hat,
            duals,
            productive_count,
            nonproductive_count: iterations - productive_count,
            last_point: self.point,
            trace: self.trace,
        })
    }
}

/// Per-pair generative-model streams for a solve seeded with `seed`.
pub(crate) fn pair_streams(num_pairs: usize, seed: u64) -> Vec<StreamRng> {
    (0..num_pairs).map(|p| rng::pair_stream(seed, p)).collect()
}

/// Runs the AMDP solver sequentially with incremental constraint caches.
///
/// `cfg.epsilon` is the mirror-descent accuracy `ε̃`; productive steps are
/// taken while every cached constraint is at most `ε̃ + δ`. Samples for
/// pair `p` come from the stream `(cfg.seed, p)`.
pub fn solve(program: &AmdpProgram, cfg: &SolverConfig) -> Result<AmdpSolution> {
    let mut head = Head::new(program, cfg)?;
    let mut cache = ConstraintCache::new(program);
    let gen = GenerativeModel::new(program.mdp());
    let mut streams = pair_streams(program.num_pairs(), cfg.seed);
    let eta = head.eta();

    for k in 0..cfg.iterations {
        let update = match head.decide(cache.values().iter().copied()) {
            Decision::Productive { max } => head.step_productive(k, max),
            Decision::NonProductive { pair, max } => {
                let state = program.mdp().state_of(pair);
                let sample = gen.sample(pair, &mut streams[pair]);
                head.step_nonproductive(k, max, pair, state, sample)
            }
        };
        cache.apply(program, eta, &update);
    }
    debug_assert!(cache.max_drift(program, head.point()) < 1e-6);
    head.finish(program, cfg.iterations)
}
