//! Head node and workers exchanging messages.
//!
//! Each state-action pair is served by a worker that keeps the pair's
//! cached constraint value and its own generative-model stream. One
//! iteration is:
//!
//! 1. the head broadcasts `CheckConstraints` and waits for one
//!    `ConstraintValue` per pair;
//! 2. if some value exceeds the threshold, the head sends `SampleRequest`
//!    to the owner of the most violated pair and waits for `SampleReply`;
//! 3. the head broadcasts the step (`ProductiveStep`, `NonProductiveStep`
//!    or, if the box clipped the step, `Correction`).
//!
//! Workers own pairs round-robin (`pair % num_workers`). Channels are FIFO
//! and the head collects replies by pair index, so the trace is identical
//! to [`crate::amdp::solve`] with the same seed whatever the scheduling.

use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::amdp::{updated_constraint, AmdpProgram, AmdpSolution, Decision, Head, StepUpdate};
use crate::error::{Error, Result};
use crate::mdp::RowSampler;
use crate::rng::{self, StreamRng};
use crate::solver::SolverConfig;

/// How long the head waits for any single reply before giving up.
pub const REPLY_TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Message {
    CheckConstraints,
    ConstraintValue { pair: usize, value: f64 },
    SampleRequest { pair: usize },
    SampleReply { pair: usize, sample: usize },
    ProductiveStep,
    NonProductiveStep { state: usize, sample: usize },
    /// Exact coordinate changes of a step clipped by the box.
    Correction { dv_bar: f64, dh: Vec<(usize, f64)> },
    Shutdown,
}

impl Message {
    fn tag(&self) -> &'static str {
        match self {
            Message::CheckConstraints => "CheckConstraints",
            Message::ConstraintValue { .. } => "ConstraintValue",
            Message::SampleRequest { .. } => "SampleRequest",
            Message::SampleReply { .. } => "SampleReply",
            Message::ProductiveStep => "ProductiveStep",
            Message::NonProductiveStep { .. } => "NonProductiveStep",
            Message::Correction { .. } => "Correction",
            Message::Shutdown => "Shutdown",
        }
    }

    /// Size estimate: a 3-bit tag, 64 bits per real, `⌈log₂ n⌉` bits per
    /// index into a set of size `n`.
    pub fn bits(&self, num_states: usize, num_pairs: usize) -> u64 {
        const TAG: u64 = 3;
        const REAL: u64 = 64;
        let state = index_bits(num_states);
        let pair = index_bits(num_pairs);
        TAG + match self {
            Message::CheckConstraints | Message::ProductiveStep | Message::Shutdown => 0,
            Message::ConstraintValue { .. } => pair + REAL,
            Message::SampleRequest { .. } => pair,
            Message::SampleReply { .. } => state,
            Message::NonProductiveStep { .. } => 2 * state,
            Message::Correction { dh, .. } => REAL + dh.len() as u64 * (state + REAL),
        }
    }
}

/// `⌈log₂ n⌉`.
pub fn index_bits(n: usize) -> u64 {
    if n <= 1 {
        0
    } else {
        u64::from(usize::BITS - (n - 1).leading_zeros())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    /// Waiting for `CheckConstraints`.
    Idle,
    /// Constraint value sent; waiting for the step or a sample request.
    Checked,
}

/// The node serving one state-action pair.
#[derive(Debug, Clone)]
pub struct WorkerState {
    pair: usize,
    state: usize,
    model_row: Vec<f64>,
    sampler: RowSampler,
    cache: f64,
    k: usize,
    eta: f64,
    rng: StreamRng,
    phase: Phase,
}

impl WorkerState {
    /// Worker for `pair` with the cache at `(v̄, h) = (0, 0)` and samples
    /// from the stream `(seed, pair)`.
    pub fn new(program: &AmdpProgram, pair: usize, eta: f64, seed: u64) -> Result<Self> {
        if pair >= program.num_pairs() {
            return Err(Error::InvalidArgument(format!("pair {pair} out of range")));
        }
        let mdp = program.mdp();
        Ok(Self {
            pair,
            state: mdp.state_of(pair),
            model_row: program.model_row(pair).to_vec(),
            sampler: RowSampler::new(mdp.row(pair))?,
            cache: mdp.reward(pair),
            k: 0,
            eta,
            rng: rng::pair_stream(seed, pair),
            phase: Phase::Idle,
        })
    }

    pub fn pair(&self) -> usize {
        self.pair
    }

    pub fn cache(&self) -> f64 {
        self.cache
    }

    pub fn iteration(&self) -> usize {
        self.k
    }

    fn apply(&mut self, update: &StepUpdate) {
        self.cache = updated_constraint(self.cache, self.state, &self.model_row, self.eta, update);
        self.k += 1;
        self.phase = Phase::Idle;
    }
}

fn unexpected(pair: usize, msg: &Message, phase: Phase) -> Error {
    Error::Protocol(format!("worker for pair {pair} got {} while {phase:?}", msg.tag()))
}

/// Handles one message addressed to the worker of `state.pair`.
pub fn worker_handle(state: &mut WorkerState, msg: &Message) -> Result<Option<Message>> {
    match (msg, state.phase) {
        (Message::CheckConstraints, Phase::Idle) => {
            state.phase = Phase::Checked;
            Ok(Some(Message::ConstraintValue { pair: state.pair, value: state.cache }))
        }
        (Message::SampleRequest { pair }, Phase::Checked) if *pair == state.pair => {
            let sample = state.sampler.sample(&mut state.rng);
            Ok(Some(Message::SampleReply { pair: state.pair, sample }))
        }
        (Message::ProductiveStep, Phase::Checked) => {
            state.apply(&StepUpdate::Productive);
            Ok(None)
        }
        (&Message::NonProductiveStep { state: i, sample }, Phase::Checked) => {
            state.apply(&StepUpdate::NonProductive { state: i, sample });
            Ok(None)
        }
        (Message::Correction { dv_bar, dh }, Phase::Checked) => {
            state.apply(&StepUpdate::Clamped { dv_bar: *dv_bar, dh: dh.clone() });
            Ok(None)
        }
        (Message::Shutdown, Phase::Idle) => Ok(None),
        _ => Err(unexpected(state.pair, msg, state.phase)),
    }
}

/// A worker serving several pairs.
#[derive(Debug, Clone)]
struct WorkerNode {
    pairs: Vec<WorkerState>,
}

impl WorkerNode {
    fn handle(&mut self, msg: &Message, replies: &mut Vec<Message>) -> Result<()> {
        match msg {
            Message::SampleRequest { pair } => {
                let w = self
                    .pairs
                    .iter_mut()
                    .find(|w| w.pair == *pair)
                    .ok_or_else(|| Error::Protocol(format!("sample request for pair {pair} sent to wrong worker")))?;
                replies.extend(worker_handle(w, msg)?);
            }
            _ => {
                for w in &mut self.pairs {
                    replies.extend(worker_handle(w, msg)?);
                }
            }
        }
        Ok(())
    }
}

/// Message counts and size estimates of a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CommStats {
    pub num_workers: usize,
    pub iterations: usize,
    pub messages: u64,
    pub bits: u64,
    pub sample_messages: u64,
    pub sample_bits: u64,
    /// Messages sent in each iteration.
    #[serde(skip)]
    pub per_iteration: Vec<u32>,
    pub max_messages_per_iteration: u32,
    /// Sequential communication rounds in the longest iteration.
    pub max_rounds_per_iteration: u32,
}

struct Counter {
    num_states: usize,
    num_pairs: usize,
    stats: CommStats,
    current: u32,
    rounds: u32,
}

impl Counter {
    fn count(&mut self, msg: &Message, copies: usize) {
        let bits = msg.bits(self.num_states, self.num_pairs);
        self.stats.messages += copies as u64;
        self.stats.bits += bits * copies as u64;
        if let Message::SampleReply { .. } = msg {
            self.stats.sample_messages += copies as u64;
            self.stats.sample_bits += index_bits(self.num_states) * copies as u64;
        }
        self.current += copies as u32;
    }

    fn round(&mut self) {
        self.rounds += 1;
    }

    fn end_iteration(&mut self) {
        self.stats.per_iteration.push(self.current);
        self.stats.max_messages_per_iteration = self.stats.max_messages_per_iteration.max(self.current);
        self.stats.max_rounds_per_iteration = self.stats.max_rounds_per_iteration.max(self.rounds);
        self.stats.iterations += 1;
        self.current = 0;
        self.rounds = 0;
    }
}

/// Delivery of head messages to workers and of replies back.
trait Transport {
    fn num_workers(&self) -> usize;
    fn send(&mut self, worker: usize, msg: &Message) -> Result<()>;
    fn recv(&mut self) -> Result<Message>;
}

/// Workers run inline on the head's thread; replies queue in order.
struct Inline {
    workers: Vec<WorkerNode>,
    replies: std::collections::VecDeque<Message>,
    scratch: Vec<Message>,
}

impl Transport for Inline {
    fn num_workers(&self) -> usize {
        self.workers.len()
    }

    fn send(&mut self, worker: usize, msg: &Message) -> Result<()> {
        self.scratch.clear();
        self.workers[worker].handle(msg, &mut self.scratch)?;
        self.replies.extend(self.scratch.drain(..));
        Ok(())
    }

    fn recv(&mut self) -> Result<Message> {
        self.replies.pop_front().ok_or_else(|| Error::Protocol("head waits for a reply nobody sent".into()))
    }
}

/// One OS thread per worker, connected by channels.
struct Threads {
    to_workers: Vec<Sender<Message>>,
    from_workers: Receiver<Result<Message>>,
    timeout: Duration,
}

impl Transport for Threads {
    fn num_workers(&self) -> usize {
        self.to_workers.len()
    }

    fn send(&mut self, worker: usize, msg: &Message) -> Result<()> {
        self.to_workers[worker]
            .send(msg.clone())
            .map_err(|_| Error::Worker(format!("worker {worker} has stopped")))
    }

    fn recv(&mut self) -> Result<Message> {
        match self.from_workers.recv_timeout(self.timeout) {
            Ok(reply) => reply,
            Err(RecvTimeoutError::Timeout) => {
                Err(Error::Worker(format!("no reply within {:?}", self.timeout)))
            }
            Err(RecvTimeoutError::Disconnected) => Err(Error::Worker("all workers have stopped".into())),
        }
    }
}

fn worker_loop(mut node: WorkerNode, inbox: Receiver<Message>, outbox: Sender<Result<Message>>) {
    let mut replies = Vec::new();
    while let Ok(msg) = inbox.recv() {
        replies.clear();
        if let Err(e) = node.handle(&msg, &mut replies) {
            let _ = outbox.send(Err(e));
            return;
        }
        for reply in replies.drain(..) {
            if outbox.send(Ok(reply)).is_err() {
                return;
            }
        }
        if msg == Message::Shutdown {
            return;
        }
    }
}

/// Scheduling of the worker nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Execution {
    /// One thread per worker.
    Threads,
    /// All workers on the calling thread, in a fixed order.
    SingleThreaded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParallelSolution {
    pub solution: AmdpSolution,
    pub stats: CommStats,
}

fn build_workers(program: &AmdpProgram, cfg: &SolverConfig, num_workers: usize) -> Result<Vec<WorkerNode>> {
    let eta = cfg.stepsize_for(program.lipschitz());
    let mut nodes: Vec<WorkerNode> = (0..num_workers).map(|_| WorkerNode { pairs: Vec::new() }).collect();
    for pair in 0..program.num_pairs() {
        nodes[pair % num_workers].pairs.push(WorkerState::new(program, pair, eta, cfg.seed)?);
    }
    Ok(nodes)
}

fn broadcast<T: Transport>(t: &mut T, counter: &mut Counter, msg: &Message) -> Result<()> {
    for w in 0..t.num_workers() {
        t.send(w, msg)?;
    }
    counter.count(msg, t.num_workers());
    Ok(())
}

fn head_loop<T: Transport>(program: &AmdpProgram, cfg: &SolverConfig, t: &mut T) -> Result<ParallelSolution> {
    let mut head = Head::new(program, cfg)?;
    let num_pairs = program.num_pairs();
    let mut counter = Counter {
        num_states: program.num_states(),
        num_pairs,
        stats: CommStats { num_workers: t.num_workers(), ..CommStats::default() },
        current: 0,
        rounds: 0,
    };
    let mut values = vec![f64::NAN; num_pairs];

    for k in 0..cfg.iterations {
        broadcast(t, &mut counter, &Message::CheckConstraints)?;
        values.iter_mut().for_each(|v| *v = f64::NAN);
        for _ in 0..num_pairs {
            match t.recv()? {
                reply @ Message::ConstraintValue { pair, value } if pair < num_pairs && values[pair].is_nan() => {
                    values[pair] = value;
                    counter.count(&reply, 1);
                }
                other => return Err(Error::Protocol(format!("iteration {k}: unexpected reply {other:?}"))),
            }
        }
        counter.round();

        let update = match head.decide(values.iter().copied()) {
            Decision::Productive { max } => head.step_productive(k, max),
            Decision::NonProductive { pair, max } => {
                let request = Message::SampleRequest { pair };
                t.send(pair % t.num_workers(), &request)?;
                counter.count(&request, 1);
                let sample = match t.recv()? {
                    reply @ Message::SampleReply { pair: p, sample } if p == pair => {
                        counter.count(&reply, 1);
                        sample
                    }
                    other => return Err(Error::Protocol(format!("iteration {k}: unexpected reply {other:?}"))),
                };
                counter.round();
                head.step_nonproductive(k, max, pair, program.mdp().state_of(pair), sample)
            }
        };
        let step = match update {
            StepUpdate::Productive => Message::ProductiveStep,
            StepUpdate::NonProductive { state, sample } => Message::NonProductiveStep { state, sample },
            StepUpdate::Clamped { dv_bar, dh } => Message::Correction { dv_bar, dh },
        };
        broadcast(t, &mut counter, &step)?;
        counter.round();
        counter.end_iteration();
    }
    broadcast(t, &mut counter, &Message::Shutdown)?;
    counter.stats.per_iteration.shrink_to_fit();
    let stats = counter.stats;
    let solution = head.finish(program, cfg.iterations)?;
    Ok(ParallelSolution { solution, stats })
}

/// Runs the solver as a head node and `num_workers` workers.
///
/// The result equals [`crate::amdp::solve`] with the same configuration;
/// only the communication statistics are new.
pub fn run_parallel(
    program: &AmdpProgram,
    cfg: &SolverConfig,
    num_workers: usize,
    execution: Execution,
) -> Result<ParallelSolution> {
    cfg.validate()?;
    if num_workers == 0 || num_workers > program.num_pairs() {
        return Err(Error::InvalidArgument(format!(
            "number of workers must lie in [1, {}], got {num_workers}",
            program.num_pairs()
        )));
    }
    let nodes = build_workers(program, cfg, num_workers)?;
    match execution {
        Execution::SingleThreaded => {
            let mut t = Inline { workers: nodes, replies: Default::default(), scratch: Vec::new() };
            head_loop(program, cfg, &mut t)
        }
        Execution::Threads => thread::scope(|scope| {
            let (reply_tx, reply_rx) = mpsc::channel();
            let mut to_workers = Vec::with_capacity(num_workers);
            for node in nodes {
                let (tx, rx) = mpsc::channel();
                let outbox = reply_tx.clone();
                scope.spawn(move || worker_loop(node, rx, outbox));
                to_workers.push(tx);
            }
            drop(reply_tx);
            let mut t = Threads { to_workers, from_workers: reply_rx, timeout: REPLY_TIMEOUT };
            // Dropping the senders on any exit path lets the workers finish.
            head_loop(program, cfg, &mut t)
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amdp::{solve, AmdpTolerances};
    use crate::estimation::estimate_model;
    use crate::mdp::river_swim;

    fn program(t_mix: f64) -> AmdpProgram {
        let mdp = river_swim();
        let model = estimate_model(&mdp, 200, 1, false).unwrap();
        AmdpProgram::new(mdp, model, t_mix, 0.01).unwrap()
    }

    fn key(sol: &AmdpSolution) -> Vec<(bool, Option<usize>, Option<usize>)> {
        sol.trace.iter().map(|r| (r.productive, r.chosen_pair, r.sample)).collect()
    }

    #[test]
    fn index_bits_examples() {
        assert_eq!(index_bits(1), 0);
        assert_eq!(index_bits(2), 1);
        assert_eq!(index_bits(6), 3);
        assert_eq!(index_bits(8), 3);
        assert_eq!(index_bits(44), 6);
    }

    #[test]
    fn worker_examples() {
        let p = program(10.0);
        let mut w = WorkerState::new(&p, 0, 0.01, 0).unwrap();
        w.cache = 0.2;
        let reply = worker_handle(&mut w, &Message::CheckConstraints).unwrap();
        assert_eq!(reply, Some(Message::ConstraintValue { pair: 0, value: 0.2 }));
        assert_eq!(w.cache(), 0.2);
        assert_eq!(w.iteration(), 0);
        assert_eq!(worker_handle(&mut w, &Message::ProductiveStep).unwrap(), None);
        assert!((w.cache() - 0.21).abs() < 1e-15);
        assert_eq!(w.iteration(), 1);

        // pair 4 is (2, left); i = 3, s = 5 leave the indicators at zero
        let mut w = WorkerState::new(&p, 4, 0.01, 0).unwrap();
        let row = p.model_row(4).to_vec();
        worker_handle(&mut w, &Message::CheckConstraints).unwrap();
        worker_handle(&mut w, &Message::NonProductiveStep { state: 3, sample: 5 }).unwrap();
        let expected = p.mdp().reward(4) - 0.01 * (1.0 + row[5] - row[3]);
        assert!((w.cache() - expected).abs() < 1e-15);
    }

    #[test]
    fn worker_rejects_out_of_order_messages() {
        let p = program(10.0);
        let mut w = WorkerState::new(&p, 0, 0.01, 0).unwrap();
        assert!(matches!(worker_handle(&mut w, &Message::ProductiveStep), Err(Error::Protocol(_))));
        assert!(matches!(worker_handle(&mut w, &Message::SampleRequest { pair: 0 }), Err(Error::Protocol(_))));
        worker_handle(&mut w, &Message::CheckConstraints).unwrap();
        assert!(matches!(worker_handle(&mut w, &Message::CheckConstraints), Err(Error::Protocol(_))));
        assert!(matches!(worker_handle(&mut w, &Message::SampleRequest { pair: 1 }), Err(Error::Protocol(_))));
        assert!(matches!(worker_handle(&mut w, &Message::Shutdown), Err(Error::Protocol(_))));
    }

    #[test]
    fn worker_samples_from_its_stream() {
        let p = program(10.0);
        let mut w = WorkerState::new(&p, 5, 0.01, 3).unwrap();
        let mut reference = rng::pair_stream(3, 5);
        let sampler = RowSampler::new(p.mdp().row(5)).unwrap();
        for _ in 0..20 {
            worker_handle(&mut w, &Message::CheckConstraints).unwrap();
            let reply = worker_handle(&mut w, &Message::SampleRequest { pair: 5 }).unwrap();
            assert_eq!(reply, Some(Message::SampleReply { pair: 5, sample: sampler.sample(&mut reference) }));
            worker_handle(&mut w, &Message::ProductiveStep).unwrap();
        }
    }

    #[test]
    fn matches_sequential_solve() {
        let p = program(155.0);
        let cfg = AmdpTolerances::for_target(0.05).solver_config(3000, 7);
        let reference = solve(&p, &cfg).unwrap();
        for workers in [1, 3, 12] {
            for execution in [Execution::SingleThreaded, Execution::Threads] {
                let par = run_parallel(&p, &cfg, workers, execution).unwrap();
                assert_eq!(key(&par.solution), key(&reference), "{workers} workers, {execution:?}");
                assert_eq!(par.solution.duals, reference.duals);
                assert_eq!(par.solution.x_hat, reference.x_hat);
                assert_eq!(par.solution.last_point, reference.last_point);
            }
        }
    }

    #[test]
    fn matches_sequential_solve_with_clamping() {
        let p = program(0.1);
        let cfg = SolverConfig::new(0.01, 2000).with_stepsize(0.05).with_seed(2);
        let reference = solve(&p, &cfg).unwrap();
        let par = run_parallel(&p, &cfg, 5, Execution::Threads).unwrap();
        assert_eq!(key(&par.solution), key(&reference));
        assert_eq!(par.solution.last_point, reference.last_point);
    }

    #[test]
    fn message_counts() {
        let p = program(155.0);
        let a = p.num_pairs() as u32;
        let cfg = SolverConfig::new(0.01, 500).with_stepsize(0.01).with_seed(1);
        let par = run_parallel(&p, &cfg, p.num_pairs(), Execution::SingleThreaded).unwrap();
        let stats = &par.stats;
        assert_eq!(stats.iterations, 500);
        for (rec, &n) in par.solution.trace.iter().zip(&stats.per_iteration) {
            if rec.productive {
                assert_eq!(n, 3 * a);
            } else {
                assert_eq!(n, 3 * a + 2);
            }
        }
        assert_eq!(stats.sample_messages, par.solution.nonproductive_count as u64);
        assert_eq!(stats.sample_bits, 3 * par.solution.nonproductive_count as u64);
        assert!(stats.max_rounds_per_iteration <= 3);
        let total: u64 = stats.per_iteration.iter().map(|&n| n as u64).sum();
        // plus the final shutdown broadcast
        assert_eq!(stats.messages, total + a as u64);
    }

    #[test]
    fn rejects_bad_worker_counts() {
        let p = program(10.0);
        let cfg = SolverConfig::new(0.01, 10);
        assert!(run_parallel(&p, &cfg, 0, Execution::SingleThreaded).is_err());
        assert!(run_parallel(&p, &cfg, 13, Execution::Threads).is_err());
    }
}
