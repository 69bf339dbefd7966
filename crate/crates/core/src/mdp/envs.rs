//! Benchmark environments with exactly known models.

use serde::{Deserialize, Serialize};

use super::{ActionSpec, Mdp, MdpSpec};

pub const RIVER_SWIM_LEFT: usize = 0;
pub const RIVER_SWIM_RIGHT: usize = 1;

const RIVER_SWIM_STATES: usize = 6;
const SWIM_FORWARD: f64 = 0.35;
const SWIM_STAY: f64 = 0.6;
const SWIM_BACK: f64 = 0.05;

/// Six states in a row. Swimming left always succeeds and pays 0.005 only
/// as the self-loop of the leftmost state. Swimming right moves forward
/// w.p. 0.35, stays w.p. 0.6 and drifts back w.p. 0.05; at the rightmost
/// state the forward outcome loops back to itself and the action pays 1.
/// Probability mass that would leave the river stays in place.
pub fn river_swim() -> Mdp {
    let n = RIVER_SWIM_STATES;
    let last = n - 1;
    let actions = (0..n)
        .map(|i| {
            let mut left = vec![0.0; n];
            left[i.saturating_sub(1)] = 1.0;

            let mut right = vec![0.0; n];
            right[(i + 1).min(last)] += SWIM_FORWARD;
            right[i] += SWIM_STAY;
            right[i.saturating_sub(1)] += SWIM_BACK;

            vec![
                ActionSpec {
                    name: Some("left".into()),
                    reward: if i == 0 { 0.005 } else { 0.0 },
                    transition: left,
                },
                ActionSpec {
                    name: Some("right".into()),
                    reward: if i == last { 1.0 } else { 0.0 },
                    transition: right,
                },
            ]
        })
        .collect();
    Mdp::from_spec(MdpSpec { num_states: n, actions }).expect("RiverSwim is a valid MDP")
}

pub const ACCESS_CONTROL_REJECT: usize = 0;
pub const ACCESS_CONTROL_ACCEPT: usize = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccessControlParams {
    pub num_servers: usize,
    /// Probability that a busy server becomes free during one step.
    pub free_prob: f64,
    /// Customer priorities, each arriving with equal probability. Accepting
    /// a customer pays its priority divided by the largest priority.
    pub priorities: Vec<f64>,
}

impl Default for AccessControlParams {
    fn default() -> Self {
        Self { num_servers: 10, free_prob: 0.06, priorities: vec![1.0, 2.0, 4.0, 8.0] }
    }
}

impl AccessControlParams {
    /// State index of `(free servers, priority index)`.
    pub fn state(&self, free: usize, priority: usize) -> usize {
        free * self.priorities.len() + priority
    }

    pub fn num_states(&self) -> usize {
        (self.num_servers + 1) * self.priorities.len()
    }
}

fn binomial_pmf(trials: usize, p: f64) -> Vec<f64> {
    let mut pmf = vec![0.0; trials + 1];
    let mut coeff = 1.0f64;
    for (k, slot) in pmf.iter_mut().enumerate() {
        if k > 0 {
            coeff *= (trials - k + 1) as f64 / k as f64;
        }
        *slot = coeff * p.powi(k as i32) * (1.0 - p).powi((trials - k) as i32);
    }
    pmf
}

/// Access-control queuing task with reward normalised into `[0, 1]`.
///
/// The state is `(free servers, priority of the customer at the head of the
/// queue)`. Rejecting is always allowed; accepting needs a free server,
/// pays the normalised priority and occupies a server. Afterwards every busy
/// server (including one just occupied) frees independently with
/// probability `free_prob`, and the next customer's priority is drawn
/// uniformly.
///
/// # Panics
///
/// If `num_servers == 0`, `priorities` is empty or non-positive, or
/// `free_prob` is outside `[0, 1]`.
pub fn access_control(params: &AccessControlParams) -> Mdp {
    assert!(params.num_servers >= 1, "at least one server is required");
    assert!(!params.priorities.is_empty(), "at least one priority is required");
    assert!((0.0..=1.0).contains(&params.free_prob), "free_prob must be a probability");
    let max_priority = params.priorities.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert!(max_priority > 0.0 && params.priorities.iter().all(|&p| p >= 0.0));

    let n = params.num_states();
    let k = params.priorities.len();
    let servers = params.num_servers;
    let next_row = |free_after: usize| {
        let busy = servers - free_after;
        let mut row = vec![0.0; n];
        for (freed, pr) in binomial_pmf(busy, params.free_prob).into_iter().enumerate() {
            for q in 0..k {
                row[params.state(free_after + freed, q)] += pr / k as f64;
            }
        }
        row
    };

    let mut actions = Vec::with_capacity(n);
    for free in 0..=servers {
        for (q, &priority) in params.priorities.iter().enumerate() {
            let mut here = vec![ActionSpec { name: Some("reject".into()), reward: 0.0, transition: next_row(free) }];
            if free > 0 {
                here.push(ActionSpec {
                    name: Some("accept".into()),
                    reward: priority / max_priority,
                    transition: next_row(free - 1),
                });
            }
            debug_assert_eq!(actions.len(), params.state(free, q));
            actions.push(here);
        }
    }
    Mdp::from_spec(MdpSpec { num_states: n, actions }).expect("access-control model is a valid MDP")
}
