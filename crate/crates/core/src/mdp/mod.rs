//! Tabular MDPs, policies and the generative-model sampler.
//!
//! State-action pairs are numbered consecutively state by state: the actions
//! of state `i` occupy pairs `offset(i)..offset(i + 1)`. Transition rows and
//! rewards are indexed by pair.

mod envs;
mod mixing;
mod oracles;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use envs::{access_control, river_swim, AccessControlParams, ACCESS_CONTROL_ACCEPT, ACCESS_CONTROL_REJECT, RIVER_SWIM_LEFT, RIVER_SWIM_RIGHT};
pub use mixing::{estimate_mixing_time, mixing_distance, mixing_time_exact, random_policy, DEFAULT_T_MAX};
pub use oracles::{induced_chain, optimal_gain_rvi, policy_value, stationary_distribution, RviSolution};

const ROW_SUM_TOL: f64 = 1e-12;

/// Serialized form of an [`Mdp`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpSpec {
    pub num_states: usize,
    /// `actions[i]` lists the actions available in state `i`.
    pub actions: Vec<Vec<ActionSpec>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub reward: f64,
    /// Next-state distribution, length `num_states`.
    pub transition: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MdpSpec", into = "MdpSpec")]
pub struct Mdp {
    num_states: usize,
    offsets: Vec<usize>,
    pair_state: Vec<usize>,
    names: Vec<Option<String>>,
    transitions: Vec<f64>,
    rewards: Vec<f64>,
}

impl TryFrom<MdpSpec> for Mdp {
    type Error = Error;

    fn try_from(spec: MdpSpec) -> Result<Self> {
        let n = spec.num_states;
        if n == 0 {
            return Err(Error::InvalidMdp("at least one state is required".into()));
        }
        if spec.actions.len() != n {
            return Err(Error::InvalidMdp(format!(
                "{} action lists for {n} states",
                spec.actions.len()
            )));
        }
        let mut mdp = Mdp {
            num_states: n,
            offsets: vec![0],
            pair_state: Vec::new(),
            names: Vec::new(),
            transitions: Vec::new(),
            rewards: Vec::new(),
        };
        for (i, actions) in spec.actions.into_iter().enumerate() {
            if actions.is_empty() {
                return Err(Error::InvalidMdp(format!("state {i} has no actions")));
            }
            for (a, action) in actions.into_iter().enumerate() {
                if action.transition.len() != n {
                    return Err(Error::InvalidMdp(format!(
                        "state {i} action {a}: transition row has length {}, expected {n}",
                        action.transition.len()
                    )));
                }
                if action.transition.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
                    return Err(Error::InvalidMdp(format!("state {i} action {a}: negative or non-finite probability")));
                }
                let sum: f64 = action.transition.iter().sum();
                if (sum - 1.0).abs() > ROW_SUM_TOL {
                    return Err(Error::InvalidMdp(format!("state {i} action {a}: row sums to {sum}")));
                }
                if !(0.0..=1.0).contains(&action.reward) {
                    return Err(Error::InvalidMdp(format!(
                        "state {i} action {a}: reward {} outside [0, 1]",
                        action.reward
                    )));
                }
                mdp.pair_state.push(i);
                mdp.names.push(action.name);
                mdp.transitions.extend(action.transition);
                mdp.rewards.push(action.reward);
            }
            mdp.offsets.push(mdp.rewards.len());
        }
        Ok(mdp)
    }
}

impl From<Mdp> for MdpSpec {
    fn from(mdp: Mdp) -> Self {
        let actions = (0..mdp.num_states)
            .map(|i| {
                mdp.pairs_of(i)
                    .map(|p| ActionSpec {
                        name: mdp.names[p].clone(),
                        reward: mdp.rewards[p],
                        transition: mdp.row(p).to_vec(),
                    })
                    .collect()
            })
            .collect();
        MdpSpec { num_states: mdp.num_states, actions }
    }
}

impl Mdp {
    pub fn from_spec(spec: MdpSpec) -> Result<Self> {
        Self::try_from(spec)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    /// Total number of state-action pairs `A_tot`.
    pub fn num_pairs(&self) -> usize {
        self.rewards.len()
    }

    pub fn num_actions(&self, state: usize) -> usize {
        self.offsets[state + 1] - self.offsets[state]
    }

    pub fn pairs_of(&self, state: usize) -> std::ops::Range<usize> {
        self.offsets[state]..self.offsets[state + 1]
    }

    pub fn pair(&self, state: usize, action: usize) -> usize {
        debug_assert!(action < self.num_actions(state));
        self.offsets[state] + action
    }

    pub fn state_of(&self, pair: usize) -> usize {
        self.pair_state[pair]
    }

    pub fn action_of(&self, pair: usize) -> usize {
        pair - self.offsets[self.pair_state[pair]]
    }

    pub fn action_name(&self, pair: usize) -> Option<&str> {
        self.names[pair].as_deref()
    }

    /// Next-state distribution `P_(i,a)`.
    pub fn row(&self, pair: usize) -> &[f64] {
        &self.transitions[pair * self.num_states..(pair + 1) * self.num_states]
    }

    pub fn reward(&self, pair: usize) -> f64 {
        self.rewards[pair]
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }
}

/// A stationary randomized policy: one distribution per state over that
/// state's actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub probabilities: Vec<Vec<f64>>,
}

impl Policy {
    pub fn new(mdp: &Mdp, probabilities: Vec<Vec<f64>>) -> Result<Self> {
        let policy = Self { probabilities };
        policy.validate(mdp)?;
        Ok(policy)
    }

    pub fn deterministic(mdp: &Mdp, choices: &[usize]) -> Result<Self> {
        if choices.len() != mdp.num_states() {
            return Err(Error::InvalidPolicy(format!(
                "{} choices for {} states",
                choices.len(),
                mdp.num_states()
            )));
        }
        let mut probabilities = Vec::with_capacity(choices.len());
        for (i, &a) in choices.iter().enumerate() {
            if a >= mdp.num_actions(i) {
                return Err(Error::InvalidPolicy(format!("state {i} has no action {a}")));
            }
            let mut row = vec![0.0; mdp.num_actions(i)];
            row[a] = 1.0;
            probabilities.push(row);
        }
        Ok(Self { probabilities })
    }

    pub fn uniform(mdp: &Mdp) -> Self {
        let probabilities = (0..mdp.num_states())
            .map(|i| {
                let k = mdp.num_actions(i);
                vec![1.0 / k as f64; k]
            })
            .collect();
        Self { probabilities }
    }

    pub fn validate(&self, mdp: &Mdp) -> Result<()> {
        if self.probabilities.len() != mdp.num_states() {
            return Err(Error::InvalidPolicy(format!(
                "policy covers {} states, MDP has {}",
                self.probabilities.len(),
                mdp.num_states()
            )));
        }
        for (i, row) in self.probabilities.iter().enumerate() {
            if row.len() != mdp.num_actions(i) {
                return Err(Error::InvalidPolicy(format!(
                    "state {i}: {} probabilities for {} actions",
                    row.len(),
                    mdp.num_actions(i)
                )));
            }
            if row.iter().any(|&p| !(p >= 0.0)) {
                return Err(Error::InvalidPolicy(format!("state {i}: negative probability")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidPolicy(format!("state {i}: probabilities sum to {sum}")));
            }
        }
        Ok(())
    }

    pub fn state_probs(&self, state: usize) -> &[f64] {
        &self.probabilities[state]
    }

    /// Index of the most likely action of every state (lowest index on ties).
    pub fn greedy_actions(&self) -> Vec<usize> {
        self.probabilities
            .iter()
            .map(|row| crate::solver::argmax_lowest(row.iter().copied()).map_or(0, |(a, _)| a))
            .collect()
    }
}

/// Categorical sampler over one transition row.
#[derive(Debug, Clone)]
pub struct RowSampler(WeightedIndex<f64>);

impl RowSampler {
    pub fn new(row: &[f64]) -> Result<Self> {
        WeightedIndex::new(row)
            .map(Self)
            .map_err(|e| Error::InvalidArgument(format!("cannot sample from row: {e}")))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.0.sample(rng)
    }
}

/// Generative model: draws `s ~ P_(i,a)` for any queried pair.
#[derive(Debug, Clone)]
pub struct GenerativeModel {
    samplers: Vec<RowSampler>,
}

impl GenerativeModel {
    pub fn new(mdp: &Mdp) -> Self {
        let samplers = (0..mdp.num_pairs())
            .map(|p| RowSampler::new(mdp.row(p)).expect("validated MDP rows are samplable"))
            .collect();
        Self { samplers }
    }

    pub fn num_pairs(&self) -> usize {
        self.samplers.len()
    }

    pub fn sampler(&self, pair: usize) -> &RowSampler {
        &self.samplers[pair]
    }

    pub fn sample<R: Rng + ?Sized>(&self, pair: usize, rng: &mut R) -> usize {
        self.samplers[pair].sample(rng)
    }
}

#[cfg(test)]
mod tests;
