//! Empirical transition models from generative-model samples.
//!
//! Row `(i, a)` of the estimate is `P̃_(i,a) = (1/n) Σ_j e_{X_j}` with
//! `X_j ~ P_(i,a)` i.i.d. Counts are kept as integers so every row sums to
//! exactly one.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{GenerativeModel, Mdp};
use crate::rng;
use crate::solver::ceil_count;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmpiricalModel {
    num_states: usize,
    samples_per_pair: u64,
    /// `counts[pair][j]`: how often `j` was drawn from pair `pair`.
    counts: Vec<Vec<u64>>,
}

impl EmpiricalModel {
    pub fn from_counts(num_states: usize, samples_per_pair: u64, counts: Vec<Vec<u64>>) -> Result<Self> {
        if samples_per_pair == 0 {
            return Err(Error::InvalidArgument("at least one sample per pair is required".into()));
        }
        for (p, row) in counts.iter().enumerate() {
            if row.len() != num_states {
                return Err(Error::DimensionMismatch { expected: num_states, actual: row.len() });
            }
            let total: u64 = row.iter().sum();
            if total != samples_per_pair {
                return Err(Error::InvalidArgument(format!(
                    "pair {p}: counts sum to {total}, expected {samples_per_pair}"
                )));
            }
        }
        Ok(Self { num_states, samples_per_pair, counts })
    }

    /// `P̃ = P` for a model whose probabilities are all multiples of
    /// `1/denominator`.
    pub fn from_mdp_exact(mdp: &Mdp, denominator: u64) -> Result<Self> {
        let counts = (0..mdp.num_pairs())
            .map(|p| {
                mdp.row(p)
                    .iter()
                    .map(|&prob| {
                        let c = prob * denominator as f64;
                        let r = c.round();
                        if (c - r).abs() > 1e-9 {
                            Err(Error::InvalidArgument(format!(
                                "pair {p}: probability {prob} is not a multiple of 1/{denominator}"
                            )))
                        } else {
                            Ok(r as u64)
                        }
                    })
                    .collect::<Result<Vec<u64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_counts(mdp.num_states(), denominator, counts)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_pairs(&self) -> usize {
        self.counts.len()
    }

    pub fn samples_per_pair(&self) -> u64 {
        self.samples_per_pair
    }

    pub fn counts(&self, pair: usize) -> &[u64] {
        &self.counts[pair]
    }

    /// `P̃_(pair), j`.
    pub fn prob(&self, pair: usize, next: usize) -> f64 {
        self.counts[pair][next] as f64 / self.samples_per_pair as f64
    }

    pub fn row(&self, pair: usize) -> Vec<f64> {
        (0..self.num_states).map(|j| self.prob(pair, j)).collect()
    }

    /// `⟨P̃_(pair), h⟩`, summing only over observed next states.
    pub fn dot(&self, pair: usize, h: &[f64]) -> f64 {
        let n = self.samples_per_pair as f64;
        self.counts[pair]
            .iter()
            .zip(h)
            .filter(|(c, _)| **c != 0)
            .map(|(&c, &hj)| c as f64 / n * hj)
            .sum()
    }

    /// `‖P̃_(pair) − P_(pair)‖₁` against the true model.
    pub fn l1_error(&self, mdp: &Mdp, pair: usize) -> f64 {
        mdp.row(pair).iter().enumerate().map(|(j, p)| (self.prob(pair, j) - p).abs()).sum()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: Self = serde_json::from_str(text)?;
        Self::from_counts(raw.num_states, raw.samples_per_pair, raw.counts)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

fn check_unit_interval(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must lie in (0, 1), got {value}")))
    }
}

fn check_positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be positive, got {value}")))
    }
}

/// Samples from a categorical distribution over `d` outcomes guaranteeing
/// `‖ŝ − s‖₁ ≤ δ'` with probability at least `1 − σ'`:
/// `⌈(8d + 4 ln(1/σ')) / δ'²⌉`.
pub fn required_samples_l1(d: usize, sigma_prime: f64, delta_l1: f64) -> Result<u64> {
    if d == 0 {
        return Err(Error::InvalidArgument("support size must be at least 1".into()));
    }
    check_unit_interval("sigma'", sigma_prime)?;
    check_positive("delta'", delta_l1)?;
    Ok(ceil_count((8.0 * d as f64 + 4.0 * (1.0 / sigma_prime).ln()) / (delta_l1 * delta_l1)))
}

/// Samples per state-action pair so that `|⟨P_(a) − P̃_(a), h⟩| ≤ δ'` holds
/// for every pair and every `‖h‖_∞ ≤ H` simultaneously with probability
/// `1 − σ'`. Hölder reduces each pair to an ℓ₁ target `δ'/H`, and a union
/// bound over the `A_tot` pairs splits the confidence.
pub fn required_samples_constraint(
    num_states: usize,
    num_pairs: usize,
    sigma_prime: f64,
    delta_prime: f64,
    box_radius: f64,
) -> Result<u64> {
    if num_pairs == 0 {
        return Err(Error::InvalidArgument("at least one state-action pair is required".into()));
    }
    check_unit_interval("sigma'", sigma_prime)?;
    check_positive("delta'", delta_prime)?;
    check_positive("box radius", box_radius)?;
    required_samples_l1(num_states, sigma_prime / num_pairs as f64, delta_prime / box_radius)
}

fn estimate_pair(gen: &GenerativeModel, num_states: usize, pair: usize, n: u64, seed: u64) -> Vec<u64> {
    let mut rng = rng::preprocessing_stream(seed, pair);
    let sampler = gen.sampler(pair);
    let mut counts = vec![0u64; num_states];
    for _ in 0..n {
        counts[sampler.sample(&mut rng)] += 1;
    }
    counts
}

/// Estimates every row from `n_per_pair` independent draws. Pair `p` uses
/// the stream derived from `(seed, p)`, so the result does not depend on
/// whether pairs are sampled sequentially or concurrently.
pub fn estimate_model(mdp: &Mdp, n_per_pair: u64, seed: u64, parallel: bool) -> Result<EmpiricalModel> {
    if n_per_pair == 0 {
        return Err(Error::InvalidArgument("at least one sample per pair is required".into()));
    }
    let gen = GenerativeModel::new(mdp);
    let n = mdp.num_states();
    let counts: Vec<Vec<u64>> = if parallel {
        (0..mdp.num_pairs()).into_par_iter().map(|p| estimate_pair(&gen, n, p, n_per_pair, seed)).collect()
    } else {
        (0..mdp.num_pairs()).map(|p| estimate_pair(&gen, n, p, n_per_pair, seed)).collect()
    };
    EmpiricalModel::from_counts(n, n_per_pair, counts)
}

/// Estimates only the listed pairs, in the given order; used to check that
/// the per-pair streams make estimation order-independent.
pub fn estimate_pairs(mdp: &Mdp, pairs: &[usize], n_per_pair: u64, seed: u64) -> Vec<(usize, Vec<u64>)> {
    let gen = GenerativeModel::new(mdp);
    pairs
        .iter()
        .map(|&p| (p, estimate_pair(&gen, mdp.num_states(), p, n_per_pair, seed)))
        .collect()
}
