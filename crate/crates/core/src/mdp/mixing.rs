//! Mixing times of induced chains.
//!
//! `t_mix(P) = min { t ≥ 1 : max_q ‖(Pᵀ)ᵗ q − ν‖₁ ≤ ½ }`. The ℓ₁ distance is
//! convex in the initial distribution `q`, so its maximum over the simplex
//! is attained at a vertex and only the point masses `e_i` need checking,
//! i.e. the rows of `Pᵗ`.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use super::{induced_chain, stationary_distribution, Mdp, Policy};
use crate::error::{Error, Result};
use crate::rng;

pub const DEFAULT_T_MAX: usize = 100_000;

const STATIONARY_TOL: f64 = 1e-10;
const MIXING_THRESHOLD: f64 = 0.5;

fn worst_row_distance(rows: &DMatrix<f64>, nu: &[f64]) -> f64 {
    rows.row_iter()
        .map(|row| row.iter().zip(nu).map(|(a, b)| (a - b).abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `max_i ‖e_iᵀ Pᵗ − ν‖₁` computed from an explicit matrix power.
pub fn mixing_distance(chain: &DMatrix<f64>, nu: &[f64], t: usize) -> f64 {
    worst_row_distance(&chain.pow(t as u32), nu)
}

/// Smallest `t ≥ 1` at which every initial state is within ℓ₁ distance ½ of
/// stationarity, or `None` if no `t ≤ t_max` qualifies.
pub fn mixing_time_exact(chain: &DMatrix<f64>, t_max: usize) -> Result<Option<usize>> {
    let nu = stationary_distribution(chain, STATIONARY_TOL)?;
    let mut power = chain.clone();
    let mut scratch = chain.clone();
    for t in 1..=t_max {
        if worst_row_distance(&power, &nu) <= MIXING_THRESHOLD {
            return Ok(Some(t));
        }
        power.mul_to(chain, &mut scratch);
        std::mem::swap(&mut power, &mut scratch);
    }
    Ok(None)
}

/// Policy whose per-state action distributions are drawn uniformly from the
/// simplex (Dirichlet(1, …, 1) via normalised exponentials).
pub fn random_policy<R: Rng + ?Sized>(mdp: &Mdp, rng: &mut R) -> Policy {
    let probabilities = (0..mdp.num_states())
        .map(|i| {
            let k = mdp.num_actions(i);
            if k == 1 {
                return vec![1.0];
            }
            let draws: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1)).collect();
            let total: f64 = draws.iter().sum();
            let mut row: Vec<f64> = draws.iter().map(|d| d / total).collect();
            // push the rounding residue onto the largest entry
            let residue = 1.0 - row.iter().sum::<f64>();
            let (top, _) = crate::solver::argmax_lowest(row.iter().copied()).expect("k ≥ 2");
            row[top] += residue;
            row
        })
        .collect();
    Policy { probabilities }
}

/// Largest mixing time over `num_policies` random policies.
///
/// Policy `q` is drawn from its own stream derived from `(seed, q)`, so the
/// estimate does not depend on how the evaluations are scheduled.
pub fn estimate_mixing_time(mdp: &Mdp, num_policies: usize, t_max: usize, seed: u64) -> Result<usize> {
    if num_policies == 0 {
        return Err(Error::InvalidArgument("at least one policy is required".into()));
    }
    let times = (0..num_policies)
        .into_par_iter()
        .map(|q| {
            let policy = random_policy(mdp, &mut rng::policy_stream(seed, q));
            let (chain, _) = induced_chain(mdp, &policy)?;
            mixing_time_exact(&chain, t_max)?.ok_or(Error::NotMixing { t_max })
        })
        .collect::<Result<Vec<usize>>>()?;
    Ok(times.into_iter().max().expect("nonempty"))
}
