use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::error::Error;

fn chain(rows: &[&[f64]]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), rows.len(), |i, j| rows[i][j])
}

fn single_action_mdp(rows: &[&[f64]], rewards: &[f64]) -> Mdp {
    let actions = rows
        .iter()
        .zip(rewards)
        .map(|(row, &reward)| vec![ActionSpec { name: None, reward, transition: row.to_vec() }])
        .collect();
    Mdp::from_spec(MdpSpec { num_states: rows.len(), actions }).unwrap()
}

fn residual(p: &DMatrix<f64>, nu: &[f64]) -> f64 {
    (0..nu.len())
        .map(|j| ((0..nu.len()).map(|i| nu[i] * p[(i, j)]).sum::<f64>() - nu[j]).abs())
        .sum()
}

fn always(mdp: &Mdp, action: usize) -> Policy {
    Policy::deterministic(mdp, &vec![action; mdp.num_states()]).unwrap()
}

#[test]
fn rejects_malformed_specs() {
    let bad_sum = MdpSpec {
        num_states: 2,
        actions: vec![
            vec![ActionSpec { name: None, reward: 0.0, transition: vec![0.5, 0.4] }],
            vec![ActionSpec { name: None, reward: 0.0, transition: vec![0.5, 0.5] }],
        ],
    };
    assert!(matches!(Mdp::from_spec(bad_sum), Err(Error::InvalidMdp(_))));

    let bad_reward = MdpSpec {
        num_states: 1,
        actions: vec![vec![ActionSpec { name: None, reward: 1.5, transition: vec![1.0] }]],
    };
    assert!(Mdp::from_spec(bad_reward).is_err());

    let no_actions = MdpSpec { num_states: 1, actions: vec![vec![]] };
    assert!(Mdp::from_spec(no_actions).is_err());
}

#[test]
fn json_round_trip() {
    let mdp = river_swim();
    let text = mdp.to_json().unwrap();
    let back = Mdp::from_json(&text).unwrap();
    assert_eq!(back, mdp);
    assert_eq!(back.action_name(mdp.pair(3, 1)), Some("right"));
}

#[test]
fn pair_indexing() {
    let mdp = river_swim();
    assert_eq!(mdp.num_pairs(), 12);
    for p in 0..mdp.num_pairs() {
        assert_eq!(mdp.pair(mdp.state_of(p), mdp.action_of(p)), p);
    }
    assert_eq!(mdp.pairs_of(2), 4..6);
}

#[test]
fn induced_chain_examples() {
    let mdp = river_swim();
    let (p, r) = induced_chain(&mdp, &always(&mdp, RIVER_SWIM_RIGHT)).unwrap();
    let row2: Vec<f64> = p.row(2).iter().copied().collect();
    assert_eq!(row2, vec![0.0, 0.05, 0.6, 0.35, 0.0, 0.0]);
    assert_eq!(r[5], 1.0);

    let twin = Mdp::from_spec(MdpSpec {
        num_states: 2,
        actions: vec![
            vec![
                ActionSpec { name: None, reward: 0.3, transition: vec![0.25, 0.75] },
                ActionSpec { name: None, reward: 0.3, transition: vec![0.25, 0.75] },
            ],
            vec![ActionSpec { name: None, reward: 0.1, transition: vec![1.0, 0.0] }],
        ],
    })
    .unwrap();
    let (p, r) = induced_chain(&twin, &Policy::uniform(&twin)).unwrap();
    assert_eq!(p[(0, 0)], 0.25);
    assert_eq!(p[(0, 1)], 0.75);
    assert_eq!(r[0], 0.3);
}

#[test]
fn induced_chain_rejects_wrong_shape() {
    let mdp = river_swim();
    let policy = Policy { probabilities: vec![vec![1.0]; 6] };
    assert!(matches!(induced_chain(&mdp, &policy), Err(Error::InvalidPolicy(_))));
}

#[test]
fn stationary_examples() {
    let flip = chain(&[&[0.0, 1.0], &[1.0, 0.0]]);
    let nu = stationary_distribution(&flip, 1e-12).unwrap();
    assert!((nu[0] - 0.5).abs() < 1e-15 && (nu[1] - 0.5).abs() < 1e-15);

    let absorbing = chain(&[&[1.0, 0.0], &[0.5, 0.5]]);
    let nu = stationary_distribution(&absorbing, 1e-12).unwrap();
    assert!((nu[0] - 1.0).abs() < 1e-15 && nu[1].abs() < 1e-15);
}

#[test]
fn stationary_rejects_two_closed_classes() {
    let split = chain(&[&[1.0, 0.0], &[0.0, 1.0]]);
    assert!(matches!(stationary_distribution(&split, 1e-10), Err(Error::NoUniqueStationary(_))));
}

#[test]
fn stationary_river_swim_matches_power_iteration() {
    let mdp = river_swim();
    let (p, _) = induced_chain(&mdp, &always(&mdp, RIVER_SWIM_RIGHT)).unwrap();
    let nu = stationary_distribution(&p, 1e-12).unwrap();
    assert!(residual(&p, &nu) <= 1e-10);

    // Independent check: 10^6 steps of plain power iteration.
    let n = 6;
    let mut q = vec![1.0 / n as f64; n];
    for _ in 0..1_000_000 {
        let mut next = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                next[j] += q[i] * p[(i, j)];
            }
        }
        q = next;
    }
    for (a, b) in nu.iter().zip(&q) {
        assert!((a - b).abs() < 1e-10, "{nu:?} vs {q:?}");
    }
}

#[test]
fn policy_value_examples() {
    let mdp = river_swim();
    let left = policy_value(&mdp, &always(&mdp, RIVER_SWIM_LEFT)).unwrap();
    assert!((left - 0.005).abs() <= 1e-12);

    let constant = single_action_mdp(&[&[0.5, 0.5], &[0.2, 0.8]], &[0.4, 0.4]);
    let v = policy_value(&constant, &Policy::uniform(&constant)).unwrap();
    assert!((v - 0.4).abs() < 1e-12);
}

#[test]
fn rvi_single_state() {
    let mdp = single_action_mdp(&[&[1.0]], &[0.7]);
    let sol = optimal_gain_rvi(&mdp, 1e-10, 1000).unwrap();
    assert!((sol.gain - 0.7).abs() < 1e-10);
}

#[test]
fn rvi_periodic_cycle() {
    let mdp = single_action_mdp(&[&[0.0, 1.0], &[1.0, 0.0]], &[0.0, 1.0]);
    let sol = optimal_gain_rvi(&mdp, 1e-10, 10_000).unwrap();
    assert!((sol.gain - 0.5).abs() < 1e-10);
    assert!(sol.bellman_residual <= 1e-10);
}

#[test]
fn rvi_river_swim_prefers_right() {
    let mdp = river_swim();
    let sol = optimal_gain_rvi(&mdp, 1e-8, 1_000_000).unwrap();
    assert_eq!(sol.policy.greedy_actions(), vec![RIVER_SWIM_RIGHT; 6]);
    assert!(sol.bellman_residual <= 1e-8);
    let v = policy_value(&mdp, &sol.policy).unwrap();
    assert!((v - sol.gain).abs() <= 1e-8);
}

#[test]
fn rvi_reports_no_convergence() {
    let mdp = river_swim();
    assert!(matches!(optimal_gain_rvi(&mdp, 1e-12, 3), Err(Error::NoConvergence(3))));
}

#[test]
fn mixing_examples() {
    let iid = chain(&[&[0.5, 0.5], &[0.5, 0.5]]);
    assert_eq!(mixing_time_exact(&iid, 10).unwrap(), Some(1));
    let flip = chain(&[&[0.0, 1.0], &[1.0, 0.0]]);
    assert_eq!(mixing_time_exact(&flip, 1000).unwrap(), None);
}

#[test]
fn mixing_time_is_first_crossing_on_river_swim() {
    let mdp = river_swim();
    let (p, _) = induced_chain(&mdp, &always(&mdp, RIVER_SWIM_RIGHT)).unwrap();
    let nu = stationary_distribution(&p, 1e-12).unwrap();
    let t = mixing_time_exact(&p, DEFAULT_T_MAX).unwrap().unwrap();
    assert!(mixing_distance(&p, &nu, t) <= 0.5);
    if t > 1 {
        assert!(mixing_distance(&p, &nu, t - 1) > 0.5);
    }
}

#[test]
fn single_state_mixes_in_one_step() {
    let mdp = single_action_mdp(&[&[1.0]], &[0.0]);
    assert_eq!(estimate_mixing_time(&mdp, 5, 10, 0).unwrap(), 1);
}

#[test]
fn estimate_mixing_time_errors() {
    let mdp = single_action_mdp(&[&[0.0, 1.0], &[1.0, 0.0]], &[0.0, 0.0]);
    assert!(matches!(estimate_mixing_time(&mdp, 3, 50, 0), Err(Error::NotMixing { t_max: 50 })));
    assert!(estimate_mixing_time(&river_swim(), 0, 50, 0).is_err());
}

#[test]
fn mixing_estimate_is_reproducible() {
    let mdp = river_swim();
    let a = estimate_mixing_time(&mdp, 20, DEFAULT_T_MAX, 3).unwrap();
    let b = estimate_mixing_time(&mdp, 20, DEFAULT_T_MAX, 3).unwrap();
    assert_eq!(a, b);
}

#[test]
fn generative_model_frequencies() {
    let mdp = river_swim();
    let model = GenerativeModel::new(&mdp);
    let pair = mdp.pair(2, RIVER_SWIM_RIGHT);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 200_000;
    let mut counts = [0usize; 6];
    for _ in 0..n {
        counts[model.sample(pair, &mut rng)] += 1;
    }
    for (c, p) in counts.iter().zip(mdp.row(pair)) {
        // five standard deviations
        let sd = (p * (1.0 - p) / n as f64).sqrt();
        assert!((*c as f64 / n as f64 - p).abs() <= 5.0 * sd + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn induced_chains_are_stochastic(seed in any::<u64>()) {
        for mdp in [river_swim(), access_control(&AccessControlParams::default())] {
            let policy = random_policy(&mdp, &mut ChaCha8Rng::seed_from_u64(seed));
            policy.validate(&mdp).unwrap();
            let (p, r) = induced_chain(&mdp, &policy).unwrap();
            for row in p.row_iter() {
                prop_assert!((row.sum() - 1.0).abs() <= 1e-12);
            }
            prop_assert!(r.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn stationary_residual_is_tiny(seed in any::<u64>()) {
        for mdp in [river_swim(), access_control(&AccessControlParams::default())] {
            let policy = random_policy(&mdp, &mut ChaCha8Rng::seed_from_u64(seed));
            let (p, _) = induced_chain(&mdp, &policy).unwrap();
            let nu = stationary_distribution(&p, 1e-10).unwrap();
            prop_assert!(residual(&p, &nu) <= 1e-10);
            prop_assert!(nu.iter().all(|v| *v >= 0.0));
            prop_assert!((nu.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn no_policy_beats_the_optimal_gain(seed in any::<u64>()) {
        let mdp = river_swim();
        let tol = 1e-8;
        let v_star = optimal_gain_rvi(&mdp, tol, 1_000_000).unwrap().gain;
        let policy = random_policy(&mdp, &mut ChaCha8Rng::seed_from_u64(seed));
        let v = policy_value(&mdp, &policy).unwrap();
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert!(v <= v_star + tol);
    }

    #[test]
    fn mixing_time_is_first_crossing(
        rows in prop::collection::vec(prop::collection::vec(0u8..5, 3), 3),
    ) {
        // rows of quarters, normalised so that each row sums to one
        let p = DMatrix::from_fn(3, 3, |i, j| {
            let total: u32 = rows[i].iter().map(|&v| v as u32).sum();
            if total == 0 { (i == j) as u8 as f64 } else { rows[i][j] as f64 / total as f64 }
        });
        if let Ok(nu) = stationary_distribution(&p, 1e-10) {
            if let Some(t) = mixing_time_exact(&p, 200).unwrap() {
                prop_assert!(mixing_distance(&p, &nu, t) <= 0.5);
                if t > 1 {
                    prop_assert!(mixing_distance(&p, &nu, t - 1) > 0.5);
                }
            }
        }
    }
}
