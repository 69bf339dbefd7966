use mirrormdp::amdp::{round_policy, solve, AmdpProgram, AmdpTolerances};
use mirrormdp::estimation::{estimate_model, EmpiricalModel};
use mirrormdp::mdp::{optimal_gain_rvi, policy_value, river_swim, ActionSpec, Mdp, MdpSpec};
use mirrormdp::parallel::{run_parallel, Execution};
use mirrormdp::Error;

fn single_state(reward: f64) -> Mdp {
    Mdp::from_spec(MdpSpec {
        num_states: 1,
        actions: vec![vec![ActionSpec { name: None, reward, transition: vec![1.0] }]],
    })
    .unwrap()
}

/// Two self-loops with different rewards plus a move between them.
fn two_loops() -> Mdp {
    let a = |reward: f64, row: [f64; 2]| ActionSpec { name: None, reward, transition: row.to_vec() };
    Mdp::from_spec(MdpSpec {
        num_states: 2,
        actions: vec![vec![a(0.1, [1.0, 0.0]), a(0.0, [0.0, 1.0])], vec![a(0.9, [0.0, 1.0]), a(0.0, [1.0, 0.0])]],
    })
    .unwrap()
}

#[test]
fn single_state_pipeline_recovers_the_reward() {
    let mdp = single_state(0.7);
    let tol = AmdpTolerances::for_target(0.05);
    let model = estimate_model(&mdp, 10, 0, false).unwrap();
    let program = AmdpProgram::new(mdp.clone(), model, 1.0, tol.approx_level).unwrap();
    let sol = solve(&program, &tol.solver_config(5_000, 0)).unwrap();
    assert!((sol.x_hat.v_bar - 0.7).abs() <= 0.05, "v̄ = {}", sol.x_hat.v_bar);
    let pi = round_policy(&sol.duals, &mdp).unwrap();
    assert_eq!(policy_value(&mdp, &pi).unwrap(), 0.7);
}

#[test]
fn easy_mdp_is_solved_to_accuracy() {
    // short mixing time and an exact model: the rounded policy stays in the good loop
    let mdp = two_loops();
    let v_star = optimal_gain_rvi(&mdp, 1e-10, 100_000).unwrap().gain;
    assert!((v_star - 0.9).abs() < 1e-9);
    let tol = AmdpTolerances::for_target(0.1);
    let model = EmpiricalModel::from_mdp_exact(&mdp, 1).unwrap();
    let program = AmdpProgram::new(mdp.clone(), model, 1.0, 0.0).unwrap();
    let cfg = tol.solver_config(200_000, 3).with_trace(false);
    let sol = solve(&program, &cfg).unwrap();
    let pi = round_policy(&sol.duals, &mdp).unwrap();
    let gap = v_star - policy_value(&mdp, &pi).unwrap();
    assert!(gap <= 0.1, "gap {gap}, policy {:?}", pi.probabilities);
}

#[test]
fn parallel_run_reproduces_sequential_solution() {
    let mdp = river_swim();
    let tol = AmdpTolerances::for_target(0.05);
    let model = estimate_model(&mdp, 300, 7, true).unwrap();
    let program = AmdpProgram::new(mdp, model, 20.0, tol.approx_level).unwrap();
    let cfg = tol.solver_config(4_000, 7);
    let mut seq = solve(&program, &cfg).unwrap();
    for execution in [Execution::Threads, Execution::SingleThreaded] {
        let mut par = run_parallel(&program, &cfg, 5, execution).unwrap().solution;
        for rec in seq.trace.iter_mut().chain(par.trace.iter_mut()) {
            rec.elapsed = Default::default();
        }
        assert_eq!(par, seq);
    }
}

#[test]
fn mismatched_inputs_are_rejected() {
    let mdp = river_swim();
    let other = single_state(0.5);
    let model = estimate_model(&other, 5, 0, false).unwrap();
    assert!(AmdpProgram::new(mdp.clone(), model, 10.0, 0.01).is_err());
    let model = estimate_model(&mdp, 5, 0, false).unwrap();
    let program = AmdpProgram::new(mdp, model, 10.0, 0.01).unwrap();
    let cfg = AmdpTolerances::for_target(0.05).solver_config(10, 0);
    assert!(matches!(run_parallel(&program, &cfg, 0, Execution::Threads), Err(Error::InvalidArgument(_))));
    assert!(matches!(run_parallel(&program, &cfg, 13, Execution::Threads), Err(Error::InvalidArgument(_))));
}
