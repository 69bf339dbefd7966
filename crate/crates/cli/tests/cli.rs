use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_mirrormdp");

fn mirrormdp(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("MIRRORMDP_SEED").output().expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SINGLE_STATE: &str = r#"{"num_states":1,"actions":[[{"reward":0.7,"transition":[1.0]}]]}"#;

fn write_env(dir: &TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    format!("json:{}", path.display())
}

fn solve_outputs(dir: &TempDir, tag: &str, extra: &[&str]) -> (Vec<u8>, Vec<u8>, Vec<u8>) {
    let trace = dir.path().join(format!("{tag}.csv"));
    let policy = dir.path().join(format!("{tag}.policy.json"));
    let summary = dir.path().join(format!("{tag}.summary.json"));
    let mut args = vec![
        "solve",
        "--env",
        "riverswim",
        "--iters",
        "3000",
        "--tmix",
        "20",
        "--pre-samples",
        "200",
        "--seed",
        "5",
        "--trace",
        path_str(&trace),
        "--policy",
        path_str(&policy),
        "--summary",
        path_str(&summary),
    ];
    args.extend_from_slice(extra);
    let out = mirrormdp(&args);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    (std::fs::read(trace).unwrap(), std::fs::read(policy).unwrap(), std::fs::read(summary).unwrap())
}

#[test]
fn reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let a = solve_outputs(&dir, "a", &[]);
    let b = solve_outputs(&dir, "b", &[]);
    assert_eq!(a, b);
    let header = String::from_utf8(a.0).unwrap();
    assert_eq!(
        header.lines().next().unwrap(),
        "iter,productive,chosen_pair,sample,vbar,max_constraint,elapsed_ms"
    );
    assert_eq!(header.lines().count(), 3001);
}

#[test]
fn parallel_trace_matches_sequential() {
    let dir = TempDir::new().unwrap();
    let seq = solve_outputs(&dir, "seq", &[]);
    let par = solve_outputs(&dir, "par", &["--mode", "parallel", "--workers", "4"]);
    assert_eq!(seq.0, par.0);
    assert_eq!(seq.1, par.1);
    let summary: serde_json::Value = serde_json::from_slice(&par.2).unwrap();
    assert_eq!(summary["workers"], 4);
    assert!(summary["comm"]["messages"].as_u64().unwrap() > 0);
}

#[test]
fn seed_comes_from_environment_when_not_given() {
    let run = |seed: Option<&str>| {
        let mut cmd = Command::new(BIN);
        cmd.args(["solve", "--env", "riverswim", "--iters", "2000", "--tmix", "10", "--pre-samples", "10"]);
        match seed {
            Some(s) => cmd.env("MIRRORMDP_SEED", s),
            None => cmd.env_remove("MIRRORMDP_SEED"),
        };
        stdout_json(&cmd.output().unwrap())["seed"].as_u64().unwrap()
    };
    assert_eq!(run(None), 0);
    assert_eq!(run(Some("17")), 17);
}

#[test]
fn single_state_optimal_value() {
    let dir = TempDir::new().unwrap();
    let env = write_env(&dir, "one.json", SINGLE_STATE);
    let v = stdout_json(&mirrormdp(&["optimal", "--env", &env]));
    assert!((v["optimal_value"].as_f64().unwrap() - 0.7).abs() <= 1e-8);
}

#[test]
fn evaluates_always_left_on_riverswim() {
    let dir = TempDir::new().unwrap();
    let policy = dir.path().join("left.json");
    let rows = ["[1.0,0.0]"; 6].join(",");
    std::fs::write(&policy, format!(r#"{{"probabilities":[{rows}]}}"#)).unwrap();
    let v = stdout_json(&mirrormdp(&["eval", "--env", "riverswim", "--policy", path_str(&policy)]));
    assert!((v["policy_value"].as_f64().unwrap() - 0.005).abs() <= 1e-12);
}

#[test]
fn single_state_mixes_immediately() {
    let dir = TempDir::new().unwrap();
    let env = write_env(&dir, "one.json", SINGLE_STATE);
    let v = stdout_json(&mirrormdp(&["mixing-time", "--env", &env, "--policies", "3"]));
    assert_eq!(v["t_mix"], 1);
}

#[test]
fn bad_configuration_exits_with_two() {
    let dir = TempDir::new().unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["solve", "--env", "riverswim", "--epsilon", "-1"],
        vec!["solve", "--env", "riverswim", "--workers", "2"],
        vec!["solve", "--env", "cartpole"],
        vec!["solve"],
        vec!["solve", "--env", "riverswim", "--mode", "parallel", "--workers", "13"],
        vec!["frobnicate"],
    ];
    for args in cases {
        assert_eq!(mirrormdp(&args).status.code(), Some(2), "{args:?}");
    }
    let config = dir.path().join("bad.toml");
    std::fs::write(&config, "colour = 3\n").unwrap();
    let out = mirrormdp(&["solve", "--config", path_str(&config)]);
    assert_eq!(out.status.code(), Some(2));
    let missing = dir.path().join("missing.json");
    let env = format!("json:{}", missing.display());
    assert_eq!(mirrormdp(&["optimal", "--env", &env]).status.code(), Some(2));
}

#[test]
fn runtime_failure_exits_with_one() {
    // Two closed classes: the stationary distribution is not unique.
    let dir = TempDir::new().unwrap();
    let env = write_env(
        &dir,
        "split.json",
        r#"{"num_states":2,"actions":[[{"reward":0.0,"transition":[1.0,0.0]}],
                                    [{"reward":1.0,"transition":[0.0,1.0]}]]}"#,
    );
    let policy = dir.path().join("p.json");
    std::fs::write(&policy, r#"{"probabilities":[[1.0],[1.0]]}"#).unwrap();
    let out = mirrormdp(&["eval", "--env", &env, "--policy", path_str(&policy)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("run.toml");
    std::fs::write(
        &config,
        "env = \"riverswim\"\niters = 2000\ntmix = 10\npre-samples = 20\nseed = 3\nepsilon = 0.2\n",
    )
    .unwrap();
    let v = stdout_json(&mirrormdp(&["solve", "--config", path_str(&config), "--seed", "8"]));
    assert_eq!(v["seed"], 8);
    assert_eq!(v["iterations_executed"], 2000);
    assert_eq!(v["epsilon"], 0.2);
    assert_eq!(v["pre_samples_per_pair"], 20);
    assert_eq!(v["t_mix"], 10.0);
}
