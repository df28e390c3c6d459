//! Exercise the binary end to end: train, eval, probe, export, resume, and
//! the exit-code contract.

use std::fs;
use std::path::Path;
use std::process::Command;

fn emrl() -> Command {
    Command::new(env!("CARGO_BIN_EXE_emrl"))
}

fn write_chain_config(dir: &Path) -> std::path::PathBuf {
    let run_dir = dir.join("run");
    let config = format!(
        r#"
[run]
seed = 2
episodes = 400
eval_every = 200
eval_episodes = 50
out_dir = "{}"
dump_trajectories = false

[task]
name = "chain_mdp"

[network]
hidden = []
recurrent = false
activation = "linear"
init_range = 0.0
train_bias = false

[learner]
kind = "q_learning"
discount = 0.96
lr_net = 0.1
q_scale = 1.0
epsilon = {{ start = 1.0, end = 0.2, decay_episodes = 200 }}
noise_sigma = {{ start = 0.0, end = 0.0, decay_episodes = 1 }}
"#,
        run_dir.display()
    );
    let path = dir.join("chain.toml");
    fs::write(&path, config).unwrap();
    path
}

#[test]
fn train_eval_export_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_chain_config(tmp.path());
    let run_dir = tmp.path().join("run");

    let out = emrl().arg("train").arg(&config).output().unwrap();
    assert!(out.status.success(), "train failed: {out:?}");
    assert!(run_dir.join("manifest.json").exists());

    let out = emrl()
        .args(["eval"])
        .arg(&run_dir)
        .args(["--episodes", "50", "--seed", "1"])
        .output()
        .unwrap();
    assert!(out.status.success(), "eval failed: {out:?}");
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("success_rate"), "unexpected output: {text}");

    let out = emrl().arg("export").arg(&run_dir).output().unwrap();
    assert!(out.status.success(), "export failed: {out:?}");
    assert!(run_dir.join("export").join("learning_curve.csv").exists());

    let out = emrl().arg("resume").arg(&run_dir).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("already complete"), "unexpected: {text}");
}

#[test]
fn probe_runs_on_a_recurrent_capture_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let run_dir = tmp.path().join("run");
    let config_text = format!(
        r#"
[run]
seed = 4
episodes = 100
eval_every = 100
eval_episodes = 10
out_dir = "{}"
dump_trajectories = false

[task]
name = "capture"

[network]
hidden = [10]
recurrent = true
init_range = 0.5

[learner]
kind = "actor_q"
discount = 0.96
lr_net = 0.05
q_scale = 0.4
epsilon = {{ start = 1.0, end = 0.2, decay_episodes = 50 }}
noise_sigma = {{ start = 0.2, end = 0.1, decay_episodes = 50 }}
"#,
        run_dir.display()
    );
    let config = tmp.path().join("capture.toml");
    fs::write(&config, config_text).unwrap();

    assert!(emrl().arg("train").arg(&config).status().unwrap().success());
    let out = emrl()
        .arg("probe")
        .arg(&run_dir)
        .args(["--episodes", "40", "--seed", "3"])
        .output()
        .unwrap();
    assert!(out.status.success(), "probe failed: {out:?}");
    assert!(run_dir.join("probe").join("probe.json").exists());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("object_y"), "unexpected: {text}");
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "[run]\nepisodes = \"many\"\n").unwrap();
    let out = emrl().arg("train").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    // Unknown key.
    let config = write_chain_config(tmp.path());
    let text = fs::read_to_string(&config).unwrap().replace("lr_net", "lr_nett");
    fs::write(&bad, text).unwrap();
    let out = emrl().arg("train").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    let out = emrl()
        .arg("eval")
        .arg(tmp.path().join("nonexistent"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}
