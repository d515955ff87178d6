//! End-to-end tests of the `canalrl` binary: exit codes, determinism of
//! produced files, configuration precedence, and the demo/train/eval/report
//! pipeline on a tiny budget.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn binary() -> &'static str {
    env!("CARGO_BIN_EXE_canalrl")
}

fn run(args: &[&str]) -> Output {
    Command::new(binary())
        .args(args)
        .output()
        .expect("failed to launch canalrl")
}

fn run_in(dir: &Path, args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(binary());
    cmd.current_dir(dir).args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("failed to launch canalrl")
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("canalrl-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn usage_errors_exit_with_code_two() {
    let out = run(&["demo", "--episodes", "0", "--out", "/tmp/unused.txt"]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["demo"]); // missing --out
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn demo_files_are_deterministic_per_seed() {
    let dir = temp_dir("demo-det");
    let a = dir.join("a.txt");
    let b = dir.join("b.txt");
    let c = dir.join("c.txt");
    assert!(run(&["demo", "--episodes", "2", "--out", a.to_str().unwrap()])
        .status
        .success());
    assert!(run(&["demo", "--episodes", "2", "--out", b.to_str().unwrap()])
        .status
        .success());
    assert!(run(&[
        "--seed",
        "7",
        "demo",
        "--episodes",
        "2",
        "--out",
        c.to_str().unwrap()
    ])
    .status
    .success());
    let bytes_a = std::fs::read(&a).unwrap();
    assert_eq!(bytes_a, std::fs::read(&b).unwrap());
    assert_ne!(bytes_a, std::fs::read(&c).unwrap());
}

#[test]
fn config_precedence_flags_over_file_over_defaults() {
    let dir = temp_dir("precedence");
    let config = dir.join("run.cfg");
    std::fs::write(&config, "seed = 5\n").unwrap();

    let default_out = dir.join("default.txt");
    let file_out = dir.join("file.txt");
    let flag_only_out = dir.join("flag_only.txt");
    let flag_over_file_out = dir.join("flag_over_file.txt");

    // Layer 1: built-in default (seed 0).
    assert!(run(&["demo", "--episodes", "2", "--out", default_out.to_str().unwrap()])
        .status
        .success());
    // Layer 2: file overrides default.
    assert!(run(&[
        "--config",
        config.to_str().unwrap(),
        "demo",
        "--episodes",
        "2",
        "--out",
        file_out.to_str().unwrap()
    ])
    .status
    .success());
    // Layer 3: flag overrides file.
    assert!(run(&[
        "--config",
        config.to_str().unwrap(),
        "--seed",
        "9",
        "demo",
        "--episodes",
        "2",
        "--out",
        flag_over_file_out.to_str().unwrap()
    ])
    .status
    .success());
    assert!(run(&[
        "--seed",
        "9",
        "demo",
        "--episodes",
        "2",
        "--out",
        flag_only_out.to_str().unwrap()
    ])
    .status
    .success());

    let default_bytes = std::fs::read(&default_out).unwrap();
    let file_bytes = std::fs::read(&file_out).unwrap();
    let flag_over_file = std::fs::read(&flag_over_file_out).unwrap();
    let flag_only = std::fs::read(&flag_only_out).unwrap();

    assert_ne!(default_bytes, file_bytes, "file seed must take effect");
    assert_ne!(file_bytes, flag_over_file, "flag must beat the file");
    assert_eq!(flag_over_file, flag_only, "flag value must match flag-only run");
}

#[test]
fn unknown_config_key_is_a_runtime_failure_with_line() {
    let dir = temp_dir("badcfg");
    let config = dir.join("bad.cfg");
    std::fs::write(&config, "# fine\nnot.a.key = 1\n").unwrap();
    let out = run(&[
        "--config",
        config.to_str().unwrap(),
        "demo",
        "--episodes",
        "1",
        "--out",
        dir.join("x.txt").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 2"), "stderr: {stderr}");
}

/// The full pipeline on a tiny budget: demo -> train -> eval -> report.
#[test]
fn pipeline_demo_train_eval_report() {
    let dir = temp_dir("pipeline");
    let config = dir.join("run.cfg");
    std::fs::write(
        &config,
        "sac.pretrain_updates = 40\nsac.batch_size = 64\nsac.episodes = 1\nexpert.demo_episodes = 10\n",
    )
    .unwrap();
    let demos = dir.join("demos.txt");
    let ckpt = dir.join("agent.ckpt");
    let log = dir.join("rewards.tsv");
    let agent_report = dir.join("agent.tsv");
    let oracle_report = dir.join("oracle.tsv");
    let table = dir.join("table.tsv");
    let traces = dir.join("traces.tsv");

    let out = run(&[
        "--config",
        config.to_str().unwrap(),
        "demo",
        "--out",
        demos.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("success rate"), "stdout: {stdout}");

    let out = run(&[
        "--config",
        config.to_str().unwrap(),
        "train",
        "--demos",
        demos.to_str().unwrap(),
        "--out",
        ckpt.to_str().unwrap(),
        "--log",
        log.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    // Reward log: one line per episode, four tab-separated fields.
    let log_text = std::fs::read_to_string(&log).unwrap();
    let lines: Vec<&str> = log_text.lines().collect();
    assert_eq!(lines.len(), 1);
    assert_eq!(lines[0].split('\t').count(), 4);

    let out = run(&[
        "--config",
        config.to_str().unwrap(),
        "eval",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--episodes",
        "4",
        "--out",
        agent_report.to_str().unwrap(),
        "--traces",
        traces.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(traces.exists());

    let out = run(&[
        "--config",
        config.to_str().unwrap(),
        "eval",
        "--oracle",
        "--episodes",
        "4",
        "--out",
        oracle_report.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out = run(&[
        "report",
        "--runs",
        agent_report.to_str().unwrap(),
        oracle_report.to_str().unwrap(),
        "--out",
        table.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table_text = std::fs::read_to_string(&table).unwrap();
    let header = table_text.lines().next().unwrap();
    assert_eq!(header, "metric\tstat\tagent\toracle");
    assert!(table_text.lines().any(|l| l.starts_with("t_e\tmedian")));
    assert!(table_text.lines().any(|l| l.starts_with("success_rate")));
}

#[test]
fn train_refuses_demos_from_other_configuration() {
    let dir = temp_dir("hash-mismatch");
    let demos = dir.join("demos.txt");
    assert!(run(&["demo", "--episodes", "3", "--out", demos.to_str().unwrap()])
        .status
        .success());
    // Different anatomy: the stored hash no longer matches.
    let config = dir.join("other.cfg");
    std::fs::write(&config, "anatomy.flexion_angle_deg = 125\n").unwrap();
    let out = run(&[
        "--config",
        config.to_str().unwrap(),
        "train",
        "--demos",
        demos.to_str().unwrap(),
        "--out",
        dir.join("x.ckpt").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("different configuration") || stderr.contains("does not replay"),
        "stderr: {stderr}"
    );
}

#[test]
fn eval_requires_checkpoint_or_oracle() {
    let out = run(&["eval", "--episodes", "1", "--out", "/tmp/unused.tsv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn log_dir_env_var_overrides_config() {
    let dir = temp_dir("envvar");
    let logs = dir.join("env-logs");
    let config = dir.join("run.cfg");
    std::fs::write(
        &config,
        "sac.pretrain_updates = 5\nsac.batch_size = 32\nsac.episodes = 0\nexpert.demo_episodes = 3\n",
    )
    .unwrap();
    let demos = dir.join("demos.txt");
    assert!(run_in(
        &dir,
        &[
            "--config",
            config.to_str().unwrap(),
            "demo",
            "--out",
            demos.to_str().unwrap()
        ],
        &[]
    )
    .status
    .success());
    let out = run_in(
        &dir,
        &[
            "--config",
            config.to_str().unwrap(),
            "train",
            "--demos",
            demos.to_str().unwrap(),
            "--out",
            dir.join("a.ckpt").to_str().unwrap(),
        ],
        &[("CANALRL_LOG_DIR", logs.to_str().unwrap())],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(logs.join("reward_log.tsv").exists());
}

#[test]
fn checkpoints_round_trip_bitwise_through_the_cli() {
    let dir = temp_dir("ckpt-roundtrip");
    let config = dir.join("run.cfg");
    std::fs::write(
        &config,
        "sac.pretrain_updates = 5\nsac.batch_size = 32\nsac.episodes = 0\nexpert.demo_episodes = 3\n",
    )
    .unwrap();
    let demos = dir.join("demos.txt");
    let ckpt_a = dir.join("a.ckpt");
    let ckpt_b = dir.join("b.ckpt");
    assert!(run(&[
        "--config",
        config.to_str().unwrap(),
        "demo",
        "--out",
        demos.to_str().unwrap()
    ])
    .status
    .success());
    for out in [&ckpt_a, &ckpt_b] {
        assert!(run(&[
            "--config",
            config.to_str().unwrap(),
            "train",
            "--demos",
            demos.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--log",
            dir.join("log.tsv").to_str().unwrap(),
        ])
        .status
        .success());
    }
    assert_eq!(
        std::fs::read(&ckpt_a).unwrap(),
        std::fs::read(&ckpt_b).unwrap(),
        "identical training runs must serialize identically"
    );
}
