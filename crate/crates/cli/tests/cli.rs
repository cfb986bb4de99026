use std::path::Path;
use std::process::{Command, Output};

fn carebn(args: &[&str], root: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_carebn"));
    cmd.args(args).env_remove("CAREBN_OUTPUT_ROOT");
    if let Some(r) = root {
        cmd.env("CAREBN_OUTPUT_ROOT", r);
    }
    cmd.output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn apg_prints_the_gain() {
    let dir = tempfile::tempdir().unwrap();
    let perf = dir.path().join("care.csv");
    let base = dir.path().join("ann.csv");
    std::fs::write(&perf, "env,return\nIDP,9348\nAnt,5373\nHalfCheetah,9563\nHopper,3586\nWalker2d,4296\n").unwrap();
    std::fs::write(&base, "env,return\nIDP,7503\nAnt,4770\nHalfCheetah,10857\nHopper,3410\nWalker2d,4340\n").unwrap();
    let o = carebn(&["apg", perf.to_str().unwrap(), base.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: f64 = String::from_utf8_lossy(&o.stdout).trim().parse().unwrap();
    assert!((v - 5.90).abs() <= 0.1);
}

#[test]
fn error_categories_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = carebn(&["frobnicate"], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error[usage]"));

    let o = carebn(&["apg", "/nonexistent/a.csv", "/nonexistent/b.csv"], None);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).starts_with("error[io]"));

    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    std::fs::write(&a, "env,return\nAnt,1\n").unwrap();
    std::fs::write(&b, "env,return\nHopper,1\n").unwrap();
    let o = carebn(&["apg", a.to_str().unwrap(), b.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(6));
    assert!(stderr(&o).starts_with("error[precondition]"));

    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "task = \"track\"\nseeds = []\noutput_dir = \"x\"\n[estimator]\nalpha = 2.0\n").unwrap();
    let o = carebn(&["run", cfg.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(3));
    let err = stderr(&o);
    assert!(err.starts_with("error[validation]"));
    assert!(err.contains("  - seeds") && err.contains("  - estimator.alpha"), "{err}");

    let ckpt = dir.path().join("ckpt.json");
    std::fs::write(&ckpt, "{not json").unwrap();
    let o = carebn(&["resume", ckpt.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(5));
    assert!(stderr(&o).starts_with("error[format]"));
}

#[test]
fn run_writes_under_output_root_and_resume_completes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("rl.toml");
    std::fs::write(
        &cfg,
        r#"
task = "rl"
seeds = [1]
output_dir = "out"
[agent]
total_steps = 200
warmup_steps = 32
batch_size = 32
eval_interval = 100
eval_episodes = 1
actor_hidden = [8]
critic_hidden = [8]
[env]
episode_len = 20
"#,
    )
    .unwrap();
    let o = carebn(&["run", cfg.to_str().unwrap()], Some(dir.path()));
    assert!(o.status.success(), "{}", stderr(&o));
    let run = dir.path().join("out/ca_re/seed1");
    let curve = std::fs::read_to_string(run.join("curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 3);
    assert!(String::from_utf8_lossy(&o.stdout).contains("ca_re: final"));

    let o = carebn(&["resume", run.join("checkpoint.json").to_str().unwrap()], None);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(run.join("curve.csv")).unwrap(), curve);
}

#[test]
fn help_exits_cleanly() {
    let o = carebn(&["--help"], None);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("resume"));
}
