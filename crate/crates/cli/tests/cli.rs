use std::path::Path;
use std::process::{Command, Output};

fn qrrt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qrrt"))
        .args(args)
        .output()
        .unwrap()
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("run.txt");
    std::fs::write(
        &path,
        "system = diffdrive\nhiddenLayers = 8\nepochs = 2\ngoalBias = 0.2\nmaxEpisodes = 3\nmaxIterations = 2000\nseeds = 1,2\n",
    )
    .unwrap();
    path.display().to_string()
}

#[test]
fn help_exits_zero() {
    let out = qrrt(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("plan"));
}

#[test]
fn bad_usage_exits_one() {
    assert_eq!(qrrt(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(qrrt(&["plan"]).status.code(), Some(1));
}

#[test]
fn config_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.txt");
    std::fs::write(&cfg, "system = diffdrive\nwarpFactor = 9\n").unwrap();
    let out = qrrt(&["plan", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("warpFactor"));

    let missing = tmp.path().join("missing.txt");
    assert_eq!(
        qrrt(&["plan", "--config", missing.to_str().unwrap()])
            .status
            .code(),
        Some(1)
    );

    let good = small_config(tmp.path());
    let out = qrrt(&["plan", "--config", &good, "--override", "eta=7"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn plan_baseline_and_compare() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let q = tmp.path().join("q");
    let b = tmp.path().join("b");
    let out = qrrt(&["plan", "--config", &cfg, "--out", q.to_str().unwrap()]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 3);
    for f in [
        "summary.csv",
        "runs.csv",
        "config.txt",
        "seed_1/episodes.csv",
        "seed_2/episodes.csv",
    ] {
        assert!(q.join(f).exists(), "{f}");
    }
    let out = qrrt(&["baseline", "--config", &cfg, "--out", b.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));

    let out = qrrt(&["compare", q.to_str().unwrap(), b.to_str().unwrap()]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.starts_with("episode,median_a,median_b,difference"));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dominates"));
}

#[test]
fn single_seed_override_and_eval_greedy() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let dir = tmp.path().join("one");
    let out = qrrt(&[
        "plan",
        "--config",
        &cfg,
        "--seed",
        "5",
        "--out",
        dir.to_str().unwrap(),
        "--override",
        "emitCheckpoints=true",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout)
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("5,"));

    let value = dir.join("value_net.txt");
    let policy = dir.join("policy_net.txt");
    let traj = tmp.path().join("rollout.csv");
    let out = qrrt(&[
        "eval-greedy",
        "--checkpoint",
        value.to_str().unwrap(),
        policy.to_str().unwrap(),
        "--config",
        &cfg,
        "--out",
        traj.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("success,steps,return"));
    assert!(std::fs::read_to_string(&traj).unwrap().starts_with("step,"));

    // Swapped checkpoints do not fit the system.
    let out = qrrt(&[
        "eval-greedy",
        "--checkpoint",
        policy.to_str().unwrap(),
        value.to_str().unwrap(),
        "--config",
        &cfg,
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn runtime_failures_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    std::fs::create_dir_all(&a).unwrap();
    std::fs::create_dir_all(&b).unwrap();
    std::fs::write(
        a.join("summary.csv"),
        "episode,runs,median,q1,q3\n0,1,-1,-1,-1\n",
    )
    .unwrap();
    std::fs::write(
        b.join("summary.csv"),
        "episode,runs,median,q1,q3\n0,1,-1,-1,-1\n1,1,-1,-1,-1\n",
    )
    .unwrap();
    let out = qrrt(&["compare", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}
