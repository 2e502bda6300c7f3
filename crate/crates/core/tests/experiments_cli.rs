use std::fs;
use std::path::Path;
use std::process::Command;

use maxdp::envs::default_gold_layout;
use maxdp::experiments::{aggregate, read_curves, run_experiment, run_seed, ExperimentConfig};
use maxdp::learners::UpdateRule;

const BIN: &str = env!("CARGO_BIN_EXE_maxdp");

fn fixture(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn smoke(out: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::from_file(&fixture("smoke.cfg")).unwrap();
    cfg.out_dir = Some(out.to_path_buf());
    cfg
}

#[test]
fn curves_round_trip_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let summary = run_experiment(&smoke(dir.path())).unwrap();
    let rows = read_curves(&dir.path().join("curves.csv")).unwrap();
    let want = summary.curve_rows();
    assert_eq!(rows.len(), want.len());
    for ((a, p), (b, q)) in rows.iter().zip(&want) {
        assert_eq!(a, b);
        assert_eq!(p.episode, q.episode);
        for (x, y) in [
            (p.mean_return, q.mean_return),
            (p.std_return, q.std_return),
            (p.mean_max_reward, q.mean_max_reward),
            (p.std_max_reward, q.std_max_reward),
        ] {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}

#[test]
fn seed_order_does_not_change_statistics() {
    let cfg = ExperimentConfig::from_file(&fixture("smoke.cfg")).unwrap();
    let layout = default_gold_layout();
    let runs: Vec<_> = [5u64, 1, 9, 2]
        .iter()
        .map(|&s| run_seed(&layout, &cfg, UpdateRule::MaxQ, s).unwrap())
        .collect();
    let mut reversed = runs.clone();
    reversed.reverse();
    let a = aggregate(UpdateRule::MaxQ, cfg.cadence, runs).unwrap();
    let b = aggregate(UpdateRule::MaxQ, cfg.cadence, reversed).unwrap();
    assert_eq!(a.curve, b.curve);
    assert_eq!(
        a.runs.iter().map(|r| r.seed).collect::<Vec<_>>(),
        vec![1, 2, 5, 9]
    );
}

#[test]
fn repeated_runs_write_identical_files() {
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_experiment(&smoke(d1.path())).unwrap();
    run_experiment(&smoke(d2.path())).unwrap();
    let mut names: Vec<_> = fs::read_dir(d1.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert_eq!(names.len(), 5);
    for name in names {
        assert_eq!(
            fs::read(d1.path().join(&name)).unwrap(),
            fs::read(d2.path().join(&name)).unwrap(),
            "{name:?}"
        );
    }
}

#[test]
fn thread_cap_does_not_change_results() {
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = fixture("smoke.cfg");
    for (dir, threads) in [(&d1, "1"), (&d2, "3")] {
        let out = Command::new(BIN)
            .env("MAXDP_THREADS", threads)
            .args([
                "run",
                cfg.to_str().unwrap(),
                "--out-dir",
                dir.path().to_str().unwrap(),
            ])
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    assert_eq!(
        fs::read(d1.path().join("curves.csv")).unwrap(),
        fs::read(d2.path().join("curves.csv")).unwrap()
    );
    let bad = Command::new(BIN)
        .env("MAXDP_THREADS", "zero")
        .args([
            "run",
            cfg.to_str().unwrap(),
            "--out-dir",
            d1.path().to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(!bad.status.success());
}

#[test]
fn cli_oracle_default() {
    let out = Command::new(BIN)
        .args(["oracle", "default", "--horizon", "11"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("best_cumulative_return = 27.5\n"), "{text}");
    assert!(text.contains("best_max_raw_reward = 9\n"), "{text}");
}

#[test]
fn cli_solve_chain() {
    let out = Command::new(BIN)
        .args([
            "--seed",
            "1",
            "solve",
            fixture("chain2.mdp").to_str().unwrap(),
            "--operator",
            "max-opt",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(
        text.contains("Q(s0,a0) = 1\n") && text.contains("Q(s1,a0) = 2\n"),
        "{text}"
    );

    let out = Command::new(BIN)
        .args([
            "solve",
            fixture("chain2.mdp").to_str().unwrap(),
            "--operator",
            "std-eval",
        ])
        .output()
        .unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    let q1: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("Q(s1,a0) = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((q1 - 4.0).abs() <= 1e-9, "{text}");
}

#[test]
fn cli_missing_config_fails() {
    let out = Command::new(BIN)
        .args(["run", "missing.cfg"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(
        err.contains("missing.cfg") && err.contains("No such file"),
        "{err}"
    );
}

#[test]
fn cli_rejects_unknown_flags() {
    let out = Command::new(BIN)
        .args(["oracle", "default", "--bogus"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr).unwrap().contains("Usage"));
}

#[test]
fn cli_markovize_writes_parseable_mdp() {
    let dir = tempfile::tempdir().unwrap();
    let layout = dir.path().join("small.grid");
    fs::write(&layout, "grid 1 3 0 0 2 -1\n0 4 1\n").unwrap();
    let mdp_path = dir.path().join("small.mdp");
    let out = Command::new(BIN)
        .args([
            "markovize",
            layout.to_str().unwrap(),
            "-o",
            mdp_path.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let mdp = maxdp::TabularMdp::parse(&fs::read_to_string(&mdp_path).unwrap()).unwrap();
    assert_eq!(mdp.n_states(), 12);

    let out = Command::new(BIN)
        .args(["markovize", "default", "-o", mdp_path.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
}
