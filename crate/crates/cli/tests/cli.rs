use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lcf_lab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lcf-lab"))
        .args(args)
        .current_dir(dir)
        .env("LCF_LAB_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn generate_fit_train_evaluate_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(&lcf_lab(
        &[
            "gen",
            "--preset",
            "linear-d10",
            "--n",
            "300",
            "--seed",
            "3",
            "--out",
            "data.csv",
            "--scm-out",
            "truth.toml",
        ],
        dir,
    ));
    assert!(dir.join("data.csv.meta.toml").exists());
    ok(&lcf_lab(
        &[
            "fit-scm",
            "--data",
            "data.csv",
            "--family",
            "linear-additive",
            "--out",
            "fitted.toml",
        ],
        dir,
    ));
    ok(&lcf_lab(
        &[
            "train",
            "--data",
            "data.csv",
            "--scm",
            "truth.toml",
            "--method",
            "lcf",
            "--m",
            "20",
            "--out",
            "ours",
        ],
        dir,
    ));
    let model = fs::read_to_string(dir.join("ours/model.toml")).unwrap();
    assert!(model.contains("lcf-quadratic"), "{model}");
    assert!(fs::read_to_string(dir.join("ours/manifest.toml"))
        .unwrap()
        .contains("config_hash"));
    ok(&lcf_lab(
        &[
            "evaluate",
            "--data",
            "data.csv",
            "--scm",
            "truth.toml",
            "--model",
            "ours/model.toml",
            "--m",
            "20",
            "--label",
            "Ours",
            "--out",
            "eval",
        ],
        dir,
    ));
    let csv = fs::read_to_string(dir.join("eval/report.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("method,mse,afce,uir,n,m,seed,eta,p1"));
    let cells: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(cells[0], "Ours");
    assert!(cells[2].parse::<f64>().unwrap() <= 1e-6);
    ok(&lcf_lab(
        &[
            "simulate",
            "--data",
            "data.csv",
            "--scm",
            "truth.toml",
            "--model",
            "ours/model.toml",
            "--m",
            "5",
            "--out",
            "sim.csv",
        ],
        dir,
    ));
    assert_eq!(
        fs::read_to_string(dir.join("sim.csv"))
            .unwrap()
            .lines()
            .count(),
        1 + 300 * 5
    );
}

#[test]
fn run_writes_identical_artifacts_and_reports_checks() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(
        dir.join("run.toml"),
        "experiment = \"table6\"\nseeds = [0, 1]\nn = 200\nm = 10\n",
    )
    .unwrap();
    ok(&lcf_lab(
        &[
            "run",
            "--config",
            "run.toml",
            "--out",
            "a",
            "--parallel-seeds",
        ],
        dir,
    ));
    ok(&lcf_lab(
        &["run", "--config", "run.toml", "--out", "b"],
        dir,
    ));
    for file in [
        "manifest.toml",
        "aggregate.csv",
        "checks.txt",
        "seed_1/reports.csv",
        "seed_0/model_Ours.toml",
    ] {
        let a = fs::read(dir.join("a").join(file)).unwrap();
        let b = fs::read(dir.join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs");
    }
    let checks = fs::read_to_string(dir.join("a/checks.txt")).unwrap();
    assert!(
        checks.lines().count() == 2 && checks.lines().all(|l| l.starts_with("PASS")),
        "{checks}"
    );
}

#[test]
fn bad_inputs_fail_with_a_diagnostic() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let missing = lcf_lab(&["run", "--config", "absent.toml", "--out", "x"], dir);
    assert_eq!(missing.status.code(), Some(1));
    assert!(!missing.stderr.is_empty());

    fs::write(
        dir.join("typo.toml"),
        "experiment = \"table1\"\nseedz = [0]\n",
    )
    .unwrap();
    let typo = lcf_lab(&["run", "--config", "typo.toml", "--out", "x"], dir);
    assert_eq!(typo.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&typo.stderr).contains("seedz"));

    let p1 = lcf_lab(&["run", "--p1", "relaxed:abc", "--out", "x"], dir);
    assert_eq!(p1.status.code(), Some(1));
}
