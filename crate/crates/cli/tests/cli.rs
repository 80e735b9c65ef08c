use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tlearn::data::to_csv_string;
use tlearn::simulation::{sample_dgp, DgpSpec};
use tlearn::OutcomeKind;

fn tlearn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tlearn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_dgp_csv(dir: &Path, name: &str, spec: &DgpSpec, n: usize, seed: u64) -> PathBuf {
    let ds = sample_dgp(spec, n, seed).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, to_csv_string(&ds)).unwrap();
    path
}

fn spec(g: (f64, f64), kind: OutcomeKind) -> DgpSpec {
    DgpSpec::new("t", (0.0, 10.0), vec![0.2, 0.05], vec![0.3], g, 1.0, kind).unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn estimate_ate_writes_every_report_field() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_dgp_csv(dir.path(), "d.csv", &spec((-1.0, 0.2), OutcomeKind::Continuous), 200, 1);
    let out = dir.path().join("r.json");
    let o = tlearn(&[
        "estimate",
        "--data",
        data.to_str().unwrap(),
        "--schema",
        "w1",
        "--treatment",
        "A",
        "--outcome",
        "Y",
        "--estimand",
        "ate",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("psi") && stdout.contains("CI"));
    let v = read_json(&out);
    for key in [
        "estimand",
        "method",
        "psi",
        "se",
        "ci_lower",
        "ci_upper",
        "level",
        "n",
        "variance_mode",
        "eic_mean",
        "eic_var",
        "g_min",
        "g_max",
        "g_truncated_count",
        "seed",
        "version",
        "config",
        "input_sha256",
    ] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["estimand"], "ate");
    assert_eq!(v["seed"], 1);
    assert!(v["eic_mean"].as_f64().unwrap().abs() < 1e-8);
}

#[test]
fn missing_data_is_a_usage_error() {
    let o = tlearn(&["estimate", "--schema", "w1", "--estimand", "ate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
    let o = tlearn(&["estimate", "--bogus-flag"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn parse_failures_exit_two_and_single_arm_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "w1,A,Y\n1,2,3\n").unwrap();
    let o = tlearn(&[
        "estimate",
        "--data",
        bad.to_str().unwrap(),
        "--schema",
        "w1",
        "--estimand",
        "ate",
    ]);
    assert_eq!(o.status.code(), Some(2));

    let one_arm = dir.path().join("one.csv");
    std::fs::write(&one_arm, "w1,A,Y\n1,1,3\n2,1,4\n3,1,2\n4,1,8\n").unwrap();
    let out = dir.path().join("x.json");
    let o = tlearn(&[
        "estimate",
        "--data",
        one_arm.to_str().unwrap(),
        "--schema",
        "w1",
        "--estimand",
        "ate",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn par_on_binary_outcome_is_bounded() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_dgp_csv(dir.path(), "b.csv", &spec((-1.0, 0.2), OutcomeKind::Binary), 300, 4);
    let out = dir.path().join("p.json");
    let o = tlearn(&[
        "estimate",
        "--data",
        data.to_str().unwrap(),
        "--schema",
        "w1",
        "--estimand",
        "par",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = read_json(&out);
    assert_eq!(v["estimand"], "par");
    let psi = v["psi"].as_f64().unwrap();
    assert!((-1.0..=1.0).contains(&psi));
}

#[test]
fn config_file_values_are_echoed_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_dgp_csv(dir.path(), "d.csv", &spec((0.0, 0.0), OutcomeKind::Continuous), 120, 2);
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        "seed = 5\nq_roster = mean, ols\ng_roster = mean\nestimand = mean\n",
    )
    .unwrap();
    let out = dir.path().join("r.json");
    let o = tlearn(&[
        "estimate",
        "--config",
        cfg.to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--schema",
        "w1",
        "--estimand",
        "ate",
        "--seed",
        "9",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = read_json(&out);
    assert_eq!(v["seed"], 9);
    assert_eq!(v["config"]["estimand"], "ate");
    assert_eq!(v["config"]["q_roster"], serde_json::json!(["mean", "ols"]));

    std::fs::write(&cfg, "colour = blue\n").unwrap();
    let o = tlearn(&["estimate", "--config", cfg.to_str().unwrap(), "--estimand", "ate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn estimate_reports_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_dgp_csv(dir.path(), "d.csv", &spec((-1.0, 0.2), OutcomeKind::Continuous), 150, 8);
    let out = dir.path().join("r.json");
    let run = |threads: &str| {
        let o = tlearn(&[
            "estimate",
            "--data",
            data.to_str().unwrap(),
            "--schema",
            "w1",
            "--estimand",
            "optimal-rule",
            "--threads",
            threads,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(&out).unwrap()
    };
    let a = run("1");
    assert_eq!(a, run("3"));
}

#[test]
fn diagnose_randomized_versus_deterministic_assignment() {
    let dir = tempfile::tempdir().unwrap();
    let rct = write_dgp_csv(
        dir.path(),
        "rct.csv",
        &spec((0.0, 0.0), OutcomeKind::Continuous),
        400,
        3,
    );
    let out = dir.path().join("rct.json");
    let o = tlearn(&[
        "diagnose",
        "--data",
        rct.to_str().unwrap(),
        "--schema",
        "w1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v = read_json(&out);
    let shares = v["positivity"]["share_below"].as_array().unwrap();
    let at = |d: f64| {
        shares.iter().find(|s| s["delta"] == d).unwrap()["share_below"]
            .as_f64()
            .unwrap()
    };
    assert_eq!(at(0.01), 0.0);
    assert!(!String::from_utf8_lossy(&o.stderr).contains("warning"));

    // A = 1{w > 5}, written directly
    let det = dir.path().join("det.csv");
    let mut text = String::from("w1,A,Y\n");
    for i in 0..400 {
        let w = 10.0 * (i as f64 + 0.5) / 400.0;
        text.push_str(&format!("{w},{},{}\n", u8::from(w > 5.0), 0.1 * w));
    }
    std::fs::write(&det, text).unwrap();
    let out = dir.path().join("det.json");
    let o = tlearn(&[
        "diagnose",
        "--data",
        det.to_str().unwrap(),
        "--schema",
        "w1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
    let v = read_json(&out);
    let shares = v["positivity"]["share_below"].as_array().unwrap();
    let s05 = shares.iter().find(|s| s["delta"] == 0.05).unwrap()["share_below"]
        .as_f64()
        .unwrap();
    assert!(s05 > 0.5, "share below 0.05 = {s05}");

    let out = dir.path().join("zero.json");
    let o = tlearn(&[
        "diagnose",
        "--data",
        det.to_str().unwrap(),
        "--schema",
        "w1",
        "--delta",
        "0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v = read_json(&out);
    let shares = v["positivity"]["share_below"].as_array().unwrap();
    assert_eq!(shares.iter().find(|s| s["delta"] == 0.0).unwrap()["share_below"], 0.0);
}

#[test]
fn cv_report_examples() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("lin.csv");
    let mut text = String::from("w1,A,Y\n");
    for i in 0..60 {
        let w = i as f64 / 6.0;
        text.push_str(&format!("{w},{},{}\n", i % 2, 1.0 + 2.0 * w));
    }
    std::fs::write(&data, text).unwrap();
    let out = dir.path().join("cv.json");
    let o = tlearn(&[
        "cv-report",
        "--data",
        data.to_str().unwrap(),
        "--schema",
        "w1",
        "--target",
        "outcome",
        "--q-roster",
        "mean,ols",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = read_json(&out);
    assert_eq!(v["discrete_winner"], "ols");
    let sum: f64 = v["weights"]
        .as_array()
        .unwrap()
        .iter()
        .map(|w| w.as_f64().unwrap())
        .sum();
    assert!((sum - 1.0).abs() < 1e-9);

    let o = tlearn(&[
        "cv-report",
        "--data",
        data.to_str().unwrap(),
        "--schema",
        "w1",
        "--target",
        "propensity",
        "--g-roster",
        "logistic",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v = read_json(&out);
    assert_eq!(v["discrete_winner"], "logistic:linear");
    assert_eq!(v["weights"], serde_json::json!([1.0]));

    let o = tlearn(&[
        "cv-report",
        "--data",
        data.to_str().unwrap(),
        "--schema",
        "w1",
        "--target",
        "nonsense",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_single_rep_and_repeatability() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    let read_all = || ["mc_result.csv", "metrics.json", "truth.json"].map(|f| std::fs::read(out.join(f)).unwrap());
    let run = || {
        let o = tlearn(&[
            "simulate",
            "--dgp",
            "fig1",
            "--n",
            "80",
            "--reps",
            "1",
            "--estimators",
            "glm,sl,tmle",
            "--seed",
            "3",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    };
    run();
    let first = read_all();
    let csv = String::from_utf8(first[0].clone()).unwrap();
    assert_eq!(csv.lines().count(), 4);
    run();
    assert_eq!(first, read_all());
    let truth = read_json(&out.join("truth.json"));
    assert_eq!(truth["truths"][0]["psi0"], 0.0);

    let o = tlearn(&["simulate", "--dgp", "fig9", "--n", "10", "--reps", "1", "--out", "x"]);
    assert_eq!(o.status.code(), Some(2));
    let o = tlearn(&[
        "simulate",
        "--dgp",
        "fig1",
        "--n",
        "10",
        "--reps",
        "1",
        "--estimators",
        "magic",
        "--out",
        "x",
    ]);
    assert_eq!(o.status.code(), Some(2));
}
