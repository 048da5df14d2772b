use std::process::Command;

use exo_gateway::cli::run;
use serde_json::Value;

fn exo(args: &[&str]) -> anyhow::Result<String> {
    let mut out = Vec::new();
    let argv = std::iter::once("exo").chain(args.iter().copied());
    run(argv, &mut out)?;
    Ok(String::from_utf8(out).unwrap())
}

fn exo_json(args: &[&str]) -> Value {
    let mut v = vec!["--json"];
    v.extend_from_slice(args);
    serde_json::from_str(&exo(&v).unwrap()).unwrap()
}

#[test]
fn pam_characterize_emits_eight_decreasing_curves() {
    let csv = exo(&["pam", "characterize", "--points", "20"]).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("pressure_psi,contraction_mm,force_n"));
    let mut curves: Vec<(f64, Vec<f64>)> = Vec::new();
    for line in lines {
        let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        match curves.last_mut() {
            Some((p, fs)) if *p == cols[0] => fs.push(cols[2]),
            _ => curves.push((cols[0], vec![cols[2]])),
        }
    }
    let pressures: Vec<f64> = curves.iter().map(|c| c.0).collect();
    assert_eq!(pressures, [10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0]);
    for (_, fs) in &curves {
        assert_eq!(fs.len(), 20);
        assert!(fs.windows(2).all(|w| w[1] <= w[0]));
    }
}

#[test]
fn pam_characterize_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pam.csv");
    exo(&["pam", "characterize", "--out", path.to_str().unwrap()]).unwrap();
    let text = std::fs::read_to_string(path).unwrap();
    assert_eq!(text.lines().count(), 1 + 8 * 50);
}

#[test]
fn fsm_table_is_total() {
    let rows = exo_json(&["fsm", "table"]);
    let rows = rows.as_array().unwrap();
    assert!(!rows.is_empty());
    let csv = exo(&["fsm", "table"]).unwrap();
    assert_eq!(csv.lines().count(), rows.len() + 1);
}

#[test]
fn compare_reports_a_ratio() {
    let r = exo_json(&["compare", "--motion", "elbow_flexion", "--reps", "2"]);
    let ratio = r["ratio"].as_f64().unwrap();
    assert!(ratio > 1.0, "{r}");
    let z = exo_json(&["compare", "--motion", "elbow_flexion", "--reps", "2", "--zero-assist"]);
    assert!((z["ratio"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!(exo(&["compare", "--motion", "elbow_extension"]).is_err());
    assert!(exo(&["compare", "--motion", "wave"]).is_err());
}

#[test]
fn scenario_run_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    let summary = exo_json(&["scenario", "run", "--name", "motion1", "--out", a.to_str().unwrap()]);
    exo(&["scenario", "run", "--name", "motion1", "--out", b.to_str().unwrap()]).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let states: Vec<&str> = summary["states"].as_array().unwrap().iter().map(|s| s.as_str().unwrap()).collect();
    assert!(states.contains(&"ElbowFlexAssist"), "{states:?}");
    assert!(summary["latency"]["total"]["mean"].as_f64().is_some());

    let c = dir.path().join("c.jsonl");
    exo(&["--seed", "7", "scenario", "run", "--name", "motion1", "--out", c.to_str().unwrap()]).unwrap();
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
    assert!(exo(&["scenario", "run", "--name", "nope"]).is_err());
}

#[test]
fn latency_subcommand_summarizes() {
    let r = exo_json(&["latency", "--trials", "4"]);
    assert_eq!(r["samples"].as_array().unwrap().len(), 4);
    assert_eq!(r["unmatched"].as_u64(), Some(0));
}

#[test]
fn dataset_train_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let ck = dir.path().join("ck.json");
    let gen = exo_json(&["dataset", "gen", "--out", data.to_str().unwrap(), "--reps", "5"]);
    assert_eq!(gen["repetitions"].as_u64(), Some(20));
    let train = exo_json(&[
        "train",
        "--dataset",
        data.to_str().unwrap(),
        "--out",
        ck.to_str().unwrap(),
        "--epochs",
        "1",
        "--muscles",
        "biceps,triceps",
    ]);
    assert_eq!(train["runs"].as_array().unwrap().len(), 2);
    assert!(ck.exists());
    let eval = exo_json(&["eval", "--checkpoint", ck.to_str().unwrap(), "--test", data.to_str().unwrap()]);
    let pairs = eval["per_pair"].as_array().unwrap();
    assert_eq!(pairs.len(), 1);
    assert_eq!(pairs[0]["pair"], "biceps_triceps");
    let acc = pairs[0]["accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));
    assert!(eval["reference_pair_accuracy"]["biceps_triceps"].as_f64().is_some());
    assert!(exo(&["train", "--out", ck.to_str().unwrap(), "--muscles", "pinky"]).is_err());
}

#[test]
fn config_file_unknown_fields_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    std::fs::write(&path, r#"{"plant":{"nonsense":1}}"#).unwrap();
    assert!(exo(&["--config", path.to_str().unwrap(), "fsm", "table"]).is_err());
}

#[test]
fn binary_rejects_unknown_subcommand() {
    let out = Command::new(env!("CARGO_BIN_EXE_exo")).arg("frobnicate").output().unwrap();
    assert!(!out.status.success());
    assert!(!out.stderr.is_empty());
    let help = Command::new(env!("CARGO_BIN_EXE_exo")).arg("--help").output().unwrap();
    assert!(help.status.success());
    let text = String::from_utf8_lossy(&help.stdout);
    for sub in ["dataset", "train", "eval", "pam", "scenario", "compare", "serve"] {
        assert!(text.contains(sub), "{sub} missing from help");
    }
}
