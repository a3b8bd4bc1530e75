use std::path::Path;
use std::process::{Command, Output};

use capmix::io::{read_scores, report_json, ScoreFormat};
use capmix::losses::evaluate_loss;
use capmix::mead::EvaluateOptions;
use capmix::{
    evaluate, score_record, solve_capacity, validate_channel, ClassDistribution, Loss, Role,
    ScoreRecord, SolverConfig,
};
use serde_json::Value;

fn capmix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_capmix"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_out(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("json stdout")
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect()
}

#[test]
fn capacity_in_bits() {
    let v = json_out(&capmix(&[
        "capacity",
        "--rows",
        "0.9,0.1;0.1,0.9",
        "--bits",
    ]));
    assert_eq!(v["units"], "bits");
    assert!((v["capacity"].as_f64().unwrap() - 0.531_004_406_410_719).abs() < 1e-8);
}

#[test]
fn capacity_matches_library_exactly() {
    let rows = [[0.7, 0.3], [0.2, 0.8], [0.95, 0.05]];
    let direct =
        solve_capacity(&validate_channel(&rows).unwrap(), &SolverConfig::default()).unwrap();
    let v = json_out(&capmix(&[
        "capacity",
        "--rows",
        "0.7,0.3;0.2,0.8;0.95,0.05",
    ]));
    assert_eq!(v["capacity"].as_f64().unwrap(), direct.capacity);
    assert_eq!(floats(&v["weights"]), direct.weights.as_slice());
    assert_eq!(
        v["iterations"].as_u64().unwrap() as usize,
        direct.iterations
    );
}

#[test]
fn identical_rows_have_zero_capacity() {
    let v = json_out(&capmix(&["capacity", "--rows", "0.5,0.5;0.5,0.5"]));
    assert_eq!(v["capacity"].as_f64().unwrap(), 0.0);
    assert_eq!(v["iterations"], 1);
}

#[test]
fn capacity_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("channel.txt");
    std::fs::write(&path, "# two detectors\n0.9,0.1\n0.1,0.9\n").unwrap();
    let v = json_out(&capmix(&["capacity", "--channel", path.to_str().unwrap()]));
    assert!((v["capacity"].as_f64().unwrap() - 0.368_064_207_168_497).abs() < 1e-8);
}

#[test]
fn input_errors_exit_2() {
    for args in [
        vec!["capacity", "--rows", "0.9,0.1,0.0"],
        vec!["capacity", "--rows", "0.9,0.2"],
        vec!["capacity", "--channel", "/nonexistent/channel.txt"],
        vec!["aggregate", "--scores", "0.9,1.2"],
        vec!["aggregate", "--scores", "0.9", "--gamma", "2"],
        vec!["losses", "--clean", "0.5,0.5", "--adv", "0.2,0.3"],
        vec![
            "losses", "--loss", "hinge", "--clean", "0.5,0.5", "--adv", "0.5,0.5",
        ],
        vec![
            "evaluate",
            "--scores",
            "/nonexistent/scores.csv",
            "--groups",
            "builtin",
        ],
        vec!["groups-check", "--groups", "/nonexistent/groups.toml"],
        vec!["no-such-command"],
    ] {
        let out = capmix(&args);
        assert_eq!(
            out.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn evaluate_requires_an_existing_groups_file() {
    let dir = tempfile::tempdir().unwrap();
    let scores = dir.path().join("s.csv");
    assert!(capmix(&["synth", "--out", scores.to_str().unwrap()])
        .status
        .success());
    let s = scores.to_str().unwrap();
    assert_eq!(
        capmix(&["evaluate", "--scores", s, "--groups", "/nonexistent/g.toml"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(capmix(&["evaluate", "--scores", s]).status.code(), Some(2));
}

#[test]
fn aggregate_matches_library() {
    let v = json_out(&capmix(&[
        "aggregate",
        "--scores",
        "0.9,0.2,0.3",
        "--gamma",
        "0.6",
    ]));
    let record = ScoreRecord {
        sample_id: "x".into(),
        role: Role::Natural,
        attack: None,
        fooled: false,
        scores: vec![0.9, 0.2, 0.3],
    };
    let direct = score_record(&record, &SolverConfig::default()).unwrap();
    assert_eq!(v["p_adversarial"].as_f64().unwrap(), direct.p_adversarial);
    assert_eq!(v["capacity"].as_f64().unwrap(), direct.capacity);
    assert_eq!(v["detected"], direct.p_adversarial > 0.6);
}

#[test]
fn losses_match_library() {
    let v = json_out(&capmix(&[
        "losses",
        "--clean",
        "0.7,0.2,0.1",
        "--adv",
        "0.1,0.3,0.6",
    ]));
    let clean = ClassDistribution::new(vec![0.7, 0.2, 0.1]).unwrap();
    let adv = ClassDistribution::new(vec![0.1, 0.3, 0.6]).unwrap();
    for loss in Loss::ALL {
        let direct = evaluate_loss(loss, &clean, &adv).unwrap();
        assert_eq!(v[loss.as_str()].as_f64().unwrap(), direct, "{loss}");
    }
    let one = json_out(&capmix(&[
        "losses", "--loss", "gini", "--clean", "1,0", "--adv", "0.5,0.5",
    ]));
    assert_eq!(one.as_object().unwrap().len(), 1);
}

fn synth(dir: &Path, name: &str, seed: &str) -> Vec<u8> {
    let path = dir.join(name);
    let out = capmix(&["synth", "--seed", seed, "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    std::fs::read(path).unwrap()
}

#[test]
fn synth_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = synth(dir.path(), "a.csv", "7");
    let b = synth(dir.path(), "b.csv", "7");
    let c = synth(dir.path(), "c.csv", "8");
    assert_eq!(a, b);
    assert_ne!(a, c);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("# capmix synthetic scores; seed = 7\n# prng: ChaCha8"));
}

#[test]
fn evaluate_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let scores = dir.path().join("s.jsonl");
    let report = dir.path().join("report.json");
    let roc = dir.path().join("roc");
    let out = capmix(&["synth", "--seed", "3", "--out", scores.to_str().unwrap()]);
    assert!(out.status.success());
    let out = capmix(&[
        "evaluate",
        "--scores",
        scores.to_str().unwrap(),
        "--groups",
        "builtin",
        "--out",
        report.to_str().unwrap(),
        "--roc-dump",
        roc.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.contains("Linf/0.125"));

    let records = read_scores(&scores, ScoreFormat::Jsonl).unwrap();
    let groups = capmix::io::default_groups();
    let direct = evaluate(
        &records,
        &groups,
        &SolverConfig::default(),
        &EvaluateOptions::default(),
    )
    .unwrap();
    assert_eq!(
        std::fs::read_to_string(&report).unwrap(),
        report_json(&direct)
    );

    let dumped: Vec<_> = std::fs::read_dir(&roc).unwrap().collect();
    assert_eq!(dumped.len(), 1);
}

#[test]
fn aggregate_score_file() {
    let dir = tempfile::tempdir().unwrap();
    let scores = dir.path().join("s.csv");
    std::fs::write(
        &scores,
        "sample_id,role,algorithm,loss,norm,epsilon,fooled,det_0,det_1\n\
         n1,natural,,,,,,0.1,0.2\n\
         a1,adversarial,PGDi,KL,Linf,0.125,true,0.9,0.3\n",
    )
    .unwrap();
    let out = capmix(&["aggregate", "--input", scores.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("sample_id,role,attack,fooled,p_adversarial"));
    assert!(lines[2].starts_with("a1,adversarial,PGDi-KL-Linf-0.125,true,"));
}

#[test]
fn groups_check_census() {
    let out = capmix(&["groups-check"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.trim_end().ends_with("cells: 24  variants: 134"));
}
