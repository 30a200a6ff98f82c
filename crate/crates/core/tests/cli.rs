//! End-to-end tests of the `groupwork` binary: exit codes, output formats
//! and cross-command consistency.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn binary() -> &'static str {
    env!("CARGO_BIN_EXE_groupwork")
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn run(args: &[&str]) -> Output {
    Command::new(binary())
        .args(args)
        .output()
        .expect("spawn groupwork")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).to_string()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).to_string()
}

fn fixture_args() -> Vec<String> {
    vec![
        "--records".to_string(),
        fixtures().join("records.csv").display().to_string(),
        "--ratings".to_string(),
        fixtures().join("ratings.csv").display().to_string(),
    ]
}

fn run_with_fixture(front: &[&str], back: &[&str]) -> Output {
    let mut args: Vec<String> = front.iter().map(|s| s.to_string()).collect();
    args.extend(fixture_args());
    args.extend(back.iter().map(|s| s.to_string()));
    Command::new(binary())
        .args(args)
        .output()
        .expect("spawn groupwork")
}

#[test]
fn describe_reports_fixture_shape() {
    let out = run_with_fixture(&["describe"], &[]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("records: 87"), "{text}");
    assert!(
        text.contains("2 members: 11, 3 members: 15, 4 members: 5"),
        "{text}"
    );

    let out = run_with_fixture(&["describe"], &["--json"]);
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(json["n_records"], 87);
    assert_eq!(json["n_groups"], 31);
}

#[test]
fn describe_missing_file_is_a_data_error() {
    let out = run(&[
        "describe",
        "--records",
        "/nonexistent/r.csv",
        "--ratings",
        "/nonexistent/s.csv",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("file not found"), "{}", stderr(&out));
}

#[test]
fn fit_null_and_full_tables() {
    let out = run_with_fixture(&["fit"], &["--response", "observed_contribution", "--null"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("(intercept)"));
    assert!(text.contains("level 2 (between groups)"));
    assert!(text.contains("variance shares"));

    let out = run_with_fixture(
        &["fit"],
        &[
            "--response",
            "learning_outcome",
            "--predictors",
            "content_engaging",
            "--json",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(json["fixed"][1]["name"], "content_engaging");
    assert!(json["comparison"]["p_value"].is_number());
    assert!(json["random"]["level2"]["variance"].is_number());
}

#[test]
fn fit_usage_errors() {
    // the response cannot be its own predictor
    let out = run_with_fixture(
        &["fit"],
        &[
            "--response",
            "observed_contribution",
            "--predictors",
            "observed_contribution",
        ],
    );
    assert_eq!(out.status.code(), Some(1));

    // unknown columns are listed
    let out = run_with_fixture(&["fit"], &["--response", "nope", "--null"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("valid columns"), "{}", stderr(&out));

    // --null and --predictors conflict
    let out = run_with_fixture(
        &["fit"],
        &[
            "--response",
            "learning_outcome",
            "--predictors",
            "background",
            "--null",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn game_core_on_majority_fixture_is_empty() {
    let path = fixtures().join("majority3.json");
    let out = run(&["game", "--game-file", path.to_str().unwrap(), "core"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(json["core"], "empty");
}

#[test]
fn game_shapley_contribution_dyad() {
    let dir = tempfile::tempdir().unwrap();
    let records = dir.path().join("records.csv");
    let ratings = dir.path().join("ratings.csv");
    std::fs::write(&records, "\
student_id,team_id,session_id,personality_type,learning_style,content_engaging,background,fits_needs,observed_contribution,peer_contribution_score,opinion_before,post_quiz,group_grade
a,t1,s1,INTJ,activist,4,3,3,2.0,3.0,3,4.0,4.0
b,t1,s1,ENFP,reflector,4,3,3,4.0,3.0,3,4.0,4.0
").unwrap();
    std::fs::write(
        &ratings,
        "session_id,rater_id,ratee_id,score\ns1,a,b,4.0\ns1,b,a,3.0\n",
    )
    .unwrap();
    let out = run(&[
        "game",
        "--records",
        records.to_str().unwrap(),
        "--ratings",
        ratings.to_str().unwrap(),
        "--mode",
        "contribution",
        "shapley",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!((json["shapley"]["a"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert!((json["shapley"]["b"].as_f64().unwrap() - 2.5).abs() < 1e-12);
}

#[test]
fn game_report_streams_every_team() {
    let out = run_with_fixture(&["game"], &["--mode", "opinion", "report"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 31);
    for line in lines {
        let json: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(json["core_empty"].is_boolean());
        assert!(json["grand_coalition_gain"].is_number());
    }
}

#[test]
fn game_build_single_round_trips_through_game_file() {
    // one selected team prints the pure exchange format
    let out = run_with_fixture(
        &["game"],
        &["--mode", "contribution", "--team", "t01", "build"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("game.json");
    std::fs::write(&path, stdout(&out)).unwrap();
    let again = run(&["game", "--game-file", path.to_str().unwrap(), "shapley"]);
    assert_eq!(again.status.code(), Some(0), "{}", stderr(&again));
    let json: serde_json::Value = serde_json::from_str(&stdout(&again)).unwrap();
    assert!(json["shapley"]["1"].is_number());

    // streams over all teams carry group metadata
    let out = run_with_fixture(&["game"], &["--mode", "contribution", "build"]);
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 31);
    let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert!(first["group"].is_string());
    assert!(first["game"]["values"].is_object());
}

#[test]
fn game_unknown_team_is_a_data_error() {
    let out = run_with_fixture(&["game"], &["--mode", "opinion", "--team", "zz", "report"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr(&out).contains("unknown team id 'zz'"),
        "{}",
        stderr(&out)
    );

    let out = run_with_fixture(&["game"], &["--mode", "sideways", "report"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn pipeline_writes_reproducible_reports_matching_single_commands() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    for dir in [&dir_a, &dir_b] {
        let out = run_with_fixture(
            &["pipeline"],
            &["--out", dir.path().to_str().unwrap(), "--seed", "13"],
        );
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    }
    let report_a = std::fs::read(dir_a.path().join("report.json")).unwrap();
    let report_b = std::fs::read(dir_b.path().join("report.json")).unwrap();
    assert_eq!(report_a, report_b);
    for table in [
        "table1_descriptives.csv",
        "table8_shapley_model.csv",
        "shapley.csv",
    ] {
        assert!(dir_a.path().join(table).exists(), "missing {table}");
    }

    // the pipeline's table sections equal the standalone commands' output
    let report: serde_json::Value = serde_json::from_slice(&report_a).unwrap();
    let fit_out = run_with_fixture(
        &["fit"],
        &["--response", "observed_contribution", "--null", "--json"],
    );
    let fit_json: serde_json::Value = serde_json::from_str(&stdout(&fit_out)).unwrap();
    assert_eq!(report["table2_null_contribution"], fit_json);

    let describe_out = run_with_fixture(&["describe"], &["--json"]);
    let describe_json: serde_json::Value = serde_json::from_str(&stdout(&describe_out)).unwrap();
    assert_eq!(report["table1_descriptives"], describe_json);
}

#[test]
fn pipeline_stepwise_flag_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_with_fixture(
        &["pipeline"],
        &[
            "--out",
            dir.path().to_str().unwrap(),
            "--stepwise",
            "--alpha",
            "0.01",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["alpha"], 0.01);
    assert_eq!(report["config"]["stepwise"], true);
}

#[test]
fn synth_reproduces_the_bundled_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let config = fixtures().join("study_shape.conf");
    let out = run(&[
        "synth",
        "--config",
        config.to_str().unwrap(),
        "--seed",
        "13",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("censored"));
    let generated = std::fs::read(dir.path().join("records.csv")).unwrap();
    let committed = std::fs::read(fixtures().join("records.csv")).unwrap();
    assert_eq!(
        generated, committed,
        "bundled fixture must equal a seed-13 regeneration"
    );
    let generated = std::fs::read(dir.path().join("ratings.csv")).unwrap();
    let committed = std::fs::read(fixtures().join("ratings.csv")).unwrap();
    assert_eq!(generated, committed);
}

#[test]
fn synth_rejects_bad_configs_by_key() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.conf");
    let mut base = std::fs::read_to_string(fixtures().join("study_shape.conf")).unwrap();
    base.push_str("whatever = 1\n");
    std::fs::write(&config, base).unwrap();
    let out = run(&[
        "synth",
        "--config",
        config.to_str().unwrap(),
        "--seed",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("whatever"), "{}", stderr(&out));
}

#[test]
fn summarize_emits_the_documented_csv() {
    let out = run_with_fixture(
        &["summarize"],
        &[
            "--by",
            "learning_style",
            "--variable",
            "observed_contribution",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("group,level,count,min,q1,median,q3,max"));
    let rows: Vec<&str> = lines.collect();
    assert!(rows.len() <= 4 && !rows.is_empty(), "{rows:?}");

    let out = run_with_fixture(
        &["summarize"],
        &["--by", "shoe_size", "--variable", "post_quiz"],
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn seed_changes_data_but_not_shape() {
    let dir = tempfile::tempdir().unwrap();
    let config = fixtures().join("study_shape.conf");
    let mut outputs = Vec::new();
    for seed in ["13", "14"] {
        let sub = dir.path().join(seed);
        let out = run(&[
            "synth",
            "--config",
            config.to_str().unwrap(),
            "--seed",
            seed,
            "--out",
            sub.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
        let describe = run(&[
            "describe",
            "--records",
            sub.join("records.csv").to_str().unwrap(),
            "--ratings",
            sub.join("ratings.csv").to_str().unwrap(),
            "--json",
        ]);
        let json: serde_json::Value = serde_json::from_str(&stdout(&describe)).unwrap();
        assert_eq!(json["n_records"], 87);
        outputs.push(std::fs::read(sub.join("records.csv")).unwrap());
    }
    assert_ne!(outputs[0], outputs[1]);
}
