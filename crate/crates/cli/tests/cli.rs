//! Black-box tests of the `cgd` binary: output text, JSON golden files,
//! exit codes, and diagnostics routing.

use std::process::{Command, Output};

fn cgd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cgd"))
        .args(args)
        .env_remove("CGD_BUDGET")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 stdout")
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("utf-8 stderr")
}

fn golden(name: &str) -> String {
    let path = format!("{}/tests/golden/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

#[test]
fn solve_mouse_text() {
    let out = cgd(&["solve", "fixtures/mouse"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "D := 1, EU(agent1) = 7/10\n");
}

#[test]
fn solve_mouse_json_matches_golden() {
    let out = cgd(&["solve", "mouse", "--format", "json"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), golden("mouse_solve.json"));
}

#[test]
fn identify_mouse_json_matches_golden() {
    let out = cgd(&["identify", "fixtures/mouse", "--format", "json"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), golden("mouse_identify.json"));
}

#[test]
fn discover_mouse_json_matches_golden() {
    let out = cgd(&["discover", "mouse", "--format", "json"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), golden("mouse_discover.json"));
}

#[test]
fn export_dot_is_byte_identical_across_runs() {
    for (args, file) in [
        (["export-dot", "mouse", "--graph", "game"], "mouse_game.dot"),
        (["export-dot", "mouse", "--graph", "mech"], "mouse_mech.dot"),
    ] {
        let first = cgd(&args);
        let second = cgd(&args);
        assert!(first.status.success());
        assert_eq!(stdout(&first), stdout(&second));
        assert_eq!(stdout(&first), golden(file));
    }
}

#[test]
fn roundtrip_ndu_reports_failure_with_exit_zero() {
    let out = cgd(&["roundtrip", "ndu"]);
    assert!(out.status.success(), "reports are not errors");
    let text = stdout(&out);
    assert!(text.contains("connectivity assumption: fail"), "{text}");

    let out = cgd(&["roundtrip", "ndu", "--format", "json"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), golden("ndu_roundtrip.json"));
}

#[test]
fn roundtrip_mouse_passes() {
    let out = cgd(&["roundtrip", "mouse"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("identify after mechanise: pass"), "{text}");
    assert!(text.contains("mechanise after identify: pass"), "{text}");
}

#[test]
fn unknown_model_exits_one() {
    let out = cgd(&["solve", "no_such_model"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("no_such_model"));
    assert!(stdout(&out).is_empty());
}

#[test]
fn invalid_model_file_exits_one_with_diagnostic() {
    let dir = std::env::temp_dir().join("cgd-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bad_row.toml");
    std::fs::write(
        &path,
        r#"
format_version = 1

[[variables]]
name = "X"
kind = "chance"
domain = ["0", "1"]
cpt = [["1/2", "1/3"]]
"#,
    )
    .unwrap();
    let out = cgd(&["solve", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("X"), "diagnostic names the variable");
}

#[test]
fn exhausted_budget_exits_two() {
    let out = cgd(&["discover", "mouse", "--budget", "5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("budget"));
}

#[test]
fn budget_env_override_is_honoured() {
    let out = Command::new(env!("CARGO_BIN_EXE_cgd"))
        .args(["discover", "mouse"])
        .env("CGD_BUDGET", "5")
        .output()
        .expect("binary runs");
    assert_eq!(out.status.code(), Some(2));
    // The flag takes precedence over the environment.
    let out = Command::new(env!("CARGO_BIN_EXE_cgd"))
        .args(["discover", "mouse", "--budget", "100000"])
        .env("CGD_BUDGET", "5")
        .output()
        .expect("binary runs");
    assert!(out.status.success());
}

#[test]
fn fixtures_list_names_everything() {
    let out = cgd(&["fixtures", "list"]);
    assert!(out.status.success());
    let text = stdout(&out);
    for name in [
        "mouse",
        "recommender",
        "actor_critic",
        "mamdp",
        "zero",
        "cirl",
        "ndu",
        "thermometer_btc",
        "thermometer_tc",
        "thermometer_bt",
    ] {
        assert!(text.lines().any(|l| l == name), "missing {name}");
    }
}

#[test]
fn fixtures_run_single() {
    let out = cgd(&["fixtures", "run", "mouse"]);
    assert!(out.status.success());
    assert!(stdout(&out).starts_with("mouse: ok"));
}

#[test]
fn restricted_candidates_warn_unless_acknowledged() {
    let out = cgd(&["discover", "recommender"]);
    assert!(out.status.success());
    assert!(stderr(&out).contains("warning"), "{}", stderr(&out));

    let out = cgd(&["discover", "recommender", "--restricted-ok"]);
    assert!(out.status.success());
    assert!(!stderr(&out).contains("warning"));

    // Unrestricted models never warn.
    let out = cgd(&["discover", "mouse"]);
    assert!(stderr(&out).is_empty(), "{}", stderr(&out));
}

#[test]
fn solve_rejects_dot_format() {
    let out = cgd(&["solve", "mouse", "--format", "dot"]);
    assert_eq!(out.status.code(), Some(2));
}
