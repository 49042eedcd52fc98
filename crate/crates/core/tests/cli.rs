//! End-to-end checks of the `divrec` binary: subcommands, exit codes, and
//! the JREX export surface.

use std::path::Path;
use std::process::{Command, Output};

fn divrec(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_divrec"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn full_cli_workflow() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();

    let out = divrec(
        &["synth", "--dir", "corpus", "--items", "200", "--users", "20", "--seed", "3"],
        root,
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let config = root.join("corpus/config.json");
    assert!(config.exists());
    let config_arg = config.to_str().unwrap();

    let out = divrec(&["--config", config_arg, "validate"], root);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("\"items\": 200"));

    // Running from the post stage without candidates must fail cleanly.
    let out = divrec(&["--config", config_arg, "run", "--from-stage", "post"], root);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("pre") || err.contains("in"), "{err}");

    let out = divrec(&["--config", config_arg, "run"], root);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = stdout(&out);
    assert!(csv.starts_with("Model,Re-ranking,Activ."));
    assert!(csv.contains("NTV,"));

    let out = divrec(&["--config", config_arg, "evaluate", "--format", "json"], root);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).trim_start().starts_with('['));

    let out = divrec(&["--config", config_arg, "ntv"], root);
    assert_eq!(out.status.code(), Some(0));
    let ntv = stdout(&out);
    assert!(ntv.contains("0.133") && ntv.contains("0.250"), "{ntv}");

    let out = divrec(
        &["--config", config_arg, "export", "--style", "cards", "--experiment-id", "e1"],
        root,
    );
    assert_eq!(out.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["experimentId"], "e1");
    assert_eq!(doc["style"], "cards");
    assert!(doc["users"][0]["items"][0]["rank"] == 1);
}

#[test]
fn unknown_flag_exits_one_with_usage() {
    let dir = tempfile::tempdir().unwrap();
    let out = divrec(&["--definitely-not-a-flag"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.to_lowercase().contains("usage"), "{err}");
}

#[test]
fn missing_config_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = divrec(&["validate"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unreadable_config_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = divrec(&["--config", "does_not_exist.json", "validate"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = divrec(&["--help"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("Diversity-aware"));
}
