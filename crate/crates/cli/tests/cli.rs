use std::io::Write;
use std::process::{Command, Output};

use tempfile::NamedTempFile;

const DIAMOND: &str = "a 0 0 1 10\na 1 0 2 10\na 2 1 3 10\na 3 2 3 10\na 4 1 2 5\n";

fn log(contents: &str) -> NamedTempFile {
    let mut f = NamedTempFile::new().unwrap();
    f.write_all(contents.as_bytes()).unwrap();
    f
}

fn dynflow(input: &NamedTempFile, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dynflow"))
        .arg("--input")
        .arg(input.path())
        .args(extra)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Data rows of a TSV report, split into columns.
fn rows(o: &Output) -> Vec<Vec<String>> {
    stdout(o)
        .lines()
        .skip(1)
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split('\t').map(str::to_owned).collect())
        .collect()
}

#[test]
fn empty_input_reports_nothing_and_succeeds() {
    let input = log("");
    let out = dynflow(&input, &["--source", "0", "--sink", "1", "--query-interval", "10"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(rows(&out).is_empty());
    assert!(text.contains("# events 0"));
    assert!(text.contains("# queries 0"));
}

#[test]
fn diamond_with_oracle_check() {
    let input = log(DIAMOND);
    for extra in [&["--workers", "2"][..], &["--deterministic", "4", "--workers", "3"][..]] {
        let mut args = vec!["--source", "0", "--sink", "3", "--query-interval", "2", "--oracle-check"];
        args.extend_from_slice(extra);
        let out = dynflow(&input, &args);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let rows = rows(&out);
        assert_eq!(rows.last().unwrap()[2], "20");
        assert_eq!(rows.last().unwrap()[1], "5");
    }
}

#[test]
fn corrupted_engine_is_caught_by_the_oracle() {
    let input = log(DIAMOND);
    let out = dynflow(
        &input,
        &["--source", "0", "--sink", "3", "--query-interval", "2", "--oracle-check", "--debug-corrupt-flow", "1"],
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("reference solver"));
}

#[test]
fn configuration_errors_exit_with_two() {
    let input = log(DIAMOND);
    for args in [
        &["--source", "0", "--sink", "0", "--query-interval", "2"][..],
        &["--source", "0", "--sink", "3", "--query-interval", "0"][..],
        &["--source", "0", "--sink", "3", "--query-interval", "2", "--workers", "0"][..],
        &["--source", "0", "--sink", "3", "--query-interval", "2", "--window", "0"][..],
        &["--source", "0", "--sink", "3", "--query-interval", "2", "--alpha", "1.0"][..],
        &["--source", "0", "--sink", "3"][..],
    ] {
        let out = dynflow(&input, args);
        assert_eq!(out.status.code(), Some(2), "args {args:?}");
    }
}

#[test]
fn bad_input_exits_with_one() {
    let input = log("a 0 0 1 5\nd 1 0 1 7\n");
    let out = dynflow(&input, &["--source", "0", "--sink", "1", "--query-interval", "5"]);
    assert_eq!(out.status.code(), Some(1));

    let input = log("a zero 0 1 5\n");
    let out = dynflow(&input, &["--source", "0", "--sink", "1", "--query-interval", "5"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
}

#[test]
fn json_lines_output() {
    let input = log(DIAMOND);
    let out = dynflow(&input, &["--source", "0", "--sink", "3", "--query-interval", "2", "--format", "jsonl"]);
    assert_eq!(out.status.code(), Some(0));
    let lines: Vec<serde_json::Value> = stdout(&out)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[1]["flowValue"], 20);
    assert_eq!(lines[1]["eventsIngested"], 5);
    assert_eq!(lines[2]["summary"]["queries"], 2);
}

#[test]
fn window_and_static_baseline_agree_on_values() {
    let mut text = String::new();
    for i in 0..60u64 {
        text.push_str(&format!("a {i} {} {} {}\n", i % 5, (i * 3 + 1) % 6, 1 + i % 4));
    }
    let input = log(&text);
    let base = ["--source", "0", "--sink", "5", "--query-interval", "7", "--window", "20", "--oracle-check"];
    let dynamic = dynflow(&input, &base);
    let mut args = base.to_vec();
    args.push("--static-baseline");
    let fixed = dynflow(&input, &args);
    assert_eq!(dynamic.status.code(), Some(0));
    assert_eq!(fixed.status.code(), Some(0));
    let values = |o: &Output| rows(o).into_iter().map(|r| r[2].clone()).collect::<Vec<_>>();
    assert_eq!(values(&dynamic), values(&fixed));
}
