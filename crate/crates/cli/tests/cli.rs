use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vidauction"))
}

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

/// Two-user config text with a substitution applied.
fn two_user_with(from: &str, to: &str) -> String {
    let text = std::fs::read_to_string(config("two_user.toml")).unwrap();
    assert!(text.contains(from), "{from}");
    text.replace(from, to)
}

fn user_column(dir: &Path, user: &str, column: &str) -> String {
    let mut rdr = csv_lines(&dir.join("users.csv"));
    let header = rdr.remove(0);
    let col = header.iter().position(|h| h == column).unwrap();
    rdr.into_iter().find(|r| r[0] == user).unwrap()[col].clone()
}

fn csv_lines(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn missing_config_exits_2_with_json_error() {
    let o = run(&["simulate", "--config", "/nonexistent/x.toml", "--out", "/nonexistent/out"]);
    assert_eq!(o.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "config");
}

#[test]
fn malformed_trace_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "capacity.csv", "time_s,user_id,capacity_mbps\n0,A,3\n5,A,-1\n0,B,1\n");
    let out = dir.path().join("out");
    let o = run(&["simulate", "--config", p(&config("two_user.toml")), "--traces", p(dir.path()), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn snapshot_reproduces_run() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    let o = run(&["simulate", "--config", p(&config("three_user.toml")), "--seed", "4", "--out", p(&first)]);
    assert!(o.status.success());
    let o2 = run(&[
        "simulate",
        "--config",
        p(&first.join("config.toml")),
        "--traces",
        p(&first),
        "--out",
        p(&second),
    ]);
    assert!(o2.status.success());
    assert_eq!(stdout(&o), stdout(&o2));
    for f in ["summary.csv", "users.csv", "events.jsonl", "capacity.csv", "encounters.csv"] {
        assert_eq!(
            std::fs::read(first.join(f)).unwrap(),
            std::fs::read(second.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn filter_spares_fast_user_in_two_user_run() {
    let dir = tempfile::tempdir().unwrap();
    let on = dir.path().join("on");
    let off = dir.path().join("off");
    let off_cfg = write(dir.path(), "off.toml", &two_user_with("enabled = true", "enabled = false"));
    assert!(run(&["simulate", "--config", p(&config("two_user.toml")), "--seed", "2", "--out", p(&on)]).status.success());
    assert!(run(&["simulate", "--config", p(&off_cfg), "--seed", "2", "--out", p(&off)]).status.success());
    assert_eq!(user_column(&on, "A", "degradation_events"), "0");
    assert_eq!(user_column(&on, "A", "rebuffer_s"), "0");
    let off_deg: u32 = user_column(&off, "A", "degradation_events").parse().unwrap();
    assert!(off_deg >= 1);
}

#[test]
fn verify_passes_without_costs() {
    let dir = tempfile::tempdir().unwrap();
    let text = two_user_with("cost_per_mbit = 0.05", "cost_per_mbit = 0.0")
        .replace("cost_per_download_s = 0.4", "cost_per_download_s = 0.0");
    let cfg = write(dir.path(), "free.toml", &text);
    let o = run(&["verify", "--config", p(&cfg)]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(!out.contains(",fail,"), "{out}");
    assert!(out.contains("4 of 4 pairs pass"), "{out}");
}

#[test]
fn verify_names_failing_pair() {
    let o = run(&["verify", "--config", p(&config("two_user.toml"))]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.lines().any(|l| l.starts_with("B,A,fail,")), "{out}");
    assert!(out.lines().any(|l| l.starts_with("A,B,pass,pass")), "{out}");
}

#[test]
fn verify_with_no_users_is_empty() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(config("two_user.toml")).unwrap();
    let head = &text[..text.find("[[users]]").unwrap()];
    let cfg = write(dir.path(), "empty.toml", head);
    let o = run(&["verify", "--config", p(&cfg)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "downloader,bidder,nonnegative,nonincreasing,detail");
    assert!(lines[1].starts_with("summary: 0 of 0"), "{out}");
}

#[test]
fn oracle_matrix_matches_worked_example() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(
        dir.path(),
        "m.toml",
        "K = 4\nmarginal_scores = [[8, 7, 5, 2], [9, 6, 3, 2], [4, 4, 3, 1]]\n",
    );
    let o = run(&["oracle", "--instance", p(&inst), "--kind", "matrix"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("mechanism_allocation=[2, 2, 0]"), "{out}");
    assert!(out.contains("bidder 0: segments=2 score_damage=8"), "{out}");
    assert!(out.contains("bidder 1: segments=2 score_damage=9"), "{out}");
    assert!(out.contains("verdict=equal"), "{out}");
}

#[test]
fn oracle_single_bidder() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(
        dir.path(),
        "one.toml",
        "K = 1\n[defaults]\ntheta = 1.0\n\n[[bidders]]\nname = \"A\"\nbuffer_s = 10.0\nprev_bitrate = 1.3\n",
    );
    for kind in ["somd", "momd"] {
        let o = run(&["oracle", "--instance", p(&inst), "--kind", kind]);
        assert!(o.status.success(), "{kind}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(stdout(&o).contains("verdict=equal"), "{kind}: {}", stdout(&o));
    }
}

#[test]
fn oracle_rejects_oversized_instance() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(dir.path(), "big.toml", "K = 5\nmarginal_scores = [[5, 4, 3, 2, 1]]\n");
    let o = run(&["oracle", "--instance", p(&inst), "--kind", "matrix"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn gen_traces_then_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "gen-traces",
        "--config",
        p(&config("two_user.toml")),
        "--seed",
        "2",
        "--out",
        p(dir.path()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let from_files = run(&[
        "simulate",
        "--config",
        p(&config("two_user.toml")),
        "--traces",
        p(dir.path()),
        "--out",
        p(&a),
    ]);
    let synthetic = run(&["simulate", "--config", p(&config("two_user.toml")), "--seed", "2", "--out", p(&b)]);
    assert!(from_files.status.success());
    assert_eq!(stdout(&from_files), stdout(&synthetic));
}

#[test]
fn compare_writes_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "compare",
        "--config",
        p(&config("three_user.toml")),
        "--replications",
        "2",
        "--mechanisms",
        "noncooperative,momd",
        "--K",
        "1,2",
        "--out",
        p(dir.path()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_lines(&dir.path().join("comparison.csv"));
    assert_eq!(rows.len(), 5);
    assert!(dir.path().join("grid.json").exists());
}
