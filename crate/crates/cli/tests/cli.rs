use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use tempfile::TempDir;

const CONFIG: &str =
    r#"{"atoms": {"A": {"signal": "x", "op": ">=", "sigma": 4, "min": 0, "max": 8}}}"#;
const NO_BOUNDS: &str = r#"{"atoms": {"A": {"signal": "x", "op": ">=", "sigma": 4}}}"#;

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        let f = Self {
            dir: tempfile::tempdir().unwrap(),
        };
        f.write("config.json", CONFIG);
        f.write("nobounds.json", NO_BOUNDS);
        f.write("hold.twtl", "# three samples at or above 4\nH^2 A\n");
        f
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn write(&self, name: &str, text: &str) -> PathBuf {
        let p = self.path(name);
        fs::write(&p, text).unwrap();
        p
    }

    fn trace(&self, name: &str, samples: &[f64]) -> PathBuf {
        let mut text = String::from("time,x\n");
        for (k, v) in samples.iter().enumerate() {
            text.push_str(&format!("{k},{v}\n"));
        }
        self.write(name, &text)
    }
}

fn twtl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twtl"))
        .args(args)
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn parse_prints_canonical_form_and_horizon() {
    let o = twtl(&["parse", "-e", "(H^4 A . H^4 B) & H^10 !C"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "(H^4 A . H^4 B) & H^10 !C\nhorizon 10\n");

    let o = twtl(&["parse", "-e", "[H^6 A]^[0,10]"]);
    assert!(stdout(&o).contains("horizon 10"));
}

#[test]
fn parse_errors_exit_2_with_position() {
    let o = twtl(&["parse", "-e", "H^2 A -> H^1 B"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).contains("1:7: unknown operator `->`"),
        "{}",
        stderr(&o)
    );

    let o = twtl(&["parse", "-e", "[H^1 A]^[5,2]"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).contains("malformed time bound"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn parse_reports_diagnostics_against_config() {
    let fx = Fixture::new();
    let o = twtl(&[
        "parse",
        "-e",
        "[H^6 A]^[0,3]",
        "-c",
        s(&fx.path("config.json")),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("warning: inner horizon 6 exceeds window 3, formula unsatisfiable"));

    let o = twtl(&["parse", "-e", "H^2 Z", "-c", s(&fx.path("config.json"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("error: unresolved atom Z"));
}

#[test]
fn check_exit_codes() {
    let fx = Fixture::new();
    let formula = fx.path("hold.twtl");
    let config = fx.path("config.json");
    let good = fx.trace("good.csv", &[5.0, 4.5, 6.0]);
    let bad = fx.trace("bad.csv", &[5.0, 3.0, 6.0]);

    let o = twtl(&["check", "-f", s(&formula), "-t", s(&good), "-c", s(&config)]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.starts_with("sat rho=0.5 eta="), "{out}");
    let eta: f64 = out.trim().rsplit('=').next().unwrap().parse().unwrap();
    let expected = (1.125f64 * 1.0625 * 1.25).powf(1.0 / 3.0) - 1.0;
    assert!((eta - expected).abs() < 1e-12);

    let o = twtl(&["check", "-f", s(&formula), "-t", s(&bad), "-c", s(&config)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).starts_with("unsat rho=-1 "));

    let nb = fx.path("nobounds.json");
    let o = twtl(&["check", "-f", s(&formula), "-t", s(&good), "-c", s(&nb)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).contains("no normalization bounds"),
        "{}",
        stderr(&o)
    );

    let o = twtl(&[
        "check",
        "--rho-only",
        "-f",
        s(&formula),
        "-t",
        s(&good),
        "-c",
        s(&nb),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "sat rho=0.5\n");
}

#[test]
fn rho_and_eta_commands() {
    let fx = Fixture::new();
    let args = |cmd: &'static str, trace: &Path| {
        twtl(&[
            cmd,
            "-f",
            s(&fx.path("hold.twtl")),
            "-t",
            s(trace),
            "-c",
            s(&fx.path("config.json")),
        ])
    };
    let good = fx.trace("good.csv", &[5.0, 4.5, 6.0]);
    assert_eq!(stdout(&args("rho", &good)), "0.5\n");
    let e: f64 = stdout(&args("eta", &good)).trim().parse().unwrap();
    assert!(e > 0.0 && e < 0.5);
    let o = twtl(&[
        "rho",
        "-e",
        "H^1 A",
        "-t",
        s(&good),
        "-c",
        s(&fx.path("config.json")),
        "--rho-bot",
        "5",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(twtl::monitor::CSV_HEADER));
    lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn num(v: &str) -> f64 {
    v.parse().unwrap()
}

#[test]
fn monitor_rows_shrink_to_offline_value() {
    let fx = Fixture::new();
    let good = fx.trace("good.csv", &[5.0, 4.5, 6.0]);
    let o = twtl(&[
        "monitor",
        "-f",
        s(&fx.path("hold.twtl")),
        "-t",
        s(&good),
        "-c",
        s(&fx.path("config.json")),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = csv_rows(&stdout(&o));
    let rho: Vec<(f64, f64)> = rows.iter().map(|r| (num(&r[1]), num(&r[2]))).collect();
    assert_eq!(rho, vec![(-10.0, 1.0), (-10.0, 0.5), (0.5, 0.5)]);
    assert_eq!(rows[2][5], "satisfied");
    assert_eq!(rows[0][5], "inconclusive");
}

#[test]
fn monitor_final_row_matches_check() {
    let fx = Fixture::new();
    let formula = fx.write("within.twtl", "[H^2 A]^[1,5] | H^3 !A");
    let config = fx.path("config.json");
    let trace = fx.trace("w.csv", &[1.0, 4.3, 6.2, 5.1, 7.9, 2.0, 4.4, 0.5]);
    let check = twtl(&[
        "check",
        "-f",
        s(&formula),
        "-t",
        s(&trace),
        "-c",
        s(&config),
    ]);
    let out = stdout(&check);
    let fields: Vec<f64> = out
        .split_whitespace()
        .skip(1)
        .map(|kv| num(kv.split('=').nth(1).unwrap()))
        .collect();
    let mon = twtl(&[
        "monitor",
        "-f",
        s(&formula),
        "-t",
        s(&trace),
        "-c",
        s(&config),
    ]);
    let rows = csv_rows(&stdout(&mon));
    assert_eq!(rows.len(), 6);
    let last = rows.last().unwrap();
    assert!((num(&last[1]) - fields[0]).abs() <= 1e-9 && (num(&last[2]) - fields[0]).abs() <= 1e-9);
    assert!((num(&last[3]) - fields[1]).abs() <= 1e-9 && (num(&last[4]) - fields[1]).abs() <= 1e-9);
}

#[test]
fn monitor_tau_filter_and_jsonl() {
    let fx = Fixture::new();
    let good = fx.trace("good.csv", &[5.0, 4.5, 6.0]);
    let (formula, config) = (fx.path("hold.twtl"), fx.path("config.json"));
    let base = [
        "monitor",
        "-f",
        s(&formula),
        "-t",
        s(&good),
        "-c",
        s(&config),
    ];
    let mut args = base.to_vec();
    args.extend(["--tau", "0,2"]);
    let o = twtl(&args);
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 2);
    assert_eq!((rows[0][0].as_str(), rows[1][0].as_str()), ("0", "2"));

    let mut args = base.to_vec();
    args.extend(["--tau", "0.5"]);
    assert_eq!(twtl(&args).status.code(), Some(2));

    let mut args = base.to_vec();
    args.extend(["--format", "jsonl", "--conservative-eta"]);
    let o = twtl(&args);
    let lines: Vec<serde_json::Value> = stdout(&o)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0]["rho_hi"], 1.0);
    assert_eq!(lines[2]["verdict_rho"], "satisfied");
}

#[test]
fn monitor_short_trace_is_inconclusive() {
    let fx = Fixture::new();
    let short = fx.trace("short.csv", &[5.0, 4.5]);
    let o = twtl(&[
        "monitor",
        "-f",
        s(&fx.path("hold.twtl")),
        "-t",
        s(&short),
        "-c",
        s(&fx.path("config.json")),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("inconclusive at end of trace"));
    assert_eq!(csv_rows(&stdout(&o)).len(), 2);
}

#[test]
fn monitor_violation_exits_1_and_writes_file() {
    let fx = Fixture::new();
    let bad = fx.trace("bad.csv", &[5.0, 3.0, 6.0]);
    let out = fx.path("out.csv");
    let o = twtl(&[
        "monitor",
        "-f",
        s(&fx.path("hold.twtl")),
        "-t",
        s(&bad),
        "-c",
        s(&fx.path("config.json")),
        "-o",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let rows = csv_rows(&fs::read_to_string(out).unwrap());
    // The violation is already certain after the second sample.
    assert_eq!(rows[1][5], "violated");
}

fn stream(fx: &Fixture, input: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_twtl"))
        .args([
            "monitor",
            "--stream",
            "-f",
            s(&fx.path("hold.twtl")),
            "-c",
            s(&fx.path("config.json")),
        ])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(input.as_bytes())
        .unwrap();
    child.wait_with_output().unwrap()
}

#[test]
fn stream_mode() {
    let fx = Fixture::new();
    let o = stream(&fx, "time,x\n0,5\n1,4.5\n2,6\n");
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(csv_rows(&stdout(&o)).len(), 3);

    let o = stream(&fx, "time,x\n0,5\n1,abc\n");
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("abc"), "{}", stderr(&o));
    assert_eq!(csv_rows(&stdout(&o)).len(), 1);

    let o = stream(&fx, "time,x\n0,5\n2,4.5\n");
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn oracle_subcommand_agrees() {
    let fx = Fixture::new();
    let trace = fx.trace("w.csv", &[1.0, 4.3, 6.2, 5.1, 7.9, 2.0]);
    let o = twtl(&[
        "oracle",
        "-e",
        "[H^1 A]^[0,3] . H^0 !A",
        "-t",
        s(&trace),
        "-c",
        s(&fx.path("config.json")),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).ends_with("agree\n"));
}

#[test]
fn casestudy_writes_files() {
    let fx = Fixture::new();
    let out = fx.path("cs");
    let o = twtl(&["casestudy", "-o", s(&out)]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("horizon 50"));
    for f in [
        "formula.twtl",
        "regions.json",
        "nominal.csv",
        "marginal.csv",
        "nominal_monitor.csv",
        "marginal_monitor_tau.csv",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
    // The written inputs reproduce the printed values through `check`.
    let check = twtl(&[
        "check",
        "-f",
        s(&out.join("formula.twtl")),
        "-t",
        s(&out.join("marginal.csv")),
        "-c",
        s(&out.join("regions.json")),
    ]);
    assert_eq!(check.status.code(), Some(0));
    let line = stdout(&check);
    assert!(
        text.contains(&format!("marginal {}", line.trim())),
        "{line}"
    );
}
