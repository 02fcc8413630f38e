//! End-to-end tests of the `causeway` binary: exit codes, file outputs,
//! determinism, and the network path against a local HTTP server.

use std::io::{Read, Write};
use std::net::TcpListener;
use std::path::Path;
use std::process::{Command, Output};

fn causeway(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_causeway"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

/// Synthetic but deterministic panel: mildly coupled positive series.
fn write_panel(path: &Path, t_len: usize, n: usize) {
    let mut out = String::from("date");
    for c in 0..n {
        out.push_str(&format!(",S{c:02}"));
    }
    out.push('\n');
    let mut values = vec![vec![0.0_f64; n]; t_len];
    let mut state = 7_u64;
    let mut noise = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((state >> 33) as f64 / (1u64 << 31) as f64) - 1.0
    };
    for t in 0..t_len {
        for c in 0..n {
            let prev = if t > 0 { values[t - 1][c] } else { 0.0 };
            let neighbour = if t > 0 { values[t - 1][(c + 1) % n] } else { 0.0 };
            values[t][c] = 0.4 * prev + 0.45 * neighbour + noise();
        }
    }
    for t in 0..t_len {
        let date = chrono::NaiveDate::from_ymd_opt(2018, 1, 1).unwrap()
            + chrono::Days::new(t as u64);
        out.push_str(&date.to_string());
        for c in 0..n {
            out.push_str(&format!(",{}", 100.0 + 10.0 * values[t][c]));
        }
        out.push('\n');
    }
    std::fs::write(path, out).unwrap();
}

#[test]
fn discover_writes_graph_files_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let panel = dir.path().join("panel.csv");
    write_panel(&panel, 400, 6);

    let out = causeway(
        &["discover", "--input", "panel.csv", "--out-dir", "run1", "--tau", "1"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let g1 = std::fs::read(dir.path().join("run1/graph.json")).unwrap();
    let t1 = std::fs::read(dir.path().join("run1/graph.txt")).unwrap();
    assert!(dir.path().join("run1/discover_summary.json").exists());

    let out = causeway(
        &["discover", "--input", "panel.csv", "--out-dir", "run2", "--tau", "1"],
        dir.path(),
    );
    assert!(out.status.success());
    assert_eq!(g1, std::fs::read(dir.path().join("run2/graph.json")).unwrap());
    assert_eq!(t1, std::fs::read(dir.path().join("run2/graph.txt")).unwrap());
}

#[test]
fn discover_rejects_tau_zero_and_missing_input() {
    let dir = tempfile::tempdir().unwrap();
    let panel = dir.path().join("panel.csv");
    write_panel(&panel, 60, 3);

    let out = causeway(
        &["discover", "--input", "panel.csv", "--out-dir", "o", "--tau", "0"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));

    let out = causeway(
        &["discover", "--input", "nope.csv", "--out-dir", "o"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn discover_rejects_short_panel_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("short.csv"),
        "date,A,B\n2020-01-01,1.0,2.0\n2020-01-02,1.1,2.1\n",
    )
    .unwrap();
    let out = causeway(
        &["discover", "--input", "short.csv", "--out-dir", "o", "--tau", "1"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("too short"), "stderr: {err}");
}

#[test]
fn backtest_outputs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    write_panel(&dir.path().join("panel.csv"), 300, 6);

    let args = [
        "backtest", "--input", "panel.csv", "--discover", "--eta", "2",
        "--tau", "1", "--seed", "42",
    ];
    let out = causeway(&[&args[..], &["--out-dir", "a"][..]].concat(), dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = causeway(&[&args[..], &["--out-dir", "b"][..]].concat(), dir.path());
    assert!(out.status.success());

    for file in ["daily_returns.csv", "cumulative.csv", "blotter.csv", "comparison.json"] {
        let a = std::fs::read(dir.path().join("a").join(file)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }
    // report.json matches once the wall-clock metadata is stripped
    let strip = |p: &Path| {
        let mut v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap();
        v.as_object_mut().unwrap().remove("timing");
        serde_json::to_string(&v).unwrap()
    };
    assert_eq!(
        strip(&dir.path().join("a/report.json")),
        strip(&dir.path().join("b/report.json"))
    );
}

#[test]
fn backtest_with_self_graph_equals_control() {
    let dir = tempfile::tempdir().unwrap();
    write_panel(&dir.path().join("panel.csv"), 250, 5);
    let out = causeway(
        &[
            "backtest", "--input", "panel.csv", "--out-dir", "o", "--graph", "self",
            "--eta", "1", "--tau", "1",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let daily = std::fs::read_to_string(dir.path().join("o/daily_returns.csv")).unwrap();
    for line in daily.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[1], cells[2], "strategy and control differ: {line}");
    }
}

#[test]
fn backtest_missing_benchmark_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    write_panel(&dir.path().join("panel.csv"), 250, 5);
    let out = causeway(
        &[
            "backtest", "--input", "panel.csv", "--out-dir", "o", "--graph", "self",
            "--benchmark", "missing.csv",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn backtest_reads_graph_file_and_config_file() {
    let dir = tempfile::tempdir().unwrap();
    write_panel(&dir.path().join("panel.csv"), 260, 5);

    let out = causeway(
        &["discover", "--input", "panel.csv", "--out-dir", "g", "--tau", "1"],
        dir.path(),
    );
    assert!(out.status.success());

    std::fs::write(
        dir.path().join("run.conf"),
        "input = panel.csv\ntau = 1\neta = 2\ncost = 0.0\n",
    )
    .unwrap();
    let out = causeway(
        &[
            "backtest", "--config", "run.conf", "--out-dir", "o",
            "--graph", "g/graph.json",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("o/report.json")).unwrap())
            .unwrap();
    assert_eq!(report["eta_resolved"], 2, "config-file eta applies");
    assert_eq!(report["config"]["cost"], 0.0);

    // explicit flag beats the file
    let out = causeway(
        &[
            "backtest", "--config", "run.conf", "--out-dir", "o2",
            "--graph", "g/graph.json", "--eta", "1",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("o2/report.json")).unwrap())
            .unwrap();
    assert_eq!(report["eta_resolved"], 1);
}

#[test]
fn synth_bench_writes_rows_and_honors_time_budget() {
    let dir = tempfile::tempdir().unwrap();
    let out = causeway(
        &[
            "synth-bench", "--out", "bench.csv", "--n-vars", "5", "--t-len", "400",
            "--tau", "1", "--noise", "uniform,gaussian", "--seeds", "2",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("bench.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 1 + 4, "header + 2 noises x 2 seeds");
    assert!(lines[0].starts_with("n_vars,T,tau,noise,seed,precision"));
    assert!(lines[1..].iter().all(|l| l.ends_with(",ok")));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("mean F1"), "stderr: {err}");

    // a budget far too small for a large cell records a timeout row but
    // still exits 0
    let out = causeway(
        &[
            "synth-bench", "--out", "slow.csv", "--n-vars", "150", "--t-len", "2000",
            "--tau", "1", "--seeds", "1", "--density", "0.008", "--time-budget", "1s",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("slow.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().ends_with(",timeout"), "{csv}");

    // empty grid: header only, exit 0
    let out = causeway(
        &["synth-bench", "--out", "empty.csv", "--seeds", "0"],
        dir.path(),
    );
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("empty.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
}

#[test]
fn profile_reports_sizes_and_memory_limit() {
    let dir = tempfile::tempdir().unwrap();
    let out = causeway(
        &["profile", "--out", "prof.csv", "--sizes", "10x400,20x400", "--tau", "1"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("prof.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",ok")));
    assert!(dir.path().join("prof.summary.json").exists());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("growth exponent"), "stderr: {err}");

    // a single size cannot produce an exponent
    let out = causeway(
        &["profile", "--out", "one.csv", "--sizes", "10x400", "--tau", "1"],
        dir.path(),
    );
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("n/a"));

    // an absurdly small cap flags every size without running it
    let out = causeway(
        &[
            "profile", "--out", "cap.csv", "--sizes", "10x400,20x400",
            "--tau", "1", "--mem-cap", "0.000001",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("cap.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",memory_limit")), "{csv}");
}

/// One-shot HTTP server serving canned CSV bodies by path substring.
fn spawn_server(routes: Vec<(&'static str, u16, String)>) -> (String, std::thread::JoinHandle<()>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let handle = std::thread::spawn(move || {
        for stream in listener.incoming() {
            let mut stream = match stream {
                Ok(s) => s,
                Err(_) => break,
            };
            let mut buf = [0u8; 4096];
            let n = stream.read(&mut buf).unwrap_or(0);
            let req = String::from_utf8_lossy(&buf[..n]).to_string();
            let path = req
                .lines()
                .next()
                .and_then(|l| l.split_whitespace().nth(1))
                .unwrap_or("/")
                .to_string();
            let (status, body) = routes
                .iter()
                .find(|(k, _, _)| path.contains(k))
                .map(|(_, s, b)| (*s, b.clone()))
                .unwrap_or((404, String::new()));
            let reason = if status == 200 { "OK" } else { "Not Found" };
            let resp = format!(
                "HTTP/1.1 {status} {reason}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            let _ = stream.write_all(resp.as_bytes());
            if path.contains("STOP") {
                break;
            }
        }
    });
    (format!("http://{addr}"), handle)
}

fn stop_server(base: &str, handle: std::thread::JoinHandle<()>) {
    let mut stream = std::net::TcpStream::connect(base.trim_start_matches("http://")).unwrap();
    let _ = stream.write_all(b"GET /STOP HTTP/1.1\r\nConnection: close\r\n\r\n");
    let _ = handle.join();
}

#[test]
fn fetch_merges_and_isolates_failures() {
    let (base, handle) = spawn_server(vec![
        ("AAA", 200, "date,close\n2021-01-04,10.0\n2021-01-05,10.5\n".to_string()),
        ("BBB", 200, "date,close\n2021-01-04,20.0\n2021-01-05,21.0\n".to_string()),
    ]);
    let dir = tempfile::tempdir().unwrap();
    let endpoint = format!("{base}/q?t={{ticker}}&a={{start}}&b={{end}}");
    let out = causeway(
        &[
            "fetch", "--endpoint", &endpoint, "--tickers", "AAA,BBB,ZZZ",
            "--start", "2021-01-04", "--end", "2021-01-05",
            "--out", "panel.csv", "--cache-dir", "cache",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("ZZZ"), "failed ticker reported: {err}");
    let panel = std::fs::read_to_string(dir.path().join("panel.csv")).unwrap();
    assert!(panel.starts_with("date,AAA,BBB"));
    assert_eq!(panel.lines().count(), 3);
    stop_server(&base, handle);
}

#[test]
fn fetch_empty_ticker_list_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = causeway(
        &[
            "fetch", "--endpoint", "http://127.0.0.1:1/{ticker}", "--tickers", "",
            "--start", "2021-01-04", "--end", "2021-01-05", "--out", "empty.csv",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    assert_eq!(std::fs::read_to_string(dir.path().join("empty.csv")).unwrap(), "date\n");
}

#[test]
fn fetch_total_failure_exits_2() {
    let (base, handle) = spawn_server(vec![]);
    let dir = tempfile::tempdir().unwrap();
    let endpoint = format!("{base}/q?t={{ticker}}");
    let out = causeway(
        &[
            "fetch", "--endpoint", &endpoint, "--tickers", "ZZZ",
            "--start", "2021-01-04", "--end", "2021-01-05", "--out", "panel.csv",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    stop_server(&base, handle);
}
