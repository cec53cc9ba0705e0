use std::process::{Command, Output};

use fracwave_cli::output::CSV_HEADER;

fn fracwave(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracwave")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

#[test]
fn run_prints_csv() {
    let out = fracwave(&["run", "-s", "N=16", "-s", "h_exp=4", "-s", "method=both"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], CSV_HEADER);
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("ex1,tss,16,4,"));
    assert!(lines[2].starts_with("ex1,fdac,16,4,"));
    let diff: f64 = lines[2].rsplit(',').next().unwrap().parse().unwrap();
    assert!(diff <= 1e-10);
}

#[test]
fn output_is_byte_stable_without_timing() {
    let args = ["converge", "-s", "levels=3,4", "-s", "fixed=4", "-s", "timing=off", "-s", "method=both"];
    let a = fracwave(&args);
    let b = fracwave(&args);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn config_file_and_output_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("study.cfg");
    let csv = dir.path().join("out.csv");
    std::fs::write(&cfg, "# ex3 snapshot\nexample = ex3\nN = 8\nh_exp = 3\nsnapshot_times = 0.5, 1\n").unwrap();
    let prefix = dir.path().join("snap");
    let out = fracwave(&[
        "run",
        "-c",
        cfg.to_str().unwrap(),
        "-s",
        &format!("snapshot_prefix={}", prefix.display()),
        "-o",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).is_empty());
    let written = std::fs::read_to_string(&csv).unwrap();
    assert!(written.starts_with(CSV_HEADER));
    // no exact solution: the error cell stays empty
    assert!(written.lines().nth(1).unwrap().starts_with("ex3,fdac,8,3,,"));
    let snap = std::fs::read_to_string(dir.path().join("snap-ex3-fdac-t0.5.txt")).unwrap();
    assert!(snap.starts_with("# dim=2 m=7 t=0.5\n"));
    assert_eq!(snap.lines().count(), 8);
    assert!(dir.path().join("snap-ex3-fdac-t1.txt").exists());
}

#[test]
fn bad_config_exits_nonzero_naming_the_field() {
    let out = fracwave(&["run", "-s", "h_exp=0"]);
    assert!(!out.status.success());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("`h_exp`"), "{}", stderr(&out));
    assert!(stdout(&out).is_empty());

    let out = fracwave(&["run", "-s", "colour=red"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("`colour`"));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "N = 8\nmethod = quick\n").unwrap();
    let out = fracwave(&["run", "-c", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("`method`"));
}

#[test]
fn missing_config_file_fails() {
    let out = fracwave(&["run", "-c", "/nonexistent/fracwave.cfg"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("/nonexistent/fracwave.cfg"));
}

#[test]
fn compare_exit_codes() {
    let small = ["compare", "-s", "compare_n=4,12", "-s", "compare_m=3", "-s", "compare_dims=1"];
    let out = fracwave(&small);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout(&out).lines().count(), 1 + 2 * 3);

    // an impossible tolerance turns the same sweep into a failure
    let mut strict = small.to_vec();
    strict.extend(["-s", "tolerance=1e-300"]);
    let out = fracwave(&strict);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bench_reports_slopes() {
    let out = fracwave(&["bench", "-s", "bench_levels=4..6"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout(&out).lines().count(), 1 + 6);
    let summary = stderr(&out);
    assert!(summary.contains("slope tss"));
    assert!(summary.contains("slope fdac"));
    assert!(summary.contains("speedup tss/fdac at N = 64"));
}

#[test]
fn degenerate_rate_is_visible() {
    let out = fracwave(&["converge", "-s", "levels=3,3", "-s", "fixed=3", "-s", "timing=off"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).lines().nth(2).unwrap().contains("(degenerate)"));
}
