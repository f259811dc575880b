use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_latelump"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&read(dir, "manifest.json")).unwrap()
}

#[test]
fn spectrum_writes_csv_plot_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["spectrum", "--n", "8"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(dir.path(), "spectrum_n8.csv");
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("re,im,residual,method,label"));
    let closed: Vec<_> = lines.filter(|l| l.ends_with(",closed-loop")).collect();
    assert!(closed.len() >= 12, "{}", closed.len());
    for l in &closed {
        let re: f64 = l.split(',').next().unwrap().parse().unwrap();
        assert!(re < 0.0, "{l}");
    }
    assert!(read(dir.path(), "plot.gp").contains("spectrum_n8.csv"));
    let m = manifest(dir.path());
    assert!(m.to_string().contains("spectrum_n8.csv"));
    let files: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(files.iter().filter(|f| *f == "manifest.json").count(), 1);
}

#[test]
fn identical_seeds_give_identical_output() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["--seed", "11", "simulate", "--n", "4", "--T", "5tau", "--grid-N", "80"];
    assert!(run(a.path(), &args).status.success());
    assert!(run(b.path(), &args).status.success());
    assert_eq!(fs::read(a.path().join("trace.csv")).unwrap(), fs::read(b.path().join("trace.csv")).unwrap());
}

#[test]
fn malformed_region_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    for bad in ["1,2,3", "5,-5,-1,1", "a,b,c,d"] {
        let o = run(dir.path(), &["spectrum", "--region", bad]);
        assert_eq!(o.status.code(), Some(2), "{bad}");
    }
}

#[test]
fn invalid_config_lists_every_violation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(
        &cfg,
        "[plant]\nalpha = -1.0\nbeta = 21.0\ngamma = 31.0\n\n[design]\nmu_c = 0.5\nkappa_c = 15.0\nmu_o = 2.0\nkappa_o = 35.0\n",
    )
    .unwrap();
    let o = run(&dir.path().join("out"), &["--config", cfg.to_str().unwrap(), "spectrum"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("alpha") && err.contains("mu_o"), "{err}");
}

#[test]
fn converge_sorts_and_dedupes_orders() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["converge", "--orders", "8,4,8", "--region", "-50,5,-150,150"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(dir.path(), "convergence.csv");
    let rows: Vec<_> = csv.lines().skip(1).collect();
    assert_eq!(csv.lines().next(), Some("n,d_ctrl,d_obs,abscissa,modes,eigenvalues"));
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("4,") && rows[1].starts_with("8,"));
}

#[test]
fn zero_initial_state_gives_a_zero_trace() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["simulate", "--ic", "zero", "--T", "3tau", "--grid-N", "50"]);
    assert!(o.status.success());
    let csv = read(dir.path(), "trace.csv");
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,u,y,yhat,state_norm,err_norm"));
    let mut n = 0;
    for l in lines {
        let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
        assert!(v[1..].iter().all(|x| *x == 0.0), "{l}");
        n += 1;
    }
    assert!(n > 100);
}

#[test]
fn overflow_exits_numerical_and_keeps_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["simulate", "--amplitude", "1e308", "--T", "5tau", "--grid-N", "50"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(!dir.path().join("trace.csv").exists());
    manifest(dir.path());
}

#[test]
fn bad_duration_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    for bad in ["-1", "0tau", "xtau"] {
        let o = run(dir.path(), &["simulate", "--T", bad]);
        assert!(!o.status.success(), "{bad}");
    }
}

#[test]
fn selftest_reports_ten_checks() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["selftest"]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    let results: serde_json::Value = serde_json::from_str(&read(dir.path(), "selftest.json")).unwrap();
    let arr = results.as_array().unwrap();
    assert_eq!(arr.len(), 10);
    let all = arr.iter().all(|r| r["passed"] == true);
    assert_eq!(o.status.code(), Some(if all { 0 } else { 3 }), "{stdout}");
    assert!(stdout.contains("checks passed"));
    manifest(dir.path());
}
