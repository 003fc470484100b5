use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mfpoly"))
}

fn read_json(dir: &Path, name: &str) -> serde_json::Value {
    let text = std::fs::read_to_string(dir.join(name)).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn write_identity_mtx(path: &Path, n: usize) {
    let mut s = String::from("%%MatrixMarket matrix coordinate real symmetric\n");
    s.push_str(&format!("{n} {n} {n}\n"));
    for i in 1..=n {
        s.push_str(&format!("{i} {i} 1.0\n"));
    }
    std::fs::write(path, s).unwrap();
}

#[test]
fn diag_solve_report_and_counter_laws() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "solve",
            "--diag-test",
            "n=5000",
            "--nlev",
            "5",
            "--xi",
            "1e-4",
            "--tol",
            "1e-10",
            "--output",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let rep = read_json(dir.path(), "solve_report.json");
    assert_eq!(rep["config"]["command"], "solve");
    assert_eq!(rep["config"]["source"], "diag-test n=5000");
    assert_eq!(rep["config"]["nlev"], 5);
    assert_eq!(rep["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(rep["converged"], true);

    let iters = rep["iters"].as_u64().unwrap();
    let m = rep["effective_degree"].as_u64().unwrap();
    assert_eq!(m, 31);
    assert_eq!(rep["mvp"].as_u64().unwrap(), iters * (m + 1));
    assert_eq!(rep["ddot"].as_u64().unwrap(), 3 * iters + 1);
}

#[test]
fn identity_degree_zero_one_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let mtx = dir.path().join("I.mtx");
    write_identity_mtx(&mtx, 8);
    let out = bin()
        .args(["solve", "--matrix"])
        .arg(&mtx)
        .args(["--degree", "0", "--output"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = read_json(dir.path(), "solve_report.json");
    assert_eq!(rep["iters"], 1);
}

#[test]
fn solve_reports_are_deterministic() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    for dir in [dir_a.path(), dir_b.path()] {
        let out = bin()
            .args(["solve", "--diag-test", "n=3000", "--nlev", "4", "--seed", "99", "--output"])
            .arg(dir)
            .output()
            .unwrap();
        assert!(out.status.success());
    }
    let a = read_json(dir_a.path(), "solve_report.json");
    let b = read_json(dir_b.path(), "solve_report.json");
    for key in ["iters", "mvp", "ddot", "final_relres", "alpha", "beta"] {
        assert_eq!(a[key], b[key], "field {key} differs between identical runs");
    }
}

#[test]
fn exit_codes_distinguish_failures() {
    // missing input file -> 2
    let st = bin()
        .args(["solve", "--matrix", "/nonexistent/x.mtx"])
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(2));

    // negative xi -> 2
    let st = bin()
        .args(["solve", "--diag-test", "n=50", "--xi=-1"])
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(2));

    // iteration cap hit -> 3, report still written
    let dir = tempfile::tempdir().unwrap();
    let st = bin()
        .args(["solve", "--diag-test", "n=2000", "--max-iters", "2", "--output"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(3));
    let rep = read_json(dir.path(), "solve_report.json");
    assert_eq!(rep["converged"], false);
}

#[test]
fn generate_then_solve_dfn_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let sysdir = dir.path().join("sys");
    let out = bin()
        .args([
            "generate",
            "--nf",
            "8",
            "--avg-block",
            "12",
            "--trace-density",
            "0.3",
            "--alpha",
            "1.0",
            "--seed",
            "5",
            "--out",
        ])
        .arg(&sysdir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out = bin()
        .args(["solve", "--dfn"])
        .arg(&sysdir)
        .args(["--degree", "15", "--xi", "1e-3", "--tol", "1e-12", "--output"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = read_json(dir.path(), "solve_report.json");
    assert_eq!(rep["converged"], true);
    for r in rep["dfn"]["block_residuals"].as_array().unwrap() {
        assert!(r.as_f64().unwrap() <= 1e-10, "block residual {r}");
    }
}

#[test]
fn doctored_alpha_exits_inadmissible() {
    let dir = tempfile::tempdir().unwrap();
    let sysdir = dir.path().join("sys");
    let st = bin()
        .args(["generate", "--nf", "6", "--avg-block", "10", "--trace-density", "0.4", "--seed", "3", "--out"])
        .arg(&sysdir)
        .output()
        .unwrap();
    assert!(st.status.success());
    std::fs::write(sysdir.join("alpha.txt"), "5.0e3\n").unwrap();
    let st = bin()
        .args(["solve", "--dfn"])
        .arg(&sysdir)
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(4));
}

#[test]
fn spectrum_first_newton_level_maps_extremes_together() {
    let dir = tempfile::tempdir().unwrap();
    let eigs = dir.path().join("eigs.txt");
    let vals: Vec<String> = (1..=19).map(|i| format!("{:.1}", 0.1 * i as f64)).collect();
    std::fs::write(&eigs, vals.join("\n") + "\n").unwrap();

    let out = bin()
        .args(["spectrum", "--eigs"])
        .arg(&eigs)
        .args(["--nlev", "1", "--output"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let csv = std::fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
    let rows: Vec<(f64, f64)> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let mut it = l.split(',');
            (
                it.next().unwrap().parse().unwrap(),
                it.next().unwrap().parse().unwrap(),
            )
        })
        .collect();
    assert_eq!(rows.len(), 19);
    // alpha = 0.1, beta = 1.9: both interval ends land on 4ab/(a+b)^2
    let expect = 4.0 * 0.1 * 1.9 / (2.0f64).powi(2);
    assert!((rows[0].1 - expect).abs() < 1e-12, "{} vs {expect}", rows[0].1);
    assert!((rows[18].1 - expect).abs() < 1e-12, "{} vs {expect}", rows[18].1);

    let rep = read_json(dir.path(), "spectrum_report.json");
    assert!(rep["kappa"].as_f64().unwrap() > 1.0);
}

#[test]
fn spectrum_empty_list_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let eigs = dir.path().join("none.txt");
    std::fs::write(&eigs, "").unwrap();
    let out = bin()
        .args(["spectrum", "--eigs"])
        .arg(&eigs)
        .args(["--output"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
    assert_eq!(csv, "lambda,mapped\n");
}

#[test]
fn sweep_records_cell_failures_and_continues() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "sweep",
            "--diag-test",
            "n=400",
            "--xi-list",
            "0",
            "--degree-list",
            "3,5,7",
            "--output",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[2].contains("2^k - 1"), "degree 5 row should fail: {}", lines[2]);
    assert!(lines[3].starts_with("0e0,7,"), "later cells still run: {}", lines[3]);
}

#[test]
fn sweep_empty_grid_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["sweep", "--diag-test", "n=400", "--xi-list", "--degree-list", "3", "--output"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
}

#[test]
fn scale_bench_reference_efficiency_is_full() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "scale-bench",
            "--diag-test",
            "n=4000",
            "--threads-list",
            "1,2",
            "--nlev",
            "4",
            "--output",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = read_json(dir.path(), "scale_bench_report.json");
    assert_eq!(rep["iterations_identical"], true);
    assert_eq!(rep["reference_threads"], 1);
    let rows = rep["rows"].as_array().unwrap();
    assert_eq!(rows[0]["eta_percent"].as_f64().unwrap(), 100.0);
}

#[test]
fn env_overrides_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["solve", "--diag-test", "n=500", "--nlev", "3"])
        .env("MFPOLY_OUTPUT_DIR", dir.path())
        .env("MFPOLY_THREADS", "1")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("solve_report.json").exists());
    let rep = read_json(dir.path(), "solve_report.json");
    assert_eq!(rep["config"]["threads"], 1);
}
