use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn catqcf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_catqcf"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn selftest_passes() {
    let out = catqcf(&["selftest"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 6);
}

#[test]
fn config_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"dim_N": 511}"#);
    let out = catqcf(&[
        "series",
        "--config",
        &cfg,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("N must be even"));

    let cfg = write_config(dir.path(), r#"{"nonsense": 1}"#);
    assert_eq!(catqcf(&["series", "--config", &cfg]).status.code(), Some(2));
    assert_eq!(catqcf(&["series", "--set", "k"]).status.code(), Some(2));
    assert_eq!(catqcf(&["bogus-mode"]).status.code(), Some(2));
    assert_eq!(
        catqcf(&["series", "--config", "/nonexistent/c.json"])
            .status
            .code(),
        Some(2)
    );
}

fn data_rows(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

#[test]
fn series_outputs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"dim_N": 16, "eps": [1e-3, 0, 0], "n_packets": 3, "t_max": 5}"#,
    );
    let run = |sub: &str, threads: &str| {
        let out_dir = dir.path().join(sub);
        let out = catqcf(&[
            "series",
            "--config",
            &cfg,
            "--out",
            out_dir.to_str().unwrap(),
            "--threads",
            threads,
            "--no-timestamp",
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        out_dir
    };
    let a = run("a", "1");
    let b = run("b", "2");
    let avg = fs::read_to_string(a.join("avg_series.csv")).unwrap();
    let other = fs::read_to_string(b.join("avg_series.csv")).unwrap();
    // the echoed config differs only in output_dir and threads
    let strip = |s: &str| {
        s.lines()
            .filter(|l| !l.starts_with("# config="))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(strip(&avg), strip(&other));
    let again = run("a", "1");
    assert_eq!(
        avg,
        fs::read_to_string(again.join("avg_series.csv")).unwrap()
    );
    assert!(avg.contains("# config={"));
    assert!(avg.contains("convention=semiclassical"));
    assert!(avg.contains("rng=chacha8 seed=0"));
    assert!(!avg.contains("timestamp"));

    let rows = data_rows(&a.join("avg_series.csv"));
    assert_eq!(rows[0], "t,qcf,qf_abs2,cf,i1,i2,cross,i1_pred");
    assert_eq!(rows.len(), 7);
    let first: Vec<f64> = rows[1]
        .split(',')
        .skip(1)
        .map(|v| v.parse().unwrap())
        .collect();
    assert!((first[0] - 1.0).abs() < 1e-6);
    for i in 0..3 {
        let p = a.join("packets").join(format!("series_{i:04}.csv"));
        assert_eq!(data_rows(&p).len(), 7);
    }

    let out = catqcf(&[
        "series",
        "--config",
        &cfg,
        "--out",
        dir.path().join("c").to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let stamped = fs::read_to_string(dir.path().join("c/avg_series.csv")).unwrap();
    assert!(stamped.contains("timestamp_unix=") && stamped.contains("runtime_s="));
}

#[test]
fn decompose_reports_first_order_echo_term() {
    let dir = tempfile::tempdir().unwrap();
    let out = catqcf(&[
        "decompose",
        "--set",
        "dim_N=16",
        "--set",
        "eps=[1e-4,0,0]",
        "--set",
        "n_packets=2",
        "--set",
        "t_max=4",
        "--set",
        "packet_files=false",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = data_rows(&dir.path().join("avg_decompose.csv"));
    assert_eq!(
        rows[0],
        "t,qcf,qf_abs2,cf,i1,i2,cross,i1_pred,cross_qf,i2_pred"
    );
    for row in &rows[1..] {
        let v: Vec<f64> = row.split(',').map(|x| x.parse().unwrap()).collect();
        assert!(v[9].is_finite());
        assert!((v[1] - 1.0 - v[4] - v[5] - v[6]).abs() < 1e-10);
    }
    assert!(!dir.path().join("packets").exists());
}

#[test]
fn scans_write_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let eps_dir = dir.path().join("eps");
    let out = catqcf(&[
        "scan-eps",
        "--set",
        "dim_N=32",
        "--set",
        "n_packets=3",
        "--set",
        "eps_axis=[1e-8,1e-7,1e-6,1e-5,1e-4]",
        "--set",
        "eps_direction=[0,0,1]",
        "--no-timestamp",
        "--out",
        eps_dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = data_rows(&eps_dir.join("breaktimes.csv"));
    assert_eq!(rows[0], "eps,p,t_br,lambda");
    assert_eq!(rows.len(), 1 + 5 * 3);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(eps_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["rng"], "chacha8");
    assert_eq!(summary["abscissa"], "-log eps");
    assert!(summary["fits"][0]["fit"]["slope"].as_f64().unwrap() > 0.0);
    assert!(summary.get("runtime_s").is_none());

    let n_dir = dir.path().join("n");
    let out = catqcf(&[
        "scan-n",
        "--set",
        "n_axis=[16,32,64]",
        "--set",
        "eps=[1e-4,0,0]",
        "--set",
        "n_packets=2",
        "--out",
        n_dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = data_rows(&n_dir.join("breaktimes.csv"));
    assert_eq!(rows[0], "N,p,t_br,lambda");
    assert!(rows[1].starts_with("16,0.9,"));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(n_dir.join("summary.json")).unwrap()).unwrap();
    assert!(summary["runtime_s"].as_f64().is_some());
}
