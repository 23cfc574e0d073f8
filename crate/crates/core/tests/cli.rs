use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

fn cpdcond(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cpdcond"))
        .args(args)
        .env("CPDCOND_WORKERS", "2")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn sample_writes_outputs_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = cpdcond(&[
            "sample",
            "--shape",
            "2x2x2",
            "--rank",
            "2",
            "--target-real",
            "1000",
            "--seed",
            "7",
            "--out",
            path_str(out),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let summary = json(&a.join("summary.json"));
    let f = summary["real_fraction"].as_f64().unwrap();
    assert!((0.75..=0.82).contains(&f), "{f}");
    let total = summary["samples"].as_u64().unwrap();
    assert!((1150..=1450).contains(&total), "{total}");
    let manifest = json(&a.join("manifest.json"));
    assert_eq!(manifest["command"], "sample");
    assert_eq!(manifest["master_seed"], 7);
    assert_eq!(manifest["config"]["workers"], 2);
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 2);
    assert_eq!(
        fs::read(a.join("samples.csv")).unwrap(),
        fs::read(b.join("samples.csv")).unwrap()
    );
}

#[test]
fn sample_rejects_non_perfect_space() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let o = cpdcond(&[
        "sample",
        "--shape",
        "3x3x3",
        "--rank",
        "4",
        "--target-real",
        "10",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("not a perfect"));
    assert!(!out.exists());
}

#[test]
fn sample_reports_io_failure_with_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = blocker.join("sub");
    let o = cpdcond(&[
        "sample",
        "--shape",
        "2x2x2",
        "--rank",
        "2",
        "--target-real",
        "5",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code(&o), 3);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&cpdcond(&["sample", "--shape", "2x2x2"])), 2);
    assert_eq!(code(&cpdcond(&["no-such-command"])), 2);
    assert_eq!(
        code(&cpdcond(&[
            "sample",
            "--shape",
            "2y2",
            "--rank",
            "2",
            "--target-real",
            "5",
            "--out",
            "/tmp/unused"
        ])),
        2
    );
    assert_eq!(code(&cpdcond(&["--help"])), 0);
}

fn write_power_law_csv(path: &Path, n: usize, b: f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut text = String::from("shape,r,seed_index,kind,kappa,kappa_ang,tensor_norm,steps\n");
    for i in 0..n {
        let u: f64 = rng.random_range(f64::EPSILON..1.0);
        let x = u.powf(-1.0 / b);
        text.push_str(&format!("2x2x2,2,{i},real,{x},{x},1.0,10\n"));
    }
    text.push_str("2x2x2,2,0,real,inf,inf,1.0,10\n");
    text.push_str("2x2x2,2,0,complex,,,1.0,10\n");
    fs::write(path, text).unwrap();
}

#[test]
fn fit_recovers_synthetic_exponent() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("s.csv");
    write_power_law_csv(&input, 20_000, 1.8);
    let out = dir.path().join("fit.json");
    let o = cpdcond(&[
        "fit",
        "--in",
        path_str(&input),
        "--which",
        "angular",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rep = json(&out);
    let b = rep["b"].as_f64().unwrap();
    assert!((b - 1.8).abs() < 0.05, "{b}");
    assert_eq!(rep["excluded_inf"], 1);
    assert_eq!(rep["samples"], 20_001);
    assert!(rep["truncated_mean"].is_number());
    let ccdf = fs::read_to_string(dir.path().join("fit.ccdf.csv")).unwrap();
    assert!(ccdf.starts_with("x,ccdf\n"));
    assert!(dir.path().join("fit.manifest.json").exists());
}

#[test]
fn fit_notes_infinite_mean_for_heavy_tail() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("s.csv");
    write_power_law_csv(&input, 5_000, 0.7);
    let out = dir.path().join("fit.json");
    let o = cpdcond(&[
        "fit",
        "--in",
        path_str(&input),
        "--which",
        "regular",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("tail-truncated mean: infinite"));
    assert_eq!(json(&out)["truncated_mean"], "inf");
}

#[test]
fn fit_without_data_exits_4_and_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("empty.csv");
    fs::write(&input, "shape,r,seed_index,kind,kappa,kappa_ang,tensor_norm,steps\n").unwrap();
    let out = dir.path().join("fit.json");
    let o = cpdcond(&[
        "fit",
        "--in",
        path_str(&input),
        "--which",
        "regular",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code(&o), 4);
    let m = json(&dir.path().join("fit.manifest.json"));
    assert_eq!(m["exit_code"], 4);

    // Too few points in the fit range.
    write_power_law_csv(&input, 50, 1.0);
    let o = cpdcond(&[
        "fit",
        "--in",
        path_str(&input),
        "--which",
        "regular",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("insufficient data"));
}

#[test]
fn fit_missing_input_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fit.json");
    let o = cpdcond(&[
        "fit",
        "--in",
        "/nonexistent/s.csv",
        "--which",
        "regular",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code(&o), 3);
    assert!(dir.path().join("fit.manifest.json").exists());
}

fn condition_json(args: &[&str]) -> Value {
    let o = cpdcond(args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn condition_inline_factors() {
    let v = condition_json(&["condition", "--factors", "3:1,0;0,1;1,0"]);
    assert_eq!(v["kappa"].as_f64().unwrap(), 1.0);
    assert_eq!(v["rank"], 1);

    let v = condition_json(&["condition", "--factors", "2:1,0;1,0;1,0/5:0,1;0,1;0,1"]);
    assert!((v["kappa"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!((v["kappa_angular"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert_eq!(v["kruskal_identifiable"], true);

    let v = condition_json(&["condition", "--factors", "1,0;1,0;1,0/1,1e-2;1,1e-2;1,1e-2"]);
    let k = v["kappa"].as_f64().unwrap();
    assert!(k.is_finite() && k > 1e5, "{k}");
}

#[test]
fn condition_from_file_and_malformed_input() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    fs::write(
        &path,
        r#"{"dims":[2,2,2],"terms":[{"scale":1.0,"factors":[[1,0],[1,0],[1,0]]},{"scale":4.0,"factors":[[0,1],[0,1],[0,1]]}]}"#,
    )
    .unwrap();
    let v = condition_json(&["condition", "--cpd", path_str(&path)]);
    assert!((v["kappa_angular"].as_f64().unwrap() - 1.0).abs() < 1e-12);

    fs::write(&path, "{not json").unwrap();
    assert_eq!(code(&cpdcond(&["condition", "--cpd", path_str(&path)])), 2);
    assert_eq!(code(&cpdcond(&["condition", "--factors", "1,0;x"])), 2);
    assert_eq!(code(&cpdcond(&["condition", "--factors", "1,0;1,0/1,0,0;1,0"])), 2);
    assert_eq!(code(&cpdcond(&["condition"])), 2);
}

#[test]
fn bf_table_rows() {
    let o = cpdcond(&["bf-table", "--n-max", "5", "--empirical", "2=0.7853"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].contains("0.78539816339") && rows[0].ends_with("0.7853"));
    assert!(rows[1].contains("0.5"));
    assert!(rows[3].contains("0.1111111111"));
    assert_eq!(code(&cpdcond(&["bf-table", "--empirical", "two"])), 2);
}

#[test]
fn verify_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("v.json");
    let o = cpdcond(&["verify", "--only", "check_cos_inequality", "--json", path_str(&path)]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("check_cos_inequality") && text.contains("PASS"));
    let reports = json(&path);
    assert_eq!(reports[0]["name"], "check_cos_inequality");
    assert!(dir.path().join("v.manifest.json").exists());

    assert_eq!(code(&cpdcond(&["verify", "--only", "check_nothing"])), 2);
}

#[test]
fn verify_default_run_passes() {
    let o = cpdcond(&["verify", "--trials", "200", "--seed", "3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 10);
}
