use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use satprice::distributions::{NoiseDistribution, StudentT};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_satprice"));
    c.env_remove("SATPRICE_DATA_DIR");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn data_rows(text: &str) -> Vec<Vec<String>> {
    text.lines().filter(|l| !l.starts_with('#')).skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

fn price_csv(dir: &Path, rows: usize) -> PathBuf {
    let noise: NoiseDistribution = StudentT::new(3.5, 6.0, 0.4).unwrap().into();
    let returns = noise.sample(rows - 1, 3).unwrap();
    let mut p = 100.0;
    let mut text = String::from("Date,Adj Close\n");
    let start = chrono_like_date(0);
    text.push_str(&format!("{start},{p}\n"));
    for (i, r) in returns.iter().enumerate() {
        p *= 1.0 + r.max(-900.0) / 1000.0;
        text.push_str(&format!("{},{p}\n", chrono_like_date(i + 1)));
    }
    let path = dir.join("prices.csv");
    std::fs::write(&path, text).unwrap();
    path
}

// distinct, increasing ISO dates
fn chrono_like_date(i: usize) -> String {
    format!("{:04}-{:02}-{:02}", 1950 + i / 336, 1 + (i / 28) % 12, 1 + i % 28)
}

#[test]
fn black_scholes_one_year() {
    let o = run(&["price", "--method", "bs", "--horizon", "252", "--sigma", "0.3", "--strike", "49"]);
    assert!(o.status.success());
    let rows = data_rows(&stdout(&o));
    let p: f64 = rows[0][2].parse().unwrap();
    assert!((p - 7.12).abs() < 0.005);
}

#[test]
fn saturated_t_price_and_audit_fields() {
    let o = run(&["price", "--beta", "0.3", "--horizon", "22", "--strike", "49", "--format", "json"]);
    assert!(o.status.success());
    let v = json(&o);
    assert_eq!(v["config"]["noise"], "t");
    let row = &v["result"][0];
    let p = row["price"].as_f64().unwrap();
    assert!((p - 1.505).abs() < 0.02, "{p}");
    for key in ["input_scale", "input_shift", "achieved_mean", "achieved_sd"] {
        assert!(row[key].is_f64(), "{key}");
    }
    assert_eq!(v["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn strike_sweep_rows() {
    let o = run(&["price", "--method", "log-t", "--strike", "40,50,60"]);
    assert!(o.status.success());
    let rows = data_rows(&stdout(&o));
    assert_eq!(rows.len(), 3);
    let p: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(p[0] > p[1] && p[1] > p[2]);
}

#[test]
fn divergent_standard_model_is_a_numerical_failure() {
    let o = run(&["price", "--beta", "0", "--noise", "t"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("infinite"));
}

#[test]
fn simulate_rejects_zero_paths() {
    let o = run(&["simulate", "--paths", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_reruns_are_byte_identical() {
    let args = ["simulate", "--beta", "0.3", "--paths", "16384", "--seed", "5", "--noise", "t"];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(text.contains("# seed: 5"));
    let other = run(&["simulate", "--beta", "0.3", "--paths", "16384", "--seed", "6", "--noise", "t"]);
    assert_ne!(a.stdout, other.stdout);
}

#[test]
fn convolve_single_fold_echoes_the_grid() {
    let o = run(&["convolve", "--n", "1", "--truncate", "-305,116"]);
    assert!(o.status.success());
    let rows = data_rows(&stdout(&o));
    assert_eq!(rows.len(), 843);
    assert_eq!(rows[0][0], "-305");
}

#[test]
fn convolve_many_folds() {
    let o = run(&["convolve", "--n", "128", "--format", "json"]);
    assert!(o.status.success());
    let v = json(&o);
    assert!(v["result"]["moments"]["skewness"].as_f64().unwrap() < 0.0);
    for m in v["result"]["step_masses"].as_array().unwrap() {
        assert!((m.as_f64().unwrap() - 1.0).abs() < 1e-6);
    }
}

#[test]
fn convolve_rejects_inverted_bounds() {
    let o = run(&["convolve", "--n", "2", "--truncate", "116,-305"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn returns_on_three_rows() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.csv");
    std::fs::write(&path, "Date,Adj Close\n2000-01-03,100\n2000-01-04,110\n2000-01-05,99\n").unwrap();
    let o = run(&["returns", "--csv", path.to_str().unwrap(), "--horizons", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = data_rows(&stdout(&o));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][1], "2");
}

#[test]
fn missing_file_is_a_data_error() {
    let o = run(&["returns", "--csv", "/nonexistent/prices.csv"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(!o.stderr.is_empty());
}

#[test]
fn no_file_and_no_data_dir_is_a_usage_error() {
    assert_eq!(run(&["returns"]).status.code(), Some(2));
}

#[test]
fn data_dir_supplies_the_default_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("sp500.csv"), "Date,Adj Close\n2000-01-03,100\n2000-01-04,110\n2000-01-05,99\n")
        .unwrap();
    let o = bin().env("SATPRICE_DATA_DIR", dir.path()).args(["returns", "--horizons", "1"]).output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn fit_then_price_from_fit_file() {
    let dir = tempfile::tempdir().unwrap();
    let csv = price_csv(dir.path(), 3000);
    let fit_path = dir.path().join("fit.json");
    let o = run(&[
        "fit",
        "--csv",
        csv.to_str().unwrap(),
        "--horizon",
        "1",
        "--family",
        "t",
        "--format",
        "json",
        "--out",
        fit_path.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let fit: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&fit_path).unwrap()).unwrap();
    let nu = fit["result"]["params"]["nu"].as_f64().unwrap();
    assert!(nu > 2.0 && nu < 6.0, "{nu}");
    let o = run(&["price", "--fit-file", fit_path.to_str().unwrap(), "--horizon", "1", "--beta", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let too_long = run(&["fit", "--csv", csv.to_str().unwrap(), "--horizon", "5000"]);
    assert_eq!(too_long.status.code(), Some(3));
}

#[test]
fn bad_flags_are_usage_errors() {
    assert_eq!(run(&["price", "--method", "nope"]).status.code(), Some(2));
    assert_eq!(run(&["price", "--beta", "-1"]).status.code(), Some(2));
}

#[test]
fn report_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("report.toml");
    std::fs::write(
        &cfg,
        "horizons = [22]\nbetas = [0.3, 3.0]\n[simulation]\npaths = 16384\n[sweep]\nstrikes = [45.0, 50.0]\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = run(&["report", "--config", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["simulation_summary.csv", "horizon_prices.csv", "strike_sweep.csv"] {
        assert!(out.join(name).exists(), "{name}");
    }
    assert!(!out.join("return_stats.csv").exists());
    let t3 = std::fs::read_to_string(out.join("horizon_prices.csv")).unwrap();
    assert_eq!(data_rows(&t3).len(), 2);
}
