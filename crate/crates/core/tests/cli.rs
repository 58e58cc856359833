use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use wiks::calibration::CalibrationResult;
use wiks::distributions::UnivariateModel;
use wiks::index::Verdict;
use wiks::io::{read_json, TwoSampleReport};
use wiks::power::PowerTable;
use wiks::SeedSpec;

fn wiks_cmd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wiks"))
        .args(args)
        .env_remove("WIKS_BUDGET_CAP")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write_sample(dir: &Path, name: &str, values: &[f64]) -> PathBuf {
    let path = dir.join(name);
    let text: String = values.iter().map(|v| format!("{v}\n")).collect();
    std::fs::write(&path, format!("value\n{text}")).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&wiks_cmd(&["--help"])), 0);
    assert_eq!(code(&wiks_cmd(&["test", "--help"])), 0);
    assert_eq!(code(&wiks_cmd(&["--version"])), 0);
    assert_eq!(code(&wiks_cmd(&[])), 64);
    assert_eq!(code(&wiks_cmd(&["calibrate", "--alpha", "x"])), 64);
}

#[test]
fn identical_samples_are_accepted_and_the_report_round_trips() {
    let dir = TempDir::new().unwrap();
    let x = UnivariateModel::standard_normal().sample(50, SeedSpec::root(1)).unwrap();
    let xp = write_sample(dir.path(), "x.csv", &x);
    let yp = write_sample(dir.path(), "y.csv", &x);
    let out = dir.path().join("report.json");
    let run = wiks_cmd(&[
        "test", "--x", s(&xp), "--y", s(&yp), "--replicates", "200", "--s-draws", "200", "--out",
        s(&out),
    ]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let stdout = String::from_utf8(run.stdout).unwrap();
    assert!(stdout.contains("accept H0"), "{stdout}");
    let report: TwoSampleReport = read_json(&out).unwrap();
    assert_eq!(report.decision, Verdict::AcceptH0);
    assert_eq!((report.n, report.m), (50, 50));
    assert_eq!(report.baselines.len(), 2);
    assert!(report.baselines.iter().all(|b| b.report.is_some()));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(wiks::io::to_json(&report).unwrap(), text);
}

#[test]
fn shifted_samples_are_rejected() {
    let dir = TempDir::new().unwrap();
    let x = UnivariateModel::standard_normal().sample(50, SeedSpec::root(2)).unwrap();
    let y = UnivariateModel::normal(3.0, 1.0).sample(50, SeedSpec::root(3)).unwrap();
    let xp = write_sample(dir.path(), "x.csv", &x);
    let yp = write_sample(dir.path(), "y.csv", &y);
    let run = wiks_cmd(&["test", "--x", s(&xp), "--y", s(&yp), "--threshold", "0.727"]);
    assert_eq!(code(&run), 0);
    assert!(String::from_utf8(run.stdout).unwrap().contains("reject H0"));
}

#[test]
fn bivariate_files_are_tested() {
    let dir = TempDir::new().unwrap();
    let xp = dir.path().join("x.csv");
    let yp = dir.path().join("y.csv");
    std::fs::write(&xp, "a,b\n0,0\n1,1\n2,0.5\n").unwrap();
    std::fs::write(&yp, "a,b\n5,5\n6,6\n7,5.5\n").unwrap();
    let out = dir.path().join("r.json");
    let run = wiks_cmd(&[
        "test", "--x", s(&xp), "--y", s(&yp), "--threshold", "0.5", "--s-draws", "50", "--out",
        s(&out),
    ]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let report: TwoSampleReport = read_json(&out).unwrap();
    assert_eq!(report.dimension, 2);
    assert!(report.baselines.iter().all(|b| b.error.is_some()));
}

#[test]
fn input_errors_map_to_exit_two() {
    let dir = TempDir::new().unwrap();
    let good = write_sample(dir.path(), "good.csv", &[1.0, 2.0]);
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "1.0\n2.0\nabc\n").unwrap();
    let run = wiks_cmd(&["test", "--x", s(&good), "--y", s(&bad), "--threshold", "0.7"]);
    assert_eq!(code(&run), 2);
    let err = String::from_utf8(run.stderr).unwrap();
    assert!(err.contains("bad.csv:3"), "{err}");
    let missing = dir.path().join("missing.csv");
    let run = wiks_cmd(&["test", "--x", s(&good), "--y", s(&missing), "--threshold", "0.7"]);
    assert_eq!(code(&run), 2);
}

#[test]
fn calibration_is_byte_identical_across_runs_and_worker_counts() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let args = ["calibrate", "--replicates", "40", "--s-draws", "30", "--seed", "5", "--out"];
    let mut first: Vec<&str> = args.to_vec();
    first.extend([s(&a), "--workers", "1"]);
    let mut second: Vec<&str> = args.to_vec();
    second.extend([s(&b), "--workers", "3"]);
    assert_eq!(code(&wiks_cmd(&first)), 0);
    assert_eq!(code(&wiks_cmd(&second)), 0);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let result: CalibrationResult = read_json(&a).unwrap();
    assert_eq!(result.replicate_values.len(), 40);
    assert_eq!(wiks::io::to_json(&result).unwrap(), std::fs::read_to_string(&a).unwrap());
}

#[test]
fn two_replicates_at_half_level_take_the_smaller_value() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("c.json");
    let run = wiks_cmd(&[
        "calibrate", "--alpha", "0.5", "--replicates", "2", "--s-draws", "20", "--out", s(&out),
    ]);
    assert_eq!(code(&run), 0);
    let result: CalibrationResult = read_json(&out).unwrap();
    let min = result.replicate_values.iter().copied().fold(f64::INFINITY, f64::min);
    assert_eq!(result.threshold, min);
}

#[test]
fn z_quantile_calibration_runs() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("z.json");
    let run = wiks_cmd(&["calibrate", "--mode", "z_quantile", "--replicates", "300", "--out", s(&out)]);
    assert_eq!(code(&run), 0);
    let result: CalibrationResult = read_json(&out).unwrap();
    assert!(result.threshold > 0.0 && result.threshold < 1.0);
}

#[test]
fn budget_cap_from_flag_and_environment() {
    assert_eq!(code(&wiks_cmd(&["calibrate", "--budget-cap", "1000"])), 3);
    let run = Command::new(env!("CARGO_BIN_EXE_wiks"))
        .args(["calibrate", "--replicates", "10", "--s-draws", "10"])
        .env("WIKS_BUDGET_CAP", "99")
        .output()
        .unwrap();
    assert_eq!(code(&run), 3);
    let err = String::from_utf8(run.stderr).unwrap();
    assert!(err.contains("replicates="), "{err}");
}

#[test]
fn power_table_is_identical_across_worker_counts() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let base = [
        "power", "--scenarios", "1", "--thetas", "0,1", "--reps", "20", "--s-draws", "30",
        "--threshold", "0.727", "--out",
    ];
    let mut first: Vec<&str> = base.to_vec();
    first.extend([s(&a), "--workers", "1"]);
    let mut second: Vec<&str> = base.to_vec();
    second.extend([s(&b), "--workers", "2"]);
    assert_eq!(code(&wiks_cmd(&first)), 0);
    assert_eq!(code(&wiks_cmd(&second)), 0);
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    assert!(text.starts_with("scenario,theta,method,power,reps,mc_se\n"));
    let table = PowerTable::read_csv(text.as_bytes()).unwrap();
    assert_eq!(table.rows.len(), 6);
    assert_eq!(table.to_csv_string().unwrap(), text);
}

#[test]
fn power_auto_calibrates_and_writes_csv_to_stdout() {
    let run = wiks_cmd(&[
        "power", "--scenarios", "5", "--thetas", "1", "--methods", "WIKS", "--reps", "10",
        "--replicates", "20", "--s-draws", "20",
    ]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let table = PowerTable::read_csv(run.stdout.as_slice()).unwrap();
    assert_eq!(table.rows.len(), 1);
}

#[test]
fn power_usage_errors() {
    assert_eq!(code(&wiks_cmd(&["power", "--scenarios", ""])), 64);
    assert_eq!(code(&wiks_cmd(&["power", "--scenarios", "42"])), 64);
    assert_eq!(code(&wiks_cmd(&["power", "--scenarios", "9", "--methods", "KS"])), 64);
    assert_eq!(code(&wiks_cmd(&["power", "--methods", "HOLMES"])), 64);
}

#[test]
fn config_file_values_are_overridden_by_flags() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "replicates = 7\ns-draws = 10\nalpha = 0.5\nseed = 3\n").unwrap();
    let out = dir.path().join("c.json");
    let run = wiks_cmd(&["calibrate", "--config", s(&cfg), "--replicates", "9", "--out", s(&out)]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let result: CalibrationResult = read_json(&out).unwrap();
    assert_eq!(result.config.replicates, 9);
    assert_eq!(result.config.alpha, 0.5);
    assert_eq!(result.seed, SeedSpec::root(3));

    std::fs::write(&cfg, "replicatez = 7\n").unwrap();
    assert_eq!(code(&wiks_cmd(&["calibrate", "--config", s(&cfg)])), 64);
    assert_eq!(code(&wiks_cmd(&["calibrate", "--config", s(&dir.path().join("none.toml"))])), 2);
}
