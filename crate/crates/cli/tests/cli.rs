use mnar_cli::commands::verify_pairs;
use mnar_cli::{read_dataset, CsvSpec, FitArtifact};
use mnar_core::identifiability::{perturbed_normal_logit, IdentifiabilityReport, Verdict};
use mnar_core::likelihood::obs_loglik;
use mnar_core::model::ObservedDataset;
use mnar_core::quadrature::QuadSettings;
use mnar_core::simulation::{find_scenario, generate, read_summary};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use tempfile::TempDir;

fn mnar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mnar")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write_csv(data: &ObservedDataset, path: &Path) {
    let mut text = String::from("y");
    for j in 0..data.width() {
        text.push_str(&format!(",x{}", j + 1));
    }
    text.push('\n');
    for row in data.rows() {
        text.push_str(&row.y.map_or("NA".to_string(), |y| format!("{y:.17e}")));
        for x in &row.x {
            text.push_str(&format!(",{x:.17e}"));
        }
        text.push('\n');
    }
    std::fs::write(path, text).unwrap();
}

fn scenario_csv(dir: &TempDir, id: &str, n: usize, seed: u64) -> PathBuf {
    let scenario = find_scenario(id).unwrap().with_n(n);
    let path = dir.path().join(format!("{id}.csv"));
    write_csv(&generate(&scenario, seed).unwrap(), &path);
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn verify_all_registered_pairs() {
    let out = mnar(&["verify"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert_eq!(text.matches("PASS").count(), 5, "{text}");
    assert!(!text.contains("FAIL"));
}

#[test]
fn verify_one_example() {
    let dir = TempDir::new().unwrap();
    let artifact = dir.path().join("verify.json");
    let out = mnar(&["verify", "--example", "ex2-exp", "--out", s(&artifact)]);
    assert_eq!(code(&out), 0);
    let rows: Vec<serde_json::Value> = serde_json::from_str(&std::fs::read_to_string(&artifact).unwrap()).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["id"], "ex2-exp");
    assert_eq!(rows[0]["passed"], true);
}

#[test]
fn tampered_pair_fails() {
    let mut buf = Vec::new();
    let rows = verify_pairs(&[perturbed_normal_logit()], &mut buf).unwrap();
    assert!(!rows[0].passed);
    assert!(rows[0].result.max_abs_diff > 1e-4);
    assert!(String::from_utf8(buf).unwrap().contains("FAIL"));
}

#[test]
fn unknown_example_is_a_usage_error() {
    let out = mnar(&["verify", "--example", "ex4"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("ex3-normal-logit"));
}

#[test]
fn ingest_counts() {
    let spec = CsvSpec::new("y");
    let d = read_dataset("y\n1\nNA\n2\nNA\n3\n".as_bytes(), &spec).unwrap();
    assert_eq!(d.n_observed(), 3);

    let mut text = String::from("wage,age,edu\n");
    for i in 0..3328 {
        let y = if i % 6 == 0 && i / 6 < 526 { "NA".to_string() } else { format!("{}", 1.0 + i as f64 * 1e-3) };
        text.push_str(&format!("{y},{},{}\n", 20 + i % 40, i % 12));
    }
    let spec = CsvSpec { covariate_columns: vec!["age".into(), "edu".into()], ..CsvSpec::new("wage") };
    let d = read_dataset(text.as_bytes(), &spec).unwrap();
    assert_eq!((d.len(), d.n_missing(), d.width()), (3328, 526, 2));
}

#[test]
fn fit_probit_writes_artifact_that_round_trips() {
    let dir = TempDir::new().unwrap();
    let data = scenario_csv(&dir, "s61-probit-b2", 1500, 11);
    let artifact = dir.path().join("fit.json");
    let out =
        mnar(&["fit", "--data", s(&data), "--y-column", "y", "--seed", "3", "--n-starts", "4", "--out", s(&artifact)]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let text = stdout(&out);
    assert!(text.contains("verdict: identifiable"), "{text}");

    let a: FitArtifact = serde_json::from_str(&std::fs::read_to_string(&artifact).unwrap()).unwrap();
    let fit = a.fit.expect("fit present");
    assert!(fit.converged);
    for name in ["gamma0", "sigma2", "alpha0", "beta"] {
        let e = fit.estimate(name).unwrap_or_else(|| panic!("{name} missing"));
        assert!(e.se.is_some_and(|s| s > 0.0), "{name}");
    }
    assert!(fit.aic.is_finite());
    assert!((fit.value("gamma0").unwrap()).abs() < 0.5);
    assert!((fit.value("beta").unwrap() - 2.0).abs() < 1.0);

    let reloaded = mnar_cli::ingest_csv(&data, &CsvSpec::new("y")).unwrap();
    let ll = obs_loglik(&fit.params, &reloaded, &QuadSettings::default()).unwrap();
    assert!((ll - fit.loglik).abs() < 1e-9, "{ll} vs {}", fit.loglik);
}

#[test]
fn logistic_fit_without_sign_reports_both_sets() {
    let dir = TempDir::new().unwrap();
    let data = scenario_csv(&dir, "logit-ex5", 2000, 5);
    let artifact = dir.path().join("fit.json");
    let base =
        ["fit", "--data", s(&data), "--y-column", "y", "--covariates", "x1", "--link", "logistic", "--n-starts", "3"];
    let mut args = base.to_vec();
    args.extend(["--out", s(&artifact)]);
    let out = mnar(&args);
    assert_eq!(code(&out), 4, "{}", stdout(&out));
    assert!(stdout(&out).contains("set 2"));
    let a: FitArtifact = serde_json::from_str(&std::fs::read_to_string(&artifact).unwrap()).unwrap();
    assert_eq!(a.report.verdict, Verdict::IdentifiableUpToSignOfBeta);
    let fit = a.fit.unwrap();
    let alt = a.alternative.expect("second parameter set");
    let beta = fit.estimates.iter().position(|e| e.name == "beta").unwrap();
    assert!((alt[beta] + fit.estimates[beta].value).abs() < 1e-12);
    assert!(!a.warnings.is_empty());

    let mut args = base.to_vec();
    args.extend(["--beta-sign", "+"]);
    let out = mnar(&args);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert!(!stdout(&out).contains("set 2"));
}

#[test]
fn empty_dataset_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("empty.csv");
    std::fs::write(&data, "y\n").unwrap();
    assert_eq!(code(&mnar(&["fit", "--data", s(&data), "--y-column", "y"])), 2);
}

#[test]
fn diagnose_probit_template() {
    let dir = TempDir::new().unwrap();
    let report_path = dir.path().join("report.json");
    let out = mnar(&["diagnose", "--link", "probit", "--out", s(&report_path)]);
    assert_eq!(code(&out), 0);
    let r: IdentifiabilityReport = serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(r.verdict, Verdict::Identifiable);
    assert!(r.tau1.is_none() && r.tau_wald_p.is_none());
}

#[test]
fn diagnose_logistic_detects_nonzero_tau() {
    let dir = TempDir::new().unwrap();
    let data = scenario_csv(&dir, "logit-tau2-3", 2000, 2);
    let report_path = dir.path().join("report.json");
    let out = mnar(&[
        "diagnose",
        "--data",
        s(&data),
        "--y-column",
        "y",
        "--covariates",
        "x1",
        "--link",
        "logistic",
        "--n-starts",
        "3",
        "--out",
        s(&report_path),
    ]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let r: IdentifiabilityReport = serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert!(r.tau_wald_p.unwrap() < 0.05, "{r:?}");
    assert_eq!(r.verdict, Verdict::Identifiable);
    assert!(r.dual.is_none());
}

#[test]
fn diagnose_logistic_on_null_data_reports_dual() {
    let dir = TempDir::new().unwrap();
    let data = scenario_csv(&dir, "logit-ex5", 2000, 5);
    let report_path = dir.path().join("report.json");
    let out = mnar(&[
        "diagnose",
        "--data",
        s(&data),
        "--y-column",
        "y",
        "--covariates",
        "x1",
        "--link",
        "logistic",
        "--n-starts",
        "3",
        "--out",
        s(&report_path),
    ]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let r: IdentifiabilityReport = serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(r.verdict, Verdict::IdentifiableUpToSignOfBeta);
    assert!(r.dual.is_some());
}

#[test]
fn simulate_writes_summary_csv() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("summary.csv");
    let out = mnar(&[
        "simulate",
        "--scenario",
        "s61-probit-b2",
        "--reps",
        "5",
        "--n",
        "500",
        "--seed",
        "7",
        "--out",
        s(&csv),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_summary(&csv).unwrap();
    assert!(rows.iter().any(|r| r.fit_template == "probit" && r.parameter == "beta"));
    assert!(rows.iter().all(|r| r.reps_converged <= 5 && r.n == 500 && r.scenario == "s61-probit-b2"));
}

#[test]
fn unknown_scenario_lists_catalog() {
    let out = mnar(&["simulate", "--scenario", "s99"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("s61-probit-b2"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("run.json");
    std::fs::write(&config, r#"{"command": "verify", "examples": ["ex1-unif", "ex2-exp"]}"#).unwrap();
    let out = mnar(&["--config", s(&config)]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out).matches("PASS").count(), 2);
    let out = mnar(&["--config", s(&config), "verify", "--example", "ex6-latent-ignorable"]);
    assert_eq!(stdout(&out).matches("PASS").count(), 1);
    assert!(stdout(&out).contains("ex6-latent-ignorable"));
}

#[test]
fn missing_command_is_a_usage_error() {
    assert_eq!(code(&mnar(&[])), 2);
}
