//! The four workflows. Each writes human-readable text to `w`, writes its
//! artifact to the configured output path and returns the exit code.

use crate::config::{CommandName, RunConfig};
use crate::error::{CliError, EXIT_FAILURE, EXIT_NOT_CONVERGED, EXIT_OK, EXIT_REFUSED};
use crate::ingest::ingest_csv;
use mnar_core::estimation::{fit_mle, Codec, FitResult};
use mnar_core::identifiability::{
    counterexample, decide, registry, resolve_with_fit, verify_counterexample, CounterexamplePair,
    IdentifiabilityReport, Verdict, VerifyResult, REGISTRY_IDS,
};
use mnar_core::model::{ModelSpec, ObservedDataset};
use mnar_core::simulation::{catalog, find_scenario, run_study, write_summary, StudyOptions};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

/// Default number of starts per fit in simulation studies.
pub const SIMULATE_STARTS: usize = 3;
pub const SIMULATE_REPS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub path: Option<String>,
    pub n: usize,
    pub n_missing: usize,
    pub covariates: Vec<String>,
}

/// Result document of `fit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitArtifact {
    pub data: DataSummary,
    pub report: IdentifiabilityReport,
    /// Absent when the template was refused before fitting.
    pub fit: Option<FitResult>,
    /// Natural-scale values of the second parameter set, aligned with
    /// `fit.estimates`, when the data cannot separate the two.
    pub alternative: Option<Vec<f64>>,
    pub warnings: Vec<String>,
    pub exit_code: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyRow {
    #[serde(flatten)]
    pub result: VerifyResult,
    pub passed: bool,
}

pub fn run(config: &RunConfig, w: &mut dyn Write) -> Result<i32, CliError> {
    match config.command {
        Some(CommandName::Fit) => cmd_fit(config, w),
        Some(CommandName::Diagnose) => cmd_diagnose(config, w),
        Some(CommandName::Simulate) => cmd_simulate(config, w),
        Some(CommandName::Verify) => cmd_verify(config, w),
        None => Err(CliError::Usage("no command given: use fit, diagnose, simulate or verify".into())),
    }
}

fn load_data(config: &RunConfig) -> Result<(ObservedDataset, DataSummary), CliError> {
    let path = config.data.as_ref().ok_or_else(|| CliError::Usage("no dataset given (--data)".into()))?;
    let data = ingest_csv(path, &config.csv_spec()?)?;
    if data.is_empty() {
        return Err(CliError::Usage(format!("dataset {} has no rows", path.display())));
    }
    let summary = DataSummary {
        path: Some(path.display().to_string()),
        n: data.len(),
        n_missing: data.n_missing(),
        covariates: data.covariate_names().to_vec(),
    };
    Ok((data, summary))
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<(), CliError> {
    if let Some(path) = path {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), value)?;
    }
    Ok(())
}

fn alternative_values(fit: &FitResult, dual: &ModelSpec) -> Result<Vec<f64>, CliError> {
    Ok(Codec::new(&fit.template)?.natural(dual))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.6}"))
}

fn print_fit(w: &mut dyn Write, fit: &FitResult, alternative: Option<&[f64]>) -> std::io::Result<()> {
    match alternative {
        Some(_) => writeln!(w, "{:<20} {:>14} {:>12} {:>14}", "parameter", "set 1", "se", "set 2")?,
        None => writeln!(w, "{:<20} {:>14} {:>12} {:>27}", "parameter", "estimate", "se", "95% interval")?,
    }
    for (i, e) in fit.estimates.iter().enumerate() {
        let tail = match (alternative, e.se) {
            (Some(alt), _) => format!("{:>14.6}", alt[i]),
            (None, Some(se)) => format!("{:>27}", format!("[{:.4}, {:.4}]", e.value - 1.96 * se, e.value + 1.96 * se)),
            (None, None) => format!("{:>27}", "-"),
        };
        writeln!(w, "{:<20} {:>14.6} {:>12} {tail}", e.name, e.value, fmt_opt(e.se))?;
    }
    writeln!(w, "log-likelihood {:.3}   AIC {:.3}   k {}", fit.loglik, fit.aic, fit.k)?;
    writeln!(
        w,
        "converged {} ({:?}, {} iterations, gradient {:.2e}, {} starts)",
        fit.converged, fit.termination, fit.iterations, fit.grad_norm, fit.n_starts_used
    )?;
    if let Some(note) = &fit.covariance_note {
        writeln!(w, "standard errors unavailable: {note}")?;
    }
    Ok(())
}

fn print_report(w: &mut dyn Write, report: &IdentifiabilityReport) -> std::io::Result<()> {
    writeln!(w, "verdict: {}", serde_json::to_value(report.verdict).unwrap_or_default().as_str().unwrap_or(""))?;
    writeln!(w, "basis: {}", report.justification)?;
    if let Some(t1) = report.tau1 {
        let tau2 = report.tau2.as_deref().unwrap_or(&[]);
        writeln!(w, "tau1 {t1:.6}   tau2 {tau2:?}   Wald p {}", fmt_opt(report.tau_wald_p))?;
    }
    Ok(())
}

pub fn cmd_fit(config: &RunConfig, w: &mut dyn Write) -> Result<i32, CliError> {
    let (data, summary) = load_data(config)?;
    let template = config.fit_template(data.width())?;
    let report = decide(&template);
    let mut warnings = Vec::new();
    let out = config.out.as_deref();

    if report.verdict == Verdict::NotIdentifiable {
        warnings.push("the template is not identifiable; no estimates are reported".to_string());
        print_report(w, &report)?;
        writeln!(w, "refused: {}", warnings[0])?;
        let artifact =
            FitArtifact { data: summary, report, fit: None, alternative: None, warnings, exit_code: EXIT_REFUSED };
        write_json(out, &artifact)?;
        return Ok(EXIT_REFUSED);
    }

    let fit = fit_mle(&template, &data, &config.fit_options())?;
    let report = resolve_with_fit(report, &fit);
    let mut code = EXIT_OK;
    let mut alternative = None;
    match report.verdict {
        Verdict::IdentifiableUpToSignOfBeta | Verdict::Conditional => {
            warnings.push(
                "two parameter sets with opposite signs of beta fit the data equally well; rerun with --beta-sign to select one"
                    .to_string(),
            );
            if let Some(dual) = fit.dual.as_ref() {
                alternative = Some(alternative_values(&fit, dual)?);
            }
            code = EXIT_REFUSED;
        }
        Verdict::Unknown => {
            warnings.push("no identifiability result covers this template; the estimates may not be unique".to_string())
        }
        Verdict::Identifiable | Verdict::NotIdentifiable => {}
    }
    if !fit.converged {
        warnings.push(format!("the optimizer did not converge ({:?})", fit.termination));
        code = EXIT_NOT_CONVERGED;
    }

    writeln!(w, "n = {}, missing = {}", summary.n, summary.n_missing)?;
    print_report(w, &report)?;
    print_fit(w, &fit, alternative.as_deref())?;
    for msg in &warnings {
        writeln!(w, "warning: {msg}")?;
    }
    let artifact = FitArtifact { data: summary, report, fit: Some(fit), alternative, warnings, exit_code: code };
    write_json(out, &artifact)?;
    Ok(code)
}

pub fn cmd_diagnose(config: &RunConfig, w: &mut dyn Write) -> Result<i32, CliError> {
    let data = match &config.data {
        Some(_) => Some(load_data(config)?.0),
        None => None,
    };
    let width = match (&data, &config.covariate_columns) {
        (Some(d), _) => d.width(),
        (None, Some(cols)) => cols.len(),
        (None, None) => 0,
    };
    let template = config.fit_template(width)?;
    let mut report = decide(&template);
    let mut code = EXIT_OK;
    if report.verdict == Verdict::Conditional {
        if let Some(data) = &data {
            let fit = fit_mle(&template, data, &config.fit_options())?;
            if !fit.converged {
                code = EXIT_NOT_CONVERGED;
            }
            report = resolve_with_fit(report, &fit);
        } else {
            writeln!(w, "no dataset given: the tau statistics are evaluated at the template's values")?;
        }
    }
    print_report(w, &report)?;
    if let Some(dual) = &report.dual {
        writeln!(w, "second parameter set: {}", serde_json::to_string(dual)?)?;
    }
    write_json(config.out.as_deref(), &report)?;
    Ok(code)
}

pub fn cmd_simulate(config: &RunConfig, w: &mut dyn Write) -> Result<i32, CliError> {
    let id =
        config.scenario.as_deref().ok_or_else(|| CliError::Usage(scenario_list("no scenario given (--scenario)")))?;
    let scenario =
        find_scenario(id).ok_or_else(|| CliError::Usage(scenario_list(&format!("unknown scenario `{id}`"))))?;
    let defaults = StudyOptions::default();
    let fit = mnar_core::estimation::FitOptions {
        n_starts: config.n_starts.unwrap_or(SIMULATE_STARTS),
        compute_se: false,
        ..config.fit_options()
    };
    let opts = StudyOptions {
        reps: config.reps.unwrap_or(SIMULATE_REPS),
        n: config.n.unwrap_or(scenario.n),
        base_seed: config.seed.unwrap_or(defaults.base_seed),
        fit,
    };
    if opts.reps == 0 || opts.n == 0 {
        return Err(CliError::Usage("reps and n must be positive".into()));
    }
    let run = run_study(&scenario, &scenario.default_fits(), &opts)?;
    match config.out.as_deref() {
        Some(path) => {
            write_summary(&run.summary, std::fs::File::create(path)?)?;
            for t in &run.summary.templates {
                writeln!(w, "{}: {} of {} replicates converged", t.fit_template, t.reps_converged, run.summary.reps)?;
            }
            writeln!(w, "summary written to {}", path.display())?;
        }
        None => write_summary(&run.summary, &mut *w)?,
    }
    Ok(EXIT_OK)
}

fn scenario_list(msg: &str) -> String {
    let ids: Vec<String> = catalog().into_iter().map(|s| s.id).collect();
    format!("{msg}; available scenarios: {}", ids.join(", "))
}

/// Checks the given pairs and prints one PASS/FAIL row each.
pub fn verify_pairs(pairs: &[CounterexamplePair], w: &mut dyn Write) -> Result<Vec<VerifyRow>, CliError> {
    let rows: Vec<VerifyRow> = pairs
        .iter()
        .map(|p| {
            let result = verify_counterexample(p);
            VerifyRow { passed: result.passed(), result }
        })
        .collect();
    writeln!(w, "{:<28} {:>14} {:>8}  result", "example", "max_abs_diff", "points")?;
    for r in &rows {
        let status = if r.passed { "PASS" } else { "FAIL" };
        writeln!(w, "{:<28} {:>14.3e} {:>8}  {status}", r.result.id, r.result.max_abs_diff, r.result.grid_points)?;
    }
    Ok(rows)
}

pub fn cmd_verify(config: &RunConfig, w: &mut dyn Write) -> Result<i32, CliError> {
    let pairs = match &config.examples {
        None => registry(),
        Some(ids) => ids
            .iter()
            .map(|id| {
                counterexample(id).ok_or_else(|| {
                    CliError::Usage(format!("unknown example `{id}`; registered: {}", REGISTRY_IDS.join(", ")))
                })
            })
            .collect::<Result<_, _>>()?,
    };
    let rows = verify_pairs(&pairs, w)?;
    write_json(config.out.as_deref(), &rows)?;
    Ok(if rows.iter().all(|r| r.passed) { EXIT_OK } else { EXIT_FAILURE })
}
