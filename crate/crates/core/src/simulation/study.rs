//! Replicate runner, summaries and CSV export.

use super::scenario::{generate, FitSpec, SimScenario};
use crate::error::{Error, Result};
use crate::estimation::{fit_mle, FitOptions};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudyOptions {
    pub reps: usize,
    pub n: usize,
    pub base_seed: u64,
    pub fit: FitOptions,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self { reps: 200, n: 1500, base_seed: 1, fit: FitOptions::default() }
    }
}

/// One template's result on one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateFit {
    pub converged: bool,
    pub loglik: f64,
    pub aic: f64,
    pub estimates: Vec<(String, f64)>,
    /// Wald p-value of the τ test when the fit carries one.
    pub tau_wald_p: Option<f64>,
    pub error: Option<String>,
}

impl ReplicateFit {
    pub fn value(&self, name: &str) -> Option<f64> {
        self.estimates.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub rep: usize,
    pub seed: u64,
    pub missing_fraction: f64,
    /// In template order.
    pub fits: Vec<ReplicateFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub parameter: String,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateSummary {
    pub fit_template: String,
    pub reps_converged: usize,
    pub reps_excluded: usize,
    pub parameters: Vec<ParamSummary>,
}

impl TemplateSummary {
    pub fn parameter(&self, name: &str) -> Option<&ParamSummary> {
        self.parameters.iter().find(|p| p.parameter == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub scenario: String,
    pub n: usize,
    pub reps: usize,
    pub templates: Vec<TemplateSummary>,
    pub missing_fractions: Vec<f64>,
    /// `convergence[t][r]`: template `t` converged on replicate `r`.
    pub convergence: Vec<Vec<bool>>,
}

impl StudySummary {
    pub fn template(&self, name: &str) -> Option<&TemplateSummary> {
        self.templates.iter().find(|t| t.fit_template == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRun {
    pub summary: StudySummary,
    pub records: Vec<ReplicateRecord>,
}

/// Quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(parameter: &str, values: &[f64]) -> ParamSummary {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let sd = if sorted.len() > 1 {
        (sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    ParamSummary {
        parameter: parameter.to_string(),
        median: quantile(&sorted, 0.5),
        q1: quantile(&sorted, 0.25),
        q3: quantile(&sorted, 0.75),
        mean,
        sd,
    }
}

fn fit_replicate(spec: &FitSpec, data: &crate::model::ObservedDataset, opts: &FitOptions) -> ReplicateFit {
    match fit_mle(&spec.template, data, opts) {
        Ok(fit) => ReplicateFit {
            converged: fit.converged,
            loglik: fit.loglik,
            aic: fit.aic,
            estimates: fit.estimates.iter().map(|e| (e.name.clone(), e.value)).collect(),
            tau_wald_p: fit.tau.as_ref().and_then(|t| t.wald_p),
            error: None,
        },
        Err(e) => ReplicateFit {
            converged: false,
            loglik: f64::NAN,
            aic: f64::NAN,
            estimates: Vec::new(),
            tau_wald_p: None,
            error: Some(e.to_string()),
        },
    }
}

/// Runs `opts.reps` replicates; replicate `r` draws its data and seeds its
/// fits with `base_seed + r`. Failed fits are recorded, not fatal.
pub fn run_study(scenario: &SimScenario, fits: &[FitSpec], opts: &StudyOptions) -> Result<StudyRun> {
    if opts.reps == 0 {
        return Err(Error::Contract("a study needs at least one replicate".into()));
    }
    let scenario = scenario.clone().with_n(opts.n);
    let records = (0..opts.reps)
        .into_par_iter()
        .map(|rep| {
            let seed = opts.base_seed.wrapping_add(rep as u64);
            let data = generate(&scenario, seed)?;
            let fit_opts = FitOptions { seed, ..opts.fit };
            let fits = fits.iter().map(|spec| fit_replicate(spec, &data, &fit_opts)).collect();
            Ok(ReplicateRecord { rep, seed, missing_fraction: data.missing_fraction(), fits })
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize_records(&scenario.id, opts.n, fits, &records);
    Ok(StudyRun { summary, records })
}

pub fn summarize_records(scenario: &str, n: usize, fits: &[FitSpec], records: &[ReplicateRecord]) -> StudySummary {
    let mut templates = Vec::with_capacity(fits.len());
    let mut convergence = Vec::with_capacity(fits.len());
    for (t, spec) in fits.iter().enumerate() {
        let converged: Vec<&ReplicateFit> = records.iter().map(|r| &r.fits[t]).filter(|f| f.converged).collect();
        convergence.push(records.iter().map(|r| r.fits[t].converged).collect());
        let names: Vec<String> =
            converged.first().map(|f| f.estimates.iter().map(|(n, _)| n.clone()).collect()).unwrap_or_default();
        let parameters = names
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let values: Vec<f64> = converged.iter().map(|f| f.estimates[i].1).collect();
                summarize(name, &values)
            })
            .collect();
        templates.push(TemplateSummary {
            fit_template: spec.name.clone(),
            reps_converged: converged.len(),
            reps_excluded: records.len() - converged.len(),
            parameters,
        });
    }
    StudySummary {
        scenario: scenario.to_string(),
        n,
        reps: records.len(),
        templates,
        missing_fractions: records.iter().map(|r| r.missing_fraction).collect(),
        convergence,
    }
}

/// One line of the summary CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scenario: String,
    pub fit_template: String,
    pub parameter: String,
    pub n: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub mean: f64,
    pub sd: f64,
    pub reps_converged: usize,
}

pub const SUMMARY_COLUMNS: [&str; 10] =
    ["scenario", "fit_template", "parameter", "n", "median", "q1", "q3", "mean", "sd", "reps_converged"];

pub fn summary_rows(summary: &StudySummary) -> Vec<SummaryRow> {
    summary
        .templates
        .iter()
        .flat_map(|t| {
            t.parameters.iter().map(move |p| SummaryRow {
                scenario: summary.scenario.clone(),
                fit_template: t.fit_template.clone(),
                parameter: p.parameter.clone(),
                n: summary.n,
                median: p.median,
                q1: p.q1,
                q3: p.q3,
                mean: p.mean,
                sd: p.sd,
                reps_converged: t.reps_converged,
            })
        })
        .collect()
}

pub fn write_summary<W: std::io::Write>(summary: &StudySummary, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(SUMMARY_COLUMNS)?;
    for row in summary_rows(summary) {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn export_summary(summary: &StudySummary, path: &Path) -> Result<()> {
    write_summary(summary, std::fs::File::create(path)?)
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<Vec<SummaryRow>, _>>()?)
}
