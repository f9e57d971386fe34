//! Multi-start maximum likelihood.

use super::codec::{Codec, FitTemplate};
use super::se::{natural_se, observed_information_covariance};
use super::starts::starting_points;
use crate::error::{Error, Result};
use crate::identifiability::{tau_test, TauTest};
use crate::likelihood::obs_loglik;
use crate::mechanism::LinkFamily;
use crate::model::{ModelSpec, ObservedDataset, OutcomeFamily};
use crate::optim::{minimize, numerical_gradient, sup_norm, BfgsOptions, Termination};
use crate::quadrature::QuadSettings;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Significance level below which the τ test rejects `τ₁ = τ₂ = 0`.
pub const TAU_LEVEL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub n_starts: usize,
    pub seed: u64,
    pub tol_grad: f64,
    pub tol_rel_f: f64,
    pub max_iter: usize,
    pub quad: QuadSettings,
    /// Compute the observed-information covariance and standard errors.
    pub compute_se: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        let b = BfgsOptions::default();
        Self {
            n_starts: 10,
            seed: 0,
            tol_grad: b.tol_grad,
            tol_rel_f: b.tol_rel_f,
            max_iter: b.max_iter,
            quad: QuadSettings::default(),
            compute_se: true,
        }
    }
}

impl FitOptions {
    pub fn bfgs(&self) -> BfgsOptions {
        BfgsOptions { tol_grad: self.tol_grad, tol_rel_f: self.tol_rel_f, max_iter: self.max_iter }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub name: String,
    pub value: f64,
    /// `None` for quantities held fixed or when the covariance is unavailable.
    pub se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub template: FitTemplate,
    pub params: ModelSpec,
    pub loglik: f64,
    pub aic: f64,
    /// Number of free parameters.
    pub k: usize,
    pub estimates: Vec<Estimate>,
    /// Estimate on the encoded scale.
    pub theta: Vec<f64>,
    /// Inverse observed information on the encoded scale.
    pub covariance: Option<Vec<Vec<f64>>>,
    /// Why the covariance is unavailable, with the condition number.
    pub covariance_note: Option<String>,
    pub converged: bool,
    pub n_starts_used: usize,
    pub grad_norm: f64,
    pub iterations: usize,
    pub termination: Termination,
    pub tau: Option<TauTest>,
    /// The other parameter set with the same observed distribution, when the
    /// data cannot tell them apart.
    pub dual: Option<ModelSpec>,
}

impl FitResult {
    pub fn estimate(&self, name: &str) -> Option<&Estimate> {
        self.estimates.iter().find(|e| e.name == name)
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.estimate(name).map(|e| e.value)
    }
}

pub fn aic(loglik: f64, k: usize) -> f64 {
    2.0 * k as f64 - 2.0 * loglik
}

/// Negative log-likelihood on the encoded scale; invalid points map to `+∞`.
pub(crate) fn objective<'a>(
    codec: &'a Codec,
    data: &'a ObservedDataset,
    quad: &'a QuadSettings,
) -> impl Fn(&[f64]) -> f64 + Sync + 'a {
    move |theta: &[f64]| match obs_loglik(&codec.decode(theta), data, quad) {
        Ok(v) => -v,
        Err(_) => f64::INFINITY,
    }
}

fn term_names(template: &FitTemplate, data: &ObservedDataset) -> (Vec<String>, Vec<String>) {
    let names = (!data.covariate_names().is_empty()).then(|| data.covariate_names());
    let outcome = template.model.outcome.features.term_names(names);
    let mechanism = template.model.mechanism.features().map(|f| f.term_names(names)).unwrap_or_default();
    (outcome, mechanism)
}

pub fn fit_mle(template: &FitTemplate, data: &ObservedDataset, opts: &FitOptions) -> Result<FitResult> {
    if data.is_empty() {
        return Err(Error::Data("dataset is empty".into()));
    }
    if data.n_observed() == 0 {
        return Err(Error::Data("dataset has no observed outcome".into()));
    }
    if opts.n_starts == 0 {
        return Err(Error::Contract("at least one start is needed".into()));
    }
    opts.quad.validate()?;
    template.model.validate(data.width())?;
    let codec = Codec::new(template)?;
    let f = objective(&codec, data, &opts.quad);
    let bfgs = opts.bfgs();
    let starts = starting_points(&codec, template, data, opts.n_starts, opts.seed);
    let runs: Vec<_> = starts.par_iter().map(|x0| minimize(&f, x0, &bfgs)).collect();
    let (index, best) = runs
        .iter()
        .enumerate()
        .filter(|(_, r)| r.f.is_finite())
        // highest log-likelihood, earliest start on ties
        .min_by(|(i, a), (j, b)| a.f.total_cmp(&b.f).then(i.cmp(j)))
        .ok_or_else(|| Error::Data("no starting point has a finite log-likelihood".into()))?;
    log::debug!("best of {} starts is start {index} with loglik {}", runs.len(), -best.f);

    let params = codec.decode(&best.x);
    let theta = codec.encode(&params);
    let loglik = obs_loglik(&params, data, &opts.quad)?;
    let grad_norm = sup_norm(&numerical_gradient(&f, &theta));
    let k = codec.len();
    let (outcome_terms, mechanism_terms) = term_names(template, data);
    let names = codec.natural_names(&outcome_terms, &mechanism_terms);
    let values = codec.natural(&params);

    let mut result = FitResult {
        template: template.clone(),
        params,
        loglik,
        aic: aic(loglik, k),
        k,
        estimates: names.into_iter().zip(values).map(|(name, value)| Estimate { name, value, se: None }).collect(),
        theta,
        covariance: None,
        covariance_note: None,
        converged: best.converged,
        n_starts_used: runs.len(),
        grad_norm,
        iterations: best.iterations,
        termination: best.termination,
        tau: None,
        dual: None,
    };
    if opts.compute_se {
        attach_standard_errors(&mut result, &codec, data, &opts.quad);
    }
    if result.params.mechanism.link == LinkFamily::Logistic
        && matches!(result.params.outcome.family, OutcomeFamily::Normal { .. })
    {
        let test = tau_test(&result)?;
        let rejects = test.wald_p.is_some_and(|p| p < TAU_LEVEL);
        if !rejects {
            result.dual = Some(super::dual_solution(&result.params)?);
        }
        result.tau = Some(test);
    }
    Ok(result)
}

fn attach_standard_errors(result: &mut FitResult, codec: &Codec, data: &ObservedDataset, quad: &QuadSettings) {
    match observed_information_covariance(codec, &result.theta, data, quad) {
        Ok(cov) => {
            let se = natural_se(codec, &result.theta, &cov);
            for (e, s) in result.estimates.iter_mut().zip(se) {
                e.se = s;
            }
            result.covariance = Some(cov.row_iter().map(|r| r.iter().copied().collect()).collect());
        }
        Err(e) => result.covariance_note = Some(e.to_string()),
    }
}

/// Recomputes standard errors of a fit, e.g. one loaded from an artifact.
pub fn standard_errors(fit: &FitResult, data: &ObservedDataset, quad: &QuadSettings) -> Result<Vec<Estimate>> {
    let codec = Codec::new(&fit.template)?;
    let cov = observed_information_covariance(&codec, &fit.theta, data, quad)?;
    let se = natural_se(&codec, &fit.theta, &cov);
    Ok(fit.estimates.iter().zip(se).map(|(e, se)| Estimate { name: e.name.clone(), value: e.value, se }).collect())
}
