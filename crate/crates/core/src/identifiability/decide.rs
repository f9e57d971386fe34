//! Static decision table mapping a model template to an identifiability
//! verdict.

use super::tau::tau_of_model;
use super::uncorrelation::{linear_uncorrelation_check, VarianceForm};
use crate::estimation::{FitResult, FitTemplate, TAU_LEVEL};
use crate::mechanism::{condition_flags, ConditionFlags, LinkFamily, MechanismForm};
use crate::model::{FeatureMap, ModelSpec, OutcomeFamily};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Identifiable,
    IdentifiableUpToSignOfBeta,
    NotIdentifiable,
    /// Identifiable unless `τ₁ = τ₂ = 0`, which the data can test.
    Conditional,
    /// No result covers the combination.
    Unknown,
}

/// The result a verdict rests on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// Normal outcome, link without an exponential left tail.
    NormalLightTail,
    /// Normal outcome, sign of `β` known (or `β` fixed).
    NormalSignKnown,
    /// Normal outcome: only `σ²` and `|β|` are pinned down.
    NormalMagnitudeOnly,
    /// Normal outcome, Robit link with unknown degrees of freedom, `β ≠ 0`.
    RobitUnknownDf,
    /// Covariates, link without an exponential left tail.
    CovariatesLightTail,
    /// Covariates, sign of `β` known (or `β` fixed).
    CovariatesSignKnown,
    /// Covariates, `g` not a linear combination of the mean, the variance and
    /// a constant.
    CovariatesLinearUncorrelation,
    /// Exponential left tail: identifiable iff `(τ₁, τ₂) ≠ 0`.
    ExponentialTailTau,
    /// Normal mixture, link satisfies conditions A and B.
    NormalMixtureTails,
    /// Location mixture of t, link satisfies condition C.
    TMixtureTail,
    /// Normal mixture with a latent monotone mechanism, conditions A and B.
    LatentMixtureTails,
    /// `β` fixed at zero with a Robit link of unknown degrees of freedom:
    /// `ν` and `α` enter only through `T_ν(α)`.
    RobitDfConfounded,
    NotCovered,
}

/// Whether `(τ₁, τ₂) ≠ 0` is necessary and sufficient or only sufficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauCondition {
    NecessaryAndSufficient,
    SufficientOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentifiabilityReport {
    pub verdict: Verdict,
    pub basis: Basis,
    pub justification: String,
    pub flags: ConditionFlags,
    pub tau1: Option<f64>,
    pub tau2: Option<Vec<f64>>,
    pub tau_se: Option<Vec<f64>>,
    pub tau_wald_p: Option<f64>,
    pub tau_condition: Option<TauCondition>,
    pub slope_identifiable: bool,
    pub dual: Option<ModelSpec>,
}

fn flags_text(f: &ConditionFlags) -> String {
    format!("conditions A={} B={} C={}", f.a, f.b, f.c)
}

fn has_covariates(model: &ModelSpec) -> bool {
    !model.outcome.features.is_intercept_only() || model.mechanism.features().is_some_and(|f| !f.is_intercept_only())
}

struct Row {
    verdict: Verdict,
    basis: Basis,
    reason: &'static str,
}

fn row(verdict: Verdict, basis: Basis, reason: &'static str) -> Row {
    Row { verdict, basis, reason }
}

fn normal_row(template: &FitTemplate, flags: &ConditionFlags) -> Row {
    let model = &template.model;
    let free = template.free;
    let covariates = has_covariates(model);
    let sign_known = free.beta_sign.is_some() || !free.beta;
    if model.mechanism.is_latent() {
        return row(Verdict::Unknown, Basis::NotCovered, "latent monotone mechanisms are defined for mixture outcomes");
    }
    if free.robit_df {
        return if free.beta || model.mechanism.beta() != 0.0 {
            row(
                Verdict::Identifiable,
                Basis::RobitUnknownDf,
                "Robit link with unknown degrees of freedom; all parameters including the degrees of freedom are identified when beta is nonzero",
            )
        } else {
            row(
                Verdict::NotIdentifiable,
                Basis::RobitDfConfounded,
                "with beta fixed at zero the degrees of freedom and alpha enter only through T_nu(alpha)",
            )
        };
    }
    if flags.a {
        return if covariates {
            row(Verdict::Identifiable, Basis::CovariatesLightTail, "link satisfies condition A")
        } else {
            row(Verdict::Identifiable, Basis::NormalLightTail, "link satisfies condition A")
        };
    }
    if sign_known {
        return if covariates {
            row(Verdict::Identifiable, Basis::CovariatesSignKnown, "the sign of beta is declared")
        } else {
            row(Verdict::Identifiable, Basis::NormalSignKnown, "the sign of beta is declared")
        };
    }
    if covariates {
        let mech_features = model.mechanism.features().cloned().unwrap_or_else(FeatureMap::intercept_only);
        if linear_uncorrelation_check(&model.outcome.features, VarianceForm::Constant, &mech_features) {
            return row(
                Verdict::Identifiable,
                Basis::CovariatesLinearUncorrelation,
                "g has a covariate term outside the span of the mean and a constant (its coefficient assumed nonzero)",
            );
        }
    }
    row(
        Verdict::Conditional,
        Basis::ExponentialTailTau,
        "link has an exponential left tail: identifiable iff (tau1, tau2) != 0; otherwise sigma2 and |beta| are identified and a declared sign of beta resolves the rest",
    )
}

fn table(template: &FitTemplate, flags: &ConditionFlags) -> Row {
    let model = &template.model;
    let latent = matches!(model.mechanism.form, MechanismForm::LatentMonotone { .. });
    match &model.outcome.family {
        OutcomeFamily::Normal { .. } => normal_row(template, flags),
        _ if template.free.robit_df => row(Verdict::Unknown, Basis::NotCovered, "mixture results assume a known link"),
        OutcomeFamily::NormalMixture { .. } if latent => {
            if flags.a && flags.b {
                row(Verdict::Identifiable, Basis::LatentMixtureTails, "link satisfies conditions A and B")
            } else {
                row(
                    Verdict::Unknown,
                    Basis::NotCovered,
                    "latent monotone mechanism with a link failing condition A or B",
                )
            }
        }
        OutcomeFamily::NormalMixture { .. } => {
            if flags.a && flags.b {
                row(Verdict::Identifiable, Basis::NormalMixtureTails, "link satisfies conditions A and B")
            } else {
                row(Verdict::Unknown, Basis::NotCovered, "normal mixture with a link failing condition A or B")
            }
        }
        OutcomeFamily::TMixture { .. } if latent => {
            row(Verdict::Unknown, Basis::NotCovered, "t outcome with a latent monotone mechanism")
        }
        OutcomeFamily::TMixture { .. } => {
            if flags.c {
                row(Verdict::Identifiable, Basis::TMixtureTail, "link satisfies condition C")
            } else {
                row(Verdict::Unknown, Basis::NotCovered, "t mixture with a link failing condition C")
            }
        }
    }
}

/// Identifiability verdict for a template. Pure function of the template.
pub fn decide(template: &FitTemplate) -> IdentifiabilityReport {
    let model = &template.model;
    let flags = condition_flags(&model.mechanism.link);
    let r = table(template, &flags);
    let normal_additive = matches!(model.outcome.family, OutcomeFamily::Normal { .. }) && !model.mechanism.is_latent();
    let mut report = IdentifiabilityReport {
        verdict: r.verdict,
        basis: r.basis,
        justification: format!("{}; {}", r.reason, flags_text(&flags)),
        flags,
        tau1: None,
        tau2: None,
        tau_se: None,
        tau_wald_p: None,
        tau_condition: None,
        slope_identifiable: normal_additive || r.verdict == Verdict::Identifiable,
        dual: None,
    };
    if r.verdict == Verdict::Conditional {
        // evaluated at the template's values until a fit replaces them
        if let Ok(t) = tau_of_model(model) {
            report.tau1 = Some(t.tau1);
            report.tau2 = Some(t.tau2);
        }
        report.tau_condition = Some(if model.mechanism.link == LinkFamily::Logistic {
            TauCondition::NecessaryAndSufficient
        } else {
            TauCondition::SufficientOnly
        });
    }
    report
}

/// Convenience: decide for a model with every parameter free.
pub fn decide_model(model: &ModelSpec) -> IdentifiabilityReport {
    decide(&FitTemplate::new(model.clone()))
}

/// Updates a conditional report with the τ test of a fit. A rejection makes
/// the fit identifiable; otherwise the two parameter sets are reported.
pub fn resolve_with_fit(mut report: IdentifiabilityReport, fit: &FitResult) -> IdentifiabilityReport {
    if report.verdict != Verdict::Conditional {
        return report;
    }
    let Some(test) = &fit.tau else {
        return report;
    };
    report.tau1 = Some(test.tau1);
    report.tau2 = Some(test.tau2.clone());
    report.tau_se = test.se.clone();
    report.tau_wald_p = test.wald_p;
    match test.wald_p {
        Some(p) if p < TAU_LEVEL => {
            report.verdict = Verdict::Identifiable;
            report.justification.push_str(&format!("; the tau test rejects tau = 0 (p = {p:.3e})"));
        }
        Some(p) => {
            report.verdict = Verdict::IdentifiableUpToSignOfBeta;
            report.dual = fit.dual.clone();
            report.justification.push_str(&format!(
                "; the tau test does not reject tau = 0 (p = {p:.3e}): select one of the parameter sets based on domain knowledge"
            ));
        }
        None => report.justification.push_str("; the tau test is unavailable"),
    }
    report
}
