//! Identifiability diagnostics: a decision table over the model catalog,
//! the `τ` statistics and test for links with an exponential left tail, a
//! rank check for covariate terms, and a registry of non-identified pairs.

mod counterexamples;
mod decide;
mod tau;
mod uncorrelation;

pub use counterexamples::{
    counterexample, perturbed_normal_logit, registry, verify_counterexample, CounterexamplePair, Grid, ObservedLaw,
    VerifyResult, REGISTRY_IDS, VERIFY_TOL,
};
pub use decide::{decide, decide_model, resolve_with_fit, Basis, IdentifiabilityReport, TauCondition, Verdict};
pub use tau::{tau_of_model, tau_stats, tau_test, TauStats, TauTest};
pub use uncorrelation::{linear_uncorrelation_check, VarianceForm, PROBE_POINTS};
