//! Map between a model and the flat unconstrained vector the optimizer sees.
//!
//! Means, regression coefficients and `α` are kept as is; `σ²` and `ω²` are
//! log-transformed; mixture weights use stick-breaking logits (`K − 1`
//! entries); degrees of freedom use `ln(ν − 0.3)`. With a declared sign,
//! `β` is stored as `ln |β|`.

use crate::error::{Error, Result};
use crate::mechanism::{LinkFamily, MechanismForm};
use crate::model::{ModelSpec, OutcomeFamily};
use serde::{Deserialize, Serialize};

/// Smallest admissible degrees of freedom (exclusive).
pub const DF_FLOOR: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaSign {
    Positive,
    Negative,
}

impl BetaSign {
    pub fn factor(self) -> f64 {
        match self {
            BetaSign::Positive => 1.0,
            BetaSign::Negative => -1.0,
        }
    }
}

fn yes() -> bool {
    true
}

/// Which parts of the template are estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FreeFlags {
    #[serde(default = "yes")]
    pub beta: bool,
    #[serde(default)]
    pub beta_sign: Option<BetaSign>,
    /// Degrees of freedom of a Student-t outcome.
    #[serde(default = "yes")]
    pub nu: bool,
    /// Degrees of freedom of a Robit link.
    #[serde(default)]
    pub robit_df: bool,
    /// Normal-mixture components share one mean (a scale mixture).
    #[serde(default)]
    pub shared_location: bool,
}

impl Default for FreeFlags {
    fn default() -> Self {
        Self { beta: true, beta_sign: None, nu: true, robit_df: false, shared_location: false }
    }
}

/// A model structure to fit. Values of parameters that are not free are
/// taken from `model`; the free ones are only used when
/// `start_from_template` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitTemplate {
    pub model: ModelSpec,
    #[serde(default)]
    pub free: FreeFlags,
    #[serde(default)]
    pub start_from_template: bool,
}

impl FitTemplate {
    pub fn new(model: ModelSpec) -> Self {
        Self { model, free: FreeFlags::default(), start_from_template: false }
    }

    pub fn with_free(mut self, free: FreeFlags) -> Self {
        self.free = free;
        self
    }

    pub fn starting_at_template(mut self) -> Self {
        self.start_from_template = true;
        self
    }
}

#[derive(Debug, Clone)]
pub struct Codec {
    template: ModelSpec,
    free: FreeFlags,
    n_coef: usize,
    n_components: usize,
    len: usize,
}

fn logistic(z: f64) -> f64 {
    crate::dist::logistic_cdf(z)
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn stick_encode(weights: &[f64], out: &mut Vec<f64>) {
    let mut rest = 1.0;
    for &w in &weights[..weights.len() - 1] {
        let share = if rest > 0.0 { (w / rest).clamp(1e-300, 1.0 - 1e-16) } else { 0.5 };
        out.push(logit(share));
        rest -= w;
    }
}

fn stick_decode(z: &[f64]) -> Vec<f64> {
    let mut rest = 1.0;
    let mut w = Vec::with_capacity(z.len() + 1);
    for &v in z {
        let piece = rest * logistic(v);
        w.push(piece);
        rest -= piece;
    }
    w.push(rest.max(0.0));
    w
}

impl Codec {
    pub fn new(template: &FitTemplate) -> Result<Self> {
        let model = &template.model;
        let free = template.free;
        let n_coef = model.outcome.features.n_coef();
        let n_components = model.outcome.n_components();
        if free.shared_location && !matches!(model.outcome.family, OutcomeFamily::NormalMixture { .. }) {
            return Err(Error::Contract("shared location applies to normal mixtures only".into()));
        }
        if free.robit_df && !matches!(model.mechanism.link, LinkFamily::Robit { .. }) {
            return Err(Error::Contract("free link degrees of freedom need a Robit link".into()));
        }
        if free.beta_sign.is_some() && !free.beta {
            return Err(Error::Contract("a sign constraint needs a free beta".into()));
        }
        let outcome_len = match &model.outcome.family {
            OutcomeFamily::Normal { .. } => n_coef + 1,
            OutcomeFamily::NormalMixture { .. } if free.shared_location => n_coef + 2 * n_components - 1,
            OutcomeFamily::NormalMixture { .. } => n_components * (n_coef + 2) - 1,
            OutcomeFamily::TMixture { .. } => n_components * (n_coef + 1) + usize::from(free.nu),
        };
        let mech_len = model.mechanism.alpha().len() + usize::from(free.beta) + usize::from(free.robit_df);
        Ok(Self { template: model.clone(), free, n_coef, n_components, len: outcome_len + mech_len })
    }

    /// Number of free parameters.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn free(&self) -> FreeFlags {
        self.free
    }

    pub fn template(&self) -> &ModelSpec {
        &self.template
    }

    pub fn encode(&self, model: &ModelSpec) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len);
        match &model.outcome.family {
            OutcomeFamily::Normal { mean, sigma2 } => {
                out.extend_from_slice(mean);
                out.push(sigma2.ln());
            }
            OutcomeFamily::NormalMixture { components } => {
                if self.free.shared_location {
                    out.extend_from_slice(&components[0].mean);
                    out.extend(components.iter().map(|c| c.sigma2.ln()));
                } else {
                    for c in components {
                        out.extend_from_slice(&c.mean);
                        out.push(c.sigma2.ln());
                    }
                }
                let w: Vec<f64> = components.iter().map(|c| c.weight).collect();
                stick_encode(&w, &mut out);
            }
            OutcomeFamily::TMixture { components, omega2, nu } => {
                for c in components {
                    out.extend_from_slice(&c.mean);
                }
                out.push(omega2.ln());
                if self.free.nu {
                    out.push((nu - DF_FLOOR).ln());
                }
                let w: Vec<f64> = components.iter().map(|c| c.weight).collect();
                stick_encode(&w, &mut out);
            }
        }
        let mech = &model.mechanism;
        out.extend_from_slice(mech.alpha());
        if self.free.beta {
            match self.free.beta_sign {
                Some(_) => out.push(mech.beta().abs().max(1e-8).ln()),
                None => out.push(mech.beta()),
            }
        }
        if self.free.robit_df {
            if let LinkFamily::Robit { df } = mech.link {
                out.push((df - DF_FLOOR).ln());
            }
        }
        out
    }

    /// Decodes `theta` into a model in canonical component order.
    pub fn decode(&self, theta: &[f64]) -> ModelSpec {
        debug_assert_eq!(theta.len(), self.len);
        let mut model = self.template.clone();
        let p = self.n_coef;
        let k = self.n_components;
        let mut pos = 0;
        let mut take = |n: usize| {
            let s = &theta[pos..pos + n];
            pos += n;
            s
        };
        match &mut model.outcome.family {
            OutcomeFamily::Normal { mean, sigma2 } => {
                mean.copy_from_slice(take(p));
                *sigma2 = take(1)[0].exp();
            }
            OutcomeFamily::NormalMixture { components } => {
                if self.free.shared_location {
                    let shared = take(p).to_vec();
                    for c in components.iter_mut() {
                        c.mean.copy_from_slice(&shared);
                        c.sigma2 = take(1)[0].exp();
                    }
                } else {
                    for c in components.iter_mut() {
                        c.mean.copy_from_slice(take(p));
                        c.sigma2 = take(1)[0].exp();
                    }
                }
                for (c, w) in components.iter_mut().zip(stick_decode(take(k - 1))) {
                    c.weight = w;
                }
            }
            OutcomeFamily::TMixture { components, omega2, nu } => {
                for c in components.iter_mut() {
                    c.mean.copy_from_slice(take(p));
                }
                *omega2 = take(1)[0].exp();
                if self.free.nu {
                    *nu = DF_FLOOR + take(1)[0].exp();
                }
                for (c, w) in components.iter_mut().zip(stick_decode(take(k - 1))) {
                    c.weight = w;
                }
            }
        }
        let n_alpha = model.mechanism.alpha().len();
        model.mechanism.alpha_mut().copy_from_slice(take(n_alpha));
        if self.free.beta {
            let v = take(1)[0];
            let beta = match self.free.beta_sign {
                Some(sign) => sign.factor() * v.exp(),
                None => v,
            };
            model.mechanism.set_beta(beta);
        }
        if self.free.robit_df {
            model.mechanism.link = LinkFamily::Robit { df: DF_FLOOR + take(1)[0].exp() };
        }
        model.canonicalize();
        model
    }

    /// Names of the natural-scale quantities reported for a fit.
    pub fn natural_names(&self, outcome_terms: &[String], mechanism_terms: &[String]) -> Vec<String> {
        let coef_names = |prefix: &str, base: &str, terms: &[String]| -> Vec<String> {
            std::iter::once(format!("{prefix}{base}0"))
                .chain(terms.iter().map(|t| format!("{prefix}{base}[{t}]")))
                .collect()
        };
        let mut names = Vec::new();
        let k = self.n_components;
        let prefix = |i: usize| if k > 1 { format!("k{}.", i + 1) } else { String::new() };
        match &self.template.outcome.family {
            OutcomeFamily::Normal { .. } => {
                names.extend(coef_names("", "gamma", outcome_terms));
                names.push("sigma2".into());
            }
            OutcomeFamily::NormalMixture { .. } => {
                if self.free.shared_location {
                    names.extend(coef_names("", "gamma", outcome_terms));
                    names.extend((0..k).map(|i| format!("{}sigma2", prefix(i))));
                } else {
                    for i in 0..k {
                        names.extend(coef_names(&prefix(i), "gamma", outcome_terms));
                        names.push(format!("{}sigma2", prefix(i)));
                    }
                }
                if k > 1 {
                    names.extend((0..k).map(|i| format!("pi{}", i + 1)));
                }
            }
            OutcomeFamily::TMixture { .. } => {
                for i in 0..k {
                    names.extend(coef_names(&prefix(i), "gamma", outcome_terms));
                }
                names.push("omega2".into());
                names.push("nu".into());
                if k > 1 {
                    names.extend((0..k).map(|i| format!("pi{}", i + 1)));
                }
            }
        }
        match &self.template.mechanism.form {
            MechanismForm::Scalar { .. } => names.push("alpha0".into()),
            _ => names.extend(coef_names("", "alpha", mechanism_terms)),
        }
        names.push("beta".into());
        if matches!(self.template.mechanism.link, LinkFamily::Robit { .. }) {
            names.push("robit_df".into());
        }
        names
    }

    /// Natural-scale values in the order of [`Codec::natural_names`]. Fixed
    /// quantities are included so that reports are complete.
    pub fn natural(&self, model: &ModelSpec) -> Vec<f64> {
        let mut out = Vec::new();
        match &model.outcome.family {
            OutcomeFamily::Normal { mean, sigma2 } => {
                out.extend_from_slice(mean);
                out.push(*sigma2);
            }
            OutcomeFamily::NormalMixture { components } => {
                if self.free.shared_location {
                    out.extend_from_slice(&components[0].mean);
                    out.extend(components.iter().map(|c| c.sigma2));
                } else {
                    for c in components {
                        out.extend_from_slice(&c.mean);
                        out.push(c.sigma2);
                    }
                }
                if components.len() > 1 {
                    out.extend(components.iter().map(|c| c.weight));
                }
            }
            OutcomeFamily::TMixture { components, omega2, nu } => {
                for c in components {
                    out.extend_from_slice(&c.mean);
                }
                out.push(*omega2);
                out.push(*nu);
                if components.len() > 1 {
                    out.extend(components.iter().map(|c| c.weight));
                }
            }
        }
        out.extend_from_slice(model.mechanism.alpha());
        out.push(model.mechanism.beta());
        if let LinkFamily::Robit { df } = model.mechanism.link {
            out.push(df);
        }
        out
    }
}
