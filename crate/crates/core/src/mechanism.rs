//! Response mechanisms `P(R = 1 | x, y)` and their link families.
//!
//! Three forms are supported:
//!
//! - scalar, `F(α + β y)`;
//! - additive over covariate features, `F(w(x)ᵀα + β y)`;
//! - latent monotone, `F[(g(x) ψ(σ_k) + β {y − κ(μ_k)}) / φ(σ_k)]`, where
//!   `(μ_k, σ_k)` are the mean and scale of the latent component the unit
//!   belongs to and `{ψ, κ, φ}` come from a fixed catalog.
//!
//! For every form the predictor is affine in `y` once the component is known,
//! which the likelihood exploits.

use crate::dist::special::{self, norm_ln_cdf};
use crate::dist::{logistic_cdf, logistic_ln_cdf, norm_cdf, norm_quantile};
use crate::error::{Error, Result};
use crate::model::FeatureMap;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LinkFamily {
    Probit,
    Logistic,
    /// Student-t distribution function with `df` degrees of freedom.
    Robit {
        df: f64,
    },
}

impl LinkFamily {
    pub fn validate(&self) -> Result<()> {
        match self {
            LinkFamily::Robit { df } if !(*df > 0.0 && df.is_finite()) => {
                Err(Error::Domain(format!("robit degrees of freedom must be positive, got {df}")))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LinkFamily::Probit => "probit",
            LinkFamily::Logistic => "logistic",
            LinkFamily::Robit { .. } => "robit",
        }
    }

    pub fn cdf(&self, z: f64) -> f64 {
        match *self {
            LinkFamily::Probit => norm_cdf(z),
            LinkFamily::Logistic => logistic_cdf(z),
            LinkFamily::Robit { df } => special::student_t_cdf(z, df),
        }
    }

    pub fn ln_cdf(&self, z: f64) -> f64 {
        match *self {
            LinkFamily::Probit => norm_ln_cdf(z),
            LinkFamily::Logistic => logistic_ln_cdf(z),
            LinkFamily::Robit { df } => special::student_t_ln_cdf(z, df),
        }
    }

    /// `1 − F(z)`. All cataloged links are symmetric about zero.
    pub fn sf(&self, z: f64) -> f64 {
        self.cdf(-z)
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!("link quantile needs p in (0, 1), got {p}")));
        }
        Ok(match *self {
            LinkFamily::Probit => norm_quantile(p),
            LinkFamily::Logistic => (p / (1.0 - p)).ln(),
            LinkFamily::Robit { df } => special::student_t_quantile(p, df),
        })
    }
}

/// `ψ` in the latent monotone mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsiFn {
    One,
    Sigma,
}

/// `κ` in the latent monotone mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaFn {
    Zero,
    Mean,
}

/// `φ` in the latent monotone mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarphiFn {
    One,
    Sigma,
    Sigma2,
}

impl PsiFn {
    pub fn eval(self, sigma: f64) -> f64 {
        match self {
            PsiFn::One => 1.0,
            PsiFn::Sigma => sigma,
        }
    }
}

impl KappaFn {
    pub fn eval(self, mu: f64) -> f64 {
        match self {
            KappaFn::Zero => 0.0,
            KappaFn::Mean => mu,
        }
    }
}

impl VarphiFn {
    pub fn eval(self, sigma: f64) -> f64 {
        match self {
            VarphiFn::One => 1.0,
            VarphiFn::Sigma => sigma,
            VarphiFn::Sigma2 => sigma * sigma,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum MechanismForm {
    Scalar {
        alpha: f64,
        beta: f64,
    },
    Additive {
        features: FeatureMap,
        alpha: Vec<f64>,
        beta: f64,
    },
    LatentMonotone {
        #[serde(default)]
        features: FeatureMap,
        alpha: Vec<f64>,
        beta: f64,
        psi: PsiFn,
        kappa: KappaFn,
        varphi: VarphiFn,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismSpec {
    #[serde(flatten)]
    pub form: MechanismForm,
    pub link: LinkFamily,
}

/// Mean and scale of the latent component a unit belongs to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComponentMoments {
    pub mean: f64,
    pub sigma: f64,
}

impl MechanismSpec {
    pub fn scalar(alpha: f64, beta: f64, link: LinkFamily) -> Self {
        Self { form: MechanismForm::Scalar { alpha, beta }, link }
    }

    pub fn additive(features: FeatureMap, alpha: Vec<f64>, beta: f64, link: LinkFamily) -> Self {
        Self { form: MechanismForm::Additive { features, alpha, beta }, link }
    }

    pub fn beta(&self) -> f64 {
        match &self.form {
            MechanismForm::Scalar { beta, .. }
            | MechanismForm::Additive { beta, .. }
            | MechanismForm::LatentMonotone { beta, .. } => *beta,
        }
    }

    pub fn set_beta(&mut self, value: f64) {
        match &mut self.form {
            MechanismForm::Scalar { beta, .. }
            | MechanismForm::Additive { beta, .. }
            | MechanismForm::LatentMonotone { beta, .. } => *beta = value,
        }
    }

    /// Coefficients of `g(x)`; the scalar form has a single intercept.
    pub fn alpha(&self) -> &[f64] {
        match &self.form {
            MechanismForm::Scalar { alpha, .. } => std::slice::from_ref(alpha),
            MechanismForm::Additive { alpha, .. } | MechanismForm::LatentMonotone { alpha, .. } => alpha,
        }
    }

    pub fn alpha_mut(&mut self) -> &mut [f64] {
        match &mut self.form {
            MechanismForm::Scalar { alpha, .. } => std::slice::from_mut(alpha),
            MechanismForm::Additive { alpha, .. } | MechanismForm::LatentMonotone { alpha, .. } => alpha,
        }
    }

    pub fn features(&self) -> Option<&FeatureMap> {
        match &self.form {
            MechanismForm::Scalar { .. } => None,
            MechanismForm::Additive { features, .. } | MechanismForm::LatentMonotone { features, .. } => Some(features),
        }
    }

    pub fn is_latent(&self) -> bool {
        matches!(self.form, MechanismForm::LatentMonotone { .. })
    }

    fn needs_covariates(&self) -> bool {
        self.features().is_some_and(|f| !f.is_intercept_only())
    }

    pub fn validate(&self, width: usize) -> Result<()> {
        self.link.validate()?;
        if let Some(f) = self.features() {
            f.validate(width)?;
            if self.alpha().len() != f.n_coef() {
                return Err(Error::Contract(format!(
                    "mechanism has {} alpha coefficients, feature map expects {}",
                    self.alpha().len(),
                    f.n_coef()
                )));
            }
        }
        if self.alpha().iter().chain([self.beta()].iter()).any(|v| !v.is_finite()) {
            return Err(Error::Domain("mechanism coefficients must be finite".into()));
        }
        Ok(())
    }

    /// `g(x)`, the covariate part of the predictor.
    pub fn index(&self, x: &[f64]) -> f64 {
        match &self.form {
            MechanismForm::Scalar { alpha, .. } => *alpha,
            MechanismForm::Additive { features, alpha, .. } | MechanismForm::LatentMonotone { features, alpha, .. } => {
                features.index(alpha, x)
            }
        }
    }

    /// Predictor `a + b·y` given `g(x)` and, for latent forms, the component.
    pub fn affine(&self, index: f64, component: Option<ComponentMoments>) -> Result<(f64, f64)> {
        match &self.form {
            MechanismForm::Scalar { beta, .. } | MechanismForm::Additive { beta, .. } => Ok((index, *beta)),
            MechanismForm::LatentMonotone { beta, psi, kappa, varphi, .. } => {
                let c = component.ok_or_else(|| {
                    Error::Contract("latent monotone mechanism needs the component mean and scale".into())
                })?;
                let scale = varphi.eval(c.sigma);
                Ok(((index * psi.eval(c.sigma) - beta * kappa.eval(c.mean)) / scale, beta / scale))
            }
        }
    }

    pub fn response_prob(&self, x: Option<&[f64]>, y: f64, component: Option<ComponentMoments>) -> Result<f64> {
        let index = match x {
            Some(x) => self.index(x),
            None if self.needs_covariates() => {
                return Err(Error::Contract("additive mechanism needs a covariate vector".into()))
            }
            None => self.index(&[]),
        };
        let (a, b) = self.affine(index, component)?;
        Ok(self.link.cdf(a + b * y))
    }
}

/// Left-tail rate `lim_{z→−∞} F(z)/e^{δz} = c` for links whose tail is
/// exactly exponential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailRate {
    pub delta: f64,
    pub c: f64,
}

/// Tail conditions a link satisfies. `a` fails exactly when the left tail
/// of `F` is exponential, in which case `tail_rate` is reported.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionFlags {
    pub a: bool,
    pub b: bool,
    pub c: bool,
    pub tail_rate: Option<TailRate>,
}

pub fn condition_flags(link: &LinkFamily) -> ConditionFlags {
    match link {
        LinkFamily::Probit | LinkFamily::Robit { .. } => ConditionFlags { a: true, b: true, c: true, tail_rate: None },
        LinkFamily::Logistic => {
            ConditionFlags { a: false, b: false, c: true, tail_rate: Some(TailRate { delta: 1.0, c: 1.0 }) }
        }
    }
}

/// `ln F(z) − δz` along `z_grid`.
pub fn tail_log_ratio_probe(link: &LinkFamily, delta: f64, z_grid: &[f64]) -> Result<Vec<f64>> {
    if !(delta > 0.0) {
        return Err(Error::Domain(format!("tail rate must be positive, got {delta}")));
    }
    if z_grid.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Domain("tail probe grid must be strictly decreasing".into()));
    }
    Ok(z_grid.iter().map(|&z| link.ln_cdf(z) - delta * z).collect())
}

/// `F(z)/e^{δz}` along `z_grid`, evaluated through the log ratio.
pub fn tail_limit_probe(link: &LinkFamily, delta: f64, z_grid: &[f64]) -> Result<Vec<f64>> {
    Ok(tail_log_ratio_probe(link, delta, z_grid)?.into_iter().map(f64::exp).collect())
}
