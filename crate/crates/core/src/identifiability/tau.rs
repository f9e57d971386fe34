//! `τ₁`, `τ₂` and their Wald test.
//!
//! For a normal outcome with mean `γ₀ + xᵀγ₁` and a link whose left tail is
//! `F(z) ~ c·e^{δz}`, the observed distribution fails to pin down the
//! parameters exactly when `τ₁ = 2δ(α₀ + βγ₀) + δ²σ²β² + 2 ln c` and
//! `τ₂ = α₁ + βγ₁` both vanish.

use crate::error::{Error, Result};
use crate::estimation::{Codec, FitResult};
use crate::mechanism::{condition_flags, TailRate};
use crate::model::{FeatureTerm, ModelSpec, OutcomeFamily};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauStats {
    pub tau1: f64,
    pub tau2: Vec<f64>,
}

impl TauStats {
    /// `(τ₁, τ₂…)` as one vector.
    pub fn stacked(&self) -> Vec<f64> {
        std::iter::once(self.tau1).chain(self.tau2.iter().copied()).collect()
    }
}

pub fn tau_stats(
    gamma0: f64,
    gamma1: &[f64],
    sigma2: f64,
    alpha0: f64,
    alpha1: &[f64],
    beta: f64,
    tail: TailRate,
) -> Result<TauStats> {
    if gamma1.len() != alpha1.len() {
        return Err(Error::Contract(format!(
            "outcome and mechanism slopes differ in length ({} and {})",
            gamma1.len(),
            alpha1.len()
        )));
    }
    let d = tail.delta;
    Ok(TauStats {
        tau1: 2.0 * d * (alpha0 + beta * gamma0) + d * d * sigma2 * beta * beta + 2.0 * tail.c.ln(),
        tau2: alpha1.iter().zip(gamma1).map(|(a, g)| a + beta * g).collect(),
    })
}

/// Slopes of the outcome mean and of `g` aligned on the union of their
/// covariate terms (outcome terms first); absent terms count as zero.
pub(crate) fn aligned_slopes(model: &ModelSpec) -> Result<(f64, Vec<f64>, f64, f64, Vec<f64>)> {
    let OutcomeFamily::Normal { mean, sigma2 } = &model.outcome.family else {
        return Err(Error::Unsupported("tau statistics are defined for a normal outcome".into()));
    };
    let mech = &model.mechanism;
    if mech.is_latent() {
        return Err(Error::Unsupported("tau statistics need a scalar or additive mechanism".into()));
    }
    let out_terms = &model.outcome.features.terms;
    let mech_terms: &[FeatureTerm] = mech.features().map_or(&[], |f| &f.terms);
    let mut terms: Vec<FeatureTerm> = out_terms.clone();
    terms.extend(mech_terms.iter().filter(|t| !out_terms.contains(t)));
    let alpha = mech.alpha();
    let coef_of = |list: &[FeatureTerm], coefs: &[f64], t: &FeatureTerm| {
        list.iter().position(|u| u == t).map_or(0.0, |i| coefs[i + 1])
    };
    let gamma1 = terms.iter().map(|t| coef_of(out_terms, mean, t)).collect();
    let alpha1 = terms.iter().map(|t| coef_of(mech_terms, alpha, t)).collect();
    Ok((mean[0], gamma1, *sigma2, alpha[0], alpha1))
}

/// `τ` at the parameter values of `model`; needs a link with an exponential
/// left tail.
pub fn tau_of_model(model: &ModelSpec) -> Result<TauStats> {
    let tail = condition_flags(&model.mechanism.link).tail_rate.ok_or_else(|| {
        Error::Unsupported(format!("the {} link has no exponential tail", model.mechanism.link.name()))
    })?;
    let (gamma0, gamma1, sigma2, alpha0, alpha1) = aligned_slopes(model)?;
    tau_stats(gamma0, &gamma1, sigma2, alpha0, &alpha1, model.mechanism.beta(), tail)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauTest {
    pub tau1: f64,
    pub tau2: Vec<f64>,
    /// Standard errors of `(τ₁, τ₂…)`.
    pub se: Option<Vec<f64>>,
    pub wald: Option<f64>,
    pub df: usize,
    pub wald_p: Option<f64>,
    /// Why the test is unavailable.
    pub note: Option<String>,
}

/// Wald test of `τ₁ = τ₂ = 0` at a fitted model, with the delta method
/// applied to the fit's encoded-scale covariance.
pub fn tau_test(fit: &FitResult) -> Result<TauTest> {
    let stats = tau_of_model(&fit.params)?;
    let tau = stats.stacked();
    let df = tau.len();
    let mut test = TauTest { tau1: stats.tau1, tau2: stats.tau2, se: None, wald: None, df, wald_p: None, note: None };
    let Some(cov) = &fit.covariance else {
        test.note = Some(fit.covariance_note.clone().unwrap_or_else(|| "covariance was not computed".into()));
        return Ok(test);
    };
    let codec = Codec::new(&fit.template)?;
    let k = fit.theta.len();
    let cov = DMatrix::from_fn(k, k, |i, j| cov[i][j]);
    let mut jac = DMatrix::zeros(df, k);
    let mut probe = fit.theta.clone();
    for j in 0..k {
        let h = 1e-6 * fit.theta[j].abs().max(1.0);
        probe[j] = fit.theta[j] + h;
        let up = tau_of_model(&codec.decode(&probe))?.stacked();
        probe[j] = fit.theta[j] - h;
        let down = tau_of_model(&codec.decode(&probe))?.stacked();
        probe[j] = fit.theta[j];
        for i in 0..df {
            jac[(i, j)] = (up[i] - down[i]) / (2.0 * h);
        }
    }
    let v = &jac * cov * jac.transpose();
    test.se = Some((0..df).map(|i| v[(i, i)].max(0.0).sqrt()).collect());
    match v.clone().cholesky() {
        Some(ch) => {
            let t = DVector::from_vec(tau);
            let w = t.dot(&ch.solve(&t));
            let chi2 = ChiSquared::new(df as f64).map_err(|e| Error::Domain(e.to_string()))?;
            test.wald = Some(w);
            test.wald_p = Some(chi2.sf(w));
        }
        None => test.note = Some("covariance of tau is not positive definite".into()),
    }
    Ok(test)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanism::{LinkFamily, MechanismSpec};
    use crate::model::{FeatureMap, OutcomeSpec, Transform};

    const LOGIT: TailRate = TailRate { delta: 1.0, c: 1.0 };

    #[test]
    fn tau_examples() {
        let t = tau_stats(1.0, &[], 1.0, -1.5, &[], 1.0, LOGIT).unwrap();
        assert_eq!(t.tau1, 0.0);
        let t = tau_stats(0.0, &[0.5], 1.0, -2.0, &[-1.0], 2.0, LOGIT).unwrap();
        assert_eq!((t.tau1, t.tau2.clone()), (0.0, vec![0.0]));
        let t = tau_stats(0.0, &[0.7, 1.0], 3.0, 0.0, &[0.25, -4.0], 0.0, LOGIT).unwrap();
        assert_eq!((t.tau1, t.tau2), (0.0, vec![0.25, -4.0]));
    }

    #[test]
    fn tau_aligns_terms() {
        let model = ModelSpec {
            outcome: OutcomeSpec {
                features: FeatureMap::linear(1),
                family: OutcomeFamily::Normal { mean: vec![0.0, 0.5], sigma2: 1.0 },
            },
            mechanism: MechanismSpec::additive(
                FeatureMap::linear(1).with_term(0, Transform::Square),
                vec![-2.0, -1.0, 0.3],
                2.0,
                LinkFamily::Logistic,
            ),
        };
        let t = tau_of_model(&model).unwrap();
        assert_eq!(t.tau1, 0.0);
        assert_eq!(t.tau2, vec![0.0, 0.3]);
        let mut scalar = model.clone();
        scalar.mechanism = MechanismSpec::scalar(-2.0, 2.0, LinkFamily::Logistic);
        assert_eq!(tau_of_model(&scalar).unwrap().tau2, vec![1.0]);
        scalar.mechanism.link = LinkFamily::Probit;
        assert!(tau_of_model(&scalar).is_err());
    }
}
