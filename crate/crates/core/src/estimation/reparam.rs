//! Exact maps between equivalent parametrizations: the Heckman selection
//! model, the selection-t model, and the dual parameter set of a Logistic
//! model.

use crate::dist::special::{norm_ln_cdf, norm_ln_pdf, student_t_ln_cdf, student_t_ln_pdf};
use crate::error::{Error, Result};
use crate::mechanism::{condition_flags, KappaFn, LinkFamily, MechanismForm, MechanismSpec, PsiFn, VarphiFn};
use crate::model::{FeatureMap, ModelSpec, ObservedDataset, OutcomeFamily, OutcomeSpec, TComponent};
use serde::{Deserialize, Serialize};

fn check_rho(rho: f64) -> Result<f64> {
    if rho.abs() < 1.0 {
        Ok((1.0 - rho * rho).sqrt())
    } else {
        Err(Error::Domain(format!("correlation must lie in (-1, 1), got {rho}")))
    }
}

fn check_lengths(a: &[f64], gamma: &[f64]) -> Result<()> {
    if a.len() == gamma.len() {
        Ok(())
    } else {
        Err(Error::Contract(format!(
            "selection and outcome coefficients differ in length ({} and {})",
            a.len(),
            gamma.len()
        )))
    }
}

/// Heckman selection equation `(a, ρ)` to the additive Probit mechanism
/// `Φ(xᵀα + βy)`: `α = (a − ργ/σ)/√(1−ρ²)`, `β = ρ/(σ√(1−ρ²))`.
pub fn heckman_reparam(a: &[f64], rho: f64, gamma: &[f64], sigma: f64) -> Result<(Vec<f64>, f64)> {
    let root = check_rho(rho)?;
    check_lengths(a, gamma)?;
    if !(sigma > 0.0) {
        return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
    }
    let alpha = a.iter().zip(gamma).map(|(a, g)| (a - rho * g / sigma) / root).collect();
    Ok((alpha, rho / (sigma * root)))
}

/// Inverse of [`heckman_reparam`]: returns `(a, ρ)`.
pub fn heckman_inverse(alpha: &[f64], beta: f64, gamma: &[f64], sigma: f64) -> Result<(Vec<f64>, f64)> {
    check_lengths(alpha, gamma)?;
    if !(sigma > 0.0) {
        return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
    }
    let bs = beta * sigma;
    let rho = bs / (1.0 + bs * bs).sqrt();
    let root = (1.0 - rho * rho).sqrt();
    let a = alpha.iter().zip(gamma).map(|(al, g)| al * root + rho * g / sigma).collect();
    Ok((a, rho))
}

/// Normal outcome with the additive Probit mechanism equivalent to a Heckman
/// model whose outcome and selection equations share `features`.
pub fn heckman_model(features: &FeatureMap, a: &[f64], rho: f64, gamma: &[f64], sigma: f64) -> Result<ModelSpec> {
    let (alpha, beta) = heckman_reparam(a, rho, gamma, sigma)?;
    Ok(ModelSpec {
        outcome: OutcomeSpec {
            features: features.clone(),
            family: OutcomeFamily::Normal { mean: gamma.to_vec(), sigma2: sigma * sigma },
        },
        mechanism: MechanismSpec::additive(features.clone(), alpha, beta, LinkFamily::Probit),
    })
}

/// Heckman log-likelihood in its own parametrization.
pub fn heckman_loglik(
    features: &FeatureMap,
    a: &[f64],
    rho: f64,
    gamma: &[f64],
    sigma: f64,
    data: &ObservedDataset,
) -> Result<f64> {
    let root = check_rho(rho)?;
    check_lengths(a, gamma)?;
    Ok(data
        .rows()
        .iter()
        .map(|row| {
            let sel = features.index(a, &row.x);
            match row.y {
                Some(y) => {
                    let z = (y - features.index(gamma, &row.x)) / sigma;
                    norm_ln_pdf(z) - sigma.ln() + norm_ln_cdf((sel + rho * z) / root)
                }
                None => norm_ln_cdf(-sel),
            }
        })
        .sum())
}

/// Selection-t model: `Y | x, σ ~ N(xᵀγ, σ²)`, `σ² ~ ω²ν/χ²_ν`,
/// `P(R = 1 | x, y, σ) = Φ{(xᵀα + β(y − xᵀγ))/σ}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionT {
    pub gamma: Vec<f64>,
    pub omega2: f64,
    pub nu: f64,
    pub alpha: Vec<f64>,
    pub beta: f64,
}

/// The same model written with a bivariate-t selection equation: latent
/// `U = xᵀa + ε_U`, correlation `ρ` between the outcome and selection errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BivariateT {
    pub gamma: Vec<f64>,
    pub omega2: f64,
    pub nu: f64,
    pub a: Vec<f64>,
    pub rho: f64,
}

/// Maps a selection-t parameter set onto a one-component t outcome with the
/// latent Probit mechanism `ψ = 1`, `κ = μ`, `φ = σ`.
pub fn selection_t_reparam(params: &SelectionT, features: &FeatureMap) -> Result<ModelSpec> {
    let model = ModelSpec {
        outcome: OutcomeSpec {
            features: features.clone(),
            family: OutcomeFamily::TMixture {
                components: vec![TComponent { weight: 1.0, mean: params.gamma.clone() }],
                omega2: params.omega2,
                nu: params.nu,
            },
        },
        mechanism: MechanismSpec {
            form: MechanismForm::LatentMonotone {
                features: features.clone(),
                alpha: params.alpha.clone(),
                beta: params.beta,
                psi: PsiFn::One,
                kappa: KappaFn::Mean,
                varphi: VarphiFn::Sigma,
            },
            link: LinkFamily::Probit,
        },
    };
    model.validate(features.terms.iter().map(|t| t.column + 1).max().unwrap_or(0))?;
    Ok(model)
}

/// Inverse of [`selection_t_reparam`].
pub fn selection_t_params(model: &ModelSpec) -> Result<SelectionT> {
    let OutcomeFamily::TMixture { components, omega2, nu } = &model.outcome.family else {
        return Err(Error::Unsupported("selection-t needs a t outcome".into()));
    };
    if components.len() != 1 {
        return Err(Error::Unsupported("selection-t needs a single t component".into()));
    }
    match &model.mechanism.form {
        MechanismForm::LatentMonotone {
            alpha,
            beta,
            psi: PsiFn::One,
            kappa: KappaFn::Mean,
            varphi: VarphiFn::Sigma,
            ..
        } if model.mechanism.link == LinkFamily::Probit => Ok(SelectionT {
            gamma: components[0].mean.clone(),
            omega2: *omega2,
            nu: *nu,
            alpha: alpha.clone(),
            beta: *beta,
        }),
        _ => Err(Error::Unsupported(
            "selection-t needs the latent Probit mechanism with psi = 1, kappa = mean, varphi = sigma".into(),
        )),
    }
}

impl BivariateT {
    /// `α = aω/√(1−ρ²)`, `β = ρ/√(1−ρ²)`.
    pub fn to_selection_t(&self) -> Result<SelectionT> {
        let root = check_rho(self.rho)?;
        let omega = self.omega2.sqrt();
        Ok(SelectionT {
            gamma: self.gamma.clone(),
            omega2: self.omega2,
            nu: self.nu,
            alpha: self.a.iter().map(|a| a * omega / root).collect(),
            beta: self.rho / root,
        })
    }

    pub fn from_selection_t(p: &SelectionT) -> Self {
        let rho = p.beta / (1.0 + p.beta * p.beta).sqrt();
        let root = (1.0 - rho * rho).sqrt();
        let omega = p.omega2.sqrt();
        Self {
            gamma: p.gamma.clone(),
            omega2: p.omega2,
            nu: p.nu,
            a: p.alpha.iter().map(|al| al * root / omega).collect(),
            rho,
        }
    }

    /// Log-likelihood in the bivariate-t parametrization.
    pub fn loglik(&self, features: &FeatureMap, data: &ObservedDataset) -> Result<f64> {
        let root = check_rho(self.rho)?;
        check_lengths(&self.a, &self.gamma)?;
        let omega = self.omega2.sqrt();
        let nu = self.nu;
        Ok(data
            .rows()
            .iter()
            .map(|row| {
                let sel = features.index(&self.a, &row.x);
                match row.y {
                    Some(y) => {
                        let z = (y - features.index(&self.gamma, &row.x)) / omega;
                        let scale = ((nu + 1.0) / (nu + z * z)).sqrt();
                        student_t_ln_pdf(z, nu) - omega.ln()
                            + student_t_ln_cdf((sel + self.rho * z) / root * scale, nu + 1.0)
                    }
                    None => student_t_ln_cdf(-sel, nu),
                }
            })
            .sum())
    }
}

/// The parameter set that a Logistic-link normal model cannot be told apart
/// from when `τ₁ = τ₂ = 0`: `γ₀' = γ₀ + δσ²β`, `α₀' = −α₀ − 2 ln(c)/δ`,
/// remaining `α' = −α`, `β' = −β`, slopes of the mean unchanged.
pub fn dual_solution(model: &ModelSpec) -> Result<ModelSpec> {
    let Some(tail) =
        condition_flags(&model.mechanism.link).tail_rate.filter(|_| model.mechanism.link == LinkFamily::Logistic)
    else {
        return Err(Error::Unsupported(format!(
            "dual parameter sets are defined for the Logistic link, not {}",
            model.mechanism.link.name()
        )));
    };
    let mut dual = model.clone();
    let beta = model.mechanism.beta();
    let OutcomeFamily::Normal { mean, sigma2 } = &mut dual.outcome.family else {
        return Err(Error::Unsupported("dual parameter sets are defined for a normal outcome".into()));
    };
    mean[0] += tail.delta * *sigma2 * beta;
    let alpha = dual.mechanism.alpha_mut();
    for a in alpha.iter_mut() {
        *a = -*a;
    }
    alpha[0] -= 2.0 * tail.c.ln() / tail.delta;
    dual.mechanism.set_beta(-beta);
    Ok(dual)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn logistic(gamma: Vec<f64>, sigma2: f64, alpha: Vec<f64>, beta: f64) -> ModelSpec {
        let features = FeatureMap::linear(gamma.len() - 1);
        ModelSpec {
            outcome: OutcomeSpec { features: features.clone(), family: OutcomeFamily::Normal { mean: gamma, sigma2 } },
            mechanism: if alpha.len() == 1 {
                MechanismSpec::scalar(alpha[0], beta, LinkFamily::Logistic)
            } else {
                MechanismSpec::additive(features, alpha, beta, LinkFamily::Logistic)
            },
        }
    }

    #[test]
    fn heckman_examples() {
        let (alpha, beta) = heckman_reparam(&[0.4, -0.2], 0.0, &[1.0, 2.0], 1.5).unwrap();
        assert_eq!(alpha, vec![0.4, -0.2]);
        assert_eq!(beta, 0.0);
        let (_, beta) = heckman_reparam(&[0.0], 0.6, &[0.0], 2.0).unwrap();
        assert!((beta - 0.375).abs() < 1e-15);
        assert!(heckman_reparam(&[0.0], 1.0, &[0.0], 2.0).is_err());
        assert!(heckman_reparam(&[0.0], 0.5, &[0.0, 1.0], 2.0).is_err());
    }

    #[test]
    fn heckman_round_trip() {
        let a = [0.3, -1.2, 0.5];
        let gamma = [1.0, 0.5, -2.0];
        for rho in [-0.9, -0.3, 0.0, 0.45, 0.95] {
            let (alpha, beta) = heckman_reparam(&a, rho, &gamma, 1.7).unwrap();
            let (back, r) = heckman_inverse(&alpha, beta, &gamma, 1.7).unwrap();
            assert!((r - rho).abs() < 1e-12);
            for (x, y) in back.iter().zip(&a) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bivariate_t_round_trip() {
        let p = SelectionT { gamma: vec![1.0, -1.0], omega2: 1.7, nu: 5.0, alpha: vec![1.0, 1.0], beta: -0.5 };
        let back = BivariateT::from_selection_t(&p).to_selection_t().unwrap();
        for (x, y) in back.alpha.iter().zip(&p.alpha) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((back.beta - p.beta).abs() < 1e-12);
        let model = selection_t_reparam(&p, &FeatureMap::linear(1)).unwrap();
        assert_eq!(selection_t_params(&model).unwrap(), p);
    }

    #[test]
    fn dual_examples() {
        let m = logistic(vec![1.0], 1.0, vec![-1.5], 1.0);
        let d = dual_solution(&m).unwrap();
        assert_eq!(d, logistic(vec![2.0], 1.0, vec![1.5], -1.0));
        assert_eq!(dual_solution(&d).unwrap(), m);

        let m = logistic(vec![0.0, 0.5], 1.0, vec![-2.0, -1.0], 2.0);
        let d = dual_solution(&m).unwrap();
        assert_eq!(d, logistic(vec![2.0, 0.5], 1.0, vec![2.0, 1.0], -2.0));
        assert_eq!(dual_solution(&d).unwrap(), m);
    }

    #[test]
    fn dual_needs_logistic_normal() {
        let mut m = logistic(vec![1.0], 1.0, vec![-1.5], 1.0);
        m.mechanism.link = LinkFamily::Probit;
        assert!(matches!(dual_solution(&m), Err(Error::Unsupported(_))));
    }
}
