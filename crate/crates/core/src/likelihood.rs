//! Observed-data log-likelihood of a selection model.
//!
//! Observed rows contribute `ln Σ_k π_k f_k(y | x) P_k(R = 1 | x, y)` and
//! missing rows `ln Σ_k π_k P_k(R = 0 | x)`. Every cataloged link is
//! symmetric, so `P(R = 0)` is computed as the expectation of `F(−a − bY)`
//! rather than as a complement, which keeps small probabilities accurate.
//!
//! Integration routes per component:
//!
//! - Probit × normal: closed form.
//! - Robit × normal: the Student-t link is itself a normal scale mixture, so
//!   the Probit closed form is integrated over the mixing variable.
//! - Logistic × normal: adaptive Gauss–Hermite, trapezoid rule when the
//!   largest rule does not settle.
//! - Student-t outcome kernels: outer scale-mixture rule around the normal
//!   routes above, with a closed form for the selection-t mechanism.

use crate::dist::special::{norm_ln_cdf, norm_ln_pdf, student_t_ln_cdf, student_t_ln_pdf};
use crate::error::{Error, Result};
use crate::mechanism::{ComponentMoments, KappaFn, LinkFamily, MechanismForm, MechanismSpec, PsiFn, VarphiFn};
use crate::model::{Kernel, ModelSpec, ObservedDataset};
use crate::quadrature::{ln_scale_mixture_expect, log_sum_exp, normal_expect, QuadSettings};
use std::cell::RefCell;

/// Row log-likelihoods below this value are floored.
pub const ROW_LOGLIK_FLOOR: f64 = -745.0;

/// `P(R = 1) = ∫ N(y; μ, σ²) Φ(α + βy) dy = Φ((α + βμ) / √(1 + β²σ²))`.
pub fn closed_form_probit_normal(mu: f64, sigma2: f64, alpha: f64, beta: f64) -> f64 {
    crate::dist::norm_cdf(probit_normal_arg(alpha, beta, mu, sigma2.sqrt()))
}

fn probit_normal_arg(a: f64, b: f64, mu: f64, sigma: f64) -> f64 {
    (a + b * mu) / (1.0 + b * b * sigma * sigma).sqrt()
}

/// How quadrature failures are handled. Inside the likelihood the last
/// estimate is used so that optimization can proceed; public probability
/// queries report the failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Strict,
    Lenient,
}

#[derive(Clone, Copy)]
struct Evaluator<'a> {
    mech: &'a MechanismSpec,
    quad: &'a QuadSettings,
    mode: Mode,
    selection_t: bool,
}

impl<'a> Evaluator<'a> {
    fn new(model: &'a ModelSpec, quad: &'a QuadSettings, mode: Mode) -> Self {
        let selection_t = matches!(
            model.mechanism.form,
            MechanismForm::LatentMonotone { psi: PsiFn::One, kappa: KappaFn::Mean, varphi: VarphiFn::Sigma, .. }
        ) && model.mechanism.link == LinkFamily::Probit;
        Self { mech: &model.mechanism, quad, mode, selection_t }
    }

    fn recover<T>(&self, r: Result<T>, on_quadrature: impl FnOnce(f64) -> T) -> Result<T> {
        match r {
            Err(Error::Quadrature { last, .. }) if self.mode == Mode::Lenient => Ok(on_quadrature(last)),
            other => other,
        }
    }

    /// `ln E F(a + bY)` for `Y ~ N(μ, σ²)`.
    fn ln_link_expect_normal(&self, a: f64, b: f64, mu: f64, sigma: f64) -> Result<f64> {
        let link = self.mech.link;
        if b == 0.0 {
            return Ok(link.ln_cdf(a));
        }
        match link {
            LinkFamily::Probit => Ok(norm_ln_cdf(probit_normal_arg(a, b, mu, sigma))),
            LinkFamily::Robit { df } => {
                let centre = a + b * mu;
                let spread = b * b * sigma * sigma;
                let r =
                    ln_scale_mixture_expect(|s| norm_ln_cdf(centre / (s * s + spread).sqrt()), df, self.quad.t_rel_tol);
                self.recover(r, f64::ln)
            }
            LinkFamily::Logistic => {
                let r = normal_expect(|y| link.cdf(a + b * y), mu, sigma, self.quad);
                Ok(self.recover(r, |v| v)?.ln())
            }
        }
    }

    /// `ln E F(sign · (a + bY))` for one outcome component.
    fn ln_component_response(&self, index: f64, mean: f64, kernel: Kernel, sign: f64) -> Result<f64> {
        match kernel {
            Kernel::Normal { sigma } => {
                let (a, b) = self.mech.affine(index, Some(ComponentMoments { mean, sigma }))?;
                self.ln_link_expect_normal(sign * a, sign * b, mean, sigma)
            }
            Kernel::StudentT { omega, nu } => {
                if self.selection_t {
                    let beta = self.mech.beta();
                    let z = sign * index / (omega * (1.0 + beta * beta).sqrt());
                    return Ok(student_t_ln_cdf(z, nu));
                }
                // inner rules fall back to their last estimate: they only fail
                // at very large scales, which carry little mixing weight
                let inner = Evaluator { mode: Mode::Lenient, ..*self };
                let failure = RefCell::new(None);
                let r = ln_scale_mixture_expect(
                    |s| {
                        let sigma = omega * s;
                        self.mech
                            .affine(index, Some(ComponentMoments { mean, sigma }))
                            .and_then(|(a, b)| inner.ln_link_expect_normal(sign * a, sign * b, mean, sigma))
                            .unwrap_or_else(|e| {
                                failure.borrow_mut().get_or_insert(e);
                                f64::NEG_INFINITY
                            })
                    },
                    nu,
                    self.quad.t_rel_tol,
                );
                if let Some(e) = failure.into_inner() {
                    return Err(e);
                }
                self.recover(r, f64::ln)
            }
        }
    }

    /// `ln [f_k(y) P_k(R = 1 | y)]` for one outcome component.
    fn ln_component_observed(&self, index: f64, mean: f64, kernel: Kernel, y: f64) -> Result<f64> {
        let link = self.mech.link;
        match kernel {
            Kernel::Normal { sigma } => {
                let (a, b) = self.mech.affine(index, Some(ComponentMoments { mean, sigma }))?;
                Ok(norm_ln_pdf((y - mean) / sigma) - sigma.ln() + link.ln_cdf(a + b * y))
            }
            Kernel::StudentT { omega, nu } => {
                let ln_t = student_t_ln_pdf((y - mean) / omega, nu) - omega.ln();
                if !self.mech.is_latent() {
                    let (a, b) = self.mech.affine(index, None)?;
                    return Ok(ln_t + link.ln_cdf(a + b * y));
                }
                let d = y - mean;
                if self.selection_t {
                    let beta = self.mech.beta();
                    let scale = ((nu + 1.0) / (nu * omega * omega + d * d)).sqrt();
                    return Ok(ln_t + student_t_ln_cdf((index + beta * d) * scale, nu + 1.0));
                }
                let failure = RefCell::new(None);
                let r = ln_scale_mixture_expect(
                    |s| {
                        let sigma = omega * s;
                        match self.mech.affine(index, Some(ComponentMoments { mean, sigma })) {
                            Ok((a, b)) => norm_ln_pdf(d / sigma) - sigma.ln() + link.ln_cdf(a + b * y),
                            Err(e) => {
                                failure.borrow_mut().get_or_insert(e);
                                f64::NEG_INFINITY
                            }
                        }
                    },
                    nu,
                    self.quad.t_rel_tol,
                );
                if let Some(e) = failure.into_inner() {
                    return Err(e);
                }
                self.recover(r, f64::ln)
            }
        }
    }
}

fn components_at(model: &ModelSpec, x: &[f64]) -> Vec<(f64, f64, Kernel)> {
    let features = &model.outcome.features;
    model.outcome.components().iter().map(|c| (c.weight, features.index(c.mean, x), c.kernel)).collect()
}

fn ln_missing_at(model: &ModelSpec, eval: &Evaluator<'_>, x: &[f64]) -> Result<f64> {
    let index = model.mechanism.index(x);
    let mut terms = Vec::with_capacity(model.outcome.n_components());
    for (w, mean, kernel) in components_at(model, x) {
        if w > 0.0 {
            terms.push(w.ln() + eval.ln_component_response(index, mean, kernel, -1.0)?);
        }
    }
    Ok(log_sum_exp(terms))
}

fn ln_observed_at(model: &ModelSpec, eval: &Evaluator<'_>, x: &[f64], y: f64) -> Result<f64> {
    let index = model.mechanism.index(x);
    let mut terms = Vec::with_capacity(model.outcome.n_components());
    for (w, mean, kernel) in components_at(model, x) {
        if w > 0.0 {
            terms.push(w.ln() + eval.ln_component_observed(index, mean, kernel, y)?);
        }
    }
    Ok(log_sum_exp(terms))
}

/// True when neither the outcome law nor the mechanism depends on `x`.
fn covariate_free(model: &ModelSpec) -> bool {
    model.outcome.features.is_intercept_only() && model.mechanism.features().is_none_or(|f| f.is_intercept_only())
}

/// `ln P(R = 0 | x)`.
pub fn ln_prob_missing(model: &ModelSpec, x: &[f64], quad: &QuadSettings) -> Result<f64> {
    let eval = Evaluator::new(model, quad, Mode::Strict);
    ln_missing_at(model, &eval, x)
}

/// `P(R = 0 | x) = 1 − Σ_k π_k ∫ f_k(y | x) F_k(x, y) dy`.
pub fn prob_missing(model: &ModelSpec, x: &[f64], quad: &QuadSettings) -> Result<f64> {
    Ok(ln_prob_missing(model, x, quad)?.exp())
}

/// `ln p(y, R = 1 | x)`, the observed sub-density.
pub fn ln_observed_density(model: &ModelSpec, x: &[f64], y: f64, quad: &QuadSettings) -> Result<f64> {
    let eval = Evaluator::new(model, quad, Mode::Strict);
    ln_observed_at(model, &eval, x, y)
}

fn finish_row(value: f64, row: usize) -> Result<f64> {
    if value.is_nan() {
        return Err(Error::NonFinite { row });
    }
    if value < ROW_LOGLIK_FLOOR {
        log::warn!("row {row} log-likelihood {value} floored at {ROW_LOGLIK_FLOOR}");
        return Ok(ROW_LOGLIK_FLOOR);
    }
    if value == f64::INFINITY {
        return Err(Error::NonFinite { row });
    }
    Ok(value)
}

/// Per-row log-likelihood contributions, in row order.
pub fn row_logliks(model: &ModelSpec, data: &ObservedDataset, quad: &QuadSettings) -> Result<Vec<f64>> {
    model.validate(data.width())?;
    let eval = Evaluator::new(model, quad, Mode::Lenient);
    let shared_missing = if covariate_free(model) && data.n_missing() > 0 {
        Some(ln_missing_at(model, &eval, &vec![0.0; data.width()])?)
    } else {
        None
    };
    data.rows()
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let value = match (row.y, shared_missing) {
                (Some(y), _) => ln_observed_at(model, &eval, &row.x, y)?,
                (None, Some(v)) => v,
                (None, None) => ln_missing_at(model, &eval, &row.x)?,
            };
            finish_row(value, i)
        })
        .collect()
}

/// Observed-data log-likelihood, summed in row order.
pub fn obs_loglik(model: &ModelSpec, data: &ObservedDataset, quad: &QuadSettings) -> Result<f64> {
    Ok(row_logliks(model, data, quad)?.iter().sum())
}
