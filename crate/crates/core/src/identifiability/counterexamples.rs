//! Pairs of distinct models with the same observed sub-density
//! `p(y, R = 1 | x)`, and a grid verifier.

use crate::dist::special::{norm_cdf, norm_pdf};
use crate::dist::{logistic_cdf, norm_quantile};
use crate::likelihood::ln_observed_density;
use crate::mechanism::{LinkFamily, MechanismSpec};
use crate::model::{FeatureMap, ModelSpec, OutcomeFamily, OutcomeSpec};
use crate::quadrature::QuadSettings;
use serde::{Deserialize, Serialize};

/// An observed sub-density `p(y, R = 1 | x)`.
#[derive(Debug, Clone, PartialEq)]
pub enum ObservedLaw {
    /// A model from the fitting catalog.
    Model(ModelSpec),
    /// `Y ~ Unif(lo, hi)` with `P(R = 1 | y) = Φ(y)`.
    UniformProbit { lo: f64, hi: f64 },
    /// `Y` with density `2Φ(y)` on a symmetric interval, responding with
    /// constant probability `p`.
    TiltedUniformConstant { half_width: f64, p: f64 },
    /// `Y ~ Exp(rate)` with `logit P(R = 1 | y) = alpha + beta·y`.
    ExponentialLogistic { rate: f64, alpha: f64, beta: f64 },
    /// Normal mixture whose units respond with a component-specific
    /// probability `F(alpha_k)` that does not depend on `y`.
    LatentIgnorable { weights: Vec<f64>, means: Vec<f64>, sigma2s: Vec<f64>, link: LinkFamily, alphas: Vec<f64> },
}

impl ObservedLaw {
    pub fn density(&self, x: f64, y: f64) -> f64 {
        match self {
            ObservedLaw::Model(m) => {
                let xs: &[f64] = if m.outcome.features.is_intercept_only() && m.mechanism.features().is_none() {
                    &[]
                } else {
                    std::slice::from_ref(&x)
                };
                ln_observed_density(m, xs, y, &QuadSettings::default()).map_or(f64::NAN, f64::exp)
            }
            ObservedLaw::UniformProbit { lo, hi } => {
                if (*lo..=*hi).contains(&y) {
                    norm_cdf(y) / (hi - lo)
                } else {
                    0.0
                }
            }
            ObservedLaw::TiltedUniformConstant { half_width, p } => {
                if y.abs() <= *half_width {
                    2.0 * norm_cdf(y) * p
                } else {
                    0.0
                }
            }
            ObservedLaw::ExponentialLogistic { rate, alpha, beta } => {
                if y >= 0.0 {
                    rate * (-rate * y).exp() * logistic_cdf(alpha + beta * y)
                } else {
                    0.0
                }
            }
            ObservedLaw::LatentIgnorable { weights, means, sigma2s, link, alphas } => weights
                .iter()
                .zip(means)
                .zip(sigma2s)
                .zip(alphas)
                .map(|(((w, m), s2), a)| {
                    let s = s2.sqrt();
                    w * norm_pdf((y - m) / s) / s * link.cdf(*a)
                })
                .sum(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub y_lo: f64,
    pub y_hi: f64,
    pub y_points: usize,
    /// Covariate axis `(lo, hi, points)` for models with a covariate.
    pub x: Option<(f64, f64, usize)>,
}

impl Grid {
    fn axis(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
        (0..n).map(move |i| if n == 1 { lo } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        let xs: Vec<f64> = match self.x {
            Some((lo, hi, n)) => Self::axis(lo, hi, n).collect(),
            None => vec![0.0],
        };
        xs.iter().flat_map(|&x| Self::axis(self.y_lo, self.y_hi, self.y_points).map(move |y| (x, y))).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CounterexamplePair {
    pub id: String,
    pub description: String,
    pub model_a: ObservedLaw,
    pub model_b: ObservedLaw,
    pub grid: Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyResult {
    pub id: String,
    pub max_abs_diff: f64,
    pub grid_points: usize,
}

/// Threshold for calling two sub-densities equal.
pub const VERIFY_TOL: f64 = 1e-12;

impl VerifyResult {
    pub fn passed(&self) -> bool {
        self.max_abs_diff < VERIFY_TOL
    }
}

pub const REGISTRY_IDS: [&str; 5] =
    ["ex1-unif", "ex2-exp", "ex3-normal-logit", "ex5-logit-covariate", "ex6-latent-ignorable"];

fn y_grid(lo: f64, hi: f64) -> Grid {
    Grid { y_lo: lo, y_hi: hi, y_points: 2001, x: None }
}

fn normal_logistic(gamma0: f64, alpha0: f64, beta: f64) -> ObservedLaw {
    ObservedLaw::Model(ModelSpec {
        outcome: OutcomeSpec::normal(gamma0, 1.0),
        mechanism: MechanismSpec::scalar(alpha0, beta, LinkFamily::Logistic),
    })
}

fn covariate_logistic(gamma: [f64; 2], alpha: [f64; 2], beta: f64) -> ObservedLaw {
    let f = FeatureMap::linear(1);
    ObservedLaw::Model(ModelSpec {
        outcome: OutcomeSpec {
            features: f.clone(),
            family: OutcomeFamily::Normal { mean: gamma.to_vec(), sigma2: 1.0 },
        },
        mechanism: MechanismSpec::additive(f, alpha.to_vec(), beta, LinkFamily::Logistic),
    })
}

fn latent_ignorable(pi1: f64) -> ObservedLaw {
    let alphas = vec![norm_quantile(0.25 / pi1), norm_quantile(0.25 / (1.0 - pi1))];
    ObservedLaw::LatentIgnorable {
        weights: vec![pi1, 1.0 - pi1],
        means: vec![0.0, 0.0],
        sigma2s: vec![1.0, 4.0],
        link: LinkFamily::Probit,
        alphas,
    }
}

/// Looks up a registered pair.
pub fn counterexample(id: &str) -> Option<CounterexamplePair> {
    let pair = |description: &str, model_a, model_b, grid| CounterexamplePair {
        id: id.to_string(),
        description: description.to_string(),
        model_a,
        model_b,
        grid,
    };
    Some(match id {
        "ex1-unif" => pair(
            "Unif(-0.5, 0.5) with P(R=1|y)=Φ(y) vs density 2Φ(y) on [-0.5, 0.5] with P(R=1)=1/2",
            ObservedLaw::UniformProbit { lo: -0.5, hi: 0.5 },
            ObservedLaw::TiltedUniformConstant { half_width: 0.5, p: 0.5 },
            y_grid(-0.5, 0.5),
        ),
        "ex2-exp" => pair(
            "Exp(2) with logit P = -log 2 + y vs Exp(1) with logit P = log 2 - y",
            ObservedLaw::ExponentialLogistic { rate: 2.0, alpha: -std::f64::consts::LN_2, beta: 1.0 },
            ObservedLaw::ExponentialLogistic { rate: 1.0, alpha: std::f64::consts::LN_2, beta: -1.0 },
            y_grid(-10.0, 10.0),
        ),
        "ex3-normal-logit" => pair(
            "N(1,1) with logit P = -3/2 + y vs N(2,1) with logit P = 3/2 - y",
            normal_logistic(1.0, -1.5, 1.0),
            normal_logistic(2.0, 1.5, -1.0),
            y_grid(-10.0, 10.0),
        ),
        "ex5-logit-covariate" => pair(
            "N(γ0 + 0.5x, 1), logit P = α0 + α1 x + βy: (γ0, α0, α1, β) = (0, -2, -1, 2) vs (2, 2, 1, -2)",
            covariate_logistic([0.0, 0.5], [-2.0, -1.0], 2.0),
            covariate_logistic([2.0, 0.5], [2.0, 1.0], -2.0),
            Grid { y_lo: -4.0, y_hi: 4.0, y_points: 201, x: Some((-4.0, 4.0, 201)) },
        ),
        "ex6-latent-ignorable" => pair(
            "0.5 N(0,1) + 0.5 N(0,4) responding with Φ(α_k) vs π1 = 0.4, both with π_k Φ(α_k) = 1/4",
            latent_ignorable(0.5),
            latent_ignorable(0.4),
            y_grid(-10.0, 10.0),
        ),
        _ => return None,
    })
}

pub fn registry() -> Vec<CounterexamplePair> {
    REGISTRY_IDS.iter().filter_map(|id| counterexample(id)).collect()
}

/// The normal-logit pair with `β` of the first model moved to 1.01; the
/// sub-densities must then differ visibly.
pub fn perturbed_normal_logit() -> CounterexamplePair {
    let mut pair = counterexample("ex3-normal-logit").expect("registered");
    pair.id = "ex3-normal-logit-perturbed".into();
    pair.model_a = normal_logistic(1.0, -1.5, 1.01);
    pair
}

pub fn verify_counterexample(pair: &CounterexamplePair) -> VerifyResult {
    let points = pair.grid.points();
    let max_abs_diff = points
        .iter()
        .map(|&(x, y)| (pair.model_a.density(x, y) - pair.model_b.density(x, y)).abs())
        .fold(0.0f64, |m, d| if d.is_nan() || m.is_nan() { f64::NAN } else { m.max(d) });
    VerifyResult { id: pair.id.clone(), max_abs_diff, grid_points: points.len() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registered_pairs_agree() {
        for pair in registry() {
            let r = verify_counterexample(&pair);
            assert!(r.passed(), "{r:?}");
        }
        assert_eq!(registry().len(), 5);
    }

    #[test]
    fn grid_sizes() {
        assert_eq!(verify_counterexample(&counterexample("ex5-logit-covariate").unwrap()).grid_points, 201 * 201);
        assert_eq!(verify_counterexample(&counterexample("ex1-unif").unwrap()).grid_points, 2001);
    }

    #[test]
    fn perturbation_is_detected() {
        let r = verify_counterexample(&perturbed_normal_logit());
        assert!(r.max_abs_diff > 1e-4, "{r:?}");
    }

    #[test]
    fn latent_ignorable_weights() {
        if let ObservedLaw::LatentIgnorable { weights, alphas, .. } = latent_ignorable(0.5) {
            assert_eq!(alphas, vec![0.0, 0.0]);
            assert_eq!(weights, vec![0.5, 0.5]);
        }
        assert!(counterexample("ex9").is_none());
    }
}
