//! Maximum-likelihood selection models for outcomes that are missing not at
//! random.
//!
//! The joint law of an outcome `Y` and its response indicator `R` is written
//! as `P(y | x) · P(R = 1 | x, y)`. Outcome families are normal, normal
//! mixtures and location mixtures of Student-t; the response probability is a
//! link `F` (Probit, Logistic or Robit) applied to a predictor that is linear
//! in `y`, optionally standardized by the latent mixture component.
//!
//! - [`dist`]: scalar densities, distribution functions, quantiles, sampling.
//! - [`mechanism`]: link families, response mechanisms, tail-condition flags.
//! - [`model`]: outcome specifications, datasets and feature maps.
//! - [`quadrature`]: Gauss–Hermite rules and the Student-t scale-mixture route.
//! - [`likelihood`]: observed-data log-likelihood.
//! - [`estimation`]: parameter codec, multi-start BFGS fitting, standard errors
//!   and reparametrizations.
//! - [`identifiability`]: decision table, τ statistics, counterexample checks.
//! - [`simulation`]: scenario catalog, data generation and replicate studies.

pub mod dist;
pub mod error;
pub mod estimation;
pub mod identifiability;
pub mod likelihood;
pub mod mechanism;
pub mod model;
pub mod optim;
pub mod quadrature;
pub mod rng;
pub mod simulation;

pub use error::{Error, Result};
