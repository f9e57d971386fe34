//! Maximum-likelihood fitting: parameter codec, multi-start quasi-Newton
//! search, standard errors, AIC and exact reparametrizations.

mod codec;
mod fit;
mod reparam;
mod se;
mod starts;

pub use codec::{BetaSign, Codec, FitTemplate, FreeFlags, DF_FLOOR};
pub use fit::{aic, fit_mle, standard_errors, Estimate, FitOptions, FitResult, TAU_LEVEL};
pub use reparam::{
    dual_solution, heckman_inverse, heckman_loglik, heckman_model, heckman_reparam, selection_t_params,
    selection_t_reparam, BivariateT, SelectionT,
};
pub use se::{natural_se, observed_information_covariance};
