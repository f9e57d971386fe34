//! Observed-information covariance and delta-method standard errors.

use super::codec::Codec;
use super::fit::objective;
use crate::error::{Error, Result};
use crate::model::ObservedDataset;
use crate::optim::numerical_hessian;
use crate::quadrature::QuadSettings;
use nalgebra::{DMatrix, SymmetricEigen};

/// Inverse of the numerically differenced observed information at `theta`
/// (encoded scale).
pub fn observed_information_covariance(
    codec: &Codec,
    theta: &[f64],
    data: &ObservedDataset,
    quad: &QuadSettings,
) -> Result<DMatrix<f64>> {
    let f = objective(codec, data, quad);
    let h = numerical_hessian(&f, theta);
    let h = (&h + h.transpose()) * 0.5;
    invert_information(h)
}

pub(crate) fn invert_information(h: DMatrix<f64>) -> Result<DMatrix<f64>> {
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::Covariance("observed information has non-finite entries".into()));
    }
    let eig = SymmetricEigen::new(h.clone()).eigenvalues;
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v.abs())));
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    let cholesky = (lo > 0.0).then(|| h.cholesky()).flatten().ok_or_else(|| {
        Error::Covariance(format!(
            "observed information is not positive definite (smallest eigenvalue {lo:.3e}, condition number {condition:.3e})"
        ))
    })?;
    Ok(cholesky.inverse())
}

/// Jacobian of the natural-scale report with respect to the encoded vector.
pub(crate) fn natural_jacobian(codec: &Codec, theta: &[f64]) -> DMatrix<f64> {
    let base = codec.natural(&codec.decode(theta));
    let mut jac = DMatrix::zeros(base.len(), theta.len());
    let mut probe = theta.to_vec();
    for j in 0..theta.len() {
        let h = 1e-6 * theta[j].abs().max(1.0);
        probe[j] = theta[j] + h;
        let up = codec.natural(&codec.decode(&probe));
        probe[j] = theta[j] - h;
        let down = codec.natural(&codec.decode(&probe));
        probe[j] = theta[j];
        for i in 0..base.len() {
            jac[(i, j)] = (up[i] - down[i]) / (2.0 * h);
        }
    }
    jac
}

/// Delta-method standard errors on the natural scale. Quantities that do not
/// move with the encoded vector (fixed ones) get `None`.
pub fn natural_se(codec: &Codec, theta: &[f64], cov: &DMatrix<f64>) -> Vec<Option<f64>> {
    let jac = natural_jacobian(codec, theta);
    let nat_cov = &jac * cov * jac.transpose();
    (0..jac.nrows())
        .map(|i| {
            let free = jac.row(i).iter().any(|v| *v != 0.0);
            free.then(|| nat_cov[(i, i)].max(0.0).sqrt())
        })
        .collect()
}
