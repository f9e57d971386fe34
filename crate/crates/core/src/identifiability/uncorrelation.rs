//! Rank check: does `g(x)` carry a covariate direction that the outcome mean,
//! the variance and a constant cannot reproduce?

use crate::model::FeatureMap;
use crate::rng::seeded;
use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Form of `σ²(x)`. Only a constant variance is supported by the fitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceForm {
    Constant,
}

pub const PROBE_POINTS: usize = 50;
const RANK_TOL: f64 = 1e-8;

fn probe_grid(width: usize) -> Vec<Vec<f64>> {
    if width == 1 {
        return (0..PROBE_POINTS).map(|i| vec![-2.0 + 4.0 * i as f64 / (PROBE_POINTS - 1) as f64]).collect();
    }
    let mut rng = seeded(0x5eed);
    (0..PROBE_POINTS).map(|_| (0..width).map(|_| rng.random_range(-2.0..2.0)).collect()).collect()
}

fn rank(columns: &[Vec<f64>]) -> usize {
    if columns.is_empty() {
        return 0;
    }
    let m = DMatrix::from_fn(columns[0].len(), columns.len(), |i, j| columns[j][i]);
    let sv = m.svd(false, false).singular_values;
    let top = sv.iter().fold(0.0f64, |a, &b| a.max(b));
    sv.iter().filter(|&&s| s > RANK_TOL * top).count()
}

/// True iff, on a fixed 50-point probe grid, adding the mechanism features to
/// the constant, the mean features and the variance form raises the column
/// rank.
pub fn linear_uncorrelation_check(mean: &FeatureMap, variance: VarianceForm, mechanism: &FeatureMap) -> bool {
    let width = mean.terms.iter().chain(&mechanism.terms).map(|t| t.column + 1).max().unwrap_or(0);
    if width == 0 {
        return false;
    }
    let grid = probe_grid(width);
    let column = |f: &dyn Fn(&[f64]) -> f64| grid.iter().map(|x| f(x)).collect::<Vec<f64>>();
    // a constant variance spans the same column as the constant
    let VarianceForm::Constant = variance;
    let mut base = vec![column(&|_| 1.0)];
    for t in &mean.terms {
        base.push(column(&|x| FeatureMap::term_value(t, x)));
    }
    let mut stacked = base.clone();
    for t in &mechanism.terms {
        stacked.push(column(&|x| FeatureMap::term_value(t, x)));
    }
    rank(&stacked) > rank(&base)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Transform;

    #[test]
    fn catalog_examples() {
        let linear = FeatureMap::linear(1);
        let quad = FeatureMap::linear(1).with_term(0, Transform::Square);
        assert!(linear_uncorrelation_check(&linear, VarianceForm::Constant, &quad));
        assert!(!linear_uncorrelation_check(&linear, VarianceForm::Constant, &linear));
        let none = FeatureMap::intercept_only();
        assert!(!linear_uncorrelation_check(&none, VarianceForm::Constant, &none));
        assert!(linear_uncorrelation_check(&none, VarianceForm::Constant, &linear));
    }

    #[test]
    fn second_covariate_is_new_direction() {
        let one = FeatureMap::linear(1);
        let two = FeatureMap::linear(2);
        assert!(linear_uncorrelation_check(&one, VarianceForm::Constant, &two));
        assert!(!linear_uncorrelation_check(&two, VarianceForm::Constant, &one));
    }
}
