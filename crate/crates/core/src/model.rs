//! Outcome specifications, covariate feature maps, observed datasets and the
//! combined selection model.

use crate::error::{Error, Result};
use crate::mechanism::{MechanismForm, MechanismSpec};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Identity,
    Square,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureTerm {
    pub column: usize,
    pub transform: Transform,
}

/// Column transforms of the covariate vector. Every map carries an implicit
/// leading intercept, so a map with `t` terms has `t + 1` coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FeatureMap {
    pub terms: Vec<FeatureTerm>,
}

impl FeatureMap {
    pub fn intercept_only() -> Self {
        Self { terms: Vec::new() }
    }

    /// Identity transform of columns `0..width`.
    pub fn linear(width: usize) -> Self {
        Self { terms: (0..width).map(|column| FeatureTerm { column, transform: Transform::Identity }).collect() }
    }

    pub fn with_term(mut self, column: usize, transform: Transform) -> Self {
        self.terms.push(FeatureTerm { column, transform });
        self
    }

    pub fn n_coef(&self) -> usize {
        self.terms.len() + 1
    }

    pub fn is_intercept_only(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_linear(&self) -> bool {
        self.terms.iter().all(|t| t.transform == Transform::Identity)
    }

    pub fn term_value(term: &FeatureTerm, x: &[f64]) -> f64 {
        let v = x[term.column];
        match term.transform {
            Transform::Identity => v,
            Transform::Square => v * v,
        }
    }

    /// Feature vector including the leading 1.
    pub fn expand(&self, x: &[f64]) -> Vec<f64> {
        std::iter::once(1.0).chain(self.terms.iter().map(|t| Self::term_value(t, x))).collect()
    }

    /// `coef · w(x)`.
    pub fn index(&self, coef: &[f64], x: &[f64]) -> f64 {
        debug_assert_eq!(coef.len(), self.n_coef());
        let mut s = coef[0];
        for (c, t) in coef[1..].iter().zip(&self.terms) {
            s += c * Self::term_value(t, x);
        }
        s
    }

    pub fn validate(&self, width: usize) -> Result<()> {
        for t in &self.terms {
            if t.column >= width {
                return Err(Error::Contract(format!(
                    "feature map refers to covariate column {} but rows have {width} covariates",
                    t.column
                )));
            }
        }
        Ok(())
    }

    pub fn term_names(&self, names: Option<&[String]>) -> Vec<String> {
        let col = |c: usize| match names {
            Some(n) if c < n.len() => n[c].clone(),
            _ => format!("x{}", c + 1),
        };
        self.terms
            .iter()
            .map(|t| match t.transform {
                Transform::Identity => col(t.column),
                Transform::Square => format!("{}^2", col(t.column)),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub sigma2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum OutcomeFamily {
    Normal {
        mean: Vec<f64>,
        sigma2: f64,
    },
    NormalMixture {
        components: Vec<NormalComponent>,
    },
    /// Location mixture of Student-t laws with common scale `omega2` and
    /// degrees of freedom `nu`.
    TMixture {
        components: Vec<TComponent>,
        omega2: f64,
        nu: f64,
    },
}

/// Outcome law `Y | x`, with means given as coefficients over `features`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeSpec {
    #[serde(default)]
    pub features: FeatureMap,
    #[serde(flatten)]
    pub family: OutcomeFamily,
}

/// Per-component kernel used by the likelihood.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    Normal { sigma: f64 },
    StudentT { omega: f64, nu: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct ComponentView<'a> {
    pub weight: f64,
    pub mean: &'a [f64],
    pub kernel: Kernel,
}

impl OutcomeSpec {
    pub fn normal(mean: f64, sigma2: f64) -> Self {
        Self { features: FeatureMap::intercept_only(), family: OutcomeFamily::Normal { mean: vec![mean], sigma2 } }
    }

    pub fn n_components(&self) -> usize {
        match &self.family {
            OutcomeFamily::Normal { .. } => 1,
            OutcomeFamily::NormalMixture { components } => components.len(),
            OutcomeFamily::TMixture { components, .. } => components.len(),
        }
    }

    pub fn is_mixture(&self) -> bool {
        !matches!(self.family, OutcomeFamily::Normal { .. })
    }

    pub fn components(&self) -> Vec<ComponentView<'_>> {
        match &self.family {
            OutcomeFamily::Normal { mean, sigma2 } => {
                vec![ComponentView { weight: 1.0, mean, kernel: Kernel::Normal { sigma: sigma2.sqrt() } }]
            }
            OutcomeFamily::NormalMixture { components } => components
                .iter()
                .map(|c| ComponentView {
                    weight: c.weight,
                    mean: &c.mean,
                    kernel: Kernel::Normal { sigma: c.sigma2.sqrt() },
                })
                .collect(),
            OutcomeFamily::TMixture { components, omega2, nu } => components
                .iter()
                .map(|c| ComponentView {
                    weight: c.weight,
                    mean: &c.mean,
                    kernel: Kernel::StudentT { omega: omega2.sqrt(), nu: *nu },
                })
                .collect(),
        }
    }

    pub fn validate(&self, width: usize) -> Result<()> {
        self.features.validate(width)?;
        let n_coef = self.features.n_coef();
        let check_mean = |m: &[f64]| {
            if m.len() != n_coef {
                return Err(Error::Contract(format!(
                    "mean has {} coefficients, feature map expects {n_coef}",
                    m.len()
                )));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain("mean coefficients must be finite".into()));
            }
            Ok(())
        };
        let check_weights = |w: &mut dyn Iterator<Item = f64>| {
            let mut total = 0.0;
            for v in w {
                if !(v >= 0.0 && v <= 1.0) {
                    return Err(Error::Domain(format!("mixture weight {v} outside [0, 1]")));
                }
                total += v;
            }
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::Domain(format!("mixture weights sum to {total}, not 1")));
            }
            Ok(())
        };
        let positive = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Domain(format!("{what} must be positive, got {v}")))
            }
        };
        match &self.family {
            OutcomeFamily::Normal { mean, sigma2 } => {
                check_mean(mean)?;
                positive(*sigma2, "sigma2")?;
            }
            OutcomeFamily::NormalMixture { components } => {
                if components.is_empty() {
                    return Err(Error::Contract("mixture needs at least one component".into()));
                }
                for c in components {
                    check_mean(&c.mean)?;
                    positive(c.sigma2, "sigma2")?;
                }
                check_weights(&mut components.iter().map(|c| c.weight))?;
            }
            OutcomeFamily::TMixture { components, omega2, nu } => {
                if components.is_empty() {
                    return Err(Error::Contract("mixture needs at least one component".into()));
                }
                for c in components {
                    check_mean(&c.mean)?;
                }
                positive(*omega2, "omega2")?;
                positive(*nu, "nu")?;
                check_weights(&mut components.iter().map(|c| c.weight))?;
            }
        }
        Ok(())
    }

    /// Reorders mixture components: scale decreasing, then mean coefficients
    /// decreasing (lexicographic, intercept first).
    pub fn canonicalize(&mut self) {
        fn mean_desc(a: &[f64], b: &[f64]) -> Ordering {
            for (x, y) in a.iter().zip(b) {
                match y.partial_cmp(x).unwrap_or(Ordering::Equal) {
                    Ordering::Equal => continue,
                    o => return o,
                }
            }
            Ordering::Equal
        }
        match &mut self.family {
            OutcomeFamily::Normal { .. } => {}
            OutcomeFamily::NormalMixture { components } => components.sort_by(|a, b| {
                b.sigma2.partial_cmp(&a.sigma2).unwrap_or(Ordering::Equal).then_with(|| mean_desc(&a.mean, &b.mean))
            }),
            OutcomeFamily::TMixture { components, .. } => components.sort_by(|a, b| mean_desc(&a.mean, &b.mean)),
        }
    }
}

/// One unit: covariates and the outcome when it was observed (`R = 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub x: Vec<f64>,
    pub y: Option<f64>,
}

impl Row {
    pub fn observed(x: Vec<f64>, y: f64) -> Self {
        Self { x, y: Some(y) }
    }

    pub fn missing(x: Vec<f64>) -> Self {
        Self { x, y: None }
    }

    pub fn r(&self) -> u8 {
        u8::from(self.y.is_some())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ObservedDataset {
    rows: Vec<Row>,
    width: usize,
    #[serde(default)]
    covariate_names: Vec<String>,
}

impl ObservedDataset {
    pub fn new(rows: Vec<Row>) -> Result<Self> {
        let width = rows.first().map_or(0, |r| r.x.len());
        for (i, r) in rows.iter().enumerate() {
            if r.x.len() != width {
                return Err(Error::Data(format!("row {i} has {} covariates, expected {width}", r.x.len())));
            }
            if r.x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!("row {i} has a non-finite covariate")));
            }
            if matches!(r.y, Some(y) if !y.is_finite()) {
                return Err(Error::Data(format!("row {i} has a non-finite outcome")));
            }
        }
        Ok(Self { rows, width, covariate_names: Vec::new() })
    }

    /// Dataset without covariates.
    pub fn from_outcomes(ys: &[Option<f64>]) -> Result<Self> {
        Self::new(ys.iter().map(|&y| Row { x: Vec::new(), y }).collect())
    }

    pub fn with_covariate_names(mut self, names: Vec<String>) -> Self {
        self.covariate_names = names;
        self
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn n_observed(&self) -> usize {
        self.rows.iter().filter(|r| r.y.is_some()).count()
    }

    pub fn n_missing(&self) -> usize {
        self.len() - self.n_observed()
    }

    pub fn missing_fraction(&self) -> f64 {
        if self.rows.is_empty() {
            0.0
        } else {
            self.n_missing() as f64 / self.len() as f64
        }
    }

    pub fn observed_outcomes(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.y).collect()
    }
}

/// Selection model `P(y | x) · P(R = 1 | x, y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub outcome: OutcomeSpec,
    pub mechanism: MechanismSpec,
}

impl ModelSpec {
    pub fn validate(&self, width: usize) -> Result<()> {
        self.outcome.validate(width)?;
        self.mechanism.validate(width)?;
        match &self.mechanism.form {
            MechanismForm::LatentMonotone { .. } if !self.outcome.is_mixture() => {
                Err(Error::Contract("a latent monotone mechanism needs a mixture outcome".into()))
            }
            MechanismForm::Additive { .. } if width == 0 => {
                Err(Error::Contract("an additive mechanism needs covariates".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn canonicalize(&mut self) {
        self.outcome.canonicalize();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feature_index_and_expand() {
        let f = FeatureMap::linear(1).with_term(0, Transform::Square);
        assert_eq!(f.n_coef(), 3);
        assert_eq!(f.expand(&[2.0]), vec![1.0, 2.0, 4.0]);
        assert_eq!(f.index(&[1.0, -1.0, 0.5], &[2.0]), 1.0 - 2.0 + 2.0);
        assert!(f.validate(1).is_ok());
        assert!(f.validate(0).is_err());
        assert!(!f.is_linear());
    }

    #[test]
    fn dataset_invariants() {
        let d = ObservedDataset::new(vec![Row::observed(vec![1.0], 0.5), Row::missing(vec![2.0])]).unwrap();
        assert_eq!((d.len(), d.n_missing(), d.width()), (2, 1, 1));
        assert!(ObservedDataset::new(vec![Row::observed(vec![1.0], 0.5), Row::missing(vec![])]).is_err());
        assert!(ObservedDataset::new(vec![Row::observed(vec![], f64::NAN)]).is_err());
    }

    #[test]
    fn mixture_weights_validated() {
        let mut o = OutcomeSpec {
            features: FeatureMap::intercept_only(),
            family: OutcomeFamily::NormalMixture {
                components: vec![
                    NormalComponent { weight: 0.3, mean: vec![0.0], sigma2: 1.0 },
                    NormalComponent { weight: 0.6, mean: vec![1.0], sigma2: 4.0 },
                ],
            },
        };
        assert!(o.validate(0).is_err());
        if let OutcomeFamily::NormalMixture { components } = &mut o.family {
            components[1].weight = 0.7;
        }
        assert!(o.validate(0).is_ok());
    }

    #[test]
    fn canonical_order() {
        let mut o = OutcomeSpec {
            features: FeatureMap::intercept_only(),
            family: OutcomeFamily::NormalMixture {
                components: vec![
                    NormalComponent { weight: 0.2, mean: vec![0.0], sigma2: 1.0 },
                    NormalComponent { weight: 0.3, mean: vec![5.0], sigma2: 1.0 },
                    NormalComponent { weight: 0.5, mean: vec![1.0], sigma2: 4.0 },
                ],
            },
        };
        o.canonicalize();
        let OutcomeFamily::NormalMixture { components } = &o.family else { unreachable!() };
        let order: Vec<f64> = components.iter().map(|c| c.weight).collect();
        assert_eq!(order, vec![0.5, 0.3, 0.2]);
    }
}
