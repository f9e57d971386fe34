//! Starting values from complete-case moments.

use super::codec::{Codec, FitTemplate};
use crate::mechanism::{ComponentMoments, LinkFamily, MechanismForm};
use crate::model::{FeatureMap, ModelSpec, ObservedDataset, OutcomeFamily};
use crate::rng::seeded;
use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, Normal};

/// Spread of the seeded perturbations applied to the encoded start.
const PERTURB_SD: f64 = 0.5;
const BETA_STARTS: [f64; 3] = [0.0, 1.0, -1.0];
const ROBIT_DF_STARTS: [f64; 3] = [2.0, 8.0, 32.0];
const T_NU_STARTS: [f64; 3] = [8.0, 4.0, 20.0];

struct Regression {
    coef: Vec<f64>,
    residuals: Vec<f64>,
    /// Feature rows of the observed units.
    design: Vec<Vec<f64>>,
    ys: Vec<f64>,
}

fn least_squares(design: &[Vec<f64>], ys: &[f64], p: usize) -> Option<Vec<f64>> {
    if design.len() < p {
        return None;
    }
    let x = DMatrix::from_fn(design.len(), p, |i, j| design[i][j]);
    let y = DVector::from_column_slice(ys);
    let coef = x.svd(true, true).solve(&y, 1e-12).ok()?;
    coef.iter().all(|v| v.is_finite()).then(|| coef.iter().copied().collect())
}

fn complete_case(features: &FeatureMap, data: &ObservedDataset) -> Regression {
    let p = features.n_coef();
    let mut design = Vec::new();
    let mut ys = Vec::new();
    for row in data.rows() {
        if let Some(y) = row.y {
            design.push(features.expand(&row.x));
            ys.push(y);
        }
    }
    let coef = least_squares(&design, &ys, p).unwrap_or_else(|| {
        let mut c = vec![0.0; p];
        c[0] = mean(&ys);
        c
    });
    let residuals =
        design.iter().zip(&ys).map(|(w, y)| y - w.iter().zip(&coef).map(|(a, b)| a * b).sum::<f64>()).collect();
    Regression { coef, residuals, design, ys }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len().max(1) as f64
}

/// Splits observed units into `k` groups of consecutive ranks under `key`.
fn quantile_groups(key: &[f64], k: usize) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..key.len()).collect();
    order.sort_by(|&a, &b| key[a].total_cmp(&key[b]));
    let n = order.len();
    (0..k).map(|g| order[g * n / k..(g + 1) * n / k].to_vec()).collect()
}

/// Mean coefficients and residual variance of one group: a group regression
/// when the group is large enough, else the pooled slopes with a shifted
/// intercept.
fn group_fit(reg: &Regression, group: &[usize], p: usize) -> (Vec<f64>, f64) {
    let design: Vec<Vec<f64>> = group.iter().map(|&i| reg.design[i].clone()).collect();
    let ys: Vec<f64> = group.iter().map(|&i| reg.ys[i]).collect();
    if group.len() >= 10 * p {
        if let Some(coef) = least_squares(&design, &ys, p) {
            let res: Vec<f64> =
                design.iter().zip(&ys).map(|(w, y)| y - w.iter().zip(&coef).map(|(a, b)| a * b).sum::<f64>()).collect();
            return (coef, variance(&res));
        }
    }
    let r: Vec<f64> = group.iter().map(|&i| reg.residuals[i]).collect();
    let mut coef = reg.coef.clone();
    coef[0] += mean(&r);
    (coef, variance(&r))
}

/// Deterministic start number `variant` (before perturbation).
fn base_start(template: &FitTemplate, data: &ObservedDataset, variant: usize) -> ModelSpec {
    let mut model = template.model.clone();
    let free = template.free;
    let p = model.outcome.features.n_coef();
    let reg = complete_case(&model.outcome.features, data);
    let v = variance(&reg.residuals).max(1e-6);
    let floor = 0.05 * v;
    let k = model.outcome.n_components();
    match &mut model.outcome.family {
        OutcomeFamily::Normal { mean, sigma2 } => {
            mean.clone_from(&reg.coef);
            *sigma2 = v;
        }
        OutcomeFamily::NormalMixture { components } => {
            if free.shared_location {
                let abs: Vec<f64> = reg.residuals.iter().map(|r| r.abs()).collect();
                for (c, g) in components.iter_mut().zip(quantile_groups(&abs, k)) {
                    c.mean.clone_from(&reg.coef);
                    let ms = g.iter().map(|&i| reg.residuals[i].powi(2)).sum::<f64>() / g.len().max(1) as f64;
                    c.sigma2 = ms.max(floor);
                    c.weight = 1.0 / k as f64;
                }
            } else if k == 1 {
                components[0].mean.clone_from(&reg.coef);
                components[0].sigma2 = v;
                components[0].weight = 1.0;
            } else {
                for (c, g) in components.iter_mut().zip(quantile_groups(&reg.residuals, k)) {
                    let (coef, var) = group_fit(&reg, &g, p);
                    c.mean = coef;
                    c.sigma2 = var.max(floor);
                    c.weight = 1.0 / k as f64;
                }
            }
        }
        OutcomeFamily::TMixture { components, omega2, nu } => {
            if free.nu {
                *nu = T_NU_STARTS[variant % 3];
            }
            let shrink = if *nu > 2.0 { (*nu - 2.0) / *nu } else { 0.5 };
            let mut pooled = 0.0;
            for (c, g) in components.iter_mut().zip(quantile_groups(&reg.residuals, k)) {
                let (coef, var) = if k == 1 { (reg.coef.clone(), v) } else { group_fit(&reg, &g, p) };
                c.mean = coef;
                c.weight = 1.0 / k as f64;
                pooled += var / k as f64;
            }
            *omega2 = (pooled * shrink).max(floor);
        }
    }
    model.canonicalize();

    let mech = &mut model.mechanism;
    if free.beta {
        let beta = match free.beta_sign {
            Some(sign) => sign.factor() * [0.5, 1.0, 0.25][variant % 3],
            None => BETA_STARTS[variant % 3],
        };
        mech.set_beta(beta);
    }
    if free.robit_df {
        mech.link = LinkFamily::Robit { df: ROBIT_DF_STARTS[variant % 3] };
    }
    let observed = data.n_observed() as f64 / data.len().max(1) as f64;
    let q = mech.link.quantile(observed.clamp(0.01, 0.99)).unwrap_or(0.0);
    let y_bar = mean(&reg.ys);
    let beta = mech.beta();
    let alpha0 = match &mech.form {
        MechanismForm::LatentMonotone { psi, kappa, varphi, .. } => {
            let c = ComponentMoments { mean: y_bar, sigma: v.sqrt() };
            (q * varphi.eval(c.sigma) - beta * y_bar + beta * kappa.eval(c.mean)) / psi.eval(c.sigma)
        }
        _ => q - beta * y_bar,
    };
    let alpha = mech.alpha_mut();
    alpha.fill(0.0);
    alpha[0] = alpha0;
    model
}

/// Encoded starting points. Starts cycle through three deterministic
/// variants (β start 0, 1, −1); from the fourth on, the variant is perturbed
/// with noise drawn from `seed + index`.
pub fn starting_points(
    codec: &Codec,
    template: &FitTemplate,
    data: &ObservedDataset,
    n_starts: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    let noise = Normal::new(0.0, PERTURB_SD).expect("valid normal");
    let offset = usize::from(template.start_from_template);
    let mut starts = Vec::with_capacity(n_starts);
    if template.start_from_template && n_starts > 0 {
        starts.push(codec.encode(&template.model));
    }
    for i in offset..n_starts {
        let j = i - offset;
        let mut theta = codec.encode(&base_start(template, data, j));
        if j >= 3 {
            let mut rng = seeded(seed.wrapping_add(i as u64));
            for t in theta.iter_mut() {
                *t += noise.sample(&mut rng);
            }
        }
        starts.push(theta);
    }
    starts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanism::MechanismSpec;
    use crate::model::{NormalComponent, OutcomeSpec, Row};

    #[test]
    fn complete_case_recovers_line() {
        let rows: Vec<Row> = (0..20)
            .map(|i| {
                let x = i as f64 / 4.0;
                if i % 5 == 0 {
                    Row::missing(vec![x])
                } else {
                    Row::observed(vec![x], 2.0 - 0.5 * x)
                }
            })
            .collect();
        let data = ObservedDataset::new(rows).unwrap();
        let reg = complete_case(&FeatureMap::linear(1), &data);
        assert!((reg.coef[0] - 2.0).abs() < 1e-10 && (reg.coef[1] + 0.5).abs() < 1e-10);
    }

    #[test]
    fn starts_are_valid_and_distinct() {
        let ys: Vec<Option<f64>> = (0..200)
            .map(|i| {
                let y = ((i * 37 % 101) as f64 - 50.0) / 10.0;
                (i % 4 != 0).then_some(y)
            })
            .collect();
        let data = ObservedDataset::from_outcomes(&ys).unwrap();
        let model = ModelSpec {
            outcome: OutcomeSpec {
                features: FeatureMap::intercept_only(),
                family: OutcomeFamily::NormalMixture {
                    components: vec![
                        NormalComponent { weight: 0.5, mean: vec![0.0], sigma2: 1.0 },
                        NormalComponent { weight: 0.5, mean: vec![0.0], sigma2: 1.0 },
                    ],
                },
            },
            mechanism: MechanismSpec::scalar(0.0, 0.0, LinkFamily::Probit),
        };
        let template = FitTemplate::new(model);
        let codec = Codec::new(&template).unwrap();
        let starts = starting_points(&codec, &template, &data, 6, 3);
        assert_eq!(starts.len(), 6);
        for s in &starts {
            codec.decode(s).validate(0).unwrap();
        }
        assert_ne!(starts[0], starts[1]);
        assert_ne!(starts[3], starts[0]);
        assert_eq!(starts, starting_points(&codec, &template, &data, 6, 3));
    }
}
