//! Scenario catalog and data generation.

use crate::dist::open_unit;
use crate::error::{Error, Result};
use crate::estimation::{FitTemplate, FreeFlags};
use crate::likelihood::prob_missing;
use crate::mechanism::{ComponentMoments, KappaFn, LinkFamily, MechanismForm, MechanismSpec, PsiFn, VarphiFn};
use crate::model::{
    FeatureMap, Kernel, ModelSpec, NormalComponent, ObservedDataset, OutcomeFamily, OutcomeSpec, Row, TComponent,
};
use crate::quadrature::{gauss_hermite_expect, QuadSettings};
use crate::rng::seeded;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Law of the covariate vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum CovariateLaw {
    None,
    /// One covariate `X₁ ~ N(mean, sd²)`.
    Normal {
        mean: f64,
        sd: f64,
    },
}

impl CovariateLaw {
    pub fn width(&self) -> usize {
        match self {
            CovariateLaw::None => 0,
            CovariateLaw::Normal { .. } => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimScenario {
    pub id: String,
    pub description: String,
    pub truth: ModelSpec,
    pub covariates: CovariateLaw,
    pub n: usize,
    /// Approximate missing-fraction range quoted for the design.
    pub declared_missing: (f64, f64),
    /// Missing fraction implied by the parameters, recorded where it falls
    /// outside `declared_missing`.
    #[serde(default)]
    pub documented_missing: Option<f64>,
}

/// A named fit template used in studies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSpec {
    pub name: String,
    pub template: FitTemplate,
}

/// Designs whose parameters imply a missing fraction outside the quoted
/// range, with the implied value (to four decimals).
const DOCUMENTED_MISSING: [(&str, f64); 11] = [
    ("s61-probit-b2", 0.4042),
    ("s61-logit-b2", 0.4096),
    ("s61-robit2-b2", 0.4096),
    ("s61-robit16-b2", 0.4046),
    ("s62-case1-bneg05", 0.2298),
    // the predictor reduces to minus the outcome's deviation from its mean
    ("s62-case1-bneg1", 0.5),
    ("s62-case2-bneg1", 0.1883),
    ("s62-case4-bneg1", 0.1470),
    ("s63-case1-bneg05", 0.1865),
    ("s63-case2-bneg05", 0.5763),
    ("s63-case2-bneg1", 0.5691),
];

const X_LAW: CovariateLaw = CovariateLaw::Normal { mean: 1.0, sd: 1.0 };

fn beta_tag(beta: f64) -> &'static str {
    if beta == -0.5 {
        "bneg05"
    } else {
        "bneg1"
    }
}

fn latent(alpha: Vec<f64>, beta: f64) -> MechanismSpec {
    MechanismSpec {
        form: MechanismForm::LatentMonotone {
            features: FeatureMap::linear(1),
            alpha,
            beta,
            psi: PsiFn::One,
            kappa: KappaFn::Mean,
            varphi: VarphiFn::Sigma,
        },
        link: LinkFamily::Probit,
    }
}

fn additive_probit(alpha: Vec<f64>, beta: f64) -> MechanismSpec {
    MechanismSpec::additive(FeatureMap::linear(1), alpha, beta, LinkFamily::Probit)
}

fn normal_mixture(components: Vec<NormalComponent>) -> OutcomeSpec {
    OutcomeSpec { features: FeatureMap::linear(1), family: OutcomeFamily::NormalMixture { components } }
}

fn t_outcome(means: &[[f64; 2]]) -> OutcomeSpec {
    let w = 1.0 / means.len() as f64;
    OutcomeSpec {
        features: FeatureMap::linear(1),
        family: OutcomeFamily::TMixture {
            components: means.iter().map(|m| TComponent { weight: w, mean: m.to_vec() }).collect(),
            omega2: 1.0,
            nu: 5.0,
        },
    }
}

fn scenario(
    id: String,
    description: String,
    truth: ModelSpec,
    covariates: CovariateLaw,
    declared: (f64, f64),
) -> SimScenario {
    let mut truth = truth;
    truth.canonicalize();
    let documented_missing = DOCUMENTED_MISSING.iter().find(|(key, _)| *key == id).map(|&(_, v)| v);
    SimScenario { id, description, truth, covariates, n: 1500, declared_missing: declared, documented_missing }
}

fn normal_outcome_scenarios() -> Vec<SimScenario> {
    let links = [
        ("probit", LinkFamily::Probit),
        ("logit", LinkFamily::Logistic),
        ("robit2", LinkFamily::Robit { df: 2.0 }),
        ("robit16", LinkFamily::Robit { df: 16.0 }),
    ];
    let mut out = Vec::new();
    for (tag, link) in links {
        for beta in [1.0, 2.0] {
            out.push(scenario(
                format!("s61-{tag}-b{beta}"),
                format!("Y ~ N(0, 4), {} link, alpha = 1, beta = {beta}", link.name()),
                ModelSpec { outcome: OutcomeSpec::normal(0.0, 4.0), mechanism: MechanismSpec::scalar(1.0, beta, link) },
                CovariateLaw::None,
                (0.30, 0.40),
            ));
        }
    }
    out
}

fn scale_mixture_scenarios() -> Vec<SimScenario> {
    let mut out = Vec::new();
    for beta in [-0.5, -1.0] {
        let declared = if beta == -0.5 { (0.10, 0.20) } else { (0.20, 0.30) };
        let scale_mix = || {
            normal_mixture(vec![
                NormalComponent { weight: 0.5, mean: vec![1.0, 1.0], sigma2: 1.0 },
                NormalComponent { weight: 0.5, mean: vec![1.0, 1.0], sigma2: 4.0 },
            ])
        };
        let cases = [
            ("case1", "scale mixture of normals, Probit", scale_mix(), additive_probit(vec![1.0, 1.0], beta)),
            ("case2", "scale mixture of normals, latent Probit", scale_mix(), latent(vec![1.0, 1.0], beta)),
            ("case3", "t outcome, Probit", t_outcome(&[[1.0, -1.0]]), additive_probit(vec![1.0, 1.0], beta)),
            (
                "case4",
                "t outcome, latent Probit (selection-t)",
                t_outcome(&[[1.0, -1.0]]),
                latent(vec![1.0, 1.0], beta),
            ),
        ];
        for (case, what, outcome, mechanism) in cases {
            out.push(scenario(
                format!("s62-{case}-{}", beta_tag(beta)),
                format!("{what}, X1 ~ N(1, 1), beta = {beta}"),
                ModelSpec { outcome, mechanism },
                X_LAW,
                declared,
            ));
        }
    }
    out
}

fn general_mixture_scenarios() -> Vec<SimScenario> {
    let mut out = Vec::new();
    for beta in [-0.5, -1.0] {
        let cases = [
            (
                "case1",
                "normal mixture, Probit",
                normal_mixture(vec![
                    NormalComponent { weight: 0.5, mean: vec![1.0, 1.0], sigma2: 1.0 },
                    NormalComponent { weight: 0.5, mean: vec![1.0, -1.0], sigma2: 4.0 },
                ]),
                additive_probit(vec![1.0, 1.0], beta),
            ),
            (
                "case2",
                "normal mixture, latent Probit",
                normal_mixture(vec![
                    NormalComponent { weight: 0.5, mean: vec![2.0, 1.0], sigma2: 1.0 },
                    NormalComponent { weight: 0.5, mean: vec![-1.5, -2.0], sigma2: 4.0 },
                ]),
                latent(vec![1.5, -2.0], beta),
            ),
            (
                "case3",
                "location mixture of t, Probit",
                t_outcome(&[[1.0, 3.0], [1.0, -3.0]]),
                additive_probit(vec![1.0, 1.0], beta),
            ),
        ];
        for (case, what, outcome, mechanism) in cases {
            out.push(scenario(
                format!("s63-{case}-{}", beta_tag(beta)),
                format!("{what}, X1 ~ N(1, 1), beta = {beta}"),
                ModelSpec { outcome, mechanism },
                X_LAW,
                (0.20, 0.50),
            ));
        }
    }
    out
}

fn logistic_covariate(gamma: [f64; 2], alpha: [f64; 2], beta: f64) -> ModelSpec {
    let f = FeatureMap::linear(1);
    ModelSpec {
        outcome: OutcomeSpec {
            features: f.clone(),
            family: OutcomeFamily::Normal { mean: gamma.to_vec(), sigma2: 1.0 },
        },
        mechanism: MechanismSpec::additive(f, alpha.to_vec(), beta, LinkFamily::Logistic),
    }
}

fn tau_scenarios() -> Vec<SimScenario> {
    let null = scenario(
        "logit-ex5".into(),
        "N(0.5 x, 1), logit P = -2 - x + 2y (tau1 = tau2 = 0), X1 ~ N(1, 1)".into(),
        logistic_covariate([0.0, 0.5], [-2.0, -1.0], 2.0),
        X_LAW,
        (0.0, 1.0),
    );
    let alt = scenario(
        "logit-tau2-3".into(),
        "N(x, 1), logit P = -2 + x + 2y (tau1 = 0, tau2 = 3), X1 ~ N(1, 1)".into(),
        logistic_covariate([0.0, 1.0], [-2.0, 1.0], 2.0),
        X_LAW,
        (0.0, 1.0),
    );
    vec![SimScenario { n: 2000, ..null }, SimScenario { n: 2000, ..alt }]
}

/// Every cataloged scenario.
pub fn catalog() -> Vec<SimScenario> {
    let mut all = normal_outcome_scenarios();
    all.extend(scale_mixture_scenarios());
    all.extend(general_mixture_scenarios());
    all.extend(tau_scenarios());
    all
}

pub fn find_scenario(id: &str) -> Option<SimScenario> {
    catalog().into_iter().find(|s| s.id == id)
}

impl SimScenario {
    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    /// The fit templates compared for this design.
    pub fn default_fits(&self) -> Vec<FitSpec> {
        match self.id.split('-').next() {
            Some("s61") => normal_fits(),
            Some("s62") => scale_mixture_fits(&self.truth),
            Some("s63") => general_mixture_fits(&self.truth),
            _ => vec![FitSpec { name: "truth-form".into(), template: FitTemplate::new(self.truth.clone()) }],
        }
    }
}

pub fn normal_fits() -> Vec<FitSpec> {
    let model =
        |link| ModelSpec { outcome: OutcomeSpec::normal(0.0, 1.0), mechanism: MechanismSpec::scalar(0.0, 0.0, link) };
    vec![
        FitSpec { name: "probit".into(), template: FitTemplate::new(model(LinkFamily::Probit)) },
        FitSpec { name: "logistic".into(), template: FitTemplate::new(model(LinkFamily::Logistic)) },
        FitSpec {
            name: "robit-free-df".into(),
            template: FitTemplate::new(model(LinkFamily::Robit { df: 8.0 }))
                .with_free(FreeFlags { robit_df: true, ..FreeFlags::default() }),
        },
    ]
}

fn normal_probit_covariate() -> FitSpec {
    let f = FeatureMap::linear(1);
    FitSpec {
        name: "normal-probit".into(),
        template: FitTemplate::new(ModelSpec {
            outcome: OutcomeSpec {
                features: f.clone(),
                family: OutcomeFamily::Normal { mean: vec![0.0; 2], sigma2: 1.0 },
            },
            mechanism: additive_probit(vec![0.0; 2], 0.0),
        }),
    }
}

fn two_normal_components() -> OutcomeSpec {
    normal_mixture(vec![
        NormalComponent { weight: 0.5, mean: vec![0.0; 2], sigma2: 1.0 },
        NormalComponent { weight: 0.5, mean: vec![0.0; 2], sigma2: 2.0 },
    ])
}

fn mechanism_like(truth: &ModelSpec) -> MechanismSpec {
    let mut m = truth.mechanism.clone();
    m.alpha_mut().fill(0.0);
    m.set_beta(0.0);
    m
}

fn scale_mixture_fits(truth: &ModelSpec) -> Vec<FitSpec> {
    vec![
        FitSpec {
            name: "scale-mixture".into(),
            template: FitTemplate::new(ModelSpec {
                outcome: two_normal_components(),
                mechanism: mechanism_like(truth),
            })
            .with_free(FreeFlags { shared_location: true, ..FreeFlags::default() }),
        },
        normal_probit_covariate(),
        FitSpec {
            name: "selection-t".into(),
            template: FitTemplate::new(ModelSpec {
                outcome: t_outcome(&[[0.0, 0.0]]),
                mechanism: latent(vec![0.0; 2], 0.0),
            }),
        },
    ]
}

fn general_mixture_fits(truth: &ModelSpec) -> Vec<FitSpec> {
    let mechanism =
        if truth.mechanism.is_latent() { mechanism_like(truth) } else { additive_probit(vec![0.0; 2], 0.0) };
    vec![
        FitSpec {
            name: "normal-mixture".into(),
            template: FitTemplate::new(ModelSpec { outcome: two_normal_components(), mechanism }),
        },
        normal_probit_covariate(),
    ]
}

fn draw_covariates<R: Rng>(law: CovariateLaw, rng: &mut R) -> Vec<f64> {
    match law {
        CovariateLaw::None => Vec::new(),
        CovariateLaw::Normal { mean, sd } => vec![mean + sd * rng.sample::<f64, _>(StandardNormal)],
    }
}

fn pick_component<R: Rng>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return k;
        }
    }
    weights.len() - 1
}

/// Draws `scenario.n` units: covariates, latent component, outcome, and the
/// response indicator; outcomes of non-responders are blanked.
pub fn generate(scenario: &SimScenario, seed: u64) -> Result<ObservedDataset> {
    generate_model(&scenario.truth, scenario.covariates, scenario.n, seed)
}

pub fn generate_model(model: &ModelSpec, covariates: CovariateLaw, n: usize, seed: u64) -> Result<ObservedDataset> {
    model.validate(covariates.width())?;
    let mut rng = seeded(seed);
    let components = model.outcome.components();
    let weights: Vec<f64> = components.iter().map(|c| c.weight).collect();
    let features = &model.outcome.features;
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let x = draw_covariates(covariates, &mut rng);
        let c = &components[pick_component(&weights, &mut rng)];
        let mean = features.index(c.mean, &x);
        let sigma = match c.kernel {
            Kernel::Normal { sigma } => sigma,
            Kernel::StudentT { omega, nu } => {
                let w: f64 = ChiSquared::new(nu).map_err(|e| Error::Domain(e.to_string()))?.sample(&mut rng);
                omega * (nu / w).sqrt()
            }
        };
        let y = mean + sigma * rng.sample::<f64, _>(StandardNormal);
        let p = model.mechanism.response_prob(Some(&x), y, Some(ComponentMoments { mean, sigma }))?;
        if open_unit(&mut rng) < p {
            rows.push(Row::observed(x, y));
        } else {
            rows.push(Row::missing(x));
        }
    }
    ObservedDataset::new(rows)
}

/// Population missing fraction, integrating over the covariate law.
pub fn expected_missing_fraction(scenario: &SimScenario, quad: &QuadSettings) -> Result<f64> {
    match scenario.covariates {
        CovariateLaw::None => prob_missing(&scenario.truth, &[], quad),
        CovariateLaw::Normal { mean, sd } => {
            let failure = std::cell::RefCell::new(None);
            let v = gauss_hermite_expect(
                |x| {
                    prob_missing(&scenario.truth, &[x], quad).unwrap_or_else(|e| {
                        failure.borrow_mut().get_or_insert(e);
                        f64::NAN
                    })
                },
                mean,
                sd,
                64,
            )?;
            match failure.into_inner() {
                Some(e) => Err(e),
                None => Ok(v),
            }
        }
    }
}
