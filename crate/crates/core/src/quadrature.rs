//! Gauss–Hermite expectations under a normal law and the scale-mixture route
//! for Student-t expectations.
//!
//! A Student-t variable with location `μ`, scale `ω` and `ν` degrees of
//! freedom is `N(μ, ω² s²)` with `s² = ν / W`, `W ~ χ²_ν`. Expectations over
//! `W` are computed with the trapezoid rule in `v = ln W`, where the mixing
//! density is smooth and decays exponentially on the left and doubly
//! exponentially on the right, so step halving converges geometrically.

use crate::error::{Error, Result};
use libm::lgamma as ln_gamma;
use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use std::cell::RefCell;
use std::sync::OnceLock;

/// Node counts with a precomputed Gauss–Hermite rule.
pub const SUPPORTED_NODES: [usize; 5] = [16, 32, 64, 128, 256];

/// Quadrature settings shared by the likelihood and the fitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadSettings {
    /// Gauss–Hermite nodes tried first.
    pub nodes: usize,
    /// Largest node count reached by doubling.
    pub max_nodes: usize,
    /// Relative agreement required between successive Gauss–Hermite rules.
    pub rel_tol: f64,
    /// Relative agreement required by the outer scale-mixture rule.
    pub t_rel_tol: f64,
}

impl Default for QuadSettings {
    fn default() -> Self {
        Self { nodes: 64, max_nodes: 256, rel_tol: 1e-9, t_rel_tol: 1e-8 }
    }
}

impl QuadSettings {
    pub fn validate(&self) -> Result<()> {
        if !SUPPORTED_NODES.contains(&self.nodes) || !SUPPORTED_NODES.contains(&self.max_nodes) {
            return Err(Error::Domain(format!(
                "node counts must be one of {SUPPORTED_NODES:?}, got {} and {}",
                self.nodes, self.max_nodes
            )));
        }
        if self.max_nodes < self.nodes {
            return Err(Error::Domain("max_nodes must be at least nodes".into()));
        }
        if !(self.rel_tol > 0.0 && self.t_rel_tol > 0.0) {
            return Err(Error::Domain("quadrature tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// Gauss–Hermite rule for the standard normal: `E g(Z) ≈ Σ wᵢ g(zᵢ)`.
#[derive(Debug)]
pub struct HermiteRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

fn build_rule(n: usize) -> HermiteRule {
    // Golub–Welsch eigenvalues of the Jacobi matrix (weight e^{-t²}) seed a
    // Newton polish on the orthonormal recurrence, which also yields weights.
    let jacobi = DMatrix::from_fn(n, n, |i, j| if i.abs_diff(j) == 1 { (0.5 * i.max(j) as f64).sqrt() } else { 0.0 });
    let mut guesses: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
    guesses.sort_by(f64::total_cmp);
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let nf = n as f64;
    let sqrt_pi = std::f64::consts::PI.sqrt();
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for mut z in guesses {
        let mut pp = 1.0;
        for _ in 0..20 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let step = p1 / pp;
            z -= step;
            if step.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        nodes.push(std::f64::consts::SQRT_2 * z);
        weights.push(2.0 / (pp * pp) / sqrt_pi);
    }
    HermiteRule { nodes, weights }
}

/// Cached rule for one of [`SUPPORTED_NODES`].
pub fn hermite_rule(n: usize) -> Result<&'static HermiteRule> {
    static RULES: [OnceLock<HermiteRule>; 5] =
        [OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new()];
    let slot = SUPPORTED_NODES
        .iter()
        .position(|&m| m == n)
        .ok_or_else(|| Error::Domain(format!("no Gauss–Hermite rule with {n} nodes")))?;
    Ok(RULES[slot].get_or_init(|| build_rule(n)))
}

/// `∫ g(y) N(y; μ, σ²) dy` with an `n`-node rule.
pub fn gauss_hermite_expect(g: impl Fn(f64) -> f64, mu: f64, sigma: f64, n: usize) -> Result<f64> {
    let rule = hermite_rule(n)?;
    Ok(rule.nodes.iter().zip(&rule.weights).map(|(&z, &w)| w * g(mu + sigma * z)).sum())
}

/// Gauss–Hermite expectation with node doubling: the `settings.nodes` rule
/// is accepted when it agrees with the rule of half the size, otherwise the
/// node count doubles up to `settings.max_nodes`.
pub fn adaptive_gh_expect(g: impl Fn(f64) -> f64, mu: f64, sigma: f64, settings: &QuadSettings) -> Result<f64> {
    // the smallest rule has no half-size partner, so it is checked against 32
    let mut n = settings.nodes.max(SUPPORTED_NODES[1]);
    let mut previous = gauss_hermite_expect(&g, mu, sigma, n / 2)?;
    loop {
        let current = gauss_hermite_expect(&g, mu, sigma, n)?;
        if (current - previous).abs() <= settings.rel_tol * current.abs().max(f64::MIN_POSITIVE) {
            return Ok(current);
        }
        if n >= settings.max_nodes {
            return Err(Error::Quadrature { nodes: n, previous, last: current });
        }
        previous = current;
        n *= 2;
    }
}

/// Running `ln Σ exp(xᵢ)`.
#[derive(Debug, Clone, Copy)]
pub struct LogSum {
    max: f64,
    scaled: f64,
}

impl Default for LogSum {
    fn default() -> Self {
        Self { max: f64::NEG_INFINITY, scaled: 0.0 }
    }
}

impl LogSum {
    pub fn add(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x > self.max {
            self.scaled = self.scaled * (self.max - x).exp() + 1.0;
            self.max = x;
        } else {
            self.scaled += (x - self.max).exp();
        }
    }

    pub fn merge(&mut self, other: LogSum) {
        if other.max == f64::NEG_INFINITY {
            return;
        }
        if other.max > self.max {
            self.scaled = self.scaled * (self.max - other.max).exp() + other.scaled;
            self.max = other.max;
        } else {
            self.scaled += other.scaled * (other.max - self.max).exp();
        }
    }

    pub fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.scaled.ln()
        }
    }
}

pub fn log_sum_exp(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = LogSum::default();
    for x in xs {
        acc.add(x);
    }
    acc.value()
}

const OUTER_START_STEP: f64 = 0.5;
const OUTER_MIN_STEP: f64 = 1.0 / 64.0;
/// Mixing-density mass below `e^{-46}` of its peak is dropped.
const OUTER_LOG_CUTOFF: f64 = 46.0;

/// Trapezoid grid in `v = ln W` for `W ~ χ²_ν`.
struct OuterGrid {
    nu: f64,
    ln_norm: f64,
    lo: f64,
    intervals: usize,
    step: f64,
}

impl OuterGrid {
    fn new(nu: f64) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::Domain(format!("degrees of freedom must be positive, got {nu}")));
        }
        let ln_norm = 0.5 * nu * std::f64::consts::LN_2 + ln_gamma(0.5 * nu);
        let mode = nu.ln();
        let density = |v: f64| 0.5 * nu * v - 0.5 * v.exp() - ln_norm;
        let floor = density(mode) - OUTER_LOG_CUTOFF;
        let mut lo = mode;
        while density(lo) > floor {
            lo -= 1.0;
        }
        let mut hi = mode;
        while density(hi) > floor {
            hi += 0.25;
        }
        let step = OUTER_START_STEP;
        let intervals = ((hi - lo) / step).ceil() as usize;
        Ok(Self { nu, ln_norm, lo, intervals, step })
    }

    /// `(ln weight, s)` at `v`, where the weight includes the mixing density.
    fn point(&self, v: f64) -> (f64, f64) {
        let ln_density = 0.5 * self.nu * v - 0.5 * v.exp() - self.ln_norm;
        (ln_density, (self.nu / v.exp()).sqrt())
    }

    fn initial(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.intervals).map(move |j| self.lo + j as f64 * self.step)
    }

    /// Midpoints of the current grid; the step is then halved.
    fn refine(&mut self) -> Vec<f64> {
        let half = 0.5 * self.step;
        let mids = (0..self.intervals).map(|j| self.lo + half + j as f64 * self.step).collect();
        self.step = half;
        self.intervals *= 2;
        mids
    }

    fn can_refine(&self) -> bool {
        self.step > OUTER_MIN_STEP
    }

    fn failure(&self, previous: f64, last: f64) -> Error {
        Error::Quadrature { nodes: self.intervals + 1, previous, last }
    }
}

/// `ln E[exp(ln_h(s))]` for `s = √(ν / W)`, `W ~ χ²_ν`.
pub fn ln_scale_mixture_expect(ln_h: impl Fn(f64) -> f64, nu: f64, rel_tol: f64) -> Result<f64> {
    let mut grid = OuterGrid::new(nu)?;
    let mut acc = LogSum::default();
    for v in grid.initial() {
        let (ln_w, s) = grid.point(v);
        acc.add(ln_w + ln_h(s));
    }
    let mut estimate = acc.value() + grid.step.ln();
    while grid.can_refine() {
        for v in grid.refine() {
            let (ln_w, s) = grid.point(v);
            acc.add(ln_w + ln_h(s));
        }
        let refined = acc.value() + grid.step.ln();
        if (refined - estimate).abs() <= rel_tol || refined == estimate {
            return Ok(refined);
        }
        if refined.is_nan() {
            return Err(grid.failure(estimate.exp(), refined));
        }
        estimate = refined;
    }
    let previous = estimate;
    Err(grid.failure(previous.exp(), (acc.value() + grid.step.ln()).exp()))
}

/// `E[h(s)]` for `s = √(ν / W)`, `W ~ χ²_ν`; `h` may take either sign.
pub fn scale_mixture_expect(h: impl Fn(f64) -> f64, nu: f64, rel_tol: f64) -> Result<f64> {
    let mut grid = OuterGrid::new(nu)?;
    let term = |grid: &OuterGrid, v: f64| {
        let (ln_w, s) = grid.point(v);
        ln_w.exp() * h(s)
    };
    let mut sum: f64 = grid.initial().map(|v| term(&grid, v)).sum();
    let mut estimate = sum * grid.step;
    while grid.can_refine() {
        let mids = grid.refine();
        sum += mids.into_iter().map(|v| term(&grid, v)).sum::<f64>();
        let refined = sum * grid.step;
        if (refined - estimate).abs() <= rel_tol * refined.abs().max(f64::MIN_POSITIVE) {
            return Ok(refined);
        }
        if refined.is_nan() {
            return Err(grid.failure(estimate, refined));
        }
        estimate = refined;
    }
    Err(grid.failure(estimate, sum * grid.step))
}

/// Trapezoid rule in `z = (y − μ)/σ` over `[−9, 9]` with step halving;
/// slower than Gauss–Hermite but indifferent to how steep `g` is.
fn trapezoid_normal_expect(g: impl Fn(f64) -> f64, mu: f64, sigma: f64, rel_tol: f64) -> Result<f64> {
    const HALF_WIDTH: f64 = 9.0;
    const MIN_STEP: f64 = 1e-4;
    let term = |z: f64| crate::dist::norm_pdf(z) * g(mu + sigma * z);
    let mut step = 0.25;
    let mut intervals = (2.0 * HALF_WIDTH / step) as usize;
    let mut sum: f64 = (0..=intervals).map(|j| term(-HALF_WIDTH + j as f64 * step)).sum();
    let mut estimate = sum * step;
    while step > MIN_STEP {
        sum += (0..intervals).map(|j| term(-HALF_WIDTH + (j as f64 + 0.5) * step)).sum::<f64>();
        step *= 0.5;
        intervals *= 2;
        let refined = sum * step;
        if (refined - estimate).abs() <= rel_tol * refined.abs().max(f64::MIN_POSITIVE) {
            return Ok(refined);
        }
        estimate = refined;
    }
    Err(Error::Quadrature { nodes: intervals + 1, previous: estimate, last: sum * step })
}

/// `E g(Y)` for `Y ~ N(μ, σ²)`: adaptive Gauss–Hermite, with the trapezoid
/// rule taking over when the largest rule does not settle. Poles of `g` close
/// to the real axis slow Gauss–Hermite down far more than the trapezoid rule.
pub fn normal_expect(g: impl Fn(f64) -> f64, mu: f64, sigma: f64, settings: &QuadSettings) -> Result<f64> {
    adaptive_gh_expect(&g, mu, sigma, settings).or_else(|_| trapezoid_normal_expect(&g, mu, sigma, settings.rel_tol))
}

/// `∫ g(y) t_ν(y; μ, ω²) dy` through the normal scale mixture.
///
/// Where the inner Gauss–Hermite rule fails to settle (very large scales make
/// `g` steep on the standardized axis) a trapezoid rule takes over.
pub fn t_component_expect(
    g: impl Fn(f64) -> f64,
    mu: f64,
    omega: f64,
    nu: f64,
    settings: &QuadSettings,
) -> Result<f64> {
    let inner_error = RefCell::new(None);
    let value = scale_mixture_expect(
        |s| {
            normal_expect(&g, mu, omega * s, settings).unwrap_or_else(|e| {
                inner_error.borrow_mut().get_or_insert(e);
                0.0
            })
        },
        nu,
        settings.t_rel_tol,
    )?;
    match inner_error.into_inner() {
        Some(e) => Err(e),
        None => Ok(value),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::norm_cdf;

    #[test]
    fn hermite_weights_sum_to_one() {
        for n in SUPPORTED_NODES {
            let s = gauss_hermite_expect(|_| 1.0, 0.3, 1.7, n).unwrap();
            assert!((s - 1.0).abs() < 1e-14, "n={n}: {s}");
        }
        assert!(gauss_hermite_expect(|_| 1.0, 0.0, 1.0, 20).is_err());
    }

    #[test]
    fn hermite_moments() {
        for n in SUPPORTED_NODES {
            let m = gauss_hermite_expect(|y| y, 3.0, 2.0, n).unwrap();
            assert!((m - 3.0).abs() < 1e-12);
            let v = gauss_hermite_expect(|y| (y - 3.0).powi(2), 3.0, 2.0, n).unwrap();
            assert!((v - 4.0).abs() < 1e-12);
            let k = gauss_hermite_expect(|y| y.powi(4), 0.0, 1.0, n).unwrap();
            assert!((k - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn hermite_matches_probit_closed_form() {
        // slope times scale is 4 here, which needs the 256-node rule for 1e-10
        let exact = norm_cdf(1.0 / 17f64.sqrt());
        let q = gauss_hermite_expect(|y| norm_cdf(1.0 + 2.0 * y), 0.0, 2.0, 256).unwrap();
        assert!((q - exact).abs() < 1e-10);
        let q = gauss_hermite_expect(|y| norm_cdf(1.0 + 2.0 * y), 0.0, 2.0, 64).unwrap();
        assert!((q - exact).abs() < 1e-4);
        let q = gauss_hermite_expect(|y| norm_cdf(1.0 + 0.5 * y), 0.0, 2.0, 64).unwrap();
        assert!((q - norm_cdf(1.0 / 2f64.sqrt())).abs() < 1e-12, "{}", q - norm_cdf(1.0 / 2f64.sqrt()));
        assert!((exact - 0.595817).abs() < 1e-6);
    }

    #[test]
    fn adaptive_rule_reports_failure() {
        let tight = QuadSettings { nodes: 32, max_nodes: 64, ..Default::default() };
        match adaptive_gh_expect(|y| (30.0 * y).cos(), 0.0, 1.0, &tight) {
            Err(Error::Quadrature { nodes, .. }) => assert_eq!(nodes, 64),
            other => panic!("expected quadrature error, got {other:?}"),
        }
    }

    #[test]
    fn log_sum_matches_direct() {
        let xs = [-1.0, 0.5, -700.0, 2.0];
        let direct: f64 = xs.iter().map(|x: &f64| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(xs) - direct).abs() < 1e-14);
        assert_eq!(log_sum_exp([]), f64::NEG_INFINITY);
    }

    #[test]
    fn scale_mixture_integrates_mixing_density() {
        for nu in [0.5, 1.0, 5.0, 30.0] {
            let one = scale_mixture_expect(|_| 1.0, nu, 1e-10).unwrap();
            assert!((one - 1.0).abs() < 1e-9, "ν={nu}: {one}");
        }
        // E[1/s²] = E[W]/ν = 1
        let m = scale_mixture_expect(|s| 1.0 / (s * s), 5.0, 1e-10).unwrap();
        assert!((m - 1.0).abs() < 1e-9);
    }

    #[test]
    fn t_expectations() {
        let q = QuadSettings::default();
        let one = t_component_expect(|_| 1.0, 0.0, 1.0, 5.0, &q).unwrap();
        assert!((one - 1.0).abs() < 1e-8);
        let mean = t_component_expect(|y| y, 2.0, 1.0, 5.0, &q).unwrap();
        assert!((mean - 2.0).abs() < 1e-7);
        let half = t_component_expect(norm_cdf, 0.0, 1.0, 5.0, &q).unwrap();
        assert!((half - 0.5).abs() < 1e-8);
    }

    #[test]
    fn t_expectation_matches_trapezoid_oracle() {
        // E Φ(1 + 0.5 y) under t_5(0.5, 1.44) by a direct trapezoid rule in y
        let (mu, omega, nu) = (0.5, 1.2, 5.0);
        let g = |y: f64| norm_cdf(1.0 + 0.5 * y);
        let dens = |y: f64| {
            let z = (y - mu) / omega;
            (crate::dist::special::student_t_ln_pdf(z, nu)).exp() / omega
        };
        let h = 1e-3;
        let mut oracle = 0.0;
        let mut y = -400.0;
        while y <= 400.0 {
            oracle += h * g(y) * dens(y);
            y += h;
        }
        let q = t_component_expect(g, mu, omega, nu, &QuadSettings::default()).unwrap();
        assert!((q - oracle).abs() < 1e-7, "{q} vs {oracle}");
    }
}
