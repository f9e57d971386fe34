//! Quasi-Newton minimization with central-difference derivatives.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BfgsOptions {
    pub tol_grad: f64,
    pub tol_rel_f: f64,
    pub max_iter: usize,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self { tol_grad: 1e-6, tol_rel_f: 1e-10, max_iter: 500 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Gradient,
    FunctionChange,
    LineSearch,
    MaxIterations,
    NonFiniteStart,
}

#[derive(Debug, Clone)]
pub struct BfgsResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
    pub converged: bool,
}

impl BfgsResult {
    pub fn grad_norm(&self) -> f64 {
        sup_norm(&self.grad)
    }
}

/// Gradient norm under which a run stopped by the function-change or
/// line-search rule still counts as converged.
pub const LOOSE_GRAD_TOL: f64 = 1e-3;

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 50;
/// Largest coordinate move per iteration on the encoded scale.
const MAX_STEP: f64 = 2.0;

pub fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Finite-difference step for coordinate value `theta`.
pub fn diff_step(theta: f64) -> f64 {
    (1e-6 * theta.abs()).max(1e-5)
}

/// Central-difference gradient.
pub fn numerical_gradient(f: &impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = diff_step(x[i]);
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Central-difference Hessian.
pub fn numerical_hessian(f: &impl Fn(&[f64]) -> f64, x: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    let h: Vec<f64> = x.iter().map(|v| 1e-4 * v.abs().max(1.0)).collect();
    let f0 = f(x);
    let mut probe = x.to_vec();
    let mut eval = |moves: &[(usize, f64)]| {
        for &(i, d) in moves {
            probe[i] += d;
        }
        let v = f(&probe);
        for &(i, d) in moves {
            probe[i] -= d;
        }
        v
    };
    let mut hess = DMatrix::zeros(n, n);
    for i in 0..n {
        let up = eval(&[(i, h[i])]);
        let down = eval(&[(i, -h[i])]);
        hess[(i, i)] = (up - 2.0 * f0 + down) / (h[i] * h[i]);
        for j in 0..i {
            let pp = eval(&[(i, h[i]), (j, h[j])]);
            let pm = eval(&[(i, h[i]), (j, -h[j])]);
            let mp = eval(&[(i, -h[i]), (j, h[j])]);
            let mm = eval(&[(i, -h[i]), (j, -h[j])]);
            let v = (pp - pm - mp + mm) / (4.0 * h[i] * h[j]);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    hess
}

fn finite_or_inf(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}

/// Minimizes `f` from `x0`. Non-finite objective values are treated as `+∞`.
pub fn minimize(f: impl Fn(&[f64]) -> f64, x0: &[f64], opts: &BfgsOptions) -> BfgsResult {
    let f = |x: &[f64]| finite_or_inf(f(x));
    let n = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let mut fx = f(x.as_slice());
    if !fx.is_finite() {
        return BfgsResult {
            x: x0.to_vec(),
            f: fx,
            grad: vec![f64::NAN; n],
            iterations: 0,
            termination: Termination::NonFiniteStart,
            converged: false,
        };
    }
    let mut g = DVector::from_vec(numerical_gradient(&f, x.as_slice()));
    let mut h_inv = DMatrix::<f64>::identity(n, n);
    let mut fresh = true;
    let mut small_changes = 0;
    let mut termination = Termination::MaxIterations;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        if sup_norm(g.as_slice()) <= opts.tol_grad {
            termination = Termination::Gradient;
            break;
        }
        iterations += 1;
        let mut dir = -(&h_inv * &g);
        let mut slope = g.dot(&dir);
        if !(slope < 0.0) {
            h_inv = DMatrix::identity(n, n);
            fresh = true;
            dir = -g.clone();
            slope = g.dot(&dir);
        }
        let accepted = loop {
            match line_search(&f, &x, fx, &dir, slope) {
                Some(step) => break Some(step),
                None if !fresh => {
                    h_inv = DMatrix::identity(n, n);
                    fresh = true;
                    dir = -g.clone();
                    slope = g.dot(&dir);
                }
                None => break None,
            }
        };
        let Some((x_new, f_new)) = accepted else {
            termination = Termination::LineSearch;
            break;
        };
        let g_new = DVector::from_vec(numerical_gradient(&f, x_new.as_slice()));
        let s = &x_new - &x;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if fresh {
                h_inv *= sy / y.dot(&y);
                fresh = false;
            }
            let rho = 1.0 / sy;
            let hy = &h_inv * &y;
            let yhy = y.dot(&hy);
            // H ← H − ρ(s (Hy)ᵀ + (Hy) sᵀ) + (ρ² yᵀHy + ρ) s sᵀ
            h_inv -= rho * (&s * hy.transpose() + &hy * s.transpose());
            h_inv += (rho * rho * yhy + rho) * (&s * s.transpose());
        }
        let change = (fx - f_new).abs();
        x = x_new;
        fx = f_new;
        g = g_new;
        if change <= opts.tol_rel_f * fx.abs().max(1.0) {
            small_changes += 1;
            if small_changes >= 2 {
                termination = Termination::FunctionChange;
                break;
            }
        } else {
            small_changes = 0;
        }
    }
    if termination == Termination::MaxIterations && sup_norm(g.as_slice()) <= opts.tol_grad {
        termination = Termination::Gradient;
    }
    let grad_norm = sup_norm(g.as_slice());
    let converged = match termination {
        Termination::Gradient => true,
        Termination::FunctionChange | Termination::LineSearch => grad_norm <= LOOSE_GRAD_TOL,
        Termination::MaxIterations | Termination::NonFiniteStart => false,
    };
    BfgsResult { x: x.as_slice().to_vec(), f: fx, grad: g.as_slice().to_vec(), iterations, termination, converged }
}

fn line_search(
    f: &impl Fn(&[f64]) -> f64,
    x: &DVector<f64>,
    fx: f64,
    dir: &DVector<f64>,
    slope: f64,
) -> Option<(DVector<f64>, f64)> {
    let longest = sup_norm(dir.as_slice());
    let mut t = if longest > MAX_STEP { MAX_STEP / longest } else { 1.0 };
    for _ in 0..MAX_BACKTRACKS {
        let candidate = x + t * dir;
        let fc = f(candidate.as_slice());
        if fc <= fx + ARMIJO_C1 * t * slope {
            return Some((candidate, fc));
        }
        // quadratic interpolation of the step, kept inside [0.1t, 0.5t]
        let next = if fc.is_finite() {
            let denom = 2.0 * (fc - fx - slope * t);
            if denom > 0.0 {
                (-slope * t * t / denom).clamp(0.1 * t, 0.5 * t)
            } else {
                0.5 * t
            }
        } else {
            0.25 * t
        };
        t = next;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    #[test]
    fn minimizes_rosenbrock() {
        let r = minimize(rosenbrock, &[-1.2, 1.0], &BfgsOptions::default());
        assert!(r.converged, "{r:?}");
        assert!((r.x[0] - 1.0).abs() < 1e-4 && (r.x[1] - 1.0).abs() < 1e-4, "{r:?}");
    }

    #[test]
    fn minimizes_quadratic_exactly() {
        let f = |x: &[f64]| (x[0] - 3.0).powi(2) + 2.0 * (x[1] + 1.0).powi(2) + x[0] * x[1];
        let r = minimize(f, &[0.0, 0.0], &BfgsOptions::default());
        assert!(r.converged);
        assert_eq!(r.termination, Termination::Gradient);
        // stationary point of the quadratic
        let det = 2.0 * 4.0 - 1.0;
        let x0 = (6.0 * 4.0 - (-4.0)) / det;
        let x1 = (2.0 * -4.0 - 6.0) / det;
        assert!((r.x[0] - x0).abs() < 1e-6 && (r.x[1] - x1).abs() < 1e-6);
    }

    #[test]
    fn non_finite_region_is_avoided() {
        let f = |x: &[f64]| if x[0] <= 0.0 { f64::NAN } else { x[0] - x[0].ln() };
        let r = minimize(f, &[5.0], &BfgsOptions::default());
        assert!(r.converged && (r.x[0] - 1.0).abs() < 1e-5);
        let r = minimize(f, &[-1.0], &BfgsOptions::default());
        assert!(!r.converged);
        assert_eq!(r.termination, Termination::NonFiniteStart);
    }

    #[test]
    fn hessian_of_quadratic() {
        let f = |x: &[f64]| 3.0 * x[0] * x[0] + x[0] * x[1] + 0.5 * x[1] * x[1];
        let h = numerical_hessian(&f, &[0.3, -2.0]);
        assert!((h[(0, 0)] - 6.0).abs() < 1e-5);
        assert!((h[(0, 1)] - 1.0).abs() < 1e-5);
        assert!((h[(1, 1)] - 1.0).abs() < 1e-5);
    }
}
