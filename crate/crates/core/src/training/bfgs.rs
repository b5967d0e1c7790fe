//! Dense BFGS with Armijo backtracking.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct BfgsOptions {
    pub max_iters: usize,
    pub grad_tol: f64,
    /// Armijo sufficient-decrease constant.
    pub c1: f64,
    pub shrink: f64,
    pub max_backtracks: usize,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            max_iters: 500,
            grad_tol: 1e-6,
            c1: 1e-4,
            shrink: 0.5,
            max_backtracks: 60,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BfgsOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad_inf_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value at the start point and after every accepted step.
    pub trace: Vec<f64>,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `f` from `x0`. `f` returns the value and gradient.
///
/// Stops when the gradient infinity norm drops below `grad_tol`, after
/// `max_iters` steps, or when no sufficient decrease can be found even along
/// steepest descent; only the first counts as converged.
pub fn minimize<F>(mut f: F, x0: Vec<f64>, opts: &BfgsOptions) -> Result<BfgsOutcome>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let n = x0.len();
    let mut x = x0;
    let (mut fx, mut g) = f(&x)?;
    if !fx.is_finite() {
        return Err(Error::NonFiniteLoss);
    }
    let mut h = identity(n);
    let mut fresh_h = true;
    let mut trace = vec![fx];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iters {
        if inf_norm(&g) < opts.grad_tol {
            converged = true;
            break;
        }
        let mut step = None;
        for attempt in 0..2 {
            if attempt == 1 {
                if fresh_h {
                    break;
                }
                h = identity(n);
                fresh_h = true;
            }
            let mut p: Vec<f64> = (0..n).map(|i| -dot(&h[i * n..(i + 1) * n], &g)).collect();
            let mut slope = dot(&g, &p);
            if slope >= 0.0 {
                h = identity(n);
                fresh_h = true;
                p = g.iter().map(|v| -v).collect();
                slope = dot(&g, &p);
            }
            if let Some(found) = line_search(&mut f, &x, fx, &p, slope, opts)? {
                step = Some(found);
                break;
            }
        }
        let Some((x_new, f_new, g_new)) = step else {
            break;
        };
        iterations += 1;

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let yy = dot(&y, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * yy.sqrt() && sy > 0.0 {
            if fresh_h {
                let scale = sy / yy;
                h.iter_mut().for_each(|v| *v *= scale);
                fresh_h = false;
            }
            bfgs_update(&mut h, &s, &y, sy);
        }
        x = x_new;
        fx = f_new;
        g = g_new;
        trace.push(fx);
    }
    if !converged && inf_norm(&g) < opts.grad_tol {
        converged = true;
    }
    Ok(BfgsOutcome {
        grad_inf_norm: inf_norm(&g),
        x,
        f: fx,
        iterations,
        converged,
        trace,
    })
}

type Step = (Vec<f64>, f64, Vec<f64>);

fn line_search<F>(f: &mut F, x: &[f64], fx: f64, p: &[f64], slope: f64, opts: &BfgsOptions) -> Result<Option<Step>>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let mut alpha = 1.0;
    for _ in 0..opts.max_backtracks {
        let trial: Vec<f64> = x.iter().zip(p).map(|(a, b)| a + alpha * b).collect();
        match f(&trial) {
            Ok((ft, gt)) if ft.is_finite() && ft <= fx + opts.c1 * alpha * slope && ft < fx => {
                return Ok(Some((trial, ft, gt)));
            }
            Ok(_) | Err(Error::NonFiniteLoss) => {}
            Err(e) => return Err(e),
        }
        alpha *= opts.shrink;
    }
    Ok(None)
}

fn identity(n: usize) -> Vec<f64> {
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        h[i * n + i] = 1.0;
    }
    h
}

/// `H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T`.
fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| dot(&h[i * n..(i + 1) * n], y)).collect();
    let yhy = dot(y, &hy);
    let coef = rho * rho * yhy + rho;
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] += coef * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
            Ok((v, g))
        };
        let out = minimize(f, vec![-1.2, 1.0], &BfgsOptions { max_iters: 1000, ..Default::default() }).unwrap();
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-5 && (out.x[1] - 1.0).abs() < 1e-5);
        assert!(out.trace.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn quadratic_converges_fast() {
        let f = |x: &[f64]| Ok((x[0] * x[0] + 10.0 * x[1] * x[1], vec![2.0 * x[0], 20.0 * x[1]]));
        let out = minimize(f, vec![3.0, -2.0], &BfgsOptions::default()).unwrap();
        assert!(out.converged);
        assert!(out.iterations < 20);
    }

    #[test]
    fn nonsmooth_stops_without_error() {
        let f = |x: &[f64]| Ok((x[0].abs(), vec![if x[0] >= 0.0 { 1.0 } else { -1.0 }]));
        let out = minimize(f, vec![0.3], &BfgsOptions::default()).unwrap();
        assert!(out.f < 0.3);
        assert!(out.trace.windows(2).all(|w| w[1] < w[0]));
    }
}
