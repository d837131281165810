//! Unconstrained smooth minimization: limited-memory BFGS with Armijo
//! backtracking, damped Newton for small dense problems, and a bracketing
//! root finder for monotone scalar maps.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iters: usize,
    /// Stop when `|grad|_inf <= grad_tol`.
    pub grad_tol: f64,
    /// Stop when the objective falls to or below this value.
    pub target: f64,
    pub armijo: f64,
    pub max_halvings: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iters: 5000,
            grad_tol: 1e-12,
            target: f64::NEG_INFINITY,
            armijo: 1e-4,
            max_halvings: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    GradientTolerance,
    TargetReached,
    IterationCap,
    LineSearchFailed,
    NoProgress,
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iters: usize,
    pub grad_norm: f64,
    pub termination: Termination,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Minimizes `objective`, which returns the value and writes the gradient.
///
/// Errors from the objective abort the run.
pub fn lbfgs<F>(mut objective: F, x0: Vec<f64>, opts: &LbfgsOptions) -> Result<Minimum>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<f64>,
{
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut f = objective(&x, &mut g)?;
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut dir = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut alpha = vec![0.0; opts.memory];
    let mut stalls = 0;

    for iter in 0..opts.max_iters {
        let gnorm = inf_norm(&g);
        if f <= opts.target {
            return Ok(done(x, f, iter, gnorm, Termination::TargetReached));
        }
        if gnorm <= opts.grad_tol {
            return Ok(done(x, f, iter, gnorm, Termination::GradientTolerance));
        }

        // two-loop recursion
        dir.copy_from_slice(&g);
        for (i, (s, y, rho)) in history.iter().enumerate().rev() {
            alpha[i] = rho * dot(s, &dir);
            for (d, yk) in dir.iter_mut().zip(y) {
                *d -= alpha[i] * yk;
            }
        }
        if let Some((s, y, _)) = history.back() {
            let gamma = dot(s, y) / dot(y, y);
            dir.iter_mut().for_each(|d| *d *= gamma);
        } else {
            // first step: unit-length move along the gradient
            let scale = 1.0 / gnorm.max(1.0);
            dir.iter_mut().for_each(|d| *d *= scale);
        }
        for (i, (s, y, rho)) in history.iter().enumerate() {
            let beta = rho * dot(y, &dir);
            for (d, sk) in dir.iter_mut().zip(s) {
                *d += (alpha[i] - beta) * sk;
            }
        }
        dir.iter_mut().for_each(|d| *d = -*d);
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            // not a descent direction: restart from steepest descent
            history.clear();
            for (d, gk) in dir.iter_mut().zip(&g) {
                *d = -gk / gnorm.max(1.0);
            }
            slope = dot(&g, &dir);
        }

        let mut step = 1.0;
        let mut accepted = false;
        let mut f_new = f;
        for _ in 0..=opts.max_halvings {
            for i in 0..n {
                x_new[i] = x[i] + step * dir[i];
            }
            f_new = objective(&x_new, &mut g_new)?;
            if f_new.is_finite() && f_new <= f + opts.armijo * step * slope {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            if history.is_empty() {
                return Ok(done(x, f, iter, gnorm, Termination::LineSearchFailed));
            }
            history.clear();
            continue;
        }

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-300 {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        if f - f_new <= 1e-16 * f.abs().max(1e-300) {
            stalls += 1;
        } else {
            stalls = 0;
        }
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        f = f_new;
        if stalls >= 20 {
            let gnorm = inf_norm(&g);
            return Ok(done(x, f, iter + 1, gnorm, Termination::NoProgress));
        }
    }
    let gnorm = inf_norm(&g);
    Ok(done(x, f, opts.max_iters, gnorm, Termination::IterationCap))
}

fn done(
    x: Vec<f64>,
    value: f64,
    iters: usize,
    grad_norm: f64,
    termination: Termination,
) -> Minimum {
    Minimum {
        x,
        value,
        iters,
        grad_norm,
        termination,
    }
}

/// Damped Newton for a smooth strictly convex objective of small dimension.
///
/// `objective` returns the value and writes the gradient; `hessian` may return
/// `None`, in which case the step falls back to the gradient direction.
/// Converges when `|grad|_inf <= tol`.
pub fn newton<F, H>(
    mut objective: F,
    hessian: H,
    x0: Vec<f64>,
    tol: f64,
    max_iters: usize,
) -> Result<Vec<f64>>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<f64>,
    H: Fn(&[f64]) -> Option<DMatrix<f64>>,
{
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut f = objective(&x, &mut g)?;
    let mut trial = vec![0.0; n];
    let mut g_trial = vec![0.0; n];
    for _ in 0..max_iters {
        let gnorm = inf_norm(&g);
        if gnorm <= tol {
            return Ok(x);
        }
        let mut dir: Vec<f64> = match hessian(&x).and_then(|h| h.cholesky()) {
            Some(chol) => {
                let rhs = DVector::from_column_slice(&g);
                (-chol.solve(&rhs)).iter().copied().collect()
            }
            None => g.iter().map(|v| -v).collect(),
        };
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            dir = g.iter().map(|v| -v).collect();
            slope = dot(&g, &dir);
        }
        let mut step = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            for i in 0..n {
                trial[i] = x[i] + step * dir[i];
            }
            let ft = objective(&trial, &mut g_trial)?;
            if ft.is_finite() && ft <= f + 1e-4 * step * slope {
                moved = true;
                f = ft;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            // at the floating point floor the gradient is as small as it gets
            return if gnorm <= tol.max(1e-8) {
                Ok(x)
            } else {
                Err(Error::NoConvergence {
                    iters: max_iters,
                    residual: gnorm,
                })
            };
        }
        std::mem::swap(&mut x, &mut trial);
        std::mem::swap(&mut g, &mut g_trial);
    }
    let gnorm = inf_norm(&g);
    if gnorm <= tol.max(1e-8) {
        Ok(x)
    } else {
        Err(Error::NoConvergence {
            iters: max_iters,
            residual: gnorm,
        })
    }
}

/// Zero crossing of a nondecreasing map `d` (e.g. a subgradient selection of a
/// convex function): returns `u` with `d(u - 0) <= 0 <= d(u + 0)` up to the
/// floating point resolution.
pub fn monotone_root(d: impl Fn(f64) -> f64, guess: f64) -> Result<f64> {
    let d0 = d(guess);
    if d0 == 0.0 {
        return Ok(guess);
    }
    let mut width = 1.0f64.max(guess.abs() * 1e-3);
    let (mut lo, mut hi);
    if d0 > 0.0 {
        hi = guess;
        lo = guess - width;
        let mut tries = 0;
        while d(lo) > 0.0 {
            hi = lo;
            width *= 2.0;
            lo = guess - width;
            tries += 1;
            if tries > 1100 {
                return Err(Error::NoConvergence {
                    iters: tries,
                    residual: d(lo),
                });
            }
        }
    } else {
        lo = guess;
        hi = guess + width;
        let mut tries = 0;
        while d(hi) < 0.0 {
            lo = hi;
            width *= 2.0;
            hi = guess + width;
            tries += 1;
            if tries > 1100 {
                return Err(Error::NoConvergence {
                    iters: tries,
                    residual: d(hi),
                });
            }
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = d(mid);
        if v == 0.0 {
            return Ok(mid);
        }
        if v > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    // pick the endpoint with the smaller residual
    Ok(if d(lo).abs() <= d(hi).abs() { lo } else { hi })
}
