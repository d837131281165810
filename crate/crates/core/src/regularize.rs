//! Quadratic ε-perturbation and `(r, s)` inf-convolution of a Hamiltonian.

use crate::convex::{ConvexFn, Kind};
use crate::error::{Error, Result};
use crate::hamiltonian::{Hamiltonian, StageHamiltonian};
use crate::legendre::{self, GridFn};
use crate::minimize;

/// Default inf-convolution exponent.
pub const DEFAULT_R: f64 = 4.0;

/// `H_ε = H + (ε/2)|z|²`.
#[derive(Debug, Clone)]
pub struct EpsPerturbed {
    base: Hamiltonian,
    eps: f64,
    /// Discrete conjugate of `H_ε` when `H` is grid-backed.
    grid_conj: Option<ConvexFn>,
}

pub fn perturb_epsilon(h: &Hamiltonian, eps: f64) -> Result<EpsPerturbed> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "eps must be positive, got {eps}"
        )));
    }
    let grid_conj = match h.function().kind() {
        Kind::GridSampled(g) => {
            let nodes: Vec<Vec<f64>> = (0..g.dim()).map(|a| g.nodes(a)).collect();
            let mut values = g.values().to_vec();
            let counts = g.counts();
            for (k, v) in values.iter_mut().enumerate() {
                let mut idx = k;
                let mut sq = 0.0;
                for axis in (0..g.dim()).rev() {
                    let x = nodes[axis][idx % counts[axis]];
                    idx /= counts[axis];
                    sq += x * x;
                }
                *v += 0.5 * eps * sq;
            }
            let shifted = GridFn::new(g.lo().to_vec(), g.hi().to_vec(), counts.to_vec(), values)?;
            Some(ConvexFn::grid(legendre::discrete_conjugate_auto(&shifted)?))
        }
        _ => None,
    };
    Ok(EpsPerturbed {
        base: h.clone(),
        eps,
        grid_conj,
    })
}

impl EpsPerturbed {
    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn base(&self) -> &Hamiltonian {
        &self.base
    }
}

impl StageHamiltonian for EpsPerturbed {
    fn n(&self) -> usize {
        self.base.n()
    }

    fn value_grad(&self, z: &[f64], grad: &mut [f64]) -> Result<f64> {
        let v = self.base.function().value_grad(z, grad)?;
        let mut sq = 0.0;
        for (g, x) in grad.iter_mut().zip(z) {
            *g += self.eps * x;
            sq += x * x;
        }
        Ok(v + 0.5 * self.eps * sq)
    }

    /// `H_ε*(y) = y·z - H(z) - (ε/2)|z|²` at `z = prox_{H/ε}(y/ε)`, the
    /// maximizer, which is also the gradient.
    fn conj_value_grad(&self, y: &[f64], grad: &mut [f64]) -> Result<f64> {
        if let Some(c) = &self.grid_conj {
            return c.value_grad(y, grad);
        }
        let f = self.base.function();
        let scaled: Vec<f64> = y.iter().map(|v| v / self.eps).collect();
        f.prox_into(&scaled, 1.0 / self.eps, grad)?;
        let mut v = -f.eval(grad)?;
        for (z, yi) in grad.iter().zip(y) {
            v += z * yi - 0.5 * self.eps * z * z;
        }
        Ok(v)
    }
}

/// `H_λ(z) = inf_u H(u) + Σ|z_i - u_i|^s / (s λ^s)` with `s = r/(r-1)`.
#[derive(Debug, Clone)]
pub struct InfConvolved {
    base: Hamiltonian,
    lambda: f64,
    r: f64,
    s: f64,
    split: Option<Vec<ConvexFn>>,
}

pub fn infconv(h: &Hamiltonian, lambda: f64, r: f64) -> Result<InfConvolved> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    if !(r > 2.0) || !r.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "inf-convolution exponent r must exceed 2, got {r}"
        )));
    }
    h.conjugate()?;
    Ok(InfConvolved {
        base: h.clone(),
        lambda,
        r,
        s: r / (r - 1.0),
        split: h.function().coordinate_split(),
    })
}

fn signed_pow(v: f64, e: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v.signum() * v.abs().powf(e)
    }
}

impl InfConvolved {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn base(&self) -> &Hamiltonian {
        &self.base
    }

    fn penalty(&self, d: &[f64]) -> f64 {
        d.iter().map(|v| v.abs().powf(self.s)).sum::<f64>() / (self.s * self.lambda.powf(self.s))
    }

    /// Prox point `u` and gradient `∇H_λ(z)`.
    fn solve(&self, z: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let lam_s = self.lambda.powf(self.s);
        let lam_r = self.lambda.powf(self.r);
        if let Some(parts) = &self.split {
            let mut u = vec![0.0; z.len()];
            let mut y = vec![0.0; z.len()];
            for (i, part) in parts.iter().enumerate() {
                let zi = z[i];
                u[i] = minimize::monotone_root(
                    |v| {
                        part.scalar_deriv(v).unwrap_or(f64::NAN)
                            - signed_pow(zi - v, self.s - 1.0) / lam_s
                    },
                    zi,
                )?;
                y[i] = part.scalar_deriv(u[i])?;
            }
            return Ok((u, y));
        }
        // maximize z·y - H*(y) - (λ^r/r)Σ|y_i|^r over y
        let hc = self.base.conjugate()?;
        let r = self.r;
        let obj = |y: &[f64], g: &mut [f64]| -> Result<f64> {
            let mut v = hc.value_grad(y, g)?;
            for i in 0..y.len() {
                v += lam_r / r * y[i].abs().powf(r) - z[i] * y[i];
                g[i] += lam_r * signed_pow(y[i], r - 1.0) - z[i];
            }
            Ok(v)
        };
        let hess = |y: &[f64]| {
            hc.hessian(y).map(|mut h| {
                for i in 0..y.len() {
                    h[(i, i)] += lam_r * (r - 1.0) * y[i].abs().powf(r - 2.0);
                }
                h
            })
        };
        let mut start = vec![0.0; z.len()];
        self.base.function().grad_into(z, &mut start)?;
        let y = minimize::newton(obj, hess, start, 1e-12, 200)?;
        let u: Vec<f64> = z
            .iter()
            .zip(&y)
            .map(|(zi, yi)| zi - lam_r * signed_pow(*yi, r - 1.0))
            .collect();
        Ok((u, y))
    }

    /// Minimizers `(i(p), j(q))` attaining the infimum.
    pub fn prox_points(&self, p: &[f64], q: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.base.n();
        if p.len() != n || q.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: p.len().max(q.len()),
            });
        }
        let z = [p, q].concat();
        let (u, _) = self.solve(&z)?;
        Ok((u[..n].to_vec(), u[n..].to_vec()))
    }

    /// `H(i, j) + penalty(z - (i, j))`, the right side of the attainment identity.
    pub fn attained_value(&self, p: &[f64], q: &[f64]) -> Result<f64> {
        let (i, j) = self.prox_points(p, q)?;
        let u = [i.as_slice(), j.as_slice()].concat();
        let d: Vec<f64> = [p, q].concat().iter().zip(&u).map(|(a, b)| a - b).collect();
        Ok(self.base.function().eval(&u)? + self.penalty(&d))
    }
}

impl StageHamiltonian for InfConvolved {
    fn n(&self) -> usize {
        self.base.n()
    }

    fn value_grad(&self, z: &[f64], grad: &mut [f64]) -> Result<f64> {
        let (u, y) = self.solve(z)?;
        grad.copy_from_slice(&y);
        let d: Vec<f64> = z.iter().zip(&u).map(|(a, b)| a - b).collect();
        Ok(self.base.function().eval(&u)? + self.penalty(&d))
    }

    fn conj_value_grad(&self, y: &[f64], grad: &mut [f64]) -> Result<f64> {
        let v = self.base.conjugate()?.value_grad(y, grad)?;
        let lam_r = self.lambda.powf(self.r);
        let mut extra = 0.0;
        for (g, yi) in grad.iter_mut().zip(y) {
            extra += yi.abs().powf(self.r);
            *g += lam_r * signed_pow(*yi, self.r - 1.0);
        }
        Ok(v + lam_r / self.r * extra)
    }
}
