//! Convex Hamiltonians on `R^N × R^N`, stored as a convex function of the
//! stacked variable `z = (p, q)`.

use std::sync::{Arc, OnceLock};

use crate::convex::ConvexFn;
use crate::error::{Error, Result};

/// What the discrete actions need from a (possibly regularized) Hamiltonian:
/// values and gradients of `H` and of `H*`, both in stacked coordinates.
pub trait StageHamiltonian: Sync {
    fn n(&self) -> usize;

    /// `H(z)`; writes a (sub)gradient into `grad`.
    fn value_grad(&self, z: &[f64], grad: &mut [f64]) -> Result<f64>;

    /// `H*(y)`; writes a (sub)gradient into `grad`.
    fn conj_value_grad(&self, y: &[f64], grad: &mut [f64]) -> Result<f64>;

    fn value(&self, z: &[f64]) -> Result<f64> {
        let mut g = vec![0.0; z.len()];
        self.value_grad(z, &mut g)
    }

    fn conj_value(&self, y: &[f64]) -> Result<f64> {
        let mut g = vec![0.0; y.len()];
        self.conj_value_grad(y, &mut g)
    }

    /// Writes a subgradient of `H` and reports whether it is unique.
    fn grad_unique(&self, z: &[f64], grad: &mut [f64]) -> Result<bool> {
        self.value_grad(z, grad)?;
        Ok(true)
    }
}

struct Inner {
    n: usize,
    f: ConvexFn,
    conj: OnceLock<std::result::Result<ConvexFn, String>>,
}

#[derive(Clone)]
pub struct Hamiltonian(Arc<Inner>);

impl std::fmt::Debug for Hamiltonian {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Hamiltonian")
            .field("n", &self.0.n)
            .field("f", &self.0.f)
            .finish()
    }
}

impl Hamiltonian {
    /// `f` acts on `(p, q)` stacked, so it must have dimension `2n`.
    pub fn new(n: usize, f: ConvexFn) -> Result<Self> {
        if n == 0 || f.dim() != 2 * n {
            return Err(Error::DimensionMismatch {
                expected: 2 * n,
                got: f.dim(),
            });
        }
        Ok(Self(Arc::new(Inner {
            n,
            f,
            conj: OnceLock::new(),
        })))
    }

    /// `H(p, q) = hp(p) + hq(q)`.
    pub fn separable(hp: ConvexFn, hq: ConvexFn) -> Result<Self> {
        if hp.dim() != hq.dim() {
            return Err(Error::DimensionMismatch {
                expected: hp.dim(),
                got: hq.dim(),
            });
        }
        let n = hp.dim();
        Self::new(n, ConvexFn::separable(vec![hp, hq])?)
    }

    /// `(c/2)(|p|² + |q|²)`.
    pub fn isotropic(n: usize, c: f64) -> Result<Self> {
        Self::new(n, ConvexFn::scaled_square(2 * n, c, &vec![0.0; 2 * n])?)
    }

    pub fn function(&self) -> &ConvexFn {
        &self.0.f
    }

    pub fn n(&self) -> usize {
        self.0.n
    }

    /// Cached conjugate; errors when `H` is not coercive.
    pub fn conjugate(&self) -> Result<&ConvexFn> {
        match self
            .0
            .conj
            .get_or_init(|| self.0.f.conjugate().map_err(|e| e.to_string()))
        {
            Ok(c) => Ok(c),
            Err(msg) => Err(Error::NotCoercive(msg.clone())),
        }
    }

    pub fn has_conjugate(&self) -> bool {
        self.conjugate().is_ok()
    }

    pub fn eval(&self, p: &[f64], q: &[f64]) -> Result<f64> {
        self.0.f.eval(&self.stack(p, q)?)
    }

    /// `(∂₁H, ∂₂H)` at `(p, q)` and whether both are unique.
    pub fn subgradient(&self, p: &[f64], q: &[f64]) -> Result<(Vec<f64>, Vec<f64>, bool)> {
        let s = self.0.f.subgradient(&self.stack(p, q)?)?;
        let n = self.0.n;
        Ok((s.value[..n].to_vec(), s.value[n..].to_vec(), s.is_unique))
    }

    fn stack(&self, p: &[f64], q: &[f64]) -> Result<Vec<f64>> {
        let n = self.0.n;
        for v in [p, q] {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: v.len(),
                });
            }
        }
        Ok([p, q].concat())
    }
}

impl StageHamiltonian for Hamiltonian {
    fn n(&self) -> usize {
        self.0.n
    }

    fn value_grad(&self, z: &[f64], grad: &mut [f64]) -> Result<f64> {
        self.0.f.value_grad(z, grad)
    }

    fn conj_value_grad(&self, y: &[f64], grad: &mut [f64]) -> Result<f64> {
        self.conjugate()?.value_grad(y, grad)
    }

    fn grad_unique(&self, z: &[f64], grad: &mut [f64]) -> Result<bool> {
        self.0.f.grad_into(z, grad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stacked_evaluation() {
        let h = Hamiltonian::isotropic(1, 0.1).unwrap();
        assert!((h.eval(&[1.0], &[2.0]).unwrap() - 0.25).abs() < 1e-15);
        let (a, b, unique) = h.subgradient(&[1.0], &[2.0]).unwrap();
        assert!((a[0] - 0.1).abs() < 1e-15 && (b[0] - 0.2).abs() < 1e-15 && unique);
        assert!((h.conj_value(&[0.1, 0.0]).unwrap() - 0.05).abs() < 1e-15);
    }

    #[test]
    fn non_coercive_conjugate_is_refused() {
        let h = Hamiltonian::separable(ConvexFn::half_square(1), ConvexFn::zero(1)).unwrap();
        assert!(matches!(h.conjugate(), Err(Error::NotCoercive(_))));
        assert!(!h.has_conjugate());
    }

    #[test]
    fn wrong_dimension() {
        assert!(Hamiltonian::new(2, ConvexFn::half_square(3)).is_err());
        let h = Hamiltonian::isotropic(2, 1.0).unwrap();
        assert!(h.eval(&[1.0], &[1.0, 2.0]).is_err());
    }
}
