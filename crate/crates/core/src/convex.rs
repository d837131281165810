//! Closed convex functions on `R^n` with values, subgradients, conjugates and
//! proximal maps.
//!
//! Every function carries a bounded working box. Closed-form kinds can be
//! evaluated anywhere; grid-backed kinds only inside their sampled box.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::legendre::{self, GridFn};
use crate::minimize;

/// Half-width of the default working box.
pub const DEFAULT_BOX_RADIUS: f64 = 10.0;

/// Axis-aligned box `[lo, hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkingBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl WorkingBox {
    pub fn cube(dim: usize, radius: f64) -> Self {
        Self {
            lo: vec![-radius; dim],
            hi: vec![radius; dim],
        }
    }

    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(Error::InvalidParameter(
                "working box needs lo < hi on every axis".into(),
            ));
        }
        Ok(Self { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (a, b))| *v >= *a && *v <= *b)
    }

    /// True when `x` lies within `rel` (relative to the box width) of a face.
    pub fn touches_boundary(&self, x: &[f64], rel: f64) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .any(|(v, (a, b))| {
                let w = rel * (b - a);
                *v <= a + w || *v >= b - w
            })
    }

    /// Uniform sample inside the box.
    pub fn sample(&self, rng: &mut impl rand::Rng) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| rng.gen_range(*a..=*b))
            .collect()
    }
}

/// A subgradient; `is_unique` is false at kinks.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgradientResult {
    pub value: Vec<f64>,
    pub is_unique: bool,
}

#[derive(Debug, Clone)]
pub enum Kind {
    /// `½ (x - shift)ᵀ A (x - shift) + offset` with `A` symmetric PSD.
    Quadratic {
        matrix: DMatrix<f64>,
        shift: DVector<f64>,
        offset: f64,
    },
    /// `scale · Σ |x_i|^exponent` with `exponent > 1`.
    PowerNorm { exponent: f64, scale: f64 },
    /// `slope · x + offset`.
    Affine { slope: Vec<f64>, offset: f64 },
    /// Blocks acting on consecutive coordinate ranges.
    SeparableSum(Vec<ConvexFn>),
    /// Pointwise sum of functions of the same dimension.
    Sum(Vec<ConvexFn>),
    /// Multilinear interpolation of tabulated values (1-D or 2-D).
    GridSampled(GridFn),
    /// Conjugate of the inner function, evaluated by pointwise maximization.
    Conjugate(Box<ConvexFn>),
}

#[derive(Debug, Clone)]
pub struct ConvexFn {
    dim: usize,
    kind: Kind,
    working_box: WorkingBox,
}

fn dim_check(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() != expected {
        Err(Error::DimensionMismatch {
            expected,
            got: x.len(),
        })
    } else {
        Ok(())
    }
}

impl ConvexFn {
    pub fn quadratic(matrix: DMatrix<f64>, shift: DVector<f64>, offset: f64) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n || shift.len() != n || n == 0 {
            return Err(Error::ShapeMismatch(
                "quadratic needs a square matrix and a matching shift".into(),
            ));
        }
        let asym = (&matrix - matrix.transpose()).abs().max();
        if asym > 1e-12 * (1.0 + matrix.abs().max()) {
            return Err(Error::InvalidParameter(
                "quadratic matrix is not symmetric".into(),
            ));
        }
        let min_eig = matrix.clone().symmetric_eigen().eigenvalues.min();
        if min_eig < -1e-12 * (1.0 + matrix.abs().max()) {
            return Err(Error::InvalidParameter(format!(
                "quadratic matrix is not positive semidefinite (eigenvalue {min_eig:e})"
            )));
        }
        Ok(Self {
            dim: n,
            kind: Kind::Quadratic {
                matrix,
                shift,
                offset,
            },
            working_box: WorkingBox::cube(n, DEFAULT_BOX_RADIUS),
        })
    }

    /// `(c/2)|x - shift|²`.
    pub fn scaled_square(dim: usize, c: f64, shift: &[f64]) -> Result<Self> {
        if shift.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: shift.len(),
            });
        }
        Self::quadratic(
            DMatrix::identity(dim, dim) * c,
            DVector::from_column_slice(shift),
            0.0,
        )
    }

    /// `½|x|²`.
    pub fn half_square(dim: usize) -> Self {
        Self::scaled_square(dim, 1.0, &vec![0.0; dim]).expect("identity is PSD")
    }

    pub fn power_norm(dim: usize, exponent: f64, scale: f64) -> Result<Self> {
        if !(exponent > 1.0) || !exponent.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "power exponent must exceed 1, got {exponent}"
            )));
        }
        if !(scale > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "power scale must be positive, got {scale}"
            )));
        }
        Ok(Self {
            dim,
            kind: Kind::PowerNorm { exponent, scale },
            working_box: WorkingBox::cube(dim, DEFAULT_BOX_RADIUS),
        })
    }

    pub fn affine(slope: Vec<f64>, offset: f64) -> Self {
        let dim = slope.len();
        Self {
            dim,
            kind: Kind::Affine { slope, offset },
            working_box: WorkingBox::cube(dim, DEFAULT_BOX_RADIUS),
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self::affine(vec![0.0; dim], 0.0)
    }

    pub fn separable(blocks: Vec<ConvexFn>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidParameter(
                "separable sum needs a block".into(),
            ));
        }
        let dim = blocks.iter().map(|b| b.dim).sum();
        let mut lo = Vec::with_capacity(dim);
        let mut hi = Vec::with_capacity(dim);
        for b in &blocks {
            lo.extend_from_slice(&b.working_box.lo);
            hi.extend_from_slice(&b.working_box.hi);
        }
        Ok(Self {
            dim,
            kind: Kind::SeparableSum(blocks),
            working_box: WorkingBox { lo, hi },
        })
    }

    pub fn sum(terms: Vec<ConvexFn>) -> Result<Self> {
        let first = terms
            .first()
            .ok_or_else(|| Error::InvalidParameter("sum needs a term".into()))?;
        let dim = first.dim;
        if let Some(bad) = terms.iter().find(|t| t.dim != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: bad.dim,
            });
        }
        // intersection of the member boxes
        let mut working_box = first.working_box.clone();
        for t in &terms[1..] {
            for i in 0..dim {
                working_box.lo[i] = working_box.lo[i].max(t.working_box.lo[i]);
                working_box.hi[i] = working_box.hi[i].min(t.working_box.hi[i]);
            }
        }
        if terms.len() == 1 {
            return Ok(terms.into_iter().next().unwrap());
        }
        Ok(Self {
            dim,
            kind: Kind::Sum(terms),
            working_box,
        })
    }

    pub fn grid(grid: GridFn) -> Self {
        let working_box = WorkingBox {
            lo: grid.lo().to_vec(),
            hi: grid.hi().to_vec(),
        };
        Self {
            dim: grid.dim(),
            kind: Kind::GridSampled(grid),
            working_box,
        }
    }

    /// Replaces the working box. Grid-backed functions keep their sampled box.
    pub fn with_box(mut self, working_box: WorkingBox) -> Result<Self> {
        if working_box.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: working_box.dim(),
            });
        }
        if !matches!(self.kind, Kind::GridSampled(_)) {
            self.working_box = working_box;
        }
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &Kind {
        &self.kind
    }

    pub fn working_box(&self) -> &WorkingBox {
        &self.working_box
    }

    /// Whether the function grows superlinearly, i.e. has a conjugate that is
    /// finite everywhere.
    pub fn is_coercive(&self) -> bool {
        match &self.kind {
            Kind::Quadratic { matrix, .. } => {
                let eig = matrix.clone().symmetric_eigen().eigenvalues;
                eig.min() > 1e-12 * eig.max().max(1e-300)
            }
            Kind::PowerNorm { .. } => true,
            Kind::Affine { .. } => false,
            Kind::SeparableSum(blocks) => blocks.iter().all(ConvexFn::is_coercive),
            Kind::Sum(terms) => terms.iter().any(ConvexFn::is_coercive),
            Kind::GridSampled(_) => true,
            Kind::Conjugate(inner) => !matches!(inner.kind, Kind::GridSampled(_)),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        dim_check(self.dim, x)?;
        self.value(x)
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(match &self.kind {
            Kind::Quadratic {
                matrix,
                shift,
                offset,
            } => {
                let n = self.dim;
                let mut acc = 0.0;
                for i in 0..n {
                    let di = x[i] - shift[i];
                    let mut row = 0.0;
                    for j in 0..n {
                        row += matrix[(i, j)] * (x[j] - shift[j]);
                    }
                    acc += di * row;
                }
                0.5 * acc + offset
            }
            Kind::PowerNorm { exponent, scale } => {
                scale * x.iter().map(|v| v.abs().powf(*exponent)).sum::<f64>()
            }
            Kind::Affine { slope, offset } => {
                slope.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + offset
            }
            Kind::SeparableSum(blocks) => {
                let mut at = 0;
                let mut acc = 0.0;
                for b in blocks {
                    acc += b.value(&x[at..at + b.dim])?;
                    at += b.dim;
                }
                acc
            }
            Kind::Sum(terms) => {
                let mut acc = 0.0;
                for t in terms {
                    acc += t.value(x)?;
                }
                acc
            }
            Kind::GridSampled(g) => g.interpolate(x)?,
            Kind::Conjugate(inner) => conjugate_point(inner, x)?.0,
        })
    }

    /// Minimal-norm subgradient; `is_unique` is false at kinks.
    pub fn subgradient(&self, x: &[f64]) -> Result<SubgradientResult> {
        dim_check(self.dim, x)?;
        let mut value = vec![0.0; self.dim];
        let is_unique = self.grad_into(x, &mut value)?;
        Ok(SubgradientResult { value, is_unique })
    }

    /// Writes a subgradient into `out` (overwriting it); returns uniqueness.
    pub(crate) fn grad_into(&self, x: &[f64], out: &mut [f64]) -> Result<bool> {
        match &self.kind {
            Kind::Quadratic { matrix, shift, .. } => {
                let n = self.dim;
                for i in 0..n {
                    let mut row = 0.0;
                    for j in 0..n {
                        row += matrix[(i, j)] * (x[j] - shift[j]);
                    }
                    out[i] = row;
                }
                Ok(true)
            }
            Kind::PowerNorm { exponent, scale } => {
                for (o, v) in out.iter_mut().zip(x) {
                    *o = scale * exponent * v.signum() * v.abs().powf(exponent - 1.0);
                    if *v == 0.0 {
                        *o = 0.0;
                    }
                }
                Ok(true)
            }
            Kind::Affine { slope, .. } => {
                out.copy_from_slice(slope);
                Ok(true)
            }
            Kind::SeparableSum(blocks) => {
                let mut at = 0;
                let mut unique = true;
                for b in blocks {
                    unique &= b.grad_into(&x[at..at + b.dim], &mut out[at..at + b.dim])?;
                    at += b.dim;
                }
                Ok(unique)
            }
            Kind::Sum(terms) => {
                out.iter_mut().for_each(|o| *o = 0.0);
                let mut tmp = vec![0.0; self.dim];
                let mut unique = true;
                for t in terms {
                    unique &= t.grad_into(x, &mut tmp)?;
                    for (o, v) in out.iter_mut().zip(&tmp) {
                        *o += v;
                    }
                }
                Ok(unique)
            }
            Kind::GridSampled(g) => {
                let mut unique = true;
                for axis in 0..g.dim() {
                    let (left, right) = grid_axis_slopes(g, x, axis)?;
                    let tol = 1e-9 * (1.0 + left.abs().max(right.abs()));
                    if right - left > tol {
                        unique = false;
                    }
                    out[axis] = 0.0f64.clamp(left.min(right), right.max(left));
                }
                Ok(unique)
            }
            Kind::Conjugate(inner) => {
                let (_, arg) = conjugate_point(inner, x)?;
                out.copy_from_slice(&arg);
                Ok(true)
            }
        }
    }

    /// Value and a subgradient in one pass; avoids solving twice for
    /// numerically conjugated kinds.
    pub(crate) fn value_grad(&self, x: &[f64], out: &mut [f64]) -> Result<f64> {
        match &self.kind {
            Kind::Conjugate(inner) => {
                let (v, arg) = conjugate_point(inner, x)?;
                out.copy_from_slice(&arg);
                Ok(v)
            }
            _ => {
                self.grad_into(x, out)?;
                self.value(x)
            }
        }
    }

    /// Hessian where the function is twice differentiable with finite curvature.
    pub fn hessian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        match &self.kind {
            Kind::Quadratic { matrix, .. } => Some(matrix.clone()),
            Kind::PowerNorm { exponent, scale } => {
                let mut h = DMatrix::zeros(self.dim, self.dim);
                for (i, v) in x.iter().enumerate() {
                    if *exponent < 2.0 && v.abs() < 1e-300 {
                        return None;
                    }
                    h[(i, i)] = scale * exponent * (exponent - 1.0) * v.abs().powf(exponent - 2.0);
                }
                Some(h)
            }
            Kind::Affine { .. } => Some(DMatrix::zeros(self.dim, self.dim)),
            Kind::SeparableSum(blocks) => {
                let mut h = DMatrix::zeros(self.dim, self.dim);
                let mut at = 0;
                for b in blocks {
                    let hb = b.hessian(&x[at..at + b.dim])?;
                    h.view_mut((at, at), (b.dim, b.dim)).copy_from(&hb);
                    at += b.dim;
                }
                Some(h)
            }
            Kind::Sum(terms) => {
                let mut h = DMatrix::zeros(self.dim, self.dim);
                for t in terms {
                    h += t.hessian(x)?;
                }
                Some(h)
            }
            Kind::GridSampled(_) => None,
            Kind::Conjugate(inner) => {
                let (_, arg) = conjugate_point(inner, x).ok()?;
                inner.hessian(&arg)?.try_inverse()
            }
        }
    }

    /// Legendre-Fenchel conjugate. Closed forms where available; sums are
    /// conjugated pointwise by numerical maximization and grid functions by the
    /// discrete transform.
    pub fn conjugate(&self) -> Result<ConvexFn> {
        let conj = match &self.kind {
            Kind::Quadratic {
                matrix,
                shift,
                offset,
            } => {
                if !self.is_coercive() {
                    return Err(Error::NotCoercive(
                        "quadratic with a singular matrix".into(),
                    ));
                }
                let inv = matrix
                    .clone()
                    .cholesky()
                    .ok_or_else(|| Error::NotCoercive("quadratic matrix is singular".into()))?
                    .inverse();
                let inv = (&inv + inv.transpose()) * 0.5;
                let a_shift = matrix * shift;
                let new_offset = -offset - 0.5 * shift.dot(&a_shift);
                ConvexFn {
                    dim: self.dim,
                    kind: Kind::Quadratic {
                        matrix: inv,
                        shift: -a_shift,
                        offset: new_offset,
                    },
                    working_box: self.slope_box(),
                }
            }
            Kind::PowerNorm { exponent, scale } => {
                let s = exponent / (exponent - 1.0);
                let dual_scale = (scale * exponent).powf(-(s - 1.0)) / s;
                ConvexFn {
                    dim: self.dim,
                    kind: Kind::PowerNorm {
                        exponent: s,
                        scale: dual_scale,
                    },
                    working_box: self.slope_box(),
                }
            }
            Kind::Affine { .. } => {
                return Err(Error::NotCoercive(
                    "affine functions conjugate to indicators".into(),
                ))
            }
            Kind::SeparableSum(blocks) => {
                let conj: Result<Vec<_>> = blocks.iter().map(ConvexFn::conjugate).collect();
                ConvexFn::separable(conj?)?
            }
            Kind::Sum(_) => {
                if !self.is_coercive() {
                    return Err(Error::NotCoercive("sum without a coercive term".into()));
                }
                ConvexFn {
                    dim: self.dim,
                    kind: Kind::Conjugate(Box::new(self.clone())),
                    working_box: self.slope_box(),
                }
            }
            Kind::GridSampled(g) => ConvexFn::grid(legendre::discrete_conjugate_auto(g)?),
            Kind::Conjugate(inner) => inner.as_ref().clone(),
        };
        Ok(conj)
    }

    /// Discrete conjugate of this function sampled on its working box
    /// (dimension 1 or 2).
    pub fn conjugate_on_grid(
        &self,
        counts: &[usize],
        dual_lo: &[f64],
        dual_hi: &[f64],
        dual_counts: &[usize],
    ) -> Result<ConvexFn> {
        let sampled = GridFn::sample(
            |x| self.value(x).unwrap_or(f64::NAN),
            &self.working_box.lo,
            &self.working_box.hi,
            counts,
        )?;
        Ok(ConvexFn::grid(legendre::discrete_conjugate(
            &sampled,
            dual_lo,
            dual_hi,
            dual_counts,
        )?))
    }

    /// Box of subgradient magnitudes reached on the working box; used as the
    /// working box of closed-form conjugates.
    fn slope_box(&self) -> WorkingBox {
        let mut radius: f64 = 1.0;
        let mut g = vec![0.0; self.dim];
        let mut probe = |x: &[f64]| {
            if self.grad_into(x, &mut g).is_ok() {
                radius = radius.max(g.iter().fold(0.0f64, |m, v| m.max(v.abs())));
            }
        };
        probe(&self.working_box.lo);
        probe(&self.working_box.hi);
        for i in 0..self.dim {
            for corner in [&self.working_box.lo, &self.working_box.hi] {
                let mut x = vec![0.0; self.dim];
                x[i] = corner[i];
                probe(&x);
            }
        }
        WorkingBox::cube(self.dim, radius)
    }

    /// `argmin_u f(u) + |u - x|² / (2 step)`.
    pub fn prox(&self, x: &[f64], step: f64) -> Result<Vec<f64>> {
        dim_check(self.dim, x)?;
        if !(step > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "prox step must be positive, got {step}"
            )));
        }
        let mut out = vec![0.0; self.dim];
        self.prox_into(x, step, &mut out)?;
        Ok(out)
    }

    pub(crate) fn prox_into(&self, x: &[f64], step: f64, out: &mut [f64]) -> Result<()> {
        match &self.kind {
            Kind::Quadratic { matrix, shift, .. } => {
                let n = self.dim;
                let mut lhs = matrix.clone();
                for i in 0..n {
                    lhs[(i, i)] += 1.0 / step;
                }
                let rhs = matrix * shift + DVector::from_column_slice(x) / step;
                let u = lhs
                    .cholesky()
                    .ok_or(Error::NoConvergence {
                        iters: 0,
                        residual: f64::NAN,
                    })?
                    .solve(&rhs);
                out.copy_from_slice(u.as_slice());
            }
            Kind::Affine { slope, .. } => {
                for i in 0..self.dim {
                    out[i] = x[i] - step * slope[i];
                }
            }
            Kind::PowerNorm { exponent, scale } => {
                let k = step * scale * exponent;
                for (o, xi) in out.iter_mut().zip(x) {
                    // u + k sign(u)|u|^(r-1) = x has its root between 0 and x
                    *o = minimize::monotone_root(
                        |u| u + k * u.signum() * u.abs().powf(exponent - 1.0) - xi,
                        *xi,
                    )?;
                }
            }
            Kind::SeparableSum(blocks) => {
                let mut at = 0;
                for b in blocks {
                    b.prox_into(&x[at..at + b.dim], step, &mut out[at..at + b.dim])?;
                    at += b.dim;
                }
            }
            _ => {
                if let Some(parts) = self.coordinate_split() {
                    for (i, part) in parts.iter().enumerate() {
                        out[i] = minimize::monotone_root(
                            |u| part.scalar_deriv(u).unwrap_or(f64::NAN) + (u - x[i]) / step,
                            x[i],
                        )?;
                    }
                } else {
                    let obj = |u: &[f64], g: &mut [f64]| -> Result<f64> {
                        self.grad_into(u, g)?;
                        let mut v = self.value(u)?;
                        for i in 0..u.len() {
                            g[i] += (u[i] - x[i]) / step;
                            v += (u[i] - x[i]).powi(2) / (2.0 * step);
                        }
                        Ok(v)
                    };
                    let hess = |u: &[f64]| {
                        self.hessian(u).map(|mut h| {
                            for i in 0..u.len() {
                                h[(i, i)] += 1.0 / step;
                            }
                            h
                        })
                    };
                    let u = minimize::newton(obj, hess, x.to_vec(), 1e-12, 200)?;
                    out.copy_from_slice(&u);
                }
            }
        }
        Ok(())
    }

    /// Per-coordinate 1-D pieces when the function is a sum of functions of
    /// single coordinates.
    pub fn coordinate_split(&self) -> Option<Vec<ConvexFn>> {
        if self.dim == 1 {
            return Some(vec![self.clone()]);
        }
        let one = |kind: Kind| ConvexFn {
            dim: 1,
            kind,
            working_box: WorkingBox::cube(1, DEFAULT_BOX_RADIUS),
        };
        let mut parts = match &self.kind {
            Kind::Quadratic {
                matrix,
                shift,
                offset,
            } => {
                for i in 0..self.dim {
                    for j in 0..self.dim {
                        if i != j && matrix[(i, j)] != 0.0 {
                            return None;
                        }
                    }
                }
                (0..self.dim)
                    .map(|i| {
                        one(Kind::Quadratic {
                            matrix: DMatrix::from_element(1, 1, matrix[(i, i)]),
                            shift: DVector::from_element(1, shift[i]),
                            offset: if i == 0 { *offset } else { 0.0 },
                        })
                    })
                    .collect::<Vec<_>>()
            }
            Kind::PowerNorm { exponent, scale } => (0..self.dim)
                .map(|_| {
                    one(Kind::PowerNorm {
                        exponent: *exponent,
                        scale: *scale,
                    })
                })
                .collect(),
            Kind::Affine { slope, offset } => slope
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    one(Kind::Affine {
                        slope: vec![*a],
                        offset: if i == 0 { *offset } else { 0.0 },
                    })
                })
                .collect(),
            Kind::SeparableSum(blocks) => {
                let mut parts = Vec::with_capacity(self.dim);
                for b in blocks {
                    parts.extend(b.coordinate_split()?);
                }
                parts
            }
            Kind::Sum(terms) => {
                let mut per_coord: Vec<Vec<ConvexFn>> = vec![Vec::new(); self.dim];
                for t in terms {
                    for (i, p) in t.coordinate_split()?.into_iter().enumerate() {
                        per_coord[i].push(p);
                    }
                }
                per_coord
                    .into_iter()
                    .map(|ts| ConvexFn::sum(ts).expect("same dimension"))
                    .collect()
            }
            Kind::GridSampled(_) => return None,
            Kind::Conjugate(inner) => inner
                .coordinate_split()?
                .into_iter()
                .map(|p| one(Kind::Conjugate(Box::new(p))))
                .collect(),
        };
        for (i, p) in parts.iter_mut().enumerate() {
            if !matches!(p.kind, Kind::GridSampled(_)) {
                p.working_box = WorkingBox {
                    lo: vec![self.working_box.lo[i]],
                    hi: vec![self.working_box.hi[i]],
                };
            }
        }
        Some(parts)
    }

    /// Minimal-norm subgradient of a 1-D function.
    pub(crate) fn scalar_deriv(&self, u: f64) -> Result<f64> {
        Ok(match &self.kind {
            Kind::Quadratic { matrix, shift, .. } => matrix[(0, 0)] * (u - shift[0]),
            Kind::PowerNorm { exponent, scale } => {
                if u == 0.0 {
                    0.0
                } else {
                    scale * exponent * u.signum() * u.abs().powf(exponent - 1.0)
                }
            }
            Kind::Affine { slope, .. } => slope[0],
            Kind::Sum(terms) => {
                let mut acc = 0.0;
                for t in terms {
                    acc += t.scalar_deriv(u)?;
                }
                acc
            }
            _ => {
                let mut g = [0.0];
                self.grad_into(&[u], &mut g)?;
                g[0]
            }
        })
    }
}

/// One-sided slopes of a grid function along `axis` at `x`.
fn grid_axis_slopes(g: &GridFn, x: &[f64], axis: usize) -> Result<(f64, f64)> {
    if g.dim() == 1 {
        return g.hull_subdifferential(x[0]);
    }
    let h = g.spacing(axis);
    let lo = g.lo()[axis];
    let hi = g.hi()[axis];
    let at = |v: f64| -> Result<f64> {
        let mut p = x.to_vec();
        p[axis] = v;
        g.interpolate(&p)
    };
    let u = (x[axis] - lo) / h;
    let on_node = (u - u.round()).abs() < 1e-9;
    let fx = at(x[axis])?;
    if on_node {
        let node = lo + u.round() * h;
        let left = if node - h >= lo - 1e-12 * h {
            (fx - at(node - h)?) / h
        } else {
            (at(node + h)? - fx) / h
        };
        let right = if node + h <= hi + 1e-12 * h {
            (at(node + h)? - fx) / h
        } else {
            left
        };
        Ok((left, right))
    } else {
        let c = u.floor();
        let a = lo + c * h;
        let s = (at((a + h).min(hi))? - at(a)?) / h;
        Ok((s, s))
    }
}

/// Value and maximizer of `sup_x (x·y - f(x))` for a coercive `f`.
pub(crate) fn conjugate_point(f: &ConvexFn, y: &[f64]) -> Result<(f64, Vec<f64>)> {
    let n = f.dim;
    dim_check(n, y)?;
    let arg = if let Some(parts) = f.coordinate_split() {
        let mut arg = vec![0.0; n];
        for (i, part) in parts.iter().enumerate() {
            arg[i] =
                minimize::monotone_root(|u| part.scalar_deriv(u).unwrap_or(f64::NAN) - y[i], 0.0)?;
        }
        arg
    } else {
        let obj = |x: &[f64], g: &mut [f64]| -> Result<f64> {
            f.grad_into(x, g)?;
            let mut v = f.value(x)?;
            for i in 0..n {
                g[i] -= y[i];
                v -= x[i] * y[i];
            }
            Ok(v)
        };
        minimize::newton(obj, |x| f.hessian(x), vec![0.0; n], 1e-12, 200)?
    };
    let value = arg.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() - f.value(&arg)?;
    Ok((value, arg))
}
