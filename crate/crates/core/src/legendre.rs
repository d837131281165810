//! Discrete Legendre-Fenchel transform on uniform 1-D and 2-D grids.
//!
//! The 1-D transform builds the lower convex hull of the samples and then
//! sweeps the (sorted) dual nodes against the hull slopes, so a transform
//! costs `O(n + m)`. The 2-D transform is two tensorized 1-D passes:
//!
//! ```text
//! g(y1, y2) = max_x1 [ x1*y1 + max_x2 ( x2*y2 - f(x1, x2) ) ]
//! ```
//!
//! Both passes compute the exact maximum over grid nodes, because the maximum
//! of `x*y - f(x)` over a finite point set is always attained at a vertex of
//! the lower hull of that set.

use std::path::Path;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Tabulated function values on a uniform grid over a box in `R^d`, `d` in {1, 2}.
///
/// Values are stored row-major: for `d = 2` the second axis varies fastest.
#[derive(Debug, Clone)]
pub struct GridFn {
    lo: Vec<f64>,
    hi: Vec<f64>,
    counts: Vec<usize>,
    values: Vec<f64>,
    hull: OnceLock<Vec<usize>>,
}

impl GridFn {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, counts: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let d = counts.len();
        if d == 0 || d > 2 {
            return Err(Error::InvalidParameter(format!(
                "grid functions support 1 or 2 axes, got {d}"
            )));
        }
        if lo.len() != d || hi.len() != d {
            return Err(Error::ShapeMismatch(
                "grid box corners must match the number of axes".into(),
            ));
        }
        for axis in 0..d {
            if counts[axis] < 3 {
                return Err(Error::InvalidParameter(format!(
                    "grid axis {axis} needs at least 3 samples, got {}",
                    counts[axis]
                )));
            }
            if !(lo[axis] < hi[axis]) || !lo[axis].is_finite() || !hi[axis].is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "grid axis {axis} has an empty or non-finite range"
                )));
            }
        }
        let total: usize = counts.iter().product();
        if values.len() != total {
            return Err(Error::ShapeMismatch(format!(
                "expected {total} grid values, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "grid value #{i} is not finite"
            )));
        }
        Ok(Self {
            lo,
            hi,
            counts,
            values,
            hull: OnceLock::new(),
        })
    }

    /// Tabulates `f` on the uniform grid.
    pub fn sample(
        f: impl Fn(&[f64]) -> f64,
        lo: &[f64],
        hi: &[f64],
        counts: &[usize],
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(counts.iter().product());
        match counts.len() {
            1 => {
                let h = (hi[0] - lo[0]) / (counts[0] - 1) as f64;
                for i in 0..counts[0] {
                    values.push(f(&[lo[0] + i as f64 * h]));
                }
            }
            2 => {
                let h0 = (hi[0] - lo[0]) / (counts[0] - 1) as f64;
                let h1 = (hi[1] - lo[1]) / (counts[1] - 1) as f64;
                for i in 0..counts[0] {
                    for j in 0..counts[1] {
                        values.push(f(&[lo[0] + i as f64 * h0, lo[1] + j as f64 * h1]));
                    }
                }
            }
            _ => {}
        }
        Self::new(lo.to_vec(), hi.to_vec(), counts.to_vec(), values)
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / (self.counts[axis] - 1) as f64
    }

    pub fn node(&self, axis: usize, i: usize) -> f64 {
        if i + 1 == self.counts[axis] {
            self.hi[axis]
        } else {
            self.lo[axis] + i as f64 * self.spacing(axis)
        }
    }

    pub fn nodes(&self, axis: usize) -> Vec<f64> {
        (0..self.counts[axis]).map(|i| self.node(axis, i)).collect()
    }

    /// Multilinear interpolation of the samples.
    pub fn interpolate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let mut cell = [0usize; 2];
        let mut frac = [0.0f64; 2];
        for axis in 0..self.dim() {
            let (c, t) = self
                .locate(axis, x[axis])
                .ok_or_else(|| Error::OutsideGrid { point: x.to_vec() })?;
            cell[axis] = c;
            frac[axis] = t;
        }
        Ok(match self.dim() {
            1 => {
                let (i, t) = (cell[0], frac[0]);
                (1.0 - t) * self.values[i] + t * self.values[i + 1]
            }
            _ => {
                let (i, j) = (cell[0], cell[1]);
                let (s, t) = (frac[0], frac[1]);
                let n1 = self.counts[1];
                let v00 = self.values[i * n1 + j];
                let v01 = self.values[i * n1 + j + 1];
                let v10 = self.values[(i + 1) * n1 + j];
                let v11 = self.values[(i + 1) * n1 + j + 1];
                (1.0 - s) * ((1.0 - t) * v00 + t * v01) + s * ((1.0 - t) * v10 + t * v11)
            }
        })
    }

    /// Cell index and local coordinate in [0, 1] for `x` along `axis`.
    fn locate(&self, axis: usize, x: f64) -> Option<(usize, f64)> {
        let h = self.spacing(axis);
        let slack = 1e-12 * (self.hi[axis] - self.lo[axis]);
        if !(x >= self.lo[axis] - slack && x <= self.hi[axis] + slack) {
            return None;
        }
        let u = ((x - self.lo[axis]) / h).clamp(0.0, (self.counts[axis] - 1) as f64);
        let c = (u.floor() as usize).min(self.counts[axis] - 2);
        Some((c, u - c as f64))
    }

    /// Indices of the lower convex hull vertices (1-D grids only).
    pub(crate) fn hull(&self) -> &[usize] {
        self.hull
            .get_or_init(|| lower_hull(&self.nodes(0), &self.values))
    }

    /// Subdifferential interval `[left, right]` of the lower convex envelope
    /// at `x` (1-D grids only). The endpoints are slopes of the hull, i.e. the
    /// breakpoints of the discrete conjugate.
    pub(crate) fn hull_subdifferential(&self, x: f64) -> Result<(f64, f64)> {
        let xs = self.nodes(0);
        if self.locate(0, x).is_none() {
            return Err(Error::OutsideGrid { point: vec![x] });
        }
        let hull = self.hull();
        let slope = |a: usize, b: usize| (self.values[b] - self.values[a]) / (xs[b] - xs[a]);
        let tol = 1e-12 * (self.hi[0] - self.lo[0]);
        for w in 0..hull.len() - 1 {
            let (a, b) = (hull[w], hull[w + 1]);
            let s = slope(a, b);
            if (x - xs[a]).abs() <= tol {
                // at the left edge of the box the interpolant extends with slope s
                let left = if w == 0 { s } else { slope(hull[w - 1], a) };
                return Ok((left, s));
            }
            if x > xs[a] && x < xs[b] - tol {
                return Ok((s, s));
            }
        }
        let last = hull.len() - 1;
        let s = slope(hull[last - 1], hull[last]);
        Ok((s, s))
    }

    /// Reads a grid from CSV.
    ///
    /// 1-D: two columns `x,value` on uniformly spaced `x`.
    /// 2-D: a header record `lo1,hi1,lo2,hi2` followed by the value matrix,
    /// one row per node of the first axis.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_path(path.as_ref())?;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record?;
            let parsed: std::result::Result<Vec<f64>, _> =
                record.iter().map(|s| s.parse::<f64>()).collect();
            match parsed {
                Ok(v) => rows.push(v),
                // a textual column header on the first line is allowed
                Err(_) if line == 0 => continue,
                Err(e) => {
                    return Err(Error::Csv(format!("line {}: {e}", line + 1)));
                }
            }
        }
        if rows.is_empty() {
            return Err(Error::Csv("no numeric records".into()));
        }
        if rows.iter().all(|r| r.len() == 2) {
            let xs: Vec<f64> = rows.iter().map(|r| r[0]).collect();
            let values: Vec<f64> = rows.iter().map(|r| r[1]).collect();
            let n = xs.len();
            if n < 3 {
                return Err(Error::Csv("a 1-D grid needs at least 3 rows".into()));
            }
            let h = (xs[n - 1] - xs[0]) / (n - 1) as f64;
            for (i, x) in xs.iter().enumerate() {
                if (x - (xs[0] + i as f64 * h)).abs() > 1e-9 * (xs[n - 1] - xs[0]).abs() {
                    return Err(Error::Csv(format!(
                        "row {}: x is not uniformly spaced",
                        i + 1
                    )));
                }
            }
            return Self::new(vec![xs[0]], vec![xs[n - 1]], vec![n], values);
        }
        let header = &rows[0];
        if header.len() != 4 {
            return Err(Error::Csv(
                "2-D grids start with a `lo1,hi1,lo2,hi2` record".into(),
            ));
        }
        let matrix = &rows[1..];
        let n1 = matrix.first().map(|r| r.len()).unwrap_or(0);
        if matrix.iter().any(|r| r.len() != n1) {
            return Err(Error::Csv("ragged value matrix".into()));
        }
        let values = matrix.iter().flatten().copied().collect();
        Self::new(
            vec![header[0], header[2]],
            vec![header[1], header[3]],
            vec![matrix.len(), n1],
            values,
        )
    }

    /// Writes the grid in the format accepted by [`GridFn::read_csv`].
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::new();
        match self.dim() {
            1 => {
                out.push_str("x,value\n");
                for (i, v) in self.values.iter().enumerate() {
                    out.push_str(&format!("{:.16e},{:.16e}\n", self.node(0, i), v));
                }
            }
            _ => {
                out.push_str(&format!(
                    "{:.16e},{:.16e},{:.16e},{:.16e}\n",
                    self.lo[0], self.hi[0], self.lo[1], self.hi[1]
                ));
                for row in self.values.chunks(self.counts[1]) {
                    let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
                    out.push_str(&line.join(","));
                    out.push('\n');
                }
            }
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// Lower convex hull (Andrew's monotone chain) of points with increasing `xs`.
pub(crate) fn lower_hull(xs: &[f64], fs: &[f64]) -> Vec<usize> {
    let mut hull: Vec<usize> = Vec::with_capacity(xs.len());
    for i in 0..xs.len() {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            // drop b when it lies on or above the chord a-i
            let cross = (xs[b] - xs[a]) * (fs[i] - fs[a]) - (fs[b] - fs[a]) * (xs[i] - xs[a]);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    hull
}

/// Result of one 1-D sweep: for every dual node, the primal index achieving the max.
struct Sweep {
    boundary_bound: Vec<bool>,
}

/// `out[j] = max_i (xs[i] * ys[j] - fs[i])` for ascending `ys`, in `O(n + m)`.
fn conjugate_1d(xs: &[f64], fs: &[f64], ys: &[f64], out: &mut [f64], pad: f64) -> Sweep {
    let hull = lower_hull(xs, fs);
    let slopes: Vec<f64> = hull
        .windows(2)
        .map(|w| (fs[w[1]] - fs[w[0]]) / (xs[w[1]] - xs[w[0]]))
        .collect();
    let last = xs.len() - 1;
    let (s_first, s_last) = match (slopes.first(), slopes.last()) {
        (Some(a), Some(b)) => (*a, *b),
        _ => (f64::NEG_INFINITY, f64::INFINITY),
    };
    let margin = pad * (s_last - s_first).abs().max(f64::MIN_POSITIVE);
    let mut k = 0;
    let mut boundary_bound = Vec::with_capacity(ys.len());
    for (j, &y) in ys.iter().enumerate() {
        while k < slopes.len() && slopes[k] < y {
            k += 1;
        }
        let i = hull[k];
        out[j] = xs[i] * y - fs[i];
        boundary_bound.push((i == 0 && y < s_first - margin) || (i == last && y > s_last + margin));
    }
    Sweep { boundary_bound }
}

/// Padding (fraction of the slope range, per side) applied by [`default_dual_box`].
pub const DUAL_PADDING: f64 = 0.05;

/// Fraction of dual nodes allowed to be bound to the primal boundary.
const BOUNDARY_FRACTION_LIMIT: f64 = 0.05;

/// Dual box spanning the slopes of the convex hull of `f` along each grid
/// line, padded by [`DUAL_PADDING`] of the slope range on both sides.
pub fn default_dual_box(f: &GridFn) -> (Vec<f64>, Vec<f64>) {
    let mut lo = Vec::with_capacity(f.dim());
    let mut hi = Vec::with_capacity(f.dim());
    for axis in 0..f.dim() {
        let xs = f.nodes(axis);
        let (mut smin, mut smax) = (f64::INFINITY, f64::NEG_INFINITY);
        let mut visit = |line: &[f64]| {
            let hull = lower_hull(&xs, line);
            let slope = |a: usize, b: usize| (line[b] - line[a]) / (xs[b] - xs[a]);
            smin = smin.min(slope(hull[0], hull[1]));
            smax = smax.max(slope(hull[hull.len() - 2], hull[hull.len() - 1]));
        };
        match (f.dim(), axis) {
            (1, _) => visit(&f.values),
            (_, 0) => {
                let n1 = f.counts[1];
                let mut line = vec![0.0; f.counts[0]];
                for j in 0..n1 {
                    for (i, v) in line.iter_mut().enumerate() {
                        *v = f.values[i * n1 + j];
                    }
                    visit(&line);
                }
            }
            _ => f.values.chunks(f.counts[1]).for_each(visit),
        }
        if smax - smin < 1e-12 {
            smin -= 1.0;
            smax += 1.0;
        }
        let pad = DUAL_PADDING * (smax - smin);
        lo.push(smin - pad);
        hi.push(smax + pad);
    }
    (lo, hi)
}

fn check_boundary(bound: &[bool], ys: &[f64], axis: usize, total: usize) -> Result<()> {
    let hits = bound.iter().filter(|b| **b).count();
    if hits as f64 > BOUNDARY_FRACTION_LIMIT * total as f64 {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (j, b) in bound.iter().enumerate() {
            if *b {
                let y = ys[j % ys.len()];
                lo = lo.min(y);
                hi = hi.max(y);
            }
        }
        return Err(Error::DualBoxTooSmall {
            percent: 100.0 * hits as f64 / total as f64,
            axis,
            lo,
            hi,
        });
    }
    Ok(())
}

fn dual_grid_shell(
    f: &GridFn,
    dual_lo: &[f64],
    dual_hi: &[f64],
    dual_counts: &[usize],
) -> Result<GridFn> {
    if dual_lo.len() != f.dim() || dual_hi.len() != f.dim() || dual_counts.len() != f.dim() {
        return Err(Error::ShapeMismatch(
            "dual box must have the same number of axes as the primal grid".into(),
        ));
    }
    let total = dual_counts.iter().product();
    GridFn::new(
        dual_lo.to_vec(),
        dual_hi.to_vec(),
        dual_counts.to_vec(),
        vec![0.0; total],
    )
}

/// Discrete Legendre-Fenchel transform `g(y) = max_nodes (x.y - f(x))`
/// on the requested dual grid.
///
/// Fails with [`Error::DualBoxTooSmall`] when more than 5% of the dual nodes
/// have their maximizer pinned to the primal boundary (beyond the padding
/// margin), which means the primal box does not support the requested slopes.
pub fn discrete_conjugate(
    f: &GridFn,
    dual_lo: &[f64],
    dual_hi: &[f64],
    dual_counts: &[usize],
) -> Result<GridFn> {
    let mut g = dual_grid_shell(f, dual_lo, dual_hi, dual_counts)?;
    let ys0 = g.nodes(0);
    match f.dim() {
        1 => {
            let xs = f.nodes(0);
            let sweep = conjugate_1d(&xs, &f.values, &ys0, &mut g.values, DUAL_PADDING);
            check_boundary(&sweep.boundary_bound, &ys0, 0, ys0.len())?;
        }
        _ => {
            let xs0 = f.nodes(0);
            let xs1 = f.nodes(1);
            let ys1 = g.nodes(1);
            let (n0, n1) = (f.counts[0], f.counts[1]);
            let m1 = ys1.len();
            // pass 1: along axis 1 for each primal x0 -> h(x0, y1)
            let mut partial = vec![0.0; n0 * m1];
            let mut bound1 = Vec::with_capacity(n0 * m1);
            for i in 0..n0 {
                let row = &f.values[i * n1..(i + 1) * n1];
                let sweep = conjugate_1d(
                    &xs1,
                    row,
                    &ys1,
                    &mut partial[i * m1..(i + 1) * m1],
                    DUAL_PADDING,
                );
                bound1.extend(sweep.boundary_bound);
            }
            check_boundary(&bound1, &ys1, 1, bound1.len())?;
            // pass 2: along axis 0 of -h for each dual y1
            let mut column = vec![0.0; n0];
            let mut out = vec![0.0; ys0.len()];
            let mut bound0 = Vec::with_capacity(ys0.len() * m1);
            for j in 0..m1 {
                for i in 0..n0 {
                    column[i] = -partial[i * m1 + j];
                }
                let sweep = conjugate_1d(&xs0, &column, &ys0, &mut out, DUAL_PADDING);
                bound0.extend(sweep.boundary_bound);
                for (k, v) in out.iter().enumerate() {
                    g.values[k * m1 + j] = *v;
                }
            }
            check_boundary(&bound0, &ys0, 0, bound0.len())?;
        }
    }
    Ok(g)
}

/// Discrete conjugate on [`default_dual_box`] with the primal sample counts.
pub fn discrete_conjugate_auto(f: &GridFn) -> Result<GridFn> {
    let (lo, hi) = default_dual_box(f);
    discrete_conjugate(f, &lo, &hi, &f.counts.clone())
}

/// Brute-force `O(n m)` transform over every primal node; the test oracle for
/// [`discrete_conjugate`].
pub fn discrete_conjugate_brute(
    f: &GridFn,
    dual_lo: &[f64],
    dual_hi: &[f64],
    dual_counts: &[usize],
) -> Result<GridFn> {
    let mut g = dual_grid_shell(f, dual_lo, dual_hi, dual_counts)?;
    match f.dim() {
        1 => {
            let xs = f.nodes(0);
            for (j, y) in g.nodes(0).into_iter().enumerate() {
                g.values[j] = xs
                    .iter()
                    .zip(&f.values)
                    .map(|(x, v)| x * y - v)
                    .fold(f64::NEG_INFINITY, f64::max);
            }
        }
        _ => {
            let (xs0, xs1) = (f.nodes(0), f.nodes(1));
            let (ys0, ys1) = (g.nodes(0), g.nodes(1));
            let n1 = xs1.len();
            for (a, y0) in ys0.iter().enumerate() {
                for (b, y1) in ys1.iter().enumerate() {
                    let mut best = f64::NEG_INFINITY;
                    for (i, x0) in xs0.iter().enumerate() {
                        for (j, x1) in xs1.iter().enumerate() {
                            best = best.max(x0 * y0 + x1 * y1 - f.values[i * n1 + j]);
                        }
                    }
                    g.values[a * ys1.len() + b] = best;
                }
            }
        }
    }
    Ok(g)
}

fn defect_1d(xs: &[f64], fs: &[f64]) -> f64 {
    let hull = lower_hull(xs, fs);
    let mut worst = 0.0f64;
    for w in hull.windows(2) {
        let (a, b) = (w[0], w[1]);
        let slope = (fs[b] - fs[a]) / (xs[b] - xs[a]);
        for i in a + 1..b {
            let envelope = fs[a] + slope * (xs[i] - xs[a]);
            worst = worst.max(fs[i] - envelope);
        }
    }
    worst
}

/// Largest gap between the samples and their lower convex envelope; zero for
/// convex data. For 2-D grids the envelope is taken along every grid line.
pub fn convexity_defect(f: &GridFn) -> f64 {
    match f.dim() {
        1 => defect_1d(&f.nodes(0), &f.values),
        _ => {
            let (n0, n1) = (f.counts[0], f.counts[1]);
            let xs0 = f.nodes(0);
            let xs1 = f.nodes(1);
            let mut worst = 0.0f64;
            for row in f.values.chunks(n1) {
                worst = worst.max(defect_1d(&xs1, row));
            }
            let mut column = vec![0.0; n0];
            for j in 0..n1 {
                for i in 0..n0 {
                    column[i] = f.values[i * n1 + j];
                }
                worst = worst.max(defect_1d(&xs0, &column));
            }
            worst
        }
    }
}
