//! Discrete paths `(p, q)` on a uniform grid over `[0, T]`.
//!
//! Derivatives live on intervals (difference quotients) and are paired with
//! interval averages of the nodes, so that
//! `h Σ (dq·p̄ + dp·q̄) = p_M·q_M - p_0·q_0` holds by telescoping.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PathGrid {
    horizon: f64,
    n: usize,
    m: usize,
    /// `(m+1) × n`, row-major by node.
    p: Vec<f64>,
    q: Vec<f64>,
}

/// Per-interval difference quotients and midpoint averages, `m × n` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalData {
    pub n: usize,
    pub dp: Vec<f64>,
    pub dq: Vec<f64>,
    pub pbar: Vec<f64>,
    pub qbar: Vec<f64>,
}

/// Trapezoid `L²` norms of the nodes and `L²` norms of the difference quotients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormParts {
    pub p: f64,
    pub q: f64,
    pub dp: f64,
    pub dq: f64,
}

impl PathGrid {
    pub fn new(horizon: f64, n: usize, m: usize, p: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if n == 0 || m == 0 {
            return Err(Error::InvalidParameter(
                "path needs N >= 1 and M >= 1".into(),
            ));
        }
        let len = (m + 1) * n;
        if p.len() != len || q.len() != len {
            return Err(Error::ShapeMismatch(format!(
                "expected {len} node values per component, got {} and {}",
                p.len(),
                q.len()
            )));
        }
        if p.iter().chain(&q).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "path entries must be finite".into(),
            ));
        }
        Ok(Self {
            horizon,
            n,
            m,
            p,
            q,
        })
    }

    pub fn zeros(horizon: f64, n: usize, m: usize) -> Result<Self> {
        Self::new(
            horizon,
            n,
            m,
            vec![0.0; (m + 1) * n],
            vec![0.0; (m + 1) * n],
        )
    }

    /// Samples `f(t) -> (p, q)` at the nodes.
    pub fn from_fn(
        horizon: f64,
        n: usize,
        m: usize,
        mut f: impl FnMut(f64) -> (Vec<f64>, Vec<f64>),
    ) -> Result<Self> {
        let h = horizon / m as f64;
        let mut p = Vec::with_capacity((m + 1) * n);
        let mut q = Vec::with_capacity((m + 1) * n);
        for k in 0..=m {
            let (pk, qk) = f(k as f64 * h);
            if pk.len() != n || qk.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: pk.len().min(qk.len()),
                });
            }
            p.extend(pk);
            q.extend(qk);
        }
        Self::new(horizon, n, m, p, q)
    }

    /// Builds from a flat `[p..., q...]` vector as produced by [`PathGrid::to_flat`].
    pub fn from_flat(horizon: f64, n: usize, m: usize, x: &[f64]) -> Result<Self> {
        let len = (m + 1) * n;
        if x.len() != 2 * len {
            return Err(Error::ShapeMismatch(format!(
                "flat vector has {} entries, expected {}",
                x.len(),
                2 * len
            )));
        }
        Self::new(horizon, n, m, x[..len].to_vec(), x[len..].to_vec())
    }

    pub fn to_flat(&self) -> Vec<f64> {
        [self.p.as_slice(), self.q.as_slice()].concat()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn h(&self) -> f64 {
        self.horizon / self.m as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.m {
            self.horizon
        } else {
            k as f64 * self.h()
        }
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn p_mut(&mut self) -> &mut [f64] {
        &mut self.p
    }

    pub fn q_mut(&mut self) -> &mut [f64] {
        &mut self.q
    }

    pub fn p_at(&self, k: usize) -> &[f64] {
        &self.p[k * self.n..(k + 1) * self.n]
    }

    pub fn q_at(&self, k: usize) -> &[f64] {
        &self.q[k * self.n..(k + 1) * self.n]
    }

    /// Largest absolute node entry.
    pub fn magnitude(&self) -> f64 {
        self.p
            .iter()
            .chain(&self.q)
            .fold(0.0f64, |a, v| a.max(v.abs()))
    }

    /// Same shape check as used by functions taking two paths.
    pub fn same_shape(&self, other: &PathGrid) -> bool {
        self.n == other.n && self.m == other.m && self.horizon == other.horizon
    }

    pub fn interval_data(&self) -> IntervalData {
        let (n, m) = (self.n, self.m);
        let inv_h = 1.0 / self.h();
        let mut d = IntervalData {
            n,
            dp: Vec::with_capacity(m * n),
            dq: Vec::with_capacity(m * n),
            pbar: Vec::with_capacity(m * n),
            qbar: Vec::with_capacity(m * n),
        };
        for k in 0..m {
            for i in 0..n {
                let (a, b) = (self.p[k * n + i], self.p[(k + 1) * n + i]);
                let (c, e) = (self.q[k * n + i], self.q[(k + 1) * n + i]);
                d.dp.push((b - a) * inv_h);
                d.dq.push((e - c) * inv_h);
                d.pbar.push(0.5 * (a + b));
                d.qbar.push(0.5 * (c + e));
            }
        }
        d
    }

    /// `|h Σ (dq·p̄ + dp·q̄) - (p_M·q_M - p_0·q_0)|`.
    pub fn sbp_check(&self) -> f64 {
        let d = self.interval_data();
        let h = self.h();
        let mut acc = 0.0;
        for j in 0..d.dp.len() {
            acc += h * (d.dq[j] * d.pbar[j] + d.dp[j] * d.qbar[j]);
        }
        let ends = dot(self.p_at(self.m), self.q_at(self.m)) - dot(self.p_at(0), self.q_at(0));
        (acc - ends).abs()
    }

    pub fn norm_parts(&self) -> NormParts {
        let (n, m, h) = (self.n, self.m, self.h());
        let nodes = |v: &[f64]| {
            let mut acc = 0.0;
            for k in 0..=m {
                let w = if k == 0 || k == m { 0.5 } else { 1.0 };
                acc += w * v[k * n..(k + 1) * n].iter().map(|x| x * x).sum::<f64>();
            }
            (h * acc).sqrt()
        };
        let d = self.interval_data();
        let diffs = |v: &[f64]| (h * v.iter().map(|x| x * x).sum::<f64>()).sqrt();
        NormParts {
            p: nodes(&self.p),
            q: nodes(&self.q),
            dp: diffs(&d.dp),
            dq: diffs(&d.dq),
        }
    }

    /// Discrete `W^{1,2}` norm of the pair: `(‖p‖² + ‖ṗ‖² + ‖q‖² + ‖q̇‖²)^{1/2}`.
    pub fn w12_norm(&self) -> f64 {
        let s = self.norm_parts();
        (s.p * s.p + s.dp * s.dp + s.q * s.q + s.dq * s.dq).sqrt()
    }

    /// Largest node-wise distance to `other` in the max norm.
    pub fn sup_distance(&self, other: &PathGrid) -> Result<f64> {
        if !self.same_shape(other) {
            return Err(Error::ShapeMismatch("paths live on different grids".into()));
        }
        Ok(self
            .p
            .iter()
            .zip(&other.p)
            .chain(self.q.iter().zip(&other.q))
            .fold(0.0f64, |a, (x, y)| a.max((x - y).abs())))
    }

    /// CSV with columns `t, p_1..p_N, q_1..q_N`, 17 significant digits.
    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.n).map(|i| format!("p_{i}")));
        header.extend((1..=self.n).map(|i| format!("q_{i}")));
        writeln!(out, "{}", header.join(","))?;
        for k in 0..=self.m {
            let mut row = format!("{:.16e}", self.time(k));
            for v in self.p_at(k).iter().chain(self.q_at(k)) {
                row.push_str(&format!(",{v:.16e}"));
            }
            writeln!(out, "{row}")?;
        }
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)?;
        let cols = rdr.headers()?.len();
        if cols < 3 || (cols - 1) % 2 != 0 {
            return Err(Error::Csv(format!(
                "expected t plus 2N columns, got {cols}"
            )));
        }
        let n = (cols - 1) / 2;
        let (mut ts, mut p, mut q) = (Vec::new(), Vec::new(), Vec::new());
        for rec in rdr.records() {
            let rec = rec?;
            let vals: std::result::Result<Vec<f64>, _> =
                rec.iter().map(|s| s.trim().parse::<f64>()).collect();
            let vals = vals.map_err(|e| Error::Csv(e.to_string()))?;
            ts.push(vals[0]);
            p.extend_from_slice(&vals[1..=n]);
            q.extend_from_slice(&vals[n + 1..]);
        }
        if ts.len() < 2 {
            return Err(Error::Csv("trajectory needs at least two rows".into()));
        }
        let m = ts.len() - 1;
        Self::new(ts[m] - ts[0], n, m, p, q)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
