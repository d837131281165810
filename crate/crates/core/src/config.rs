//! Problem configuration files.
//!
//! A config is one TOML document:
//!
//! ```toml
//! [problem]
//! n = 1
//! horizon = 1.0
//! hamiltonian = "sq(pq)"
//!
//! [boundary]
//! mode = "cauchy"        # or "connecting", "semiconvex"
//! p0 = [1.0]
//! q0 = [0.0]
//! ```
//!
//! Hamiltonians and potentials are sums of scalar multiples of primitives
//! applied to a target (`p`, `q` or `pq` for `H`; `x` for ψ):
//!
//! | primitive            | meaning                              |
//! |----------------------|--------------------------------------|
//! | `sq(t)`, `sq(t, v)`  | `½|t - v|²`                          |
//! | `pow(t, r)`          | `Σ |t_i|^r`                          |
//! | `lin(t, v)`          | `v·t`                                |
//! | `quad(t, A)`         | `½ tᵀAt`                             |
//! | `const(c)` or `c`    | the constant `c`                     |
//! | `grid("f.csv")`      | tabulated values over the full input |
//!
//! Only `lin` and constants may carry a negative coefficient.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::action::{BoundaryMode, Potential};
use crate::conditions::{CoerciveIndex, GrowthCert};
use crate::convex::{ConvexFn, WorkingBox};
use crate::error::{Error, Result};
use crate::hamiltonian::Hamiltonian;
use crate::legendre::GridFn;
use crate::path::PathGrid;
use crate::problem::ProblemSpec;
use crate::solver::SolveParams;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    problem: RawProblem,
    boundary: RawBoundary,
    growth: Option<RawGrowth>,
    #[serde(default)]
    solver: RawSolver,
    #[serde(default)]
    conditions: RawConditions,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    n: usize,
    horizon: f64,
    hamiltonian: String,
    box_radius: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBoundary {
    mode: String,
    psi1: Option<String>,
    psi2: Option<String>,
    p0: Option<Vec<f64>>,
    q0: Option<Vec<f64>>,
    delta1: Option<f64>,
    delta2: Option<f64>,
    coercive_index: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrowth {
    alpha: f64,
    beta: f64,
    gamma: f64,
    r: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    m: Option<usize>,
    eps_schedule: Option<Vec<f64>>,
    lambda_schedule: Option<Vec<f64>>,
    r: Option<f64>,
    tol_zero: Option<f64>,
    max_iters: Option<usize>,
    seed: Option<u64>,
    polish: Option<bool>,
    init: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConditions {
    samples: Option<usize>,
    shell_radius: Option<f64>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<String>,
    residuals: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct ConditionsConfig {
    pub samples: usize,
    pub shell_radius: f64,
    pub seed: u64,
}

impl Default for ConditionsConfig {
    fn default() -> Self {
        Self {
            samples: 2000,
            shell_radius: 50.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Also write the per-interval residual table.
    pub residuals: bool,
}

#[derive(Debug, Clone)]
pub struct ProblemConfig {
    pub spec: ProblemSpec,
    pub params: SolveParams,
    pub conditions: ConditionsConfig,
    pub output: OutputConfig,
}

/// Sweepable parameters.
pub const SWEEP_PARAMS: [&str; 4] = ["lambda", "eps", "M", "T"];

impl ProblemConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_str_in(&text, &base)
    }

    /// Parses `text`, resolving relative file names against `base`.
    pub fn from_str_in(text: &str, base: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let loc = e
                .span()
                .map(|s| {
                    let line = text[..s.start.min(text.len())].matches('\n').count() + 1;
                    format!("line {line}")
                })
                .unwrap_or_else(|| "document".into());
            Error::config(loc, e.message().to_string())
        })?;
        build(raw, base)
    }

    /// Copy with one sweep parameter replaced.
    pub fn with_param(&self, name: &str, value: f64) -> Result<Self> {
        let mut c = self.clone();
        match name {
            "lambda" => c.params.lambda_schedule = vec![value],
            "eps" => {
                c.params.eps_schedule = vec![value];
                c.params.lambda_schedule.clear();
            }
            "M" | "m" => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(Error::config(
                        "sweep",
                        format!("M must be a positive integer, got {value}"),
                    ));
                }
                c.params.m = value as usize;
                c.params.init = None;
            }
            "T" | "horizon" => {
                c.spec = ProblemSpec {
                    horizon: value,
                    ..c.spec.clone()
                };
                ProblemSpec::new(c.spec.hamiltonian.clone(), value, c.spec.mode.clone())?;
                c.params.init = None;
            }
            other => {
                return Err(Error::config(
                    "sweep",
                    format!("unknown parameter {other:?}; expected one of {SWEEP_PARAMS:?}"),
                ))
            }
        }
        c.params.validate()?;
        Ok(c)
    }
}

fn bad(loc: &'static str) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::Config { .. } => e,
        other => Error::config(loc, other.to_string()),
    }
}

fn need<T>(v: Option<T>, loc: &str, mode: &str) -> Result<T> {
    v.ok_or_else(|| Error::config(loc, format!("required in {mode} mode")))
}

fn build(raw: RawConfig, base: &Path) -> Result<ProblemConfig> {
    let n = raw.problem.n;
    if n == 0 {
        return Err(Error::config("problem.n", "must be at least 1"));
    }
    let hf = parse_function(&raw.problem.hamiltonian, Target::Hamiltonian(n), base)
        .map_err(bad("problem.hamiltonian"))?;
    let h = Hamiltonian::new(n, hf).map_err(bad("problem.hamiltonian"))?;
    let b = &raw.boundary;
    let potential = |s: &Option<String>, loc: &'static str, mode: &str| -> Result<Potential> {
        let s = need(s.as_ref(), loc, mode)?;
        let f = parse_function(s, Target::Potential(n), base).map_err(bad(loc))?;
        Potential::new(f).map_err(bad(loc))
    };
    let mode = match b.mode.as_str() {
        "connecting" => BoundaryMode::Connecting {
            psi1: potential(&b.psi1, "boundary.psi1", "connecting")?,
            psi2: potential(&b.psi2, "boundary.psi2", "connecting")?,
        },
        "cauchy" => {
            let p0 = need(b.p0.clone(), "boundary.p0", "cauchy")?;
            let q0 = need(b.q0.clone(), "boundary.q0", "cauchy")?;
            for (v, loc) in [(&p0, "boundary.p0"), (&q0, "boundary.q0")] {
                if v.len() != n {
                    return Err(Error::config(
                        loc,
                        format!("expected {n} entries, got {}", v.len()),
                    ));
                }
            }
            BoundaryMode::Cauchy { p0, q0 }
        }
        "semiconvex" => BoundaryMode::SemiConvex {
            psi1: potential(&b.psi1, "boundary.psi1", "semiconvex")?,
            psi2: potential(&b.psi2, "boundary.psi2", "semiconvex")?,
            delta1: need(b.delta1, "boundary.delta1", "semiconvex")?,
            delta2: need(b.delta2, "boundary.delta2", "semiconvex")?,
        },
        other => {
            return Err(Error::config(
                "boundary.mode",
                format!("unknown mode {other:?}; expected connecting, cauchy or semiconvex"),
            ))
        }
    };
    let mut spec =
        ProblemSpec::new(h, raw.problem.horizon, mode).map_err(bad("problem.horizon"))?;
    if let Some(r) = raw.problem.box_radius {
        if !(r > 0.0) {
            return Err(Error::config("problem.box_radius", "must be positive"));
        }
        spec.box_radius = r;
    }
    if let Some(ci) = &b.coercive_index {
        spec.coercive_index = match ci.as_str() {
            "1" => CoerciveIndex::One,
            "2" => CoerciveIndex::Two,
            "either" => CoerciveIndex::Either,
            other => {
                return Err(Error::config(
                    "boundary.coercive_index",
                    format!("expected \"1\", \"2\" or \"either\", got {other:?}"),
                ))
            }
        };
    }
    if let Some(g) = raw.growth {
        spec.growth = Some(GrowthCert {
            alpha: g.alpha,
            beta: g.beta,
            gamma: g.gamma,
            r: g.r,
        });
    }
    let s = raw.solver;
    let d = SolveParams::default();
    let m = s.m.unwrap_or(d.m);
    let init = match s.init {
        Some(f) => {
            let g = PathGrid::read_csv(base.join(&f)).map_err(bad("solver.init"))?;
            if g.n() != n || g.m() != m || (g.horizon() - spec.horizon).abs() > 1e-12 * spec.horizon
            {
                return Err(Error::config(
                    "solver.init",
                    "guess does not match (n, M, horizon)",
                ));
            }
            Some(PathGrid::new(
                spec.horizon,
                n,
                m,
                g.p().to_vec(),
                g.q().to_vec(),
            )?)
        }
        None => None,
    };
    let params = SolveParams {
        m,
        eps_schedule: s.eps_schedule.unwrap_or(d.eps_schedule),
        lambda_schedule: s.lambda_schedule.unwrap_or(d.lambda_schedule),
        r: s.r.unwrap_or(d.r),
        tol_zero: s.tol_zero,
        max_iters: s.max_iters.unwrap_or(d.max_iters),
        seed: s.seed.unwrap_or(d.seed),
        init,
        polish: s.polish.unwrap_or(d.polish),
    };
    params.validate().map_err(bad("solver"))?;
    let dc = ConditionsConfig::default();
    let conditions = ConditionsConfig {
        samples: raw.conditions.samples.unwrap_or(dc.samples),
        shell_radius: raw.conditions.shell_radius.unwrap_or(dc.shell_radius),
        seed: raw.conditions.seed.unwrap_or(dc.seed),
    };
    if conditions.samples < crate::conditions::MIN_SAMPLES {
        return Err(Error::config(
            "conditions.samples",
            format!(
                "at least {} samples are required",
                crate::conditions::MIN_SAMPLES
            ),
        ));
    }
    let output = OutputConfig {
        dir: base.join(raw.output.dir.unwrap_or_else(|| "out".into())),
        residuals: raw.output.residuals.unwrap_or(true),
    };
    Ok(ProblemConfig {
        spec,
        params,
        conditions,
        output,
    })
}

#[derive(Debug, Clone, Copy)]
pub enum Target {
    /// Function of `(p, q) ∈ R^N × R^N`.
    Hamiltonian(usize),
    /// Function of `x ∈ R^N`.
    Potential(usize),
}

impl Target {
    fn full_dim(self) -> usize {
        match self {
            Target::Hamiltonian(n) => 2 * n,
            Target::Potential(n) => n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Block {
    P,
    Q,
    Full,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Str(String),
    Sym(char),
}

fn tokenize(s: &str) -> Result<Vec<(usize, Tok)>> {
    let err = |i: usize, m: &str| Error::InvalidParameter(format!("column {}: {m}", i + 1));
    let chars: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len()
                && (chars[i].is_ascii_digit()
                    || chars[i] == '.'
                    || chars[i] == 'e'
                    || chars[i] == 'E'
                    || ((chars[i] == '-' || chars[i] == '+') && matches!(chars[i - 1], 'e' | 'E')))
            {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            let v = text
                .parse()
                .map_err(|_| err(start, &format!("bad number {text:?}")))?;
            out.push((start, Tok::Num(v)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((start, Tok::Ident(chars[start..i].iter().collect())));
        } else if c == '"' || c == '\'' {
            let start = i;
            i += 1;
            while i < chars.len() && chars[i] != c {
                i += 1;
            }
            if i == chars.len() {
                return Err(err(start, "unterminated string"));
            }
            out.push((start, Tok::Str(chars[start + 1..i].iter().collect())));
            i += 1;
        } else if "+-*(),[]".contains(c) {
            out.push((i, Tok::Sym(c)));
            i += 1;
        } else {
            return Err(err(i, &format!("unexpected character {c:?}")));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
enum Arg {
    Ident(String),
    Num(f64),
    List(Vec<Arg>),
    Str(String),
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    len: usize,
}

impl Parser {
    fn err(&self, m: impl Into<String>) -> Error {
        let col = self.toks.get(self.pos).map_or(self.len, |t| t.0) + 1;
        Error::InvalidParameter(format!("column {col}: {}", m.into()))
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.1)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.1.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, c: char) -> Result<()> {
        match self.peek() {
            Some(Tok::Sym(s)) if *s == c => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.err(format!("expected '{c}'"))),
        }
    }

    fn number(&mut self) -> Option<f64> {
        let neg = matches!(self.peek(), Some(Tok::Sym('-')));
        let at = self.pos + usize::from(neg);
        if let Some((_, Tok::Num(v))) = self.toks.get(at) {
            let v = *v;
            self.pos = at + 1;
            return Some(if neg { -v } else { v });
        }
        None
    }

    fn arg(&mut self) -> Result<Arg> {
        if let Some(v) = self.number() {
            return Ok(Arg::Num(v));
        }
        match self.next() {
            Some(Tok::Ident(s)) => Ok(Arg::Ident(s)),
            Some(Tok::Str(s)) => Ok(Arg::Str(s)),
            Some(Tok::Sym('[')) => {
                let mut items = Vec::new();
                if !matches!(self.peek(), Some(Tok::Sym(']'))) {
                    loop {
                        items.push(self.arg()?);
                        if matches!(self.peek(), Some(Tok::Sym(','))) {
                            self.pos += 1;
                        } else {
                            break;
                        }
                    }
                }
                self.expect(']')?;
                Ok(Arg::List(items))
            }
            _ => {
                self.pos -= 1;
                Err(self.err("expected an argument"))
            }
        }
    }

    /// `(coefficient, primitive, args)` terms of a sum.
    fn terms(&mut self) -> Result<Vec<(f64, String, Vec<Arg>)>> {
        let mut out = Vec::new();
        let mut sign = 1.0;
        if matches!(self.peek(), Some(Tok::Sym('-'))) {
            self.pos += 1;
            sign = -1.0;
        }
        loop {
            let mut coef = sign;
            let mut name = None;
            if let Some(Tok::Num(v)) = self.peek() {
                coef *= *v;
                self.pos += 1;
                if matches!(self.peek(), Some(Tok::Sym('*'))) {
                    self.pos += 1;
                } else {
                    name = Some("const".to_string());
                }
            }
            let (name, args) = match name {
                Some(c) => (c, vec![Arg::Num(1.0)]),
                None => {
                    let name = match self.next() {
                        Some(Tok::Ident(s)) => s,
                        _ => {
                            self.pos -= 1;
                            return Err(self.err("expected a primitive name"));
                        }
                    };
                    self.expect('(')?;
                    let mut args = Vec::new();
                    if !matches!(self.peek(), Some(Tok::Sym(')'))) {
                        loop {
                            args.push(self.arg()?);
                            if matches!(self.peek(), Some(Tok::Sym(','))) {
                                self.pos += 1;
                            } else {
                                break;
                            }
                        }
                    }
                    self.expect(')')?;
                    (name, args)
                }
            };
            out.push((coef, name, args));
            match self.next() {
                None => return Ok(out),
                Some(Tok::Sym('+')) => sign = 1.0,
                Some(Tok::Sym('-')) => sign = -1.0,
                _ => {
                    self.pos -= 1;
                    return Err(self.err("expected '+', '-' or end of expression"));
                }
            }
        }
    }
}

fn as_vec(a: &Arg, len: usize, what: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidParameter(format!("{what}: expected a list of {len} numbers"));
    match a {
        Arg::Num(v) if len == 1 => Ok(vec![*v]),
        Arg::List(items) if items.len() == len => items
            .iter()
            .map(|i| match i {
                Arg::Num(v) => Ok(*v),
                _ => Err(bad()),
            })
            .collect(),
        _ => Err(bad()),
    }
}

fn as_matrix(a: &Arg, len: usize) -> Result<DMatrix<f64>> {
    let bad = || Error::InvalidParameter(format!("quad: expected a {len}×{len} matrix"));
    match a {
        Arg::List(rows) if rows.len() == len => {
            let mut m = DMatrix::zeros(len, len);
            for (i, r) in rows.iter().enumerate() {
                let row = as_vec(r, len, "quad").map_err(|_| bad())?;
                for (j, v) in row.into_iter().enumerate() {
                    m[(i, j)] = v;
                }
            }
            Ok(m)
        }
        Arg::Num(v) if len == 1 => Ok(DMatrix::from_element(1, 1, *v)),
        _ => Err(bad()),
    }
}

/// One parsed term, already scaled, acting on its block.
enum Piece {
    /// `½ xᵀAx - ℓ·x + c` before merging.
    Poly {
        a: DMatrix<f64>,
        l: DVector<f64>,
        c: f64,
    },
    Other(ConvexFn),
}

fn piece(coef: f64, name: &str, args: &[Arg], dim: usize, base: &Path) -> Result<Piece> {
    let argc = |want: &[usize]| -> Result<()> {
        if want.contains(&args.len()) {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "{name}: wrong number of arguments"
            )))
        }
    };
    if coef < 0.0 && !matches!(name, "lin" | "const") {
        return Err(Error::InvalidParameter(format!(
            "{name}: a negative coefficient would break convexity"
        )));
    }
    Ok(match name {
        "sq" => {
            argc(&[1, 2])?;
            let shift = match args.get(1) {
                Some(a) => as_vec(a, dim, "sq shift")?,
                None => vec![0.0; dim],
            };
            let s = DVector::from_vec(shift);
            let a = DMatrix::identity(dim, dim) * coef;
            Piece::Poly {
                l: &a * &s,
                c: 0.5 * coef * s.norm_squared(),
                a,
            }
        }
        "quad" => {
            argc(&[2])?;
            let m = as_matrix(&args[1], dim)? * coef;
            // validates symmetry and PSD
            ConvexFn::quadratic(m.clone(), DVector::zeros(dim), 0.0)?;
            Piece::Poly {
                a: m,
                l: DVector::zeros(dim),
                c: 0.0,
            }
        }
        "lin" => {
            argc(&[2])?;
            let v = DVector::from_vec(as_vec(&args[1], dim, "lin slope")?) * coef;
            Piece::Poly {
                a: DMatrix::zeros(dim, dim),
                l: -v,
                c: 0.0,
            }
        }
        "const" => {
            argc(&[1])?;
            let v = match &args[0] {
                Arg::Num(v) => *v,
                _ => return Err(Error::InvalidParameter("const: expected a number".into())),
            };
            Piece::Poly {
                a: DMatrix::zeros(dim, dim),
                l: DVector::zeros(dim),
                c: coef * v,
            }
        }
        "pow" => {
            argc(&[2])?;
            let r = match &args[1] {
                Arg::Num(r) => *r,
                _ => return Err(Error::InvalidParameter("pow: expected an exponent".into())),
            };
            Piece::Other(ConvexFn::power_norm(dim, r, coef)?)
        }
        "grid" => {
            argc(&[1])?;
            let file = match &args[0] {
                Arg::Str(s) => s,
                _ => {
                    return Err(Error::InvalidParameter(
                        "grid: expected a quoted file name".into(),
                    ))
                }
            };
            let g = GridFn::read_csv(base.join(file))?;
            if g.dim() != dim {
                return Err(Error::InvalidParameter(format!(
                    "grid {file:?} has dimension {}, expected {dim}",
                    g.dim()
                )));
            }
            let scaled = GridFn::new(
                g.lo().to_vec(),
                g.hi().to_vec(),
                g.counts().to_vec(),
                g.values().iter().map(|v| v * coef).collect(),
            )?;
            Piece::Other(ConvexFn::grid(scaled))
        }
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown primitive {other:?}"
            )))
        }
    })
}

/// Sums pieces acting on the same block; polynomial pieces merge into one
/// quadratic when the combined matrix is invertible.
fn combine(pieces: Vec<Piece>, dim: usize) -> Result<Option<ConvexFn>> {
    if pieces.is_empty() {
        return Ok(None);
    }
    let mut a = DMatrix::zeros(dim, dim);
    let mut l = DVector::zeros(dim);
    let mut c = 0.0;
    let mut any_poly = false;
    let mut others = Vec::new();
    for p in pieces {
        match p {
            Piece::Poly {
                a: pa,
                l: pl,
                c: pc,
            } => {
                a += pa;
                l += pl;
                c += pc;
                any_poly = true;
            }
            Piece::Other(f) => others.push(f),
        }
    }
    let mut terms = others;
    if any_poly {
        let f = match a.clone().try_inverse() {
            // ½xᵀAx - ℓ·x + c = ½(x - s)ᵀA(x - s) + c - ½sᵀAs with s = A⁻¹ℓ
            Some(inv) if a.iter().any(|v| *v != 0.0) => {
                let s = inv * &l;
                let off = c - 0.5 * s.dot(&(&a * &s));
                ConvexFn::quadratic(a, s, off)?
            }
            _ => {
                let mut parts = Vec::new();
                if a.iter().any(|v| *v != 0.0) {
                    parts.push(ConvexFn::quadratic(a, DVector::zeros(dim), 0.0)?);
                }
                parts.push(ConvexFn::affine((-l).iter().copied().collect(), c));
                if parts.len() == 1 {
                    parts.pop().expect("one part")
                } else {
                    ConvexFn::sum(parts)?
                }
            }
        };
        terms.insert(0, f);
    }
    Ok(Some(if terms.len() == 1 {
        terms.pop().expect("one term")
    } else {
        ConvexFn::sum(terms)?
    }))
}

/// Parses an expression into a convex function of the target's variables.
pub fn parse_function(expr: &str, target: Target, base: &Path) -> Result<ConvexFn> {
    let toks = tokenize(expr)?;
    if toks.is_empty() {
        return Err(Error::InvalidParameter("empty expression".into()));
    }
    let mut parser = Parser {
        toks,
        pos: 0,
        len: expr.len(),
    };
    let terms = parser.terms()?;
    let full = target.full_dim();
    let mut by_block: [Vec<Piece>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for (coef, name, mut args) in terms {
        let block = if matches!(name.as_str(), "const" | "grid") {
            Block::Full
        } else {
            let t = match args.first() {
                Some(Arg::Ident(t)) => t.clone(),
                _ => {
                    return Err(Error::InvalidParameter(format!(
                        "{name}: first argument must be a target"
                    )))
                }
            };
            args.remove(0);
            args.insert(0, Arg::Num(0.0));
            match (target, t.as_str()) {
                (Target::Hamiltonian(_), "p") => Block::P,
                (Target::Hamiltonian(_), "q") => Block::Q,
                (Target::Hamiltonian(_), "pq") | (Target::Potential(_), "x") => Block::Full,
                _ => {
                    return Err(Error::InvalidParameter(format!(
                        "{name}: target {t:?} is not valid here (use {})",
                        match target {
                            Target::Hamiltonian(_) => "p, q or pq",
                            Target::Potential(_) => "x",
                        }
                    )))
                }
            }
        };
        let dim = match (block, target) {
            (Block::Full, _) => full,
            (_, Target::Hamiltonian(n)) => n,
            (_, Target::Potential(n)) => n,
        };
        let idx = match block {
            Block::P => 0,
            Block::Q => 1,
            Block::Full => 2,
        };
        by_block[idx].push(piece(coef, &name, &args, dim, base)?);
    }
    let [mut pp, mut qp, mut fp] = by_block;
    if let Target::Hamiltonian(n) = target {
        // polynomial p- or q-terms fold into a joint quadratic when one exists
        if !fp.is_empty() {
            for (pieces, off) in [(&mut pp, 0), (&mut qp, n)] {
                let (poly, rest): (Vec<_>, Vec<_>) = pieces
                    .drain(..)
                    .partition(|p| matches!(p, Piece::Poly { .. }));
                *pieces = rest;
                for p in poly {
                    if let Piece::Poly { a, l, c } = p {
                        let mut ea = DMatrix::zeros(full, full);
                        ea.view_mut((off, off), (n, n)).copy_from(&a);
                        let mut el = DVector::zeros(full);
                        el.rows_mut(off, n).copy_from(&l);
                        fp.push(Piece::Poly { a: ea, l: el, c });
                    }
                }
            }
        }
    }
    let full_fn = combine(fp, full)?;
    let f = match target {
        Target::Potential(_) => full_fn.expect("at least one term"),
        Target::Hamiltonian(n) => {
            let p = combine(pp, n)?;
            let q = combine(qp, n)?;
            let split = if p.is_some() || q.is_some() {
                Some(ConvexFn::separable(vec![
                    p.unwrap_or_else(|| ConvexFn::zero(n)),
                    q.unwrap_or_else(|| ConvexFn::zero(n)),
                ])?)
            } else {
                None
            };
            match (split, full_fn) {
                (Some(s), None) => s,
                (None, Some(f)) => f,
                (Some(s), Some(f)) => ConvexFn::sum(vec![f, s])?,
                (None, None) => unreachable!("at least one term"),
            }
        }
    };
    // grid kinds keep the box of their table
    if matches!(f.kind(), crate::convex::Kind::GridSampled(_)) {
        Ok(f)
    } else {
        f.with_box(WorkingBox::cube(full, crate::convex::DEFAULT_BOX_RADIUS))
    }
}
