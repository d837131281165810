//! Browser bindings: a convex function and its Legendre transform, the
//! hypothesis checks, and a full solve, all exchanged as JSON strings.
//!
//! The `*_json` functions are plain Rust so they can be tested natively; the
//! `#[wasm_bindgen]` wrappers only convert errors.

use std::path::Path;

use selfdual::config::{parse_function, ProblemConfig, Target};
use selfdual::problem::check_hypotheses;
use selfdual::report::SolveReport;
use selfdual::solver::solve_checked;
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct Curve {
    x: Vec<f64>,
    f: Vec<f64>,
    /// Slopes `f'(x)`, where the conjugate is sampled.
    y: Vec<f64>,
    conj: Vec<Option<f64>>,
    /// `f(x) + f*(y) - x·y`, zero up to rounding on the graph of `∂f`.
    gap: Vec<Option<f64>>,
}

/// Samples `f` on `[lo, hi]` and `f*` at the slopes `f'(x)`.
pub fn conjugate_curve_json(expr: &str, lo: f64, hi: f64, count: usize) -> Result<String, String> {
    if lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) || count < 2 {
        return Err(format!(
            "need lo < hi and at least two samples, got [{lo}, {hi}] x {count}"
        ));
    }
    let err = |e: selfdual::Error| e.to_string();
    let f = parse_function(expr, Target::Potential(1), Path::new("")).map_err(err)?;
    let g = f.conjugate().map_err(err)?;
    let mut c = Curve {
        x: Vec::with_capacity(count),
        f: Vec::with_capacity(count),
        y: Vec::with_capacity(count),
        conj: Vec::with_capacity(count),
        gap: Vec::with_capacity(count),
    };
    for i in 0..count {
        let x = lo + (hi - lo) * i as f64 / (count - 1) as f64;
        let fx = f.eval(&[x]).map_err(err)?;
        let y = f.subgradient(&[x]).map_err(err)?.value[0];
        let gy = g.eval(&[y]).ok().filter(|v| v.is_finite());
        c.x.push(x);
        c.f.push(fx);
        c.y.push(y);
        c.conj.push(gy);
        c.gap.push(gy.map(|v| fx + v - x * y));
    }
    serde_json::to_string(&c).map_err(|e| e.to_string())
}

fn load(config: &str) -> Result<ProblemConfig, String> {
    ProblemConfig::from_str_in(config, Path::new("")).map_err(|e| e.to_string())
}

/// Hypothesis report for a TOML problem description.
pub fn check_problem_json(config: &str) -> Result<String, String> {
    let cfg = load(config)?;
    let c = &cfg.conditions;
    let rep = check_hypotheses(&cfg.spec, c.samples, c.shell_radius, c.seed)
        .map_err(|e| e.to_string())?;
    #[derive(Serialize)]
    struct Out<'a> {
        passed: bool,
        report: &'a selfdual::problem::HypothesisReport,
    }
    serde_json::to_string(&Out {
        passed: rep.passed(),
        report: &rep,
    })
    .map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Solved {
    t: Vec<f64>,
    /// Row `k` holds `p(t_k)`.
    p: Vec<Vec<f64>>,
    q: Vec<Vec<f64>>,
    report: SolveReport,
}

/// Solves a TOML problem description; returns the trajectory and the report.
pub fn solve_problem_json(config: &str) -> Result<String, String> {
    let cfg = load(config)?;
    let c = &cfg.conditions;
    let rep = check_hypotheses(&cfg.spec, c.samples, c.shell_radius, c.seed)
        .map_err(|e| e.to_string())?;
    let res = solve_checked(&cfg.spec, &cfg.params, &rep).map_err(|e| e.to_string())?;
    let g = &res.path;
    let out = Solved {
        t: (0..=g.m()).map(|k| g.time(k)).collect(),
        p: (0..=g.m()).map(|k| g.p_at(k).to_vec()).collect(),
        q: (0..=g.m()).map(|k| g.q_at(k).to_vec()).collect(),
        report: SolveReport::new(&cfg.spec, cfg.params.seed, &res, Some(&rep)),
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn conjugate_curve(expr: &str, lo: f64, hi: f64, count: usize) -> Result<String, JsError> {
    conjugate_curve_json(expr, lo, hi, count).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn check_problem(config: &str) -> Result<String, JsError> {
    check_problem_json(config).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn solve_problem(config: &str) -> Result<String, JsError> {
    solve_problem_json(config).map_err(|e| JsError::new(&e))
}
