//! Output artifacts: the structured text report, the per-interval residual
//! table, and sweep tables. CSV numbers use 17 significant digits.

use std::io::Write;

use serde::Serialize;

use crate::certify::Certificate;
use crate::error::Result;
use crate::problem::{HypothesisReport, ProblemSpec};
use crate::solver::{SolveResult, SolveStatus, StageRecord};

/// `{:.16e}`, the rendering used by every CSV writer here.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, Serialize)]
pub struct ProblemSummary {
    pub mode: String,
    pub n: usize,
    pub horizon: f64,
    pub m: usize,
    pub step: f64,
    pub scale: f64,
}

impl ProblemSummary {
    pub fn new(spec: &ProblemSpec, m: usize) -> Self {
        Self {
            mode: spec.mode.name().into(),
            n: spec.n(),
            horizon: spec.horizon,
            m,
            step: spec.horizon / m as f64,
            scale: spec.scale(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub tol_zero: f64,
    pub seed: u64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    pub problem: ProblemSummary,
    pub certificate: Certificate,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hypotheses: Option<HypothesisReport>,
    pub stages: Vec<StageRecord>,
}

impl SolveReport {
    pub fn new(
        spec: &ProblemSpec,
        seed: u64,
        result: &SolveResult,
        hypotheses: Option<&HypothesisReport>,
    ) -> Self {
        Self {
            status: result.status,
            tol_zero: result.tol_zero,
            seed,
            notes: result.notes.clone(),
            problem: ProblemSummary::new(spec, result.path.m()),
            certificate: result.certificate.clone(),
            hypotheses: hypotheses.cloned(),
            stages: result.stage_history.clone(),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        to_toml(self)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutput {
    pub passed: bool,
    pub problem: ProblemSummary,
    pub report: HypothesisReport,
}

pub fn to_toml<T: Serialize>(v: &T) -> Result<String> {
    toml::to_string(v).map_err(|e| crate::Error::config("report", e.to_string()))
}

/// `k,t_mid,fenchel,inclusion` for each interval.
pub fn write_residuals(c: &Certificate, out: &mut impl Write) -> Result<()> {
    writeln!(out, "k,t_mid,fenchel,inclusion")?;
    for (k, (f, i)) in c
        .interior_residuals
        .iter()
        .zip(&c.inclusion_residuals)
        .enumerate()
    {
        let t = (k as f64 + 0.5) * c.step;
        writeln!(out, "{k},{},{},{}", fmt_f64(t), fmt_f64(*f), fmt_f64(*i))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub outcome: std::result::Result<SweepOutcome, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub status: SolveStatus,
    pub action: f64,
    pub max_interior_residual: f64,
    pub max_prox_displacement: Option<f64>,
    pub max_derivative: f64,
    pub iters: usize,
}

impl SweepOutcome {
    pub fn from_result(r: &SolveResult) -> Self {
        let lambda_stage = r.stage_history.iter().rev().find(|s| s.kind == "lambda");
        Self {
            status: r.status,
            action: r.certificate.action_value,
            max_interior_residual: r.certificate.max_interior_residual,
            max_prox_displacement: lambda_stage.and_then(|s| s.max_prox_displacement),
            max_derivative: lambda_stage
                .unwrap_or_else(|| r.stage_history.last().expect("a stage"))
                .max_derivative,
            iters: r.stage_history.iter().map(|s| s.iters).sum(),
        }
    }
}

pub fn write_sweep(param: &str, rows: &[SweepRow], out: &mut impl Write) -> Result<()> {
    writeln!(
        out,
        "{param},status,action,max_interior_residual,max_prox_displacement,max_derivative,iters,error"
    )?;
    for r in rows {
        match &r.outcome {
            Ok(o) => writeln!(
                out,
                "{},{:?},{},{},{},{},{},",
                fmt_f64(r.value),
                o.status,
                fmt_f64(o.action),
                fmt_f64(o.max_interior_residual),
                o.max_prox_displacement.map(fmt_f64).unwrap_or_default(),
                fmt_f64(o.max_derivative),
                o.iters
            )?,
            Err(e) => writeln!(
                out,
                "{},Failed,,,,,,\"{}\"",
                fmt_f64(r.value),
                e.replace('"', "'")
            )?,
        }
    }
    Ok(())
}
