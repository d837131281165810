//! Continuation solver driving the discrete action to zero, and the linear
//! two-point problem `ṙ = δ₂s + f`, `-ṡ = δ₁r + g`, `r(0) = x`, `s(T) = y`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::action::{action, action_with_gradient, ActionBreakdown, ActionGradient, BoundaryMode};
use crate::certify::{certify, certify_with, Certificate};
use crate::error::{Error, Result};
use crate::hamiltonian::{Hamiltonian, StageHamiltonian};
use crate::minimize::{lbfgs, LbfgsOptions, Termination};
use crate::path::PathGrid;
use crate::problem::{HypothesisReport, ProblemSpec};
use crate::regularize::{infconv, perturb_epsilon, InfConvolved, DEFAULT_R};

#[derive(Debug, Clone)]
pub struct SolveParams {
    pub m: usize,
    pub eps_schedule: Vec<f64>,
    /// Non-empty selects inf-convolution stages instead of ε stages.
    pub lambda_schedule: Vec<f64>,
    pub r: f64,
    /// `None` means `1e-6 (1 + scale)`.
    pub tol_zero: Option<f64>,
    pub max_iters: usize,
    pub seed: u64,
    pub init: Option<PathGrid>,
    /// Finish with a stage on the unregularized `H` when its conjugate is finite.
    pub polish: bool,
}

impl Default for SolveParams {
    fn default() -> Self {
        Self {
            m: 100,
            eps_schedule: vec![1e-1, 1e-2, 1e-3, 1e-4],
            lambda_schedule: Vec::new(),
            r: DEFAULT_R,
            tol_zero: None,
            max_iters: 20_000,
            seed: 0,
            init: None,
            polish: true,
        }
    }
}

fn strictly_decreasing(name: &str, s: &[f64]) -> Result<()> {
    if s.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "{name} entries must be positive"
        )));
    }
    if s.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter(format!(
            "{name} must be strictly decreasing"
        )));
    }
    Ok(())
}

impl SolveParams {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidParameter("M must be at least 1".into()));
        }
        strictly_decreasing("eps_schedule", &self.eps_schedule)?;
        strictly_decreasing("lambda_schedule", &self.lambda_schedule)?;
        if let Some(t) = self.tol_zero {
            if !(t > 0.0) {
                return Err(Error::InvalidParameter("tol_zero must be positive".into()));
            }
        }
        if !self.lambda_schedule.is_empty() && !(self.r > 2.0) {
            return Err(Error::InvalidParameter(format!(
                "inf-convolution exponent r must exceed 2, got {}",
                self.r
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SolveStatus {
    Converged,
    StalledAboveTol,
    HypothesisFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageRecord {
    /// `eps`, `lambda`, or `exact`.
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parameter: Option<f64>,
    /// Action under the stage Hamiltonian.
    pub action: f64,
    /// Action under the unregularized Hamiltonian, when its conjugate is finite.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact_action: Option<f64>,
    pub iters: usize,
    pub termination: String,
    /// `max_k |dp_k| + |dq_k|`.
    pub max_derivative: f64,
    /// `max_k |(i(p_k), j(q_k)) - (p_k, q_k)|_∞` in inf-convolution stages.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_prox_displacement: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub path: PathGrid,
    pub certificate: Certificate,
    pub stage_history: Vec<StageRecord>,
    pub status: SolveStatus,
    pub tol_zero: f64,
    pub notes: Vec<String>,
}

enum Stage {
    Eps(f64),
    Lambda(f64),
    Exact,
}

fn build_stage(h: &Hamiltonian, stage: &Stage, r: f64) -> Result<Box<dyn StageHamiltonian>> {
    Ok(match stage {
        Stage::Eps(e) => Box::new(perturb_epsilon(h, *e)?),
        Stage::Lambda(l) => Box::new(infconv(h, *l, r)?),
        Stage::Exact => Box::new(h.clone()),
    })
}

/// Stage Hamiltonian for explicit smoothing parameters.
pub fn stage_hamiltonian(
    h: &Hamiltonian,
    eps: Option<f64>,
    lambda: Option<f64>,
    r: f64,
) -> Result<Box<dyn StageHamiltonian>> {
    match (eps, lambda) {
        (Some(_), Some(_)) => Err(Error::InvalidParameter(
            "eps and lambda smoothing are not combined; pass one".into(),
        )),
        (Some(e), None) => build_stage(h, &Stage::Eps(e), r),
        (None, Some(l)) => build_stage(h, &Stage::Lambda(l), r),
        (None, None) => build_stage(h, &Stage::Exact, r),
    }
}

#[derive(Debug, Clone)]
pub struct GradientOutput {
    pub breakdown: ActionBreakdown,
    pub gradient: ActionGradient,
    /// Set when an interval midpoint sat on a kink of the stage Hamiltonian
    /// and the free nodes were nudged before evaluating.
    pub perturbed: Option<String>,
}

fn has_kink(h: &dyn StageHamiltonian, g: &PathGrid) -> Result<Option<usize>> {
    let n = g.n();
    let d = g.interval_data();
    let mut z = vec![0.0; 2 * n];
    let mut grad = vec![0.0; 2 * n];
    for k in 0..g.m() {
        z[..n].copy_from_slice(&d.pbar[k * n..(k + 1) * n]);
        z[n..].copy_from_slice(&d.qbar[k * n..(k + 1) * n]);
        if !h.grad_unique(&z, &mut grad)? {
            return Ok(Some(k));
        }
    }
    Ok(None)
}

/// Exact gradient of the discrete stage action at `g`. If a midpoint lands on
/// a kink the free nodes are moved by `1e-9 (1 + |g|)` once and the gradient
/// is taken there instead.
pub fn gradient_action(
    spec: &ProblemSpec,
    g: &PathGrid,
    eps: Option<f64>,
    lambda: Option<f64>,
) -> Result<GradientOutput> {
    let h = stage_hamiltonian(&spec.hamiltonian, eps, lambda, DEFAULT_R)?;
    let mut perturbed = None;
    let mut at = g.clone();
    if let Some(k) = has_kink(h.as_ref(), g)? {
        let amp = 1e-9 * (1.0 + g.magnitude());
        let skip = if matches!(spec.mode, BoundaryMode::Cauchy { .. }) {
            g.n()
        } else {
            0
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for v in at.p_mut()[skip..].iter_mut() {
            *v += amp * rng.gen_range(-1.0..=1.0);
        }
        for v in at.q_mut()[skip..].iter_mut() {
            *v += amp * rng.gen_range(-1.0..=1.0);
        }
        perturbed = Some(format!(
            "interval {k} sits on a kink; gradient taken after a {amp:.1e} perturbation"
        ));
    }
    let (breakdown, gradient) = action_with_gradient(h.as_ref(), &spec.mode, &at)?;
    Ok(GradientOutput {
        breakdown,
        gradient,
        perturbed,
    })
}

/// Maps the optimizer's free variables to node values; in Cauchy mode node 0
/// is held at the initial condition.
struct Layout {
    horizon: f64,
    n: usize,
    m: usize,
    fixed: Option<(Vec<f64>, Vec<f64>)>,
}

impl Layout {
    fn first_free(&self) -> usize {
        usize::from(self.fixed.is_some())
    }

    fn free_len(&self) -> usize {
        2 * (self.m + 1 - self.first_free()) * self.n
    }

    fn to_path(&self, x: &[f64]) -> Result<PathGrid> {
        let len = (self.m + 1) * self.n;
        let skip = self.first_free() * self.n;
        let half = len - skip;
        let mut p = Vec::with_capacity(len);
        let mut q = Vec::with_capacity(len);
        if let Some((p0, q0)) = &self.fixed {
            p.extend_from_slice(p0);
            q.extend_from_slice(q0);
        }
        p.extend_from_slice(&x[..half]);
        q.extend_from_slice(&x[half..]);
        PathGrid::new(self.horizon, self.n, self.m, p, q)
    }

    fn gather(&self, g: &PathGrid) -> Vec<f64> {
        let skip = self.first_free() * self.n;
        [&g.p()[skip..], &g.q()[skip..]].concat()
    }

    fn grad(&self, grad: &ActionGradient, out: &mut [f64]) {
        let skip = self.first_free() * self.n;
        let half = grad.p.len() - skip;
        out[..half].copy_from_slice(&grad.p[skip..]);
        out[half..].copy_from_slice(&grad.q[skip..]);
    }
}

fn max_derivative(g: &PathGrid) -> f64 {
    let d = g.interval_data();
    let n = g.n();
    (0..g.m())
        .map(|k| {
            let a: f64 = d.dp[k * n..(k + 1) * n]
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt();
            let b: f64 = d.dq[k * n..(k + 1) * n]
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt();
            a + b
        })
        .fold(0.0, f64::max)
}

/// Largest node-wise distance between the path and its proximal points.
pub fn max_prox_displacement(hl: &InfConvolved, g: &PathGrid) -> Result<f64> {
    let mut worst = 0.0f64;
    for k in 0..=g.m() {
        let (i, j) = hl.prox_points(g.p_at(k), g.q_at(k))?;
        for (a, b) in i.iter().zip(g.p_at(k)).chain(j.iter().zip(g.q_at(k))) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(worst)
}

fn initial_path(spec: &ProblemSpec, params: &SolveParams) -> Result<PathGrid> {
    let n = spec.n();
    let mut g = match &params.init {
        Some(init) => {
            if init.n() != n || init.m() != params.m || init.horizon() != spec.horizon {
                return Err(Error::ShapeMismatch(
                    "initial guess does not match (N, M, T) of the problem".into(),
                ));
            }
            init.clone()
        }
        None => match &spec.mode {
            BoundaryMode::Cauchy { p0, q0 } => {
                PathGrid::from_fn(spec.horizon, n, params.m, |_| (p0.clone(), q0.clone()))?
            }
            _ => PathGrid::zeros(spec.horizon, n, params.m)?,
        },
    };
    let amp = 1e-6 * (1.0 + g.magnitude());
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let skip = if matches!(spec.mode, BoundaryMode::Cauchy { .. }) {
        n
    } else {
        0
    };
    for v in g.p_mut()[skip..].iter_mut() {
        *v += amp * rng.gen_range(-1.0..=1.0);
    }
    for v in g.q_mut()[skip..].iter_mut() {
        *v += amp * rng.gen_range(-1.0..=1.0);
    }
    if let BoundaryMode::Cauchy { p0, q0 } = &spec.mode {
        g.p_mut()[..n].copy_from_slice(p0);
        g.q_mut()[..n].copy_from_slice(q0);
    }
    Ok(g)
}

fn termination_name(t: Termination) -> &'static str {
    match t {
        Termination::GradientTolerance => "gradient-tolerance",
        Termination::TargetReached => "target-reached",
        Termination::IterationCap => "iteration-cap",
        Termination::LineSearchFailed => "line-search-failed",
        Termination::NoProgress => "no-progress",
    }
}

/// Minimizes the discrete action through the smoothing schedule.
pub fn solve(spec: &ProblemSpec, params: &SolveParams) -> Result<SolveResult> {
    params.validate()?;
    let h = &spec.hamiltonian;
    let exact_ok = h.has_conjugate();
    let mut stages: Vec<Stage> = if params.lambda_schedule.is_empty() {
        params.eps_schedule.iter().map(|e| Stage::Eps(*e)).collect()
    } else {
        params
            .lambda_schedule
            .iter()
            .map(|l| Stage::Lambda(*l))
            .collect()
    };
    if exact_ok && (params.polish || stages.is_empty()) {
        stages.push(Stage::Exact);
    }
    if stages.is_empty() {
        return Err(Error::NotCoercive(
            "H has no finite conjugate and the eps schedule is empty".into(),
        ));
    }
    let tol = params.tol_zero.unwrap_or(1e-6 * (1.0 + spec.scale()));
    let layout = Layout {
        horizon: spec.horizon,
        n: spec.n(),
        m: params.m,
        fixed: match &spec.mode {
            BoundaryMode::Cauchy { p0, q0 } => Some((p0.clone(), q0.clone())),
            _ => None,
        },
    };
    let mut path = initial_path(spec, params)?;
    let mut history = Vec::with_capacity(stages.len());
    let mut notes = Vec::new();
    let mut last_stage_h: Option<Box<dyn StageHamiltonian>> = None;
    let mut best: Option<(f64, PathGrid)> = None;
    let count = stages.len();
    for (idx, stage) in stages.iter().enumerate() {
        let final_stage = idx + 1 == count;
        let sh = build_stage(h, stage, params.r)?;
        let objective = |x: &[f64], out: &mut [f64]| -> Result<f64> {
            let g = layout.to_path(x)?;
            let (b, grad) = action_with_gradient(sh.as_ref(), &spec.mode, &g)?;
            layout.grad(&grad, out);
            Ok(b.total)
        };
        let opts = LbfgsOptions {
            max_iters: params.max_iters,
            grad_tol: if final_stage { 1e-13 } else { 1e-10 } * (1.0 + spec.scale()),
            ..LbfgsOptions::default()
        };
        debug_assert_eq!(layout.gather(&path).len(), layout.free_len());
        let min = lbfgs(objective, layout.gather(&path), &opts)?;
        path = layout.to_path(&min.x)?;
        let (kind, parameter) = match stage {
            Stage::Eps(e) => ("eps", Some(*e)),
            Stage::Lambda(l) => ("lambda", Some(*l)),
            Stage::Exact => ("exact", None),
        };
        let exact_action = if exact_ok {
            Some(action(h, &spec.mode, &path)?.total)
        } else {
            None
        };
        if let Some(v) = exact_action {
            if best.as_ref().is_none_or(|(b, _)| v <= *b) {
                best = Some((v, path.clone()));
            }
        }
        let max_prox_displacement = match stage {
            Stage::Lambda(l) => Some(max_prox_displacement(&infconv(h, *l, params.r)?, &path)?),
            _ => None,
        };
        if matches!(
            min.termination,
            Termination::LineSearchFailed | Termination::IterationCap
        ) {
            notes.push(format!(
                "stage {kind} {parameter:?} ended by {} at action {:.3e}",
                termination_name(min.termination),
                min.value
            ));
        }
        history.push(StageRecord {
            kind: kind.into(),
            parameter,
            action: min.value,
            exact_action,
            iters: min.iters,
            termination: termination_name(min.termination).into(),
            max_derivative: max_derivative(&path),
            max_prox_displacement,
        });
        last_stage_h = Some(sh);
    }
    if let Some((v, p)) = best {
        if v < action(h, &spec.mode, &path)?.total {
            notes.push(format!(
                "returning an earlier stage path with exact action {v:.3e}"
            ));
            path = p;
        }
    }
    let certificate = if exact_ok {
        certify(spec, &path, tol)
    } else {
        let sh = last_stage_h.expect("at least one stage");
        let label = match stages.last() {
            Some(Stage::Eps(e)) => format!("eps={e:e}"),
            Some(Stage::Lambda(l)) => format!("lambda={l:e}"),
            _ => "stage".into(),
        };
        let mut c = certify_with(sh.as_ref(), &label, spec, &path, tol);
        c.notes
            .push("H has no finite conjugate; certified under the final stage smoothing".into());
        c
    };
    let status = if certificate.action_value <= tol {
        SolveStatus::Converged
    } else {
        SolveStatus::StalledAboveTol
    };
    Ok(SolveResult {
        path,
        certificate,
        stage_history: history,
        status,
        tol_zero: tol,
        notes,
    })
}

/// Like [`solve`], but a failed hypothesis report turns a non-converged run
/// into `HypothesisFailed`. A passing certificate stands on its own.
pub fn solve_checked(
    spec: &ProblemSpec,
    params: &SolveParams,
    report: &HypothesisReport,
) -> Result<SolveResult> {
    let mut res = solve(spec, params)?;
    if !report.passed() {
        res.notes.push(format!(
            "hypothesis checks failed: {}",
            report
                .failures()
                .map(|c| c.name.as_str())
                .collect::<Vec<_>>()
                .join(", ")
        ));
        if res.status != SolveStatus::Converged {
            res.status = SolveStatus::HypothesisFailed;
        }
    }
    Ok(res)
}

/// Solves `ṙ = δ₂s + f`, `-ṡ = δ₁r + g`, `r(0) = x`, `s(T) = y` with `f`, `g`
/// given at the `M + 1` nodes (row-major `(M+1) × N`) and interpolated
/// linearly between them. Returns `(r, s)` as the `(p, q)` of a path.
///
/// Each interval is propagated exactly with the exponential of the augmented
/// system; the unknown `s(0)` is found by shooting, one scalar per coordinate.
#[allow(clippy::too_many_arguments)]
pub fn solve_linear_bvp(
    delta1: f64,
    delta2: f64,
    f: &[f64],
    g: &[f64],
    x: &[f64],
    y: &[f64],
    horizon: f64,
    m: usize,
) -> Result<PathGrid> {
    let n = x.len();
    if y.len() != n || f.len() != (m + 1) * n || g.len() != (m + 1) * n {
        return Err(Error::ShapeMismatch(
            "forcing must have (M+1)·N entries and x, y must have N".into(),
        ));
    }
    if m == 0 || !(horizon > 0.0) {
        return Err(Error::InvalidParameter("need M >= 1 and T > 0".into()));
    }
    let h = horizon / m as f64;
    // state (r, s, u_r, u_s, c_r, c_s): z' = A z + u, u' = c, c' = 0
    let mut b = DMatrix::<f64>::zeros(6, 6);
    b[(0, 1)] = delta2;
    b[(1, 0)] = -delta1;
    b[(0, 2)] = 1.0;
    b[(1, 3)] = 1.0;
    b[(2, 4)] = 1.0;
    b[(3, 5)] = 1.0;
    let e = (b * h).exp();
    let phi = [[e[(0, 0)], e[(0, 1)]], [e[(1, 0)], e[(1, 1)]]];
    let mut r = vec![0.0; (m + 1) * n];
    let mut s = vec![0.0; (m + 1) * n];
    for i in 0..n {
        // forcing of z' is (f, -g)
        let fr = |k: usize| f[k * n + i];
        let fs = |k: usize| -g[k * n + i];
        let step = |z: [f64; 2], k: usize| -> [f64; 2] {
            let aug = [
                z[0],
                z[1],
                fr(k),
                fs(k),
                (fr(k + 1) - fr(k)) / h,
                (fs(k + 1) - fs(k)) / h,
            ];
            let mut out = [0.0; 2];
            for (row, o) in out.iter_mut().enumerate() {
                *o = (0..6).map(|c| e[(row, c)] * aug[c]).sum();
            }
            out
        };
        // s(T) is affine in s(0): s_T = a + b·s(0)
        let mut particular = [x[i], 0.0];
        let mut homogeneous = [0.0, 1.0];
        for k in 0..m {
            particular = step(particular, k);
            homogeneous = [
                phi[0][0] * homogeneous[0] + phi[0][1] * homogeneous[1],
                phi[1][0] * homogeneous[0] + phi[1][1] * homogeneous[1],
            ];
        }
        let pivot = homogeneous[1];
        if pivot.abs() < 1e-10 {
            return Err(Error::Resonance {
                delta1,
                delta2,
                horizon,
                pivot,
            });
        }
        let s0 = (y[i] - particular[1]) / pivot;
        let mut z = [x[i], s0];
        r[i] = z[0];
        s[i] = z[1];
        for k in 0..m {
            z = step(z, k);
            r[(k + 1) * n + i] = z[0];
            s[(k + 1) * n + i] = z[1];
        }
        s[m * n + i] = y[i];
    }
    PathGrid::new(horizon, n, m, r, s)
}
