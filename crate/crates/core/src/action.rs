//! Discrete action functionals and the functional Lagrangian.
//!
//! Interval `k` contributes the Fenchel-Young defect
//!
//! ```text
//! φ_k = H(p̄, q̄) + H*(-dq - δ₂p̄, dp - δ₁q̄) + δ₁|q̄|² + δ₂|p̄|² + dq·p̄ - dp·q̄
//! ```
//!
//! which is nonnegative term by term. The boundary pieces
//! `ψ₂(q_M) + ψ₂*(-p_M) + p_M·q_M` and `ψ₁(p_0) + ψ₁*(q_0) - p_0·q_0` are
//! also Fenchel-Young defects, and summation by parts makes their sum with
//! `h Σ φ_k` equal to the `2 q̇·p` form of the action.

use crate::convex::ConvexFn;
use crate::error::{Error, Result};
use crate::hamiltonian::{Hamiltonian, StageHamiltonian};
use crate::path::{dot, PathGrid};

/// A boundary potential together with its conjugate.
#[derive(Debug, Clone)]
pub struct Potential {
    f: ConvexFn,
    conj: ConvexFn,
}

impl Potential {
    pub fn new(f: ConvexFn) -> Result<Self> {
        let conj = f.conjugate()?;
        Ok(Self { f, conj })
    }

    pub fn function(&self) -> &ConvexFn {
        &self.f
    }

    pub fn conjugate(&self) -> &ConvexFn {
        &self.conj
    }

    pub fn dim(&self) -> usize {
        self.f.dim()
    }

    /// `ψ(x) + ψ*(y) - x·y`, with gradients in `x` and `y` written out.
    fn defect(&self, x: &[f64], y: &[f64], gx: &mut [f64], gy: &mut [f64]) -> Result<(f64, f64)> {
        let a = self.f.value_grad(x, gx)?;
        let b = self.conj.value_grad(y, gy)?;
        let c = dot(x, y);
        for i in 0..x.len() {
            gx[i] -= y[i];
            gy[i] -= x[i];
        }
        Ok((a + b - c, a.abs() + b.abs() + c.abs()))
    }
}

#[derive(Debug, Clone)]
pub enum BoundaryMode {
    Connecting {
        psi1: Potential,
        psi2: Potential,
    },
    Cauchy {
        p0: Vec<f64>,
        q0: Vec<f64>,
    },
    SemiConvex {
        psi1: Potential,
        psi2: Potential,
        delta1: f64,
        delta2: f64,
    },
}

impl BoundaryMode {
    pub fn deltas(&self) -> (f64, f64) {
        match self {
            BoundaryMode::SemiConvex { delta1, delta2, .. } => (*delta1, *delta2),
            _ => (0.0, 0.0),
        }
    }

    pub fn potentials(&self) -> Option<(&Potential, &Potential)> {
        match self {
            BoundaryMode::Connecting { psi1, psi2 }
            | BoundaryMode::SemiConvex { psi1, psi2, .. } => Some((psi1, psi2)),
            BoundaryMode::Cauchy { .. } => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BoundaryMode::Connecting { .. } => "connecting",
            BoundaryMode::Cauchy { .. } => "cauchy",
            BoundaryMode::SemiConvex { .. } => "semiconvex",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionBreakdown {
    pub total: f64,
    /// `φ_k` per interval, not yet multiplied by `h`.
    pub interior: Vec<f64>,
    pub boundary_start: f64,
    pub boundary_end: f64,
    /// Sum of absolute values of every assembled term; the natural scale for
    /// rounding tolerances.
    pub magnitude: f64,
}

/// Gradient with respect to the node values, laid out like the path.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionGradient {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

impl ActionGradient {
    pub fn inf_norm(&self) -> f64 {
        self.p
            .iter()
            .chain(&self.q)
            .fold(0.0f64, |a, v| a.max(v.abs()))
    }
}

fn check_potentials(psi1: &Potential, psi2: &Potential, n: usize) -> Result<()> {
    for psi in [psi1, psi2] {
        if psi.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: psi.dim(),
            });
        }
    }
    Ok(())
}

/// Shared assembly for every mode. `grad` receives `∂/∂p_k`, `∂/∂q_k`.
pub(crate) fn assemble(
    h: &dyn StageHamiltonian,
    potentials: Option<(&Potential, &Potential)>,
    deltas: (f64, f64),
    g: &PathGrid,
    mut grad: Option<&mut ActionGradient>,
) -> Result<ActionBreakdown> {
    let n = g.n();
    if h.n() != n {
        return Err(Error::DimensionMismatch {
            expected: h.n(),
            got: n,
        });
    }
    if let Some((a, b)) = potentials {
        check_potentials(a, b, n)?;
    }
    let (d1, d2) = deltas;
    let m = g.m();
    let step = g.h();
    let d = g.interval_data();
    let mut z = vec![0.0; 2 * n];
    let mut y = vec![0.0; 2 * n];
    let mut gz = vec![0.0; 2 * n];
    let mut gy = vec![0.0; 2 * n];
    let mut interior = Vec::with_capacity(m);
    let mut sum = 0.0;
    let mut magnitude = 0.0;
    if let Some(gr) = grad.as_deref_mut() {
        gr.p.clear();
        gr.p.resize((m + 1) * n, 0.0);
        gr.q.clear();
        gr.q.resize((m + 1) * n, 0.0);
    }
    for k in 0..m {
        let r = k * n..(k + 1) * n;
        let (dp, dq, pb, qb) = (
            &d.dp[r.clone()],
            &d.dq[r.clone()],
            &d.pbar[r.clone()],
            &d.qbar[r],
        );
        for i in 0..n {
            z[i] = pb[i];
            z[n + i] = qb[i];
            y[i] = -dq[i] - d2 * pb[i];
            y[n + i] = dp[i] - d1 * qb[i];
        }
        let hv = h.value_grad(&z, &mut gz)?;
        let hc = h.conj_value_grad(&y, &mut gy)?;
        let quad = d1 * dot(qb, qb) + d2 * dot(pb, pb);
        let cross = dot(dq, pb) - dot(dp, qb);
        let phi = hv + hc + quad + cross;
        magnitude +=
            step * (hv.abs() + hc.abs() + quad.abs() + dot(dq, pb).abs() + dot(dp, qb).abs());
        interior.push(phi);
        sum += phi;
        if let Some(gr) = grad.as_deref_mut() {
            for i in 0..n {
                let (gp, gq, ga, gb) = (gz[i], gz[n + i], gy[i], gy[n + i]);
                let d_pbar = gp - d2 * ga + 2.0 * d2 * pb[i] + dq[i];
                let d_qbar = gq - d1 * gb + 2.0 * d1 * qb[i] - dp[i];
                let d_dq = -ga + pb[i];
                let d_dp = gb - qb[i];
                gr.p[k * n + i] += 0.5 * step * d_pbar - d_dp;
                gr.p[(k + 1) * n + i] += 0.5 * step * d_pbar + d_dp;
                gr.q[k * n + i] += 0.5 * step * d_qbar - d_dq;
                gr.q[(k + 1) * n + i] += 0.5 * step * d_qbar + d_dq;
            }
        }
    }
    let (mut start, mut end) = (0.0, 0.0);
    if let Some((psi1, psi2)) = potentials {
        let mut ga = vec![0.0; n];
        let mut gb = vec![0.0; n];
        // ψ₂(q_M) + ψ₂*(-p_M) + p_M·q_M
        let minus_pm: Vec<f64> = g.p_at(m).iter().map(|v| -v).collect();
        let (v, mag) = psi2.defect(g.q_at(m), &minus_pm, &mut ga, &mut gb)?;
        end = v;
        magnitude += mag;
        if let Some(gr) = grad.as_deref_mut() {
            for i in 0..n {
                gr.q[m * n + i] += ga[i];
                gr.p[m * n + i] -= gb[i];
            }
        }
        // ψ₁(p_0) + ψ₁*(q_0) - p_0·q_0
        let (v, mag) = psi1.defect(g.p_at(0), g.q_at(0), &mut ga, &mut gb)?;
        start = v;
        magnitude += mag;
        if let Some(gr) = grad {
            for i in 0..n {
                gr.p[i] += ga[i];
                gr.q[i] += gb[i];
            }
        }
    }
    Ok(ActionBreakdown {
        total: step * sum + start + end,
        interior,
        boundary_start: start,
        boundary_end: end,
        magnitude,
    })
}

/// Discrete `I` for the connecting problem.
pub fn action_i(
    h: &Hamiltonian,
    psi1: &Potential,
    psi2: &Potential,
    g: &PathGrid,
) -> Result<ActionBreakdown> {
    h.conjugate()?;
    assemble(h, Some((psi1, psi2)), (0.0, 0.0), g, None)
}

fn check_initial(g: &PathGrid, p0: &[f64], q0: &[f64]) -> Result<()> {
    let n = g.n();
    if p0.len() != n || q0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: p0.len().min(q0.len()),
        });
    }
    let expected = [p0, q0].concat();
    let found = [g.p_at(0), g.q_at(0)].concat();
    let tol = 1e-12 * (1.0 + expected.iter().fold(0.0f64, |a, v| a.max(v.abs())));
    if expected
        .iter()
        .zip(&found)
        .any(|(a, b)| (a - b).abs() > tol)
    {
        return Err(Error::InitialCondition { expected, found });
    }
    Ok(())
}

/// Discrete `J` for the Cauchy problem; the path must start at `(p0, q0)`.
pub fn action_j(h: &Hamiltonian, g: &PathGrid, p0: &[f64], q0: &[f64]) -> Result<ActionBreakdown> {
    check_initial(g, p0, q0)?;
    h.conjugate()?;
    assemble(h, None, (0.0, 0.0), g, None)
}

/// Discrete action of the semi-convex problem.
pub fn action_semiconvex(
    h: &Hamiltonian,
    psi1: &Potential,
    psi2: &Potential,
    delta1: f64,
    delta2: f64,
    g: &PathGrid,
) -> Result<ActionBreakdown> {
    h.conjugate()?;
    assemble(h, Some((psi1, psi2)), (delta1, delta2), g, None)
}

/// Action of any mode under a (possibly regularized) stage Hamiltonian.
pub fn action(
    h: &dyn StageHamiltonian,
    mode: &BoundaryMode,
    g: &PathGrid,
) -> Result<ActionBreakdown> {
    if let BoundaryMode::Cauchy { p0, q0 } = mode {
        check_initial(g, p0, q0)?;
    }
    assemble(h, mode.potentials(), mode.deltas(), g, None)
}

/// Action and its exact gradient with respect to every node value. In Cauchy
/// mode the entries for node 0 are still reported; callers holding them fixed
/// simply ignore them.
pub fn action_with_gradient(
    h: &dyn StageHamiltonian,
    mode: &BoundaryMode,
    g: &PathGrid,
) -> Result<(ActionBreakdown, ActionGradient)> {
    let mut grad = ActionGradient {
        p: Vec::new(),
        q: Vec::new(),
    };
    let b = assemble(h, mode.potentials(), mode.deltas(), g, Some(&mut grad))?;
    Ok((b, grad))
}

/// Discrete functional Lagrangian `L(r, s; p, q)` with `g = (p, q)` and
/// `rs = (r, s)`.
pub fn lagrangian_l(
    h: &Hamiltonian,
    psi1: &Potential,
    psi2: &Potential,
    g: &PathGrid,
    rs: &PathGrid,
) -> Result<f64> {
    lagrangian_l_semiconvex(h, psi1, psi2, 0.0, 0.0, g, rs)
}

/// `L` for the semi-convex system; `δ = 0` gives [`lagrangian_l`].
pub fn lagrangian_l_semiconvex(
    h: &Hamiltonian,
    psi1: &Potential,
    psi2: &Potential,
    delta1: f64,
    delta2: f64,
    g: &PathGrid,
    rs: &PathGrid,
) -> Result<f64> {
    if !g.same_shape(rs) {
        return Err(Error::ShapeMismatch(
            "(r, s) and (p, q) must share the grid".into(),
        ));
    }
    let n = g.n();
    if h.n() != n {
        return Err(Error::DimensionMismatch {
            expected: h.n(),
            got: n,
        });
    }
    check_potentials(psi1, psi2, n)?;
    let hc = h.conjugate()?;
    let m = g.m();
    let step = g.h();
    let a = g.interval_data();
    let b = rs.interval_data();
    let mut y = vec![0.0; 2 * n];
    let mut w = vec![0.0; 2 * n];
    let mut sum = 0.0;
    for k in 0..m {
        let mut pairing = 0.0;
        let mut quad = 0.0;
        let mut cross = 0.0;
        for i in 0..n {
            let j = k * n + i;
            y[i] = -a.dq[j] - delta2 * a.pbar[j];
            y[n + i] = a.dp[j] - delta1 * a.qbar[j];
            w[i] = -b.dq[j] - delta2 * b.pbar[j];
            w[n + i] = b.dp[j] - delta1 * b.qbar[j];
            pairing += w[i] * a.pbar[j] + w[n + i] * a.qbar[j];
            quad += delta1 * a.qbar[j] * a.qbar[j] + delta2 * a.pbar[j] * a.pbar[j];
            cross += a.dq[j] * a.pbar[j] - a.dp[j] * a.qbar[j];
        }
        sum += hc.eval(&y)? - hc.eval(&w)? + pairing + quad + cross;
    }
    let (pm, qm, sm) = (g.p_at(m), g.q_at(m), rs.q_at(m));
    let (p0, q0, r0) = (g.p_at(0), g.q_at(0), rs.p_at(0));
    let ends = dot(pm, qm) - dot(p0, q0);
    let boundary = -dot(pm, sm) + psi2.function().eval(qm)? - psi2.function().eval(sm)?
        + dot(r0, q0)
        + psi1.function().eval(p0)?
        - psi1.function().eval(r0)?;
    Ok(step * sum + ends + boundary)
}
