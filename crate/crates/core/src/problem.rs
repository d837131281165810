//! A complete problem statement and its hypothesis report.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::action::BoundaryMode;
use crate::conditions::{self, CheckReport, CheckStatus, CoerciveIndex, GrowthCert};
use crate::convex::WorkingBox;
use crate::error::{Error, Result};
use crate::hamiltonian::Hamiltonian;

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub hamiltonian: Hamiltonian,
    pub horizon: f64,
    pub mode: BoundaryMode,
    pub growth: Option<GrowthCert>,
    pub coercive_index: CoerciveIndex,
    /// Half-width of the box sampled by the growth checks.
    pub box_radius: f64,
}

impl ProblemSpec {
    pub fn new(hamiltonian: Hamiltonian, horizon: f64, mode: BoundaryMode) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        let n = hamiltonian.n();
        match &mode {
            BoundaryMode::Cauchy { p0, q0 } => {
                if p0.len() != n || q0.len() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        got: p0.len().min(q0.len()),
                    });
                }
            }
            other => {
                let (a, b) = other.potentials().expect("potential modes");
                if a.dim() != n || b.dim() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        got: a.dim().min(b.dim()),
                    });
                }
            }
        }
        Ok(Self {
            hamiltonian,
            horizon,
            mode,
            growth: None,
            coercive_index: CoerciveIndex::Either,
            box_radius: 5.0,
        })
    }

    pub fn with_growth(mut self, growth: GrowthCert) -> Self {
        self.growth = Some(growth);
        self
    }

    pub fn n(&self) -> usize {
        self.hamiltonian.n()
    }

    /// Magnitude used to scale default tolerances.
    pub fn scale(&self) -> f64 {
        let n = self.n();
        let zero = vec![0.0; n];
        let h0 = self.hamiltonian.eval(&zero, &zero).unwrap_or(0.0).abs();
        match &self.mode {
            BoundaryMode::Cauchy { p0, q0 } => {
                let h = self.hamiltonian.eval(p0, q0).unwrap_or(0.0).abs();
                let sq: f64 = p0.iter().chain(q0).map(|v| v * v).sum();
                h.max(h0).max(sq) * self.horizon.max(1.0)
            }
            other => {
                let (a, b) = other.potentials().expect("potential modes");
                let a0 = a.function().eval(&zero).unwrap_or(0.0).abs();
                let b0 = b.function().eval(&zero).unwrap_or(0.0).abs();
                h0 * self.horizon + a0 + b0
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub checks: Vec<CheckReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl HypothesisReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckReport::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckReport> {
        self.checks
            .iter()
            .filter(|c| c.status == CheckStatus::Failed)
    }
}

/// Minimum of `H` over the outer shell must exceed `H` at the origin; a
/// sampled stand-in for `H → ∞`.
fn check_growth_at_infinity(
    h: &Hamiltonian,
    radius: f64,
    samples: usize,
    seed: u64,
) -> Result<CheckReport> {
    let d = 2 * h.n();
    let f = h.function();
    let h0 = f.eval(&vec![0.0; d])?;
    let mut worst = (f64::INFINITY, Vec::new());
    let bx = WorkingBox::cube(d, radius);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let x = bx.sample(&mut rng);
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-3 {
            continue;
        }
        let scaled: Vec<f64> = x.iter().map(|v| v * radius / norm).collect();
        let v = f.eval(&scaled)? - h0;
        if v < worst.0 {
            worst = (v, scaled);
        }
    }
    Ok(if worst.0 > 0.0 {
        CheckReport {
            name: "H grows at infinity".into(),
            status: CheckStatus::VerifiedOnSamples,
            margin: worst.0,
            detail: format!(
                "min H - H(0) on the sphere of radius {radius} is {:.6e}; sampled, not proved",
                worst.0
            ),
            witness: None,
        }
    } else {
        CheckReport {
            name: "H grows at infinity".into(),
            status: CheckStatus::Failed,
            margin: worst.0,
            detail: format!("H does not exceed H(0) on the sphere of radius {radius}"),
            witness: Some(worst.1),
        }
    })
}

/// Runs every check that applies to the problem's mode.
pub fn check_hypotheses(
    spec: &ProblemSpec,
    samples: usize,
    shell_radius: f64,
    seed: u64,
) -> Result<HypothesisReport> {
    let n = spec.n();
    let mut checks = Vec::new();
    let mut notes = Vec::new();
    let bx = WorkingBox::cube(2 * n, spec.box_radius);
    let hf = spec.hamiltonian.function().clone().with_box(bx.clone())?;
    checks.push(conditions::check_convexity("H convex", &hf, samples, seed)?);
    if let Some((a, b)) = spec.mode.potentials() {
        checks.push(conditions::check_convexity(
            "psi1 convex",
            a.function(),
            samples,
            seed,
        )?);
        checks.push(conditions::check_convexity(
            "psi2 convex",
            b.function(),
            samples,
            seed,
        )?);
    }
    let growth = spec.growth;
    match &spec.mode {
        BoundaryMode::Connecting { psi1, psi2 } => {
            match growth {
                Some(cert) => {
                    checks.push(conditions::check_subquadratic(
                        &spec.hamiltonian,
                        &cert,
                        &bx,
                        samples,
                        seed,
                    )?);
                    checks.push(conditions::check_beta(cert.beta, spec.horizon));
                }
                None => {
                    notes.push("no growth certificate given; subquadratic bound not checked".into())
                }
            }
            checks.push(conditions::check_connecting_coercivity(
                psi1.function(),
                psi2.function(),
                spec.horizon,
                spec.coercive_index,
                shell_radius,
                samples,
                seed,
            )?);
        }
        BoundaryMode::Cauchy { .. } => {
            checks.push(check_growth_at_infinity(
                &spec.hamiltonian,
                spec.box_radius,
                samples,
                seed,
            )?);
            match growth {
                Some(cert) if cert.r.is_some() => {
                    checks.push(conditions::check_r_growth(
                        &spec.hamiltonian,
                        &cert,
                        &bx,
                        samples,
                        seed,
                    )?);
                }
                Some(cert) => {
                    checks.push(conditions::check_subquadratic(
                        &spec.hamiltonian,
                        &cert,
                        &bx,
                        samples,
                        seed,
                    )?);
                }
                None => notes.push("no growth certificate given; growth bound not checked".into()),
            }
        }
        BoundaryMode::SemiConvex {
            psi1,
            psi2,
            delta1,
            delta2,
        } => {
            let cert = growth.ok_or_else(|| {
                Error::config(
                    "growth",
                    "semi-convex problems need a growth certificate (beta)",
                )
            })?;
            checks.push(conditions::check_subquadratic(
                &spec.hamiltonian,
                &cert,
                &bx,
                samples,
                seed,
            )?);
            let rep = conditions::check_semiconvex(
                *delta1,
                *delta2,
                cert.beta,
                spec.horizon,
                psi1.function(),
                psi2.function(),
                shell_radius,
                samples,
                seed,
            )?;
            notes.push(format!(
                "eps = {:?}, A = {:?}, beta bound = {}, psi thresholds = {:?}",
                rep.eps, rep.a, rep.beta_bound, rep.psi_thresholds
            ));
            if let Some(note) = rep.note {
                notes.push(note);
            }
            checks.extend(rep.checks);
        }
    }
    Ok(HypothesisReport { checks, notes })
}
