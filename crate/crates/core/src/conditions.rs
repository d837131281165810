//! Hypothesis checks: growth bounds, horizon thresholds, and coercivity of the
//! boundary potentials.
//!
//! Growth constants and liminf conditions cannot be proved by sampling; checks
//! that rely on samples report `VerifiedOnSamples`, never a proof. Threshold
//! comparisons between numbers are exact and report `Verified`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::convex::{ConvexFn, WorkingBox};
use crate::error::{Error, Result};
use crate::hamiltonian::Hamiltonian;

/// User-certified growth constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthCert {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Exponent of the `r`-growth bound, when claimed.
    pub r: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CheckStatus {
    #[serde(rename = "VERIFIED")]
    Verified,
    #[serde(rename = "VERIFIED-ON-SAMPLES")]
    VerifiedOnSamples,
    #[serde(rename = "FAILED")]
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub status: CheckStatus,
    /// Smallest slack found; negative on failure.
    pub margin: f64,
    pub detail: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<f64>>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.status != CheckStatus::Failed
    }

    fn exact(name: &str, margin: f64, detail: String, witness: Vec<f64>) -> Self {
        let ok = margin > 0.0;
        Self {
            name: name.into(),
            status: if ok {
                CheckStatus::Verified
            } else {
                CheckStatus::Failed
            },
            margin,
            detail,
            witness: (!ok).then_some(witness),
        }
    }
}

/// Smallest sample count accepted by the sampling checks.
pub const MIN_SAMPLES: usize = 1000;

/// Width of the outer shell used for liminf estimates, as a fraction of its radius.
pub const SHELL_FRACTION: f64 = 0.2;

/// Relative pass margin for liminf estimates.
pub const LIMINF_MARGIN: f64 = 0.05;

fn sample_points(bx: &WorkingBox, samples: usize, seed: u64) -> Vec<Vec<f64>> {
    let d = bx.dim();
    let mut pts = Vec::with_capacity(samples + (1 << d.min(10)) + 1);
    let center: Vec<f64> = bx
        .lo
        .iter()
        .zip(&bx.hi)
        .map(|(a, b)| 0.0f64.clamp(*a, *b))
        .collect();
    for i in 0..d {
        for end in [bx.lo[i], bx.hi[i]] {
            let mut x = center.clone();
            x[i] = end;
            pts.push(x);
        }
    }
    pts.push(center);
    if d <= 10 {
        for mask in 0..(1usize << d) {
            pts.push(
                (0..d)
                    .map(|i| {
                        if mask >> i & 1 == 1 {
                            bx.hi[i]
                        } else {
                            bx.lo[i]
                        }
                    })
                    .collect(),
            );
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        pts.push(bx.sample(&mut rng));
    }
    pts
}

fn sq_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Samples `-α ≤ H(z) ≤ (β/2)|z|² + γ` over `bx` (in stacked coordinates).
pub fn check_subquadratic(
    h: &Hamiltonian,
    cert: &GrowthCert,
    bx: &WorkingBox,
    samples: usize,
    seed: u64,
) -> Result<CheckReport> {
    if samples < MIN_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "subquadratic check needs at least {MIN_SAMPLES} samples, got {samples}"
        )));
    }
    if bx.dim() != 2 * h.n() {
        return Err(Error::DimensionMismatch {
            expected: 2 * h.n(),
            got: bx.dim(),
        });
    }
    let mut worst_lower = (f64::INFINITY, Vec::new());
    let mut worst_upper = (f64::INFINITY, Vec::new());
    for z in sample_points(bx, samples, seed) {
        let v = h.function().eval(&z)?;
        let tol = 1e-12 * (1.0 + v.abs());
        let lower = v + cert.alpha + tol;
        let upper = 0.5 * cert.beta * sq_norm(&z) + cert.gamma - v + tol;
        if lower < worst_lower.0 {
            worst_lower = (lower, z.clone());
        }
        if upper < worst_upper.0 {
            worst_upper = (upper, z);
        }
    }
    let name = "subquadratic growth";
    let (margin, witness, which) = if worst_lower.0 < worst_upper.0 {
        (worst_lower.0, worst_lower.1, "lower bound -alpha <= H")
    } else {
        (
            worst_upper.0,
            worst_upper.1,
            "upper bound H <= beta/2 |z|^2 + gamma",
        )
    };
    Ok(if margin >= 0.0 {
        CheckReport {
            name: name.into(),
            status: CheckStatus::VerifiedOnSamples,
            margin,
            detail: format!(
                "both bounds hold on {} sampled points; worst slack {margin:.3e} ({which}); sampled, not proved",
                samples
            ),
            witness: None,
        }
    } else {
        CheckReport {
            name: name.into(),
            status: CheckStatus::Failed,
            margin,
            detail: format!("{which} violated by {:.3e}", -margin),
            witness: Some(witness),
        }
    })
}

/// Samples the `r`-growth bound `H(p, q) ≤ β(|p|^r + |q|^r + 1)`.
pub fn check_r_growth(
    h: &Hamiltonian,
    cert: &GrowthCert,
    bx: &WorkingBox,
    samples: usize,
    seed: u64,
) -> Result<CheckReport> {
    let r = cert
        .r
        .ok_or_else(|| Error::InvalidParameter("r-growth check needs an exponent r".into()))?;
    if samples < MIN_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "growth check needs at least {MIN_SAMPLES} samples, got {samples}"
        )));
    }
    let n = h.n();
    let mut worst = (f64::INFINITY, Vec::new());
    for z in sample_points(bx, samples, seed) {
        let v = h.function().eval(&z)?;
        let bound =
            cert.beta * (sq_norm(&z[..n]).sqrt().powf(r) + sq_norm(&z[n..]).sqrt().powf(r) + 1.0);
        let slack = bound - v + 1e-12 * (1.0 + v.abs());
        if slack < worst.0 {
            worst = (slack, z);
        }
    }
    let name = "r-growth";
    Ok(if worst.0 >= 0.0 {
        CheckReport {
            name: name.into(),
            status: CheckStatus::VerifiedOnSamples,
            margin: worst.0,
            detail: format!(
                "H <= beta(|p|^{r} + |q|^{r} + 1) on sampled points; sampled, not proved"
            ),
            witness: None,
        }
    } else {
        CheckReport {
            name: name.into(),
            status: CheckStatus::Failed,
            margin: worst.0,
            detail: format!("growth bound violated by {:.3e}", -worst.0),
            witness: Some(worst.1),
        }
    })
}

/// Largest admissible β for horizon `T`: `1 / (2 max(2T², 1))`.
pub fn beta_threshold(horizon: f64) -> f64 {
    1.0 / (2.0 * (2.0 * horizon * horizon).max(1.0))
}

/// Exact comparison `β < beta_threshold(T)`.
pub fn check_beta(beta: f64, horizon: f64) -> CheckReport {
    let t = beta_threshold(horizon);
    CheckReport::exact(
        "beta below horizon threshold",
        t - beta,
        format!("beta = {beta}, threshold 1/(2 max(2T^2, 1)) = {t} at T = {horizon}"),
        vec![beta, horizon],
    )
}

/// Minimum of `ψ(x)/|x|²` over the outer shell `ρ(1 - SHELL_FRACTION) ≤ |x| ≤ ρ`,
/// returned with the minimizing sample.
pub fn shell_ratio(
    psi: &ConvexFn,
    radius: f64,
    samples: usize,
    seed: u64,
) -> Result<(f64, Vec<f64>)> {
    let d = psi.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = (f64::INFINITY, vec![0.0; d]);
    let mut consider = |x: Vec<f64>| -> Result<()> {
        let ratio = psi.eval(&x)? / sq_norm(&x);
        if ratio < best.0 {
            best = (ratio, x);
        }
        Ok(())
    };
    // axis directions first, then random directions
    for i in 0..d {
        for sign in [-1.0, 1.0] {
            for rho in [radius * (1.0 - SHELL_FRACTION), radius] {
                let mut x = vec![0.0; d];
                x[i] = sign * rho;
                consider(x)?;
            }
        }
    }
    for _ in 0..samples {
        let dir: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let len = sq_norm(&dir).sqrt();
        if len < 1e-3 {
            continue;
        }
        let rho = rng.gen_range(radius * (1.0 - SHELL_FRACTION)..=radius);
        consider(dir.iter().map(|v| v * rho / len).collect())?;
    }
    Ok(best)
}

/// Estimates `liminf ψ(x)/|x|² > threshold` on the outer shell, requiring a
/// relative margin of [`LIMINF_MARGIN`].
pub fn check_liminf(
    name: &str,
    psi: &ConvexFn,
    threshold: f64,
    radius: f64,
    samples: usize,
    seed: u64,
) -> Result<CheckReport> {
    if radius < 10.0 {
        return Err(Error::InvalidParameter(format!(
            "shell radius must be at least 10, got {radius}"
        )));
    }
    let (ratio, witness) = shell_ratio(psi, radius, samples, seed)?;
    let needed = threshold + LIMINF_MARGIN * threshold.abs();
    let margin = ratio - needed;
    let detail = format!(
        "min psi/|x|^2 on shell [{:.3}, {radius}] is {ratio:.6}, needs > {threshold:.6} with {:.0}% margin; liminf is sampled, not proved",
        radius * (1.0 - SHELL_FRACTION),
        LIMINF_MARGIN * 100.0
    );
    Ok(if margin > 0.0 {
        CheckReport {
            name: name.into(),
            status: CheckStatus::VerifiedOnSamples,
            margin,
            detail,
            witness: None,
        }
    } else {
        CheckReport {
            name: name.into(),
            status: CheckStatus::Failed,
            margin,
            detail,
            witness: Some(witness),
        }
    })
}

/// Coercivity of a boundary potential relative to `2T`.
pub fn check_psi_coercivity(
    psi: &ConvexFn,
    horizon: f64,
    radius: f64,
    samples: usize,
    seed: u64,
) -> Result<CheckReport> {
    check_liminf(
        "potential coercivity (ratio > 2T)",
        psi,
        2.0 * horizon,
        radius,
        samples,
        seed,
    )
}

/// Which potential must carry the `2T` coercivity condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CoerciveIndex {
    One,
    Two,
    Either,
}

/// Coercivity requirement for the connecting problem, on the chosen index.
pub fn check_connecting_coercivity(
    psi1: &ConvexFn,
    psi2: &ConvexFn,
    horizon: f64,
    which: CoerciveIndex,
    radius: f64,
    samples: usize,
    seed: u64,
) -> Result<CheckReport> {
    let a = check_psi_coercivity(psi1, horizon, radius, samples, seed)?;
    let b = check_psi_coercivity(psi2, horizon, radius, samples, seed.wrapping_add(1))?;
    let mut pick = match which {
        CoerciveIndex::One => a,
        CoerciveIndex::Two => b,
        CoerciveIndex::Either => {
            if a.margin >= b.margin {
                a
            } else {
                b
            }
        }
    };
    pick.name = match which {
        CoerciveIndex::One => "psi1 coercivity (ratio > 2T)".into(),
        CoerciveIndex::Two => "psi2 coercivity (ratio > 2T)".into(),
        CoerciveIndex::Either => "psi1 or psi2 coercivity (ratio > 2T)".into(),
    };
    Ok(pick)
}

/// Thresholds and checks of the semi-convex theorem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SemiConvexReport {
    /// `ε_i = 1 - 4T²δ_i²`.
    pub eps: [f64; 2],
    /// `A(δ_i, T) = max(2T², 1) - 2δ_iT²`.
    pub a: [f64; 2],
    /// `¼ min(ε_i / A_i)`.
    pub beta_bound: f64,
    /// Required lower bounds for `liminf ψ_1/|x|²` and `liminf ψ_2/|x|²`.
    pub psi_thresholds: [f64; 2],
    pub checks: Vec<CheckReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl SemiConvexReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckReport::passed)
    }
}

/// Computes the semi-convex thresholds without touching the potentials.
pub fn semiconvex_thresholds(
    delta1: f64,
    delta2: f64,
    beta: f64,
    horizon: f64,
) -> ([f64; 2], [f64; 2], f64, [f64; 2]) {
    let t2 = horizon * horizon;
    let eps = [
        1.0 - 4.0 * t2 * delta1 * delta1,
        1.0 - 4.0 * t2 * delta2 * delta2,
    ];
    let base = (2.0 * t2).max(1.0);
    let a = [base - 2.0 * delta1 * t2, base - 2.0 * delta2 * t2];
    let beta_bound = 0.25 * (eps[0] / a[0]).min(eps[1] / a[1]);
    let psi = [
        horizon * delta2 * delta2 / beta + 2.0 * horizon * (1.0 - delta2),
        horizon * delta1 * delta1 / beta - 2.0 * horizon * delta1,
    ];
    (eps, a, beta_bound, psi)
}

#[allow(clippy::too_many_arguments)]
pub fn check_semiconvex(
    delta1: f64,
    delta2: f64,
    beta: f64,
    horizon: f64,
    psi1: &ConvexFn,
    psi2: &ConvexFn,
    radius: f64,
    samples: usize,
    seed: u64,
) -> Result<SemiConvexReport> {
    let (eps, a, beta_bound, psi) = semiconvex_thresholds(delta1, delta2, beta, horizon);
    let mut checks = Vec::new();
    let admissible = a[0] > 0.0 && a[1] > 0.0;
    checks.push(CheckReport::exact(
        "beta below semi-convex bound",
        if admissible { beta_bound - beta } else { -1.0 },
        format!(
            "beta = {beta}, bound 1/4 min(eps_i/A_i) = {beta_bound} with eps = {eps:?}, A = {a:?}"
        ),
        vec![beta, delta1, delta2, horizon],
    ));
    let limit = 1.0 / (2.0 * horizon);
    for (i, d) in [delta1, delta2].into_iter().enumerate() {
        checks.push(CheckReport::exact(
            &format!("|delta{}| below 1/(2T)", i + 1),
            limit - d.abs(),
            format!("|delta{}| = {}, limit 1/(2T) = {limit}", i + 1, d.abs()),
            vec![d, horizon],
        ));
    }
    checks.push(check_liminf(
        "psi1 semi-convex coercivity",
        psi1,
        psi[0],
        radius,
        samples,
        seed,
    )?);
    checks.push(check_liminf(
        "psi2 semi-convex coercivity",
        psi2,
        psi[1],
        radius,
        samples,
        seed.wrapping_add(1),
    )?);
    let note = (delta1 == 0.0 && delta2 == 0.0).then(|| {
        format!(
            "with delta = 0 the bound is {beta_bound}, half of the convex-case threshold {}",
            beta_threshold(horizon)
        )
    });
    Ok(SemiConvexReport {
        eps,
        a,
        beta_bound,
        psi_thresholds: psi,
        checks,
        note,
    })
}

/// Midpoint convexity on random pairs in the working box.
pub fn check_convexity(name: &str, f: &ConvexFn, samples: usize, seed: u64) -> Result<CheckReport> {
    let bx = f.working_box();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = (f64::INFINITY, Vec::new());
    for _ in 0..samples {
        let x = bx.sample(&mut rng);
        let y = bx.sample(&mut rng);
        let t: f64 = rng.gen_range(0.0..=1.0);
        let mid: Vec<f64> = x
            .iter()
            .zip(&y)
            .map(|(a, b)| t * a + (1.0 - t) * b)
            .collect();
        let (fx, fy, fm) = (f.eval(&x)?, f.eval(&y)?, f.eval(&mid)?);
        let slack = t * fx + (1.0 - t) * fy - fm + 1e-9 * (1.0 + fx.abs() + fy.abs());
        if slack < worst.0 {
            worst = (slack, mid);
        }
    }
    Ok(if worst.0 >= 0.0 {
        CheckReport {
            name: name.into(),
            status: CheckStatus::VerifiedOnSamples,
            margin: worst.0,
            detail: format!("convexity inequality holds on {samples} random chords"),
            witness: None,
        }
    } else {
        CheckReport {
            name: name.into(),
            status: CheckStatus::Failed,
            margin: worst.0,
            detail: format!("convexity violated by {:.3e}", -worst.0),
            witness: Some(worst.1),
        }
    })
}
