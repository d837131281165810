#![allow(dead_code)]

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use selfdual::action::BoundaryMode;
use selfdual::config::ProblemConfig;
use selfdual::path::PathGrid;
use selfdual::problem::ProblemSpec;

pub fn config(text: &str) -> ProblemConfig {
    ProblemConfig::from_str_in(text, Path::new(".")).unwrap()
}

/// Shifted-ψ₁ connecting problem: `H = 0.05(p² + q²)`, `ψ₁ = ½|x - 1|²`,
/// `ψ₂ = ½|x|²`, `T = 0.2`.
pub const P1: &str = r#"
[problem]
n = 1
horizon = 0.2
hamiltonian = "0.1*sq(pq)"
[boundary]
mode = "connecting"
psi1 = "sq(x, [1.0])"
psi2 = "sq(x)"
[growth]
alpha = 0.0
beta = 0.1
gamma = 0.0
"#;

/// Coupled two-dimensional quadratic, `β = λ_max(A) ≈ 0.31`.
pub const COUPLED: &str = r#"
[problem]
n = 2
horizon = 0.2
hamiltonian = "quad(pq, [[0.2, 0.0, 0.05, 0.0], [0.0, 0.1, 0.0, 0.03], [0.05, 0.0, 0.1, 0.0], [0.0, 0.03, 0.0, 0.3]])"
[boundary]
mode = "connecting"
psi1 = "sq(x, [1.0, -0.5])"
psi2 = "sq(x, [0.3, 0.0])"
[growth]
alpha = 0.0
beta = 0.32
gamma = 0.0
"#;

/// Quadratic with a linear tilt in `q`.
pub const TILTED: &str = r#"
[problem]
n = 1
horizon = 0.5
hamiltonian = "0.08*sq(pq) + lin(q, [0.05])"
[boundary]
mode = "connecting"
psi1 = "sq(x)"
psi2 = "2.4*sq(x, [-0.5])"
[growth]
alpha = 0.02
beta = 0.1
gamma = 0.0625
"#;

pub const HARMONIC: &str = r#"
[problem]
n = 1
horizon = 1.0
hamiltonian = "sq(pq)"
[boundary]
mode = "cauchy"
p0 = [1.0]
q0 = [0.0]
[solver]
m = 200
"#;

/// Quartic plus quadratic, conjugated numerically.
pub const QUARTIC: &str = r#"
[problem]
n = 1
horizon = 1.0
hamiltonian = "0.25*pow(p, 4) + 0.25*pow(q, 4) + sq(pq)"
[boundary]
mode = "cauchy"
p0 = [1.0]
q0 = [0.0]
[growth]
alpha = 0.0
beta = 1.0
gamma = 1.0
r = 4.0
"#;

/// `δ₁ = δ₂ = -0.1`, `T = 1`, passing the semi-convex conditions.
pub const SEMI: &str = r#"
[problem]
n = 1
horizon = 1.0
hamiltonian = "0.05*sq(pq)"
[boundary]
mode = "semiconvex"
psi1 = "6*sq(x, [0.5])"
psi2 = "sq(x)"
delta1 = -0.1
delta2 = -0.1
[growth]
alpha = 0.0
beta = 0.05
gamma = 0.0
"#;

/// The semi-convex problem with the deltas set to zero.
pub fn semi_zero() -> String {
    SEMI.replace("delta1 = -0.1", "delta1 = 0.0")
        .replace("delta2 = -0.1", "delta2 = 0.0")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random grid for `spec`; in Cauchy mode node 0 holds the initial condition.
pub fn random_path(spec: &ProblemSpec, m: usize, amp: f64, rng: &mut ChaCha8Rng) -> PathGrid {
    let n = spec.n();
    let len = (m + 1) * n;
    let mut p: Vec<f64> = (0..len).map(|_| amp * rng.gen_range(-1.0..1.0)).collect();
    let mut q: Vec<f64> = (0..len).map(|_| amp * rng.gen_range(-1.0..1.0)).collect();
    if let BoundaryMode::Cauchy { p0, q0 } = &spec.mode {
        p[..n].copy_from_slice(p0);
        q[..n].copy_from_slice(q0);
    }
    PathGrid::new(spec.horizon, n, m, p, q).unwrap()
}

/// Classical RK4 with `steps` equal steps from `t0` to `t1`.
pub fn rk4(
    f: &dyn Fn(f64, &[f64]) -> Vec<f64>,
    y0: &[f64],
    t0: f64,
    t1: f64,
    steps: usize,
) -> Vec<f64> {
    let h = (t1 - t0) / steps as f64;
    let mut y = y0.to_vec();
    let add = |y: &[f64], k: &[f64], c: f64| -> Vec<f64> {
        y.iter().zip(k).map(|(a, b)| a + c * b).collect()
    };
    for i in 0..steps {
        let t = t0 + i as f64 * h;
        let k1 = f(t, &y);
        let k2 = f(t + 0.5 * h, &add(&y, &k1, 0.5 * h));
        let k3 = f(t + 0.5 * h, &add(&y, &k2, 0.5 * h));
        let k4 = f(t + h, &add(&y, &k3, h));
        for j in 0..y.len() {
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
    }
    y
}

/// `(∂₁H, ∂₂H)` at `(p, q)`.
pub type GradH = dyn Fn(&[f64], &[f64]) -> (Vec<f64>, Vec<f64>);

/// Hand-written derivatives of a connecting problem.
pub struct Flow<'a> {
    pub n: usize,
    pub horizon: f64,
    pub grad_h: &'a GradH,
    pub grad_psi1: &'a dyn Fn(&[f64]) -> Vec<f64>,
    pub grad_psi2: &'a dyn Fn(&[f64]) -> Vec<f64>,
    pub deltas: (f64, f64),
}

impl Flow<'_> {
    fn rhs(&self, y: &[f64]) -> Vec<f64> {
        let n = self.n;
        let (p, q) = y.split_at(n);
        let (hp, hq) = (self.grad_h)(p, q);
        let (d1, d2) = self.deltas;
        let mut out = vec![0.0; 2 * n];
        for i in 0..n {
            out[i] = hq[i] + d1 * q[i];
            out[n + i] = -(hp[i] + d2 * p[i]);
        }
        out
    }

    fn start(&self, p0: &[f64]) -> Vec<f64> {
        [p0.to_vec(), (self.grad_psi1)(p0)].concat()
    }

    fn end_residual(&self, p0: &[f64]) -> Vec<f64> {
        let n = self.n;
        let y = rk4(
            &|_, y| self.rhs(y),
            &self.start(p0),
            0.0,
            self.horizon,
            4000,
        );
        let g = (self.grad_psi2)(&y[n..]);
        (0..n).map(|i| y[i] + g[i]).collect()
    }

    /// Newton on `p(0)` with a finite-difference Jacobian of the end
    /// condition `-p(T) = ∇ψ₂(q(T))`.
    pub fn shoot(&self) -> Vec<f64> {
        let n = self.n;
        let mut x = vec![0.0; n];
        for _ in 0..30 {
            let f = self.end_residual(&x);
            if f.iter().all(|v| v.abs() < 1e-14) {
                break;
            }
            let mut jac = DMatrix::zeros(n, n);
            for j in 0..n {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[j] += 1e-6;
                xm[j] -= 1e-6;
                let (fp, fm) = (self.end_residual(&xp), self.end_residual(&xm));
                for i in 0..n {
                    jac[(i, j)] = (fp[i] - fm[i]) / 2e-6;
                }
            }
            let step = jac.lu().solve(&DVector::from_vec(f)).unwrap();
            for i in 0..n {
                x[i] -= step[i];
            }
        }
        x
    }

    /// The oracle trajectory sampled at the nodes of an `M`-interval grid.
    pub fn sample(&self, p0: &[f64], m: usize) -> PathGrid {
        let n = self.n;
        let h = self.horizon / m as f64;
        let mut y = self.start(p0);
        let mut p = y[..n].to_vec();
        let mut q = y[n..].to_vec();
        for k in 0..m {
            y = rk4(
                &|_, y| self.rhs(y),
                &y,
                k as f64 * h,
                (k + 1) as f64 * h,
                200,
            );
            p.extend_from_slice(&y[..n]);
            q.extend_from_slice(&y[n..]);
        }
        PathGrid::new(self.horizon, n, m, p, q).unwrap()
    }
}

pub fn p1_flow() -> Flow<'static> {
    Flow {
        n: 1,
        horizon: 0.2,
        grad_h: &|p, q| (vec![0.1 * p[0]], vec![0.1 * q[0]]),
        grad_psi1: &|x| vec![x[0] - 1.0],
        grad_psi2: &|x| vec![x[0]],
        deltas: (0.0, 0.0),
    }
}

pub fn coupled_flow() -> Flow<'static> {
    Flow {
        n: 2,
        horizon: 0.2,
        grad_h: &|p, q| {
            let z = [p[0], p[1], q[0], q[1]];
            let a = [
                [0.2, 0.0, 0.05, 0.0],
                [0.0, 0.1, 0.0, 0.03],
                [0.05, 0.0, 0.1, 0.0],
                [0.0, 0.03, 0.0, 0.3],
            ];
            let g: Vec<f64> = a
                .iter()
                .map(|r| r.iter().zip(&z).map(|(x, y)| x * y).sum())
                .collect();
            (g[..2].to_vec(), g[2..].to_vec())
        },
        grad_psi1: &|x| vec![x[0] - 1.0, x[1] + 0.5],
        grad_psi2: &|x| vec![x[0] - 0.3, x[1]],
        deltas: (0.0, 0.0),
    }
}

pub fn tilted_flow() -> Flow<'static> {
    Flow {
        n: 1,
        horizon: 0.5,
        grad_h: &|p, q| (vec![0.08 * p[0]], vec![0.08 * q[0] + 0.05]),
        grad_psi1: &|x| vec![x[0]],
        grad_psi2: &|x| vec![2.4 * (x[0] + 0.5)],
        deltas: (0.0, 0.0),
    }
}

pub fn semi_flow() -> Flow<'static> {
    Flow {
        n: 1,
        horizon: 1.0,
        grad_h: &|p, q| (vec![0.05 * p[0]], vec![0.05 * q[0]]),
        grad_psi1: &|x| vec![6.0 * (x[0] - 0.5)],
        grad_psi2: &|x| vec![x[0]],
        deltas: (-0.1, -0.1),
    }
}
