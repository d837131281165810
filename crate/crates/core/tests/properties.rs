mod common;

use proptest::prelude::*;
use selfdual::action::{action, lagrangian_l, lagrangian_l_semiconvex, BoundaryMode, Potential};
use selfdual::certify::certify;
use selfdual::convex::ConvexFn;
use selfdual::hamiltonian::{Hamiltonian, StageHamiltonian};
use selfdual::path::PathGrid;
use selfdual::regularize::{infconv, perturb_epsilon};

use common::*;

fn grid(n: usize, horizon: f64) -> impl Strategy<Value = PathGrid> {
    (1usize..10).prop_flat_map(move |m| {
        let len = (m + 1) * n;
        (
            prop::collection::vec(-3.0f64..3.0, len),
            prop::collection::vec(-3.0f64..3.0, len),
        )
            .prop_map(move |(p, q)| PathGrid::new(horizon, n, m, p, q).unwrap())
    })
}

fn grid_pair(n: usize, horizon: f64) -> impl Strategy<Value = (PathGrid, PathGrid)> {
    (1usize..10).prop_flat_map(move |m| {
        let len = (m + 1) * n;
        prop::collection::vec(-3.0f64..3.0, 4 * len).prop_map(move |v| {
            let g =
                PathGrid::new(horizon, n, m, v[..len].to_vec(), v[len..2 * len].to_vec()).unwrap();
            let rs = PathGrid::new(
                horizon,
                n,
                m,
                v[2 * len..3 * len].to_vec(),
                v[3 * len..].to_vec(),
            )
            .unwrap();
            (g, rs)
        })
    })
}

fn shifted(g: &PathGrid, p0: &[f64], q0: &[f64]) -> PathGrid {
    let n = g.n();
    let mut g = g.clone();
    g.p_mut()[..n].copy_from_slice(p0);
    g.q_mut()[..n].copy_from_slice(q0);
    g
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fenchel_young_at_returned_subgradient(x in prop::collection::vec(-4.0f64..4.0, 2)) {
        for f in [
            ConvexFn::half_square(2),
            ConvexFn::power_norm(2, 4.0, 0.25).unwrap(),
            ConvexFn::scaled_square(2, 3.0, &[0.5, -1.0]).unwrap(),
        ] {
            let s = f.subgradient(&x).unwrap();
            let gap = f.eval(&x).unwrap() + f.conjugate().unwrap().eval(&s.value).unwrap()
                - x[0] * s.value[0] - x[1] * s.value[1];
            prop_assert!(gap.abs() <= 1e-9 * (1.0 + f.eval(&x).unwrap().abs()), "gap {gap}");
        }
    }

    #[test]
    fn prox_is_optimal(x in prop::collection::vec(-4.0f64..4.0, 2), step in 0.05f64..3.0) {
        let f = ConvexFn::power_norm(2, 4.0, 0.25).unwrap();
        let u = f.prox(&x, step).unwrap();
        // optimality: (x - u)/step ∈ ∂f(u)
        let g = f.subgradient(&u).unwrap().value;
        for i in 0..2 {
            prop_assert!(((x[i] - u[i]) / step - g[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn actions_are_nonnegative(g in grid(1, 0.7)) {
        for text in [P1, TILTED, SEMI] {
            let spec = config(text).spec;
            let g = PathGrid::new(spec.horizon, 1, g.m(), g.p().to_vec(), g.q().to_vec()).unwrap();
            let b = action(&spec.hamiltonian, &spec.mode, &g).unwrap();
            prop_assert!(b.total >= -1e-10 * (1.0 + b.magnitude));
            prop_assert!(b.interior.iter().all(|v| *v >= -1e-12 * (1.0 + b.magnitude)));
        }
        let spec = config(HARMONIC).spec;
        let g = shifted(&PathGrid::new(1.0, 1, g.m(), g.p().to_vec(), g.q().to_vec()).unwrap(), &[1.0], &[0.0]);
        let b = action(&spec.hamiltonian, &spec.mode, &g).unwrap();
        prop_assert!(b.total >= -1e-10 * (1.0 + b.magnitude));
    }

    #[test]
    fn sbp_is_exact(g in grid(2, 1.3)) {
        prop_assert!(g.sbp_check() <= 1e-12 * (1.0 + g.magnitude().powi(2) * (g.m() * g.n()) as f64));
    }

    #[test]
    fn lagrangian_is_diagonal_zero_and_below_action((g, rs) in grid_pair(1, 0.2)) {
        let spec = config(P1).spec;
        let (psi1, psi2) = spec.mode.potentials().unwrap();
        let h = &spec.hamiltonian;
        let i = action(h, &spec.mode, &g).unwrap();
        prop_assert!(lagrangian_l(h, psi1, psi2, &g, &g).unwrap().abs() <= 1e-10 * (1.0 + i.magnitude));
        prop_assert!(lagrangian_l(h, psi1, psi2, &g, &rs).unwrap() <= i.total + 1e-10 * (1.0 + i.magnitude));
        let semi = config(SEMI).spec;
        let (a, b) = semi.mode.potentials().unwrap();
        let gs = PathGrid::new(1.0, 1, g.m(), g.p().to_vec(), g.q().to_vec()).unwrap();
        let d = lagrangian_l_semiconvex(&semi.hamiltonian, a, b, -0.1, -0.1, &gs, &gs).unwrap();
        prop_assert!(d.abs() <= 1e-10 * (1.0 + i.magnitude));
    }

    #[test]
    fn certificate_residuals_are_nonnegative_and_deterministic(g in grid(2, 0.2)) {
        let spec = config(COUPLED).spec;
        let a = certify(&spec, &g, 1e-6);
        let b = certify(&spec, &g, 1e-6);
        prop_assert_eq!(&a, &b);
        let scale = 1.0 + a.magnitude;
        prop_assert!(a.interior_residuals.iter().all(|v| *v >= -1e-12 * scale));
        prop_assert!(a.boundary_start_residual >= -1e-12 * scale && a.boundary_end_residual >= -1e-12 * scale);
        let recomposed = g.h() * a.interior_residuals.iter().sum::<f64>()
            + a.boundary_start_residual + a.boundary_end_residual;
        prop_assert!((recomposed - a.action_value).abs() <= 1e-12 * scale);
    }

    #[test]
    fn smoothing_bounds(z in prop::collection::vec(-3.0f64..3.0, 2), eps in 0.001f64..1.0, lambda in 0.05f64..1.0) {
        let h = Hamiltonian::new(1, ConvexFn::sum(vec![
            ConvexFn::power_norm(2, 4.0, 0.25).unwrap(),
            ConvexFn::half_square(2),
        ]).unwrap()).unwrap();
        let base = h.eval(&z[..1], &z[1..]).unwrap();
        let he = perturb_epsilon(&h, eps).unwrap();
        let diff = he.value(&z).unwrap() - base - 0.5 * eps * (z[0] * z[0] + z[1] * z[1]);
        prop_assert!(diff.abs() <= 1e-12 * (1.0 + base));
        let hl = infconv(&h, lambda, 4.0).unwrap();
        let v = hl.value(&z).unwrap();
        prop_assert!(v <= base + 1e-10);
        let attained = hl.attained_value(&z[..1], &z[1..]).unwrap();
        prop_assert!((attained - v).abs() <= 1e-9 * (1.0 + v.abs()));
    }
}

#[test]
fn constant_path_where_h_is_minimal_has_zero_residuals() {
    let spec = config(HARMONIC).spec;
    let spec = selfdual::problem::ProblemSpec::new(
        spec.hamiltonian.clone(),
        1.0,
        BoundaryMode::Cauchy {
            p0: vec![0.0],
            q0: vec![0.0],
        },
    )
    .unwrap();
    for m in [50, 100, 200, 400] {
        let c = certify(&spec, &PathGrid::zeros(1.0, 1, m).unwrap(), 1e-12);
        assert!(c.passed);
        assert_eq!(c.max_interior_residual, 0.0);
    }
}

#[test]
fn midpoint_solution_of_a_linear_flow_certifies_to_rounding() {
    // H = a·p + b·q + (c/2)|z|²: the flow is linear and the midpoint recursion
    // is an exact zero of every interval defect
    let (a, b, c) = (0.3, -0.7, 1e-3);
    let h = Hamiltonian::new(
        1,
        ConvexFn::sum(vec![
            ConvexFn::affine(vec![a, b], 0.0),
            ConvexFn::scaled_square(2, c, &[0.0, 0.0]).unwrap(),
        ])
        .unwrap(),
    )
    .unwrap();
    let mode = BoundaryMode::Cauchy {
        p0: vec![0.0],
        q0: vec![0.0],
    };
    let spec = selfdual::problem::ProblemSpec::new(h, 1.0, mode).unwrap();
    for m in [50, 100, 200, 400] {
        let dt = 1.0 / m as f64;
        let (mut p, mut q) = (vec![0.0], vec![0.0]);
        for k in 0..m {
            // (p' - p)/dt = b + c(q + q')/2, -(q' - q)/dt = a + c(p + p')/2
            let (pk, qk) = (p[k], q[k]);
            let e = 0.5 * dt * c;
            let r1 = pk + dt * b + e * qk;
            let r2 = qk - dt * a - e * pk;
            let det = 1.0 + e * e;
            p.push((r1 + e * r2) / det);
            q.push((r2 - e * r1) / det);
        }
        let g = PathGrid::new(1.0, 1, m, p, q).unwrap();
        let cert = certify(&spec, &g, 1e-10);
        assert!(
            cert.max_interior_residual <= 1e-11,
            "{}",
            cert.max_interior_residual
        );
    }
}

#[test]
fn potential_defect_vanishes_on_the_graph() {
    let psi = Potential::new(ConvexFn::scaled_square(1, 2.0, &[0.5]).unwrap()).unwrap();
    let x = 1.3;
    let y = 2.0 * (x - 0.5);
    let d = psi.function().eval(&[x]).unwrap() + psi.conjugate().eval(&[y]).unwrap() - x * y;
    assert!(d.abs() < 1e-14);
}
