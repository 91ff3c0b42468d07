use super::*;
use crate::grid::{build_grid, DomainSpec};
use crate::operators::gradient;

fn grid(n: usize, horizon: f64, steps: usize) -> Grid<f64> {
    build_grid(&DomainSpec::unit_square(n, horizon, steps)).unwrap()
}

fn bump(x: [f64; 3], c: [f64; 2], r: f64) -> f64 {
    let d2 = ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)) / (r * r);
    if d2 < 1.0 {
        (-1.0 / (1.0 - d2)).exp()
    } else {
        0.0
    }
}

#[test]
fn zero_data_gives_zero_solution() {
    let g = grid(16, 1.0, 8);
    let a = Coefficient::analytic(|x: [f64; 3], _| [0.1 * x[1], 0.05, 0.0]);
    let b = Coefficient::analytic(|x: [f64; 3], t: f64| [0.1 * x[0] * t, 0.1 * x[1], 0.0]);
    let sol = solve_forward(&ForwardProblem::new(g, Coefficient::Zero).with_coefficients(a, b)).unwrap();
    for (v, p) in sol.velocity.snapshots.iter().zip(&sol.pressure.snapshots) {
        assert_eq!(v.max_abs(), 0.0);
        assert_eq!(p.max_abs(), 0.0);
    }
}

#[test]
fn unknown_catalog_id() {
    let err = manufactured_problem("no-such", &grid(16, 1.0, 8)).unwrap_err();
    assert!(err.to_string().contains("unknown manufactured solution"));
}

#[test]
fn oscillating_source_nonzero_at_t0() {
    let g = grid(16, 1.0, 8);
    let m = manufactured_problem("oscillating", &g).unwrap();
    let f = m.problem.source.mac(&g.geom, 4, 0.5);
    assert!(f.max_abs() > 1.0);
    // the velocity itself vanishes at t0 = T/2
    assert!(m.exact.velocity.snapshots[4].max_abs() < 1e-12);
}

#[test]
fn steady_exact_residual_is_second_order() {
    let res = |n: usize| {
        let g = grid(n, 0.1, 8);
        let m = manufactured_problem("steady-advected", &g).unwrap();
        let r = residual_check(&m.exact, &m.problem).unwrap();
        r.iter().map(|s| s.momentum).fold(0.0, f64::max)
    };
    let (r16, r32, r64) = (res(16), res(32), res(64));
    assert!(r32 < r16 && r64 < r32);
    let q = r32 / r64;
    assert!(q > 3.0 && q < 5.0, "{r16} {r32} {r64}");
}

#[test]
fn solver_output_satisfies_its_own_scheme() {
    let g = grid(16, 0.5, 16);
    let m = manufactured_problem("oscillating", &g).unwrap();
    let sol = solve_forward(&m.problem).unwrap();
    let res = residual_check(&sol, &m.problem).unwrap();
    let dt = g.time.dt;
    for r in &res {
        let v = l2_norm(&sol.velocity.snapshots[r.step - 1]);
        let f = l2_norm(&m.problem.source.mac(&g.geom, r.step, g.time.time(r.step)));
        assert!(r.momentum <= 1e-9 * (v / dt + f), "step {}: {}", r.step, r.momentum);
    }
    assert!(sol.max_relative_divergence() <= 1e-9);
    for v in &sol.velocity.snapshots {
        let mut z = v.clone();
        z.enforce_boundary();
        assert_eq!(&z, v);
    }
}

#[test]
fn residual_linear_in_perturbation() {
    let g = grid(16, 0.5, 8);
    let m = manufactured_problem("mix-1", &g).unwrap();
    let sol = solve_forward(&m.problem).unwrap();
    let noise = Field::mac_from_fn(g.geom, Boundary::Dirichlet, |x| [(7.0 * x[0] + 3.0 * x[1]).sin(), (5.0 * x[0] * x[1]).cos(), 0.0]);
    let perturbed = |delta: f64| {
        let mut s = sol.clone();
        s.velocity = s.velocity.map_snapshots(|k, v| {
            let mut w = v.clone();
            if k == 4 {
                w.axpy(delta, &noise).unwrap();
            }
            w
        });
        residual_check(&s, &m.problem).unwrap()[4].momentum
    };
    let (r1, r2) = (perturbed(1e-3), perturbed(2e-3));
    assert!((r2 / r1 - 2.0).abs() < 1e-3, "{r1} {r2}");
}

#[test]
fn zero_solution_residual_is_source() {
    let g = grid(16, 0.5, 8);
    let m = manufactured_problem("oscillating", &g).unwrap();
    let mut zero = m.exact.clone();
    zero.velocity = zero.velocity.map_snapshots(|_, v| v.zeros_like());
    zero.pressure = zero.pressure.map_snapshots(|_, p| p.zeros_like());
    let res = residual_check(&zero, &m.problem).unwrap();
    for r in res {
        let mut f = m.problem.source.mac(&g.geom, r.step, g.time.time(r.step)).with_bc(Boundary::Dirichlet);
        f.enforce_boundary();
        assert!((r.unsplit - l2_norm(&f)).abs() <= 1e-12 * l2_norm(&f));
    }
}

#[test]
fn gradient_source_is_absorbed_by_pressure() {
    let g = grid(32, 1.0, 16);
    let psi = Field::scalar_from_fn(g.geom, Stagger::center(), Boundary::Neumann, |x| bump(x, [0.4, 0.55], 0.2));
    let gpsi = gradient(&psi).unwrap();
    let series = TimeSeriesField::from_fn(17, g.time.dt, 0.0, |t| gpsi.scaled(1.0 + t * t)).unwrap();
    let sol = solve_forward(&ForwardProblem::new(g, Coefficient::Series(series))).unwrap();
    let vmax = sol.velocity.snapshots.iter().map(|v| v.max_abs()).fold(0.0, f64::max);
    assert!(vmax < 1e-9, "{vmax}");
    // pressure matches ψ up to its mean
    let p = &sol.pressure.snapshots[16];
    let mean = psi.comps[0].data.iter().sum::<f64>() / psi.comps[0].data.len() as f64;
    let scale = 1.0 + 1.0;
    let err = p.comps[0].data.iter().zip(&psi.comps[0].data).map(|(a, b)| (a - scale * (b - mean)).abs()).fold(0.0, f64::max);
    assert!(err < 1e-8, "{err}");
}

#[test]
fn linear_in_source() {
    let g = grid(16, 0.5, 8);
    let f1 = Coefficient::analytic(|x: [f64; 3], t: f64| [(3.0 * x[1]).sin() * (1.0 + t), x[0] * x[0], 0.0]);
    let f2 = Coefficient::analytic(|x: [f64; 3], t: f64| [x[0] * x[1], (2.0 * x[0] + t).cos(), 0.0]);
    let sum = Coefficient::analytic(|x: [f64; 3], t: f64| [(3.0 * x[1]).sin() * (1.0 + t) + x[0] * x[1], x[0] * x[0] + (2.0 * x[0] + t).cos(), 0.0]);
    let a = Coefficient::analytic(|x: [f64; 3], _| [0.2 * x[1], -0.1, 0.0]);
    let b = Coefficient::analytic(|x: [f64; 3], _| [0.1 * x[0], 0.1 * x[0] * x[1], 0.0]);
    let solve = |f: Coefficient<f64>| solve_forward(&ForwardProblem::new(g.clone(), f).with_coefficients(a.clone(), b.clone())).unwrap();
    let (s1, s2, s12) = (solve(f1), solve(f2), solve(sum));
    for k in 0..9 {
        let combo = s1.velocity.snapshots[k].add(&s2.velocity.snapshots[k]).unwrap();
        let diff = combo.sub(&s12.velocity.snapshots[k]).unwrap();
        assert!(l2_norm(&diff) <= 1e-8 * l2_norm(&s12.velocity.snapshots[k]).max(1e-30));
    }
}

#[test]
fn stability_bound_enforced() {
    let g = grid(16, 1.0, 8);
    let a = Coefficient::analytic(|_, _: f64| [5.0, 0.0, 0.0]);
    let err = solve_forward(&ForwardProblem::new(g, Coefficient::Zero).with_coefficients(a, Coefficient::Zero)).unwrap_err();
    assert!(err.to_string().contains("stability bound"), "{err}");
}

#[test]
fn rejects_divergent_initial_velocity() {
    let g = grid(16, 1.0, 8);
    let v0 = Field::mac_from_fn(g.geom, Boundary::Dirichlet, |x| [x[0] * (1.0 - x[0]), 0.0, 0.0]);
    assert!(solve_forward(&ForwardProblem::new(g, Coefficient::Zero).with_initial(v0)).is_err());
}

#[test]
fn space_convergence_on_steady_problem() {
    let err = |n: usize| {
        let g = grid(n, 0.1, 8);
        let m = manufactured_problem("steady-advected", &g).unwrap();
        let sol = solve_forward(&m.problem).unwrap();
        space_time_error(&sol.velocity, &m.exact.velocity).unwrap()
    };
    let (e16, e32, e64) = (err(16), err(32), err(64));
    let (r1, r2) = (e16 / e32, e32 / e64);
    assert!(r2 > 3.4 && r2 < 4.6, "{e16} {e32} {e64}");
    assert!(r1 > 3.0, "{r1}");
}

#[test]
fn discrete_manufactured_source_is_exact_in_space() {
    // with the discrete source the sampled solution satisfies the spatially
    // discrete equations, so the unsplit residual is a pure time error
    let res = |steps: usize| {
        let g = grid(16, 1.0, steps);
        let m = manufactured_problem("oscillating-discrete", &g).unwrap();
        assert!(m.exact.max_relative_divergence() < 1e-12);
        let r = residual_check(&m.exact, &m.problem).unwrap();
        r.iter().map(|s| s.unsplit).fold(0.0, f64::max)
    };
    let (a, b) = (res(32), res(64));
    assert!((a / b - 2.0).abs() < 0.2, "{a} {b}");
}
