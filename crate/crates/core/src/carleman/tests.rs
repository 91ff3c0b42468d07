use super::*;
use crate::forward::{manufactured_problem, solve_forward};
use crate::grid::{build_grid, build_subdomains, BoxRegion, DomainSpec};
use crate::operators::rot_scalar;
use crate::weights::{build_psi_phi0, build_weight_set, EtaMethod};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grid(n: usize, steps: usize) -> Grid<f64> {
    let g = build_grid(&DomainSpec::unit_square(n, 2.0, steps)).unwrap();
    build_subdomains(&g, BoxRegion::new(&[0.3, 0.3], &[0.7, 0.7]).unwrap(), BoxRegion::new(&[0.4, 0.4], &[0.6, 0.6]).unwrap()).unwrap()
}

fn weights(g: &Grid<f64>) -> WeightSet<f64> {
    build_weight_set(g, EtaMethod::Analytic, 1.0, None).unwrap().0
}

/// Smooth divergence-free MAC field times a time profile, plus a source that
/// is not divergence free.
fn smooth_inputs(g: &Grid<f64>, seed: u64) -> Lemma1Inputs<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, b, c) = (rng.gen_range(0.5..2.0), rng.gen_range(1.0..3.0), rng.gen_range(-1.0..1.0));
    let q = Field::scalar_from_fn(g.geom, Stagger::node(2), Boundary::Dirichlet, |x| {
        let pi = std::f64::consts::PI;
        a * (pi * x[0]).sin().powi(2) * (pi * x[1]).sin().powi(2) * (b * x[0] + c * x[1]).cos()
    });
    let base = rot_scalar(&q).unwrap().with_bc(Boundary::Dirichlet);
    let n = g.time.nodes();
    let v = TimeSeriesField::from_fn(n, g.time.dt, 0.0, |t| base.scaled(1.0 + 0.5 * (b * t).sin())).unwrap();
    let f = TimeSeriesField::from_fn(n, g.time.dt, 0.0, |t| {
        let mut f = Field::mac_from_fn(g.geom, Boundary::Dirichlet, |x| [x[0] * (1.0 + t), c * x[1] * x[0], 0.0]);
        f.enforce_boundary();
        f
    })
    .unwrap();
    Lemma1Inputs::unchecked(g, v, f, SolverConfig::default()).unwrap()
}

fn direct_integral(g: &Grid<f64>, ws: &WeightSet<f64>, s: f64, pieces: &[(Vec<Component<f64>>, f64)], k: usize) -> f64 {
    let t = g.time.time(k);
    let mut acc = 0.0;
    for (comps, power) in pieces {
        for c in comps {
            let q = quadrature_weights(&g.geom, c.stagger);
            for (i, v) in c.data.iter().enumerate() {
                let x = c.position(&g.geom, i);
                acc += q[i] * v * v * (s * ws.phi(x, t)).powf(*power) * (2.0 * s * ws.alpha(x, t)).exp();
            }
        }
    }
    acc
}

#[test]
fn lemma1_matches_direct_quadrature() {
    let g = grid(16, 16);
    let ws = weights(&g);
    let inp = smooth_inputs(&g, 1);
    let tw = time_weights(g.time.nodes(), g.time.dt);
    for m in [0u32, 1] {
        let s = 1.5;
        let mf = m as f64;
        let mut lhs = 0.0;
        let mut src = 0.0;
        for k in 1..g.time.steps {
            let v = inp.v.snapshots[k].clone();
            let grads: Vec<Component<f64>> = v.comps.iter().flat_map(|c| (0..2).map(move |a| diff(c, &v.geom, a, Ghost::Odd))).collect();
            lhs += tw[k]
                * direct_integral(&g, &ws, s, &[(grads, mf), (rot(&v).unwrap().comps, mf + 1.0), (v.comps.clone(), mf + 2.0)], k);
            src += tw[k] * direct_integral(&g, &ws, s, &[(inp.f.snapshots[k].comps.clone(), mf)], k);
        }
        let sides = lemma1_sides(&inp, &ws, s, m, &g).unwrap();
        let scale = sides.sides.log_scale.exp();
        assert!((sides.sides.lhs * scale - lhs).abs() <= 1e-10 * lhs, "m={m}");
        assert!((sides.source_term * scale - src).abs() <= 1e-10 * src, "m={m}");
        // the omega terms are part of the left integrand restricted to omega
        assert!(sides.omega_terms[0] <= sides.lhs_terms[1] && sides.omega_terms[1] <= sides.lhs_terms[2]);
    }
}

#[test]
fn lemma1_zero_inputs_give_zero() {
    let g = grid(16, 16);
    let ws = weights(&g);
    let z = smooth_inputs(&g, 2).scaled(0.0);
    let r = lemma1_sides(&z, &ws, 2.0, 0, &g).unwrap();
    assert_eq!((r.sides.lhs, r.sides.rhs), (0.0, 0.0));
}

#[test]
fn lemma1_projection_removes_gradient_part() {
    let g = grid(16, 16);
    let inp = smooth_inputs(&g, 3);
    assert!(inp.projection_delta > 0.05 && inp.projection_delta < 1.0);
    for f in &inp.f.snapshots {
        assert!(divergence(f).unwrap().max_abs() < 1e-7);
    }
    let r = lemma1_sides(&inp, &weights(&g), 2.0, 0, &g).unwrap();
    assert!(r.rhs_unprojected > r.sides.rhs);
}

#[test]
fn lemma1_accepts_solutions_and_refuses_others() {
    let g = grid(16, 64);
    let man = manufactured_problem("mix-2", &g).unwrap();
    let sol = solve_forward(&man.problem).unwrap();
    let inp = Lemma1Inputs::from_solution(&sol, &man.problem).unwrap();
    assert!(inp.residual < SOLUTION_TOLERANCE);
    let mut bad = sol.clone();
    bad.velocity = bad.velocity.map_snapshots(|k, f| if k == 10 { f.scaled(1.01) } else { f.clone() });
    let err = Lemma1Inputs::from_solution(&bad, &man.problem).unwrap_err();
    assert!(err.to_string().contains("does not solve"), "{err}");
}

#[test]
fn lemma1_rejects_foreign_weights_and_bad_s() {
    let g = grid(16, 16);
    let other = grid(16, 32);
    let inp = smooth_inputs(&g, 4);
    assert!(lemma1_sides(&inp, &weights(&other), 1.0, 0, &g).is_err());
    assert!(lemma1_sides(&inp, &weights(&g), 0.0, 0, &g).is_err());
}

#[test]
fn lemma1_constant_stable_under_refinement() {
    let s_list = [1.0, 2.0, 4.0, 8.0, 16.0];
    let mut c = Vec::new();
    for (n, steps) in [(16, 64), (32, 128)] {
        let g = grid(n, steps);
        let ws = weights(&g);
        let man = manufactured_problem("mix-1", &g).unwrap();
        let sol = solve_forward(&man.problem).unwrap();
        let inp = Lemma1Inputs::from_solution(&sol, &man.problem).unwrap();
        let rep = s_sweep(LemmaId::Lemma1, Some(0), &s_list, |s| Ok(lemma1_sides(&inp, &ws, s, 0, &g)?.sides)).unwrap();
        c.push(rep.c_hat.unwrap());
    }
    assert!((c[1] / c[0] - 1.0).abs() < 0.2, "{c:?}");
}

#[test]
fn mshift_identity_and_square() {
    let g = grid(16, 16);
    let ws = weights(&g);
    let v = smooth_inputs(&g, 5).v;
    let w0 = mshift_transform(&v, 0, &ws).unwrap();
    assert_eq!(w0.snapshots[3].comps[0].data, v.snapshots[3].comps[0].data);
    let w2 = mshift_transform(&v, 2, &ws).unwrap();
    for k in 1..g.time.steps {
        let ell = ws.ell().value(g.time.time(k));
        let expect = v.snapshots[k].scaled(1.0 / ell.powi(8));
        assert!(w2.snapshots[k].sub(&expect).unwrap().max_abs() <= 1e-12 * expect.max_abs());
    }
    assert_eq!(w2.snapshots[0].max_abs(), 0.0);
    assert_eq!(w2.snapshots[g.time.steps].max_abs(), 0.0);
}

#[test]
fn mshift_rate_matches_finite_differences() {
    let mut errs = Vec::new();
    for steps in [32, 64, 128] {
        let g = grid(8 * 2, steps);
        let ws = weights(&g);
        let v = smooth_inputs(&g, 6).v;
        let m = 1;
        let w = mshift_transform(&v, m, &ws).unwrap();
        let dw = w.time_derivative(1).unwrap();
        let dv = v.time_derivative(1).unwrap();
        let mut worst = 0.0f64;
        for k in steps / 8..=7 * steps / 8 {
            let t = g.time.time(k);
            let mut r = dw.snapshots[k].clone();
            r.axpy(-ws.phi_hat_pow(t, 0.5), &dv.snapshots[k]).unwrap();
            r.axpy(-mshift_rate(&ws, m, t) * ws.phi_hat(t), &w.snapshots[k]).unwrap();
            worst = worst.max(l2_norm(&r) / l2_norm(&w.snapshots[k]));
        }
        errs.push(worst);
    }
    assert!(errs[0] / errs[1] > 1.8 && errs[1] / errs[2] > 1.8, "{errs:?}");
}

#[test]
fn mshift_sandwich_holds_on_solution() {
    let g = grid(16, 64);
    let ws = weights(&g);
    let man = manufactured_problem("mix-4", &g).unwrap();
    let sol = solve_forward(&man.problem).unwrap();
    let inp = Lemma1Inputs::from_solution(&sol, &man.problem).unwrap();
    for s in [1.0, 4.0, 16.0] {
        let c = mshift_consistency(&inp, &ws, s, 1, &g).unwrap();
        assert!(c.consistent, "{c:?}");
        assert!((c.c_high - 1.0).abs() < 1e-12 && c.c_low < 1.0);
    }
}

#[test]
fn lemma2_reduces_to_dirichlet_identity_at_small_s() {
    // with a flat weight, ∫|∇w|² = ∫|rot w|² + |div w|² for compactly supported w
    let g = grid(32, 8);
    let sw = build_psi_phi0(&g, 0.0, 1.0, EtaMethod::Analytic).unwrap();
    for seed in 0..4 {
        let b = bump_field(&g, seed).unwrap();
        let s = 1e-7;
        let sides = lemma2_sides(&b.field, &sw, s, &g).unwrap();
        assert!((sides.ratio().unwrap() * s - 1.0).abs() < 1e-5, "{}", b.describe());
    }
}

#[test]
fn lemma2_refuses_fields_on_omega() {
    let g = grid(16, 8);
    let sw = build_psi_phi0(&g, 0.0, 1.0, EtaMethod::Analytic).unwrap();
    let w = Field::mac_from_fn(g.geom, Boundary::Dirichlet, |x| [x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1]), 0.0, 0.0]);
    let err = lemma2_sides(&w, &sw, 2.0, &g).unwrap_err();
    assert!(err.to_string().contains("does not vanish on omega"), "{err}");
    let zero = w.zeros_like();
    let r = lemma2_sides(&zero, &sw, 2.0, &g).unwrap();
    assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
}

#[test]
fn lemma2_solenoidal_bump_has_no_divergence_term() {
    let g = grid(32, 8);
    let sw = build_psi_phi0(&g, 0.0, 1.0, EtaMethod::Analytic).unwrap();
    let b = bump_field(&g, 1).unwrap();
    assert_eq!(b.kind, BumpKind::Solenoidal);
    let r = lemma2_sides(&b.field, &sw, 8.0, &g).unwrap();
    let div = divergence(&b.field).unwrap();
    assert!(div.max_abs() < 1e-12);
    assert!(r.rhs > 0.0 && r.lhs / r.rhs < 1.0);
}

#[test]
fn lemma2_sweep_decreases() {
    let g = grid(32, 8);
    let sw = build_psi_phi0(&g, 0.0, 1.0, EtaMethod::Analytic).unwrap();
    let b = bump_field(&g, 0).unwrap();
    let rep = s_sweep(LemmaId::Lemma2, None, &[4.0, 8.0, 16.0, 32.0], |s| lemma2_sides(&b.field, &sw, s, &g)).unwrap();
    assert_eq!(rep.s_hat, Some(4.0));
    assert!(rep.rows.windows(2).all(|w| w[1].ratio < w[0].ratio));
}

fn lemma3_oracle(g: &Grid<f64>, ws: &WeightSet<f64>, gfun: &Field<f64>, s: f64) -> (f64, f64) {
    let c = &gfun.comps[0];
    let q = quadrature_weights(&g.geom, c.stagger);
    let tw = time_weights(g.time.nodes(), g.time.dt);
    let t0 = g.time.t0();
    let (mut lhs, mut rhs) = (0.0, 0.0);
    for (i, v) in c.data.iter().enumerate() {
        let x = c.position(&g.geom, i);
        rhs += q[i] * v.abs() * (2.0 * s * ws.alpha(x, t0)).exp();
        for k in 1..g.time.steps {
            let t = g.time.time(k);
            lhs += q[i] * tw[k] * v.abs() * ws.phi(x, t) * (2.0 * s * ws.alpha(x, t)).exp();
        }
    }
    (lhs, rhs)
}

#[test]
fn lemma3_matches_direct_quadrature() {
    let g = grid(16, 32);
    let ws = weights(&g);
    let gfun = Field::scalar_from_fn(g.geom, Stagger::center(), Boundary::Free, |x| 1.0 + x[0] - 2.0 * x[1] * x[1]);
    for s in [1.0, 3.0] {
        let (lhs, rhs) = lemma3_oracle(&g, &ws, &gfun, s);
        let r = lemma3_sides(&gfun, &ws, s).unwrap();
        let scale = r.sides.log_scale.exp();
        assert!((r.sides.lhs * scale - lhs).abs() <= 1e-10 * lhs);
        assert!((r.sides.rhs * scale - rhs).abs() <= 1e-10 * rhs);
        assert!(r.negative_entries > 0);
    }
}

#[test]
fn lemma3_indicator_close_to_constant() {
    let g = grid(32, 64);
    let ws = weights(&g);
    let one = Field::scalar_from_fn(g.geom, Stagger::center(), Boundary::Free, |_| 1.0);
    let boxg = Field::scalar_from_fn(g.geom, Stagger::center(), Boundary::Free, |x| {
        if (0.1..0.25).contains(&x[0]) && (0.6..0.8).contains(&x[1]) {
            1.0
        } else {
            0.0
        }
    });
    let s_list = [1.0, 2.0, 4.0, 8.0, 16.0];
    let a = s_sweep(LemmaId::Lemma3, None, &s_list, |s| Ok(lemma3_sides(&one, &ws, s)?.sides)).unwrap();
    let b = s_sweep(LemmaId::Lemma3, None, &s_list, |s| Ok(lemma3_sides(&boxg, &ws, s)?.sides)).unwrap();
    for (x, y) in a.rows.iter().zip(&b.rows) {
        let q = y.ratio.unwrap() / x.ratio.unwrap();
        assert!((0.5..=2.0).contains(&q), "s={} {q}", x.s);
    }
    assert!(a.rows.windows(2).skip(1).all(|w| w[1].ratio.unwrap() <= w[0].ratio.unwrap() * 1.05));
}

#[test]
fn lemma3_contract() {
    let g = grid(16, 16);
    let ws = weights(&g);
    let zero = Field::scalar(g.geom, Stagger::center(), Boundary::Free);
    let r = lemma3_sides(&zero, &ws, 2.0).unwrap();
    assert_eq!((r.sides.lhs, r.sides.rhs), (0.0, 0.0));
    assert!(lemma3_sides(&zero, &ws, 0.5).is_err());
    let v = Field::mac(g.geom, Boundary::Free);
    assert!(lemma3_sides(&v, &ws, 2.0).is_err());
}

#[test]
fn lemma3_single_precision() {
    let g32 = {
        let g = build_grid(&DomainSpec::<f32>::unit_square(16, 2.0, 16)).unwrap();
        build_subdomains(&g, BoxRegion::new(&[0.3, 0.3], &[0.7, 0.7]).unwrap(), BoxRegion::new(&[0.4, 0.4], &[0.6, 0.6]).unwrap()).unwrap()
    };
    let ws32 = build_weight_set(&g32, EtaMethod::Analytic, 1.0f32, None).unwrap().0;
    let g64 = grid(16, 16);
    let ws64 = weights(&g64);
    let one32 = Field::scalar_from_fn(g32.geom, Stagger::center(), Boundary::Free, |_| 1.0f32);
    let one64 = Field::scalar_from_fn(g64.geom, Stagger::center(), Boundary::Free, |_| 1.0);
    let a = lemma3_sides(&one32, &ws32, 2.0).unwrap().sides.ratio().unwrap();
    let b = lemma3_sides(&one64, &ws64, 2.0).unwrap().sides.ratio().unwrap();
    assert!((a / b - 1.0).abs() < 1e-4, "{a} {b}");
}

#[test]
fn three_dimensional_lemma3() {
    let g = build_grid(&DomainSpec::unit_cube(8, 2.0, 16)).unwrap();
    let g = build_subdomains(&g, BoxRegion::cube(3, 0.25, 0.75).unwrap(), BoxRegion::cube(3, 0.375, 0.625).unwrap()).unwrap();
    let ws = weights(&g);
    let one = Field::scalar_from_fn(g.geom, Stagger::center(), Boundary::Free, |_| 1.0);
    let r = lemma3_sides(&one, &ws, 2.0).unwrap();
    assert!(r.sides.ratio().unwrap().is_finite());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn lemma1_is_two_homogeneous(seed in 0u64..1000, c in 0.05f64..20.0, s in 0.5f64..8.0) {
        let g = grid(16, 16);
        let ws = weights(&g);
        let inp = smooth_inputs(&g, seed);
        let a = lemma1_sides(&inp, &ws, s, 0, &g).unwrap();
        let b = lemma1_sides(&inp.scaled(c), &ws, s, 0, &g).unwrap();
        prop_assert!(a.sides.lhs >= 0.0 && a.sides.rhs > 0.0);
        prop_assert!((b.sides.lhs / (c * c * a.sides.lhs) - 1.0).abs() < 1e-10);
        prop_assert!((b.sides.rhs / (c * c * a.sides.rhs) - 1.0).abs() < 1e-10);
        prop_assert!((b.sides.ratio().unwrap() / a.sides.ratio().unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn lemma2_is_two_homogeneous(seed in 0u64..1000, c in 0.05f64..20.0, s in 1.0f64..32.0) {
        let g = grid(32, 8);
        let sw = build_psi_phi0(&g, 0.0, 1.0, EtaMethod::Analytic).unwrap();
        let w = bump_field(&g, seed).unwrap().field;
        let a = lemma2_sides(&w, &sw, s, &g).unwrap();
        let b = lemma2_sides(&w.scaled(c), &sw, s, &g).unwrap();
        prop_assert!(a.lhs > 0.0 && a.rhs > 0.0);
        prop_assert!((b.lhs / (c * c * a.lhs) - 1.0).abs() < 1e-10);
        prop_assert!((b.rhs / (c * c * a.rhs) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn lemma3_is_positively_homogeneous(seed in 0u64..1000, c in 0.05f64..20.0, s in 1.0f64..16.0) {
        let g = grid(16, 16);
        let ws = weights(&g);
        let k = 1.0 + seed as f64 * 0.37;
        let gf = Field::scalar_from_fn(g.geom, Stagger::center(), Boundary::Free, |x| (k * x[0] + 3.0 * x[1]).sin().abs());
        let a = lemma3_sides(&gf, &ws, s).unwrap();
        let b = lemma3_sides(&gf.scaled(c), &ws, s).unwrap();
        prop_assert!(a.sides.lhs > 0.0 && a.sides.rhs > 0.0);
        prop_assert!((b.sides.lhs / (c * a.sides.lhs) - 1.0).abs() < 1e-10);
        prop_assert!((b.sides.rhs / (c * a.sides.rhs) - 1.0).abs() < 1e-10);
    }
}
