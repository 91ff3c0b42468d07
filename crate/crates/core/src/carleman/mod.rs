//! Both sides of the three Carleman estimates, parameter sweeps and fitted
//! empirical constants.
//!
//! The weights `e^{2sα}` underflow long before the estimates become
//! interesting, so every side is computed relative to a common factor
//! `e^{log_scale}` shared by the left- and right-hand side. Ratios and
//! homogeneity are unaffected.

mod families;
mod sweep;

pub use families::{bump_field, Bump, BumpKind, COLLAR};
pub use sweep::{calibrate, s_sweep, Calibration, CarlemanReport, LemmaId, SweepRow, S_HAT_TOLERANCE};

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::forward::{residual_check, ForwardProblem, Solution};
use crate::grid::{quadrature_weights, time_weights, Boundary, Component, Field, Grid, Region, Stagger, TimeSeriesField};
use crate::operators::stencil::{diff, Ghost};
use crate::operators::{divergence, l2_norm, leray_project, rot, SolverConfig};
use crate::scalar::{lit, to_f64, Real};
use crate::weights::{flush_exp, StationaryWeight, WeightSet};

/// Largest `|w|` on ω that still counts as vanishing there.
pub const OMEGA_VANISHING: f64 = 1e-12;

/// Two sides of an estimate, both multiplied by `e^{-log_scale}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Sides {
    pub lhs: f64,
    pub rhs: f64,
    pub log_scale: f64,
}

impl Sides {
    pub fn ratio(&self) -> Option<f64> {
        (self.rhs > 0.0).then(|| self.lhs / self.rhs)
    }
}

/// Per-lattice tables: `λη`, quadrature weights and the ω mask.
struct Lattice<T> {
    stagger: Stagger,
    lambda_eta: Vec<T>,
    quad: Vec<T>,
    omega: Vec<bool>,
}

struct Lattices<T> {
    items: Vec<Lattice<T>>,
}

impl<T: Real> Lattices<T> {
    fn new() -> Self {
        Lattices { items: Vec::new() }
    }

    fn get(&mut self, grid: &Grid<T>, eta: impl Fn(&Component<T>) -> Vec<T>, comp: &Component<T>) -> &Lattice<T> {
        let stagger = comp.stagger;
        if let Some(i) = self.items.iter().position(|l| l.stagger == stagger) {
            return &self.items[i];
        }
        let omega = if grid.omega().is_some() { grid.mask(stagger, Region::Omega) } else { vec![false; comp.data.len()] };
        self.items.push(Lattice { stagger, lambda_eta: eta(comp), quad: quadrature_weights(&grid.geom, stagger), omega });
        self.items.last().expect("just pushed")
    }
}

/// `∂_a v_c` for every pair, on their staggered lattices.
fn gradient_components<T: Real>(v: &Field<T>) -> Vec<Component<T>> {
    let ghost = Ghost::of(v.bc);
    let mut out = Vec::with_capacity(v.comps.len() * v.geom.dim);
    for c in &v.comps {
        for a in 0..v.geom.dim {
            out.push(diff(c, &v.geom, a, ghost));
        }
    }
    out
}

fn check_series<T: Real>(v: &TimeSeriesField<T>, grid: &Grid<T>, what: &str) -> Result<()> {
    if v.len() != grid.time.nodes() || *v.geom() != grid.geom {
        return Err(LabError::contract(format!("{what} must have one snapshot per time node on the grid")));
    }
    if !v.snapshots[0].is_mac() {
        return Err(LabError::Staggering(format!("{what} must be a MAC vector field")));
    }
    Ok(())
}

/// Divergence-free source and velocity ready for the first estimate.
#[derive(Clone, Debug)]
pub struct Lemma1Inputs<T> {
    pub v: TimeSeriesField<T>,
    /// Leray projection of the source at every node.
    pub f: TimeSeriesField<T>,
    /// Source as given.
    pub f_raw: TimeSeriesField<T>,
    /// `‖F − PF‖_{L²(Q)} / ‖F‖_{L²(Q)}`.
    pub projection_delta: f64,
    /// Largest scheme-consistent residual relative to `‖vⁿ‖/dt + ‖Fⁿ‖`.
    pub residual: f64,
}

/// Relative residual a solution must meet before the estimate is evaluated.
pub const SOLUTION_TOLERANCE: f64 = 1e-8;

impl<T: Real> Lemma1Inputs<T> {
    /// Checks that `sol` solves the problem, then projects its source.
    pub fn from_solution(sol: &Solution<T>, problem: &ForwardProblem<T>) -> Result<Self> {
        let res = residual_check(sol, problem)?;
        let f_raw = problem.source_series()?;
        let dt = to_f64(problem.grid.time.dt);
        let mut worst = 0.0f64;
        for r in &res {
            let scale = to_f64(l2_norm(&sol.velocity.snapshots[r.step - 1])) / dt + to_f64(l2_norm(&f_raw.snapshots[r.step]));
            if scale > 0.0 {
                worst = worst.max(r.momentum / scale);
            }
        }
        if worst > SOLUTION_TOLERANCE {
            return Err(LabError::contract(format!(
                "velocity does not solve the forward problem (relative residual {worst:.3e}); the estimate is only claimed for solutions"
            )));
        }
        let mut inputs = Self::unchecked(&problem.grid, sol.velocity.clone(), f_raw, problem.solver)?;
        inputs.residual = worst;
        Ok(inputs)
    }

    /// Projects the source without checking that `v` solves anything.
    pub fn unchecked(grid: &Grid<T>, v: TimeSeriesField<T>, f_raw: TimeSeriesField<T>, solver: SolverConfig) -> Result<Self> {
        check_series(&v, grid, "velocity")?;
        check_series(&f_raw, grid, "source")?;
        let tw = time_weights(f_raw.len(), f_raw.dt);
        let (mut num, mut den) = (T::zero(), T::zero());
        let mut projected = Vec::with_capacity(f_raw.len());
        for (f, w) in f_raw.snapshots.iter().zip(&tw) {
            let mut z = f.clone().with_bc(Boundary::Dirichlet);
            z.enforce_boundary();
            let p = leray_project(&z, solver)?.field;
            num = num + *w * l2_norm(&p.sub(f)?).powi(2);
            den = den + *w * l2_norm(f).powi(2);
            projected.push(p);
        }
        let projection_delta = if den > T::zero() { to_f64((num / den).sqrt()) } else { 0.0 };
        let f = TimeSeriesField::new(projected, f_raw.dt, f_raw.t_start)?;
        Ok(Lemma1Inputs { v, f, f_raw, projection_delta, residual: f64::NAN })
    }

    pub fn scaled(&self, c: T) -> Self {
        Lemma1Inputs { v: self.v.scaled(c), f: self.f.scaled(c), f_raw: self.f_raw.scaled(c), ..self.clone() }
    }
}

/// Both sides of the first estimate, with the unprojected source as well.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Lemma1Sides {
    pub sides: Sides,
    /// Right-hand side with the source as given instead of its projection.
    pub rhs_unprojected: f64,
    /// Individual terms: `[∇v, rot v, v]` on Q, the source term, and
    /// `[rot v, v, ∇v]` on Q_ω.
    pub lhs_terms: [f64; 3],
    pub source_term: f64,
    pub omega_terms: [f64; 3],
}

struct Lemma1Acc<T> {
    lhs: [T; 3],
    omega: [T; 3],
    source: T,
    source_raw: T,
}

/// Weighted space-time integrals
/// `∫_Q (s^mφ^m|∇v|² + s^{m+1}φ^{m+1}|rot v|² + s^{m+2}φ^{m+2}|v|²)e^{2sα}` and
/// `∫_Q s^mφ^m|F|²e^{2sα} + ∫_{Q_ω}(s^{m+1}φ^{m+1}|rot v|² + s^{m+2}φ^{m+2}|v|² + s^{m+1}φ^{m+1}|∇v|²)e^{2sα}`.
/// The first and last time slices are dropped.
pub fn lemma1_sides<T: Real>(inputs: &Lemma1Inputs<T>, ws: &WeightSet<T>, s: T, m: u32, grid: &Grid<T>) -> Result<Lemma1Sides> {
    if !(s > T::zero()) {
        return Err(LabError::contract("Carleman parameter s must be positive"));
    }
    if ws.eta().geom() != &grid.geom || ws.time_axis() != &grid.time {
        return Err(LabError::contract("weight set was built on a different grid"));
    }
    check_series(&inputs.v, grid, "velocity")?;
    let shift = lit::<T>(2.0) * s * ws.alpha_max();
    let mf = lit::<T>(m as f64);
    let tw = time_weights(grid.time.nodes(), grid.time.dt);
    let mut lat = Lattices::new();
    let z = T::zero();
    let mut acc = Lemma1Acc { lhs: [z; 3], omega: [z; 3], source: z, source_raw: z };
    for k in 1..grid.time.steps {
        let tf = ws.time_factor_at(k);
        let v = inputs.v.snapshots[k].clone().with_bc(Boundary::Dirichlet);
        // term index and the power of sφ
        let mut add = |comp: &Component<T>, term: usize, power: T, into: &mut dyn FnMut(usize, T, bool)| {
            let l = lat.get(grid, |c| ws.lambda_eta_table(c), comp);
            for (i, val) in comp.data.iter().enumerate() {
                if *val == T::zero() {
                    continue;
                }
                let w = flush_exp(ws.log_weighted_from(s, power, l.lambda_eta[i], tf) - shift) * l.quad[i] * tw[k];
                into(term, w * *val * *val, l.omega[i]);
            }
        };
        let mut sink = |term: usize, x: T, in_omega: bool| {
            acc.lhs[term] = acc.lhs[term] + x;
            if in_omega {
                // omega terms are ordered rot, v, ∇v
                let j = [2, 0, 1][term];
                acc.omega[j] = acc.omega[j] + x;
            }
        };
        for g in gradient_components(&v) {
            add(&g, 0, mf, &mut sink);
        }
        for r in rot(&v)?.comps {
            add(&r, 1, mf + T::one(), &mut sink);
        }
        for c in &v.comps {
            add(c, 2, mf + lit(2.0), &mut sink);
        }
        let mut src = |term: usize, x: T, _: bool| {
            if term == 0 {
                acc.source = acc.source + x;
            } else {
                acc.source_raw = acc.source_raw + x;
            }
        };
        for c in &inputs.f.snapshots[k].comps {
            add(c, 0, mf, &mut src);
        }
        for c in &inputs.f_raw.snapshots[k].comps {
            add(c, 1, mf, &mut src);
        }
    }
    let lhs = acc.lhs[0] + acc.lhs[1] + acc.lhs[2];
    let om = acc.omega[0] + acc.omega[1] + acc.omega[2];
    let f = |x: T| to_f64(x);
    Ok(Lemma1Sides {
        sides: Sides { lhs: f(lhs), rhs: f(acc.source + om), log_scale: f(shift) },
        rhs_unprojected: f(acc.source_raw + om),
        lhs_terms: [f(acc.lhs[0]), f(acc.lhs[1]), f(acc.lhs[2])],
        source_term: f(acc.source),
        omega_terms: [f(acc.omega[0]), f(acc.omega[1]), f(acc.omega[2])],
    })
}

/// `w = φ̂^{m/2} v`; the end snapshots, where `φ̂` is infinite, are set to zero.
pub fn mshift_transform<T: Real>(v: &TimeSeriesField<T>, m: u32, ws: &WeightSet<T>) -> Result<TimeSeriesField<T>> {
    if v.len() != ws.time_axis().nodes() {
        return Err(LabError::contract("series and weight set use different time axes"));
    }
    if m == 0 {
        return Ok(v.clone());
    }
    let last = v.len() - 1;
    let half = lit::<T>(m as f64 / 2.0);
    Ok(v.map_snapshots(|k, f| {
        if k == 0 || k == last {
            f.zeros_like()
        } else {
            f.scaled(ws.phi_hat_pow(v.time(k), half))
        }
    }))
}

/// `q(t) = −(m/2)·8ℓ'ℓ⁷`, so that `∂ₜw = φ̂^{m/2}∂ₜv + qφ̂w`.
pub fn mshift_rate<T: Real>(ws: &WeightSet<T>, m: u32, t: T) -> T {
    let tf = ws.time_factor(t);
    -lit::<T>(m as f64 * 4.0) * tf.dell * tf.ell.powi(7)
}

/// Sandwich check between `lemma1_sides(v, F, m)` and `s^m·lemma1_sides(w, φ̂^{m/2}F, 0)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MShiftCheck {
    pub m: u32,
    pub s: f64,
    pub lhs_m: f64,
    pub lhs_shifted: f64,
    pub rhs_m: f64,
    pub rhs_shifted: f64,
    pub c_low: f64,
    pub c_high: f64,
    /// `c_low^m ≤ shifted/direct ≤ c_high^m` for both sides (with rounding slack).
    pub consistent: bool,
}

pub fn mshift_consistency<T: Real>(inputs: &Lemma1Inputs<T>, ws: &WeightSet<T>, s: T, m: u32, grid: &Grid<T>) -> Result<MShiftCheck> {
    let direct = lemma1_sides(inputs, ws, s, m, grid)?;
    let shifted_inputs = Lemma1Inputs {
        v: mshift_transform(&inputs.v, m, ws)?,
        f: mshift_transform(&inputs.f, m, ws)?,
        f_raw: mshift_transform(&inputs.f_raw, m, ws)?,
        ..inputs.clone()
    };
    let shifted = lemma1_sides(&shifted_inputs, ws, s, 0, grid)?;
    let (lo, hi) = crate::weights::check_weight_equivalence(ws)?;
    let sm = to_f64(s).powi(m as i32);
    let (lo, hi) = (to_f64(lo), to_f64(hi));
    let within = |a: f64, b: f64| -> bool {
        if b == 0.0 {
            return a == 0.0;
        }
        let r = a / b;
        let slack = 1e-9;
        r >= lo.powi(m as i32) * (1.0 - slack) && r <= hi.powi(m as i32) * (1.0 + slack)
    };
    let lhs_shifted = sm * shifted.sides.lhs;
    let rhs_shifted = sm * shifted.sides.rhs;
    Ok(MShiftCheck {
        m,
        s: to_f64(s),
        lhs_m: direct.sides.lhs,
        lhs_shifted,
        rhs_m: direct.sides.rhs,
        rhs_shifted,
        c_low: lo,
        c_high: hi,
        consistent: within(lhs_shifted, direct.sides.lhs) && within(rhs_shifted, direct.sides.rhs),
    })
}

/// `∫_Ω (s⁻¹|∇w|² + s|w|²)e^{2sφ₀}` against `∫_Ω (|rot w|² + |div w|²)e^{2sφ₀}`.
/// Both sides are relative to the largest `e^{2sφ₀}` on the support of the
/// integrands.
pub fn lemma2_sides<T: Real>(w: &Field<T>, sw: &StationaryWeight<T>, s: T, grid: &Grid<T>) -> Result<Sides> {
    if !(s > T::zero()) {
        return Err(LabError::contract("Carleman parameter s must be positive"));
    }
    if !w.is_mac() || w.geom != grid.geom {
        return Err(LabError::Staggering("the stationary estimate takes a MAC vector field on the grid".into()));
    }
    if grid.omega().is_none() {
        return Err(LabError::contract("omega must be set"));
    }
    let w = w.clone().with_bc(Boundary::Dirichlet);
    w.check_invariants().map_err(|_| LabError::contract("w must vanish on the boundary"))?;
    for c in &w.comps {
        for (i, v) in c.data.iter().enumerate() {
            if v.abs() > lit(OMEGA_VANISHING) && grid.in_region(c, i, Region::Omega) {
                return Err(LabError::contract(format!("w does not vanish on omega (|w| = {:.3e})", to_f64(v.abs()))));
            }
        }
    }
    let geom = grid.geom;
    let groups = [gradient_components(&w), w.comps.clone(), rot(&w)?.comps, divergence(&w)?.comps];
    // exponents 2sφ₀ at every nonzero sample; the largest one is the shift
    let two_s = lit::<T>(2.0) * s;
    let exps: Vec<Vec<Vec<T>>> = groups
        .iter()
        .map(|g| {
            g.iter()
                .map(|c| c.data.iter().enumerate().map(|(i, v)| if *v == T::zero() { T::neg_infinity() } else { two_s * sw.phi0(c.position(&geom, i)) }).collect())
                .collect()
        })
        .collect();
    let shift = exps.iter().flatten().flatten().copied().fold(T::neg_infinity(), T::max);
    if shift == T::neg_infinity() {
        return Ok(Sides { lhs: 0.0, rhs: 0.0, log_scale: 0.0 });
    }
    let sums: Vec<T> = groups
        .iter()
        .zip(&exps)
        .map(|(g, e)| {
            g.iter()
                .zip(e)
                .map(|(c, e)| {
                    let q = quadrature_weights(&geom, c.stagger);
                    c.data.iter().zip(e).zip(&q).fold(T::zero(), |acc, ((v, e), q)| acc + *q * *v * *v * flush_exp(*e - shift))
                })
                .sum()
        })
        .collect();
    let (grad, mass, g, h) = (sums[0], sums[1], sums[2], sums[3]);
    Ok(Sides { lhs: to_f64(grad / s + s * mass), rhs: to_f64(g + h), log_scale: to_f64(shift) })
}

/// Result of the third estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Lemma3Sides {
    pub sides: Sides,
    /// Samples of `g` that were negative; the absolute value is used.
    pub negative_entries: usize,
}

/// `∫_Q φ|g|e^{2sα}` against `∫_Ω |g|e^{2sα(·,t0)}`, time quadrature on the
/// weight set's axis. Both sides are relative to the largest `e^{2sα(·,t0)}`
/// on the support of `g`.
pub fn lemma3_sides<T: Real>(g: &Field<T>, ws: &WeightSet<T>, s: T) -> Result<Lemma3Sides> {
    if !(s >= T::one()) {
        return Err(LabError::contract("the time-collapse estimate needs s >= 1"));
    }
    if !g.is_scalar() || g.geom != *ws.eta().geom() {
        return Err(LabError::contract("g must be a scalar field on the weight grid"));
    }
    let comp = &g.comps[0];
    if comp.data.iter().any(|v| !v.is_finite()) {
        return Err(LabError::NonFinite("g".into()));
    }
    let negative_entries = comp.data.iter().filter(|v| **v < T::zero()).count();
    let le = ws.lambda_eta_table(comp);
    let quad = quadrature_weights(&g.geom, comp.stagger);
    let time = ws.time_axis();
    let tw = time_weights(time.nodes(), time.dt);
    let t0 = ws.time_factor_at(time.t0_index);
    // largest 2sα(·, t0) over the support of g
    let shift = comp
        .data
        .iter()
        .zip(&le)
        .filter(|(v, _)| **v != T::zero())
        .map(|(_, le)| ws.log_weighted_from(s, T::zero(), *le, t0))
        .fold(T::neg_infinity(), T::max);
    if shift == T::neg_infinity() {
        return Ok(Lemma3Sides { sides: Sides { lhs: 0.0, rhs: 0.0, log_scale: 0.0 }, negative_entries });
    }
    let (mut lhs, mut rhs) = (T::zero(), T::zero());
    for (i, v) in comp.data.iter().enumerate() {
        let a = v.abs();
        if a == T::zero() {
            continue;
        }
        let mass = a * quad[i];
        rhs = rhs + mass * flush_exp(ws.log_weighted_from(s, T::zero(), le[i], t0) - shift);
        let mut inner = T::zero();
        for k in 1..time.steps {
            let tf = ws.time_factor_at(k);
            // φ e^{2sα} = s⁻¹ (sφ) e^{2sα}
            inner = inner + tw[k] * flush_exp(ws.log_weighted_from(s, T::one(), le[i], tf) - shift) / s;
        }
        lhs = lhs + mass * inner;
    }
    Ok(Lemma3Sides { sides: Sides { lhs: to_f64(lhs), rhs: to_f64(rhs), log_scale: to_f64(shift) }, negative_entries })
}

#[cfg(test)]
mod tests;
