//! Linearized Navier-Stokes forward solver
//! `∂ₜv − Δv + (A·∇)v + (v·∇)B + ∇p = F`, `div v = 0`, `v = 0` on the boundary,
//! and manufactured solutions for it.
//!
//! Time stepping is semi-implicit and first order: backward Euler for the
//! diffusion, explicit advection terms, and an incremental pressure
//! correction that projects every step onto discretely divergence-free
//! fields. The gradient part of the source is split off by a Leray
//! projection and goes straight into the pressure, so a pure gradient
//! source leaves the velocity at zero.

mod coefficient;
mod manufactured;

pub use coefficient::{Coefficient, VectorFn};
pub use manufactured::{manufactured_from_spec, manufactured_problem, Manufactured, ManufacturedSpec, Mode, TimeProfile, CATALOG};

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::grid::{quadrature_weights, Boundary, Field, Grid, Stagger, TimeSeriesField};
use crate::operators::stencil::{central_diff, laplacian_into, resample, Ghost};
use crate::operators::{conjugate_gradient, divergence, gradient, l2_norm, leray_project, solve_neumann_poisson, SolverConfig};
use crate::scalar::{to_f64, Real};

/// Largest admissible `dt·(‖A‖∞/h + ‖∇B‖∞)`.
pub const STABILITY_LIMIT: f64 = 0.5;

/// Problem data; the viscosity is 1.
#[derive(Clone, Debug)]
pub struct ForwardProblem<T> {
    pub grid: Grid<T>,
    pub a: Coefficient<T>,
    pub b: Coefficient<T>,
    pub source: Coefficient<T>,
    /// Initial velocity: a divergence-free MAC field vanishing on the boundary.
    pub v0: Field<T>,
    pub solver: SolverConfig,
}

impl<T: Real> ForwardProblem<T> {
    /// `A = B = 0`, `v0 = 0`.
    pub fn new(grid: Grid<T>, source: Coefficient<T>) -> Self {
        let v0 = Field::mac(grid.geom, Boundary::Dirichlet);
        ForwardProblem { grid, a: Coefficient::Zero, b: Coefficient::Zero, source, v0, solver: SolverConfig::default() }
    }

    pub fn with_coefficients(mut self, a: Coefficient<T>, b: Coefficient<T>) -> Self {
        self.a = a;
        self.b = b;
        self
    }

    pub fn with_initial(mut self, v0: Field<T>) -> Self {
        self.v0 = v0;
        self
    }

    /// The source sampled at every time node.
    pub fn source_series(&self) -> Result<TimeSeriesField<T>> {
        let time = &self.grid.time;
        self.source.to_series(&self.grid.geom, time.nodes(), time.dt)
    }

    /// `max_n dt·(‖Aⁿ‖∞/h + ‖∇Bⁿ‖∞)` over the steps that use the explicit terms.
    pub fn stability_number(&self) -> T {
        let geom = self.grid.geom;
        let time = self.grid.time;
        let h = geom.min_spacing();
        let mut worst = T::zero();
        for k in 0..time.steps {
            let t = time.time(k);
            let mut amax = T::zero();
            let mut gbmax = T::zero();
            for c in 0..geom.dim {
                for comp in self.a.on_face(&geom, c, k, t) {
                    amax = amax.max(comp.max_abs());
                }
                if !self.b.is_zero() {
                    let bc = self.b.component(&geom, c, k, t);
                    for a in 0..geom.dim {
                        gbmax = gbmax.max(central_diff(&bc, &geom, a, Ghost::Extrapolate).max_abs());
                    }
                }
            }
            worst = worst.max(time.dt * (amax / h + gbmax));
        }
        worst
    }

    fn validate(&self) -> Result<()> {
        let geom = &self.grid.geom;
        let nodes = self.grid.time.nodes();
        self.a.check(geom, nodes, "coefficient A")?;
        self.b.check(geom, nodes, "coefficient B")?;
        self.source.check(geom, nodes, "source F")?;
        if !self.v0.is_mac() || self.v0.geom != *geom {
            return Err(LabError::Staggering("initial velocity must be a MAC field on the problem grid".into()));
        }
        let z = self.v0.clone().with_bc(Boundary::Dirichlet);
        z.check_invariants().map_err(|_| LabError::contract("initial velocity must vanish on the boundary"))?;
        let vn = to_f64(l2_norm(&z));
        let dn = to_f64(l2_norm(&divergence(&z)?));
        if dn > 1e-9 * vn.max(f64::MIN_POSITIVE) && dn > 1e-300 {
            return Err(LabError::contract(format!("initial velocity is not divergence-free (|div v0| = {dn:.3e})")));
        }
        let sigma = to_f64(self.stability_number());
        if !(sigma <= STABILITY_LIMIT) {
            return Err(LabError::contract(format!(
                "time step violates the advection stability bound: dt*(|A|/h + |grad B|) = {sigma:.4} > {STABILITY_LIMIT}"
            )));
        }
        Ok(())
    }
}

/// Linear solver work in one step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct StepWork {
    pub helmholtz: usize,
    pub poisson: usize,
}

/// Velocity at every time node (MAC, Dirichlet), mean-free pressure at cell centres.
#[derive(Clone, Debug)]
pub struct Solution<T> {
    pub velocity: TimeSeriesField<T>,
    pub pressure: TimeSeriesField<T>,
    /// `‖div vⁿ‖` per time node.
    pub divergence: Vec<f64>,
    /// Solver iterations per time node (zero at the initial node).
    pub work: Vec<StepWork>,
}

impl<T: Real> Solution<T> {
    /// `max_n ‖div vⁿ‖ / ‖vⁿ‖`, with zero fields counting as 0.
    pub fn max_relative_divergence(&self) -> f64 {
        self.divergence
            .iter()
            .zip(&self.velocity.snapshots)
            .map(|(d, v)| {
                let n = to_f64(l2_norm(v));
                if *d == 0.0 {
                    0.0
                } else {
                    d / n.max(f64::MIN_POSITIVE)
                }
            })
            .fold(0.0, f64::max)
    }
}

/// `(Aⁿ·∇)vⁿ + (vⁿ·∇)Bⁿ` on the MAC faces, zero on boundary normal faces.
pub(crate) fn advection<T: Real>(problem: &ForwardProblem<T>, v: &Field<T>, k: usize, t: T) -> Field<T> {
    let geom = problem.grid.geom;
    let dim = geom.dim;
    let mut out = Field::mac(geom, Boundary::Dirichlet);
    if problem.a.is_zero() && problem.b.is_zero() {
        return out;
    }
    for c in 0..dim {
        let acc = &mut out.comps[c].data;
        if !problem.a.is_zero() {
            let a_face = problem.a.on_face(&geom, c, k, t);
            for (a, coeff) in a_face.iter().enumerate() {
                let dv = central_diff(&v.comps[c], &geom, a, Ghost::Odd);
                for ((o, w), d) in acc.iter_mut().zip(&coeff.data).zip(&dv.data) {
                    *o = *o + *w * *d;
                }
            }
        }
        if !problem.b.is_zero() {
            let bc = problem.b.component(&geom, c, k, t);
            for a in 0..dim {
                let db = central_diff(&bc, &geom, a, Ghost::Extrapolate);
                let va = if a == c { v.comps[c].clone() } else { resample(&v.comps[a], &geom, Stagger::face(c), Ghost::Odd) };
                for ((o, w), d) in acc.iter_mut().zip(&va.data).zip(&db.data) {
                    *o = *o + *w * *d;
                }
            }
        }
    }
    out.enforce_boundary();
    out
}

/// Source at node `k` split as `P F + ∇π`.
fn split_source<T: Real>(problem: &ForwardProblem<T>, k: usize, t: T) -> Result<(Field<T>, Field<T>, usize)> {
    let geom = problem.grid.geom;
    if problem.source.is_zero() {
        return Ok((Field::mac(geom, Boundary::Dirichlet), Field::scalar(geom, Stagger::center(), Boundary::Neumann), 0));
    }
    let mut f = problem.source.mac(&geom, k, t).with_bc(Boundary::Dirichlet);
    f.enforce_boundary();
    let proj = leray_project(&f, problem.solver)?;
    Ok((proj.field, proj.potential, proj.iterations))
}

/// Initial pressure `Δ⁻¹ div(Δv⁰ − N⁰)` for the solenoidal part of the
/// problem, consistent with the momentum equation.
fn initial_pressure<T: Real>(problem: &ForwardProblem<T>, config: SolverConfig) -> Result<(Field<T>, usize)> {
    let v0 = problem.v0.clone().with_bc(Boundary::Dirichlet);
    let mut g = crate::operators::laplacian(&v0);
    g.axpy(-T::one(), &advection(problem, &v0, 0, T::zero()))?;
    let (p, out) = solve_neumann_poisson(&divergence(&g)?, None, config)?;
    Ok((p, out.iterations))
}

/// Solves `(I − dt Δ) x = rhs` per component with the boundary normal faces held at zero.
fn helmholtz<T: Real>(rhs: &Field<T>, dt: T, guess: &Field<T>, config: SolverConfig) -> Result<(Field<T>, usize)> {
    let geom = rhs.geom;
    let mut x = guess.clone();
    let mut iters = 0;
    for (c, xc) in x.comps.iter_mut().enumerate() {
        let template = &rhs.comps[c];
        let apply = |src: &[T], out: &mut [T]| {
            laplacian_into(template, &geom, Boundary::Dirichlet, src, out);
            out.iter_mut().zip(src).for_each(|(o, s)| *o = *s - dt * *o);
        };
        iters += conjugate_gradient(apply, &template.data, &mut xc.data, config, false)?.iterations;
    }
    Ok((x, iters))
}

/// Marches the problem over the grid's time axis.
pub fn solve_forward<T: Real>(problem: &ForwardProblem<T>) -> Result<Solution<T>> {
    problem.validate()?;
    let grid = &problem.grid;
    let time = grid.time;
    let dt = time.dt;
    let config = problem.solver;

    let mut v = problem.v0.clone().with_bc(Boundary::Dirichlet);
    v.enforce_boundary();
    // q is the pressure of the solenoidal problem; p = q + π
    let (mut q, q_iters) = initial_pressure(problem, config)?;
    let (_, pi0, pi_iters) = split_source(problem, 0, T::zero())?;
    let mut velocity = vec![v.clone()];
    let mut pressure = vec![q.add(&pi0)?];
    let mut div_hist = vec![to_f64(l2_norm(&divergence(&v)?))];
    let mut work = vec![StepWork { helmholtz: 0, poisson: q_iters + pi_iters }];

    for n in 0..time.steps {
        let t = time.time(n);
        let t1 = time.time(n + 1);
        let (pf, pi, pi_iters) = split_source(problem, n + 1, t1)?;
        let nonlinear = advection(problem, &v, n, t);
        let gq = gradient(&q)?.with_bc(Boundary::Dirichlet);
        let mut rhs = pf;
        rhs.axpy(-T::one(), &nonlinear)?;
        rhs.axpy(-T::one(), &gq)?;
        rhs.scale(dt);
        rhs.axpy(T::one(), &v)?;
        rhs.enforce_boundary();
        let (vstar, h_iters) = helmholtz(&rhs, dt, &v, config)?;
        let proj = leray_project(&vstar, config)?;
        let mut phi = proj.potential;
        phi.scale(T::one() / dt);
        q.axpy(T::one(), &phi)?;
        v = proj.field;
        if v.comps.iter().any(|c| c.data.iter().any(|x| !x.is_finite())) {
            return Err(LabError::NonFinite(format!("velocity at step {}", n + 1)));
        }
        div_hist.push(proj.divergence_after);
        work.push(StepWork { helmholtz: h_iters, poisson: proj.iterations + pi_iters });
        velocity.push(v.clone());
        pressure.push(q.add(&pi)?);
    }
    Ok(Solution {
        velocity: TimeSeriesField::new(velocity, dt, T::zero())?,
        pressure: TimeSeriesField::new(pressure, dt, T::zero())?,
        divergence: div_hist,
        work,
    })
}

/// Residual norms at one time node `n ≥ 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StepResidual {
    pub step: usize,
    /// L² norm over interior faces of the scheme-consistent momentum residual.
    pub momentum: f64,
    /// Same without the splitting correction: `(vⁿ − vⁿ⁻¹)/dt − Δvⁿ + Nⁿ⁻¹ + ∇pⁿ − Fⁿ`.
    pub unsplit: f64,
    pub divergence: f64,
    /// `‖dt ∇(qⁿ − qⁿ⁻¹)‖`, the splitting term the scheme adds to `Δv`.
    pub splitting: f64,
}

fn interior_l2<T: Real>(f: &Field<T>) -> T {
    let mut s = T::zero();
    for c in &f.comps {
        let w = quadrature_weights(&f.geom, c.stagger);
        for (flat, (v, w)) in c.data.iter().zip(&w).enumerate() {
            if !c.on_boundary(&f.geom, flat) {
                s = s + *v * *v * *w;
            }
        }
    }
    s.sqrt()
}

/// Momentum residual
/// `(vⁿ − vⁿ⁻¹)/dt − Δ(vⁿ + dt∇(qⁿ − qⁿ⁻¹)) + Nⁿ⁻¹ + ∇pⁿ − Fⁿ`
/// and `‖div vⁿ‖` for each step, where `q = p − π` and `∇π` is the gradient
/// part of the source. Zero for the solver's own output up to linear-solver
/// tolerance.
pub fn residual_check<T: Real>(sol: &Solution<T>, problem: &ForwardProblem<T>) -> Result<Vec<StepResidual>> {
    let time = problem.grid.time;
    let geom = problem.grid.geom;
    if sol.velocity.len() != time.nodes() || sol.pressure.len() != time.nodes() || *sol.velocity.geom() != geom {
        return Err(LabError::contract("solution does not match the problem grid"));
    }
    let dt = time.dt;
    let mut out = Vec::with_capacity(time.steps);
    let mut pi_prev = split_source(problem, 0, T::zero())?.1;
    for n in 1..=time.steps {
        let pi = split_source(problem, n, time.time(n))?.1;
        let v0 = sol.velocity.snapshots[n - 1].clone().with_bc(Boundary::Dirichlet);
        let v1 = sol.velocity.snapshots[n].clone().with_bc(Boundary::Dirichlet);
        let p0 = &sol.pressure.snapshots[n - 1];
        let p1 = &sol.pressure.snapshots[n];
        let mut dp = p1.sub(p0)?.sub(&pi.sub(&pi_prev)?)?.with_bc(Boundary::Neumann);
        dp.scale(dt);
        pi_prev = pi;
        let split = gradient(&dp)?.with_bc(Boundary::Dirichlet);
        let mut r = v1.sub(&v0)?;
        r.scale(T::one() / dt);
        r.axpy(-T::one(), &crate::operators::laplacian(&v1))?;
        r.axpy(T::one(), &advection(problem, &v0, n - 1, time.time(n - 1)))?;
        r.axpy(T::one(), &gradient(&p1.clone().with_bc(Boundary::Neumann))?.with_bc(Boundary::Dirichlet))?;
        r.axpy(-T::one(), &problem.source.mac(&geom, n, time.time(n)).with_bc(Boundary::Dirichlet))?;
        let unsplit = to_f64(interior_l2(&r));
        r.axpy(-T::one(), &crate::operators::laplacian(&split))?;
        out.push(StepResidual {
            step: n,
            momentum: to_f64(interior_l2(&r)),
            unsplit,
            divergence: to_f64(l2_norm(&divergence(&v1)?)),
            splitting: to_f64(interior_l2(&split)),
        });
    }
    Ok(out)
}

/// `‖u − w‖_{L²(Q)}` over two series on the same layout, trapezoid in time.
pub fn space_time_error<T: Real>(u: &TimeSeriesField<T>, w: &TimeSeriesField<T>) -> Result<T> {
    if u.len() != w.len() {
        return Err(LabError::contract("series lengths differ"));
    }
    let tw = crate::grid::time_weights(u.len(), u.dt);
    let mut s = T::zero();
    for ((a, b), wt) in u.snapshots.iter().zip(&w.snapshots).zip(&tw) {
        s = s + *wt * l2_norm(&a.sub(b)?).powi(2);
    }
    Ok(s.sqrt())
}

#[cfg(test)]
mod tests;
