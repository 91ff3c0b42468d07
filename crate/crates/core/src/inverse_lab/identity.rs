use serde::Serialize;

use crate::error::{LabError, Result};
use crate::forward::{advection, ForwardProblem, Solution};
use crate::grid::{time_stencil, Boundary, Field};
use crate::operators::{gradient, laplacian, rot};
use crate::scalar::{to_f64, Real};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IdentityResidual {
    /// `‖rot F − rot ∂ₜv − rot a‖` at `t0` over interior samples.
    pub identity: f64,
    /// `‖rot(∂ₜv + a + ∇p − F)‖`, the rotation of the momentum residual.
    pub momentum_rot: f64,
    /// `‖rot F(·,t0)‖`.
    pub source_rot: f64,
}

impl IdentityResidual {
    pub fn relative(&self) -> Option<f64> {
        (self.source_rot > 0.0).then(|| self.identity / self.source_rot)
    }
}

fn interior_norm<T: Real>(f: &Field<T>) -> f64 {
    let geom = f.geom;
    let vol = to_f64(geom.cell_volume());
    let mut acc = 0.0;
    for c in &f.comps {
        for (i, v) in c.data.iter().enumerate() {
            if !c.on_boundary(&geom, i) {
                acc += to_f64(*v * *v) * vol;
            }
        }
    }
    acc.sqrt()
}

/// Residual of `rot F(·,t0) = rot ∂ₜv(·,t0) + rot a` with
/// `a = −Δv + (A·∇)v + (v·∇)B` at `t0`; `∂ₜv` by central differences.
pub fn rot_source_identity_check<T: Real>(sol: &Solution<T>, problem: &ForwardProblem<T>) -> Result<IdentityResidual> {
    let grid = &problem.grid;
    let time = grid.time;
    let v = &sol.velocity;
    if v.len() != time.nodes() {
        return Err(LabError::contract("solution does not match the problem's time axis"));
    }
    let k0 = time.t0_index;
    let t0 = time.t0();
    let mut dv = v.snapshots[k0].zeros_like();
    for (j, w) in time_stencil(1, k0, v.len(), time.dt) {
        dv.axpy(w, &v.snapshots[j])?;
    }
    let v0 = v.snapshots[k0].clone().with_bc(Boundary::Dirichlet);
    let mut a = laplacian(&v0).scaled(-T::one());
    a.axpy(T::one(), &advection(problem, &v0, k0, t0))?;
    let mut f = problem.source.mac(&grid.geom, k0, t0).with_bc(Boundary::Dirichlet);
    f.enforce_boundary();

    let with = |x: Field<T>| x.with_bc(Boundary::Dirichlet);
    let rf = rot(&f)?;
    let rdv = rot(&with(dv.clone()))?;
    let ra = rot(&with(a.clone()))?;
    let mut id = rf.clone();
    id.axpy(-T::one(), &rdv)?;
    id.axpy(-T::one(), &ra)?;

    let mut m = dv;
    m.axpy(T::one(), &a)?;
    let gp = gradient(&sol.pressure.snapshots[k0].clone().with_bc(Boundary::Neumann))?;
    m.axpy(T::one(), &gp.with_bc(m.bc))?;
    m.axpy(-T::one(), &f)?;
    let rm = rot(&with(m))?;
    Ok(IdentityResidual { identity: interior_norm(&id), momentum_rot: interior_norm(&rm), source_rot: interior_norm(&rf) })
}
