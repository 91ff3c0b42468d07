use serde::Serialize;

use super::admissible::{check_admissible, AdmissibleCertificate, COLLAR_CELLS};
use super::stability::{observation_norm, ObservationWindow};
use crate::error::{LabError, Result};
use crate::forward::{solve_forward, Coefficient, ForwardProblem};
use crate::grid::{Boundary, Field, Grid, Stagger, TimeSeriesField};
use crate::operators::{gradient, l2_norm, source_norm, SolverConfig};
use crate::scalar::{lit, to_f64, Real};

#[derive(Clone, Debug, Serialize)]
pub struct ObstructionReport {
    pub data_norm: f64,
    pub source_norm: f64,
    /// `‖F‖ / D`; `None` when `D = 0`.
    pub ratio: Option<f64>,
    /// `D / ‖F‖`.
    pub relative_data: Option<f64>,
    /// `‖p(·,t0) − ψ‖ / ‖ψ‖` after removing the mean of `ψ`.
    pub pressure_error: Option<f64>,
    pub max_velocity: f64,
    pub certificate: AdmissibleCertificate,
    pub failed_clauses: Vec<&'static str>,
    pub degenerate: bool,
}

/// Radial bump `amplitude·e^{1−1/(1−r²/ρ²)}` on cell centres. The centre is
/// the first candidate, scanning a coarse lattice, whose disc avoids ω and
/// the boundary collar.
pub fn obstruction_psi<T: Real>(grid: &Grid<T>, amplitude: f64, radius: f64) -> Result<Field<T>> {
    let dim = grid.dim();
    let geom = grid.geom;
    let h = to_f64(geom.max_spacing());
    let ext: Vec<f64> = (0..dim).map(|a| to_f64(geom.extent[a])).collect();
    let margin = radius + (COLLAR_CELLS + 1.0) * h;
    let omega = grid.omega();
    let steps = 40;
    let mut best = None;
    'scan: for i in 0..=steps {
        for j in 0..=steps {
            let c = [i as f64 / steps as f64 * ext[0], j as f64 / steps as f64 * ext[1], 0.5 * ext.get(2).copied().unwrap_or(0.0)];
            if (0..dim).any(|a| c[a] < margin || c[a] > ext[a] - margin) {
                continue;
            }
            if let Some(w) = omega {
                let apart = (0..dim).any(|a| c[a] + radius + h < to_f64(w.lo[a]) || c[a] - radius - h > to_f64(w.hi[a]));
                if !apart {
                    continue;
                }
            }
            best = Some(c);
            break 'scan;
        }
    }
    let c = best.ok_or_else(|| LabError::contract("no room for the potential outside omega and the boundary collar"))?;
    Ok(bump_psi(grid, c, radius, amplitude))
}

/// Radial bump on cell centres around `center`.
pub fn bump_psi<T: Real>(grid: &Grid<T>, center: [f64; 3], radius: f64, amplitude: f64) -> Field<T> {
    let dim = grid.dim();
    Field::scalar_from_fn(grid.geom, Stagger::center(), Boundary::Neumann, |x| {
        let d2: f64 = (0..dim).map(|a| (to_f64(x[a]) - center[a]).powi(2)).sum::<f64>() / (radius * radius);
        lit::<T>(if d2 < 1.0 { amplitude * (1.0 - 1.0 / (1.0 - d2)).exp() } else { 0.0 })
    })
}

/// Runs the forward problem with `F = ∇ψ`, `A = B = 0`, `v0 = 0` and
/// reports how little of `F` the observations see.
pub fn obstruction_demo<T: Real>(psi: &Field<T>, grid: &Grid<T>, solver: SolverConfig) -> Result<ObstructionReport> {
    if !psi.is_scalar() || psi.comps[0].stagger != Stagger::center() || psi.geom != grid.geom {
        return Err(LabError::contract("the potential is a cell-centred scalar on the grid"));
    }
    let c = &psi.comps[0];
    let geom = grid.geom;
    for (i, v) in c.data.iter().enumerate() {
        let x = c.position(&geom, i);
        let near = (0..geom.dim).any(|a| {
            let w = lit::<T>(COLLAR_CELLS) * geom.spacing[a];
            x[a] < w || geom.extent[a] - x[a] < w
        });
        if near && *v != T::zero() {
            return Err(LabError::contract("the potential must vanish near the boundary"));
        }
    }
    let mut f = gradient(&psi.clone().with_bc(Boundary::Neumann))?.with_bc(Boundary::Dirichlet);
    f.enforce_boundary();
    let time = grid.time;
    let series = TimeSeriesField::new(vec![f; time.nodes()], time.dt, T::zero())?;
    let certificate = check_admissible(&series, 0.0, grid)?;
    let problem = ForwardProblem { solver, ..ForwardProblem::new(grid.clone(), Coefficient::Series(series.clone())) };
    let sol = solve_forward(&problem)?;
    let d = to_f64(observation_norm(&sol.velocity, grid, ObservationWindow::Full)?);
    let fnorm = to_f64(source_norm(&series, grid)?);
    let max_velocity = sol.velocity.snapshots.iter().map(|v| to_f64(v.max_abs())).fold(0.0, f64::max);
    let pressure_error = {
        let mean = c.data.iter().copied().sum::<T>() / lit::<T>(c.data.len() as f64);
        let centred = psi.map_with_position(|_, v| v - mean);
        let p0 = &sol.pressure.snapshots[time.t0_index];
        let n = to_f64(l2_norm(&centred));
        (n > 0.0).then(|| to_f64(l2_norm(&p0.clone().with_bc(centred.bc).sub(&centred).expect("same lattice"))) / n)
    };
    let degenerate = fnorm == 0.0;
    Ok(ObstructionReport {
        data_norm: d,
        source_norm: fnorm,
        ratio: (d > 0.0).then(|| fnorm / d),
        relative_data: (fnorm > 0.0).then(|| d / fnorm),
        pressure_error,
        max_velocity,
        failed_clauses: certificate.failed(),
        certificate,
        degenerate,
    })
}
