//! End-to-end experiments for the inverse source problem: admissible
//! sources, stability ratios, the gradient-source obstruction, the two
//! worked examples of admissible sources and the rotation identity at `t0`.

mod admissible;
mod examples;
mod identity;
mod obstruction;
mod stability;

pub use admissible::{
    check_admissible, sample_admissible, AdmissibleCertificate, AdmissibleSource, Clause, SourceParams, TimeFamily, CLAUSE_ALIGNMENT,
    CLAUSE_COLLAR, CLAUSE_DERIVATIVES, CLAUSE_DIVERGENCE, CLAUSE_OMEGA, COLLAR_CELLS, SIGMA_TARGET,
};
pub use examples::{cross_mac, example_i_check, example_ii_check, ExampleIIReport, ExampleIReport, Matrix3, R3_FLOOR};
pub use identity::{rot_source_identity_check, IdentityResidual};
pub use obstruction::{bump_psi, obstruction_demo, obstruction_psi, ObstructionReport};
pub use stability::{observation_norm, stability_experiment, ObservationWindow, ProblemTemplate, StabilityReport, StabilityRow, StabilitySummary};

use crate::error::{LabError, Result};
use crate::grid::{Grid, TimeAxis, TimeSeriesField};
use crate::scalar::{count, Real};

/// Restricts a series to `[t_c − δ, t_c + δ]`, `δ = half_steps·dt`, on a new
/// axis whose midpoint is `t_c`; this moves `t0` to an arbitrary node.
pub fn recentre<T: Real>(grid: &Grid<T>, series: &TimeSeriesField<T>, center: usize, half_steps: usize) -> Result<(Grid<T>, TimeSeriesField<T>)> {
    if center < half_steps || center + half_steps >= series.len() {
        return Err(LabError::contract("window leaves the time axis"));
    }
    let steps = 2 * half_steps;
    let time = TimeAxis::new(series.dt * count::<T>(steps), steps)?;
    let mut g = grid.clone();
    g.time = time;
    let sub = TimeSeriesField::new(series.snapshots[center - half_steps..=center + half_steps].to_vec(), series.dt, T::zero())?;
    Ok((g, sub))
}
