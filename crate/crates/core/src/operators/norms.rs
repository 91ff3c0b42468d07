use serde::Serialize;

use crate::error::{LabError, Result};
use crate::grid::{integrate_sq, time_weights, Field, Grid, Region, TimeSeriesField};
use crate::operators::stencil::{diff, second_diff, Ghost};
use crate::scalar::Real;

/// Spatial Sobolev space of a norm.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SpaceNorm {
    L2,
    H1,
    H2,
}

impl SpaceNorm {
    fn order(self) -> usize {
        match self {
            SpaceNorm::L2 => 0,
            SpaceNorm::H1 => 1,
            SpaceNorm::H2 => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum NormRegion {
    Domain,
    Omega,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum EvalMode {
    /// `H^k(0,T; X)` over the series.
    SpaceTime,
    /// `X` norm of the snapshot at `t0`.
    FixedTime,
}

/// Which norm to evaluate, e.g. `H²(0,T;H¹(ω))`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct NormSpec {
    pub time_order: usize,
    pub space: SpaceNorm,
    pub region: NormRegion,
    pub mode: EvalMode,
}

impl NormSpec {
    pub fn new(time_order: usize, space: SpaceNorm, region: NormRegion, mode: EvalMode) -> Result<Self> {
        if time_order > 2 {
            return Err(LabError::contract("time regularity order must be 0, 1 or 2"));
        }
        if mode == EvalMode::FixedTime && time_order > 0 {
            return Err(LabError::contract("fixed-time norms have no time regularity"));
        }
        Ok(NormSpec { time_order, space, region, mode })
    }

    pub fn space_time(time_order: usize, space: SpaceNorm, region: NormRegion) -> Self {
        Self::new(time_order, space, region, EvalMode::SpaceTime).expect("valid space-time norm")
    }

    pub fn at_t0(space: SpaceNorm, region: NormRegion) -> Self {
        NormSpec { time_order: 0, space, region, mode: EvalMode::FixedTime }
    }
}

/// Input of [`sobolev_norm`].
#[derive(Clone, Copy, Debug)]
pub enum NormInput<'a, T> {
    Field(&'a Field<T>),
    Series(&'a TimeSeriesField<T>),
}

fn region_of(r: NormRegion) -> Region {
    match r {
        NormRegion::Domain => Region::Domain,
        NormRegion::Omega => Region::Omega,
    }
}

/// `Σ_{|γ| ≤ order} ‖∂^γ f‖²` over the region; mixed derivatives are counted once.
pub fn spatial_sq<T: Real>(f: &Field<T>, grid: &Grid<T>, space: SpaceNorm, region: Region) -> Result<T> {
    let order = space.order();
    let mut total = integrate_sq(f, grid, region, None)?;
    let dim = f.geom.dim;
    for c in &f.comps {
        if order >= 1 {
            for a in 0..dim {
                let d = diff(c, &f.geom, a, Ghost::of(f.bc));
                total = total + integrate_sq(&Field { geom: f.geom, comps: vec![d], bc: f.bc }, grid, region, None)?;
            }
        }
        if order >= 2 {
            for a in 0..dim {
                for b in a..dim {
                    let d = second_diff(c, &f.geom, a, b, f.bc);
                    total = total + integrate_sq(&Field { geom: f.geom, comps: vec![d], bc: f.bc }, grid, region, None)?;
                }
            }
        }
    }
    Ok(total)
}

/// Square root of the sum of squared quadratures of every required
/// derivative, time derivatives by finite differences of the series.
pub fn sobolev_norm<T: Real>(input: NormInput<'_, T>, grid: &Grid<T>, spec: NormSpec) -> Result<T> {
    let region = region_of(spec.region);
    match (input, spec.mode) {
        (NormInput::Field(f), EvalMode::FixedTime) => Ok(spatial_sq(f, grid, spec.space, region)?.sqrt()),
        (NormInput::Field(_), EvalMode::SpaceTime) => {
            Err(LabError::contract("space-time norm needs a time series"))
        }
        (NormInput::Series(s), EvalMode::FixedTime) => {
            let k = ((grid.time.t0() - s.t_start) / s.dt).round().to_usize();
            match k.and_then(|k| s.snapshots.get(k)) {
                Some(f) => Ok(spatial_sq(f, grid, spec.space, region)?.sqrt()),
                None => Err(LabError::contract("series does not contain t0")),
            }
        }
        (NormInput::Series(s), EvalMode::SpaceTime) => {
            if spec.time_order > 0 && s.len() < 3 {
                return Err(LabError::contract("not enough snapshots for time derivatives"));
            }
            let w = time_weights(s.len(), s.dt);
            let mut total = T::zero();
            for k in 0..=spec.time_order {
                let d = s.time_derivative(k)?;
                for (snap, wt) in d.snapshots.iter().zip(&w) {
                    total = total + *wt * spatial_sq(snap, grid, spec.space, region)?;
                }
            }
            Ok(total.max(T::zero()).sqrt())
        }
    }
}

/// Observation norm `‖v‖_{H²(0,T;H¹(ω))} + ‖v(·,t0)‖_{H²(Ω)}`.
pub fn data_norm<T: Real>(v: &TimeSeriesField<T>, grid: &Grid<T>) -> Result<T> {
    let interior = sobolev_norm(NormInput::Series(v), grid, NormSpec::space_time(2, SpaceNorm::H1, NormRegion::Omega))?;
    let snapshot = sobolev_norm(NormInput::Series(v), grid, NormSpec::at_t0(SpaceNorm::H2, NormRegion::Domain))?;
    Ok(interior + snapshot)
}

/// Source norm `‖F‖_{H²(0,T;L²(Ω))}`.
pub fn source_norm<T: Real>(f: &TimeSeriesField<T>, grid: &Grid<T>) -> Result<T> {
    sobolev_norm(NormInput::Series(f), grid, NormSpec::space_time(2, SpaceNorm::L2, NormRegion::Domain))
}
