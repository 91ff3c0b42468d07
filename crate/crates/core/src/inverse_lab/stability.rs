use rayon::prelude::*;
use serde::Serialize;

use super::admissible::AdmissibleSource;
use crate::error::{LabError, Result};
use crate::forward::{solve_forward, Coefficient, ForwardProblem};
use crate::grid::{Boundary, Field, Grid, TimeSeriesField};
use crate::operators::{sobolev_norm, source_norm, NormInput, NormRegion, NormSpec, SolverConfig, SpaceNorm};
use crate::scalar::{lit, to_f64, Real};

/// Coefficients, initial velocity and solver settings shared by every run.
#[derive(Clone, Debug)]
pub struct ProblemTemplate<T> {
    pub grid: Grid<T>,
    pub a: Coefficient<T>,
    pub b: Coefficient<T>,
    pub v0: Field<T>,
    pub solver: SolverConfig,
}

impl<T: Real> ProblemTemplate<T> {
    pub fn new(grid: Grid<T>) -> Self {
        let v0 = Field::mac(grid.geom, Boundary::Dirichlet);
        ProblemTemplate { grid, a: Coefficient::Zero, b: Coefficient::Zero, v0, solver: SolverConfig::default() }
    }

    pub fn with_coefficients(mut self, a: Coefficient<T>, b: Coefficient<T>) -> Self {
        self.a = a;
        self.b = b;
        self
    }

    /// `A = c·(sin πy, sin πx)`, `B = c·(xy, cos πx)·(1 + t)`, 2D only.
    pub fn with_default_coefficients(self, c: f64) -> Self {
        let pi = T::PI();
        let c = lit::<T>(c);
        let a = Coefficient::analytic(move |x: [T; 3], _t: T| [c * (pi * x[1]).sin(), c * (pi * x[0]).sin(), T::zero()]);
        let b = Coefficient::analytic(move |x: [T; 3], t: T| {
            let s = c * (T::one() + t);
            [s * x[0] * x[1], s * (pi * x[0]).cos(), T::zero()]
        });
        self.with_coefficients(a, b)
    }

    pub fn problem(&self, source: &TimeSeriesField<T>) -> ForwardProblem<T> {
        ForwardProblem {
            grid: self.grid.clone(),
            a: self.a.clone(),
            b: self.b.clone(),
            source: Coefficient::Series(source.clone()),
            v0: self.v0.clone(),
            solver: self.solver,
        }
    }
}

/// Time interval of the interior observations in `D`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum ObservationWindow {
    Full,
    /// `[start·T, end·T]`, rounded to time nodes.
    Interior { start: f64, end: f64 },
}

impl ObservationWindow {
    fn range(self, steps: usize) -> Result<(usize, usize)> {
        match self {
            ObservationWindow::Full => Ok((0, steps)),
            ObservationWindow::Interior { start, end } => {
                if !(0.0..1.0).contains(&start) || !(start < end && end <= 1.0) {
                    return Err(LabError::contract("observation window must satisfy 0 <= start < end <= 1"));
                }
                let a = (start * steps as f64).round() as usize;
                let b = (end * steps as f64).round() as usize;
                if b < a + 2 {
                    return Err(LabError::contract("observation window needs at least three time nodes"));
                }
                Ok((a, b))
            }
        }
    }
}

/// `‖v‖_{H²(I;H¹(ω))} + ‖v(·,t0)‖_{H²(Ω)}` for the window `I`.
pub fn observation_norm<T: Real>(v: &TimeSeriesField<T>, grid: &Grid<T>, window: ObservationWindow) -> Result<T> {
    let (a, b) = window.range(v.len() - 1)?;
    let sub = TimeSeriesField::new(v.snapshots[a..=b].to_vec(), v.dt, v.time(a))?;
    let interior = sobolev_norm(NormInput::Series(&sub), grid, NormSpec::space_time(2, SpaceNorm::H1, NormRegion::Omega))?;
    let snapshot = sobolev_norm(NormInput::Series(v), grid, NormSpec::at_t0(SpaceNorm::H2, NormRegion::Domain))?;
    Ok(interior + snapshot)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityRow {
    pub source_id: String,
    pub seed: u64,
    pub source_norm: f64,
    pub data_norm: f64,
    /// `‖F‖ / D`, defined for `D > 0`.
    pub ratio: Option<f64>,
    pub degenerate: bool,
    pub error: Option<String>,
    pub helmholtz_iterations: usize,
    pub poisson_iterations: usize,
    pub max_relative_divergence: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilitySummary {
    pub sources: usize,
    pub used: usize,
    pub degenerate: usize,
    pub failed: usize,
    pub min_ratio: Option<f64>,
    pub median_ratio: Option<f64>,
    pub max_ratio: Option<f64>,
    /// `max / median`.
    pub spread: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityReport {
    pub rows: Vec<StabilityRow>,
    pub summary: StabilitySummary,
    pub window: ObservationWindow,
}

fn run_row<T: Real>(src: &AdmissibleSource<T>, template: &ProblemTemplate<T>, window: ObservationWindow) -> StabilityRow {
    let mut row = StabilityRow {
        source_id: src.id.clone(),
        seed: src.seed,
        source_norm: f64::NAN,
        data_norm: f64::NAN,
        ratio: None,
        degenerate: false,
        error: None,
        helmholtz_iterations: 0,
        poisson_iterations: 0,
        max_relative_divergence: 0.0,
    };
    let grid = &template.grid;
    let outcome = (|| -> Result<()> {
        row.source_norm = to_f64(source_norm(&src.series, grid)?);
        let sol = solve_forward(&template.problem(&src.series))?;
        row.helmholtz_iterations = sol.work.iter().map(|w| w.helmholtz).sum();
        row.poisson_iterations = sol.work.iter().map(|w| w.poisson).sum();
        row.max_relative_divergence = sol.max_relative_divergence();
        row.data_norm = to_f64(observation_norm(&sol.velocity, grid, window)?);
        Ok(())
    })();
    match outcome {
        Err(e) => row.error = Some(e.to_string()),
        Ok(()) if row.data_norm > 0.0 => row.ratio = Some(row.source_norm / row.data_norm),
        Ok(()) => row.degenerate = true,
    }
    row
}

fn summarize(rows: &[StabilityRow]) -> StabilitySummary {
    let mut ratios: Vec<f64> = rows.iter().filter_map(|r| r.ratio).collect();
    ratios.sort_by(f64::total_cmp);
    let median = if ratios.is_empty() {
        None
    } else if ratios.len() % 2 == 1 {
        Some(ratios[ratios.len() / 2])
    } else {
        Some(0.5 * (ratios[ratios.len() / 2 - 1] + ratios[ratios.len() / 2]))
    };
    let max = ratios.last().copied();
    StabilitySummary {
        sources: rows.len(),
        used: ratios.len(),
        degenerate: rows.iter().filter(|r| r.degenerate).count(),
        failed: rows.iter().filter(|r| r.error.is_some()).count(),
        min_ratio: ratios.first().copied(),
        median_ratio: median,
        max_ratio: max,
        spread: match (max, median) {
            (Some(m), Some(d)) if d > 0.0 => Some(m / d),
            _ => None,
        },
    }
}

/// Solves the forward problem for every source and tabulates `‖F‖/D`.
/// Rows run in parallel and come back in source order.
pub fn stability_experiment<T: Real>(
    sources: &[AdmissibleSource<T>],
    template: &ProblemTemplate<T>,
    window: ObservationWindow,
) -> Result<StabilityReport> {
    if sources.len() < 2 {
        return Err(LabError::contract(format!("need ≥ 2 sources, got {}", sources.len())));
    }
    for s in sources {
        if !s.certificate.passed() {
            return Err(LabError::Certificate(format!("source {} is not admissible: {}", s.id, s.certificate.failed().join(", "))));
        }
        if *s.series.geom() != template.grid.geom || s.series.len() != template.grid.time.nodes() {
            return Err(LabError::contract(format!("source {} was sampled on another grid", s.id)));
        }
    }
    window.range(template.grid.time.steps)?;
    let rows: Vec<StabilityRow> = sources.par_iter().map(|s| run_row(s, template, window)).collect();
    let summary = summarize(&rows);
    Ok(StabilityReport { rows, summary, window })
}
