use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::grid::{time_stencil, BoxRegion, Boundary, Field, Geometry, Grid, Region, Stagger, TimeSeriesField};
use crate::operators::{divergence, rot_scalar};
use crate::scalar::{lit, to_f64, Real};

/// Width of the zero collar along `∂Ω`, in cells.
pub const COLLAR_CELLS: f64 = 2.0;

/// Share of `M` used when the time amplitude is calibrated automatically.
pub const SIGMA_TARGET: f64 = 0.9;

/// Shape `ρ` of the time factor `1 + σ(t − t0)ρ(t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum TimeFamily {
    Linear,
    /// `cos(2π·cycles·(t − t0)/T)`.
    Cosine { cycles: f64 },
    /// `exp(−((t − t0)/(width·T))²)`.
    Gaussian { width: f64 },
}

impl TimeFamily {
    pub fn parse(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let num = |d: f64| -> Result<f64> {
            arg.map_or(Ok(d), |a| a.trim().parse().map_err(|_| LabError::contract(format!("bad time family parameter '{a}'"))))
        };
        match name.trim() {
            "linear" => Ok(TimeFamily::Linear),
            "cosine" => Ok(TimeFamily::Cosine { cycles: num(1.0)? }),
            "gaussian" => Ok(TimeFamily::Gaussian { width: num(0.25)? }),
            other => Err(LabError::contract(format!("unknown time family '{other}' (linear, cosine[:cycles], gaussian[:width])"))),
        }
    }

    /// `g(t) = (t − t0)ρ(t)`.
    fn g(self, t: f64, t0: f64, horizon: f64) -> f64 {
        let u = t - t0;
        let rho = match self {
            TimeFamily::Linear => 1.0,
            TimeFamily::Cosine { cycles } => (2.0 * std::f64::consts::PI * cycles * u / horizon).cos(),
            TimeFamily::Gaussian { width } => (-(u / (width * horizon)).powi(2)).exp(),
        };
        u * rho
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SourceParams {
    pub amplitude: f64,
    /// Support of the potential; drawn from the seed when absent.
    pub support: Option<BoxRegion<f64>>,
    pub m_bound: f64,
    pub family: TimeFamily,
    /// Time amplitude; calibrated to `SIGMA_TARGET·M` when absent.
    pub sigma: Option<f64>,
    /// Number of bumps in the potential.
    pub bumps: usize,
}

impl Default for SourceParams {
    fn default() -> Self {
        SourceParams { amplitude: 1.0, support: None, m_bound: 5.0, family: TimeFamily::Cosine { cycles: 1.0 }, sigma: None, bumps: 2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Clause {
    pub name: &'static str,
    pub passed: bool,
    pub value: f64,
    pub limit: f64,
}

/// Discrete evaluation of every clause of the admissible set.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AdmissibleCertificate {
    pub clauses: Vec<Clause>,
    pub m_bound: f64,
    /// `max_k max |∂ₜᵏF(x,t)| / |F(x,t0)|` over samples with `F(x,t0) ≠ 0`.
    pub derivative_ratio: f64,
}

impl AdmissibleCertificate {
    pub fn passed(&self) -> bool {
        self.clauses.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> Vec<&'static str> {
        self.clauses.iter().filter(|c| !c.passed).map(|c| c.name).collect()
    }
}

pub const CLAUSE_DIVERGENCE: &str = "divergence_t0";
pub const CLAUSE_OMEGA: &str = "vanishes_on_omega";
pub const CLAUSE_COLLAR: &str = "vanishes_on_collar";
pub const CLAUSE_ALIGNMENT: &str = "support_alignment";
pub const CLAUSE_DERIVATIVES: &str = "derivative_bound";

/// Relative tolerance of the exact-zero clauses.
const ZERO_TOLERANCE: f64 = 1e-12;

fn in_collar<T: Real>(geom: &Geometry<T>, x: [T; 3]) -> bool {
    (0..geom.dim).any(|a| {
        let w = lit::<T>(COLLAR_CELLS * (1.0 + 1e-9)) * geom.spacing[a];
        x[a] < w || geom.extent[a] - x[a] < w
    })
}

pub(crate) fn t0_snapshot<'a, T: Real>(f: &'a TimeSeriesField<T>, grid: &Grid<T>) -> Result<&'a Field<T>> {
    let k = ((grid.time.t0() - f.t_start) / f.dt).round().to_usize().filter(|k| *k < f.len());
    let k = k.ok_or_else(|| LabError::contract("source series does not contain t0"))?;
    Ok(&f.snapshots[k])
}

/// Evaluates each clause of the admissible set for `f` with bound `M`.
pub fn check_admissible<T: Real>(f: &TimeSeriesField<T>, m_bound: f64, grid: &Grid<T>) -> Result<AdmissibleCertificate> {
    if *f.geom() != grid.geom || !f.snapshots[0].is_mac() {
        return Err(LabError::contract("source must be a MAC series on the grid"));
    }
    let f0 = t0_snapshot(f, grid)?;
    let geom = grid.geom;
    let fmax = f.snapshots.iter().map(|s| to_f64(s.max_abs())).fold(0.0, f64::max);
    let f0max = to_f64(f0.max_abs());
    let h = to_f64(geom.min_spacing());

    let mut f0_dirichlet = f0.clone().with_bc(Boundary::Dirichlet);
    f0_dirichlet.enforce_boundary();
    let div = to_f64(divergence(&f0_dirichlet)?.max_abs());
    let div_limit = 1e-9 * f0max / h;

    let (mut on_omega, mut on_collar, mut misaligned) = (0.0f64, 0.0f64, 0.0f64);
    let omega_masks: Vec<Vec<bool>> = f0.comps.iter().map(|c| if grid.omega().is_some() { grid.mask(c.stagger, Region::Omega) } else { vec![false; c.data.len()] }).collect();
    for snap in &f.snapshots {
        for (ci, c) in snap.comps.iter().enumerate() {
            for (i, v) in c.data.iter().enumerate() {
                let a = to_f64(v.abs());
                if a == 0.0 {
                    continue;
                }
                if omega_masks[ci][i] {
                    on_omega = on_omega.max(a);
                }
                if in_collar(&geom, c.position(&geom, i)) {
                    on_collar = on_collar.max(a);
                }
                if f0.comps[ci].data[i] == T::zero() {
                    misaligned = misaligned.max(a);
                }
            }
        }
    }

    let n = f.len();
    let mut ratio = 0.0f64;
    for order in 1..=2 {
        for k in 0..n {
            let st = time_stencil(order, k, n, f.dt);
            for (ci, c0) in f0.comps.iter().enumerate() {
                for (i, base) in c0.data.iter().enumerate() {
                    if *base == T::zero() {
                        continue;
                    }
                    let (mut d, mut scale) = (T::zero(), T::zero());
                    for (j, w) in &st {
                        let x = *w * f.snapshots[*j].comps[ci].data[i];
                        d = d + x;
                        scale = scale + x.abs();
                    }
                    // differences of equal samples cancel only up to rounding
                    if d.abs() <= lit::<T>(64.0) * T::epsilon() * scale {
                        continue;
                    }
                    ratio = ratio.max(to_f64((d / *base).abs()));
                }
            }
        }
    }
    let zero_limit = ZERO_TOLERANCE * fmax;
    let clause = |name, value: f64, limit: f64| Clause { name, passed: value <= limit, value, limit };
    let clauses = vec![
        clause(CLAUSE_DIVERGENCE, div, div_limit),
        clause(CLAUSE_OMEGA, on_omega, zero_limit),
        clause(CLAUSE_COLLAR, on_collar, zero_limit),
        clause(CLAUSE_ALIGNMENT, misaligned, zero_limit),
        clause(CLAUSE_DERIVATIVES, ratio, m_bound * (1.0 + 1e-9)),
    ];
    Ok(AdmissibleCertificate { clauses, m_bound, derivative_ratio: ratio })
}

/// A sampled source together with its certificate.
#[derive(Clone, Debug)]
pub struct AdmissibleSource<T> {
    pub id: String,
    pub seed: u64,
    pub series: TimeSeriesField<T>,
    pub params: SourceParams,
    pub support: BoxRegion<f64>,
    pub sigma: f64,
    pub certificate: AdmissibleCertificate,
}

impl<T: Real> AdmissibleSource<T> {
    /// Same source with the amplitude multiplied by `c`.
    pub fn scaled(&self, c: T) -> Self {
        let mut out = self.clone();
        out.series = self.series.scaled(c);
        out.params.amplitude *= to_f64(c);
        out
    }
}

fn radial_bump(x: [f64; 3], c: [f64; 3], r: f64, dim: usize) -> f64 {
    let d2: f64 = (0..dim).map(|a| (x[a] - c[a]).powi(2)).sum::<f64>() / (r * r);
    if d2 < 1.0 {
        (1.0 - 1.0 / (1.0 - d2)).exp()
    } else {
        0.0
    }
}

/// Margins used when a support box is drawn. They do not depend on the
/// resolution, so a seed gives the same source on every grid of 20 cells or
/// more.
const DRAW_MARGIN: f64 = 0.1;
const DRAW_GAP: f64 = 0.05;

fn draw_box(grid: &Grid<f64>, omega: &BoxRegion<f64>, rng: &mut ChaCha8Rng) -> Result<BoxRegion<f64>> {
    let dim = grid.dim();
    // the box sits in the strip between the collar and omega along one axis
    let axis = rng.gen_range(0..dim);
    let upper = rng.gen_bool(0.5);
    let mut lo = [0.0; 3];
    let mut hi = [0.0; 3];
    for a in 0..dim {
        let ext = grid.geom.extent[a];
        let (from, to) = if a != axis {
            (DRAW_MARGIN * ext, (1.0 - DRAW_MARGIN) * ext)
        } else if upper {
            (omega.hi[a] + DRAW_GAP, (1.0 - DRAW_MARGIN) * ext)
        } else {
            (DRAW_MARGIN * ext, omega.lo[a] - DRAW_GAP)
        };
        if to - from < 0.05 * ext {
            return Err(LabError::contract("no support box fits outside omega and the boundary collar"));
        }
        let side = if a == axis { rng.gen_range(0.6..1.0) * (to - from) } else { rng.gen_range(0.15..0.4) * ext };
        let side = side.min(to - from);
        let start = rng.gen_range(from..=to - side);
        lo[a] = start;
        hi[a] = start + side;
    }
    let b = BoxRegion { lo, hi };
    check_box(grid, &b, omega)?;
    Ok(b)
}

fn check_box(grid: &Grid<f64>, b: &BoxRegion<f64>, omega: &BoxRegion<f64>) -> Result<()> {
    let dim = grid.dim();
    let geom = &grid.geom;
    for a in 0..dim {
        let w = COLLAR_CELLS * geom.spacing[a];
        if !(b.lo[a] > w && b.hi[a] < geom.extent[a] - w && b.lo[a] < b.hi[a]) {
            return Err(LabError::contract("support box reaches into the boundary collar"));
        }
    }
    let h = geom.max_spacing();
    let apart = (0..dim).any(|a| b.hi[a] + h < omega.lo[a] || b.lo[a] - h > omega.hi[a]);
    if !apart {
        return Err(LabError::contract("support box intersects omega"));
    }
    Ok(())
}

/// `F(x,t) = F₀(x)(1 + σ(t − t0)ρ(t))` with `F₀ = rot q`, `q` a sum of
/// bumps inside the support box. 2D only.
pub fn sample_admissible<T: Real>(seed: u64, params: &SourceParams, grid: &Grid<T>) -> Result<AdmissibleSource<T>> {
    if grid.dim() != 2 {
        return Err(LabError::contract("admissible sources are sampled in 2D (scalar rotation potential)"));
    }
    if !(params.amplitude.is_finite() && params.amplitude >= 0.0 && params.m_bound >= 0.0 && params.bumps >= 1) {
        return Err(LabError::contract("amplitude and M must be non-negative and bumps at least 1"));
    }
    let grid64 = grid.cast::<f64>()?;
    let omega = grid64.omega().copied().ok_or_else(|| LabError::contract("omega must be set"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let support = match &params.support {
        Some(b) => {
            check_box(&grid64, b, &omega)?;
            *b
        }
        None => draw_box(&grid64, &omega, &mut rng)?,
    };
    let dim = 2;
    let mut bumps = Vec::with_capacity(params.bumps);
    for _ in 0..params.bumps {
        let half: Vec<f64> = (0..dim).map(|a| 0.5 * (support.hi[a] - support.lo[a])).collect();
        let rmax = half.iter().copied().fold(f64::INFINITY, f64::min);
        let r = rng.gen_range(0.5..0.95) * rmax;
        let mut c = [0.0; 3];
        for a in 0..dim {
            c[a] = rng.gen_range(support.lo[a] + r..support.hi[a] - r);
        }
        let amp = rng.gen_range(0.5..1.5) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        bumps.push((c, r, amp));
    }
    let q = Field::scalar_from_fn(grid.geom, Stagger::node(2), Boundary::Dirichlet, |x| {
        let p = x.map(to_f64);
        lit::<T>(bumps.iter().map(|(c, r, a)| a * radial_bump(p, *c, *r, dim)).sum::<f64>())
    });
    let mut f0 = rot_scalar(&q)?.with_bc(Boundary::Dirichlet);
    let peak = to_f64(f0.max_abs());
    if peak == 0.0 {
        return Err(LabError::contract("support box too small for the grid: potential vanishes on every node"));
    }
    f0.scale(lit::<T>(params.amplitude / peak));

    let time = grid.time;
    let (t0, horizon) = (to_f64(time.t0()), to_f64(time.horizon));
    let n = time.nodes();
    let g: Vec<f64> = (0..n).map(|k| params.family.g(to_f64(time.time(k)), t0, horizon)).collect();
    let dt = to_f64(time.dt);
    let mut worst = 0.0f64;
    for order in 1..=2 {
        for k in 0..n {
            let d = time_stencil(order, k, n, dt).iter().fold(0.0, |acc, (j, w)| acc + w * g[*j]);
            worst = worst.max(d.abs());
        }
    }
    let sigma = match params.sigma {
        Some(s) => {
            let need = s.abs() * worst;
            if need > params.m_bound * (1.0 + 1e-9) {
                return Err(LabError::contract(format!(
                    "M = {} too small for the requested time profile; minimal feasible M is {need:.6}",
                    params.m_bound
                )));
            }
            s
        }
        None if worst > 0.0 => SIGMA_TARGET * params.m_bound / worst,
        None => 0.0,
    };
    let snaps = g.iter().map(|gk| f0.scaled(lit::<T>(1.0 + sigma * gk))).collect();
    let series = TimeSeriesField::new(snaps, time.dt, T::zero())?;
    let certificate = check_admissible(&series, params.m_bound, grid)?;
    Ok(AdmissibleSource { id: format!("src-{seed:04}"), seed, series, params: params.clone(), support, sigma, certificate })
}
