use serde::Serialize;

use super::{Coefficient, ForwardProblem, Solution, StepWork};
use crate::error::{LabError, Result};
use crate::grid::{Boundary, Field, Grid, Stagger, TimeSeriesField};
use crate::operators::{divergence, gradient, l2_norm, laplacian, rot_scalar};
use crate::scalar::{lit, to_f64, Real};

/// Value and first three derivatives of a function of one variable.
#[derive(Clone, Copy, Debug)]
struct Jet<T>([T; 4]);

impl<T: Real> Jet<T> {
    fn mul(self, o: Jet<T>) -> Jet<T> {
        let (f, g) = (self.0, o.0);
        let three = lit::<T>(3.0);
        let two = lit::<T>(2.0);
        Jet([
            f[0] * g[0],
            f[1] * g[0] + f[0] * g[1],
            f[2] * g[0] + two * f[1] * g[1] + f[0] * g[2],
            f[3] * g[0] + three * f[2] * g[1] + three * f[1] * g[2] + f[0] * g[3],
        ])
    }
}

/// `sin²(ωx)·cos(kωx)`: vanishes with its first derivative at `x = 0` and `x = π/ω`.
fn profile<T: Real>(x: T, omega: T, k: T) -> Jet<T> {
    let w2 = lit::<T>(2.0) * omega;
    let (s, c) = (w2 * x).sin_cos();
    let half = lit::<T>(0.5);
    let sq = Jet([half * (T::one() - c), omega * s, lit::<T>(2.0) * omega * omega * c, -lit::<T>(4.0) * omega.powi(3) * s]);
    let kw = k * omega;
    let (s2, c2) = (kw * x).sin_cos();
    let cosk = Jet([c2, -kw * s2, -kw * kw * c2, kw.powi(3) * s2]);
    sq.mul(cosk)
}

/// One separable term `amp · X_kx(x) · Y_ky(y)` of the stream potential.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Mode {
    pub amp: f64,
    pub kx: f64,
    pub ky: f64,
}

/// Time factor of the manufactured velocity and pressure.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum TimeProfile {
    Steady,
    /// `sin(2π·cycles·t/T)`
    Sine { cycles: f64 },
    /// `e^{−rate·t}`
    Decay { rate: f64 },
    /// `1 + amp·sin(2π·cycles·t/T)`
    Wobble { amp: f64, cycles: f64 },
}

impl TimeProfile {
    fn eval<T: Real>(&self, t: T, horizon: T) -> (T, T) {
        match *self {
            TimeProfile::Steady => (T::one(), T::zero()),
            TimeProfile::Sine { cycles } => {
                let w = lit::<T>(2.0 * cycles) * T::PI() / horizon;
                let (s, c) = (w * t).sin_cos();
                (s, w * c)
            }
            TimeProfile::Decay { rate } => {
                let e = (-lit::<T>(rate) * t).exp();
                (e, -lit::<T>(rate) * e)
            }
            TimeProfile::Wobble { amp, cycles } => {
                let w = lit::<T>(2.0 * cycles) * T::PI() / horizon;
                let (s, c) = (w * t).sin_cos();
                (T::one() + lit::<T>(amp) * s, lit::<T>(amp) * w * c)
            }
        }
    }
}

/// Stream potential `q = τ(t) Σ modes`, pressure `P τ(t) cos(πx/L₁)cos(πy/L₂)`,
/// and analytic coefficients of size `coefficient_amp`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ManufacturedSpec {
    pub modes: Vec<Mode>,
    pub tau: TimeProfile,
    pub pressure: f64,
    pub coefficient_amp: f64,
    /// Whether `A` and `B` vary in time.
    pub coefficients_vary: bool,
    /// Build the source from the discrete operators applied to the sampled
    /// solution, so that the spatially discrete problem is solved exactly by
    /// the samples and only the time discretisation contributes error.
    pub discrete: bool,
}

/// Pointwise data of the manufactured velocity.
struct Point<T> {
    v: [T; 2],
    /// `grad[c][a] = ∂_a v_c`
    grad: [[T; 2]; 2],
    lap: [T; 2],
    dtv: [T; 2],
}

impl ManufacturedSpec {
    /// Spatial factor of the stream potential.
    fn shape<T: Real>(&self, x: [T; 3], ext: [T; 2]) -> T {
        let (wx, wy) = (T::PI() / ext[0], T::PI() / ext[1]);
        self.modes
            .iter()
            .map(|m| lit::<T>(m.amp) * profile(x[0], wx, lit(m.kx)).0[0] * profile(x[1], wy, lit(m.ky)).0[0])
            .sum()
    }

    fn potential<T: Real>(&self, x: [T; 3], t: T, ext: [T; 2], horizon: T) -> T {
        self.tau.eval(t, horizon).0 * self.shape(x, ext)
    }

    fn point<T: Real>(&self, x: [T; 3], t: T, ext: [T; 2], horizon: T) -> Point<T> {
        let (tau, dtau) = self.tau.eval(t, horizon);
        let (wx, wy) = (T::PI() / ext[0], T::PI() / ext[1]);
        let z = T::zero();
        let (mut v1, mut v2, mut d1x, mut d1y, mut d2x, mut l1, mut l2) = (z, z, z, z, z, z, z);
        for m in &self.modes {
            let a = lit::<T>(m.amp);
            let xj = profile(x[0], wx, lit(m.kx)).0;
            let yj = profile(x[1], wy, lit(m.ky)).0;
            v1 = v1 + a * xj[0] * yj[1];
            v2 = v2 - a * xj[1] * yj[0];
            d1x = d1x + a * xj[1] * yj[1];
            d1y = d1y + a * xj[0] * yj[2];
            d2x = d2x - a * xj[2] * yj[0];
            l1 = l1 + a * (xj[2] * yj[1] + xj[0] * yj[3]);
            l2 = l2 - a * (xj[3] * yj[0] + xj[1] * yj[2]);
        }
        Point {
            v: [tau * v1, tau * v2],
            grad: [[tau * d1x, tau * d1y], [tau * d2x, -tau * d1x]],
            lap: [tau * l1, tau * l2],
            dtv: [dtau * v1, dtau * v2],
        }
    }

    fn time_factors<T: Real>(&self, t: T, horizon: T) -> (T, T) {
        if !self.coefficients_vary {
            return (T::one(), T::one());
        }
        let w = lit::<T>(2.0) * T::PI() / horizon;
        let half = lit::<T>(0.5);
        (T::one() + half * (w * t).sin(), T::one() + half * (w * t).cos())
    }

    fn coeff_a<T: Real>(&self, x: [T; 3], t: T, ext: [T; 2], horizon: T) -> [T; 3] {
        let amp = lit::<T>(self.coefficient_amp) * self.time_factors(t, horizon).0;
        let pi = T::PI();
        [amp * (pi * x[1] / ext[1]).sin(), amp * (pi * x[0] / ext[0]).cos(), T::zero()]
    }

    /// `B` and its gradient `gb[c][a] = ∂_a B_c`.
    fn coeff_b<T: Real>(&self, x: [T; 3], t: T, ext: [T; 2], horizon: T) -> ([T; 3], [[T; 2]; 2]) {
        let amp = lit::<T>(self.coefficient_amp) * self.time_factors(t, horizon).1;
        let (wx, wy) = (T::PI() / ext[0], T::PI() / ext[1]);
        let (sx, cx) = (wx * x[0]).sin_cos();
        let (sy, cy) = (wy * x[1]).sin_cos();
        let area = ext[0] * ext[1];
        let b = [amp * sx * cy, amp * x[0] * x[1] / area, T::zero()];
        let gb = [[amp * wx * cx * cy, -amp * wy * sx * sy], [amp * x[1] / area, amp * x[0] / area]];
        (b, gb)
    }

    fn pressure_at<T: Real>(&self, x: [T; 3], t: T, ext: [T; 2], horizon: T) -> (T, [T; 2]) {
        let (tau, _) = self.tau.eval(t, horizon);
        let amp = lit::<T>(self.pressure) * tau;
        let (wx, wy) = (T::PI() / ext[0], T::PI() / ext[1]);
        let (sx, cx) = (wx * x[0]).sin_cos();
        let (sy, cy) = (wy * x[1]).sin_cos();
        (amp * cx * cy, [-amp * wx * sx * cy, -amp * wy * cx * sy])
    }

    /// `∂ₜv − Δv + (A·∇)v + (v·∇)B + ∇p`.
    fn source<T: Real>(&self, x: [T; 3], t: T, ext: [T; 2], horizon: T) -> [T; 3] {
        let pt = self.point(x, t, ext, horizon);
        let a = self.coeff_a(x, t, ext, horizon);
        let (_, gb) = self.coeff_b(x, t, ext, horizon);
        let (_, gp) = self.pressure_at(x, t, ext, horizon);
        let mut f = [T::zero(); 3];
        let with_coeffs = self.coefficient_amp != 0.0;
        for c in 0..2 {
            let mut v = pt.dtv[c] - pt.lap[c] + gp[c];
            if with_coeffs {
                for k in 0..2 {
                    v = v + a[k] * pt.grad[c][k] + pt.v[k] * gb[c][k];
                }
            }
            f[c] = v;
        }
        f
    }
}

/// Catalog of manufactured problems.
pub const CATALOG: &[&str] = &[
    "steady",
    "steady-advected",
    "oscillating",
    "oscillating-discrete",
    "decaying",
    "mix-1",
    "mix-2",
    "mix-3",
    "mix-4",
    "mix-5",
    "mix-6",
];

fn catalog_spec(name: &str) -> Option<ManufacturedSpec> {
    let single = vec![Mode { amp: 1.0, kx: 0.0, ky: 0.0 }];
    let spec = |modes: Vec<Mode>, tau, pressure, amp, vary| ManufacturedSpec {
        modes,
        tau,
        pressure,
        coefficient_amp: amp,
        coefficients_vary: vary,
        discrete: false,
    };
    let m = |amp, kx, ky| Mode { amp, kx, ky };
    Some(match name {
        "steady" => spec(single, TimeProfile::Steady, 1.0, 0.0, false),
        "steady-advected" => spec(single, TimeProfile::Steady, 1.0, 0.2, false),
        "oscillating" => spec(single, TimeProfile::Sine { cycles: 1.0 }, 0.5, 0.2, true),
        "decaying" => spec(vec![m(1.0, 1.0, 0.0), m(0.5, 0.0, 1.0)], TimeProfile::Decay { rate: 1.0 }, 0.5, 0.1, true),
        "mix-1" => spec(single, TimeProfile::Wobble { amp: 0.5, cycles: 1.0 }, 0.5, 0.1, true),
        "mix-2" => spec(vec![m(1.0, 1.0, 0.0)], TimeProfile::Wobble { amp: 0.3, cycles: 2.0 }, 0.2, 0.1, true),
        "mix-3" => spec(vec![m(1.0, 0.0, 1.0), m(-0.4, 1.0, 1.0)], TimeProfile::Decay { rate: 0.5 }, 0.3, 0.15, true),
        "mix-4" => spec(vec![m(0.8, 2.0, 0.0), m(0.6, 0.0, 0.0)], TimeProfile::Wobble { amp: 0.4, cycles: 1.0 }, 0.4, 0.1, true),
        "mix-5" => spec(vec![m(1.0, 1.0, 1.0)], TimeProfile::Decay { rate: 1.5 }, 0.1, 0.2, false),
        "mix-6" => spec(vec![m(0.7, 0.0, 2.0), m(0.5, 1.0, 0.0)], TimeProfile::Wobble { amp: 0.2, cycles: 3.0 }, 0.6, 0.1, true),
        "oscillating-discrete" => ManufacturedSpec { discrete: true, ..spec(single, TimeProfile::Sine { cycles: 2.0 }, 0.5, 0.2, true) },
        _ => return None,
    })
}

/// A manufactured problem with its exact solution sampled on the grid.
#[derive(Clone, Debug)]
pub struct Manufactured<T> {
    pub name: String,
    pub spec: ManufacturedSpec,
    pub problem: ForwardProblem<T>,
    pub exact: Solution<T>,
}

/// Builds a catalog problem on a 2D grid. The initial velocity is the
/// discrete rotation of the sampled potential, which is exactly divergence-free.
pub fn manufactured_problem<T: Real>(name: &str, grid: &Grid<T>) -> Result<Manufactured<T>> {
    let spec = catalog_spec(name).ok_or_else(|| {
        LabError::contract(format!("unknown manufactured solution '{name}' (known: {})", CATALOG.join(", ")))
    })?;
    manufactured_from_spec(name, spec, grid)
}

/// Builds a manufactured problem from an explicit specification.
pub fn manufactured_from_spec<T: Real>(name: &str, spec: ManufacturedSpec, grid: &Grid<T>) -> Result<Manufactured<T>> {
    if grid.dim() != 2 {
        return Err(LabError::contract("manufactured solutions are two-dimensional"));
    }
    let geom = grid.geom;
    let ext = [geom.extent[0], geom.extent[1]];
    let horizon = grid.time.horizon;
    let source = {
        let s = spec.clone();
        Coefficient::analytic(move |x, t| s.source(x, t, ext, horizon))
    };
    let (a, b) = if spec.coefficient_amp != 0.0 {
        let sa = spec.clone();
        let sb = spec.clone();
        (
            Coefficient::analytic(move |x, t| sa.coeff_a(x, t, ext, horizon)),
            Coefficient::analytic(move |x, t| sb.coeff_b(x, t, ext, horizon).0),
        )
    } else {
        (Coefficient::Zero, Coefficient::Zero)
    };
    let q = Field::scalar_from_fn(geom, Stagger::node(2), Boundary::Dirichlet, |x| spec.potential(x, T::zero(), ext, horizon));
    let v0 = rot_scalar(&q)?.with_bc(Boundary::Dirichlet);
    let mut problem = ForwardProblem::new(grid.clone(), source).with_coefficients(a, b).with_initial(v0);

    let time = grid.time;
    let mut vel = Vec::with_capacity(time.nodes());
    let mut pre = Vec::with_capacity(time.nodes());
    for k in 0..time.nodes() {
        let t = time.time(k);
        pre.push(Field::scalar_from_fn(geom, Stagger::center(), Boundary::Neumann, |x| spec.pressure_at(x, t, ext, horizon).0));
    }
    if spec.discrete {
        // q = τ(t)·Q(x) with Q sampled once
        let shape = rot_scalar(&Field::scalar_from_fn(geom, Stagger::node(2), Boundary::Dirichlet, |x| spec.shape(x, ext)))?;
        let mut sources = Vec::with_capacity(time.nodes());
        for (k, p) in pre.iter().enumerate() {
            let t = time.time(k);
            let (tau, dtau) = spec.tau.eval(t, horizon);
            let v = shape.scaled(tau).with_bc(Boundary::Dirichlet);
            let mut f = shape.scaled(dtau).with_bc(Boundary::Dirichlet);
            f.axpy(-T::one(), &laplacian(&v))?;
            f.axpy(T::one(), &super::advection(&problem, &v, k, t))?;
            f.axpy(T::one(), &gradient(p)?.with_bc(Boundary::Dirichlet))?;
            f.enforce_boundary();
            sources.push(f);
            vel.push(v);
        }
        problem.source = Coefficient::Series(TimeSeriesField::new(sources, time.dt, T::zero())?);
        problem.v0 = vel[0].clone();
    } else {
        for k in 0..time.nodes() {
            let t = time.time(k);
            vel.push(Field::mac_from_fn(geom, Boundary::Dirichlet, |x| {
                let p = spec.point(x, t, ext, horizon);
                [p.v[0], p.v[1], T::zero()]
            }));
        }
    }
    let divs = vel.iter().map(|v| Ok(to_f64(l2_norm(&divergence(v)?)))).collect::<Result<Vec<f64>>>()?;
    let exact = Solution {
        velocity: TimeSeriesField::new(vel, time.dt, T::zero())?,
        pressure: TimeSeriesField::new(pre, time.dt, T::zero())?,
        divergence: divs,
        work: vec![StepWork::default(); time.nodes()],
    };
    Ok(Manufactured { name: name.to_string(), spec, problem, exact })
}
