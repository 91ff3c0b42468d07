use serde::Serialize;

use crate::error::{LabError, Result};
use crate::grid::{time_stencil, Boundary, Component, Field, Grid, Stagger, TimeSeriesField};
use crate::operators::stencil::{resample, Ghost};
use crate::operators::{divergence, rot};
use crate::scalar::{to_f64, Real};

/// Below this `min |r₃(·,t0)|` the bound chain is reported as inapplicable.
pub const R3_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, Serialize)]
pub struct ExampleIIReport {
    pub h: f64,
    /// `‖div(r × f) − (f·rot r − r·rot f)‖` over interior cells at `t0`.
    pub identity_residual: f64,
    /// `‖div(r × f)‖` over interior cells at `t0`.
    pub divergence: f64,
    pub rot_r_t0: f64,
    pub rot_f: f64,
    pub max_f3: f64,
    pub min_r3_t0: f64,
    /// `max_x max_{k,t} |∂ₜᵏr| / |r₃(x,t0)|`.
    pub m_bound: Option<f64>,
    /// `max |∂ₜᵏF(x,t)| / |F(x,t0)|` over cell centres with `F(x,t0) ≠ 0`.
    pub derivative_ratio: f64,
    pub applicable: bool,
    pub passed: bool,
}

fn centred<T: Real>(f: &Field<T>) -> Vec<Component<T>> {
    f.comps.iter().map(|c| resample(c, &f.geom, Stagger::center(), Ghost::Extrapolate)).collect()
}

fn interior_cell<T: Real>(c: &Component<T>, flat: usize) -> bool {
    let idx = c.unravel(flat);
    (0..3).all(|a| c.shape[a] == 1 || (idx[a] > 0 && idx[a] + 1 < c.shape[a]))
}

fn interior_l2<T: Real>(comps: &[Component<T>], grid: &Grid<T>) -> f64 {
    let vol = to_f64(grid.geom.cell_volume());
    let mut acc = 0.0;
    for c in comps {
        for (i, v) in c.data.iter().enumerate() {
            if interior_cell(c, i) && !c.on_boundary(&grid.geom, i) {
                acc += to_f64(*v * *v) * vol;
            }
        }
    }
    acc.sqrt()
}

fn cross<T: Real>(a: [T; 3], b: [T; 3]) -> [T; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn norm3<T: Real>(a: [T; 3]) -> T {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

/// `r × f` on the faces, components resampled with linear extrapolation.
pub fn cross_mac<T: Real>(r: &Field<T>, f: &Field<T>) -> Result<Field<T>> {
    if r.geom.dim != 3 || !r.is_mac() || !f.is_mac() || r.geom != f.geom {
        return Err(LabError::contract("the cross-product source needs two MAC fields on the same 3D grid"));
    }
    let geom = r.geom;
    let mut out = Field::mac(geom, Boundary::Free);
    for c in 0..3 {
        let target = Stagger::face(c);
        let rc: Vec<Component<T>> = r.comps.iter().map(|x| resample(x, &geom, target, Ghost::Extrapolate)).collect();
        let fc: Vec<Component<T>> = f.comps.iter().map(|x| resample(x, &geom, target, Ghost::Extrapolate)).collect();
        let (a, b) = ((c + 1) % 3, (c + 2) % 3);
        for i in 0..out.comps[c].data.len() {
            out.comps[c].data[i] = rc[a].data[i] * fc[b].data[i] - rc[b].data[i] * fc[a].data[i];
        }
    }
    Ok(out)
}

/// Checks `div(r × f) = f·rot r − r·rot f` at `t0` and the derivative bound
/// `|∂ₜᵏ(r × f)| ≤ M|r(·,t0) × f|` with `M` from `min |r₃(·,t0)|`.
pub fn example_ii_check<T: Real>(r: &TimeSeriesField<T>, f: &Field<T>, grid: &Grid<T>) -> Result<ExampleIIReport> {
    if grid.dim() != 3 {
        return Err(LabError::contract("example (ii) lives on a 3D grid"));
    }
    if r.len() != grid.time.nodes() || *r.geom() != grid.geom {
        return Err(LabError::contract("r must have one snapshot per time node"));
    }
    let k0 = grid.time.t0_index;
    let r0 = r.snapshots[k0].clone().with_bc(Boundary::Free);
    let f = f.clone().with_bc(Boundary::Free);
    let big_f = cross_mac(&r0, &f)?;
    let div = divergence(&big_f)?.comps;

    let rot_r = rot(&r0)?;
    let rot_f = rot(&f)?;
    let rc = centred(&r0);
    let fc = centred(&f);
    let rrc = centred(&rot_r);
    let rfc = centred(&rot_f);
    let mut rhs = div[0].clone();
    for i in 0..rhs.data.len() {
        let mut s = T::zero();
        for a in 0..3 {
            s = s + fc[a].data[i] * rrc[a].data[i] - rc[a].data[i] * rfc[a].data[i];
        }
        rhs.data[i] = s;
    }
    let mut resid = div[0].clone();
    resid.data.iter_mut().zip(&rhs.data).for_each(|(d, s)| *d = *d - *s);
    let identity_residual = interior_l2(&[resid], grid);
    let divergence_norm = interior_l2(&div, grid);
    let rot_r_t0 = interior_l2(&centred(&rot_r), grid);
    let rot_f_norm = interior_l2(&rfc, grid);
    let max_f3 = to_f64(f.comps[2].max_abs());

    // pointwise bound chain at cell centres
    let n = r.len();
    let series_c: Vec<Vec<Component<T>>> = r.snapshots.iter().map(|s| centred(&s.clone().with_bc(Boundary::Free))).collect();
    let cells = fc[0].data.len();
    let at = |k: usize, i: usize| -> [T; 3] { [series_c[k][0].data[i], series_c[k][1].data[i], series_c[k][2].data[i]] };
    let mut min_r3 = f64::INFINITY;
    let mut m_bound = 0.0f64;
    let mut ratio = 0.0f64;
    for i in 0..cells {
        let fi = [fc[0].data[i], fc[1].data[i], fc[2].data[i]];
        let r3 = to_f64(at(k0, i)[2].abs());
        min_r3 = min_r3.min(r3);
        let f_t0 = to_f64(norm3(cross(at(k0, i), fi)));
        let mut max_dr = 0.0f64;
        for order in 1..=2 {
            for k in 0..n {
                let st = time_stencil(order, k, n, r.dt);
                let mut d = [T::zero(); 3];
                for (j, w) in &st {
                    let rj = at(*j, i);
                    for a in 0..3 {
                        d[a] = d[a] + *w * rj[a];
                    }
                }
                max_dr = max_dr.max(to_f64(norm3(d)));
                if f_t0 > 0.0 {
                    ratio = ratio.max(to_f64(norm3(cross(d, fi))) / f_t0);
                }
            }
        }
        if r3 > 0.0 {
            m_bound = m_bound.max(max_dr / r3);
        }
    }
    let applicable = min_r3 > R3_FLOOR;
    let m_bound = applicable.then_some(m_bound);
    let passed = m_bound.is_some_and(|m| ratio <= m * (1.0 + 1e-9));
    Ok(ExampleIIReport {
        h: to_f64(grid.geom.max_spacing()),
        identity_residual,
        divergence: divergence_norm,
        rot_r_t0,
        rot_f: rot_f_norm,
        max_f3,
        min_r3_t0: min_r3,
        m_bound,
        derivative_ratio: ratio,
        applicable,
        passed,
    })
}

pub type Matrix3 = [[f64; 3]; 3];

#[derive(Clone, Debug, Serialize)]
pub struct ExampleIReport {
    pub min_abs_det_t0: f64,
    /// `max_x ‖R(x,t0)⁻¹‖ · max_{k,t} ‖∂ₜᵏR(x,t)‖`, Frobenius norms.
    pub m_bound: Option<f64>,
    pub derivative_ratio: f64,
    pub applicable: bool,
    pub passed: bool,
    /// The factored form `F(x,t) = R(x,t)f(x)` is an interpretation.
    pub interpretation: &'static str,
}

fn frob(m: &Matrix3) -> f64 {
    m.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

fn det(m: &Matrix3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn inverse(m: &Matrix3) -> Option<Matrix3> {
    let d = det(m);
    if d == 0.0 {
        return None;
    }
    let mut inv = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let (a, b) = ((j + 1) % 3, (j + 2) % 3);
            let (c, e) = ((i + 1) % 3, (i + 2) % 3);
            inv[i][j] = (m[a][c] * m[b][e] - m[a][e] * m[b][c]) / d;
        }
    }
    Some(inv)
}

fn apply(m: &Matrix3, v: [f64; 3]) -> [f64; 3] {
    std::array::from_fn(|i| (0..3).map(|j| m[i][j] * v[j]).sum())
}

/// Pointwise check of `|∂ₜᵏ(Rf)| ≤ M|R(·,t0)f|` at cell centres and time
/// nodes, with `M` from `det R(·,t0) ≠ 0`.
pub fn example_i_check<T: Real>(
    grid: &Grid<T>,
    r: impl Fn([f64; 3], f64) -> Matrix3,
    f: impl Fn([f64; 3]) -> [f64; 3],
) -> Result<ExampleIReport> {
    let time = grid.time;
    let n = time.nodes();
    let dt = to_f64(time.dt);
    let probe = Component::zeros(&grid.geom, Stagger::center());
    let t0 = to_f64(time.t0());
    let mut min_det = f64::INFINITY;
    let mut m_bound = 0.0f64;
    let mut ratio = 0.0f64;
    let mut singular = false;
    for i in 0..probe.data.len() {
        let x = probe.position(&grid.geom, i).map(to_f64);
        let rs: Vec<Matrix3> = (0..n).map(|k| r(x, to_f64(time.time(k)))).collect();
        let r0 = r(x, t0);
        let fx = f(x);
        let d = det(&r0).abs();
        min_det = min_det.min(d);
        let inv = inverse(&r0);
        singular |= inv.is_none();
        let f_t0 = {
            let v = apply(&r0, fx);
            (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
        };
        let mut max_dr = 0.0f64;
        for order in 1..=2 {
            for k in 0..n {
                let mut dm = [[0.0; 3]; 3];
                for (j, w) in time_stencil(order, k, n, dt) {
                    for a in 0..3 {
                        for b in 0..3 {
                            dm[a][b] += w * rs[j][a][b];
                        }
                    }
                }
                max_dr = max_dr.max(frob(&dm));
                if f_t0 > 0.0 {
                    let v = apply(&dm, fx);
                    ratio = ratio.max((v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt() / f_t0);
                }
            }
        }
        if let Some(inv) = inv {
            m_bound = m_bound.max(frob(&inv) * max_dr);
        }
    }
    let applicable = !singular && min_det > R3_FLOOR;
    let m_bound = applicable.then_some(m_bound);
    let passed = m_bound.is_some_and(|m| ratio <= m * (1.0 + 1e-9));
    Ok(ExampleIReport { min_abs_det_t0: min_det, m_bound, derivative_ratio: ratio, applicable, passed, interpretation: "F(x,t) = R(x,t) f(x)" })
}
