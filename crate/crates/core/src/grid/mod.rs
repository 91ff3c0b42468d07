//! Structured rectangle/box grids, observation subdomains, the time axis and
//! quadrature.
//!
//! Layout is marker-and-cell: scalars such as pressure sit at cell centres,
//! velocity component `c` on the faces normal to axis `c`, 2D vorticity and
//! stream potentials on nodes. Arrays are row-major with axis 0 slowest.

mod cnsf;
mod field;
mod quadrature;

pub use cnsf::{read_cnsf, write_cnsf, CNSF_MAGIC, CNSF_VERSION};
pub use field::{Boundary, Component, Field, Stagger, TimeSeriesField};
pub(crate) use field::time_stencil;
pub use quadrature::{integrate, integrate_product, integrate_sq, quadrature_weights, time_weights};

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::scalar::{count, lit, to_f64, Real};

/// Spatial discretisation shared by all fields on a grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Geometry<T> {
    pub dim: usize,
    pub cells: [usize; 3],
    pub spacing: [T; 3],
    pub extent: [T; 3],
}

impl<T: Real> Geometry<T> {
    pub fn new(extent: &[T], cells: &[usize]) -> Result<Self> {
        let dim = extent.len();
        if !(2..=3).contains(&dim) || cells.len() != dim {
            return Err(LabError::contract("grid must be 2D or 3D with one cell count per axis"));
        }
        let mut g = Geometry { dim, cells: [1; 3], spacing: [T::one(); 3], extent: [T::one(); 3] };
        for a in 0..dim {
            if !(extent[a] > T::zero()) || !extent[a].is_finite() {
                return Err(LabError::contract(format!("extent on axis {a} must be positive")));
            }
            if cells[a] == 0 {
                return Err(LabError::contract(format!("axis {a} needs at least one cell")));
            }
            g.cells[a] = cells[a];
            g.extent[a] = extent[a];
            g.spacing[a] = extent[a] / count::<T>(cells[a]);
        }
        Ok(g)
    }

    pub fn min_spacing(&self) -> T {
        (0..self.dim).map(|a| self.spacing[a]).fold(T::infinity(), T::min)
    }

    pub fn max_spacing(&self) -> T {
        (0..self.dim).map(|a| self.spacing[a]).fold(T::zero(), T::max)
    }

    pub fn cell_volume(&self) -> T {
        (0..self.dim).map(|a| self.spacing[a]).fold(T::one(), |p, h| p * h)
    }

    /// Same domain with every cell count doubled.
    pub fn refined(&self) -> Result<Self> {
        let cells: Vec<usize> = (0..self.dim).map(|a| 2 * self.cells[a]).collect();
        Geometry::new(&self.extent[..self.dim], &cells)
    }
}

/// Uniform time axis `t_k = k*dt`, `k = 0..=steps`, with `t0 = T/2` on a node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeAxis<T> {
    pub steps: usize,
    pub dt: T,
    pub horizon: T,
    pub t0_index: usize,
}

impl<T: Real> TimeAxis<T> {
    pub fn new(horizon: T, steps: usize) -> Result<Self> {
        if !(horizon > T::zero()) {
            return Err(LabError::contract("time horizon must be positive"));
        }
        if steps % 2 != 0 {
            return Err(LabError::contract("time axis must place t0=T/2 on a node (N_t must be even)"));
        }
        if steps < 8 {
            return Err(LabError::contract("time axis needs N_t >= 8"));
        }
        Ok(TimeAxis { steps, dt: horizon / count::<T>(steps), horizon, t0_index: steps / 2 })
    }

    pub fn time(&self, k: usize) -> T {
        count::<T>(k) * self.dt
    }

    pub fn t0(&self) -> T {
        self.time(self.t0_index)
    }

    pub fn nodes(&self) -> usize {
        self.steps + 1
    }
}

/// Axis-aligned box `[lo, hi]` (only the first `dim` axes are used).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoxRegion<T> {
    pub lo: [T; 3],
    pub hi: [T; 3],
}

impl<T: Real> BoxRegion<T> {
    pub fn new(lo: &[T], hi: &[T]) -> Result<Self> {
        if lo.len() != hi.len() || lo.len() > 3 {
            return Err(LabError::contract("box bounds must have matching lengths"));
        }
        let mut b = BoxRegion { lo: [T::zero(); 3], hi: [T::zero(); 3] };
        for a in 0..lo.len() {
            if !(hi[a] > lo[a]) {
                return Err(LabError::contract(format!("box is empty along axis {a}")));
            }
            b.lo[a] = lo[a];
            b.hi[a] = hi[a];
        }
        Ok(b)
    }

    /// Square/cube `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: T, hi: T) -> Result<Self> {
        Self::new(&vec![lo; dim], &vec![hi; dim])
    }

    pub fn contains(&self, x: &[T; 3], dim: usize) -> bool {
        (0..dim).all(|a| x[a] >= self.lo[a] && x[a] <= self.hi[a])
    }

    pub fn center(&self, dim: usize) -> [T; 3] {
        let mut c = [T::zero(); 3];
        for a in 0..dim {
            c[a] = (self.lo[a] + self.hi[a]) * lit(0.5);
        }
        c
    }

    /// Smallest gap between this box and the boundary of `outer`, per axis
    /// scaled by the grid spacing (in cells).
    fn margin_cells(&self, outer: &BoxRegion<T>, geom: &Geometry<T>) -> T {
        (0..geom.dim)
            .map(|a| {
                let lo = (self.lo[a] - outer.lo[a]) / geom.spacing[a];
                let hi = (outer.hi[a] - self.hi[a]) / geom.spacing[a];
                lo.min(hi)
            })
            .fold(T::infinity(), T::min)
    }

    fn domain(geom: &Geometry<T>) -> Self {
        let mut b = BoxRegion { lo: [T::zero(); 3], hi: [T::zero(); 3] };
        b.hi[..geom.dim].copy_from_slice(&geom.extent[..geom.dim]);
        b
    }
}

/// Subset of samples an integral or check runs over.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    /// Closed domain.
    Domain,
    /// Samples not lying on the boundary.
    Interior,
    Omega,
    Omega0,
    /// Closed domain minus the open observation core.
    OutsideOmega0,
    OutsideOmega,
}

/// Classification of a sample relative to the domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeClass {
    Interior,
    Boundary,
    Exterior,
}

/// Grid over `Omega x (0,T)` with observation subdomains.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid<T> {
    pub geom: Geometry<T>,
    pub time: TimeAxis<T>,
    omega: Option<BoxRegion<T>>,
    omega0: Option<BoxRegion<T>>,
    /// Set when the observation box reaches within one cell of the boundary.
    pub omega_touches_boundary: bool,
}

/// Rectangle/box extents, resolution and time axis for [`build_grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct DomainSpec<T> {
    pub extent: Vec<T>,
    pub cells: Vec<usize>,
    pub horizon: T,
    pub time_steps: usize,
}

impl<T: Real> DomainSpec<T> {
    pub fn unit_square(n: usize, horizon: T, time_steps: usize) -> Self {
        DomainSpec { extent: vec![T::one(); 2], cells: vec![n; 2], horizon, time_steps }
    }

    pub fn unit_cube(n: usize, horizon: T, time_steps: usize) -> Self {
        DomainSpec { extent: vec![T::one(); 3], cells: vec![n; 3], horizon, time_steps }
    }
}

/// Builds a grid; needs at least 8 cells per axis and an even `N_t >= 8`.
pub fn build_grid<T: Real>(spec: &DomainSpec<T>) -> Result<Grid<T>> {
    if spec.cells.iter().any(|&n| n < 8) {
        return Err(LabError::contract("resolution must be at least 8 cells per axis"));
    }
    let geom = Geometry::new(&spec.extent, &spec.cells)?;
    let time = TimeAxis::new(spec.horizon, spec.time_steps)?;
    Ok(Grid { geom, time, omega: None, omega0: None, omega_touches_boundary: false })
}

/// Installs the observation box `omega` and its core `omega0`.
///
/// `omega0` must sit inside `omega` and inside the domain with at least one cell
/// of margin. `omega` itself may touch the boundary; that is recorded in
/// [`Grid::omega_touches_boundary`].
pub fn build_subdomains<T: Real>(grid: &Grid<T>, omega: BoxRegion<T>, omega0: BoxRegion<T>) -> Result<Grid<T>> {
    let geom = &grid.geom;
    let domain = BoxRegion::domain(geom);
    let one = T::one();
    let tol = lit::<T>(1e-9);
    if omega.margin_cells(&domain, geom) < -tol {
        return Err(LabError::contract("nesting violated: omega is not inside the domain"));
    }
    if omega0.margin_cells(&omega, geom) < one - tol {
        return Err(LabError::contract(
            "nesting violated: omega0 is not strictly inside omega (needs one cell of margin)",
        ));
    }
    if omega0.margin_cells(&domain, geom) < one - tol {
        return Err(LabError::contract("nesting violated: omega0 is not strictly inside the domain"));
    }
    let mut g = grid.clone();
    g.omega_touches_boundary = omega.margin_cells(&domain, geom) < one - tol;
    g.omega = Some(omega);
    g.omega0 = Some(omega0);
    Ok(g)
}

impl<T: Real> Grid<T> {
    pub fn dim(&self) -> usize {
        self.geom.dim
    }

    pub fn omega(&self) -> Option<&BoxRegion<T>> {
        self.omega.as_ref()
    }

    pub fn omega0(&self) -> Option<&BoxRegion<T>> {
        self.omega0.as_ref()
    }

    /// Same subdomains and time axis on a grid with doubled resolution.
    pub fn refined_space(&self) -> Result<Self> {
        let mut g = self.clone();
        g.geom = self.geom.refined()?;
        Ok(g)
    }

    /// The same grid in another precision.
    pub fn cast<U: Real>(&self) -> Result<Grid<U>> {
        let dim = self.dim();
        let ext: Vec<U> = (0..dim).map(|a| lit::<U>(to_f64(self.geom.extent[a]))).collect();
        let geom = Geometry::new(&ext, &self.geom.cells[..dim])?;
        let time = TimeAxis::new(lit::<U>(to_f64(self.time.horizon)), self.time.steps)?;
        let conv = |b: &BoxRegion<T>| BoxRegion { lo: b.lo.map(|v| lit::<U>(to_f64(v))), hi: b.hi.map(|v| lit::<U>(to_f64(v))) };
        Ok(Grid { geom, time, omega: self.omega.as_ref().map(conv), omega0: self.omega0.as_ref().map(conv), omega_touches_boundary: self.omega_touches_boundary })
    }

    /// Same grid with a different number of time steps.
    pub fn with_time_steps(&self, steps: usize) -> Result<Self> {
        let mut g = self.clone();
        g.time = TimeAxis::new(self.time.horizon, steps)?;
        Ok(g)
    }

    pub fn classify(&self, comp: &Component<T>, flat: usize) -> NodeClass {
        if comp.on_boundary(&self.geom, flat) {
            NodeClass::Boundary
        } else {
            NodeClass::Interior
        }
    }

    /// Interior/boundary/exterior class of every sample of `stagger`.
    pub fn domain_mask(&self, stagger: Stagger) -> Vec<NodeClass> {
        let c = Component::zeros(&self.geom, stagger);
        (0..c.data.len()).map(|f| self.classify(&c, f)).collect()
    }

    pub fn in_region(&self, comp: &Component<T>, flat: usize, region: Region) -> bool {
        let dim = self.geom.dim;
        let x = || comp.position(&self.geom, flat);
        let inside = |b: &Option<BoxRegion<T>>| b.as_ref().is_some_and(|b| b.contains(&x(), dim));
        match region {
            Region::Domain => true,
            Region::Interior => !comp.on_boundary(&self.geom, flat),
            Region::Omega => inside(&self.omega),
            Region::Omega0 => inside(&self.omega0),
            Region::OutsideOmega0 => !self.strictly_inside(&self.omega0, &x()),
            Region::OutsideOmega => !self.strictly_inside(&self.omega, &x()),
        }
    }

    fn strictly_inside(&self, b: &Option<BoxRegion<T>>, x: &[T; 3]) -> bool {
        b.as_ref().is_some_and(|b| (0..self.geom.dim).all(|a| x[a] > b.lo[a] && x[a] < b.hi[a]))
    }

    /// Membership mask of `region` on the lattice `stagger`.
    pub fn mask(&self, stagger: Stagger, region: Region) -> Vec<bool> {
        let c = Component::zeros(&self.geom, stagger);
        (0..c.data.len()).map(|f| self.in_region(&c, f, region)).collect()
    }

    /// Metadata describing the grid for manifests.
    pub fn describe(&self) -> GridInfo {
        let d = self.geom.dim;
        GridInfo {
            dim: d,
            cells: self.geom.cells[..d].to_vec(),
            spacing: self.geom.spacing[..d].iter().map(|&h| to_f64(h)).collect(),
            extent: self.geom.extent[..d].iter().map(|&h| to_f64(h)).collect(),
            time_steps: self.time.steps,
            dt: to_f64(self.time.dt),
            horizon: to_f64(self.time.horizon),
            t0_index: self.time.t0_index,
            omega_touches_boundary: self.omega_touches_boundary,
        }
    }
}

/// Serializable grid summary.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct GridInfo {
    pub dim: usize,
    pub cells: Vec<usize>,
    pub spacing: Vec<f64>,
    pub extent: Vec<f64>,
    pub time_steps: usize,
    pub dt: f64,
    pub horizon: f64,
    pub t0_index: usize,
    pub omega_touches_boundary: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(n: usize) -> Grid<f64> {
        build_grid(&DomainSpec::unit_square(n, 2.0, 200)).unwrap()
    }

    #[test]
    fn unit_square_constructor() {
        let g = square(64);
        assert_eq!(g.geom.spacing[0], 1.0 / 64.0);
        assert!((g.time.dt - 0.01).abs() < 1e-15);
        assert_eq!(g.time.t0_index, 100);
        assert!((g.time.t0() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unit_cube_constructor() {
        let g = build_grid(&DomainSpec::<f64>::unit_cube(16, 1.0, 64)).unwrap();
        assert_eq!(g.time.dt, 1.0 / 64.0);
        assert_eq!(g.time.t0_index, 32);
        assert_eq!(g.dim(), 3);
    }

    #[test]
    fn odd_time_steps_rejected() {
        let err = build_grid(&DomainSpec::<f64>::unit_square(64, 2.0, 99)).unwrap_err();
        assert!(err.to_string().contains("t0=T/2 on a node"));
    }

    #[test]
    fn bad_extent_and_resolution_rejected() {
        let spec = DomainSpec { extent: vec![1.0, -1.0], cells: vec![16, 16], horizon: 1.0, time_steps: 16 };
        assert!(build_grid(&spec).is_err());
        assert!(build_grid(&DomainSpec::<f64>::unit_square(4, 1.0, 16)).is_err());
    }

    #[test]
    fn nested_subdomains() {
        let g = square(64);
        let om = BoxRegion::cube(2, 0.3, 0.7).unwrap();
        let om0 = BoxRegion::cube(2, 0.4, 0.6).unwrap();
        let g2 = build_subdomains(&g, om, om0).unwrap();
        assert!(!g2.omega_touches_boundary);
        let m = g2.mask(Stagger::center(), Region::Omega);
        let m0 = g2.mask(Stagger::center(), Region::Omega0);
        assert!(m0.iter().zip(&m).all(|(a, b)| !a || *b));
        assert!(m0.iter().any(|&b| b));
        // idempotent rebuild
        let g3 = build_subdomains(&g, om, om0).unwrap();
        assert_eq!(g3.mask(Stagger::face(0), Region::Omega), g2.mask(Stagger::face(0), Region::Omega));
    }

    #[test]
    fn inverted_nesting_rejected() {
        let g = square(64);
        let err = build_subdomains(
            &g,
            BoxRegion::cube(2, 0.4, 0.6).unwrap(),
            BoxRegion::cube(2, 0.3, 0.7).unwrap(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("omega0"));
    }

    #[test]
    fn omega_touching_boundary_recorded() {
        let g = square(64);
        let g2 = build_subdomains(
            &g,
            BoxRegion::new(&[0.0, 0.3], &[0.5, 0.7]).unwrap(),
            BoxRegion::new(&[0.1, 0.4], &[0.3, 0.6]).unwrap(),
        )
        .unwrap();
        assert!(g2.omega_touches_boundary);
    }

    #[test]
    fn domain_mask_classes() {
        let g = square(8);
        let m = g.domain_mask(Stagger::node(2));
        assert_eq!(m.iter().filter(|c| **c == NodeClass::Boundary).count(), 4 * 8);
        assert!(g.domain_mask(Stagger::center()).iter().all(|c| *c == NodeClass::Interior));
    }
}
