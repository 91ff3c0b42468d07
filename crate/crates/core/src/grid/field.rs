use crate::error::{LabError, Result};
use crate::grid::Geometry;
use crate::scalar::{count, lit, Real};

/// Per-axis placement of a lattice: nodal (samples at `i*h`, `n+1` of them)
/// or centred (samples at `(i+1/2)*h`, `n` of them).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Stagger {
    nodal: [bool; 3],
}

impl Stagger {
    /// Cell centres (pressure, divergence).
    pub const fn center() -> Self {
        Stagger { nodal: [false; 3] }
    }

    /// Grid nodes (corners of cells) for a `dim`-dimensional grid.
    pub fn node(dim: usize) -> Self {
        let mut nodal = [false; 3];
        nodal.iter_mut().take(dim).for_each(|n| *n = true);
        Stagger { nodal }
    }

    /// Faces normal to `axis` (velocity component `axis` of a MAC field).
    pub fn face(axis: usize) -> Self {
        let mut nodal = [false; 3];
        nodal[axis] = true;
        Stagger { nodal }
    }

    /// Edges parallel to `axis` in 3D (curl of a face field).
    pub fn edge(axis: usize, dim: usize) -> Self {
        let mut s = Self::node(dim);
        s.nodal[axis] = false;
        s
    }

    pub fn is_nodal(&self, axis: usize) -> bool {
        self.nodal[axis]
    }

    /// Same lattice with `axis` switched between nodal and centred.
    pub fn toggled(&self, axis: usize) -> Self {
        let mut s = *self;
        s.nodal[axis] = !s.nodal[axis];
        s
    }

    pub fn shape<T: Real>(&self, geom: &Geometry<T>) -> [usize; 3] {
        let mut shape = [1; 3];
        for (a, s) in shape.iter_mut().enumerate().take(geom.dim) {
            *s = geom.cells[a] + usize::from(self.nodal[a]);
        }
        shape
    }

    pub fn name(&self, dim: usize) -> String {
        let axes: String = (0..dim).map(|a| if self.nodal[a] { 'n' } else { 'c' }).collect();
        format!("[{axes}]")
    }
}

/// Boundary treatment of a field, used for ghost values by stencils.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    /// Zero on the boundary: nodal boundary samples are zero and centred
    /// samples reflect oddly across the wall.
    Dirichlet,
    /// Zero normal derivative: even reflection across the wall.
    Neumann,
    /// No boundary information: linear extrapolation.
    Free,
}

/// Values of one scalar lattice, row-major with axis 0 slowest.
#[derive(Clone, Debug, PartialEq)]
pub struct Component<T> {
    pub stagger: Stagger,
    pub shape: [usize; 3],
    pub data: Vec<T>,
}

impl<T: Real> Component<T> {
    pub fn zeros(geom: &Geometry<T>, stagger: Stagger) -> Self {
        let shape = stagger.shape(geom);
        Component { stagger, shape, data: vec![T::zero(); shape.iter().product()] }
    }

    pub fn from_fn(geom: &Geometry<T>, stagger: Stagger, f: impl Fn([T; 3]) -> T) -> Self {
        let mut c = Self::zeros(geom, stagger);
        for flat in 0..c.data.len() {
            c.data[flat] = f(c.position(geom, flat));
        }
        c
    }

    #[inline]
    pub fn strides(&self) -> [usize; 3] {
        [self.shape[1] * self.shape[2], self.shape[2], 1]
    }

    #[inline]
    pub fn index(&self, i: [usize; 3]) -> usize {
        (i[0] * self.shape[1] + i[1]) * self.shape[2] + i[2]
    }

    #[inline]
    pub fn unravel(&self, flat: usize) -> [usize; 3] {
        let k = flat % self.shape[2];
        let rest = flat / self.shape[2];
        [rest / self.shape[1], rest % self.shape[1], k]
    }

    /// Physical coordinates of sample `flat` (unused axes are zero).
    pub fn position(&self, geom: &Geometry<T>, flat: usize) -> [T; 3] {
        let idx = self.unravel(flat);
        let half = lit::<T>(0.5);
        let mut x = [T::zero(); 3];
        for a in 0..geom.dim {
            let i = count::<T>(idx[a]);
            x[a] = if self.stagger.is_nodal(a) { i * geom.spacing[a] } else { (i + half) * geom.spacing[a] };
        }
        x
    }

    pub fn positions(&self, geom: &Geometry<T>) -> Vec<[T; 3]> {
        (0..self.data.len()).map(|f| self.position(geom, f)).collect()
    }

    /// True when the sample lies on the boundary of the rectangle/box.
    pub fn on_boundary(&self, geom: &Geometry<T>, flat: usize) -> bool {
        let idx = self.unravel(flat);
        (0..geom.dim).any(|a| self.stagger.is_nodal(a) && (idx[a] == 0 || idx[a] == geom.cells[a]))
    }

    /// True when the sample sits on a corner (nodal and extreme on at least two axes).
    pub fn on_corner(&self, geom: &Geometry<T>, flat: usize) -> bool {
        let idx = self.unravel(flat);
        let extreme = (0..geom.dim)
            .filter(|&a| self.stagger.is_nodal(a) && (idx[a] == 0 || idx[a] == geom.cells[a]))
            .count();
        extreme >= 2
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

/// Scalar or vector samples on a staggered grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Field<T> {
    pub geom: Geometry<T>,
    pub comps: Vec<Component<T>>,
    pub bc: Boundary,
}

impl<T: Real> Field<T> {
    pub fn scalar(geom: Geometry<T>, stagger: Stagger, bc: Boundary) -> Self {
        Field { comps: vec![Component::zeros(&geom, stagger)], geom, bc }
    }

    pub fn scalar_from_fn(geom: Geometry<T>, stagger: Stagger, bc: Boundary, f: impl Fn([T; 3]) -> T) -> Self {
        Field { comps: vec![Component::from_fn(&geom, stagger, f)], geom, bc }
    }

    /// MAC vector field: component `c` lives on faces normal to axis `c`.
    pub fn mac(geom: Geometry<T>, bc: Boundary) -> Self {
        let comps = (0..geom.dim).map(|a| Component::zeros(&geom, Stagger::face(a))).collect();
        Field { geom, comps, bc }
    }

    /// MAC field sampled from a pointwise vector function.
    pub fn mac_from_fn(geom: Geometry<T>, bc: Boundary, f: impl Fn([T; 3]) -> [T; 3]) -> Self {
        let comps = (0..geom.dim)
            .map(|a| Component::from_fn(&geom, Stagger::face(a), |x| f(x)[a]))
            .collect();
        let mut field = Field { geom, comps, bc };
        if bc == Boundary::Dirichlet {
            field.enforce_boundary();
        }
        field
    }

    /// Vector field whose components share one lattice.
    pub fn collocated(geom: Geometry<T>, stagger: Stagger, ncomp: usize, bc: Boundary) -> Self {
        Field { comps: (0..ncomp).map(|_| Component::zeros(&geom, stagger)).collect(), geom, bc }
    }

    pub fn from_components(geom: Geometry<T>, comps: Vec<Component<T>>, bc: Boundary) -> Result<Self> {
        for c in &comps {
            let shape = c.stagger.shape(&geom);
            if shape != c.shape || c.data.len() != shape.iter().product::<usize>() {
                return Err(LabError::contract(format!(
                    "component {} has {} values, lattice needs {}",
                    c.stagger.name(geom.dim),
                    c.data.len(),
                    shape.iter().product::<usize>()
                )));
            }
        }
        Ok(Field { geom, comps, bc })
    }

    pub fn is_scalar(&self) -> bool {
        self.comps.len() == 1
    }

    pub fn is_mac(&self) -> bool {
        self.comps.len() == self.geom.dim
            && self.comps.iter().enumerate().all(|(a, c)| c.stagger == Stagger::face(a))
    }

    pub fn staggers(&self) -> Vec<Stagger> {
        self.comps.iter().map(|c| c.stagger).collect()
    }

    pub fn same_layout(&self, other: &Field<T>) -> bool {
        self.geom == other.geom && self.staggers() == other.staggers()
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.comps.iter_mut().for_each(|c| c.data.iter_mut().for_each(|v| *v = T::zero()));
        z
    }

    pub fn with_bc(mut self, bc: Boundary) -> Self {
        self.bc = bc;
        self
    }

    /// Zeroes nodal boundary samples (the Dirichlet-zero layer).
    pub fn enforce_boundary(&mut self) {
        let geom = self.geom;
        for c in &mut self.comps {
            for flat in 0..c.data.len() {
                if c.on_boundary(&geom, flat) {
                    c.data[flat] = T::zero();
                }
            }
        }
    }

    /// Checks value counts, finiteness and consistency with the boundary tag.
    pub fn check_invariants(&self) -> Result<()> {
        for c in &self.comps {
            let shape = c.stagger.shape(&self.geom);
            if c.shape != shape || c.data.len() != shape.iter().product::<usize>() {
                return Err(LabError::contract("value count does not match staggered lattice"));
            }
            if c.data.iter().any(|v| !v.is_finite()) {
                return Err(LabError::NonFinite("field contains NaN or infinity".into()));
            }
            if self.bc == Boundary::Dirichlet
                && (0..c.data.len()).any(|f| c.on_boundary(&self.geom, f) && c.data[f] != T::zero())
            {
                return Err(LabError::contract("Dirichlet-zero field has nonzero boundary samples"));
            }
        }
        Ok(())
    }

    pub fn max_abs(&self) -> T {
        self.comps.iter().fold(T::zero(), |m, c| m.max(c.max_abs()))
    }

    pub fn scaled(&self, k: T) -> Self {
        let mut out = self.clone();
        out.scale(k);
        out
    }

    pub fn scale(&mut self, k: T) {
        self.comps.iter_mut().for_each(|c| c.data.iter_mut().for_each(|v| *v = *v * k));
    }

    /// `self += k * other`.
    pub fn axpy(&mut self, k: T, other: &Field<T>) -> Result<()> {
        if !self.same_layout(other) {
            return Err(LabError::Staggering("axpy on fields with different layouts".into()));
        }
        for (c, o) in self.comps.iter_mut().zip(&other.comps) {
            c.data.iter_mut().zip(&o.data).for_each(|(a, b)| *a = *a + k * *b);
        }
        Ok(())
    }

    pub fn sub(&self, other: &Field<T>) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(-T::one(), other)?;
        Ok(out)
    }

    pub fn add(&self, other: &Field<T>) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(T::one(), other)?;
        Ok(out)
    }

    /// Pointwise map over every sample with its position.
    pub fn map_with_position(&self, f: impl Fn([T; 3], T) -> T) -> Self {
        let mut out = self.clone();
        let geom = self.geom;
        for c in &mut out.comps {
            for flat in 0..c.data.len() {
                let x = c.position(&geom, flat);
                c.data[flat] = f(x, c.data[flat]);
            }
        }
        out
    }

    pub fn total_len(&self) -> usize {
        self.comps.iter().map(|c| c.data.len()).sum()
    }
}

/// Ordered snapshots at uniform time spacing.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeriesField<T> {
    pub snapshots: Vec<Field<T>>,
    pub dt: T,
    pub t_start: T,
}

impl<T: Real> TimeSeriesField<T> {
    pub fn new(snapshots: Vec<Field<T>>, dt: T, t_start: T) -> Result<Self> {
        if snapshots.len() < 3 {
            return Err(LabError::contract("a time series needs at least 3 snapshots"));
        }
        if dt <= T::zero() {
            return Err(LabError::contract("time step must be positive"));
        }
        let first = &snapshots[0];
        if snapshots.iter().any(|s| !s.same_layout(first)) {
            return Err(LabError::contract("snapshots must share one grid and staggering"));
        }
        Ok(TimeSeriesField { snapshots, dt, t_start })
    }

    /// Samples `f(t)` at `t_start + k*dt` for `k = 0..count`.
    pub fn from_fn(count_: usize, dt: T, t_start: T, f: impl Fn(T) -> Field<T>) -> Result<Self> {
        let snaps = (0..count_).map(|k| f(t_start + count::<T>(k) * dt)).collect();
        Self::new(snaps, dt, t_start)
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn time(&self, k: usize) -> T {
        self.t_start + count::<T>(k) * self.dt
    }

    pub fn geom(&self) -> &Geometry<T> {
        &self.snapshots[0].geom
    }

    pub fn scaled(&self, k: T) -> Self {
        TimeSeriesField { snapshots: self.snapshots.iter().map(|s| s.scaled(k)).collect(), dt: self.dt, t_start: self.t_start }
    }

    pub fn map_snapshots(&self, f: impl Fn(usize, &Field<T>) -> Field<T>) -> Self {
        TimeSeriesField {
            snapshots: self.snapshots.iter().enumerate().map(|(k, s)| f(k, s)).collect(),
            dt: self.dt,
            t_start: self.t_start,
        }
    }

    /// First or second discrete time derivative. Central differences inside,
    /// second-order one-sided stencils at both ends.
    pub fn time_derivative(&self, order: usize) -> Result<Self> {
        match order {
            0 => Ok(self.clone()),
            1 => self.derivative_with(first_difference),
            2 => self.derivative_with(second_difference),
            _ => Err(LabError::contract("time derivatives above order 2 are not supported")),
        }
    }

    fn derivative_with(&self, stencil: fn(usize, usize, T) -> Vec<(usize, T)>) -> Result<Self> {
        let n = self.len();
        let snaps = (0..n)
            .map(|k| {
                let mut out = self.snapshots[k].zeros_like();
                for (j, w) in stencil(k, n, self.dt) {
                    out.axpy(w, &self.snapshots[j]).expect("shared layout");
                }
                out
            })
            .collect();
        Self::new(snaps, self.dt, self.t_start)
    }
}

/// Weights `(snapshot, weight)` of the order-`order` time difference at
/// snapshot `k` of `n`, as used by [`TimeSeriesField::time_derivative`].
pub(crate) fn time_stencil<T: Real>(order: usize, k: usize, n: usize, dt: T) -> Vec<(usize, T)> {
    match order {
        0 => vec![(k, T::one())],
        1 => first_difference(k, n, dt),
        _ => second_difference(k, n, dt),
    }
}

fn first_difference<T: Real>(k: usize, n: usize, dt: T) -> Vec<(usize, T)> {
    let h2 = lit::<T>(2.0) * dt;
    if k == 0 {
        vec![(0, lit::<T>(-3.0) / h2), (1, lit::<T>(4.0) / h2), (2, lit::<T>(-1.0) / h2)]
    } else if k == n - 1 {
        vec![(n - 1, lit::<T>(3.0) / h2), (n - 2, lit::<T>(-4.0) / h2), (n - 3, lit::<T>(1.0) / h2)]
    } else {
        vec![(k + 1, T::one() / h2), (k - 1, -T::one() / h2)]
    }
}

fn second_difference<T: Real>(k: usize, n: usize, dt: T) -> Vec<(usize, T)> {
    let d2 = dt * dt;
    let w = |c: f64| lit::<T>(c) / d2;
    if n < 4 {
        return vec![(0, w(1.0)), (1, w(-2.0)), (2, w(1.0))];
    }
    if k == 0 {
        vec![(0, w(2.0)), (1, w(-5.0)), (2, w(4.0)), (3, w(-1.0))]
    } else if k == n - 1 {
        vec![(n - 1, w(2.0)), (n - 2, w(-5.0)), (n - 3, w(4.0)), (n - 4, w(-1.0))]
    } else {
        vec![(k - 1, w(1.0)), (k, w(-2.0)), (k + 1, w(1.0))]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Geometry;

    fn geom() -> Geometry<f64> {
        Geometry::new(&[1.0, 2.0], &[4, 8]).unwrap()
    }

    #[test]
    fn shapes_follow_staggering() {
        let g = geom();
        assert_eq!(Stagger::center().shape(&g), [4, 8, 1]);
        assert_eq!(Stagger::face(0).shape(&g), [5, 8, 1]);
        assert_eq!(Stagger::face(1).shape(&g), [4, 9, 1]);
        assert_eq!(Stagger::node(2).shape(&g), [5, 9, 1]);
    }

    #[test]
    fn positions_of_faces() {
        let g = geom();
        let c = Component::<f64>::zeros(&g, Stagger::face(0));
        let x = c.position(&g, c.index([2, 3, 0]));
        assert!((x[0] - 0.5).abs() < 1e-15 && (x[1] - 0.875).abs() < 1e-15);
        let flat = c.index([4, 7, 0]);
        assert_eq!(c.unravel(flat), [4, 7, 0]);
        assert!(c.on_boundary(&g, flat));
    }

    #[test]
    fn dirichlet_invariant_detected() {
        let g = geom();
        let mut f = Field::mac(g, Boundary::Dirichlet);
        f.comps[0].data[0] = 1.0;
        assert!(f.check_invariants().is_err());
        f.enforce_boundary();
        assert!(f.check_invariants().is_ok());
    }

    #[test]
    fn series_needs_three_snapshots() {
        let g = geom();
        let s = Field::scalar(g, Stagger::center(), Boundary::Free);
        assert!(TimeSeriesField::new(vec![s.clone(), s.clone()], 0.1, 0.0).is_err());
        assert!(TimeSeriesField::new(vec![s.clone(), s.clone(), s], 0.1, 0.0).is_ok());
    }

    #[test]
    fn time_derivatives_exact_on_quadratics() {
        let g = geom();
        let ts = TimeSeriesField::from_fn(7, 0.25, 0.0, |t| {
            Field::scalar_from_fn(g, Stagger::center(), Boundary::Free, |_| t * t)
        })
        .unwrap();
        let d1 = ts.time_derivative(1).unwrap();
        let d2 = ts.time_derivative(2).unwrap();
        for k in 0..7 {
            let t = ts.time(k);
            assert!((d1.snapshots[k].comps[0].data[0] - 2.0 * t).abs() < 1e-12);
            assert!((d2.snapshots[k].comps[0].data[0] - 2.0).abs() < 1e-10);
        }
    }
}
