use std::fmt;
use std::sync::Arc;

use crate::error::{LabError, Result};
use crate::grid::{Component, Field, Geometry, Stagger, TimeSeriesField};
use crate::operators::stencil::{resample, Ghost};
use crate::scalar::Real;

/// Pointwise vector function of `(x, t)`.
pub type VectorFn<T> = Arc<dyn Fn([T; 3], T) -> [T; 3] + Send + Sync>;

/// A vector coefficient or source: identically zero, an analytic function,
/// or MAC samples at every time node.
#[derive(Clone)]
pub enum Coefficient<T> {
    Zero,
    Analytic(VectorFn<T>),
    Series(TimeSeriesField<T>),
}

impl<T> fmt::Debug for Coefficient<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Zero => write!(f, "Zero"),
            Coefficient::Analytic(_) => write!(f, "Analytic"),
            Coefficient::Series(s) => write!(f, "Series({} snapshots)", s.snapshots.len()),
        }
    }
}

impl<T: Real> Coefficient<T> {
    pub fn analytic(f: impl Fn([T; 3], T) -> [T; 3] + Send + Sync + 'static) -> Self {
        Coefficient::Analytic(Arc::new(f))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Coefficient::Zero)
    }

    pub(crate) fn check(&self, geom: &Geometry<T>, nodes: usize, what: &str) -> Result<()> {
        if let Coefficient::Series(s) = self {
            if s.len() != nodes {
                return Err(LabError::contract(format!("{what} needs {nodes} snapshots, got {}", s.len())));
            }
            if s.geom() != geom || !s.snapshots[0].is_mac() {
                return Err(LabError::Staggering(format!("{what} must be a MAC field on the problem grid")));
            }
            if s.snapshots.iter().any(|f| f.comps.iter().any(|c| c.data.iter().any(|v| !v.is_finite()))) {
                return Err(LabError::NonFinite(format!("{what} has non-finite samples")));
            }
        }
        Ok(())
    }

    /// Component `c` on its own face lattice at time node `k`.
    pub fn component(&self, geom: &Geometry<T>, c: usize, k: usize, t: T) -> Component<T> {
        let stagger = Stagger::face(c);
        match self {
            Coefficient::Zero => Component::zeros(geom, stagger),
            Coefficient::Analytic(f) => Component::from_fn(geom, stagger, |x| f(x, t)[c]),
            Coefficient::Series(s) => s.snapshots[k].comps[c].clone(),
        }
    }

    /// All components sampled on the face-`c` lattice.
    pub fn on_face(&self, geom: &Geometry<T>, c: usize, k: usize, t: T) -> Vec<Component<T>> {
        let stagger = Stagger::face(c);
        match self {
            Coefficient::Zero => (0..geom.dim).map(|_| Component::zeros(geom, stagger)).collect(),
            Coefficient::Analytic(f) => {
                let pts = Component::zeros(geom, stagger).positions(geom);
                let vals: Vec<[T; 3]> = pts.iter().map(|&x| f(x, t)).collect();
                (0..geom.dim)
                    .map(|a| {
                        let mut comp = Component::zeros(geom, stagger);
                        comp.data.iter_mut().zip(&vals).for_each(|(o, v)| *o = v[a]);
                        comp
                    })
                    .collect()
            }
            Coefficient::Series(s) => (0..geom.dim)
                .map(|a| {
                    let src = &s.snapshots[k].comps[a];
                    if a == c {
                        src.clone()
                    } else {
                        resample(src, geom, stagger, Ghost::Extrapolate)
                    }
                })
                .collect(),
        }
    }

    /// MAC snapshot at node `k`.
    pub fn mac(&self, geom: &Geometry<T>, k: usize, t: T) -> Field<T> {
        let comps = (0..geom.dim).map(|c| self.component(geom, c, k, t)).collect();
        Field { geom: *geom, comps, bc: crate::grid::Boundary::Free }
    }

    /// MAC samples at every time node.
    pub fn to_series(&self, geom: &Geometry<T>, count: usize, dt: T) -> Result<TimeSeriesField<T>> {
        if let Coefficient::Series(s) = self {
            return Ok(s.clone());
        }
        TimeSeriesField::from_fn(count, dt, T::zero(), |t| {
            let k = (t / dt).round().to_usize().unwrap_or(0);
            self.mac(geom, k, t)
        })
    }
}
