//! Seeded input families for the stationary estimate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{LabError, Result};
use crate::grid::{Boundary, Field, Grid, Stagger};
use crate::operators::rot_scalar;
use crate::scalar::{lit, to_f64, Real};

/// Distance kept from `∂Ω`.
pub const COLLAR: f64 = 0.05;

/// Smooth radial bump with support radius `r` around `c`.
fn bump(x: [f64; 3], c: [f64; 3], r: f64, dim: usize) -> f64 {
    let d2: f64 = (0..dim).map(|a| (x[a] - c[a]).powi(2)).sum::<f64>() / (r * r);
    if d2 < 1.0 {
        (1.0 - 1.0 / (1.0 - d2)).exp()
    } else {
        0.0
    }
}

/// Whether a bump shape is divergence free.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BumpKind {
    /// `a ⊙ b(x)` for a random amplitude vector.
    Vector,
    /// `rot(b)` for a nodal bump potential; 2D only.
    Solenoidal,
}

#[derive(Clone, Debug)]
pub struct Bump<T> {
    pub kind: BumpKind,
    pub center: [f64; 3],
    pub radius: f64,
    pub field: Field<T>,
}

impl<T> Bump<T> {
    pub fn describe(&self) -> String {
        let c: Vec<String> = self.center.iter().map(|v| format!("{v:.3}")).collect();
        format!("{:?} bump r={:.3} at ({})", self.kind, self.radius, c.join(", "))
    }
}

/// Bump field supported in `Ω ∖ (ω ∪ collar)`; `Solenoidal` is used for odd
/// seeds in 2D.
pub fn bump_field<T: Real>(grid: &Grid<T>, seed: u64) -> Result<Bump<T>> {
    let omega = grid.omega().ok_or_else(|| LabError::contract("omega must be set"))?;
    let geom = grid.geom;
    let dim = geom.dim;
    let h = to_f64(geom.max_spacing());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kind = if dim == 2 && seed % 2 == 1 { BumpKind::Solenoidal } else { BumpKind::Vector };
    for _ in 0..10_000 {
        let r = rng.gen_range(0.05..0.1);
        let mut c = [0.0; 3];
        let mut ok = true;
        let mut apart = false;
        for a in 0..dim {
            let ext = to_f64(geom.extent[a]);
            let (lo, hi) = (COLLAR + r + h, ext - COLLAR - r - h);
            if lo >= hi {
                ok = false;
                break;
            }
            c[a] = rng.gen_range(lo..hi);
            let (wl, wh) = (to_f64(omega.lo[a]) - r - 2.0 * h, to_f64(omega.hi[a]) + r + 2.0 * h);
            apart |= c[a] < wl || c[a] > wh;
        }
        if !ok {
            break;
        }
        if !apart {
            continue;
        }
        let amp: [f64; 3] = std::array::from_fn(|_| rng.gen_range(0.5..1.5) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 });
        let field = match kind {
            BumpKind::Vector => Field::mac_from_fn(geom, Boundary::Dirichlet, |x| {
                let p = x.map(to_f64);
                let b = bump(p, c, r, dim);
                std::array::from_fn(|i| lit::<T>(amp[i] * b))
            }),
            BumpKind::Solenoidal => {
                let q = Field::scalar_from_fn(geom, Stagger::node(2), Boundary::Dirichlet, |x| {
                    lit::<T>(amp[0] * r * bump(x.map(to_f64), c, r, dim))
                });
                rot_scalar(&q)?.with_bc(Boundary::Dirichlet)
            }
        };
        return Ok(Bump { kind, center: c, radius: r, field });
    }
    Err(LabError::contract("no room for a bump outside omega and the boundary collar"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, build_subdomains, BoxRegion, DomainSpec, Region};
    use crate::operators::divergence;

    fn grid() -> Grid<f64> {
        let g = build_grid(&DomainSpec::unit_square(32, 2.0, 8)).unwrap();
        build_subdomains(&g, BoxRegion::new(&[0.3, 0.3], &[0.7, 0.7]).unwrap(), BoxRegion::new(&[0.4, 0.4], &[0.6, 0.6]).unwrap()).unwrap()
    }

    #[test]
    fn bumps_avoid_omega_and_boundary() {
        let g = grid();
        for seed in 0..10 {
            let b = bump_field(&g, seed).unwrap();
            b.field.check_invariants().unwrap();
            assert!(b.field.max_abs() > 0.1);
            for c in &b.field.comps {
                for (i, v) in c.data.iter().enumerate() {
                    if g.in_region(c, i, Region::Omega) {
                        assert_eq!(*v, 0.0, "seed {seed}");
                    }
                }
            }
        }
    }

    #[test]
    fn odd_seeds_are_solenoidal() {
        let g = grid();
        let b = bump_field(&g, 3).unwrap();
        assert_eq!(b.kind, BumpKind::Solenoidal);
        assert!(divergence(&b.field).unwrap().max_abs() < 1e-12);
        assert_eq!(bump_field(&g, 3).unwrap().field.comps[0].data, b.field.comps[0].data);
    }
}
