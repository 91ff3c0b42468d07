//! Tensor-product quadrature: trapezoid along nodal axes, midpoint along
//! centred axes. Sums run in flat (axis-major) order so results are
//! bitwise reproducible.

use crate::error::{LabError, Result};
use crate::grid::{Field, Geometry, Grid, Region, Stagger};
use crate::scalar::{lit, Real};

/// Quadrature weight of every sample of a lattice.
pub fn quadrature_weights<T: Real>(geom: &Geometry<T>, stagger: Stagger) -> Vec<T> {
    let shape = stagger.shape(geom);
    let axis_w: Vec<Vec<T>> = (0..3)
        .map(|a| {
            if a >= geom.dim {
                return vec![T::one()];
            }
            let h = geom.spacing[a];
            (0..shape[a])
                .map(|i| {
                    if stagger.is_nodal(a) && (i == 0 || i == shape[a] - 1) {
                        h * lit(0.5)
                    } else {
                        h
                    }
                })
                .collect()
        })
        .collect();
    let mut w = Vec::with_capacity(shape.iter().product());
    for i in 0..shape[0] {
        for j in 0..shape[1] {
            for k in 0..shape[2] {
                w.push(axis_w[0][i] * axis_w[1][j] * axis_w[2][k]);
            }
        }
    }
    w
}

/// Trapezoid weights for `n` uniformly spaced time nodes.
pub fn time_weights<T: Real>(n: usize, dt: T) -> Vec<T> {
    (0..n).map(|k| if k == 0 || k + 1 == n { dt * lit(0.5) } else { dt }).collect()
}

fn check_finite<T: Real>(f: &Field<T>) -> Result<()> {
    if f.comps.iter().any(|c| c.data.iter().any(|v| v.is_nan())) {
        return Err(LabError::NonFinite("NaN in quadrature input".into()));
    }
    Ok(())
}

fn reduce<T: Real>(
    grid: &Grid<T>,
    field: &Field<T>,
    region: Region,
    weight: Option<&dyn Fn([T; 3]) -> T>,
    value: impl Fn(usize, usize) -> T,
) -> Result<T> {
    if field.geom != grid.geom {
        return Err(LabError::contract("field and grid disagree"));
    }
    check_finite(field)?;
    let mut total = T::zero();
    for (ci, comp) in field.comps.iter().enumerate() {
        let qw = quadrature_weights(&grid.geom, comp.stagger);
        let mut acc = T::zero();
        for flat in 0..comp.data.len() {
            if !grid.in_region(comp, flat, region) {
                continue;
            }
            let mut term = qw[flat] * value(ci, flat);
            if let Some(w) = weight {
                let wv = w(comp.position(&grid.geom, flat));
                if !wv.is_finite() {
                    return Err(LabError::NonFinite("quadrature weight not finite on region".into()));
                }
                term = term * wv;
            }
            acc = acc + term;
        }
        total = total + acc;
    }
    Ok(total)
}

/// `sum_c ∫_region f_c(x) w(x) dx`.
pub fn integrate<T: Real>(
    field: &Field<T>,
    grid: &Grid<T>,
    region: Region,
    weight: Option<&dyn Fn([T; 3]) -> T>,
) -> Result<T> {
    reduce(grid, field, region, weight, |c, i| field.comps[c].data[i])
}

/// `∫_region (a·b) w dx` for fields with identical layout.
pub fn integrate_product<T: Real>(
    a: &Field<T>,
    b: &Field<T>,
    grid: &Grid<T>,
    region: Region,
    weight: Option<&dyn Fn([T; 3]) -> T>,
) -> Result<T> {
    if !a.same_layout(b) {
        return Err(LabError::contract("product of fields on different lattices"));
    }
    check_finite(b)?;
    reduce(grid, a, region, weight, |c, i| a.comps[c].data[i] * b.comps[c].data[i])
}

/// `∫_region |f|^2 w dx`.
pub fn integrate_sq<T: Real>(
    f: &Field<T>,
    grid: &Grid<T>,
    region: Region,
    weight: Option<&dyn Fn([T; 3]) -> T>,
) -> Result<T> {
    reduce(grid, f, region, weight, |c, i| {
        let v = f.comps[c].data[i];
        v * v
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, Boundary, DomainSpec};
    use std::f64::consts::PI;

    fn grid(n: usize) -> Grid<f64> {
        build_grid(&DomainSpec::unit_square(n, 1.0, 8)).unwrap()
    }

    #[test]
    fn constant_integrates_to_area() {
        let g = grid(32);
        let h = g.geom.spacing[0];
        for st in [Stagger::center(), Stagger::node(2), Stagger::face(0)] {
            let f = Field::scalar_from_fn(g.geom, st, Boundary::Free, |_| 1.0);
            let v = integrate(&f, &g, Region::Domain, None).unwrap();
            assert!((v - 1.0).abs() <= 2.0 * h, "{v}");
        }
    }

    #[test]
    fn sine_product_second_order() {
        // ∫∫ sin(πx) sin(πy) = (2/π)^2
        let exact = 4.0 / (PI * PI);
        let err = |n: usize| {
            let g = grid(n);
            let f = Field::scalar_from_fn(g.geom, Stagger::center(), Boundary::Free, |x| {
                (PI * x[0]).sin() * (PI * x[1]).sin()
            });
            (integrate(&f, &g, Region::Domain, None).unwrap() - exact).abs()
        };
        let (e1, e2, e3) = (err(16), err(32), err(64));
        for r in [e1 / e2, e2 / e3] {
            assert!((3.4..=4.6).contains(&r), "ratio {r}");
        }
    }

    #[test]
    fn empty_region_gives_zero() {
        let g = grid(16);
        let f = Field::scalar_from_fn(g.geom, Stagger::center(), Boundary::Free, |_| 3.0);
        // no omega installed: region is empty
        assert_eq!(integrate(&f, &g, Region::Omega, None).unwrap(), 0.0);
    }

    #[test]
    fn nan_rejected() {
        let g = grid(16);
        let mut f = Field::scalar(g.geom, Stagger::center(), Boundary::Free);
        f.comps[0].data[3] = f64::NAN;
        assert!(integrate(&f, &g, Region::Domain, None).is_err());
    }
}
