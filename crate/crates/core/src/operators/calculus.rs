use crate::error::{LabError, Result};
use crate::grid::{Boundary, Component, Field};
use crate::operators::stencil::{diff, laplacian_into, Ghost};
use crate::scalar::Real;

fn d<T: Real>(f: &Field<T>, c: usize, axis: usize) -> Component<T> {
    diff(&f.comps[c], &f.geom, axis, Ghost::of(f.bc))
}

fn combine<T: Real>(a: Component<T>, b: Component<T>, what: &str) -> Result<Component<T>> {
    if a.stagger != b.stagger {
        return Err(LabError::Staggering(format!("{what}: terms land on different lattices")));
    }
    let mut out = a;
    out.data.iter_mut().zip(&b.data).for_each(|(x, y)| *x = *x - *y);
    Ok(out)
}

/// Staggered gradient of a scalar; component `a` moves to the lattice toggled
/// along `a` (cell centres go to faces).
pub fn gradient<T: Real>(u: &Field<T>) -> Result<Field<T>> {
    if !u.is_scalar() {
        return Err(LabError::Staggering("gradient needs a scalar field".into()));
    }
    let comps = (0..u.geom.dim).map(|a| d(u, 0, a)).collect();
    Ok(Field { geom: u.geom, comps, bc: Boundary::Free })
}

/// `sum_j ∂_j v_j`; every term must land on the same lattice.
pub fn divergence<T: Real>(v: &Field<T>) -> Result<Field<T>> {
    if v.comps.len() != v.geom.dim {
        return Err(LabError::Staggering("divergence needs a vector field with dim components".into()));
    }
    let mut acc = d(v, 0, 0);
    for a in 1..v.geom.dim {
        let t = d(v, a, a);
        if t.stagger != acc.stagger {
            return Err(LabError::Staggering("divergence terms land on different lattices".into()));
        }
        acc.data.iter_mut().zip(&t.data).for_each(|(x, y)| *x = *x + *y);
    }
    Ok(Field { geom: v.geom, comps: vec![acc], bc: Boundary::Free })
}

/// Componentwise Laplacian honouring the field's boundary tag.
pub fn laplacian<T: Real>(f: &Field<T>) -> Field<T> {
    let mut out = f.clone();
    for (o, c) in out.comps.iter_mut().zip(&f.comps) {
        laplacian_into(c, &f.geom, f.bc, &c.data, &mut o.data);
    }
    out
}

/// Rotation: the scalar `∂₁v₂ − ∂₂v₁` in 2D, the curl vector in 3D.
pub fn rot<T: Real>(v: &Field<T>) -> Result<Field<T>> {
    let dim = v.geom.dim;
    if v.is_scalar() || v.comps.len() != dim {
        return Err(LabError::Staggering("rot needs a vector field".into()));
    }
    let comps = if dim == 2 {
        vec![combine(d(v, 1, 0), d(v, 0, 1), "rot")?]
    } else {
        vec![
            combine(d(v, 2, 1), d(v, 1, 2), "rot")?,
            combine(d(v, 0, 2), d(v, 2, 0), "rot")?,
            combine(d(v, 1, 0), d(v, 0, 1), "rot")?,
        ]
    };
    Ok(Field { geom: v.geom, comps, bc: Boundary::Free })
}

/// 2D rotation of a scalar potential, `(∂₂q, −∂₁q)`. With `q` on nodes the
/// result is a MAC field whose discrete divergence vanishes identically.
pub fn rot_scalar<T: Real>(q: &Field<T>) -> Result<Field<T>> {
    if q.geom.dim != 2 || !q.is_scalar() {
        return Err(LabError::Staggering("rot of a scalar potential is defined in 2D only".into()));
    }
    let mut second = d(q, 0, 0);
    second.data.iter_mut().for_each(|x| *x = -*x);
    let mut out = Field { geom: q.geom, comps: vec![d(q, 0, 1), second], bc: Boundary::Free };
    if q.bc == Boundary::Dirichlet {
        // tangential differences of a potential vanishing on the boundary
        out.enforce_boundary();
    }
    Ok(out)
}

/// `rot rot w`, dispatching to [`rot_scalar`] for the 2D scalar vorticity.
pub fn rot_rot<T: Real>(w: &Field<T>) -> Result<Field<T>> {
    let r = rot(w)?.with_bc(w.bc);
    if w.geom.dim == 2 {
        rot_scalar(&r)
    } else {
        rot(&r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Geometry, Stagger};

    fn geom(n: usize) -> Geometry<f64> {
        Geometry::new(&[1.0, 1.0], &[n, n]).unwrap()
    }

    fn interior_max<T: Real>(f: &Field<T>) -> T {
        let mut m = T::zero();
        for c in &f.comps {
            let shape = c.shape;
            for flat in 0..c.data.len() {
                let idx = c.unravel(flat);
                let inner = (0..f.geom.dim).all(|a| idx[a] > 0 && idx[a] + 1 < shape[a]);
                if inner {
                    m = m.max(c.data[flat].abs());
                }
            }
        }
        m
    }

    #[test]
    fn div_grad_is_laplacian() {
        let g = geom(16);
        let u = Field::scalar_from_fn(g, Stagger::center(), Boundary::Neumann, |x| (x[0] * 3.0).sin() + x[1] * x[1] * x[0]);
        let dg = divergence(&gradient(&u).unwrap()).unwrap();
        let l = laplacian(&u);
        let diff = dg.sub(&l).unwrap();
        assert!(diff.max_abs() < 1e-10 * l.max_abs());
    }

    #[test]
    fn laplacian_of_square() {
        let g = geom(32);
        let u = Field::scalar_from_fn(g, Stagger::center(), Boundary::Free, |x| x[0] * x[0]);
        let l = laplacian(&u);
        let err = interior_max(&l.map_with_position(|_, v| v - 2.0));
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn divergence_of_constant_vanishes() {
        let g = geom(8);
        let v = Field::mac_from_fn(g, Boundary::Free, |_| [1.5, -0.25, 0.0]);
        assert!(divergence(&v).unwrap().max_abs() == 0.0);
    }

    #[test]
    fn rot_of_gradient_vanishes() {
        let g = geom(24);
        let p = Field::scalar_from_fn(g, Stagger::center(), Boundary::Neumann, |x| (2.0 * x[0]).exp() * (5.0 * x[1]).sin());
        let r = rot(&gradient(&p).unwrap()).unwrap();
        assert!(interior_max(&r) < 1e-10);
    }

    #[test]
    fn rot_of_rigid_rotation() {
        let g = geom(8);
        let v = Field::mac_from_fn(g, Boundary::Free, |x| [-x[1], x[0], 0.0]);
        let r = rot(&v).unwrap();
        assert!(r.comps[0].data.iter().all(|&w| (w - 2.0).abs() < 1e-12));
    }

    #[test]
    fn div_of_rot_potential_vanishes() {
        let g = geom(20);
        let q = Field::scalar_from_fn(g, Stagger::node(2), Boundary::Free, |x| {
            (x[0] * 7.0).sin() * (x[1] * 3.0 + x[0]).cos()
        });
        let v = rot_scalar(&q).unwrap();
        assert!(v.is_mac());
        assert!(divergence(&v).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn rot_needs_vector() {
        let g = geom(8);
        let s = Field::scalar(g, Stagger::center(), Boundary::Free);
        assert!(matches!(rot(&s), Err(LabError::Staggering(_))));
    }

    #[test]
    fn works_in_single_precision() {
        let g = Geometry::<f32>::new(&[1.0, 1.0], &[16, 16]).unwrap();
        let p = Field::scalar_from_fn(g, Stagger::center(), Boundary::Neumann, |x| x[0] * x[1] + x[0]);
        let r = rot(&gradient(&p).unwrap()).unwrap();
        assert!(interior_max(&r) < 1e-3);
    }

    #[test]
    fn curl_3d_of_gradient_vanishes() {
        let g = Geometry::new(&[1.0, 1.0, 1.0], &[8, 8, 8]).unwrap();
        let p = Field::scalar_from_fn(g, Stagger::center(), Boundary::Neumann, |x| x[0] * x[1] * x[2] + f64::sin(x[2]));
        let r = rot(&gradient(&p).unwrap()).unwrap();
        assert_eq!(r.comps.len(), 3);
        assert_eq!(r.comps[0].stagger, Stagger::edge(0, 3));
        assert!(interior_max(&r) < 1e-10);
    }
}
