//! Raw second-order stencils on single lattices.
//!
//! Ghost values outside the domain follow the field's [`Boundary`]: odd
//! reflection for Dirichlet-zero data, even reflection for zero-flux data,
//! linear extrapolation otherwise.

use crate::grid::{Boundary, Component, Geometry};
use crate::scalar::{lit, Real};

/// Ghost rule for the half cell beyond a centred axis end.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ghost {
    Odd,
    Even,
    Extrapolate,
}

impl Ghost {
    pub fn of(bc: Boundary) -> Self {
        match bc {
            Boundary::Dirichlet => Ghost::Odd,
            Boundary::Neumann => Ghost::Even,
            Boundary::Free => Ghost::Extrapolate,
        }
    }

    /// Rule obeyed by the derivative of a field obeying `self`.
    pub fn differentiated(self) -> Self {
        match self {
            Ghost::Odd => Ghost::Even,
            Ghost::Even => Ghost::Odd,
            Ghost::Extrapolate => Ghost::Extrapolate,
        }
    }

    #[inline]
    fn value<T: Real>(self, end: T, next: T) -> T {
        match self {
            Ghost::Odd => -end,
            Ghost::Even => end,
            Ghost::Extrapolate => lit::<T>(2.0) * end - next,
        }
    }
}

/// Calls `f(out_flat, in_base, stride)` for every output sample, where
/// `in_base` addresses the input line position with the `axis` coordinate zero.
fn for_lines<T: Real>(input: &Component<T>, out: &Component<T>, axis: usize, mut f: impl FnMut(usize, usize, usize, usize)) {
    let stride = input.strides()[axis];
    for flat in 0..out.data.len() {
        let mut idx = out.unravel(flat);
        let i = idx[axis];
        idx[axis] = 0;
        f(flat, input.index(idx), stride, i);
    }
}

/// Staggered first difference along `axis`. Nodal samples map to centred
/// ones and back.
pub fn diff<T: Real>(input: &Component<T>, geom: &Geometry<T>, axis: usize, ghost: Ghost) -> Component<T> {
    let n = geom.cells[axis];
    let h = geom.spacing[axis];
    let mut out = Component::zeros(geom, input.stagger.toggled(axis));
    let src = &input.data;
    let nodal = input.stagger.is_nodal(axis);
    let mut vals = vec![T::zero(); out.data.len()];
    for_lines(input, &out, axis, |flat, base, s, i| {
        vals[flat] = if nodal {
            (src[base + (i + 1) * s] - src[base + i * s]) / h
        } else if i == 0 {
            let g = ghost.value(src[base], src[base + s]);
            (src[base] - g) / h
        } else if i == n {
            let g = ghost.value(src[base + (n - 1) * s], src[base + (n - 2) * s]);
            (g - src[base + (n - 1) * s]) / h
        } else {
            (src[base + i * s] - src[base + (i - 1) * s]) / h
        };
    });
    out.data = vals;
    out
}

/// `∂_a ∂_b` by composed staggered differences.
pub fn second_diff<T: Real>(input: &Component<T>, geom: &Geometry<T>, a: usize, b: usize, bc: Boundary) -> Component<T> {
    let g = Ghost::of(bc);
    let first = diff(input, geom, a, g);
    let g2 = if a == b { g.differentiated() } else { g };
    diff(&first, geom, b, g2)
}

/// Derivative along `axis` sampled on the input lattice itself (second
/// order everywhere, using the ghost rule at centred ends).
pub fn central_diff<T: Real>(input: &Component<T>, geom: &Geometry<T>, axis: usize, ghost: Ghost) -> Component<T> {
    let len = input.shape[axis];
    let h = geom.spacing[axis];
    let two_h = lit::<T>(2.0) * h;
    let three = lit::<T>(3.0);
    let four = lit::<T>(4.0);
    let nodal = input.stagger.is_nodal(axis);
    let mut out = input.clone();
    let src = &input.data;
    let mut vals = vec![T::zero(); src.len()];
    for_lines(input, input, axis, |flat, base, s, i| {
        let at = |j: usize| src[base + j * s];
        vals[flat] = if i > 0 && i + 1 < len {
            (at(i + 1) - at(i - 1)) / two_h
        } else {
            // i is an end; sign flips the formula at the upper end
            let (e, n1, n2, sign) = if i == 0 { (at(0), at(1), at(2), T::one()) } else { (at(len - 1), at(len - 2), at(len - 3), -T::one()) };
            let one_sided = (-three * e + four * n1 - n2) / two_h;
            let v = if nodal {
                one_sided
            } else {
                match ghost {
                    // quadratic through the zero wall value
                    Ghost::Odd => (three * e + n1) / (three * h),
                    Ghost::Even => (n1 - e) / two_h,
                    Ghost::Extrapolate => one_sided,
                }
            };
            sign * v
        };
    });
    out.data = vals;
    out
}

/// Averages a lattice onto another one, axis by axis.
pub fn resample<T: Real>(input: &Component<T>, geom: &Geometry<T>, target: crate::grid::Stagger, ghost: Ghost) -> Component<T> {
    let mut cur = input.clone();
    let half = lit::<T>(0.5);
    for axis in 0..geom.dim {
        if cur.stagger.is_nodal(axis) == target.is_nodal(axis) {
            continue;
        }
        let n = geom.cells[axis];
        let nodal = cur.stagger.is_nodal(axis);
        let mut out = Component::zeros(geom, cur.stagger.toggled(axis));
        let src = &cur.data;
        let mut vals = vec![T::zero(); out.data.len()];
        for_lines(&cur, &out, axis, |flat, base, s, i| {
            vals[flat] = if nodal {
                half * (src[base + i * s] + src[base + (i + 1) * s])
            } else if i == 0 {
                half * (src[base] + ghost.value(src[base], src[base + s]))
            } else if i == n {
                let e = src[base + (n - 1) * s];
                half * (e + ghost.value(e, src[base + (n - 2) * s]))
            } else {
                half * (src[base + (i - 1) * s] + src[base + i * s])
            };
        });
        out.data = vals;
        cur = out;
    }
    cur
}

/// Second-order Laplacian of one lattice into `out`. Dirichlet nodal
/// boundary samples produce zero; their values are prescribed.
pub fn laplacian_into<T: Real>(comp: &Component<T>, geom: &Geometry<T>, bc: Boundary, src: &[T], out: &mut [T]) {
    let shape = comp.shape;
    let strides = comp.strides();
    let ghost = Ghost::of(bc);
    let two = lit::<T>(2.0);
    let inv_h2: Vec<T> = (0..geom.dim).map(|a| T::one() / (geom.spacing[a] * geom.spacing[a])).collect();
    out.iter_mut().for_each(|v| *v = T::zero());
    for a in 0..geom.dim {
        let s = strides[a];
        let len = shape[a];
        let nodal = comp.stagger.is_nodal(a);
        let w = inv_h2[a];
        for (flat, o) in out.iter_mut().enumerate() {
            let i = (flat / s) % len;
            let f = src[flat];
            let lo = if i > 0 { Some(src[flat - s]) } else { None };
            let hi = if i + 1 < len { Some(src[flat + s]) } else { None };
            let term = match (lo, hi) {
                (Some(l), Some(u)) => l - two * f + u,
                (lo, hi) => {
                    let inner = lo.or(hi).expect("lattice has at least two samples");
                    if nodal {
                        match bc {
                            Boundary::Dirichlet => T::zero(),
                            Boundary::Neumann => two * (inner - f),
                            Boundary::Free => {
                                let far = if lo.is_none() { src[flat + 2 * s] } else { src[flat - 2 * s] };
                                f - two * inner + far
                            }
                        }
                    } else {
                        ghost.value(f, inner) - two * f + inner
                    }
                }
            };
            *o = *o + w * term;
        }
    }
    if bc == Boundary::Dirichlet {
        for (flat, o) in out.iter_mut().enumerate() {
            if comp.on_boundary(geom, flat) {
                *o = T::zero();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Geometry, Stagger};

    fn geom(n: usize) -> Geometry<f64> {
        Geometry::new(&[1.0, 1.0], &[n, n]).unwrap()
    }

    #[test]
    fn central_diff_exact_for_quadratic_vanishing_at_wall() {
        let g = geom(16);
        // x-faces are centred in y; f = y(1-y) vanishes on both walls
        let c = Component::from_fn(&g, Stagger::face(0), |x| x[1] * (1.0 - x[1]));
        let d = central_diff(&c, &g, 1, Ghost::Odd);
        for flat in 0..d.data.len() {
            let y = c.position(&g, flat)[1];
            assert!((d.data[flat] - (1.0 - 2.0 * y)).abs() < 1e-12);
        }
    }

    #[test]
    fn resample_is_exact_for_linear_data() {
        let g = geom(8);
        let c = Component::from_fn(&g, Stagger::face(0), |x| 2.0 * x[0] + 3.0 * x[1]);
        let r = resample(&c, &g, Stagger::face(1), Ghost::Extrapolate);
        for flat in 0..r.data.len() {
            let x = r.position(&g, flat);
            assert!((r.data[flat] - (2.0 * x[0] + 3.0 * x[1])).abs() < 1e-12);
        }
    }

    #[test]
    fn laplacian_matches_composed_differences() {
        let g = geom(12);
        for (st, bc) in [
            (Stagger::center(), Boundary::Neumann),
            (Stagger::face(0), Boundary::Dirichlet),
            (Stagger::node(2), Boundary::Neumann),
            (Stagger::face(1), Boundary::Free),
        ] {
            let mut c = Component::from_fn(&g, st, |x| (3.0 * x[0]).sin() * (2.0 * x[1] + 0.3).cos());
            if bc == Boundary::Dirichlet {
                for f in 0..c.data.len() {
                    if c.on_boundary(&g, f) {
                        c.data[f] = 0.0;
                    }
                }
            }
            let mut direct = vec![0.0; c.data.len()];
            laplacian_into(&c, &g, bc, &c.data, &mut direct);
            let mut composed = vec![0.0; c.data.len()];
            for a in 0..2 {
                let d = second_diff(&c, &g, a, a, bc);
                composed.iter_mut().zip(&d.data).for_each(|(o, v)| *o += v);
            }
            for f in 0..c.data.len() {
                if bc == Boundary::Dirichlet && c.on_boundary(&g, f) {
                    continue;
                }
                assert!((direct[f] - composed[f]).abs() < 1e-9 * (1.0 + direct[f].abs()), "{st:?} {bc:?} {f}");
            }
        }
    }
}
