use crate::error::{LabError, Result};
use crate::grid::{quadrature_weights, Boundary, Field, Stagger};
use crate::operators::calculus::{divergence, gradient};
use crate::operators::cg::{conjugate_gradient, CgOutcome, SolverConfig};
use crate::operators::stencil::laplacian_into;
use crate::scalar::{to_f64, Real};

/// Discrete L² norm with the lattice quadrature weights.
pub fn l2_norm<T: Real>(f: &Field<T>) -> T {
    f.comps
        .iter()
        .map(|c| {
            let w = quadrature_weights(&f.geom, c.stagger);
            c.data.iter().zip(&w).fold(T::zero(), |s, (v, w)| s + *v * *v * *w)
        })
        .sum::<T>()
        .sqrt()
}

/// Solves the zero-flux Poisson problem `Δφ = rhs` on cell centres with a
/// mean-free solution.
pub fn solve_neumann_poisson<T: Real>(
    rhs: &Field<T>,
    initial: Option<&Field<T>>,
    config: SolverConfig,
) -> Result<(Field<T>, CgOutcome)> {
    if !rhs.is_scalar() || rhs.comps[0].stagger != Stagger::center() {
        return Err(LabError::Staggering("pressure Poisson problem lives on cell centres".into()));
    }
    let comp = &rhs.comps[0];
    let geom = rhs.geom;
    let apply = |x: &[T], y: &mut [T]| {
        laplacian_into(comp, &geom, Boundary::Neumann, x, y);
        y.iter_mut().for_each(|v| *v = -*v);
    };
    let b: Vec<T> = comp.data.iter().map(|v| -*v).collect();
    let mut phi = Field::scalar(geom, Stagger::center(), Boundary::Neumann);
    if let Some(init) = initial {
        phi.comps[0].data.copy_from_slice(&init.comps[0].data);
    }
    let outcome = conjugate_gradient(apply, &b, &mut phi.comps[0].data, config, true)?;
    Ok((phi, outcome))
}

/// Result of a discrete Leray projection.
#[derive(Clone, Debug)]
pub struct Projection<T> {
    pub field: Field<T>,
    /// Potential whose gradient was removed.
    pub potential: Field<T>,
    pub iterations: usize,
    /// `‖div v‖` before and after, in discrete L².
    pub divergence_before: f64,
    pub divergence_after: f64,
}

/// Projects a Dirichlet-zero MAC field onto discretely divergence-free
/// fields: `P v = v − ∇φ` with `Δφ = div v` and zero-flux `φ`.
///
/// The solve is tightened so that `‖div P v‖ ≤ tol · ‖v‖`.
pub fn leray_project<T: Real>(v: &Field<T>, config: SolverConfig) -> Result<Projection<T>> {
    if !v.is_mac() {
        return Err(LabError::Staggering("Leray projection needs a MAC velocity field".into()));
    }
    let mut input = v.clone().with_bc(Boundary::Dirichlet);
    input.check_invariants().map_err(|_| LabError::contract("Leray projection needs Dirichlet-zero normal components"))?;
    input.bc = v.bc;
    let div = divergence(&input)?;
    let dnorm = l2_norm(&div);
    let vnorm = l2_norm(&input);
    let mut cfg = config;
    if dnorm > T::zero() {
        cfg.tolerance = config.tolerance * (to_f64(vnorm) / to_f64(dnorm)).min(1.0);
    }
    let (phi, outcome) = solve_neumann_poisson(&div, None, cfg)?;
    let g = gradient(&phi)?;
    let mut out = input.clone();
    out.axpy(-T::one(), &g.with_bc(out.bc))?;
    let after = l2_norm(&divergence(&out)?);
    Ok(Projection {
        field: out,
        potential: phi,
        iterations: outcome.iterations,
        divergence_before: to_f64(dnorm),
        divergence_after: to_f64(after),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Geometry;
    use crate::operators::calculus::rot_scalar;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn geom() -> Geometry<f64> {
        Geometry::new(&[1.0, 1.0], &[24, 24]).unwrap()
    }

    fn random_mac(seed: u64) -> Field<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = Field::mac(geom(), Boundary::Dirichlet);
        f.comps.iter_mut().for_each(|c| c.data.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0)));
        f.enforce_boundary();
        f
    }

    #[test]
    fn divergence_free_input_unchanged() {
        let q = Field::scalar_from_fn(geom(), Stagger::node(2), Boundary::Dirichlet, |x| {
            (std::f64::consts::PI * x[0]).sin().powi(2) * (std::f64::consts::PI * x[1]).sin().powi(2)
        });
        let v = rot_scalar(&q).unwrap().with_bc(Boundary::Dirichlet);
        let p = leray_project(&v, SolverConfig::default()).unwrap();
        assert!(p.field.sub(&v).unwrap().max_abs() <= 1e-10 * v.max_abs());
    }

    #[test]
    fn pure_gradient_is_annihilated() {
        let psi = Field::scalar_from_fn(geom(), Stagger::center(), Boundary::Neumann, |x| {
            let r2 = (x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2);
            (-30.0 * r2).exp()
        });
        let v = gradient(&psi).unwrap().with_bc(Boundary::Dirichlet);
        let p = leray_project(&v, SolverConfig::default()).unwrap();
        assert!(l2_norm(&p.field) <= 1e-9 * l2_norm(&v));
    }

    #[test]
    fn random_field_divergence_removed() {
        let v = random_mac(7);
        let p = leray_project(&v, SolverConfig::default()).unwrap();
        assert!(p.divergence_after <= 1e-10 * l2_norm(&v));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]
        #[test]
        fn projection_is_idempotent_linear_and_contractive(seed in any::<u64>(), k in 0.1f64..5.0) {
            let v = random_mac(seed);
            let w = random_mac(seed.wrapping_add(1));
            let cfg = SolverConfig { tolerance: 1e-12, ..SolverConfig::default() };
            let pv = leray_project(&v, cfg).unwrap().field;
            let ppv = leray_project(&pv, cfg).unwrap().field;
            prop_assert!(ppv.sub(&pv).unwrap().max_abs() <= 1e-10 * pv.max_abs());
            prop_assert!(l2_norm(&pv) <= l2_norm(&v) * (1.0 + 1e-12));
            let mut sum = v.scaled(k);
            sum.axpy(1.0, &w).unwrap();
            let psum = leray_project(&sum, cfg).unwrap().field;
            let mut lin = pv.scaled(k);
            lin.axpy(1.0, &leray_project(&w, cfg).unwrap().field).unwrap();
            prop_assert!(psum.sub(&lin).unwrap().max_abs() <= 1e-9 * (1.0 + lin.max_abs()));
        }
    }
}
