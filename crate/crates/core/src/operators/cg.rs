use crate::error::{LabError, Result};
use crate::scalar::{count, to_f64, Real};

/// Tolerance and iteration cap for the conjugate-gradient solves.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    /// Relative residual target.
    pub tolerance: f64,
    /// Iteration cap as a multiple of the unknown count.
    pub cap_factor: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { tolerance: 1e-10, cap_factor: 10 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgOutcome {
    pub iterations: usize,
    pub relative_residual: f64,
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (x, y)| s + *x * *y)
}

fn remove_mean<T: Real>(v: &mut [T]) {
    let mean = v.iter().copied().sum::<T>() / count::<T>(v.len());
    v.iter_mut().for_each(|x| *x = *x - mean);
}

/// Conjugate gradients for a symmetric positive (semi-)definite operator.
/// With `singular_constant` the constant vector is the null space: the
/// right-hand side and iterates are kept mean-free.
pub fn conjugate_gradient<T: Real>(
    apply: impl Fn(&[T], &mut [T]),
    b: &[T],
    x: &mut [T],
    config: SolverConfig,
    singular_constant: bool,
) -> Result<CgOutcome> {
    let n = b.len();
    let mut rhs = b.to_vec();
    if singular_constant {
        remove_mean(&mut rhs);
        remove_mean(x);
    }
    let bnorm = dot(&rhs, &rhs).sqrt();
    if bnorm == T::zero() {
        x.iter_mut().for_each(|v| *v = T::zero());
        return Ok(CgOutcome { iterations: 0, relative_residual: 0.0 });
    }
    let tol = T::from_f64(config.tolerance).unwrap_or_else(T::epsilon) * bnorm;
    let mut ax = vec![T::zero(); n];
    apply(x, &mut ax);
    let mut r: Vec<T> = rhs.iter().zip(&ax).map(|(b, a)| *b - *a).collect();
    if singular_constant {
        remove_mean(&mut r);
    }
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let cap = config.cap_factor * n;
    let mut ap = vec![T::zero(); n];
    for it in 0..cap {
        if rr.sqrt() <= tol {
            return Ok(CgOutcome { iterations: it, relative_residual: to_f64(rr.sqrt() / bnorm) });
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > T::zero()) {
            break;
        }
        let alpha = rr / pap;
        x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi = *xi + alpha * *pi);
        r.iter_mut().zip(&ap).for_each(|(ri, api)| *ri = *ri - alpha * *api);
        if singular_constant {
            remove_mean(&mut r);
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        p.iter_mut().zip(&r).for_each(|(pi, ri)| *pi = *ri + beta * *pi);
        rr = rr_new;
    }
    let rel = to_f64(rr.sqrt() / bnorm);
    if rel <= config.tolerance {
        return Ok(CgOutcome { iterations: cap, relative_residual: rel });
    }
    Err(LabError::NonConvergence { solver: "conjugate gradient", iterations: cap, residual: rel })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(x: &[f64], y: &mut [f64]) {
        let n = x.len();
        for i in 0..n {
            let l = if i > 0 { x[i - 1] } else { 0.0 };
            let r = if i + 1 < n { x[i + 1] } else { 0.0 };
            y[i] = 2.0 * x[i] - l - r;
        }
    }

    #[test]
    fn solves_spd_system() {
        let b: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let mut x = vec![0.0; 50];
        let out = conjugate_gradient(tridiag, &b, &mut x, SolverConfig::default(), false).unwrap();
        let mut ax = vec![0.0; 50];
        tridiag(&x, &mut ax);
        let err: f64 = ax.iter().zip(&b).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(err < 1e-9 && out.iterations <= 50);
    }

    #[test]
    fn zero_rhs_returns_zero() {
        let mut x = vec![1.0; 5];
        let out = conjugate_gradient(tridiag, &[0.0; 5], &mut x, SolverConfig::default(), false).unwrap();
        assert_eq!(out.iterations, 0);
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn iteration_cap_reports_nonconvergence() {
        let b: Vec<f64> = (0..200).map(|i| (i as f64).cos()).collect();
        let mut x = vec![0.0; 200];
        let cfg = SolverConfig { tolerance: 1e-14, cap_factor: 0 };
        let err = conjugate_gradient(tridiag, &b, &mut x, cfg, false);
        assert!(matches!(err, Err(LabError::NonConvergence { .. })));
    }
}
