use serde::Serialize;

use crate::error::{LabError, Result};
use crate::scalar::{lit, Real};

/// Exponent of the time profile in the weights `e^{λη}/ℓ⁸`.
pub const ELL_POWER: i32 = 8;

/// Smooth time profile: `ℓ(t) = t` on `[0, T/4]`, a monotone `C∞` blend up
/// to the peak at `t0 = T/2`, mirrored on `[T/2, T]`.
///
/// The blend is flat to every order at `t0`, so in floating point `ℓ(t)`
/// rounds to the peak once `|t - t0| < T/100` or so. Time steps coarser
/// than `T/128` keep the maximum strict on the grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Ell<T> {
    horizon: T,
    peak: T,
}

fn bump<T: Real>(u: T) -> T {
    if u > T::zero() {
        (-T::one() / u).exp()
    } else {
        T::zero()
    }
}

fn bump_prime<T: Real>(u: T) -> T {
    if u > T::zero() {
        bump(u) / (u * u)
    } else {
        T::zero()
    }
}

/// Exponential smoothstep: 0 at 0, 1 at 1, all derivatives vanish at both ends.
fn smoothstep<T: Real>(u: T) -> (T, T) {
    let (a, b) = (bump(u), bump(T::one() - u));
    let den = a + b;
    let val = a / den;
    let der = (bump_prime(u) * b + a * bump_prime(T::one() - u)) / (den * den);
    (val, der)
}

impl<T: Real> Ell<T> {
    /// The peak must be at least `T/2` so that `ℓ(t0)` is a strict maximum.
    pub fn new(horizon: T, peak: T) -> Result<Self> {
        if !(horizon > T::zero()) {
            return Err(LabError::contract("time horizon must be positive"));
        }
        let quarter = horizon * lit(0.25);
        if !(peak > quarter) {
            return Err(LabError::contract("peak value of ell must exceed T/4"));
        }
        if peak < horizon * lit(0.5) {
            return Err(LabError::contract(
                "peak value below T/2 breaks the strict maximum of ell at t0 for this blend",
            ));
        }
        Ok(Ell { horizon, peak })
    }

    /// Profile with peak `T/2`.
    pub fn standard(horizon: T) -> Result<Self> {
        Self::new(horizon, horizon * lit(0.5))
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn peak(&self) -> T {
        self.peak
    }

    /// `(ℓ(t), ℓ'(t))`, for `t` in `[0, T]`.
    pub fn eval(&self, t: T) -> (T, T) {
        let half = self.horizon * lit(0.5);
        if t > half {
            let (v, d) = self.rising(self.horizon - t);
            return (v, -d);
        }
        self.rising(t)
    }

    pub fn value(&self, t: T) -> T {
        self.eval(t).0
    }

    pub fn derivative(&self, t: T) -> T {
        self.eval(t).1
    }

    fn rising(&self, t: T) -> (T, T) {
        let quarter = self.horizon * lit(0.25);
        if t <= quarter {
            return (t.max(T::zero()), T::one());
        }
        let u = ((t - quarter) / quarter).min(T::one());
        let (b, db) = smoothstep(u);
        let gap = self.peak - t;
        (t + gap * b, T::one() - b + gap * db / quarter)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_on_first_quarter() {
        let ell = Ell::new(2.0f64, 1.0).unwrap();
        assert_eq!(ell.value(0.25), 0.25);
        assert_eq!(ell.value(0.5), 0.5);
        assert_eq!(ell.derivative(0.1), 1.0);
    }

    #[test]
    fn symmetric_about_t0() {
        let ell = Ell::new(2.0f64, 1.0).unwrap();
        assert!((ell.value(0.3) - ell.value(1.7)).abs() < 1e-12);
        for k in 0..=200 {
            let t = k as f64 * 0.01;
            assert!((ell.value(t) - ell.value(2.0 - t)).abs() < 1e-12);
            assert!((ell.derivative(t) + ell.derivative(2.0 - t)).abs() < 1e-9 || (t - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn strict_maximum_at_t0() {
        let ell = Ell::new(2.0f64, 1.0).unwrap();
        assert_eq!(ell.value(1.0), 1.0);
        for steps in [8, 16, 64, 128] {
            let dt = 2.0 / steps as f64;
            for k in 0..=steps {
                let t = k as f64 * dt;
                if k != steps / 2 {
                    assert!(ell.value(t) < 1.0, "t = {t}");
                }
                assert!(k == 0 || k == steps || ell.value(t) > 0.0);
            }
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let ell = Ell::new(2.0f64, 1.3).unwrap();
        let h = 1e-6;
        for k in 1..200 {
            let t = k as f64 * 0.01;
            let fd = (ell.value(t + h) - ell.value(t - h)) / (2.0 * h);
            assert!((fd - ell.derivative(t)).abs() < 1e-5, "t = {t}");
        }
    }

    #[test]
    fn rejects_low_peak() {
        assert!(Ell::new(2.0, 0.5).is_err());
        assert!(Ell::new(2.0, 0.8).is_err());
    }
}
