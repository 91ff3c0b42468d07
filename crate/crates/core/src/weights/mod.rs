//! Carleman weights: the spatial profile η, the time profile ℓ, the
//! space-time weights φ, α, φ̂ and the stationary weight φ₀ = e^{λψ}.

mod ell;
mod eta;

pub use ell::{Ell, ELL_POWER};
pub use eta::{build_eta, certify, EtaMethod, EtaProfile, WeightCertificate, GRADIENT_FLOOR_FACTOR};

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::grid::{Component, Grid, Stagger, TimeAxis};
use crate::scalar::{lit, to_f64, Real};

/// Exponents below this are flushed to zero.
pub const UNDERFLOW_EXPONENT: f64 = -700.0;

/// `φ = e^{λη}/ℓ⁸`, `α = (e^{λη} − e^{2λ‖η‖})/ℓ⁸` on a fixed grid and time axis.
#[derive(Clone, Debug)]
pub struct WeightSet<T> {
    lambda: T,
    eta: EtaProfile<T>,
    ell: Ell<T>,
    time: TimeAxis<T>,
    /// `e^{2λ‖η‖}`
    ceiling: T,
    /// `(ℓ(t_k), ℓ'(t_k))`
    ell_samples: Vec<(T, T)>,
}

/// Time-dependent factors shared by every spatial sample at one time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeFactor<T> {
    pub ell: T,
    pub dell: T,
    /// `ℓ^{-8}`, infinite at `ℓ = 0`.
    pub phi_hat: T,
}

impl<T: Real> WeightSet<T> {
    /// `λ = 0` is accepted as a degenerate probe.
    pub fn new(eta: EtaProfile<T>, lambda: T, ell: Ell<T>, time: TimeAxis<T>) -> Result<Self> {
        if !(lambda >= T::zero()) || !lambda.is_finite() {
            return Err(LabError::contract("lambda must be a finite non-negative number"));
        }
        if (ell.horizon() - time.horizon).abs() > lit::<T>(1e-12) * time.horizon {
            return Err(LabError::contract("ell and the time axis use different horizons"));
        }
        let ceiling = (lit::<T>(2.0) * lambda * eta.max_value()).exp();
        let ell_samples = (0..time.nodes()).map(|k| ell.eval(time.time(k))).collect();
        Ok(WeightSet { lambda, eta, ell, time, ceiling, ell_samples })
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn eta(&self) -> &EtaProfile<T> {
        &self.eta
    }

    pub fn ell(&self) -> &Ell<T> {
        &self.ell
    }

    pub fn time_axis(&self) -> &TimeAxis<T> {
        &self.time
    }

    /// `(ℓ, ℓ')` at each time node.
    pub fn ell_samples(&self) -> &[(T, T)] {
        &self.ell_samples
    }

    pub fn eta_max(&self) -> T {
        self.eta.max_value()
    }

    pub fn time_factor(&self, t: T) -> TimeFactor<T> {
        let (ell, dell) = self.ell.eval(t);
        TimeFactor { ell, dell, phi_hat: ell.powi(-ELL_POWER) }
    }

    /// Time factor at node `k`, from the stored samples.
    pub fn time_factor_at(&self, k: usize) -> TimeFactor<T> {
        let (ell, dell) = self.ell_samples[k];
        TimeFactor { ell, dell, phi_hat: ell.powi(-ELL_POWER) }
    }

    /// `λη` sampled on one lattice; the spatial half of every weight.
    pub fn lambda_eta_table(&self, comp: &Component<T>) -> Vec<T> {
        let geom = self.eta.geom();
        (0..comp.data.len()).map(|f| self.lambda * self.eta.value(comp.position(geom, f))).collect()
    }

    pub fn lambda_eta_on(&self, stagger: Stagger) -> Vec<T> {
        self.lambda_eta_table(&Component::zeros(self.eta.geom(), stagger))
    }

    pub fn phi(&self, x: [T; 3], t: T) -> T {
        (self.lambda * self.eta.value(x)).exp() * self.time_factor(t).phi_hat
    }

    pub fn alpha(&self, x: [T; 3], t: T) -> T {
        self.alpha_from(self.lambda * self.eta.value(x), self.time_factor(t))
    }

    pub fn dalpha(&self, x: [T; 3], t: T) -> T {
        self.dalpha_from(self.lambda * self.eta.value(x), self.time_factor(t))
    }

    pub fn phi_hat(&self, t: T) -> T {
        self.time_factor(t).phi_hat
    }

    /// `φ̂^m`.
    pub fn phi_hat_pow(&self, t: T, m: T) -> T {
        self.time_factor(t).ell.powf(-lit::<T>(ELL_POWER as f64) * m)
    }

    fn numerator(&self, lambda_eta: T) -> T {
        lambda_eta.exp() - self.ceiling
    }

    pub fn alpha_from(&self, lambda_eta: T, tf: TimeFactor<T>) -> T {
        let num = self.numerator(lambda_eta);
        if tf.ell == T::zero() {
            return if num < T::zero() { T::neg_infinity() } else { T::zero() };
        }
        num * tf.phi_hat
    }

    /// `∂ₜα = −8 ℓ' ℓ^{-9} (e^{λη} − e^{2λ‖η‖})`.
    pub fn dalpha_from(&self, lambda_eta: T, tf: TimeFactor<T>) -> T {
        let num = self.numerator(lambda_eta);
        if num == T::zero() {
            return T::zero();
        }
        -lit::<T>(ELL_POWER as f64) * tf.dell * tf.ell.powi(-ELL_POWER - 1) * num
    }

    /// `ln((sφ)^k e^{2sα})`; `−∞` where the weight is zero, in particular
    /// at `t ∈ {0, T}`.
    pub fn log_weighted_from(&self, s: T, k: T, lambda_eta: T, tf: TimeFactor<T>) -> T {
        let num = self.numerator(lambda_eta);
        if tf.ell == T::zero() {
            if num < T::zero() {
                return T::neg_infinity();
            }
            return if k == T::zero() { T::zero() } else { T::infinity() };
        }
        let mut e = lit::<T>(2.0) * s * num * tf.phi_hat;
        if k != T::zero() {
            e = e + k * (s.ln() + lambda_eta - lit::<T>(ELL_POWER as f64) * tf.ell.ln());
        }
        e
    }

    /// `(sφ)^k e^{2sα}`, evaluated in log space. Zero wherever the exponent
    /// drops below [`UNDERFLOW_EXPONENT`], in particular at `t ∈ {0, T}`.
    pub fn weighted_from(&self, s: T, k: T, lambda_eta: T, tf: TimeFactor<T>) -> T {
        flush_exp(self.log_weighted_from(s, k, lambda_eta, tf))
    }

    /// `max α = α(x*, t0)` at the maximiser of η: the reference for scaled
    /// weighted integrals.
    pub fn alpha_max(&self) -> T {
        let tf = self.time_factor(self.time.t0());
        self.alpha_from(self.lambda * self.eta_max(), tf)
    }

    pub fn weighted(&self, s: T, k: T, x: [T; 3], t: T) -> T {
        self.weighted_from(s, k, self.lambda * self.eta.value(x), self.time_factor(t))
    }
}

/// `e^x`, flushed to zero below [`UNDERFLOW_EXPONENT`].
pub fn flush_exp<T: Real>(x: T) -> T {
    if x < lit(UNDERFLOW_EXPONENT) {
        T::zero()
    } else {
        x.exp()
    }
}

/// Pointwise evaluators at a fixed Carleman parameter `s`.
#[derive(Clone, Copy, Debug)]
pub struct WeightEval<'a, T> {
    pub ws: &'a WeightSet<T>,
    pub s: T,
}

pub fn eval_weights<T: Real>(ws: &WeightSet<T>, s: T) -> Result<WeightEval<'_, T>> {
    if !(s > T::zero()) || !s.is_finite() {
        return Err(LabError::contract("Carleman parameter s must be positive"));
    }
    Ok(WeightEval { ws, s })
}

impl<T: Real> WeightEval<'_, T> {
    pub fn phi(&self, x: [T; 3], t: T) -> T {
        self.ws.phi(x, t)
    }

    pub fn alpha(&self, x: [T; 3], t: T) -> T {
        self.ws.alpha(x, t)
    }

    pub fn dalpha(&self, x: [T; 3], t: T) -> T {
        self.ws.dalpha(x, t)
    }

    pub fn exp2salpha(&self, x: [T; 3], t: T) -> T {
        self.ws.weighted(self.s, T::zero(), x, t)
    }

    pub fn phi_hat_pow(&self, t: T, m: T) -> T {
        self.ws.phi_hat_pow(t, m)
    }
}

/// `(c_low, c_high)`: extreme values of `φ̂/φ` over grid nodes and interior times.
pub fn check_weight_equivalence<T: Real>(ws: &WeightSet<T>) -> Result<(T, T)> {
    let geom = ws.eta.geom();
    let le = ws.lambda_eta_on(Stagger::node(geom.dim));
    let (mut lo, mut hi) = (T::infinity(), T::zero());
    for k in 1..ws.time.steps {
        let tf = ws.time_factor_at(k);
        for &l in &le {
            let r = tf.phi_hat / (l.exp() * tf.phi_hat);
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    if !(lo > T::zero()) || !hi.is_finite() {
        return Err(LabError::NonFinite("weight equivalence constants".into()));
    }
    Ok((lo, hi))
}

/// `max |∂ₜα|/φ²` over grid nodes and all time nodes, from the closed form
/// `8|ℓ'|ℓ⁷(e^{2λ‖η‖} − e^{λη})e^{−2λη}`.
pub fn check_dalpha_bound<T: Real>(ws: &WeightSet<T>) -> Result<T> {
    let geom = ws.eta.geom();
    let le = ws.lambda_eta_on(Stagger::node(geom.dim));
    let eight = lit::<T>(ELL_POWER as f64);
    let mut c = T::zero();
    for &(ell, dell) in &ws.ell_samples {
        let tpart = eight * dell.abs() * ell.powi(ELL_POWER - 1);
        for &l in &le {
            let v = tpart * (ws.ceiling - l.exp()) * (-lit::<T>(2.0) * l).exp();
            c = c.max(v);
        }
    }
    if !c.is_finite() {
        return Err(LabError::NonFinite("dalpha bound".into()));
    }
    Ok(c)
}

/// Builds η with its certificate and wraps it with ℓ and λ.
pub fn build_weight_set<T: Real>(
    grid: &Grid<T>,
    method: EtaMethod,
    lambda: T,
    peak: Option<T>,
) -> Result<(WeightSet<T>, WeightCertificate)> {
    let (eta, cert) = build_eta(grid, method)?;
    let horizon = grid.time.horizon;
    let ell = match peak {
        Some(p) => Ell::new(horizon, p)?,
        None => Ell::standard(horizon)?,
    };
    Ok((WeightSet::new(eta, lambda, ell, grid.time)?, cert))
}

/// `φ₀ = e^{λψ}` with `ψ = c₀ + profile`.
#[derive(Clone, Debug)]
pub struct StationaryWeight<T> {
    pub c0: T,
    pub lambda: T,
    profile: EtaProfile<T>,
    pub certificate: WeightCertificate,
}

impl<T: Real> StationaryWeight<T> {
    pub fn psi(&self, x: [T; 3]) -> T {
        self.c0 + self.profile.value(x)
    }

    pub fn grad_psi(&self, x: [T; 3]) -> [T; 3] {
        self.profile.gradient(x)
    }

    pub fn phi0(&self, x: [T; 3]) -> T {
        (self.lambda * self.psi(x)).exp()
    }

    pub fn max_phi0(&self) -> T {
        (self.lambda * (self.c0 + self.profile.max_value())).exp()
    }

    /// ψ at the nodes (boundary value `c₀`).
    pub fn psi_field(&self) -> crate::grid::Field<T> {
        let mut f = self.profile.node_field().with_bc(crate::grid::Boundary::Free);
        f.comps[0].data.iter_mut().for_each(|v| *v = *v + self.c0);
        f
    }

    pub fn profile(&self) -> &EtaProfile<T> {
        &self.profile
    }
}

/// Builds ψ, certifying that its critical points lie in ω.
pub fn build_psi_phi0<T: Real>(grid: &Grid<T>, c0: T, lambda: T, method: EtaMethod) -> Result<StationaryWeight<T>> {
    if !c0.is_finite() || !(lambda >= T::zero()) || !lambda.is_finite() {
        return Err(LabError::contract("c0 must be finite and lambda non-negative"));
    }
    let omega = grid.omega().ok_or_else(|| LabError::contract("omega must be set before building psi"))?;
    let profile = eta::build_profile(grid.geom, method)?;
    let certificate = certify(&profile, method, omega, "omega")?;
    Ok(StationaryWeight { c0, lambda, profile, certificate })
}

/// Summary written next to weight snapshots.
#[derive(Clone, Debug, Serialize)]
pub struct WeightSummary {
    pub lambda: f64,
    pub eta_max: f64,
    pub c_low: f64,
    pub c_high: f64,
    pub dalpha_bound: f64,
    pub ell_peak: f64,
}

pub fn summarize<T: Real>(ws: &WeightSet<T>) -> Result<WeightSummary> {
    let (c_low, c_high) = check_weight_equivalence(ws)?;
    Ok(WeightSummary {
        lambda: to_f64(ws.lambda),
        eta_max: to_f64(ws.eta_max()),
        c_low: to_f64(c_low),
        c_high: to_f64(c_high),
        dalpha_bound: to_f64(check_dalpha_bound(ws)?),
        ell_peak: to_f64(ws.ell.peak()),
    })
}
