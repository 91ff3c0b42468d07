use serde::Serialize;

use crate::error::{LabError, Result};
use crate::grid::{BoxRegion, Boundary, Component, Field, Geometry, Grid, Stagger};
use crate::operators::stencil::{central_diff, laplacian_into, Ghost};
use crate::operators::{conjugate_gradient, SolverConfig};
use crate::scalar::{count, lit, to_f64, Real};

/// Construction used for η (and for ψ − c₀).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EtaMethod {
    /// Product of `sin(π x_a / L_a)`.
    Analytic,
    /// Discrete solution of `−Δη = 1`, `η = 0` on the boundary.
    Poisson,
}

impl EtaMethod {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(EtaMethod::Analytic),
            "poisson" => Ok(EtaMethod::Poisson),
            other => Err(LabError::contract(format!("unknown weight construction '{other}'"))),
        }
    }
}

#[derive(Clone, Debug)]
enum Kind<T> {
    Sine,
    Sampled { values: Component<T>, grad: Vec<Component<T>> },
    Zero,
}

/// Spatial profile vanishing on the boundary, evaluable anywhere in the closed domain.
#[derive(Clone, Debug)]
pub struct EtaProfile<T> {
    geom: Geometry<T>,
    kind: Kind<T>,
    max: T,
}

fn node_stagger(dim: usize) -> Stagger {
    Stagger::node(dim)
}

impl<T: Real> EtaProfile<T> {
    pub fn analytic(geom: Geometry<T>) -> Self {
        let mut p = EtaProfile { geom, kind: Kind::Sine, max: T::zero() };
        let nodes = Component::from_fn(&geom, node_stagger(geom.dim), |x| p.value(x));
        p.max = nodes.max_abs();
        p
    }

    /// Solves the node-centred Poisson problem with conjugate gradients.
    pub fn poisson(geom: Geometry<T>, config: SolverConfig) -> Result<Self> {
        let stagger = node_stagger(geom.dim);
        let template = Component::zeros(&geom, stagger);
        let rhs: Vec<T> = (0..template.data.len())
            .map(|f| if template.on_boundary(&geom, f) { T::zero() } else { T::one() })
            .collect();
        let mut x = vec![T::zero(); rhs.len()];
        let apply = |src: &[T], out: &mut [T]| {
            laplacian_into(&template, &geom, Boundary::Dirichlet, src, out);
            out.iter_mut().for_each(|v| *v = -*v);
        };
        conjugate_gradient(apply, &rhs, &mut x, config, false)?;
        let mut values = template.clone();
        values.data = x;
        Ok(Self::sampled(geom, values))
    }

    /// Profile from node samples; gradients by second-order differences.
    pub fn sampled(geom: Geometry<T>, values: Component<T>) -> Self {
        let grad = (0..geom.dim).map(|a| central_diff(&values, &geom, a, Ghost::Extrapolate)).collect();
        let max = values.max_abs();
        EtaProfile { geom, kind: Kind::Sampled { values, grad }, max }
    }

    /// `η ≡ 0`, a degenerate probe.
    pub fn zero(geom: Geometry<T>) -> Self {
        EtaProfile { geom, kind: Kind::Zero, max: T::zero() }
    }

    pub fn geom(&self) -> &Geometry<T> {
        &self.geom
    }

    /// `max η` over the grid nodes, i.e. the discrete `‖η‖_{C(Ω̄)}`.
    pub fn max_value(&self) -> T {
        self.max
    }

    pub fn value(&self, x: [T; 3]) -> T {
        match &self.kind {
            Kind::Sine => {
                let pi = T::PI();
                (0..self.geom.dim).fold(T::one(), |p, a| p * (pi * x[a] / self.geom.extent[a]).sin())
            }
            Kind::Sampled { values, .. } => interpolate(values, &self.geom, x),
            Kind::Zero => T::zero(),
        }
    }

    pub fn gradient(&self, x: [T; 3]) -> [T; 3] {
        let mut g = [T::zero(); 3];
        match &self.kind {
            Kind::Sine => {
                let pi = T::PI();
                let dim = self.geom.dim;
                let arg = |a: usize| pi * x[a] / self.geom.extent[a];
                for (a, ga) in g.iter_mut().enumerate().take(dim) {
                    let mut p = pi / self.geom.extent[a] * arg(a).cos();
                    for b in (0..dim).filter(|&b| b != a) {
                        p = p * arg(b).sin();
                    }
                    *ga = p;
                }
            }
            Kind::Sampled { grad, .. } => {
                for (a, c) in grad.iter().enumerate() {
                    g[a] = interpolate(c, &self.geom, x);
                }
            }
            Kind::Zero => {}
        }
        g
    }

    /// Node samples as a Dirichlet scalar field.
    pub fn node_field(&self) -> Field<T> {
        let stagger = node_stagger(self.geom.dim);
        match &self.kind {
            Kind::Sampled { values, .. } => Field { geom: self.geom, comps: vec![values.clone()], bc: Boundary::Dirichlet },
            _ => Field::scalar_from_fn(self.geom, stagger, Boundary::Dirichlet, |x| self.value(x)),
        }
    }

    /// Gradient at the nodes, one component per axis.
    pub fn gradient_field(&self) -> Field<T> {
        let stagger = node_stagger(self.geom.dim);
        let comps = match &self.kind {
            Kind::Sampled { grad, .. } => grad.clone(),
            _ => (0..self.geom.dim).map(|a| Component::from_fn(&self.geom, stagger, |x| self.gradient(x)[a])).collect(),
        };
        Field { geom: self.geom, comps, bc: Boundary::Free }
    }
}

/// Multilinear interpolation of node samples.
fn interpolate<T: Real>(c: &Component<T>, geom: &Geometry<T>, x: [T; 3]) -> T {
    let dim = geom.dim;
    let mut base = [0usize; 3];
    let mut frac = [T::zero(); 3];
    for a in 0..dim {
        let u = (x[a] / geom.spacing[a]).max(T::zero());
        let n = geom.cells[a];
        let i = u.floor().to_usize().unwrap_or(0).min(n - 1);
        base[a] = i;
        frac[a] = (u - count::<T>(i)).min(T::one());
    }
    let mut acc = T::zero();
    for corner in 0..(1usize << dim) {
        let mut w = T::one();
        let mut idx = base;
        for a in 0..dim {
            if corner >> a & 1 == 1 {
                idx[a] += 1;
                w = w * frac[a];
            } else {
                w = w * (T::one() - frac[a]);
            }
        }
        if w != T::zero() {
            acc = acc + w * c.data[c.index(idx)];
        }
    }
    acc
}

/// Node-by-node record of the weight clauses.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeightCertificate {
    pub method: EtaMethod,
    /// Name of the box that must hold every critical point.
    pub region: &'static str,
    pub critical_points: Vec<[f64; 3]>,
    /// `min |∇η|` over nodes outside the region, corners excluded.
    pub min_gradient_outside: f64,
    pub max_value: f64,
    pub min_interior_value: f64,
    pub max_boundary_value: f64,
    pub corners_excluded: usize,
    /// A node is flagged when `|∇η| < factor·h·‖∇²η‖_F` at that node.
    pub gradient_floor_factor: f64,
}

/// Critical-point detection constant.
pub const GRADIENT_FLOOR_FACTOR: f64 = 0.5;

/// Checks positivity, the boundary value, and that all discrete critical
/// points lie in `region`.
pub fn certify<T: Real>(
    profile: &EtaProfile<T>,
    method: EtaMethod,
    region: &BoxRegion<T>,
    region_name: &'static str,
) -> Result<WeightCertificate> {
    let geom = profile.geom;
    let dim = geom.dim;
    let eta = profile.node_field();
    let grad = profile.gradient_field();
    let nodes = &eta.comps[0];
    let hessian: Vec<Vec<Component<T>>> = grad
        .comps
        .iter()
        .map(|g| (0..dim).map(|b| central_diff(g, &geom, b, Ghost::Extrapolate)).collect())
        .collect();
    let h = geom.max_spacing();
    let floor_factor = lit::<T>(GRADIENT_FLOOR_FACTOR) * h;
    let mut cert = WeightCertificate {
        method,
        region: region_name,
        critical_points: Vec::new(),
        min_gradient_outside: f64::INFINITY,
        max_value: to_f64(profile.max),
        min_interior_value: f64::INFINITY,
        max_boundary_value: 0.0,
        corners_excluded: 0,
        gradient_floor_factor: GRADIENT_FLOOR_FACTOR,
    };
    let mut outside = Vec::new();
    for flat in 0..nodes.data.len() {
        let x = nodes.position(&geom, flat);
        let value = to_f64(nodes.data[flat]);
        if nodes.on_boundary(&geom, flat) {
            cert.max_boundary_value = cert.max_boundary_value.max(value.abs());
        } else {
            cert.min_interior_value = cert.min_interior_value.min(value);
        }
        if nodes.on_corner(&geom, flat) {
            cert.corners_excluded += 1;
            continue;
        }
        let g2 = (0..dim).fold(T::zero(), |s, a| s + grad.comps[a].data[flat].powi(2));
        let h2 = hessian.iter().flatten().fold(T::zero(), |s, c| s + c.data[flat].powi(2));
        let gnorm = g2.sqrt();
        let inside = region.contains(&x, dim);
        if gnorm < floor_factor * h2.sqrt() || gnorm == T::zero() {
            let p = [to_f64(x[0]), to_f64(x[1]), to_f64(x[2])];
            cert.critical_points.push(p);
            if !inside {
                outside.push(p);
            }
        }
        if !inside {
            cert.min_gradient_outside = cert.min_gradient_outside.min(to_f64(gnorm));
        }
    }
    if let Some(p) = outside.first() {
        return Err(LabError::Certificate(format!(
            "critical point at node ({:.4}, {:.4}, {:.4}) lies outside {region_name} ({} such nodes)",
            p[0],
            p[1],
            p[2],
            outside.len()
        )));
    }
    if !(cert.min_interior_value > 0.0) {
        return Err(LabError::Certificate("profile is not positive at every interior node".into()));
    }
    let rounding = 64.0 * to_f64(T::epsilon());
    if cert.max_boundary_value > rounding * cert.max_value.max(f64::MIN_POSITIVE) {
        return Err(LabError::Certificate("profile does not vanish on the boundary".into()));
    }
    Ok(cert)
}

pub(crate) fn build_profile<T: Real>(geom: Geometry<T>, method: EtaMethod) -> Result<EtaProfile<T>> {
    match method {
        EtaMethod::Analytic => Ok(EtaProfile::analytic(geom)),
        EtaMethod::Poisson => EtaProfile::poisson(geom, SolverConfig::default()),
    }
}

/// Builds η and certifies that its critical points lie in ω₀.
pub fn build_eta<T: Real>(grid: &Grid<T>, method: EtaMethod) -> Result<(EtaProfile<T>, WeightCertificate)> {
    let omega0 = grid.omega0().ok_or_else(|| LabError::contract("omega0 must be set before building eta"))?;
    let profile = build_profile(grid.geom, method)?;
    let cert = certify(&profile, method, omega0, "omega0")?;
    Ok((profile, cert))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, build_subdomains, DomainSpec};

    fn grid(n: usize, lo0: f64, hi0: f64) -> Result<Grid<f64>> {
        let g = build_grid(&DomainSpec::unit_square(n, 1.0, 16))?;
        build_subdomains(&g, BoxRegion::cube(2, 0.05, 0.95)?, BoxRegion::cube(2, lo0, hi0)?)
    }

    #[test]
    fn analytic_critical_set_is_center() {
        let g = grid(32, 0.3, 0.7).unwrap();
        let (eta, cert) = build_eta(&g, EtaMethod::Analytic).unwrap();
        assert_eq!(cert.critical_points, vec![[0.5, 0.5, 0.0]]);
        assert!(cert.min_gradient_outside > 0.0);
        assert_eq!(cert.corners_excluded, 4);
        assert!((eta.max_value() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dense_sampling_oracle_finds_one_stationary_point() {
        // independent check: on a fine lattice, every sample whose gradient is
        // below the Lipschitz resolution sits next to the centre
        let geom = Geometry::new(&[1.0, 1.0], &[8, 8]).unwrap();
        let eta = EtaProfile::analytic(geom);
        let pi = std::f64::consts::PI;
        let n = 401;
        let step = 1.0 / (n - 1) as f64;
        let mut hits = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let x = [i as f64 * step, j as f64 * step, 0.0];
                let g = eta.gradient(x);
                let exact = [pi * (pi * x[0]).cos() * (pi * x[1]).sin(), pi * (pi * x[0]).sin() * (pi * x[1]).cos()];
                assert!((g[0] - exact[0]).abs() < 1e-12 && (g[1] - exact[1]).abs() < 1e-12);
                let near_corner = i.min(n - 1 - i) <= 1 && j.min(n - 1 - j) <= 1;
                if !near_corner && g[0].hypot(g[1]) < pi * pi * step {
                    hits.push(x);
                }
            }
        }
        assert!(!hits.is_empty());
        for x in hits {
            assert!((x[0] - 0.5).abs() <= 2.0 * step && (x[1] - 0.5).abs() <= 2.0 * step, "{x:?}");
        }
    }

    #[test]
    fn off_centre_omega0_fails() {
        let g = grid(32, 0.1, 0.2).unwrap();
        let err = build_eta(&g, EtaMethod::Analytic).unwrap_err();
        assert!(err.to_string().contains("outside omega0"), "{err}");
    }

    #[test]
    fn poisson_symmetric_single_critical_point() {
        let g = grid(32, 0.3, 0.7).unwrap();
        let (eta, cert) = build_eta(&g, EtaMethod::Poisson).unwrap();
        assert_eq!(cert.critical_points.len(), 1);
        let p = cert.critical_points[0];
        assert!((p[0] - 0.5).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12);
        // discrete argmax oracle
        let nodes = eta.node_field();
        let c = &nodes.comps[0];
        let (arg, _) = c.data.iter().enumerate().fold((0, f64::MIN), |m, (i, &v)| if v > m.1 { (i, v) } else { m });
        let x = c.position(&g.geom, arg);
        assert!((x[0] - 0.5).abs() < 1e-12 && (x[1] - 0.5).abs() < 1e-12);
        // continuum max of -Δη = 1 on the unit square is about 0.07367
        assert!((eta.max_value() - 0.07367).abs() < 2e-3);
    }

    #[test]
    fn sampled_interpolation_reproduces_nodes() {
        let geom = Geometry::new(&[1.0f64, 2.0], &[8, 8]).unwrap();
        let a = EtaProfile::analytic(geom);
        let s = EtaProfile::sampled(geom, a.node_field().comps[0].clone());
        let x = [0.375, 0.75, 0.0];
        assert!((a.value(x) - s.value(x)).abs() < 1e-14);
        let mid = [0.4, 1.1, 0.0];
        assert!((a.value(mid) - s.value(mid)).abs() < 0.05);
    }

    #[test]
    fn sine_product_in_3d() {
        let geom = Geometry::new(&[1.0, 1.0, 1.0], &[8, 8, 8]).unwrap();
        let eta = EtaProfile::analytic(geom);
        let region = BoxRegion::cube(3, 0.3, 0.7).unwrap();
        let cert = certify(&eta, EtaMethod::Analytic, &region, "omega0").unwrap();
        assert_eq!(cert.critical_points, vec![[0.5, 0.5, 0.5]]);
    }
}
