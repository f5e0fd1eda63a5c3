//! Robin functions of circled sets in `C^2`, the two-variable Rumely
//! formula by grid quadrature, and the one-variable weighted identity
//! `delta^w = exp(-int Q dmu_eq) d^w` against closed-form equilibrium
//! measures.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::chebyshev::{tau_geometric_mean, ChebMode, LawsonOptions};
use crate::domain_models::{gauss_legendre_nodes, PointSet, WeightModel};
use crate::error::{invalid, Error, Result};
use crate::fekete::{diameter_series, DiameterKind, SearchParams};
use crate::par;

pub type RobinFn = Arc<dyn Fn(&[C64]) -> f64 + Send + Sync>;

/// Logarithmically homogeneous Robin functions `rho(t z) = rho(z) + log|t|`.
#[derive(Clone)]
pub enum RobinModel {
    /// Euclidean ball: `log(||z|| / radius)`.
    Ball { radius: f64 },
    /// Polydisk with equal radii: `max_k log(|z_k| / radius)`.
    Polydisk { radius: f64 },
    /// Product of disks: `max_k log(|z_k| / r_k)`.
    Product { radii: Vec<f64> },
    /// `l^p` ball: `(1/p) log(sum |z_k|^p)`.
    LpBall { p: f64 },
    Custom { label: String, rho: RobinFn },
}

impl std::fmt::Debug for RobinModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "RobinModel::{}", self.tag())
    }
}

impl RobinModel {
    pub fn tag(&self) -> &str {
        match self {
            RobinModel::Ball { .. } => "ball",
            RobinModel::Polydisk { .. } => "polydisk",
            RobinModel::Product { .. } => "product",
            RobinModel::LpBall { .. } => "lp-ball",
            RobinModel::Custom { label, .. } => label,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            RobinModel::Ball { radius } | RobinModel::Polydisk { radius } => radius.is_finite() && *radius > 0.0,
            RobinModel::Product { radii } => radii.len() == 2 && radii.iter().all(|r| r.is_finite() && *r > 0.0),
            RobinModel::LpBall { p } => p.is_finite() && *p >= 1.0,
            RobinModel::Custom { .. } => true,
        };
        if ok {
            Ok(())
        } else {
            invalid("Robin model parameters out of range")
        }
    }

    pub fn rho(&self, z: &[C64]) -> f64 {
        match self {
            RobinModel::Ball { radius } => 0.5 * z.iter().map(|v| v.norm_sqr()).sum::<f64>().ln() - radius.ln(),
            RobinModel::Polydisk { radius } => z.iter().map(|v| v.norm().ln()).fold(f64::NEG_INFINITY, f64::max) - radius.ln(),
            RobinModel::Product { radii } => z
                .iter()
                .zip(radii)
                .map(|(v, r)| (v.norm() / r).ln())
                .fold(f64::NEG_INFINITY, f64::max),
            RobinModel::LpBall { p } => {
                // factor out the largest modulus so |z|^p cannot overflow
                let m = z.iter().map(|v| v.norm()).fold(0.0, f64::max);
                if m == 0.0 {
                    return f64::NEG_INFINITY;
                }
                m.ln() + z.iter().map(|v| (v.norm() / m).powf(*p)).sum::<f64>().ln() / p
            }
            RobinModel::Custom { rho, .. } => rho(z),
        }
    }

    /// `rho(1, t)`
    pub fn slice(&self, t: C64) -> f64 {
        self.rho(&[C64::new(1.0, 0.0), t])
    }

    /// Moduli `|t|` where `rho(1, t)` has a radial kink.
    fn kinks(&self) -> Vec<f64> {
        match self {
            RobinModel::Polydisk { .. } => vec![1.0],
            RobinModel::Product { radii } => vec![radii[1] / radii[0]],
            _ => Vec::new(),
        }
    }

    fn radial(&self) -> bool {
        !matches!(self, RobinModel::Custom { .. })
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RumelyGrid {
    /// Grid covers `log|t|` in `[s_min, s_max]`; `None` picks the radius
    /// where the slice is within `1e-6` of its logarithmic asymptote.
    pub s_min: f64,
    pub s_max: Option<f64>,
    /// Nodes per unit of `log|t|`.
    pub density: usize,
    /// Angular nodes (ignored for radial models).
    pub n_phi: usize,
}

impl Default for RumelyGrid {
    fn default() -> Self {
        Self {
            s_min: -12.0,
            s_max: None,
            density: 200,
            n_phi: 64,
        }
    }
}

pub const ASYMPTOTE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct RumelyResult {
    pub model: String,
    pub diameter: f64,
    pub neg_log_d: f64,
    /// `int rho(1,t) dd^c rho(1,t)` after mass rescaling.
    pub integral: f64,
    /// `rho(0, 1) = -log d(H cap E)`.
    pub slice_term: f64,
    /// Discrete `dd^c` mass on the grid plus the analytic tails, before rescaling.
    pub mass: f64,
    pub s_max: f64,
    pub nodes: usize,
}

/// `-log d(E) = (1/2) int rho(1,t) dd^c rho(1,t) + (1/2) rho(0,1)`.
///
/// In `s = log|t|, phi` the measure `dd^c u = (1/2pi) (u_ss + u_phiphi) ds dphi`
/// needs no Jacobian; the 5-point stencil is applied there with kink radii
/// placed on grid nodes. Beyond the grid `rho(1,t) = s + rho(0,1) + O(e^{-2s})`
/// and the missing mass `M` contributes `M (rho + 1/2)`; inside, `rho` is
/// flat and the missing mass contributes `M rho`.
pub fn rumely_diameter_2d(model: &RobinModel, grid: &RumelyGrid) -> Result<RumelyResult> {
    model.validate()?;
    if grid.density < 4 || grid.n_phi < 4 && !model.radial() {
        return invalid("grid too small");
    }
    let c_inf = model.rho(&[C64::new(0.0, 0.0), C64::new(1.0, 0.0)]);
    if !c_inf.is_finite() {
        return Err(Error::Degenerate("rho(0,1) is not finite".into()));
    }
    let asym = |s: f64| {
        let n = if model.radial() { 1 } else { grid.n_phi };
        (0..n)
            .map(|j| {
                let t = C64::from_polar(s.exp(), 2.0 * PI * j as f64 / n as f64);
                (model.slice(t) - s - c_inf).abs()
            })
            .fold(0.0, f64::max)
    };
    let s_max = match grid.s_max {
        Some(s) => {
            if asym(s) > ASYMPTOTE_TOL {
                return Err(Error::GridTooCoarse(format!(
                    "at |t| = e^{s} the slice is {:e} from its asymptote; enlarge the grid radius",
                    asym(s)
                )));
            }
            s
        }
        None => {
            let mut s = 1.0;
            while asym(s) > ASYMPTOTE_TOL {
                s += 1.0;
                if s > 200.0 {
                    return Err(Error::GridTooCoarse("slice never reaches its asymptote".into()));
                }
            }
            s
        }
    };
    let s_min = grid.s_min;
    if !(s_min < s_max) {
        return invalid("s_min must lie below s_max");
    }
    // shift the lattice so each kink log-radius is a node
    let h = 1.0 / grid.density as f64;
    let anchor = model.kinks().first().map_or(0.0, |r| r.ln());
    let k0 = ((s_min - anchor) / h).floor() as i64;
    let k1 = ((s_max - anchor) / h).ceil() as i64;
    let ns = (k1 - k0 + 1) as usize;
    let n_phi = if model.radial() { 1 } else { grid.n_phi };
    let hp = 2.0 * PI / n_phi as f64;
    let values: Vec<Vec<f64>> = par::map_range(n_phi, |j| {
        (0..ns + 2)
            .map(|i| {
                // one ghost node on each side for the stencil
                let s = anchor + (k0 + i as i64 - 1) as f64 * h;
                model.slice(C64::from_polar(s.exp(), j as f64 * hp))
            })
            .collect()
    });
    let mut integral = 0.0;
    let mut mass = 0.0;
    for j in 0..n_phi {
        let row = &values[j];
        let (prev, next) = (&values[(j + n_phi - 1) % n_phi], &values[(j + 1) % n_phi]);
        for i in 1..=ns {
            let mut lap = (row[i + 1] - 2.0 * row[i] + row[i - 1]) / (h * h);
            if n_phi > 1 {
                lap += (next[i] - 2.0 * row[i] + prev[i]) / (hp * hp);
            }
            let w = if i == 1 || i == ns { 0.5 } else { 1.0 };
            let dm = lap * h * hp / (2.0 * PI) * w;
            mass += dm;
            integral += row[i] * dm;
        }
        // analytic tails from the one-sided boundary slopes
        let slope_out = (row[ns + 1] - row[ns - 1]) / (2.0 * h);
        let slope_in = (row[2] - row[0]) / (2.0 * h);
        let m_out = (1.0 - slope_out) * hp / (2.0 * PI);
        let m_in = slope_in * hp / (2.0 * PI);
        mass += m_out + m_in;
        integral += m_out * (row[ns] + 0.5) + m_in * row[1];
    }
    if (mass - 1.0).abs() > 0.01 {
        return Err(Error::GridTooCoarse(format!("dd^c mass {mass} drifts more than 1% from 1")));
    }
    let integral = integral / mass;
    let neg_log_d = 0.5 * integral + 0.5 * c_inf;
    Ok(RumelyResult {
        model: model.tag().to_string(),
        diameter: (-neg_log_d).exp(),
        neg_log_d,
        integral,
        slice_term: c_inf,
        mass,
        s_max,
        nodes: ns * n_phi,
    })
}

/// Closed-form weighted equilibrium measures on the line.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EquilibriumModel {
    /// `Q(x) = a x^2`: semicircle on `[-1/sqrt(a), 1/sqrt(a)]`.
    Semicircle { a: f64 },
    /// `Q = 0` on `[lo, hi]`: arcsine law.
    Arcsine { lo: f64, hi: f64 },
}

impl EquilibriumModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            EquilibriumModel::Semicircle { a } if a.is_finite() && *a > 0.0 => Ok(()),
            EquilibriumModel::Arcsine { lo, hi } if lo.is_finite() && hi.is_finite() && lo < hi => Ok(()),
            _ => invalid("equilibrium model parameters out of range"),
        }
    }

    pub fn support(&self) -> (f64, f64) {
        match self {
            EquilibriumModel::Semicircle { a } => (-1.0 / a.sqrt(), 1.0 / a.sqrt()),
            EquilibriumModel::Arcsine { lo, hi } => (*lo, *hi),
        }
    }

    /// The weight whose equilibrium measure this is.
    pub fn weight(&self) -> WeightModel {
        match self {
            EquilibriumModel::Semicircle { a } => WeightModel::power(*a, 2.0),
            EquilibriumModel::Arcsine { .. } => WeightModel::unit(),
        }
    }

    pub fn q(&self, x: f64) -> f64 {
        match self {
            EquilibriumModel::Semicircle { a } => a * x * x,
            EquilibriumModel::Arcsine { .. } => 0.0,
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x <= lo || x >= hi {
            return 0.0;
        }
        match self {
            EquilibriumModel::Semicircle { a } => {
                let r2 = 1.0 / a;
                2.0 / (PI * r2) * (r2 - x * x).sqrt()
            }
            EquilibriumModel::Arcsine { .. } => 1.0 / (PI * ((x - lo) * (hi - x)).sqrt()),
        }
    }

    /// `int f dmu_eq` with `x = c + h cos(theta)`, which removes the
    /// endpoint singularities of both families.
    pub fn integrate(&self, f: impl Fn(f64) -> f64, nodes: usize) -> Result<f64> {
        let (lo, hi) = self.support();
        let (c, h) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        let (th, wt) = gauss_legendre_nodes(0.0, PI, nodes)?;
        Ok(th
            .iter()
            .zip(&wt)
            .map(|(&t, &w)| {
                let jac = match self {
                    EquilibriumModel::Semicircle { .. } => 2.0 / PI * t.sin().powi(2),
                    EquilibriumModel::Arcsine { .. } => 1.0 / PI,
                };
                w * jac * f(c + h * t.cos())
            })
            .sum())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityCheck {
    /// Extrapolated weighted Fekete diameter.
    pub lhs: f64,
    pub rhs: f64,
    /// `int Q dmu_eq`
    pub q_integral: f64,
    /// Weighted Chebyshev geometric mean at `d_max`.
    pub d_w: f64,
    pub gap: f64,
    pub mass: f64,
}

pub const EQ_NODES: usize = 256;

/// `delta^w(E)` against `exp(-int Q dmu_eq^w) d^w(E)` for `E` an interval.
/// A unit weight skips the quadrature: `Q = 0` makes the factor exactly 1.
pub fn weighted_identity_check(
    mesh: &PointSet,
    w: &WeightModel,
    eq: Option<&EquilibriumModel>,
    d_max: u32,
    params: &SearchParams,
    opts: LawsonOptions,
) -> Result<IdentityCheck> {
    if mesh.dim() != 1 {
        return Err(Error::Unsupported("the weighted identity is checked for N = 1 only".into()));
    }
    let eq = eq.ok_or_else(|| Error::Unsupported("no closed-form equilibrium model for this weight".into()))?;
    eq.validate()?;
    let series = diameter_series(mesh, DiameterKind::Weighted, w, d_max, params)?;
    let tau = tau_geometric_mean(mesh, ChebMode::Weighted(w.clone()), d_max, opts)?;
    let (q_integral, mass) = if w.is_unit() {
        (0.0, 1.0)
    } else {
        let point = |x: f64| [C64::new(x, 0.0)];
        let qi = eq.integrate(|x| w.q(&point(x)), EQ_NODES)?;
        (qi, eq.integrate(|_| 1.0, EQ_NODES)?)
    };
    if (mass - 1.0).abs() > 1e-8 {
        return Err(Error::Degenerate(format!("equilibrium density has mass {mass}")));
    }
    let rhs = (-q_integral).exp() * tau.full;
    let lhs = series.extrapolated;
    Ok(IdentityCheck {
        lhs,
        rhs,
        q_integral,
        d_w: tau.full,
        gap: (lhs - rhs).abs() / rhs,
        mass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn models() -> Vec<RobinModel> {
        vec![
            RobinModel::Ball { radius: 1.0 },
            RobinModel::Polydisk { radius: 1.0 },
            RobinModel::Product { radii: vec![0.5, 2.0] },
            RobinModel::LpBall { p: 3.0 },
        ]
    }

    #[test]
    fn log_homogeneity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for m in models() {
            for _ in 0..50 {
                let z = [C64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)), C64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))];
                let t = C64::from_polar(rng.random_range(0.1..10.0), rng.random_range(0.0..6.0));
                let tz = [z[0] * t, z[1] * t];
                assert!((m.rho(&tz) - m.rho(&z) - t.norm().ln()).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn ball_and_polydisk() {
        let g = RumelyGrid::default();
        let b = rumely_diameter_2d(&RobinModel::Ball { radius: 1.0 }, &g).unwrap();
        assert!((b.diameter - (-0.25f64).exp()).abs() < 1e-4, "{b:?}");
        assert!((b.mass - 1.0).abs() < 1e-3);
        let p = rumely_diameter_2d(&RobinModel::Polydisk { radius: 1.0 }, &g).unwrap();
        assert!((p.diameter - 1.0).abs() < 1e-6, "{p:?}");
        let s = rumely_diameter_2d(&RobinModel::Ball { radius: 3.0 }, &g).unwrap();
        assert_relative_eq!(s.diameter, 3.0 * b.diameter, max_relative = 1e-6);
        let q = rumely_diameter_2d(&RobinModel::Product { radii: vec![0.5, 2.0] }, &g).unwrap();
        assert!((q.diameter - 1.0).abs() < 1e-6, "{q:?}");
    }

    #[test]
    fn custom_matches_builtin() {
        let rho: RobinFn = Arc::new(|z: &[C64]| 0.5 * (z[0].norm_sqr() + z[1].norm_sqr()).ln());
        let c = rumely_diameter_2d(&RobinModel::Custom { label: "euclid".into(), rho }, &RumelyGrid { density: 100, n_phi: 8, ..Default::default() }).unwrap();
        assert!((c.diameter - (-0.25f64).exp()).abs() < 1e-3, "{c:?}");
    }

    #[test]
    fn small_radius_is_too_coarse() {
        let g = RumelyGrid {
            s_max: Some(2.0),
            ..Default::default()
        };
        assert!(matches!(rumely_diameter_2d(&RobinModel::Ball { radius: 1.0 }, &g), Err(Error::GridTooCoarse(_))));
    }

    #[test]
    fn equilibrium_models() {
        let sc = EquilibriumModel::Semicircle { a: 0.5 };
        assert_relative_eq!(sc.integrate(|_| 1.0, 64).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(sc.integrate(|x| sc.q(x), 64).unwrap(), 0.25, epsilon = 1e-12);
        let (lo, hi) = sc.support();
        assert_relative_eq!(hi, 2f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(lo, -hi);
        let ar = EquilibriumModel::Arcsine { lo: -1.0, hi: 1.0 };
        assert_relative_eq!(ar.integrate(|x| x * x, 64).unwrap(), 0.5, epsilon = 1e-12);
        // density agrees with the transformed rule on a smooth test function
        let (x, w) = gauss_legendre_nodes(lo, hi, 4000).unwrap();
        let direct: f64 = x.iter().zip(&w).map(|(x, w)| w * sc.density(*x) * x.cos()).sum();
        assert_relative_eq!(direct, sc.integrate(f64::cos, 64).unwrap(), epsilon = 1e-5);
    }

    #[test]
    fn unit_weight_collapses() {
        let mesh = crate::domain_models::SetModel::Interval { a: -1.0, b: 1.0 }.mesh(201).unwrap();
        let eq = EquilibriumModel::Arcsine { lo: -1.0, hi: 1.0 };
        let r = weighted_identity_check(&mesh, &WeightModel::unit(), Some(&eq), 6, &SearchParams::default(), LawsonOptions { tol: 1e-6, ..Default::default() }).unwrap();
        assert_eq!(r.q_integral, 0.0);
        assert_eq!(r.rhs, r.d_w);
        assert!(weighted_identity_check(&mesh, &WeightModel::unit(), None, 3, &SearchParams::default(), LawsonOptions::default()).is_err());
    }
}
