//! `Z_d` on unbounded real cones with `dmu = |R(x)| dx` and a weight of
//! certified growth `Q(x) >= c |x|^gamma`, computed on `Gamma cap B_T`.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::discrete_ortho::GradedArnoldi;
use crate::domain_models::{gauss_legendre_nodes, truncate_cone, Cone, DensityPolynomial, MeasureModel, PointSet, WeightModel};
use crate::error::{invalid, Error, Result};
use crate::graded_basis::enumerate_basis;
use crate::logvalue::ln_factorial;
use crate::orthopoly::{z_d_product, ZdMethod};
use crate::par;

/// Gauss-Legendre nodes per panel.
const PANEL: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConeProblem {
    pub cone: Cone,
    pub density: DensityPolynomial,
    pub weight: WeightModel,
    /// Fixed truncation radius; `None` derives it per degree.
    pub t: Option<f64>,
}

impl ConeProblem {
    pub fn validate(&self) -> Result<()> {
        let n = self.cone.dim();
        if n > 2 {
            return Err(Error::Unsupported("cones are supported in dimension 1 and 2 only".into()));
        }
        if self.density.terms.is_empty() || self.density.terms.iter().any(|(c, a)| a.len() != n || !c.is_finite()) {
            return invalid("density polynomial must be non-empty and match the cone dimension");
        }
        self.weight.validate()?;
        if self.weight.growth.is_none() {
            return Err(Error::Unsupported("cone problems need a growth certificate (c, gamma)".into()));
        }
        if let Some(t) = self.t {
            if !(t > 0.0 && t.is_finite()) {
                return invalid("truncation radius must be positive");
            }
        }
        Ok(())
    }

    pub fn truncation(&self, d: u32, tol: f64) -> Result<f64> {
        match self.t {
            Some(t) => Ok(t),
            None => Ok(truncate_cone(&self.cone, &self.weight, &self.density, d, tol)?.max(1e-3)),
        }
    }
}

/// Sign changes of `R` on `[0, t]` (1D), located by sampling and bisection.
fn sign_changes(r: &DensityPolynomial, t: f64) -> Vec<f64> {
    let n = 4096;
    let f = |x: f64| r.eval(&[x]);
    let mut out = Vec::new();
    let mut prev = f(0.0);
    for k in 1..=n {
        let x = t * k as f64 / n as f64;
        let v = f(x);
        if prev != 0.0 && v != 0.0 && (prev < 0.0) != (v < 0.0) {
            let (mut a, mut b) = (t * (k - 1) as f64 / n as f64, x);
            for _ in 0..100 {
                let m = 0.5 * (a + b);
                if (f(m) < 0.0) == (f(a) < 0.0) {
                    a = m;
                } else {
                    b = m;
                }
            }
            out.push(0.5 * (a + b));
        }
        if v != 0.0 {
            prev = v;
        }
    }
    out
}

fn panels(lo: f64, hi: f64, count: usize, breaks: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut edges: Vec<f64> = (0..=count).map(|k| lo + (hi - lo) * k as f64 / count as f64).collect();
    edges.extend(breaks.iter().copied().filter(|&b| b > lo && b < hi));
    edges.sort_by(f64::total_cmp);
    edges.dedup_by(|a, b| (*a - *b).abs() < 1e-14 * hi.abs().max(1.0));
    let mut xs = Vec::new();
    let mut ws = Vec::new();
    for e in edges.windows(2) {
        let (x, w) = gauss_legendre_nodes(e[0], e[1], PANEL)?;
        xs.extend(x);
        ws.extend(w);
    }
    Ok((xs, ws))
}

/// Quadrature for `|R(x)| dx` on `Gamma cap B_t` with at least
/// `nodes_per_axis` nodes per axis (Gauss-Legendre panels; sign changes of
/// `R` become panel edges in 1D, polar coordinates in 2D).
pub fn cone_quadrature(cone: &Cone, r: &DensityPolynomial, t: f64, nodes_per_axis: usize) -> Result<MeasureModel> {
    let count = nodes_per_axis.div_ceil(PANEL).max(1);
    match cone.dim() {
        1 => {
            let (x, w) = panels(0.0, t, count, &sign_changes(r, t))?;
            let weights = x.iter().zip(&w).map(|(&x, &w)| w * r.eval(&[x]).abs()).collect();
            MeasureModel::quadrature(PointSet::real_line(&x)?, weights)
        }
        2 => {
            let angle = match cone {
                Cone::Sector { angle } => *angle,
                Cone::Orthant { .. } => 0.5 * PI,
                Cone::HalfLine => unreachable!("half-line is one-dimensional"),
            };
            let (rs, rw) = panels(0.0, t, count, &[])?;
            let (ph, pw) = panels(0.0, angle, count, &[])?;
            let mut coords = Vec::with_capacity(2 * rs.len() * ph.len());
            let mut weights = Vec::with_capacity(rs.len() * ph.len());
            for (&rad, &wr) in rs.iter().zip(&rw) {
                for (&p, &wp) in ph.iter().zip(&pw) {
                    let x = [rad * p.cos(), rad * p.sin()];
                    coords.push(C64::new(x[0], 0.0));
                    coords.push(C64::new(x[1], 0.0));
                    weights.push(wr * wp * rad * r.eval(&x).abs());
                }
            }
            MeasureModel::quadrature(PointSet::new(2, coords)?, weights)
        }
        _ => Err(Error::Unsupported("cones are supported in dimension 1 and 2 only".into())),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConeRow {
    pub d: u32,
    pub t: f64,
    pub log_zd: f64,
    /// `Z_d^{1/(2 l_d)}`
    pub root: f64,
    pub log_zd_2t: f64,
    /// `|log Z_d(T) - log Z_d(2T)|`
    pub change: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConeSeries {
    pub rows: Vec<ConeRow>,
    pub truncation_tol: f64,
    pub stability_tol: f64,
}

pub fn cone_zd_at(problem: &ConeProblem, d: u32, t: f64, nodes_per_axis: usize) -> Result<f64> {
    let mu = cone_quadrature(&problem.cone, &problem.density, t, nodes_per_axis.max(4 * d as usize))?;
    let z = z_d_product(&mu, &problem.weight, d, ZdMethod::Stieltjes)?;
    if z.zd.is_zero() {
        return Err(Error::Degenerate(format!("Z_{d} vanished on the truncated cone")));
    }
    Ok(z.zd.log_magnitude)
}

/// Per-degree `Z_d`, `1 <= d <= d_max`, on `Gamma cap B_T` with the same computation repeated at
/// `2T`; a change above `stability_tol` is an error.
pub fn cone_zd_series(problem: &ConeProblem, d_max: u32, nodes_per_axis: usize, truncation_tol: f64, stability_tol: f64) -> Result<ConeSeries> {
    problem.validate()?;
    let n = problem.cone.dim();
    if d_max == 0 {
        return invalid("d_max must be at least 1: Z_0 is the (infinite) mass of the cone");
    }
    let rows = par::try_map_range(d_max as usize, |d| {
        let d = d as u32 + 1;
        let t = problem.truncation(d, truncation_tol)?;
        let (a, b) = (cone_zd_at(problem, d, t, nodes_per_axis)?, cone_zd_at(problem, d, 2.0 * t, nodes_per_axis)?);
        let change = (a - b).abs();
        if !(change <= stability_tol) {
            return Err(Error::TruncationInsufficient { change, tol: stability_tol });
        }
        let l = crate::graded_basis::degree_sum(n, d)? as f64;
        Ok(ConeRow {
            d,
            t,
            log_zd: a,
            root: if l > 0.0 { (a / (2.0 * l)).exp() } else { a.exp() },
            log_zd_2t: b,
            change,
        })
    })?;
    Ok(ConeSeries {
        rows,
        truncation_tol,
        stability_tol,
    })
}

/// `log Z_d` for `Gamma = [0, inf)`, `R = x^alpha`, `Q = lambda/2`: scaled
/// monic Laguerre norms give
/// `Z_d = (d+1)! prod_{j<=d} d^{-2j-alpha-1} j! Gamma(j+alpha+1)`.
pub fn laguerre_log_zd(alpha: f64, d: u32) -> f64 {
    assert!(d >= 1, "Z_0 diverges on the half-line");
    let dd = d as f64;
    ln_factorial(d as u64 + 1)
        + (0..=d)
            .map(|j| {
                let j = j as f64;
                -(2.0 * j + alpha + 1.0) * dd.ln() + ln_gamma(j + 1.0) + ln_gamma(j + alpha + 1.0)
            })
            .sum::<f64>()
}

#[derive(Debug, Clone, Serialize)]
pub struct Localization {
    pub d: u32,
    pub t: f64,
    pub samples: usize,
    /// Largest `|x_max| / T` over the sampled weighted polynomials.
    pub max_radius_fraction: f64,
    /// Samples whose maximizer fell in the outer shell `|x| > (1 - shell) T`.
    pub in_shell: usize,
    pub shell: f64,
}

/// Random weighted polynomials `w^d p`, `p` from the orthonormal family of
/// `L^2(w^{2d} mu)`, maximized over the quadrature nodes of `Gamma cap B_T`.
pub fn localization_probe(problem: &ConeProblem, d: u32, t: f64, nodes_per_axis: usize, samples: usize, seed: u64, shell: f64) -> Result<Localization> {
    problem.validate()?;
    let mu = cone_quadrature(&problem.cone, &problem.density, t, nodes_per_axis.max(4 * d as usize))?;
    let (nodes, masses) = mu.finite()?;
    let basis = enumerate_basis(problem.cone.dim(), d)?;
    let logw: Vec<f64> = nodes
        .iter()
        .zip(masses)
        .map(|(p, &m)| if m > 0.0 { 0.5 * m.ln() - d as f64 * problem.weight.q(p) } else { f64::NEG_INFINITY })
        .collect();
    let arn = GradedArnoldi::new(nodes, &basis, basis.len(), &logw)?;
    let vals: Vec<Vec<C64>> = nodes.iter().map(|p| arn.eval(p)).collect();
    let wd: Vec<f64> = nodes.iter().map(|p| (-(d as f64) * problem.weight.q(p)).exp()).collect();
    let radius: Vec<f64> = nodes.iter().map(|p| p.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut in_shell = 0;
    for _ in 0..samples {
        let c: Vec<f64> = (0..basis.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (arg, _) = vals
            .iter()
            .zip(&wd)
            .enumerate()
            .map(|(i, (q, w))| (i, q.iter().zip(&c).map(|(a, b)| a * b).sum::<C64>().norm() * w))
            .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
        let frac = radius[arg] / t;
        worst = worst.max(frac);
        if frac > 1.0 - shell {
            in_shell += 1;
        }
    }
    Ok(Localization {
        d,
        t,
        samples,
        max_radius_fraction: worst,
        in_shell,
        shell,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn laguerre(alpha: u32) -> ConeProblem {
        ConeProblem {
            cone: Cone::HalfLine,
            density: DensityPolynomial::monomial(1.0, vec![alpha]),
            weight: WeightModel::power(0.5, 1.0).with_growth(0.5, 1.0),
            t: None,
        }
    }

    #[test]
    fn laguerre_closed_form() {
        for alpha in [0u32, 1, 2] {
            let p = laguerre(alpha);
            let s = cone_zd_series(&p, 5, 256, 1e-12, 1e-6).unwrap();
            for row in &s.rows {
                let exact = laguerre_log_zd(alpha as f64, row.d);
                assert!((row.log_zd - exact).abs() < 1e-8 * exact.abs().max(1.0), "d={} {} vs {exact}", row.d, row.log_zd);
            }
        }
    }

    #[test]
    fn laguerre_d1_by_hand() {
        // d = 1, alpha = 0: weight e^{-x}; norms 1 and 1, Z_1 = 2! * 1 * 1 = 2
        assert_relative_eq!(laguerre_log_zd(0.0, 1), 2f64.ln(), epsilon = 1e-14);
    }

    #[test]
    fn short_truncation_is_rejected() {
        let mut p = laguerre(0);
        p.t = Some(2.0);
        assert!(matches!(cone_zd_series(&p, 4, 128, 1e-9, 1e-6), Err(Error::TruncationInsufficient { .. })));
    }

    #[test]
    fn missing_growth_is_unsupported() {
        let mut p = laguerre(0);
        p.weight.growth = None;
        assert!(matches!(cone_zd_series(&p, 2, 64, 1e-9, 1e-6), Err(Error::Unsupported(_))));
    }

    #[test]
    fn sign_changes_become_edges() {
        // R = x - 1 changes sign at 1
        let r = DensityPolynomial {
            terms: vec![(1.0, vec![1]), (-1.0, vec![0])],
        };
        let mu = cone_quadrature(&Cone::HalfLine, &r, 3.0, 32).unwrap();
        // int_0^3 |x - 1| dx = 1/2 + 2 = 5/2
        assert_relative_eq!(mu.total_mass(), 2.5, epsilon = 1e-13);
    }

    #[test]
    fn quarter_plane_quadrature() {
        let r = DensityPolynomial::one(2);
        let mu = cone_quadrature(&Cone::Orthant { dim: 2 }, &r, 2.0, 32).unwrap();
        assert_relative_eq!(mu.total_mass(), PI, epsilon = 1e-12);
        let p = ConeProblem {
            cone: Cone::Orthant { dim: 2 },
            density: r,
            weight: WeightModel::power(1.0, 2.0).with_growth(1.0, 2.0),
            t: None,
        };
        let s = cone_zd_series(&p, 2, 64, 1e-10, 1e-6).unwrap();
        assert!(s.rows.iter().all(|r| r.log_zd.is_finite()));
    }

    #[test]
    fn maxima_stay_inside() {
        let p = laguerre(1);
        let t = p.truncation(6, 1e-9).unwrap();
        let loc = localization_probe(&p, 6, t, 128, 200, 3, 0.05).unwrap();
        assert_eq!(loc.in_shell, 0, "{loc:?}");
    }
}
