//! Gram matrices and orthonormal polynomials for the varying weights
//! `w^{2d} dmu`, the product formula `Z_d = m_d! prod ||q_j||^2`, its
//! homogeneous version on the circled lift, and Christoffel functions.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::discrete_ortho::GradedArnoldi;
use crate::domain_models::{lift_points, MeasureModel, PointSet, WeightModel};
use crate::error::{invalid, Error, Result};
use crate::graded_basis::{count_monomials, degree_sum, enumerate_basis, enumerate_basis_capped, GradedBasis, HomogeneousBasis};
use crate::linalg::{cholesky, hpd_condition, log_det, lower_inverse, mgs_qr, CMatrix};
use crate::logvalue::{ln_factorial, LogValue};
use crate::par;
use crate::vandermonde::eval_monomial;

/// Largest `m_d` for which a dense Gram matrix is assembled.
pub const GRAM_CAP: u64 = 4096;
/// Pivot threshold for the Cholesky factorization, relative to `G_jj`.
pub const PIVOT_TOL: f64 = 1e-13;
/// Above this condition number results carry the `ill-conditioned` flag.
pub const COND_FLAG: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct GramMatrix {
    pub degree: u32,
    pub basis: GradedBasis,
    pub entries: CMatrix,
    pub condition: f64,
}

impl GramMatrix {
    pub fn ill_conditioned(&self) -> bool {
        !(self.condition <= COND_FLAG)
    }
}

/// Nodes with positive mass and finite weight, with `log(mass w^{2d})`.
fn weighted_nodes(mu: &MeasureModel, w: &WeightModel, d: u32) -> Result<(PointSet, Vec<f64>)> {
    let (pts, masses) = mu.finite()?;
    if pts.dim() != mu.dim() {
        return invalid("measure dimension mismatch");
    }
    let mut keep = Vec::new();
    let mut logm = Vec::new();
    for (i, (p, &m)) in pts.iter().zip(masses).enumerate() {
        if m <= 0.0 {
            continue;
        }
        let q = if d == 0 { 0.0 } else { w.q(p) };
        if q == f64::INFINITY {
            continue;
        }
        keep.push(i);
        logm.push(m.ln() - 2.0 * d as f64 * q);
    }
    Ok((pts.select(&keep), logm))
}

/// `G_ij = int e_i conj(e_j) w^{2d} dmu` as an exact finite sum.
pub fn gram(mu: &MeasureModel, w: &WeightModel, d: u32) -> Result<GramMatrix> {
    w.validate()?;
    let basis = enumerate_basis_capped(mu.dim(), d, GRAM_CAP)?;
    let (pts, logm) = weighted_nodes(mu, w, d)?;
    let n = basis.len();
    let rows: Vec<Vec<C64>> = par::map_range(pts.len(), |x| {
        let mut v = vec![C64::new(0.0, 0.0); n];
        basis.eval_into(pts.point(x), n, &mut v);
        let s = (0.5 * logm[x]).exp();
        v.iter_mut().for_each(|z| *z *= s);
        v
    });
    let cols: Vec<Vec<C64>> = par::map_range(n, |i| {
        (0..=i)
            .map(|j| rows.iter().map(|r| r[i] * r[j].conj()).sum())
            .collect()
    });
    let mut g = CMatrix::zeros(n, n);
    for (i, c) in cols.into_iter().enumerate() {
        for (j, v) in c.into_iter().enumerate() {
            g[(i, j)] = v;
            g[(j, i)] = v.conj();
        }
        g[(i, i)].im = 0.0;
    }
    let condition = hpd_condition(&g);
    Ok(GramMatrix {
        degree: d,
        basis,
        entries: g,
        condition,
    })
}

#[derive(Debug, Clone)]
pub struct OrthoBasis {
    /// Row `j`: monomial coefficients of the monic `q_j = e_j + ...`.
    pub coefficients: CMatrix,
    /// `||q_j||` of the monic family.
    pub norms: Vec<f64>,
    /// Row `j`: coefficients of the orthonormal `q_j / ||q_j||`.
    pub orthonormal: CMatrix,
    /// `|sum log ||q_j||^2 - log det G|`.
    pub det_mismatch: f64,
}

impl OrthoBasis {
    pub fn log_norm_sq_sum(&self) -> f64 {
        self.norms.iter().map(|n| 2.0 * n.ln()).sum()
    }
}

/// Gram-Schmidt on the ordered monomials via `G = L L^H`: the orthonormal
/// family is `L^{-1} e` and the monic norms are the diagonal of `L`.
pub fn orthonormalize(g: &GramMatrix) -> Result<OrthoBasis> {
    let l = cholesky(&g.entries, PIVOT_TOL)?;
    let n = l.nrows();
    let orthonormal = lower_inverse(&l);
    let norms: Vec<f64> = (0..n).map(|j| l[(j, j)].re).collect();
    let coefficients = CMatrix::from_fn(n, n, |i, j| orthonormal[(i, j)] * norms[i]);
    let prod: f64 = norms.iter().map(|v| 2.0 * v.ln()).sum();
    let det = log_det(&g.entries);
    let det_mismatch = if det.is_zero() {
        f64::INFINITY
    } else {
        (prod - det.log_magnitude).abs()
    };
    if !g.ill_conditioned() && det_mismatch > 1e-10 {
        return Err(Error::NumericalDegeneracy {
            index: n.saturating_sub(1),
            detail: format!("product of norms disagrees with det G by {det_mismatch:e} in log"),
        });
    }
    Ok(OrthoBasis {
        coefficients,
        norms,
        orthonormal,
        det_mismatch,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZdMethod {
    /// Discrete Stieltjes (Arnoldi) on the nodes; stable at high degree.
    Stieltjes,
    /// Dense Gram matrix and Cholesky.
    Cholesky,
}

#[derive(Debug, Clone, Serialize)]
pub struct ZdResult {
    pub d: u32,
    pub m: u64,
    pub zd: LogValue,
    /// `Z_d^{1/(2 l_d)}`; for `d = 0` it is `Z_0` itself.
    pub root: f64,
    pub condition: Option<f64>,
    pub flags: Vec<String>,
    pub method: ZdMethod,
}

fn zd_result(d: u32, m: u64, log_z: Option<f64>, dim: usize, condition: Option<f64>, method: ZdMethod) -> Result<ZdResult> {
    let zd = match log_z {
        Some(l) => LogValue::from_log(l),
        None => LogValue::ZERO,
    };
    let l = degree_sum(dim, d)?;
    let root = if zd.is_zero() {
        0.0
    } else if l == 0 {
        zd.magnitude()
    } else {
        (zd.log_magnitude / (2.0 * l as f64)).exp()
    };
    let mut flags = Vec::new();
    if condition.is_some_and(|c| !(c <= COND_FLAG)) {
        flags.push("ill-conditioned".to_string());
    }
    if zd.is_zero() {
        flags.push("degenerate".to_string());
    }
    Ok(ZdResult {
        d,
        m,
        zd,
        root,
        condition,
        flags,
        method,
    })
}

/// `Z_d = m_d! prod_j ||q_j||^2` in `L^2(w^{2d} mu)`. Fewer usable nodes
/// than `m_d` makes every Vandermonde vanish, so `Z_d = 0` exactly.
pub fn z_d_product(mu: &MeasureModel, w: &WeightModel, d: u32, method: ZdMethod) -> Result<ZdResult> {
    w.validate()?;
    let dim = mu.dim();
    let m = count_monomials(dim, d)?;
    let (pts, logm) = weighted_nodes(mu, w, d)?;
    if (pts.len() as u64) < m {
        let cond = (method == ZdMethod::Cholesky).then_some(f64::INFINITY);
        return zd_result(d, m, None, dim, cond, method);
    }
    match method {
        ZdMethod::Stieltjes => {
            let basis = enumerate_basis(dim, d)?;
            let r: Vec<f64> = logm.iter().map(|l| 0.5 * l).collect();
            let arn = GradedArnoldi::new(&pts, &basis, m as usize, &r)?;
            let log_z = ln_factorial(m) + arn.log_monic_norm_sq_sum();
            zd_result(d, m, Some(log_z), dim, None, method)
        }
        ZdMethod::Cholesky => z_d_from_gram(&gram(mu, w, d)?),
    }
}

/// Cholesky route from an already assembled Gram matrix.
pub fn z_d_from_gram(g: &GramMatrix) -> Result<ZdResult> {
    let m = g.basis.len() as u64;
    let ob = orthonormalize(g)?;
    let log_z = ln_factorial(m) + ob.log_norm_sq_sum();
    zd_result(g.degree, m, Some(log_z), g.basis.dimension(), Some(g.condition), ZdMethod::Cholesky)
}

/// Nodes of `mu` that carry positive mass and finite weight at degree `d`.
pub fn usable_node_count(mu: &MeasureModel, w: &WeightModel, d: u32) -> Result<usize> {
    Ok(weighted_nodes(mu, w, d)?.0.len())
}

/// `tilde Z_d = m_d! prod ||q_j^{(H)}||^2` for the degree-`d` homogeneous
/// monomials in `L^2(nu)`, `nu` the lift of `mu` with `phase_resolution`
/// equally spaced phases per node.
pub fn z_d_lift(mu: &MeasureModel, w: &WeightModel, d: u32, phase_resolution: usize) -> Result<ZdResult> {
    w.validate()?;
    if (phase_resolution as u64) < 2 * d as u64 + 1 {
        return invalid(format!("phase resolution {phase_resolution} is below 2d+1 = {}", 2 * d + 1));
    }
    let dim = mu.dim();
    let m = count_monomials(dim, d)?;
    let (pts, masses) = mu.finite()?;
    if d == 0 {
        return zd_result(0, 1, Some(mu.total_mass().ln()), dim, None, ZdMethod::Stieltjes);
    }
    let keep: Vec<usize> = (0..pts.len())
        .filter(|&i| masses[i] > 0.0 && w.w(pts.point(i)) > 0.0)
        .collect();
    let base = pts.select(&keep);
    let lifted = lift_points(&base, w, phase_resolution, false)?;
    let hb = HomogeneousBasis::new(dim + 1, d)?;
    if (lifted.len() as u64) < m {
        return zd_result(d, m, None, dim, None, ZdMethod::Stieltjes);
    }
    // rows sqrt(nu_k) e^H(zeta_k), rescaled by a common factor to stay finite
    let logs: Vec<f64> = (0..lifted.len())
        .map(|k| 0.5 * (masses[keep[k / phase_resolution]] / phase_resolution as f64).ln())
        .collect();
    let shift = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let a = CMatrix::from_fn(lifted.len(), hb.len(), |k, j| {
        eval_monomial(&hb.indices()[j], lifted.point(k)) * (logs[k] - shift).exp()
    });
    let qr = mgs_qr(&a);
    let mut log_z = ln_factorial(m) + 2.0 * shift * m as f64;
    for j in 0..hb.len() {
        let r = qr.r[(j, j)].re;
        if !(r > 0.0) {
            return zd_result(d, m, None, dim, None, ZdMethod::Stieltjes);
        }
        log_z += 2.0 * r.ln();
    }
    zd_result(d, m, Some(log_z), dim, None, ZdMethod::Stieltjes)
}

#[derive(Debug, Clone, Serialize)]
pub struct ChristoffelReport {
    pub d: u32,
    pub m: u64,
    /// `K_d(z)` at the evaluation points.
    pub kernel: Vec<f64>,
    /// `(1/m_d) K_d(z) w(z)^{2d}` at the evaluation points.
    pub density: Vec<f64>,
    /// Mass of `(1/m_d) K_d w^{2d} dmu` at each node of `mu`.
    pub node_masses: Vec<f64>,
    pub total_mass: f64,
    /// `(alpha, int z^alpha (1/m_d) K_d w^{2d} dmu)` for `|alpha| <= moment_degree`.
    pub moments: Vec<(Vec<u32>, C64)>,
}

/// Orthonormal basis of `L^2(w^{2d} mu)` by discrete Stieltjes.
fn stieltjes(mu: &MeasureModel, w: &WeightModel, d: u32) -> Result<(GradedArnoldi, GradedBasis)> {
    w.validate()?;
    let basis = enumerate_basis(mu.dim(), d)?;
    let (pts, logm) = weighted_nodes(mu, w, d)?;
    if pts.len() < basis.len() {
        return Err(Error::NumericalDegeneracy {
            index: pts.len(),
            detail: format!("{} usable nodes for {} basis functions", pts.len(), basis.len()),
        });
    }
    let r: Vec<f64> = logm.iter().map(|l| 0.5 * l).collect();
    let arn = GradedArnoldi::new(&pts, &basis, basis.len(), &r)?;
    Ok((arn, basis))
}

pub fn christoffel(mu: &MeasureModel, w: &WeightModel, d: u32, eval_points: &PointSet, moment_degree: u32) -> Result<ChristoffelReport> {
    if eval_points.dim() != mu.dim() {
        return invalid("evaluation points and measure live in different dimensions");
    }
    let (arn, basis) = stieltjes(mu, w, d)?;
    let m = basis.len() as u64;
    let mf = m as f64;
    let weight_2d = |z: &[C64]| if d == 0 { 1.0 } else { (-2.0 * d as f64 * w.q(z)).exp() };
    let kernel: Vec<f64> = par::map_range(eval_points.len(), |i| arn.kernel_diagonal(eval_points.point(i)));
    let density = kernel
        .iter()
        .zip(eval_points.iter())
        .map(|(k, z)| k / mf * weight_2d(z))
        .collect();
    let (nodes, masses) = mu.finite()?;
    let node_masses: Vec<f64> = par::map_range(nodes.len(), |i| {
        let z = nodes.point(i);
        if masses[i] == 0.0 || w.q(z) == f64::INFINITY && d > 0 {
            0.0
        } else {
            masses[i] * arn.kernel_diagonal(z) / mf * weight_2d(z)
        }
    });
    let total_mass = node_masses.iter().sum();
    let mb = enumerate_basis(mu.dim(), moment_degree)?;
    let moments = mb
        .indices()
        .iter()
        .map(|a| {
            let v: C64 = nodes
                .iter()
                .zip(&node_masses)
                .map(|(z, &nm)| eval_monomial(a, z) * nm)
                .sum();
            (a.exponents().to_vec(), v)
        })
        .collect();
    Ok(ChristoffelReport {
        d,
        m,
        kernel,
        density,
        node_masses,
        total_mass,
        moments,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BernsteinMarkov {
    /// `(d, sup_E |w^d p| / ||w^d p||_{L^2(mu)})` maximized over `p`.
    pub ratios: Vec<(u32, f64)>,
    /// `epsilon` in a least-squares fit `ratio ~ M (1 + epsilon)^d`.
    pub growth: f64,
}

/// The extremal ratio is `sqrt(sup_E K_d w^{2d})`: the reproducing kernel at
/// the maximizing point is the extremal polynomial.
pub fn bernstein_markov_probe(mesh: &PointSet, mu: &MeasureModel, w: &WeightModel, d_max: u32) -> Result<BernsteinMarkov> {
    if mesh.is_empty() || mesh.dim() != mu.dim() {
        return invalid("sup mesh must be non-empty and match the measure dimension");
    }
    let ratios = par::try_map_range(d_max as usize + 1, |d| {
        let d = d as u32;
        let (arn, _) = stieltjes(mu, w, d)?;
        let sup = mesh
            .iter()
            .map(|z| {
                let q = if d == 0 { 0.0 } else { w.q(z) };
                if q == f64::INFINITY {
                    0.0
                } else {
                    arn.kernel_diagonal(z) * (-2.0 * d as f64 * q).exp()
                }
            })
            .fold(0.0, f64::max);
        Ok::<_, Error>((d, sup.sqrt()))
    })?;
    let growth = if ratios.len() < 2 {
        0.0
    } else {
        let n = ratios.len() as f64;
        let xm = ratios.iter().map(|r| r.0 as f64).sum::<f64>() / n;
        let ym = ratios.iter().map(|r| r.1.ln()).sum::<f64>() / n;
        let sxy: f64 = ratios.iter().map(|r| (r.0 as f64 - xm) * (r.1.ln() - ym)).sum();
        let sxx: f64 = ratios.iter().map(|r| (r.0 as f64 - xm).powi(2)).sum();
        (sxy / sxx).exp() - 1.0
    };
    Ok(BernsteinMarkov { ratios, growth })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_atoms() -> MeasureModel {
        MeasureModel::atomic(PointSet::real_line(&[0.0, 1.0]).unwrap(), vec![1.0, 1.0]).unwrap()
    }

    #[test]
    fn two_atom_gram_and_basis() {
        let g = gram(&two_atoms(), &WeightModel::unit(), 1).unwrap();
        let expect = [[2.0, 1.0], [1.0, 1.0]];
        for (i, row) in expect.iter().enumerate() {
            for (j, &e) in row.iter().enumerate() {
                assert_relative_eq!(g.entries[(i, j)].re, e, epsilon = 1e-15);
            }
        }
        let ob = orthonormalize(&g).unwrap();
        assert_relative_eq!(ob.norms[0].powi(2), 2.0, epsilon = 1e-14);
        assert_relative_eq!(ob.norms[1].powi(2), 0.5, epsilon = 1e-14);
        assert_relative_eq!(ob.coefficients[(1, 0)].re, -0.5, epsilon = 1e-14);
        assert_relative_eq!(ob.coefficients[(1, 1)].re, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn two_atom_zd() {
        for method in [ZdMethod::Stieltjes, ZdMethod::Cholesky] {
            let z = z_d_product(&two_atoms(), &WeightModel::unit(), 1, method).unwrap();
            assert_relative_eq!(z.zd.magnitude(), 2.0, epsilon = 1e-13);
            let z0 = z_d_product(&two_atoms(), &WeightModel::unit(), 0, method).unwrap();
            assert_relative_eq!(z0.zd.magnitude(), 2.0, epsilon = 1e-13);
            // three basis functions on two atoms
            assert!(z_d_product(&two_atoms(), &WeightModel::unit(), 2, method).unwrap().zd.is_zero());
        }
        let zl = z_d_lift(&two_atoms(), &WeightModel::unit(), 1, 3).unwrap();
        assert_relative_eq!(zl.zd.magnitude(), 2.0, epsilon = 1e-13);
        assert!(z_d_lift(&two_atoms(), &WeightModel::unit(), 1, 2).is_err());
    }

    #[test]
    fn circle_gram_is_identity_and_zd_factorial() {
        let mu = MeasureModel::arc(1.0, 9);
        let mu = mu.unwrap();
        let g = gram(&mu, &WeightModel::unit(), 4).unwrap();
        assert!((&g.entries - CMatrix::identity(5, 5)).norm() < 1e-13);
        for d in 0..5u32 {
            let z = z_d_product(&mu, &WeightModel::unit(), d, ZdMethod::Stieltjes).unwrap();
            let m = d as u64 + 1;
            assert_relative_eq!(z.zd.log_magnitude, ln_factorial(m), epsilon = 1e-12);
            let zl = z_d_lift(&mu, &WeightModel::unit(), d, 2 * d as usize + 1).unwrap();
            assert_relative_eq!(zl.zd.log_magnitude, ln_factorial(m), epsilon = 1e-12);
        }
    }

    #[test]
    fn norms_product_matches_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let b = CMatrix::from_fn(6, 6, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let g = GramMatrix {
                degree: 0,
                basis: enumerate_basis(1, 5).unwrap(),
                entries: &b * b.adjoint() + CMatrix::identity(6, 6) * C64::new(0.1, 0.0),
                condition: 1.0,
            };
            let ob = orthonormalize(&g).unwrap();
            assert!(ob.det_mismatch < 1e-10);
            let on = &ob.orthonormal;
            assert!((on * &g.entries * on.adjoint() - CMatrix::identity(6, 6)).norm() < 1e-8);
        }
    }

    #[test]
    fn methods_agree_and_lift_matches() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let coords: Vec<C64> = (0..12).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let masses: Vec<f64> = (0..6).map(|_| rng.random_range(0.1..1.0)).collect();
        let mu = MeasureModel::atomic(PointSet::new(2, coords).unwrap(), masses).unwrap();
        let w = WeightModel::power(0.5, 2.0);
        let a = z_d_product(&mu, &w, 1, ZdMethod::Stieltjes).unwrap();
        let b = z_d_product(&mu, &w, 1, ZdMethod::Cholesky).unwrap();
        let c = z_d_lift(&mu, &w, 1, 3).unwrap();
        assert_relative_eq!(a.zd.log_magnitude, b.zd.log_magnitude, epsilon = 1e-10);
        assert_relative_eq!(a.zd.log_magnitude, c.zd.log_magnitude, epsilon = 1e-10);
    }

    #[test]
    fn degenerate_gram_names_pivot() {
        // three collinear atoms in C^2 make z_2 - z_1 vanish on the support
        let pts = PointSet::from_rows(
            2,
            &[0.0, 1.0, 2.0].map(|t: f64| vec![C64::new(t, 0.0), C64::new(t, 0.0)]),
        )
        .unwrap();
        let mu = MeasureModel::atomic(pts, vec![1.0; 3]).unwrap();
        let g = gram(&mu, &WeightModel::unit(), 1).unwrap();
        match orthonormalize(&g) {
            Err(Error::NumericalDegeneracy { index, .. }) => assert_eq!(index, 2),
            other => panic!("expected degeneracy, got {other:?}"),
        }
    }

    #[test]
    fn two_atom_christoffel() {
        let r = christoffel(&two_atoms(), &WeightModel::unit(), 1, &PointSet::real_line(&[0.0, 1.0]).unwrap(), 2).unwrap();
        assert_relative_eq!(r.kernel[0], 1.0, epsilon = 1e-13);
        assert_relative_eq!(r.kernel[1], 1.0, epsilon = 1e-13);
        assert_relative_eq!(r.node_masses[0], 0.5, epsilon = 1e-13);
        assert_relative_eq!(r.total_mass, 1.0, epsilon = 1e-13);
    }

    #[test]
    fn interval_christoffel_moments_approach_arcsine() {
        let mu = MeasureModel::gauss_legendre(-1.0, 1.0, 128).unwrap();
        let r = christoffel(&mu, &WeightModel::unit(), 50, &PointSet::empty(1), 4).unwrap();
        assert_relative_eq!(r.total_mass, 1.0, epsilon = 1e-12);
        assert!((r.moments[2].1.re - 0.5).abs() < 0.02);
        assert!((r.moments[4].1.re - 0.375).abs() < 0.02);
    }

    #[test]
    fn circle_bernstein_markov_is_sqrt_m() {
        let mu = MeasureModel::arc(1.0, 32).unwrap();
        let mesh = crate::domain_models::SetModel::Circle { radius: 1.0 }.mesh(64).unwrap();
        let bm = bernstein_markov_probe(&mesh, &mu, &WeightModel::unit(), 6).unwrap();
        for (d, r) in bm.ratios {
            assert_relative_eq!(r, ((d + 1) as f64).sqrt(), epsilon = 1e-10);
        }
    }

    #[test]
    fn sampler_measure_unsupported() {
        let mu = MeasureModel::Sampler(crate::domain_models::SamplerModel::CircleUniform { radius: 1.0 });
        assert!(matches!(gram(&mu, &WeightModel::unit(), 1), Err(Error::Unsupported(_))));
    }
}
