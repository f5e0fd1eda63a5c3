//! Plain, homogeneous and weighted Vandermonde determinants in log-domain.
//! Matrix convention: row `i` is the basis function `e_i`, column `j` the
//! point `zeta_j`.

use num_complex::Complex64 as C64;

use crate::domain_models::{PointSet, WeightModel};
use crate::error::{invalid, Result};
use crate::graded_basis::{count_monomials, enumerate_basis, GradedBasis, HomogeneousBasis, MultiIndex};
use crate::linalg::{log_det, CMatrix};
use crate::logvalue::LogValue;

pub fn eval_monomial(alpha: &MultiIndex, z: &[C64]) -> C64 {
    alpha
        .exponents()
        .iter()
        .zip(z)
        .fold(C64::new(1.0, 0.0), |acc, (&k, &v)| acc * v.powu(k))
}

/// `[e_i(zeta_j)]` for the first `points.len()` basis elements.
pub fn vdm_matrix(points: &PointSet, basis: &GradedBasis) -> Result<CMatrix> {
    let n = points.len();
    check_square(points, basis.dimension(), basis.len())?;
    let mut m = CMatrix::zeros(n, n);
    let mut col = vec![C64::new(0.0, 0.0); n];
    for (j, p) in points.iter().enumerate() {
        basis.eval_into(p, n, &mut col);
        for (i, v) in col.iter().enumerate() {
            m[(i, j)] = *v;
        }
    }
    Ok(m)
}

fn check_square(points: &PointSet, dim: usize, available: usize) -> Result<()> {
    if points.is_empty() {
        return invalid("Vandermonde determinant needs at least one point");
    }
    if points.dim() != dim {
        return invalid(format!("points live in C^{} but the basis in C^{dim}", points.dim()));
    }
    if available < points.len() {
        return invalid(format!("{} points but only {available} basis functions", points.len()));
    }
    Ok(())
}

/// `VDM(zeta_1, ..., zeta_n) = det[e_i(zeta_j)]`.
pub fn vdm(points: &PointSet, basis: &GradedBasis) -> Result<LogValue> {
    Ok(log_det(&vdm_matrix(points, basis)?))
}

/// `vdm` with the smallest full-degree basis that covers the points.
pub fn vdm_auto(points: &PointSet) -> Result<LogValue> {
    let basis = GradedBasis::covering(points.dim(), points.len())?;
    vdm(points, &basis)
}

pub fn vdmh_matrix(points: &PointSet, basis: &HomogeneousBasis) -> Result<CMatrix> {
    if points.len() != basis.len() {
        return invalid(format!(
            "homogeneous Vandermonde of degree {} in C^{} needs exactly {} points, got {}",
            basis.degree(),
            basis.dimension(),
            basis.len(),
            points.len()
        ));
    }
    check_square(points, basis.dimension(), basis.len())?;
    let n = points.len();
    Ok(CMatrix::from_fn(n, n, |i, j| eval_monomial(&basis.indices()[i], points.point(j))))
}

/// `VDMH_d(zeta_1, ..., zeta_h) = det[e_i^{(H,d)}(zeta_j)]` in the lift order.
pub fn vdmh(points: &PointSet, degree: u32) -> Result<LogValue> {
    let basis = HomogeneousBasis::new(points.dim(), degree)?;
    Ok(log_det(&vdmh_matrix(points, &basis)?))
}

/// `VDM * prod_j w(zeta_j)^{|alpha(n)|}`; a point with `Q = inf` gives zero.
pub fn weighted_vdm(points: &PointSet, basis: &GradedBasis, w: &WeightModel) -> Result<LogValue> {
    let v = vdm(points, basis)?;
    let k = basis.indices()[points.len() - 1].degree() as f64;
    let mut log_w = 0.0;
    for p in points.iter() {
        let q = w.q(p);
        if q == f64::INFINITY {
            return Ok(LogValue::ZERO);
        }
        log_w -= q;
    }
    Ok(v.scale_log(k * log_w))
}

/// `|log|VDMH_d((t_i, t_i lambda_i))| - log(prod |t_i|^d |VDM(lambda)|)|`.
///
/// Both sides are evaluated from scratch; the first never sees the factored form.
pub fn lift_factorization_check(base: &PointSet, t: &[C64], degree: u32) -> Result<f64> {
    let m = count_monomials(base.dim(), degree)? as usize;
    if base.len() != m || t.len() != m {
        return invalid(format!("need exactly m_d = {m} base points and moduli"));
    }
    if let Some(i) = t.iter().position(|z| z.norm() == 0.0) {
        return invalid(format!("t_{i} = 0 cannot be factored out"));
    }
    let mut lifted = PointSet::empty(base.dim() + 1);
    let mut buf = vec![C64::new(0.0, 0.0); base.dim() + 1];
    for (lambda, &ti) in base.iter().zip(t) {
        buf[0] = ti;
        for (b, l) in buf[1..].iter_mut().zip(lambda) {
            *b = ti * l;
        }
        lifted.push(&buf);
    }
    let lhs = vdmh(&lifted, degree)?;
    let basis = enumerate_basis(base.dim(), degree)?;
    let rhs = vdm(base, &basis)?.scale_log(degree as f64 * t.iter().map(|z| z.norm().ln()).sum::<f64>());
    Ok(match (lhs.is_zero(), rhs.is_zero()) {
        (true, true) => 0.0,
        (false, false) => (lhs.log_magnitude - rhs.log_magnitude).abs(),
        _ => f64::INFINITY,
    })
}
