//! Discrete orthonormal bases on finite point sets.
//!
//! Raw monomial matrices at degree 40 are far too ill-conditioned to
//! factor, so every large computation works with an orthonormal basis of the
//! same span plus the triangular bookkeeping that recovers monomial
//! determinants:
//!
//! * graded: an Arnoldi (discrete Stieltjes) process with `q_i` built from
//!   `z_k q_parent`, where `e_i = z_k e_parent`; the leading coefficients
//!   give `det[e_i(x_j)] = det Q_S / prod lead_i`.
//! * homogeneous: modified Gram-Schmidt on monomials of row-normalized points.

use num_complex::Complex64 as C64;

use crate::domain_models::PointSet;
use crate::error::{invalid, Error, Result};
use crate::graded_basis::{GradedBasis, HomogeneousBasis};
use crate::linalg::{log_det, mgs_qr, CMatrix, ThinQr};
use crate::logvalue::LogValue;
use crate::vandermonde::eval_monomial;

/// Orthonormal columns `Q` on a point list together with the affine log
/// correction: for a subset `S` of rows,
/// `log|det B_S| = log|det Q_S| + sum_{x in S} row_log[x] + offset`,
/// where `B` is the original (weighted, monomial) matrix, points by rows.
#[derive(Debug, Clone)]
pub struct Frame {
    pub q: CMatrix,
    pub row_log: Vec<f64>,
    pub offset: f64,
}

impl Frame {
    pub fn nrows(&self) -> usize {
        self.q.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.q.ncols()
    }

    /// `log|det B_S|` with the sign/phase of `det Q_S`.
    pub fn subset_value(&self, rows: &[usize]) -> LogValue {
        let n = self.ncols();
        assert_eq!(rows.len(), n);
        let sub = CMatrix::from_fn(n, n, |i, j| self.q[(rows[i], j)]);
        let extra: f64 = rows.iter().map(|&r| self.row_log[r]).sum();
        log_det(&sub).scale_log(extra + self.offset)
    }
}

/// Arnoldi data for the graded monomials `e_0, ..., e_{n-1}` orthonormalized
/// in the discrete inner product `<f, g> = sum_x r_x^2 f(x) conj(g(x))`.
#[derive(Debug, Clone)]
pub struct GradedArnoldi {
    parents: Vec<(usize, usize)>,
    /// `h[i][j]` for `j < i` are the projections, `h[i][i]` the (real) norm.
    h: Vec<Vec<C64>>,
    log_lead: Vec<f64>,
    lead_phase: Vec<C64>,
    q: CMatrix,
}

const BREAKDOWN: f64 = 1e-13;

impl GradedArnoldi {
    /// `log_row_weight[x] = log r_x`; `-inf` removes a point from the inner product.
    pub fn new(points: &PointSet, basis: &GradedBasis, n: usize, log_row_weight: &[f64]) -> Result<Self> {
        if n == 0 || n > basis.len() {
            return invalid(format!("need 1 <= n <= {} basis functions", basis.len()));
        }
        if points.dim() != basis.dimension() || log_row_weight.len() != points.len() {
            return invalid("point, basis and weight shapes disagree");
        }
        let m = points.len();
        let shift = log_row_weight.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if shift == f64::NEG_INFINITY || !shift.is_finite() {
            return Err(Error::Degenerate("all row weights vanish".into()));
        }
        let r: Vec<f64> = log_row_weight.iter().map(|&l| (l - shift).exp()).collect();
        let mut cols: Vec<Vec<C64>> = Vec::with_capacity(n);
        let mut h: Vec<Vec<C64>> = Vec::with_capacity(n);
        let mut log_lead = Vec::with_capacity(n);
        let mut lead_phase = Vec::with_capacity(n);
        let mut parents = Vec::with_capacity(n);

        let nrm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        cols.push(r.iter().map(|&v| C64::new(v / nrm, 0.0)).collect());
        h.push(vec![C64::new(nrm, 0.0)]);
        log_lead.push(-shift - nrm.ln());
        lead_phase.push(C64::new(1.0, 0.0));
        parents.push((0, 0));

        for i in 1..n {
            let (k, p) = basis.parent(i).expect("graded basis parent");
            parents.push((k, p));
            let mut v: Vec<C64> = (0..m).map(|x| cols[p][x] * points.point(x)[k]).collect();
            let before = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let mut hi = vec![C64::new(0.0, 0.0); i + 1];
            for _pass in 0..2 {
                for (j, qj) in cols.iter().enumerate() {
                    let c: C64 = qj.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                    hi[j] += c;
                    for (vx, qx) in v.iter_mut().zip(qj) {
                        *vx -= c * qx;
                    }
                }
            }
            let nv = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if !(nv > BREAKDOWN * before) {
                return Err(Error::NumericalDegeneracy {
                    index: i,
                    detail: format!(
                        "monomial {:?} is numerically dependent on its predecessors on this point set",
                        basis.indices()[i]
                    ),
                });
            }
            for vx in v.iter_mut() {
                *vx /= nv;
            }
            hi[i] = C64::new(nv, 0.0);
            log_lead.push(log_lead[p] - nv.ln());
            lead_phase.push(lead_phase[p]);
            cols.push(v);
            h.push(hi);
        }
        let q = CMatrix::from_fn(m, n, |x, j| cols[j][x]);
        Ok(Self {
            parents,
            h,
            log_lead,
            lead_phase,
            q,
        })
    }

    pub fn len(&self) -> usize {
        self.log_lead.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_lead.is_empty()
    }

    /// Orthonormal vectors `r_x q_i(x)`, points by rows.
    pub fn q(&self) -> &CMatrix {
        &self.q
    }

    /// `log|lead_i|`: the coefficient of `e_i` in the orthonormal `q_i`.
    pub fn log_lead(&self) -> &[f64] {
        &self.log_lead
    }

    /// `log ||monic q_i||^2 = -2 log|lead_i|`, summed.
    pub fn log_monic_norm_sq_sum(&self) -> f64 {
        -2.0 * self.log_lead.iter().sum::<f64>()
    }

    /// Frame for subset determinants of the matrix `[r_x e_i(x)]`.
    pub fn frame(&self) -> Frame {
        Frame {
            q: self.q.clone(),
            row_log: vec![0.0; self.q.nrows()],
            offset: -self.log_lead.iter().sum::<f64>(),
        }
    }

    /// Values of the orthonormal polynomials `q_0(z), ..., q_{n-1}(z)`.
    pub fn eval(&self, z: &[C64]) -> Vec<C64> {
        let n = self.len();
        let mut out = Vec::with_capacity(n);
        out.push(self.lead_phase[0] * self.log_lead[0].exp());
        for i in 1..n {
            let (k, p) = self.parents[i];
            let mut v = out[p] * z[k];
            for (j, hj) in self.h[i][..i].iter().enumerate() {
                v -= hj * out[j];
            }
            out.push(v / self.h[i][i].re);
        }
        out
    }

    /// Christoffel sum `K(z) = sum_i |q_i(z)|^2`.
    pub fn kernel_diagonal(&self, z: &[C64]) -> f64 {
        self.eval(z).iter().map(|v| v.norm_sqr()).sum()
    }

    /// Monomial coefficients `C` with `q_i = sum_j C[i][j] e_j` (lower
    /// triangular), recovered from the recursion. Only for small `n`.
    pub fn monomial_coefficients(&self, basis: &GradedBasis) -> CMatrix {
        let n = self.len();
        let mut c = CMatrix::zeros(n, n);
        c[(0, 0)] = self.lead_phase[0] * self.log_lead[0].exp();
        for i in 1..n {
            let (k, p) = self.parents[i];
            // z_k * q_p in the monomial basis
            let mut row = vec![C64::new(0.0, 0.0); n];
            for j in 0..=p {
                let cj = c[(p, j)];
                if cj == C64::new(0.0, 0.0) {
                    continue;
                }
                let mut e = basis.indices()[j].exponents().to_vec();
                e[k] += 1;
                let pos = basis.position(&e).expect("shifted monomial inside the basis");
                row[pos] += cj;
            }
            for j in 0..i {
                let hj = self.h[i][j];
                for l in 0..=j {
                    row[l] -= hj * c[(j, l)];
                }
            }
            for (l, v) in row.into_iter().enumerate().take(i + 1) {
                c[(i, l)] = v / self.h[i][i].re;
            }
        }
        c
    }
}

/// Orthonormalized degree-`d` homogeneous monomials on a point list.
/// Rows are normalized by `||zeta||_inf^d` before orthogonalization.
pub fn homogeneous_frame(points: &PointSet, basis: &HomogeneousBasis, extra_row_log: Option<&[f64]>) -> Result<Frame> {
    if points.dim() != basis.dimension() {
        return invalid("points and homogeneous basis live in different dimensions");
    }
    let m = points.len();
    let n = basis.len();
    let d = basis.degree() as f64;
    let mut row_log = vec![0.0; m];
    let mut a = CMatrix::zeros(m, n);
    let mut buf = vec![C64::new(0.0, 0.0); points.dim()];
    for (x, p) in points.iter().enumerate() {
        let s = p.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let extra = extra_row_log.map_or(0.0, |e| e[x]);
        if s == 0.0 || extra == f64::NEG_INFINITY {
            row_log[x] = f64::NEG_INFINITY;
            continue;
        }
        row_log[x] = if d == 0.0 { extra } else { d * s.ln() + extra };
        for (b, z) in buf.iter_mut().zip(p) {
            *b = z / s;
        }
        for (j, alpha) in basis.indices().iter().enumerate() {
            a[(x, j)] = eval_monomial(alpha, &buf);
        }
    }
    let ThinQr { q, r } = mgs_qr(&a);
    let mut offset = 0.0;
    for j in 0..n {
        let rjj = r[(j, j)].re;
        if !(rjj > BREAKDOWN * a.column(j).norm()) {
            return Err(Error::NumericalDegeneracy {
                index: j,
                detail: format!(
                    "homogeneous monomial {:?} is numerically dependent on this point set",
                    basis.indices()[j]
                ),
            });
        }
        offset += rjj.ln();
    }
    Ok(Frame { q, row_log, offset })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graded_basis::enumerate_basis;
    use crate::vandermonde::{vdm, vdmh};
    use approx::assert_relative_eq;

    fn line(xs: &[f64]) -> PointSet {
        PointSet::real_line(xs).unwrap()
    }

    #[test]
    fn frame_reproduces_vdm() {
        let pts = line(&[-1.0, -0.6, -0.1, 0.3, 0.8, 1.0, 0.45]);
        let basis = enumerate_basis(1, 4).unwrap();
        let a = GradedArnoldi::new(&pts, &basis, 5, &[0.0; 7]).unwrap();
        let f = a.frame();
        let rows = [0, 2, 3, 4, 6];
        let direct = vdm(&pts.select(&rows), &basis).unwrap();
        assert_relative_eq!(f.subset_value(&rows).log_magnitude, direct.log_magnitude, epsilon = 1e-12);
    }

    #[test]
    fn weighted_frame_reproduces_weighted_vdm() {
        let xs = [-3.0, -1.2, -0.4, 0.1, 0.9, 2.2, 3.0];
        let pts = line(&xs);
        let basis = enumerate_basis(1, 3).unwrap();
        let logw: Vec<f64> = xs.iter().map(|x| -30.0 * x * x - 400.0).collect();
        let a = GradedArnoldi::new(&pts, &basis, 4, &logw).unwrap();
        let rows = [1, 2, 4, 5];
        let direct = vdm(&pts.select(&rows), &basis).unwrap().log_magnitude + rows.iter().map(|&r| logw[r]).sum::<f64>();
        assert_relative_eq!(a.frame().subset_value(&rows).log_magnitude, direct, max_relative = 1e-12);
    }

    #[test]
    fn frame_reproduces_vdm_2d() {
        let coords: Vec<C64> = (0..40).map(|k| C64::new((k as f64 * 0.7).sin(), (k as f64 * 1.3).cos())).collect();
        let pts = PointSet::new(2, coords).unwrap();
        let basis = enumerate_basis(2, 2).unwrap();
        let a = GradedArnoldi::new(&pts, &basis, 6, &[0.0; 20]).unwrap();
        let rows = [1, 4, 7, 9, 12, 18];
        let direct = vdm(&pts.select(&rows), &basis).unwrap();
        assert_relative_eq!(a.frame().subset_value(&rows).log_magnitude, direct.log_magnitude, epsilon = 1e-12);
    }

    #[test]
    fn eval_matches_columns_and_coefficients() {
        let pts = line(&[-1.0, -0.5, 0.0, 0.5, 1.0, 0.2]);
        let basis = enumerate_basis(1, 3).unwrap();
        let a = GradedArnoldi::new(&pts, &basis, 4, &[0.0; 6]).unwrap();
        let c = a.monomial_coefficients(&basis);
        for x in 0..6 {
            let z = pts.point(x);
            let v = a.eval(z);
            for i in 0..4 {
                assert!((v[i] - a.q()[(x, i)]).norm() < 1e-13);
                let mono: C64 = (0..4).map(|j| c[(i, j)] * z[0].powu(j as u32)).sum();
                assert!((mono - v[i]).norm() < 1e-12);
            }
        }
        for i in 0..4 {
            assert_relative_eq!(c[(i, i)].norm().ln(), a.log_lead()[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn homogeneous_frame_reproduces_vdmh() {
        let coords: Vec<C64> = (0..24).map(|k| C64::new((k as f64 * 0.3).cos() * 2.0, (k as f64 * 0.8).sin())).collect();
        let pts = PointSet::new(2, coords).unwrap();
        let basis = HomogeneousBasis::new(2, 3).unwrap();
        let f = homogeneous_frame(&pts, &basis, None).unwrap();
        let rows = [0, 3, 5, 10];
        let direct = vdmh(&pts.select(&rows), 3).unwrap();
        assert_relative_eq!(f.subset_value(&rows).log_magnitude, direct.log_magnitude, epsilon = 1e-12);
    }

    #[test]
    fn too_few_points_is_named_degeneracy() {
        let basis = enumerate_basis(1, 3).unwrap();
        let err = GradedArnoldi::new(&line(&[0.0, 1.0]), &basis, 4, &[0.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::NumericalDegeneracy { index: 2, .. }));
    }
}
