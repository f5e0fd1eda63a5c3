//! Dense complex kernels that need log-domain bookkeeping or named failures.
//! nalgebra supplies the storage; the factorizations here are short enough to
//! own so that pivot indices and scale factors stay visible.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::logvalue::LogValue;

pub type CMatrix = DMatrix<C64>;

/// Determinant as a `LogValue`: each row is divided by its max modulus first
/// (the scale goes into the log), then LU with partial pivoting.
pub fn log_det(mat: &CMatrix) -> LogValue {
    assert!(mat.is_square(), "log_det needs a square matrix");
    let n = mat.nrows();
    if n == 0 {
        return LogValue::ONE;
    }
    let mut a = mat.clone();
    let mut log_mag = 0.0;
    for i in 0..n {
        let s = (0..n).map(|j| a[(i, j)].norm()).fold(0.0, f64::max);
        if s == 0.0 || !s.is_finite() {
            return LogValue::ZERO;
        }
        log_mag += s.ln();
        for j in 0..n {
            a[(i, j)] /= s;
        }
    }
    let mut phase = C64::new(1.0, 0.0);
    for k in 0..n {
        let (p, pmax) = (k..n)
            .map(|i| (i, a[(i, k)].norm()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pmax == 0.0 {
            return LogValue::ZERO;
        }
        if p != k {
            a.swap_rows(p, k);
            phase = -phase;
        }
        let piv = a[(k, k)];
        log_mag += pmax.ln();
        phase *= piv / pmax;
        for i in k + 1..n {
            let f = a[(i, k)] / piv;
            if f == C64::new(0.0, 0.0) {
                continue;
            }
            for j in k + 1..n {
                let v = a[(k, j)];
                a[(i, j)] -= f * v;
            }
        }
    }
    LogValue {
        log_magnitude: log_mag,
        phase: phase / phase.norm(),
    }
}

/// Lower Cholesky factor `L` with `G = L L^H`.
///
/// Fails with `NumericalDegeneracy { index: j }` once the `j`-th pivot drops
/// to `rel_tol * G[j][j]` or below, which names the first monomial that is
/// numerically dependent on its predecessors.
pub fn cholesky(g: &CMatrix, rel_tol: f64) -> Result<CMatrix> {
    let n = g.nrows();
    let mut l = CMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = g[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        let scale = g[(j, j)].re.abs();
        if !(d > rel_tol * scale) || !d.is_finite() {
            return Err(Error::NumericalDegeneracy {
                index: j,
                detail: format!("Cholesky pivot {d:e} against diagonal {scale:e}"),
            });
        }
        let ljj = d.sqrt();
        l[(j, j)] = C64::new(ljj, 0.0);
        for i in j + 1..n {
            let mut s = g[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Inverse of a nonsingular lower-triangular matrix.
pub fn lower_inverse(l: &CMatrix) -> CMatrix {
    let n = l.nrows();
    let mut inv = CMatrix::zeros(n, n);
    for c in 0..n {
        inv[(c, c)] = C64::new(1.0, 0.0) / l[(c, c)];
        for i in c + 1..n {
            let mut s = C64::new(0.0, 0.0);
            for k in c..i {
                s += l[(i, k)] * inv[(k, c)];
            }
            inv[(i, c)] = -s / l[(i, i)];
        }
    }
    inv
}

/// `a = q r` with orthonormal columns in `q` and upper-triangular `r`.
pub struct ThinQr {
    pub q: CMatrix,
    pub r: CMatrix,
}

/// Thin QR by modified Gram-Schmidt with one round of reorthogonalization.
pub fn mgs_qr(a: &CMatrix) -> ThinQr {
    let (m, n) = a.shape();
    let mut q = a.clone();
    let mut r = CMatrix::zeros(n, n);
    for j in 0..n {
        for _pass in 0..2 {
            for i in 0..j {
                let mut h = C64::new(0.0, 0.0);
                for x in 0..m {
                    h += q[(x, i)].conj() * q[(x, j)];
                }
                r[(i, j)] += h;
                for x in 0..m {
                    let v = q[(x, i)];
                    q[(x, j)] -= h * v;
                }
            }
        }
        let nrm = (0..m).map(|x| q[(x, j)].norm_sqr()).sum::<f64>().sqrt();
        r[(j, j)] = C64::new(nrm, 0.0);
        if nrm > 0.0 {
            for x in 0..m {
                q[(x, j)] /= nrm;
            }
        }
    }
    ThinQr { q, r }
}

/// 2-norm condition number of a Hermitian positive definite matrix, from
/// its eigenvalues.
pub fn hpd_condition(g: &CMatrix) -> f64 {
    let eig = g.clone().symmetric_eigenvalues();
    let max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}
