//! Chebyshev constants `Y(alpha)` as discrete complex minimax problems,
//! directional constants and the geometric means `tau`.
//!
//! Every problem is posed on an orthonormal frame: the target is the
//! orthonormal `q_i` (whose leading coefficient is known) and the competitors
//! are `q_0, ..., q_{i-1}`, so the solver never touches raw monomials.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::discrete_ortho::GradedArnoldi;
use crate::domain_models::{PointSet, WeightModel};
use crate::error::{invalid, Error, Result};
use crate::graded_basis::{count_homogeneous, degree_sum, enumerate_basis, GradedBasis, HomogeneousBasis, MultiIndex};
use crate::linalg::{mgs_qr, CMatrix, ThinQr};
use crate::par;
use crate::vandermonde::eval_monomial;

#[derive(Debug, Clone, PartialEq)]
pub enum ChebMode {
    /// Competitors: every `e_j` with `j < i`.
    Plain,
    /// Competitors: same-degree `e_j` with `j < i`.
    Homogeneous,
    /// As plain, with everything multiplied by `w^{|alpha(i)|}`.
    Weighted(WeightModel),
}

impl ChebMode {
    pub fn label(&self) -> &'static str {
        match self {
            ChebMode::Plain => "plain",
            ChebMode::Homogeneous => "homogeneous",
            ChebMode::Weighted(_) => "weighted",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LawsonOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Stop once neither the best max-residual nor the lower bound has moved
    /// by more than `tol` (relative) over this many iterations.
    pub window: usize,
}

impl Default for LawsonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 20_000,
            window: 10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LawsonResult {
    /// `min_c max_x |f - G c|` as found (an upper bound).
    pub value: f64,
    /// Weighted-L2 lower bound `sqrt(sum u |r|^2)`.
    pub lower_bound: f64,
    pub coefficients: Vec<C64>,
    pub iterations: usize,
}

/// Lawson iteration for `min_c max_x |f(x) - sum_j c_j g_j(x)|` with `g`
/// given as the columns of `comp`. Weights are updated by `u <- u |r| / sum`,
/// and points whose weight falls below `1e-15` of the maximum leave the
/// active set.
pub fn lawson(target: &[C64], comp: &CMatrix, opts: &LawsonOptions) -> Result<LawsonResult> {
    let m = target.len();
    let k = comp.ncols();
    if comp.nrows() != m {
        return invalid("target and competitor shapes disagree");
    }
    if m < k + 1 {
        return invalid(format!("mesh has {m} points but {} are needed", k + 1));
    }
    let fmax = target.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if k == 0 || fmax == 0.0 {
        return Ok(LawsonResult {
            value: fmax,
            lower_bound: fmax,
            coefficients: vec![C64::new(0.0, 0.0); k],
            iterations: 0,
        });
    }
    let mut active: Vec<usize> = (0..m).collect();
    let mut u = vec![1.0 / m as f64; m];
    let mut best = (f64::INFINITY, vec![C64::new(0.0, 0.0); k]);
    let mut lower: f64 = 0.0;
    let mut last_improvement = 0;
    let mut at_window = (f64::INFINITY, 0.0);
    let mut it = 0;
    while it < opts.max_iter {
        it += 1;
        let ma = active.len();
        if ma < k {
            break;
        }
        let a = CMatrix::from_fn(ma, k, |r, c| comp[(active[r], c)] * u[active[r]].sqrt());
        let b: Vec<C64> = active.iter().map(|&x| target[x] * u[x].sqrt()).collect();
        let ThinQr { q, r } = mgs_qr(&a);
        let mut rhs: Vec<C64> = (0..k).map(|c| (0..ma).map(|x| q[(x, c)].conj() * b[x]).sum()).collect();
        for i in (0..k).rev() {
            let mut s = rhs[i];
            for j in i + 1..k {
                s -= r[(i, j)] * rhs[j];
            }
            let d = r[(i, i)];
            rhs[i] = if d.norm() > 0.0 { s / d } else { C64::new(0.0, 0.0) };
        }
        let coef = rhs;
        let mut resid = vec![0.0; m];
        let mut mx: f64 = 0.0;
        for x in 0..m {
            let mut v = target[x];
            for (c, cc) in coef.iter().enumerate() {
                v -= comp[(x, c)] * cc;
            }
            resid[x] = v.norm();
            mx = mx.max(resid[x]);
        }
        let lb = active.iter().map(|&x| u[x] * resid[x] * resid[x]).sum::<f64>().sqrt();
        lower = lower.max(lb);
        if mx < best.0 {
            best = (mx, coef);
        }
        if (best.0 - lower) <= opts.tol * best.0 {
            break;
        }
        if it - last_improvement >= opts.window {
            let (b0, l0) = at_window;
            if b0 - best.0 <= opts.tol * best.0 && lower - l0 <= opts.tol * best.0 {
                break;
            }
            at_window = (best.0, lower);
            last_improvement = it;
        }
        let mut total = 0.0;
        for &x in &active {
            u[x] *= resid[x];
            total += u[x];
        }
        if total == 0.0 {
            break;
        }
        let mut umax: f64 = 0.0;
        for &x in &active {
            u[x] /= total;
            umax = umax.max(u[x]);
        }
        active.retain(|&x| u[x] > 1e-15 * umax);
    }
    Ok(LawsonResult {
        value: best.0,
        lower_bound: lower.min(best.0),
        coefficients: best.1,
        iterations: it,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ChebResult {
    pub alpha: Vec<u32>,
    pub mode: &'static str,
    pub log_y: f64,
    pub y: f64,
    /// `(upper - lower) / upper` for the discrete minimax value.
    pub residual: f64,
    pub iterations: usize,
    /// Monomial coefficients of the optimal polynomial, graded order up to
    /// and including the target (whose coefficient is 1); empty when the
    /// index is too large for a dense recovery.
    pub coefficients: Vec<C64>,
    /// `sup over the fine mesh / sup over the working mesh - 1`.
    pub mesh_gap: Option<f64>,
}

/// Frames shared by all constants of one mode on one mesh.
pub struct ChebContext {
    mesh: PointSet,
    mode: ChebMode,
    basis: GradedBasis,
    /// Graded modes: one Arnoldi per weight exponent (a single one for plain).
    arnoldi: Vec<GradedArnoldi>,
    /// Homogeneous mode: QR of the raw degree-`k` block per degree.
    blocks: Vec<(HomogeneousBasis, ThinQr)>,
    opts: LawsonOptions,
}

const DENSE_COEFFICIENTS: usize = 64;

impl ChebContext {
    pub fn new(mesh: &PointSet, mode: ChebMode, max_degree: u32, opts: LawsonOptions) -> Result<Self> {
        if mesh.is_empty() {
            return invalid("empty mesh");
        }
        let basis = enumerate_basis(mesh.dim(), max_degree)?;
        let mut arnoldi = Vec::new();
        let mut blocks = Vec::new();
        match &mode {
            ChebMode::Plain => {
                let n = basis.len();
                if mesh.len() < n {
                    return invalid(format!("mesh has {} points but {n} are needed", mesh.len()));
                }
                arnoldi.push(GradedArnoldi::new(mesh, &basis, n, &vec![0.0; mesh.len()])?);
            }
            ChebMode::Weighted(w) => {
                w.validate()?;
                let frames = par::try_map_range(max_degree as usize + 1, |k| {
                    let n = basis.block(k as u32).end;
                    if mesh.len() < n {
                        return invalid(format!("mesh has {} points but {n} are needed", mesh.len()));
                    }
                    let logw: Vec<f64> = mesh.iter().map(|p| -(k as f64) * w.q(p)).collect();
                    GradedArnoldi::new(mesh, &basis, n, &logw)
                })?;
                arnoldi = frames;
            }
            ChebMode::Homogeneous => {
                blocks = par::try_map_range(max_degree as usize + 1, |k| {
                    let hb = HomogeneousBasis::new(mesh.dim(), k as u32)?;
                    if mesh.len() < hb.len() {
                        return invalid(format!("mesh has {} points but {} are needed", mesh.len(), hb.len()));
                    }
                    let a = CMatrix::from_fn(mesh.len(), hb.len(), |x, j| eval_monomial(&hb.indices()[j], mesh.point(x)));
                    Ok((hb, mgs_qr(&a)))
                })?;
            }
        }
        Ok(Self {
            mesh: mesh.clone(),
            mode,
            basis,
            arnoldi,
            blocks,
            opts,
        })
    }

    pub fn basis(&self) -> &GradedBasis {
        &self.basis
    }

    pub fn mode(&self) -> &ChebMode {
        &self.mode
    }

    fn index_of(&self, alpha: &[u32]) -> Result<usize> {
        self.basis
            .position(alpha)
            .ok_or_else(|| Error::InvalidArgument(format!("multi-index {alpha:?} is outside the prepared degree range")))
    }

    /// `Y(alpha)` on the mesh; `fine` adds the mesh-gap diagnostic.
    pub fn constant(&self, alpha: &[u32], fine: Option<&PointSet>) -> Result<ChebResult> {
        let i = self.index_of(alpha)?;
        let deg: u32 = alpha.iter().sum();
        match &self.mode {
            ChebMode::Plain | ChebMode::Weighted(_) => {
                let arn = match self.mode {
                    ChebMode::Plain => &self.arnoldi[0],
                    _ => &self.arnoldi[deg as usize],
                };
                let q = arn.q();
                let target: Vec<C64> = (0..q.nrows()).map(|x| q[(x, i)]).collect();
                let comp = q.columns(0, i).into_owned();
                let res = lawson(&target, &comp, &self.opts)?;
                let log_lead = arn.log_lead()[i];
                let log_y = if res.value > 0.0 { res.value.ln() - log_lead } else { f64::NEG_INFINITY };
                let coefficients = if i < DENSE_COEFFICIENTS {
                    let c = arn.monomial_coefficients(&self.basis);
                    let lead = c[(i, i)];
                    (0..=i)
                        .map(|l| {
                            let mut v = c[(i, l)];
                            for (j, cj) in res.coefficients.iter().enumerate() {
                                v -= cj * c[(j, l)];
                            }
                            v / lead
                        })
                        .collect()
                } else {
                    Vec::new()
                };
                let mesh_gap = fine.map(|f| {
                    let weight = match &self.mode {
                        ChebMode::Weighted(w) => Some(w),
                        _ => None,
                    };
                    let sup = |pts: &PointSet| {
                        pts.iter()
                            .map(|p| {
                                let v = arn.eval(p);
                                let mut s = v[i];
                                for (j, cj) in res.coefficients.iter().enumerate() {
                                    s -= cj * v[j];
                                }
                                let lw = weight.map_or(0.0, |w| -(deg as f64) * w.q(p));
                                (s.norm().ln() + lw).exp()
                            })
                            .fold(0.0, f64::max)
                    };
                    sup(f) / sup(&self.mesh) - 1.0
                });
                Ok(ChebResult {
                    alpha: alpha.to_vec(),
                    mode: self.mode.label(),
                    log_y,
                    y: log_y.exp(),
                    residual: rel_gap(&res),
                    iterations: res.iterations,
                    coefficients,
                    mesh_gap,
                })
            }
            ChebMode::Homogeneous => {
                let (hb, qr) = &self.blocks[deg as usize];
                let bi = hb
                    .indices()
                    .iter()
                    .position(|a| a.exponents() == alpha)
                    .expect("index inside its degree block");
                let target: Vec<C64> = (0..qr.q.nrows()).map(|x| qr.q[(x, bi)]).collect();
                let comp = qr.q.columns(0, bi).into_owned();
                let res = lawson(&target, &comp, &self.opts)?;
                let rii = qr.r[(bi, bi)].re;
                let log_y = if res.value > 0.0 && rii > 0.0 { res.value.ln() + rii.ln() } else { f64::NEG_INFINITY };
                let coefficients = if bi < DENSE_COEFFICIENTS {
                    homogeneous_coefficients(&qr.r, bi, &res.coefficients)
                } else {
                    Vec::new()
                };
                let mesh_gap = fine.map(|f| {
                    let sup = |pts: &PointSet| {
                        pts.iter()
                            .map(|p| {
                                hb.indices()[..=bi]
                                    .iter()
                                    .zip(&coefficients)
                                    .map(|(a, c)| c * eval_monomial(a, p))
                                    .sum::<C64>()
                                    .norm()
                            })
                            .fold(0.0, f64::max)
                    };
                    sup(f) / sup(&self.mesh) - 1.0
                });
                Ok(ChebResult {
                    alpha: alpha.to_vec(),
                    mode: "homogeneous",
                    log_y,
                    y: log_y.exp(),
                    residual: rel_gap(&res),
                    iterations: res.iterations,
                    coefficients,
                    mesh_gap,
                })
            }
        }
    }

    /// All constants with `|alpha| <= d`, graded order, in parallel.
    pub fn all_up_to(&self, d: u32) -> Result<Vec<ChebResult>> {
        let n = self.basis.block(d).end;
        par::try_map_range(n, |i| self.constant(self.basis.indices()[i].exponents(), None))
    }
}

fn rel_gap(r: &LawsonResult) -> f64 {
    if r.value > 0.0 {
        (r.value - r.lower_bound) / r.value
    } else {
        0.0
    }
}

/// Coefficients of `e_i - sum_j c'_j ...` for the homogeneous block from
/// `A = Q R`: the optimal polynomial is `R_ii (q_i - sum c_j q_j)` and
/// `q = A R^{-1}`.
fn homogeneous_coefficients(r: &CMatrix, i: usize, c: &[C64]) -> Vec<C64> {
    // vector v in q-coordinates, then coefficients in A-coordinates: R^{-1} v
    let mut v = vec![C64::new(0.0, 0.0); i + 1];
    v[i] = r[(i, i)];
    for (j, cj) in c.iter().enumerate() {
        v[j] = -cj * r[(i, i)];
    }
    let mut x = vec![C64::new(0.0, 0.0); i + 1];
    for row in (0..=i).rev() {
        let mut s = v[row];
        for col in row + 1..=i {
            s -= r[(row, col)] * x[col];
        }
        x[row] = s / r[(row, row)];
    }
    x
}

pub fn cheb_constant(mesh: &PointSet, mode: ChebMode, alpha: &[u32], opts: LawsonOptions, fine: Option<&PointSet>) -> Result<ChebResult> {
    let mi = MultiIndex::new(alpha.to_vec())?;
    if mi.dimension() != mesh.dim() {
        return invalid("multi-index and mesh dimensions differ");
    }
    ChebContext::new(mesh, mode, mi.degree(), opts)?.constant(alpha, fine)
}

/// `(Y(alpha + beta), Y(alpha) Y(beta))`.
pub fn submultiplicativity_probe(mesh: &PointSet, mode: ChebMode, alpha: &[u32], beta: &[u32], opts: LawsonOptions) -> Result<(f64, f64)> {
    let sum = MultiIndex::new(alpha.iter().zip(beta).map(|(a, b)| a + b).collect())?;
    if alpha.len() != beta.len() {
        return invalid("multi-index dimensions differ");
    }
    let ctx = ChebContext::new(mesh, mode, sum.degree(), opts)?;
    let ys = ctx.constant(sum.exponents(), None)?.y;
    let ya = ctx.constant(alpha, None)?.y;
    let yb = ctx.constant(beta, None)?.y;
    Ok((ys, ya * yb))
}

/// `round(d theta)` with `|alpha| = d` by largest remainders (ties to the
/// earlier coordinate).
pub fn lattice_direction(theta: &[f64], d: u32) -> Vec<u32> {
    let raw: Vec<f64> = theta.iter().map(|t| t * d as f64).collect();
    let mut alpha: Vec<u32> = raw.iter().map(|v| v.floor() as u32).collect();
    let short = d - alpha.iter().sum::<u32>();
    let mut order: Vec<usize> = (0..theta.len()).collect();
    order.sort_by(|&a, &b| (raw[b] - raw[b].floor()).total_cmp(&(raw[a] - raw[a].floor())).then(a.cmp(&b)));
    for &k in order.iter().take(short as usize) {
        alpha[k] += 1;
    }
    alpha
}

#[derive(Debug, Clone, Serialize)]
pub struct DirectionalEstimate {
    pub theta: Vec<f64>,
    /// `(d, alpha_d, tau(alpha_d) = Y(alpha_d)^{1/d})`
    pub values: Vec<(u32, Vec<u32>, f64)>,
    pub extrapolated: f64,
}

pub fn directional_constant(mesh: &PointSet, mode: ChebMode, theta: &[f64], d_list: &[u32], tail: usize, opts: LawsonOptions) -> Result<DirectionalEstimate> {
    if theta.len() != mesh.dim() {
        return invalid("direction and mesh dimensions differ");
    }
    let s: f64 = theta.iter().sum();
    if theta.iter().any(|t| !t.is_finite() || *t < 0.0) || (s - 1.0).abs() > 1e-9 {
        return invalid("direction must lie in the simplex");
    }
    if theta.contains(&0.0) {
        return Err(Error::BoundaryDirection(theta.to_vec()));
    }
    if d_list.is_empty() || d_list.windows(2).any(|w| w[1] <= w[0]) || d_list[0] == 0 {
        return invalid("degree list must be positive and increasing");
    }
    let ctx = ChebContext::new(mesh, mode, *d_list.last().unwrap(), opts)?;
    let values = par::try_map_slice(d_list, |&d| {
        let a = lattice_direction(theta, d);
        let y = ctx.constant(&a, None)?;
        Ok::<_, Error>((d, a, (y.log_y / d as f64).exp()))
    })?;
    let k = tail.clamp(1, values.len());
    let extrapolated = values.iter().rev().take(k).map(|v| v.2).sum::<f64>() / k as f64;
    Ok(DirectionalEstimate {
        theta: theta.to_vec(),
        values,
        extrapolated,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TauMean {
    pub d: u32,
    /// `(prod_{|alpha| <= d} Y)^{1/l_d}`
    pub full: f64,
    /// `(prod_{|alpha| = d} Y)^{1/(d h_d)}`
    pub slice: f64,
    pub degenerate: bool,
    pub constants: Vec<ChebResult>,
}

pub fn tau_geometric_mean(mesh: &PointSet, mode: ChebMode, d: u32, opts: LawsonOptions) -> Result<TauMean> {
    if d == 0 {
        return invalid("geometric means need d >= 1");
    }
    let ctx = ChebContext::new(mesh, mode, d, opts)?;
    let constants = ctx.all_up_to(d)?;
    Ok(tau_from_constants(mesh.dim(), d, constants))
}

pub fn tau_from_constants(dim: usize, d: u32, constants: Vec<ChebResult>) -> TauMean {
    let degenerate = constants.iter().any(|c| c.log_y == f64::NEG_INFINITY);
    let l = degree_sum(dim, d).unwrap_or(1) as f64;
    let h = count_homogeneous(dim, d).unwrap_or(1) as f64;
    let (full, slice) = if degenerate {
        (0.0, 0.0)
    } else {
        let total: f64 = constants.iter().map(|c| c.log_y).sum();
        let top: f64 = constants
            .iter()
            .filter(|c| c.alpha.iter().sum::<u32>() == d)
            .map(|c| c.log_y)
            .sum();
        ((total / l).exp(), (top / (d as f64 * h)).exp())
    };
    TauMean {
        d,
        full,
        slice,
        degenerate,
        constants,
    }
}
