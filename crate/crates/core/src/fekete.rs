//! Mesh-restricted Fekete search (greedy start, then single-point exchange)
//! and the diameter series built on it.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::discrete_ortho::{homogeneous_frame, Frame, GradedArnoldi};
use crate::domain_models::{MeasureModel, PointSet, WeightModel};
use crate::error::{invalid, Error, Result};
use crate::graded_basis::{count_homogeneous, count_monomials, degree_sum, enumerate_basis, GradedBasis, HomogeneousBasis};
use crate::linalg::CMatrix;
use crate::logvalue::LogValue;
use crate::par;

/// Scores closer than this (in log) count as ties; ties go to the lowest index.
const TIE: f64 = 1e-11;
/// Minimal log improvement for an exchange.
const IMPROVE: f64 = 1e-12;
const RECOMPUTE_EVERY: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub enum FeketeMode {
    Plain,
    /// `VDM * prod w^{|alpha(n)|}`
    Weighted(WeightModel),
    /// Degree-`d` homogeneous monomials in the mesh's own dimension.
    Homogeneous { degree: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchParams {
    pub restarts: usize,
    pub seed: u64,
    /// Cap on the number of exchanges per restart.
    pub max_swaps: usize,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self {
            restarts: 1,
            seed: 0,
            max_swaps: 10_000,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchMeta {
    pub seed: u64,
    pub restart: usize,
    pub restarts: usize,
    pub swaps: usize,
    /// Log value after the greedy start and after every accepted exchange.
    pub history: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PointConfiguration {
    pub indices: Vec<usize>,
    pub points: PointSet,
    pub value: LogValue,
    pub meta: SearchMeta,
}

/// Orthonormal frame for the chosen determinant on the mesh.
pub fn build_frame(mesh: &PointSet, n: usize, mode: &FeketeMode) -> Result<Frame> {
    if n == 0 {
        return invalid("configuration size must be at least 1");
    }
    if mesh.len() < n {
        return invalid(format!("mesh has {} points but {n} are requested", mesh.len()));
    }
    match mode {
        FeketeMode::Plain => {
            let basis = GradedBasis::covering(mesh.dim(), n)?;
            Ok(GradedArnoldi::new(mesh, &basis, n, &vec![0.0; mesh.len()])?.frame())
        }
        FeketeMode::Weighted(w) => {
            let basis = GradedBasis::covering(mesh.dim(), n)?;
            let k = basis.indices()[n - 1].degree() as f64;
            let logw: Vec<f64> = mesh.iter().map(|p| -k * w.q(p)).collect();
            Ok(GradedArnoldi::new(mesh, &basis, n, &logw)?.frame())
        }
        FeketeMode::Homogeneous { degree } => {
            let basis = HomogeneousBasis::new(mesh.dim(), *degree)?;
            if basis.len() != n {
                return invalid(format!("homogeneous degree {degree} needs n = h_d = {}", basis.len()));
            }
            homogeneous_frame(mesh, &basis, None)
        }
    }
}

/// Gaussian elimination on the rows of `Q`, choosing at step `j` the row
/// with the largest `|residual_j| * exp(row_log)`. With an rng, the choice
/// is uniform among rows scoring at least half the maximum.
fn greedy_start(frame: &Frame, rng: Option<&mut ChaCha8Rng>) -> Result<Vec<usize>> {
    let (m, n) = frame.q.shape();
    let mut r = frame.q.clone();
    let mut used = vec![false; m];
    let mut chosen = Vec::with_capacity(n);
    let mut rng = rng;
    for j in 0..n {
        let scores: Vec<f64> = (0..m)
            .map(|x| {
                if used[x] {
                    f64::NEG_INFINITY
                } else {
                    r[(x, j)].norm().ln() + frame.row_log[x]
                }
            })
            .collect();
        let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if best == f64::NEG_INFINITY || best.is_nan() {
            return Err(Error::Degenerate(
                "every configuration on this mesh has zero Vandermonde value".into(),
            ));
        }
        let p = match rng.as_deref_mut() {
            None => scores.iter().position(|&s| s >= best - TIE).unwrap(),
            Some(g) => {
                let pool: Vec<usize> = (0..m).filter(|&x| scores[x] >= best - std::f64::consts::LN_2).collect();
                pool[g.random_range(0..pool.len())]
            }
        };
        used[p] = true;
        chosen.push(p);
        let piv = r[(p, j)];
        for x in 0..m {
            if used[x] {
                continue;
            }
            let f = r[(x, j)] / piv;
            if f == C64::new(0.0, 0.0) {
                continue;
            }
            for c in j + 1..n {
                let v = r[(p, c)];
                r[(x, c)] -= f * v;
            }
        }
    }
    Ok(chosen)
}

/// `C = Q Q_S^{-1}`: row `x`, column `j` is the factor by which the
/// determinant changes when `S_j` is replaced by `x`.
fn exchange_matrix(frame: &Frame, s: &[usize]) -> Result<CMatrix> {
    let n = s.len();
    let qs = CMatrix::from_fn(n, n, |i, j| frame.q[(s[i], j)]);
    let inv = qs
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("selected rows are singular".into()))?;
    Ok(&frame.q * inv)
}

fn exchange(frame: &Frame, s: &mut [usize], max_swaps: usize, history: &mut Vec<f64>) -> Result<usize> {
    let m = frame.nrows();
    let n = s.len();
    let mut c = exchange_matrix(frame, s)?;
    let mut in_s = vec![false; m];
    for &x in s.iter() {
        in_s[x] = true;
    }
    let mut current = frame.subset_value(s).log_magnitude;
    let mut swaps = 0;
    while swaps < max_swaps {
        let mut best = (IMPROVE, usize::MAX, usize::MAX);
        for x in 0..m {
            if in_s[x] || frame.row_log[x] == f64::NEG_INFINITY {
                continue;
            }
            for j in 0..n {
                let g = c[(x, j)].norm().ln() + frame.row_log[x] - frame.row_log[s[j]];
                if g > best.0 + TIE {
                    best = (g, x, j);
                }
            }
        }
        if best.1 == usize::MAX {
            break;
        }
        let (_, x, j) = best;
        in_s[s[j]] = false;
        in_s[x] = true;
        s[j] = x;
        swaps += 1;
        if swaps % RECOMPUTE_EVERY == 0 {
            c = exchange_matrix(frame, s)?;
        } else {
            let cx: Vec<C64> = (0..n).map(|k| c[(x, k)]).collect();
            let piv = cx[j];
            let col: Vec<C64> = (0..m).map(|y| c[(y, j)] / piv).collect();
            for k in 0..n {
                let delta = if k == j { cx[k] - 1.0 } else { cx[k] };
                if delta == C64::new(0.0, 0.0) {
                    continue;
                }
                for y in 0..m {
                    c[(y, k)] -= col[y] * delta;
                }
            }
        }
        let v = frame.subset_value(s).log_magnitude;
        if v < current - 1e-9 * current.abs().max(1.0) {
            // rank-one drift; rebuild and continue from the exact state
            c = exchange_matrix(frame, s)?;
        }
        current = v;
        history.push(v);
    }
    Ok(swaps)
}

fn run_restart(frame: &Frame, params: &SearchParams, restart: usize) -> Result<(Vec<usize>, LogValue, SearchMeta)> {
    let seed = params.seed.wrapping_add(restart as u64);
    let mut s = if restart == 0 {
        greedy_start(frame, None)?
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        greedy_start(frame, Some(&mut rng))?
    };
    let mut history = vec![frame.subset_value(&s).log_magnitude];
    let swaps = exchange(frame, &mut s, params.max_swaps, &mut history)?;
    let value = frame.subset_value(&s);
    Ok((
        s,
        value,
        SearchMeta {
            seed,
            restart,
            restarts: params.restarts,
            swaps,
            history,
        },
    ))
}

/// Best configuration over `restarts` starts on a prepared frame. Restart 0
/// is the deterministic greedy start; the others are randomized from
/// `seed + restart`. Ties in value go to the smaller seed.
pub fn search_frame(frame: &Frame, params: &SearchParams) -> Result<(Vec<usize>, LogValue, SearchMeta)> {
    let restarts = params.restarts.max(1);
    let runs = par::try_map_range(restarts, |r| run_restart(frame, params, r))?;
    let best = runs
        .into_iter()
        .reduce(|a, b| {
            if b.1.log_magnitude > a.1.log_magnitude || (b.1.log_magnitude == a.1.log_magnitude && b.2.seed < a.2.seed) {
                b
            } else {
                a
            }
        })
        .expect("at least one restart");
    if best.1.is_zero() {
        return Err(Error::Degenerate("all configurations have value zero".into()));
    }
    Ok(best)
}

pub fn fekete_search(mesh: &PointSet, n: usize, mode: &FeketeMode, params: &SearchParams) -> Result<PointConfiguration> {
    let frame = build_frame(mesh, n, mode)?;
    let (indices, value, meta) = search_frame(&frame, params)?;
    Ok(PointConfiguration {
        points: mesh.select(&indices),
        indices,
        value,
        meta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiameterKind {
    Plain,
    Homogeneous,
    Weighted,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiameterEntry {
    pub d: u32,
    /// Configuration size: `m_d`, or `h_d` for the homogeneous kind.
    pub n: u64,
    /// Root normalizer: `l_d`, or `d h_d` for the homogeneous kind.
    pub normalizer: u64,
    pub log_max: f64,
    pub root: f64,
    pub swaps: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiameterSeries {
    pub kind: DiameterKind,
    pub entries: Vec<DiameterEntry>,
    /// Mean of the last three roots.
    pub extrapolated: f64,
    /// Spread (max - min) of the last three roots.
    pub uncertainty: f64,
}

impl DiameterSeries {
    fn from_entries(kind: DiameterKind, entries: Vec<DiameterEntry>) -> Self {
        let tail: Vec<f64> = entries.iter().rev().take(3).map(|e| e.root).collect();
        let extrapolated = tail.iter().sum::<f64>() / tail.len().max(1) as f64;
        let uncertainty = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max) - tail.iter().copied().fold(f64::INFINITY, f64::min);
        Self {
            kind,
            entries,
            extrapolated,
            uncertainty: if tail.is_empty() { 0.0 } else { uncertainty },
        }
    }
}

/// Fekete estimate at a single degree.
pub fn diameter_entry(mesh: &PointSet, kind: DiameterKind, weight: &WeightModel, d: u32, params: &SearchParams) -> Result<DiameterEntry> {
    if d == 0 {
        return invalid("diameter entries start at degree 1");
    }
    let dim = mesh.dim();
    let (n, normalizer, mode) = match kind {
        DiameterKind::Plain => (count_monomials(dim, d)?, degree_sum(dim, d)?, FeketeMode::Plain),
        DiameterKind::Weighted => (count_monomials(dim, d)?, degree_sum(dim, d)?, FeketeMode::Weighted(weight.clone())),
        DiameterKind::Homogeneous => {
            let h = count_homogeneous(dim, d)?;
            (h, h * d as u64, FeketeMode::Homogeneous { degree: d })
        }
    };
    let cfg = fekete_search(mesh, n as usize, &mode, params)?;
    Ok(DiameterEntry {
        d,
        n,
        normalizer,
        log_max: cfg.value.log_magnitude,
        root: (cfg.value.log_magnitude / normalizer as f64).exp(),
        swaps: cfg.meta.swaps,
    })
}

/// Root estimates for `d = 1..=d_max` on one mesh.
pub fn diameter_series(mesh: &PointSet, kind: DiameterKind, weight: &WeightModel, d_max: u32, params: &SearchParams) -> Result<DiameterSeries> {
    if d_max == 0 {
        return invalid("d_max must be at least 1");
    }
    let mut entries = Vec::with_capacity(d_max as usize);
    for d in 1..=d_max {
        entries.push(diameter_entry(mesh, kind, weight, d, params)?);
    }
    Ok(DiameterSeries::from_entries(kind, entries))
}

#[derive(Debug, Clone, Serialize)]
pub struct LiftRow {
    pub d: u32,
    /// `log max |W|` over the base mesh.
    pub log_weighted: f64,
    /// `log max |VDMH_d|` over the lifted mesh.
    pub log_homogeneous: f64,
    pub log_gap: f64,
    /// `W^{1/l_d}`
    pub delta_w: f64,
    /// `(VDMH^{1/(d h_d)})^{(N+1)/N}`
    pub lifted_root: f64,
    pub relative_gap: f64,
}

/// Weighted maxima on `E` against homogeneous maxima on the lift `F(E, w)`,
/// searched independently on the same base mesh.
pub fn lift_consistency(base_mesh: &PointSet, w: &WeightModel, d_max: u32, phase_resolution: usize, params: &SearchParams) -> Result<Vec<LiftRow>> {
    let n_dim = base_mesh.dim();
    let mut rows = Vec::new();
    for d in 1..=d_max {
        if phase_resolution < 2 * d as usize + 1 {
            return invalid("phase resolution must be at least 2d + 1");
        }
        let m = count_monomials(n_dim, d)?;
        let l = degree_sum(n_dim, d)?;
        let h = count_homogeneous(n_dim + 1, d)?;
        // exponent bookkeeping: l_d = N/(N+1) d h_d^{(N+1)}
        debug_assert_eq!((n_dim as u64 + 1) * l, n_dim as u64 * d as u64 * h);
        let lifted = crate::domain_models::lift_points(base_mesh, w, phase_resolution, true)?;
        let weighted = fekete_search(base_mesh, m as usize, &FeketeMode::Weighted(w.clone()), params)?;
        let homog = fekete_search(&lifted, h as usize, &FeketeMode::Homogeneous { degree: d }, params)?;
        let lw = weighted.value.log_magnitude;
        let lh = homog.value.log_magnitude;
        let delta_w = (lw / l as f64).exp();
        let lifted_root = ((lh / (d as f64 * h as f64)) * (n_dim as f64 + 1.0) / n_dim as f64).exp();
        rows.push(LiftRow {
            d,
            log_weighted: lw,
            log_homogeneous: lh,
            log_gap: (lw - lh).abs(),
            delta_w,
            lifted_root,
            relative_gap: (delta_w / lifted_root - 1.0).abs(),
        });
    }
    Ok(rows)
}

/// Uniform probability measure on a configuration.
pub fn fekete_measure(config: &PointConfiguration) -> Result<MeasureModel> {
    let n = config.points.len();
    if n == 0 {
        return invalid("empty configuration");
    }
    MeasureModel::atomic(config.points.clone(), vec![1.0 / n as f64; n])
}

/// `∫ z^alpha dmu` for all `|alpha| <= max_degree`, in graded order.
pub fn monomial_moments(mu: &MeasureModel, max_degree: u32) -> Result<Vec<(Vec<u32>, C64)>> {
    let (pts, masses) = mu.finite()?;
    let basis = enumerate_basis(pts.dim(), max_degree)?;
    let n = basis.len();
    let mut acc = vec![C64::new(0.0, 0.0); n];
    let mut buf = vec![C64::new(0.0, 0.0); n];
    for (p, &w) in pts.iter().zip(masses) {
        basis.eval_into(p, n, &mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b * w;
        }
    }
    Ok(basis.indices().iter().map(|a| a.exponents().to_vec()).zip(acc).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain_models::SetModel;
    use crate::vandermonde::{vdm_auto, vdmh};
    use approx::assert_relative_eq;

    fn line(xs: &[f64]) -> PointSet {
        PointSet::real_line(xs).unwrap()
    }

    #[test]
    fn five_point_interval() {
        let mesh = line(&[-1.0, -0.5, 0.0, 0.5, 1.0]);
        let cfg = fekete_search(&mesh, 3, &FeketeMode::Plain, &SearchParams::default()).unwrap();
        let mut xs: Vec<f64> = cfg.points.iter().map(|p| p[0].re).collect();
        xs.sort_by(f64::total_cmp);
        assert_eq!(xs, vec![-1.0, 0.0, 1.0]);
        assert_relative_eq!(cfg.value.magnitude(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn pair_is_diameter() {
        let mesh = line(&[0.3, -0.2, 0.9, 0.1]);
        let cfg = fekete_search(&mesh, 2, &FeketeMode::Plain, &SearchParams::default()).unwrap();
        assert_relative_eq!(cfg.value.magnitude(), 1.1, epsilon = 1e-12);
    }

    #[test]
    fn circle_roots_of_unity() {
        for (n, p) in [(3, 12), (4, 12), (4, 8)] {
            let mesh = SetModel::Circle { radius: 1.0 }.mesh(p).unwrap();
            let cfg = fekete_search(&mesh, n, &FeketeMode::Plain, &SearchParams::default()).unwrap();
            assert_relative_eq!(cfg.value.log_magnitude, 0.5 * n as f64 * (n as f64).ln(), epsilon = 1e-10);
            let direct = vdm_auto(&cfg.points).unwrap();
            assert_relative_eq!(direct.log_magnitude, cfg.value.log_magnitude, epsilon = 1e-12);
        }
    }

    #[test]
    fn restarts_are_deterministic() {
        let mesh = SetModel::Interval { a: -1.0, b: 1.0 }.mesh(41).unwrap();
        let params = SearchParams { restarts: 4, seed: 11, ..Default::default() };
        let a = fekete_search(&mesh, 7, &FeketeMode::Plain, &params).unwrap();
        let b = fekete_search(&mesh, 7, &FeketeMode::Plain, &params).unwrap();
        assert_eq!(a.indices, b.indices);
        assert_eq!(a.value, b.value);
        assert!(a.meta.history.windows(2).all(|w| w[1] >= w[0] - 1e-9));
    }

    #[test]
    fn homogeneous_value_is_reevaluated_exactly() {
        let mesh = SetModel::ComplexBall { dim: 2, radius: 1.0, shells: 1 }.mesh(4).unwrap();
        let cfg = fekete_search(&mesh, 4, &FeketeMode::Homogeneous { degree: 3 }, &SearchParams::default()).unwrap();
        let direct = vdmh(&cfg.points, 3).unwrap();
        assert_relative_eq!(direct.log_magnitude, cfg.value.log_magnitude, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_weight_is_reported() {
        let mesh = line(&[2.0, 3.0, 4.0]);
        let w = WeightModel { cutoff: Some(1.0), ..WeightModel::unit() };
        assert!(fekete_search(&mesh, 2, &FeketeMode::Weighted(w), &SearchParams::default()).is_err());
    }

    #[test]
    fn measure_moments() {
        let mesh = line(&[-1.0, -0.5, 0.0, 0.5, 1.0]);
        let cfg = fekete_search(&mesh, 3, &FeketeMode::Plain, &SearchParams::default()).unwrap();
        let mu = fekete_measure(&cfg).unwrap();
        assert_relative_eq!(mu.total_mass(), 1.0, epsilon = 1e-15);
        let mom = monomial_moments(&mu, 4).unwrap();
        assert_relative_eq!(mom[2].1.re, 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn lift_gap_small_degrees() {
        let mesh = SetModel::Interval { a: -1.0, b: 1.0 }.mesh(31).unwrap();
        let rows = lift_consistency(&mesh, &WeightModel::power(1.0, 2.0), 4, 9, &SearchParams::default()).unwrap();
        for r in rows {
            assert!(r.log_gap <= 1e-10, "{r:?}");
        }
    }
}
