//! Compact sets, weights `w = exp(-Q)`, measures, the circled lift
//! `F(E, w) = {(t, t*lambda) : lambda in E, |t| = w(lambda)}` and the cone
//! truncation radius.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// A complex number in JSON: either a bare real or `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum JsonComplex {
    Real(f64),
    Pair([f64; 2]),
}

impl From<JsonComplex> for C64 {
    fn from(z: JsonComplex) -> C64 {
        match z {
            JsonComplex::Real(x) => C64::new(x, 0.0),
            JsonComplex::Pair([re, im]) => C64::new(re, im),
        }
    }
}

/// Points of `C^N` stored row-major in one buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    dim: usize,
    coords: Vec<C64>,
}

impl PointSet {
    pub fn new(dim: usize, coords: Vec<C64>) -> Result<Self> {
        if dim == 0 {
            return invalid("points need dimension at least 1");
        }
        if !coords.len().is_multiple_of(dim) {
            return invalid("coordinate buffer length is not a multiple of the dimension");
        }
        if coords.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return invalid("non-finite coordinate");
        }
        Ok(Self { dim, coords })
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            coords: Vec::new(),
        }
    }

    pub fn from_rows(dim: usize, rows: &[Vec<C64>]) -> Result<Self> {
        if rows.iter().any(|r| r.len() != dim) {
            return invalid("point has the wrong dimension");
        }
        Self::new(dim, rows.concat())
    }

    /// One-dimensional points on the real line.
    pub fn real_line(xs: &[f64]) -> Result<Self> {
        Self::new(1, xs.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[C64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[C64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn push(&mut self, p: &[C64]) {
        assert_eq!(p.len(), self.dim);
        self.coords.extend_from_slice(p);
    }

    pub fn select(&self, idx: &[usize]) -> PointSet {
        let mut out = PointSet::empty(self.dim);
        for &i in idx {
            out.push(self.point(i));
        }
        out
    }

    pub fn coords(&self) -> &[C64] {
        &self.coords
    }
}

/// Real cones used by the unbounded case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Cone {
    HalfLine,
    Orthant { dim: usize },
    /// `{r (cos phi, sin phi) : 0 <= phi <= angle}` in `R^2`.
    Sector { angle: f64 },
}

impl Cone {
    pub fn dim(&self) -> usize {
        match self {
            Cone::HalfLine => 1,
            Cone::Orthant { dim } => *dim,
            Cone::Sector { .. } => 2,
        }
    }

    /// Surface measure of `cone ∩ unit sphere`.
    pub fn angular_measure(&self) -> f64 {
        match self {
            Cone::HalfLine => 1.0,
            Cone::Orthant { dim } => {
                let n = *dim as f64;
                2.0 * PI.powf(n / 2.0) / statrs::function::gamma::gamma(n / 2.0) / 2f64.powf(n)
            }
            Cone::Sector { angle } => *angle,
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Cone::HalfLine | Cone::Orthant { .. } => x.iter().all(|&v| v >= 0.0),
            Cone::Sector { angle } => {
                let phi = x[1].atan2(x[0]);
                (x[0] == 0.0 && x[1] == 0.0) || (-1e-15..=angle + 1e-15).contains(&phi)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Cone::Orthant { dim } if *dim == 0 => invalid("orthant needs dim >= 1"),
            Cone::Sector { angle } if !(*angle > 0.0 && *angle < PI) => {
                invalid("sector angle must lie in (0, pi)")
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SetModel {
    Interval {
        a: f64,
        b: f64,
    },
    RealBox {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    Circle {
        #[serde(default = "one")]
        radius: f64,
    },
    Torus {
        radii: Vec<f64>,
    },
    ComplexDisk {
        #[serde(default = "one")]
        radius: f64,
    },
    ComplexBall {
        dim: usize,
        #[serde(default = "one")]
        radius: f64,
        /// Interior shells at radii `s / (shells + 1)`; zero keeps only the sphere.
        #[serde(default)]
        shells: usize,
    },
    Polydisk {
        dim: usize,
        #[serde(default = "one")]
        radius: f64,
        #[serde(default)]
        torus_only: bool,
    },
    RealSimplex {
        dim: usize,
    },
    ConeTruncation {
        cone: Cone,
        t: f64,
    },
    PointCloud {
        points: Vec<Vec<JsonComplex>>,
    },
}

fn one() -> f64 {
    1.0
}

/// `n` Chebyshev-Lobatto nodes on `[a, b]` in increasing order.
pub fn chebyshev_lobatto(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (a + b)];
    }
    (0..n)
        .map(|k| {
            let c = -(PI * k as f64 / (n - 1) as f64).cos();
            // symmetric rounding so that the midpoint is exact
            let c = if 2 * k + 1 == n { 0.0 } else { c };
            0.5 * (a + b) + 0.5 * (b - a) * c
        })
        .collect()
}

fn unit_phases(n: usize) -> Vec<C64> {
    (0..n)
        .map(|k| C64::from_polar(1.0, 2.0 * PI * k as f64 / n as f64))
        .collect()
}

/// All compositions of `total` into `parts` nonnegative integers, descending lex.
fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for a in (0..=total).rev() {
        for mut rest in compositions(total - a, parts - 1) {
            rest.insert(0, a);
            out.push(rest);
        }
    }
    out
}

/// Tensor product of per-coordinate value lists.
fn tensor(lists: &[Vec<C64>]) -> Vec<Vec<C64>> {
    let mut out = vec![Vec::new()];
    for list in lists {
        let mut next = Vec::with_capacity(out.len() * list.len());
        for prefix in &out {
            for &v in list {
                let mut p = prefix.clone();
                p.push(v);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

impl SetModel {
    pub fn dim(&self) -> usize {
        match self {
            SetModel::Interval { .. } | SetModel::Circle { .. } | SetModel::ComplexDisk { .. } => 1,
            SetModel::RealBox { lo, .. } => lo.len(),
            SetModel::Torus { radii } => radii.len(),
            SetModel::ComplexBall { dim, .. }
            | SetModel::Polydisk { dim, .. }
            | SetModel::RealSimplex { dim } => *dim,
            SetModel::ConeTruncation { cone, .. } => cone.dim(),
            SetModel::PointCloud { points } => points.first().map_or(0, Vec::len),
        }
    }

    /// Invariant under `z -> e^{i phi} z`.
    pub fn is_circled(&self) -> bool {
        matches!(
            self,
            SetModel::Circle { .. }
                | SetModel::Torus { .. }
                | SetModel::ComplexDisk { .. }
                | SetModel::ComplexBall { .. }
                | SetModel::Polydisk { .. }
        )
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |r: f64, what: &str| {
            if r > 0.0 && r.is_finite() {
                Ok(())
            } else {
                invalid(format!("{what} must be positive and finite"))
            }
        };
        match self {
            SetModel::Interval { a, b } => {
                if !(a < b) || !a.is_finite() || !b.is_finite() {
                    return invalid("interval needs finite a < b");
                }
            }
            SetModel::RealBox { lo, hi } => {
                if lo.is_empty() || lo.len() != hi.len() {
                    return invalid("real-box needs matching nonempty lo/hi");
                }
                if lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
                    return invalid("real-box needs lo < hi in every coordinate");
                }
            }
            SetModel::Circle { radius } | SetModel::ComplexDisk { radius } => positive(*radius, "radius")?,
            SetModel::Torus { radii } => {
                if radii.is_empty() {
                    return invalid("torus needs at least one radius");
                }
                for r in radii {
                    positive(*r, "radius")?;
                }
            }
            SetModel::ComplexBall { dim, radius, .. } | SetModel::Polydisk { dim, radius, .. } => {
                if *dim == 0 {
                    return invalid("dimension must be at least 1");
                }
                positive(*radius, "radius")?;
            }
            SetModel::RealSimplex { dim } => {
                if *dim == 0 {
                    return invalid("dimension must be at least 1");
                }
            }
            SetModel::ConeTruncation { cone, t } => {
                cone.validate()?;
                positive(*t, "truncation radius")?;
            }
            SetModel::PointCloud { points } => {
                let n = points.first().map_or(0, Vec::len);
                if points.is_empty() || n == 0 {
                    return invalid("point-cloud needs at least one point");
                }
                if points.iter().any(|p| p.len() != n) {
                    return invalid("point-cloud points must share one dimension");
                }
            }
        }
        Ok(())
    }

    /// Deterministic point mesh. Interval-like pieces use Chebyshev-Lobatto
    /// nodes, circles equally spaced phases, disks and balls polar grids.
    pub fn mesh(&self, resolution: usize) -> Result<PointSet> {
        if resolution == 0 {
            return invalid("mesh resolution must be at least 1");
        }
        self.validate()?;
        let res = resolution;
        let dim = self.dim();
        let rows: Vec<Vec<C64>> = match self {
            SetModel::Interval { a, b } => chebyshev_lobatto(*a, *b, res)
                .into_iter()
                .map(|x| vec![C64::new(x, 0.0)])
                .collect(),
            SetModel::RealBox { lo, hi } => {
                let lists: Vec<Vec<C64>> = lo
                    .iter()
                    .zip(hi)
                    .map(|(&a, &b)| chebyshev_lobatto(a, b, res).into_iter().map(C64::from).collect())
                    .collect();
                tensor(&lists)
            }
            SetModel::Circle { radius } => unit_phases(res).into_iter().map(|p| vec![p * *radius]).collect(),
            SetModel::Torus { radii } => {
                let lists: Vec<Vec<C64>> = radii
                    .iter()
                    .map(|&r| unit_phases(res).into_iter().map(|p| p * r).collect())
                    .collect();
                tensor(&lists)
            }
            SetModel::ComplexDisk { radius } => polydisk_rows(1, *radius, res, false),
            SetModel::Polydisk {
                dim,
                radius,
                torus_only,
            } => polydisk_rows(*dim, *radius, res, *torus_only),
            SetModel::ComplexBall { dim, radius, shells } => {
                let sphere = sphere_rows(*dim, *radius, res);
                let mut rows = sphere.clone();
                if *shells > 0 {
                    for s in (1..=*shells).rev() {
                        let rho = s as f64 / (*shells + 1) as f64;
                        rows.extend(sphere.iter().map(|p| p.iter().map(|z| z * rho).collect::<Vec<_>>()));
                    }
                    rows.push(vec![C64::new(0.0, 0.0); *dim]);
                }
                rows
            }
            SetModel::RealSimplex { dim } => {
                let mut rows = Vec::new();
                for total in 0..=res {
                    for c in compositions(total, *dim) {
                        rows.push(c.iter().map(|&k| C64::new(k as f64 / res as f64, 0.0)).collect());
                    }
                }
                rows
            }
            SetModel::ConeTruncation { cone, t } => cone_rows(cone, *t, res),
            SetModel::PointCloud { points } => points
                .iter()
                .map(|p| p.iter().map(|&z| C64::from(z)).collect())
                .collect(),
        };
        PointSet::from_rows(dim, &rows)
    }
}

fn polydisk_rows(dim: usize, radius: f64, res: usize, torus_only: bool) -> Vec<Vec<C64>> {
    let torus = tensor(&vec![unit_phases(res); dim]);
    let shells = if torus_only { 1 } else { res };
    let mut rows = Vec::with_capacity(torus.len() * shells + 1);
    for k in (1..=shells).rev() {
        let rho = radius * k as f64 / res as f64;
        let rho = if torus_only { radius } else { rho };
        rows.extend(torus.iter().map(|p| p.iter().map(|z| z * rho).collect::<Vec<_>>()));
    }
    if !torus_only {
        rows.push(vec![C64::new(0.0, 0.0); dim]);
    }
    rows
}

/// Sphere grid: squared moduli on the lattice `n / res` with `|n| = res`,
/// times `res` phases per nonzero coordinate.
fn sphere_rows(dim: usize, radius: f64, res: usize) -> Vec<Vec<C64>> {
    let phases = unit_phases(res);
    let mut rows = Vec::new();
    for comp in compositions(res, dim) {
        let lists: Vec<Vec<C64>> = comp
            .iter()
            .map(|&k| {
                let r = radius * (k as f64 / res as f64).sqrt();
                if k == 0 {
                    vec![C64::new(0.0, 0.0)]
                } else {
                    phases.iter().map(|p| p * r).collect()
                }
            })
            .collect();
        rows.extend(tensor(&lists));
    }
    rows
}

fn cone_rows(cone: &Cone, t: f64, res: usize) -> Vec<Vec<C64>> {
    let radial = chebyshev_lobatto(0.0, t, res);
    match cone {
        Cone::HalfLine => radial.into_iter().map(|x| vec![C64::new(x, 0.0)]).collect(),
        Cone::Orthant { dim } => {
            let lists = vec![radial.iter().map(|&x| C64::new(x, 0.0)).collect::<Vec<_>>(); *dim];
            tensor(&lists)
                .into_iter()
                .filter(|p| p.iter().map(|z| z.re * z.re).sum::<f64>() <= t * t * (1.0 + 1e-12))
                .collect()
        }
        Cone::Sector { angle } => {
            let mut rows = vec![vec![C64::new(0.0, 0.0); 2]];
            for &r in radial.iter().skip(1) {
                for k in 0..res {
                    let phi = angle * k as f64 / (res.max(2) - 1) as f64;
                    rows.push(vec![C64::new(r * phi.cos(), 0.0), C64::new(r * phi.sin(), 0.0)]);
                }
            }
            rows
        }
    }
}

/// Growth certificate `Q(x) >= c |x|^gamma` for unbounded domains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Growth {
    pub c: f64,
    pub gamma: f64,
}

/// `Q(x) = scale * |x|^exponent + offset` (Euclidean norm), `+inf` beyond
/// `cutoff` when one is given. The default is `Q = 0`, i.e. `w = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightModel {
    #[serde(default)]
    pub scale: f64,
    #[serde(default = "two")]
    pub exponent: f64,
    #[serde(default)]
    pub offset: f64,
    #[serde(default)]
    pub cutoff: Option<f64>,
    #[serde(default)]
    pub growth: Option<Growth>,
    #[serde(default)]
    pub label: String,
}

fn two() -> f64 {
    2.0
}

impl Default for WeightModel {
    fn default() -> Self {
        Self::unit()
    }
}

impl WeightModel {
    pub fn unit() -> Self {
        Self {
            scale: 0.0,
            exponent: 2.0,
            offset: 0.0,
            cutoff: None,
            growth: None,
            label: "w=1".into(),
        }
    }

    /// `Q(x) = scale |x|^exponent`.
    pub fn power(scale: f64, exponent: f64) -> Self {
        Self {
            scale,
            exponent,
            label: format!("Q={scale}|x|^{exponent}"),
            ..Self::unit()
        }
    }

    pub fn with_growth(mut self, c: f64, gamma: f64) -> Self {
        self.growth = Some(Growth { c, gamma });
        self
    }

    pub fn with_offset(mut self, offset: f64) -> Self {
        self.offset = offset;
        self
    }

    pub fn is_unit(&self) -> bool {
        self.scale == 0.0 && self.offset == 0.0 && self.cutoff.is_none()
    }

    pub fn validate(&self) -> Result<()> {
        if !self.scale.is_finite() || !self.exponent.is_finite() || !self.offset.is_finite() {
            return invalid("weight parameters must be finite");
        }
        if self.scale < 0.0 {
            return invalid("weight scale must be nonnegative");
        }
        if self.exponent <= 0.0 {
            return invalid("weight exponent must be positive");
        }
        if let Some(g) = self.growth {
            if !(g.c > 0.0 && g.gamma > 0.0) {
                return invalid("growth certificate needs c > 0 and gamma > 0");
            }
        }
        Ok(())
    }

    pub fn q(&self, x: &[C64]) -> f64 {
        let r2: f64 = x.iter().map(|z| z.norm_sqr()).sum();
        if let Some(c) = self.cutoff {
            if r2 > c * c {
                return f64::INFINITY;
            }
        }
        if self.scale == 0.0 {
            self.offset
        } else {
            self.scale * r2.powf(0.5 * self.exponent) + self.offset
        }
    }

    pub fn w(&self, x: &[C64]) -> f64 {
        (-self.q(x)).exp()
    }

    /// Spot check `Q(x) >= c |x|^gamma` on the given points.
    pub fn check_growth(&self, points: &PointSet) -> Result<()> {
        let g = self
            .growth
            .ok_or_else(|| Error::Unsupported("weight has no growth certificate".into()))?;
        for (i, p) in points.iter().enumerate() {
            let r = p.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let lower = g.c * r.powf(g.gamma);
            if self.q(p) < lower * (1.0 - 1e-12) - 1e-300 {
                return Err(Error::InvalidArgument(format!(
                    "growth certificate fails at point {i}: Q = {} < {lower}",
                    self.q(p)
                )));
            }
        }
        Ok(())
    }
}

/// Count of mesh points with positive weight; the stand-in for the
/// nonpluripolarity of `{w > 0}` is that this reaches `m_d`.
pub fn positive_weight_count(mesh: &PointSet, w: &WeightModel) -> usize {
    mesh.iter().filter(|p| w.w(p) > 0.0).count()
}

/// Seeded samplers. `total_mass` is the importance weight carried by every draw.
#[derive(Debug, Clone, PartialEq)]
pub enum SamplerModel {
    /// Draw atom `i` with probability `masses[i] / sum(masses)`.
    Categorical { points: PointSet, masses: Vec<f64> },
    /// Uniform on the circle `|z| = radius`; mass 1.
    CircleUniform { radius: f64 },
    /// Uniform on `[a, b]` with total mass `mass`.
    IntervalUniform { a: f64, b: f64, mass: f64 },
}

impl SamplerModel {
    pub fn dim(&self) -> usize {
        match self {
            SamplerModel::Categorical { points, .. } => points.dim(),
            _ => 1,
        }
    }

    pub fn total_mass(&self) -> f64 {
        match self {
            SamplerModel::Categorical { masses, .. } => masses.iter().sum(),
            SamplerModel::CircleUniform { .. } => 1.0,
            SamplerModel::IntervalUniform { mass, .. } => *mass,
        }
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [C64]) {
        match self {
            SamplerModel::Categorical { points, masses } => {
                let total: f64 = masses.iter().sum();
                let mut u = rng.random::<f64>() * total;
                let mut pick = masses.len() - 1;
                for (i, &m) in masses.iter().enumerate() {
                    if u < m {
                        pick = i;
                        break;
                    }
                    u -= m;
                }
                out.copy_from_slice(points.point(pick));
            }
            SamplerModel::CircleUniform { radius } => {
                out[0] = C64::from_polar(*radius, 2.0 * PI * rng.random::<f64>());
            }
            SamplerModel::IntervalUniform { a, b, .. } => {
                out[0] = C64::new(a + (b - a) * rng.random::<f64>(), 0.0);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeasureModel {
    Atomic { points: PointSet, masses: Vec<f64> },
    Quadrature { nodes: PointSet, weights: Vec<f64> },
    Sampler(SamplerModel),
}

impl MeasureModel {
    pub fn atomic(points: PointSet, masses: Vec<f64>) -> Result<Self> {
        check_masses(&points, &masses)?;
        Ok(MeasureModel::Atomic { points, masses })
    }

    pub fn quadrature(nodes: PointSet, weights: Vec<f64>) -> Result<Self> {
        check_masses(&nodes, &weights)?;
        Ok(MeasureModel::Quadrature { nodes, weights })
    }

    /// Normalized arc length on `|z| = radius`: `n` equally spaced nodes,
    /// exact for trigonometric degree `<= n - 1`.
    pub fn arc(radius: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return invalid("arc quadrature needs at least one node");
        }
        let nodes = PointSet::new(1, unit_phases(n).into_iter().map(|p| p * radius).collect())?;
        Self::quadrature(nodes, vec![1.0 / n as f64; n])
    }

    /// Product of normalized arc measures on a torus.
    pub fn torus_arc(radii: &[f64], n: usize) -> Result<Self> {
        let lists: Vec<Vec<C64>> = radii
            .iter()
            .map(|&r| unit_phases(n).into_iter().map(|p| p * r).collect())
            .collect();
        let rows = tensor(&lists);
        let w = 1.0 / rows.len() as f64;
        Self::quadrature(PointSet::from_rows(radii.len(), &rows)?, vec![w; rows.len()])
    }

    /// Gauss-Legendre rule for Lebesgue measure on `[a, b]`.
    pub fn gauss_legendre(a: f64, b: f64, n: usize) -> Result<Self> {
        let (x, w) = gauss_legendre_nodes(a, b, n)?;
        Self::quadrature(PointSet::real_line(&x)?, w)
    }

    /// Gauss-Chebyshev rule for the arcsine probability measure on `[a, b]`.
    pub fn arcsine(a: f64, b: f64, n: usize) -> Result<Self> {
        if n == 0 || !(a < b) {
            return invalid("arcsine rule needs n >= 1 and a < b");
        }
        let x: Vec<f64> = (1..=n)
            .rev()
            .map(|k| 0.5 * (a + b) + 0.5 * (b - a) * (PI * (2 * k - 1) as f64 / (2 * n) as f64).cos())
            .collect();
        Self::quadrature(PointSet::real_line(&x)?, vec![1.0 / n as f64; n])
    }

    pub fn dim(&self) -> usize {
        match self {
            MeasureModel::Atomic { points, .. } => points.dim(),
            MeasureModel::Quadrature { nodes, .. } => nodes.dim(),
            MeasureModel::Sampler(s) => s.dim(),
        }
    }

    pub fn total_mass(&self) -> f64 {
        match self {
            MeasureModel::Atomic { masses, .. } | MeasureModel::Quadrature { weights: masses, .. } => {
                masses.iter().sum()
            }
            MeasureModel::Sampler(s) => s.total_mass(),
        }
    }

    /// Nodes and masses for the finite-sum kinds.
    pub fn finite(&self) -> Result<(&PointSet, &[f64])> {
        match self {
            MeasureModel::Atomic { points, masses } => Ok((points, masses)),
            MeasureModel::Quadrature { nodes, weights } => Ok((nodes, weights)),
            MeasureModel::Sampler(_) => Err(Error::Unsupported(
                "sampler measures have no finite-sum form; use the Monte Carlo routines".into(),
            )),
        }
    }

    /// `∫ f dμ` for finite-sum kinds.
    pub fn integrate(&self, f: impl Fn(&[C64]) -> f64) -> Result<f64> {
        let (pts, m) = self.finite()?;
        Ok(pts.iter().zip(m).map(|(p, &w)| w * f(p)).sum())
    }

    /// The finite-sum measure as a sampler drawing nodes by mass.
    pub fn to_sampler(&self) -> Result<SamplerModel> {
        match self {
            MeasureModel::Sampler(s) => Ok(s.clone()),
            _ => {
                let (pts, m) = self.finite()?;
                Ok(SamplerModel::Categorical {
                    points: pts.clone(),
                    masses: m.to_vec(),
                })
            }
        }
    }
}

fn check_masses(points: &PointSet, masses: &[f64]) -> Result<()> {
    if points.len() != masses.len() {
        return invalid("number of masses differs from number of points");
    }
    if points.is_empty() {
        return invalid("measure needs at least one node");
    }
    if masses.iter().any(|&m| !(m >= 0.0) || !m.is_finite()) {
        return invalid("masses must be finite and nonnegative");
    }
    Ok(())
}

pub fn gauss_legendre_nodes(a: f64, b: f64, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = NonZeroUsize::new(n).ok_or_else(|| Error::InvalidArgument("Gauss-Legendre needs n >= 1".into()))?;
    if !(a < b) {
        return invalid("Gauss-Legendre needs a < b");
    }
    let rule = GaussLegendre::new(n);
    let mut pairs: Vec<(f64, f64)> = rule
        .iter()
        .map(|(x, w)| (0.5 * (a + b) + 0.5 * (b - a) * x, 0.5 * (b - a) * w))
        .collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    Ok(pairs.into_iter().unzip())
}

/// `F(E, w)` realized on finite point lists: `phase_resolution` equally
/// spaced values of `t` with `|t| = w(lambda)` per base point.
#[derive(Debug, Clone)]
pub struct LiftedSet {
    pub base: SetModel,
    pub weight: WeightModel,
    pub phase_resolution: usize,
}

impl LiftedSet {
    pub fn new(base: SetModel, weight: WeightModel, phase_resolution: usize) -> Result<Self> {
        if phase_resolution == 0 {
            return invalid("phase resolution must be at least 1");
        }
        base.validate()?;
        weight.validate()?;
        Ok(Self {
            base,
            weight,
            phase_resolution,
        })
    }

    /// Lifted points, base-major (all phases of the first base point first).
    pub fn lift_sample(&self, base_points: &PointSet) -> Result<PointSet> {
        lift_points(base_points, &self.weight, self.phase_resolution, false)
    }

    /// Lift of the base mesh, silently dropping zero-weight points.
    pub fn lift_mesh(&self, resolution: usize) -> Result<PointSet> {
        lift_points(&self.base.mesh(resolution)?, &self.weight, self.phase_resolution, true)
    }

    /// `nu = m_lambda (x) mu` as a quadrature: each base node of mass `omega`
    /// becomes `P` circle nodes of mass `omega / P`.
    pub fn lift_measure(&self, mu: &MeasureModel) -> Result<MeasureModel> {
        let (pts, masses) = mu.finite()?;
        let lifted = lift_points(pts, &self.weight, self.phase_resolution, false)?;
        let p = self.phase_resolution;
        let weights = masses
            .iter()
            .flat_map(|&m| std::iter::repeat_n(m / p as f64, p))
            .collect();
        MeasureModel::quadrature(lifted, weights)
    }
}

pub fn lift_points(base: &PointSet, w: &WeightModel, phases: usize, drop_zero: bool) -> Result<PointSet> {
    let unit = unit_phases(phases);
    let mut out = PointSet::empty(base.dim() + 1);
    let mut buf = vec![C64::new(0.0, 0.0); base.dim() + 1];
    for (i, lambda) in base.iter().enumerate() {
        let wl = w.w(lambda);
        if wl <= 0.0 || !wl.is_finite() {
            if drop_zero {
                continue;
            }
            return Err(Error::DegenerateWeight { index: i });
        }
        for ph in &unit {
            let t = ph * wl;
            buf[0] = t;
            for (b, l) in buf[1..].iter_mut().zip(lambda) {
                *b = t * l;
            }
            out.push(&buf);
        }
    }
    Ok(out)
}

/// Polynomial density factor `R(x) = sum coef * x^alpha` on a real cone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityPolynomial {
    pub terms: Vec<(f64, Vec<u32>)>,
}

impl DensityPolynomial {
    pub fn one(dim: usize) -> Self {
        Self {
            terms: vec![(1.0, vec![0; dim])],
        }
    }

    pub fn monomial(coef: f64, alpha: Vec<u32>) -> Self {
        Self {
            terms: vec![(coef, alpha)],
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(c, a)| c * a.iter().zip(x).map(|(&k, &v)| v.powi(k as i32)).product::<f64>())
            .sum()
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|(_, a)| a.iter().sum()).max().unwrap_or(0)
    }
}

/// Upper bound for `∫_{Γ, |x| >= T} exp(-(c/2) d |x|^gamma) |R(x)| dx`.
pub fn cone_tail_bound(cone: &Cone, growth: Growth, r: &DensityPolynomial, degree: u32, t: f64) -> f64 {
    use statrs::function::gamma::{gamma, gamma_ur};
    let beta = 0.5 * growth.c * degree.max(1) as f64;
    let n = cone.dim() as f64;
    r.terms
        .iter()
        .map(|(coef, alpha)| {
            let s = alpha.iter().sum::<u32>() as f64 + n;
            let a = s / growth.gamma;
            let x = beta * t.powf(growth.gamma);
            let upper = if x > 0.0 { gamma_ur(a, x) * gamma(a) } else { gamma(a) };
            coef.abs() * cone.angular_measure() / growth.gamma * beta.powf(-a) * upper
        })
        .sum()
}

/// Smallest `T` (to bisection accuracy) whose tail bound at working degree
/// `degree` is at most `tol`. The decay constant is `c/2` from the growth
/// certificate, a conservative choice valid for all large degrees.
pub fn truncate_cone(cone: &Cone, weight: &WeightModel, r: &DensityPolynomial, degree: u32, tol: f64) -> Result<f64> {
    let growth = weight
        .growth
        .ok_or_else(|| Error::Unsupported("cone truncation needs a growth certificate (c, gamma)".into()))?;
    if !(tol > 0.0) {
        return invalid("tolerance must be positive");
    }
    cone.validate()?;
    let tail = |t: f64| cone_tail_bound(cone, growth, r, degree, t);
    if tail(0.0) <= tol {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    while tail(hi) > tol {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Degenerate("tail bound does not decay".into()));
        }
    }
    let mut lo = if hi > 1.0 { hi / 2.0 } else { 0.0 };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if tail(mid) > tol {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    Ok(hi)
}

/// JSON problem description consumed by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    #[serde(default = "schema_version")]
    pub schema: u32,
    pub set: SetModel,
    #[serde(default)]
    pub weight: WeightModel,
    #[serde(default)]
    pub measure: Option<MeasureSpec>,
}

fn schema_version() -> u32 {
    1
}

/// Serializable measure recipes. `nodes = None` lets callers choose a rule
/// size exact for the working degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MeasureSpec {
    Atoms {
        points: Vec<Vec<JsonComplex>>,
        masses: Vec<f64>,
    },
    Arc {
        #[serde(default = "one")]
        radius: f64,
        #[serde(default)]
        nodes: Option<usize>,
    },
    TorusArc {
        radii: Vec<f64>,
        #[serde(default)]
        nodes: Option<usize>,
    },
    Lebesgue {
        a: f64,
        b: f64,
        #[serde(default)]
        nodes: Option<usize>,
    },
    Arcsine {
        a: f64,
        b: f64,
        #[serde(default)]
        nodes: Option<usize>,
    },
    UniformCircle {
        #[serde(default = "one")]
        radius: f64,
    },
    UniformInterval {
        a: f64,
        b: f64,
        #[serde(default = "one")]
        mass: f64,
    },
}

impl MeasureSpec {
    pub fn is_sampler(&self) -> bool {
        matches!(self, MeasureSpec::UniformCircle { .. } | MeasureSpec::UniformInterval { .. })
    }

    /// Realize the measure; `auto_nodes` is used when the recipe leaves the
    /// rule size open.
    pub fn build(&self, auto_nodes: usize) -> Result<MeasureModel> {
        match self {
            MeasureSpec::Atoms { points, masses } => {
                let dim = points.first().map_or(0, Vec::len);
                let rows: Vec<Vec<C64>> = points.iter().map(|p| p.iter().map(|&z| z.into()).collect()).collect();
                MeasureModel::atomic(PointSet::from_rows(dim, &rows)?, masses.clone())
            }
            MeasureSpec::Arc { radius, nodes } => MeasureModel::arc(*radius, nodes.unwrap_or(auto_nodes)),
            MeasureSpec::TorusArc { radii, nodes } => MeasureModel::torus_arc(radii, nodes.unwrap_or(auto_nodes)),
            MeasureSpec::Lebesgue { a, b, nodes } => MeasureModel::gauss_legendre(*a, *b, nodes.unwrap_or(auto_nodes)),
            MeasureSpec::Arcsine { a, b, nodes } => MeasureModel::arcsine(*a, *b, nodes.unwrap_or(auto_nodes)),
            MeasureSpec::UniformCircle { radius } => Ok(MeasureModel::Sampler(SamplerModel::CircleUniform { radius: *radius })),
            MeasureSpec::UniformInterval { a, b, mass } => {
                if !(a < b) || !(*mass > 0.0) {
                    return invalid("uniform interval needs a < b and positive mass");
                }
                Ok(MeasureModel::Sampler(SamplerModel::IntervalUniform { a: *a, b: *b, mass: *mass }))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn close(a: C64, b: C64) -> bool {
        (a - b).norm() < 1e-14
    }

    #[test]
    fn mesh_examples() {
        let c = SetModel::Circle { radius: 1.0 }.mesh(4).unwrap();
        let expect = [C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(-1.0, 0.0), C64::new(0.0, -1.0)];
        for (p, e) in c.iter().zip(expect) {
            assert!(close(p[0], e));
        }
        let i = SetModel::Interval { a: -1.0, b: 1.0 }.mesh(3).unwrap();
        let xs: Vec<f64> = i.iter().map(|p| p[0].re).collect();
        assert_eq!(xs, vec![-1.0, 0.0, 1.0]);
        let pd = SetModel::Polydisk { dim: 2, radius: 1.0, torus_only: false }.mesh(5).unwrap();
        // r^2 torus points on each of r shells plus the origin
        assert_eq!(pd.len(), 5 * 25 + 1);
        let tor = SetModel::Polydisk { dim: 2, radius: 1.0, torus_only: true }.mesh(5).unwrap();
        assert_eq!(tor.len(), 25);
        assert!(tor.iter().all(|p| p.iter().all(|z| (z.norm() - 1.0).abs() < 1e-14)));
    }

    #[test]
    fn ball_mesh_is_on_sphere() {
        let b = SetModel::ComplexBall { dim: 2, radius: 1.0, shells: 0 }.mesh(6).unwrap();
        // 7 modulus pairs; the two axis pairs carry 6 phases, the others 36
        assert_eq!(b.len(), 2 * 6 + 5 * 36);
        for p in b.iter() {
            let r2: f64 = p.iter().map(|z| z.norm_sqr()).sum();
            assert_relative_eq!(r2, 1.0, epsilon = 1e-14);
        }
        let s = SetModel::ComplexBall { dim: 2, radius: 1.0, shells: 2 }.mesh(6).unwrap();
        assert_eq!(s.len(), 3 * b.len() + 1);
    }

    #[test]
    fn other_meshes_are_nonempty_and_bounded() {
        let sets = vec![
            SetModel::RealBox { lo: vec![0.0, -1.0], hi: vec![1.0, 1.0] },
            SetModel::Torus { radii: vec![1.0, 2.0] },
            SetModel::ComplexDisk { radius: 2.0 },
            SetModel::RealSimplex { dim: 2 },
            SetModel::ConeTruncation { cone: Cone::HalfLine, t: 5.0 },
            SetModel::ConeTruncation { cone: Cone::Orthant { dim: 2 }, t: 3.0 },
            SetModel::ConeTruncation { cone: Cone::Sector { angle: 1.0 }, t: 3.0 },
            SetModel::PointCloud { points: vec![vec![JsonComplex::Pair([1.0, 2.0])]] },
        ];
        for s in sets {
            for res in [1, 2, 5] {
                let m = s.mesh(res).unwrap();
                assert!(!m.is_empty(), "{s:?} at {res}");
                assert!(m.coords().iter().all(|z| z.norm() < 10.0));
            }
        }
        assert_eq!(SetModel::RealSimplex { dim: 2 }.mesh(2).unwrap().len(), 6);
        assert!(SetModel::Circle { radius: 1.0 }.mesh(0).is_err());
        assert!(SetModel::Interval { a: 1.0, b: 0.0 }.mesh(3).is_err());
    }

    #[test]
    fn json_round_trip_and_unknown_kind() {
        let s: SetModel = serde_json::from_str(r#"{"kind":"complex-ball","dim":2}"#).unwrap();
        assert_eq!(s, SetModel::ComplexBall { dim: 2, radius: 1.0, shells: 0 });
        assert!(serde_json::from_str::<SetModel>(r#"{"kind":"moebius-strip"}"#).is_err());
        let p: ProblemSpec = serde_json::from_str(
            r#"{"set":{"kind":"interval","a":-1,"b":1},"weight":{"scale":1},"measure":{"kind":"lebesgue","a":-1,"b":1}}"#,
        )
        .unwrap();
        assert_eq!(p.weight.exponent, 2.0);
        let back: ProblemSpec = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn lift_examples() {
        let unit = WeightModel::unit();
        let zero = PointSet::new(1, vec![C64::new(0.0, 0.0)]).unwrap();
        let l = LiftedSet::new(SetModel::Circle { radius: 1.0 }, unit.clone(), 1).unwrap();
        let p = l.lift_sample(&zero).unwrap();
        assert_eq!(p.point(0), &[C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);

        let expw = WeightModel::power(1.0, 1.0);
        let two = PointSet::new(1, vec![C64::new(2.0, 0.0)]).unwrap();
        let l = LiftedSet::new(SetModel::Circle { radius: 1.0 }, expw, 1).unwrap();
        let p = l.lift_sample(&two).unwrap();
        let e2 = (-2.0f64).exp();
        assert_relative_eq!(p.point(0)[0].re, e2, epsilon = 1e-16);
        assert_relative_eq!(p.point(0)[1].re, 2.0 * e2, epsilon = 1e-16);

        let zo = PointSet::real_line(&[0.0, 1.0]).unwrap();
        let l = LiftedSet::new(SetModel::Circle { radius: 1.0 }, unit, 2).unwrap();
        let p = l.lift_sample(&zo).unwrap();
        assert_eq!(p.len(), 4);
        assert!(p.iter().all(|q| (q[0].norm() - 1.0).abs() < 1e-15));
    }

    #[test]
    fn zero_weight_cannot_lift() {
        let w = WeightModel { cutoff: Some(0.5), ..WeightModel::unit() };
        let pts = PointSet::real_line(&[0.0, 1.0]).unwrap();
        let l = LiftedSet::new(SetModel::Interval { a: -1.0, b: 1.0 }, w, 3).unwrap();
        assert_eq!(l.lift_sample(&pts), Err(Error::DegenerateWeight { index: 1 }));
        let m = l.lift_mesh(5).unwrap();
        // only -0.5.., 0 survive: nodes -1, -0.707, 0, 0.707, 1 -> just 0
        assert_eq!(m.len(), 3);
    }

    #[test]
    fn lift_measure_examples() {
        let delta = MeasureModel::atomic(PointSet::real_line(&[0.0]).unwrap(), vec![1.0]).unwrap();
        let l = LiftedSet::new(SetModel::Circle { radius: 1.0 }, WeightModel::unit(), 3).unwrap();
        let nu = l.lift_measure(&delta).unwrap();
        let (pts, w) = nu.finite().unwrap();
        assert_eq!(pts.len(), 3);
        for (p, &m) in pts.iter().zip(w) {
            assert_relative_eq!(m, 1.0 / 3.0);
            assert_relative_eq!(p[0].norm(), 1.0, epsilon = 1e-15);
        }
        let mu = MeasureModel::atomic(PointSet::real_line(&[0.0, 1.0, 2.0]).unwrap(), vec![0.5, 1.0, 2.0]).unwrap();
        let nu = l.lift_measure(&mu).unwrap();
        assert_relative_eq!(nu.total_mass(), mu.total_mass(), epsilon = 1e-15);
        let tt = nu.integrate(|p| p[0].norm_sqr()).unwrap();
        assert_relative_eq!(tt, mu.total_mass(), epsilon = 1e-14);
    }

    #[test]
    fn quadrature_rules() {
        let gl = MeasureModel::gauss_legendre(-1.0, 1.0, 5).unwrap();
        assert_relative_eq!(gl.integrate(|p| p[0].re.powi(8)).unwrap(), 2.0 / 9.0, epsilon = 1e-14);
        let asn = MeasureModel::arcsine(-1.0, 1.0, 4).unwrap();
        assert_relative_eq!(asn.integrate(|p| p[0].re.powi(2)).unwrap(), 0.5, epsilon = 1e-14);
        assert_relative_eq!(asn.integrate(|p| p[0].re.powi(4)).unwrap(), 0.375, epsilon = 1e-14);
        let arc = MeasureModel::arc(1.0, 7).unwrap();
        assert_relative_eq!(arc.integrate(|p| p[0].powi(3).re).unwrap(), 0.0, epsilon = 1e-14);
        assert!(MeasureModel::Sampler(SamplerModel::CircleUniform { radius: 1.0 }).finite().is_err());
    }

    #[test]
    fn truncation_examples() {
        let cone = Cone::HalfLine;
        let r = DensityPolynomial::one(1);
        let lin = WeightModel::power(1.0, 1.0).with_growth(1.0, 1.0);
        let t1 = truncate_cone(&cone, &lin, &r, 5, 1e-12).unwrap();
        // closed form: ∫_T^∞ e^{-2.5 x} dx = e^{-2.5 T} / 2.5
        let closed = (-2.5 * t1).exp() / 2.5;
        assert!(closed <= 1e-12 * (1.0 + 1e-9));
        assert_relative_eq!(closed, 1e-12, max_relative = 1e-6);
        let quad = WeightModel::power(1.0, 2.0).with_growth(1.0, 2.0);
        let t2 = truncate_cone(&cone, &quad, &r, 5, 1e-12).unwrap();
        assert!(t2 < t1);
        let t3 = truncate_cone(&cone, &lin, &r, 5, 1e-15).unwrap();
        assert!(t3 >= t1);
        assert!(matches!(
            truncate_cone(&cone, &WeightModel::power(1.0, 1.0), &r, 5, 1e-12),
            Err(Error::Unsupported(_))
        ));
        assert_relative_eq!(Cone::Orthant { dim: 2 }.angular_measure(), PI / 2.0, epsilon = 1e-14);
    }

    #[test]
    fn growth_spot_check() {
        let w = WeightModel::power(0.5, 1.0).with_growth(0.5, 1.0);
        let pts = SetModel::ConeTruncation { cone: Cone::HalfLine, t: 10.0 }.mesh(20).unwrap();
        assert!(w.check_growth(&pts).is_ok());
        let bad = WeightModel::power(0.1, 1.0).with_growth(0.5, 1.0);
        assert!(bad.check_growth(&pts).is_err());
    }
}
