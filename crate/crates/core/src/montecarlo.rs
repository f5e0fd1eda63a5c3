//! Sampler-based estimates of `Z_d`, brute-force atomic oracles and the
//! large-deviation probe. All sums are accumulated in log-domain.
//!
//! Sampling runs on a fixed number of lanes, each with its own ChaCha8
//! stream seeded by `seed + lane`, and lanes are merged in order, so the
//! output does not depend on the thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::domain_models::{PointSet, SamplerModel, WeightModel};
use crate::error::{invalid, Error, Result};
use crate::graded_basis::{count_monomials, degree_sum, enumerate_basis, GradedBasis};
use crate::logvalue::{log_sum_exp, LogValue};
use crate::par;
use crate::vandermonde::vdm;

pub const LANES: usize = 16;
pub const MIN_SAMPLES: usize = 100;
/// Largest number of tuples `M^{m_d}` the exact oracle will enumerate.
pub const EXACT_CAP: u128 = 1 << 24;

#[derive(Debug, Clone, Serialize)]
pub struct McEstimate {
    pub mean: LogValue,
    /// Standard error relative to the mean.
    pub rel_stderr: f64,
    pub samples: usize,
    pub zero_samples: usize,
    pub seed: u64,
    pub degenerate: bool,
}

impl McEstimate {
    /// `mean +- k stderr` contains `value`.
    pub fn covers(&self, value: f64, k: f64) -> bool {
        let m = self.mean.magnitude();
        (value - m).abs() <= k * self.rel_stderr * m
    }
}

fn lane_sizes(samples: usize) -> Vec<usize> {
    (0..LANES)
        .map(|l| samples / LANES + usize::from(l < samples % LANES))
        .collect()
}

/// `log(|VDM|^2 prod w^{2d})` of i.i.d. `m_d`-tuples, in lane order.
fn sample_log_values(sampler: &SamplerModel, w: &WeightModel, d: u32, basis: &GradedBasis, samples: usize, seed: u64) -> Vec<f64> {
    let dim = sampler.dim();
    let m = basis.len();
    let sizes = lane_sizes(samples);
    let lanes = par::map_range(LANES, |lane| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(lane as u64));
        let mut out = Vec::with_capacity(sizes[lane]);
        let mut coords = vec![num_complex::Complex64::new(0.0, 0.0); m * dim];
        for _ in 0..sizes[lane] {
            for p in coords.chunks_mut(dim) {
                sampler.sample_into(&mut rng, p);
            }
            let pts = PointSet::new(dim, coords.clone()).expect("sampler produced finite points");
            let mut logw = 0.0;
            for p in pts.iter() {
                logw -= 2.0 * d as f64 * if d == 0 { 0.0 } else { w.q(p) };
            }
            let v = vdm(&pts, basis).expect("square Vandermonde");
            out.push(if v.is_zero() || logw == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                2.0 * v.log_magnitude + logw
            });
        }
        out
    });
    lanes.into_iter().flatten().collect()
}

fn check_common(sampler: &SamplerModel, w: &WeightModel, samples: usize) -> Result<()> {
    w.validate()?;
    if samples < MIN_SAMPLES {
        return invalid(format!("at least {MIN_SAMPLES} samples are required"));
    }
    if !(sampler.total_mass() > 0.0) {
        return invalid("sampler has no mass");
    }
    Ok(())
}

/// Monte Carlo `Z_d = int |VDM|^2 prod w^{2d} dmu^{m_d}`: tuples are drawn
/// from the normalized sampler and carry the importance weight
/// `mu(E)^{m_d}`.
pub fn z_d_mc(sampler: &SamplerModel, w: &WeightModel, d: u32, samples: usize, seed: u64) -> Result<McEstimate> {
    check_common(sampler, w, samples)?;
    let basis = enumerate_basis(sampler.dim(), d)?;
    let m = basis.len();
    let logs = sample_log_values(sampler, w, d, &basis, samples, seed);
    let n = logs.len() as f64;
    let zero_samples = logs.iter().filter(|l| **l == f64::NEG_INFINITY).count();
    let lmass = m as f64 * sampler.total_mass().ln();
    if zero_samples == logs.len() {
        return Ok(McEstimate {
            mean: LogValue::ZERO,
            rel_stderr: f64::INFINITY,
            samples,
            zero_samples,
            seed,
            degenerate: true,
        });
    }
    let l1 = log_sum_exp(&logs) - n.ln();
    let sq: Vec<f64> = logs.iter().map(|l| 2.0 * l).collect();
    let l2 = log_sum_exp(&sq) - n.ln();
    // Var / mean^2 = E[v^2] / E[v]^2 - 1, with the n/(n-1) correction
    let ratio = ((l2 - 2.0 * l1).exp() - 1.0).max(0.0) * n / (n - 1.0);
    Ok(McEstimate {
        mean: LogValue::from_log(l1 + lmass),
        rel_stderr: (ratio / n).sqrt(),
        samples,
        zero_samples,
        seed,
        degenerate: false,
    })
}

/// Exact `Z_d` for an atomic measure by summing over all `M^{m_d}` ordered
/// tuples of atoms.
pub fn exact_atomic_zd(atoms: &PointSet, masses: &[f64], w: &WeightModel, d: u32) -> Result<LogValue> {
    exact_atomic_zd_capped(atoms, masses, w, d, EXACT_CAP)
}

pub fn exact_atomic_zd_capped(atoms: &PointSet, masses: &[f64], w: &WeightModel, d: u32, cap: u128) -> Result<LogValue> {
    w.validate()?;
    if atoms.is_empty() || atoms.len() != masses.len() {
        return invalid("need one mass per atom and at least one atom");
    }
    let m = count_monomials(atoms.dim(), d)? as u32;
    let big_m = atoms.len() as u128;
    let tuples = big_m.checked_pow(m).filter(|&t| t <= cap).ok_or(Error::ResourceLimit {
        what: "atom tuples",
        requested: big_m.checked_pow(m).unwrap_or(u128::MAX),
        cap,
    })?;
    let basis = enumerate_basis(atoms.dim(), d)?;
    let m = m as usize;
    let log_atom: Vec<f64> = atoms
        .iter()
        .zip(masses)
        .map(|(p, &mass)| mass.ln() - 2.0 * d as f64 * if d == 0 { 0.0 } else { w.q(p) })
        .collect();
    let mut idx = vec![0usize; m];
    let (mut shift, mut acc) = (f64::NEG_INFINITY, 0.0);
    for _ in 0..tuples {
        let distinct = {
            let mut seen = idx.clone();
            seen.sort_unstable();
            seen.windows(2).all(|p| p[0] != p[1])
        };
        let la: f64 = idx.iter().map(|&i| log_atom[i]).sum();
        if distinct && la > f64::NEG_INFINITY {
            let v = vdm(&atoms.select(&idx), &basis)?;
            if !v.is_zero() {
                let l = 2.0 * v.log_magnitude + la;
                if l > shift {
                    acc = acc * (shift - l).exp() + 1.0;
                    shift = l;
                } else {
                    acc += (l - shift).exp();
                }
            }
        }
        for k in (0..m).rev() {
            idx[k] += 1;
            if idx[k] < atoms.len() {
                break;
            }
            idx[k] = 0;
        }
    }
    Ok(if acc == 0.0 {
        LogValue::ZERO
    } else {
        LogValue::from_log(shift + acc.ln())
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LargeDeviation {
    pub d: u32,
    pub eta: f64,
    pub delta: f64,
    /// Self-normalized estimate of `P_d(|VDM|^2 prod w^{2d} < (delta - eta)^{2 l_d})`.
    pub probability: f64,
    pub stderr: f64,
    /// `(1 - eta / (2 delta))^{2 l_d}`
    pub bound: f64,
    /// Kish effective sample size of the importance weights.
    pub effective_samples: f64,
    pub samples: usize,
    pub seed: u64,
}

impl LargeDeviation {
    pub fn holds(&self, k: f64) -> bool {
        self.probability <= self.bound + k * self.stderr
    }
}

/// `P_d` has density `|VDM|^2 prod w^{2d} / Z_d` against `mu^{m_d}`, so
/// draws from `mu^{m_d}` weighted by `|VDM|^2 prod w^{2d}` estimate it.
pub fn large_deviation_probe(sampler: &SamplerModel, w: &WeightModel, d: u32, eta: f64, delta: f64, samples: usize, seed: u64) -> Result<LargeDeviation> {
    check_common(sampler, w, samples)?;
    if !(eta > 0.0) || !(delta > eta) {
        return invalid("need 0 < eta < delta");
    }
    let basis = enumerate_basis(sampler.dim(), d)?;
    let l = degree_sum(sampler.dim(), d)? as f64;
    let logs = sample_log_values(sampler, w, d, &basis, samples, seed);
    let total = log_sum_exp(&logs);
    if total == f64::NEG_INFINITY {
        return Err(Error::Degenerate("every sample has zero Vandermonde weight".into()));
    }
    let threshold = 2.0 * l * (delta - eta).ln();
    let u: Vec<f64> = logs.iter().map(|x| (x - total).exp()).collect();
    let below: Vec<bool> = logs.iter().map(|&x| x < threshold).collect();
    let p: f64 = u.iter().zip(&below).filter(|(_, &b)| b).map(|(u, _)| u).sum();
    let var: f64 = u
        .iter()
        .zip(&below)
        .map(|(u, &b)| u * u * (f64::from(u8::from(b)) - p).powi(2))
        .sum();
    let ess = 1.0 / u.iter().map(|u| u * u).sum::<f64>();
    Ok(LargeDeviation {
        d,
        eta,
        delta,
        probability: p,
        stderr: var.sqrt(),
        bound: (1.0 - eta / (2.0 * delta)).powf(2.0 * l),
        effective_samples: ess,
        samples,
        seed,
    })
}
