//! On-disk memo of Gram matrices, enabled by `VDMLAB_CACHE=<dir>`.

use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use vdmlab::domain_models::{MeasureModel, MeasureSpec, WeightModel};
use vdmlab::graded_basis::enumerate_basis;
use vdmlab::linalg::CMatrix;
use vdmlab::orthopoly::{gram, GramMatrix};

pub const ENV: &str = "VDMLAB_CACHE";

#[derive(Serialize, Deserialize)]
struct Entry {
    degree: u32,
    dim: usize,
    n: usize,
    condition: f64,
    /// Row-major `[re, im]` pairs.
    entries: Vec<[f64; 2]>,
}

pub struct GramCache {
    dir: PathBuf,
}

impl GramCache {
    pub fn from_env() -> Option<Self> {
        let dir = std::env::var_os(ENV)?;
        if dir.is_empty() {
            return None;
        }
        Some(Self { dir: dir.into() })
    }

    pub fn at(dir: &Path) -> Self {
        Self { dir: dir.to_path_buf() }
    }

    fn key(measure: &MeasureSpec, auto_nodes: usize, w: &WeightModel, d: u32) -> String {
        let material = serde_json::json!({
            "version": vdmlab::VERSION,
            "measure": measure,
            "auto_nodes": auto_nodes,
            "weight": w,
            "d": d,
        });
        let digest = Sha256::digest(material.to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    fn load(path: &Path) -> Option<GramMatrix> {
        let text = std::fs::read_to_string(path).ok()?;
        let e: Entry = serde_json::from_str(&text).ok()?;
        let basis = enumerate_basis(e.dim, e.degree).ok()?;
        if basis.len() != e.n || e.entries.len() != e.n * e.n {
            return None;
        }
        let entries = CMatrix::from_row_iterator(e.n, e.n, e.entries.iter().map(|&[re, im]| C64::new(re, im)));
        Some(GramMatrix {
            degree: e.degree,
            basis,
            entries,
            condition: e.condition,
        })
    }

    /// Cached Gram matrix, computing and storing it on a miss. Write
    /// failures only cost the memo, never the result.
    pub fn gram(&self, spec: &MeasureSpec, auto_nodes: usize, mu: &MeasureModel, w: &WeightModel, d: u32) -> vdmlab::Result<(GramMatrix, bool)> {
        let path = self.dir.join(format!("gram-{}.json", Self::key(spec, auto_nodes, w, d)));
        if let Some(g) = Self::load(&path) {
            return Ok((g, true));
        }
        let g = gram(mu, w, d)?;
        let n = g.entries.nrows();
        let e = Entry {
            degree: d,
            dim: g.basis.dimension(),
            n,
            condition: g.condition,
            entries: (0..n)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .map(|(i, j)| [g.entries[(i, j)].re, g.entries[(i, j)].im])
                .collect(),
        };
        if std::fs::create_dir_all(&self.dir).is_ok() {
            if let Ok(text) = serde_json::to_string(&e) {
                let tmp = path.with_extension("tmp");
                if std::fs::write(&tmp, text).is_ok() {
                    let _ = std::fs::rename(&tmp, &path);
                }
            }
        }
        Ok((g, false))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use vdmlab::orthopoly::z_d_from_gram;

    #[test]
    fn cached_gram_reproduces_z_d() {
        let dir = tempfile::tempdir().unwrap();
        let cache = GramCache::at(dir.path());
        let spec = MeasureSpec::Arcsine { a: -1.0, b: 1.0, nodes: Some(40) };
        let mu = spec.build(40).unwrap();
        let w = WeightModel::power(0.5, 2.0);
        let (g1, hit1) = cache.gram(&spec, 40, &mu, &w, 6).unwrap();
        let (g2, hit2) = cache.gram(&spec, 40, &mu, &w, 6).unwrap();
        assert!(!hit1 && hit2);
        assert_eq!(g1.entries, g2.entries);
        let z1 = z_d_from_gram(&g1).unwrap();
        let z2 = z_d_from_gram(&g2).unwrap();
        assert_eq!(z1.zd.log_magnitude, z2.zd.log_magnitude);
    }
}
