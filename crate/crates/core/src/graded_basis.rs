//! Monomial multi-indices in graded order and the counting functions that
//! serve as exponents and normalizers everywhere else.
//!
//! Order: nondecreasing total degree; inside one degree, descending
//! lexicographic order on the exponent vector, so the degree-`j` block starts
//! at `(j, 0, ..., 0)` and ends at `(0, ..., 0, j)`.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;

use crate::error::{invalid, Error, Result};

/// Largest basis `enumerate_basis` will materialize unless told otherwise.
pub const DEFAULT_BASIS_CAP: u64 = 1 << 20;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    exponents: Vec<u32>,
    degree: u32,
}

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Result<Self> {
        if exponents.is_empty() {
            return invalid("multi-index needs at least one coordinate");
        }
        let degree = exponents
            .iter()
            .try_fold(0u32, |acc, &e| acc.checked_add(e))
            .ok_or(Error::Overflow("multi-index degree"))?;
        Ok(Self { exponents, degree })
    }

    pub fn zero(dimension: usize) -> Self {
        Self {
            exponents: vec![0; dimension],
            degree: 0,
        }
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exponents
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn dimension(&self) -> usize {
        self.exponents.len()
    }

    /// `self + other`, coordinatewise.
    pub fn add(&self, other: &MultiIndex) -> Result<MultiIndex> {
        if self.dimension() != other.dimension() {
            return invalid("multi-index dimensions differ");
        }
        MultiIndex::new(
            self.exponents
                .iter()
                .zip(&other.exponents)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    /// First coordinate with a positive exponent together with `self - e_k`.
    pub(crate) fn split_first(&self) -> Option<(usize, MultiIndex)> {
        let k = self.exponents.iter().position(|&e| e > 0)?;
        let mut parent = self.exponents.clone();
        parent[k] -= 1;
        Some((
            k,
            MultiIndex {
                exponents: parent,
                degree: self.degree - 1,
            },
        ))
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, e) in self.exponents.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree
            .cmp(&other.degree)
            .then_with(|| other.exponents.cmp(&self.exponents))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// The counts attached to a basis of degree at most `d` in `N` variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasisCounts {
    pub m: u64,
    /// `h_0, ..., h_d`
    pub h: Vec<u64>,
    pub l: u64,
    /// `r_0, ..., r_d` with `r_k = k h_k`
    pub r: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct GradedBasis {
    dimension: usize,
    max_degree: u32,
    indices: Vec<MultiIndex>,
    counts: BasisCounts,
    lookup: HashMap<Vec<u32>, usize>,
    parents: Vec<Option<(usize, usize)>>,
}

impl GradedBasis {
    /// For `i > 0`: the first coordinate `k` with `alpha(i)_k > 0` and the
    /// position of `alpha(i) - e_k`, so `e_i = z_k e_parent`.
    pub fn parent(&self, i: usize) -> Option<(usize, usize)> {
        self.parents[i]
    }

    /// Evaluate `e_0, ..., e_{n-1}` at one point by the parent recursion.
    pub fn eval_into<T>(&self, point: &[T], n: usize, out: &mut [T])
    where
        T: Copy + std::ops::Mul<Output = T> + From<f64>,
    {
        out[0] = T::from(1.0);
        for i in 1..n {
            let (k, p) = self.parents[i].expect("non-constant index has a parent");
            out[i] = out[p] * point[k];
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn counts(&self) -> &BasisCounts {
        &self.counts
    }

    pub fn position(&self, exponents: &[u32]) -> Option<usize> {
        self.lookup.get(exponents).copied()
    }

    /// Index range of the degree-`k` block.
    pub fn block(&self, k: u32) -> std::ops::Range<usize> {
        let k = k.min(self.max_degree) as usize;
        let end: u64 = self.counts.h[..=k].iter().sum();
        (end - self.counts.h[k]) as usize..end as usize
    }

    /// Smallest full-degree basis whose size is at least `n`.
    pub fn covering(dimension: usize, n: usize) -> Result<GradedBasis> {
        if n == 0 {
            return invalid("need at least one basis element");
        }
        let mut d = 0u32;
        while (count_monomials(dimension, d)? as usize) < n {
            d += 1;
        }
        enumerate_basis(dimension, d)
    }
}

/// A single-degree block of monomials, used for homogeneous problems.
#[derive(Debug, Clone)]
pub struct HomogeneousBasis {
    dimension: usize,
    degree: u32,
    indices: Vec<MultiIndex>,
}

impl HomogeneousBasis {
    pub fn new(dimension: usize, degree: u32) -> Result<Self> {
        check_dimension(dimension)?;
        let h = count_homogeneous(dimension, degree)?;
        check_cap(h, DEFAULT_BASIS_CAP)?;
        Ok(Self {
            dimension,
            degree,
            indices: degree_block(dimension, degree),
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

fn check_dimension(n: usize) -> Result<()> {
    if n == 0 {
        invalid("dimension must be at least 1")
    } else {
        Ok(())
    }
}

fn check_cap(size: u64, cap: u64) -> Result<()> {
    if size > cap {
        Err(Error::ResourceLimit {
            what: "basis size",
            requested: size as u128,
            cap: cap as u128,
        })
    } else {
        Ok(())
    }
}

/// Exact binomial coefficient; `Overflow` when it does not fit in `u64`.
pub fn binomial(n: u64, k: u64) -> Result<u64> {
    if k > n {
        return Ok(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 1..=k as u128 {
        // acc * (n - k + i) is divisible by i after the multiplication
        acc = acc
            .checked_mul(n as u128 - k as u128 + i)
            .ok_or(Error::Overflow("binomial coefficient"))?
            / i;
    }
    u64::try_from(acc).map_err(|_| Error::Overflow("binomial coefficient"))
}

/// `m_d = C(N + d, d)`.
pub fn count_monomials(dimension: usize, degree: u32) -> Result<u64> {
    check_dimension(dimension)?;
    binomial(dimension as u64 + degree as u64, degree as u64)
}

/// `h_d = C(N - 1 + d, d)`.
pub fn count_homogeneous(dimension: usize, degree: u32) -> Result<u64> {
    check_dimension(dimension)?;
    binomial(dimension as u64 - 1 + degree as u64, degree as u64)
}

/// `l_d = N C(N + d, N + 1)`, the total degree of all monomials of degree at most `d`.
pub fn degree_sum(dimension: usize, degree: u32) -> Result<u64> {
    check_dimension(dimension)?;
    let b = binomial(dimension as u64 + degree as u64, dimension as u64 + 1)?;
    b.checked_mul(dimension as u64)
        .ok_or(Error::Overflow("degree sum"))
}

/// `r_d = d h_d`.
pub fn degree_sum_exact(dimension: usize, degree: u32) -> Result<u64> {
    count_homogeneous(dimension, degree)?
        .checked_mul(degree as u64)
        .ok_or(Error::Overflow("degree sum"))
}

fn degree_block(dimension: usize, degree: u32) -> Vec<MultiIndex> {
    fn rec(prefix: &mut Vec<u32>, remaining: u32, slots: usize, out: &mut Vec<MultiIndex>) {
        if slots == 1 {
            prefix.push(remaining);
            out.push(MultiIndex {
                exponents: prefix.clone(),
                degree: prefix.iter().sum(),
            });
            prefix.pop();
            return;
        }
        for a in (0..=remaining).rev() {
            prefix.push(a);
            rec(prefix, remaining - a, slots - 1, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(dimension), degree, dimension, &mut out);
    out
}

pub fn enumerate_basis(dimension: usize, degree: u32) -> Result<GradedBasis> {
    enumerate_basis_capped(dimension, degree, DEFAULT_BASIS_CAP)
}

pub fn enumerate_basis_capped(dimension: usize, degree: u32, cap: u64) -> Result<GradedBasis> {
    let m = count_monomials(dimension, degree)?;
    check_cap(m, cap)?;
    let mut indices = Vec::with_capacity(m as usize);
    let mut h = Vec::with_capacity(degree as usize + 1);
    let mut r = Vec::with_capacity(degree as usize + 1);
    for k in 0..=degree {
        let block = degree_block(dimension, k);
        h.push(block.len() as u64);
        r.push(k as u64 * block.len() as u64);
        indices.extend(block);
    }
    let l = indices.iter().map(|a| a.degree as u64).sum();
    let lookup: HashMap<Vec<u32>, usize> = indices
        .iter()
        .enumerate()
        .map(|(i, a)| (a.exponents.clone(), i))
        .collect();
    let parents = indices
        .iter()
        .map(|a| a.split_first().map(|(k, p)| (k, lookup[&p.exponents])))
        .collect();
    Ok(GradedBasis {
        dimension,
        max_degree: degree,
        indices,
        counts: BasisCounts { m, h, l, r },
        lookup,
        parents,
    })
}

/// Degree-`d` homogeneous monomials in `N + 1` variables `(t, z_1, ..., z_N)`,
/// with `t` leading: `t^d, t^{d-1} z_1, ..., z_N^d`. Its size is `m_d` of the
/// `N`-variable problem.
pub fn lift_basis(dimension: usize, degree: u32) -> Result<HomogeneousBasis> {
    check_dimension(dimension)?;
    let lifted = HomogeneousBasis::new(dimension + 1, degree)?;
    debug_assert_eq!(
        lifted.len() as u64,
        count_monomials(dimension, degree)?,
        "h_d in N+1 variables must equal m_d in N variables"
    );
    Ok(lifted)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exps(b: &GradedBasis) -> Vec<Vec<u32>> {
        b.indices().iter().map(|a| a.exponents().to_vec()).collect()
    }

    #[test]
    fn counting_examples() {
        assert_eq!(count_monomials(2, 3).unwrap(), 10);
        assert_eq!(count_monomials(1, 5).unwrap(), 6);
        assert_eq!(count_monomials(3, 2).unwrap(), 10);
        assert_eq!(count_homogeneous(2, 3).unwrap(), 4);
        assert_eq!(count_homogeneous(1, 7).unwrap(), 1);
        assert_eq!(count_homogeneous(3, 2).unwrap(), 6);
        assert_eq!(degree_sum(2, 3).unwrap(), 20);
        assert_eq!(degree_sum(1, 4).unwrap(), 10);
        // l_d = N/(N+1) d m_d
        assert_eq!(3 * degree_sum(2, 3).unwrap(), 2 * 3 * count_monomials(2, 3).unwrap());
    }

    #[test]
    fn zero_dimension_is_rejected() {
        assert!(matches!(count_monomials(0, 2), Err(Error::InvalidArgument(_))));
        assert!(matches!(enumerate_basis(0, 1), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn overflow_is_reported() {
        assert_eq!(count_monomials(200, 200), Err(Error::Overflow("binomial coefficient")));
    }

    #[test]
    fn cap_is_enforced() {
        let err = enumerate_basis_capped(3, 10, 100).unwrap_err();
        assert!(matches!(err, Error::ResourceLimit { requested: 286, .. }));
    }

    #[test]
    fn enumeration_examples() {
        assert_eq!(exps(&enumerate_basis(2, 1).unwrap()), vec![vec![0, 0], vec![1, 0], vec![0, 1]]);
        let b = enumerate_basis(2, 2).unwrap();
        assert_eq!(exps(&b)[3..], [vec![2, 0], vec![1, 1], vec![0, 2]]);
        assert_eq!(b.block(2), 3..6);
        assert_eq!(exps(&enumerate_basis(1, 3).unwrap()), vec![vec![0], vec![1], vec![2], vec![3]]);
    }

    #[test]
    fn lift_examples() {
        let l = lift_basis(1, 2).unwrap();
        let e: Vec<_> = l.indices().iter().map(|a| a.exponents().to_vec()).collect();
        assert_eq!(e, vec![vec![2, 0], vec![1, 1], vec![0, 2]]);
        assert_eq!(lift_basis(2, 1).unwrap().len(), 3);
        assert_eq!(lift_basis(2, 3).unwrap().len(), 10);
    }

    #[test]
    fn lookup_and_split() {
        let b = enumerate_basis(3, 3).unwrap();
        for (i, a) in b.indices().iter().enumerate() {
            assert_eq!(b.position(a.exponents()), Some(i));
            if let Some((_, parent)) = a.split_first() {
                assert!(b.position(parent.exponents()).unwrap() < i);
            }
        }
    }
}
