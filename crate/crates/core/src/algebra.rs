//! Partial bijections of `{0..d-1}` and the real matrix algebra they generate.
//!
//! A [`PartialMap`] is an element of the finite full pseudogroup; [`AlgebraElement`] is a
//! sparse `d x d` real matrix carrying the normalized trace `tr = Tr / d`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Injective partial assignment on `{0..size-1}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PartialMap {
    image: Vec<Option<usize>>,
    count: usize,
}

impl PartialMap {
    /// Builds a partial map from `(src, dst)` pairs, rejecting repeats and out-of-range points.
    pub fn new(size: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut image = vec![None; size];
        let mut hit = vec![false; size];
        for &(s, t) in pairs {
            if s >= size || t >= size {
                return Err(Error::Dimension(format!(
                    "pair ({s},{t}) outside {{0..{}}}",
                    size.saturating_sub(1)
                )));
            }
            if image[s].is_some() {
                return Err(Error::model("pairs", format!("source {s} repeated")));
            }
            if hit[t] {
                return Err(Error::model("pairs", format!("target {t} repeated")));
            }
            image[s] = Some(t);
            hit[t] = true;
        }
        Ok(Self {
            image,
            count: pairs.len(),
        })
    }

    pub fn identity(size: usize) -> Self {
        Self {
            image: (0..size).map(Some).collect(),
            count: size,
        }
    }

    pub fn empty(size: usize) -> Self {
        Self {
            image: vec![None; size],
            count: 0,
        }
    }

    /// Identity restricted to `points`.
    pub fn partial_identity(size: usize, points: impl IntoIterator<Item = usize>) -> Self {
        let mut image = vec![None; size];
        let mut count = 0;
        for x in points {
            if image[x].is_none() {
                image[x] = Some(x);
                count += 1;
            }
        }
        Self { image, count }
    }

    /// Identity on the points where `mask` is set.
    pub fn from_mask(mask: &[bool]) -> Self {
        Self::partial_identity(
            mask.len(),
            mask.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i),
        )
    }

    pub fn size(&self) -> usize {
        self.image.len()
    }

    /// Number of pairs.
    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    #[inline]
    pub fn apply(&self, x: usize) -> Option<usize> {
        self.image.get(x).copied().flatten()
    }

    /// Pairs sorted by source.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.image
            .iter()
            .enumerate()
            .filter_map(|(s, t)| t.map(|t| (s, t)))
    }

    pub fn domain(&self) -> Vec<usize> {
        self.pairs().map(|(s, _)| s).collect()
    }

    pub fn range(&self) -> Vec<usize> {
        let mut r: Vec<usize> = self.pairs().map(|(_, t)| t).collect();
        r.sort_unstable();
        r
    }

    pub fn domain_mask(&self) -> Vec<bool> {
        self.image.iter().map(Option::is_some).collect()
    }

    /// `self ∘ g`: apply `g` first.
    pub fn compose(&self, g: &PartialMap) -> Result<PartialMap> {
        if self.size() != g.size() {
            return Err(Error::Dimension(format!(
                "compose sizes {} and {}",
                self.size(),
                g.size()
            )));
        }
        let mut count = 0;
        let image = g
            .image
            .iter()
            .map(|t| {
                let r = t.and_then(|t| self.image[t]);
                count += r.is_some() as usize;
                r
            })
            .collect();
        Ok(PartialMap { image, count })
    }

    pub fn inverse(&self) -> PartialMap {
        let mut image = vec![None; self.size()];
        for (s, t) in self.pairs() {
            image[t] = Some(s);
        }
        PartialMap {
            image,
            count: self.count,
        }
    }

    pub fn fixed_points(&self) -> usize {
        self.pairs().filter(|(s, t)| s == t).count()
    }

    /// Restricts both domain and range to `keep` (i.e. `p ∘ self ∘ p` for the diagonal `p`).
    pub fn conjugate_by(&self, keep: &[bool]) -> PartialMap {
        let mut count = 0;
        let image = self
            .image
            .iter()
            .enumerate()
            .map(|(s, t)| {
                let r = t.filter(|&t| keep[s] && keep[t]);
                count += r.is_some() as usize;
                r
            })
            .collect();
        PartialMap { image, count }
    }

    /// Pushes a vector forward: `(Uξ)(t) = ξ(s)` for each pair `s → t`, zero off the range.
    pub fn apply_vec(&self, xi: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.size()];
        for (s, t) in self.pairs() {
            out[t] = xi[s];
        }
        out
    }

    /// Adds `scale · Uξ` into `out`.
    pub fn apply_add(&self, xi: &[f64], scale: f64, out: &mut [f64]) {
        for (s, t) in self.pairs() {
            out[t] += scale * xi[s];
        }
    }

    /// 0/1 matrix with entry `(dst, src) = 1` per pair.
    pub fn as_matrix(&self) -> AlgebraElement {
        let mut rows = vec![Vec::new(); self.size()];
        for (s, t) in self.pairs() {
            rows[t].push((s, 1.0));
        }
        AlgebraElement::from_rows(self.size(), rows)
    }
}

pub fn compose(f: &PartialMap, g: &PartialMap) -> Result<PartialMap> {
    f.compose(g)
}

pub fn inverse(f: &PartialMap) -> PartialMap {
    f.inverse()
}

pub fn as_matrix(f: &PartialMap) -> AlgebraElement {
    f.as_matrix()
}

/// Sparse real square matrix stored row-wise with sorted column indices.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraElement {
    size: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl AlgebraElement {
    pub fn zero(size: usize) -> Self {
        Self {
            size,
            rows: vec![Vec::new(); size],
        }
    }

    pub fn identity(size: usize) -> Self {
        Self {
            size,
            rows: (0..size).map(|i| vec![(i, 1.0)]).collect(),
        }
    }

    /// Normalizes row entries: sorts, merges duplicate columns and drops exact zeros.
    pub fn from_rows(size: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let rows = rows
            .into_iter()
            .map(|mut r| {
                r.sort_by_key(|e| e.0);
                let mut merged: Vec<(usize, f64)> = Vec::with_capacity(r.len());
                for (c, v) in r {
                    match merged.last_mut() {
                        Some(last) if last.0 == c => last.1 += v,
                        _ => merged.push((c, v)),
                    }
                }
                merged.retain(|e| e.1 != 0.0);
                merged
            })
            .collect();
        Self { size, rows }
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension(format!("{}x{} not square", m.nrows(), m.ncols())));
        }
        let rows = (0..m.nrows())
            .map(|i| {
                (0..m.ncols())
                    .filter(|&j| m[(i, j)] != 0.0)
                    .map(|j| (j, m[(i, j)]))
                    .collect()
            })
            .collect();
        Ok(Self {
            size: m.nrows(),
            rows,
        })
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self::from_rows(
            diag.len(),
            diag.iter().enumerate().map(|(i, &v)| vec![(i, v)]).collect(),
        )
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i]
            .binary_search_by_key(&j, |e| e.0)
            .map(|k| self.rows[i][k].1)
            .unwrap_or(0.0)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.size, self.size);
        for (i, r) in self.rows.iter().enumerate() {
            for &(j, v) in r {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    pub fn all_finite(&self) -> bool {
        self.rows.iter().flatten().all(|e| e.1.is_finite())
    }

    fn check(&self, other: &Self) -> Result<()> {
        if self.size != other.size {
            return Err(Error::Dimension(format!("sizes {} and {}", self.size, other.size)));
        }
        Ok(())
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
                for &(k, a) in r {
                    for &(j, b) in &other.rows[k] {
                        *acc.entry(j).or_insert(0.0) += a * b;
                    }
                }
                acc.into_iter().filter(|e| e.1 != 0.0).collect()
            })
            .collect();
        Ok(Self {
            size: self.size,
            rows,
        })
    }

    pub fn add_scaled(&self, other: &Self, scale: f64) -> Result<Self> {
        self.check(other)?;
        let rows = self
            .rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| {
                let mut r = a.clone();
                r.extend(b.iter().map(|&(j, v)| (j, scale * v)));
                r
            })
            .collect();
        Ok(Self::from_rows(self.size, rows))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add_scaled(other, -1.0)
    }

    /// Transpose; the adjoint over the reals.
    pub fn adjoint(&self) -> Self {
        let mut rows = vec![Vec::new(); self.size];
        for (i, r) in self.rows.iter().enumerate() {
            for &(j, v) in r {
                rows[j].push((i, v));
            }
        }
        Self {
            size: self.size,
            rows,
        }
    }

    /// `(1/d) Σ x_ii`.
    pub fn trace(&self) -> f64 {
        if self.size == 0 {
            return 0.0;
        }
        let s: f64 = (0..self.size).map(|i| self.get(i, i)).sum();
        s / self.size as f64
    }

    /// `tr(x* x)^{1/2}`, the normalized Frobenius norm.
    pub fn two_norm(&self) -> f64 {
        if self.size == 0 {
            return 0.0;
        }
        let s: f64 = self.rows.iter().flatten().map(|e| e.1 * e.1).sum();
        (s / self.size as f64).sqrt()
    }

    /// Schur-test bound `sqrt(max row sum · max column sum)` on the operator norm.
    /// Exact (equal to 1) for nonzero partial isometries with 0/1 entries.
    pub fn op_norm_bound(&self) -> f64 {
        let mut col = vec![0.0f64; self.size];
        let mut row_max = 0.0f64;
        for r in &self.rows {
            let mut s = 0.0;
            for &(j, v) in r {
                s += v.abs();
                col[j] += v.abs();
            }
            row_max = row_max.max(s);
        }
        let col_max = col.into_iter().fold(0.0, f64::max);
        (row_max * col_max).sqrt()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|&(j, a)| a * v[j]).sum())
            .collect()
    }
}

pub fn trace(x: &AlgebraElement) -> f64 {
    x.trace()
}

pub fn two_norm(x: &AlgebraElement) -> f64 {
    x.two_norm()
}
