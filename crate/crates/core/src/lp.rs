//! l^p norms, product norms on sequences, finite direct integrals of vector fields,
//! supports and dynamical generation.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::relation::{AtomSpace, FinRel};

/// `(Σ w_i |v_i|^p)^{1/p}`. With `weights = None` and `normalized`, every weight is `1/len`;
/// without `normalized`, every weight is 1.
pub fn lp_norm(v: &[f64], p: f64, weights: Option<&[f64]>, normalized: bool) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::Parameter(format!("p = {p} < 1")));
    }
    let s: f64 = match weights {
        Some(w) => {
            if w.len() != v.len() {
                return Err(Error::Dimension(format!("{} weights for {} entries", w.len(), v.len())));
            }
            v.iter().zip(w).map(|(x, w)| w * x.abs().powf(p)).sum()
        }
        None => {
            let raw: f64 = v.iter().map(|x| x.abs().powf(p)).sum();
            if normalized && !v.is_empty() {
                raw / v.len() as f64
            } else {
                raw
            }
        }
    };
    Ok(s.powf(1.0 / p))
}

/// Weighted l^p norm on sequences, `ρ(f) = (Σ_{j≥1} base^{-j} |f(j)|^p)^{1/p}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductNorm {
    pub p: f64,
    /// Geometric weight base; the default `2` gives weights `2^{-j}`.
    pub base: f64,
}

impl Default for ProductNorm {
    fn default() -> Self {
        Self { p: 2.0, base: 2.0 }
    }
}

impl ProductNorm {
    pub fn new(p: f64, base: f64) -> Result<Self> {
        if !(p >= 1.0) {
            return Err(Error::Parameter(format!("p = {p} < 1")));
        }
        if !(base > 1.0) {
            return Err(Error::Parameter(format!("weight base {base} must exceed 1")));
        }
        Ok(Self { p, base })
    }

    /// Weight of the `j`-th entry, `j` counted from 0 (i.e. `base^{-(j+1)}`).
    pub fn weight(&self, j: usize) -> f64 {
        self.base.powi(-(j as i32 + 1))
    }

    /// `Σ_{j ≥ n} weight(j)`.
    pub fn tail_sum(&self, n: usize) -> f64 {
        self.base.powi(-(n as i32)) / (self.base - 1.0)
    }

    /// `(tail_sum)^{1/p}`, the factor bounding the contribution of a bounded tail.
    pub fn tail_weight(&self, n: usize) -> f64 {
        self.tail_sum(n).powf(1.0 / self.p)
    }

    /// ρ of a finitely supported sequence.
    pub fn eval_finite(&self, f: &[f64]) -> f64 {
        f.iter()
            .enumerate()
            .map(|(j, x)| self.weight(j) * x.abs().powf(self.p))
            .sum::<f64>()
            .powf(1.0 / self.p)
    }
}

/// Encloses `ρ(f)` for `f` given by a finite prefix and a bound on `|f(j)|` beyond it.
pub fn product_norm_eval(rho: &ProductNorm, prefix: &[f64], tail_bound: f64) -> Result<(f64, f64)> {
    if !tail_bound.is_finite() || tail_bound < 0.0 {
        return Err(Error::Parameter(format!("tail bound {tail_bound} must be finite and >= 0")));
    }
    let head: f64 = prefix
        .iter()
        .enumerate()
        .map(|(j, x)| rho.weight(j) * x.abs().powf(rho.p))
        .sum();
    let lo = head.powf(1.0 / rho.p);
    let hi = (head + rho.tail_sum(prefix.len()) * tail_bound.powf(rho.p)).powf(1.0 / rho.p);
    Ok((lo, hi.max(lo)))
}

/// Per-atom coordinate vectors; fiber dimension may vary between orbits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VectorField {
    pub fibers: Vec<Vec<f64>>,
}

impl VectorField {
    pub fn new(fibers: Vec<Vec<f64>>) -> Self {
        Self { fibers }
    }

    pub fn zero(profile: &[usize]) -> Self {
        Self {
            fibers: profile.iter().map(|&k| vec![0.0; k]).collect(),
        }
    }

    pub fn profile(&self) -> Vec<usize> {
        self.fibers.iter().map(Vec::len).collect()
    }

    pub fn check_profile(&self, profile: &[usize]) -> Result<()> {
        if self.fibers.len() != profile.len() {
            return Err(Error::Dimension(format!(
                "field has {} fibers, model has {} atoms",
                self.fibers.len(),
                profile.len()
            )));
        }
        for (x, (f, &k)) in self.fibers.iter().zip(profile).enumerate() {
            if f.len() != k {
                return Err(Error::Dimension(format!("fiber {x} has dim {}, expected {k}", f.len())));
            }
        }
        Ok(())
    }

    /// Concatenated coordinates in atom order.
    pub fn flatten(&self) -> Vec<f64> {
        self.fibers.iter().flatten().copied().collect()
    }

    pub fn from_flat(flat: &[f64], profile: &[usize]) -> Self {
        let mut off = 0;
        let fibers = profile
            .iter()
            .map(|&k| {
                let f = flat[off..off + k].to_vec();
                off += k;
                f
            })
            .collect();
        Self { fibers }
    }
}

fn euclid(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `(Σ_x μ(x) ‖v_x‖^p)^{1/p}` with Euclidean fiber norms.
pub fn direct_integral_norm(field: &VectorField, space: &AtomSpace, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::Parameter(format!("p = {p} < 1")));
    }
    if field.fibers.len() != space.len() {
        return Err(Error::Dimension(format!(
            "field has {} fibers, space has {} atoms",
            field.fibers.len(),
            space.len()
        )));
    }
    let s: f64 = field
        .fibers
        .iter()
        .enumerate()
        .map(|(x, f)| space.weight(x) * euclid(f).powf(p))
        .sum();
    Ok(s.powf(1.0 / p))
}

/// Atoms whose fiber has an entry above `1e-14` in absolute value.
pub fn support(field: &VectorField) -> Vec<usize> {
    field
        .fibers
        .iter()
        .enumerate()
        .filter(|(_, f)| f.iter().any(|x| x.abs() > 1e-14))
        .map(|(x, _)| x)
        .collect()
}

/// Per-atom invertible fiber frames `b(x)`; transport is `π(x,y) = b(x) b(y)^{-1}`.
/// `None` is the identity cocycle.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Cocycle {
    frames: Option<Vec<DMatrix<f64>>>,
    inverses: Option<Vec<DMatrix<f64>>>,
}

impl Cocycle {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn from_frames(frames: Vec<DMatrix<f64>>) -> Result<Self> {
        let inverses = frames
            .iter()
            .enumerate()
            .map(|(x, b)| {
                b.clone()
                    .try_inverse()
                    .ok_or_else(|| Error::model(format!("cocycle[{x}]"), "frame not invertible"))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            frames: Some(frames),
            inverses: Some(inverses),
        })
    }

    pub fn is_identity(&self) -> bool {
        self.frames.is_none()
    }

    /// `b(x)^{-1} v`: coordinates in the orbit-common frame.
    pub fn untwist(&self, x: usize, v: &[f64]) -> Vec<f64> {
        match &self.inverses {
            None => v.to_vec(),
            Some(inv) => (&inv[x] * nalgebra::DVector::from_column_slice(v)).as_slice().to_vec(),
        }
    }

    /// `b(x) u`.
    pub fn twist(&self, x: usize, u: &[f64]) -> Vec<f64> {
        match &self.frames {
            None => u.to_vec(),
            Some(fr) => (&fr[x] * nalgebra::DVector::from_column_slice(u)).as_slice().to_vec(),
        }
    }

    /// `π(x,y) v = b(x) b(y)^{-1} v` for `v ∈ V_y`.
    pub fn transport(&self, x: usize, y: usize, v: &[f64]) -> Vec<f64> {
        self.twist(x, &self.untwist(y, v))
    }

    pub fn check(&self, profile: &[usize]) -> Result<()> {
        if let Some(fr) = &self.frames {
            if fr.len() != profile.len() {
                return Err(Error::Dimension("cocycle frame count differs from atom count".into()));
            }
            for (x, b) in fr.iter().enumerate() {
                if b.nrows() != profile[x] || b.ncols() != profile[x] {
                    return Err(Error::Dimension(format!("cocycle frame {x} has wrong shape")));
                }
            }
        }
        Ok(())
    }
}

/// Rank by Gaussian elimination with partial pivoting; pivots below `1e-10` times the
/// largest entry count as zero.
pub fn numeric_rank(rows: &[Vec<f64>]) -> usize {
    let mut m: Vec<Vec<f64>> = rows.to_vec();
    let ncols = m.first().map_or(0, Vec::len);
    let scale = m.iter().flatten().fold(0.0f64, |a, x| a.max(x.abs()));
    if scale == 0.0 {
        return 0;
    }
    let tol = 1e-10 * scale;
    let mut rank = 0;
    for c in 0..ncols {
        let Some((piv, val)) = (rank..m.len())
            .map(|r| (r, m[r][c].abs()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
        else {
            break;
        };
        if val <= tol {
            continue;
        }
        m.swap(rank, piv);
        for r in rank + 1..m.len() {
            let f = m[r][c] / m[rank][c];
            if f != 0.0 {
                for k in c..ncols {
                    m[r][k] -= f * m[rank][k];
                }
            }
        }
        rank += 1;
        if rank == m.len() {
            break;
        }
    }
    rank
}

/// Checks that fiber dimensions are constant on orbits (translation needs isomorphic fibers).
pub fn check_orbit_profile(rel: &FinRel, profile: &[usize]) -> Result<()> {
    for (bi, b) in rel.blocks().iter().enumerate() {
        let k = profile[b[0]];
        if b.iter().any(|&x| profile[x] != k) {
            return Err(Error::model(
                format!("blocks[{bi}]"),
                "fiber dimension varies inside an orbit",
            ));
        }
    }
    Ok(())
}

/// True iff at every atom `x` the translates `π(x,y) v_j(y)`, `y ∼ x`, span `V_x`.
pub fn is_dynamically_generating(fields: &[VectorField], rel: &FinRel, cocycle: &Cocycle) -> Result<bool> {
    let profile = match fields.first() {
        Some(f) => f.profile(),
        None => return Ok(false),
    };
    if profile.len() != rel.num_atoms() {
        return Err(Error::Dimension(format!(
            "fields have {} fibers, relation has {} atoms",
            profile.len(),
            rel.num_atoms()
        )));
    }
    for f in fields {
        f.check_profile(&profile)?;
    }
    check_orbit_profile(rel, &profile)?;
    cocycle.check(&profile)?;
    for x in 0..rel.num_atoms() {
        let k = profile[x];
        if k == 0 {
            continue;
        }
        let rows: Vec<Vec<f64>> = rel
            .orbit(x)
            .iter()
            .flat_map(|&y| fields.iter().map(move |f| (y, f)))
            .map(|(y, f)| cocycle.transport(x, y, &f.fibers[y]))
            .collect();
        if numeric_rank(&rows) < k {
            return Ok(false);
        }
    }
    Ok(true)
}
