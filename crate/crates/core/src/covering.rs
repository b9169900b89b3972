//! ε-containment of point clouds in subspaces, covering dimensions `d_ε`, and the
//! volume-packing lower bounds `κ(α,ε,p)` and `κ_proj(α,ε,q)`.
//!
//! A point is a stack of `components` vectors in `l^p(d)` with the normalized counting
//! measure. Cut sets are chosen per point and shared by all components of that point.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::ProductNorm;

/// Residuals within this distance of ε count as failures.
pub const TIE_TOL: f64 = 1e-12;

/// Norm used to measure residuals of stacked points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Rho {
    /// Plain normalized l^p over all components.
    Lp { p: f64 },
    /// `ρ(‖f_1‖_p, ‖f_2‖_p, ..)` with the product norm's geometric weights.
    Product(ProductNorm),
}

impl Default for Rho {
    fn default() -> Self {
        Rho::Product(ProductNorm::default())
    }
}

impl Rho {
    pub fn p(&self) -> f64 {
        match self {
            Rho::Lp { p } => *p,
            Rho::Product(n) => n.p,
        }
    }

    pub fn component_weight(&self, j: usize) -> f64 {
        match self {
            Rho::Lp { .. } => 1.0,
            Rho::Product(n) => n.weight(j),
        }
    }

    /// Per-coordinate mass `m_i = Σ_j w_j |f_j(i)|^p / d`, so `ρ(χ_C f)^p = Σ_{i∈C} m_i`.
    fn masses(&self, f: &[f64], d: usize, out: &mut [f64]) {
        let p = self.p();
        out.iter_mut().for_each(|m| *m = 0.0);
        for (j, comp) in f.chunks(d).enumerate() {
            let w = self.component_weight(j) / d as f64;
            for (m, x) in out.iter_mut().zip(comp) {
                *m += w * pow_abs(*x, p);
            }
        }
    }

    /// ρ of a stacked point.
    pub fn eval(&self, f: &[f64], d: usize) -> f64 {
        let mut m = vec![0.0; d];
        self.masses(f, d, &mut m);
        m.iter().sum::<f64>().powf(1.0 / self.p())
    }
}

#[inline]
fn pow_abs(x: f64, p: f64) -> f64 {
    if p == 2.0 {
        x * x
    } else {
        x.abs().powf(p)
    }
}

/// Finite family of stacked points in `l^p(d)^components`.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    d: usize,
    components: usize,
    points: Vec<Vec<f64>>,
}

impl PointCloud {
    pub fn new(d: usize, components: usize, points: Vec<Vec<f64>>) -> Result<Self> {
        if d == 0 || components == 0 {
            return Err(Error::Parameter("cloud needs d >= 1 and at least one component".into()));
        }
        for (i, p) in points.iter().enumerate() {
            if p.len() != d * components {
                return Err(Error::Dimension(format!("point {i} has length {}, expected {}", p.len(), d * components)));
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::Parameter(format!("point {i} has non-finite entries")));
            }
        }
        Ok(Self { d, components, points })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn dim(&self) -> usize {
        self.d * self.components
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Number of coordinates that may be deleted: `d − ⌈(1−ε)d⌉`.
pub fn cut_budget(d: usize, eps: f64) -> usize {
    let keep = ((1.0 - eps) * d as f64 - 1e-9).ceil().max(0.0) as usize;
    d - keep.min(d)
}

/// `Σ m − (sum of the k largest m)`, i.e. the best-cut residual mass, plus the cut indices.
fn best_cut(m: &[f64], k: usize) -> (f64, Vec<usize>) {
    let total: f64 = m.iter().sum();
    if k == 0 {
        return (total, Vec::new());
    }
    let mut idx: Vec<usize> = (0..m.len()).collect();
    idx.sort_by(|&a, &b| m[b].total_cmp(&m[a]).then(a.cmp(&b)));
    idx.truncate(k);
    let removed: f64 = idx.iter().map(|&i| m[i]).sum();
    idx.sort_unstable();
    ((total - removed).max(0.0), idx)
}

fn best_cut_mass(m: &mut [f64], k: usize, total: f64) -> f64 {
    if k == 0 {
        return total;
    }
    if k >= m.len() {
        return 0.0;
    }
    let pivot = m.len() - k;
    m.select_nth_unstable_by(pivot, |a, b| a.total_cmp(b));
    let removed: f64 = m[pivot..].iter().sum();
    (total - removed).max(0.0)
}

/// Witness for one point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointWitness {
    /// Coordinates kept (the set `C`).
    pub kept: Vec<usize>,
    pub residual: f64,
    /// Coefficients of the approximating vector in the given basis.
    pub coeffs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoveringResult {
    pub dim: usize,
    pub basis: Vec<Vec<f64>>,
    pub per_point: Vec<PointWitness>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Containment {
    Contained(CoveringResult),
    Failed { point: usize, residual: f64 },
}

impl Containment {
    pub fn is_contained(&self) -> bool {
        matches!(self, Containment::Contained(_))
    }
}

/// Weighted least squares of `f` on the span of `basis` over the kept coordinates.
fn fit(basis: &[Vec<f64>], f: &[f64], keep: &[bool], d: usize, rho: &Rho) -> Vec<f64> {
    let r = basis.len();
    if r == 0 {
        return Vec::new();
    }
    let rows: Vec<(usize, f64)> = (0..f.len())
        .filter(|&c| keep[c % d])
        .map(|c| (c, (rho.component_weight(c / d) / d as f64).sqrt()))
        .collect();
    let a = DMatrix::from_fn(rows.len(), r, |i, k| basis[k][rows[i].0] * rows[i].1);
    let b = DVector::from_fn(rows.len(), |i, _| f[rows[i].0] * rows[i].1);
    let svd = a.svd(true, true);
    let tol = svd.singular_values.max() * 1e-12;
    match svd.solve(&b, tol) {
        Ok(c) => c.as_slice().to_vec(),
        Err(_) => vec![0.0; r],
    }
}

fn combine(basis: &[Vec<f64>], coeffs: &[f64], len: usize) -> Vec<f64> {
    let mut g = vec![0.0; len];
    for (b, c) in basis.iter().zip(coeffs) {
        for (gi, bi) in g.iter_mut().zip(b) {
            *gi += c * bi;
        }
    }
    g
}

/// Tests whether every point lies within ρ-distance ε of `span(basis)` after deleting at
/// most `d − ⌈(1−ε)d⌉` coordinates of its own choosing. When `bound` is given the
/// approximating vector is scaled into the ρ-ball of that radius.
pub fn epsilon_contains(cloud: &PointCloud, basis: &[Vec<f64>], eps: f64, bound: Option<f64>, rho: &Rho) -> Result<Containment> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Parameter(format!("ε = {eps} outside (0,1)")));
    }
    if let Some(b) = basis.iter().find(|b| b.len() != cloud.dim()) {
        return Err(Error::Dimension(format!("basis vector of length {}, cloud dim {}", b.len(), cloud.dim())));
    }
    let d = cloud.d;
    let k = cut_budget(d, eps);
    let p = rho.p();
    let mut per_point = Vec::with_capacity(cloud.len());
    for (pi, f) in cloud.points.iter().enumerate() {
        let mut keep = vec![true; d];
        let mut best: Option<(f64, Vec<usize>, Vec<f64>)> = None;
        for _ in 0..10 {
            let mut coeffs = fit(basis, f, &keep, d, rho);
            let mut g = combine(basis, &coeffs, f.len());
            if let Some(m) = bound {
                let n = rho.eval(&g, d);
                if n > m && n > 0.0 {
                    let s = m / n;
                    g.iter_mut().for_each(|x| *x *= s);
                    coeffs.iter_mut().for_each(|x| *x *= s);
                }
            }
            let e: Vec<f64> = f.iter().zip(&g).map(|(a, b)| a - b).collect();
            let mut m = vec![0.0; d];
            rho.masses(&e, d, &mut m);
            let (mass, cut) = best_cut(&m, k);
            let res = mass.powf(1.0 / p);
            let improved = best.as_ref().is_none_or(|b| res < b.0 - 1e-15);
            let new_keep: Vec<bool> = (0..d).map(|i| cut.binary_search(&i).is_err()).collect();
            let stable = new_keep == keep;
            if improved {
                best = Some((res, cut, coeffs));
            }
            if stable || !improved {
                break;
            }
            keep = new_keep;
        }
        let (res, cut, coeffs) = best.expect("at least one iteration");
        if res >= eps - TIE_TOL {
            return Ok(Containment::Failed { point: pi, residual: res });
        }
        per_point.push(PointWitness {
            kept: (0..d).filter(|i| cut.binary_search(i).is_err()).collect(),
            residual: res,
            coeffs,
        });
    }
    Ok(Containment::Contained(CoveringResult {
        dim: crate::lp::numeric_rank(basis),
        basis: basis.to_vec(),
        per_point,
    }))
}

/// Principal directions of the ρ-scaled cloud (uncentered), by decreasing variance.
struct Principal {
    /// Orthonormal directions in scaled coordinates, one per column.
    dirs: DMatrix<f64>,
    /// `coeffs[(i, k)] = ⟨x_i, dir_k⟩`.
    coeffs: DMatrix<f64>,
    scale: Vec<f64>,
}

fn principal(cloud: &PointCloud, rho: &Rho) -> Principal {
    let (n, dim, d) = (cloud.len(), cloud.dim(), cloud.d);
    let scale: Vec<f64> = (0..dim).map(|c| (rho.component_weight(c / d) / d as f64).sqrt()).collect();
    let x = DMatrix::from_fn(n, dim, |i, c| cloud.points[i][c] * scale[c]);
    if n == 0 {
        return Principal {
            dirs: DMatrix::zeros(dim, 0),
            coeffs: DMatrix::zeros(0, 0),
            scale,
        };
    }
    let (vals, vecs, gram_side) = if n <= dim {
        let e = SymmetricEigen::new(&x * x.transpose());
        (e.eigenvalues, e.eigenvectors, true)
    } else {
        let e = SymmetricEigen::new(x.transpose() * &x);
        (e.eigenvalues, e.eigenvectors, false)
    };
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]).then(a.cmp(&b)));
    let top = vals.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<usize> = order.into_iter().filter(|&k| vals[k] > top * 1e-13 && vals[k] > 0.0).collect();
    let r = keep.len();
    let mut dirs = DMatrix::zeros(dim, r);
    for (col, &k) in keep.iter().enumerate() {
        let v = if gram_side {
            (x.transpose() * vecs.column(k)) / vals[k].sqrt()
        } else {
            vecs.column(k).into_owned()
        };
        dirs.set_column(col, &v);
    }
    let coeffs = &x * &dirs;
    Principal { dirs, coeffs, scale }
}

/// Numerical rank of the cloud (the ε → 0 limit of greedy covering dimension).
pub fn cloud_rank(cloud: &PointCloud) -> usize {
    principal(cloud, &Rho::Lp { p: 2.0 }).dirs.ncols()
}

/// Greedy covering dimensions for several ε at once, with the shared principal basis.
/// Returns one dimension per ε and the basis (in original coordinates) of the largest one.
pub fn d_eps_greedy_multi(cloud: &PointCloud, eps: &[f64], rho: &Rho) -> Result<(Vec<usize>, Vec<Vec<f64>>)> {
    for &e in eps {
        if !(e > 0.0 && e < 1.0) {
            return Err(Error::Parameter(format!("ε = {e} outside (0,1)")));
        }
    }
    let d = cloud.d;
    let p = rho.p();
    let pc = principal(cloud, rho);
    let rank = pc.dirs.ncols();
    let budgets: Vec<usize> = eps.iter().map(|&e| cut_budget(d, e)).collect();
    let thresholds: Vec<f64> = eps.iter().map(|&e| (e - TIE_TOL).max(0.0).powf(p)).collect();
    let per_point: Vec<Vec<usize>> = (0..cloud.len())
        .into_par_iter()
        .map(|i| {
            let mut e: Vec<f64> = cloud.points[i].iter().zip(&pc.scale).map(|(a, s)| a * s).collect();
            let mut need: Vec<Option<usize>> = vec![None; eps.len()];
            let mut m = vec![0.0; d];
            let mut work = vec![0.0; d];
            for r in 0..=rank {
                if r > 0 {
                    let c = pc.coeffs[(i, r - 1)];
                    for (ev, dv) in e.iter_mut().zip(pc.dirs.column(r - 1).iter()) {
                        *ev -= c * dv;
                    }
                }
                m.iter_mut().for_each(|v| *v = 0.0);
                for (cidx, v) in e.iter().enumerate() {
                    let raw = v / pc.scale[cidx];
                    m[cidx % d] += pc.scale[cidx] * pc.scale[cidx] * pow_abs(raw, p);
                }
                let total: f64 = m.iter().sum();
                for (t, slot) in need.iter_mut().enumerate() {
                    if slot.is_none() {
                        work.copy_from_slice(&m);
                        if best_cut_mass(&mut work, budgets[t], total) < thresholds[t] {
                            *slot = Some(r);
                        }
                    }
                }
                if need.iter().all(Option::is_some) {
                    break;
                }
            }
            // numerical residue at full rank: fall back to the full ambient space
            need.into_iter().map(|n| n.unwrap_or(cloud.dim())).collect()
        })
        .collect();
    let dims: Vec<usize> = (0..eps.len())
        .map(|t| per_point.iter().map(|v| v[t]).max().unwrap_or(0))
        .collect();
    let rmax = dims.iter().copied().max().unwrap_or(0);
    let basis: Vec<Vec<f64>> = if rmax > rank {
        (0..cloud.dim())
            .map(|c| {
                let mut v = vec![0.0; cloud.dim()];
                v[c] = 1.0;
                v
            })
            .collect()
    } else {
        (0..rmax)
            .map(|k| pc.dirs.column(k).iter().zip(&pc.scale).map(|(v, s)| v / s).collect())
            .collect()
    };
    Ok((dims, basis))
}

/// Dimension of a principal subspace that ε-contains the cloud; an upper bound on `d_ε`.
pub fn d_eps_greedy(cloud: &PointCloud, eps: f64, rho: &Rho) -> Result<usize> {
    Ok(d_eps_greedy_multi(cloud, &[eps], rho)?.0[0])
}

pub const EXACT_MAX_D: usize = 8;
pub const EXACT_MAX_POINTS: usize = 32;
const EXACT_BUDGET: u64 = 6_000_000;

fn combinations(n: usize, r: usize) -> u64 {
    if r > n {
        return 0;
    }
    let mut c: u128 = 1;
    for i in 0..r {
        c = c * (n - i) as u128 / (i + 1) as u128;
    }
    c.min(u64::MAX as u128) as u64
}

fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let r = idx.len();
    for i in (0..r).rev() {
        if idx[i] < n - r + i {
            idx[i] += 1;
            for j in i + 1..r {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn all_cuts(d: usize, k: usize) -> Vec<Vec<bool>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        let mut keep = vec![true; d];
        idx.iter().for_each(|&i| keep[i] = false);
        out.push(keep);
        if k == 0 || !next_combination(&mut idx, d) {
            break;
        }
    }
    out
}

/// Residual² of projecting column `f` onto the span of columns `s` under a Gram matrix,
/// via pivoted incremental Cholesky (dependent columns are skipped).
fn gram_residual(g: &DMatrix<f64>, s: &[usize], f: usize) -> f64 {
    let r = s.len();
    let mut l = vec![0.0; r * r];
    let mut y = vec![0.0; r];
    let mut accepted: Vec<usize> = Vec::with_capacity(r);
    let diag_max = s.iter().map(|&a| g[(a, a)]).fold(0.0, f64::max);
    let mut res = g[(f, f)];
    for (a, &sa) in s.iter().enumerate() {
        let mut v = g[(sa, sa)];
        let mut row = vec![0.0; r];
        for &b in &accepted {
            let mut dot = g[(sa, s[b])];
            for &c in &accepted {
                if c >= b {
                    break;
                }
                dot -= row[c] * l[b * r + c];
            }
            row[b] = dot / l[b * r + b];
            v -= row[b] * row[b];
        }
        if v <= 1e-12 * diag_max.max(1e-300) {
            continue;
        }
        let piv = v.sqrt();
        for &b in &accepted {
            l[a * r + b] = row[b];
        }
        l[a * r + a] = piv;
        let mut t = g[(sa, f)];
        for &b in &accepted {
            t -= l[a * r + b] * y[b];
        }
        y[a] = t / piv;
        res -= y[a] * y[a];
        accepted.push(a);
    }
    res.max(0.0)
}

/// Exact covering dimension on the oracle regime (`d ≤ 8`, at most 32 points, p = 2
/// residuals exact; other p use least-squares fits and so may overestimate).
///
/// Candidate subspaces are spans of point subsets drawn from the points and their
/// cut refinements `χ_{K^c} f` (`|K|` equal to the cut budget), together with the nested
/// principal subspaces. Dimensions are searched upward; the first feasible one is returned.
pub fn d_eps_exact(cloud: &PointCloud, eps: f64, rho: &Rho) -> Result<usize> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Parameter(format!("ε = {eps} outside (0,1)")));
    }
    let d = cloud.d;
    if d > EXACT_MAX_D || cloud.len() > EXACT_MAX_POINTS {
        return Err(Error::OracleScope(format!(
            "d = {d}, {} points (limits {EXACT_MAX_D}, {EXACT_MAX_POINTS})",
            cloud.len()
        )));
    }
    let k = cut_budget(d, eps);
    let p = rho.p();
    let dim = cloud.dim();
    let cuts = all_cuts(d, k);
    let n = cloud.len();

    // pool of spanning candidates: points, then refinements
    let mut pool: Vec<Vec<f64>> = cloud.points.clone();
    if k > 0 {
        for f in &cloud.points {
            for keep in &cuts {
                pool.push(f.iter().enumerate().map(|(c, v)| if keep[c % d] { *v } else { 0.0 }).collect());
            }
        }
    }
    let mut uniq: Vec<Vec<f64>> = Vec::new();
    for v in pool {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-14 {
            continue;
        }
        let dup = uniq.iter().any(|u| {
            let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
            (dot.abs() - nu * norm).abs() <= 1e-12 * nu * norm
        });
        if !dup {
            uniq.push(v);
        }
    }
    let pool = uniq;
    let pc = principal(cloud, rho);
    let point_rank = pc.dirs.ncols();
    let principal_basis = |r: usize| -> Vec<Vec<f64>> {
        (0..r)
            .map(|k| pc.dirs.column(k).iter().zip(&pc.scale).map(|(v, s)| v / s).collect())
            .collect()
    };

    // Gram matrices per cut over [pool | points] with the ρ weights (p = 2 geometry)
    let scale: Vec<f64> = (0..dim).map(|c| rho.component_weight(c / d) / d as f64).collect();
    let all: Vec<&Vec<f64>> = pool.iter().chain(cloud.points.iter()).collect();
    let grams: Vec<DMatrix<f64>> = cuts
        .iter()
        .map(|keep| {
            DMatrix::from_fn(all.len(), all.len(), |a, b| {
                (0..dim)
                    .filter(|c| keep[c % d])
                    .map(|c| scale[c] * all[a][c] * all[b][c])
                    .sum()
            })
        })
        .collect();
    let thresh = (eps - TIE_TOL).max(0.0);
    let np = pool.len();

    let feasible_subset = |s: &[usize]| -> bool {
        if p == 2.0 {
            (0..n).all(|i| {
                cuts.iter().enumerate().any(|(ci, _)| gram_residual(&grams[ci], s, np + i).sqrt() < thresh)
            })
        } else {
            let basis: Vec<Vec<f64>> = s.iter().map(|&j| pool[j].clone()).collect();
            let single = |i: usize| PointCloud {
                d,
                components: cloud.components,
                points: vec![cloud.points[i].clone()],
            };
            (0..n).all(|i| {
                cuts.iter().any(|keep| {
                    let c = fit(&basis, &cloud.points[i], keep, d, rho);
                    let g = combine(&basis, &c, dim);
                    let e: Vec<f64> = single(i).points[0].iter().zip(&g).map(|(a, b)| a - b).collect();
                    let mut m = vec![0.0; d];
                    rho.masses(&e, d, &mut m);
                    let mass: f64 = (0..d).filter(|&j| keep[j]).map(|j| m[j]).sum();
                    mass.powf(1.0 / p) < thresh
                })
            })
        }
    };

    let mut spent: u64 = 0;
    for r in 0..point_rank {
        if epsilon_contains(cloud, &principal_basis(r), eps, None, rho)?.is_contained() {
            return Ok(r);
        }
        if r == 0 {
            continue;
        }
        let total = combinations(np, r);
        spent = spent.saturating_add(total);
        if spent > EXACT_BUDGET {
            return Err(Error::OracleScope(format!(
                "candidate family exceeds {EXACT_BUDGET} subspaces at dimension {r} (pool {np})"
            )));
        }
        let firsts: Vec<usize> = (0..np).collect();
        let found = firsts.par_iter().any(|&first| {
            if r == 1 {
                return feasible_subset(&[first]);
            }
            let rest = np - first - 1;
            if rest < r - 1 {
                return false;
            }
            let mut idx: Vec<usize> = (0..r - 1).collect();
            let mut s = vec![0; r];
            loop {
                s[0] = first;
                for (t, &v) in idx.iter().enumerate() {
                    s[t + 1] = first + 1 + v;
                }
                if feasible_subset(&s) {
                    return true;
                }
                if !next_combination(&mut idx, rest) {
                    return false;
                }
            }
        });
        if found {
            return Ok(r);
        }
    }
    Ok(point_rank)
}

/// Root of a monotone relation with its clamp flag.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KappaValue {
    pub value: f64,
    /// Set when no root lies in `[0,1]` and a boundary value was returned.
    pub clamped: bool,
}

fn bisect_increasing(target: f64, f: impl Fn(f64) -> f64) -> KappaValue {
    let (lo_v, hi_v) = (f(0.0), f(1.0));
    if target <= lo_v {
        return KappaValue { value: 0.0, clamped: target < lo_v };
    }
    if target >= hi_v {
        return KappaValue { value: 1.0, clamped: target > hi_v };
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        if hi - lo <= 1e-10 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    KappaValue { value: 0.5 * (lo + hi), clamped: false }
}

/// `ln` of the right-hand side `√2 ε^{(1−κ)−ε} (2+4ε)^κ (1/ε)^ε (1/(1−ε))^{1−ε}`.
pub fn kappa_log_rhs(kappa: f64, eps: f64) -> f64 {
    0.5 * 2f64.ln() + ((1.0 - kappa) - eps) * eps.ln() + kappa * (2.0 + 4.0 * eps).ln() - eps * eps.ln()
        - (1.0 - eps) * (1.0 - eps).ln()
}

/// Smallest covering fraction compatible with volume ratio `α^D` at scale ε. The exponent
/// `p` only enters the finite-size constants, which vanish in the limit.
pub fn kappa(alpha: f64, eps: f64, p: f64) -> Result<KappaValue> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Parameter(format!("α = {alpha} outside (0,1]")));
    }
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::Parameter(format!("ε = {eps} outside (0,1/2)")));
    }
    if !(p >= 1.0) {
        return Err(Error::Parameter(format!("p = {p} < 1")));
    }
    Ok(bisect_increasing(alpha.ln(), |k| kappa_log_rhs(k, eps)))
}

fn xlnx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// `ln` of `((1−q)^{1−q} / ((q−ε)^{q−ε} ε^ε (1−ε)^{1−ε})) 4^{κq} 2^q ε^{(1−κ)q}`.
pub fn kappa_proj_log_rhs(kappa: f64, eps: f64, q: f64) -> f64 {
    xlnx(1.0 - q) - xlnx(q - eps) - xlnx(eps) - xlnx(1.0 - eps)
        + kappa * q * 4f64.ln()
        + q * 2f64.ln()
        + (1.0 - kappa) * q * eps.ln()
}

/// Packing bound for images under a projection of normalized trace `q`.
pub fn kappa_proj(alpha: f64, eps: f64, q: f64) -> Result<KappaValue> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Parameter(format!("α = {alpha} outside (0,1]")));
    }
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::Parameter(format!("ε = {eps} outside (0,1/2)")));
    }
    if !(q > eps && q <= 1.0) {
        return Err(Error::Parameter(format!("q = {q} outside (ε,1]")));
    }
    Ok(bisect_increasing(alpha.ln(), |k| kappa_proj_log_rhs(k, eps, q)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const L2: Rho = Rho::Lp { p: 2.0 };

    fn unit(d: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        v
    }

    #[test]
    fn contains_examples() {
        let c = PointCloud::new(4, 1, vec![unit(4, 0)]).unwrap();
        match epsilon_contains(&c, &[unit(4, 0)], 0.1, None, &L2).unwrap() {
            Containment::Contained(r) => {
                assert_eq!(r.per_point[0].kept, vec![0, 1, 2, 3]);
                assert!(r.per_point[0].residual < 1e-15);
            }
            other => panic!("{other:?}"),
        }
        // orthogonal point whose mass is spread: any 3/4 of it keeps norm >= ε
        let v = vec![0.0, 1.0, 1.0, 1.0];
        let c = PointCloud::new(4, 1, vec![v]).unwrap();
        assert!(!epsilon_contains(&c, &[unit(4, 0)], 0.3, None, &L2).unwrap().is_contained());
        // disagreement on ⌊εd⌋ coordinates is cut away
        let mut f = vec![2.0; 10];
        f[3] = -7.0;
        let c = PointCloud::new(10, 1, vec![f]).unwrap();
        match epsilon_contains(&c, &[vec![1.0; 10]], 0.1, None, &L2).unwrap() {
            Containment::Contained(r) => {
                assert_eq!(r.per_point[0].kept.len(), 9);
                assert!(!r.per_point[0].kept.contains(&3));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bound_is_enforced() {
        let c = PointCloud::new(2, 1, vec![vec![4.0, 4.0]]).unwrap();
        assert!(epsilon_contains(&c, &[vec![1.0, 1.0]], 0.1, None, &L2).unwrap().is_contained());
        assert!(!epsilon_contains(&c, &[vec![1.0, 1.0]], 0.1, Some(1.0), &L2).unwrap().is_contained());
    }

    #[test]
    fn exact_examples() {
        let c = PointCloud::new(4, 1, vec![vec![0.0; 4]]).unwrap();
        assert_eq!(d_eps_exact(&c, 0.1, &L2).unwrap(), 0);
        let e1 = unit(4, 0);
        let c = PointCloud::new(4, 1, vec![e1.clone(), e1.iter().map(|x| 2.0 * x).collect()]).unwrap();
        assert_eq!(d_eps_exact(&c, 0.1, &L2).unwrap(), 1);
        let big = PointCloud::new(9, 1, vec![vec![0.0; 9]]).unwrap();
        assert!(matches!(d_eps_exact(&big, 0.1, &L2), Err(Error::OracleScope(_))));
    }

    #[test]
    fn exact_plane_with_small_noise() {
        // construction oracle: noise of ρ-norm ε/4 stays below the residual budget
        let eps = 0.2;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Vec<f64>> = (0..8)
            .map(|_| {
                let t: f64 = rng.random::<f64>() * std::f64::consts::TAU;
                let mut v = vec![2.0 * t.cos(), 2.0 * t.sin(), 0.0, 0.0];
                let n: Vec<f64> = (0..4).map(|_| rng.random::<f64>() - 0.5).collect();
                let nn = L2.eval(&n, 4);
                for (a, b) in v.iter_mut().zip(&n) {
                    *a += b * eps / 4.0 / nn;
                }
                v
            })
            .collect();
        let c = PointCloud::new(4, 1, pts).unwrap();
        assert_eq!(d_eps_exact(&c, eps, &L2).unwrap(), 2);
    }

    #[test]
    fn greedy_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b1: Vec<f64> = (0..12).map(|_| rng.random::<f64>() - 0.5).collect();
        let b2: Vec<f64> = (0..12).map(|_| rng.random::<f64>() - 0.5).collect();
        let b3: Vec<f64> = (0..12).map(|_| rng.random::<f64>() - 0.5).collect();
        let pts: Vec<Vec<f64>> = (0..30)
            .map(|_| {
                let (a, b, c): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
                (0..12).map(|i| 3.0 * (a * b1[i] + b * b2[i] + c * b3[i])).collect()
            })
            .collect();
        let c = PointCloud::new(12, 1, pts).unwrap();
        assert_eq!(d_eps_greedy(&c, 1e-6, &L2).unwrap(), 3);
        let basis = PointCloud::new(7, 1, (0..7).map(|i| unit(7, i)).collect()).unwrap();
        assert_eq!(d_eps_greedy(&basis, 1e-3, &L2).unwrap(), 7);
    }

    #[test]
    fn greedy_dominates_exact_and_self_certifies() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..100 {
            let d = 3 + trial % 4;
            let n = 3 + trial % 5;
            let eps = [0.15, 0.3, 0.45][trial % 3];
            let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()).collect();
            let c = PointCloud::new(d, 1, pts).unwrap();
            let (g, basis) = d_eps_greedy_multi(&c, &[eps], &L2).unwrap();
            let e = d_eps_exact(&c, eps, &L2).unwrap();
            assert!(g[0] >= e, "trial {trial}: greedy {} < exact {e}", g[0]);
            assert!(epsilon_contains(&c, &basis, eps, None, &L2).unwrap().is_contained());
        }
    }

    #[test]
    fn greedy_monotone_in_eps() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<Vec<f64>> = (0..40).map(|_| (0..20).map(|_| rng.random::<f64>() - 0.5).collect()).collect();
        let c = PointCloud::new(10, 2, pts).unwrap();
        let eps = [0.01, 0.05, 0.1, 0.2, 0.4];
        let (dims, _) = d_eps_greedy_multi(&c, &eps, &Rho::default()).unwrap();
        assert!(dims.windows(2).all(|w| w[0] >= w[1]), "{dims:?}");
    }

    fn kappa_closed(alpha: f64, eps: f64) -> f64 {
        // the relation is linear in κ after taking logs
        let c0 = kappa_log_rhs(0.0, eps);
        let slope = (2.0 + 4.0 * eps).ln() - eps.ln();
        ((alpha.ln() - c0) / slope).clamp(0.0, 1.0)
    }

    #[test]
    fn kappa_matches_log_linear_solution() {
        for &(a, e) in &[(0.5, 0.01), (0.9, 0.05), (1.0, 0.2), (0.3, 0.001)] {
            let k = kappa(a, e, 2.0).unwrap();
            assert!((k.value - kappa_closed(a, e)).abs() < 1e-9, "{a} {e}");
        }
        let e = 0.1;
        let a = kappa_log_rhs(0.0, e).exp();
        assert!(kappa(a, e, 2.0).unwrap().value < 1e-9);
        assert!(kappa(a * 0.5, e, 2.0).unwrap().clamped);
    }

    #[test]
    fn kappa_proj_q1_reduction() {
        // algebraic oracle: q = 1 gives κ = (ln α − ln 2 − ln ε + ε ln ε + 2(1−ε) ln(1−ε)) / (ln 4 − ln ε)
        for &(a, e) in &[(0.9f64, 0.05f64), (0.5, 0.01), (1.0, 0.1)] {
            let oracle = ((a.ln() - 2f64.ln() - e.ln() + e * e.ln() + 2.0 * (1.0 - e) * (1.0 - e).ln())
                / (4f64.ln() - e.ln()))
            .clamp(0.0, 1.0);
            let k = kappa_proj(a, e, 1.0).unwrap().value;
            assert!((k - oracle).abs() < 1e-9, "{k} vs {oracle}");
        }
        let (e, q) = (0.05, 0.5);
        let a = kappa_proj_log_rhs(0.0, e, q).exp();
        assert!(kappa_proj(a.min(1.0), e, q).unwrap().value < 1e-9);
        assert!(kappa_proj(0.5, 0.1, 0.05).is_err());
    }

    #[test]
    fn kappa_monotone_and_limit() {
        for &e in &[0.3, 0.1, 0.01, 1e-3] {
            let mut prev = -1.0;
            for i in 1..=20 {
                let a = i as f64 / 20.0;
                let k = kappa(a, e, 2.0).unwrap().value;
                assert!(k >= prev - 1e-6);
                prev = k;
                let kp = kappa_proj(a, e, 0.5).unwrap().value;
                assert!(kp >= 0.0 && kp <= 1.0);
            }
        }
        let seq: Vec<f64> = [1e-2, 1e-4, 1e-8, 1e-16, 1e-32].iter().map(|&e| kappa(0.5, e, 2.0).unwrap().value).collect();
        assert!(seq.windows(2).all(|w| w[1] >= w[0] - 1e-6));
        assert!(seq[4] > 0.95);
        let seqp: Vec<f64> = [1e-2, 1e-8, 1e-32].iter().map(|&e| kappa_proj(0.5, e, 0.5).unwrap().value).collect();
        assert!(seqp[2] > seqp[0] && seqp[2] > 0.9);
    }

    #[test]
    fn cut_budget_rounding() {
        assert_eq!(cut_budget(10, 0.1), 1);
        assert_eq!(cut_budget(4, 0.2), 0);
        assert_eq!(cut_budget(5, 0.2), 1);
        assert_eq!(cut_budget(100, 0.05), 5);
    }
}
