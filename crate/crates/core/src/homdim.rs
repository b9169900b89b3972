//! Almost-equivariant maps `V → l^p(d)`, the `T_ξ` samplers, and the dimension estimator.
//!
//! A representation is finite-dimensional here: each atom `x` carries a fiber `V_x = R^{k_x}`
//! (constant on orbits) and translation along the relation is `(φ·v)(x) = π(x,φ^{-1}x) v(φ^{-1}x)`.
//! Every fiber coordinate carries a label `(slot, y)`: it is read as the value at the pair
//! `(x, y)` of a function on the relation, in copy `slot` of `L²(R)`. Labels are orbit-constant.

use nalgebra::{DMatrix, SymmetricEigen};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::PartialMap;
use crate::covering::{self, PointCloud, Rho};
use crate::error::{Error, Result};
use crate::graphings::{fiber_graph, Graphing};
use crate::lp::{check_orbit_profile, is_dynamically_generating, support, Cocycle, VectorField};
use crate::relation::{LabelKind, Letter, Model, Word};
use crate::sofic::{extend_to_word, CanonicalExtension, SoficApprox};

/// A representation of a finite relation with a dynamically generating sequence of fields.
#[derive(Clone, Debug)]
pub struct GeneratingSpec {
    model: Model,
    fields: Vec<VectorField>,
    cocycle: Cocycle,
    labels: Vec<Vec<(usize, usize)>>,
    slots: usize,
    offsets: Vec<usize>,
    dim_v: usize,
}

/// Default labels: coordinate `l` of an orbit `o` reads `(l / |o|, o[l mod |o|])`.
fn auto_labels(model: &Model, profile: &[usize]) -> Vec<Vec<(usize, usize)>> {
    (0..model.num_atoms())
        .map(|x| {
            let o = model.rel().orbit(x);
            (0..profile[x]).map(|l| (l / o.len(), o[l % o.len()])).collect()
        })
        .collect()
}

impl GeneratingSpec {
    pub fn new(model: Model, fields: Vec<VectorField>, cocycle: Cocycle, labels: Option<Vec<Vec<(usize, usize)>>>) -> Result<Self> {
        let first = fields.first().ok_or_else(|| Error::model("fields", "at least one field is required"))?;
        let profile = first.profile();
        let n = model.num_atoms();
        if profile.len() != n {
            return Err(Error::model("fields[0]", format!("{} fibers for {n} atoms", profile.len())));
        }
        for (j, f) in fields.iter().enumerate() {
            f.check_profile(&profile).map_err(|e| Error::model(format!("fields[{j}]"), e.to_string()))?;
            if f.fibers.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::model(format!("fields[{j}]"), "non-finite entry"));
            }
        }
        check_orbit_profile(model.rel(), &profile)?;
        cocycle.check(&profile)?;
        let labels = labels.unwrap_or_else(|| auto_labels(&model, &profile));
        if labels.len() != n {
            return Err(Error::model("labels", format!("{} entries for {n} atoms", labels.len())));
        }
        for x in 0..n {
            let lx = &labels[x];
            if lx.len() != profile[x] {
                return Err(Error::model(format!("labels[{x}]"), format!("{} labels for fiber dim {}", lx.len(), profile[x])));
            }
            if let Some(&(_, y)) = lx.iter().find(|&&(_, y)| y >= n || !model.rel().related(x, y)) {
                return Err(Error::model(format!("labels[{x}]"), format!("atom {y} is not in the orbit of {x}")));
            }
            let mut sorted = lx.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != lx.len() {
                return Err(Error::model(format!("labels[{x}]"), "repeated label"));
            }
            let rep = model.rel().orbit(x)[0];
            if labels[rep] != *lx {
                return Err(Error::model(format!("labels[{x}]"), "labels differ inside an orbit"));
            }
        }
        if !is_dynamically_generating(&fields, model.rel(), &cocycle)? {
            return Err(Error::model("fields", "translates do not span every fiber"));
        }
        let slots = labels.iter().flatten().map(|&(s, _)| s + 1).max().unwrap_or(1);
        let mut offsets = Vec::with_capacity(n + 1);
        let mut acc = 0;
        for &k in &profile {
            offsets.push(acc);
            acc += k;
        }
        offsets.push(acc);
        Ok(Self {
            model,
            fields,
            cocycle,
            labels,
            slots,
            offsets,
            dim_v: acc,
        })
    }

    /// `L²(R, μ̄)` with the diagonal indicator `χ_Δ`.
    pub fn l2_relation(model: Model) -> Result<Self> {
        let rel = model.rel();
        let n = rel.num_atoms();
        let labels: Vec<Vec<(usize, usize)>> = (0..n).map(|x| rel.orbit(x).iter().map(|&y| (0, y)).collect()).collect();
        let field = VectorField::new(
            (0..n)
                .map(|x| {
                    let mut v = vec![0.0; rel.orbit(x).len()];
                    v[rel.position_in_orbit(x)] = 1.0;
                    v
                })
                .collect(),
        );
        Self::new(model, vec![field], Cocycle::identity(), Some(labels))
    }

    /// `L²(R, μ̄) q` for the diagonal projection `q` onto the given atoms.
    pub fn l2_projected(model: Model, atoms: &[usize]) -> Result<Self> {
        let rel = model.rel();
        let n = rel.num_atoms();
        let mut keep = vec![false; n];
        for &a in atoms {
            if a >= n {
                return Err(Error::model("projection", format!("atom {a} out of range")));
            }
            keep[a] = true;
        }
        let labels: Vec<Vec<(usize, usize)>> = (0..n)
            .map(|x| rel.orbit(x).iter().filter(|&&y| keep[y]).map(|&y| (0, y)).collect())
            .collect();
        let field = VectorField::new(
            (0..n)
                .map(|x| {
                    let mut v = vec![0.0; labels[x].len()];
                    if keep[x] {
                        let pos = labels[x].iter().position(|&(_, y)| y == x).unwrap();
                        v[pos] = 1.0;
                    }
                    v
                })
                .collect(),
        );
        Self::new(model, vec![field], Cocycle::identity(), Some(labels))
    }

    /// Constant fiber `R^k` with trivial transport; fields `e_l` placed on the smallest atom
    /// of each orbit.
    pub fn finite_orbit(model: Model, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Parameter("fiber dimension must be positive".into()));
        }
        let rel = model.rel();
        let n = rel.num_atoms();
        let fields = (0..k)
            .map(|l| {
                VectorField::new(
                    (0..n)
                        .map(|x| {
                            let mut v = vec![0.0; k];
                            if rel.orbit(x)[0] == x {
                                v[l] = 1.0;
                            }
                            v
                        })
                        .collect(),
                )
            })
            .collect();
        Self::new(model, fields, Cocycle::identity(), None)
    }

    /// Edge functions of a graphing modulo its cycle space, in orthonormal cut-space
    /// coordinates per orbit. Fields are the edge indicators of the graphing's morphisms.
    pub fn edge_quotient(model: Model, graphing: &Graphing) -> Result<Self> {
        if model.rel().blocks() != graphing.rel().blocks() {
            return Err(Error::Dimension("graphing and model live on different relations".into()));
        }
        let rel = model.rel().clone();
        let n = rel.num_atoms();
        let mut bases: Vec<DMatrix<f64>> = Vec::new();
        let mut graphs = Vec::new();
        for o in 0..rel.blocks().len() {
            let g = fiber_graph(graphing, o)?;
            let mut dm = DMatrix::<f64>::zeros(g.num_edges(), g.num_vertices());
            for (e, &(u, v)) in g.edges().iter().enumerate() {
                dm[(e, u)] = -1.0;
                dm[(e, v)] = 1.0;
            }
            let (_, comps) = g.components();
            let r = g.num_vertices() - comps;
            let q = if r == 0 || g.num_edges() == 0 {
                DMatrix::zeros(g.num_edges(), 0)
            } else {
                let svd = dm.svd(true, false);
                let u = svd.u.unwrap();
                let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
                order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
                DMatrix::from_fn(g.num_edges(), r, |i, c| u[(i, order[c])])
            };
            bases.push(q);
            graphs.push(g);
        }
        let dim_of = |x: usize| bases[rel.orbit_index(x)].ncols();
        let mut fields: Vec<VectorField> = Vec::new();
        for phi in graphing.morphisms() {
            let fibers: Vec<Vec<f64>> = (0..n)
                .map(|x| {
                    let o = rel.orbit_index(x);
                    let mut v = vec![0.0; dim_of(x)];
                    if let Some(y) = phi.apply(x).filter(|&y| y != x) {
                        let (e, s) = graphs[o].oriented(rel.position_in_orbit(x), rel.position_in_orbit(y)).unwrap();
                        for (c, vc) in v.iter_mut().enumerate() {
                            *vc = s * bases[o][(e, c)];
                        }
                    }
                    v
                })
                .collect();
            if fibers.iter().flatten().any(|v| v.abs() > 1e-14) {
                fields.push(VectorField::new(fibers));
            }
        }
        if fields.is_empty() {
            fields.push(VectorField::new((0..n).map(|x| vec![0.0; dim_of(x)]).collect()));
        }
        Self::new(model, fields, Cocycle::identity(), None)
    }

    /// Same representation, different generating fields.
    pub fn with_fields(&self, fields: Vec<VectorField>) -> Result<Self> {
        Self::new(self.model.clone(), fields, self.cocycle.clone(), Some(self.labels.clone()))
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn fields(&self) -> &[VectorField] {
        &self.fields
    }

    pub fn cocycle(&self) -> &Cocycle {
        &self.cocycle
    }

    pub fn labels(&self) -> &[Vec<(usize, usize)>] {
        &self.labels
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn profile(&self) -> Vec<usize> {
        self.offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Total number of coordinates of `V`.
    pub fn dim_v(&self) -> usize {
        self.dim_v
    }

    /// Atom owning each flat coordinate.
    fn coordinate_atoms(&self) -> Vec<usize> {
        (0..self.model.num_atoms())
            .flat_map(|x| std::iter::repeat_n(x, self.offsets[x + 1] - self.offsets[x]))
            .collect()
    }

    /// `(φ·v)(x) = π(x, φ^{-1}x) v(φ^{-1}x)` on the range of `φ`, zero elsewhere.
    pub fn act(&self, phi: &PartialMap, v: &VectorField) -> VectorField {
        let mut out = VectorField::zero(&self.profile());
        for (y, x) in phi.pairs() {
            out.fibers[x] = self.cocycle.transport(x, y, &v.fibers[y]);
        }
        out
    }

    /// `Σ_j μ(supp v_j)`.
    pub fn support_upper_bound(&self) -> f64 {
        let space = self.model.rel().space();
        self.fields.iter().map(|f| space.mass(support(f))).sum()
    }

    /// Exact dimension by the orbit formula `Σ_x μ(x) k_x / |O_x|`.
    pub fn exact_dimension(&self) -> BigRational {
        let rel = self.model.rel();
        (0..rel.num_atoms())
            .map(|x| {
                let k = self.offsets[x + 1] - self.offsets[x];
                rel.space().exact_weight(x) * BigRational::new(BigInt::from(k), BigInt::from(rel.orbit(x).len()))
            })
            .fold(BigRational::zero(), |a, b| a + b)
    }

    fn untwist_matrix(&self) -> Option<DMatrix<f64>> {
        if self.cocycle.is_identity() {
            return None;
        }
        let mut m = DMatrix::zeros(self.dim_v, self.dim_v);
        for x in 0..self.model.num_atoms() {
            let (o, k) = (self.offsets[x], self.offsets[x + 1] - self.offsets[x]);
            for c in 0..k {
                let mut e = vec![0.0; k];
                e[c] = 1.0;
                for (r, v) in self.cocycle.untwist(x, &e).into_iter().enumerate() {
                    m[(o + r, o + c)] = v;
                }
            }
        }
        Some(m)
    }
}

/// How `T_ξ` is assembled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sampler {
    /// `T_ξ(f) = Σ_blocks Σ_ψ E_{dom ψ}(f_ψ) σ̂(ψ^{-1}) ξ`; the default partition is into atoms.
    Xi {
        #[serde(default)]
        partition: Option<Vec<Vec<usize>>>,
    },
    /// Periodic sampler over a fundamental domain split into `level` chunks.
    XiN { period: String, level: usize },
}

impl Default for Sampler {
    fn default() -> Self {
        Sampler::Xi { partition: None }
    }
}

/// Precomputed sparse structure of the linear map `ξ ↦ T_ξ`.
#[derive(Clone, Debug)]
pub struct SamplerPlan {
    d: usize,
    slots: usize,
    dim_v: usize,
    /// Per V-coordinate: `(slot, source point, target point, weight)`.
    entries: Vec<Vec<(usize, usize, usize, f64)>>,
    untwist: Option<DMatrix<f64>>,
}

impl SamplerPlan {
    pub fn new(spec: &GeneratingSpec, sigma: &SoficApprox, sampler: &Sampler) -> Result<Self> {
        match sampler {
            Sampler::Xi { partition } => Self::xi(spec, sigma, partition.as_deref()),
            Sampler::XiN { period, level } => Self::xi_n(spec, sigma, period, *level),
        }
    }

    pub fn xi(spec: &GeneratingSpec, sigma: &SoficApprox, partition: Option<&[Vec<usize>]>) -> Result<Self> {
        let model = &spec.model;
        let n = model.num_atoms();
        let ext = CanonicalExtension::new(sigma, model)?;
        if ext.missing_pairs() > 0 {
            return Err(Error::model("generators", "generators do not connect every orbit"));
        }
        let singletons: Vec<Vec<usize>> = (0..n).map(|x| vec![x]).collect();
        let blocks = partition.unwrap_or(&singletons);
        let mut seen = vec![false; n];
        for (bi, b) in blocks.iter().enumerate() {
            if b.is_empty() {
                return Err(Error::model(format!("partition[{bi}]"), "empty block"));
            }
            for &a in b {
                if a >= n || seen[a] {
                    return Err(Error::model(format!("partition[{bi}]"), format!("atom {a} out of range or repeated")));
                }
                seen[a] = true;
            }
        }
        if let Some(a) = seen.iter().position(|s| !s) {
            return Err(Error::model("partition", format!("atom {a} is not covered")));
        }
        let space = model.rel().space();
        let mut entries = vec![Vec::new(); spec.dim_v];
        for (bi, b) in blocks.iter().enumerate() {
            let k = spec.offsets[b[0] + 1] - spec.offsets[b[0]];
            let slots_of = |a: usize| spec.labels[a].iter().map(|&(s, _)| s).collect::<Vec<_>>();
            if b.iter().any(|&a| spec.offsets[a + 1] - spec.offsets[a] != k || slots_of(a) != slots_of(b[0])) {
                return Err(Error::model(format!("partition[{bi}]"), "atoms carry different fibers"));
            }
            let mass: f64 = b.iter().map(|&a| space.weight(a)).sum();
            for l in 0..k {
                let ys: Vec<usize> = b.iter().map(|&a| spec.labels[a][l].1).collect();
                let mut uniq = ys.clone();
                uniq.sort_unstable();
                uniq.dedup();
                if uniq.len() != ys.len() {
                    return Err(Error::model(format!("partition[{bi}]"), "coordinate family is not a partial bijection"));
                }
                let slot = spec.labels[b[0]][l].0;
                let mut shared = Vec::new();
                for (&a2, &y) in b.iter().zip(&ys) {
                    let m = ext.pair_map(y, a2).expect("connected orbit");
                    shared.extend(m.pairs());
                }
                for &a in b {
                    let w = space.weight(a) / mass;
                    entries[spec.offsets[a] + l] = shared.iter().map(|&(s, t)| (slot, s, t, w)).collect();
                }
            }
        }
        Ok(Self {
            d: sigma.d(),
            slots: spec.slots,
            dim_v: spec.dim_v,
            entries,
            untwist: spec.untwist_matrix(),
        })
    }

    /// `T_{ξ,N}(f) = Σ_j Σ_k E_{B_k}(f(α^j ·)) σ(α)^j σ(id_{B_k}) ξ` with `B` the smallest atom
    /// of each orbit split into `level` contiguous chunks, and fiber coordinate `l` using slot `l`.
    pub fn xi_n(spec: &GeneratingSpec, sigma: &SoficApprox, period: &str, level: usize) -> Result<Self> {
        let model = &spec.model;
        let rel = model.rel();
        let size = rel.blocks()[0].len();
        if rel.blocks().iter().any(|b| b.len() != size) {
            return Err(Error::Scope("orbit sizes are not constant".into()));
        }
        let profile = spec.profile();
        let k = profile[0];
        if profile.iter().any(|&kk| kk != k) {
            return Err(Error::Scope("fiber dimension is not constant".into()));
        }
        let letter = Letter::parse(period);
        let alpha = model.letter_map(&letter)?;
        let base: Vec<usize> = rel.blocks().iter().map(|b| b[0]).collect();
        for &x in &base {
            let mut y = x;
            let mut visited = 0;
            loop {
                y = match alpha.apply(y) {
                    Some(v) => v,
                    None => return Err(Error::Scope(format!("`{period}` is not defined on the orbit of {x}"))),
                };
                visited += 1;
                if y == x || visited > size {
                    break;
                }
            }
            if y != x || visited != size {
                return Err(Error::Scope(format!("`{period}` does not cycle the orbit of {x}")));
            }
        }
        if level == 0 || level > base.len() {
            return Err(Error::Parameter(format!("level {level} outside 1..={}", base.len())));
        }
        let d = sigma.d();
        let space = rel.space();
        let mut entries = vec![Vec::new(); spec.dim_v];
        let chunk = base.len().div_ceil(level);
        let mut powers = vec![PartialMap::identity(d)];
        let sa = sigma.letter(&letter)?;
        for j in 1..size {
            powers.push(sa.compose(&powers[j - 1])?);
        }
        for group in base.chunks(chunk) {
            let mass: f64 = group.iter().map(|&x| space.weight(x)).sum();
            let mut diag = vec![false; d];
            for &x in group {
                let p = sigma.image(&Model::atom_label(x))?.to_partial_map();
                for (s, _) in p.pairs() {
                    diag[s] = true;
                }
            }
            let pb = PartialMap::from_mask(&diag);
            for (j, pw) in powers.iter().enumerate() {
                let m = pw.compose(&pb)?;
                let pairs: Vec<(usize, usize)> = m.pairs().collect();
                for &x in group {
                    let mut a = x;
                    for _ in 0..j {
                        a = alpha.apply(a).unwrap();
                    }
                    let w = space.weight(x) / mass;
                    for l in 0..k {
                        entries[spec.offsets[a] + l] = pairs.iter().map(|&(s, t)| (l, s, t, w)).collect();
                    }
                }
            }
        }
        Ok(Self {
            d,
            slots: k.max(1),
            dim_v: spec.dim_v,
            entries,
            untwist: spec.untwist_matrix(),
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    /// Real dimension of the ξ-space.
    pub fn xi_dim(&self) -> usize {
        self.d * self.slots
    }

    /// `T_ξ` as a `d × dim V` matrix; `xi` stacks the slots.
    pub fn build(&self, xi: &[f64]) -> DMatrix<f64> {
        let mut t = DMatrix::zeros(self.d, self.dim_v);
        for (c, col) in self.entries.iter().enumerate() {
            for &(slot, s, tg, w) in col {
                t[(tg, c)] += w * xi[slot * self.d + s];
            }
        }
        match &self.untwist {
            Some(u) => t * u,
            None => t,
        }
    }

    /// Rank of `ξ ↦ (T_ξ v_j)_j`.
    pub fn image_rank(&self, fields: &[Vec<f64>]) -> usize {
        let dx = self.xi_dim();
        let mut m = DMatrix::<f64>::zeros(self.d * fields.len(), dx);
        for (j, v) in fields.iter().enumerate() {
            let u = match &self.untwist {
                Some(un) => (un * nalgebra::DVector::from_column_slice(v)).as_slice().to_vec(),
                None => v.clone(),
            };
            for (c, col) in self.entries.iter().enumerate() {
                if u[c] == 0.0 {
                    continue;
                }
                for &(slot, s, tg, w) in col {
                    m[(j * self.d + tg, slot * self.d + s)] += w * u[c];
                }
            }
        }
        matrix_rank(&m)
    }
}

fn matrix_rank(m: &DMatrix<f64>) -> usize {
    if m.is_empty() {
        return 0;
    }
    let g = if m.nrows() >= m.ncols() { m.transpose() * m } else { m * m.transpose() };
    let e = SymmetricEigen::new(g);
    let top = e.eigenvalues.iter().cloned().fold(0.0, f64::max);
    if top <= 0.0 {
        return 0;
    }
    e.eigenvalues.iter().filter(|&&v| v > top * 1e-10).count()
}

pub fn sample_t_xi(xi: &[f64], spec: &GeneratingSpec, partition: Option<&[Vec<usize>]>, sigma: &SoficApprox) -> Result<DMatrix<f64>> {
    let plan = SamplerPlan::xi(spec, sigma, partition)?;
    check_xi_len(xi, &plan)?;
    Ok(plan.build(xi))
}

pub fn sample_t_xi_n(xi: &[f64], spec: &GeneratingSpec, period: &str, level: usize, sigma: &SoficApprox) -> Result<DMatrix<f64>> {
    let plan = SamplerPlan::xi_n(spec, sigma, period, level)?;
    check_xi_len(xi, &plan)?;
    Ok(plan.build(xi))
}

fn check_xi_len(xi: &[f64], plan: &SamplerPlan) -> Result<()> {
    if xi.len() != plan.xi_dim() {
        return Err(Error::Dimension(format!("ξ has length {}, sampler expects {}", xi.len(), plan.xi_dim())));
    }
    Ok(())
}

/// Operator norm `V → l^p(d)` (normalized counting measure). Exact for `p = 2`; otherwise a
/// Cauchy–Schwarz/Hölder upper bound.
pub fn operator_norm(t: &DMatrix<f64>, spec: &GeneratingSpec, p: f64) -> f64 {
    let atoms = spec.coordinate_atoms();
    let space = spec.model.rel().space();
    let d = t.nrows() as f64;
    if t.ncols() == 0 {
        return 0.0;
    }
    if p == 2.0 {
        let mut s = t.clone();
        for (c, &a) in atoms.iter().enumerate() {
            s.column_mut(c).scale_mut(1.0 / space.weight(a).sqrt());
        }
        let g = s.transpose() * s;
        let top = SymmetricEigen::new(g).eigenvalues.iter().cloned().fold(0.0, f64::max);
        return (top.max(0.0) / d).sqrt();
    }
    let col_norm = |c: usize| (t.column(c).iter().map(|x| x.abs().powf(p)).sum::<f64>() / d).powf(1.0 / p);
    let per_atom: Vec<f64> = (0..spec.model.num_atoms())
        .map(|x| {
            let c: f64 = (spec.offsets[x]..spec.offsets[x + 1]).map(|c| col_norm(c).powi(2)).sum::<f64>().sqrt();
            c * space.weight(x).powf(-1.0 / p)
        })
        .collect();
    if p == 1.0 {
        per_atom.into_iter().fold(0.0, f64::max)
    } else {
        let q = p / (p - 1.0);
        per_atom.iter().map(|c| c.powf(q)).sum::<f64>().powf(1.0 / q)
    }
}

/// `Hom(F, m, δ)` parameters for one check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomParams {
    pub letters: Vec<String>,
    pub m: usize,
    pub delta: f64,
    pub eps: f64,
    pub p: f64,
}

impl HomParams {
    pub fn validate(&self) -> Result<()> {
        if self.m < 1 {
            return Err(Error::Parameter("word length m must be at least 1".into()));
        }
        if !(self.delta > 0.0) {
            return Err(Error::Parameter(format!("δ = {} must be positive", self.delta)));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::Parameter(format!("ε = {} outside (0,1)", self.eps)));
        }
        if !(self.p >= 1.0) {
            return Err(Error::Parameter(format!("p = {} < 1", self.p)));
        }
        Ok(())
    }
}

const MAX_WORDS: usize = 20_000;

/// Reduced words of length `0..=m` over the letters and inverses of non-projection labels.
pub fn hom_words(model: &Model, letters: &[String], m: usize) -> Result<Vec<Word>> {
    let mut alphabet = Vec::new();
    for l in letters {
        match model.resolve(l)? {
            LabelKind::Generator(_) => {
                alphabet.push(Letter::new(l.clone()));
                alphabet.push(Letter::inv(l.clone()));
            }
            LabelKind::Projection(_) => alphabet.push(Letter::new(l.clone())),
        }
    }
    let mut words: Vec<Word> = vec![Vec::new()];
    let mut frontier: Vec<Word> = vec![Vec::new()];
    for _ in 0..m {
        let mut next = Vec::new();
        for w in &frontier {
            for a in &alphabet {
                if let Some(last) = w.last() {
                    if last.label == a.label && (last.inverse != a.inverse || !a.inverse && !last.inverse && model_is_projection(model, &a.label)) {
                        continue;
                    }
                }
                let mut v = w.clone();
                v.push(a.clone());
                next.push(v);
            }
        }
        words.extend(next.iter().cloned());
        if words.len() > MAX_WORDS {
            return Err(Error::Parameter(format!("more than {MAX_WORDS} test words; reduce F or m")));
        }
        frontier = next;
    }
    Ok(words)
}

fn model_is_projection(model: &Model, label: &str) -> bool {
    matches!(model.resolve(label), Ok(LabelKind::Projection(_)))
}

/// Everything about a `(spec, σ, F, m, δ)` check that does not depend on `T`.
#[derive(Clone, Debug)]
pub struct HomContext {
    d: usize,
    p: f64,
    delta: f64,
    budget: usize,
    base: Vec<Vec<f64>>,
    /// `(σ(w), field index, w·v_j)` per test.
    tests: Vec<(usize, usize, Vec<f64>)>,
    sigma_words: Vec<PartialMap>,
    labels: Vec<String>,
}

impl HomContext {
    pub fn new(spec: &GeneratingSpec, sigma: &SoficApprox, params: &HomParams) -> Result<Self> {
        params.validate()?;
        let words = hom_words(&spec.model, &params.letters, params.m)?;
        let d = sigma.d();
        let base: Vec<Vec<f64>> = spec.fields.iter().map(VectorField::flatten).collect();
        let mut tests = Vec::new();
        let mut sigma_words = Vec::new();
        let mut labels = Vec::new();
        for w in &words {
            let phi = spec.model.evaluate(w)?;
            let sw = extend_to_word(sigma, w)?;
            let wi = sigma_words.len();
            sigma_words.push(sw);
            let name: Vec<String> = w.iter().map(|l| l.to_string()).collect();
            for (j, f) in spec.fields.iter().enumerate() {
                tests.push((wi, j, spec.act(&phi, f).flatten()));
                labels.push(format!("[{}]·v{j}", name.join(" ")));
            }
        }
        let keep = ((1.0 - params.delta) * d as f64 - 1e-9).ceil().max(0.0) as usize;
        Ok(Self {
            d,
            p: params.p,
            delta: params.delta,
            budget: d - keep.min(d),
            base,
            tests,
            sigma_words,
            labels,
        })
    }

    pub fn num_tests(&self) -> usize {
        self.tests.len()
    }

    /// Per test, `|r_i|^p / d` with `r = T(w·v_j) − σ(w) T(v_j)`.
    fn residual_masses(&self, t: &DMatrix<f64>) -> Vec<Vec<f64>> {
        let images: Vec<Vec<f64>> = self.base.iter().map(|v| matvec(t, v)).collect();
        self.tests
            .iter()
            .map(|(wi, j, moved)| {
                let lhs = matvec(t, moved);
                let rhs = self.sigma_words[*wi].apply_vec(&images[*j]);
                lhs.iter()
                    .zip(&rhs)
                    .map(|(a, b)| (a - b).abs().powf(self.p) / self.d as f64)
                    .collect()
            })
            .collect()
    }
}

fn matvec(t: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; t.nrows()];
    for (c, &x) in v.iter().enumerate() {
        if x != 0.0 {
            for (o, tv) in out.iter_mut().zip(t.column(c).iter()) {
                *o += x * tv;
            }
        }
    }
    out
}

/// Removes up to `budget` coordinates, each time the largest entry of the currently worst
/// row. Returns the kept mask and the final worst row mass.
fn trim_worst(rows: &[Vec<f64>], d: usize, budget: usize) -> (Vec<bool>, f64, usize) {
    let mut keep = vec![true; d];
    let mut mass: Vec<f64> = rows.iter().map(|r| r.iter().sum()).collect();
    let worst = |mass: &[f64]| {
        mass.iter()
            .enumerate()
            .fold((0usize, f64::NEG_INFINITY), |acc, (i, &m)| if m > acc.1 { (i, m) } else { acc })
    };
    for _ in 0..budget {
        let (w, m) = worst(&mass);
        if rows.is_empty() || m <= 0.0 {
            break;
        }
        let (i, _) = rows[w]
            .iter()
            .enumerate()
            .filter(|&(i, _)| keep[i])
            .fold((usize::MAX, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        if i == usize::MAX {
            break;
        }
        keep[i] = false;
        for (r, mr) in rows.iter().zip(mass.iter_mut()) {
            *mr -= r[i];
        }
    }
    let (w, m) = worst(&mass);
    (keep, m.max(0.0), w)
}

/// Outcome of checking one linear map against `Hom(F, m, δ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomWitness {
    /// Operator norm before normalization.
    pub norm: f64,
    /// Factor applied so that the checked map has norm at most 1.
    pub scale: f64,
    pub kept: Vec<usize>,
    /// Per test residual on the kept coordinates, after scaling.
    pub defects: Vec<f64>,
    pub max_defect: f64,
    pub passed: bool,
    /// The test with the largest residual when the check fails.
    pub binding: Option<String>,
}

pub fn check_hom_in(ctx: &HomContext, spec: &GeneratingSpec, t: &DMatrix<f64>) -> HomWitness {
    let norm = operator_norm(t, spec, ctx.p);
    let scale = if norm > 1.0 { 1.0 / norm } else { 1.0 };
    let rows = ctx.residual_masses(t);
    let (keep, _, w) = trim_worst(&rows, ctx.d, ctx.budget);
    let defects: Vec<f64> = rows
        .iter()
        .map(|r| scale * r.iter().zip(&keep).filter(|(_, &k)| k).map(|(v, _)| v).sum::<f64>().powf(1.0 / ctx.p))
        .collect();
    let max_defect = defects.iter().cloned().fold(0.0, f64::max);
    let passed = max_defect < ctx.delta;
    HomWitness {
        norm,
        scale,
        kept: (0..ctx.d).filter(|&i| keep[i]).collect(),
        defects,
        max_defect,
        passed,
        binding: (!passed).then(|| ctx.labels[w].clone()),
    }
}

pub fn check_hom(t: &DMatrix<f64>, spec: &GeneratingSpec, sigma: &SoficApprox, params: &HomParams) -> Result<HomWitness> {
    if t.nrows() != sigma.d() || t.ncols() != spec.dim_v {
        return Err(Error::Dimension(format!(
            "map is {}×{}, expected {}×{}",
            t.nrows(),
            t.ncols(),
            sigma.d(),
            spec.dim_v
        )));
    }
    let ctx = HomContext::new(spec, sigma, params)?;
    Ok(check_hom_in(&ctx, spec, t))
}

/// Grid of `(F, m, δ, ε)` values and the exponent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    #[serde(rename = "F")]
    pub letter_sets: Vec<Vec<String>>,
    pub m: Vec<usize>,
    pub delta: Vec<f64>,
    pub epsilon: Vec<f64>,
    #[serde(default = "two")]
    pub p: f64,
}

fn two() -> f64 {
    2.0
}

impl Grid {
    pub fn validate(&self) -> Result<()> {
        if self.letter_sets.is_empty() || self.m.is_empty() || self.delta.is_empty() || self.epsilon.is_empty() {
            return Err(Error::Parameter("every grid axis needs at least one value".into()));
        }
        for &e in &self.epsilon {
            if !(e > 0.0 && e < 0.5) {
                return Err(Error::Parameter(format!("ε = {e} outside (0,1/2)")));
            }
        }
        for &m in &self.m {
            for &delta in &self.delta {
                HomParams { letters: vec![], m, delta, eps: self.epsilon[0], p: self.p }.validate()?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateOptions {
    pub samples: usize,
    pub seed: u64,
    #[serde(default)]
    pub sampler: Sampler,
    #[serde(default)]
    pub rho: Rho,
}

/// One row of the per-scale table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleRow {
    pub d: usize,
    pub epsilon: f64,
    #[serde(rename = "F_size")]
    pub f_size: usize,
    pub m: usize,
    pub delta: f64,
    pub deps_over_d: f64,
    pub alpha_hat: f64,
    pub kappa_lower: f64,
    pub alpha_vol: f64,
    pub span_over_d: f64,
    pub kappa_raw: f64,
    pub successes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimEstimate {
    pub upper: f64,
    pub lower: f64,
    pub support_bound: f64,
    /// `max_i rank(ξ ↦ α_S(T_ξ)) / d_i`.
    pub span_upper: f64,
    /// `min over (F,m,δ,ε) of max_i d_ε(cloud)/d_i`; a sample statistic, not a bound.
    pub covering_upper: f64,
    pub exact: f64,
    pub alpha_hat: f64,
    pub per_scale: Vec<ScaleRow>,
    pub diagnostics: Vec<String>,
}

impl DimEstimate {
    pub fn brackets(&self, value: f64, slack: f64) -> bool {
        self.lower - slack <= value && value <= self.upper + slack
    }
}

struct SampleOutcome {
    r: f64,
    point: Option<Vec<f64>>,
}

fn gaussian_xi(rng: &mut ChaCha8Rng, dim: usize, d: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let norm = (v.iter().map(|x| x * x).sum::<f64>() / d as f64).sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    v
}

fn log_mean_pow(rs: &[f64], dim: f64) -> f64 {
    let logs: Vec<f64> = rs.iter().map(|&r| if r > 0.0 { dim * r.ln() } else { f64::NEG_INFINITY }).collect();
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    top + (logs.iter().map(|l| (l - top).exp()).sum::<f64>() / rs.len() as f64).ln()
}

/// Runs the sampler on every sofic approximation and reports covering-style upper and
/// packing-style lower bounds over the grid.
pub fn estimate_dim(spec: &GeneratingSpec, sigmas: &[SoficApprox], grid: &Grid, opts: &EstimateOptions) -> Result<DimEstimate> {
    if opts.samples < 1 {
        return Err(Error::Parameter("samples must be at least 1".into()));
    }
    if sigmas.is_empty() {
        return Err(Error::Parameter("no sofic approximations given".into()));
    }
    grid.validate()?;
    let support_bound = spec.support_upper_bound();
    let exact = spec.exact_dimension().to_f64().unwrap_or(f64::NAN);
    let fields_flat: Vec<Vec<f64>> = spec.fields.iter().map(VectorField::flatten).collect();
    let mut per_scale = Vec::new();
    let mut diagnostics = Vec::new();
    let mut span_upper: f64 = 0.0;
    let mut covering: Vec<(usize, f64)> = Vec::new();
    let mut alpha_hat_best: f64 = 0.0;
    let mut lower: f64 = 0.0;

    let combos: Vec<(usize, usize, f64)> = (0..grid.letter_sets.len())
        .flat_map(|f| grid.m.iter().flat_map(move |&m| grid.delta.iter().map(move |&dl| (f, m, dl))))
        .collect();

    for (si, sigma) in sigmas.iter().enumerate() {
        let d = sigma.d();
        let plan = SamplerPlan::new(spec, sigma, &opts.sampler)?;
        let dx = plan.xi_dim();
        let rank = plan.image_rank(&fields_flat);
        let factor = rank as f64 / d as f64;
        let q = rank as f64 / dx as f64;
        span_upper = span_upper.max(factor);
        let contexts: Vec<HomContext> = combos
            .iter()
            .map(|&(f, m, delta)| {
                HomContext::new(
                    spec,
                    sigma,
                    &HomParams { letters: grid.letter_sets[f].clone(), m, delta, eps: grid.epsilon[0], p: grid.p },
                )
            })
            .collect::<Result<_>>()?;
        let seed = opts.seed ^ (si as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let outcomes: Vec<Vec<SampleOutcome>> = (0..opts.samples)
            .into_par_iter()
            .map(|s| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(s as u64);
                let theta = gaussian_xi(&mut rng, dx, d);
                let u: f64 = 1.0 - rng.random::<f64>();
                let t = u.powf(1.0 / dx as f64);
                let tm = plan.build(&theta);
                contexts.iter().map(|ctx| sample_outcome(ctx, spec, &tm, t, &fields_flat)).collect()
            })
            .collect();
        for (ci, &(f, m, delta)) in combos.iter().enumerate() {
            let rs: Vec<f64> = outcomes.iter().map(|o| o[ci].r).collect();
            let points: Vec<Vec<f64>> = outcomes.iter().filter_map(|o| o[ci].point.clone()).collect();
            let successes = points.len();
            let alpha_hat = successes as f64 / opts.samples as f64;
            alpha_hat_best = alpha_hat_best.max(alpha_hat);
            let alpha_vol = (log_mean_pow(&rs, dx as f64) / dx as f64).exp().min(1.0);
            let deps: Vec<usize> = if successes > 0 {
                let cloud = PointCloud::new(d, fields_flat.len(), points)?;
                covering::d_eps_greedy_multi(&cloud, &grid.epsilon, &opts.rho)?.0
            } else {
                diagnostics.push(format!(
                    "d = {d}, F = {:?}, m = {m}, δ = {delta}: no successful samples; lower bound 0 here",
                    grid.letter_sets[f]
                ));
                vec![0; grid.epsilon.len()]
            };
            for (ei, &eps) in grid.epsilon.iter().enumerate() {
                let kappa_raw = if successes == 0 || alpha_vol <= 0.0 {
                    0.0
                } else if q >= 1.0 - 1e-12 {
                    covering::kappa(alpha_vol, eps, grid.p)?.value
                } else if q > eps {
                    covering::kappa_proj(alpha_vol, eps, q)?.value
                } else {
                    0.0
                };
                let kappa_lower = factor * kappa_raw;
                lower = lower.max(kappa_lower);
                if successes > 0 {
                    covering.push((ci * grid.epsilon.len() + ei, deps[ei] as f64 / d as f64));
                }
                per_scale.push(ScaleRow {
                    d,
                    epsilon: eps,
                    f_size: grid.letter_sets[f].len(),
                    m,
                    delta,
                    deps_over_d: deps[ei] as f64 / d as f64,
                    alpha_hat,
                    kappa_lower,
                    alpha_vol,
                    span_over_d: factor,
                    kappa_raw,
                    successes,
                });
            }
        }
    }
    let mut cov_by_key: std::collections::BTreeMap<usize, f64> = std::collections::BTreeMap::new();
    for (k, v) in covering {
        let e = cov_by_key.entry(k).or_insert(0.0);
        *e = e.max(v);
    }
    let covering_upper = cov_by_key.values().cloned().fold(f64::INFINITY, f64::min);
    let upper = support_bound.min(span_upper);
    if lower > upper + 1e-12 {
        diagnostics.push(format!("lower bound {lower} exceeds upper bound {upper}"));
    }
    Ok(DimEstimate {
        upper,
        lower,
        support_bound,
        span_upper,
        covering_upper: if covering_upper.is_finite() { covering_upper } else { f64::NAN },
        exact,
        alpha_hat: alpha_hat_best,
        per_scale,
        diagnostics,
    })
}

/// Star radius of the Hom set along one ξ direction, with the repaired map as fallback.
fn sample_outcome(ctx: &HomContext, spec: &GeneratingSpec, tm: &DMatrix<f64>, t: f64, fields: &[Vec<f64>]) -> SampleOutcome {
    let radius = |m: &DMatrix<f64>| {
        let g = operator_norm(m, spec, ctx.p);
        let rows = ctx.residual_masses(m);
        let (keep, worst, _) = trim_worst(&rows, ctx.d, ctx.budget);
        let def = worst.powf(1.0 / ctx.p);
        let mut r: f64 = 1.0;
        if g > 0.0 {
            r = r.min(1.0 / g);
        }
        if def > 0.0 {
            r = r.min(ctx.delta / def);
        }
        // the normalized map t·T/max(1, t·g) passes iff its defect is below δ
        let scale = t / (t * g).max(1.0);
        (r, scale, scale * def < ctx.delta, keep)
    };
    let (r0, s0, ok0, keep) = radius(tm);
    let point_of = |m: &DMatrix<f64>, s: f64| fields.iter().flat_map(|v| matvec(m, v).into_iter().map(move |x| x * s)).collect::<Vec<f64>>();
    if ok0 {
        return SampleOutcome { r: r0, point: Some(point_of(tm, s0)) };
    }
    // one round of coordinate-deletion repair
    let mut repaired = tm.clone();
    for (i, &k) in keep.iter().enumerate() {
        if !k {
            repaired.row_mut(i).fill(0.0);
        }
    }
    let (r1, s1, ok1, _) = radius(&repaired);
    SampleOutcome {
        r: r0.max(r1),
        point: ok1.then(|| point_of(&repaired, s1)),
    }
}
