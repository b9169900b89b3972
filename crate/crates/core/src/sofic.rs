//! Sofic approximations of finite relations: generator images in `[[R_d]]`, word
//! extension, canonical extension to all atom-level partial maps, quality reports,
//! compression and seeded perturbation.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::path::Path;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{AlgebraElement, PartialMap};
use crate::error::{Error, Result};
use crate::relation::{LabelKind, Letter, Model, Word};

/// Image of one label: a partial bijection or a diagonal 0/1 projection.
#[derive(Clone, Debug, PartialEq)]
pub enum Image {
    Map(PartialMap),
    Diag(Vec<bool>),
}

impl Image {
    pub fn to_partial_map(&self) -> PartialMap {
        match self {
            Image::Map(m) => m.clone(),
            Image::Diag(mask) => PartialMap::from_mask(mask),
        }
    }

    fn letter_map(&self, inverse: bool) -> PartialMap {
        match self {
            Image::Map(m) if inverse => m.inverse(),
            other => other.to_partial_map(),
        }
    }
}

/// How far the exact model's traces are from the atom masses.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rounding {
    /// `max_x |tr σ(p_x) − μ(x)|`.
    pub defect: f64,
    /// `1 / (2 N #atoms)`.
    pub tolerance: f64,
}

/// Generator images at one finite scale `d`.
#[derive(Clone, Debug, PartialEq)]
pub struct SoficApprox {
    d: usize,
    images: BTreeMap<String, Image>,
    layout: Option<Vec<usize>>,
    rounding: Option<Rounding>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum ImageJson {
    Pairs { pairs: Vec<[usize; 2]> },
    Diag { diag: Vec<u8> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct SoficFile {
    d: usize,
    images: BTreeMap<String, ImageJson>,
}

impl SoficApprox {
    pub fn new(d: usize, images: BTreeMap<String, Image>) -> Result<Self> {
        for (label, img) in &images {
            let size = match img {
                Image::Map(m) => m.size(),
                Image::Diag(v) => v.len(),
            };
            if size != d {
                return Err(Error::model(format!("images.{label}"), format!("size {size}, expected {d}")));
            }
        }
        Ok(Self {
            d,
            images,
            layout: None,
            rounding: None,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn images(&self) -> &BTreeMap<String, Image> {
        &self.images
    }

    pub fn image(&self, label: &str) -> Result<&Image> {
        self.images.get(label).ok_or_else(|| Error::Lookup(label.to_string()))
    }

    /// Atom of each point, for exact models.
    pub fn layout(&self) -> Option<&[usize]> {
        self.layout.as_deref()
    }

    pub fn rounding(&self) -> Option<Rounding> {
        self.rounding
    }

    pub fn letter(&self, l: &Letter) -> Result<PartialMap> {
        Ok(self.image(&l.label)?.letter_map(l.inverse))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: SoficFile = serde_json::from_str(s)?;
        let mut images = BTreeMap::new();
        for (label, img) in f.images {
            let image = match img {
                ImageJson::Pairs { pairs } => {
                    let pairs: Vec<(usize, usize)> = pairs.iter().map(|p| (p[0], p[1])).collect();
                    Image::Map(PartialMap::new(f.d, &pairs).map_err(|e| {
                        Error::model(format!("images.{label}.pairs"), e.to_string())
                    })?)
                }
                ImageJson::Diag { diag } => {
                    if diag.iter().any(|&v| v > 1) {
                        return Err(Error::model(format!("images.{label}.diag"), "entries must be 0 or 1"));
                    }
                    Image::Diag(diag.into_iter().map(|v| v == 1).collect())
                }
            };
            images.insert(label, image);
        }
        Self::new(f.d, images)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        let images = self
            .images
            .iter()
            .map(|(k, v)| {
                let j = match v {
                    Image::Map(m) => ImageJson::Pairs {
                        pairs: m.pairs().map(|(s, t)| [s, t]).collect(),
                    },
                    Image::Diag(mask) => ImageJson::Diag {
                        diag: mask.iter().map(|&b| b as u8).collect(),
                    },
                };
                (k.clone(), j)
            })
            .collect();
        Ok(serde_json::to_string(&SoficFile { d: self.d, images })?)
    }
}

/// Honest finite model: atom `x` gets `c_x = round(μ(x) N #atoms)` points and generators
/// act by their induced maps copy by copy.
pub fn exact_model(model: &Model, copies: usize) -> Result<SoficApprox> {
    if copies == 0 {
        return Err(Error::Parameter("copies must be >= 1".into()));
    }
    let n = model.num_atoms();
    let space = model.rel().space();
    let scale = (copies * n) as f64;
    let counts: Vec<usize> = (0..n).map(|x| (space.weight(x) * scale).round() as usize).collect();
    if let Some(x) = counts.iter().position(|&c| c == 0) {
        return Err(Error::model(
            format!("weights[{x}]"),
            format!("mass rounds to zero points at N = {copies}"),
        ));
    }
    let d: usize = counts.iter().sum();
    let defect = (0..n)
        .map(|x| (counts[x] as f64 / d as f64 - space.weight(x)).abs())
        .fold(0.0, f64::max);
    let tolerance = 1.0 / (2.0 * scale);
    if defect > tolerance + 1e-15 {
        return Err(Error::model(
            "weights",
            format!("trace rounding defect {defect:.3e} exceeds tolerance {tolerance:.3e} at N = {copies}"),
        ));
    }
    let mut offset = vec![0; n + 1];
    for x in 0..n {
        offset[x + 1] = offset[x] + counts[x];
    }
    let layout: Vec<usize> = (0..n).flat_map(|x| std::iter::repeat_n(x, counts[x])).collect();
    let mut images = BTreeMap::new();
    let offset = &offset;
    for (j, g) in model.generators().iter().enumerate() {
        let pairs: Vec<(usize, usize)> = g
            .pairs()
            .flat_map(|(s, t)| (0..counts[s]).map(move |c| (offset[s] + c, offset[t] + c)))
            .collect();
        images.insert(Model::generator_label(j), Image::Map(PartialMap::new(d, &pairs)?));
    }
    let mask_of = |atoms: &[usize]| {
        let mut m = vec![false; d];
        for &x in atoms {
            m[offset[x]..offset[x + 1]].iter_mut().for_each(|b| *b = true);
        }
        m
    };
    for x in 0..n {
        images.insert(Model::atom_label(x), Image::Diag(mask_of(&[x])));
    }
    for (name, atoms) in model.named_projections() {
        images.insert(name.clone(), Image::Diag(mask_of(atoms)));
    }
    Ok(SoficApprox {
        d,
        images,
        layout: Some(layout),
        rounding: Some(Rounding { defect, tolerance }),
    })
}

/// `σ(l1) σ(l2) ⋯ σ(lm)` as a partial map; the empty word gives the identity.
pub fn extend_to_word(sigma: &SoficApprox, word: &[Letter]) -> Result<PartialMap> {
    let mut acc = PartialMap::identity(sigma.d);
    for l in word {
        acc = acc.compose(&sigma.letter(l)?)?;
    }
    Ok(acc)
}

/// Extension of σ from generators to every atom-level partial map `ψ`:
/// `σ̂(ψ) = Σ_{a→b ∈ ψ} σ(p_b) σ(path_{a→b}) σ(p_a)`, paths found by breadth-first search
/// over generator letters in label order.
#[derive(Clone, Debug)]
pub struct CanonicalExtension {
    d: usize,
    pairs: HashMap<(usize, usize), PartialMap>,
    missing: usize,
}

/// Shortest generator words joining atoms; ties broken by letter order `g0, g0^-1, g1, ..`.
pub fn bfs_paths(model: &Model, from: usize) -> Result<BTreeMap<usize, Word>> {
    let letters: Vec<(Letter, PartialMap)> = model
        .generator_labels()
        .into_iter()
        .flat_map(|l| [Letter::new(l.clone()), Letter::inv(l)])
        .map(|l| {
            let m = model.letter_map(&l)?;
            Ok((l, m))
        })
        .collect::<Result<_>>()?;
    let mut paths: BTreeMap<usize, Word> = BTreeMap::new();
    paths.insert(from, Vec::new());
    let mut queue = VecDeque::from([from]);
    while let Some(a) = queue.pop_front() {
        for (l, m) in &letters {
            if let Some(b) = m.apply(a) {
                if !paths.contains_key(&b) {
                    let mut w = paths[&a].clone();
                    w.push(l.clone());
                    paths.insert(b, w);
                    queue.push_back(b);
                }
            }
        }
    }
    Ok(paths)
}

impl CanonicalExtension {
    pub fn new(sigma: &SoficApprox, model: &Model) -> Result<Self> {
        let n = model.num_atoms();
        let proj: Vec<PartialMap> = (0..n)
            .map(|x| Ok(sigma.image(&Model::atom_label(x))?.to_partial_map()))
            .collect::<Result<_>>()?;
        let mut pairs = HashMap::new();
        let mut missing = 0;
        for a in 0..n {
            let paths = bfs_paths(model, a)?;
            missing += model.rel().orbit(a).len() - paths.len();
            for (&b, word) in &paths {
                // path letters act in order, so the product is σ(l_k)⋯σ(l_1)
                let mut m = proj[a].clone();
                for l in word {
                    m = sigma.letter(l)?.compose(&m)?;
                }
                pairs.insert((a, b), proj[b].compose(&m)?);
            }
        }
        Ok(Self {
            d: sigma.d,
            pairs,
            missing,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Number of related atom pairs without a joining generator path.
    pub fn missing_pairs(&self) -> usize {
        self.missing
    }

    pub fn pair_map(&self, a: usize, b: usize) -> Option<&PartialMap> {
        self.pairs.get(&(a, b))
    }

    pub fn element(&self, psi: &PartialMap) -> AlgebraElement {
        let mut rows = vec![Vec::new(); self.d];
        for (a, b) in psi.pairs() {
            if let Some(m) = self.pairs.get(&(a, b)) {
                for (s, t) in m.pairs() {
                    rows[t].push((s, 1.0));
                }
            }
        }
        AlgebraElement::from_rows(self.d, rows)
    }

    /// `σ̂(ψ) ξ`.
    pub fn apply_vec(&self, psi: &PartialMap, xi: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        for (a, b) in psi.pairs() {
            if let Some(m) = self.pairs.get(&(a, b)) {
                m.apply_add(xi, 1.0, &mut out);
            }
        }
        out
    }
}

/// The four sofic conditions measured on test words, plus the gap between raw word
/// images and their canonical counterparts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub mult_defect: f64,
    pub adj_defect: f64,
    pub trace_defect: f64,
    pub op_norm_bound: f64,
    /// `max ‖σ(w) − σ̂(ψ_w)‖₂` over test words.
    pub word_defect: f64,
    pub words: usize,
}

const WORD_CUTOFF: usize = 64;

/// All words of length `1..=max_len` over `letters`, sampled down to a fixed cutoff.
pub fn test_words(letters: &[Letter], max_len: usize, cutoff: usize, seed: u64) -> Vec<Word> {
    let mut words: Vec<Word> = Vec::new();
    let mut layer: Vec<Word> = vec![Vec::new()];
    for _ in 0..max_len {
        let next: Vec<Word> = layer
            .iter()
            .flat_map(|w| {
                letters.iter().map(move |l| {
                    let mut v = w.clone();
                    v.push(l.clone());
                    v
                })
            })
            .collect();
        words.extend(next.iter().cloned());
        if words.len() > 50 * cutoff {
            break;
        }
        layer = next;
    }
    if words.len() > cutoff {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        words.shuffle(&mut rng);
        words.truncate(cutoff);
        words.sort_by_key(Vec::len);
    }
    words
}

/// Generator letters (with inverses) and every projection label the model knows.
pub fn model_letters(model: &Model) -> Vec<Letter> {
    let mut v: Vec<Letter> = model
        .generator_labels()
        .into_iter()
        .flat_map(|l| [Letter::new(l.clone()), Letter::inv(l)])
        .collect();
    v.extend((0..model.num_atoms()).map(|x| Letter::new(Model::atom_label(x))));
    v.extend(model.named_projections().keys().map(Letter::new));
    v
}

pub fn quality_report(sigma: &SoficApprox, model: &Model, word_length: usize) -> Result<QualityReport> {
    if word_length == 0 {
        return Err(Error::Parameter("word_length must be >= 1".into()));
    }
    let ext = CanonicalExtension::new(sigma, model)?;
    let words = test_words(&model_letters(model), word_length, WORD_CUTOFF, 0);
    struct Item {
        psi: PartialMap,
        elem: AlgebraElement,
    }
    let items: Vec<Item> = words
        .par_iter()
        .map(|w| {
            let psi = model.evaluate(w)?;
            let elem = ext.element(&psi);
            Ok(Item { psi, elem })
        })
        .collect::<Result<_>>()?;
    let per_word: Vec<(f64, f64, f64, f64)> = words
        .par_iter()
        .zip(&items)
        .map(|(w, it)| {
            let adj = ext.element(&it.psi.inverse()).sub(&it.elem.adjoint())?.two_norm();
            let tr = (it.elem.trace() - model.rel().tau(&it.psi)).abs();
            let op = it.elem.op_norm_bound();
            let raw = extend_to_word(sigma, w)?.as_matrix();
            let wd = raw.sub(&it.elem)?.two_norm();
            Ok((adj, tr, op, wd))
        })
        .collect::<Result<_>>()?;
    let mult = items
        .par_iter()
        .map(|x| {
            items.iter().try_fold(0.0f64, |acc, y| {
                let xy = x.psi.compose(&y.psi)?;
                let lhs = ext.element(&xy);
                let rhs = x.elem.mul(&y.elem)?;
                Ok(acc.max(lhs.sub(&rhs)?.two_norm()))
            })
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let fold = |i: usize| per_word.iter().map(|t| [t.0, t.1, t.2, t.3][i]).fold(0.0, f64::max);
    Ok(QualityReport {
        mult_defect: mult,
        adj_defect: fold(0),
        trace_defect: fold(1),
        op_norm_bound: fold(2),
        word_defect: fold(3),
        words: words.len(),
    })
}

/// Conjugates every image by the diagonal image of `label` and reindexes onto its points.
pub fn compress(sigma: &SoficApprox, label: &str) -> Result<SoficApprox> {
    let mask = match sigma.image(label)? {
        Image::Diag(m) => m.clone(),
        Image::Map(_) => {
            return Err(Error::Parameter(format!("label `{label}` is not a projection")))
        }
    };
    compress_mask(sigma, &mask)
}

fn compress_mask(sigma: &SoficApprox, mask: &[bool]) -> Result<SoficApprox> {
    let kept: Vec<usize> = (0..sigma.d).filter(|&i| mask[i]).collect();
    let mut new_index = vec![usize::MAX; sigma.d];
    for (k, &i) in kept.iter().enumerate() {
        new_index[i] = k;
    }
    let d = kept.len();
    let images = sigma
        .images
        .iter()
        .map(|(label, img)| {
            let out = match img {
                Image::Map(m) => {
                    let pairs: Vec<(usize, usize)> = m
                        .conjugate_by(mask)
                        .pairs()
                        .map(|(s, t)| (new_index[s], new_index[t]))
                        .collect();
                    Image::Map(PartialMap::new(d, &pairs)?)
                }
                Image::Diag(v) => Image::Diag(kept.iter().map(|&i| v[i]).collect()),
            };
            Ok((label.clone(), out))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;
    Ok(SoficApprox {
        d,
        images,
        layout: sigma.layout.as_ref().map(|l| kept.iter().map(|&i| l[i]).collect()),
        rounding: None,
    })
}

/// Compresses both the model and σ to the atoms in `atoms`, relabelling atom projections
/// to the compressed model's indices.
pub fn compress_with_model(sigma: &SoficApprox, model: &Model, atoms: &[usize]) -> Result<(SoficApprox, Model)> {
    let (small, old) = model.compress(atoms)?;
    let mut mask = vec![false; sigma.d];
    for &x in &old {
        if let Image::Diag(m) = sigma.image(&Model::atom_label(x))? {
            for (b, &v) in mask.iter_mut().zip(m) {
                *b |= v;
            }
        }
    }
    let mut c = compress_mask(sigma, &mask)?;
    let mut images = BTreeMap::new();
    for (label, img) in std::mem::take(&mut c.images) {
        match model.resolve(&label) {
            Ok(LabelKind::Projection(_)) if !model.named_projections().contains_key(&label) => {
                let x: usize = label[1..].parse().expect("atom label");
                if let Some(k) = old.iter().position(|&o| o == x) {
                    images.insert(Model::atom_label(k), img);
                }
            }
            _ => {
                images.insert(label, img);
            }
        }
    }
    c.images = images;
    if let Some(l) = &mut c.layout {
        for a in l.iter_mut() {
            *a = old.iter().position(|&o| o == *a).expect("kept point lies in a kept atom");
        }
    }
    Ok((c, small))
}

/// Rewires each partial-bijection image on `⌈rate·d⌉` of its domain points by cyclically
/// shifting their targets; injectivity is preserved. Deterministic in `seed`.
pub fn perturb(sigma: &SoficApprox, rate: f64, seed: u64) -> Result<SoficApprox> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::Parameter(format!("rate {rate} outside [0,1]")));
    }
    let mut out = sigma.clone();
    out.rounding = None;
    for (stream, (_, img)) in out.images.iter_mut().enumerate() {
        let Image::Map(m) = img else { continue };
        let dom = m.domain();
        let k = ((rate * sigma.d as f64).ceil() as usize).min(dom.len());
        if k < 2 {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream as u64);
        let chosen: Vec<usize> = sample(&mut rng, dom.len(), k).into_iter().map(|i| dom[i]).collect();
        let targets: Vec<usize> = chosen.iter().map(|&s| m.apply(s).unwrap()).collect();
        let chosen_set: std::collections::HashSet<usize> = chosen.iter().copied().collect();
        let mut pairs: Vec<(usize, usize)> = m.pairs().filter(|(s, _)| !chosen_set.contains(s)).collect();
        pairs.extend(chosen.iter().enumerate().map(|(i, &s)| (s, targets[(i + 1) % k])));
        *m = PartialMap::new(sigma.d, &pairs)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relation::{builders, AtomSpace, FinRel};

    fn orbit2() -> Model {
        let rel = FinRel::new(AtomSpace::uniform(2), vec![vec![0, 1]]).unwrap();
        Model::new(rel, vec![PartialMap::new(2, &[(0, 1), (1, 0)]).unwrap()]).unwrap()
    }

    #[test]
    fn exact_model_transpositions() {
        let s = exact_model(&orbit2(), 3).unwrap();
        assert_eq!(s.d(), 6);
        let Image::Map(g) = s.image("g0").unwrap() else { panic!() };
        assert_eq!(g.len(), 6);
        let sq = g.compose(g).unwrap();
        assert_eq!(sq, PartialMap::identity(6));
        assert_eq!(g.fixed_points(), 0);
    }

    #[test]
    fn exact_traces_dyadic() {
        let rel = FinRel::new(AtomSpace::from_f64(&[0.25, 0.25, 0.5]).unwrap(), vec![vec![0, 1], vec![2]]).unwrap();
        let m = Model::new(rel, vec![PartialMap::new(3, &[(0, 1)]).unwrap()]).unwrap();
        let s = exact_model(&m, 4).unwrap();
        for x in 0..3 {
            let tr = s.image(&Model::atom_label(x)).unwrap().to_partial_map().as_matrix().trace();
            assert_eq!(tr, m.rel().space().weight(x));
        }
        assert_eq!(s.rounding().unwrap().defect, 0.0);
    }

    #[test]
    fn rounding_failure_is_reported() {
        let rel = FinRel::new(AtomSpace::from_f64(&[0.1, 0.9]).unwrap(), vec![vec![0], vec![1]]).unwrap();
        let m = Model::new(rel, vec![]).unwrap();
        assert!(exact_model(&m, 1).is_err());
        assert!(exact_model(&m, 5).is_ok());
    }

    #[test]
    fn phi_inverse_phi_is_domain_diagonal() {
        let m = builders::chain_treeing(1, 3);
        let s = exact_model(&m, 2).unwrap();
        let w = extend_to_word(&s, &[Letter::inv("g0"), Letter::new("g0")]).unwrap();
        let dom = extend_to_word(&s, &[Letter::new("p0"), Letter::new("p1")]).unwrap();
        assert!(dom.is_empty());
        let expected = PartialMap::partial_identity(6, (0..4).collect::<Vec<_>>());
        assert_eq!(w, expected);
    }

    #[test]
    fn word_extension() {
        let m = builders::periodic(2, 3);
        let s = exact_model(&m, 2).unwrap();
        assert_eq!(extend_to_word(&s, &[]).unwrap(), PartialMap::identity(s.d()));
        assert!(matches!(extend_to_word(&s, &[Letter::new("zz")]), Err(Error::Lookup(_))));
        // exact-model oracle: the induced map of the atom-level word
        let w = vec![Letter::new("g0"), Letter::new("p1"), Letter::inv("g0")];
        let got = extend_to_word(&s, &w).unwrap();
        let psi = m.evaluate(&w).unwrap();
        let ext = CanonicalExtension::new(&s, &m).unwrap();
        assert_eq!(got.as_matrix().sub(&ext.element(&psi)).unwrap().two_norm(), 0.0);
    }

    #[test]
    fn exact_model_quality_is_perfect() {
        let m = builders::periodic(1, 4);
        let s = exact_model(&m, 5).unwrap();
        for len in 1..=3 {
            let q = quality_report(&s, &m, len).unwrap();
            assert_eq!(q.mult_defect, 0.0);
            assert_eq!(q.adj_defect, 0.0);
            assert!(q.trace_defect <= s.rounding().unwrap().tolerance);
            assert_eq!(q.op_norm_bound, 1.0);
        }
    }

    #[test]
    fn corrupted_generator_detected() {
        let m = orbit2();
        let s = exact_model(&m, 10).unwrap();
        let d = s.d();
        let Image::Map(g) = s.image("g0").unwrap() else { panic!() };
        // derange the targets of k points of atom 0 among themselves
        let k = 3;
        let mut pairs: Vec<(usize, usize)> = g.pairs().collect();
        let t: Vec<usize> = (0..k).map(|i| pairs[i].1).collect();
        for i in 0..k {
            pairs[i].1 = t[(i + 1) % k];
        }
        let mut images = s.images().clone();
        images.insert("g0".into(), Image::Map(PartialMap::new(d, &pairs).unwrap()));
        let bad = SoficApprox::new(d, images).unwrap();
        let q = quality_report(&bad, &m, 2).unwrap();
        assert!(q.mult_defect >= (2.0 * k as f64 / d as f64).sqrt() - 1e-12, "{q:?}");
    }

    #[test]
    fn compress_examples() {
        let m = builders::periodic(1, 2).with_projection("all", vec![0, 1]).unwrap();
        let s = exact_model(&m, 3).unwrap();
        assert_eq!(compress(&s, "all").unwrap().images(), s.images());
        let c = compress(&s, "p0").unwrap();
        assert_eq!(c.d(), 3);
        assert!((c.image("p0").unwrap().to_partial_map().as_matrix().trace() - 1.0).abs() < 1e-15);
        assert!(compress(&s, "g0").is_err());
        assert!(matches!(compress(&s, "nope"), Err(Error::Lookup(_))));
    }

    #[test]
    fn compressed_exact_model_is_exact_model_of_compression() {
        let m = orbit2();
        let s = exact_model(&m, 4).unwrap();
        let (c, small) = compress_with_model(&s, &m, &[0]).unwrap();
        let direct = exact_model(&small, 4).unwrap();
        assert_eq!(c.d(), direct.d());
        assert_eq!(c.images(), direct.images());
        assert_eq!(c.layout(), direct.layout());
    }

    #[test]
    fn perturb_examples() {
        let m = orbit2();
        let s = exact_model(&m, 1).unwrap();
        assert_eq!(perturb(&s, 0.0, 1).unwrap().images(), s.images());
        let p = perturb(&s, 1.0, 1).unwrap();
        assert_ne!(p.images(), s.images());
        assert!(quality_report(&p, &m, 2).unwrap().mult_defect > 0.0);
        let big = exact_model(&builders::periodic(2, 3), 10).unwrap();
        assert_eq!(perturb(&big, 0.3, 9).unwrap(), perturb(&big, 0.3, 9).unwrap());
        assert!(perturb(&big, 1.5, 9).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let s = exact_model(&builders::periodic(1, 3), 2).unwrap();
        let back = SoficApprox::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(back.images(), s.images());
    }
}
