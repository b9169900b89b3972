//! Finite measured equivalence relations on weighted atom spaces, and models that attach
//! generator partial maps (a graphing) and projection labels to them.

use std::collections::BTreeMap;
use std::path::Path;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::algebra::PartialMap;
use crate::error::{Error, Result};

const WEIGHT_TOL: f64 = 1e-12;

/// Finite probability space; atom masses are kept both exactly and as floats.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomSpace {
    weights: Vec<f64>,
    exact: Vec<BigRational>,
}

impl AtomSpace {
    /// Validates positivity and total mass 1 (within 1e-12), then normalizes exactly.
    pub fn from_rationals(raw: Vec<BigRational>) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::model("weights", "no atoms"));
        }
        for (i, w) in raw.iter().enumerate() {
            if !w.is_positive() {
                return Err(Error::model(format!("weights[{i}]"), "weight must be > 0"));
            }
        }
        let total: BigRational = raw.iter().sum();
        let total_f = total.to_f64().unwrap_or(f64::NAN);
        if !((total_f - 1.0).abs() <= WEIGHT_TOL) {
            return Err(Error::model(
                "weights",
                format!("weights sum to {total_f}, expected 1"),
            ));
        }
        let exact: Vec<BigRational> = raw.into_iter().map(|w| w / &total).collect();
        let weights = exact.iter().map(|w| w.to_f64().unwrap()).collect();
        Ok(Self { weights, exact })
    }

    pub fn from_f64(raw: &[f64]) -> Result<Self> {
        let mut rats = Vec::with_capacity(raw.len());
        for (i, &w) in raw.iter().enumerate() {
            let r = BigRational::from_float(w)
                .ok_or_else(|| Error::model(format!("weights[{i}]"), "not finite"))?;
            rats.push(r);
        }
        Self::from_rationals(rats)
    }

    /// `n` atoms of mass `1/n`.
    pub fn uniform(n: usize) -> Self {
        let w = BigRational::new(BigInt::one(), BigInt::from(n));
        Self::from_rationals(vec![w; n]).expect("uniform weights are valid")
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, x: usize) -> f64 {
        self.weights[x]
    }

    pub fn exact_weight(&self, x: usize) -> &BigRational {
        &self.exact[x]
    }

    pub fn mass(&self, atoms: impl IntoIterator<Item = usize>) -> f64 {
        atoms.into_iter().map(|x| self.weights[x]).sum()
    }

    pub fn exact_mass(&self, atoms: impl IntoIterator<Item = usize>) -> BigRational {
        atoms
            .into_iter()
            .fold(BigRational::zero(), |acc, x| acc + &self.exact[x])
    }
}

/// Partition of the atoms into orbits. Blocks are sorted internally and by first atom,
/// so equality is structural.
#[derive(Clone, Debug, PartialEq)]
pub struct FinRel {
    space: AtomSpace,
    blocks: Vec<Vec<usize>>,
    orbit_of: Vec<usize>,
}

impl FinRel {
    pub fn new(space: AtomSpace, blocks: Vec<Vec<usize>>) -> Result<Self> {
        let n = space.len();
        let mut blocks: Vec<Vec<usize>> = blocks
            .into_iter()
            .map(|mut b| {
                b.sort_unstable();
                b
            })
            .collect();
        let mut seen = vec![false; n];
        for (bi, b) in blocks.iter().enumerate() {
            if b.is_empty() {
                return Err(Error::model(format!("blocks[{bi}]"), "empty orbit"));
            }
            for &x in b {
                if x >= n {
                    return Err(Error::model(format!("blocks[{bi}]"), format!("atom {x} out of range")));
                }
                if seen[x] {
                    return Err(Error::model(format!("blocks[{bi}]"), format!("atom {x} listed twice")));
                }
                seen[x] = true;
            }
            let w0 = space.weight(b[0]);
            if b.iter().any(|&x| (space.weight(x) - w0).abs() > WEIGHT_TOL * w0.max(1.0)) {
                return Err(Error::model(
                    format!("blocks[{bi}]"),
                    "atoms of one orbit must carry equal weight",
                ));
            }
        }
        if let Some(x) = seen.iter().position(|s| !s) {
            return Err(Error::model("blocks", format!("atom {x} is in no orbit")));
        }
        blocks.sort_by_key(|b| b[0]);
        let mut orbit_of = vec![0; n];
        for (bi, b) in blocks.iter().enumerate() {
            for &x in b {
                orbit_of[x] = bi;
            }
        }
        Ok(Self {
            space,
            blocks,
            orbit_of,
        })
    }

    pub fn space(&self) -> &AtomSpace {
        &self.space
    }

    pub fn num_atoms(&self) -> usize {
        self.space.len()
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn orbit_index(&self, x: usize) -> usize {
        self.orbit_of[x]
    }

    pub fn orbit(&self, x: usize) -> &[usize] {
        &self.blocks[self.orbit_of[x]]
    }

    /// Position of `x` inside its sorted orbit.
    pub fn position_in_orbit(&self, x: usize) -> usize {
        self.orbit(x).binary_search(&x).expect("atom in own orbit")
    }

    pub fn related(&self, x: usize, y: usize) -> bool {
        self.orbit_of[x] == self.orbit_of[y]
    }

    pub fn orbit_mass(&self, b: usize) -> f64 {
        self.space.mass(self.blocks[b].iter().copied())
    }

    pub fn exact_orbit_mass(&self, b: usize) -> BigRational {
        self.space.exact_mass(self.blocks[b].iter().copied())
    }

    /// `Σ_{x fixed by ψ} μ(x)`, the trace of an atom-level partial map.
    pub fn tau(&self, psi: &PartialMap) -> f64 {
        self.space.mass(psi.pairs().filter(|(s, t)| s == t).map(|(s, _)| s))
    }
}

/// One letter of a word: a label, possibly inverted.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Letter {
    pub label: String,
    pub inverse: bool,
}

impl Letter {
    pub fn new(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            inverse: false,
        }
    }

    pub fn inv(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            inverse: true,
        }
    }

    pub fn inverted(&self) -> Self {
        Self {
            label: self.label.clone(),
            inverse: !self.inverse,
        }
    }

    /// Parses `g0` or `g0^-1`.
    pub fn parse(s: &str) -> Self {
        match s.strip_suffix("^-1") {
            Some(l) => Self::inv(l),
            None => Self::new(s),
        }
    }
}

impl std::fmt::Display for Letter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.inverse {
            write!(f, "{}^-1", self.label)
        } else {
            write!(f, "{}", self.label)
        }
    }
}

/// Words act as products `σ(l1)σ(l2)⋯σ(lm)`; the last letter acts first.
pub type Word = Vec<Letter>;

pub fn inverse_word(w: &[Letter]) -> Word {
    w.iter().rev().map(Letter::inverted).collect()
}

/// What a label denotes in a model.
#[derive(Clone, Debug, PartialEq)]
pub enum LabelKind {
    Generator(usize),
    Projection(Vec<usize>),
}

/// A finite relation with a generating graphing and projection labels.
///
/// Generators are labelled `g0, g1, ..`; each atom `i` has a projection label `p{i}`;
/// further named projections may be added.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    rel: FinRel,
    generators: Vec<PartialMap>,
    morphisms: Option<Vec<PartialMap>>,
    projections: BTreeMap<String, Vec<usize>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairsJson {
    pub pairs: Vec<[usize; 2]>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelFile {
    pub weights: Vec<serde_json::Value>,
    pub blocks: Vec<Vec<usize>>,
    #[serde(default)]
    pub generators: Vec<PairsJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub morphisms: Option<Vec<PairsJson>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub projections: BTreeMap<String, Vec<usize>>,
}

fn parse_weight(i: usize, v: &serde_json::Value) -> Result<BigRational> {
    let field = format!("weights[{i}]");
    match v {
        serde_json::Value::Number(n) => {
            if let Some(k) = n.as_i64() {
                Ok(BigRational::from_integer(BigInt::from(k)))
            } else {
                let f = n.as_f64().ok_or_else(|| Error::model(&field, "not a number"))?;
                BigRational::from_float(f).ok_or_else(|| Error::model(&field, "not finite"))
            }
        }
        serde_json::Value::String(s) => {
            let (a, b) = match s.split_once('/') {
                Some((a, b)) => (a.trim(), b.trim()),
                None => (s.trim(), "1"),
            };
            let num: BigInt = a.parse().map_err(|_| Error::model(&field, format!("bad rational `{s}`")))?;
            let den: BigInt = b.parse().map_err(|_| Error::model(&field, format!("bad rational `{s}`")))?;
            if den.is_zero() {
                return Err(Error::model(&field, "zero denominator"));
            }
            Ok(BigRational::new(num, den))
        }
        _ => Err(Error::model(&field, "expected number or \"p/q\" string")),
    }
}

fn is_reserved_label(name: &str) -> bool {
    let digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
    name.strip_prefix('g').is_some_and(digits) || name.strip_prefix('p').is_some_and(digits)
}

impl Model {
    pub fn new(rel: FinRel, generators: Vec<PartialMap>) -> Result<Self> {
        let m = Self {
            rel,
            generators,
            morphisms: None,
            projections: BTreeMap::new(),
        };
        m.validate_maps("generators", &m.generators)?;
        Ok(m)
    }

    pub fn with_morphisms(mut self, morphisms: Vec<PartialMap>) -> Result<Self> {
        self.validate_maps("morphisms", &morphisms)?;
        self.morphisms = Some(morphisms);
        Ok(self)
    }

    pub fn with_projection(mut self, name: impl Into<String>, atoms: Vec<usize>) -> Result<Self> {
        let name = name.into();
        if is_reserved_label(&name) {
            return Err(Error::model(format!("projections.{name}"), "name clashes with a built-in label"));
        }
        if let Some(&x) = atoms.iter().find(|&&x| x >= self.rel.num_atoms()) {
            return Err(Error::model(format!("projections.{name}"), format!("atom {x} out of range")));
        }
        let mut atoms = atoms;
        atoms.sort_unstable();
        atoms.dedup();
        self.projections.insert(name, atoms);
        Ok(self)
    }

    fn validate_maps(&self, field: &str, maps: &[PartialMap]) -> Result<()> {
        for (j, g) in maps.iter().enumerate() {
            if g.size() != self.rel.num_atoms() {
                return Err(Error::model(
                    format!("{field}[{j}]"),
                    format!("acts on {} atoms, model has {}", g.size(), self.rel.num_atoms()),
                ));
            }
            for (s, t) in g.pairs() {
                if !self.rel.related(s, t) {
                    return Err(Error::model(
                        format!("{field}[{j}]"),
                        format!("pair ({s},{t}) leaves its orbit"),
                    ));
                }
                if (self.rel.space().weight(s) - self.rel.space().weight(t)).abs() > WEIGHT_TOL {
                    return Err(Error::model(format!("{field}[{j}]"), "pair joins atoms of unequal weight"));
                }
            }
        }
        Ok(())
    }

    pub fn from_file_struct(f: &ModelFile) -> Result<Self> {
        let raw = f
            .weights
            .iter()
            .enumerate()
            .map(|(i, v)| parse_weight(i, v))
            .collect::<Result<Vec<_>>>()?;
        let space = AtomSpace::from_rationals(raw)?;
        let n = space.len();
        let rel = FinRel::new(space, f.blocks.clone())?;
        let to_maps = |field: &str, list: &[PairsJson]| -> Result<Vec<PartialMap>> {
            list.iter()
                .enumerate()
                .map(|(j, p)| {
                    let pairs: Vec<(usize, usize)> = p.pairs.iter().map(|a| (a[0], a[1])).collect();
                    PartialMap::new(n, &pairs).map_err(|e| {
                        let msg = match e {
                            Error::Model { msg, .. } => msg,
                            other => other.to_string(),
                        };
                        Error::model(format!("{field}[{j}].pairs"), msg)
                    })
                })
                .collect()
        };
        let mut model = Model::new(rel, to_maps("generators", &f.generators)?)?;
        if let Some(m) = &f.morphisms {
            model = model.with_morphisms(to_maps("morphisms", m)?)?;
        }
        for (name, atoms) in &f.projections {
            model = model.with_projection(name.clone(), atoms.clone())?;
        }
        Ok(model)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: ModelFile = serde_json::from_str(s)?;
        Self::from_file_struct(&f)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_file_struct(&self) -> ModelFile {
        let pj = |g: &PartialMap| PairsJson {
            pairs: g.pairs().map(|(s, t)| [s, t]).collect(),
        };
        let space = self.rel.space();
        ModelFile {
            weights: (0..space.len())
                .map(|x| serde_json::Value::String(space.exact_weight(x).to_string()))
                .collect(),
            blocks: self.rel.blocks().to_vec(),
            generators: self.generators.iter().map(pj).collect(),
            morphisms: self.morphisms.as_ref().map(|m| m.iter().map(pj).collect()),
            projections: self.projections.clone(),
        }
    }

    pub fn rel(&self) -> &FinRel {
        &self.rel
    }

    pub fn num_atoms(&self) -> usize {
        self.rel.num_atoms()
    }

    pub fn generators(&self) -> &[PartialMap] {
        &self.generators
    }

    /// Morphisms of the graphing used for edge spaces; falls back to the generators.
    pub fn morphisms(&self) -> &[PartialMap] {
        self.morphisms.as_deref().unwrap_or(&self.generators)
    }

    pub fn has_morphisms(&self) -> bool {
        self.morphisms.is_some()
    }

    pub fn named_projections(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.projections
    }

    pub fn generator_label(j: usize) -> String {
        format!("g{j}")
    }

    pub fn atom_label(x: usize) -> String {
        format!("p{x}")
    }

    /// All labels: generators, atom projections, then named projections.
    pub fn labels(&self) -> Vec<String> {
        (0..self.generators.len())
            .map(Self::generator_label)
            .chain((0..self.num_atoms()).map(Self::atom_label))
            .chain(self.projections.keys().cloned())
            .collect()
    }

    pub fn generator_labels(&self) -> Vec<String> {
        (0..self.generators.len()).map(Self::generator_label).collect()
    }

    pub fn resolve(&self, label: &str) -> Result<LabelKind> {
        if let Some(v) = self.projections.get(label) {
            return Ok(LabelKind::Projection(v.clone()));
        }
        let index = |prefix: char| {
            label
                .strip_prefix(prefix)
                .and_then(|s| s.parse::<usize>().ok())
        };
        if let Some(j) = index('g') {
            if j < self.generators.len() {
                return Ok(LabelKind::Generator(j));
            }
        }
        if let Some(x) = index('p') {
            if x < self.num_atoms() {
                return Ok(LabelKind::Projection(vec![x]));
            }
        }
        Err(Error::Lookup(label.to_string()))
    }

    /// Atom-level partial map of a single letter.
    pub fn letter_map(&self, letter: &Letter) -> Result<PartialMap> {
        Ok(match self.resolve(&letter.label)? {
            LabelKind::Generator(j) if letter.inverse => self.generators[j].inverse(),
            LabelKind::Generator(j) => self.generators[j].clone(),
            LabelKind::Projection(atoms) => PartialMap::partial_identity(self.num_atoms(), atoms),
        })
    }

    /// Atom-level partial map of a word.
    pub fn evaluate(&self, word: &[Letter]) -> Result<PartialMap> {
        let mut acc = PartialMap::identity(self.num_atoms());
        for l in word {
            acc = acc.compose(&self.letter_map(l)?)?;
        }
        Ok(acc)
    }

    /// Whether the generators connect every orbit.
    pub fn generates(&self) -> bool {
        orbit_connectivity(&self.rel, &self.generators)
            .iter()
            .all(|&c| c == 1)
    }

    /// Restriction to the atoms in `keep`: weights renormalized by `μ(A)`, generators and
    /// morphisms conjugated by `id_A`, projections intersected. Returns the model and the
    /// old index of each new atom.
    pub fn compress(&self, keep: &[usize]) -> Result<(Model, Vec<usize>)> {
        let n = self.num_atoms();
        let mut mask = vec![false; n];
        for &x in keep {
            if x >= n {
                return Err(Error::model("compress", format!("atom {x} out of range")));
            }
            mask[x] = true;
        }
        let old: Vec<usize> = (0..n).filter(|&x| mask[x]).collect();
        if old.is_empty() {
            return Err(Error::model("compress", "empty compression set"));
        }
        let mut new_index = vec![usize::MAX; n];
        for (i, &x) in old.iter().enumerate() {
            new_index[x] = i;
        }
        let space = self.rel.space();
        let weights = old.iter().map(|&x| space.exact_weight(x).clone()).collect();
        let space_a = AtomSpace::from_rationals_unchecked_total(weights)?;
        let blocks: Vec<Vec<usize>> = self
            .rel
            .blocks()
            .iter()
            .map(|b| b.iter().filter(|&&x| mask[x]).map(|&x| new_index[x]).collect::<Vec<_>>())
            .filter(|b: &Vec<usize>| !b.is_empty())
            .collect();
        let rel = FinRel::new(space_a, blocks)?;
        let restrict = |g: &PartialMap| -> Result<PartialMap> {
            let pairs: Vec<(usize, usize)> = g
                .conjugate_by(&mask)
                .pairs()
                .map(|(s, t)| (new_index[s], new_index[t]))
                .collect();
            PartialMap::new(old.len(), &pairs)
        };
        let gens = self.generators.iter().map(restrict).collect::<Result<Vec<_>>>()?;
        let mut model = Model::new(rel, gens)?;
        if let Some(m) = &self.morphisms {
            model = model.with_morphisms(m.iter().map(restrict).collect::<Result<Vec<_>>>()?)?;
        }
        for (name, atoms) in &self.projections {
            let a = atoms.iter().filter(|&&x| mask[x]).map(|&x| new_index[x]).collect();
            model = model.with_projection(name.clone(), a)?;
        }
        Ok((model, old))
    }
}

impl AtomSpace {
    /// Normalizes arbitrary positive masses to total 1 (used by compression).
    pub fn from_rationals_unchecked_total(raw: Vec<BigRational>) -> Result<Self> {
        let total: BigRational = raw.iter().sum();
        if !total.is_positive() {
            return Err(Error::model("weights", "total mass must be positive"));
        }
        Self::from_rationals(raw.into_iter().map(|w| w / &total).collect())
    }
}

/// Number of connected components each orbit splits into under the given maps.
pub fn orbit_connectivity(rel: &FinRel, maps: &[PartialMap]) -> Vec<usize> {
    let n = rel.num_atoms();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut y = x;
        while p[y] != r {
            let next = p[y];
            p[y] = r;
            y = next;
        }
        r
    }
    for g in maps {
        for (s, t) in g.pairs() {
            let (a, b) = (find(&mut parent, s), find(&mut parent, t));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    rel.blocks()
        .iter()
        .map(|b| {
            let mut roots: Vec<usize> = b.iter().map(|&x| find(&mut parent, x)).collect();
            roots.sort_unstable();
            roots.dedup();
            roots.len()
        })
        .collect()
}

/// Convenience constructors for common finite relations.
pub mod builders {
    use super::*;

    /// `orbits` orbits of size `n`, uniform weights, one generator cycling each orbit.
    pub fn periodic(orbits: usize, n: usize) -> Model {
        let total = orbits * n;
        let rel = FinRel::new(
            AtomSpace::uniform(total),
            (0..orbits).map(|o| (o * n..(o + 1) * n).collect()).collect(),
        )
        .unwrap();
        let pairs: Vec<(usize, usize)> = (0..orbits)
            .flat_map(|o| (0..n).map(move |i| (o * n + i, o * n + (i + 1) % n)))
            .collect();
        Model::new(rel, vec![PartialMap::new(total, &pairs).unwrap()]).unwrap()
    }

    /// Same relation as [`periodic`] but generated by the chain `i → i+1` (a treeing).
    pub fn chain_treeing(orbits: usize, n: usize) -> Model {
        let total = orbits * n;
        let rel = FinRel::new(
            AtomSpace::uniform(total),
            (0..orbits).map(|o| (o * n..(o + 1) * n).collect()).collect(),
        )
        .unwrap();
        let pairs: Vec<(usize, usize)> = (0..orbits)
            .flat_map(|o| (0..n.saturating_sub(1)).map(move |i| (o * n + i, o * n + i + 1)))
            .collect();
        Model::new(rel, vec![PartialMap::new(total, &pairs).unwrap()]).unwrap()
    }
}
