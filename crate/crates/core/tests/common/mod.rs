#![allow(dead_code)]

use std::path::{Path, PathBuf};

use lpdim::algebra::PartialMap;
use lpdim::graphcoh::Graph;
use lpdim::graphings::Graphing;
use lpdim::relation::{FinRel, Model};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

/// The finite-orbit models shipped in `data/`.
pub fn bundled_models() -> Vec<(&'static str, Model)> {
    ["periodic4.json", "treeing.json", "mixed.json", "split.json"]
        .into_iter()
        .map(|n| (n, Model::load(data_dir().join(n)).unwrap()))
        .collect()
}

/// Random graph with no isolated vertices: a random spanning forest on `parts`
/// contiguous vertex ranges plus `extra` random edges inside them.
pub fn random_graph(n: usize, parts: usize, extra: usize, rng: &mut ChaCha8Rng) -> Graph {
    let parts = parts.clamp(1, n / 2).max(1);
    let cuts: Vec<usize> = (0..=parts).map(|i| i * n / parts).collect();
    let mut edges = Vec::new();
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        for v in lo + 1..hi {
            edges.push((rng.random_range(lo..v), v));
        }
        if hi - lo >= 3 {
            for _ in 0..extra / parts {
                let a = rng.random_range(lo..hi);
                let b = rng.random_range(lo..hi);
                if a != b {
                    edges.push((a, b));
                }
            }
        }
    }
    Graph::new(n, &edges).unwrap()
}

pub fn connected_graph(n: usize, extra: usize, rng: &mut ChaCha8Rng) -> Graph {
    random_graph(n, 1, extra, rng)
}

/// Packs oriented edges into partial bijections greedily.
pub fn pack_edges(n: usize, edges: &[(usize, usize)]) -> Vec<PartialMap> {
    let mut maps: Vec<(Vec<bool>, Vec<bool>, Vec<(usize, usize)>)> = Vec::new();
    for &(s, t) in edges {
        match maps.iter_mut().find(|(dom, ran, _)| !dom[s] && !ran[t]) {
            Some((dom, ran, pairs)) => {
                dom[s] = true;
                ran[t] = true;
                pairs.push((s, t));
            }
            None => {
                let (mut dom, mut ran) = (vec![false; n], vec![false; n]);
                dom[s] = true;
                ran[t] = true;
                maps.push((dom, ran, vec![(s, t)]));
            }
        }
    }
    maps.into_iter().map(|(_, _, p)| PartialMap::new(n, &p).unwrap()).collect()
}

/// Random generating graphing: a random spanning tree per orbit plus `extra` edges.
pub fn random_graphing(rel: &FinRel, extra: usize, rng: &mut ChaCha8Rng) -> Graphing {
    let mut edges = Vec::new();
    for b in rel.blocks() {
        let mut order = b.clone();
        order.shuffle(rng);
        for i in 1..order.len() {
            edges.push((order[rng.random_range(0..i)], order[i]));
        }
        if b.len() >= 3 {
            for _ in 0..extra {
                let a = b[rng.random_range(0..b.len())];
                let c = b[rng.random_range(0..b.len())];
                if a != c {
                    edges.push((a, c));
                }
            }
        }
    }
    Graphing::new(rel.clone(), pack_edges(rel.num_atoms(), &edges)).unwrap()
}

/// Model on `rel` generated by a chain through each orbit.
pub fn chain_model(rel: &FinRel) -> Model {
    Model::new(rel.clone(), Graphing::chain_treeing(rel).morphisms().to_vec()).unwrap()
}

/// Grounded Dirichlet problem `(A − I) h = b` on free vertices, solved by LU.
pub fn dense_dirichlet(g: &Graph, grounded: &[usize], b: &[f64]) -> Vec<f64> {
    let n = g.num_vertices();
    let mut mask = vec![false; n];
    grounded.iter().for_each(|&v| mask[v] = true);
    let free: Vec<usize> = (0..n).filter(|&v| !mask[v]).collect();
    let m = DMatrix::from_fn(free.len(), free.len(), |i, j| {
        let (x, y) = (free[i], free[j]);
        let a = if g.oriented(x, y).is_some() { 1.0 / g.degree(x) as f64 } else { 0.0 };
        a - if i == j { 1.0 } else { 0.0 }
    });
    let rhs = DVector::from_iterator(free.len(), free.iter().map(|&v| b[v]));
    let s = m.lu().solve(&rhs).unwrap();
    let mut h = vec![0.0; n];
    free.iter().enumerate().for_each(|(i, &v)| h[v] = s[i]);
    h
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}
