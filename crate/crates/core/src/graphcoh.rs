//! Chains and cochains on finite graphs.
//!
//! Edge functions are stored one value per unoriented edge, read in the reference
//! orientation `(min, max)`; reading an edge the other way negates. Vertex functions are
//! one value per vertex.
//!
//! Sign conventions: `δg(v,w) = g(w) − g(v)` and `(∂f)(v) = Σ_{w~v} f(v,w)`, so that
//! `⟨∂f,g⟩ = −⟨f,δg⟩` and `Δ = ∂δ = M_d(A − 1)`.

use std::collections::{HashMap, VecDeque};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Finite simple graph with reference orientation `u < v` on every edge.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    /// Per vertex: `(neighbour, edge index)`.
    adj: Vec<Vec<(usize, usize)>>,
    index: HashMap<(usize, usize), usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GraphFile {
    pub n: usize,
    pub edges: Vec<[usize; 2]>,
}

impl Graph {
    /// Builds a graph; repeated edges are merged, self-loops rejected.
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut list: Vec<(usize, usize)> = Vec::with_capacity(edges.len());
        for (i, &(a, b)) in edges.iter().enumerate() {
            if a >= n || b >= n {
                return Err(Error::model(format!("edges[{i}]"), format!("vertex out of range for n = {n}")));
            }
            if a == b {
                return Err(Error::model(format!("edges[{i}]"), format!("self-loop at {a}")));
            }
            list.push((a.min(b), a.max(b)));
        }
        list.sort_unstable();
        list.dedup();
        let mut adj = vec![Vec::new(); n];
        let mut index = HashMap::with_capacity(list.len());
        for (e, &(u, v)) in list.iter().enumerate() {
            adj[u].push((v, e));
            adj[v].push((u, e));
            index.insert((u, v), e);
        }
        Ok(Self { n, edges: list, adj, index })
    }

    pub fn from_file_struct(f: &GraphFile) -> Result<Self> {
        let edges: Vec<(usize, usize)> = f.edges.iter().map(|e| (e[0], e[1])).collect();
        let g = Self::new(f.n, &edges)?;
        if let Some(v) = (0..g.n).find(|&v| g.adj[v].is_empty()) {
            return Err(Error::model("edges", format!("vertex {v} is isolated")));
        }
        Ok(g)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_file_struct(&serde_json::from_str(s)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_file_struct(&self) -> GraphFile {
        GraphFile {
            n: self.n,
            edges: self.edges.iter().map(|&(u, v)| [u, v]).collect(),
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.adj[v].iter().map(|&(w, _)| w)
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adj.iter().map(Vec::len).collect()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Edge index and sign (`+1` in reference orientation) of the oriented edge `(x,y)`.
    pub fn oriented(&self, x: usize, y: usize) -> Option<(usize, f64)> {
        if x < y {
            self.index.get(&(x, y)).map(|&e| (e, 1.0))
        } else {
            self.index.get(&(y, x)).map(|&e| (e, -1.0))
        }
    }

    /// `f(x,y)`, honouring antisymmetry.
    pub fn edge_value(&self, f: &[f64], x: usize, y: usize) -> Option<f64> {
        self.oriented(x, y).map(|(e, s)| s * f[e])
    }

    /// Component label per vertex and the number of components.
    pub fn components(&self) -> (Vec<usize>, usize) {
        let mut comp = vec![usize::MAX; self.n];
        let mut c = 0;
        for s in 0..self.n {
            if comp[s] != usize::MAX {
                continue;
            }
            comp[s] = c;
            let mut queue = VecDeque::from([s]);
            while let Some(v) = queue.pop_front() {
                for w in self.neighbors(v) {
                    if comp[w] == usize::MAX {
                        comp[w] = c;
                        queue.push_back(w);
                    }
                }
            }
            c += 1;
        }
        (comp, c)
    }

    /// Breadth-first spanning forest: parent (with edge), depth, and visiting order.
    fn spanning_forest(&self) -> (Vec<Option<(usize, usize)>>, Vec<usize>, Vec<usize>) {
        let mut parent = vec![None; self.n];
        let mut depth = vec![usize::MAX; self.n];
        let mut order = Vec::with_capacity(self.n);
        for s in 0..self.n {
            if depth[s] != usize::MAX {
                continue;
            }
            depth[s] = 0;
            let mut queue = VecDeque::from([s]);
            while let Some(v) = queue.pop_front() {
                order.push(v);
                for &(w, e) in &self.adj[v] {
                    if depth[w] == usize::MAX {
                        depth[w] = depth[v] + 1;
                        parent[w] = Some((v, e));
                        queue.push_back(w);
                    }
                }
            }
        }
        (parent, depth, order)
    }

    fn check_vertex_fn(&self, g: &[f64]) -> Result<()> {
        if g.len() != self.n {
            return Err(Error::Dimension(format!("vertex function of length {}, graph has {} vertices", g.len(), self.n)));
        }
        Ok(())
    }

    fn check_edge_fn(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.edges.len() {
            return Err(Error::Dimension(format!("edge function of length {}, graph has {} edges", f.len(), self.edges.len())));
        }
        Ok(())
    }
}

/// `δg(v,w) = g(w) − g(v)` on reference orientations.
pub fn delta(graph: &Graph, g: &[f64]) -> Result<Vec<f64>> {
    graph.check_vertex_fn(g)?;
    Ok(graph.edges.iter().map(|&(u, v)| g[v] - g[u]).collect())
}

/// `(∂f)(v) = Σ_{w~v} f(v,w)`.
pub fn boundary(graph: &Graph, f: &[f64]) -> Result<Vec<f64>> {
    graph.check_edge_fn(f)?;
    let mut out = vec![0.0; graph.n];
    for (e, &(u, v)) in graph.edges.iter().enumerate() {
        out[u] += f[e];
        out[v] -= f[e];
    }
    Ok(out)
}

/// Pairing of vertex functions.
pub fn vertex_pairing(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Pairing of edge functions over unoriented edges (orientation independent).
pub fn edge_pairing(a: &[f64], b: &[f64]) -> f64 {
    vertex_pairing(a, b)
}

fn check_path(graph: &Graph, path: &[usize]) -> Result<Vec<(usize, f64)>> {
    let mut steps = Vec::with_capacity(path.len().saturating_sub(1));
    for (j, w) in path.windows(2).enumerate() {
        if w[0] >= graph.n || w[1] >= graph.n {
            return Err(Error::Path(format!("step {j}: vertex out of range")));
        }
        match graph.oriented(w[0], w[1]) {
            Some(s) => steps.push(s),
            None => return Err(Error::Path(format!("step {j}: {} and {} are not adjacent", w[0], w[1]))),
        }
    }
    if path.len() == 1 && path[0] >= graph.n {
        return Err(Error::Path("vertex out of range".into()));
    }
    Ok(steps)
}

/// `∫_γ f = Σ_j f(γ(j−1), γ(j))`.
pub fn path_integral(graph: &Graph, f: &[f64], path: &[usize]) -> Result<f64> {
    graph.check_edge_fn(f)?;
    Ok(check_path(graph, path)?.into_iter().map(|(e, s)| s * f[e]).sum())
}

/// The path as an edge chain `Σ_j E_{(γ(j−1),γ(j))}`.
pub fn path_chain(graph: &Graph, path: &[usize]) -> Result<Vec<f64>> {
    let mut f = vec![0.0; graph.edges.len()];
    for (e, s) in check_path(graph, path)? {
        f[e] += s;
    }
    Ok(f)
}

/// Fundamental loops of a breadth-first spanning forest, as closed vertex sequences.
pub fn fundamental_loops(graph: &Graph) -> Vec<Vec<usize>> {
    let (parent, depth, _) = graph.spanning_forest();
    let tree: Vec<bool> = {
        let mut t = vec![false; graph.edges.len()];
        parent.iter().flatten().for_each(|&(_, e)| t[e] = true);
        t
    };
    let mut loops = Vec::new();
    for (e, &(u, v)) in graph.edges.iter().enumerate() {
        if tree[e] {
            continue;
        }
        // u -> v along the edge, then v back to u through the tree
        let (mut a, mut b) = (v, u);
        let mut up = vec![a];
        let mut down = vec![b];
        while depth[a] > depth[b] {
            a = parent[a].unwrap().0;
            up.push(a);
        }
        while depth[b] > depth[a] {
            b = parent[b].unwrap().0;
            down.push(b);
        }
        while a != b {
            a = parent[a].unwrap().0;
            b = parent[b].unwrap().0;
            up.push(a);
            down.push(b);
        }
        down.pop();
        let mut cycle = vec![u];
        cycle.extend(up);
        cycle.extend(down.into_iter().rev());
        loops.push(cycle);
    }
    loops
}

/// Basis of the cycle space: one chain per fundamental loop, `|E| − |V| + #components` in total.
pub fn cycle_space_basis(graph: &Graph) -> Vec<Vec<f64>> {
    fundamental_loops(graph)
        .iter()
        .map(|l| path_chain(graph, l).expect("fundamental loops are paths"))
        .collect()
}

/// Whether `∫_γ f = 0` on every fundamental loop, up to `tol`.
pub fn is_cocycle(graph: &Graph, f: &[f64], tol: f64) -> Result<bool> {
    graph.check_edge_fn(f)?;
    for l in fundamental_loops(graph) {
        if path_integral(graph, f, &l)?.abs() > tol {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `h(v) = ∫_{root → v} f` along the spanning forest, rooted at the smallest vertex of each
/// component.
pub fn potential(graph: &Graph, f: &[f64]) -> Result<Vec<f64>> {
    graph.check_edge_fn(f)?;
    let (parent, _, order) = graph.spanning_forest();
    let mut h = vec![0.0; graph.n];
    for v in order {
        if let Some((p, _)) = parent[v] {
            h[v] = h[p] + graph.edge_value(f, p, v).unwrap();
        }
    }
    Ok(h)
}

/// Splits `f` into a cycle part (in `ker ∂`) and a cut part (in `im δ`). The cut part is
/// `δh` with `Δh = ∂f` solved on mean-zero functions per component.
pub fn hodge_project(graph: &Graph, f: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let b = boundary(graph, f)?;
    let (comp, nc) = graph.components();
    let mut members = vec![Vec::new(); nc];
    for v in 0..graph.n {
        members[comp[v]].push(v);
    }
    let mut h = vec![0.0; graph.n];
    for verts in members.iter().filter(|m| m.len() > 1) {
        // ground the first vertex; the reduced Laplacian is positive definite
        let local: HashMap<usize, usize> = verts.iter().skip(1).enumerate().map(|(i, &v)| (v, i)).collect();
        let m = local.len();
        let mut lap = DMatrix::<f64>::zeros(m, m);
        let mut rhs = nalgebra::DVector::<f64>::zeros(m);
        for (&v, &i) in &local {
            lap[(i, i)] = graph.degree(v) as f64;
            for w in graph.neighbors(v) {
                if let Some(&j) = local.get(&w) {
                    lap[(i, j)] -= 1.0;
                }
            }
            // ∂δ = −L
            rhs[i] = -b[v];
        }
        let sol = lap
            .cholesky()
            .ok_or_else(|| Error::Consistency("reduced Laplacian not positive definite".into()))?
            .solve(&rhs);
        for (&v, &i) in &local {
            h[v] = sol[i];
        }
        let mean = verts.iter().map(|&v| h[v]).sum::<f64>() / verts.len() as f64;
        verts.iter().for_each(|&v| h[v] -= mean);
    }
    let cut = delta(graph, &h)?;
    let cycle = f.iter().zip(&cut).map(|(a, c)| a - c).collect();
    Ok((cycle, cut))
}

/// Result of a truncated Neumann series solve.
#[derive(Clone, Debug, PartialEq)]
pub struct NeumannSolution {
    pub h: Vec<f64>,
    pub iterations: usize,
    /// Last increment norm relative to `‖b‖`.
    pub last_increment: f64,
}

fn weighted_norm(v: &[f64], deg: &[f64], p: f64) -> f64 {
    v.iter().zip(deg).map(|(x, d)| d * x.abs().powf(p)).sum::<f64>().powf(1.0 / p)
}

/// Grounded averaging operator: `(Af)(x) = (1/d(x)) Σ_{y~x, y not grounded} f(y)` for
/// non-grounded `x`, zero on grounded vertices.
pub fn grounded_average(graph: &Graph, grounded: &[bool], f: &[f64]) -> Vec<f64> {
    (0..graph.n)
        .map(|x| {
            if grounded[x] || graph.degree(x) == 0 {
                return 0.0;
            }
            let s: f64 = graph.neighbors(x).filter(|&y| !grounded[y]).map(|y| f[y]).sum();
            s / graph.degree(x) as f64
        })
        .collect()
}

fn grounding_mask(graph: &Graph, grounded: &[usize]) -> Result<Vec<bool>> {
    let mut mask = vec![false; graph.n];
    for &v in grounded {
        if v >= graph.n {
            return Err(Error::Parameter(format!("grounded vertex {v} out of range")));
        }
        mask[v] = true;
    }
    Ok(mask)
}

fn series(apply: impl Fn(&[f64]) -> Vec<f64>, b: &[f64], norm: impl Fn(&[f64]) -> f64, tol: f64, max_iter: usize) -> Result<NeumannSolution> {
    let nb = norm(b);
    let mut h: Vec<f64> = b.iter().map(|x| -x).collect();
    if nb == 0.0 {
        return Ok(NeumannSolution { h, iterations: 0, last_increment: 0.0 });
    }
    let mut term = b.to_vec();
    let mut history = vec![1.0];
    for k in 1..=max_iter {
        term = apply(&term);
        h.iter_mut().zip(&term).for_each(|(a, t)| *a -= t);
        let inc = norm(&term) / nb;
        history.push(inc);
        if inc <= tol {
            return Ok(NeumannSolution { h, iterations: k, last_increment: inc });
        }
        if k >= 10 && inc > history[k - 10] {
            let rate = (inc / history[k - 10]).powf(0.1);
            return Err(Error::Spectral {
                msg: format!("series increments grew over 10 steps at step {k}"),
                norm: rate,
            });
        }
    }
    let rate = (history[max_iter] / history[max_iter - 10]).powf(0.1);
    Err(Error::Spectral {
        msg: format!("no convergence to {tol:e} in {max_iter} steps"),
        norm: rate,
    })
}

/// Solves `Δ_d h = b` on the non-grounded vertices (Dirichlet on the grounded set) by
/// `h = −Σ_k A^k b`, stopping once the l^p(V,d) increment drops below `tol·‖b‖`.
/// `b` is a full vertex function that must vanish on grounded vertices.
pub fn neumann_inverse(graph: &Graph, grounded: &[usize], b: &[f64], p: f64, tol: f64) -> Result<NeumannSolution> {
    graph.check_vertex_fn(b)?;
    if !(p >= 1.0) || !(tol > 0.0) {
        return Err(Error::Parameter(format!("need p >= 1 and tol > 0, got p = {p}, tol = {tol}")));
    }
    let mask = grounding_mask(graph, grounded)?;
    let (comp, nc) = graph.components();
    let mut has = vec![false; nc];
    (0..graph.n).filter(|&v| mask[v]).for_each(|v| has[comp[v]] = true);
    if let Some(c) = (0..nc).find(|&c| !has[c]) {
        let v = comp.iter().position(|&x| x == c).unwrap();
        return Err(Error::Parameter(format!("component containing vertex {v} has no grounded vertex")));
    }
    if let Some(v) = (0..graph.n).find(|&v| mask[v] && b[v] != 0.0) {
        return Err(Error::Parameter(format!("right-hand side is nonzero at grounded vertex {v}")));
    }
    let deg: Vec<f64> = graph.degrees().iter().map(|&d| d.max(1) as f64).collect();
    series(|f| grounded_average(graph, &mask, f), b, |v| weighted_norm(v, &deg, p), tol, 1_000_000)
}

/// `1 −` the l²(V,d) norm of the grounded averaging operator, by power iteration. An
/// ungrounded component gives 0.
pub fn amenability_margin(graph: &Graph, grounded: &[usize]) -> Result<f64> {
    let mask = grounding_mask(graph, grounded)?;
    let free: Vec<usize> = (0..graph.n).filter(|&v| !mask[v]).collect();
    if free.is_empty() {
        return Ok(1.0);
    }
    // symmetric form D^{1/2} A D^{-1/2} acting on free vertices
    let sq: Vec<f64> = graph.degrees().iter().map(|&d| (d as f64).sqrt()).collect();
    let apply = |x: &[f64]| -> Vec<f64> {
        (0..graph.n)
            .map(|v| {
                if mask[v] || sq[v] == 0.0 {
                    return 0.0;
                }
                graph
                    .neighbors(v)
                    .filter(|&w| !mask[w])
                    .map(|w| x[w] / sq[w])
                    .sum::<f64>()
                    / sq[v]
            })
            .collect()
    };
    let norm = |x: &[f64]| x.iter().map(|a| a * a).sum::<f64>().sqrt();
    let mut x: Vec<f64> = (0..graph.n)
        .map(|v| if mask[v] { 0.0 } else { 1.0 + 0.25 * ((v as f64) * 0.7).sin() })
        .collect();
    let n0 = norm(&x);
    x.iter_mut().for_each(|a| *a /= n0);
    let mut est = 0.0;
    for _ in 0..1_000_000 {
        let y = apply(&x);
        let ny = norm(&y);
        if ny == 0.0 {
            return Ok(1.0);
        }
        let done = (ny - est).abs() <= 1e-12;
        est = ny;
        x = y.into_iter().map(|a| a / ny).collect();
        if done {
            break;
        }
    }
    Ok((1.0 - est).max(0.0))
}
