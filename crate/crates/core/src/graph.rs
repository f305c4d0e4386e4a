//! Undirected connected graphs with a canonical edge orientation.
//!
//! Every edge is stored as `(u, v)` with `u < v`. In the incidence matrix the
//! starting node `u` carries `-1` and the terminating node `v` carries `+1`,
//! so `A·1 = 0` and `L = AᵀA = D - Adj`.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const ER_MAX_ATTEMPTS: u64 = 100;

/// An undirected, connected, simple graph on nodes `0..node_count`.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    node_count: usize,
    edges: Vec<(usize, usize)>,
    // Compressed neighbor lists: for node i, entries in
    // `nbr_offsets[i]..nbr_offsets[i + 1]` of the three arrays below.
    nbr_offsets: Vec<usize>,
    nbr_nodes: Vec<usize>,
    nbr_edges: Vec<usize>,
    nbr_signs: Vec<f64>,
}

impl Graph {
    /// Builds a graph from an edge list.
    ///
    /// Pairs are canonicalized to `(min, max)`; the given order of edges is
    /// kept. Self-loops, duplicates, out-of-range nodes and disconnected
    /// graphs are rejected.
    pub fn new(node_count: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::InvalidParameter("node count must be positive".into()));
        }
        let mut seen = BTreeSet::new();
        let mut canonical = Vec::new();
        for (a, b) in edges {
            if a >= node_count || b >= node_count {
                return Err(Error::InvalidParameter(format!(
                    "edge ({a}, {b}) references a node outside 0..{node_count}"
                )));
            }
            if a == b {
                return Err(Error::InvalidParameter(format!("self-loop at node {a}")));
            }
            let e = (a.min(b), a.max(b));
            if !seen.insert(e) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate edge ({}, {})",
                    e.0, e.1
                )));
            }
            canonical.push(e);
        }
        let components = count_components(node_count, &canonical);
        if components != 1 {
            return Err(Error::Disconnected { components });
        }
        Ok(Self::from_canonical(node_count, canonical))
    }

    fn from_canonical(node_count: usize, edges: Vec<(usize, usize)>) -> Self {
        let mut degree = vec![0usize; node_count];
        for &(u, v) in &edges {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut nbr_offsets = Vec::with_capacity(node_count + 1);
        nbr_offsets.push(0);
        for d in &degree {
            nbr_offsets.push(nbr_offsets.last().unwrap() + d);
        }
        let total = *nbr_offsets.last().unwrap();
        let mut nbr_nodes = vec![0; total];
        let mut nbr_edges = vec![0; total];
        let mut nbr_signs = vec![0.0; total];
        let mut cursor = nbr_offsets[..node_count].to_vec();
        for (e, &(u, v)) in edges.iter().enumerate() {
            let k = cursor[u];
            nbr_nodes[k] = v;
            nbr_edges[k] = e;
            nbr_signs[k] = -1.0;
            cursor[u] += 1;
            let k = cursor[v];
            nbr_nodes[k] = u;
            nbr_edges[k] = e;
            nbr_signs[k] = 1.0;
            cursor[v] += 1;
        }
        Self {
            node_count,
            edges,
            nbr_offsets,
            nbr_nodes,
            nbr_edges,
            nbr_signs,
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degree(&self, node: usize) -> usize {
        self.nbr_offsets[node + 1] - self.nbr_offsets[node]
    }

    /// Largest node degree, `d_max`.
    pub fn max_degree(&self) -> usize {
        (0..self.node_count).map(|i| self.degree(i)).max().unwrap_or(0)
    }

    /// Neighbors of `node` as `(neighbor, edge index, incidence sign of node on that edge)`.
    pub fn neighbors(&self, node: usize) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let range = self.nbr_offsets[node]..self.nbr_offsets[node + 1];
        range.map(move |k| (self.nbr_nodes[k], self.nbr_edges[k], self.nbr_signs[k]))
    }

    /// `A·x`: one entry per edge, `x_v - x_u`.
    pub fn apply_incidence(&self, x: &[f64]) -> Vec<f64> {
        self.edges.iter().map(|&(u, v)| x[v] - x[u]).collect()
    }

    /// `Aᵀ·b`, accumulated per node from incident edges only.
    pub fn apply_incidence_transpose(&self, b: &[f64]) -> Vec<f64> {
        (0..self.node_count)
            .map(|i| self.neighbors(i).map(|(_, e, s)| s * b[e]).sum())
            .collect()
    }

    /// `L·x`, accumulated per node as `Σ_{j~i} (x_i - x_j)`.
    pub fn apply_laplacian(&self, x: &[f64]) -> Vec<f64> {
        (0..self.node_count)
            .map(|i| self.neighbors(i).map(|(j, _, _)| x[i] - x[j]).sum())
            .collect()
    }

    /// Incidence matrix under the canonical orientation.
    pub fn incidence_matrix(&self) -> IncidenceMatrix {
        let n = self.node_count;
        let mut entries = vec![0i8; self.edges.len() * n];
        for (e, &(u, v)) in self.edges.iter().enumerate() {
            entries[e * n + u] = -1;
            entries[e * n + v] = 1;
        }
        IncidenceMatrix {
            rows: self.edges.len(),
            cols: n,
            entries,
        }
    }

    /// Integer Laplacian `D - Adj`, row-major `N×N`.
    pub fn laplacian_entries(&self) -> Vec<i64> {
        let n = self.node_count;
        let mut l = vec![0i64; n * n];
        for &(u, v) in &self.edges {
            l[u * n + u] += 1;
            l[v * n + v] += 1;
            l[u * n + v] -= 1;
            l[v * n + u] -= 1;
        }
        l
    }

    /// Dense floating-point Laplacian.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let n = self.node_count;
        let l = self.laplacian_entries();
        DMatrix::from_fn(n, n, |i, j| l[i * n + j] as f64)
    }

    /// Ascending Laplacian spectrum from a symmetric eigendecomposition.
    pub fn spectrum(&self) -> Result<LaplacianSpectrum> {
        LaplacianSpectrum::of(self)
    }

    /// Short human-readable description, e.g. `graph(N=160, M=160)`.
    pub fn descriptor(&self) -> String {
        format!("graph(N={}, M={})", self.node_count, self.edges.len())
    }

    /// Parses the plain-text edge-list format: a header line `N M`
    /// followed by `M` lines `u v`. Blank lines and `#` comments are skipped.
    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (line, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "missing `N M` header".into(),
        })?;
        let (n, m) = parse_pair(line, header)?;
        let mut edges = Vec::with_capacity(m);
        for (line, text) in lines {
            if edges.len() == m {
                return Err(Error::Parse {
                    line,
                    message: format!("more than the declared {m} edges"),
                });
            }
            edges.push(parse_pair(line, text)?);
        }
        if edges.len() != m {
            return Err(Error::Parse {
                line: text.lines().count(),
                message: format!("expected {m} edges, found {}", edges.len()),
            });
        }
        Self::new(n, edges)
    }

    /// Serializes to the edge-list format read by [`Graph::from_edge_list`].
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("{} {}\n", self.node_count, self.edges.len());
        for &(u, v) in &self.edges {
            let _ = writeln!(out, "{u} {v}");
        }
        out
    }
}

fn parse_pair(line: usize, text: &str) -> Result<(usize, usize)> {
    let fields: Vec<&str> = text.split_whitespace().collect();
    let bad = |message: String| Error::Parse { line, message };
    if fields.len() != 2 {
        return Err(bad(format!("expected two integers, got `{text}`")));
    }
    let parse = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| bad(format!("`{s}` is not a non-negative integer")))
    };
    Ok((parse(fields[0])?, parse(fields[1])?))
}

fn count_components(n: usize, edges: &[(usize, usize)]) -> usize {
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let mut parent: Vec<usize> = (0..n).collect();
    let mut components = n;
    for &(u, v) in edges {
        let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
        if ru != rv {
            parent[ru] = rv;
            components -= 1;
        }
    }
    components
}

/// Cycle on `n ≥ 3` nodes: edges `(i, i+1)` then the closing edge `(0, n-1)`.
pub fn build_cycle(n: usize) -> Result<Graph> {
    if n < 3 {
        return Err(Error::InvalidParameter(format!("cycle needs n >= 3, got {n}")));
    }
    let edges = (0..n - 1).map(|i| (i, i + 1)).chain(std::iter::once((0, n - 1)));
    Graph::new(n, edges)
}

/// Path on `n ≥ 2` nodes.
pub fn build_path(n: usize) -> Result<Graph> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("path needs n >= 2, got {n}")));
    }
    Graph::new(n, (0..n - 1).map(|i| (i, i + 1)))
}

/// Complete graph on `n ≥ 2` nodes, edges in lexicographic order.
pub fn build_complete(n: usize) -> Result<Graph> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("complete graph needs n >= 2, got {n}")));
    }
    Graph::new(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))))
}

/// Periodic `rows × cols` grid; node `(r, c)` has index `r * cols + c`.
///
/// With a side of length 2 the wrap-around edge coincides with the direct
/// one and is only added once.
pub fn build_torus_grid(rows: usize, cols: usize) -> Result<Graph> {
    if rows < 2 || cols < 2 {
        return Err(Error::InvalidParameter(format!(
            "torus needs rows, cols >= 2, got {rows}x{cols}"
        )));
    }
    let idx = |r: usize, c: usize| r * cols + c;
    let mut seen = BTreeSet::new();
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            for (a, b) in [(idx(r, c), idx(r, (c + 1) % cols)), (idx(r, c), idx((r + 1) % rows, c))] {
                let e = (a.min(b), a.max(b));
                if seen.insert(e) {
                    edges.push(e);
                }
            }
        }
    }
    Graph::new(rows * cols, edges)
}

/// Erdős–Rényi `G(n, p)` conditioned on connectivity.
///
/// Attempt `k` (0-based) draws every pair `i < j` independently from a
/// ChaCha8 stream seeded with `seed + k`; the first connected draw wins.
pub fn build_erdos_renyi(n: usize, p: f64, seed: u64) -> Result<Graph> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("Erdos-Renyi needs n >= 2, got {n}")));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidParameter(format!("edge probability must be in (0, 1], got {p}")));
    }
    for attempt in 0..ER_MAX_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt));
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.random::<f64>() < p {
                    edges.push((i, j));
                }
            }
        }
        if count_components(n, &edges) == 1 {
            return Ok(Graph::from_canonical(n, edges));
        }
    }
    Err(Error::ConstructionFailure(format!(
        "no connected G({n}, {p}) sample in {ER_MAX_ATTEMPTS} attempts from seed {seed}"
    )))
}

/// Dense `M×N` incidence matrix with entries in `{-1, 0, +1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncidenceMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<i8>,
}

impl IncidenceMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, edge: usize, node: usize) -> i8 {
        self.entries[edge * self.cols + node]
    }

    pub fn row(&self, edge: usize) -> &[i8] {
        &self.entries[edge * self.cols..(edge + 1) * self.cols]
    }

    /// Exact integer `AᵀA`, row-major `N×N`.
    pub fn gram(&self) -> Vec<i64> {
        let n = self.cols;
        let mut g = vec![0i64; n * n];
        for e in 0..self.rows {
            let row = self.row(e);
            let nz: Vec<usize> = (0..n).filter(|&i| row[i] != 0).collect();
            for &i in &nz {
                for &j in &nz {
                    g[i * n + j] += i64::from(row[i]) * i64::from(row[j]);
                }
            }
        }
        g
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |e, i| f64::from(self.get(e, i)))
    }
}

/// Ascending Laplacian eigenvalues with matching orthonormal eigenvectors
/// (column `k` of `eigenvectors` belongs to `eigenvalues[k]`).
#[derive(Debug, Clone)]
pub struct LaplacianSpectrum {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
}

impl LaplacianSpectrum {
    fn of(g: &Graph) -> Result<Self> {
        let n = g.node_count();
        let l = g.laplacian();
        let eig = SymmetricEigen::try_new(l, f64::EPSILON, 0).ok_or_else(|| {
            Error::NumericalFailure("symmetric eigensolver did not converge".into())
        })?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let mut eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let eigenvectors = DMatrix::from_fn(n, n, |i, k| eig.eigenvectors[(i, order[k])]);

        let scale = eigenvalues[n - 1].max(1.0);
        if eigenvalues[0].abs() > 1e-9 * scale {
            return Err(Error::NumericalFailure(format!(
                "smallest Laplacian eigenvalue {} is not zero",
                eigenvalues[0]
            )));
        }
        if n > 1 && eigenvalues[1] <= 1e-9 * scale {
            return Err(Error::NumericalFailure(format!(
                "second Laplacian eigenvalue {} is not positive",
                eigenvalues[1]
            )));
        }
        let bound = 2.0 * g.max_degree() as f64;
        if eigenvalues[n - 1] > bound + 1e-9 {
            return Err(Error::NumericalFailure(format!(
                "largest Laplacian eigenvalue {} exceeds 2 d_max = {bound}",
                eigenvalues[n - 1]
            )));
        }
        // The kernel of a connected Laplacian is exactly span(1).
        eigenvalues[0] = 0.0;
        Ok(Self {
            eigenvalues,
            eigenvectors,
        })
    }

    /// Builds a spectrum from known eigenvalues (sorted ascending here).
    /// Eigenvectors are left empty.
    pub fn from_eigenvalues(mut eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::InvalidParameter("empty spectrum".into()));
        }
        if eigenvalues.iter().any(|l| !l.is_finite() || *l < -1e-9) {
            return Err(Error::InvalidParameter("Laplacian eigenvalues must be finite and >= 0".into()));
        }
        eigenvalues.sort_by(f64::total_cmp);
        Ok(Self {
            eigenvalues,
            eigenvectors: DMatrix::zeros(0, 0),
        })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn max(&self) -> f64 {
        *self.eigenvalues.last().unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_edge() -> Graph {
        build_complete(2).unwrap()
    }

    #[test]
    fn smallest_cycle() {
        let g = build_cycle(3).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2), (0, 2)]);
        assert_eq!(g.max_degree(), 2);
    }

    #[test]
    fn cycle_of_160() {
        let g = build_cycle(160).unwrap();
        assert_eq!(g.node_count(), 160);
        assert_eq!(g.edge_count(), 160);
        assert_eq!(g.max_degree(), 2);
    }

    #[test]
    fn tiny_cycle_rejected() {
        assert!(matches!(build_cycle(2), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn small_families() {
        assert_eq!(single_edge().edges(), &[(0, 1)]);
        let p = build_path(3).unwrap();
        assert_eq!(p.edges(), &[(0, 1), (1, 2)]);
        assert_eq!(p.max_degree(), 2);
        assert_eq!(build_complete(5).unwrap().max_degree(), 4);
        let t = build_torus_grid(3, 4).unwrap();
        assert_eq!(t.node_count(), 12);
        assert_eq!(t.edge_count(), 24);
        assert!((0..12).all(|i| t.degree(i) == 4));
        let t2 = build_torus_grid(2, 3).unwrap();
        assert_eq!(t2.edge_count(), 9);
    }

    #[test]
    fn erdos_renyi_is_reproducible() {
        let a = build_erdos_renyi(20, 0.3, 7).unwrap();
        let b = build_erdos_renyi(20, 0.3, 7).unwrap();
        assert_eq!(a.edges(), b.edges());
        assert!(a.edges().iter().all(|&(u, v)| u < v));
    }

    #[test]
    fn erdos_renyi_gives_up() {
        assert!(matches!(
            build_erdos_renyi(50, 1e-4, 1),
            Err(Error::ConstructionFailure(_))
        ));
        assert!(build_erdos_renyi(5, 0.0, 1).is_err());
    }

    #[test]
    fn constructor_validation() {
        assert!(matches!(Graph::new(3, [(0, 1)]), Err(Error::Disconnected { components: 2 })));
        assert!(Graph::new(2, [(0, 0)]).is_err());
        assert!(Graph::new(2, [(0, 1), (1, 0)]).is_err());
        assert!(Graph::new(2, [(0, 2)]).is_err());
        let g = Graph::new(3, [(2, 1), (1, 0)]).unwrap();
        assert_eq!(g.edges(), &[(1, 2), (0, 1)]);
    }

    #[test]
    fn incidence_orientation() {
        let a = single_edge().incidence_matrix();
        assert_eq!(a.row(0), &[-1, 1]);
        let a = build_cycle(3).unwrap().incidence_matrix();
        for e in 0..3 {
            let row = a.row(e);
            assert_eq!(row.iter().filter(|&&x| x == 1).count(), 1);
            assert_eq!(row.iter().filter(|&&x| x == -1).count(), 1);
            assert_eq!(row.iter().map(|&x| i32::from(x)).sum::<i32>(), 0);
        }
    }

    #[test]
    fn small_laplacians() {
        assert_eq!(single_edge().laplacian_entries(), vec![1, -1, -1, 1]);
        assert_eq!(
            build_cycle(3).unwrap().laplacian_entries(),
            vec![2, -1, -1, -1, 2, -1, -1, -1, 2]
        );
    }

    #[test]
    fn small_spectra() {
        let s = single_edge().spectrum().unwrap();
        assert!((s.eigenvalues()[1] - 2.0).abs() < 1e-12);
        let s = build_cycle(4).unwrap().spectrum().unwrap();
        for (got, want) in s.eigenvalues().iter().zip([0.0, 2.0, 2.0, 4.0]) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        let s = build_complete(4).unwrap().spectrum().unwrap();
        for (got, want) in s.eigenvalues().iter().zip([0.0, 4.0, 4.0, 4.0]) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn edge_list_parsing() {
        let g = Graph::from_edge_list("# ring\n3 3\n0 1\n1 2\n\n2 0\n").unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2), (0, 2)]);
        assert_eq!(g.to_edge_list(), "3 3\n0 1\n1 2\n0 2\n");
        assert!(matches!(Graph::from_edge_list("3 2\n0 1\n"), Err(Error::Parse { .. })));
        assert!(matches!(Graph::from_edge_list("2 1\n0 x\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(Graph::from_edge_list(""), Err(Error::Parse { .. })));
        assert!(matches!(Graph::from_edge_list("2 1\n0 1\n0 1\n"), Err(Error::Parse { line: 3, .. })));
    }
}
