//! Regular graphs with self-loops, conductance, and planted instances.
//!
//! Every vertex has degree exactly `d` once its self-loops are counted;
//! that is the convention all volumes and Laplacians in this crate use.

mod certify;
mod generate;
pub mod io;
mod labels;
mod weighting;

use sha2::{Digest, Sha256};

pub use certify::{internal_conductance_bound, lambda2_of_induced, CertMethod, EXHAUSTIVE_LIMIT};
pub use generate::{
    generate_planted, generate_uninformative_middle, min_accepted_lambda2, GeneratorKind,
    PlantedInstance,
};
pub use labels::{perturb_labels, Labeling, PerturbMode};
pub use weighting::EdgeWeighting;

use crate::error::{Error, Result};

/// A `d`-regular undirected graph; missing degree is made up by self-loops.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegularGraph {
    d: usize,
    adj: Vec<Vec<usize>>,
    loops: Vec<usize>,
    edge_ids: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
}

impl RegularGraph {
    /// Builds a graph from per-vertex neighbor lists and self-loop counts,
    /// checking symmetry, duplicates and the degree identity.
    pub fn new(d: usize, mut adj: Vec<Vec<usize>>, loops: Vec<usize>) -> Result<Self> {
        let n = adj.len();
        if loops.len() != n {
            return Err(Error::Parameter(format!(
                "{} loop counts for {n} vertices",
                loops.len()
            )));
        }
        if d == 0 {
            return Err(Error::Parameter("degree must be positive".into()));
        }
        for (u, list) in adj.iter_mut().enumerate() {
            list.sort_unstable();
            if list.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Parameter(format!("duplicate neighbor at vertex {u}")));
            }
            if let Some(&v) = list.iter().find(|&&v| v >= n || v == u) {
                return Err(Error::Parameter(format!("invalid neighbor {v} at vertex {u}")));
            }
            if list.len() + loops[u] != d {
                return Err(Error::Parameter(format!(
                    "vertex {u} has {} neighbors and {} self-loops, expected degree {d}",
                    list.len(),
                    loops[u]
                )));
            }
        }
        for u in 0..n {
            for &v in &adj[u] {
                if adj[v].binary_search(&u).is_err() {
                    return Err(Error::Parameter(format!("asymmetric edge {u} -> {v}")));
                }
            }
        }
        let mut edges = Vec::new();
        for (u, list) in adj.iter().enumerate() {
            for &v in list {
                if u < v {
                    edges.push((u, v));
                }
            }
        }
        let edge_ids = adj
            .iter()
            .enumerate()
            .map(|(u, list)| {
                list.iter()
                    .map(|&v| {
                        let key = (u.min(v), u.max(v));
                        edges.binary_search(&key).expect("edge present")
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            d,
            adj,
            loops,
            edge_ids,
            edges,
        })
    }

    /// Builds a graph from an undirected edge list, filling every vertex up
    /// to degree `d` with self-loops.
    pub fn from_edges(n: usize, d: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::Parameter(format!("edge ({u}, {v}) out of range")));
            }
            adj[u].push(v);
            adj[v].push(u);
        }
        let mut loops = Vec::with_capacity(n);
        for (u, list) in adj.iter().enumerate() {
            if list.len() > d {
                return Err(Error::Parameter(format!(
                    "vertex {u} has degree {} > {d}",
                    list.len()
                )));
            }
            loops.push(d - list.len());
        }
        Self::new(d, adj, loops)
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.adj[u]
    }

    /// Edge ids parallel to [`neighbors`](Self::neighbors).
    pub fn incident_edges(&self, u: usize) -> &[usize] {
        &self.edge_ids[u]
    }

    pub fn self_loops(&self, u: usize) -> usize {
        self.loops[u]
    }

    /// Undirected edges `(u, v)` with `u < v`, sorted; the position is the edge id.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edge_index(&self, u: usize, v: usize) -> Option<usize> {
        self.edges.binary_search(&(u.min(v), u.max(v))).ok()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u].binary_search(&v).is_ok()
    }

    /// Total volume `n·d`.
    pub fn volume(&self) -> usize {
        self.n() * self.d
    }

    /// Subgraph induced on `members` with outside edges turned into
    /// self-loops. Returns the graph and the local-to-global id map.
    pub fn induced(&self, members: &[usize]) -> (RegularGraph, Vec<usize>) {
        let mut local = vec![usize::MAX; self.n()];
        for (i, &u) in members.iter().enumerate() {
            local[u] = i;
        }
        let mut adj = Vec::with_capacity(members.len());
        let mut loops = Vec::with_capacity(members.len());
        for &u in members {
            let list: Vec<usize> = self.adj[u]
                .iter()
                .filter(|&&v| local[v] != usize::MAX)
                .map(|&v| local[v])
                .collect();
            loops.push(self.d - list.len());
            adj.push(list);
        }
        let g = RegularGraph::new(self.d, adj, loops).expect("induced subgraph is regular");
        (g, members.to_vec())
    }

    /// Stable content hash (used as an embedding cache key).
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n() as u64).to_le_bytes());
        h.update((self.d as u64).to_le_bytes());
        for &l in &self.loops {
            h.update((l as u64).to_le_bytes());
        }
        for &(u, v) in &self.edges {
            h.update((u as u64).to_le_bytes());
            h.update((v as u64).to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Conductance as the exact ratio `cut / volume`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Conductance {
    pub cut: usize,
    pub volume: usize,
}

impl Conductance {
    pub fn value(&self) -> f64 {
        self.cut as f64 / self.volume as f64
    }
}

/// `|E(S, V∖S)| / min(vol S, vol V∖S)` with self-loops counted in volume.
pub fn conductance(graph: &RegularGraph, in_set: &[bool]) -> Result<Conductance> {
    let n = graph.n();
    if in_set.len() != n {
        return Err(Error::Domain(format!(
            "membership vector has length {}, graph has {n} vertices",
            in_set.len()
        )));
    }
    let size = in_set.iter().filter(|&&b| b).count();
    if size == 0 || size == n {
        return Err(Error::Domain("conductance needs a nonempty proper subset".into()));
    }
    let cut = graph
        .edges()
        .iter()
        .filter(|&&(u, v)| in_set[u] != in_set[v])
        .count();
    let volume = graph.d() * size.min(n - size);
    Ok(Conductance { cut, volume })
}

/// [`conductance`] for a vertex list.
pub fn conductance_of(graph: &RegularGraph, members: &[usize]) -> Result<Conductance> {
    let mut in_set = vec![false; graph.n()];
    for &u in members {
        in_set[u] = true;
    }
    conductance(graph, &in_set)
}
