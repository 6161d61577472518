//! Spectral labels, cross graphs and the label-aware classifiers.

use std::collections::VecDeque;
use std::fmt;

use pathfinding::matrix::Matrix;
use pathfinding::prelude::kuhn_munkres;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Labeling, RegularGraph};
use crate::oracle::{apx_distance_sq, ball_radius_factor, ApproxMeans, InnerProductOracle};
use crate::rng;

/// Largest view component [`ClassifyContext::exact_crossing_probability`]
/// will handle.
pub const EXACT_COMPONENT_LIMIT: usize = 5000;

/// `τ(u)`: the label whose representative ball contains `f_u`, or `None`
/// for a cross vertex.
///
/// Balls are tested in label order and the first hit wins; a second hit
/// means the balls overlap and is reported as an invariant violation.
pub fn spectral_label(
    oracle: &dyn InnerProductOracle,
    means: &ApproxMeans,
    phi: f64,
    eta: f64,
    u: usize,
) -> Result<Option<usize>> {
    let radius = ball_radius_factor(phi, eta);
    let mut hit = None;
    for j in 0..means.k() {
        let c = means.center(j);
        if apx_distance_sq(oracle, u, c) < radius * oracle.apx(c, c) {
            if let Some(first) = hit {
                return Err(Error::Invariant(format!(
                    "vertex {u} lies in the balls of labels {first} and {j}"
                )));
            }
            hit = Some(j);
        }
    }
    Ok(hit)
}

/// `τ` for every vertex.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpectralLabeling {
    tau: Vec<Option<usize>>,
    k: usize,
}

impl SpectralLabeling {
    pub fn new(tau: Vec<Option<usize>>, k: usize) -> Result<Self> {
        if tau.iter().flatten().any(|&t| t >= k) {
            return Err(Error::Parameter(format!("spectral label outside 0..{k}")));
        }
        Ok(Self { tau, k })
    }

    pub fn compute(oracle: &dyn InnerProductOracle, means: &ApproxMeans, phi: f64, eta: f64) -> Result<Self> {
        let tau = (0..oracle.n())
            .into_par_iter()
            .map(|u| spectral_label(oracle, means, phi, eta, u))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { tau, k: means.k() })
    }

    pub fn get(&self, u: usize) -> Option<usize> {
        self.tau[u]
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    pub fn is_cross(&self, u: usize) -> bool {
        self.tau[u].is_none()
    }

    pub fn cross_count(&self) -> usize {
        self.tau.iter().filter(|t| t.is_none()).count()
    }

    pub fn as_slice(&self) -> &[Option<usize>] {
        &self.tau
    }
}

/// The `(i, j)` cross graph: vertices with `τ = i` and `σ = j`, plus every
/// cross vertex. Edges leaving the vertex set count as self-loops.
#[derive(Clone, Copy)]
pub struct CrossGraphView<'a> {
    graph: &'a RegularGraph,
    tau: &'a SpectralLabeling,
    sigma: &'a Labeling,
    i: usize,
    j: usize,
}

impl<'a> CrossGraphView<'a> {
    pub fn new(graph: &'a RegularGraph, tau: &'a SpectralLabeling, sigma: &'a Labeling, i: usize, j: usize) -> Result<Self> {
        if i == j || i >= tau.k() || j >= sigma.k() {
            return Err(Error::Parameter(format!("invalid cross graph pair ({i}, {j})")));
        }
        Ok(Self {
            graph,
            tau,
            sigma,
            i,
            j,
        })
    }

    pub fn pair(&self) -> (usize, usize) {
        (self.i, self.j)
    }

    pub fn contains(&self, v: usize) -> bool {
        match self.tau.get(v) {
            None => true,
            Some(t) => t == self.i && self.sigma.get(v) == self.j,
        }
    }

    pub fn neighbors(&self, u: usize) -> impl Iterator<Item = usize> + '_ {
        self.graph.neighbors(u).iter().copied().filter(move |&v| self.contains(v))
    }

    pub fn self_loops(&self, u: usize) -> usize {
        self.graph.d() - self.neighbors(u).count()
    }

    /// Vertices reachable from `u` inside the view, in BFS order.
    pub fn component(&self, u: usize) -> Vec<usize> {
        let mut seen = vec![false; self.graph.n()];
        let mut order = vec![u];
        seen[u] = true;
        let mut head = 0;
        while head < order.len() {
            let x = order[head];
            head += 1;
            for y in self.neighbors(x) {
                if !seen[y] {
                    seen[y] = true;
                    order.push(y);
                }
            }
        }
        order
    }
}

/// Which return branch of a classifier produced the label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Agree,
    Ambiguous,
    ImpostorTrustLabel,
    TrustSpectral,
}

impl Provenance {
    pub const ALL: [Provenance; 4] = [
        Provenance::Agree,
        Provenance::Ambiguous,
        Provenance::ImpostorTrustLabel,
        Provenance::TrustSpectral,
    ];
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Agree => "agree",
            Provenance::Ambiguous => "ambiguous",
            Provenance::ImpostorTrustLabel => "impostor_trust_label",
            Provenance::TrustSpectral => "trust_spectral",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Decision {
    pub label: usize,
    pub provenance: Provenance,
    /// Crossing-walk count when the walk test ran.
    pub crossing_walks: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassifierOutput {
    pub labels: Labeling,
    pub provenance: Vec<Provenance>,
    pub crossing_walks: Vec<Option<usize>>,
}

impl ClassifierOutput {
    fn from_decisions(decisions: Vec<Decision>, k: usize) -> Result<Self> {
        let labels = Labeling::new(decisions.iter().map(|d| d.label).collect(), k)?;
        Ok(Self {
            labels,
            provenance: decisions.iter().map(|d| d.provenance).collect(),
            crossing_walks: decisions.iter().map(|d| d.crossing_walks).collect(),
        })
    }

    /// Count per entry of [`Provenance::ALL`].
    pub fn histogram(&self) -> [usize; 4] {
        let mut h = [0; 4];
        for p in &self.provenance {
            h[Provenance::ALL.iter().position(|q| q == p).unwrap()] += 1;
        }
        h
    }
}

/// Outcome of testing one walk vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CrossingStep {
    InX,
    InNXStar,
    Neither,
}

/// `⌈150/φ² · ln(1/δ)⌉`, at least 1.
pub fn walk_length(phi: f64, delta: f64) -> usize {
    ((150.0 / (phi * phi) * (1.0 / delta).ln()).ceil() as usize).max(1)
}

/// `⌈450 · ln n⌉`.
pub fn walk_count(n: usize) -> usize {
    (450.0 * (n.max(2) as f64).ln()).ceil() as usize
}

/// Everything the classifiers need about one `(G, σ, τ, φ)` input, with
/// per-vertex counts of neighbors in each spectral cluster precomputed.
pub struct ClassifyContext<'a> {
    graph: &'a RegularGraph,
    sigma: &'a Labeling,
    tau: &'a SpectralLabeling,
    phi: f64,
    spec_neighbors: Vec<u32>,
}

impl<'a> ClassifyContext<'a> {
    pub fn new(graph: &'a RegularGraph, sigma: &'a Labeling, tau: &'a SpectralLabeling, phi: f64) -> Result<Self> {
        let n = graph.n();
        if sigma.len() != n || tau.len() != n {
            return Err(Error::Parameter("labelings do not match the graph".into()));
        }
        if sigma.k() != tau.k() {
            return Err(Error::Parameter("σ and τ use different k".into()));
        }
        let k = tau.k();
        let mut spec_neighbors = vec![0u32; n * k];
        for w in 0..n {
            for &v in graph.neighbors(w) {
                if let Some(l) = tau.get(v) {
                    spec_neighbors[w * k + l] += 1;
                }
            }
        }
        Ok(Self {
            graph,
            sigma,
            tau,
            phi,
            spec_neighbors,
        })
    }

    pub fn graph(&self) -> &RegularGraph {
        self.graph
    }

    pub fn tau(&self) -> &SpectralLabeling {
        self.tau
    }

    pub fn sigma(&self) -> &Labeling {
        self.sigma
    }

    /// The cross graph `G_{τ(u), σ(u)}`, if `τ(u) ∉ {★, σ(u)}`.
    pub fn view_of(&self, u: usize) -> Option<CrossGraphView<'a>> {
        let i = self.tau.get(u)?;
        let j = self.sigma.get(u);
        (i != j).then_some(CrossGraphView {
            graph: self.graph,
            tau: self.tau,
            sigma: self.sigma,
            i,
            j,
        })
    }

    /// Classifies `w` for a walk in a view with spectral side `i`: cross
    /// vertex, or in the regularized neighborhood (at least `(φ/2)d`
    /// neighbors in spectral clusters other than `i`), or neither.
    pub fn crossing_step(&self, w: usize, i: usize) -> CrossingStep {
        if self.tau.get(w) != Some(i) {
            return CrossingStep::InX;
        }
        let k = self.tau.k();
        let q: u32 = (0..k).filter(|&l| l != i).map(|l| self.spec_neighbors[w * k + l]).sum();
        if q as f64 >= self.phi / 2.0 * self.graph.d() as f64 {
            CrossingStep::InNXStar
        } else {
            CrossingStep::Neither
        }
    }

    fn absorbing(&self, w: usize, i: usize) -> bool {
        self.crossing_step(w, i) != CrossingStep::Neither
    }

    fn first_branches(&self, u: usize) -> std::result::Result<Decision, CrossGraphView<'a>> {
        let s = self.sigma.get(u);
        match self.tau.get(u) {
            Some(t) if t == s => Ok(Decision {
                label: s,
                provenance: Provenance::Agree,
                crossing_walks: None,
            }),
            None => Ok(Decision {
                label: s,
                provenance: Provenance::Ambiguous,
                crossing_walks: None,
            }),
            Some(_) => Err(self.view_of(u).expect("τ(u) differs from σ(u)")),
        }
    }

    /// Whether a cross vertex is reachable from `u` inside `view`; the
    /// search stops at the first one found.
    pub fn reaches_cross(&self, view: &CrossGraphView<'_>, u: usize) -> bool {
        let mut seen = vec![false; self.graph.n()];
        let mut queue = VecDeque::from([u]);
        seen[u] = true;
        while let Some(x) = queue.pop_front() {
            if self.tau.is_cross(x) {
                return true;
            }
            for y in view.neighbors(x) {
                if !seen[y] {
                    seen[y] = true;
                    queue.push_back(y);
                }
            }
        }
        false
    }

    /// Polynomial-time classifier for one vertex.
    pub fn classify_polytime(&self, u: usize) -> Decision {
        match self.first_branches(u) {
            Ok(d) => d,
            Err(view) => {
                if self.reaches_cross(&view, u) {
                    Decision {
                        label: self.sigma.get(u),
                        provenance: Provenance::ImpostorTrustLabel,
                        crossing_walks: None,
                    }
                } else {
                    Decision {
                        label: view.i,
                        provenance: Provenance::TrustSpectral,
                        crossing_walks: None,
                    }
                }
            }
        }
    }

    /// [`classify_polytime`](Self::classify_polytime) for every vertex,
    /// sharing one component pass per cross graph.
    pub fn classify_polytime_all(&self) -> Result<ClassifierOutput> {
        let n = self.graph.n();
        let k = self.tau.k();
        let mut reach: Vec<Option<bool>> = vec![None; n];
        for i in 0..k {
            for j in 0..k {
                if i == j {
                    continue;
                }
                let view = CrossGraphView::new(self.graph, self.tau, self.sigma, i, j)?;
                let mut comp = vec![usize::MAX; n];
                for u in 0..n {
                    if self.tau.get(u) != Some(i) || self.sigma.get(u) != j || comp[u] != usize::MAX {
                        continue;
                    }
                    let members = view.component(u);
                    let hit = members.iter().any(|&x| self.tau.is_cross(x));
                    for &x in &members {
                        comp[x] = u;
                        if self.tau.get(x) == Some(i) {
                            reach[x] = Some(hit);
                        }
                    }
                }
            }
        }
        let decisions = (0..n)
            .map(|u| match self.first_branches(u) {
                Ok(d) => d,
                Err(view) => {
                    if reach[u].expect("component pass covers every disagreeing vertex") {
                        Decision {
                            label: self.sigma.get(u),
                            provenance: Provenance::ImpostorTrustLabel,
                            crossing_walks: None,
                        }
                    } else {
                        Decision {
                            label: view.i,
                            provenance: Provenance::TrustSpectral,
                            crossing_walks: None,
                        }
                    }
                }
            })
            .collect();
        ClassifierOutput::from_decisions(decisions, k)
    }

    /// One lazy walk of `len` steps from `u` in `view`; true if it visits
    /// an absorbing vertex (the start included).
    fn crossing_walk(&self, view: &CrossGraphView<'_>, u: usize, len: usize, r: &mut rng::Rng) -> bool {
        let d = self.graph.d();
        let mut x = u;
        if self.absorbing(x, view.i) {
            return true;
        }
        for _ in 0..len {
            let slot = r.gen_range(0..2 * d);
            let nbrs = self.graph.neighbors(x);
            if slot < nbrs.len() && view.contains(nbrs[slot]) {
                x = nbrs[slot];
                if self.absorbing(x, view.i) {
                    return true;
                }
            }
        }
        false
    }

    /// Counts crossing walks among `⌈450 ln n⌉` lazy walks of length `len`
    /// from `u` in its cross graph; answers yes when at least half cross.
    ///
    /// When no absorbing vertex is reachable at all, every walk is
    /// non-crossing and sampling is skipped.
    pub fn robust_conn(&self, u: usize, len: usize, seed: u64) -> Result<(bool, usize)> {
        let view = self
            .view_of(u)
            .ok_or_else(|| Error::Domain(format!("vertex {u} has τ = ★ or τ = σ")))?;
        let walks = walk_count(self.graph.n());
        let threshold = 0.5 * walks as f64;
        if !view.component(u).iter().any(|&x| self.absorbing(x, view.i)) {
            return Ok((false, 0));
        }
        let base = rng::substream(rng::substream(seed, rng::streams::WALKS), u as u64);
        let r = (0..walks)
            .into_par_iter()
            .filter(|&w| {
                let mut g = rng::rng(rng::substream(base, w as u64));
                self.crossing_walk(&view, u, len, &mut g)
            })
            .count();
        Ok((r as f64 >= threshold, r))
    }

    /// Walk-based classifier for one vertex.
    pub fn classify_walk(&self, u: usize, len: usize, seed: u64) -> Result<Decision> {
        match self.first_branches(u) {
            Ok(d) => Ok(d),
            Err(view) => {
                let (yes, r) = self.robust_conn(u, len, seed)?;
                Ok(if yes {
                    Decision {
                        label: self.sigma.get(u),
                        provenance: Provenance::ImpostorTrustLabel,
                        crossing_walks: Some(r),
                    }
                } else {
                    Decision {
                        label: view.i,
                        provenance: Provenance::TrustSpectral,
                        crossing_walks: Some(r),
                    }
                })
            }
        }
    }

    pub fn classify_walk_all(&self, len: usize, seed: u64) -> Result<ClassifierOutput> {
        let decisions = (0..self.graph.n())
            .into_par_iter()
            .map(|u| self.classify_walk(u, len, seed))
            .collect::<Result<Vec<_>>>()?;
        ClassifierOutput::from_decisions(decisions, self.tau.k())
    }

    /// Exact probability that a lazy walk of `len` steps from `u` in
    /// `view` visits an absorbing vertex, by propagating the surviving
    /// probability mass step by step.
    pub fn exact_crossing_probability(&self, view: &CrossGraphView<'_>, u: usize, len: usize) -> Result<f64> {
        if !view.contains(u) {
            return Err(Error::Domain(format!("vertex {u} is not in the view")));
        }
        if self.absorbing(u, view.i) {
            return Ok(1.0);
        }
        let comp = view.component(u);
        if comp.len() > EXACT_COMPONENT_LIMIT {
            return Err(Error::Size(format!(
                "view component has {} vertices, limit {EXACT_COMPONENT_LIMIT}",
                comp.len()
            )));
        }
        let mut local = vec![usize::MAX; self.graph.n()];
        for (a, &x) in comp.iter().enumerate() {
            local[x] = a;
        }
        let m = comp.len();
        let step = 1.0 / (2 * self.graph.d()) as f64;
        let absorbing: Vec<bool> = comp.iter().map(|&x| self.absorbing(x, view.i)).collect();
        let moves: Vec<Vec<usize>> = comp.iter().map(|&x| view.neighbors(x).map(|y| local[y]).collect()).collect();
        let mut p = vec![0.0; m];
        let mut next = vec![0.0; m];
        p[0] = 1.0;
        let mut absorbed = 0.0;
        for _ in 0..len {
            next.iter_mut().for_each(|x| *x = 0.0);
            for a in 0..m {
                let mass = p[a];
                if mass == 0.0 {
                    continue;
                }
                next[a] += mass * (1.0 - step * moves[a].len() as f64);
                for &b in &moves[a] {
                    if absorbing[b] {
                        absorbed += mass * step;
                    } else {
                        next[b] += mass * step;
                    }
                }
            }
            std::mem::swap(&mut p, &mut next);
        }
        Ok(absorbed.min(1.0))
    }
}

/// Majority of neighbor labels; ties go to `σ(u)` when it is among the
/// leaders, else to the smallest id. Self-loops do not vote.
pub fn baseline_majority(graph: &RegularGraph, sigma: &Labeling, u: usize) -> usize {
    let mut votes = vec![0usize; sigma.k()];
    for &v in graph.neighbors(u) {
        votes[sigma.get(v)] += 1;
    }
    let best = *votes.iter().max().unwrap_or(&0);
    if votes[sigma.get(u)] == best {
        sigma.get(u)
    } else {
        votes.iter().position(|&c| c == best).unwrap()
    }
}

/// Two-cluster vote with the threshold moved to `(2/3)φd`.
pub fn baseline_majority_pp(graph: &RegularGraph, sigma: &Labeling, phi: f64, u: usize) -> Result<usize> {
    if sigma.k() != 2 {
        return Err(Error::Domain(format!("majority++ needs k = 2, got {}", sigma.k())));
    }
    let threshold = 2.0 / 3.0 * phi * graph.d() as f64;
    let first = graph.neighbors(u).iter().filter(|&&v| sigma.get(v) == 0).count();
    let second = graph.neighbors(u).len() - first;
    Ok(if first as f64 <= threshold {
        1
    } else if second as f64 <= threshold {
        0
    } else {
        sigma.get(u)
    })
}

/// `τ(u)` when defined, else `σ(u)`.
pub fn baseline_naive_spectral(tau: &SpectralLabeling, sigma: &Labeling, u: usize) -> usize {
    tau.get(u).unwrap_or_else(|| sigma.get(u))
}

/// Fraction of vertices whose label differs from `iota`.
pub fn misclassification(output: &Labeling, iota: &Labeling) -> f64 {
    if iota.is_empty() {
        return 0.0;
    }
    output.disagreements(iota) as f64 / iota.len() as f64
}

/// Relabeling of `output` ids that agrees best with `iota` (optimal
/// assignment on the confusion matrix). Entry `a` is the id `a` maps to.
pub fn best_matching(output: &Labeling, iota: &Labeling) -> Vec<usize> {
    let k = output.k().max(iota.k());
    let mut confusion = vec![0i64; k * k];
    for (&a, &b) in output.as_slice().iter().zip(iota.as_slice()) {
        confusion[a * k + b] += 1;
    }
    let weights = Matrix::from_vec(k, k, confusion).expect("square confusion matrix");
    kuhn_munkres(&weights).1
}

/// [`misclassification`] after relabeling `output` by [`best_matching`].
pub fn matched_misclassification(output: &Labeling, iota: &Labeling) -> f64 {
    if iota.is_empty() {
        return 0.0;
    }
    let map = best_matching(output, iota);
    let wrong = output
        .as_slice()
        .iter()
        .zip(iota.as_slice())
        .filter(|(&a, &b)| map[a] != b)
        .count();
    wrong as f64 / iota.len() as f64
}
