//! Planted clusterable instances.
//!
//! Clusters are random near-regular graphs drawn by sequential stub
//! matching (no multi-edges, no self-pairs). Crossing edges come from a
//! random matching of crossing stubs between different clusters. Any stub
//! that cannot be matched becomes a self-loop, so every vertex keeps
//! degree `d`. Draws whose induced clusters have `λ₂` below
//! [`min_accepted_lambda2`] are rejected and redrawn.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::certify::{exhaustive_min_conductance, CertMethod, EXHAUSTIVE_LIMIT};
use super::{conductance_of, Labeling, RegularGraph};
use crate::error::{Error, Result};
use crate::rng;

const MAX_DRAWS: u64 = 25;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    Planted,
    UninformativeMiddle,
    /// Loaded from a file rather than generated.
    External,
}

impl std::fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GeneratorKind::Planted => "planted",
            GeneratorKind::UninformativeMiddle => "uninformative_middle",
            GeneratorKind::External => "external",
        })
    }
}

/// A graph with its ground-truth clustering and measured parameters.
#[derive(Clone, Debug)]
pub struct PlantedInstance {
    pub graph: RegularGraph,
    pub iota: Labeling,
    pub k: usize,
    /// Largest cluster conductance, computed exactly.
    pub eps_measured: f64,
    /// Lower bound on the smallest internal conductance.
    pub phi_certified: f64,
    pub certification: CertMethod,
    /// Largest ratio of cluster sizes.
    pub eta: f64,
    pub kind: GeneratorKind,
    /// Middle vertices of the uninformative construction (empty otherwise).
    pub middle: Vec<usize>,
}

impl PlantedInstance {
    /// Measures `ε`, `φ` and `η` for an arbitrary graph and clustering.
    pub fn measure(graph: RegularGraph, iota: Labeling, kind: GeneratorKind) -> Result<Self> {
        let clusters = iota.clusters();
        if clusters.iter().any(|c| c.is_empty()) {
            return Err(Error::Domain("every cluster must be nonempty".into()));
        }
        let lambda2: Vec<f64> = clusters
            .iter()
            .map(|c| super::lambda2_of_induced(&graph, c))
            .collect::<Result<_>>()?;
        Self::assemble(graph, iota, kind, Vec::new(), &lambda2)
    }

    fn assemble(
        graph: RegularGraph,
        iota: Labeling,
        kind: GeneratorKind,
        middle: Vec<usize>,
        lambda2: &[f64],
    ) -> Result<Self> {
        let clusters = iota.clusters();
        let k = iota.k();
        let mut eps_measured: f64 = 0.0;
        if k > 1 {
            for c in &clusters {
                eps_measured = eps_measured.max(conductance_of(&graph, c)?.value());
            }
        }
        let mut phi = f64::INFINITY;
        let mut certification = CertMethod::Exhaustive;
        for (c, &l2) in clusters.iter().zip(lambda2) {
            let bound = if c.len() <= EXHAUSTIVE_LIMIT {
                exhaustive_min_conductance(&graph.induced(c).0)
            } else {
                certification = CertMethod::Cheeger;
                l2 / 2.0
            };
            phi = phi.min(bound);
        }
        let sizes = iota.cluster_sizes();
        let eta = *sizes.iter().max().unwrap() as f64 / *sizes.iter().min().unwrap() as f64;
        Ok(Self {
            graph,
            iota,
            k,
            eps_measured,
            phi_certified: phi,
            certification,
            eta,
            kind,
            middle,
        })
    }
}

/// Rejection threshold on `λ₂` of every induced cluster.
///
/// 0.3 where random `d`-regular graphs reach it comfortably; for small `d`
/// the Ramanujan value `1 − 2√(d−1)/d` is itself below 0.3, so the
/// threshold drops to 75% of it.
pub fn min_accepted_lambda2(d: usize) -> f64 {
    let ramanujan = 1.0 - 2.0 * ((d as f64) - 1.0).sqrt() / d as f64;
    0.3f64.min(0.75 * ramanujan).max(0.0)
}

fn cluster_sizes(n: usize, k: usize, eta: f64) -> Vec<usize> {
    if eta <= 1.0 || k == 1 {
        let base = n / k;
        return (0..k).map(|i| base + usize::from(i < n % k)).collect();
    }
    let weights: Vec<f64> = (0..k)
        .map(|i| 1.0 + (eta - 1.0) * i as f64 / (k - 1) as f64)
        .collect();
    let total: f64 = weights.iter().sum();
    let mut sizes: Vec<usize> = weights
        .iter()
        .map(|w| ((n as f64) * w / total).floor() as usize)
        .collect();
    let mut rest = n - sizes.iter().sum::<usize>();
    let mut i = 0;
    while rest > 0 {
        sizes[i % k] += 1;
        rest -= 1;
        i += 1;
    }
    sizes
}

/// Adjacency under construction; neighbor lists stay short so a linear
/// scan is the fastest membership test.
struct Builder {
    adj: Vec<Vec<usize>>,
}

impl Builder {
    fn new(n: usize) -> Self {
        Self {
            adj: vec![Vec::new(); n],
        }
    }

    fn linked(&self, u: usize, v: usize) -> bool {
        self.adj[u].contains(&v)
    }

    fn link(&mut self, u: usize, v: usize) {
        self.adj[u].push(v);
        self.adj[v].push(u);
    }

    fn unlink(&mut self, u: usize, v: usize) {
        self.adj[u].retain(|&x| x != v);
        self.adj[v].retain(|&x| x != u);
    }

    /// Sequential random matching of `stubs` (vertex ids, with repetition)
    /// subject to `allowed(u, v)`. When a stub finds no partner, a double
    /// edge swap with an edge placed earlier in this call is tried before
    /// the stub is given up as a self-loop.
    fn match_stubs(
        &mut self,
        mut stubs: Vec<usize>,
        allowed: &dyn Fn(usize, usize) -> bool,
        rng: &mut rng::Rng,
    ) {
        stubs.shuffle(rng);
        let mut placed: Vec<(usize, usize)> = Vec::new();
        while let Some(a) = stubs.pop() {
            if stubs.is_empty() {
                break;
            }
            let mut partner = None;
            for _ in 0..64 {
                let j = rng.gen_range(0..stubs.len());
                let b = stubs[j];
                if b != a && allowed(a, b) && !self.linked(a, b) {
                    partner = Some(j);
                    break;
                }
            }
            if partner.is_none() {
                partner = stubs
                    .iter()
                    .position(|&b| b != a && allowed(a, b) && !self.linked(a, b));
            }
            if let Some(j) = partner {
                let b = stubs.swap_remove(j);
                self.link(a, b);
                placed.push((a, b));
                continue;
            }
            // Every remaining stub is blocked for `a`; try to pair it with
            // some other stub `b` through a swap (x, y) -> (a, x), (b, y).
            'outer: for j in 0..stubs.len().min(16) {
                let b = stubs[j];
                for _ in 0..64 {
                    if placed.is_empty() {
                        break 'outer;
                    }
                    let e = rng.gen_range(0..placed.len());
                    let (x, y) = placed[e];
                    let ok = |p: usize, q: usize, this: &Self| {
                        p != q && allowed(p, q) && !this.linked(p, q)
                    };
                    if ok(a, x, self) && ok(b, y, self) && x != y {
                        self.unlink(x, y);
                        self.link(a, x);
                        self.link(b, y);
                        placed[e] = (a, x);
                        placed.push((b, y));
                        stubs.swap_remove(j);
                        break 'outer;
                    }
                }
            }
        }
    }

    fn finish(self, d: usize) -> Result<RegularGraph> {
        let loops = self
            .adj
            .iter()
            .map(|l| d.checked_sub(l.len()))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::Invariant("generator exceeded the degree budget".into()))?;
        RegularGraph::new(d, self.adj, loops)
    }
}

/// Planted `(k, ε, φ)` instance: `k` random expanders joined by a random
/// matching of `⌊ε·d·|C_i|⌋` crossing stubs per cluster.
pub fn generate_planted(
    n: usize,
    k: usize,
    d: usize,
    target_eps: f64,
    eta: f64,
    seed: u64,
) -> Result<PlantedInstance> {
    if k < 2 {
        return Err(Error::Parameter(format!("k = {k}, need k >= 2")));
    }
    if d < 3 {
        return Err(Error::Parameter(format!("d = {d}, need d >= 3")));
    }
    if !(0.0..0.5).contains(&target_eps) {
        return Err(Error::Parameter(format!(
            "target_eps = {target_eps} outside [0, 1/2): crossing budget exceeds the edge budget"
        )));
    }
    if !(eta >= 1.0) {
        return Err(Error::Parameter(format!("eta = {eta}, need eta >= 1")));
    }
    let sizes = cluster_sizes(n, k, eta);
    if let Some(&s) = sizes.iter().find(|&&s| s < d + 1) {
        return Err(Error::Parameter(format!(
            "cluster of size {s} cannot host degree {d}"
        )));
    }
    let budgets: Vec<usize> = sizes
        .iter()
        .map(|&s| (target_eps * (d * s) as f64).floor() as usize)
        .collect();
    let total: usize = budgets.iter().sum();
    if let Some(&b) = budgets.iter().find(|&&b| 2 * b > total && b > 0) {
        return Err(Error::Parameter(format!(
            "crossing budget {b} of one cluster exceeds all others combined"
        )));
    }

    let mut starts = vec![0];
    for s in &sizes {
        starts.push(starts.last().unwrap() + s);
    }
    let cluster_of: Vec<usize> = (0..k).flat_map(|i| std::iter::repeat_n(i, sizes[i])).collect();
    let iota = Labeling::new(cluster_of.clone(), k)?;
    let threshold = min_accepted_lambda2(d);

    for draw in 0..MAX_DRAWS {
        let draw_seed = rng::substream(seed, draw);
        let mut grng = rng::rng(rng::substream(draw_seed, rng::streams::GENERATION));
        let mut mrng = rng::rng(rng::substream(draw_seed, rng::streams::MATCHING));

        // Spread each cluster's crossing stubs as evenly as possible.
        let mut cross = vec![0usize; n];
        for i in 0..k {
            let members: Vec<usize> = (starts[i]..starts[i + 1]).collect();
            let base = budgets[i] / sizes[i];
            let extra = budgets[i] % sizes[i];
            for &u in &members {
                cross[u] = base;
            }
            for &u in members.choose_multiple(&mut grng, extra) {
                cross[u] += 1;
            }
        }

        let mut b = Builder::new(n);
        for i in 0..k {
            let stubs: Vec<usize> = (starts[i]..starts[i + 1])
                .flat_map(|u| std::iter::repeat_n(u, d - cross[u]))
                .collect();
            b.match_stubs(stubs, &|_, _| true, &mut grng);
        }
        let stubs: Vec<usize> = (0..n)
            .flat_map(|u| std::iter::repeat_n(u, cross[u]))
            .collect();
        let co = cluster_of.clone();
        b.match_stubs(stubs, &move |u, v| co[u] != co[v], &mut mrng);
        let graph = b.finish(d)?;

        let clusters = iota.clusters();
        let mut lambda2 = Vec::with_capacity(k);
        let mut accepted = true;
        for c in &clusters {
            let l2 = super::lambda2_of_induced(&graph, c)?;
            if l2 < threshold && c.len() > EXHAUSTIVE_LIMIT {
                accepted = false;
                break;
            }
            lambda2.push(l2);
        }
        if accepted {
            return PlantedInstance::assemble(
                graph,
                iota,
                GeneratorKind::Planted,
                Vec::new(),
                &lambda2,
            );
        }
    }
    Err(Error::Parameter(format!(
        "no draw met the expansion threshold {threshold:.3} after {MAX_DRAWS} attempts"
    )))
}

/// Two expanders `A`, `B` plus `⌊ε·n⌋` middle vertices, each joined to
/// `d/2` vertices of `A` and `d/2` of `B`. Ground truth puts the middle in
/// cluster 0 together with `A`.
///
/// Vertex order: `A`, then the middle, then `B`.
pub fn generate_uninformative_middle(n: usize, d: usize, eps: f64, seed: u64) -> Result<PlantedInstance> {
    if d < 4 || d % 2 == 1 {
        return Err(Error::Parameter(format!("d = {d}, need an even degree >= 4")));
    }
    if !(0.0..0.5).contains(&eps) {
        return Err(Error::Parameter(format!("eps = {eps} outside [0, 1/2)")));
    }
    let m = (eps * n as f64).floor() as usize;
    let rest = n.saturating_sub(m);
    let a_size = rest.div_ceil(2);
    let b_size = rest / 2;
    if b_size < d + 1 {
        return Err(Error::Parameter(format!(
            "sides of size {b_size} cannot host degree {d}"
        )));
    }
    let half = d / 2;
    // Middle stubs per side vertex, spread evenly.
    let load_cap_a = (m * half).div_ceil(a_size);
    let load_cap_b = (m * half).div_ceil(b_size);
    if load_cap_a.max(load_cap_b) > half {
        return Err(Error::Parameter(format!(
            "{m} middle vertices overload sides of size {a_size}/{b_size}"
        )));
    }
    let a: Vec<usize> = (0..a_size).collect();
    let middle: Vec<usize> = (a_size..a_size + m).collect();
    let b: Vec<usize> = (a_size + m..n).collect();
    let mut labels = vec![0usize; n];
    for &u in &b {
        labels[u] = 1;
    }
    let iota = Labeling::new(labels, 2)?;
    let threshold = min_accepted_lambda2(d);

    for draw in 0..MAX_DRAWS {
        let draw_seed = rng::substream(seed, draw);
        let mut grng = rng::rng(rng::substream(draw_seed, rng::streams::GENERATION));
        let mut mrng = rng::rng(rng::substream(draw_seed, rng::streams::MATCHING));
        let mut bld = Builder::new(n);

        let mut load = vec![0usize; n];
        for &x in &middle {
            for side in [&a, &b] {
                // Least-loaded vertices first, random among ties.
                let mut cands: Vec<usize> = side.clone();
                cands.shuffle(&mut mrng);
                cands.sort_by_key(|&v| load[v]);
                for &v in cands.iter().take(half) {
                    bld.link(x, v);
                    load[v] += 1;
                }
            }
        }
        for side in [&a, &b] {
            let stubs: Vec<usize> = side
                .iter()
                .flat_map(|&u| std::iter::repeat_n(u, d - load[u]))
                .collect();
            bld.match_stubs(stubs, &|_, _| true, &mut grng);
        }
        let graph = bld.finish(d)?;
        let la = super::lambda2_of_induced(&graph, &a)?;
        let lb = super::lambda2_of_induced(&graph, &b)?;
        if la < threshold || lb < threshold {
            continue;
        }
        let clusters = iota.clusters();
        let lambda2 = clusters
            .iter()
            .map(|c| super::lambda2_of_induced(&graph, c))
            .collect::<Result<Vec<_>>>()?;
        return PlantedInstance::assemble(
            graph,
            iota,
            GeneratorKind::UninformativeMiddle,
            middle,
            &lambda2,
        );
    }
    Err(Error::Parameter(format!(
        "no draw met the expansion threshold {threshold:.3} after {MAX_DRAWS} attempts"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn degree_identity_holds(g: &RegularGraph) -> bool {
        let total: usize = (0..g.n())
            .map(|u| g.neighbors(u).len() + g.self_loops(u))
            .sum();
        total == g.n() * g.d()
    }

    #[test]
    fn zero_budget_gives_disjoint_k4s() {
        let inst = generate_planted(8, 2, 3, 0.0, 1.0, 1).unwrap();
        assert_eq!(inst.eps_measured, 0.0);
        for c in inst.iota.clusters() {
            assert_eq!(c.len(), 4);
            for &u in &c {
                assert_eq!(inst.graph.neighbors(u).len(), 3);
                assert!(inst.graph.neighbors(u).iter().all(|v| c.contains(v)));
            }
        }
        assert_eq!(inst.certification, CertMethod::Exhaustive);
        assert!((inst.phi_certified - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_budget_is_parameter_error() {
        assert!(matches!(
            generate_planted(10, 2, 3, 0.9, 1.0, 0),
            Err(Error::Parameter(_))
        ));
        assert!(generate_planted(10, 1, 3, 0.1, 1.0, 0).is_err());
        assert!(generate_planted(10, 2, 2, 0.1, 1.0, 0).is_err());
    }

    #[test]
    fn mid_size_instance_is_certified() {
        let inst = generate_planted(1000, 2, 12, 0.02, 1.0, 7).unwrap();
        assert!(degree_identity_holds(&inst.graph));
        assert!(
            (0.01..=0.03).contains(&inst.eps_measured),
            "eps = {}",
            inst.eps_measured
        );
        assert!(inst.phi_certified >= 0.2, "phi = {}", inst.phi_certified);
        assert_eq!(inst.certification, CertMethod::Cheeger);
    }

    #[test]
    fn deterministic_given_seed() {
        let a = generate_planted(200, 3, 8, 0.05, 1.0, 42).unwrap();
        let b = generate_planted(200, 3, 8, 0.05, 1.0, 42).unwrap();
        assert_eq!(a.graph, b.graph);
        assert_eq!(a.eps_measured, b.eps_measured);
    }

    #[test]
    fn unbalanced_sizes_respect_eta() {
        let inst = generate_planted(300, 3, 8, 0.02, 2.0, 3).unwrap();
        assert!(inst.eta <= 2.0 + 1e-9 && inst.eta > 1.5, "eta = {}", inst.eta);
        assert!(degree_identity_holds(&inst.graph));
    }

    #[test]
    fn middle_vertices_split_evenly() {
        let inst = generate_uninformative_middle(100, 4, 0.1, 5).unwrap();
        assert_eq!(inst.middle.len(), 10);
        let a_end = inst.middle[0];
        let b_start = inst.middle[9] + 1;
        for &x in &inst.middle {
            let nb = inst.graph.neighbors(x);
            assert_eq!(nb.iter().filter(|&&v| v < a_end).count(), 2);
            assert_eq!(nb.iter().filter(|&&v| v >= b_start).count(), 2);
            assert_eq!(inst.iota.get(x), 0);
        }
    }

    #[test]
    fn middle_free_variant_is_disconnected() {
        let inst = generate_uninformative_middle(100, 4, 0.0, 5).unwrap();
        assert!(inst.middle.is_empty());
        assert_eq!(inst.eps_measured, 0.0);
    }

    #[test]
    fn middle_conductance_near_target() {
        let inst = generate_uninformative_middle(2000, 8, 0.05, 3).unwrap();
        assert!(
            inst.eps_measured >= 0.025 && inst.eps_measured <= 0.1,
            "eps = {}",
            inst.eps_measured
        );
    }
}
