//! Edge reweighting under a spectral constraint and partition repair.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{EdgeWeighting, Labeling, RegularGraph};
use crate::linalg::{self, EigenPairs, LanczosOptions, SymmetricOperator};
use crate::spectral::LaplacianOperator;

/// Edges whose endpoints carry different labels under `alpha`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlaggedEdgeSet {
    flagged: Vec<bool>,
}

impl FlaggedEdgeSet {
    pub fn is_flagged(&self, e: usize) -> bool {
        self.flagged[e]
    }

    /// Ids of flagged edges, ascending.
    pub fn flagged(&self) -> Vec<usize> {
        (0..self.flagged.len()).filter(|&e| self.flagged[e]).collect()
    }

    /// Ids of unflagged edges, ascending.
    pub fn unflagged(&self) -> Vec<usize> {
        (0..self.flagged.len()).filter(|&e| !self.flagged[e]).collect()
    }

    pub fn len(&self) -> usize {
        self.flagged.iter().filter(|&&f| f).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn flag_edges(graph: &RegularGraph, alpha: &Labeling) -> FlaggedEdgeSet {
    FlaggedEdgeSet {
        flagged: graph
            .edges()
            .iter()
            .map(|&(u, v)| alpha.get(u) != alpha.get(v))
            .collect(),
    }
}

/// Edges whose endpoints lie in different clusters of `iota`.
pub fn cross_edges(graph: &RegularGraph, iota: &Labeling) -> Vec<usize> {
    flag_edges(graph, iota).flagged()
}

#[derive(Clone, Debug)]
pub struct SdpOptions {
    /// Threshold `θ` on the spectrum orthogonal to the projected basis.
    pub theta: f64,
    /// Feasibility tolerance and relative stall tolerance of the objective.
    pub tol: f64,
    pub max_iter: usize,
    /// Initial penalty weight, doubled after `rho_patience` consecutive
    /// infeasible iterates.
    pub rho: f64,
    pub rho_patience: usize,
    /// Step size at iteration `t` is `step / √t`.
    pub step: f64,
    /// Number of smallest complement eigenpairs entering the penalty.
    pub eig_count: usize,
    /// Stop once the best objective has not improved by a relative `tol`
    /// over this many iterations.
    pub stall_window: usize,
}

impl SdpOptions {
    pub fn new(theta: f64) -> Self {
        Self {
            theta,
            tol: 1e-6,
            max_iter: 5000,
            rho: 10.0,
            rho_patience: 25,
            step: 0.2,
            eig_count: 12,
            stall_window: 300,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub x: EdgeWeighting,
    /// `Σ_{e∈F} x_e`.
    pub objective: f64,
    /// Smallest eigenvalue of `𝓛_x` on the orthogonal complement of the
    /// projected basis, from a final accurate solve.
    pub complement_min: f64,
    /// `λ_min(P(𝓛_x − θI)P) = min(0, complement_min − θ)`.
    pub certified_min_eig: f64,
    pub theta: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Best feasible objective after each iteration (non-increasing).
    pub history: Vec<f64>,
}

/// Smallest eigenpairs of `𝓛_x` restricted to the orthogonal complement
/// of the orthonormal columns of `basis`.
pub fn complement_spectrum(
    graph: &RegularGraph,
    x: &EdgeWeighting,
    basis: &DMatrix<f64>,
    count: usize,
    accurate: bool,
    warm: Option<&[f64]>,
) -> Result<EigenPairs> {
    let op = LaplacianOperator::weighted(graph, x);
    let n = graph.n();
    let count = count.min(n - basis.ncols());
    if accurate && n <= linalg::DENSE_LIMIT {
        // Push the basis directions above the spectrum so the bottom of the
        // shifted matrix is the complement's bottom.
        let dense = op.to_dense();
        let proj = DMatrix::identity(n, n) - basis * basis.transpose();
        let shifted = &proj * dense * &proj + basis * basis.transpose() * 3.0;
        return Ok(linalg::dense_smallest(shifted, count));
    }
    let opts = LanczosOptions {
        tol: if accurate { 1e-10 } else { 1e-7 },
        verify: accurate,
        ..LanczosOptions::default()
    };
    linalg::lanczos_smallest(&op, count, Some(basis), &opts, warm)
}

/// [`sdp_reweight_with_basis`] against the bottom-`k` eigenvectors of the
/// unweighted normalized Laplacian.
pub fn sdp_reweight(
    graph: &RegularGraph,
    flagged: &FlaggedEdgeSet,
    k: usize,
    opts: &SdpOptions,
) -> Result<SdpSolution> {
    let emb = crate::spectral::embed(graph, k)?;
    sdp_reweight_with_basis(graph, flagged, emb.basis(), opts)
}

/// Minimizes `Σ_{e∈F} x_e` over `x ∈ [0,1]^E` with `x_e = 1` off `F`,
/// subject to `𝓛_x ⪰ θ` on the orthogonal complement of `basis`.
///
/// Projected subgradient on `Σ_F x_e + ρ Σ_i max(0, θ − λ_i)` over the
/// `eig_count` smallest complement eigenvalues `λ_i`. Every iterate is
/// also pulled back toward `x ≡ 1` along the segment that restores
/// feasibility (the complement minimum is concave in `x`), and the best
/// restored point is kept.
pub fn sdp_reweight_with_basis(
    graph: &RegularGraph,
    flagged: &FlaggedEdgeSet,
    basis: &DMatrix<f64>,
    opts: &SdpOptions,
) -> Result<SdpSolution> {
    let m = graph.edge_count();
    let f_ids = flagged.flagged();
    let ones = EdgeWeighting::ones(graph);
    let top = complement_spectrum(graph, &ones, basis, 1, true, None)?;
    let mu_one = top.values[0];
    let theta = opts.theta;
    if mu_one < theta - opts.tol {
        return Err(Error::Domain(format!(
            "unweighted graph violates the constraint: complement minimum {mu_one} < θ = {theta}"
        )));
    }
    let d = graph.d() as f64;
    let mut x = vec![1.0; m];
    let mut best_x = x.clone();
    let mut best_obj = f_ids.len() as f64;
    let mut history = Vec::new();
    let mut rho = opts.rho;
    let mut infeasible_run = 0;
    let mut warm: Option<Vec<f64>> = None;
    let mut iterations = 0;
    let mut converged = f_ids.is_empty();
    let margin = 1e-7;

    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let w = EdgeWeighting::new(graph, x.clone())?;
        let pairs = complement_spectrum(graph, &w, basis, opts.eig_count, false, warm.as_deref())?;
        warm = Some(pairs.vectors.column(0).iter().copied().collect());
        let mu = pairs.values[0];
        let obj: f64 = f_ids.iter().map(|&e| x[e]).sum();

        // Restored candidate on the segment toward x ≡ 1.
        let target = theta + margin;
        let (cand_obj, t) = if mu >= target {
            (obj, 0.0)
        } else {
            let t = ((target - mu) / (mu_one - mu)).clamp(0.0, 1.0);
            ((1.0 - t) * obj + t * f_ids.len() as f64, t)
        };
        if cand_obj < best_obj {
            best_obj = cand_obj;
            for &e in &f_ids {
                best_x[e] = (1.0 - t) * x[e] + t;
            }
        }
        history.push(best_obj);

        if mu < theta {
            infeasible_run += 1;
            if infeasible_run >= opts.rho_patience {
                rho *= 2.0;
                infeasible_run = 0;
            }
        } else {
            infeasible_run = 0;
        }

        let step = opts.step / (iterations as f64).sqrt();
        let (u_cols, vals) = (&pairs.vectors, &pairs.values);
        for &e in &f_ids {
            let (a, b) = graph.edges()[e];
            let mut g = 1.0;
            for (c, &lambda) in vals.iter().enumerate() {
                if lambda < theta {
                    let diff = u_cols[(a, c)] - u_cols[(b, c)];
                    g -= rho * diff * diff / d;
                }
            }
            x[e] = (x[e] - step * g).clamp(0.0, 1.0);
        }

        if iterations > opts.stall_window {
            let past = history[iterations - 1 - opts.stall_window];
            if past - best_obj <= opts.tol * past.max(1.0) {
                converged = true;
            }
        }
    }

    // Certify the kept point; if the accurate solve disagrees with the
    // iterative one, restore along the same segment once more.
    let mut x_final = EdgeWeighting::new(graph, best_x.clone())?;
    let mut mu = complement_spectrum(graph, &x_final, basis, 1, true, None)?.values[0];
    if mu < theta && mu_one > mu {
        let t = ((theta + margin - mu) / (mu_one - mu)).clamp(0.0, 1.0);
        for &e in &f_ids {
            best_x[e] = (1.0 - t) * best_x[e] + t;
        }
        x_final = EdgeWeighting::new(graph, best_x.clone())?;
        mu = complement_spectrum(graph, &x_final, basis, 1, true, None)?.values[0];
    }
    let objective = f_ids.iter().map(|&e| best_x[e]).sum();
    let certified_min_eig = (mu - theta).min(0.0);
    Ok(SdpSolution {
        x: x_final,
        objective,
        complement_min: mu,
        certified_min_eig,
        theta,
        iterations,
        converged: converged && certified_min_eig >= -opts.tol,
        history,
    })
}

/// Weighted adjacency of `G_x` restricted to `members`, with edges leaving
/// the set folded into self-loop mass.
struct WeightedInduced {
    d: f64,
    members: Vec<usize>,
    adj: Vec<Vec<(usize, f64)>>,
}

impl WeightedInduced {
    fn new(graph: &RegularGraph, x: &EdgeWeighting, members: &[usize]) -> Self {
        let mut local = vec![usize::MAX; graph.n()];
        for (i, &u) in members.iter().enumerate() {
            local[u] = i;
        }
        let adj = members
            .iter()
            .map(|&u| {
                graph
                    .neighbors(u)
                    .iter()
                    .zip(graph.incident_edges(u))
                    .filter(|(v, _)| local[**v] != usize::MAX)
                    .map(|(&v, &e)| (local[v], x.get(e)))
                    .collect()
            })
            .collect();
        Self {
            d: graph.d() as f64,
            members: members.to_vec(),
            adj,
        }
    }

    fn lambda2_and_fiedler(&self) -> Result<(f64, Vec<f64>)> {
        let pairs = linalg::smallest_eigenpairs(self, 2, 0xf1ed)?;
        Ok((pairs.values[1].max(0.0), pairs.vectors.column(1).iter().copied().collect()))
    }
}

impl SymmetricOperator for WeightedInduced {
    fn dim(&self) -> usize {
        self.members.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, list) in self.adj.iter().enumerate() {
            let inside: f64 = list.iter().map(|&(_, w)| w).sum();
            let mut ax = (self.d - inside) * x[i];
            for &(j, w) in list {
                ax += w * x[j];
            }
            y[i] = x[i] - ax / self.d;
        }
    }
}

/// `w(S, T)` summed over edges of `G_x` with one endpoint in each.
fn weight_between(graph: &RegularGraph, x: &EdgeWeighting, in_s: &[bool], in_t: &[bool]) -> f64 {
    graph
        .edges()
        .iter()
        .enumerate()
        .filter(|(_, &(u, v))| (in_s[u] && in_t[v]) || (in_s[v] && in_t[u]))
        .map(|(e, _)| x.get(e))
        .sum()
}

/// Total weight of edges whose endpoints lie in different parts.
pub fn cross_weight(graph: &RegularGraph, x: &EdgeWeighting, parts: &Labeling) -> f64 {
    x.weight_where(|e| {
        let (u, v) = graph.edges()[e];
        parts.get(u) != parts.get(v)
    })
}

/// Largest set among sweep cuts of the Fiedler vector of `G_x{R}` (and
/// singletons) with weighted conductance below `limit`, of size at most
/// `cap`.
fn largest_violating_set(
    graph: &RegularGraph,
    x: &EdgeWeighting,
    remaining: &[usize],
    limit: f64,
    cap: usize,
) -> Result<Option<Vec<usize>>> {
    let r = remaining.len();
    if r < 2 || cap == 0 {
        return Ok(None);
    }
    let sub = WeightedInduced::new(graph, x, remaining);
    let d = sub.d;
    let mut best: Option<Vec<usize>> = None;
    let mut consider = |set: Vec<usize>| {
        if best.as_ref().is_none_or(|b| set.len() > b.len()) {
            best = Some(set);
        }
    };
    for (i, list) in sub.adj.iter().enumerate() {
        let out: f64 = list.iter().map(|&(_, w)| w).sum();
        if out < limit * d {
            consider(vec![i]);
        }
    }
    let (_, fiedler) = sub.lambda2_and_fiedler()?;
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| fiedler[a].total_cmp(&fiedler[b]).then(a.cmp(&b)));
    let half = (r / 2).min(cap);
    for sweep in [order.clone(), order.into_iter().rev().collect::<Vec<_>>()] {
        let mut inside = vec![false; r];
        let mut cut = 0.0;
        for (size, &v) in sweep.iter().enumerate().take(half) {
            for &(j, w) in &sub.adj[v] {
                if inside[j] {
                    cut -= w;
                } else {
                    cut += w;
                }
            }
            inside[v] = true;
            let s = size + 1;
            if cut < limit * d * s as f64 {
                consider(sweep[..s].to_vec());
            }
        }
    }
    Ok(best
        .filter(|s| s.len() <= cap)
        .map(|s| s.into_iter().map(|i| remaining[i]).collect()))
}

#[derive(Clone, Debug, Serialize)]
pub struct RefinedPartition {
    pub clusters: Vec<Vec<usize>>,
    pub removed: Vec<Vec<usize>>,
    /// `λ₂/2` of each `G_x{C'_i}`, a lower bound on its conductance.
    pub conductance_bounds: Vec<f64>,
    pub cross_weight: f64,
    pub moves: usize,
}

impl RefinedPartition {
    pub fn labeling(&self, n: usize) -> Labeling {
        let mut labels = vec![0; n];
        for (i, c) in self.clusters.iter().enumerate() {
            for &u in c {
                labels[u] = i;
            }
        }
        Labeling::new(labels, self.clusters.len()).expect("cluster ids below k")
    }
}

/// Removes non-expanding pieces from every seed cluster of `G_x`, then
/// greedily moves removed vertices to the cluster they are most attached
/// to.
///
/// A piece is removed while some sweep cut of the Fiedler vector (or a
/// single vertex) of the remaining cluster has conductance below `φ/2`,
/// up to half the seed cluster. A vertex `v` in `C'_i` moves to `C'_j`
/// when `w(v, C'_i ∖ v) < w(v, C'_j)`; the move with the largest gain goes
/// first, ties to the smaller vertex and then the smaller target id.
pub fn repair_partition(
    graph: &RegularGraph,
    x: &EdgeWeighting,
    seeds: &Labeling,
    phi: f64,
) -> Result<RefinedPartition> {
    let n = graph.n();
    let k = seeds.k();
    let limit = phi / 2.0;
    let mut removed = Vec::with_capacity(k);
    for cluster in seeds.clusters() {
        let cap_total = cluster.len() / 2;
        let mut remaining = cluster.clone();
        let mut out: Vec<usize> = Vec::new();
        while let Some(s) = largest_violating_set(graph, x, &remaining, limit, cap_total - out.len())? {
            let mut drop = vec![false; n];
            for &u in &s {
                drop[u] = true;
            }
            remaining.retain(|&u| !drop[u]);
            out.extend(s);
        }
        out.sort_unstable();
        removed.push(out);
    }

    let mut part: Vec<usize> = seeds.as_slice().to_vec();
    let candidates: Vec<usize> = {
        let mut c: Vec<usize> = removed.iter().flatten().copied().collect();
        c.sort_unstable();
        c
    };
    let mut moves = 0;
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for &v in &candidates {
            let mut attach = vec![0.0; k];
            for (&u, &e) in graph.neighbors(v).iter().zip(graph.incident_edges(v)) {
                attach[part[u]] += x.get(e);
            }
            let own = attach[part[v]];
            for j in 0..k {
                let gain = attach[j] - own;
                if j != part[v] && gain > 0.0 && best.is_none_or(|(g, _, _)| gain > g) {
                    best = Some((gain, v, j));
                }
            }
        }
        match best {
            Some((_, v, j)) => {
                part[v] = j;
                moves += 1;
            }
            None => break,
        }
    }

    let labeling = Labeling::new(part, k)?;
    let clusters = labeling.clusters();
    let mut conductance_bounds = Vec::with_capacity(k);
    for c in &clusters {
        let b = if c.len() < 2 {
            0.0
        } else {
            WeightedInduced::new(graph, x, c).lambda2_and_fiedler()?.0 / 2.0
        };
        conductance_bounds.push(b);
    }
    Ok(RefinedPartition {
        cross_weight: cross_weight(graph, x, &labeling),
        clusters,
        removed,
        conductance_bounds,
        moves,
    })
}

/// Weighted conductance of `S` in `G_x{C}`: `w(S, C∖S) / (d·min(|S|, |C∖S|))`.
pub fn induced_conductance(graph: &RegularGraph, x: &EdgeWeighting, cluster: &[usize], set: &[usize]) -> f64 {
    let n = graph.n();
    let mut in_c = vec![false; n];
    cluster.iter().for_each(|&u| in_c[u] = true);
    let mut in_s = vec![false; n];
    set.iter().for_each(|&u| in_s[u] = true);
    let rest: Vec<bool> = (0..n).map(|u| in_c[u] && !in_s[u]).collect();
    let smaller = set.len().min(cluster.len() - set.len());
    weight_between(graph, x, &in_s, &rest) / (graph.d() * smaller) as f64
}

/// Largest graph accepted by [`kway_expansion_bruteforce`].
pub const KWAY_LIMIT: usize = 12;

/// `min over disjoint nonempty A_1..A_k of max_i Φ(A_i)`, by enumeration.
pub fn kway_expansion_bruteforce(graph: &RegularGraph, k: usize) -> Result<f64> {
    let n = graph.n();
    if n > KWAY_LIMIT {
        return Err(Error::Size(format!("{n} vertices exceed the enumeration limit {KWAY_LIMIT}")));
    }
    if k == 0 || k > n {
        return Err(Error::Parameter(format!("k = {k} invalid for n = {n}")));
    }
    let full = (1u32 << n) - 1;
    let d = graph.d();
    let mut phi = vec![f64::INFINITY; 1 << n];
    for mask in 1..=full {
        let size = mask.count_ones() as usize;
        let cut = graph
            .edges()
            .iter()
            .filter(|&&(u, v)| ((mask >> u) & 1) != ((mask >> v) & 1))
            .count();
        let smaller = size.min(n - size);
        // The whole vertex set has no cut; its conductance is taken as 0.
        phi[mask as usize] = if smaller == 0 { 0.0 } else { cut as f64 / (d * smaller) as f64 };
    }

    fn search(phi: &[f64], free: u32, min_mask: u32, left: usize, current: f64, best: &mut f64) {
        if left == 0 {
            *best = best.min(current);
            return;
        }
        // Submasks of `free` above `min_mask` keep the sets in increasing
        // order, so each family is visited once.
        let mut sub = free;
        while sub != 0 {
            if sub > min_mask {
                let value = current.max(phi[sub as usize]);
                if value < *best {
                    search(phi, free & !sub, sub, left - 1, value, best);
                }
            }
            sub = (sub - 1) & free;
        }
    }

    let mut best = f64::INFINITY;
    search(&phi, full, 0, k, 0.0, &mut best);
    Ok(best)
}

#[derive(Clone, Debug, Serialize)]
pub struct RefineReport {
    pub flagged: usize,
    pub objective: f64,
    pub certified_min_eig: f64,
    pub complement_min: f64,
    pub theta: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Weight left on edges crossing the ground-truth clusters.
    pub cross_edge_weight: Option<f64>,
    /// `Σ_i |C'_i △ C_i|` against the ground truth.
    pub symmetric_difference: Option<usize>,
    pub removed: usize,
    pub conductance_bounds: Vec<f64>,
    /// `γ` exceeds `φ³/(100ηk)`, where no bound is claimed.
    pub outside_regime: Option<bool>,
}

/// `Σ_i |C'_i △ C_i|` for partitions with matching ids.
pub fn symmetric_difference(a: &Labeling, b: &Labeling) -> usize {
    2 * a.disagreements(b)
}

/// Flags edges, reweights them and repairs the partition. `truth` enables
/// the evaluation-only fields of the report.
pub fn refine_pipeline(
    graph: &RegularGraph,
    basis: &DMatrix<f64>,
    alpha: &Labeling,
    phi: f64,
    opts: &SdpOptions,
    truth: Option<(&Labeling, f64)>,
) -> Result<(EdgeWeighting, RefinedPartition, RefineReport)> {
    let flagged = flag_edges(graph, alpha);
    let sol = sdp_reweight_with_basis(graph, &flagged, basis, opts)?;
    let partition = repair_partition(graph, &sol.x, alpha, phi)?;
    let k = alpha.k();
    let refined = partition.labeling(graph.n());
    let (cross_edge_weight, symmetric_diff, outside_regime) = match truth {
        Some((iota, eta)) => {
            let gamma = alpha.disagreements(iota) as f64 / graph.n() as f64;
            let cross = cross_edges(graph, iota).iter().map(|&e| sol.x.get(e)).sum();
            (
                Some(cross),
                Some(symmetric_difference(&refined, iota)),
                Some(gamma > phi.powi(3) / (100.0 * eta * k as f64)),
            )
        }
        None => (None, None, None),
    };
    let report = RefineReport {
        flagged: flagged.len(),
        objective: sol.objective,
        certified_min_eig: sol.certified_min_eig,
        complement_min: sol.complement_min,
        theta: sol.theta,
        iterations: sol.iterations,
        converged: sol.converged,
        cross_edge_weight,
        symmetric_difference: symmetric_diff,
        removed: partition.removed.iter().map(Vec::len).sum(),
        conductance_bounds: partition.conductance_bounds.clone(),
        outside_regime,
    };
    Ok((sol.x, partition, report))
}
