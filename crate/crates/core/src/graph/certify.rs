use serde::{Deserialize, Serialize};

use super::RegularGraph;
use crate::error::Result;
use crate::linalg;
use crate::spectral::LaplacianOperator;

/// Clusters up to this size are certified by subset enumeration.
pub const EXHAUSTIVE_LIMIT: usize = 14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertMethod {
    Exhaustive,
    Cheeger,
}

impl std::fmt::Display for CertMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CertMethod::Exhaustive => "exhaustive",
            CertMethod::Cheeger => "cheeger",
        })
    }
}

/// Second-smallest eigenvalue of the normalized Laplacian of `G{C}`.
pub fn lambda2_of_induced(graph: &RegularGraph, members: &[usize]) -> Result<f64> {
    if members.len() < 2 {
        return Ok(0.0);
    }
    let (h, _) = graph.induced(members);
    let op = LaplacianOperator::new(&h);
    let pairs = linalg::smallest_eigenpairs(&op, 2, 0x1a2b)?;
    Ok(pairs.values[1].max(0.0))
}

/// Lower bound on the conductance of the induced graph `G{C}`.
///
/// Exact by enumeration for `|C| ≤ 14`, otherwise `λ₂/2`.
pub fn internal_conductance_bound(
    graph: &RegularGraph,
    members: &[usize],
) -> Result<(f64, CertMethod)> {
    if members.len() <= EXHAUSTIVE_LIMIT {
        let (h, _) = graph.induced(members);
        return Ok((exhaustive_min_conductance(&h), CertMethod::Exhaustive));
    }
    Ok((lambda2_of_induced(graph, members)? / 2.0, CertMethod::Cheeger))
}

/// Minimum conductance over all nonempty proper subsets (`m ≤ 20`).
/// A single vertex has no proper cut and gets the maximum value 1.
pub(crate) fn exhaustive_min_conductance(h: &RegularGraph) -> f64 {
    let m = h.n();
    assert!(m <= 20, "enumeration limited to 20 vertices");
    if m < 2 {
        return 1.0;
    }
    let d = h.d();
    let mut best = f64::INFINITY;
    // Fixing the last vertex outside S visits each cut once.
    for mask in 1u32..(1u32 << (m - 1)) {
        let size = mask.count_ones() as usize;
        let cut = h
            .edges()
            .iter()
            .filter(|&&(u, v)| ((mask >> u) & 1) != ((mask >> v) & 1))
            .count();
        let vol = d * size.min(m - size);
        best = best.min(cut as f64 / vol as f64);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::{complete, disjoint_cliques};
    use crate::rng;
    use rand::seq::SliceRandom;

    #[test]
    fn k4_exhaustive_is_two_thirds() {
        let g = complete(4);
        let (b, m) = internal_conductance_bound(&g, &[0, 1, 2, 3]).unwrap();
        assert_eq!(m, CertMethod::Exhaustive);
        assert!((b - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn disconnected_cluster_is_zero() {
        let g = disjoint_cliques(2, 3);
        let (b, _) = internal_conductance_bound(&g, &[0, 1, 2, 3, 4, 5]).unwrap();
        assert_eq!(b, 0.0);
    }

    #[test]
    fn cheeger_never_exceeds_exhaustive() {
        let inst = crate::graph::generate_planted(28, 2, 5, 0.1, 1.0, 5).unwrap();
        for cluster in inst.iota.clusters() {
            let (h, _) = inst.graph.induced(&cluster);
            let exact = exhaustive_min_conductance(&h);
            let cheeger = lambda2_of_induced(&inst.graph, &cluster).unwrap() / 2.0;
            assert!(cheeger <= exact + 1e-12, "{cheeger} > {exact}");
        }
    }

    #[test]
    fn large_cluster_uses_cheeger_and_bounds_subsamples() {
        let inst = crate::graph::generate_planted(1000, 2, 12, 0.02, 1.0, 11).unwrap();
        let clusters = inst.iota.clusters();
        let (bound, method) = internal_conductance_bound(&inst.graph, &clusters[0]).unwrap();
        assert_eq!(method, CertMethod::Cheeger);
        assert!(bound > 0.0);
        // Conductance of small subsets inside the cluster can only be larger
        // than the cluster's minimum, which the bound underestimates.
        let (h, _) = inst.graph.induced(&clusters[0]);
        let mut rng = rng::rng(3);
        let mut ids: Vec<usize> = (0..h.n()).collect();
        for _ in 0..20 {
            ids.shuffle(&mut rng);
            let mut in_set = vec![false; h.n()];
            for &u in ids.iter().take(10) {
                in_set[u] = true;
            }
            let c = crate::graph::conductance(&h, &in_set).unwrap().value();
            assert!(bound <= c);
        }
    }
}
