use proptest::prelude::*;

use specside::graph::io::{graph_to_string, parse_graph};
use specside::graph::{conductance, generate_planted, perturb_labels, EdgeWeighting, Labeling, PerturbMode, RegularGraph};
use specside::linalg::dense_smallest;
use specside::refine::{cross_weight, flag_edges, kway_expansion_bruteforce, repair_partition, sdp_reweight, SdpOptions};
use specside::spectral::normalized_laplacian;

/// A random graph on `n` vertices padded with loops to its maximum degree.
fn padded_graph(n: usize, mask: &[bool]) -> RegularGraph {
    let edges: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .zip(mask.iter().cycle())
        .filter(|(_, &keep)| keep)
        .map(|(e, _)| e)
        .collect();
    let mut deg = vec![0; n];
    for &(u, v) in &edges {
        deg[u] += 1;
        deg[v] += 1;
    }
    let d = deg.iter().copied().max().unwrap_or(0).max(1);
    RegularGraph::from_edges(n, d, &edges).unwrap()
}

fn is_connected(g: &RegularGraph) -> bool {
    let mut seen = vec![false; g.n()];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for &v in g.neighbors(u) {
            if !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen.iter().all(|&s| s)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn planted_graphs_are_regular_and_roundtrip(seed in 0u64..1000, k in 2usize..4, d in 6usize..10) {
        let inst = generate_planted(60 * k, k, d, 0.05, 1.0, seed).unwrap();
        let g = &inst.graph;
        for u in 0..g.n() {
            prop_assert_eq!(g.neighbors(u).len() + g.self_loops(u), d);
        }
        prop_assert_eq!(inst.iota.k(), k);
        let back = parse_graph(&graph_to_string(g)).unwrap();
        prop_assert_eq!(back.content_hash(), g.content_hash());
    }

    #[test]
    fn perturbation_only_emits_wrong_labels(
        labels in prop::collection::vec(0usize..4, 1..300),
        delta in 0.0f64..1.0,
        seed in any::<u64>(),
        fixed in any::<bool>(),
    ) {
        let iota = Labeling::new(labels, 4).unwrap();
        let mode = if fixed { PerturbMode::FixedTarget } else { PerturbMode::UniformWrong };
        let sigma = perturb_labels(&iota, delta, mode, seed).unwrap();
        prop_assert_eq!(sigma.len(), iota.len());
        for u in 0..iota.len() {
            let (t, s) = (iota.get(u), sigma.get(u));
            prop_assert!(s < 4);
            if fixed && s != t {
                prop_assert_eq!(s, (t + 1) % 4);
            }
        }
        prop_assert_eq!(perturb_labels(&iota, 0.0, mode, seed).unwrap(), iota.clone());
        prop_assert_eq!(perturb_labels(&iota, delta, mode, seed).unwrap(), sigma);
    }

    #[test]
    fn conductance_is_symmetric(n in 3usize..12, mask in prop::collection::vec(any::<bool>(), 66), set in prop::collection::vec(any::<bool>(), 12)) {
        let g = padded_graph(n, &mask);
        let in_set: Vec<bool> = set[..n].to_vec();
        let size = in_set.iter().filter(|&&b| b).count();
        prop_assume!(size > 0 && size < n);
        let flipped: Vec<bool> = in_set.iter().map(|b| !b).collect();
        let a = conductance(&g, &in_set).unwrap();
        let b = conductance(&g, &flipped).unwrap();
        prop_assert_eq!(a, b);
        prop_assert!(a.value() <= 1.0);
    }

    #[test]
    fn kway_expansion_dominates_half_eigenvalue(n in 3usize..10, mask in prop::collection::vec(any::<bool>(), 45)) {
        let g = padded_graph(n, &mask);
        prop_assume!(is_connected(&g));
        let lambdas = dense_smallest(normalized_laplacian(&g, None), 3).values;
        for k in 2..=3.min(n) {
            let rho = kway_expansion_bruteforce(&g, k).unwrap();
            prop_assert!(rho >= lambdas[k - 1] / 2.0 - 1e-12, "k {} rho {} lambda {}", k, rho, lambdas[k - 1]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn reweighting_stays_in_the_box(seed in 0u64..200, flips in 1usize..6) {
        let inst = generate_planted(120, 2, 8, 0.05, 1.0, seed).unwrap();
        let g = &inst.graph;
        let mut alpha = inst.iota.as_slice().to_vec();
        for u in 0..flips {
            alpha[u * 7] = 1 - alpha[u * 7];
        }
        let alpha = Labeling::new(alpha, 2).unwrap();
        let flagged = flag_edges(g, &alpha);
        let phi = inst.phi_certified;
        let mut opts = SdpOptions::new(phi * phi / 5.0);
        opts.max_iter = 300;
        let sol = sdp_reweight(g, &flagged, 2, &opts).unwrap();
        for e in 0..g.edge_count() {
            let w = sol.x.get(e);
            prop_assert!((0.0..=1.0).contains(&w));
            if !flagged.is_flagged(e) {
                prop_assert_eq!(w, 1.0);
            }
        }
        prop_assert!(sol.history.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(sol.certified_min_eig >= -1e-6);
    }

    #[test]
    fn repair_partitions_vertices_and_lowers_cross_weight(seed in 0u64..200, flips in 0usize..10, scale in 0.0f64..1.0) {
        let inst = generate_planted(120, 2, 8, 0.05, 1.0, seed).unwrap();
        let g = &inst.graph;
        let mut seeds = inst.iota.as_slice().to_vec();
        for u in 0..flips {
            seeds[u * 11] = 1 - seeds[u * 11];
        }
        let seeds = Labeling::new(seeds, 2).unwrap();
        let flagged = flag_edges(g, &seeds);
        let x: Vec<f64> = (0..g.edge_count()).map(|e| if flagged.is_flagged(e) { scale } else { 1.0 }).collect();
        let x = EdgeWeighting::new(g, x).unwrap();
        let part = repair_partition(g, &x, &seeds, inst.phi_certified).unwrap();

        let mut seen = vec![0; g.n()];
        for c in &part.clusters {
            for &u in c {
                seen[u] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&s| s == 1));
        for (i, r) in part.removed.iter().enumerate() {
            prop_assert!(r.len() <= seeds.cluster_sizes()[i] / 2);
        }
        let moved: Vec<usize> = (0..g.n()).filter(|&u| part.labeling(g.n()).get(u) != seeds.get(u)).collect();
        let removed: Vec<usize> = part.removed.iter().flatten().copied().collect();
        prop_assert!(moved.iter().all(|u| removed.contains(u)));
        prop_assert!(part.cross_weight <= cross_weight(g, &x, &seeds) + 1e-12);
    }
}
