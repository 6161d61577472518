use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Cluster ids per vertex. Ids are 0-based in memory and 1-based on disk.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Labeling {
    labels: Vec<usize>,
    k: usize,
}

impl Labeling {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Parameter("k must be positive".into()));
        }
        if let Some((u, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= k) {
            return Err(Error::Parameter(format!("label {l} of vertex {u} not below k = {k}")));
        }
        Ok(Self { labels, k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, u: usize) -> usize {
        self.labels[u]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.labels
    }

    /// Members of every cluster, in vertex order.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (u, &l) in self.labels.iter().enumerate() {
            out[l].push(u);
        }
        out
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut out = vec![0; self.k];
        for &l in &self.labels {
            out[l] += 1;
        }
        out
    }

    /// Number of vertices where the two labelings differ.
    pub fn disagreements(&self, other: &Labeling) -> usize {
        self.labels
            .iter()
            .zip(&other.labels)
            .filter(|(a, b)| a != b)
            .count()
    }
}

/// How a wrong label is chosen once a vertex is selected for corruption.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbMode {
    /// Uniform over the `k − 1` wrong ids.
    UniformWrong,
    /// Always the next id cyclically.
    FixedTarget,
}

/// Independently per vertex, keeps `ι(u)` with probability `1 − δ` and
/// otherwise emits a wrong label chosen by `mode`.
pub fn perturb_labels(iota: &Labeling, delta: f64, mode: PerturbMode, seed: u64) -> Result<Labeling> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::Parameter(format!("delta = {delta} outside [0, 1]")));
    }
    let k = iota.k();
    if k < 2 && delta > 0.0 {
        return Err(Error::Parameter("perturbation needs k >= 2".into()));
    }
    let mut rng = rng::rng(rng::substream(seed, rng::streams::PERTURBATION));
    let labels = iota
        .as_slice()
        .iter()
        .map(|&truth| {
            let flip = rng.gen::<f64>() < delta;
            let wrong_pick = if k > 1 { rng.gen_range(0..k - 1) } else { 0 };
            if !flip {
                truth
            } else {
                match mode {
                    PerturbMode::FixedTarget => (truth + 1) % k,
                    PerturbMode::UniformWrong => {
                        if wrong_pick >= truth {
                            wrong_pick + 1
                        } else {
                            wrong_pick
                        }
                    }
                }
            }
        })
        .collect();
    Labeling::new(labels, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn truth(n: usize, k: usize) -> Labeling {
        Labeling::new((0..n).map(|u| u % k).collect(), k).unwrap()
    }

    #[test]
    fn delta_zero_is_identity() {
        let iota = truth(100, 3);
        let s = perturb_labels(&iota, 0.0, PerturbMode::UniformWrong, 1).unwrap();
        assert_eq!(s, iota);
    }

    #[test]
    fn delta_one_k2_is_complement() {
        let iota = truth(100, 2);
        for mode in [PerturbMode::UniformWrong, PerturbMode::FixedTarget] {
            let s = perturb_labels(&iota, 1.0, mode, 9).unwrap();
            assert!((0..100).all(|u| s.get(u) == 1 - iota.get(u)));
        }
    }

    #[test]
    fn fixed_target_is_cyclic_successor() {
        let iota = truth(30, 3);
        let s = perturb_labels(&iota, 1.0, PerturbMode::FixedTarget, 4).unwrap();
        assert!((0..30).all(|u| s.get(u) == (iota.get(u) + 1) % 3));
    }

    #[test]
    fn mislabel_rate_within_binomial_bound() {
        // 3σ of Binomial(10⁴, 0.1)/10⁴ is 0.009, inside the ±0.01 band.
        let n = 10_000;
        let iota = truth(n, 2);
        let delta = 0.1;
        let band = 3.0 * (delta * (1.0 - delta) / n as f64).sqrt();
        for seed in 0..10 {
            let s = perturb_labels(&iota, delta, PerturbMode::UniformWrong, seed).unwrap();
            let rate = s.disagreements(&iota) as f64 / n as f64;
            assert!((rate - delta).abs() <= band.max(0.01), "seed {seed}: {rate}");
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let iota = truth(500, 4);
        let a = perturb_labels(&iota, 0.3, PerturbMode::UniformWrong, 77).unwrap();
        let b = perturb_labels(&iota, 0.3, PerturbMode::UniformWrong, 77).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(Labeling::new(vec![0, 2], 2).is_err());
        let iota = truth(10, 2);
        assert!(perturb_labels(&iota, 1.5, PerturbMode::UniformWrong, 0).is_err());
    }
}
