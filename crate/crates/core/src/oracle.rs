//! Approximate spectral inner products and approximate cluster means.

use std::fmt;
use std::sync::Arc;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Labeling;
use crate::rng;
use crate::spectral::{ClusterMeans, SpectralEmbedding};

/// Attempts made by [`approx_means`] before giving up.
pub const SAMPLING_ATTEMPTS: u64 = 5;

/// Query access to `⟨f_u, f_v⟩` up to an additive `ξ/n`.
pub trait InnerProductOracle: Send + Sync {
    fn n(&self) -> usize;
    fn xi(&self) -> f64;
    fn apx(&self, u: usize, v: usize) -> f64;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Exact,
    Noisy,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Exact => "exact",
            Backend::Noisy => "noisy",
        })
    }
}

/// Oracle over a precomputed embedding. The noisy backend perturbs each
/// unordered pair by a value uniform in `[−ξ/n, ξ/n]` derived from a hash
/// of `(seed, u, v)`, so it is symmetric and stateless.
#[derive(Clone, Debug)]
pub struct EmbeddingOracle {
    emb: Arc<SpectralEmbedding>,
    backend: Backend,
    xi: f64,
    seed: u64,
}

impl EmbeddingOracle {
    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn embedding(&self) -> &SpectralEmbedding {
        &self.emb
    }
}

impl InnerProductOracle for EmbeddingOracle {
    fn n(&self) -> usize {
        self.emb.n()
    }

    fn xi(&self) -> f64 {
        match self.backend {
            Backend::Exact => 0.0,
            Backend::Noisy => self.xi,
        }
    }

    fn apx(&self, u: usize, v: usize) -> f64 {
        let exact = self.emb.dot(u, v);
        match self.backend {
            Backend::Exact => exact,
            Backend::Noisy => {
                let h = rng::hash_unordered(rng::substream(self.seed, rng::streams::ORACLE_NOISE), u, v);
                exact + self.xi / self.emb.n() as f64 * rng::unit_symmetric(h)
            }
        }
    }
}

pub fn make_oracle(emb: Arc<SpectralEmbedding>, backend: Backend, xi: f64, seed: u64) -> Result<EmbeddingOracle> {
    if !(xi >= 0.0 && xi.is_finite()) {
        return Err(Error::Parameter(format!("xi = {xi} must be finite and nonnegative")));
    }
    Ok(EmbeddingOracle {
        emb,
        backend,
        xi,
        seed,
    })
}

/// Largest `ξ` with `ξ/n ≤ φ²/(20⁴ η) · min_i ‖μ_i‖²`.
pub fn xi_ceiling(n: usize, phi: f64, eta: f64, means: &ClusterMeans) -> f64 {
    let min_norm = (0..means.means.len())
        .map(|i| means.norm_sq(i))
        .fold(f64::INFINITY, f64::min);
    n as f64 * phi * phi / (160_000.0 * eta) * min_norm
}

/// `apx(u,u) + apx(v,v) − 2·apx(u,v)`.
pub fn apx_distance_sq(oracle: &dyn InnerProductOracle, u: usize, v: usize) -> f64 {
    oracle.apx(u, u) + oracle.apx(v, v) - 2.0 * oracle.apx(u, v)
}

/// Squared radius factor `φ²/(400η)` of a spectral cluster ball.
pub fn ball_radius_factor(phi: f64, eta: f64) -> f64 {
    phi * phi / (400.0 * eta)
}

fn sample_count(factor: f64, k: usize, eta: f64) -> usize {
    ((factor * eta * k as f64 * (k as f64).ln()).ceil() as usize).max(8)
}

/// Distinct uniform sample of `min(count, n)` vertices, in draw order.
fn sample_vertices(n: usize, count: usize, seed: u64) -> Vec<usize> {
    let mut r = rng::rng(seed);
    index::sample(&mut r, n, count.min(n)).into_vec()
}

/// One round of representative selection: sample `⌈10ηk ln k⌉` vertices
/// (at least 8), link `x → y` when `apx(x,y) ≥ 0.9·apx(x,x)`, then
/// repeatedly emit the first remaining sample and drop its neighborhood.
/// The result may have any size.
pub fn approx_cluster_means_once(oracle: &dyn InnerProductOracle, k: usize, eta: f64, seed: u64) -> Vec<usize> {
    let sample = sample_vertices(oracle.n(), sample_count(10.0, k, eta), seed);
    let mut alive = vec![true; sample.len()];
    let mut reps = Vec::new();
    for i in 0..sample.len() {
        if !alive[i] {
            continue;
        }
        let x = sample[i];
        reps.push(x);
        alive[i] = false;
        let self_sim = 0.9 * oracle.apx(x, x);
        for j in i + 1..sample.len() {
            if alive[j] && oracle.apx(x, sample[j]) >= self_sim {
                alive[j] = false;
            }
        }
    }
    reps
}

/// Representatives of `k` clusters, retrying with derived seeds until a
/// round emits exactly `k` vertices.
pub fn approx_cluster_means(oracle: &dyn InnerProductOracle, k: usize, eta: f64, seed: u64) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::Parameter("k must be positive".into()));
    }
    let base = rng::substream(seed, rng::streams::MEANS);
    let mut last = 0;
    for attempt in 0..SAMPLING_ATTEMPTS {
        let reps = approx_cluster_means_once(oracle, k, eta, rng::substream(base, attempt));
        if reps.len() == k {
            return Ok(reps);
        }
        last = reps.len();
    }
    Err(Error::Sampling(format!(
        "representative selection returned {last} vertices instead of {k} after {SAMPLING_ATTEMPTS} attempts"
    )))
}

/// Label id assigned to each representative: the σ-majority among sampled
/// vertices within the ball around it, ties to the smallest id. Fails when
/// a ball catches no sample or two representatives get the same label.
pub fn recover_permutation(
    oracle: &dyn InnerProductOracle,
    representatives: &[usize],
    sigma: &Labeling,
    eta: f64,
    phi: f64,
    seed: u64,
) -> Result<Vec<usize>> {
    let k = representatives.len();
    if sigma.k() != k {
        return Err(Error::Parameter(format!(
            "{k} representatives for {} label ids",
            sigma.k()
        )));
    }
    let sample = sample_vertices(oracle.n(), sample_count(50.0, k, eta), seed);
    let radius = ball_radius_factor(phi, eta);
    let mut pi = Vec::with_capacity(k);
    for &u in representatives {
        let limit = radius * oracle.apx(u, u);
        let mut votes = vec![0usize; k];
        let mut hits = 0;
        for &v in &sample {
            if apx_distance_sq(oracle, v, u) <= limit {
                votes[sigma.get(v)] += 1;
                hits += 1;
            }
        }
        if hits == 0 {
            return Err(Error::Sampling(format!("no sampled vertex within the ball of representative {u}")));
        }
        let best = votes.iter().max().copied().unwrap_or(0);
        pi.push(votes.iter().position(|&c| c == best).unwrap_or(0));
    }
    let mut seen = vec![false; k];
    for &p in &pi {
        if std::mem::replace(&mut seen[p], true) {
            return Err(Error::Sampling(format!("label {p} claimed by two representatives")));
        }
    }
    Ok(pi)
}

/// Representatives indexed by label id: `center(j)` is the vertex whose
/// embedding stands in for the mean of label cluster `j`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApproxMeans {
    centers: Vec<usize>,
}

impl ApproxMeans {
    /// Builds from representatives and their label ids; `pi` must be a
    /// bijection onto `0..k`.
    pub fn new(representatives: &[usize], pi: &[usize]) -> Result<Self> {
        let k = representatives.len();
        if pi.len() != k {
            return Err(Error::Parameter("permutation length mismatch".into()));
        }
        let mut centers = vec![usize::MAX; k];
        for (&u, &p) in representatives.iter().zip(pi) {
            if p >= k || centers[p] != usize::MAX {
                return Err(Error::Parameter(format!("{pi:?} is not a permutation")));
            }
            centers[p] = u;
        }
        let mut sorted = centers.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Parameter("representatives must be distinct".into()));
        }
        Ok(Self { centers })
    }

    pub fn k(&self) -> usize {
        self.centers.len()
    }

    pub fn center(&self, label: usize) -> usize {
        self.centers[label]
    }

    pub fn centers(&self) -> &[usize] {
        &self.centers
    }
}

/// Representatives plus permutation, retrying both steps together with
/// derived seeds.
pub fn approx_means(
    oracle: &dyn InnerProductOracle,
    sigma: &Labeling,
    eta: f64,
    phi: f64,
    seed: u64,
) -> Result<ApproxMeans> {
    let k = sigma.k();
    let mut last_err = None;
    for attempt in 0..SAMPLING_ATTEMPTS {
        let s = rng::substream(seed, attempt);
        let reps = match approx_cluster_means(oracle, k, eta, s) {
            Ok(r) => r,
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        match recover_permutation(oracle, &reps, sigma, eta, phi, rng::substream(s, rng::streams::PERMUTATION)) {
            Ok(pi) => return ApproxMeans::new(&reps, &pi),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::Sampling("no attempt made".into())))
}
