//! Normalized Laplacian, spectral embeddings and cluster means.

use std::fs;
use std::io::{Read as _, Write as _};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::graph::{EdgeWeighting, Labeling, RegularGraph};
use crate::linalg::{self, SymmetricOperator};
use crate::rng;

/// Residual above which an eigenpair is rejected.
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-7;

/// `𝓛 = I − A/d`, with self-loop mass on the diagonal of `A`. With a
/// weighting, off-diagonal entries carry `x_e` and the diagonal `ℓ'(v)`.
pub struct LaplacianOperator<'a> {
    graph: &'a RegularGraph,
    weights: Option<&'a EdgeWeighting>,
    loop_mass: Vec<f64>,
    inv_d: f64,
}

impl<'a> LaplacianOperator<'a> {
    pub fn new(graph: &'a RegularGraph) -> Self {
        let loop_mass = (0..graph.n()).map(|u| graph.self_loops(u) as f64).collect();
        Self {
            graph,
            weights: None,
            loop_mass,
            inv_d: 1.0 / graph.d() as f64,
        }
    }

    pub fn weighted(graph: &'a RegularGraph, weights: &'a EdgeWeighting) -> Self {
        let loop_mass = (0..graph.n()).map(|u| weights.loop_mass(graph, u)).collect();
        Self {
            graph,
            weights: Some(weights),
            loop_mass,
            inv_d: 1.0 / graph.d() as f64,
        }
    }
}

impl SymmetricOperator for LaplacianOperator<'_> {
    fn dim(&self) -> usize {
        self.graph.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let g = self.graph;
        for u in 0..g.n() {
            let mut ax = self.loop_mass[u] * x[u];
            match self.weights {
                None => {
                    for &v in g.neighbors(u) {
                        ax += x[v];
                    }
                }
                Some(w) => {
                    for (&v, &e) in g.neighbors(u).iter().zip(g.incident_edges(u)) {
                        ax += w.get(e) * x[v];
                    }
                }
            }
            y[u] = x[u] - self.inv_d * ax;
        }
    }
}

/// Dense `𝓛` (or `𝓛_x` when a weighting is given).
pub fn normalized_laplacian(graph: &RegularGraph, weights: Option<&EdgeWeighting>) -> DMatrix<f64> {
    match weights {
        None => LaplacianOperator::new(graph).to_dense(),
        Some(w) => LaplacianOperator::weighted(graph, w).to_dense(),
    }
}

/// Bottom-`k` eigenvectors of `𝓛` plus the `k + 1` smallest eigenvalues.
///
/// Row `u` of the basis is the embedding `f_u`. The basis is determined
/// only up to an orthogonal rotation, so consumers use inner products.
#[derive(Clone, Debug)]
pub struct SpectralEmbedding {
    k: usize,
    basis: DMatrix<f64>,
    rows: Vec<f64>,
    eigenvalues: Vec<f64>,
}

impl SpectralEmbedding {
    pub fn from_parts(basis: DMatrix<f64>, eigenvalues: Vec<f64>) -> Result<Self> {
        let (n, k) = basis.shape();
        if eigenvalues.len() < k {
            return Err(Error::Parameter(format!(
                "{} eigenvalues for a rank-{k} basis",
                eigenvalues.len()
            )));
        }
        let mut rows = vec![0.0; n * k];
        for u in 0..n {
            for c in 0..k {
                rows[u * k + c] = basis[(u, c)];
            }
        }
        Ok(Self {
            k,
            basis,
            rows,
            eigenvalues,
        })
    }

    pub fn n(&self) -> usize {
        self.basis.nrows()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// `λ₁ ≤ … ≤ λ_{k+1}` (only `k` values when `k + 1 > n`).
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn row(&self, u: usize) -> &[f64] {
        &self.rows[u * self.k..(u + 1) * self.k]
    }

    pub fn dot(&self, u: usize, v: usize) -> f64 {
        linalg::dot(self.row(u), self.row(v))
    }

    pub fn norm_sq(&self, u: usize) -> f64 {
        self.dot(u, u)
    }
}

/// Spectral embedding of dimension `k < n`.
pub fn embed(graph: &RegularGraph, k: usize) -> Result<SpectralEmbedding> {
    let n = graph.n();
    if k == 0 || k >= n {
        return Err(Error::Parameter(format!("embedding needs 0 < k < n, got k = {k}, n = {n}")));
    }
    let op = LaplacianOperator::new(graph);
    let count = (k + 1).min(n);
    let pairs = linalg::smallest_eigenpairs(&op, count, rng::substream(0, rng::streams::LANCZOS))?;
    let residual = pairs.max_residual(&op);
    if residual > EIGEN_RESIDUAL_TOL {
        return Err(Error::NonConvergence {
            residual,
            iterations: 0,
        });
    }
    // Roundoff can push the extreme eigenvalues slightly outside [0, 2].
    let eigenvalues = pairs.values.iter().map(|&l| l.clamp(0.0, 2.0)).collect();
    let basis = pairs.vectors.columns(0, k).into_owned();
    SpectralEmbedding::from_parts(basis, eigenvalues)
}

/// `μ_i = (1/|C_i|) Σ_{u∈C_i} f_u`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterMeans {
    pub means: Vec<Vec<f64>>,
    pub sizes: Vec<usize>,
}

impl ClusterMeans {
    pub fn norm_sq(&self, i: usize) -> f64 {
        linalg::dot(&self.means[i], &self.means[i])
    }

    pub fn dot(&self, i: usize, j: usize) -> f64 {
        linalg::dot(&self.means[i], &self.means[j])
    }
}

pub fn cluster_means(emb: &SpectralEmbedding, iota: &Labeling) -> Result<ClusterMeans> {
    if iota.len() != emb.n() {
        return Err(Error::Parameter(format!(
            "labeling of length {} for {} vertices",
            iota.len(),
            emb.n()
        )));
    }
    let k = emb.k();
    let mut means = vec![vec![0.0; k]; iota.k()];
    let sizes = iota.cluster_sizes();
    if let Some(i) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::Domain(format!("cluster {i} is empty")));
    }
    for u in 0..emb.n() {
        let m = &mut means[iota.get(u)];
        for (a, b) in m.iter_mut().zip(emb.row(u)) {
            *a += b;
        }
    }
    for (m, &s) in means.iter_mut().zip(&sizes) {
        for a in m.iter_mut() {
            *a /= s as f64;
        }
    }
    Ok(ClusterMeans { means, sizes })
}

/// Iteration count `⌈8 ln n / ln(1 + φ²/4)⌉` for [`subspace_projection`].
pub fn default_power(n: usize, phi: f64) -> usize {
    (8.0 * (n.max(2) as f64).ln() / (phi * phi / 4.0).ln_1p()).ceil() as usize
}

/// Orthonormal basis of `range(M^q Ω)` for the lazy walk matrix
/// `M = I/2 + A/(2d) = I − 𝓛/2` and a Gaussian `n × k` sketch `Ω`.
///
/// The iterate is re-orthonormalized after every multiplication, which
/// leaves its range unchanged. A rank-deficient sketch is redrawn up to
/// three times.
pub fn subspace_projection(graph: &RegularGraph, k: usize, q: usize, seed: u64) -> Result<DMatrix<f64>> {
    let n = graph.n();
    if q == 0 {
        return Err(Error::Parameter("subspace iteration needs q >= 1".into()));
    }
    if k == 0 || k > n {
        return Err(Error::Parameter(format!("sketch width {k} invalid for n = {n}")));
    }
    let op = LaplacianOperator::new(graph);
    let mut x = vec![0.0; n];
    let mut y = vec![0.0; n];
    for attempt in 0..4u64 {
        let mut r = rng::rng(rng::substream(rng::substream(seed, rng::streams::SKETCH), attempt));
        let mut q_mat = DMatrix::from_fn(n, k, |_, _| r.sample::<f64, _>(StandardNormal));
        let mut ok = true;
        for _ in 0..q {
            for c in 0..k {
                x.iter_mut().zip(q_mat.column(c).iter()).for_each(|(a, &b)| *a = b);
                op.apply(&x, &mut y);
                for i in 0..n {
                    q_mat[(i, c)] = x[i] - 0.5 * y[i];
                }
            }
            match linalg::orthonormal_columns(&q_mat) {
                Some(o) => q_mat = o,
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            return Ok(q_mat);
        }
    }
    Err(Error::NonConvergence {
        residual: f64::NAN,
        iterations: q,
    })
}

/// `Σ_i Σ_{v∈C_i} (f_v − μ_i)(f_v − μ_i)ᵀ` as a `k × k` matrix.
fn scatter(emb: &SpectralEmbedding, means: &ClusterMeans, iota: &Labeling) -> DMatrix<f64> {
    let k = emb.k();
    let mut s = DMatrix::zeros(k, k);
    let mut diff = vec![0.0; k];
    for u in 0..emb.n() {
        let mu = &means.means[iota.get(u)];
        for c in 0..k {
            diff[c] = emb.row(u)[c] - mu[c];
        }
        for a in 0..k {
            for b in 0..k {
                s[(a, b)] += diff[a] * diff[b];
            }
        }
    }
    s
}

/// `Σ_i Σ_{v∈C_i} ‖f_v − μ_i‖²`.
pub fn total_variance(emb: &SpectralEmbedding, means: &ClusterMeans, iota: &Labeling) -> f64 {
    scatter(emb, means, iota).trace()
}

/// Largest ratio of `Σ ⟨f_v − μ_i, α⟩²` to `4ε/φ²` over `trials` random
/// unit directions `α`.
///
/// When `ε = 0` the ratio is 0 if the numerator vanishes (to 1e-20) and
/// infinite otherwise.
pub fn variance_bound_check(
    emb: &SpectralEmbedding,
    means: &ClusterMeans,
    iota: &Labeling,
    eps: f64,
    phi: f64,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    if trials == 0 {
        return Err(Error::Parameter("trials must be at least 1".into()));
    }
    let s = scatter(emb, means, iota);
    let k = emb.k();
    let bound = 4.0 * eps / (phi * phi);
    let mut r = rng::rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let mut alpha: Vec<f64> = (0..k).map(|_| r.sample(StandardNormal)).collect();
        let norm = linalg::norm(&alpha);
        alpha.iter_mut().for_each(|a| *a /= norm);
        let mut num = 0.0;
        for a in 0..k {
            for b in 0..k {
                num += alpha[a] * s[(a, b)] * alpha[b];
            }
        }
        let ratio = if bound > 0.0 {
            num / bound
        } else if num <= 1e-20 {
            0.0
        } else {
            f64::INFINITY
        };
        worst = worst.max(ratio);
    }
    Ok(worst)
}

/// `‖f_v − (1/d) Σ_{w∈N(v)} f_w‖`, self-loops contributing `f_v`.
pub fn neighbor_average_gap(graph: &RegularGraph, emb: &SpectralEmbedding, v: usize) -> f64 {
    let k = emb.k();
    let d = graph.d() as f64;
    let fv = emb.row(v);
    let mut avg: Vec<f64> = fv.iter().map(|x| x * graph.self_loops(v) as f64).collect();
    for &w in graph.neighbors(v) {
        for (a, b) in avg.iter_mut().zip(emb.row(w)) {
            *a += b;
        }
    }
    (0..k).map(|c| (fv[c] - avg[c] / d).powi(2)).sum::<f64>().sqrt()
}

const CACHE_MAGIC: &[u8; 8] = b"SPEMB001";

fn cache_path(dir: &Path, graph: &RegularGraph, k: usize) -> PathBuf {
    dir.join(format!("{}-k{k}.emb", graph.content_hash()))
}

/// Writes `magic, n, k, row-major f64 rows, eigenvalue count, eigenvalues`,
/// all little-endian.
pub fn write_embedding(emb: &SpectralEmbedding, path: &Path) -> Result<()> {
    let mut buf = Vec::with_capacity(32 + 8 * (emb.rows.len() + emb.eigenvalues.len()));
    buf.extend_from_slice(CACHE_MAGIC);
    buf.extend_from_slice(&(emb.n() as u64).to_le_bytes());
    buf.extend_from_slice(&(emb.k as u64).to_le_bytes());
    for x in &emb.rows {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    buf.extend_from_slice(&(emb.eigenvalues.len() as u64).to_le_bytes());
    for x in &emb.eigenvalues {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    fs::File::create(path)?.write_all(&buf)?;
    Ok(())
}

pub fn read_embedding(path: &Path) -> Result<SpectralEmbedding> {
    let mut buf = Vec::new();
    fs::File::open(path)?.read_to_end(&mut buf)?;
    let bad = |msg: &str| Error::Parse {
        line: 0,
        msg: format!("{}: {msg}", path.display()),
    };
    if buf.len() < 24 || &buf[..8] != CACHE_MAGIC {
        return Err(bad("not an embedding cache file"));
    }
    let mut words = buf[8..].chunks_exact(8).map(|c| <[u8; 8]>::try_from(c).unwrap());
    let mut next_u64 = || words.next().map(u64::from_le_bytes);
    let n = next_u64().ok_or_else(|| bad("truncated"))? as usize;
    let k = next_u64().ok_or_else(|| bad("truncated"))? as usize;
    let mut rows = Vec::with_capacity(n * k);
    for _ in 0..n * k {
        rows.push(f64::from_bits(next_u64().ok_or_else(|| bad("truncated"))?));
    }
    let m = next_u64().ok_or_else(|| bad("truncated"))? as usize;
    let mut eigenvalues = Vec::with_capacity(m);
    for _ in 0..m {
        eigenvalues.push(f64::from_bits(next_u64().ok_or_else(|| bad("truncated"))?));
    }
    let basis = DMatrix::from_row_slice(n, k, &rows);
    SpectralEmbedding::from_parts(basis, eigenvalues)
}

/// [`embed`] backed by an on-disk cache keyed by graph hash and `k`.
pub fn embed_cached(graph: &RegularGraph, k: usize, dir: &Path) -> Result<SpectralEmbedding> {
    let path = cache_path(dir, graph, k);
    if let Ok(emb) = read_embedding(&path) {
        if emb.n() == graph.n() && emb.k() == k {
            return Ok(emb);
        }
    }
    let emb = embed(graph, k)?;
    fs::create_dir_all(dir)?;
    write_embedding(&emb, &path)?;
    Ok(emb)
}
