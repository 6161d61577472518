//! Symmetric eigensolvers.
//!
//! Small problems go through nalgebra's dense symmetric eigendecomposition.
//! Larger ones use a Lanczos iteration with full reorthogonalization,
//! locking of converged Ritz pairs, and a final verification sweep that
//! catches eigenvalues a single Krylov space can miss (repeated eigenvalues
//! from disconnected components are the usual culprit).

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng;

/// Above this dimension [`smallest_eigenpairs`] switches to Lanczos.
pub const DENSE_LIMIT: usize = 1200;

/// A real symmetric linear operator given by its action on vectors.
pub trait SymmetricOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);

    fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        let mut y = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            self.apply(&e, &mut y);
            e[j] = 0.0;
            for i in 0..n {
                m[(i, j)] = y[i];
            }
        }
        m
    }
}

impl SymmetricOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.nrows();
        for (i, yi) in y.iter_mut().enumerate().take(n) {
            *yi = 0.0;
            for j in 0..n {
                *yi += self[(i, j)] * x[j];
            }
        }
    }

    fn to_dense(&self) -> DMatrix<f64> {
        self.clone()
    }
}

/// Eigenvalues in ascending order with matching eigenvector columns.
#[derive(Clone, Debug)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl EigenPairs {
    /// Largest residual `‖A v − λ v‖` over the stored pairs.
    pub fn max_residual(&self, op: &dyn SymmetricOperator) -> f64 {
        let n = op.dim();
        let mut y = vec![0.0; n];
        let mut worst: f64 = 0.0;
        for (c, &lambda) in self.values.iter().enumerate() {
            let v: Vec<f64> = self.vectors.column(c).iter().copied().collect();
            op.apply(&v, &mut y);
            let r = y
                .iter()
                .zip(&v)
                .map(|(a, b)| (a - lambda * b).powi(2))
                .sum::<f64>()
                .sqrt();
            worst = worst.max(r);
        }
        worst
    }
}

#[derive(Clone, Debug)]
pub struct LanczosOptions {
    /// Residual tolerance `‖A y − θ y‖` for accepting a Ritz pair.
    pub tol: f64,
    /// Maximum Krylov basis size per run.
    pub max_basis: usize,
    /// Explicit restarts allowed when a run locks nothing.
    pub max_restarts: usize,
    /// Run an extra sweep orthogonal to the locked vectors to catch
    /// eigenvalues missed by earlier runs.
    pub verify: bool,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_basis: 400,
            max_restarts: 40,
            verify: true,
            seed: 0x5eed,
        }
    }
}

/// The `count` smallest eigenpairs, dense below [`DENSE_LIMIT`].
pub fn smallest_eigenpairs(
    op: &dyn SymmetricOperator,
    count: usize,
    seed: u64,
) -> Result<EigenPairs> {
    if op.dim() <= DENSE_LIMIT {
        Ok(dense_smallest(op.to_dense(), count))
    } else {
        let opts = LanczosOptions {
            seed,
            ..LanczosOptions::default()
        };
        lanczos_smallest(op, count, None, &opts, None)
    }
}

pub fn dense_smallest(mat: DMatrix<f64>, count: usize) -> EigenPairs {
    let n = mat.nrows();
    let count = count.min(n);
    // nalgebra's symmetric QR stalls around 1e-8 residuals on some graph
    // Laplacians; faer's divide and conquer does not.
    let m = faer::Mat::<f64>::from_fn(n, n, |i, j| 0.5 * (mat[(i, j)] + mat[(j, i)]));
    let eig = m
        .self_adjoint_eigen(faer::Side::Lower)
        .expect("symmetric eigendecomposition of a finite matrix");
    let (u, s) = (eig.U(), eig.S().column_vector());
    let values = (0..count).map(|c| s[c]).collect();
    let vectors = DMatrix::from_fn(n, count, |i, c| u[(i, c)]);
    EigenPairs { values, vectors }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Two passes of classical Gram–Schmidt against every vector in `sets`.
fn orthogonalize(w: &mut [f64], sets: &[&[Vec<f64>]]) {
    for _ in 0..2 {
        for set in sets {
            for q in set.iter() {
                let c = dot(q, w);
                axpy(-c, q, w);
            }
        }
    }
}

fn random_start(n: usize, rng: &mut rng::Rng, sets: &[&[Vec<f64>]]) -> Option<Vec<f64>> {
    for _ in 0..8 {
        let mut v: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        orthogonalize(&mut v, sets);
        let nv = norm(&v);
        if nv > 1e-8 {
            v.iter_mut().for_each(|x| *x /= nv);
            return Some(v);
        }
    }
    None
}

struct RunResult {
    values: Vec<f64>,
    vectors: Vec<Vec<f64>>,
    residuals: Vec<f64>,
    steps: usize,
}

/// One Lanczos run from `start`, kept orthogonal to `constraints`.
/// Returns up to `want` leading Ritz pairs with explicit residuals.
fn lanczos_run(
    op: &dyn SymmetricOperator,
    start: Vec<f64>,
    constraints: &[&[Vec<f64>]],
    want: usize,
    tol: f64,
    max_basis: usize,
) -> RunResult {
    let n = op.dim();
    let constrained: usize = constraints.iter().map(|s| s.len()).sum();
    let krylov_cap = n.saturating_sub(constrained).max(1).min(max_basis.max(want + 1));
    let mut basis: Vec<Vec<f64>> = vec![start];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];

    loop {
        let j = basis.len() - 1;
        op.apply(&basis[j], &mut w);
        let alpha = dot(&basis[j], &w);
        axpy(-alpha, &basis[j], &mut w);
        if j > 0 {
            axpy(-betas[j - 1], &basis[j - 1], &mut w);
        }
        let mut sets: Vec<&[Vec<f64>]> = constraints.to_vec();
        sets.push(&basis);
        orthogonalize(&mut w, &sets);
        let beta = norm(&w);
        alphas.push(alpha);
        let m = alphas.len();
        let exhausted = beta < 1e-10 || m >= krylov_cap;
        if exhausted || (m >= want && m.is_multiple_of(10)) {
            let (_, s) = tridiagonal_eigen(&alphas, &betas);
            let leading_converged = (0..want.min(m))
                .take_while(|&i| (beta * s[(m - 1, i)]).abs() <= tol * 0.1)
                .count();
            if exhausted || leading_converged >= want {
                break;
            }
        }
        betas.push(beta);
        let next: Vec<f64> = w.iter().map(|x| x / beta).collect();
        basis.push(next);
    }

    let m = alphas.len();
    let (theta, s) = tridiagonal_eigen(&alphas, &betas[..m - 1]);
    let take = want.min(m);
    let mut vectors = Vec::with_capacity(take);
    let mut residuals = Vec::with_capacity(take);
    let mut y = vec![0.0; n];
    for i in 0..take {
        let mut v = vec![0.0; n];
        for (jj, q) in basis.iter().enumerate().take(m) {
            axpy(s[(jj, i)], q, &mut v);
        }
        let nv = norm(&v);
        v.iter_mut().for_each(|x| *x /= nv);
        op.apply(&v, &mut y);
        // The iteration acts as the operator compressed to the complement
        // of the constraints, so measure the residual there too.
        orthogonalize(&mut y, constraints);
        let r = y
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - theta[i] * b).powi(2))
            .sum::<f64>()
            .sqrt();
        vectors.push(v);
        residuals.push(r);
    }
    RunResult {
        values: theta[..take].to_vec(),
        vectors,
        residuals,
        steps: m,
    }
}

/// Eigen-decomposition of the symmetric tridiagonal matrix, ascending.
fn tridiagonal_eigen(alphas: &[f64], betas: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
    let m = alphas.len();
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alphas[i];
        if i + 1 < m {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let pairs = dense_smallest(t, m);
    (pairs.values, pairs.vectors)
}

/// The `count` smallest eigenpairs of `op` restricted to the orthogonal
/// complement of the columns of `deflate` (which must be orthonormal).
///
/// `warm` seeds the first run; later runs start from seeded random vectors.
pub fn lanczos_smallest(
    op: &dyn SymmetricOperator,
    count: usize,
    deflate: Option<&DMatrix<f64>>,
    opts: &LanczosOptions,
    warm: Option<&[f64]>,
) -> Result<EigenPairs> {
    let n = op.dim();
    let fixed: Vec<Vec<f64>> = deflate
        .map(|d| {
            (0..d.ncols())
                .map(|c| d.column(c).iter().copied().collect())
                .collect()
        })
        .unwrap_or_default();
    let available = n.saturating_sub(fixed.len());
    if count > available {
        return Err(Error::Parameter(format!(
            "requested {count} eigenpairs from a space of dimension {available}"
        )));
    }
    let mut rng = rng::rng(rng::substream(opts.seed, rng::streams::LANCZOS));
    let mut locked_vals: Vec<f64> = Vec::new();
    let mut locked_vecs: Vec<Vec<f64>> = Vec::new();
    let mut restarts = 0usize;
    let mut iterations = 0usize;
    let mut carry: Option<Vec<f64>> = warm.map(|w| w.to_vec());
    let mut worst_residual = f64::INFINITY;

    let start_vector =
        |carry: &mut Option<Vec<f64>>, rng: &mut rng::Rng, locked: &[Vec<f64>]| -> Option<Vec<f64>> {
            if let Some(mut v) = carry.take() {
                orthogonalize(&mut v, &[&fixed, locked]);
                let nv = norm(&v);
                if nv > 1e-8 {
                    v.iter_mut().for_each(|x| *x /= nv);
                    return Some(v);
                }
            }
            random_start(n, rng, &[&fixed, locked])
        };

    while locked_vals.len() < count {
        let want = count - locked_vals.len();
        let Some(start) = start_vector(&mut carry, &mut rng, &locked_vecs) else {
            break;
        };
        let run = lanczos_run(
            op,
            start,
            &[&fixed, &locked_vecs],
            want,
            opts.tol,
            opts.max_basis,
        );
        iterations += run.steps;
        let accepted = run.residuals.iter().take_while(|&&r| r <= opts.tol).count();
        if accepted == 0 {
            worst_residual = run.residuals.first().copied().unwrap_or(f64::INFINITY);
            restarts += 1;
            if restarts > opts.max_restarts {
                return Err(Error::NonConvergence {
                    residual: worst_residual,
                    iterations,
                });
            }
            carry = run.vectors.into_iter().next();
            continue;
        }
        for (val, vec) in run.values.into_iter().zip(run.vectors).take(accepted) {
            locked_vals.push(val);
            locked_vecs.push(vec);
        }
        carry = None;
    }

    if opts.verify && count < available {
        // Search the complement for anything below the largest locked value.
        let mut rounds = 0;
        loop {
            rounds += 1;
            let Some(start) = random_start(n, &mut rng, &[&fixed, &locked_vecs]) else {
                break;
            };
            let run = lanczos_run(op, start, &[&fixed, &locked_vecs], 1, opts.tol, opts.max_basis);
            iterations += run.steps;
            let (Some(&theta), Some(&res)) = (run.values.first(), run.residuals.first()) else {
                break;
            };
            let top = locked_vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            // Ritz values bound the true minimum from above, so anything
            // clearly below `top` is a genuinely missed eigenvalue.
            if theta < top - 10.0 * opts.tol && res <= opts.tol {
                let worst = locked_vals
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(b.1))
                    .map(|(i, _)| i)
                    .unwrap();
                locked_vals.remove(worst);
                locked_vecs.remove(worst);
                locked_vals.push(theta);
                locked_vecs.push(run.vectors.into_iter().next().unwrap());
                if rounds < 4 * count + 4 {
                    continue;
                }
            } else if theta < top - 10.0 * opts.tol && rounds < 4 * count + 4 {
                // Unconverged but suspicious: loop again with a fresh start.
                continue;
            }
            break;
        }
    }

    let mut order: Vec<usize> = (0..locked_vals.len()).collect();
    order.sort_by(|&a, &b| locked_vals[a].total_cmp(&locked_vals[b]));
    let mut vectors = DMatrix::zeros(n, order.len());
    let mut values = Vec::with_capacity(order.len());
    for (c, &i) in order.iter().enumerate() {
        values.push(locked_vals[i]);
        for r in 0..n {
            vectors[(r, c)] = locked_vecs[i][r];
        }
    }
    if values.len() < count {
        return Err(Error::NonConvergence {
            residual: worst_residual,
            iterations,
        });
    }
    Ok(EigenPairs { values, vectors })
}

/// Orthonormalize the columns of `m` (thin QR). Returns `None` when the
/// columns are numerically rank deficient.
pub fn orthonormal_columns(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let k = m.ncols();
    let qr = m.clone().qr();
    let r = qr.r();
    let scale = (0..k).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if scale == 0.0 || (0..k).any(|i| r[(i, i)].abs() <= 1e-10 * scale) {
        return None;
    }
    Some(qr.q())
}

/// Operator-norm distance `‖Q Qᵀ − U Uᵀ‖` between the projections onto
/// the column spans of two matrices with orthonormal columns of equal rank.
pub fn projection_distance(q: &DMatrix<f64>, u: &DMatrix<f64>) -> f64 {
    let residual = q - u * (u.transpose() * q);
    let a = residual.clone().svd(false, false).singular_values.max();
    let residual_b = u - q * (q.transpose() * u);
    let b = residual_b.svd(false, false).singular_values.max();
    a.max(b)
}
