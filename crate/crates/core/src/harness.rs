//! Experiment configuration, (ε, δ) sweeps and CSV output.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{
    baseline_majority, baseline_majority_pp, baseline_naive_spectral, best_matching, misclassification, walk_length,
    ClassifierOutput, ClassifyContext, SpectralLabeling,
};
use crate::error::{Error, Result};
use crate::graph::{
    generate_planted, generate_uninformative_middle, perturb_labels, Labeling, PerturbMode, PlantedInstance,
    RegularGraph,
};
use crate::oracle::{approx_means, make_oracle, Backend, EmbeddingOracle};
use crate::rng;
use crate::spectral::{
    cluster_means, embed, embed_cached, neighbor_average_gap, variance_bound_check, SpectralEmbedding,
};

/// Caps the worker pool of [`run_sweep`].
pub const THREADS_ENV: &str = "SPECSIDE_THREADS";

/// Default absolute noise budget per vertex for the noisy backend.
pub const DEFAULT_XI_PER_VERTEX: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    /// The input labels unchanged.
    LabelsOnly,
    NaiveSpectral,
    Majority,
    MajorityPp,
    Polytime,
    Walk,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 6] = [
        ClassifierKind::LabelsOnly,
        ClassifierKind::NaiveSpectral,
        ClassifierKind::Majority,
        ClassifierKind::MajorityPp,
        ClassifierKind::Polytime,
        ClassifierKind::Walk,
    ];

    /// Whether the output needs the oracle, approximate means and `τ`.
    pub fn needs_spectral(self) -> bool {
        matches!(
            self,
            ClassifierKind::NaiveSpectral | ClassifierKind::Polytime | ClassifierKind::Walk
        )
    }

    /// Baselines have no recovered permutation and are scored after
    /// optimal matching; the identity classifier is scored as is.
    pub fn matched(self) -> bool {
        matches!(
            self,
            ClassifierKind::NaiveSpectral | ClassifierKind::Majority | ClassifierKind::MajorityPp
        )
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassifierKind::LabelsOnly => "labels_only",
            ClassifierKind::NaiveSpectral => "naive_spectral",
            ClassifierKind::Majority => "majority",
            ClassifierKind::MajorityPp => "majority_pp",
            ClassifierKind::Polytime => "polytime",
            ClassifierKind::Walk => "walk",
        })
    }
}

impl std::str::FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ClassifierKind::ALL
            .into_iter()
            .find(|c| c.to_string() == s)
            .ok_or_else(|| Error::Config(format!("unknown classifier `{s}`")))
    }
}

/// Instance family. The swept `ε` values come from [`ExperimentConfig::eps`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorSpec {
    Planted {
        n: usize,
        k: usize,
        d: usize,
        #[serde(default = "one")]
        eta: f64,
    },
    UninformativeMiddle { n: usize, d: usize },
}

fn one() -> f64 {
    1.0
}

impl GeneratorSpec {
    pub fn generate(&self, eps: f64, seed: u64) -> Result<PlantedInstance> {
        match *self {
            GeneratorSpec::Planted { n, k, d, eta } => generate_planted(n, k, d, eps, eta, seed),
            GeneratorSpec::UninformativeMiddle { n, d } => generate_uninformative_middle(n, d, eps, seed),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            GeneratorSpec::Planted { .. } => "planted",
            GeneratorSpec::UninformativeMiddle { .. } => "uninformative_middle",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    pub backend: Backend,
    /// Noise budget `ξ`; `n · 1e-10` when absent.
    #[serde(default)]
    pub xi: Option<f64>,
}

impl Default for OracleSpec {
    fn default() -> Self {
        Self {
            backend: Backend::Exact,
            xi: None,
        }
    }
}

impl OracleSpec {
    pub fn xi_for(&self, n: usize) -> f64 {
        self.xi.unwrap_or(n as f64 * DEFAULT_XI_PER_VERTEX)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub generator: GeneratorSpec,
    /// Target `ε` values passed to the generator.
    pub eps: Vec<f64>,
    pub deltas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub classifiers: Vec<ClassifierKind>,
    #[serde(default)]
    pub oracle: OracleSpec,
    #[serde(default = "uniform_wrong")]
    pub perturb: PerturbMode,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Setting violations become errors instead of warnings.
    #[serde(default)]
    pub strict: bool,
    /// Fill `runtime_ms`; leaves the CSV nondeterministic.
    #[serde(default)]
    pub record_runtime: bool,
    /// Directory for cached embeddings.
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
}

fn uniform_wrong() -> PerturbMode {
    PerturbMode::UniformWrong
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.eps.is_empty() || self.deltas.is_empty() || self.seeds.is_empty() || self.classifiers.is_empty() {
            return bad("eps, deltas, seeds and classifiers must be nonempty".into());
        }
        if let Some(e) = self.eps.iter().find(|e| !(0.0..0.5).contains(*e)) {
            return bad(format!("eps = {e} outside [0, 1/2)"));
        }
        if let Some(d) = self.deltas.iter().find(|d| !(0.0..=1.0).contains(*d)) {
            return bad(format!("delta = {d} outside [0, 1]"));
        }
        if let Some(xi) = self.oracle.xi {
            if !(xi >= 0.0 && xi.is_finite()) {
                return bad(format!("xi = {xi} must be finite and nonnegative"));
            }
        }
        let k = match self.generator {
            GeneratorSpec::Planted { k, .. } => k,
            GeneratorSpec::UninformativeMiddle { .. } => 2,
        };
        if k != 2 && self.classifiers.contains(&ClassifierKind::MajorityPp) {
            return bad(format!("majority_pp needs k = 2, generator has k = {k}"));
        }
        Ok(())
    }
}

/// Parameters checked against the admissible setting.
#[derive(Clone, Debug)]
pub struct SettingParams {
    pub n: usize,
    pub k: usize,
    pub d: usize,
    /// Outer conductance, when the ground truth is known.
    pub eps: Option<f64>,
    pub phi: f64,
    pub eta: f64,
    pub delta: f64,
    pub xi: f64,
    /// `min_i ‖μ_i‖²`, when the ground truth is known.
    pub min_mean_norm_sq: Option<f64>,
}

/// Human-readable descriptions of every violated setting constraint.
pub fn setting_violations(p: &SettingParams) -> Vec<String> {
    let mut out = Vec::new();
    let mut check = |ok: bool, msg: String| {
        if !ok {
            out.push(msg);
        }
    };
    check(p.d >= 3, format!("d = {} < 3", p.d));
    check(p.k >= 2, format!("k = {} < 2", p.k));
    check(p.phi > 0.0 && p.phi < 1.0, format!("phi = {} outside (0, 1)", p.phi));
    check(p.delta > 0.0 && p.delta < 1.0, format!("delta = {} outside (0, 1)", p.delta));
    check(p.xi < 1.0, format!("xi = {} not below 1", p.xi));
    let phi2eta = p.phi * p.phi * p.eta;
    check(phi2eta < 1e-3, format!("phi^2 eta = {phi2eta:.3e} not below 1e-3"));
    if let Some(eps) = p.eps {
        check(eps > 0.0 && eps < 1.0, format!("eps = {eps} outside (0, 1)"));
        let eps_phi6 = eps / p.phi.powi(6);
        let cap = 1e-5 / p.eta.powi(4);
        check(eps_phi6 <= cap, format!("eps/phi^6 = {eps_phi6:.3e} exceeds 1e-5/eta^4 = {cap:.3e}"));
        let kk = p.k as f64 * (p.k as f64).ln();
        let kcap = p.phi.powi(6) / (1e9 * p.eta.powi(4) * eps);
        check(kk <= kcap, format!("k ln k = {kk:.3} exceeds phi^6/(1e9 eta^4 eps) = {kcap:.3e}"));
    }
    let dd = p.delta * p.d as f64;
    check(dd <= 0.01, format!("delta d = {dd:.3} exceeds 1/100"));
    if let Some(m) = p.min_mean_norm_sq {
        let lhs = p.xi / p.n as f64;
        let rhs = p.phi * p.phi / (20f64.powi(4) * p.eta) * m;
        check(lhs <= rhs, format!("xi/n = {lhs:.3e} exceeds phi^2/(20^4 eta) min|mu|^2 = {rhs:.3e}"));
    }
    out
}

/// Spectral facts every clusterable instance must satisfy.
#[derive(Clone, Debug, Serialize)]
pub struct InvariantReport {
    pub n: usize,
    pub k: usize,
    pub eps_measured: f64,
    pub phi_certified: f64,
    pub lambda_k: f64,
    pub lambda_k1: f64,
    /// Worst ratio from [`variance_bound_check`].
    pub variance_ratio: f64,
    /// Largest `‖f_v − avg_N(v) f‖ − 2ε‖f_v‖` over vertices.
    pub neighbor_excess: f64,
    pub violations: Vec<String>,
}

/// Checks `λ_k ≤ 2ε`, `λ_{k+1} ≥ φ²/2`, the directional variance bound and
/// the neighbor-average bound (slack 1e-9).
pub fn verify_instance(inst: &PlantedInstance, emb: &SpectralEmbedding, trials: usize, seed: u64) -> Result<InvariantReport> {
    let k = inst.k;
    let eps = inst.eps_measured;
    let phi = inst.phi_certified;
    let lambda_k = emb.eigenvalues()[k - 1];
    let lambda_k1 = emb.eigenvalues()[k];
    let means = cluster_means(emb, &inst.iota)?;
    let variance_ratio = variance_bound_check(emb, &means, &inst.iota, eps, phi, trials, seed)?;
    let neighbor_excess = (0..inst.graph.n())
        .map(|v| neighbor_average_gap(&inst.graph, emb, v) - 2.0 * eps * emb.norm_sq(v).sqrt())
        .fold(f64::NEG_INFINITY, f64::max);
    let mut violations = Vec::new();
    if lambda_k > 2.0 * eps {
        violations.push(format!("lambda_k = {lambda_k:.6e} exceeds 2 eps = {:.6e}", 2.0 * eps));
    }
    if lambda_k1 < phi * phi / 2.0 {
        violations.push(format!("lambda_k+1 = {lambda_k1:.6e} below phi^2/2 = {:.6e}", phi * phi / 2.0));
    }
    if variance_ratio > 1.0 {
        violations.push(format!("variance ratio {variance_ratio:.6} exceeds 1"));
    }
    if neighbor_excess > 1e-9 {
        violations.push(format!("neighbor-average gap exceeds 2 eps |f_v| by {neighbor_excess:.3e}"));
    }
    Ok(InvariantReport {
        n: inst.graph.n(),
        k,
        eps_measured: eps,
        phi_certified: phi,
        lambda_k,
        lambda_k1,
        variance_ratio,
        neighbor_excess,
        violations,
    })
}

/// One CSV line. Field names are the column names.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResultRow {
    pub gen: String,
    pub n: usize,
    pub k: usize,
    pub d: usize,
    pub eps_measured: Option<f64>,
    pub phi_certified: Option<f64>,
    pub eta: Option<f64>,
    pub delta: f64,
    pub seed: u64,
    pub classifier: String,
    pub rate: Option<f64>,
    pub rate_middle: Option<f64>,
    pub runtime_ms: Option<u64>,
    pub branch_agree: Option<usize>,
    pub branch_ambiguous: Option<usize>,
    pub branch_impostor: Option<usize>,
    pub branch_trust_spectral: Option<usize>,
    pub error: String,
}

pub const CSV_HEADER: &str = "gen,n,k,d,eps_measured,phi_certified,eta,delta,seed,classifier,rate,rate_middle,runtime_ms,branch_agree,branch_ambiguous,branch_impostor,branch_trust_spectral,error";

#[derive(Clone, Debug, Default)]
pub struct SweepOutput {
    pub rows: Vec<SweepResultRow>,
    pub warnings: Vec<String>,
}

/// Labels plus the spectral side information derived from them.
pub struct SpectralSide {
    pub oracle: EmbeddingOracle,
    pub tau: SpectralLabeling,
}

/// Builds the oracle, approximate means and `τ` for one labeling.
pub fn spectral_side(
    emb: Arc<SpectralEmbedding>,
    oracle: &OracleSpec,
    sigma: &Labeling,
    phi: f64,
    eta: f64,
    seed: u64,
) -> Result<SpectralSide> {
    let n = emb.n();
    let oracle = make_oracle(emb, oracle.backend, oracle.xi_for(n), rng::substream(seed, rng::streams::ORACLE_NOISE))?;
    let means = approx_means(&oracle, sigma, eta, phi, rng::substream(seed, rng::streams::MEANS))?;
    let tau = SpectralLabeling::compute(&oracle, &means, phi, eta)?;
    Ok(SpectralSide { oracle, tau })
}

/// Runs one classifier over every vertex.
pub fn run_classifier(
    kind: ClassifierKind,
    g: &RegularGraph,
    sigma: &Labeling,
    tau: Option<&SpectralLabeling>,
    phi: f64,
    delta: f64,
    seed: u64,
) -> Result<(Labeling, Option<[usize; 4]>)> {
    let n = g.n();
    let k = sigma.k();
    let need_tau = || tau.ok_or_else(|| Error::Invariant(format!("{kind} needs spectral labels")));
    let from = |labels: Vec<usize>| Labeling::new(labels, k);
    let with_hist = |out: ClassifierOutput| {
        let h = out.histogram();
        (out.labels, Some(h))
    };
    Ok(match kind {
        ClassifierKind::LabelsOnly => (sigma.clone(), None),
        ClassifierKind::Majority => (from((0..n).map(|u| baseline_majority(g, sigma, u)).collect())?, None),
        ClassifierKind::MajorityPp => (
            from((0..n).map(|u| baseline_majority_pp(g, sigma, phi, u)).collect::<Result<_>>()?)?,
            None,
        ),
        ClassifierKind::NaiveSpectral => {
            let tau = need_tau()?;
            (from((0..n).map(|u| baseline_naive_spectral(tau, sigma, u)).collect())?, None)
        }
        ClassifierKind::Polytime => {
            let ctx = ClassifyContext::new(g, sigma, need_tau()?, phi)?;
            with_hist(ctx.classify_polytime_all()?)
        }
        ClassifierKind::Walk => {
            let ctx = ClassifyContext::new(g, sigma, need_tau()?, phi)?;
            let len = walk_length(phi, delta);
            with_hist(ctx.classify_walk_all(len, rng::substream(seed, rng::streams::WALKS))?)
        }
    })
}

/// Overall and middle-restricted error, after matching when `kind` asks
/// for it.
pub fn score(kind: ClassifierKind, labels: &Labeling, inst: &PlantedInstance) -> (f64, Option<f64>) {
    let map: Vec<usize> = if kind.matched() {
        best_matching(labels, &inst.iota)
    } else {
        (0..labels.k().max(inst.iota.k())).collect()
    };
    let wrong = |u: usize| map[labels.get(u)] != inst.iota.get(u);
    let rate = if kind.matched() {
        (0..labels.len()).filter(|&u| wrong(u)).count() as f64 / labels.len() as f64
    } else {
        misclassification(labels, &inst.iota)
    };
    let middle = (!inst.middle.is_empty())
        .then(|| inst.middle.iter().filter(|&&u| wrong(u)).count() as f64 / inst.middle.len() as f64);
    (rate, middle)
}

fn base_row(cfg: &ExperimentConfig, inst: Option<&PlantedInstance>, delta: f64, seed: u64, kind: ClassifierKind) -> SweepResultRow {
    let (n, k, d) = match (inst, &cfg.generator) {
        (Some(i), _) => (i.graph.n(), i.k, i.graph.d()),
        (None, GeneratorSpec::Planted { n, k, d, .. }) => (*n, *k, *d),
        (None, GeneratorSpec::UninformativeMiddle { n, d }) => (*n, 2, *d),
    };
    SweepResultRow {
        gen: cfg.generator.name().to_string(),
        n,
        k,
        d,
        eps_measured: inst.map(|i| i.eps_measured),
        phi_certified: inst.map(|i| i.phi_certified),
        eta: inst.map(|i| i.eta),
        delta,
        seed,
        classifier: kind.to_string(),
        rate: None,
        rate_middle: None,
        runtime_ms: None,
        branch_agree: None,
        branch_ambiguous: None,
        branch_impostor: None,
        branch_trust_spectral: None,
        error: String::new(),
    }
}

fn error_tag(e: &Error) -> String {
    let kind = match e {
        Error::Sampling(_) => "sampling",
        Error::NonConvergence { .. } => "non_convergence",
        Error::Parameter(_) | Error::Config(_) => "parameter",
        Error::Domain(_) => "domain",
        Error::Invariant(_) => "invariant",
        _ => "other",
    };
    // Commas and newlines would break the CSV cell for naive readers.
    format!("{kind}: {e}").replace([',', '\n'], ";")
}

/// Rows and warnings for one generated instance (one `(ε, seed)` cell),
/// ordered by `(δ, classifier)` as listed in the config.
fn run_instance(cfg: &ExperimentConfig, eps: f64, seed: u64) -> Result<SweepOutput> {
    let mut out = SweepOutput::default();
    let fail_all = |out: &mut SweepOutput, inst: Option<&PlantedInstance>, e: &Error| {
        for &delta in &cfg.deltas {
            for &kind in &cfg.classifiers {
                let mut row = base_row(cfg, inst, delta, seed, kind);
                row.error = error_tag(e);
                out.rows.push(row);
            }
        }
    };
    let inst = match cfg.generator.generate(eps, seed) {
        Ok(i) => i,
        Err(e) => {
            fail_all(&mut out, None, &e);
            return Ok(out);
        }
    };
    let k = inst.k;
    let emb = match &cfg.cache_dir {
        Some(dir) => embed_cached(&inst.graph, k, dir),
        None => embed(&inst.graph, k),
    };
    let emb = match emb {
        Ok(e) => Arc::new(e),
        Err(e) => {
            fail_all(&mut out, Some(&inst), &e);
            return Ok(out);
        }
    };
    let min_mean_norm_sq = cluster_means(&emb, &inst.iota)
        .ok()
        .map(|m| (0..k).map(|i| m.norm_sq(i)).fold(f64::INFINITY, f64::min));
    let xi = match cfg.oracle.backend {
        Backend::Exact => 0.0,
        Backend::Noisy => cfg.oracle.xi_for(inst.graph.n()),
    };

    for (di, &delta) in cfg.deltas.iter().enumerate() {
        let violations = setting_violations(&SettingParams {
            n: inst.graph.n(),
            k,
            d: inst.graph.d(),
            eps: Some(inst.eps_measured),
            phi: inst.phi_certified,
            eta: inst.eta,
            delta,
            xi,
            min_mean_norm_sq,
        });
        if !violations.is_empty() {
            let msg = format!(
                "{} eps={eps} seed={seed} delta={delta}: {}",
                cfg.generator.name(),
                violations.join("; ")
            );
            if cfg.strict {
                return Err(Error::Invariant(format!("setting violated: {msg}")));
            }
            out.warnings.push(msg);
        }

        let cell_seed = rng::substream(seed, 1000 + di as u64);
        let sigma = match perturb_labels(&inst.iota, delta, cfg.perturb, rng::substream(cell_seed, rng::streams::PERTURBATION)) {
            Ok(s) => s,
            Err(e) => {
                for &kind in &cfg.classifiers {
                    let mut row = base_row(cfg, Some(&inst), delta, seed, kind);
                    row.error = error_tag(&e);
                    out.rows.push(row);
                }
                continue;
            }
        };
        let needs_side = cfg.classifiers.iter().any(|c| c.needs_spectral());
        let side_start = Instant::now();
        let side = needs_side.then(|| spectral_side(emb.clone(), &cfg.oracle, &sigma, inst.phi_certified, inst.eta, cell_seed));
        let side_ms = side_start.elapsed().as_millis() as u64;

        for &kind in &cfg.classifiers {
            let mut row = base_row(cfg, Some(&inst), delta, seed, kind);
            let tau = match (&side, kind.needs_spectral()) {
                (Some(Err(e)), true) => {
                    row.error = error_tag(e);
                    out.rows.push(row);
                    continue;
                }
                (Some(Ok(s)), _) => Some(&s.tau),
                _ => None,
            };
            let start = Instant::now();
            match run_classifier(kind, &inst.graph, &sigma, tau, inst.phi_certified, delta, cell_seed) {
                Ok((labels, hist)) => {
                    let (rate, middle) = score(kind, &labels, &inst);
                    row.rate = Some(rate);
                    row.rate_middle = middle;
                    if let Some(h) = hist {
                        row.branch_agree = Some(h[0]);
                        row.branch_ambiguous = Some(h[1]);
                        row.branch_impostor = Some(h[2]);
                        row.branch_trust_spectral = Some(h[3]);
                    }
                }
                Err(e) => row.error = error_tag(&e),
            }
            if cfg.record_runtime {
                let extra = if kind.needs_spectral() { side_ms } else { 0 };
                row.runtime_ms = Some(start.elapsed().as_millis() as u64 + extra);
            }
            out.rows.push(row);
        }
    }
    Ok(out)
}

/// Worker count from [`THREADS_ENV`], if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&t| t > 0)
}

/// Runs every `(ε, δ, seed, classifier)` cell. Rows come out ordered by
/// `(ε, δ, seed, classifier)` in config order whatever the scheduling.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepOutput> {
    cfg.validate()?;
    let cells: Vec<(usize, f64, u64)> = cfg
        .eps
        .iter()
        .enumerate()
        .flat_map(|(ei, &e)| cfg.seeds.iter().map(move |&s| (ei, e, s)))
        .collect();
    let work = || -> Vec<Result<SweepOutput>> { cells.par_iter().map(|&(_, e, s)| run_instance(cfg, e, s)).collect() };
    let results = match thread_cap() {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };

    let per_cell: Vec<SweepOutput> = results.into_iter().collect::<Result<_>>()?;
    let nd = cfg.deltas.len();
    let nc = cfg.classifiers.len();
    let ns = cfg.seeds.len();
    let mut out = SweepOutput::default();
    for ei in 0..cfg.eps.len() {
        for di in 0..nd {
            for si in 0..ns {
                let cell = &per_cell[ei * ns + si];
                out.rows.extend_from_slice(&cell.rows[di * nc..(di + 1) * nc]);
            }
        }
        for si in 0..ns {
            out.warnings.extend(per_cell[ei * ns + si].warnings.iter().cloned());
        }
    }
    Ok(out)
}

pub fn write_csv<W: Write>(rows: &[SweepResultRow], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(CSV_HEADER.split(','))
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    for row in rows {
        w.serialize(row).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: std::io::Read>(reader: R) -> Result<Vec<SweepResultRow>> {
    let mut r = csv::Reader::from_reader(reader);
    let header: Vec<String> = r
        .headers()
        .map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?
        .iter()
        .map(str::to_string)
        .collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::Parse {
            line: 1,
            msg: format!("unexpected header `{}`", header.join(",")),
        });
    }
    r.deserialize()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| Error::Parse { line: i + 2, msg: e.to_string() }))
        .collect()
}

pub fn csv_string(rows: &[SweepResultRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}
