use std::fs::File;
use std::io::{self, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use specside::classify::misclassification;
use specside::graph::io::{load_graph, load_labels, save_graph, save_labels, save_weights};
use specside::graph::{perturb_labels, GeneratorKind, PerturbMode, PlantedInstance, RegularGraph};
use specside::harness::{
    run_classifier, run_sweep, setting_violations, spectral_side, verify_instance, write_csv, ClassifierKind,
    ExperimentConfig, GeneratorSpec, OracleSpec, SettingParams,
};
use specside::oracle::Backend;
use specside::refine::{refine_pipeline, SdpOptions};
use specside::spectral::embed;
use specside::{Error, Result};

#[derive(Parser)]
#[command(name = "specside", version, about = "Clustering with noisy labels and spectral side information")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Planted,
    UninformativeMiddle,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance and write graph and ground-truth label files.
    Generate {
        #[arg(long, value_enum, default_value = "planted")]
        kind: Kind,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 1.0)]
        eta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// Also write labels perturbed at this rate to `--sigma`.
        #[arg(long, requires = "sigma")]
        delta: Option<f64>,
        #[arg(long)]
        sigma: Option<PathBuf>,
    },
    /// Classify every vertex from a graph and noisy labels.
    Classify {
        #[arg(long)]
        graph: PathBuf,
        /// Noisy input labels.
        #[arg(long)]
        labels: PathBuf,
        /// Ground truth; supplies phi, eta and eps and enables scoring.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long, default_value = "walk")]
        classifier: String,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        phi: Option<f64>,
        #[arg(long)]
        eta: Option<f64>,
        /// Label noise rate, used for the walk length and setting checks.
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value = "exact")]
        backend: String,
        #[arg(long)]
        xi: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        strict: bool,
    },
    /// Reweight flagged edges and repair the partition induced by labels.
    Refine {
        #[arg(long)]
        graph: PathBuf,
        /// Labels of the classifier being refined.
        #[arg(long)]
        alpha: PathBuf,
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        phi: Option<f64>,
        /// Spectral threshold; phi^2/5 when absent.
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long, default_value_t = 5000)]
        max_iter: usize,
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a JSON-configured sweep and write CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output path; stdout when neither is set.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        strict: bool,
    },
    /// Check spectral invariants of a graph with ground-truth labels.
    VerifyInvariants {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn print_json(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("json values serialize"));
}

fn parse_backend(s: &str) -> Result<Backend> {
    match s {
        "exact" => Ok(Backend::Exact),
        "noisy" => Ok(Backend::Noisy),
        _ => Err(config_err(format!("unknown backend `{s}`"))),
    }
}

fn load_truth(graph: &RegularGraph, path: &PathBuf, k: Option<usize>) -> Result<PlantedInstance> {
    let iota = load_labels(path, k)?;
    PlantedInstance::measure(graph.clone(), iota, GeneratorKind::External)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { kind, n, k, d, eps, eta, seed, graph, labels, delta, sigma } => {
            let spec = match kind {
                Kind::Planted => GeneratorSpec::Planted { n, k, d, eta },
                Kind::UninformativeMiddle => GeneratorSpec::UninformativeMiddle { n, d },
            };
            let inst = spec.generate(eps, seed)?;
            save_graph(&inst.graph, &graph)?;
            save_labels(&inst.iota, &labels)?;
            if let (Some(delta), Some(path)) = (delta, sigma) {
                save_labels(&perturb_labels(&inst.iota, delta, PerturbMode::UniformWrong, seed)?, path)?;
            }
            print_json(&json!({
                "kind": inst.kind.to_string(),
                "n": inst.graph.n(),
                "k": inst.k,
                "d": inst.graph.d(),
                "eps_measured": inst.eps_measured,
                "phi_certified": inst.phi_certified,
                "eta": inst.eta,
                "middle": inst.middle.len(),
            }));
        }
        Command::Classify {
            graph, labels, truth, classifier, k, phi, eta, delta, backend, xi, seed, out, strict,
        } => {
            let g = load_graph(&graph)?;
            let kind: ClassifierKind = classifier.parse()?;
            let sigma = load_labels(&labels, k)?;
            let inst = truth.as_ref().map(|t| load_truth(&g, t, Some(sigma.k()))).transpose()?;
            let phi = phi
                .or(inst.as_ref().map(|i| i.phi_certified))
                .ok_or_else(|| config_err("--phi is required without --truth"))?;
            let eta = eta.or(inst.as_ref().map(|i| i.eta)).unwrap_or(1.0);
            let oracle = OracleSpec { backend: parse_backend(&backend)?, xi };
            let violations = setting_violations(&SettingParams {
                n: g.n(),
                k: sigma.k(),
                d: g.d(),
                eps: inst.as_ref().map(|i| i.eps_measured),
                phi,
                eta,
                delta,
                xi: if oracle.backend == Backend::Noisy { oracle.xi_for(g.n()) } else { 0.0 },
                min_mean_norm_sq: None,
            });
            for v in &violations {
                eprintln!("warning: setting violated: {v}");
            }
            if strict && !violations.is_empty() {
                return Err(Error::Invariant(format!("{} setting constraint(s) violated", violations.len())));
            }
            let tau = if kind.needs_spectral() {
                let emb = Arc::new(embed(&g, sigma.k())?);
                Some(spectral_side(emb, &oracle, &sigma, phi, eta, seed)?.tau)
            } else {
                None
            };
            let (out_labels, hist) = run_classifier(kind, &g, &sigma, tau.as_ref(), phi, delta, seed)?;
            if let Some(path) = out {
                save_labels(&out_labels, path)?;
            }
            let rate = inst.as_ref().map(|i| misclassification(&out_labels, &i.iota));
            print_json(&json!({
                "classifier": kind.to_string(),
                "n": g.n(),
                "rate": rate,
                "input_rate": inst.as_ref().map(|i| misclassification(&sigma, &i.iota)),
                "branches": hist,
                "warnings": violations.len(),
            }));
        }
        Command::Refine { graph, alpha, truth, k, phi, theta, max_iter, weights, out } => {
            let g = load_graph(&graph)?;
            let alpha = load_labels(&alpha, k)?;
            let inst = truth.as_ref().map(|t| load_truth(&g, t, Some(alpha.k()))).transpose()?;
            let phi = phi
                .or(inst.as_ref().map(|i| i.phi_certified))
                .ok_or_else(|| config_err("--phi is required without --truth"))?;
            let emb = embed(&g, alpha.k())?;
            let mut opts = SdpOptions::new(theta.unwrap_or(phi * phi / 5.0));
            opts.max_iter = max_iter;
            let truth_arg = inst.as_ref().map(|i| (&i.iota, i.eta));
            let (x, part, report) = refine_pipeline(&g, emb.basis(), &alpha, phi, &opts, truth_arg)?;
            if let Some(path) = weights {
                save_weights(&g, &x, path)?;
            }
            if let Some(path) = out {
                save_labels(&part.labeling(g.n()), path)?;
            }
            print_json(&serde_json::to_value(&report).expect("report serializes"));
        }
        Command::Sweep { config, out, strict } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            cfg.strict |= strict;
            let result = run_sweep(&cfg)?;
            for w in &result.warnings {
                eprintln!("warning: setting violated: {w}");
            }
            match out.or(cfg.output.clone()) {
                Some(path) => write_csv(&result.rows, BufWriter::new(File::create(path)?))?,
                None => write_csv(&result.rows, io::stdout().lock())?,
            }
        }
        Command::VerifyInvariants { graph, labels, k, trials, seed } => {
            let g = load_graph(&graph)?;
            let inst = load_truth(&g, &labels, k)?;
            let emb = embed(&inst.graph, inst.k)?;
            let report = verify_instance(&inst, &emb, trials, seed)?;
            print_json(&serde_json::to_value(&report).expect("report serializes"));
            if !report.violations.is_empty() {
                return Err(Error::Invariant(report.violations.join("; ")));
            }
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Invariant(_) => 3,
        Error::Config(_) | Error::Parameter(_) | Error::Parse { .. } | Error::Io(_) | Error::Domain(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
