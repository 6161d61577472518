//! C interface to the `specside` library.
//!
//! Every function returns a [`SpecStatus`] code. On failure the message of
//! the last error on the calling thread is available through
//! [`specside_last_error`]. Objects cross the boundary as opaque handles
//! that the caller releases with the matching `_free` function; strings
//! returned by the library are released with [`specside_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use specside::classify::{matched_misclassification, misclassification};
use specside::graph::{perturb_labels, Labeling, PerturbMode, PlantedInstance};
use specside::harness::{
    csv_string, run_classifier, run_sweep, spectral_side, ClassifierKind, ExperimentConfig, GeneratorSpec,
    OracleSpec,
};
use specside::oracle::Backend;
use specside::refine::{refine_pipeline, SdpOptions};
use specside::spectral::embed;
use specside::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpecStatus {
    Ok = 0,
    NullPointer = 1,
    Parameter = 2,
    Parse = 3,
    Io = 4,
    NonConvergence = 5,
    Sampling = 6,
    Invariant = 7,
    Size = 8,
    Config = 9,
    Domain = 10,
    Utf8 = 11,
    Panic = 12,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpecClassifier {
    LabelsOnly = 0,
    NaiveSpectral = 1,
    Majority = 2,
    MajorityPp = 3,
    Polytime = 4,
    Walk = 5,
}

impl From<SpecClassifier> for ClassifierKind {
    fn from(c: SpecClassifier) -> Self {
        match c {
            SpecClassifier::LabelsOnly => ClassifierKind::LabelsOnly,
            SpecClassifier::NaiveSpectral => ClassifierKind::NaiveSpectral,
            SpecClassifier::Majority => ClassifierKind::Majority,
            SpecClassifier::MajorityPp => ClassifierKind::MajorityPp,
            SpecClassifier::Polytime => ClassifierKind::Polytime,
            SpecClassifier::Walk => ClassifierKind::Walk,
        }
    }
}

/// A generated graph with its ground-truth clustering.
pub struct SpecInstance {
    inner: PlantedInstance,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct SpecInstanceInfo {
    pub n: usize,
    pub k: usize,
    pub d: usize,
    pub eps_measured: f64,
    pub phi_certified: f64,
    pub eta: f64,
    /// Number of middle vertices (uninformative construction only).
    pub middle: usize,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct SpecRefineSummary {
    pub flagged: usize,
    pub objective: f64,
    pub certified_min_eig: f64,
    pub theta: f64,
    pub iterations: usize,
    pub converged: bool,
    pub cross_edge_weight: f64,
    pub symmetric_difference: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SpecStatus {
    match e {
        Error::Parameter(_) => SpecStatus::Parameter,
        Error::Domain(_) => SpecStatus::Domain,
        Error::Parse { .. } => SpecStatus::Parse,
        Error::Io(_) => SpecStatus::Io,
        Error::NonConvergence { .. } => SpecStatus::NonConvergence,
        Error::Sampling(_) => SpecStatus::Sampling,
        Error::Invariant(_) => SpecStatus::Invariant,
        Error::Size(_) => SpecStatus::Size,
        Error::Config(_) => SpecStatus::Config,
    }
}

enum Failure {
    Status(SpecStatus, String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn null(what: &str) -> Failure {
    Failure::Status(SpecStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SpecStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            SpecStatus::Ok
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Status(s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            SpecStatus::Panic
        }
    }
}

unsafe fn instance_ref<'a>(inst: *const SpecInstance) -> Result<&'a PlantedInstance, Failure> {
    inst.as_ref().map(|i| &i.inner).ok_or_else(|| null("instance"))
}

unsafe fn labels_in(ptr: *const usize, len: usize, k: usize) -> Result<Labeling, Failure> {
    if ptr.is_null() {
        return Err(null("labels"));
    }
    Ok(Labeling::new(std::slice::from_raw_parts(ptr, len).to_vec(), k)?)
}

unsafe fn labels_out(labels: &Labeling, out: *mut usize, len: usize) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output buffer"));
    }
    if len != labels.len() {
        return Err(Failure::Status(
            SpecStatus::Parameter,
            format!("output buffer holds {len} labels, need {}", labels.len()),
        ));
    }
    std::slice::from_raw_parts_mut(out, len).copy_from_slice(labels.as_slice());
    Ok(())
}

unsafe fn str_in<'a>(s: *const c_char) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(null("string"));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|e| Failure::Status(SpecStatus::Utf8, e.to_string()))
}

fn string_out(s: String, out: *mut *mut c_char) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output string"));
    }
    let c = CString::new(s).map_err(|e| Failure::Status(SpecStatus::Utf8, e.to_string()))?;
    unsafe { *out = c.into_raw() };
    Ok(())
}

/// Copies the last error message of this thread into `buf` (nul
/// terminated, truncated to `len`). Returns the full message length
/// without the terminator, or 0 when there is no error.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn specside_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match &*e.borrow() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len - 1);
                ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
                *buf.add(n) = 0;
            }
            bytes.len()
        }
    })
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn specside_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Generates a planted instance with `k` clusters of a `d`-regular graph.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn specside_generate_planted(
    n: usize,
    k: usize,
    d: usize,
    eps: f64,
    eta: f64,
    seed: u64,
    out: *mut *mut SpecInstance,
) -> SpecStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = GeneratorSpec::Planted { n, k, d, eta }.generate(eps, seed)?;
        *out = Box::into_raw(Box::new(SpecInstance { inner }));
        Ok(())
    })
}

/// Generates the two-cluster instance with uninformative middle vertices.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn specside_generate_uninformative_middle(
    n: usize,
    d: usize,
    eps: f64,
    seed: u64,
    out: *mut *mut SpecInstance,
) -> SpecStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = GeneratorSpec::UninformativeMiddle { n, d }.generate(eps, seed)?;
        *out = Box::into_raw(Box::new(SpecInstance { inner }));
        Ok(())
    })
}

/// # Safety
/// `inst` must be null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn specside_instance_free(inst: *mut SpecInstance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

/// # Safety
/// `inst` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn specside_instance_info(inst: *const SpecInstance, out: *mut SpecInstanceInfo) -> SpecStatus {
    guard(|| {
        let i = instance_ref(inst)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = SpecInstanceInfo {
            n: i.graph.n(),
            k: i.k,
            d: i.graph.d(),
            eps_measured: i.eps_measured,
            phi_certified: i.phi_certified,
            eta: i.eta,
            middle: i.middle.len(),
        };
        Ok(())
    })
}

/// Writes the ground-truth cluster ids into `out[0..len]`, `len == n`.
///
/// # Safety
/// `inst` must be a live handle and `out` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn specside_instance_truth(inst: *const SpecInstance, out: *mut usize, len: usize) -> SpecStatus {
    guard(|| labels_out(&instance_ref(inst)?.iota, out, len))
}

/// Writes the instance graph in the text format to `path`.
///
/// # Safety
/// `inst` must be a live handle and `path` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn specside_instance_save_graph(inst: *const SpecInstance, path: *const c_char) -> SpecStatus {
    guard(|| {
        let i = instance_ref(inst)?;
        specside::graph::io::save_graph(&i.graph, str_in(path)?)?;
        Ok(())
    })
}

/// Labels perturbed from the ground truth at rate `delta`.
///
/// # Safety
/// `inst` must be a live handle and `out` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn specside_perturb_labels(
    inst: *const SpecInstance,
    delta: f64,
    seed: u64,
    out: *mut usize,
    len: usize,
) -> SpecStatus {
    guard(|| {
        let i = instance_ref(inst)?;
        let sigma = perturb_labels(&i.iota, delta, PerturbMode::UniformWrong, seed)?;
        labels_out(&sigma, out, len)
    })
}

/// Classifies every vertex of `inst` from the noisy labels `sigma` using
/// the exact inner-product oracle.
///
/// # Safety
/// `inst` must be a live handle; `sigma` and `out` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn specside_classify(
    inst: *const SpecInstance,
    classifier: SpecClassifier,
    sigma: *const usize,
    delta: f64,
    seed: u64,
    out: *mut usize,
    len: usize,
) -> SpecStatus {
    guard(|| {
        let i = instance_ref(inst)?;
        let sigma = labels_in(sigma, len, i.k)?;
        let kind = ClassifierKind::from(classifier);
        let oracle = OracleSpec {
            backend: Backend::Exact,
            xi: None,
        };
        let tau = if kind.needs_spectral() {
            let emb = Arc::new(embed(&i.graph, i.k)?);
            Some(spectral_side(emb, &oracle, &sigma, i.phi_certified, i.eta, seed)?.tau)
        } else {
            None
        };
        let (labels, _) = run_classifier(kind, &i.graph, &sigma, tau.as_ref(), i.phi_certified, delta, seed)?;
        labels_out(&labels, out, len)
    })
}

/// Fraction of `labels` differing from the ground truth, optionally after
/// the best relabeling.
///
/// # Safety
/// `inst` must be a live handle, `labels` must hold `len` values and
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn specside_misclassification(
    inst: *const SpecInstance,
    labels: *const usize,
    len: usize,
    matched: bool,
    out: *mut f64,
) -> SpecStatus {
    guard(|| {
        let i = instance_ref(inst)?;
        let labels = labels_in(labels, len, i.k)?;
        if labels.len() != i.iota.len() {
            return Err(Failure::Status(SpecStatus::Parameter, "label count differs from n".into()));
        }
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = if matched {
            matched_misclassification(&labels, &i.iota)
        } else {
            misclassification(&labels, &i.iota)
        };
        Ok(())
    })
}

/// Reweights the edges flagged by `alpha` and repairs its partition.
/// Refined labels go to `out_labels`; `summary` receives the solver report
/// scored against the ground truth.
///
/// # Safety
/// `inst` must be a live handle; `alpha` and `out_labels` must hold `len`
/// values; `summary` must be writable.
#[no_mangle]
pub unsafe extern "C" fn specside_refine(
    inst: *const SpecInstance,
    alpha: *const usize,
    len: usize,
    max_iter: usize,
    out_labels: *mut usize,
    summary: *mut SpecRefineSummary,
) -> SpecStatus {
    guard(|| {
        let i = instance_ref(inst)?;
        let alpha = labels_in(alpha, len, i.k)?;
        let summary = summary.as_mut().ok_or_else(|| null("summary"))?;
        let emb = embed(&i.graph, i.k)?;
        let phi = i.phi_certified;
        let mut opts = SdpOptions::new(phi * phi / 5.0);
        opts.max_iter = max_iter;
        let (_, part, report) = refine_pipeline(&i.graph, emb.basis(), &alpha, phi, &opts, Some((&i.iota, i.eta)))?;
        labels_out(&part.labeling(i.graph.n()), out_labels, len)?;
        *summary = SpecRefineSummary {
            flagged: report.flagged,
            objective: report.objective,
            certified_min_eig: report.certified_min_eig,
            theta: report.theta,
            iterations: report.iterations,
            converged: report.converged,
            cross_edge_weight: report.cross_edge_weight.unwrap_or(f64::NAN),
            symmetric_difference: report.symmetric_difference.unwrap_or(0),
        };
        Ok(())
    })
}

/// Runs a sweep from a JSON config and returns the CSV text in `out_csv`
/// (release with [`specside_string_free`]). Setting warnings are returned
/// one per line in `out_warnings` when it is not null.
///
/// # Safety
/// `config_json` must be a nul-terminated string; `out_csv` writable;
/// `out_warnings` null or writable.
#[no_mangle]
pub unsafe extern "C" fn specside_sweep(
    config_json: *const c_char,
    out_csv: *mut *mut c_char,
    out_warnings: *mut *mut c_char,
) -> SpecStatus {
    guard(|| {
        let cfg = ExperimentConfig::from_json(str_in(config_json)?)?;
        let result = run_sweep(&cfg)?;
        string_out(csv_string(&result.rows)?, out_csv)?;
        if !out_warnings.is_null() {
            string_out(result.warnings.join("\n"), out_warnings)?;
        }
        Ok(())
    })
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn specside_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}
