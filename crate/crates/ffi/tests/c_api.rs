use std::ffi::{c_char, CStr, CString};
use std::process::Command;
use std::ptr;

use specside_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    unsafe { specside_last_error(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn planted(n: usize, seed: u64) -> *mut SpecInstance {
    let mut inst = ptr::null_mut();
    let s = unsafe { specside_generate_planted(n, 2, 8, 0.02, 1.0, seed, &mut inst) };
    assert_eq!(s, SpecStatus::Ok, "{}", last_error());
    inst
}

#[test]
fn generate_classify_score_round_trip() {
    let inst = planted(200, 3);
    let mut info = SpecInstanceInfo::default();
    assert_eq!(unsafe { specside_instance_info(inst, &mut info) }, SpecStatus::Ok);
    assert_eq!((info.n, info.k, info.d), (200, 2, 8));
    assert!(info.phi_certified > 0.0);

    let mut truth = vec![0usize; 200];
    assert_eq!(unsafe { specside_instance_truth(inst, truth.as_mut_ptr(), 200) }, SpecStatus::Ok);
    let mut rate = -1.0;
    assert_eq!(
        unsafe { specside_misclassification(inst, truth.as_ptr(), 200, false, &mut rate) },
        SpecStatus::Ok
    );
    assert_eq!(rate, 0.0);

    let mut sigma = vec![0usize; 200];
    assert_eq!(unsafe { specside_perturb_labels(inst, 0.1, 1, sigma.as_mut_ptr(), 200) }, SpecStatus::Ok);
    let mut out = vec![0usize; 200];
    for c in [SpecClassifier::LabelsOnly, SpecClassifier::Polytime, SpecClassifier::Walk] {
        let s = unsafe { specside_classify(inst, c, sigma.as_ptr(), 0.1, 5, out.as_mut_ptr(), 200) };
        assert_eq!(s, SpecStatus::Ok, "{}", last_error());
        assert!(out.iter().all(|&l| l < 2));
    }
    unsafe { specside_instance_free(inst) };
}

#[test]
fn errors_are_reported_with_messages() {
    let mut inst = ptr::null_mut();
    let s = unsafe { specside_generate_planted(10, 2, 2, 0.02, 1.0, 0, &mut inst) };
    assert_eq!(s, SpecStatus::Parameter);
    assert!(inst.is_null());
    assert!(last_error().contains("d = 2"));

    let s = unsafe { specside_instance_info(ptr::null(), ptr::null_mut()) };
    assert_eq!(s, SpecStatus::NullPointer);

    let inst = planted(120, 1);
    let mut small = vec![0usize; 10];
    let s = unsafe { specside_instance_truth(inst, small.as_mut_ptr(), 10) };
    assert_eq!(s, SpecStatus::Parameter);
    let bad = vec![7usize; 120];
    let mut out = vec![0usize; 120];
    let s = unsafe { specside_classify(inst, SpecClassifier::Majority, bad.as_ptr(), 0.1, 0, out.as_mut_ptr(), 120) };
    assert_eq!(s, SpecStatus::Parameter);
    unsafe { specside_instance_free(inst) };

    let cfg = CString::new("{ not json").unwrap();
    let mut csv = ptr::null_mut();
    assert_eq!(unsafe { specside_sweep(cfg.as_ptr(), &mut csv, ptr::null_mut()) }, SpecStatus::Config);
}

#[test]
fn sweep_returns_csv() {
    let cfg = CString::new(
        r#"{"generator": {"kind": "planted", "n": 150, "k": 2, "d": 8}, "eps": [0.02],
            "deltas": [0.1], "seeds": [1], "classifiers": ["labels_only", "majority"]}"#,
    )
    .unwrap();
    let mut csv = ptr::null_mut();
    let mut warnings = ptr::null_mut();
    let s = unsafe { specside_sweep(cfg.as_ptr(), &mut csv, &mut warnings) };
    assert_eq!(s, SpecStatus::Ok, "{}", last_error());
    let text = unsafe { CStr::from_ptr(csv) }.to_str().unwrap().to_owned();
    assert_eq!(text.lines().count(), 3);
    assert!(text.starts_with("gen,n,k,d,"));
    assert!(!unsafe { CStr::from_ptr(warnings) }.to_bytes().is_empty());
    unsafe {
        specside_string_free(csv);
        specside_string_free(warnings);
    }
}

#[test]
fn refine_improves_corrupted_labels() {
    let inst = planted(150, 2);
    let mut truth = vec![0usize; 150];
    unsafe { specside_instance_truth(inst, truth.as_mut_ptr(), 150) };
    let mut alpha = truth.clone();
    alpha[4] = 1 - alpha[4];
    let mut out = vec![0usize; 150];
    let mut summary = SpecRefineSummary::default();
    let s = unsafe { specside_refine(inst, alpha.as_ptr(), 150, 2000, out.as_mut_ptr(), &mut summary) };
    assert_eq!(s, SpecStatus::Ok, "{}", last_error());
    assert!(summary.certified_min_eig >= -1e-6);
    assert!(summary.objective <= summary.flagged as f64);
    assert!(summary.symmetric_difference <= 2);
    unsafe { specside_instance_free(inst) };
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/specside.h");
    let src = std::env::temp_dir().join("specside_header_check.c");
    std::fs::write(
        &src,
        format!(
            "#include \"{header}\"\nint main(void) {{ SpecInstance *p = 0; SpecStatus s = SPEC_STATUS_OK; (void)p; return (int)s; }}\n"
        ),
    )
    .unwrap();
    match Command::new("cc").args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only"]).arg(&src).status() {
        Ok(status) => assert!(status.success()),
        Err(e) => eprintln!("skipping: no C compiler ({e})"),
    }
    assert!(!unsafe { CStr::from_ptr(specside_version()) }.to_bytes().is_empty());
}
