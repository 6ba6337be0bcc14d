use std::ffi::CStr;
use std::process::Command;
use std::ptr;

use qsagnac_ffi::*;

fn last_error() -> String {
    let mut buf = [0 as std::ffi::c_char; 256];
    unsafe { qs_last_error_message(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/qsagnac.h");
    for lang in ["c", "c++"] {
        let status = Command::new("cc")
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang, header])
            .status()
            .expect("a C compiler on PATH");
        assert!(status.success(), "header does not compile as {lang}");
    }
}

#[test]
fn scale_factor_and_phase() {
    let g = qs_geometry_vienna();
    let mut s = 0.0;
    let mut phi = 0.0;
    unsafe {
        assert_eq!(qs_scale_factor(g, &mut s), QsStatus::Ok);
        assert_eq!(qs_sagnac_phase(g, 7.29e-5, 1, &mut phi), QsStatus::Ok);
        qs_geometry_free(g);
    }
    assert!((s - 38.77).abs() < 0.01);
    assert!((phi - 2.826e-3).abs() < 1e-5);
}

#[test]
fn simulate_and_fit() {
    let g = qs_geometry_vienna();
    let mut exp = ptr::null_mut();
    let mut recs = ptr::null_mut();
    let phases: Vec<f64> = (0..11).map(|i| -0.4 + 0.68 * i as f64).collect();
    let mut e = QsEarthPhase::default();
    let mut first = QsCountRecord::default();
    unsafe {
        assert_eq!(qs_experiment_new(g, 100.0, &mut exp), QsStatus::Ok);
        assert_eq!(qs_simulate_counts(exp, 2, phases.as_ptr(), phases.len(), 3, &mut recs), QsStatus::Ok);
        assert_eq!(qs_records_len(recs), 22);
        assert_eq!(qs_records_get(recs, 0, &mut first), QsStatus::Ok);
        assert_eq!(qs_records_get(recs, 22, &mut first), QsStatus::InvalidInput);
        assert_eq!(qs_fit_earth_phase(recs, 2, 0, 0.0, 0, &mut e), QsStatus::Ok);
        qs_records_free(recs);
        qs_experiment_free(exp);
        qs_geometry_free(g);
    }
    assert_eq!(first.switch_on, 1);
    assert!(first.n_hv > 0);
    assert!((e.phi_e - 5.65e-3).abs() < 5.0 * e.phi_e_sigma, "{e:?}");
}

#[test]
fn errors_are_reported() {
    let mut g = ptr::null_mut();
    unsafe {
        assert_eq!(qs_geometry_square(-1.0, 1, 1550e-9, &mut g), QsStatus::InvalidInput);
        assert!(g.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(qs_scale_factor(ptr::null(), ptr::null_mut()), QsStatus::NullPointer);
        assert_eq!(last_error(), "geom is null");
        let mut d = QsRingDesign::default();
        assert_eq!(qs_optimize_gfring(3.0, 0.84, 1.0, &mut d), QsStatus::Infeasible);
        assert!(last_error().contains("binding constraint"));
        qs_geometry_free(ptr::null_mut());
    }
}

#[test]
fn gfring_design() {
    let mut d = QsRingDesign::default();
    let status = unsafe { qs_optimize_gfring(3.0, 48.2f64.to_radians(), 5.56e6, &mut d) };
    assert_eq!(status, QsStatus::Ok);
    assert_eq!(d.turns, 8);
    assert!((d.fiber_length / 47.5e3 - 1.0).abs() < 0.05);
}
