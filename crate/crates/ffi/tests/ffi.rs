use std::ffi::{c_char, CStr, CString};
use std::ptr;

use eifcheck_ffi::*;

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 512];
    unsafe { eif_last_error(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }
        .to_string_lossy()
        .into_owned()
}

fn generated(shape: &str, seed: u64) -> *mut EifDistribution {
    let mut d = ptr::null_mut();
    let status = unsafe { eif_distribution_generate(cstr(shape).as_ptr(), seed, &mut d) };
    assert_eq!(status, EifStatus::Ok, "{}", last_error());
    d
}

#[test]
fn influence_round_trip_matches_the_library() {
    let d = generated(r#"{"family": "point", "w_levels": 3}"#, 5);
    let mut n = 0usize;
    assert_eq!(
        unsafe { eif_distribution_num_points(d, &mut n) },
        EifStatus::Ok
    );
    assert_eq!(n, 18);

    let param = cstr(r#"{"kind": "tsm"}"#);
    let mut f = ptr::null_mut();
    assert_eq!(
        unsafe { eif_influence_new(d, param.as_ptr(), &mut f) },
        EifStatus::Ok
    );
    let (mut psi, mut var) = (0.0, 0.0);
    assert_eq!(
        unsafe { eif_influence_summary(f, &mut psi, &mut var) },
        EifStatus::Ok
    );

    let p =
        eifcheck::generate::generate(&eifcheck::generate::Shape::Point { w_levels: 3 }, 5).unwrap();
    let expect = eifcheck::influence(&p, &eifcheck::ParameterSpec::Tsm).unwrap();
    assert_eq!(psi, expect.psi);
    assert_eq!(var, expect.variance(&p));

    let mut values = vec![0.0; n];
    let mut written = 0;
    assert_eq!(
        unsafe { eif_influence_values(f, values.as_mut_ptr(), n, &mut written) },
        EifStatus::Ok
    );
    assert_eq!(written, n);
    assert_eq!(values, expect.total);

    let mut k = 0;
    assert_eq!(
        unsafe { eif_influence_num_components(f, &mut k) },
        EifStatus::Ok
    );
    assert_eq!(k, 2);
    let mut sum = vec![0.0; n];
    for i in 0..k {
        let mut c = vec![0.0; n];
        assert_eq!(
            unsafe { eif_influence_component(f, i, c.as_mut_ptr(), n, &mut written) },
            EifStatus::Ok
        );
        sum.iter_mut().zip(&c).for_each(|(s, v)| *s += v);
    }
    for (a, b) in sum.iter().zip(&values) {
        assert!((a - b).abs() < 1e-12);
    }

    let mut direct = 0.0;
    assert_eq!(
        unsafe { eif_psi(d, param.as_ptr(), &mut direct) },
        EifStatus::Ok
    );
    assert_eq!(direct, psi);

    unsafe {
        eif_influence_free(f);
        eif_distribution_free(d);
    }
}

#[test]
fn short_buffer_reports_required_length() {
    let d = generated(r#"{"family": "cdf", "levels": 4}"#, 1);
    let mut buf = [0.0; 2];
    let mut written = 0;
    let status = unsafe { eif_distribution_joint(d, buf.as_mut_ptr(), buf.len(), &mut written) };
    assert_eq!(status, EifStatus::BufferTooSmall);
    assert_eq!(written, 4);
    let status = unsafe { eif_distribution_joint(d, ptr::null_mut(), 0, &mut written) };
    assert_eq!(status, EifStatus::BufferTooSmall);
    unsafe { eif_distribution_free(d) };
}

#[test]
fn errors_map_to_codes_with_messages() {
    let mut d = ptr::null_mut();
    let status = unsafe { eif_distribution_from_json(cstr("{not json").as_ptr(), &mut d) };
    assert_eq!(status, EifStatus::Parse);
    assert!(d.is_null());
    assert!(!last_error().is_empty());

    assert_eq!(
        unsafe { eif_distribution_from_json(ptr::null(), &mut d) },
        EifStatus::NullPointer
    );

    // treatment-specific mean on a univariate distribution
    let d = generated(r#"{"family": "cdf", "levels": 3}"#, 2);
    let mut f = ptr::null_mut();
    let status = unsafe { eif_influence_new(d, cstr(r#"{"kind": "tsm"}"#).as_ptr(), &mut f) };
    assert_eq!(status, EifStatus::Domain);
    assert!(f.is_null());
    unsafe { eif_distribution_free(d) };
}

#[test]
fn riesz_check_through_the_boundary() {
    let d = generated(r#"{"family": "longitudinal", "k": 1}"#, 3);
    let g_star = eifcheck::generate::random_g_star(
        &eifcheck::generate::generate(&eifcheck::generate::Shape::Longitudinal { k: 1 }, 3)
            .unwrap(),
        9,
    );
    let param =
        serde_json::to_string(&eifcheck::ParameterSpec::LongitudinalMean { g_star }).unwrap();
    let mut err = f64::NAN;
    let status = unsafe { eif_riesz_check(d, cstr(&param).as_ptr(), 4, 10, 1e-4, &mut err) };
    assert_eq!(status, EifStatus::Ok, "{}", last_error());
    assert!(err <= 1e-6);
    unsafe { eif_distribution_free(d) };
}

#[test]
fn suite_report_is_returned_as_json() {
    let config =
        cstr(r#"{"n_distributions": 2, "n_scores_per_distribution": 3, "families": ["vte"]}"#);
    let mut report = ptr::null_mut();
    let mut pass = -1;
    assert_eq!(
        unsafe { eif_run_suite(config.as_ptr(), &mut report, &mut pass) },
        EifStatus::Ok
    );
    assert_eq!(pass, 1);
    let text = unsafe { CStr::from_ptr(report) }
        .to_str()
        .unwrap()
        .to_owned();
    unsafe { eif_string_free(report) };
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["pass"], serde_json::Value::Bool(true));
}

#[test]
fn header_declares_every_export() {
    let header =
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/eifcheck.h"))
            .unwrap();
    for name in [
        "eif_version",
        "eif_last_error",
        "eif_distribution_from_json",
        "eif_distribution_generate",
        "eif_distribution_free",
        "eif_distribution_num_points",
        "eif_distribution_joint",
        "eif_psi",
        "eif_influence_new",
        "eif_influence_free",
        "eif_influence_summary",
        "eif_influence_values",
        "eif_influence_num_components",
        "eif_influence_component",
        "eif_riesz_check",
        "eif_run_suite",
        "eif_string_free",
        "EIF_STATUS_BUFFER_TOO_SMALL",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
    let v = unsafe { CStr::from_ptr(eif_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

/// Compiles and runs the C example against the static library built for
/// this test run.
#[test]
fn c_program_links_and_runs() {
    let manifest = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|p| p.parent()).unwrap();
    let lib = profile_dir.join("libeifcheck_ffi.a");
    assert!(
        lib.exists(),
        "static library not found at {}",
        lib.display()
    );
    let out_dir = tempfile_dir();
    let bin = out_dir.join("smoke");
    let status = std::process::Command::new("cc")
        .arg(manifest.join("examples/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .expect("a C compiler named cc");
    assert!(status.success());
    let run = std::process::Command::new(&bin).output().unwrap();
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(run.status.success(), "{stdout}");
    assert!(stdout.contains("points 18"));
}

fn tempfile_dir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("eifcheck-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
