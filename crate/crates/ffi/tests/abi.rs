use std::ffi::{c_char, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use stable_clt_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    let len = unsafe { sclt_last_error(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf.iter().take(len.min(255)).map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

#[test]
fn stable_handle_round_trip() {
    unsafe {
        let mut h = ptr::null_mut();
        assert_eq!(sclt_stable_new(1.0, 0.0, 1.0, &mut h), ScltStatus::Ok);
        let mut v = 0.0;
        assert_eq!(sclt_stable_cdf(h, 1.0, &mut v), ScltStatus::Ok);
        assert!((v - 0.75).abs() < 1e-9);
        assert_eq!(sclt_stable_pdf(h, 1.0, 0.0, &mut v), ScltStatus::Ok);
        assert!((v - 1.0 / std::f64::consts::PI).abs() < 1e-9);
        let mut a = [0.0; 8];
        let mut b = [0.0; 8];
        assert_eq!(sclt_stable_sample(h, 8, 3, a.as_mut_ptr()), ScltStatus::Ok);
        assert_eq!(sclt_stable_sample(h, 8, 3, b.as_mut_ptr()), ScltStatus::Ok);
        assert_eq!(a, b);
        sclt_stable_free(h);
    }
}

#[test]
fn errors_map_to_codes() {
    unsafe {
        let mut h = ptr::null_mut();
        assert_eq!(sclt_stable_new(1.0, 0.5, 1.0, &mut h), ScltStatus::InvalidInput);
        assert!(h.is_null());
        assert!(last_error().contains("beta"), "{}", last_error());
        assert_eq!(sclt_stable_new(1.5, 0.0, 1.0, ptr::null_mut()), ScltStatus::NullPointer);
        let mut v = 0.0;
        assert_eq!(sclt_stable_cdf(ptr::null(), 0.0, &mut v), ScltStatus::NullPointer);

        let json = CString::new(r#"{"family":"pareto","alpha":1.5}"#).unwrap();
        let mut law = ptr::null_mut();
        assert_eq!(sclt_law_from_json(json.as_ptr(), &mut law), ScltStatus::Ok);
        assert_eq!(
            sclt_bound_total(law, ptr::null(), 16, ScltBoundMode::Unit, true, &mut v),
            ScltStatus::Hypothesis
        );
        assert_eq!(
            sclt_bound_total(law, ptr::null(), 16, ScltBoundMode::Explicit, false, &mut v),
            ScltStatus::InvalidInput
        );
        sclt_law_free(law);

        let bad = CString::new(r#"{"family":"cauchy"}"#).unwrap();
        assert_eq!(sclt_law_from_json(bad.as_ptr(), &mut law), ScltStatus::InvalidInput);
        assert_eq!(sclt_gamma_n(1.5, 1.0, 0.5, 1, &mut v), ScltStatus::InvalidInput);
        assert_eq!(sclt_gamma_n(0.5, 0.0, 0.5, 100, &mut v), ScltStatus::Ok);
        assert!((v - 1e4).abs() < 1e-6);
    }
}

#[test]
fn law_sums_against_limit() {
    unsafe {
        let json = CString::new(r#"{"family":"pareto","alpha":1.5}"#).unwrap();
        let mut law = ptr::null_mut();
        assert_eq!(sclt_law_from_json(json.as_ptr(), &mut law), ScltStatus::Ok);
        let mut limit = ptr::null_mut();
        assert_eq!(sclt_law_limit(law, &mut limit), ScltStatus::Ok);
        let mut table = ptr::null_mut();
        assert_eq!(sclt_cdf_table_new(limit, &mut table), ScltStatus::Ok);
        let mut sums = vec![0.0; 20_000];
        assert_eq!(
            sclt_law_sample_sum(law, 64, sums.len(), 9, sums.as_mut_ptr()),
            ScltStatus::Ok
        );
        let mut d = 0.0;
        assert_eq!(
            sclt_kolmogorov_distance(table, sums.as_ptr(), sums.len(), &mut d),
            ScltStatus::Ok
        );
        assert!(d > 0.0 && d < 0.05, "{d}");
        let mut total = 0.0;
        assert_eq!(
            sclt_bound_total(law, ptr::null(), 64, ScltBoundMode::Unit, false, &mut total),
            ScltStatus::Ok
        );
        assert!(total > 0.0);
        sclt_cdf_table_free(table);
        sclt_stable_free(limit);
        sclt_law_free(law);
    }
}

#[test]
fn generator_of_cosine() {
    unsafe {
        let mut p = ptr::null_mut();
        assert_eq!(sclt_stable_new(1.5, 0.0, 1.0, &mut p), ScltStatus::Ok);
        let spec = CString::new(r#"{"kind":"cosine","lambda":2.0}"#).unwrap();
        let mut f = ptr::null_mut();
        assert_eq!(sclt_function_from_json(spec.as_ptr(), &mut f), ScltStatus::Ok);
        let mut v = 0.0;
        assert_eq!(sclt_generator_apply(p, f, 0.0, ScltForm::Raw, &mut v), ScltStatus::Ok);
        // L cos(λ·)(0) = −|λ|^α for the symmetric law.
        assert!((v + 2f64.powf(1.5)).abs() < 1e-6, "{v}");
        assert_eq!(sclt_function_eval(f, 4, 0.0, &mut v), ScltStatus::InvalidInput);
        sclt_function_free(f);
        sclt_stable_free(p);
    }
}

#[test]
fn header_declares_the_api_and_compiles() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(dir.join("include/stable_clt.h")).unwrap();
    for name in [
        "sclt_stable_new",
        "sclt_law_from_json",
        "sclt_generator_apply",
        "sclt_bound_total",
        "sclt_last_error",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"stable_clt.h\"\nint main(void) { ScltStable *h = 0; return sclt_stable_new(1.5, 0, 1, &h) == SCLT_STATUS_OK ? 0 : 1; }\n",
    )
    .unwrap();
    match Command::new("cc")
        .arg("-fsyntax-only")
        .arg("-I")
        .arg(dir.join("include"))
        .arg(&src)
        .status()
    {
        Ok(status) => assert!(status.success(), "header does not compile"),
        Err(_) => eprintln!("no C compiler found; skipped the compile check"),
    }
}
