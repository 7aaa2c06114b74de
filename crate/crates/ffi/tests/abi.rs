use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use stepgrade_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = sg_last_error_message();
    assert!(!p.is_null(), "expected an error message");
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name).display().to_string()
}

#[test]
fn equivalence_through_the_abi() {
    unsafe {
        let mut params = std::mem::zeroed::<SgParams>();
        assert_eq!(sg_params_default(&mut params), SgStatus::Ok);
        assert_eq!((params.n_max, params.n_succ, params.n_eq), (40, 10, 10));

        let mut out = -1;
        let (a, b) = (c("T = 2\\pi\\sqrt{\\frac{a^3}{G M}}"), c("T = 2\\pi a \\sqrt{\\frac{a}{G M}}"));
        assert_eq!(sg_check_equivalence(a.as_ptr(), b.as_ptr(), ptr::null(), &params, &mut out), SgStatus::Ok);
        assert_eq!(out, 1);
        assert!(sg_last_error_message().is_null());

        let wrong = c("T = 4\\pi a \\sqrt{\\frac{a}{G M}}");
        assert_eq!(sg_check_equivalence(a.as_ptr(), wrong.as_ptr(), ptr::null(), ptr::null(), &mut out), SgStatus::Ok);
        assert_eq!(out, 0);

        let mut consts = ptr::null_mut();
        assert_eq!(sg_constants_default(&mut consts), SgStatus::Ok);
        let (f1, f2) = (c("F = \\frac{k Q q}{r^2}"), c("F = \\frac{Q q}{4\\pi\\epsilon_0 r^2}"));
        assert_eq!(sg_check_equivalence(f1.as_ptr(), f2.as_ptr(), consts, ptr::null(), &mut out), SgStatus::Ok);
        assert_eq!(out, 1);
        sg_constants_free(consts);

        let mut light = ptr::null_mut();
        let json = c(r#"{"c": 3.0e8}"#);
        assert_eq!(sg_constants_from_json(json.as_ptr(), &mut light), SgStatus::Ok);
        let (e1, e2) = (c("E = m c^2"), c("E = m \\cdot (3.0 \\times 10^{8})^2"));
        assert_eq!(sg_check_equivalence(e1.as_ptr(), e2.as_ptr(), light, ptr::null(), &mut out), SgStatus::Ok);
        assert_eq!(out, 1);
        sg_constants_free(light);
    }
}

#[test]
fn errors_set_status_and_message() {
    unsafe {
        let mut out = 0;
        let ok = c("x = 1");
        assert_eq!(
            sg_check_equivalence(ptr::null(), ok.as_ptr(), ptr::null(), ptr::null(), &mut out),
            SgStatus::NullPointer
        );
        assert!(last_error().contains("first"));

        let bad = c("\\int x dx = y");
        assert_eq!(
            sg_check_equivalence(bad.as_ptr(), ok.as_ptr(), ptr::null(), ptr::null(), &mut out),
            SgStatus::ParseError
        );
        assert!(last_error().contains("int"));

        let mut params = std::mem::zeroed::<SgParams>();
        sg_params_default(&mut params);
        params.n_succ = 100;
        assert_eq!(
            sg_check_equivalence(ok.as_ptr(), ok.as_ptr(), ptr::null(), &params, &mut out),
            SgStatus::InvalidArgument
        );

        let mut consts = ptr::null_mut();
        let json = c(r#"{"g": "not latex \\int"}"#);
        assert_eq!(sg_constants_from_json(json.as_ptr(), &mut consts), SgStatus::ParseError);
        assert!(consts.is_null());

        let mut ds = ptr::null_mut();
        let missing = c("/nonexistent/dataset.json");
        assert_eq!(sg_dataset_load(missing.as_ptr(), &mut ds), SgStatus::Io);
        assert!(ds.is_null());
        assert_eq!(sg_params_default(ptr::null_mut()), SgStatus::NullPointer);

        sg_constants_free(ptr::null_mut());
        sg_dataset_free(ptr::null_mut());
        sg_string_free(ptr::null_mut());
    }
}

#[test]
fn grading_through_the_abi() {
    unsafe {
        let mut ds = ptr::null_mut();
        let path = c(&fixture("sample_problem.json"));
        assert_eq!(sg_dataset_load(path.as_ptr(), &mut ds), SgStatus::Ok);
        assert_eq!(sg_dataset_len(ds), 1);

        let cand = c(r#"{"problem_id": 1001, "solution": "Hence $$Q = 0$$."}"#);
        let mut json = ptr::null_mut();
        assert_eq!(sg_grade_solution_json(ds, cand.as_ptr(), ptr::null(), ptr::null(), &mut json), SgStatus::Ok);
        let report: serde_json::Value = serde_json::from_str(CStr::from_ptr(json).to_str().unwrap()).unwrap();
        sg_string_free(json);
        assert_eq!(report["score"], "1/1");
        // node 23 simplifies to Q = 0 as well
        assert_eq!(report["matched"], serde_json::json!([23, 24]));

        let unknown = c(r#"{"problem_id": 5, "solution": ""}"#);
        let mut json = ptr::null_mut();
        assert_eq!(
            sg_grade_solution_json(ds, unknown.as_ptr(), ptr::null(), ptr::null(), &mut json),
            SgStatus::NotFound
        );
        assert!(json.is_null());
        assert!(last_error().contains("5"));
        sg_dataset_free(ds);
    }
}

#[test]
fn kendall_through_the_abi() {
    let x = [1.0, 2.0, 3.0, 4.0];
    let rev = [4.0, 3.0, 2.0, 1.0];
    let (mut tau, mut p) = (0.0, 0.0);
    unsafe {
        assert_eq!(sg_kendall_tau_b(x.as_ptr(), rev.as_ptr(), 4, &mut tau, &mut p), SgStatus::Ok);
        assert_eq!(tau, -1.0);
        assert!(p > 0.0 && p < 1.0);
        let flat = [2.0; 4];
        assert_eq!(sg_kendall_tau_b(x.as_ptr(), flat.as_ptr(), 4, &mut tau, &mut p), SgStatus::Undefined);
        assert_eq!(sg_kendall_tau_b(x.as_ptr(), x.as_ptr(), 1, &mut tau, &mut p), SgStatus::InvalidArgument);
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(sg_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_the_api_and_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/stepgrade.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "sg_check_equivalence",
        "sg_constants_default",
        "sg_constants_from_json",
        "sg_constants_free",
        "sg_dataset_load",
        "sg_dataset_free",
        "sg_grade_solution_json",
        "sg_string_free",
        "sg_kendall_tau_b",
        "sg_params_default",
        "sg_last_error_message",
        "SG_STATUS_UNDEFINED = 6",
    ] {
        assert!(text.contains(name), "header lacks {name}");
    }
    let dir = tempfile_dir();
    let src = dir.join("use_header.c");
    std::fs::write(
        &src,
        "#include \"stepgrade.h\"\nint probe(void) { SgParams p; SgStatus s = sg_params_default(&p); return (int)s + (int)p.n_max; }\n",
    )
    .unwrap();
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    match Command::new(&cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-fsyntax-only")
        .arg("-I")
        .arg(header.parent().unwrap())
        .arg(&src)
        .output()
    {
        Ok(out) => assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr)),
        Err(e) => eprintln!("skipping C compile check: {cc}: {e}"),
    }
}

fn tempfile_dir() -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("stepgrade-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}
