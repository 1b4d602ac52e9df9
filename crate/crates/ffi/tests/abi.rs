use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use tmformer_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(tmf_last_error_message()) }.to_string_lossy().into_owned()
}

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

#[test]
fn builtin_round_trip() {
    unsafe {
        let mut spec = ptr::null_mut();
        assert_eq!(tmf_spec_builtin(c("inc").as_ptr(), &mut spec), TmfStatus::Ok);
        let (mut states, mut symbols) = (0, 0);
        assert_eq!(tmf_spec_dims(spec, &mut states, &mut symbols), TmfStatus::Ok);
        assert_eq!((states, symbols), (2, 2));

        let mut program = ptr::null_mut();
        assert_eq!(tmf_compile(spec, 3, 0, 0.0, &mut program), TmfStatus::Ok);
        let (mut d, mut h) = (0, 0);
        assert_eq!(tmf_program_dims(program, &mut d, &mut h), TmfStatus::Ok);
        assert_eq!((d, h), (7, 11));

        let mut trace = ptr::null_mut();
        assert_eq!(tmf_simulate(program, c("111").as_ptr(), 10, &mut trace), TmfStatus::Ok);
        let mut len = 0;
        assert_eq!(tmf_trace_len(trace, &mut len), TmfStatus::Ok);
        assert_eq!(len, 5);
        let mut halted = 0;
        assert_eq!(tmf_trace_halted(trace, &mut halted), TmfStatus::Ok);
        assert_eq!(halted, 1);
        let mut first = 0;
        assert_eq!(tmf_trace_first_disagreement(trace, &mut first), TmfStatus::Ok);
        assert_eq!(first, -1);
        let mut rec = TmfStepRecord::default();
        for i in 0..len {
            assert_eq!(tmf_trace_step(trace, i, &mut rec), TmfStatus::Ok);
            assert_eq!(rec.step, i);
            assert_eq!(rec.agreement, 1);
            assert!(rec.distance < 1e-12);
        }
        assert_eq!(tmf_trace_step(trace, len, &mut rec), TmfStatus::OutOfRange);
        assert!(last_error().contains("out of range"));

        tmf_trace_free(trace);
        tmf_program_free(program);
        tmf_spec_free(spec);
    }
}

#[test]
fn parse_errors_are_reported() {
    unsafe {
        let mut spec = ptr::null_mut();
        assert_eq!(tmf_spec_parse(c("").as_ptr(), &mut spec), TmfStatus::ParseError);
        assert!(spec.is_null());
        assert!(last_error().contains("line 1"), "{}", last_error());

        let text = "states: q0 qa\nalphabet: _ 1\nblank: _\nstart: q0\naccept: qa\ndelta:\nq0 1 -> q0 1 R\nq0 _ -> qa 1 R\n";
        assert_eq!(tmf_spec_parse(c(text).as_ptr(), &mut spec), TmfStatus::Ok);
        assert_eq!(last_error(), "");
        let mut program = ptr::null_mut();
        assert_eq!(tmf_compile(spec, 4, 0, 0.0, &mut program), TmfStatus::CompileError);
        assert!(program.is_null());
        assert_eq!(tmf_compile(spec, 3, 1, 1.0, &mut program), TmfStatus::InvalidArgument);
        tmf_spec_free(spec);
    }
}

#[test]
fn null_pointers_are_rejected() {
    unsafe {
        let mut spec = ptr::null_mut();
        assert_eq!(tmf_spec_parse(ptr::null(), &mut spec), TmfStatus::NullPointer);
        assert_eq!(tmf_spec_builtin(c("inc").as_ptr(), ptr::null_mut()), TmfStatus::NullPointer);
        let mut len = 0;
        assert_eq!(tmf_trace_len(ptr::null(), &mut len), TmfStatus::NullPointer);
        assert_eq!(tmf_spec_builtin(c("nope").as_ptr(), &mut spec), TmfStatus::InvalidArgument);
        tmf_spec_free(ptr::null_mut());
        tmf_program_free(ptr::null_mut());
        tmf_trace_free(ptr::null_mut());
    }
}

#[test]
fn bounds_entry_points() {
    unsafe {
        let cap = tmf_capacity_unit();
        let mut m = 0.0;
        assert_eq!(tmf_sample_complexity_next_token(&cap, 1.0, (-2f64).exp(), &mut m), TmfStatus::Ok);
        assert!((m - 9.0).abs() < 1e-12);
        let two = TmfCapacity { b_spec: 2.0, ..cap };
        assert_eq!(tmf_sample_complexity_multiround(&two, 1.0, 0.5, 20, 20, &mut m), TmfStatus::Ok);
        assert!(m > 0.0);
        assert_eq!(tmf_rademacher_bound(&cap, 4, &mut m), TmfStatus::Ok);
        assert!((m - 0.5).abs() < 1e-15);
        assert_eq!(tmf_rademacher_bound(&cap, 0, &mut m), TmfStatus::BoundsError);
        assert_eq!(tmf_uniform_error_bound(0.5, 1.0, 1.0, 3, &mut m), TmfStatus::Ok);
        assert!((m - 4.25).abs() < 1e-14);
        assert_eq!(tmf_uniform_error_bound(1.5, 1.0, 1.0, 3, &mut m), TmfStatus::InvalidArgument);
    }
}

#[test]
fn generated_header_is_valid_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/tmformer.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["tmf_spec_parse", "tmf_compile", "tmf_simulate", "tmf_trace_step", "tmf_last_error_message"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let Ok(status) = Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"])
        .arg(&header)
        .status()
    else {
        eprintln!("no C compiler on PATH; header syntax not checked");
        return;
    };
    assert!(status.success());
}

const C_DRIVER: &str = r#"
#include <stdio.h>
#include "tmformer.h"

int main(void) {
    TmfSpec *spec = NULL;
    TmfProgram *program = NULL;
    TmfTrace *trace = NULL;
    size_t len = 0;
    int64_t first = 0;
    if (tmf_spec_builtin("copy", &spec) != TMF_STATUS_OK) return 1;
    if (tmf_compile(spec, 3, 0, 0.0, &program) != TMF_STATUS_OK) return 2;
    if (tmf_simulate(program, "1011", 50, &trace) != TMF_STATUS_OK) return 3;
    if (tmf_trace_len(trace, &len) != TMF_STATUS_OK) return 4;
    if (tmf_trace_first_disagreement(trace, &first) != TMF_STATUS_OK) return 5;
    if (tmf_spec_parse("", &spec) != TMF_STATUS_PARSE_ERROR) return 6;
    printf("%zu %lld %s\n", len, (long long)first, tmf_last_error_message());
    tmf_trace_free(trace);
    tmf_program_free(program);
    return 0;
}
"#;

#[test]
fn c_program_links_against_the_static_library() {
    // Test binaries live in target/<profile>/deps; the static library one level up.
    let exe = std::env::current_exe().unwrap();
    let lib = exe.parent().unwrap().parent().unwrap().join("libtmformer_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("static library or C compiler unavailable; link check skipped");
        return;
    }
    let dir = std::env::temp_dir().join(format!("tmformer-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let src = dir.join("driver.c");
    let bin = dir.join("driver");
    std::fs::write(&src, C_DRIVER).unwrap();
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let status = Command::new("cc")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "driver exited with {:?}", out.status.code());
    let stdout = String::from_utf8(out.stdout).unwrap();
    let fields: Vec<&str> = stdout.trim().splitn(3, ' ').collect();
    assert_eq!(fields[1], "-1");
    assert!(fields[0].parse::<usize>().unwrap() > 1);
    assert!(fields[2].contains("line 1"));
    let _ = std::fs::remove_dir_all(&dir);
}
