use std::collections::BTreeMap;
use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use vsearch::autocomplete::CompletionIndex;
use vsearch::data::formats::write_documents;
use vsearch::data::{DocumentRecord, Vertical};
use vsearch_ffi::*;

/// A data directory with two documents and a model directory holding only
/// a completion index.
fn fixture() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let models = dir.path().join("models");
    std::fs::create_dir_all(&data).unwrap();
    std::fs::create_dir_all(&models).unwrap();
    let docs = vec![
        DocumentRecord {
            id: 1,
            vertical: Vertical::Job,
            fields: BTreeMap::from([("title".to_string(), "data scientist".to_string())]),
        },
        DocumentRecord {
            id: 2,
            vertical: Vertical::Job,
            fields: BTreeMap::from([("title".to_string(), "data engineer".to_string())]),
        },
    ];
    std::fs::write(data.join("documents.jsonl"), write_documents(&docs).unwrap()).unwrap();
    let queries = ["data scientist", "data scientist", "data engineer"];
    CompletionIndex::build(&queries, 1).save_dir(&models.join("completion")).unwrap();
    let cfg = dir.path().join("serve.cfg");
    std::fs::write(&cfg, "model_dir = models\ndata_dir = data\n").unwrap();
    (dir, cfg)
}

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(vs_last_error()) }.to_string_lossy().into_owned()
}

fn open(cfg: &Path) -> *mut VsEngine {
    let mut engine = ptr::null_mut();
    let path = cstr(cfg.to_str().unwrap());
    let status = unsafe { vs_engine_open(path.as_ptr(), &mut engine) };
    assert_eq!(status, VsStatus::Ok, "{}", last_error());
    assert!(!engine.is_null());
    engine
}

fn handle(engine: *const VsEngine, req: &str) -> (VsStatus, Option<serde_json::Value>) {
    let req = cstr(req);
    let mut out: *mut c_char = ptr::null_mut();
    let status = unsafe { vs_engine_handle(engine, req.as_ptr(), &mut out) };
    if out.is_null() {
        return (status, None);
    }
    let text = unsafe { CStr::from_ptr(out) }.to_str().unwrap().to_string();
    unsafe { vs_string_free(out) };
    (status, Some(serde_json::from_str(&text).unwrap()))
}

#[test]
fn autocomplete_round_trip() {
    let (_dir, cfg) = fixture();
    let engine = open(&cfg);
    let (status, body) = handle(engine, r#"{"endpoint":"autocomplete","prefix":"data s","ranker":"frequency"}"#);
    assert_eq!(status, VsStatus::Ok, "{}", last_error());
    let body = body.unwrap();
    assert_eq!(body["candidates"][0]["text"], "data scientist");
    assert!(body["timings_us"].is_object());
    unsafe { vs_engine_free(engine) };
}

#[test]
fn errors_map_to_status_codes() {
    let (_dir, cfg) = fixture();
    let engine = open(&cfg);

    let (status, body) = handle(engine, r#"{"endpoint":"intent","q":"data"}"#);
    assert_eq!(status, VsStatus::Unavailable);
    assert!(body.is_none());
    assert!(last_error().contains("intent"));

    assert_eq!(handle(engine, "not json").0, VsStatus::Format);
    assert_eq!(
        handle(engine, r#"{"endpoint":"autocomplete","prefix":"d","ranker":"bogus"}"#).0,
        VsStatus::InvalidInput
    );

    let mut out: *mut c_char = ptr::null_mut();
    let req = cstr(r#"{"endpoint":"tag","q":"x"}"#);
    assert_eq!(unsafe { vs_engine_handle(ptr::null(), req.as_ptr(), &mut out) }, VsStatus::NullArgument);
    assert_eq!(unsafe { vs_engine_handle(engine, ptr::null(), &mut out) }, VsStatus::NullArgument);
    assert_eq!(unsafe { vs_engine_handle(engine, req.as_ptr(), ptr::null_mut()) }, VsStatus::NullArgument);

    let bad_utf8 = [0xffu8, 0xfe, 0];
    assert_eq!(
        unsafe { vs_engine_handle(engine, bad_utf8.as_ptr().cast(), &mut out) },
        VsStatus::InvalidUtf8
    );

    let mut health: *mut c_char = ptr::null_mut();
    assert_eq!(unsafe { vs_engine_health(engine, &mut health) }, VsStatus::Ok);
    let h: serde_json::Value = serde_json::from_str(unsafe { CStr::from_ptr(health) }.to_str().unwrap()).unwrap();
    unsafe { vs_string_free(health) };
    assert_eq!(h["completion"], true);
    assert_eq!(h["intent"], false);
    unsafe { vs_engine_free(engine) };
}

#[test]
fn open_failures() {
    let mut engine = ptr::null_mut();
    let missing = cstr("/nonexistent/serve.cfg");
    assert_eq!(unsafe { vs_engine_open(missing.as_ptr(), &mut engine) }, VsStatus::Io);
    assert!(engine.is_null());
    assert!(!last_error().is_empty());
    assert_eq!(unsafe { vs_engine_open(ptr::null(), &mut engine) }, VsStatus::NullArgument);
    unsafe {
        vs_engine_free(ptr::null_mut());
        vs_string_free(ptr::null_mut());
    }
}

#[test]
fn ndcg_and_version() {
    let mut v = 0.0;
    let perfect = [2u8, 1, 0];
    assert_eq!(unsafe { vs_ndcg_at_10(perfect.as_ptr(), perfect.len(), &mut v) }, VsStatus::Ok);
    assert_eq!(v, 1.0);
    let swapped = [0u8, 1];
    unsafe { vs_ndcg_at_10(swapped.as_ptr(), swapped.len(), &mut v) };
    let want = (1.0 / 3f64.log2()) / 1.0;
    assert!((v - want).abs() < 1e-12);
    assert_eq!(unsafe { vs_ndcg_at_10(ptr::null(), 3, &mut v) }, VsStatus::NullArgument);
    assert_eq!(unsafe { vs_ndcg_at_10(ptr::null(), 0, &mut v) }, VsStatus::Ok);
    let version = unsafe { CStr::from_ptr(vs_version()) }.to_str().unwrap();
    assert_eq!(version, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/vsearch.h")).unwrap();
    for name in [
        "vs_engine_open",
        "vs_engine_free",
        "vs_engine_handle",
        "vs_engine_health",
        "vs_ndcg_at_10",
        "vs_string_free",
        "vs_last_error",
        "vs_version",
        "typedef struct VsEngine VsEngine",
        "VS_STATUS_UNAVAILABLE = 4",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}

/// Compiles and runs a C program against the header and the static library.
#[test]
fn c_program_links_against_the_static_library() {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    // target/<profile>/deps/<test binary>
    let profile_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let lib = profile_dir.join("libvsearch_ffi.a");
    if !lib.exists() {
        // `cargo test` only builds the rlib.
        let mut build = Command::new(env!("CARGO"));
        build.args(["build", "-p", "vsearch-ffi", "--lib"]);
        if profile_dir.file_name().is_some_and(|n| n == "release") {
            build.arg("--release");
        }
        let status = build.current_dir(manifest).status().unwrap();
        assert!(status.success());
    }
    assert!(lib.exists(), "{} missing", lib.display());
    let (dir, cfg) = fixture();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include <string.h>
#include "vsearch.h"

int main(int argc, char **argv) {
    VsEngine *engine = NULL;
    if (vs_engine_open(argv[1], &engine) != VS_STATUS_OK) {
        fprintf(stderr, "%s\n", vs_last_error());
        return 1;
    }
    char *out = NULL;
    VsStatus s = vs_engine_handle(engine, "{\"endpoint\":\"autocomplete\",\"prefix\":\"data e\",\"ranker\":\"frequency\"}", &out);
    if (s != VS_STATUS_OK) return 2;
    int ok = strstr(out, "data engineer") != NULL;
    vs_string_free(out);
    s = vs_engine_handle(engine, "{\"endpoint\":\"search\",\"q\":\"data\"}", &out);
    vs_engine_free(engine);
    if (s != VS_STATUS_UNAVAILABLE || out != NULL) return 3;
    puts(vs_version());
    return ok ? 0 : 4;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("main");
    let cc = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .expect("a C compiler named cc");
    assert!(cc.status.success(), "{}", String::from_utf8_lossy(&cc.stderr));
    let run = Command::new(&exe).arg(&cfg).output().unwrap();
    assert!(run.status.success(), "exit {:?}: {}", run.status.code(), String::from_utf8_lossy(&run.stderr));
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), env!("CARGO_PKG_VERSION"));
}
