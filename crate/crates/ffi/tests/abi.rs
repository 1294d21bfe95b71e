use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::ptr;

use litera_ffi::*;

fn core_fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

unsafe fn take(s: *mut std::ffi::c_char) -> String {
    let out = CStr::from_ptr(s).to_str().unwrap().to_string();
    litera_string_free(s);
    out
}

unsafe fn last_error() -> String {
    CStr::from_ptr(litera_last_error()).to_str().unwrap().to_string()
}

#[test]
fn bleu_matches_oracle_fixture() {
    let data: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(core_fixture("bleu_oracle.json")).unwrap()).unwrap();
    for pair in data["pairs"].as_array().unwrap() {
        let h = c(pair["hypothesis"].as_str().unwrap());
        let r = c(pair["reference"].as_str().unwrap());
        let mut out = LiteraBleu::default();
        let status = unsafe { litera_bleu(&h.as_ptr(), &r.as_ptr(), 1, &mut out) };
        assert_eq!(status, LiteraStatus::Ok);
        assert!((out.score - pair["expected"]["score"].as_f64().unwrap()).abs() <= 0.01);
    }
}

#[test]
fn bleu_argument_errors() {
    let mut out = LiteraBleu::default();
    unsafe {
        assert_eq!(litera_bleu(ptr::null(), ptr::null(), 0, &mut out), LiteraStatus::InvalidArgument);
        assert_eq!(litera_bleu(ptr::null(), ptr::null(), 1, &mut out), LiteraStatus::NullArgument);
    }
}

#[test]
fn prompt_lookup() {
    let mut out = ptr::null_mut();
    unsafe {
        assert_eq!(litera_prompt_text(c("final_filter").as_ptr(), &mut out), LiteraStatus::Ok);
        assert!(take(out).starts_with("You are the final filter"));
        assert_eq!(litera_prompt_text(c("nope").as_ptr(), &mut out), LiteraStatus::InvalidArgument);
        assert!(!last_error().is_empty());
    }
}

#[test]
fn corpus_handle() {
    let dir = tempfile::tempdir().unwrap();
    let path = c(core_fixture("classical_small.tsv").to_str().unwrap());
    let out_path = c(dir.path().join("ft.jsonl").to_str().unwrap());
    unsafe {
        let mut corpus = ptr::null_mut();
        assert_eq!(litera_corpus_load(path.as_ptr(), &mut corpus), LiteraStatus::Ok);
        assert_eq!(litera_corpus_len(corpus), 5);
        let mut n = 0usize;
        assert_eq!(litera_corpus_export_finetune(corpus, out_path.as_ptr(), &mut n), LiteraStatus::Ok);
        assert_eq!(n, 5);
        litera_corpus_free(corpus);
        assert_eq!(litera_corpus_len(ptr::null()), 0);

        let missing = c("/nonexistent/x.jsonl");
        assert_eq!(litera_corpus_load(missing.as_ptr(), &mut corpus), LiteraStatus::Io);
    }
}

#[test]
fn mock_pipeline_translation() {
    let script = c(core_fixture("mock_pipeline.toml").to_str().unwrap());
    unsafe {
        let mut p = ptr::null_mut();
        assert_eq!(litera_pipeline_from_mock(script.as_ptr(), ptr::null(), &mut p), LiteraStatus::Ok);
        let (mut fin, mut nl, mut trace) = (ptr::null_mut(), ptr::null_mut(), ptr::null_mut());
        let latin = c("Gallia est omnis divisa");
        assert_eq!(litera_pipeline_translate(p, latin.as_ptr(), 1, &mut fin, &mut nl, &mut trace), LiteraStatus::Ok);
        assert_eq!(take(fin), "revised translation 6");
        assert_eq!(take(nl), "a freer rendering");
        let trace: serde_json::Value = serde_json::from_str(&take(trace)).unwrap();
        assert_eq!(trace["calls"].as_array().unwrap().len(), 13);

        assert_eq!(litera_pipeline_set_variant(p, c("single_baseline").as_ptr()), LiteraStatus::Ok);
        assert_eq!(
            litera_pipeline_translate(p, latin.as_ptr(), 0, &mut fin, ptr::null_mut(), ptr::null_mut()),
            LiteraStatus::Ok
        );
        assert_eq!(take(fin), "aggregator single translation");

        assert_eq!(litera_pipeline_set_variant(p, c("bogus").as_ptr()), LiteraStatus::InvalidArgument);
        let empty = c("   ");
        assert_eq!(
            litera_pipeline_translate(p, empty.as_ptr(), 0, &mut fin, ptr::null_mut(), ptr::null_mut()),
            LiteraStatus::Input
        );
        litera_pipeline_free(p);
    }
}

#[test]
fn provider_failure_status() {
    let dir = tempfile::tempdir().unwrap();
    let script_path = dir.path().join("fail.toml");
    std::fs::write(&script_path, "[[rules]]\nfail_permanent = true\n").unwrap();
    let script = c(script_path.to_str().unwrap());
    unsafe {
        let mut p = ptr::null_mut();
        assert_eq!(litera_pipeline_from_mock(script.as_ptr(), ptr::null(), &mut p), LiteraStatus::Ok);
        let mut fin = ptr::null_mut();
        let latin = c("Salve");
        assert_eq!(
            litera_pipeline_translate(p, latin.as_ptr(), 0, &mut fin, ptr::null_mut(), ptr::null_mut()),
            LiteraStatus::Provider
        );
        assert!(last_error().contains("propose"));
        litera_pipeline_free(p);
    }
}

#[test]
fn config_pipeline_without_key_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[provider]\napi_key_env = \"LITERA_FFI_TEST_UNSET\"\n").unwrap();
    let cfg = c(cfg.to_str().unwrap());
    unsafe {
        let mut p = ptr::null_mut();
        assert_eq!(litera_pipeline_from_config(cfg.as_ptr(), &mut p), LiteraStatus::Config);
        assert!(p.is_null());
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(litera_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

/// Compiles the C smoke program against the generated header and the
/// shared library, when a C compiler is available.
#[test]
fn c_program_links_and_runs() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("liblitera_ffi.so");
    if std::process::Command::new("cc").arg("--version").output().is_err() || !lib.exists() {
        eprintln!("skipping: no C compiler or shared library at {}", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("smoke");
    let status = std::process::Command::new("cc")
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg("-L")
        .arg(profile_dir)
        .arg("-llitera_ffi")
        .arg(format!("-Wl,-rpath,{}", profile_dir.display()))
        .arg("-o")
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let out = std::process::Command::new(&bin)
        .arg(core_fixture("mock_pipeline.toml"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "revised translation 6\na freer rendering\n");
}
