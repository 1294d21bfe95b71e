//! C ABI for litera.
//!
//! Conventions:
//! - Every fallible function returns a [`LiteraStatus`]; on failure a
//!   message is available from [`litera_last_error`] on the same thread.
//! - Strings passed in are NUL-terminated UTF-8. Strings handed out are owned
//!   by the caller and released with [`litera_string_free`].
//! - Handles are opaque and released with their `_free` function. A handle
//!   may be used from one thread at a time.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::sync::Arc;

use litera_core::config::{AppConfig, ConfigError};
use litera_core::corpus::{export_finetune, load_corpus, Corpus, CorpusFormat};
use litera_core::llm::{LlmClient, MockBackend, MockScript, ProviderConfig};
use litera_core::metrics::{bleu_corpus, tokenize_13a, MetricsError};
use litera_core::pipeline::{Pipeline, PipelineError, Variant};
use litera_core::prompts::{PromptName, PromptRegistry};

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LiteraStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Io = 4,
    Config = 5,
    Provider = 6,
    Input = 7,
    Panic = 99,
}

/// Corpus BLEU with its components. Precisions are fractions in [0, 1].
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LiteraBleu {
    pub score: f64,
    pub precisions: [f64; 4],
    pub brevity_penalty: f64,
    pub sys_len: usize,
    pub ref_len: usize,
}

/// Parallel corpus loaded from JSONL or TSV.
pub struct LiteraCorpus {
    inner: Corpus,
}

/// Translation pipeline with its own async runtime.
pub struct LiteraPipeline {
    runtime: tokio::runtime::Runtime,
    pipeline: Pipeline,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(LiteraStatus, String);

type FfiResult<T> = Result<T, Failure>;

fn fail<T>(status: LiteraStatus, msg: impl Into<String>) -> FfiResult<T> {
    Err(Failure(status, msg.into()))
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', "\\0")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> FfiResult<()>) -> LiteraStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LiteraStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            LiteraStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return fail(LiteraStatus::NullArgument, format!("{what} is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .or_else(|_| fail(LiteraStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn opt_str_arg<'a>(p: *const c_char, what: &str) -> FfiResult<Option<&'a str>> {
    if p.is_null() {
        Ok(None)
    } else {
        str_arg(p, what).map(Some)
    }
}

fn out_check<T>(p: *mut T, what: &str) -> FfiResult<()> {
    if p.is_null() {
        fail(LiteraStatus::NullArgument, format!("{what} is null"))
    } else {
        Ok(())
    }
}

fn to_c_string(s: &str) -> FfiResult<*mut c_char> {
    CString::new(s)
        .map(CString::into_raw)
        .or_else(|_| fail(LiteraStatus::InvalidArgument, "output contains an interior NUL byte"))
}

fn config_failure(e: ConfigError) -> Failure {
    match e {
        ConfigError::Pipeline(p) => pipeline_failure(p),
        other => Failure(LiteraStatus::Config, other.to_string()),
    }
}

fn pipeline_failure(e: PipelineError) -> Failure {
    let status = match &e {
        PipelineError::Config(_) => LiteraStatus::Config,
        PipelineError::Stage { .. } => LiteraStatus::Provider,
        _ => LiteraStatus::Input,
    };
    Failure(status, e.to_string())
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next litera call on this thread; do not free it.
#[no_mangle]
pub extern "C" fn litera_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string; do not free it.
#[no_mangle]
pub extern "C" fn litera_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn litera_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// 13a tokenization. `*out` receives the tokens joined by single spaces.
#[no_mangle]
pub unsafe extern "C" fn litera_tokenize_13a(text: *const c_char, out: *mut *mut c_char) -> LiteraStatus {
    guard(|| {
        let text = str_arg(text, "text")?;
        out_check(out, "out")?;
        *out = to_c_string(&tokenize_13a(text).join())?;
        Ok(())
    })
}

/// Corpus BLEU over `n` aligned hypothesis/reference strings.
#[no_mangle]
pub unsafe extern "C" fn litera_bleu(
    hypotheses: *const *const c_char,
    references: *const *const c_char,
    n: usize,
    out: *mut LiteraBleu,
) -> LiteraStatus {
    guard(|| {
        out_check(out, "out")?;
        if n == 0 {
            return fail(LiteraStatus::InvalidArgument, "no segments to score");
        }
        if hypotheses.is_null() || references.is_null() {
            return fail(LiteraStatus::NullArgument, "hypotheses or references is null");
        }
        let read = |arr: *const *const c_char, what: &str| -> FfiResult<Vec<&str>> {
            (0..n).map(|i| str_arg(*arr.add(i), &format!("{what}[{i}]"))).collect()
        };
        let hyps = read(hypotheses, "hypotheses")?;
        let refs = read(references, "references")?;
        let s = bleu_corpus(&hyps, &refs).map_err(|e: MetricsError| Failure(LiteraStatus::InvalidArgument, e.to_string()))?;
        *out = LiteraBleu {
            score: s.score,
            precisions: s.precisions,
            brevity_penalty: s.brevity_penalty,
            sys_len: s.sys_len,
            ref_len: s.ref_len,
        };
        Ok(())
    })
}

/// Built-in prompt text by name (`fine_tuned_system`, `revision`,
/// `final_filter`, `non_literal`, `baseline_translator`, `output_cleaner`).
#[no_mangle]
pub unsafe extern "C" fn litera_prompt_text(name: *const c_char, out: *mut *mut c_char) -> LiteraStatus {
    guard(|| {
        let name = str_arg(name, "name")?;
        out_check(out, "out")?;
        let name: PromptName = name
            .parse()
            .map_err(|e: litera_core::prompts::PromptError| Failure(LiteraStatus::InvalidArgument, e.to_string()))?;
        *out = to_c_string(PromptRegistry::builtin().text(name))?;
        Ok(())
    })
}

/// Loads a corpus; the format follows the extension (`.tsv` or JSONL).
#[no_mangle]
pub unsafe extern "C" fn litera_corpus_load(path: *const c_char, out: *mut *mut LiteraCorpus) -> LiteraStatus {
    guard(|| {
        let path = Path::new(str_arg(path, "path")?);
        out_check(out, "out")?;
        let inner = load_corpus(path, CorpusFormat::from_path(path)).map_err(|e| {
            let status = match e {
                litera_core::corpus::CorpusError::Io { .. } => LiteraStatus::Io,
                _ => LiteraStatus::Input,
            };
            Failure(status, e.to_string())
        })?;
        *out = Box::into_raw(Box::new(LiteraCorpus { inner }));
        Ok(())
    })
}

/// Segment count, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn litera_corpus_len(corpus: *const LiteraCorpus) -> usize {
    corpus.as_ref().map_or(0, |c| c.inner.len())
}

/// Writes chat-format fine-tuning records using the built-in fine-tuned
/// system prompt. `out_count` may be null.
#[no_mangle]
pub unsafe extern "C" fn litera_corpus_export_finetune(
    corpus: *const LiteraCorpus,
    out_path: *const c_char,
    out_count: *mut usize,
) -> LiteraStatus {
    guard(|| {
        let Some(corpus) = corpus.as_ref() else {
            return fail(LiteraStatus::NullArgument, "corpus is null");
        };
        let path = Path::new(str_arg(out_path, "out_path")?);
        let prompt = PromptRegistry::builtin();
        let n = export_finetune(&corpus.inner, prompt.text(PromptName::FineTunedSystem), path)
            .map_err(|e| Failure(LiteraStatus::Input, e.to_string()))?;
        if !out_count.is_null() {
            *out_count = n;
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn litera_corpus_free(corpus: *mut LiteraCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

fn runtime() -> FfiResult<tokio::runtime::Runtime> {
    tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()
        .or_else(|e| fail(LiteraStatus::Config, format!("cannot start runtime: {e}")))
}

fn parse_variant(v: Option<&str>) -> FfiResult<Option<Variant>> {
    v.map(|s| s.parse::<Variant>().map_err(|e| Failure(LiteraStatus::InvalidArgument, e)))
        .transpose()
}

/// Pipeline from a TOML config file. A null path uses `LITERA_CONFIG` or
/// defaults; environment overrides apply either way.
#[no_mangle]
pub unsafe extern "C" fn litera_pipeline_from_config(
    config_path: *const c_char,
    out: *mut *mut LiteraPipeline,
) -> LiteraStatus {
    guard(|| {
        let path = opt_str_arg(config_path, "config_path")?;
        out_check(out, "out")?;
        let cfg = AppConfig::load(path.map(Path::new)).map_err(config_failure)?;
        let runtime = runtime()?;
        let pipeline = {
            let _enter = runtime.enter();
            cfg.pipeline().map_err(config_failure)?
        };
        *out = Box::into_raw(Box::new(LiteraPipeline { runtime, pipeline }));
        Ok(())
    })
}

/// Offline pipeline answering from a mock script (TOML, or JSON by
/// extension). `variant` may be null for the full pipeline.
#[no_mangle]
pub unsafe extern "C" fn litera_pipeline_from_mock(
    script_path: *const c_char,
    variant: *const c_char,
    out: *mut *mut LiteraPipeline,
) -> LiteraStatus {
    guard(|| {
        let path = str_arg(script_path, "script_path")?;
        let variant = parse_variant(opt_str_arg(variant, "variant")?)?;
        out_check(out, "out")?;
        let script = MockScript::from_file(Path::new(path)).map_err(|e| Failure(LiteraStatus::Config, e.to_string()))?;
        let client = LlmClient::new(Arc::new(MockBackend::new(script)), ProviderConfig::default().retry_policy());
        let mut cfg = litera_core::pipeline::PipelineConfig::default();
        if let Some(v) = variant {
            cfg.variant = v;
        }
        let pipeline = Pipeline::new(client, Arc::new(PromptRegistry::builtin()), cfg).map_err(pipeline_failure)?;
        *out = Box::into_raw(Box::new(LiteraPipeline {
            runtime: runtime()?,
            pipeline,
        }));
        Ok(())
    })
}

/// Changes the variant used by later translations.
#[no_mangle]
pub unsafe extern "C" fn litera_pipeline_set_variant(pipeline: *mut LiteraPipeline, variant: *const c_char) -> LiteraStatus {
    guard(|| {
        let Some(p) = pipeline.as_mut() else {
            return fail(LiteraStatus::NullArgument, "pipeline is null");
        };
        let v = parse_variant(Some(str_arg(variant, "variant")?))?.expect("present");
        p.pipeline = p.pipeline.with_variant(v);
        Ok(())
    })
}

/// Translates one segment. `out_final` receives the literal translation.
/// When `non_literal` is nonzero the readability pass also runs and
/// `out_non_literal` (if not null) receives it. `out_trace_json` (if not
/// null) receives the JSON trace.
#[no_mangle]
pub unsafe extern "C" fn litera_pipeline_translate(
    pipeline: *const LiteraPipeline,
    latin: *const c_char,
    non_literal: c_int,
    out_final: *mut *mut c_char,
    out_non_literal: *mut *mut c_char,
    out_trace_json: *mut *mut c_char,
) -> LiteraStatus {
    guard(|| {
        let Some(p) = pipeline.as_ref() else {
            return fail(LiteraStatus::NullArgument, "pipeline is null");
        };
        let latin = str_arg(latin, "latin")?;
        out_check(out_final, "out_final")?;
        let trace = p
            .runtime
            .block_on(async {
                if non_literal != 0 {
                    p.pipeline.translate_with_non_literal(latin).await
                } else {
                    p.pipeline.translate(latin).await
                }
            })
            .map_err(pipeline_failure)?;
        let final_text = to_c_string(&trace.final_text)?;
        let nl = match (&trace.non_literal, out_non_literal.is_null()) {
            (Some(t), false) => to_c_string(t)?,
            _ => ptr::null_mut(),
        };
        let json = if out_trace_json.is_null() {
            ptr::null_mut()
        } else {
            to_c_string(&trace.to_json(false).to_string())?
        };
        *out_final = final_text;
        if !out_non_literal.is_null() {
            *out_non_literal = nl;
        }
        if !out_trace_json.is_null() {
            *out_trace_json = json;
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn litera_pipeline_free(pipeline: *mut LiteraPipeline) {
    if !pipeline.is_null() {
        let p = Box::from_raw(pipeline);
        p.runtime.shutdown_background();
    }
}
