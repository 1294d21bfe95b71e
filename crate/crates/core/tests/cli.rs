mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::fixture;

fn litera(args: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_litera"));
    for (k, _) in std::env::vars() {
        if k.starts_with("LITERA_") {
            cmd.env_remove(k);
        }
    }
    cmd.args(args).output().unwrap()
}

fn mock() -> String {
    fixture("mock_pipeline.toml").display().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn translate_text_full() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.json");
    let out = litera(&[
        "--mock",
        &mock(),
        "translate",
        "--text",
        "Gallia est omnis divisa",
        "--variant",
        "full",
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout(&out), "revised translation 6\n");
    let traces: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&trace).unwrap()).unwrap();
    assert_eq!(traces[0]["calls"].as_array().unwrap().len(), 12);
}

#[test]
fn translate_input_non_literal() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "seg.txt", "Gallia est omnis divisa\n\nArma virumque cano\n");
    let out = litera(&["--mock", &mock(), "translate", "--input", &input, "--non-literal"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert_eq!(text.matches("Literal: ").count(), 2);
    assert_eq!(text.matches("Non-literal: a freer rendering").count(), 2);
}

#[test]
fn missing_api_key_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "[provider]\nbase_url = \"http://127.0.0.1:9/v1\"\napi_key_env = \"LITERA_TEST_UNSET_KEY\"\n",
    );
    let out = litera(&["--config", &cfg, "translate", "--text", "Salve"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).is_empty());
    assert!(stderr(&out).contains("LITERA_TEST_UNSET_KEY"));
}

#[test]
fn config_from_environment_variable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &format!("mock_script = {:?}\n[pipeline]\nvariant = \"single_baseline\"\n", mock()));
    let out = Command::new(env!("CARGO_BIN_EXE_litera"))
        .env("LITERA_CONFIG", &cfg)
        .args(["translate", "--text", "Salve"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout(&out), "aggregator single translation\n");
}

#[test]
fn provider_failure_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let script = write(
        dir.path(),
        "m.toml",
        "[[rules]]\nsystem_prefix = \"You are the final filter\"\nfail_permanent = true\n",
    );
    let out = litera(&["--mock", &script, "translate", "--text", "Salve"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("filter"));
    assert!(stdout(&out).is_empty());
}

#[test]
fn usage_errors_are_input_errors() {
    assert_eq!(litera(&["translate"]).status.code(), Some(3));
    assert_eq!(litera(&["--mock", &mock(), "translate", "--text", "  "]).status.code(), Some(3));
    assert_eq!(litera(&["--help"]).status.code(), Some(0));
}

#[test]
fn eval_identity_and_sorting() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = fixture("classical_small.jsonl");
    let refs = litera_core::corpus::load_corpus(&corpus, litera_core::corpus::CorpusFormat::Jsonl).unwrap();
    let perfect = write(dir.path(), "perfect.txt", &(refs.references().join("\n") + "\n"));
    let weak = write(dir.path(), "weak.txt", "Gaul\nthe bravest\nhow long\narms\nRome\n");
    let json = dir.path().join("report.json");
    let out = litera(&[
        "eval",
        "--ref",
        corpus.to_str().unwrap(),
        "--hyp",
        &format!("weak={weak}"),
        "--hyp",
        &format!("perfect={perfect}"),
        "--json",
        json.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("Model") && lines[0].contains("BLEU"));
    assert!(lines[2].starts_with("perfect") && lines[2].ends_with("100.00"));
    assert!(lines[3].starts_with("weak"));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
    assert_eq!(report["rows"][0]["system"], "perfect");
    assert_eq!(report["segment_count"], 5);
}

#[test]
fn eval_line_count_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let short = write(dir.path(), "short.txt", "one line\n");
    let corpus = fixture("classical_small.jsonl");
    let out = litera(&["eval", "--ref", corpus.to_str().unwrap(), "--hyp", &format!("shorty={short}")]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("shorty"));
}

#[test]
fn eval_external_subprocess_scorer() {
    let dir = tempfile::tempdir().unwrap();
    let scorer = write(dir.path(), "score.sh", "#!/bin/sh\nwhile IFS= read -r line; do echo 0.5; done\n");
    let cfg = write(
        dir.path(),
        "c.toml",
        &format!("[scorer]\nname = \"LEARNED\"\nmode = \"subprocess\"\ncommand = \"sh\"\nargs = [{scorer:?}]\n"),
    );
    let corpus = fixture("classical_small.jsonl");
    let refs = litera_core::corpus::load_corpus(&corpus, litera_core::corpus::CorpusFormat::Jsonl).unwrap();
    let hyp = write(dir.path(), "h.txt", &(refs.references().join("\n") + "\n"));
    let out = litera(&[
        "--config",
        &cfg,
        "eval",
        "--ref",
        corpus.to_str().unwrap(),
        "--hyp",
        &format!("sys={hyp}"),
        "--external",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.lines().next().unwrap().ends_with("LEARNED"));
    assert!(text.contains("0.5000"));
}

#[test]
fn ablate_two_variants() {
    let corpus = fixture("classical_small.jsonl");
    let out = litera(&[
        "--mock",
        &mock(),
        "ablate",
        "--corpus",
        corpus.to_str().unwrap(),
        "--variants",
        "full,single_fine_tuned",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 4);
    assert!(text.lines().nth(2).unwrap().starts_with("Full LITERA"));
    assert!(text.lines().nth(3).unwrap().starts_with("Fine-Tuned Only"));
    assert!(stderr(&out).contains("total calls: 65"));
}

#[test]
fn ablate_default_six_rows() {
    let corpus = fixture("classical_small.tsv");
    let out = litera(&["--mock", &mock(), "ablate", "--corpus", corpus.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let rows: Vec<String> = stdout(&out)
        .lines()
        .skip(2)
        .map(|l| l.split("  ").next().unwrap().to_string())
        .collect();
    assert_eq!(
        rows,
        [
            "Full LITERA",
            "No Middle Revision",
            "No Final Revision",
            "Base Candidate as Aggregator",
            "Mini Model Only",
            "Fine-Tuned Only"
        ]
    );
    assert!(stderr(&out).contains("total calls: 220"));
}

#[test]
fn ablate_bad_variants() {
    let corpus = fixture("classical_small.jsonl");
    let c = corpus.to_str().unwrap();
    let out = litera(&["--mock", &mock(), "ablate", "--corpus", c, "--variants", ""]);
    assert_eq!(out.status.code(), Some(3));
    let out = litera(&["--mock", &mock(), "ablate", "--corpus", c, "--variants", "full,fancy"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("no_final_revision"));
}

#[test]
fn export_finetune_writes_records_and_job_spec() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("train.jsonl");
    let out = litera(&[
        "export-finetune",
        "--corpus",
        fixture("classical_small.jsonl").to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout(&out), "5\n");
    let records = litera_core::corpus::parse_finetune(&out_path).unwrap();
    assert_eq!(records.len(), 5);
    assert!(records[0].system.starts_with("You are an advanced Latin translator"));
    assert!(dir.path().join("train.job.json").exists());
}

#[test]
fn export_finetune_missing_reference() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = write(dir.path(), "c.jsonl", "{\"latin\":\"Salve\"}\n");
    let out = litera(&["export-finetune", "--corpus", &corpus, "--out", dir.path().join("o.jsonl").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}
