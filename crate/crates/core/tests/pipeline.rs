use std::path::Path;
use std::process::Command;

use mhealth_audit::fixtures::{generate_corpus, FixtureConfig};
use mhealth_audit::pipeline::{exit_status, run_pipeline, Audit, EXIT_FATAL, EXIT_PARTIAL};
use mhealth_audit::report::BUNDLE_FILES;

fn mhaudit(args: &[&str], envs: &[(&str, &Path)]) -> (i32, String) {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mhaudit"));
    cmd.arg("--quiet")
        .args(args)
        .env_remove("MHAUDIT_OUTPUT_DIR");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    let out = cmd.output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned() + &String::from_utf8_lossy(&out.stderr),
    )
}

fn bundle(dir: &Path) -> Vec<(String, Vec<u8>)> {
    BUNDLE_FILES
        .iter()
        .map(|f| (f.to_string(), std::fs::read(dir.join(f)).unwrap()))
        .collect()
}

#[test]
fn missing_capture_is_recorded_and_exits_partial() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate_corpus(&FixtureConfig::roundtrip(1), dir.path()).unwrap();
    std::fs::remove_file(
        dir.path()
            .join("captures/org.fixture.roundtrip2.manual.har"),
    )
    .unwrap();

    let audit = Audit::load(&corpus.manifest, None).unwrap();
    let result = run_pipeline(&audit);
    assert_eq!(exit_status(&result), EXIT_PARTIAL);
    let ledger = result.unwrap();
    assert_eq!(ledger.len(), 1);
    assert_eq!(ledger[0].app_id, "org.fixture.roundtrip2");
    assert_eq!(ledger[0].stage, "capture");
    for f in BUNDLE_FILES {
        assert!(audit.output_dir.join(f).is_file(), "{f} missing");
    }
    let summary = std::fs::read_to_string(audit.output_dir.join("summary.json")).unwrap();
    assert!(summary.contains("org.fixture.roundtrip2"));

    let (code, _) = mhaudit(
        &["run", "--manifest", corpus.manifest.to_str().unwrap()],
        &[],
    );
    assert_eq!(code, EXIT_PARTIAL);
}

#[test]
fn broken_artifact_is_recorded_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate_corpus(&FixtureConfig::roundtrip(1), dir.path()).unwrap();
    std::fs::write(
        dir.path().join("artifacts/org.fixture.roundtrip1.dex"),
        b"dex\n035\0garbage",
    )
    .unwrap();
    let audit = Audit::load(&corpus.manifest, None).unwrap();
    let ledger = run_pipeline(&audit).unwrap();
    assert_eq!(ledger.len(), 1);
    assert_eq!(ledger[0].stage, "scan-static");
}

#[test]
fn missing_taxonomy_is_fatal_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate_corpus(&FixtureConfig::roundtrip(1), dir.path()).unwrap();
    std::fs::remove_file(dir.path().join("taxonomy.json")).unwrap();
    let out = dir.path().join("out");

    let (code, log) = mhaudit(
        &["run", "--manifest", corpus.manifest.to_str().unwrap()],
        &[],
    );
    assert_eq!(code, EXIT_FATAL, "{log}");
    assert!(log.contains("taxonomy"), "{log}");
    assert!(!out.exists());
}

#[test]
fn unknown_manifest_field_is_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate_corpus(&FixtureConfig::decoy_only(1, 1, 1), dir.path()).unwrap();
    let text = std::fs::read_to_string(&corpus.manifest).unwrap();
    std::fs::write(&corpus.manifest, text.replacen('{', "{\"colour\": 1,", 1)).unwrap();
    let (code, _) = mhaudit(
        &["detect", "--manifest", corpus.manifest.to_str().unwrap()],
        &[],
    );
    assert_eq!(code, EXIT_FATAL);
}

#[test]
fn subcommands_compose_to_the_same_bundle_as_run() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate_corpus(&FixtureConfig::crawl_comparison(4), dir.path()).unwrap();
    let manifest = corpus.manifest.to_str().unwrap();
    let staged = dir.path().join("staged");
    let whole = dir.path().join("whole");

    for cmd in [
        "scan-static",
        "classify-hosts",
        "detect",
        "assess",
        "report",
    ] {
        let (code, log) = mhaudit(
            &[
                cmd,
                "--manifest",
                manifest,
                "--output-dir",
                staged.to_str().unwrap(),
            ],
            &[],
        );
        assert_eq!(code, 0, "{cmd}: {log}");
    }
    let (code, log) = mhaudit(
        &["--jobs", "3", "run", "--manifest", manifest],
        &[("MHAUDIT_OUTPUT_DIR", &whole)],
    );
    assert_eq!(code, 0, "{log}");
    assert_eq!(bundle(&staged), bundle(&whole));
}

#[test]
fn report_without_stages_is_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate_corpus(&FixtureConfig::decoy_only(1, 2, 1), dir.path()).unwrap();
    let (code, _) = mhaudit(
        &["report", "--manifest", corpus.manifest.to_str().unwrap()],
        &[],
    );
    assert_eq!(code, EXIT_FATAL);
}

#[test]
fn fixtures_gen_and_eval_from_the_command_line() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let (code, log) = mhaudit(
        &[
            "fixtures",
            "gen",
            "--preset",
            "roundtrip",
            "--seed",
            "8",
            "--out",
            corpus.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(code, 0, "{log}");
    let manifest = corpus.join("manifest.json");
    let (code, _) = mhaudit(&["detect", "--manifest", manifest.to_str().unwrap()], &[]);
    assert_eq!(code, 0);
    let (code, out) = mhaudit(
        &[
            "fixtures",
            "eval",
            "--truth",
            corpus.join("ground_truth.json").to_str().unwrap(),
            "--stages",
            corpus.join("out/stages").to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(code, 0, "{out}");
    let score: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(score["recall"], 1.0);
    assert_eq!(score["precision"], 1.0);

    let (code, _) = mhaudit(
        &[
            "fixtures",
            "gen",
            "--preset",
            "nope",
            "--out",
            dir.path().join("x").to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(code, EXIT_FATAL);
}

#[test]
fn same_seed_same_corpus() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    generate_corpus(&FixtureConfig::roundtrip(77), a.path()).unwrap();
    generate_corpus(&FixtureConfig::roundtrip(77), b.path()).unwrap();
    for f in [
        "manifest.json",
        "ground_truth.json",
        "hosts.txt",
        "captures/org.fixture.roundtrip0.manual.jsonl",
        "artifacts/org.fixture.roundtrip2.apk",
    ] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}
