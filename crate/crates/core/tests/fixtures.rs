use mhealth_audit::fixtures::{evaluate_detector, generate_corpus, FixtureConfig};
use mhealth_audit::pipeline::{run_detect, run_pipeline, Audit};

fn detect(
    config: &FixtureConfig,
) -> (
    mhealth_audit::detect::DetectionSet,
    mhealth_audit::fixtures::GroundTruth,
) {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate_corpus(config, dir.path()).unwrap();
    let audit = Audit::load(&corpus.manifest, Some(&dir.path().join("out"))).unwrap();
    (run_detect(&audit).unwrap(), corpus.truth)
}

#[test]
fn roundtrip_recovers_every_plant() {
    let (set, truth) = detect(&FixtureConfig::roundtrip(7));
    let score = evaluate_detector(&set, &truth).unwrap();
    assert!(score.missed.is_empty(), "missed: {:#?}", score.missed);
    assert!(score.spurious.is_empty(), "spurious: {:#?}", score.spurious);
    assert!(score.planted >= 200);
    assert_eq!(
        set.total_requests,
        truth.apps.iter().map(|a| a.requests).sum::<usize>()
    );
    assert_eq!(
        set.reviewed_requests,
        truth.apps.iter().map(|a| a.reviewable).sum::<usize>()
    );
}

#[test]
fn decoy_traffic_has_no_hits() {
    let (set, truth) = detect(&FixtureConfig::decoy_only(3, 12, 20));
    assert!(truth.hits.is_empty());
    assert!(
        set.hits.is_empty(),
        "{:#?}",
        &set.hits[..set.hits.len().min(5)]
    );
}

#[test]
fn other_presets_round_trip() {
    for config in [
        FixtureConfig::crawl_comparison(5),
        FixtureConfig::preset("anchors", 5).unwrap(),
    ] {
        let (set, truth) = detect(&config);
        let score = evaluate_detector(&set, &truth).unwrap();
        assert!(
            score.missed.is_empty() && score.spurious.is_empty(),
            "{score:#?}"
        );
    }
}

#[test]
fn generated_corpus_runs_clean() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate_corpus(&FixtureConfig::roundtrip(11), dir.path()).unwrap();
    let audit = Audit::load(&corpus.manifest, None).unwrap();
    assert_eq!(run_pipeline(&audit).unwrap(), vec![]);
}
