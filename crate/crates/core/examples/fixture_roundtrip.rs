//! Generates a seeded fixture corpus, runs detection on it and scores the
//! result against the planted ground truth.

use mhealth_audit::fixtures::{evaluate_detector, generate_corpus, FixtureConfig};
use mhealth_audit::pipeline::{run_detect, Audit};

fn main() -> mhealth_audit::Result<()> {
    let dir = std::env::temp_dir().join("mhaudit-fixture-roundtrip");
    let _ = std::fs::remove_dir_all(&dir);
    let corpus = generate_corpus(&FixtureConfig::roundtrip(42), &dir)?;
    let audit = Audit::load(&corpus.manifest, None)?;
    let detections = run_detect(&audit)?;
    let score = evaluate_detector(&detections, &corpus.truth)?;
    println!("corpus in {}", dir.display());
    println!(
        "planted {} detected {} recall {:.3} precision {:.3}",
        score.planted, score.detected, score.recall, score.precision
    );
    for (kind, s) in &score.per_variant {
        println!("  {:<16} {}/{}", kind.as_str(), s.recovered, s.planted);
    }
    Ok(())
}
