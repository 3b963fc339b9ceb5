//! Runs every stage on a manifest and prints the headline figures.
//!
//! Usage: `cargo run --example full_audit [manifest.json]`. Without an
//! argument a 152-app synthetic corpus is generated first.

use mhealth_audit::fixtures::{generate_corpus, FixtureConfig};
use mhealth_audit::pipeline::{corpus_stats, run_pipeline, Audit, StageOutputs};

fn main() -> mhealth_audit::Result<()> {
    let manifest = match std::env::args_os().nth(1) {
        Some(path) => path.into(),
        None => {
            let dir = std::env::temp_dir().join("mhaudit-full-audit");
            let _ = std::fs::remove_dir_all(&dir);
            generate_corpus(&FixtureConfig::preset("anchors", 1)?, &dir)?.manifest
        }
    };
    let audit = Audit::load(&manifest, None)?;
    let ledger = run_pipeline(&audit)?;
    let stats = corpus_stats(&audit, &StageOutputs::load(&audit)?);

    let e = &stats.embedded;
    println!(
        "{} of {} apps embed a tracker ({}%), {:.2} per app",
        e.apps_with_tracker, e.apps, e.pct_apps_with_tracker, e.mean_trackers_per_app
    );
    let c = &stats.contacted;
    println!(
        "{} apps contact more tracker than non-tracker hosts, {} contact none",
        c.apps_more_trackers, c.apps_zero_trackers
    );
    let t = &stats.transmissions;
    println!(
        "{} of {} requests carry content",
        t.reviewed_requests, t.total_requests
    );
    println!(
        "{} ledger entries; bundle in {}",
        ledger.len(),
        audit.output_dir.display()
    );
    Ok(())
}
