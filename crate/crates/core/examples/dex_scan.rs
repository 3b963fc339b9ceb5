//! Builds a two-dex APK in memory and matches its classes against the
//! bundled tracker signatures.

use mhealth_audit::fixtures::{build_apk, build_dex};
use mhealth_audit::staticscan::{class_set_from_bytes, default_signature_db, match_trackers};

fn main() -> mhealth_audit::Result<()> {
    let first = build_dex(
        &[
            "com.example.steps.MainActivity".into(),
            "com.google.firebase.analytics.FirebaseAnalytics".into(),
        ],
        &[],
    );
    let second = build_dex(
        &[
            "com.facebook.appevents.AppEventsLogger".into(),
            // Shares a string prefix with a signature but not the package.
            "com.appsflyerx.Helper".into(),
        ],
        &[],
    );
    let apk = build_apk(&[first, second]);

    let classes = class_set_from_bytes(&apk, "com.example.steps")?;
    println!(
        "{} classes in {} dex files",
        classes.classes.len(),
        classes.dex_files
    );
    let report = match_trackers(&classes, &default_signature_db());
    for m in &report.matches {
        println!("  {:?}", m);
    }
    println!("trackers: {:?}", report.tracker_names);
    Ok(())
}
