//! Scope findings and privacy-label verdicts for one app from planted hits.

use mhealth_audit::assess::{assess_app, ExpectationPolicy};
use mhealth_audit::capture::Location;
use mhealth_audit::detect::{AppRollup, DetectionHit, VariantKind};
use mhealth_audit::hostclass::HostLabel;
use mhealth_audit::model::{
    AppRecord, CaptureRef, CrawlKind, FeatureCategory, LabelCategory, LabelDeclaration,
    PrivacyLabelSet, Taxonomy,
};

fn hit(data_type: &str, label: HostLabel) -> DetectionHit {
    DetectionHit {
        app_id: "com.example.learn".into(),
        flow_id: "demo.jsonl#0".into(),
        data_type_id: data_type.into(),
        variant_kind: VariantKind::Plain,
        location: Location::Body,
        destination_host: "host.example".into(),
        host_label: label,
        crawl_kind: CrawlKind::Manual,
    }
}

fn main() -> mhealth_audit::Result<()> {
    let app = AppRecord {
        app_id: "com.example.learn".into(),
        display_name: "Learn Health".into(),
        feature_category: FeatureCategory::HealthEducation,
        labels: PrivacyLabelSet::published(vec![LabelDeclaration {
            label: LabelCategory::DeviceOrOtherIds,
            collected: true,
            shared: false,
        }])
        .expect("distinct labels"),
        artifact: None,
        captures: vec![CaptureRef {
            path: "demo.jsonl".into(),
            crawl: CrawlKind::Manual,
        }],
    };
    let mut rollup = AppRollup::default();
    rollup.record(&hit("advertising_id", HostLabel::Tracker));
    rollup.record(&hit("body_weight", HostLabel::NonTracker));
    rollup.record(&hit("city", HostLabel::NonTracker));

    let a = assess_app(
        &ExpectationPolicy::default_policy(),
        &Taxonomy::default_taxonomy(),
        &rollup,
        &app,
        Some(CrawlKind::Manual),
    )?;
    for f in a.findings.iter().filter(|f| f.transmitted) {
        println!(
            "{:<20} {}",
            f.data_category.display_name(),
            if f.in_scope {
                "in scope"
            } else {
                "OUT OF SCOPE"
            }
        );
    }
    for v in &a.verdicts {
        let names: Vec<&str> = v.verdicts.iter().map(|v| v.as_str()).collect();
        println!("{:<20} {}", v.label.as_str(), names.join(", "));
    }
    Ok(())
}
