//! Seeded synthetic corpora with exact ground truth, and scoring of
//! detector output against that truth.

mod dexwrite;
mod generate;
mod presets;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::assess::{DeclarationVerdict, ScopeFinding};
use crate::capture::Location;
use crate::detect::{DetectionHit, DetectionSet, VariantKind};
use crate::error::{Error, Result};
use crate::hostclass::HostLabel;
use crate::model::{CrawlKind, FeatureCategory, PrivacyLabelSet};

pub use dexwrite::{build_apk, build_dex, class_descriptor, encode_mutf8};
pub use generate::{generate_corpus, GeneratedCorpus};
pub use presets::{solve_targets, ScopeTableRow, TargetStats};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactStyle {
    #[default]
    ClassList,
    Dex,
    /// Multi-dex APK.
    Apk,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaptureStyle {
    #[default]
    Jsonl,
    /// JSONL with gzip-encoded request bodies.
    JsonlGzip,
    Har,
}

/// One planted transmission.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakPlan {
    pub data_type: String,
    pub variant: VariantKind,
    pub location: Location,
    pub destination: HostLabel,
    #[serde(default = "manual")]
    pub crawl: CrawlKind,
}

fn manual() -> CrawlKind {
    CrawlKind::Manual
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppPlan {
    pub app_id: String,
    #[serde(default)]
    pub display_name: String,
    pub feature_category: FeatureCategory,
    /// Signature ids whose code is embedded.
    #[serde(default)]
    pub embedded: Vec<String>,
    #[serde(default)]
    pub artifact: ArtifactStyle,
    #[serde(default)]
    pub capture: CaptureStyle,
    /// Hostnames contacted; trackers are written to the hosts list.
    #[serde(default)]
    pub tracker_hosts: Vec<String>,
    /// Defaults to one first-party API host.
    #[serde(default)]
    pub non_tracker_hosts: Vec<String>,
    /// Manual-crawl request count; derived from hosts and leaks if absent.
    #[serde(default)]
    pub requests: Option<usize>,
    /// Manual-crawl requests carrying a body.
    #[serde(default)]
    pub reviewable: Option<usize>,
    #[serde(default)]
    pub leaks: Vec<LeakPlan>,
    #[serde(default)]
    pub labels: PrivacyLabelSet,
}

impl AppPlan {
    pub fn new(app_id: &str, feature_category: FeatureCategory) -> Self {
        AppPlan {
            app_id: app_id.to_string(),
            display_name: String::new(),
            feature_category,
            embedded: Vec::new(),
            artifact: ArtifactStyle::default(),
            capture: CaptureStyle::default(),
            tracker_hosts: Vec::new(),
            non_tracker_hosts: Vec::new(),
            requests: None,
            reviewable: None,
            leaks: Vec::new(),
            labels: PrivacyLabelSet::unpublished(),
        }
    }
}

fn default_decoys() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureConfig {
    pub seed: u64,
    #[serde(default)]
    pub apps: Vec<AppPlan>,
    /// Reviewable decoy requests per app when `reviewable` is not given.
    #[serde(default = "default_decoys")]
    pub decoy_flow_count: usize,
    /// Replaces `apps` with a plan solved to hit these corpus figures.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_stats: Option<TargetStats>,
}

impl FixtureConfig {
    pub fn new(seed: u64, apps: Vec<AppPlan>) -> Self {
        FixtureConfig {
            seed,
            apps,
            decoy_flow_count: default_decoys(),
            target_stats: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidPlan(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// App plans, solving `target_stats` if present.
    pub fn resolved_apps(&self) -> Result<Vec<AppPlan>> {
        match &self.target_stats {
            Some(targets) if self.apps.is_empty() => solve_targets(targets),
            Some(_) => Err(Error::InvalidPlan(
                "target_stats and explicit apps are mutually exclusive".into(),
            )),
            None => Ok(self.apps.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppTruth {
    pub app_id: String,
    pub feature_category: FeatureCategory,
    pub signature_ids: Vec<String>,
    pub tracker_names: Vec<String>,
    pub tracker_hosts: Vec<String>,
    pub non_tracker_hosts: Vec<String>,
    /// All crawls.
    pub requests: usize,
    pub reviewable: usize,
}

/// What the pipeline must recover from a generated corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub apps: Vec<AppTruth>,
    /// Sorted.
    pub hits: Vec<DetectionHit>,
    /// Manual crawl, default policy.
    pub scope: Vec<ScopeFinding>,
    pub verdicts: Vec<DeclarationVerdict>,
}

impl GroundTruth {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }

    pub fn app_ids(&self) -> BTreeSet<&str> {
        self.apps.iter().map(|a| a.app_id.as_str()).collect()
    }

    /// The planted hits as a detection set, request counts included.
    pub fn detections(&self) -> DetectionSet {
        let mut set = DetectionSet::from_hits(
            self.apps.iter().map(|a| a.app_id.as_str()),
            self.hits.clone(),
        );
        set.total_requests = self.apps.iter().map(|a| a.requests).sum();
        set.reviewed_requests = self.apps.iter().map(|a| a.reviewable).sum();
        set
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct VariantScore {
    pub planted: usize,
    pub recovered: usize,
    pub recall: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectorScore {
    pub planted: usize,
    pub detected: usize,
    pub true_positives: usize,
    pub recall: f64,
    pub precision: f64,
    pub per_variant: BTreeMap<VariantKind, VariantScore>,
    pub missed: Vec<DetectionHit>,
    pub spurious: Vec<DetectionHit>,
}

fn ratio(n: usize, d: usize) -> f64 {
    if d == 0 {
        1.0
    } else {
        n as f64 / d as f64
    }
}

/// Scores detector output against planted hits. Both must describe the
/// same set of apps.
pub fn evaluate_detector(detections: &DetectionSet, truth: &GroundTruth) -> Result<DetectorScore> {
    let truth_apps = truth.app_ids();
    let detected_apps: BTreeSet<&str> = detections
        .rollup
        .keys()
        .map(String::as_str)
        .chain(detections.hits.iter().map(|h| h.app_id.as_str()))
        .collect();
    if truth_apps != detected_apps {
        let only_truth: Vec<_> = truth_apps.difference(&detected_apps).collect();
        let only_detected: Vec<_> = detected_apps.difference(&truth_apps).collect();
        return Err(Error::CorpusMismatch(format!(
            "apps only in ground truth: {only_truth:?}; only in detections: {only_detected:?}"
        )));
    }
    let planted: BTreeSet<&DetectionHit> = truth.hits.iter().collect();
    let found: BTreeSet<&DetectionHit> = detections.hits.iter().collect();
    let missed: Vec<DetectionHit> = planted.difference(&found).map(|h| (*h).clone()).collect();
    let spurious: Vec<DetectionHit> = found.difference(&planted).map(|h| (*h).clone()).collect();
    let tp = planted.intersection(&found).count();

    let mut per_variant: BTreeMap<VariantKind, VariantScore> = BTreeMap::new();
    for hit in &planted {
        let slot = per_variant.entry(hit.variant_kind).or_default();
        slot.planted += 1;
        if found.contains(hit) {
            slot.recovered += 1;
        }
    }
    for score in per_variant.values_mut() {
        score.recall = ratio(score.recovered, score.planted);
    }
    Ok(DetectorScore {
        planted: planted.len(),
        detected: found.len(),
        true_positives: tp,
        recall: ratio(tp, planted.len()),
        precision: ratio(tp, found.len()),
        per_variant,
        missed,
        spurious,
    })
}

/// Paths of a generated corpus directory.
pub fn corpus_paths(dir: &Path) -> (PathBuf, PathBuf) {
    (dir.join("manifest.json"), dir.join("ground_truth.json"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hit(i: usize, kind: VariantKind) -> DetectionHit {
        DetectionHit {
            app_id: "a".into(),
            flow_id: format!("f#{i}"),
            data_type_id: "email".into(),
            variant_kind: kind,
            location: Location::Body,
            destination_host: "h".into(),
            host_label: HostLabel::Tracker,
            crawl_kind: CrawlKind::Manual,
        }
    }

    fn truth(hits: Vec<DetectionHit>) -> GroundTruth {
        GroundTruth {
            seed: 0,
            apps: vec![AppTruth {
                app_id: "a".into(),
                feature_category: FeatureCategory::Diagnostic,
                signature_ids: vec![],
                tracker_names: vec![],
                tracker_hosts: vec![],
                non_tracker_hosts: vec![],
                requests: 0,
                reviewable: 0,
            }],
            hits,
            scope: vec![],
            verdicts: vec![],
        }
    }

    #[test]
    fn score_arithmetic() {
        let planted: Vec<_> = (0..10).map(|i| hit(i, VariantKind::Plain)).collect();
        let t = truth(planted.clone());
        let s = evaluate_detector(&t.detections(), &t).unwrap();
        assert_eq!((s.recall, s.precision), (1.0, 1.0));

        let mut found: Vec<_> = planted[..9].to_vec();
        found.push(hit(99, VariantKind::Base64));
        let set = DetectionSet::from_hits(["a"], found);
        let s = evaluate_detector(&set, &t).unwrap();
        assert_eq!(s.recall, 0.9);
        assert_eq!(s.precision, 0.9);
        assert_eq!(s.missed.len(), 1);
        assert_eq!(s.spurious.len(), 1);
    }

    #[test]
    fn mismatched_apps() {
        let t = truth(vec![]);
        let set = DetectionSet::from_hits(["b"], vec![]);
        assert!(matches!(
            evaluate_detector(&set, &t),
            Err(Error::CorpusMismatch(_))
        ));
    }
}
