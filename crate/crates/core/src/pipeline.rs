//! Manifest-driven orchestration. Each stage writes its intermediate file
//! under `<output>/stages/`, and later stages read those files back, so a
//! full run and a stage-by-stage run produce the same bundle.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assess::{assess_app, write_verdicts_csv, AppAssessment, ExpectationPolicy};
use crate::capture::ingest_capture;
use crate::detect::{
    compile_persona_with, scan_corpus, AppTraffic, CompileOptions, DetectionSet, Persona,
    DEFAULT_NUMERIC_WINDOW,
};
use crate::error::{Error, Result};
use crate::hostclass::{HostLabel, HostsList, MatchMode, PublicSuffixList};
use crate::model::{check_unique_app_ids, AppRecord, CrawlKind, LedgerEntry, Taxonomy};
use crate::report::{render_report, AppDetail, Summary};
use crate::staticscan::{
    extract_class_names, load_signature_db, match_trackers, EmbeddedTrackerReport, TrackerSignature,
};
use crate::stats::{
    contact_stats, embedded_stats, label_accuracy, scope_matrix, transmission_stats, AppContacts,
    CorpusStats,
};

pub const OUTPUT_DIR_ENV: &str = "MHAUDIT_OUTPUT_DIR";
pub const STAGES_DIR: &str = "stages";

/// Which crawl's traffic feeds the observation statistics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrawlSelection {
    #[default]
    Manual,
    Automated,
    All,
}

impl CrawlSelection {
    pub fn kind(self) -> Option<CrawlKind> {
        match self {
            CrawlSelection::Manual => Some(CrawlKind::Manual),
            CrawlSelection::Automated => Some(CrawlKind::Automated),
            CrawlSelection::All => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CrawlSelection::Manual => "manual",
            CrawlSelection::Automated => "automated",
            CrawlSelection::All => "all",
        }
    }
}

fn default_window() -> usize {
    DEFAULT_NUMERIC_WINDOW
}

fn default_output() -> PathBuf {
    PathBuf::from("audit-output")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestOptions {
    #[serde(default)]
    pub host_match_mode: MatchMode,
    #[serde(default = "default_window")]
    pub numeric_window: usize,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub observation_crawl: CrawlSelection,
}

impl Default for ManifestOptions {
    fn default() -> Self {
        ManifestOptions {
            host_match_mode: MatchMode::Exact,
            numeric_window: DEFAULT_NUMERIC_WINDOW,
            output_dir: default_output(),
            observation_crawl: CrawlSelection::Manual,
        }
    }
}

/// On-disk manifest. Paths are relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditManifest {
    pub taxonomy: PathBuf,
    pub persona: PathBuf,
    pub hosts: PathBuf,
    pub signatures: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psl: Option<PathBuf>,
    #[serde(default)]
    pub options: ManifestOptions,
    pub apps: Vec<AppRecord>,
}

impl AuditManifest {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidManifest(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// A loaded manifest with every shared resource parsed and validated.
#[derive(Debug, Clone)]
pub struct Audit {
    pub base_dir: PathBuf,
    pub taxonomy: Taxonomy,
    pub persona: Persona,
    pub hosts: HostsList,
    pub signatures: Vec<TrackerSignature>,
    pub policy: ExpectationPolicy,
    pub psl: Option<PublicSuffixList>,
    pub options: ManifestOptions,
    pub apps: Vec<AppRecord>,
    pub output_dir: PathBuf,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn require_file(base: &Path, p: &Path, what: &str) -> Result<PathBuf> {
    let full = resolve(base, p);
    if full.is_file() {
        Ok(full)
    } else {
        Err(Error::InvalidManifest(format!(
            "{what} `{}` does not exist",
            full.display()
        )))
    }
}

impl Audit {
    /// Any error here is a configuration problem.
    pub fn load(manifest_path: &Path, output_override: Option<&Path>) -> Result<Self> {
        let manifest = AuditManifest::load(manifest_path)?;
        let base = manifest_path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default();
        Self::from_manifest(manifest, &base, output_override)
    }

    pub fn from_manifest(
        manifest: AuditManifest,
        base: &Path,
        output_override: Option<&Path>,
    ) -> Result<Self> {
        let taxonomy = Taxonomy::load(&require_file(base, &manifest.taxonomy, "taxonomy")?)?;
        let persona = Persona::load(&require_file(base, &manifest.persona, "persona")?)?;
        persona.validate(&taxonomy)?;
        let hosts = HostsList::load(&require_file(base, &manifest.hosts, "hosts list")?)?;
        let signatures = load_signature_db(&require_file(
            base,
            &manifest.signatures,
            "signature database",
        )?)?;
        let policy = match &manifest.policy {
            Some(p) => ExpectationPolicy::load(&require_file(base, p, "policy")?)?,
            None => ExpectationPolicy::default_policy(),
        };
        let psl = match &manifest.psl {
            Some(p) => Some(PublicSuffixList::load(&require_file(
                base,
                p,
                "suffix list",
            )?)?),
            None => None,
        };
        check_unique_app_ids(&manifest.apps).map_err(Error::InvalidManifest)?;
        let mut apps = manifest.apps;
        for app in &mut apps {
            app.validate().map_err(Error::InvalidManifest)?;
            policy.rule(app.feature_category)?;
            app.artifact = app.artifact.as_ref().map(|a| resolve(base, a));
            for c in &mut app.captures {
                c.path = resolve(base, &c.path);
            }
        }
        let output_dir = match output_override {
            Some(dir) => dir.to_path_buf(),
            None => resolve(base, &manifest.options.output_dir),
        };
        Ok(Audit {
            base_dir: base.to_path_buf(),
            taxonomy,
            persona,
            hosts,
            signatures,
            policy,
            psl,
            options: manifest.options,
            apps,
            output_dir,
        })
    }

    pub fn stages_dir(&self) -> PathBuf {
        self.output_dir.join(STAGES_DIR)
    }

    fn stage_path(&self, name: &str) -> PathBuf {
        self.stages_dir().join(name)
    }

    fn observation(&self) -> Option<CrawlKind> {
        self.options.observation_crawl.kind()
    }
}

fn ledger(app_id: &str, stage: &str, message: impl ToString) -> LedgerEntry {
    LedgerEntry {
        app_id: app_id.to_string(),
        stage: stage.to_string(),
        message: message.to_string(),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::json(path, e))?;
    bytes.push(b'\n');
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StaticStage {
    pub reports: Vec<EmbeddedTrackerReport>,
    pub errors: Vec<LedgerEntry>,
}

/// Apps whose artifact cannot be read are left out of the reports and
/// recorded in the ledger. Apps without an artifact get an empty report.
pub fn scan_static(audit: &Audit) -> StaticStage {
    let results: Vec<std::result::Result<EmbeddedTrackerReport, LedgerEntry>> = audit
        .apps
        .par_iter()
        .map(|app| match &app.artifact {
            None => Ok(EmbeddedTrackerReport::empty(&app.app_id)),
            Some(path) => extract_class_names(path, &app.app_id)
                .map(|classes| match_trackers(&classes, &audit.signatures))
                .map_err(|e| ledger(&app.app_id, "scan-static", e)),
        })
        .collect();
    let mut stage = StaticStage::default();
    for r in results {
        match r {
            Ok(report) => stage.reports.push(report),
            Err(e) => stage.errors.push(e),
        }
    }
    stage
}

/// Ingests every capture of one app and labels each request's host.
pub fn load_traffic(audit: &Audit, app: &AppRecord) -> AppTraffic {
    let mut traffic = AppTraffic {
        app_id: app.app_id.clone(),
        ..Default::default()
    };
    for capture in &app.captures {
        match ingest_capture(&capture.path, &app.app_id, capture.crawl) {
            Ok(outcome) => {
                if outcome.malformed_entries > 0 || outcome.decompression_failures > 0 {
                    log::warn!(
                        "{}: {} malformed entries, {} undecodable bodies",
                        capture.path.display(),
                        outcome.malformed_entries,
                        outcome.decompression_failures
                    );
                }
                traffic.flows.extend(outcome.flows);
            }
            Err(e) => traffic.errors.push(ledger(&app.app_id, "capture", e)),
        }
    }
    for flow in &mut traffic.flows {
        let label = audit
            .hosts
            .classify(&flow.host, audit.options.host_match_mode)
            .unwrap_or_else(|e| {
                log::warn!("{}: {e}", flow.flow_id);
                HostLabel::NonTracker
            });
        flow.host_label = Some(label);
    }
    traffic
}

pub fn load_corpus_traffic(audit: &Audit) -> Vec<AppTraffic> {
    audit
        .apps
        .par_iter()
        .map(|app| load_traffic(audit, app))
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContactStage {
    pub apps: Vec<AppContacts>,
    pub errors: Vec<LedgerEntry>,
}

pub fn contacts_of(audit: &Audit, traffic: &[AppTraffic]) -> ContactStage {
    let crawl = audit.observation();
    let mut errors: Vec<LedgerEntry> = traffic.iter().flat_map(|t| t.errors.clone()).collect();
    errors.sort();
    ContactStage {
        apps: traffic
            .iter()
            .map(|t| AppContacts::from_flows(&t.app_id, &t.flows, crawl))
            .collect(),
        errors,
    }
}

pub fn run_scan_static(audit: &Audit) -> Result<StaticStage> {
    let stage = scan_static(audit);
    write_json(&audit.stage_path("embedded.json"), &stage)?;
    Ok(stage)
}

pub fn run_classify_hosts(audit: &Audit) -> Result<ContactStage> {
    let stage = contacts_of(audit, &load_corpus_traffic(audit));
    write_json(&audit.stage_path("contacts.json"), &stage)?;
    Ok(stage)
}

/// Ingests, labels and scans all traffic. Also writes the contact stage,
/// which comes for free once traffic is loaded.
pub fn run_detect(audit: &Audit) -> Result<DetectionSet> {
    let traffic = load_corpus_traffic(audit);
    write_json(
        &audit.stage_path("contacts.json"),
        &contacts_of(audit, &traffic),
    )?;
    let options = CompileOptions {
        numeric_window: audit.options.numeric_window,
        ..Default::default()
    };
    let matchers = compile_persona_with(&audit.persona, &audit.taxonomy, &options)?;
    let set = scan_corpus(&matchers, &traffic);
    std::fs::create_dir_all(audit.stages_dir()).map_err(|e| Error::io(audit.stages_dir(), e))?;
    set.export(
        &audit.stage_path("detections.jsonl"),
        &audit.stage_path("detections_summary.json"),
    )?;
    Ok(set)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssessStage {
    pub observation_crawl: String,
    pub assessments: Vec<AppAssessment>,
}

pub fn assess_corpus(audit: &Audit, detections: &DetectionSet) -> Result<AssessStage> {
    let crawl = audit.observation();
    let empty = Default::default();
    let assessments = audit
        .apps
        .par_iter()
        .map(|app| {
            let rollup = detections.rollup.get(&app.app_id).unwrap_or(&empty);
            assess_app(&audit.policy, &audit.taxonomy, rollup, app, crawl)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AssessStage {
        observation_crawl: audit.options.observation_crawl.as_str().to_string(),
        assessments,
    })
}

fn load_detections(audit: &Audit) -> Result<DetectionSet> {
    DetectionSet::import(
        &audit.stage_path("detections.jsonl"),
        &audit.stage_path("detections_summary.json"),
    )
}

pub fn run_assess(audit: &Audit) -> Result<AssessStage> {
    let stage = assess_corpus(audit, &load_detections(audit)?)?;
    write_json(&audit.stage_path("assessment.json"), &stage)?;
    let mut csv = Vec::new();
    write_verdicts_csv(&mut csv, &stage.assessments)?;
    let path = audit.stage_path("verdicts.csv");
    std::fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
    Ok(stage)
}

/// Everything the report needs, read back from the stage files.
#[derive(Debug, Clone)]
pub struct StageOutputs {
    pub embedded: StaticStage,
    pub contacts: ContactStage,
    pub detections: DetectionSet,
    pub assessment: AssessStage,
}

impl StageOutputs {
    pub fn load(audit: &Audit) -> Result<Self> {
        Ok(StageOutputs {
            embedded: read_json(&audit.stage_path("embedded.json"))?,
            contacts: read_json(&audit.stage_path("contacts.json"))?,
            detections: load_detections(audit)?,
            assessment: read_json(&audit.stage_path("assessment.json"))?,
        })
    }

    pub fn ledger(&self) -> Vec<LedgerEntry> {
        let all: BTreeSet<LedgerEntry> = self
            .embedded
            .errors
            .iter()
            .chain(&self.contacts.errors)
            .chain(&self.detections.errors)
            .cloned()
            .collect();
        all.into_iter().collect()
    }
}

pub fn corpus_stats(audit: &Audit, stages: &StageOutputs) -> CorpusStats {
    CorpusStats {
        embedded: embedded_stats(&stages.embedded.reports).unwrap_or_default(),
        contacted: contact_stats(&stages.contacts.apps, audit.psl.as_ref()),
        transmissions: transmission_stats(&stages.detections, &audit.taxonomy, audit.observation()),
        scope_matrix: scope_matrix(&stages.assessment.assessments, &audit.policy),
        label_accuracy: label_accuracy(&stages.assessment.assessments),
    }
}

pub fn app_details(audit: &Audit, stages: &StageOutputs) -> Vec<AppDetail> {
    let reports: BTreeMap<&str, &EmbeddedTrackerReport> = stages
        .embedded
        .reports
        .iter()
        .map(|r| (r.app_id.as_str(), r))
        .collect();
    let contacts: BTreeMap<&str, &AppContacts> = stages
        .contacts
        .apps
        .iter()
        .map(|c| (c.app_id.as_str(), c))
        .collect();
    let assessments: BTreeMap<&str, &AppAssessment> = stages
        .assessment
        .assessments
        .iter()
        .map(|a| (a.app_id.as_str(), a))
        .collect();
    audit
        .apps
        .iter()
        .map(|app| {
            let id = app.app_id.as_str();
            let contact = contacts.get(id);
            let assessment = assessments.get(id);
            AppDetail {
                app_id: app.app_id.clone(),
                display_name: app.display_name.clone(),
                feature_category: app.feature_category,
                trackers: reports
                    .get(id)
                    .map(|r| r.tracker_names.clone())
                    .unwrap_or_default(),
                tracker_hosts: contact.map_or(0, |c| c.tracker_hosts.len()),
                non_tracker_hosts: contact.map_or(0, |c| c.non_tracker_hosts.len()),
                transmitted_types: stages
                    .detections
                    .rollup
                    .get(id)
                    .map(|r| r.transmitted(audit.observation()).into_keys().collect())
                    .unwrap_or_default(),
                out_of_scope: assessment
                    .map(|a| {
                        a.findings
                            .iter()
                            .filter(|f| f.transmitted && !f.in_scope)
                            .map(|f| f.data_category)
                            .collect()
                    })
                    .unwrap_or_default(),
                undeclared: assessment
                    .map(|a| AppDetail::undeclared_from(a))
                    .unwrap_or_default(),
            }
        })
        .collect()
}

/// Writes the bundle from the stage files; returns the merged ledger.
pub fn run_report(audit: &Audit) -> Result<Vec<LedgerEntry>> {
    let stages = StageOutputs::load(audit)?;
    let summary = Summary {
        observation_crawl: audit.options.observation_crawl.as_str().to_string(),
        apps: audit.apps.len(),
        stats: corpus_stats(audit, &stages),
        ledger: stages.ledger(),
    };
    render_report(&audit.output_dir, &summary, &app_details(audit, &stages))?;
    Ok(summary.ledger)
}

/// All stages in order; returns the merged ledger.
pub fn run_pipeline(audit: &Audit) -> Result<Vec<LedgerEntry>> {
    run_scan_static(audit)?;
    run_detect(audit)?;
    run_assess(audit)?;
    run_report(audit)
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARTIAL: i32 = 1;
pub const EXIT_FATAL: i32 = 2;

pub fn exit_status(result: &Result<Vec<LedgerEntry>>) -> i32 {
    match result {
        Ok(ledger) if ledger.is_empty() => EXIT_OK,
        Ok(_) => EXIT_PARTIAL,
        Err(_) => EXIT_FATAL,
    }
}

/// Runs `f` on a dedicated pool of `jobs` threads (0 means rayon's default).
pub fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .expect("thread pool")
        .install(f)
}
