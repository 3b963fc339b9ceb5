//! Keyword-based PII/PHI detection: a persona is compiled into encoded
//! needles, reviewable requests are scanned, and hits are rolled up per app.

mod matcher;
mod persona;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capture::{decode_body, filter_reviewable, FlowRecord};
use crate::error::{Error, Result};
use crate::hostclass::HostLabel;
use crate::model::{CrawlKind, LedgerEntry};

pub use matcher::{
    base64_forms, compile_persona, compile_persona_with, hash_hex, percent_encoded, scan_flow,
    CompileOptions, DetectionHit, Matcher, MatcherSet, VariantKind, DEFAULT_NUMERIC_WINDOW,
};
pub use persona::{Persona, PersonaAttribute};

/// Where one data type went, within one crawl of one app.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Destinations {
    pub to_non_tracker: bool,
    pub to_tracker: bool,
}

impl Destinations {
    pub fn merge(self, other: Destinations) -> Destinations {
        Destinations {
            to_non_tracker: self.to_non_tracker || other.to_non_tracker,
            to_tracker: self.to_tracker || other.to_tracker,
        }
    }

    fn record(&mut self, label: HostLabel) {
        match label {
            HostLabel::Tracker => self.to_tracker = true,
            HostLabel::NonTracker => self.to_non_tracker = true,
        }
    }
}

/// Transmitted data types of one app, per crawl kind.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppRollup {
    pub crawls: BTreeMap<CrawlKind, BTreeMap<String, Destinations>>,
}

impl AppRollup {
    pub fn record(&mut self, hit: &DetectionHit) {
        self.crawls
            .entry(hit.crawl_kind)
            .or_default()
            .entry(hit.data_type_id.clone())
            .or_default()
            .record(hit.host_label);
    }

    /// Commutative, associative merge.
    pub fn merge(mut self, other: AppRollup) -> AppRollup {
        for (crawl, types) in other.crawls {
            let mine = self.crawls.entry(crawl).or_default();
            for (ty, d) in types {
                let slot = mine.entry(ty).or_default();
                *slot = slot.merge(d);
            }
        }
        self
    }

    /// Per-type destinations restricted to `crawl` (all crawls if `None`).
    pub fn transmitted(&self, crawl: Option<CrawlKind>) -> BTreeMap<String, Destinations> {
        let mut out: BTreeMap<String, Destinations> = BTreeMap::new();
        for (kind, types) in &self.crawls {
            if crawl.is_some_and(|c| c != *kind) {
                continue;
            }
            for (ty, d) in types {
                let slot = out.entry(ty.clone()).or_default();
                *slot = slot.merge(*d);
            }
        }
        out
    }
}

/// Traffic of one app ready for scanning.
#[derive(Debug, Clone, Default)]
pub struct AppTraffic {
    pub app_id: String,
    /// All ingested requests with host labels assigned.
    pub flows: Vec<FlowRecord>,
    /// Ingestion failures for this app.
    pub errors: Vec<LedgerEntry>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionSet {
    pub hits: Vec<DetectionHit>,
    pub rollup: BTreeMap<String, AppRollup>,
    pub total_requests: usize,
    pub reviewed_requests: usize,
    pub errors: Vec<LedgerEntry>,
}

/// Summary half of the detection export (everything except the hits).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionSummary {
    pub apps: usize,
    pub hits: usize,
    pub total_requests: usize,
    pub reviewed_requests: usize,
    pub rollup: BTreeMap<String, AppRollup>,
    pub errors: Vec<LedgerEntry>,
}

impl DetectionSet {
    /// Rebuilds a set from hits alone, registering `apps` even if they have
    /// no hits.
    pub fn from_hits<'a>(apps: impl IntoIterator<Item = &'a str>, hits: Vec<DetectionHit>) -> Self {
        let mut rollup: BTreeMap<String, AppRollup> = apps
            .into_iter()
            .map(|a| (a.to_string(), AppRollup::default()))
            .collect();
        for hit in &hits {
            rollup.entry(hit.app_id.clone()).or_default().record(hit);
        }
        DetectionSet {
            hits,
            rollup,
            ..Default::default()
        }
    }

    pub fn summary(&self) -> DetectionSummary {
        DetectionSummary {
            apps: self.rollup.len(),
            hits: self.hits.len(),
            total_requests: self.total_requests,
            reviewed_requests: self.reviewed_requests,
            rollup: self.rollup.clone(),
            errors: self.errors.clone(),
        }
    }

    pub fn write_hits_jsonl(&self, mut out: impl Write) -> std::io::Result<()> {
        for hit in &self.hits {
            serde_json::to_writer(&mut out, hit)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn export(&self, hits_path: &Path, summary_path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_hits_jsonl(&mut buf)
            .map_err(|e| Error::io(hits_path, e))?;
        std::fs::write(hits_path, buf).map_err(|e| Error::io(hits_path, e))?;
        let mut summary =
            serde_json::to_vec_pretty(&self.summary()).map_err(|e| Error::json(summary_path, e))?;
        summary.push(b'\n');
        std::fs::write(summary_path, summary).map_err(|e| Error::io(summary_path, e))
    }

    pub fn import(hits_path: &Path, summary_path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(hits_path).map_err(|e| Error::io(hits_path, e))?;
        let hits = read_hits_jsonl(&text).map_err(|e| Error::json(hits_path, e))?;
        let summary_text =
            std::fs::read_to_string(summary_path).map_err(|e| Error::io(summary_path, e))?;
        let summary: DetectionSummary =
            serde_json::from_str(&summary_text).map_err(|e| Error::json(summary_path, e))?;
        Ok(DetectionSet {
            hits,
            rollup: summary.rollup,
            total_requests: summary.total_requests,
            reviewed_requests: summary.reviewed_requests,
            errors: summary.errors,
        })
    }
}

pub fn read_hits_jsonl(text: &str) -> serde_json::Result<Vec<DetectionHit>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

/// Hits of one app, flows in capture order.
pub fn scan_app(matchers: &MatcherSet, app: &AppTraffic) -> (Vec<DetectionHit>, AppRollup, usize) {
    let reviewable = filter_reviewable(&app.flows);
    let mut hits = Vec::new();
    let mut rollup = AppRollup::default();
    for flow in &reviewable {
        let views = decode_body(flow);
        for hit in scan_flow(matchers, flow, &views) {
            rollup.record(&hit);
            hits.push(hit);
        }
    }
    (hits, rollup, reviewable.len())
}

/// Scans every app in parallel; the result does not depend on scheduling.
pub fn scan_corpus(matchers: &MatcherSet, apps: &[AppTraffic]) -> DetectionSet {
    let per_app: Vec<_> = apps.par_iter().map(|app| scan_app(matchers, app)).collect();
    let mut set = DetectionSet::default();
    for (app, (hits, rollup, reviewed)) in apps.iter().zip(per_app) {
        set.total_requests += app.flows.len();
        set.reviewed_requests += reviewed;
        set.hits.extend(hits);
        let slot = set.rollup.remove(&app.app_id).unwrap_or_default();
        set.rollup.insert(app.app_id.clone(), slot.merge(rollup));
        set.errors.extend(app.errors.iter().cloned());
    }
    set.errors.sort();
    set
}
