//! Embedded tracker detection: class-name extraction from app artifacts
//! and package-prefix matching against a tracker signature database.

pub mod dex;
mod signatures;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use signatures::{
    default_signature_db, default_signature_json, load_signature_db, parse_signature_db,
    TrackerSignature,
};

/// Which type-table entries contribute class names. The whole type-id
/// table is read, so both defined and referenced classes are included.
pub const CLASS_SCOPE: &str = "defined_and_referenced";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    Apk,
    Dex,
    ClassList,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassSet {
    pub app_id: String,
    pub kind: ArtifactKind,
    /// Number of DEX files read; zero for class lists.
    pub dex_files: usize,
    pub classes: BTreeSet<String>,
}

/// Accepts dotted names as well as `a/b/C` and `La/b/C;` spellings.
pub fn normalize_class_name(raw: &str) -> Option<String> {
    let s = raw.trim();
    if s.is_empty() || s.starts_with('[') {
        return None;
    }
    let s = match s.strip_prefix('L').and_then(|r| r.strip_suffix(';')) {
        Some(inner) => inner,
        None => s,
    };
    if s.is_empty() {
        return None;
    }
    Some(s.replace('/', "."))
}

pub fn classes_from_dex(bytes: &[u8]) -> Result<Vec<String>> {
    dex::DexFile::parse(bytes)?.class_names()
}

fn is_dex_entry(name: &str) -> bool {
    name.strip_prefix("classes")
        .and_then(|r| r.strip_suffix(".dex"))
        .is_some_and(|n| n.chars().all(|c| c.is_ascii_digit()))
}

/// Reads every `classesN.dex` member of an APK, in archive order.
pub fn dex_members(bytes: &[u8]) -> Result<Vec<(String, Vec<u8>)>> {
    let mut archive = zip::ZipArchive::new(std::io::Cursor::new(bytes))
        .map_err(|e| Error::MalformedDex(format!("not a readable APK: {e}")))?;
    let mut out = Vec::new();
    for i in 0..archive.len() {
        let mut entry = archive
            .by_index(i)
            .map_err(|e| Error::MalformedDex(format!("APK entry {i}: {e}")))?;
        if !is_dex_entry(entry.name()) {
            continue;
        }
        let mut buf = Vec::with_capacity(entry.size() as usize);
        entry
            .read_to_end(&mut buf)
            .map_err(|e| Error::MalformedDex(format!("{}: {e}", entry.name())))?;
        out.push((entry.name().to_string(), buf));
    }
    Ok(out)
}

/// Extracts the class-name set from an APK, a bare DEX file, or a text
/// class list (one name per line, `#` comments).
pub fn extract_class_names(artifact: &Path, app_id: &str) -> Result<ClassSet> {
    let bytes = std::fs::read(artifact).map_err(|e| Error::UnreadableArtifact {
        path: artifact.to_path_buf(),
        reason: e.to_string(),
    })?;
    class_set_from_bytes(&bytes, app_id).map_err(|e| match e {
        Error::UnreadableArtifact { reason, .. } => Error::UnreadableArtifact {
            path: artifact.to_path_buf(),
            reason,
        },
        other => other,
    })
}

pub fn class_set_from_bytes(bytes: &[u8], app_id: &str) -> Result<ClassSet> {
    let mut classes = BTreeSet::new();
    let (kind, dex_files) = if bytes.starts_with(b"PK\x03\x04") {
        let members = dex_members(bytes)?;
        if members.is_empty() {
            log::warn!("{app_id}: APK contains no DEX files (empty artifact)");
        }
        for (_, dex_bytes) in &members {
            classes.extend(classes_from_dex(dex_bytes)?);
        }
        (ArtifactKind::Apk, members.len())
    } else if dex::has_dex_magic(bytes) || bytes.starts_with(b"dex\n") {
        classes.extend(classes_from_dex(bytes)?);
        (ArtifactKind::Dex, 1)
    } else {
        let text = std::str::from_utf8(bytes).map_err(|_| Error::UnreadableArtifact {
            path: Default::default(),
            reason: "neither APK, DEX nor UTF-8 class list".into(),
        })?;
        classes.extend(
            text.lines()
                .map(|l| l.split('#').next().unwrap_or(""))
                .filter_map(normalize_class_name),
        );
        (ArtifactKind::ClassList, 0)
    };
    Ok(ClassSet {
        app_id: app_id.to_string(),
        kind,
        dex_files,
        classes,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SignatureMatch {
    pub signature_id: String,
    pub matched_prefix: String,
    pub example_class: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddedTrackerReport {
    pub app_id: String,
    pub matches: BTreeSet<SignatureMatch>,
    pub distinct_trackers: usize,
    pub distinct_vendors: usize,
    /// Tracker names of the matched signatures, sorted.
    pub tracker_names: Vec<String>,
    pub classes_scanned: usize,
    pub class_scope: String,
}

impl EmbeddedTrackerReport {
    pub fn empty(app_id: &str) -> Self {
        EmbeddedTrackerReport {
            app_id: app_id.to_string(),
            matches: BTreeSet::new(),
            distinct_trackers: 0,
            distinct_vendors: 0,
            tracker_names: Vec::new(),
            classes_scanned: 0,
            class_scope: CLASS_SCOPE.to_string(),
        }
    }
}

/// First class in `classes` that is `prefix` itself or lies under the
/// package `prefix.`.
fn first_under_prefix<'a>(classes: &'a BTreeSet<String>, prefix: &str) -> Option<&'a String> {
    let dotted = format!("{prefix}.");
    if let Some(exact) = classes.get(prefix) {
        return Some(exact);
    }
    classes
        .range(dotted.clone()..)
        .next()
        .filter(|c| c.starts_with(&dotted))
}

pub fn match_trackers(classes: &ClassSet, db: &[TrackerSignature]) -> EmbeddedTrackerReport {
    let mut matches = BTreeSet::new();
    let mut hit_sigs: BTreeMap<&str, &TrackerSignature> = BTreeMap::new();
    for sig in db {
        for prefix in &sig.code_prefixes {
            if let Some(example) = first_under_prefix(&classes.classes, prefix) {
                matches.insert(SignatureMatch {
                    signature_id: sig.signature_id.clone(),
                    matched_prefix: prefix.clone(),
                    example_class: example.clone(),
                });
                hit_sigs.insert(&sig.signature_id, sig);
            }
        }
    }
    let vendors: BTreeSet<&str> = hit_sigs.values().map(|s| s.vendor.as_str()).collect();
    let mut tracker_names: Vec<String> =
        hit_sigs.values().map(|s| s.tracker_name.clone()).collect();
    tracker_names.sort();
    EmbeddedTrackerReport {
        app_id: classes.app_id.clone(),
        distinct_trackers: hit_sigs.len(),
        distinct_vendors: vendors.len(),
        tracker_names,
        matches,
        classes_scanned: classes.classes.len(),
        class_scope: CLASS_SCOPE.to_string(),
    }
}
