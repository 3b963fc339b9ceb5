use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DEFAULT_SIGNATURES: &str = include_str!("../../data/signatures.json");

/// Code-level fingerprint of one tracker library.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrackerSignature {
    #[serde(rename = "id")]
    pub signature_id: String,
    #[serde(rename = "name")]
    pub tracker_name: String,
    pub vendor: String,
    pub code_prefixes: Vec<String>,
}

impl TrackerSignature {
    pub fn validate(&self) -> Result<()> {
        if self.signature_id.trim().is_empty() {
            return Err(Error::MalformedSignature("empty signature id".into()));
        }
        if self.code_prefixes.is_empty() {
            return Err(Error::MalformedSignature(format!(
                "`{}` has no code prefixes",
                self.signature_id
            )));
        }
        for p in &self.code_prefixes {
            if !p.contains('.') || p.starts_with('.') || p.ends_with('.') {
                return Err(Error::MalformedSignature(format!(
                    "`{}`: prefix `{p}` is not a dotted package name",
                    self.signature_id
                )));
            }
        }
        Ok(())
    }
}

/// Entry in the native array format. `code_signature` is accepted as an
/// alternative to `code_prefixes`.
#[derive(Deserialize)]
struct RawSignature {
    id: String,
    name: String,
    #[serde(default)]
    vendor: Option<String>,
    #[serde(default)]
    code_prefixes: Vec<String>,
    #[serde(default)]
    code_signature: Option<String>,
}

/// Exodus-style export: `{"trackers": {"<id>": {name, code_signature, ...}}}`.
#[derive(Deserialize)]
struct ExodusExport {
    trackers: BTreeMap<String, ExodusTracker>,
}

#[derive(Deserialize)]
struct ExodusTracker {
    #[serde(default)]
    id: Option<serde_json::Value>,
    name: String,
    #[serde(default)]
    code_signature: Option<String>,
    #[serde(default)]
    vendor: Option<String>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SignatureFile {
    List(Vec<RawSignature>),
    Exodus(ExodusExport),
}

/// Splits an Exodus `code_signature` into dotted prefixes.
fn split_code_signature(sig: &str) -> Vec<String> {
    sig.split('|')
        .map(|p| {
            p.trim()
                .replace("\\.", ".")
                .trim_end_matches('.')
                .to_string()
        })
        .filter(|p| !p.is_empty())
        .collect()
}

pub fn parse_signature_db(text: &str) -> Result<Vec<TrackerSignature>> {
    let parsed: SignatureFile =
        serde_json::from_str(text).map_err(|e| Error::MalformedSignature(e.to_string()))?;
    let mut out = Vec::new();
    match parsed {
        SignatureFile::List(list) => {
            for raw in list {
                let mut prefixes: Vec<String> = raw
                    .code_prefixes
                    .iter()
                    .map(|p| p.trim().trim_end_matches('.').to_string())
                    .collect();
                if let Some(sig) = &raw.code_signature {
                    prefixes.extend(split_code_signature(sig));
                }
                let vendor = raw.vendor.unwrap_or_else(|| raw.name.clone());
                out.push(TrackerSignature {
                    signature_id: raw.id,
                    tracker_name: raw.name,
                    vendor,
                    code_prefixes: prefixes,
                });
            }
        }
        SignatureFile::Exodus(export) => {
            for (key, t) in export.trackers {
                let prefixes = t
                    .code_signature
                    .as_deref()
                    .map(split_code_signature)
                    .unwrap_or_default();
                if prefixes.is_empty() {
                    log::debug!("skipping network-only tracker `{}`", t.name);
                    continue;
                }
                let id = match t.id {
                    Some(serde_json::Value::String(s)) => s,
                    Some(serde_json::Value::Number(n)) => n.to_string(),
                    _ => key,
                };
                out.push(TrackerSignature {
                    signature_id: id,
                    vendor: t.vendor.unwrap_or_else(|| t.name.clone()),
                    tracker_name: t.name,
                    code_prefixes: prefixes,
                });
            }
        }
    }

    let mut seen = std::collections::BTreeSet::new();
    for sig in &out {
        sig.validate()?;
        if !seen.insert(sig.signature_id.as_str()) {
            return Err(Error::MalformedSignature(format!(
                "duplicate signature id `{}`",
                sig.signature_id
            )));
        }
    }
    Ok(out)
}

pub fn load_signature_db(path: &Path) -> Result<Vec<TrackerSignature>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_signature_db(&text)
}

pub fn default_signature_db() -> Vec<TrackerSignature> {
    parse_signature_db(DEFAULT_SIGNATURES).expect("embedded signature db is valid")
}

pub fn default_signature_json() -> &'static str {
    DEFAULT_SIGNATURES
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn native_format() {
        let db = parse_signature_db(
            r#"[{"id":"fa","name":"Firebase Analytics","vendor":"Google",
                 "code_prefixes":["com.google.firebase.analytics."]}]"#,
        )
        .unwrap();
        assert_eq!(db[0].code_prefixes, vec!["com.google.firebase.analytics"]);
    }

    #[test]
    fn exodus_format_tolerates_network_only_entries() {
        let db = parse_signature_db(
            r#"{"trackers":{
                "27":{"id":27,"name":"Google CrashLytics","code_signature":"com.crashlytics.|com.google.firebase.crashlytics.","network_signature":"crashlytics\\.com","website":""},
                "99":{"id":99,"name":"Some CDN","code_signature":"","network_signature":""}
            }}"#,
        )
        .unwrap();
        assert_eq!(db.len(), 1);
        assert_eq!(db[0].signature_id, "27");
        assert_eq!(db[0].vendor, "Google CrashLytics");
        assert_eq!(
            db[0].code_prefixes,
            vec!["com.crashlytics", "com.google.firebase.crashlytics"]
        );
    }

    #[test]
    fn prefix_without_dot_rejected() {
        let err =
            parse_signature_db(r#"[{"id":"x","name":"X","vendor":"X","code_prefixes":["comx"]}]"#);
        assert!(matches!(err, Err(Error::MalformedSignature(_))));
        let empty =
            parse_signature_db(r#"[{"id":"x","name":"X","vendor":"X","code_prefixes":[]}]"#);
        assert!(matches!(empty, Err(Error::MalformedSignature(_))));
    }

    #[test]
    fn default_db_is_valid() {
        let db = default_signature_db();
        assert!(db.len() >= 19);
        let vendors: std::collections::BTreeSet<_> = db.iter().map(|s| &s.vendor).collect();
        assert!(vendors.len() >= 14);
    }
}
