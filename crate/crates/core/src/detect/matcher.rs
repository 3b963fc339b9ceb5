use std::collections::{BTreeSet, HashMap};
use std::fmt;

use aho_corasick::{AhoCorasick, AhoCorasickBuilder, MatchKind};
use base64::Engine;
use md5::Md5;
use percent_encoding::{utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};
use serde::{Deserialize, Serialize};
use sha1::Sha1;
use sha2::{Digest, Sha256};

use super::persona::Persona;
use crate::capture::{DecodedViews, FlowRecord, Location};
use crate::error::Result;
use crate::hostclass::HostLabel;
use crate::model::{CrawlKind, Taxonomy};

pub const DEFAULT_NUMERIC_WINDOW: usize = 32;

/// Everything except RFC 3986 unreserved characters.
const URL_ENCODE_SET: &AsciiSet = &NON_ALPHANUMERIC
    .remove(b'-')
    .remove(b'.')
    .remove(b'_')
    .remove(b'~');

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantKind {
    Plain,
    PercentEncoded,
    Base64,
    Md5Hex,
    Sha1Hex,
    Sha256Hex,
    KeyedNumeric,
}

impl VariantKind {
    pub const ALL: [VariantKind; 7] = [
        VariantKind::Plain,
        VariantKind::PercentEncoded,
        VariantKind::Base64,
        VariantKind::Md5Hex,
        VariantKind::Sha1Hex,
        VariantKind::Sha256Hex,
        VariantKind::KeyedNumeric,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VariantKind::Plain => "plain",
            VariantKind::PercentEncoded => "percent_encoded",
            VariantKind::Base64 => "base64",
            VariantKind::Md5Hex => "md5_hex",
            VariantKind::Sha1Hex => "sha1_hex",
            VariantKind::Sha256Hex => "sha256_hex",
            VariantKind::KeyedNumeric => "keyed_numeric",
        }
    }

    pub fn is_hash(self) -> bool {
        matches!(
            self,
            VariantKind::Md5Hex | VariantKind::Sha1Hex | VariantKind::Sha256Hex
        )
    }
}

impl fmt::Display for VariantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One searched-for form of one persona value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Matcher {
    pub data_type_id: String,
    pub variant_kind: VariantKind,
    pub needle: String,
    /// Only for `KeyedNumeric`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub key_hints: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompileOptions {
    pub kinds: BTreeSet<VariantKind>,
    pub numeric_window: usize,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions {
            kinds: VariantKind::ALL.into_iter().collect(),
            numeric_window: DEFAULT_NUMERIC_WINDOW,
        }
    }
}

impl CompileOptions {
    pub fn without(mut self, kinds: &[VariantKind]) -> Self {
        for k in kinds {
            self.kinds.remove(k);
        }
        self
    }
}

/// Percent-encoded form of `value` (unreserved characters kept).
pub fn percent_encoded(value: &str) -> String {
    utf8_percent_encode(value, URL_ENCODE_SET).to_string()
}

/// Standard and URL-safe base64, padded and unpadded, deduplicated.
pub fn base64_forms(value: &str) -> Vec<String> {
    use base64::engine::general_purpose::{STANDARD, STANDARD_NO_PAD, URL_SAFE, URL_SAFE_NO_PAD};
    let mut forms = Vec::new();
    for enc in [
        STANDARD.encode(value),
        STANDARD_NO_PAD.encode(value),
        URL_SAFE.encode(value),
        URL_SAFE_NO_PAD.encode(value),
    ] {
        if !forms.contains(&enc) {
            forms.push(enc);
        }
    }
    forms
}

/// Lowercase hex digest of the lowercased value.
pub fn hash_hex(kind: VariantKind, value: &str) -> Option<String> {
    let canonical = value.to_lowercase();
    let bytes = canonical.as_bytes();
    Some(match kind {
        VariantKind::Md5Hex => hex::encode(Md5::digest(bytes)),
        VariantKind::Sha1Hex => hex::encode(Sha1::digest(bytes)),
        VariantKind::Sha256Hex => hex::encode(Sha256::digest(bytes)),
        _ => return None,
    })
}

/// Compiled persona. Immutable; shareable across scanning threads.
#[derive(Debug, Clone)]
pub struct MatcherSet {
    matchers: Vec<Matcher>,
    numeric_window: usize,
    /// Plain and percent-encoded needles, ASCII case-insensitive.
    folded: Option<AhoCorasick>,
    folded_ids: Vec<usize>,
    /// Base64 and hash needles, exact.
    exact: Option<AhoCorasick>,
    exact_ids: Vec<usize>,
    /// Numeric value -> indices of keyed matchers.
    keyed: HashMap<String, Vec<usize>>,
    lowered_hints: Vec<Vec<Vec<u8>>>,
}

fn automaton(patterns: &[&str], case_insensitive: bool) -> Option<AhoCorasick> {
    if patterns.is_empty() {
        return None;
    }
    Some(
        AhoCorasickBuilder::new()
            .ascii_case_insensitive(case_insensitive)
            .match_kind(MatchKind::Standard)
            .build(patterns)
            .expect("needle automaton builds"),
    )
}

impl MatcherSet {
    pub fn matchers(&self) -> &[Matcher] {
        &self.matchers
    }

    pub fn numeric_window(&self) -> usize {
        self.numeric_window
    }

    pub fn len(&self) -> usize {
        self.matchers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matchers.is_empty()
    }

    fn build(matchers: Vec<Matcher>, numeric_window: usize) -> Self {
        let mut folded_pats = Vec::new();
        let mut folded_ids = Vec::new();
        let mut exact_pats = Vec::new();
        let mut exact_ids = Vec::new();
        let mut keyed: HashMap<String, Vec<usize>> = HashMap::new();
        let mut lowered_hints = Vec::with_capacity(matchers.len());
        for (i, m) in matchers.iter().enumerate() {
            lowered_hints.push(
                m.key_hints
                    .iter()
                    .map(|h| h.to_ascii_lowercase().into_bytes())
                    .collect(),
            );
            match m.variant_kind {
                VariantKind::Plain | VariantKind::PercentEncoded => {
                    folded_pats.push(m.needle.as_str());
                    folded_ids.push(i);
                }
                VariantKind::KeyedNumeric => keyed.entry(m.needle.clone()).or_default().push(i),
                _ => {
                    exact_pats.push(m.needle.as_str());
                    exact_ids.push(i);
                }
            }
        }
        MatcherSet {
            folded: automaton(&folded_pats, true),
            exact: automaton(&exact_pats, false),
            matchers,
            numeric_window,
            folded_ids,
            exact_ids,
            keyed,
            lowered_hints,
        }
    }
}

/// Expands every persona value into the encoded forms searched for.
pub fn compile_persona(persona: &Persona, taxonomy: &Taxonomy) -> Result<MatcherSet> {
    compile_persona_with(persona, taxonomy, &CompileOptions::default())
}

pub fn compile_persona_with(
    persona: &Persona,
    taxonomy: &Taxonomy,
    options: &CompileOptions,
) -> Result<MatcherSet> {
    persona.validate(taxonomy)?;
    let want = |k: VariantKind| options.kinds.contains(&k);
    let mut matchers = Vec::new();
    let mut push = |data_type_id: &str, kind: VariantKind, needle: String, hints: &[String]| {
        let m = Matcher {
            data_type_id: data_type_id.to_string(),
            variant_kind: kind,
            needle,
            key_hints: hints.to_vec(),
        };
        if !matchers.contains(&m) {
            matchers.push(m);
        }
    };
    for attr in &persona.attributes {
        let id = attr.data_type_id.as_str();
        for value in &attr.values {
            let value = value.trim();
            if attr.numeric {
                if want(VariantKind::KeyedNumeric) {
                    let hints: Vec<String> = attr
                        .key_hints
                        .iter()
                        .map(|h| h.trim().to_string())
                        .filter(|h| !h.is_empty())
                        .collect();
                    push(id, VariantKind::KeyedNumeric, value.to_string(), &hints);
                }
                continue;
            }
            if want(VariantKind::Plain) {
                push(id, VariantKind::Plain, value.to_string(), &[]);
            }
            let pct = percent_encoded(value);
            // Identical to the plain needle when nothing needs escaping.
            if want(VariantKind::PercentEncoded) && pct != value {
                push(id, VariantKind::PercentEncoded, pct, &[]);
            }
            if want(VariantKind::Base64) {
                for form in base64_forms(value) {
                    push(id, VariantKind::Base64, form, &[]);
                }
            }
            for kind in [
                VariantKind::Md5Hex,
                VariantKind::Sha1Hex,
                VariantKind::Sha256Hex,
            ] {
                if want(kind) {
                    let digest = hash_hex(kind, value).expect("hash kind");
                    push(id, kind, digest.to_ascii_uppercase(), &[]);
                    push(id, kind, digest, &[]);
                }
            }
        }
    }
    Ok(MatcherSet::build(matchers, options.numeric_window))
}

/// One observed transmission of a persona attribute.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DetectionHit {
    pub app_id: String,
    pub flow_id: String,
    pub data_type_id: String,
    pub variant_kind: VariantKind,
    pub location: Location,
    pub destination_host: String,
    pub host_label: HostLabel,
    pub crawl_kind: CrawlKind,
}

/// Numeric tokens `\d+(\.\d+)?` that are not glued to letters or digits.
fn number_tokens(text: &[u8]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < text.len() {
        if !text[i].is_ascii_digit() {
            i += 1;
            continue;
        }
        let start = i;
        while i < text.len() && text[i].is_ascii_digit() {
            i += 1;
        }
        if i + 1 < text.len() && text[i] == b'.' && text[i + 1].is_ascii_digit() {
            i += 1;
            while i < text.len() && text[i].is_ascii_digit() {
                i += 1;
            }
        }
        let end = i;
        let before_ok =
            start == 0 || !(text[start - 1].is_ascii_alphanumeric() || text[start - 1] == b'.');
        let after_ok = end == text.len()
            || !(text[end].is_ascii_alphanumeric()
                || (text[end] == b'.' && end + 1 < text.len() && text[end + 1].is_ascii_digit()));
        if before_ok && after_ok {
            out.push((start, end));
        }
    }
    out
}

fn contains_folded(haystack: &[u8], needle: &[u8]) -> bool {
    !needle.is_empty()
        && haystack.len() >= needle.len()
        && haystack
            .windows(needle.len())
            .any(|w| w.eq_ignore_ascii_case(needle))
}

/// Scans path, query, header values and every decoded body view of one
/// flow. Hits are unique per (data type, variant, location).
pub fn scan_flow(
    matchers: &MatcherSet,
    flow: &FlowRecord,
    views: &DecodedViews,
) -> Vec<DetectionHit> {
    let mut found: BTreeSet<(String, VariantKind, Location)> = BTreeSet::new();
    // Plain matches that only surfaced after percent-decoding.
    let mut decoded_plain: BTreeSet<(String, Location)> = BTreeSet::new();

    for view in &views.views {
        let text = view.text.as_bytes();
        if let Some(ac) = &matchers.folded {
            for m in ac.find_overlapping_iter(text) {
                let matcher = &matchers.matchers[matchers.folded_ids[m.pattern().as_usize()]];
                if matcher.variant_kind == VariantKind::Plain && view.percent_decoded {
                    decoded_plain.insert((matcher.data_type_id.clone(), view.location));
                } else {
                    found.insert((
                        matcher.data_type_id.clone(),
                        matcher.variant_kind,
                        view.location,
                    ));
                }
            }
        }
        if let Some(ac) = &matchers.exact {
            for m in ac.find_overlapping_iter(text) {
                let matcher = &matchers.matchers[matchers.exact_ids[m.pattern().as_usize()]];
                found.insert((
                    matcher.data_type_id.clone(),
                    matcher.variant_kind,
                    view.location,
                ));
            }
        }
        if matchers.keyed.is_empty() {
            continue;
        }
        let leaf = view.leaf_key().map(|k| k.to_ascii_lowercase().into_bytes());
        for (start, end) in number_tokens(text) {
            let token = &view.text[start..end];
            let Some(ids) = matchers.keyed.get(token) else {
                continue;
            };
            let window = &text[start.saturating_sub(matchers.numeric_window)..start];
            let whole_field = view.text.trim() == token;
            for &id in ids {
                let hints = &matchers.lowered_hints[id];
                let near = hints.iter().any(|h| contains_folded(window, h));
                let keyed =
                    whole_field && leaf.as_ref().is_some_and(|k| hints.iter().any(|h| h == k));
                if near || keyed {
                    let matcher = &matchers.matchers[id];
                    found.insert((
                        matcher.data_type_id.clone(),
                        VariantKind::KeyedNumeric,
                        view.location,
                    ));
                }
            }
        }
    }

    for (data_type_id, location) in decoded_plain {
        if !found.contains(&(data_type_id.clone(), VariantKind::Plain, location)) {
            found.insert((data_type_id, VariantKind::PercentEncoded, location));
        }
    }

    let host_label = flow.host_label.unwrap_or(HostLabel::NonTracker);
    found
        .into_iter()
        .map(|(data_type_id, variant_kind, location)| DetectionHit {
            app_id: flow.app_id.clone(),
            flow_id: flow.flow_id.clone(),
            data_type_id,
            variant_kind,
            location,
            destination_host: flow.host.clone(),
            host_label,
            crawl_kind: flow.crawl_kind,
        })
        .collect()
}
