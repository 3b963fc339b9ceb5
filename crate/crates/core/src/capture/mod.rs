//! Recorded HTTP traffic: ingestion into [`FlowRecord`]s, transfer
//! decoding and the reviewable-request filter.

mod decode;
mod har;

use std::io::Read;
use std::path::Path;

use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hostclass::HostLabel;
use crate::model::CrawlKind;

pub use decode::{decode_body, DecodedViews, Location, View, ViewKind};

/// One recorded outbound HTTP request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowRecord {
    pub flow_id: String,
    pub app_id: String,
    pub crawl_kind: CrawlKind,
    pub timestamp: i64,
    pub method: String,
    pub scheme: String,
    pub host: String,
    pub port: u16,
    pub path: String,
    pub query: String,
    pub request_headers: Vec<(String, String)>,
    #[serde(with = "b64")]
    pub request_body: Vec<u8>,
    pub body_length: usize,
    /// Length on the wire before content decoding, when it differed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub encoded_length: Option<usize>,
    /// Content decoding was attempted and failed; the body is kept raw.
    #[serde(default)]
    pub decode_failed: bool,
    /// MIME type reported by the capture when no Content-Type header exists.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body_mime: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response_status: Option<u16>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub host_label: Option<HostLabel>,
}

mod b64 {
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&base64::engine::general_purpose::STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        base64::engine::general_purpose::STANDARD
            .decode(s)
            .map_err(serde::de::Error::custom)
    }
}

impl FlowRecord {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.request_headers
            .iter()
            .find(|(n, _)| n.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }

    /// Lowercased MIME type without parameters.
    pub fn content_type(&self) -> Option<String> {
        self.header("content-type")
            .or(self.body_mime.as_deref())
            .map(|ct| {
                ct.split(';')
                    .next()
                    .unwrap_or("")
                    .trim()
                    .to_ascii_lowercase()
            })
            .filter(|ct| !ct.is_empty())
    }

    pub fn url(&self) -> String {
        let mut url = format!("{}://{}{}", self.scheme, self.host, self.path);
        if !self.query.is_empty() {
            url.push('?');
            url.push_str(&self.query);
        }
        url
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaptureFormat {
    Har,
    FlowJsonl,
}

/// Flows read from one capture file plus per-file warnings.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestOutcome {
    pub flows: Vec<FlowRecord>,
    pub malformed_entries: usize,
    pub decompression_failures: usize,
}

/// One line of the flow-record JSONL format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowLine {
    #[serde(default)]
    pub app: String,
    #[serde(default)]
    pub ts: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<CrawlKind>,
    pub method: String,
    pub url: String,
    #[serde(default)]
    pub headers: Vec<(String, String)>,
    #[serde(default)]
    pub body_b64: String,
}

/// Decides between HAR and JSONL from the content.
pub fn detect_format(bytes: &[u8]) -> Option<CaptureFormat> {
    let text = bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(bytes);
    let first = text.iter().find(|b| !b.is_ascii_whitespace())?;
    if *first != b'{' {
        return None;
    }
    if let Ok(value) = serde_json::from_slice::<serde_json::Value>(text) {
        if value.get("log").and_then(|l| l.get("entries")).is_some() {
            return Some(CaptureFormat::Har);
        }
        if value.get("url").is_some() {
            return Some(CaptureFormat::FlowJsonl);
        }
        return None;
    }
    Some(CaptureFormat::FlowJsonl)
}

pub(crate) struct RawRequest {
    pub timestamp: i64,
    pub method: String,
    pub url: String,
    pub headers: Vec<(String, String)>,
    pub body: Vec<u8>,
    pub body_mime: Option<String>,
    pub response_status: Option<u16>,
}

fn decompress(encoding: &str, body: &[u8]) -> Option<Vec<u8>> {
    let mut out = Vec::new();
    match encoding {
        "gzip" | "x-gzip" => flate2::read::GzDecoder::new(body)
            .read_to_end(&mut out)
            .ok()
            .map(|_| out),
        "deflate" => {
            if flate2::read::ZlibDecoder::new(body)
                .read_to_end(&mut out)
                .is_ok()
            {
                return Some(out);
            }
            out.clear();
            flate2::read::DeflateDecoder::new(body)
                .read_to_end(&mut out)
                .ok()
                .map(|_| out)
        }
        _ => None,
    }
}

fn build_flow(
    raw: RawRequest,
    flow_id: String,
    app_id: &str,
    crawl_kind: CrawlKind,
    decompression_failures: &mut usize,
) -> Option<FlowRecord> {
    let url = url::Url::parse(raw.url.trim()).ok()?;
    let host = url
        .host_str()?
        .trim_start_matches('[')
        .trim_end_matches(']')
        .to_ascii_lowercase();
    if host.is_empty() {
        return None;
    }
    let port = url.port_or_known_default().unwrap_or(0);

    let mut body = raw.body;
    let mut encoded_length = None;
    let mut decode_failed = false;
    let encoding = raw
        .headers
        .iter()
        .find(|(n, _)| n.eq_ignore_ascii_case("content-encoding"))
        .map(|(_, v)| v.trim().to_ascii_lowercase());
    if let Some(enc) = encoding.filter(|e| !e.is_empty() && e != "identity") {
        if !body.is_empty() {
            match decompress(&enc, &body) {
                Some(decoded) => {
                    encoded_length = Some(body.len());
                    body = decoded;
                }
                None => {
                    decode_failed = true;
                    *decompression_failures += 1;
                    log::warn!("{flow_id}: could not decode `{enc}` body, keeping raw bytes");
                }
            }
        }
    }

    Some(FlowRecord {
        flow_id,
        app_id: app_id.to_string(),
        crawl_kind,
        timestamp: raw.timestamp,
        method: raw.method.trim().to_ascii_uppercase(),
        scheme: url.scheme().to_string(),
        host,
        port,
        path: url.path().to_string(),
        query: url.query().unwrap_or("").to_string(),
        request_headers: raw.headers,
        body_length: body.len(),
        request_body: body,
        encoded_length,
        decode_failed,
        body_mime: raw.body_mime,
        response_status: raw.response_status,
        host_label: None,
    })
}

/// Parses capture bytes. `source_name` prefixes the index-based flow ids.
pub fn ingest_bytes(
    bytes: &[u8],
    source_name: &str,
    app_id: &str,
    crawl_kind: CrawlKind,
) -> Option<IngestOutcome> {
    let format = detect_format(bytes)?;
    let mut outcome = IngestOutcome::default();
    let raws: Vec<Option<RawRequest>> = match format {
        CaptureFormat::Har => har::requests(bytes)?,
        CaptureFormat::FlowJsonl => {
            let text = String::from_utf8_lossy(bytes);
            text.lines()
                .filter(|l| !l.trim().is_empty())
                .map(parse_flow_line)
                .collect()
        }
    };
    for (index, raw) in raws.into_iter().enumerate() {
        let flow_id = format!("{source_name}#{index}");
        let flow = raw.and_then(|raw| {
            build_flow(
                raw,
                flow_id.clone(),
                app_id,
                crawl_kind,
                &mut outcome.decompression_failures,
            )
        });
        match flow {
            Some(flow) => outcome.flows.push(flow),
            None => {
                log::warn!("{flow_id}: skipping malformed entry");
                outcome.malformed_entries += 1;
            }
        }
    }
    Some(outcome)
}

fn parse_flow_line(line: &str) -> Option<RawRequest> {
    let rec: FlowLine = serde_json::from_str(line).ok()?;
    let body = base64::engine::general_purpose::STANDARD
        .decode(rec.body_b64.trim())
        .ok()?;
    Some(RawRequest {
        timestamp: rec.ts,
        method: rec.method,
        url: rec.url,
        headers: rec.headers,
        body,
        body_mime: None,
        response_status: None,
    })
}

/// Reads a HAR 1.2 or flow-record JSONL capture.
pub fn ingest_capture(file: &Path, app_id: &str, crawl_kind: CrawlKind) -> Result<IngestOutcome> {
    let bytes = std::fs::read(file).map_err(|e| Error::io(file, e))?;
    let name = file
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| file.display().to_string());
    ingest_bytes(&bytes, &name, app_id, crawl_kind)
        .ok_or_else(|| Error::UnknownCaptureFormat(file.to_path_buf()))
}

/// Requests with a non-empty body, order preserved.
pub fn filter_reviewable(flows: &[FlowRecord]) -> Vec<FlowRecord> {
    flows
        .iter()
        .filter(|f| f.body_length > 0)
        .cloned()
        .collect()
}
