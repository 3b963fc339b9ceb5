use base64::Engine;
use serde::Deserialize;

use super::RawRequest;

#[derive(Deserialize)]
struct Har {
    log: HarLog,
}

#[derive(Deserialize)]
struct HarLog {
    #[serde(default)]
    entries: Vec<serde_json::Value>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct HarEntry {
    #[serde(default)]
    started_date_time: Option<String>,
    request: HarRequest,
    #[serde(default)]
    response: Option<HarResponse>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct HarRequest {
    method: String,
    url: String,
    #[serde(default)]
    headers: Vec<HarHeader>,
    #[serde(default)]
    post_data: Option<HarPostData>,
}

#[derive(Deserialize)]
struct HarHeader {
    name: String,
    value: String,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct HarPostData {
    #[serde(default)]
    mime_type: Option<String>,
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    params: Vec<HarParam>,
    #[serde(default, rename = "encoding")]
    encoding: Option<String>,
}

#[derive(Deserialize)]
struct HarParam {
    name: String,
    #[serde(default)]
    value: Option<String>,
}

#[derive(Deserialize)]
struct HarResponse {
    #[serde(default)]
    status: Option<i64>,
}

fn parse_timestamp(s: &str) -> i64 {
    chrono::DateTime::parse_from_rfc3339(s)
        .map(|dt| dt.timestamp_millis())
        .unwrap_or(0)
}

fn body_of(post: &HarPostData) -> Option<Vec<u8>> {
    match &post.text {
        Some(text) if post.encoding.as_deref() == Some("base64") => {
            base64::engine::general_purpose::STANDARD.decode(text).ok()
        }
        Some(text) => Some(text.as_bytes().to_vec()),
        None if !post.params.is_empty() => {
            let mut ser = url::form_urlencoded::Serializer::new(String::new());
            for p in &post.params {
                ser.append_pair(&p.name, p.value.as_deref().unwrap_or(""));
            }
            Some(ser.finish().into_bytes())
        }
        None => Some(Vec::new()),
    }
}

/// Entries of a HAR log; `None` items are malformed entries.
pub(super) fn requests(bytes: &[u8]) -> Option<Vec<Option<RawRequest>>> {
    let har: Har = serde_json::from_slice(bytes).ok()?;
    Some(
        har.log
            .entries
            .into_iter()
            .map(|value| {
                let entry: HarEntry = serde_json::from_value(value).ok()?;
                let body = match &entry.request.post_data {
                    Some(post) => body_of(post)?,
                    None => Vec::new(),
                };
                Some(RawRequest {
                    timestamp: entry
                        .started_date_time
                        .as_deref()
                        .map(parse_timestamp)
                        .unwrap_or(0),
                    method: entry.request.method,
                    url: entry.request.url,
                    headers: entry
                        .request
                        .headers
                        .into_iter()
                        .map(|h| (h.name, h.value))
                        .collect(),
                    body,
                    body_mime: entry
                        .request
                        .post_data
                        .and_then(|p| p.mime_type)
                        .filter(|m| !m.is_empty()),
                    response_status: entry
                        .response
                        .and_then(|r| r.status)
                        .and_then(|s| u16::try_from(s).ok())
                        .filter(|&s| s > 0),
                })
            })
            .collect(),
    )
}
