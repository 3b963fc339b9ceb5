//! Decoded text views of a request, each traceable to its source bytes.

use percent_encoding::percent_decode_str;
use serde::{Deserialize, Serialize};

use super::FlowRecord;

/// Maximum nesting of decoders (e.g. percent-encoded text inside a JSON
/// string is depth 2).
pub const MAX_DECODE_DEPTH: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    Path,
    Query,
    Header,
    Body,
}

impl Location {
    pub const ALL: [Location; 4] = [
        Location::Path,
        Location::Query,
        Location::Header,
        Location::Body,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Location::Path => "path",
            Location::Query => "query",
            Location::Header => "header",
            Location::Body => "body",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewKind {
    RawText,
    UrlDecoded,
    JsonStrings,
    FormFields,
    MultipartParts,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct View {
    pub kind: ViewKind,
    pub location: Location,
    /// Field name for keyed views (form field, JSON key path, part name).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
    pub text: String,
    /// Where the text came from, e.g. `body`, `body.json:u.em`, `header:Cookie`.
    pub provenance: String,
    /// Some percent-decoding step produced this text.
    pub percent_decoded: bool,
}

impl View {
    /// Last segment of a JSON key path, or the field name itself.
    pub fn leaf_key(&self) -> Option<&str> {
        self.key
            .as_deref()
            .map(|k| k.rsplit('.').next().unwrap_or(k))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodedViews {
    pub views: Vec<View>,
}

impl DecodedViews {
    pub fn of_kind(&self, kind: ViewKind) -> impl Iterator<Item = &View> {
        self.views.iter().filter(move |v| v.kind == kind)
    }

    pub fn at(&self, location: Location) -> impl Iterator<Item = &View> {
        self.views.iter().filter(move |v| v.location == location)
    }

    pub fn raw_body(&self) -> Option<&View> {
        self.views
            .iter()
            .find(|v| v.kind == ViewKind::RawText && v.location == Location::Body)
    }

    fn push(&mut self, view: View) {
        self.views.push(view);
    }
}

fn percent_decode(s: &str) -> String {
    percent_decode_str(s).decode_utf8_lossy().into_owned()
}

fn form_decode(s: &str) -> String {
    percent_decode(&s.replace('+', " "))
}

fn looks_like_json(s: &str) -> bool {
    let t = s.trim_start();
    t.starts_with('{') || t.starts_with('[')
}

struct Ctx<'a> {
    out: &'a mut DecodedViews,
    location: Location,
}

impl Ctx<'_> {
    fn view(
        &mut self,
        kind: ViewKind,
        key: Option<String>,
        text: String,
        provenance: String,
        percent_decoded: bool,
    ) {
        self.out.push(View {
            kind,
            location: self.location,
            key,
            text,
            provenance,
            percent_decoded,
        });
    }

    /// Nested decoding of a field value found at `depth`.
    fn nested(&mut self, value: &str, provenance: &str, key: Option<&str>, pd: bool, depth: usize) {
        if depth >= MAX_DECODE_DEPTH {
            return;
        }
        if looks_like_json(value) {
            if let Ok(json) = serde_json::from_str::<serde_json::Value>(value) {
                self.json(&json, provenance, depth + 1, pd);
                return;
            }
        }
        if value.contains('%') {
            let decoded = percent_decode(value);
            if decoded != value {
                self.view(
                    ViewKind::UrlDecoded,
                    key.map(str::to_string),
                    decoded,
                    format!("{provenance}>url"),
                    true,
                );
            }
        }
    }

    fn json(&mut self, root: &serde_json::Value, provenance: &str, depth: usize, pd: bool) {
        let mut stack: Vec<(String, &serde_json::Value)> = vec![(String::new(), root)];
        let mut scalars = Vec::new();
        while let Some((path, value)) = stack.pop() {
            let join = |seg: &str| {
                if path.is_empty() {
                    seg.to_string()
                } else {
                    format!("{path}.{seg}")
                }
            };
            match value {
                serde_json::Value::Object(map) => {
                    for (k, v) in map.iter().rev() {
                        stack.push((join(k), v));
                    }
                }
                serde_json::Value::Array(items) => {
                    for (i, v) in items.iter().enumerate().rev() {
                        stack.push((join(&i.to_string()), v));
                    }
                }
                serde_json::Value::String(s) => scalars.push((path, s.clone(), true)),
                serde_json::Value::Number(n) => scalars.push((path, n.to_string(), false)),
                _ => {}
            }
        }
        for (path, text, is_string) in scalars {
            let prov = format!("{provenance}.json:{path}");
            self.view(
                ViewKind::JsonStrings,
                Some(path.clone()),
                text.clone(),
                prov.clone(),
                pd,
            );
            if is_string {
                self.nested(&text, &prov, Some(&path), pd, depth);
            }
        }
    }

    fn form(&mut self, text: &str, provenance: &str, depth: usize) {
        for (k, v) in url::form_urlencoded::parse(text.as_bytes()) {
            let prov = format!("{provenance}.form:{k}");
            self.view(
                ViewKind::FormFields,
                Some(k.to_string()),
                v.to_string(),
                prov.clone(),
                true,
            );
            self.nested(&v, &prov, Some(&k), true, depth);
        }
    }
}

fn multipart_boundary(content_type: &str) -> Option<String> {
    content_type.split(';').skip(1).find_map(|param| {
        let (name, value) = param.split_once('=')?;
        name.trim()
            .eq_ignore_ascii_case("boundary")
            .then(|| value.trim().trim_matches('"').to_string())
    })
}

/// (part name, part body) for each part of a multipart body.
fn multipart_parts(body: &str, boundary: &str) -> Vec<(Option<String>, String)> {
    let delim = format!("--{boundary}");
    let mut parts = Vec::new();
    for chunk in body.split(delim.as_str()).skip(1) {
        if chunk.starts_with("--") {
            break;
        }
        let chunk = chunk
            .strip_prefix("\r\n")
            .or_else(|| chunk.strip_prefix('\n'))
            .unwrap_or(chunk);
        let (head, content) = match chunk
            .split_once("\r\n\r\n")
            .or_else(|| chunk.split_once("\n\n"))
        {
            Some(split) => split,
            None => continue,
        };
        let content = content
            .strip_suffix("\r\n")
            .or_else(|| content.strip_suffix('\n'))
            .unwrap_or(content);
        let name = head.lines().find_map(|l| {
            let (h, v) = l.split_once(':')?;
            if !h.trim().eq_ignore_ascii_case("content-disposition") {
                return None;
            }
            v.split(';').find_map(|p| {
                let (k, val) = p.split_once('=')?;
                (k.trim() == "name").then(|| val.trim().trim_matches('"').to_string())
            })
        });
        parts.push((name, content.to_string()));
    }
    parts
}

/// Builds every decoded view of a request: path, query, header values and
/// body. The raw body view is always present.
pub fn decode_body(flow: &FlowRecord) -> DecodedViews {
    let mut out = DecodedViews::default();

    if !flow.path.is_empty() {
        let mut ctx = Ctx {
            out: &mut out,
            location: Location::Path,
        };
        ctx.view(
            ViewKind::RawText,
            None,
            flow.path.clone(),
            "path".into(),
            false,
        );
        let decoded = percent_decode(&flow.path);
        if decoded != flow.path {
            ctx.view(ViewKind::UrlDecoded, None, decoded, "path>url".into(), true);
        }
    }

    if !flow.query.is_empty() {
        let mut ctx = Ctx {
            out: &mut out,
            location: Location::Query,
        };
        ctx.view(
            ViewKind::RawText,
            None,
            flow.query.clone(),
            "query".into(),
            false,
        );
        ctx.view(
            ViewKind::UrlDecoded,
            None,
            form_decode(&flow.query),
            "query>url".into(),
            true,
        );
        ctx.form(&flow.query, "query", 1);
    }

    for (name, value) in &flow.request_headers {
        let mut ctx = Ctx {
            out: &mut out,
            location: Location::Header,
        };
        let prov = format!("header:{name}");
        ctx.view(ViewKind::RawText, None, value.clone(), prov.clone(), false);
        let decoded = percent_decode(value);
        if decoded != *value {
            ctx.view(
                ViewKind::UrlDecoded,
                None,
                decoded,
                format!("{prov}>url"),
                true,
            );
        }
    }

    let body_text = String::from_utf8_lossy(&flow.request_body).into_owned();
    let mut ctx = Ctx {
        out: &mut out,
        location: Location::Body,
    };
    ctx.view(
        ViewKind::RawText,
        None,
        body_text.clone(),
        "body".into(),
        false,
    );
    if flow.request_body.is_empty() {
        return out;
    }

    let content_type = flow.content_type().unwrap_or_default();
    if content_type == "application/x-www-form-urlencoded" {
        ctx.form(&body_text, "body", 1);
    } else if content_type.starts_with("multipart/form-data") {
        let full_ct = flow
            .header("content-type")
            .or(flow.body_mime.as_deref())
            .unwrap_or("");
        if let Some(boundary) = multipart_boundary(full_ct) {
            for (i, (name, content)) in multipart_parts(&body_text, &boundary)
                .into_iter()
                .enumerate()
            {
                let prov = format!("body.part{i}");
                ctx.view(
                    ViewKind::MultipartParts,
                    name.clone(),
                    content.clone(),
                    prov.clone(),
                    false,
                );
                ctx.nested(&content, &prov, name.as_deref(), false, 1);
            }
        }
    }
    if looks_like_json(&body_text) {
        if let Ok(json) = serde_json::from_str::<serde_json::Value>(&body_text) {
            ctx.json(&json, "body", 1, false);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CrawlKind;

    fn flow(query: &str, ct: Option<&str>, body: &str) -> FlowRecord {
        FlowRecord {
            flow_id: "f#0".into(),
            app_id: "a".into(),
            crawl_kind: CrawlKind::Manual,
            timestamp: 0,
            method: "POST".into(),
            scheme: "https".into(),
            host: "h.example".into(),
            port: 443,
            path: "/p".into(),
            query: query.into(),
            request_headers: ct
                .map(|c| vec![("Content-Type".to_string(), c.to_string())])
                .unwrap_or_default(),
            request_body: body.as_bytes().to_vec(),
            body_length: body.len(),
            encoded_length: None,
            decode_failed: false,
            body_mime: None,
            response_status: None,
            host_label: None,
        }
    }

    #[test]
    fn json_paths() {
        let v = decode_body(&flow(
            "",
            Some("application/json"),
            r#"{"u":{"em":"a@b.c"}}"#,
        ));
        let j: Vec<_> = v.of_kind(ViewKind::JsonStrings).collect();
        assert_eq!(j.len(), 1);
        assert_eq!(j[0].key.as_deref(), Some("u.em"));
        assert_eq!(j[0].text, "a@b.c");
        assert_eq!(j[0].leaf_key(), Some("em"));
    }

    #[test]
    fn form_fields_percent_decoded() {
        let v = decode_body(&flow(
            "",
            Some("application/x-www-form-urlencoded; charset=UTF-8"),
            "name=Erika%20M",
        ));
        let f: Vec<_> = v.of_kind(ViewKind::FormFields).collect();
        assert_eq!(f[0].key.as_deref(), Some("name"));
        assert_eq!(f[0].text, "Erika M");
        assert!(f[0].percent_decoded);
    }

    #[test]
    fn query_base64_kept_verbatim() {
        let v = decode_body(&flow("q=eyJ3IjoiODIifQ", None, ""));
        let u: Vec<_> = v.of_kind(ViewKind::UrlDecoded).collect();
        assert_eq!(u[0].text, "q=eyJ3IjoiODIifQ");
        assert!(v.views.iter().all(|x| !x.text.contains("\"w\"")));
    }

    #[test]
    fn raw_body_always_present() {
        let v = decode_body(&flow("", None, ""));
        assert_eq!(v.raw_body().unwrap().text, "");
        let v = decode_body(&flow("", None, "\u{fffd}bin"));
        assert!(v.raw_body().is_some());
    }

    #[test]
    fn nested_depth_two_only() {
        // JSON string holding percent-encoded text is decoded once more.
        let v = decode_body(&flow(
            "",
            Some("application/json"),
            r#"{"d":"e%3Dpulsefan%40example.org"}"#,
        ));
        assert!(v
            .views
            .iter()
            .any(|x| x.kind == ViewKind::UrlDecoded && x.text == "e=pulsefan@example.org"));

        // Form value holding JSON holding percent text: the third layer stays encoded.
        let v = decode_body(&flow(
            "",
            Some("application/x-www-form-urlencoded"),
            "p=%7B%22k%22%3A%22a%2540b%22%7D",
        ));
        let j: Vec<_> = v.of_kind(ViewKind::JsonStrings).collect();
        assert_eq!(j.len(), 1);
        assert_eq!(j[0].text, "a%40b");
        assert!(!v.views.iter().any(|x| x.text == "a@b"));
    }

    #[test]
    fn multipart_parts_are_split() {
        let body = "--XyZ\r\nContent-Disposition: form-data; name=\"meta\"\r\n\r\n{\"w\":82}\r\n--XyZ\r\nContent-Disposition: form-data; name=\"note\"\r\n\r\nhello\r\n--XyZ--\r\n";
        let v = decode_body(&flow("", Some("multipart/form-data; boundary=XyZ"), body));
        let parts: Vec<_> = v.of_kind(ViewKind::MultipartParts).collect();
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[0].key.as_deref(), Some("meta"));
        assert_eq!(parts[1].text, "hello");
        assert!(v
            .of_kind(ViewKind::JsonStrings)
            .any(|x| x.key.as_deref() == Some("w") && x.text == "82"));
    }

    #[test]
    fn views_are_reproducible() {
        let f = flow("a=1%202", Some("application/json"), r#"{"x":[1,"y%20z"]}"#);
        assert_eq!(decode_body(&f), decode_body(&f.clone()));
    }
}
