use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use base64::engine::general_purpose::{STANDARD, STANDARD_NO_PAD, URL_SAFE_NO_PAD};
use base64::Engine;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::dexwrite::{build_apk, build_dex};
use super::{AppPlan, AppTruth, ArtifactStyle, CaptureStyle, FixtureConfig, GroundTruth, LeakPlan};
use crate::assess::{evaluate_labels, evaluate_scope, ExpectationPolicy};
use crate::capture::{FlowLine, Location};
use crate::detect::{hash_hex, percent_encoded, DetectionHit, DetectionSet, Persona, VariantKind};
use crate::error::{Error, Result};
use crate::hostclass::HostLabel;
use crate::model::{AppRecord, CaptureRef, CrawlKind, Taxonomy};
use crate::pipeline::{AuditManifest, ManifestOptions};
use crate::staticscan::{default_signature_db, default_signature_json, TrackerSignature};

const BASE_TS: i64 = 1_700_000_000_000;
const CONSONANTS: &[u8] = b"bcdfghjklmnpqrstvwxz";

/// A written corpus directory.
#[derive(Debug, Clone)]
pub struct GeneratedCorpus {
    pub dir: PathBuf,
    pub manifest: PathBuf,
    pub truth_path: PathBuf,
    pub truth: GroundTruth,
}

struct Decoys {
    /// Lowercased strings no random token may contain.
    forbidden: Vec<String>,
}

impl Decoys {
    fn new(persona: &Persona) -> Self {
        let mut forbidden = Vec::new();
        for attr in &persona.attributes {
            forbidden.extend(attr.key_hints.iter().map(|h| h.to_ascii_lowercase()));
            if !attr.numeric {
                forbidden.extend(
                    attr.values
                        .iter()
                        .filter(|v| v.len() >= 3)
                        .map(|v| v.to_ascii_lowercase()),
                );
            }
        }
        Decoys { forbidden }
    }

    fn word(&self, rng: &mut ChaCha8Rng) -> String {
        loop {
            let len = rng.gen_range(16..=24);
            let w: String = (0..len)
                .map(|_| CONSONANTS[rng.gen_range(0..CONSONANTS.len())] as char)
                .collect();
            if !self.forbidden.iter().any(|f| w.contains(f.as_str())) {
                return w;
            }
        }
    }

    fn number(&self, rng: &mut ChaCha8Rng) -> u64 {
        rng.gen_range(100_000..10_000_000_000u64)
    }
}

#[derive(Debug, Clone, Copy)]
enum BodyStyle {
    Json,
    Form,
    Text,
}

impl BodyStyle {
    fn pick(n: usize) -> Self {
        match n % 3 {
            0 => BodyStyle::Json,
            1 => BodyStyle::Form,
            _ => BodyStyle::Text,
        }
    }

    fn content_type(self) -> &'static str {
        match self {
            BodyStyle::Json => "application/json",
            BodyStyle::Form => "application/x-www-form-urlencoded",
            BodyStyle::Text => "text/plain",
        }
    }
}

/// What gets embedded at the plant location.
enum Fragment {
    Value(String),
    Keyed { hint: String, value: String },
}

struct Request {
    method: &'static str,
    url: String,
    headers: Vec<(String, String)>,
    body: Vec<u8>,
    crawl: CrawlKind,
}

fn url_safe(s: &str) -> bool {
    s.bytes()
        .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'-' | b'.' | b'_' | b'~' | b'@'))
}

fn invalid(app: &AppPlan, msg: impl AsRef<str>) -> Error {
    Error::InvalidPlan(format!("{}: {}", app.app_id, msg.as_ref()))
}

/// Encodes the persona value for a leak the way the detector searches.
fn fragment_for(
    persona: &Persona,
    app: &AppPlan,
    leak: &LeakPlan,
    upper: bool,
) -> Result<Fragment> {
    let attr = persona
        .attribute(&leak.data_type)
        .ok_or_else(|| invalid(app, format!("no persona value for `{}`", leak.data_type)))?;
    if leak.variant == VariantKind::KeyedNumeric {
        if !attr.numeric {
            return Err(invalid(app, format!("`{}` is not numeric", leak.data_type)));
        }
        return Ok(Fragment::Keyed {
            hint: attr.key_hints[0].clone(),
            value: attr.values[0].clone(),
        });
    }
    if attr.numeric {
        return Err(invalid(
            app,
            format!("numeric `{}` only supports keyed_numeric", leak.data_type),
        ));
    }
    let in_url = matches!(leak.location, Location::Path | Location::Query);
    let value = attr
        .values
        .iter()
        .find(|v| match leak.variant {
            VariantKind::Plain => !in_url || url_safe(v),
            VariantKind::PercentEncoded => percent_encoded(v) != **v,
            _ => true,
        })
        .ok_or_else(|| {
            invalid(
                app,
                format!(
                    "no value of `{}` can be planted as {} in {}",
                    leak.data_type,
                    leak.variant,
                    leak.location.as_str()
                ),
            )
        })?;
    let encoded = match leak.variant {
        VariantKind::Plain => value.clone(),
        VariantKind::PercentEncoded => percent_encoded(value),
        VariantKind::Base64 => match leak.location {
            Location::Path | Location::Query => URL_SAFE_NO_PAD.encode(value),
            Location::Header => STANDARD_NO_PAD.encode(value),
            Location::Body => STANDARD.encode(value),
        },
        kind => {
            let digest = hash_hex(kind, value).expect("hash kind");
            if upper {
                digest.to_ascii_uppercase()
            } else {
                digest
            }
        }
    };
    Ok(Fragment::Value(encoded))
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("string serializes")
}

fn decoy_body(d: &Decoys, rng: &mut ChaCha8Rng, style: BodyStyle) -> String {
    let (k1, w1, k2, n) = (d.word(rng), d.word(rng), d.word(rng), d.number(rng));
    match style {
        BodyStyle::Json => format!(
            "{{{}:{},{}:{}}}",
            json_str(&k1),
            json_str(&w1),
            json_str(&k2),
            n
        ),
        BodyStyle::Form => format!("{k1}={w1}&{k2}={n}"),
        BodyStyle::Text => format!("{w1} {n}"),
    }
}

fn plant_body(d: &Decoys, rng: &mut ChaCha8Rng, style: BodyStyle, frag: &Fragment) -> String {
    let (k1, w1, n) = (d.word(rng), d.word(rng), d.number(rng));
    match (style, frag) {
        (BodyStyle::Json, Fragment::Value(v)) => {
            let k2 = d.word(rng);
            format!(
                "{{{}:{},{}:{},{}:{}}}",
                json_str(&k1),
                json_str(&w1),
                json_str(&k2),
                json_str(v),
                json_str(&d.word(rng)),
                n
            )
        }
        (BodyStyle::Form, Fragment::Value(v)) => {
            format!("{k1}={w1}&{}={v}&{}={n}", d.word(rng), d.word(rng))
        }
        (BodyStyle::Text, Fragment::Value(v)) => format!("{w1} {v} {n}"),
        (BodyStyle::Json, Fragment::Keyed { hint, value }) => {
            format!(
                "{{{}:{},{}:{}}}",
                json_str(hint),
                value,
                json_str(&k1),
                json_str(&w1)
            )
        }
        (BodyStyle::Form, Fragment::Keyed { hint, value }) => format!("{hint}={value}&{k1}={w1}"),
        (BodyStyle::Text, Fragment::Keyed { hint, value }) => format!("{w1} {hint}: {value}"),
    }
}

fn capitalized(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_ascii_uppercase().to_string() + c.as_str(),
        None => String::new(),
    }
}

fn base_request(d: &Decoys, rng: &mut ChaCha8Rng, host: &str, crawl: CrawlKind) -> Request {
    Request {
        method: "POST",
        url: format!("https://{host}/v1/{}", d.word(rng)),
        headers: vec![
            ("Accept".into(), "*/*".into()),
            ("User-Agent".into(), format!("{}-sdk", d.word(rng))),
        ],
        body: Vec::new(),
        crawl,
    }
}

fn set_body(req: &mut Request, style: BodyStyle, body: String) {
    req.headers
        .push(("Content-Type".into(), style.content_type().into()));
    req.body = body.into_bytes();
}

fn leak_request(
    d: &Decoys,
    rng: &mut ChaCha8Rng,
    host: &str,
    leak: &LeakPlan,
    frag: &Fragment,
    style: BodyStyle,
) -> Request {
    let mut req = base_request(d, rng, host, leak.crawl);
    match leak.location {
        Location::Path => {
            let seg = match frag {
                Fragment::Value(v) => v.clone(),
                Fragment::Keyed { hint, value } => format!("{hint}/{value}"),
            };
            req.url = format!("{}/{seg}", req.url);
        }
        Location::Query => {
            let pair = match frag {
                Fragment::Value(v) => format!("{}={v}", d.word(rng)),
                Fragment::Keyed { hint, value } => format!("{hint}={value}"),
            };
            req.url = format!("{}?{pair}&{}={}", req.url, d.word(rng), d.word(rng));
        }
        Location::Header => {
            let value = match frag {
                Fragment::Value(v) => v.clone(),
                Fragment::Keyed { hint, value } => format!("{hint}={value}"),
            };
            req.headers
                .push((format!("X-{}", capitalized(&d.word(rng))), value));
        }
        Location::Body => {}
    }
    let body = if leak.location == Location::Body {
        plant_body(d, rng, style, frag)
    } else {
        decoy_body(d, rng, style)
    };
    set_body(&mut req, style, body);
    req
}

fn gzip(bytes: &[u8]) -> Vec<u8> {
    let mut enc = flate2::write::GzEncoder::new(Vec::new(), flate2::Compression::default());
    enc.write_all(bytes).expect("in-memory gzip");
    enc.finish().expect("in-memory gzip")
}

fn rfc3339(ts: i64) -> String {
    chrono::DateTime::from_timestamp_millis(ts)
        .expect("timestamp in range")
        .format("%Y-%m-%dT%H:%M:%S%.3fZ")
        .to_string()
}

fn render_capture(app_id: &str, style: CaptureStyle, requests: &[Request], ts0: i64) -> Vec<u8> {
    match style {
        CaptureStyle::Jsonl | CaptureStyle::JsonlGzip => {
            let mut out = String::new();
            for (i, r) in requests.iter().enumerate() {
                let mut headers = r.headers.clone();
                let mut body = r.body.clone();
                if style == CaptureStyle::JsonlGzip && !body.is_empty() {
                    body = gzip(&body);
                    headers.push(("Content-Encoding".into(), "gzip".into()));
                }
                let line = FlowLine {
                    app: app_id.to_string(),
                    ts: ts0 + 1000 * i as i64,
                    kind: Some(r.crawl),
                    method: r.method.to_string(),
                    url: r.url.clone(),
                    headers,
                    body_b64: STANDARD.encode(&body),
                };
                out.push_str(&serde_json::to_string(&line).expect("flow line serializes"));
                out.push('\n');
            }
            out.into_bytes()
        }
        CaptureStyle::Har => {
            let entries: Vec<serde_json::Value> = requests
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    let headers: Vec<serde_json::Value> = r
                        .headers
                        .iter()
                        .map(|(n, v)| json!({"name": n, "value": v}))
                        .collect();
                    let mut request = json!({
                        "method": r.method,
                        "url": r.url,
                        "httpVersion": "HTTP/1.1",
                        "headers": headers,
                        "queryString": [],
                        "cookies": [],
                        "headersSize": -1,
                        "bodySize": r.body.len(),
                    });
                    if !r.body.is_empty() {
                        let mime = r
                            .headers
                            .iter()
                            .find(|(n, _)| n == "Content-Type")
                            .map(|(_, v)| v.as_str())
                            .unwrap_or("text/plain");
                        request["postData"] = json!({
                            "mimeType": mime,
                            "text": String::from_utf8_lossy(&r.body),
                        });
                    }
                    json!({
                        "startedDateTime": rfc3339(ts0 + 1000 * i as i64),
                        "time": 0,
                        "request": request,
                        "response": {"status": 200, "statusText": "OK", "httpVersion": "HTTP/1.1",
                                     "headers": [], "cookies": [], "content": {"size": 0, "mimeType": ""},
                                     "redirectURL": "", "headersSize": -1, "bodySize": 0},
                        "cache": {},
                        "timings": {"send": 0, "wait": 0, "receive": 0},
                    })
                })
                .collect();
            let har = json!({"log": {"version": "1.2", "creator": {"name": "fixture", "version": "1"}, "entries": entries}});
            let mut bytes = serde_json::to_vec_pretty(&har).expect("har serializes");
            bytes.push(b'\n');
            bytes
        }
    }
}

fn capture_ext(style: CaptureStyle) -> &'static str {
    match style {
        CaptureStyle::Har => "har",
        _ => "jsonl",
    }
}

fn slug(app_id: &str) -> String {
    app_id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '-'
            }
        })
        .collect()
}

/// True if `class` would match some signature prefix.
fn matches_any(class: &str, db: &[TrackerSignature]) -> bool {
    db.iter().flat_map(|s| &s.code_prefixes).any(|p| {
        class == p
            || (class.starts_with(p.as_str()) && class.as_bytes().get(p.len()) == Some(&b'.'))
    })
}

fn artifact_bytes(
    plan: &AppPlan,
    index: usize,
    sigs: &[&TrackerSignature],
    db: &[TrackerSignature],
    d: &Decoys,
    rng: &mut ChaCha8Rng,
) -> (String, Vec<u8>) {
    let mut classes = vec![
        format!("{}.MainActivity", plan.app_id),
        format!("{}.ui.{}", plan.app_id, capitalized(&d.word(rng))),
    ];
    for sig in sigs {
        classes.push(format!(
            "{}.{}",
            sig.code_prefixes[0],
            capitalized(&d.word(rng))
        ));
        classes.push(format!(
            "{}.internal.{}",
            sig.code_prefixes[0],
            capitalized(&d.word(rng))
        ));
    }
    // Names that share a prefix string but cross no package boundary.
    for k in [index, index + 7] {
        let sig = &db[k % db.len()];
        let near = format!("{}x.{}", sig.code_prefixes[0], capitalized(&d.word(rng)));
        if !matches_any(&near, db) {
            classes.push(near);
        }
    }
    classes.sort();
    match plan.artifact {
        ArtifactStyle::ClassList => {
            let mut text = format!("# classes of {}\n", plan.app_id);
            for c in &classes {
                text.push_str(c);
                text.push('\n');
            }
            ("txt".into(), text.into_bytes())
        }
        ArtifactStyle::Dex => (
            "dex".into(),
            build_dex(&classes, &["V".into(), "<init>".into()]),
        ),
        ArtifactStyle::Apk => {
            let (a, b): (Vec<_>, Vec<_>) = classes
                .iter()
                .cloned()
                .enumerate()
                .partition(|(i, _)| i % 2 == 0);
            let a: Vec<String> = a.into_iter().map(|(_, c)| c).collect();
            let b: Vec<String> = b.into_iter().map(|(_, c)| c).collect();
            (
                "apk".into(),
                build_apk(&[build_dex(&a, &["V".into()]), build_dex(&b, &[])]),
            )
        }
    }
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Picks a host of the wanted label, cycling through the candidates.
fn host_for(plan: &AppPlan, hosts: &[String], label: HostLabel, n: usize) -> Result<String> {
    let pool: &[String] = match label {
        HostLabel::Tracker => &plan.tracker_hosts,
        HostLabel::NonTracker => hosts,
    };
    if pool.is_empty() {
        return Err(invalid(
            plan,
            format!("leak to {} but no such host", label.as_str()),
        ));
    }
    Ok(pool[n % pool.len()].clone())
}

/// Writes a corpus directory for `config` into `dir`.
pub fn generate_corpus(config: &FixtureConfig, dir: &Path) -> Result<GeneratedCorpus> {
    let plans = config.resolved_apps()?;
    let taxonomy = Taxonomy::default_taxonomy();
    let persona = Persona::default_persona();
    let db = default_signature_db();
    let policy = ExpectationPolicy::default_policy();
    let decoys = Decoys::new(&persona);
    let by_id: BTreeMap<&str, &TrackerSignature> =
        db.iter().map(|s| (s.signature_id.as_str(), s)).collect();

    let mut seen = BTreeSet::new();
    let mut tracker_hosts = BTreeSet::new();
    let mut first_party = BTreeSet::new();
    for plan in &plans {
        if !seen.insert(plan.app_id.as_str()) {
            return Err(invalid(plan, "duplicate app id"));
        }
        for id in &plan.embedded {
            if !by_id.contains_key(id.as_str()) {
                return Err(invalid(plan, format!("unknown signature id `{id}`")));
            }
        }
        for leak in &plan.leaks {
            if !taxonomy.contains(&leak.data_type) {
                return Err(invalid(
                    plan,
                    format!("unknown data type `{}`", leak.data_type),
                ));
            }
        }
        tracker_hosts.extend(plan.tracker_hosts.iter().cloned());
        first_party.extend(plan.non_tracker_hosts.iter().cloned());
    }
    if let Some(h) = tracker_hosts.intersection(&first_party).next() {
        return Err(Error::InvalidPlan(format!(
            "host `{h}` is both tracker and non-tracker"
        )));
    }

    for sub in ["artifacts", "captures"] {
        let p = dir.join(sub);
        std::fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
    }

    let mut records = Vec::with_capacity(plans.len());
    let mut truths = Vec::with_capacity(plans.len());
    let mut hits = Vec::new();
    for (index, plan) in plans.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(
            config.seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15),
        );
        let sigs: Vec<&TrackerSignature> =
            plan.embedded.iter().map(|id| by_id[id.as_str()]).collect();
        let (ext, bytes) = artifact_bytes(plan, index, &sigs, &db, &decoys, &mut rng);
        let artifact_rel = PathBuf::from("artifacts").join(format!("{}.{ext}", plan.app_id));
        write(&dir.join(&artifact_rel), &bytes)?;

        let non_tracker: Vec<String> = if plan.non_tracker_hosts.is_empty() {
            vec![format!("api.{}.example", slug(&plan.app_id))]
        } else {
            plan.non_tracker_hosts.clone()
        };
        let all_hosts: Vec<String> = plan
            .tracker_hosts
            .iter()
            .chain(&non_tracker)
            .cloned()
            .collect();

        let mut captures = Vec::new();
        let mut requests_total = 0;
        let mut reviewable_total = 0;
        for crawl in CrawlKind::ALL {
            let leaks: Vec<&LeakPlan> = plan.leaks.iter().filter(|l| l.crawl == crawl).collect();
            let (reviewable, requests) = match crawl {
                CrawlKind::Manual => {
                    let reviewable = plan
                        .reviewable
                        .unwrap_or(leaks.len() + config.decoy_flow_count);
                    let requests = plan
                        .requests
                        .unwrap_or_else(|| (reviewable + 1).max(all_hosts.len()));
                    if reviewable < leaks.len() {
                        return Err(invalid(plan, "fewer reviewable requests than leaks"));
                    }
                    if requests < reviewable || requests < all_hosts.len() {
                        return Err(invalid(plan, "too few requests for its hosts and bodies"));
                    }
                    (reviewable, requests)
                }
                CrawlKind::Automated if leaks.is_empty() => continue,
                CrawlKind::Automated => (leaks.len() + 1, leaks.len() + 1),
            };
            let ext = capture_ext(plan.capture);
            let file_name = format!("{}.{}.{ext}", plan.app_id, crawl.as_str());
            let mut reqs = Vec::with_capacity(requests);
            let mut used = BTreeSet::new();
            for (n, leak) in leaks.iter().enumerate() {
                let host = host_for(plan, &non_tracker, leak.destination, n)?;
                let frag = fragment_for(&persona, plan, leak, n % 2 == 1)?;
                let style = BodyStyle::pick(index + n);
                used.insert(host.clone());
                hits.push(DetectionHit {
                    app_id: plan.app_id.clone(),
                    flow_id: format!("{file_name}#{}", reqs.len()),
                    data_type_id: leak.data_type.clone(),
                    variant_kind: leak.variant,
                    location: leak.location,
                    destination_host: host.clone(),
                    host_label: leak.destination,
                    crawl_kind: crawl,
                });
                reqs.push(leak_request(&decoys, &mut rng, &host, leak, &frag, style));
            }
            let mut rotation = 0;
            while reqs.len() < requests {
                let n = reqs.len();
                let host = match all_hosts.iter().find(|h| !used.contains(*h)) {
                    Some(h) => h.clone(),
                    None => {
                        rotation += 1;
                        all_hosts[(rotation - 1) % all_hosts.len()].clone()
                    }
                };
                used.insert(host.clone());
                let mut req = base_request(&decoys, &mut rng, &host, crawl);
                if n < reviewable {
                    let style = BodyStyle::pick(index + n);
                    set_body(&mut req, style, decoy_body(&decoys, &mut rng, style));
                } else {
                    req.method = "GET";
                    req.url = format!(
                        "{}?{}={}",
                        req.url,
                        decoys.word(&mut rng),
                        decoys.number(&mut rng)
                    );
                }
                reqs.push(req);
            }
            requests_total += reqs.len();
            reviewable_total += reqs.iter().filter(|r| !r.body.is_empty()).count();
            let ts0 = BASE_TS + 10_000_000 * index as i64;
            let rel = PathBuf::from("captures").join(&file_name);
            write(
                &dir.join(&rel),
                &render_capture(&plan.app_id, plan.capture, &reqs, ts0),
            )?;
            captures.push(CaptureRef { path: rel, crawl });
        }

        let display_name = if plan.display_name.is_empty() {
            format!("Fixture App {:03}", index + 1)
        } else {
            plan.display_name.clone()
        };
        records.push(AppRecord {
            app_id: plan.app_id.clone(),
            display_name,
            feature_category: plan.feature_category,
            labels: plan.labels.clone(),
            artifact: Some(artifact_rel),
            captures,
        });
        let mut names: Vec<String> = sigs.iter().map(|s| s.tracker_name.clone()).collect();
        names.sort();
        names.dedup();
        let mut sig_ids = plan.embedded.clone();
        sig_ids.sort();
        sig_ids.dedup();
        truths.push(AppTruth {
            app_id: plan.app_id.clone(),
            feature_category: plan.feature_category,
            signature_ids: sig_ids,
            tracker_names: names,
            tracker_hosts: plan.tracker_hosts.clone(),
            non_tracker_hosts: non_tracker,
            requests: requests_total,
            reviewable: reviewable_total,
        });
    }
    hits.sort();

    let mut hosts_txt = String::from("# fixture tracker hosts\n127.0.0.1 localhost\n");
    for h in &tracker_hosts {
        hosts_txt.push_str(&format!("0.0.0.0 {h}\n"));
    }
    for k in 0..3 {
        hosts_txt.push_str(&format!("0.0.0.0 unused{k}.blocklisted.example\n"));
    }
    write(&dir.join("hosts.txt"), hosts_txt.as_bytes())?;
    write(
        &dir.join("taxonomy.json"),
        Taxonomy::default_json().as_bytes(),
    )?;
    write(
        &dir.join("persona.json"),
        Persona::default_json().as_bytes(),
    )?;
    write(
        &dir.join("signatures.json"),
        default_signature_json().as_bytes(),
    )?;
    write(
        &dir.join("policy.json"),
        ExpectationPolicy::default_json().as_bytes(),
    )?;

    let manifest = AuditManifest {
        taxonomy: "taxonomy.json".into(),
        persona: "persona.json".into(),
        hosts: "hosts.txt".into(),
        signatures: "signatures.json".into(),
        policy: Some("policy.json".into()),
        psl: None,
        options: ManifestOptions {
            output_dir: "out".into(),
            ..Default::default()
        },
        apps: records,
    };
    let manifest_path = dir.join("manifest.json");
    write_pretty(&manifest_path, &manifest)?;

    let detections = DetectionSet::from_hits(manifest.apps.iter().map(|a| a.app_id.as_str()), hits);
    let empty = Default::default();
    let mut scope = Vec::new();
    let mut verdicts = Vec::new();
    for app in &manifest.apps {
        let rollup = detections.rollup.get(&app.app_id).unwrap_or(&empty);
        scope.extend(evaluate_scope(
            &policy,
            &taxonomy,
            rollup,
            app,
            Some(CrawlKind::Manual),
        )?);
        verdicts.extend(evaluate_labels(
            app,
            rollup,
            &taxonomy,
            Some(CrawlKind::Manual),
        ));
    }
    let truth = GroundTruth {
        seed: config.seed,
        apps: truths,
        hits: detections.hits,
        scope,
        verdicts,
    };
    let truth_path = dir.join("ground_truth.json");
    write_pretty(&truth_path, &truth)?;
    Ok(GeneratedCorpus {
        dir: dir.to_path_buf(),
        manifest: manifest_path,
        truth_path,
        truth,
    })
}

fn write_pretty<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::json(path, e))?;
    bytes.push(b'\n');
    write(path, &bytes)
}
