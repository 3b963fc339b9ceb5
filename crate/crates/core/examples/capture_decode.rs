//! Ingests one JSONL flow with a gzip JSON body and lists the decoded
//! views the detector searches.

use std::io::Write;

use base64::Engine;
use mhealth_audit::capture::{decode_body, ingest_bytes, FlowLine};
use mhealth_audit::model::CrawlKind;

fn main() {
    let body = br#"{"user":{"email":"pulsefan.qz@example.org","weight":82},"note":"a%20b"}"#;
    let mut gz = flate2::write::GzEncoder::new(Vec::new(), flate2::Compression::default());
    gz.write_all(body).unwrap();
    let line = FlowLine {
        app: "com.example.diet".into(),
        ts: 1_700_000_000_000,
        kind: None,
        method: "POST".into(),
        url: "https://api.example.org/v2/sync?city=Charlottenburg&goal=Build%20Endurance".into(),
        headers: vec![
            ("Content-Type".into(), "application/json".into()),
            ("Content-Encoding".into(), "gzip".into()),
        ],
        body_b64: base64::engine::general_purpose::STANDARD.encode(gz.finish().unwrap()),
    };
    let text = serde_json::to_string(&line).unwrap();
    let outcome = ingest_bytes(
        text.as_bytes(),
        "demo.jsonl",
        "com.example.diet",
        CrawlKind::Manual,
    )
    .expect("recognised format");
    let flow = &outcome.flows[0];
    println!(
        "{} {}://{}{} ({} body bytes)",
        flow.method, flow.scheme, flow.host, flow.path, flow.body_length
    );
    for view in decode_body(flow).views {
        println!(
            "  {:<6} {:<12?} {:<28} {}",
            view.location.as_str(),
            view.kind,
            view.provenance,
            view.text
        );
    }
}
