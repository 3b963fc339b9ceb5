//! Compiles the bundled persona and scans a hand-written request.

use mhealth_audit::capture::{decode_body, ingest_bytes, FlowLine};
use mhealth_audit::detect::{compile_persona, hash_hex, scan_flow, Persona, VariantKind};
use mhealth_audit::hostclass::HostLabel;
use mhealth_audit::model::{CrawlKind, Taxonomy};

fn main() -> mhealth_audit::Result<()> {
    let matchers = compile_persona(&Persona::default_persona(), &Taxonomy::default_taxonomy())?;
    println!("{} matchers compiled", matchers.len());

    let uid = hash_hex(VariantKind::Md5Hex, "5f2c9e1a-7b3d-4c8e-9a61-d04b7e3f28c5").unwrap();
    let line = FlowLine {
        app: String::new(),
        ts: 0,
        kind: None,
        method: "POST".into(),
        url: format!("https://events.tracker.example/collect?uid={uid}"),
        headers: vec![(
            "Content-Type".into(),
            "application/x-www-form-urlencoded".into(),
        )],
        body_b64: base64::Engine::encode(
            &base64::engine::general_purpose::STANDARD,
            "condition=Migraine&heart=72&page=3",
        ),
    };
    let text = serde_json::to_string(&line).unwrap();
    let mut flow = ingest_bytes(
        text.as_bytes(),
        "demo.jsonl",
        "com.example.app",
        CrawlKind::Manual,
    )
    .expect("recognised format")
    .flows
    .remove(0);
    flow.host_label = Some(HostLabel::Tracker);

    for hit in scan_flow(&matchers, &flow, &decode_body(&flow)) {
        println!(
            "{:<18} {:<15} {:<6} -> {} ({})",
            hit.data_type_id,
            hit.variant_kind.as_str(),
            hit.location.as_str(),
            hit.destination_host,
            hit.host_label.as_str()
        );
    }
    Ok(())
}
