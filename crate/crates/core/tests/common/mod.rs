#![allow(dead_code)]

use std::io::Write;
use std::path::Path;

use mhealth_audit::fixtures::{generate_corpus, FixtureConfig, GeneratedCorpus, ScopeTableRow};
use mhealth_audit::model::FeatureCategory;
use mhealth_audit::pipeline::{corpus_stats, run_pipeline, Audit, StageOutputs};
use mhealth_audit::stats::CorpusStats;

// ---------------------------------------------------------------------------
// Hand-assembled multi-dex APK and an independent string-table reader.

fn uleb(mut v: u32, out: &mut Vec<u8>) {
    loop {
        let b = (v & 0x7f) as u8;
        v >>= 7;
        if v == 0 {
            out.push(b);
            break;
        }
        out.push(b | 0x80);
    }
}

/// One string as (utf16 length, MUTF-8 bytes), spelled out by hand.
type RawString = (u32, Vec<u8>);

fn ascii(s: &str) -> RawString {
    (s.len() as u32, s.as_bytes().to_vec())
}

/// Lays out string data first, then the id tables, unlike the usual
/// header-ids-data order; readers must follow the offsets.
fn assemble_dex(strings: &[RawString], type_string_idx: &[u32]) -> Vec<u8> {
    let mut data = Vec::new();
    let mut offsets = Vec::new();
    for (len, bytes) in strings {
        offsets.push(0x70 + data.len() as u32);
        uleb(*len, &mut data);
        data.extend_from_slice(bytes);
        data.push(0);
    }
    while data.len() % 4 != 0 {
        data.push(0);
    }
    let string_ids_off = 0x70 + data.len() as u32;
    let type_ids_off = string_ids_off + 4 * strings.len() as u32;
    let mut out = vec![0u8; 0x70];
    out.extend_from_slice(&data);
    for o in &offsets {
        out.extend_from_slice(&o.to_le_bytes());
    }
    for t in type_string_idx {
        out.extend_from_slice(&t.to_le_bytes());
    }
    out[..8].copy_from_slice(b"dex\n039\0");
    let size = out.len() as u32;
    let put =
        |buf: &mut Vec<u8>, off: usize, v: u32| buf[off..off + 4].copy_from_slice(&v.to_le_bytes());
    put(&mut out, 0x20, size);
    put(&mut out, 0x24, 0x70);
    put(&mut out, 0x28, 0x1234_5678);
    put(&mut out, 0x38, strings.len() as u32);
    put(&mut out, 0x3c, string_ids_off);
    put(&mut out, 0x40, type_string_idx.len() as u32);
    put(&mut out, 0x44, type_ids_off);
    put(&mut out, 0x68, data.len() as u32);
    put(&mut out, 0x6c, 0x70);
    out
}

/// Three DEX files packed as an APK, with types that are not classes,
/// strings that are not types, two-byte and surrogate-pair characters.
pub fn hand_assembled_apk() -> Vec<u8> {
    let dex1 = assemble_dex(
        &[
            ascii("I"),
            ascii("Lcom/appsflyer/AppsFlyerLib;"),
            ascii("Lcom/example/app/MainActivity;"),
            ascii("V"),
            ascii("[Lcom/example/app/Item;"),
            ascii("onCreate"),
        ],
        &[0, 1, 2, 3, 4],
    );
    // "Lorg/ünï/Cläss;" with two-byte sequences for ü, ï, ä.
    let mut umlaut = b"Lorg/".to_vec();
    umlaut.extend_from_slice(&[0xc3, 0xbc, b'n', 0xc3, 0xaf]);
    umlaut.extend_from_slice(b"/Cl");
    umlaut.extend_from_slice(&[0xc3, 0xa4]);
    umlaut.extend_from_slice(b"ss;");
    // "Lio/emoji/Face😀;" with U+1F600 as a CESU-style surrogate pair.
    let mut emoji = b"Lio/emoji/Face".to_vec();
    emoji.extend_from_slice(&[0xed, 0xa0, 0xbd, 0xed, 0xb8, 0x80]);
    emoji.push(b';');
    let dex2 = assemble_dex(
        &[
            ascii("Lcom/facebook/appevents/AppEventsLogger;"),
            ascii("Lcom/google/firebase/analyticsx/NotIt;"),
            (15, umlaut),
            (17, emoji),
            ascii("Z"),
        ],
        &[0, 1, 2, 3, 4],
    );
    let dex3 = assemble_dex(
        &[
            ascii("Lcom/example/app/MainActivity;"),
            ascii("Lio/sentry/Sentry;"),
        ],
        &[0, 1],
    );

    let mut zip = zip::ZipWriter::new(std::io::Cursor::new(Vec::new()));
    let stored =
        zip::write::SimpleFileOptions::default().compression_method(zip::CompressionMethod::Stored);
    let deflated = zip::write::SimpleFileOptions::default()
        .compression_method(zip::CompressionMethod::Deflated);
    zip.start_file("AndroidManifest.xml", stored).unwrap();
    zip.write_all(b"\x03\x00\x08\x00").unwrap();
    zip.start_file("classes.dex", deflated).unwrap();
    zip.write_all(&dex1).unwrap();
    zip.start_file("classes2.dex", stored).unwrap();
    zip.write_all(&dex2).unwrap();
    zip.start_file("assets/classes.dex.bak", stored).unwrap();
    zip.write_all(b"not a dex").unwrap();
    zip.start_file("classes3.dex", deflated).unwrap();
    zip.write_all(&dex3).unwrap();
    zip.finish().unwrap().into_inner()
}

fn le32(b: &[u8], off: usize) -> usize {
    u32::from_le_bytes(b[off..off + 4].try_into().unwrap()) as usize
}

/// MUTF-8 to UTF-16 code units, then to a Rust string.
fn mutf8(bytes: &[u8]) -> String {
    let mut units = Vec::new();
    let mut i = 0;
    while i < bytes.len() && bytes[i] != 0 {
        let b = bytes[i];
        if b < 0x80 {
            units.push(b as u16);
            i += 1;
        } else if b & 0xe0 == 0xc0 {
            units.push(((b as u16 & 0x1f) << 6) | (bytes[i + 1] as u16 & 0x3f));
            i += 2;
        } else {
            units.push(
                ((b as u16 & 0x0f) << 12)
                    | ((bytes[i + 1] as u16 & 0x3f) << 6)
                    | (bytes[i + 2] as u16 & 0x3f),
            );
            i += 3;
        }
    }
    String::from_utf16(&units).unwrap()
}

/// Reference-type class names of one DEX file, read straight from the
/// string and type id tables.
pub fn oracle_dex_classes(dex: &[u8]) -> Vec<String> {
    let (n_str, str_off) = (le32(dex, 0x38), le32(dex, 0x3c));
    let (n_type, type_off) = (le32(dex, 0x40), le32(dex, 0x44));
    let strings: Vec<String> = (0..n_str)
        .map(|i| {
            let mut p = le32(dex, str_off + 4 * i);
            while dex[p] & 0x80 != 0 {
                p += 1;
            }
            mutf8(&dex[p + 1..])
        })
        .collect();
    (0..n_type)
        .map(|i| &strings[le32(dex, type_off + 4 * i)])
        .filter(|d| d.starts_with('L') && d.ends_with(';'))
        .map(|d| d[1..d.len() - 1].replace('/', "."))
        .collect()
}

/// Sorted, deduplicated classes across every `classesN.dex` in an APK.
pub fn oracle_apk_classes(apk: &[u8]) -> Vec<String> {
    let mut archive = zip::ZipArchive::new(std::io::Cursor::new(apk)).unwrap();
    let mut all = std::collections::BTreeSet::new();
    for i in 0..archive.len() {
        let mut f = archive.by_index(i).unwrap();
        let name = f.name().to_string();
        let is_dex = name
            .strip_prefix("classes")
            .and_then(|r| r.strip_suffix(".dex"))
            .is_some_and(|n| n.bytes().all(|b| b.is_ascii_digit()));
        if is_dex {
            let mut buf = Vec::new();
            std::io::Read::read_to_end(&mut f, &mut buf).unwrap();
            all.extend(oracle_dex_classes(&buf));
        }
    }
    all.into_iter().collect()
}

// ---------------------------------------------------------------------------
// Published scope matrix of 152 apps. Counts in column order: device ids,
// location, user info, body measurements, fitness, female health, medical.

pub const SCOPE_TABLE: [(FeatureCategory, usize, [usize; 7]); 14] = [
    (FeatureCategory::ScreenOverlay, 3, [2, 1, 2, 0, 0, 0, 0]),
    (FeatureCategory::HealthEducation, 14, [9, 1, 7, 2, 0, 0, 0]),
    (FeatureCategory::StepCounter, 4, [4, 1, 4, 1, 1, 0, 1]),
    (
        FeatureCategory::WorkoutTracker,
        26,
        [25, 1, 25, 7, 10, 0, 1],
    ),
    (FeatureCategory::CardioTracker, 14, [12, 3, 12, 1, 1, 0, 0]),
    (FeatureCategory::DietTracker, 12, [12, 5, 10, 6, 5, 0, 3]),
    (FeatureCategory::Wearable, 3, [2, 0, 1, 1, 1, 0, 1]),
    (FeatureCategory::MentalWellbeing, 6, [6, 0, 5, 1, 5, 0, 0]),
    (FeatureCategory::Pharmacy, 5, [5, 2, 4, 1, 0, 0, 0]),
    (FeatureCategory::PhysicianFinder, 1, [1, 1, 1, 0, 0, 0, 0]),
    (FeatureCategory::FemaleHealth, 26, [20, 5, 19, 4, 1, 9, 7]),
    (FeatureCategory::Diagnostic, 1, [1, 1, 1, 0, 0, 0, 0]),
    (FeatureCategory::HealthMonitor, 34, [23, 4, 23, 2, 3, 2, 9]),
    (FeatureCategory::Telemedicine, 3, [3, 2, 2, 1, 1, 0, 0]),
];

/// Cells printed as out of scope: (feature category, column index).
pub const OUT_OF_SCOPE_CELLS: [(FeatureCategory, usize); 11] = [
    (FeatureCategory::ScreenOverlay, 1),
    (FeatureCategory::HealthEducation, 1),
    (FeatureCategory::HealthEducation, 3),
    (FeatureCategory::StepCounter, 6),
    (FeatureCategory::WorkoutTracker, 6),
    (FeatureCategory::DietTracker, 1),
    (FeatureCategory::DietTracker, 6),
    (FeatureCategory::Wearable, 6),
    (FeatureCategory::FemaleHealth, 1),
    (FeatureCategory::Diagnostic, 1),
    (FeatureCategory::HealthMonitor, 1),
];

pub fn scope_rows() -> Vec<ScopeTableRow> {
    SCOPE_TABLE
        .iter()
        .map(|&(feature_category, apps, counts)| ScopeTableRow {
            feature_category,
            apps,
            counts,
        })
        .collect()
}

// ---------------------------------------------------------------------------

pub struct Audited {
    pub corpus: GeneratedCorpus,
    pub audit: Audit,
    pub stats: CorpusStats,
    pub ledger: Vec<mhealth_audit::model::LedgerEntry>,
}

/// Generates `config` into `dir` and runs every stage on it.
pub fn audit_fixture(config: &FixtureConfig, dir: &Path) -> Audited {
    let corpus = generate_corpus(config, dir).unwrap();
    let audit = Audit::load(&corpus.manifest, None).unwrap();
    let ledger = run_pipeline(&audit).unwrap();
    let stats = corpus_stats(&audit, &StageOutputs::load(&audit).unwrap());
    Audited {
        corpus,
        audit,
        stats,
        ledger,
    }
}
