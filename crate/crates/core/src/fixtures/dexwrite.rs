//! Minimal DEX and APK writers for synthetic artifacts. The DEX output has
//! a valid header, string table and type table; no code sections.

use std::io::{Cursor, Write};

use sha1::{Digest, Sha1};

const HEADER_SIZE: usize = 0x70;
const ENDIAN_CONSTANT: u32 = 0x1234_5678;

/// Modified UTF-8: NUL as C0 80, supplementary characters as surrogate
/// pairs of three bytes each.
pub fn encode_mutf8(s: &str) -> Vec<u8> {
    let mut out = Vec::with_capacity(s.len());
    for unit in s.encode_utf16() {
        match unit {
            0x01..=0x7F => out.push(unit as u8),
            0x00 | 0x80..=0x7FF => {
                out.push(0xC0 | (unit >> 6) as u8);
                out.push(0x80 | (unit & 0x3F) as u8);
            }
            _ => {
                out.push(0xE0 | (unit >> 12) as u8);
                out.push(0x80 | ((unit >> 6) & 0x3F) as u8);
                out.push(0x80 | (unit & 0x3F) as u8);
            }
        }
    }
    out
}

fn uleb128(mut v: u32, out: &mut Vec<u8>) {
    loop {
        let byte = (v & 0x7F) as u8;
        v >>= 7;
        if v == 0 {
            out.push(byte);
            return;
        }
        out.push(byte | 0x80);
    }
}

/// `com.example.Foo` -> `Lcom/example/Foo;`
pub fn class_descriptor(class_name: &str) -> String {
    format!("L{};", class_name.replace('.', "/"))
}

fn put_u32(buf: &mut [u8], off: usize, v: u32) {
    buf[off..off + 4].copy_from_slice(&v.to_le_bytes());
}

/// Builds a DEX file whose type table lists `class_names`. `extra_strings`
/// are added to the string table without a type entry.
pub fn build_dex(class_names: &[String], extra_strings: &[String]) -> Vec<u8> {
    let mut descriptors: Vec<String> = class_names.iter().map(|c| class_descriptor(c)).collect();
    descriptors.sort();
    descriptors.dedup();
    let mut strings: Vec<String> = descriptors
        .iter()
        .cloned()
        .chain(extra_strings.iter().cloned())
        .collect();
    // The format orders strings by UTF-16 code units.
    strings.sort_by(|a, b| a.encode_utf16().cmp(b.encode_utf16()));
    strings.dedup();
    let type_idx: Vec<u32> = {
        let mut idx: Vec<u32> = descriptors
            .iter()
            .map(|d| {
                strings
                    .iter()
                    .position(|s| s == d)
                    .expect("descriptor is a string") as u32
            })
            .collect();
        idx.sort();
        idx
    };

    let string_ids_off = HEADER_SIZE;
    let type_ids_off = string_ids_off + 4 * strings.len();
    let data_off = type_ids_off + 4 * type_idx.len();

    let mut data = Vec::new();
    let mut string_offsets = Vec::with_capacity(strings.len());
    for s in &strings {
        string_offsets.push((data_off + data.len()) as u32);
        uleb128(s.encode_utf16().count() as u32, &mut data);
        data.extend(encode_mutf8(s));
        data.push(0);
    }
    while data.len() % 4 != 0 {
        data.push(0);
    }

    let file_size = data_off + data.len();
    let mut buf = vec![0u8; file_size];
    buf[0..8].copy_from_slice(b"dex\n035\0");
    put_u32(&mut buf, 0x20, file_size as u32);
    put_u32(&mut buf, 0x24, HEADER_SIZE as u32);
    put_u32(&mut buf, 0x28, ENDIAN_CONSTANT);
    put_u32(&mut buf, 0x38, strings.len() as u32);
    put_u32(
        &mut buf,
        0x3C,
        if strings.is_empty() {
            0
        } else {
            string_ids_off as u32
        },
    );
    put_u32(&mut buf, 0x40, type_idx.len() as u32);
    put_u32(
        &mut buf,
        0x44,
        if type_idx.is_empty() {
            0
        } else {
            type_ids_off as u32
        },
    );
    put_u32(&mut buf, 0x68, data.len() as u32);
    put_u32(&mut buf, 0x6C, data_off as u32);
    for (i, off) in string_offsets.iter().enumerate() {
        put_u32(&mut buf, string_ids_off + 4 * i, *off);
    }
    for (i, idx) in type_idx.iter().enumerate() {
        put_u32(&mut buf, type_ids_off + 4 * i, *idx);
    }
    buf[data_off..].copy_from_slice(&data);

    let signature = Sha1::digest(&buf[32..]);
    buf[12..32].copy_from_slice(&signature);
    let mut adler = adler2::Adler32::new();
    adler.write_slice(&buf[12..]);
    put_u32(&mut buf, 8, adler.checksum());
    buf
}

/// Packs DEX files as `classes.dex`, `classes2.dex`, … plus a stub manifest.
pub fn build_apk(dex_files: &[Vec<u8>]) -> Vec<u8> {
    let mut zip = zip::ZipWriter::new(Cursor::new(Vec::new()));
    let options = zip::write::SimpleFileOptions::default()
        .compression_method(zip::CompressionMethod::Deflated)
        .last_modified_time(zip::DateTime::default());
    zip.start_file("AndroidManifest.xml", options)
        .expect("in-memory zip");
    zip.write_all(b"\x03\x00\x08\x00").expect("in-memory zip");
    for (i, dex) in dex_files.iter().enumerate() {
        let name = if i == 0 {
            "classes.dex".to_string()
        } else {
            format!("classes{}.dex", i + 1)
        };
        zip.start_file(name, options).expect("in-memory zip");
        zip.write_all(dex).expect("in-memory zip");
    }
    zip.finish().expect("in-memory zip").into_inner()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::staticscan::{class_set_from_bytes, classes_from_dex};

    #[test]
    fn dex_round_trips_through_parser() {
        let classes = vec![
            "com.example.b.Second".to_string(),
            "com.example.a.First".to_string(),
            "org.ünïcode.Klass".to_string(),
        ];
        let dex = build_dex(&classes, &["not a type".into(), "V".into()]);
        let mut got = classes_from_dex(&dex).unwrap();
        got.sort();
        let mut want = classes.clone();
        want.sort();
        assert_eq!(got, want);
    }

    #[test]
    fn apk_with_two_dex_files() {
        let a = build_dex(&["com.a.One".into()], &[]);
        let b = build_dex(&["com.b.Two".into()], &[]);
        let apk = build_apk(&[a, b]);
        let set = class_set_from_bytes(&apk, "x").unwrap();
        assert_eq!(set.dex_files, 2);
        assert_eq!(set.classes.len(), 2);
    }

    #[test]
    fn mutf8_forms() {
        assert_eq!(encode_mutf8("\0"), vec![0xC0, 0x80]);
        assert_eq!(encode_mutf8("é"), "é".as_bytes());
        assert_eq!(encode_mutf8("😀").len(), 6);
    }
}
