//! Minimal DEX reader: header, string-id table and type-id table.
//!
//! Only what is needed to list class descriptors is decoded. Method, field
//! and bytecode sections are never touched.

use crate::error::{Error, Result};

pub const HEADER_SIZE: usize = 0x70;
pub const ENDIAN_CONSTANT: u32 = 0x1234_5678;

const STRING_IDS_SIZE_OFF: usize = 0x38;
const STRING_IDS_OFF_OFF: usize = 0x3C;
const TYPE_IDS_SIZE_OFF: usize = 0x40;
const TYPE_IDS_OFF_OFF: usize = 0x44;
const ENDIAN_TAG_OFF: usize = 0x28;

pub fn has_dex_magic(bytes: &[u8]) -> bool {
    bytes.len() >= 8 && &bytes[0..4] == b"dex\n" && bytes[7] == 0
}

fn read_u32(bytes: &[u8], off: usize, what: &str) -> Result<u32> {
    bytes
        .get(off..off + 4)
        .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::MalformedDex(format!("truncated while reading {what} at {off:#x}")))
}

fn read_uleb128(bytes: &[u8], mut off: usize) -> Result<(u32, usize)> {
    let mut result: u32 = 0;
    for i in 0..5 {
        let b = *bytes
            .get(off)
            .ok_or_else(|| Error::MalformedDex("truncated uleb128".into()))?;
        off += 1;
        result |= u32::from(b & 0x7f) << (7 * i);
        if b & 0x80 == 0 {
            return Ok((result, off));
        }
    }
    Err(Error::MalformedDex("uleb128 longer than 5 bytes".into()))
}

/// Decodes a NUL-terminated MUTF-8 string starting at `off`.
///
/// Surrogate pairs are recombined; anything undecodable becomes U+FFFD.
pub fn decode_mutf8(bytes: &[u8], off: usize) -> Result<String> {
    let end = bytes[off.min(bytes.len())..]
        .iter()
        .position(|&b| b == 0)
        .map(|p| off + p)
        .ok_or_else(|| Error::MalformedDex(format!("unterminated string at {off:#x}")))?;
    let data = &bytes[off..end];

    if data.is_ascii() {
        return Ok(String::from_utf8_lossy(data).into_owned());
    }

    let mut units: Vec<u16> = Vec::with_capacity(data.len());
    let mut i = 0;
    while i < data.len() {
        let b0 = data[i];
        if b0 & 0x80 == 0 {
            units.push(u16::from(b0));
            i += 1;
        } else if b0 & 0xE0 == 0xC0 && i + 1 < data.len() && data[i + 1] & 0xC0 == 0x80 {
            units.push((u16::from(b0 & 0x1F) << 6) | u16::from(data[i + 1] & 0x3F));
            i += 2;
        } else if b0 & 0xF0 == 0xE0
            && i + 2 < data.len()
            && data[i + 1] & 0xC0 == 0x80
            && data[i + 2] & 0xC0 == 0x80
        {
            units.push(
                (u16::from(b0 & 0x0F) << 12)
                    | (u16::from(data[i + 1] & 0x3F) << 6)
                    | u16::from(data[i + 2] & 0x3F),
            );
            i += 3;
        } else {
            units.push(0xFFFD);
            i += 1;
        }
    }
    Ok(char::decode_utf16(units)
        .map(|r| r.unwrap_or(char::REPLACEMENT_CHARACTER))
        .collect())
}

/// Parsed view over the string and type tables of one DEX file.
#[derive(Debug)]
pub struct DexFile<'a> {
    bytes: &'a [u8],
    string_ids_off: usize,
    string_ids_size: usize,
    type_ids_off: usize,
    type_ids_size: usize,
}

impl<'a> DexFile<'a> {
    pub fn parse(bytes: &'a [u8]) -> Result<Self> {
        if !has_dex_magic(bytes) {
            return Err(Error::MalformedDex("bad magic".into()));
        }
        if bytes.len() < HEADER_SIZE {
            return Err(Error::MalformedDex(format!(
                "file is {} bytes, shorter than the header",
                bytes.len()
            )));
        }
        let endian = read_u32(bytes, ENDIAN_TAG_OFF, "endian tag")?;
        if endian != ENDIAN_CONSTANT {
            return Err(Error::MalformedDex(format!(
                "unsupported endian tag {endian:#010x}"
            )));
        }
        let string_ids_size = read_u32(bytes, STRING_IDS_SIZE_OFF, "string_ids_size")? as usize;
        let string_ids_off = read_u32(bytes, STRING_IDS_OFF_OFF, "string_ids_off")? as usize;
        let type_ids_size = read_u32(bytes, TYPE_IDS_SIZE_OFF, "type_ids_size")? as usize;
        let type_ids_off = read_u32(bytes, TYPE_IDS_OFF_OFF, "type_ids_off")? as usize;

        check_table(bytes, string_ids_off, string_ids_size, "string_ids")?;
        check_table(bytes, type_ids_off, type_ids_size, "type_ids")?;

        Ok(DexFile {
            bytes,
            string_ids_off,
            string_ids_size,
            type_ids_off,
            type_ids_size,
        })
    }

    pub fn string_count(&self) -> usize {
        self.string_ids_size
    }

    pub fn type_count(&self) -> usize {
        self.type_ids_size
    }

    pub fn string(&self, idx: usize) -> Result<String> {
        if idx >= self.string_ids_size {
            return Err(Error::MalformedDex(format!(
                "string index {idx} out of range ({})",
                self.string_ids_size
            )));
        }
        let data_off =
            read_u32(self.bytes, self.string_ids_off + 4 * idx, "string_data_off")? as usize;
        if data_off >= self.bytes.len() {
            return Err(Error::MalformedDex(format!(
                "string data offset {data_off:#x} beyond end of file"
            )));
        }
        let (_utf16_len, start) = read_uleb128(self.bytes, data_off)?;
        decode_mutf8(self.bytes, start)
    }

    /// Every type descriptor in type-id order.
    pub fn type_descriptors(&self) -> Result<Vec<String>> {
        (0..self.type_ids_size)
            .map(|i| {
                let idx = read_u32(self.bytes, self.type_ids_off + 4 * i, "descriptor_idx")?;
                self.string(idx as usize)
            })
            .collect()
    }

    /// Dotted class names for all reference-type descriptors.
    pub fn class_names(&self) -> Result<Vec<String>> {
        Ok(self
            .type_descriptors()?
            .iter()
            .filter_map(|d| descriptor_to_class_name(d))
            .collect())
    }
}

fn check_table(bytes: &[u8], off: usize, count: usize, what: &str) -> Result<()> {
    if count == 0 {
        return Ok(());
    }
    let end = count
        .checked_mul(4)
        .and_then(|len| off.checked_add(len))
        .ok_or_else(|| Error::MalformedDex(format!("{what} table size overflows")))?;
    if off < HEADER_SIZE || end > bytes.len() {
        return Err(Error::MalformedDex(format!(
            "{what} table [{off:#x}, {end:#x}) outside file of {} bytes",
            bytes.len()
        )));
    }
    Ok(())
}

/// `Lcom/foo/Bar;` becomes `com.foo.Bar`; arrays and primitives yield `None`.
pub fn descriptor_to_class_name(descriptor: &str) -> Option<String> {
    let inner = descriptor.strip_prefix('L')?.strip_suffix(';')?;
    if inner.is_empty() {
        return None;
    }
    Some(inner.replace('/', "."))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn descriptor_rules() {
        assert_eq!(
            descriptor_to_class_name("Lcom/google/firebase/analytics/FirebaseAnalytics;")
                .as_deref(),
            Some("com.google.firebase.analytics.FirebaseAnalytics")
        );
        assert_eq!(descriptor_to_class_name("I"), None);
        assert_eq!(descriptor_to_class_name("[B"), None);
        assert_eq!(descriptor_to_class_name("[Ljava/lang/String;"), None);
        assert_eq!(
            descriptor_to_class_name("La/B$C;").as_deref(),
            Some("a.B$C")
        );
    }

    #[test]
    fn mutf8_null_and_surrogates() {
        // "a", encoded NUL (C0 80), U+00E9, then U+1F600 as a surrogate pair.
        let mut bytes = vec![b'a', 0xC0, 0x80, 0xC3, 0xA9];
        bytes.extend_from_slice(&[0xED, 0xA0, 0xBD, 0xED, 0xB8, 0x80, 0x00]);
        let s = decode_mutf8(&bytes, 0).unwrap();
        assert_eq!(s, "a\u{0}\u{e9}\u{1F600}");
    }

    #[test]
    fn mutf8_garbage_is_replaced() {
        let s = decode_mutf8(&[b'x', 0xFF, b'y', 0], 0).unwrap();
        assert_eq!(s, "x\u{FFFD}y");
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        assert!(matches!(
            DexFile::parse(b"not a dex file at all"),
            Err(Error::MalformedDex(_))
        ));
        let mut short = b"dex\n035\0".to_vec();
        short.resize(0x40, 0);
        assert!(matches!(
            DexFile::parse(&short),
            Err(Error::MalformedDex(_))
        ));
    }

    #[test]
    fn rejects_tables_outside_file() {
        let mut bytes = b"dex\n035\0".to_vec();
        bytes.resize(HEADER_SIZE, 0);
        bytes[ENDIAN_TAG_OFF..ENDIAN_TAG_OFF + 4].copy_from_slice(&ENDIAN_CONSTANT.to_le_bytes());
        bytes[STRING_IDS_SIZE_OFF..STRING_IDS_SIZE_OFF + 4].copy_from_slice(&10u32.to_le_bytes());
        bytes[STRING_IDS_OFF_OFF..STRING_IDS_OFF_OFF + 4]
            .copy_from_slice(&(HEADER_SIZE as u32).to_le_bytes());
        assert!(matches!(
            DexFile::parse(&bytes),
            Err(Error::MalformedDex(_))
        ));
    }
}
