use super::{RawEntry, RawKeyValues, RawValue};
use crate::error::{Error, Result};

pub const VENDOR_B_MAGIC: [u8; 8] = *b"VNDB\x00\x01\x00\x00";
pub const TYPE_F64: u8 = 0x01;
pub const TYPE_U32: u8 = 0x02;

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.bytes.len());
        let Some(end) = end else {
            return Err(Error::Truncated(format!(
                "{what} at offset {} needs {n} bytes, {} remain",
                self.pos,
                self.bytes.len() - self.pos
            )));
        };
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }
}

/// Layout: magic, then TLV records `u16 key_len | key | u8 type | u16
/// value_len | value` until a zero key length.
pub fn parse_vendor_b(bytes: &[u8]) -> Result<(RawKeyValues, Vec<String>)> {
    let mut cur = Cursor { bytes, pos: 0 };
    cur.take(VENDOR_B_MAGIC.len(), "magic")?;
    let mut raw = RawKeyValues::default();
    let mut warnings = Vec::new();
    loop {
        let key_len = cur.u16("key length")? as usize;
        if key_len == 0 {
            break;
        }
        let key_bytes = cur.take(key_len, "key")?;
        if !key_bytes.is_ascii() {
            return Err(Error::Encoding(format!(
                "non-ASCII key at offset {}",
                cur.pos - key_len
            )));
        }
        let key = String::from_utf8(key_bytes.to_vec()).expect("ASCII is UTF-8");
        let type_code = cur.take(1, "value type")?[0];
        let value_len = cur.u16("value length")? as usize;
        let value = match (type_code, value_len) {
            (TYPE_F64, 8) => {
                let b = cur.take(8, "f64 value")?;
                RawValue::Number(f64::from_le_bytes(b.try_into().unwrap()))
            }
            (TYPE_U32, 4) => {
                let b = cur.take(4, "u32 value")?;
                RawValue::Integer(u32::from_le_bytes(b.try_into().unwrap()) as u64)
            }
            _ => return Err(Error::BadType { key, type_code }),
        };
        if !raw.upsert(RawEntry { key: key.clone(), value, unit: None }) {
            warnings.push(format!("duplicate key `{key}`; last value kept"));
        }
    }
    if cur.pos < bytes.len() {
        warnings.push(format!(
            "{} trailing bytes after terminator ignored",
            bytes.len() - cur.pos
        ));
    }
    Ok((raw, warnings))
}
