//! Binary CSR mask encoding. All integers little-endian.
//!
//! ```text
//! magic "AMSK" | version u32 | n u64 | nnz u64 | density f64 | flags u32
//! | config digest [u8; 32] | row offsets (n+1) x u64 | cols nnz x u32
//! ```
//! Flag bit 0 marks a fallback-to-full mask. An all-zero digest means no
//! config was attached.

use std::io::Write;

use super::AttentionMask;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"AMSK";
pub const FORMAT_VERSION: u32 = 1;

const FLAG_FALLBACK: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 + 8 + 8 + 4 + 32;

pub fn write_mask<W: Write>(mask: &AttentionMask, w: &mut W) -> std::io::Result<()> {
    let nnz = mask.nnz();
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(mask.n() as u64).to_le_bytes())?;
    w.write_all(&(nnz as u64).to_le_bytes())?;
    w.write_all(&mask.density().to_le_bytes())?;
    let flags = if mask.is_fallback() { FLAG_FALLBACK } else { 0 };
    w.write_all(&flags.to_le_bytes())?;
    w.write_all(&mask.config_digest().unwrap_or([0; 32]))?;
    let mut offset = 0u64;
    w.write_all(&offset.to_le_bytes())?;
    for row in mask.rows() {
        offset += row.len() as u64;
        w.write_all(&offset.to_le_bytes())?;
    }
    for row in mask.rows() {
        for c in row {
            w.write_all(&c.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn serialize_mask(mask: &AttentionMask) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * (mask.n() + 1) + 4 * mask.nnz());
    write_mask(mask, &mut out).expect("writing to a Vec cannot fail");
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(len)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::MalformedMask("truncated".into()))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn len(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::MalformedMask("length overflow".into()))
    }
}

pub fn deserialize_mask(bytes: &[u8]) -> Result<AttentionMask> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::MalformedMask("bad magic".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::MalformedMask(format!(
            "unsupported version {version}"
        )));
    }
    let n = r.len()?;
    let nnz = r.len()?;
    let _density = r.u64()?;
    let flags = r.u32()?;
    let digest: [u8; 32] = r.take(32)?.try_into().unwrap();

    let expected = n
        .checked_add(1)
        .and_then(|k| k.checked_mul(8))
        .and_then(|k| nnz.checked_mul(4).and_then(|c| c.checked_add(k)))
        .ok_or_else(|| Error::MalformedMask("length overflow".into()))?;
    if bytes.len() - r.pos != expected {
        return Err(Error::MalformedMask(format!(
            "expected {expected} payload bytes, found {}",
            bytes.len() - r.pos
        )));
    }

    let mut offsets = Vec::with_capacity(n + 1);
    for _ in 0..=n {
        offsets.push(r.len()?);
    }
    if offsets[0] != 0 || offsets[n] != nnz || offsets.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::MalformedMask("row offsets are inconsistent".into()));
    }
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = Vec::with_capacity(offsets[i + 1] - offsets[i]);
        for _ in offsets[i]..offsets[i + 1] {
            let c = r.u32()?;
            if c as usize >= n || row.last().is_some_and(|&p| p >= c) {
                return Err(Error::MalformedMask(format!("row {i} has bad columns")));
            }
            row.push(c);
        }
        rows.push(row);
    }
    let digest = (digest != [0; 32]).then_some(digest);
    Ok(AttentionMask::from_raw_parts(
        n,
        rows,
        flags & FLAG_FALLBACK != 0,
        digest,
    ))
}
