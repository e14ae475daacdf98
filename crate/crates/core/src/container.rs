//! Framing shared by the dataset and model files.
//!
//! ```text
//! offset  size  field
//! 0       8     magic
//! 8       4     format version, u32 LE
//! 12      8     payload length in bytes, u64 LE
//! 20      4     CRC-32 (IEEE) of the payload, u32 LE
//! 24      ..    payload
//! ```
//!
//! All payload integers and floats are little-endian.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

pub const HEADER_LEN: usize = 24;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("not a {expected} file (bad magic)")]
    BadMagic { expected: &'static str },
    #[error("unsupported format version {found} (this build reads up to {supported})")]
    Version { found: u32, supported: u32 },
    #[error("file truncated: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("malformed payload: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Frames `payload` with the header described in the module docs.
pub fn frame(magic: &[u8; 8], version: u32, payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(magic);
    out.extend_from_slice(&version.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&crc32fast::hash(payload).to_le_bytes());
    out.extend_from_slice(payload);
    out
}

/// Validates the header and checksum and returns `(version, payload)`.
///
/// The version is checked before anything else is read, so a newer file is
/// rejected without touching its payload.
pub fn unframe<'a>(
    bytes: &'a [u8],
    magic: &[u8; 8],
    kind: &'static str,
    supported: u32,
) -> Result<(u32, &'a [u8]), FormatError> {
    if bytes.len() < 12 {
        return Err(FormatError::Truncated {
            needed: HEADER_LEN,
            available: bytes.len(),
        });
    }
    if &bytes[..8] != magic {
        return Err(FormatError::BadMagic { expected: kind });
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version == 0 || version > supported {
        return Err(FormatError::Version {
            found: version,
            supported,
        });
    }
    if bytes.len() < HEADER_LEN {
        return Err(FormatError::Truncated {
            needed: HEADER_LEN,
            available: bytes.len(),
        });
    }
    let len = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let stored = u32::from_le_bytes(bytes[20..24].try_into().unwrap());
    let needed = usize::try_from(len)
        .ok()
        .and_then(|l| l.checked_add(HEADER_LEN))
        .ok_or_else(|| FormatError::Malformed(format!("payload length {len} overflows")))?;
    if bytes.len() < needed {
        return Err(FormatError::Truncated {
            needed,
            available: bytes.len(),
        });
    }
    if bytes.len() > needed {
        return Err(FormatError::Malformed(format!(
            "{} trailing bytes after payload",
            bytes.len() - needed
        )));
    }
    let payload = &bytes[HEADER_LEN..needed];
    let computed = crc32fast::hash(payload);
    if computed != stored {
        return Err(FormatError::Checksum { stored, computed });
    }
    Ok((version, payload))
}

/// Writes `bytes` to a temporary sibling and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"))?;
    let mut tmp_name = file_name.to_os_string();
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })
}

#[derive(Default)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn i8(&mut self, v: i8) {
        self.buf.push(v as u8);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn usize32(&mut self, v: usize) {
        self.u32(u32::try_from(v).expect("count fits in u32"));
    }

    pub fn into_inner(self) -> Vec<u8> {
        self.buf
    }
}

pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            FormatError::Malformed(format!("payload ends at {} while reading {n} bytes at {}", self.buf.len(), self.pos))
        })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8, FormatError> {
        Ok(self.take(1)?[0])
    }

    pub fn i8(&mut self) -> Result<i8, FormatError> {
        Ok(self.take(1)?[0] as i8)
    }

    pub fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> Result<f64, FormatError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn usize32(&mut self) -> Result<usize, FormatError> {
        Ok(self.u32()? as usize)
    }

    /// Count field that must not promise more items of `item_size` bytes than remain.
    pub fn count(&mut self, item_size: usize) -> Result<usize, FormatError> {
        let n = self.usize32()?;
        if n.saturating_mul(item_size) > self.remaining() {
            return Err(FormatError::Malformed(format!("count {n} exceeds remaining payload")));
        }
        Ok(n)
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn finish(self) -> Result<(), FormatError> {
        if self.remaining() != 0 {
            return Err(FormatError::Malformed(format!("{} unread payload bytes", self.remaining())));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MAGIC: &[u8; 8] = b"TESTFMT\0";

    #[test]
    fn frame_roundtrip() {
        let framed = frame(MAGIC, 1, b"hello");
        let (v, p) = unframe(&framed, MAGIC, "test", 1).unwrap();
        assert_eq!((v, p), (1, &b"hello"[..]));
    }

    #[test]
    fn detects_damage() {
        let framed = frame(MAGIC, 1, b"payload bytes");
        let mut bad = framed.clone();
        *bad.last_mut().unwrap() ^= 0x01;
        assert!(matches!(unframe(&bad, MAGIC, "test", 1), Err(FormatError::Checksum { .. })));
        assert!(matches!(
            unframe(&framed[..framed.len() - 3], MAGIC, "test", 1),
            Err(FormatError::Truncated { .. })
        ));
        assert!(matches!(unframe(&framed, b"OTHERFMT", "test", 1), Err(FormatError::BadMagic { .. })));
        let newer = frame(MAGIC, 2, b"x");
        assert!(matches!(
            unframe(&newer, MAGIC, "test", 1),
            Err(FormatError::Version { found: 2, supported: 1 })
        ));
    }

    #[test]
    fn reader_bounds() {
        let mut w = Writer::new();
        w.u32(3);
        w.f64(1.5);
        let bytes = w.into_inner();
        let mut r = Reader::new(&bytes);
        assert!(r.count(8).is_err());
        let mut r = Reader::new(&bytes);
        assert_eq!(r.u32().unwrap(), 3);
        assert_eq!(r.f64().unwrap(), 1.5);
        assert!(r.u8().is_err());
    }
}
