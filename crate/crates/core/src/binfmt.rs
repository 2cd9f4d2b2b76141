//! Framing shared by the HST1, HSF1 and HSM1 containers.
//!
//! Every file starts with a 4-byte ASCII magic, a `u32` LE version (always 1),
//! a `u32` LE length and that many bytes of UTF-8 JSON. What follows is
//! format-specific: length-prefixed JSON blocks and float32 LE payloads.

use std::io::{self, Read, Write};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub const VERSION: u32 = 1;

/// Counts bytes passed through to the inner writer.
pub(crate) struct CountingWriter<W> {
    inner: W,
    pub(crate) written: usize,
}

impl<W: Write> CountingWriter<W> {
    pub(crate) fn new(inner: W) -> Self {
        Self { inner, written: 0 }
    }
}

impl<W: Write> Write for CountingWriter<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.written += n;
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

pub(crate) fn write_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub(crate) fn write_json_block<W: Write, T: Serialize>(w: &mut W, value: &T) -> Result<()> {
    let bytes = serde_json::to_vec(value).map_err(|e| Error::Format(e.to_string()))?;
    let len = u32::try_from(bytes.len())
        .map_err(|_| Error::Format("JSON block exceeds u32 length".into()))?;
    write_u32(w, len)?;
    w.write_all(&bytes)?;
    Ok(())
}

pub(crate) fn write_preamble<W: Write, T: Serialize>(
    w: &mut W,
    magic: &[u8; 4],
    header: &T,
) -> Result<()> {
    w.write_all(magic)?;
    write_u32(w, VERSION)?;
    write_json_block(w, header)
}

/// Writes finite values as float32 LE. Values are narrowed from 64-bit where needed.
pub(crate) fn write_f32s<W: Write>(w: &mut W, values: impl IntoIterator<Item = f32>) -> Result<()> {
    let mut buf = Vec::new();
    for v in values {
        if !v.is_finite() {
            return Err(Error::Data(format!("non-finite value {v}")));
        }
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn read_exact_or<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => Error::Corruption(format!("truncated {what}")),
        _ => Error::Io(e),
    })
}

pub(crate) fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact_or(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_json_payload<R: Read, T: DeserializeOwned>(
    r: &mut R,
    len: u32,
    what: &str,
) -> Result<T> {
    let mut buf = vec![0u8; len as usize];
    read_exact_or(r, &mut buf, what)?;
    serde_json::from_slice(&buf).map_err(|e| Error::Format(format!("{what}: {e}")))
}

pub(crate) fn read_json_block<R: Read, T: DeserializeOwned>(r: &mut R, what: &str) -> Result<T> {
    let len = read_u32(r, what)?;
    read_json_payload(r, len, what)
}

/// Checks magic and version, then parses the JSON header.
pub(crate) fn read_preamble<R: Read, T: DeserializeOwned>(r: &mut R, magic: &[u8; 4]) -> Result<T> {
    let mut m = [0u8; 4];
    r.read_exact(&mut m).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => Error::UnsupportedFormat("input shorter than magic".into()),
        _ => Error::Io(e),
    })?;
    if &m != magic {
        return Err(Error::UnsupportedFormat(format!(
            "expected magic {:?}, found {:?}",
            String::from_utf8_lossy(magic),
            String::from_utf8_lossy(&m)
        )));
    }
    let version = read_u32(r, "version")?;
    if version != VERSION {
        return Err(Error::UnsupportedFormat(format!("version {version}")));
    }
    read_json_block(r, "header")
}

pub(crate) fn read_f32s<R: Read>(r: &mut R, count: usize, what: &str) -> Result<Vec<f32>> {
    let mut buf = vec![0u8; count * 4];
    read_exact_or(r, &mut buf, what)?;
    let values: Vec<f32> = buf
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Data(format!("{what}: non-finite value at offset {pos}")));
    }
    Ok(values)
}

/// Errors if the stream has any bytes left.
pub(crate) fn expect_eof<R: Read>(r: &mut R) -> Result<()> {
    let mut b = [0u8; 1];
    loop {
        match r.read(&mut b) {
            Ok(0) => return Ok(()),
            Ok(_) => return Err(Error::Corruption("trailing bytes after last record".into())),
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(Error::Io(e)),
        }
    }
}
