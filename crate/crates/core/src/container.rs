//! Framing shared by the binary file formats: 4 magic bytes, a `u32` LE
//! version, a `u32` LE length, a JSON header of that length, then a payload.

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ContainerError {
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: String },
    #[error("unsupported version {found} (expected {expected})")]
    Version { expected: u32, found: u32 },
    #[error("file truncated: expected at least {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("malformed header JSON: {0}")]
    Header(#[from] serde_json::Error),
}

pub(crate) fn write_frame<H: Serialize>(
    out: &mut Vec<u8>,
    magic: &[u8; 4],
    version: u32,
    header: &H,
) -> Result<(), serde_json::Error> {
    let json = serde_json::to_vec(header)?;
    out.extend_from_slice(magic);
    out.extend_from_slice(&version.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    Ok(())
}

/// Parses the frame and returns the header plus the payload slice.
pub(crate) fn read_frame<'a, H: DeserializeOwned>(
    bytes: &'a [u8],
    magic: &[u8; 4],
    version: u32,
) -> Result<(H, &'a [u8]), ContainerError> {
    if bytes.len() < 12 {
        return Err(ContainerError::Truncated {
            expected: 12,
            actual: bytes.len(),
        });
    }
    if &bytes[..4] != magic {
        return Err(ContainerError::BadMagic {
            expected: String::from_utf8_lossy(magic).into_owned(),
            found: String::from_utf8_lossy(&bytes[..4]).into_owned(),
        });
    }
    let found = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if found != version {
        return Err(ContainerError::Version {
            expected: version,
            found,
        });
    }
    let len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let end = 12 + len;
    if bytes.len() < end {
        return Err(ContainerError::Truncated {
            expected: end,
            actual: bytes.len(),
        });
    }
    let header = serde_json::from_slice(&bytes[12..end])?;
    Ok((header, &bytes[end..]))
}

/// Little-endian cursor over a payload.
pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn take(&mut self, n: usize) -> &'a [u8] {
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        s
    }

    pub fn f32(&mut self) -> f32 {
        f32::from_le_bytes(self.take(4).try_into().unwrap())
    }

    pub fn f64(&mut self) -> f64 {
        f64::from_le_bytes(self.take(8).try_into().unwrap())
    }

    pub fn u8(&mut self) -> u8 {
        self.take(1)[0]
    }
}
