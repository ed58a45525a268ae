//! Telemetry log files: a flat sequence of records, each an 8-byte
//! big-endian microsecond timestamp followed by one raw encoded frame.

use std::io::{self, Read, Write};
use std::path::Path;

use super::frame::{FRAME_OVERHEAD, STX};
use super::ProtoError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TlogRecord {
    pub timestamp_us: u64,
    pub frame: Vec<u8>,
}

/// Streaming writer enforcing non-decreasing timestamps.
pub struct TlogWriter<W: Write> {
    inner: W,
    last_us: Option<u64>,
    records: u64,
}

impl<W: Write> TlogWriter<W> {
    pub fn new(inner: W) -> Self {
        Self {
            inner,
            last_us: None,
            records: 0,
        }
    }

    pub fn write(&mut self, timestamp_us: u64, frame: &[u8]) -> Result<(), ProtoError> {
        if let Some(last) = self.last_us {
            if timestamp_us < last {
                return Err(ProtoError::Malformed(format!(
                    "tlog timestamp {timestamp_us} precedes {last}"
                )));
            }
        }
        if frame.len() < FRAME_OVERHEAD || frame[0] != STX {
            return Err(ProtoError::Malformed("not an encoded frame".into()));
        }
        self.inner.write_all(&timestamp_us.to_be_bytes())?;
        self.inner.write_all(frame)?;
        self.last_us = Some(timestamp_us);
        self.records += 1;
        Ok(())
    }

    pub fn records(&self) -> u64 {
        self.records
    }

    pub fn into_inner(self) -> W {
        self.inner
    }
}

pub fn tlog_write(records: &[TlogRecord]) -> Result<Vec<u8>, ProtoError> {
    let mut w = TlogWriter::new(Vec::new());
    for r in records {
        w.write(r.timestamp_us, &r.frame)?;
    }
    Ok(w.into_inner())
}

/// Parses a log image. A truncated trailing record is dropped silently.
pub fn tlog_read(bytes: &[u8]) -> Result<Vec<TlogRecord>, ProtoError> {
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        let rest = &bytes[pos..];
        if rest.len() < 8 + 2 {
            break;
        }
        let timestamp_us = u64::from_be_bytes(rest[..8].try_into().unwrap());
        if rest[8] != STX {
            return Err(ProtoError::Malformed(format!(
                "record at offset {pos} does not start a frame"
            )));
        }
        let len = usize::from(rest[9]) + FRAME_OVERHEAD;
        if rest.len() < 8 + len {
            break;
        }
        out.push(TlogRecord {
            timestamp_us,
            frame: rest[8..8 + len].to_vec(),
        });
        pos += 8 + len;
    }
    Ok(out)
}

pub fn tlog_read_from(mut reader: impl Read) -> Result<Vec<TlogRecord>, ProtoError> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    tlog_read(&bytes)
}

pub fn tlog_read_file(path: impl AsRef<Path>) -> Result<Vec<TlogRecord>, ProtoError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| ProtoError::Io(format!("{}: {e}", path.display())))?;
    tlog_read_from(io::BufReader::new(file))
}
