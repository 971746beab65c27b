//! Append-only files of newline-terminated JSON records.
//!
//! Appends are written in one `write_all` and synced before returning, so a
//! crash can leave at most one torn line at the end of the file. Replay drops
//! such a trailing line; any unparsable line before the end is corruption.

use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("corrupt record in {path} at byte offset {offset}: {reason}")]
    Corrupt {
        path: PathBuf,
        offset: u64,
        reason: String,
    },
}

impl LogError {
    fn io(path: &Path, source: io::Error) -> Self {
        LogError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug)]
pub struct Replayed<T> {
    pub records: Vec<T>,
    /// Byte length of the intact prefix.
    pub valid_len: u64,
    /// Whether a torn trailing line was skipped.
    pub torn_tail: bool,
}

/// Reads every record of `path`. With `tolerate_torn_tail`, an incomplete or
/// unparsable final line is skipped instead of reported.
pub fn replay<T: DeserializeOwned>(
    path: &Path,
    tolerate_torn_tail: bool,
) -> Result<Replayed<T>, LogError> {
    let data = std::fs::read(path).map_err(|e| LogError::io(path, e))?;
    let mut records = Vec::new();
    let mut offset = 0usize;
    while offset < data.len() {
        let rest = &data[offset..];
        let (line, terminated) = match rest.iter().position(|&b| b == b'\n') {
            Some(i) => (&rest[..i], true),
            None => (rest, false),
        };
        let next = offset + line.len() + usize::from(terminated);
        let is_last = next >= data.len();
        let parsed = if terminated {
            serde_json::from_slice::<T>(line).map_err(|e| e.to_string())
        } else {
            Err("missing newline terminator".to_string())
        };
        match parsed {
            Ok(r) => records.push(r),
            Err(_) if is_last && tolerate_torn_tail => {
                return Ok(Replayed {
                    records,
                    valid_len: offset as u64,
                    torn_tail: true,
                });
            }
            Err(reason) => {
                return Err(LogError::Corrupt {
                    path: path.to_path_buf(),
                    offset: offset as u64,
                    reason,
                });
            }
        }
        offset = next;
    }
    Ok(Replayed {
        records,
        valid_len: data.len() as u64,
        torn_tail: false,
    })
}

/// Writer half of a line log.
#[derive(Debug)]
pub struct LineLog {
    path: PathBuf,
    file: File,
    len: u64,
}

impl LineLog {
    /// Opens `path` for appending, first truncating it to `valid_len` bytes
    /// (the intact prefix found by [`replay`]).
    pub fn open(path: &Path, valid_len: u64) -> Result<Self, LogError> {
        let file = OpenOptions::new()
            .create(true)
            .read(true)
            .write(true)
            .truncate(false)
            .open(path)
            .map_err(|e| LogError::io(path, e))?;
        let current = file.metadata().map_err(|e| LogError::io(path, e))?.len();
        if current != valid_len {
            file.set_len(valid_len).map_err(|e| LogError::io(path, e))?;
            file.sync_all().map_err(|e| LogError::io(path, e))?;
        }
        let mut log = LineLog {
            path: path.to_path_buf(),
            file,
            len: valid_len,
        };
        log.seek_end()?;
        Ok(log)
    }

    fn seek_end(&mut self) -> Result<(), LogError> {
        use std::io::Seek;
        self.file
            .seek(io::SeekFrom::Start(self.len))
            .map_err(|e| LogError::io(&self.path, e))?;
        Ok(())
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Serializes `records` as one buffer, appends it and syncs.
    pub fn append<T: Serialize>(&mut self, records: &[T]) -> Result<u64, LogError> {
        let mut buf = Vec::with_capacity(records.len() * 96);
        for r in records {
            serde_json::to_writer(&mut buf, r).map_err(|e| LogError::io(&self.path, e.into()))?;
            buf.push(b'\n');
        }
        self.append_raw(&buf)?;
        Ok(buf.len() as u64)
    }

    /// Appends pre-encoded, newline-terminated lines and syncs.
    pub fn append_raw(&mut self, buf: &[u8]) -> Result<(), LogError> {
        if let Err(e) = self.file.write_all(buf).and_then(|_| self.file.sync_data()) {
            // drop whatever made it to disk so the file stays line-aligned
            let _ = self.file.set_len(self.len);
            let _ = self.seek_end();
            return Err(LogError::io(&self.path, e));
        }
        self.len += buf.len() as u64;
        Ok(())
    }
}
