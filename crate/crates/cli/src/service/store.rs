//! Append-only label store.
//!
//! Every accepted label is appended as one JSON line and flushed before the request returns.
//! A resubmission by the same labeler for the same instance is appended too; on replay the
//! newest line wins, so the log itself never needs rewriting.

use std::cmp::Reverse;
use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use bodyorient_core::dataset::LabelRecord;

/// `(image_ref, instance_id, labeler_id)`.
type StoreKey = (String, String, String);

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("label store {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("label store {path}:{line}: corrupt record before the end of the log: {message}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoredLabel {
    pub record: LabelRecord,
    /// Position of the line in the log; larger is newer.
    pub seq: u64,
}

/// What [`LabelStore::open`] found on disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Recovery {
    pub lines_read: usize,
    /// Bytes cut from the end of the file because the last line was torn.
    pub truncated_bytes: u64,
}

#[derive(Debug)]
pub struct LabelStore {
    path: PathBuf,
    writer: BufWriter<File>,
    latest: HashMap<StoreKey, StoredLabel>,
    next_seq: u64,
}

fn key(r: &LabelRecord) -> StoreKey {
    (r.image_ref.clone(), r.instance_id.clone(), r.labeler_id.clone())
}

impl LabelStore {
    /// Opens or creates the log, replaying it and cutting off a torn final line.
    ///
    /// A bad line followed by good ones is not a crash artefact, so that is an error rather
    /// than something to repair.
    pub fn open(path: &Path) -> Result<(Self, Recovery), StoreError> {
        let io_err = |source| StoreError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut bytes = Vec::new();
        match File::open(path) {
            Ok(mut f) => {
                f.read_to_end(&mut bytes).map_err(io_err)?;
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => {}
            Err(e) => return Err(io_err(e)),
        }

        let mut latest = HashMap::new();
        let mut seq = 0;
        let mut good_len = 0usize;
        let mut pending_error: Option<(usize, String)> = None;
        let mut offset = 0usize;
        for (i, chunk) in bytes.split_inclusive(|&b| b == b'\n').enumerate() {
            offset += chunk.len();
            let complete = chunk.ends_with(b"\n");
            let text = String::from_utf8_lossy(chunk);
            if text.trim().is_empty() {
                if complete && pending_error.is_none() {
                    good_len = offset;
                }
                continue;
            }
            if let Some((line, message)) = pending_error.take() {
                return Err(StoreError::Corrupt {
                    path: path.to_path_buf(),
                    line,
                    message,
                });
            }
            match serde_json::from_str::<LabelRecord>(&text) {
                Ok(record) if complete => {
                    latest.insert(key(&record), StoredLabel { record, seq });
                    seq += 1;
                    good_len = offset;
                }
                // A parseable line without its newline is still a torn write.
                Ok(_) => pending_error = Some((i + 1, "missing newline".into())),
                Err(e) => pending_error = Some((i + 1, e.to_string())),
            }
        }

        let truncated = (bytes.len() - good_len) as u64;
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(io_err)?;
        if truncated > 0 {
            file.set_len(good_len as u64).map_err(io_err)?;
            file.sync_all().map_err(io_err)?;
        }
        let recovery = Recovery {
            lines_read: seq as usize,
            truncated_bytes: truncated,
        };
        Ok((
            Self {
                path: path.to_path_buf(),
                writer: BufWriter::new(file),
                latest,
                next_seq: seq,
            },
            recovery,
        ))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Appends and flushes one record, replacing any earlier one with the same key.
    pub fn append(&mut self, record: LabelRecord) -> Result<(), StoreError> {
        let io_err = |source| StoreError::Io {
            path: self.path.clone(),
            source,
        };
        let mut line = serde_json::to_vec(&record).map_err(|e| io_err(e.into()))?;
        line.push(b'\n');
        self.writer.write_all(&line).map_err(io_err)?;
        self.writer.flush().map_err(io_err)?;
        self.writer.get_ref().sync_data().map_err(io_err)?;
        let seq = self.next_seq;
        self.next_seq += 1;
        self.latest.insert(key(&record), StoredLabel { record, seq });
        Ok(())
    }

    /// Number of live `(instance, labeler)` records.
    pub fn len(&self) -> usize {
        self.latest.len()
    }

    pub fn is_empty(&self) -> bool {
        self.latest.is_empty()
    }

    /// Live records, oldest first.
    pub fn records(&self) -> Vec<&StoredLabel> {
        let mut v: Vec<&StoredLabel> = self.latest.values().collect();
        v.sort_by_key(|s| s.seq);
        v
    }

    /// Whether any labeler has labelled this instance.
    pub fn is_labelled(&self, image_ref: &str, instance_id: &str) -> bool {
        self.latest
            .keys()
            .any(|(img, inst, _)| img == image_ref && inst == instance_id)
    }

    /// Up to `n` records in `bin`, newest first.
    pub fn newest_in_bin(&self, bin: usize, n: usize) -> Vec<&StoredLabel> {
        let mut v: Vec<&StoredLabel> = self
            .latest
            .values()
            .filter(|s| s.record.orientation.bin() == bin)
            .collect();
        v.sort_by_key(|s| Reverse((s.record.timestamp, s.seq)));
        v.truncate(n);
        v
    }
}
