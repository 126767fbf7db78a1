//! On-disk stores for the closed loop: an append-only traffic store of
//! unlabeled per-flow records, an append-only labeled store pairing records
//! with measured delays, and a versioned weights archive.
//!
//! Record stores are line-delimited JSON. Line 1 is a header pinning the
//! schema name, schema version, and units (delays in seconds, rates in bits
//! per second); every following line is one record. Corrupt lines are
//! skipped and reported by scans rather than silently dropped or turned into
//! hard failures, so one bad write cannot take the database down with it.
//!
//! The weights archive is a directory of binary weight files plus a JSONL
//! index carrying a content digest per entry. Loads verify the digest and
//! fail hard on mismatch; appends must extend the version sequence by
//! exactly one, which keeps the archive gap-free. Raw packet data, IP
//! addresses, and per-packet timestamps are never stored; records carry
//! only per-flow aggregates.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::marker::PhantomData;
use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FlowFeatures, LabeledRecord};
use crate::vtwin::{weights_from_bytes, weights_to_bytes, ModelWeights, WeightsIoError};

pub const TRAFFIC_SCHEMA: &str = "traffic";
pub const LABELED_SCHEMA: &str = "labeled";
const WEIGHTS_INDEX_SCHEMA: &str = "weights-index";
const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("store file has no header line")]
    MissingHeader,

    #[error("header does not parse: {0}")]
    BadHeader(String),

    #[error("schema mismatch: file carries {got:?}, expected {want:?}")]
    SchemaMismatch { got: String, want: String },

    #[error("unsupported schema version {0}")]
    UnsupportedSchemaVersion(u32),

    #[error("record does not serialize: {0}")]
    Serialize(#[from] serde_json::Error),

    #[error("weights index line {line_no} is corrupt: {reason}")]
    CorruptIndex { line_no: usize, reason: String },

    #[error("version {0} is not in the weights archive")]
    UnknownVersion(u64),

    #[error("weights version {got} does not extend the archive (last is {last})")]
    NonContiguousVersion { got: u64, last: u64 },

    #[error("weights file for version {version} fails its digest check")]
    DigestMismatch { version: u64 },

    #[error("archived payload carries version {got}, index says {want}")]
    PayloadVersionSkew { got: u64, want: u64 },

    #[error(transparent)]
    Weights(#[from] WeightsIoError),
}

/// FNV-1a, 64 bit. Plenty for catching torn writes and bit rot in local
/// files; this is an integrity check, not a security boundary.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

// ---------------------------------------------------------------------------
// Line-delimited record stores
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    schema: String,
    schema_version: u32,
    delay_unit: String,
    rate_unit: String,
}

impl Header {
    fn new(schema: &str) -> Self {
        Header {
            schema: schema.to_string(),
            schema_version: SCHEMA_VERSION,
            delay_unit: "s".to_string(),
            rate_unit: "bps".to_string(),
        }
    }
}

/// Unlabeled per-flow record: identity, route, and the features that are
/// available without waiting for per-packet delivery accounting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficRecord {
    pub flow_id: u64,
    pub src: usize,
    pub dst: usize,
    pub start_s: f64,
    /// Link ids of the route, in path order.
    pub path: Vec<usize>,
    pub flow: FlowFeatures,
}

impl From<&LabeledRecord> for TrafficRecord {
    fn from(r: &LabeledRecord) -> Self {
        TrafficRecord {
            flow_id: r.flow_id,
            src: r.src,
            dst: r.dst,
            start_s: r.start_s,
            path: r.links.iter().map(|l| l.link_id).collect(),
            flow: r.flow,
        }
    }
}

/// A line the scan could not turn into a record.
#[derive(Debug, Clone, PartialEq)]
pub struct SkippedLine {
    /// One-based line number in the file; the header is line 1.
    pub line_no: usize,
    pub reason: String,
}

#[derive(Debug)]
pub struct ScanResult<T> {
    /// Parsed records in insertion order.
    pub records: Vec<T>,
    pub skipped: Vec<SkippedLine>,
}

/// Append-only JSONL store of one record type.
#[derive(Debug, Clone)]
pub struct LineStore<T> {
    path: PathBuf,
    schema: &'static str,
    _marker: PhantomData<fn() -> T>,
}

impl<T: Serialize + DeserializeOwned> LineStore<T> {
    /// Create the file with a fresh header, truncating anything present.
    pub fn create(path: impl AsRef<Path>, schema: &'static str) -> Result<Self, StoreError> {
        let path = path.as_ref().to_path_buf();
        let mut line = serde_json::to_string(&Header::new(schema))?;
        line.push('\n');
        fs::write(&path, line)?;
        Ok(LineStore { path, schema, _marker: PhantomData })
    }

    /// Open an existing store and validate its header.
    pub fn open(path: impl AsRef<Path>, schema: &'static str) -> Result<Self, StoreError> {
        let path = path.as_ref().to_path_buf();
        let text = fs::read_to_string(&path)?;
        let first = text.lines().next().ok_or(StoreError::MissingHeader)?;
        let header: Header = serde_json::from_str(first)
            .map_err(|e| StoreError::BadHeader(e.to_string()))?;
        if header.schema != schema {
            return Err(StoreError::SchemaMismatch { got: header.schema, want: schema.to_string() });
        }
        if header.schema_version != SCHEMA_VERSION {
            return Err(StoreError::UnsupportedSchemaVersion(header.schema_version));
        }
        Ok(LineStore { path, schema, _marker: PhantomData })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn schema(&self) -> &'static str {
        self.schema
    }

    pub fn append(&self, record: &T) -> Result<(), StoreError> {
        let mut line = serde_json::to_string(record)?;
        line.push('\n');
        let mut f = OpenOptions::new().append(true).open(&self.path)?;
        f.write_all(line.as_bytes())?;
        Ok(())
    }

    pub fn append_all<'a>(&self, records: impl IntoIterator<Item = &'a T>) -> Result<(), StoreError>
    where
        T: 'a,
    {
        let mut buf = String::new();
        for r in records {
            buf.push_str(&serde_json::to_string(r)?);
            buf.push('\n');
        }
        let mut f = OpenOptions::new().append(true).open(&self.path)?;
        f.write_all(buf.as_bytes())?;
        Ok(())
    }

    /// All parseable records, in insertion order, plus a report of the lines
    /// that were skipped.
    pub fn scan(&self) -> Result<ScanResult<T>, StoreError> {
        self.scan_range(0..usize::MAX)
    }

    /// Records whose zero-based position among the parsed records falls in
    /// `range`.
    pub fn scan_range(&self, range: Range<usize>) -> Result<ScanResult<T>, StoreError> {
        let text = fs::read_to_string(&self.path)?;
        let mut lines = text.lines().enumerate();
        let Some((_, first)) = lines.next() else {
            return Err(StoreError::MissingHeader);
        };
        serde_json::from_str::<Header>(first)
            .map_err(|e| StoreError::BadHeader(e.to_string()))?;

        let mut records = Vec::new();
        let mut skipped = Vec::new();
        let mut ordinal = 0usize;
        for (i, line) in lines {
            if line.is_empty() {
                continue;
            }
            match serde_json::from_str::<T>(line) {
                Ok(r) => {
                    if range.contains(&ordinal) {
                        records.push(r);
                    }
                    ordinal += 1;
                }
                Err(e) => skipped.push(SkippedLine { line_no: i + 1, reason: e.to_string() }),
            }
        }
        Ok(ScanResult { records, skipped })
    }
}

// ---------------------------------------------------------------------------
// Weights archive
// ---------------------------------------------------------------------------

/// Index row for one archived set of weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsEntry {
    pub version: u64,
    /// Scenario clock at archive time, seconds. Never wall clock, so a rerun
    /// reproduces the archive byte for byte.
    pub timestamp_s: f64,
    /// Payload file name, relative to the archive directory.
    pub file: String,
    /// FNV-1a 64 digest of the payload, hex.
    pub digest: String,
}

/// Directory of versioned weight files with a JSONL index.
#[derive(Debug)]
pub struct WeightsStore {
    dir: PathBuf,
    index: LineStore<WeightsEntry>,
}

impl WeightsStore {
    pub fn create(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        let index = LineStore::create(dir.join("index.jsonl"), WEIGHTS_INDEX_SCHEMA)?;
        Ok(WeightsStore { dir, index })
    }

    pub fn open(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        let dir = dir.as_ref().to_path_buf();
        let index = LineStore::open(dir.join("index.jsonl"), WEIGHTS_INDEX_SCHEMA)?;
        Ok(WeightsStore { dir, index })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// The index, rejecting any corruption: records of what served in
    /// production are not something to skip over quietly.
    fn entries(&self) -> Result<Vec<WeightsEntry>, StoreError> {
        let scan = self.index.scan()?;
        if let Some(bad) = scan.skipped.first() {
            return Err(StoreError::CorruptIndex {
                line_no: bad.line_no,
                reason: bad.reason.clone(),
            });
        }
        Ok(scan.records)
    }

    pub fn versions(&self) -> Result<Vec<u64>, StoreError> {
        Ok(self.entries()?.iter().map(|e| e.version).collect())
    }

    pub fn latest(&self) -> Result<Option<u64>, StoreError> {
        Ok(self.entries()?.last().map(|e| e.version))
    }

    /// Archive one set of weights. The version must extend the existing
    /// sequence by exactly one (any version may start it), which makes the
    /// archive gap-free by construction. The payload is written before the
    /// index row, so a crash in between leaves an orphan file, never a
    /// dangling index entry.
    pub fn save(&self, w: &ModelWeights, timestamp_s: f64) -> Result<WeightsEntry, StoreError> {
        if let Some(last) = self.latest()? {
            if w.version != last + 1 {
                return Err(StoreError::NonContiguousVersion { got: w.version, last });
            }
        }
        let bytes = weights_to_bytes(w);
        let entry = WeightsEntry {
            version: w.version,
            timestamp_s,
            file: format!("weights_v{}.bin", w.version),
            digest: format!("{:016x}", fnv1a64(&bytes)),
        };
        fs::write(self.dir.join(&entry.file), &bytes)?;
        self.index.append(&entry)?;
        Ok(entry)
    }

    /// Load one archived version, verifying the content digest and the
    /// payload's own version stamp. Any corruption is a hard error here.
    pub fn load(&self, version: u64) -> Result<ModelWeights, StoreError> {
        let entries = self.entries()?;
        let entry = entries
            .iter()
            .find(|e| e.version == version)
            .ok_or(StoreError::UnknownVersion(version))?;
        let bytes = fs::read(self.dir.join(&entry.file))?;
        if format!("{:016x}", fnv1a64(&bytes)) != entry.digest {
            return Err(StoreError::DigestMismatch { version });
        }
        let w = weights_from_bytes(&bytes)?;
        if w.version != version {
            return Err(StoreError::PayloadVersionSkew { got: w.version, want: version });
        }
        Ok(w)
    }
}
