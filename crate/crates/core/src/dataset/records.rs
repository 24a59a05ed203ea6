//! Orientation label records and the line-oriented JSON manifest format.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{bin_of, OrientationLabel};

/// Axis-aligned box in pixels: `x` is the left column, `y` the top row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        if !(w > 0.0 && h > 0.0) || ![x, y, w, h].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "bbox needs finite values and positive size, got [{x}, {y}, {w}, {h}]"
            )));
        }
        Ok(Self { x, y, w, h })
    }

    /// `sqrt(w * h)`, the instance resolution.
    pub fn resolution(&self) -> f64 {
        (self.w * self.h).sqrt()
    }

    /// Centre as `(column, row)`.
    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }
}

impl TryFrom<[f64; 4]> for BBox {
    type Error = Error;

    fn try_from(v: [f64; 4]) -> Result<Self> {
        BBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x, b.y, b.w, b.h]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelSource {
    Human,
    Converted,
    Synthetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// One annotated human instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRecord", into = "RawRecord")]
pub struct LabelRecord {
    pub image_ref: String,
    pub instance_id: String,
    pub bbox: BBox,
    pub orientation: OrientationLabel,
    pub labeler_id: String,
    pub timestamp: DateTime<Utc>,
    pub source: LabelSource,
    pub split: Option<Split>,
    /// Fields this crate does not interpret, kept for round-tripping.
    pub extra: BTreeMap<String, Value>,
}

#[derive(Serialize, Deserialize)]
struct RawRecord {
    image_ref: String,
    instance_id: String,
    bbox: BBox,
    theta_deg: f64,
    bin: usize,
    labeler_id: String,
    timestamp: DateTime<Utc>,
    source: LabelSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    split: Option<Split>,
    #[serde(flatten)]
    extra: BTreeMap<String, Value>,
}

impl TryFrom<RawRecord> for LabelRecord {
    type Error = Error;

    fn try_from(r: RawRecord) -> Result<Self> {
        if !(0.0..360.0).contains(&r.theta_deg) {
            return Err(Error::InvalidArgument(format!(
                "theta_deg {} outside [0, 360)",
                r.theta_deg
            )));
        }
        let orientation = OrientationLabel::from_degrees(r.theta_deg)?;
        if orientation.bin() != r.bin {
            return Err(Error::InvalidArgument(format!(
                "bin {} does not match theta_deg {} (expected {})",
                r.bin,
                r.theta_deg,
                bin_of(r.theta_deg)
            )));
        }
        Ok(Self {
            image_ref: r.image_ref,
            instance_id: r.instance_id,
            bbox: r.bbox,
            orientation,
            labeler_id: r.labeler_id,
            timestamp: r.timestamp,
            source: r.source,
            split: r.split,
            extra: r.extra,
        })
    }
}

impl From<LabelRecord> for RawRecord {
    fn from(r: LabelRecord) -> Self {
        Self {
            image_ref: r.image_ref,
            instance_id: r.instance_id,
            bbox: r.bbox,
            theta_deg: r.orientation.theta_deg(),
            bin: r.orientation.bin(),
            labeler_id: r.labeler_id,
            timestamp: r.timestamp,
            source: r.source,
            split: r.split,
            extra: r.extra,
        }
    }
}

impl LabelRecord {
    pub fn key(&self) -> (&str, &str) {
        (&self.image_ref, &self.instance_id)
    }
}

/// A collection of label records with image-level split assignment.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetManifest {
    records: Vec<LabelRecord>,
}

impl DatasetManifest {
    /// Validates uniqueness of `(image_ref, instance_id)` and image-level split consistency.
    pub fn new(records: Vec<LabelRecord>) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut splits: HashMap<&str, Option<Split>> = HashMap::new();
        for (i, r) in records.iter().enumerate() {
            if !seen.insert(r.key()) {
                return Err(Error::DuplicateInstance {
                    image_ref: r.image_ref.clone(),
                    instance_id: r.instance_id.clone(),
                    line: i + 1,
                });
            }
            if let Some(prev) = splits.insert(&r.image_ref, r.split) {
                if prev != r.split {
                    return Err(Error::InvalidArgument(format!(
                        "image `{}` has instances in different splits",
                        r.image_ref
                    )));
                }
            }
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[LabelRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<LabelRecord> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Number of distinct images.
    pub fn num_images(&self) -> usize {
        self.records
            .iter()
            .map(|r| r.image_ref.as_str())
            .collect::<HashSet<_>>()
            .len()
    }

    /// Assigns every image to a split; all instances of one image share it.
    ///
    /// The assignment is a deterministic function of `(image_ref, seed)`.
    pub fn assign_splits(&mut self, test_fraction: f64, seed: u64) -> Result<()> {
        if !(0.0..=1.0).contains(&test_fraction) {
            return Err(Error::InvalidArgument(format!(
                "test fraction must be in [0, 1], got {test_fraction}"
            )));
        }
        for r in &mut self.records {
            r.split = Some(split_for_image(&r.image_ref, test_fraction, seed));
        }
        Ok(())
    }

    /// Records in `split`; records without a split are treated as training data.
    pub fn split(&self, split: Split) -> Vec<&LabelRecord> {
        self.records
            .iter()
            .filter(|r| r.split.unwrap_or(Split::Train) == split)
            .collect()
    }
}

/// Deterministic image-level split from a hash of the image reference.
pub fn split_for_image(image_ref: &str, test_fraction: f64, seed: u64) -> Split {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(image_ref.as_bytes());
    let digest = hasher.finalize();
    let v = u64::from_le_bytes(digest[..8].try_into().unwrap());
    let u = (v >> 11) as f64 / (1u64 << 53) as f64;
    if u < test_fraction {
        Split::Test
    } else {
        Split::Train
    }
}

/// Parses a JSONL manifest from any reader; `origin` is used in error messages.
pub fn parse_labels<R: BufRead>(reader: R, origin: &Path) -> Result<DatasetManifest> {
    let mut records = Vec::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: LabelRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        if !seen.insert((rec.image_ref.clone(), rec.instance_id.clone())) {
            return Err(Error::DuplicateInstance {
                image_ref: rec.image_ref,
                instance_id: rec.instance_id,
                line: i + 1,
            });
        }
        records.push(rec);
    }
    DatasetManifest::new(records)
}

pub fn read_labels(path: &Path) -> Result<DatasetManifest> {
    let file = File::open(path)?;
    parse_labels(BufReader::new(file), path)
}

pub fn write_labels(path: &Path, manifest: &DatasetManifest) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in manifest.records() {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}
