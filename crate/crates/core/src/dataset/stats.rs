//! Orientation and instance-resolution histograms.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::NUM_BINS;

use super::records::DatasetManifest;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    /// Record count per orientation bin.
    pub orientation: Vec<usize>,
    /// Width of one resolution bucket in pixels.
    pub resolution_bin_width: f64,
    /// Record count per `sqrt(w * h)` bucket; bucket `i` covers `[i * width, (i + 1) * width)`.
    pub resolution: Vec<usize>,
}

impl DatasetStats {
    pub fn total(&self) -> usize {
        self.orientation.iter().sum()
    }

    /// `bin,count`, one row per orientation bin.
    pub fn orientation_csv(&self) -> String {
        let mut out = String::from("bin,count\n");
        for (b, c) in self.orientation.iter().enumerate() {
            writeln!(out, "{b},{c}").unwrap();
        }
        out
    }

    /// `resolution,count`, keyed by the lower edge of each bucket.
    pub fn resolution_csv(&self) -> String {
        let mut out = String::from("resolution,count\n");
        for (i, c) in self.resolution.iter().enumerate() {
            writeln!(out, "{},{c}", i as f64 * self.resolution_bin_width).unwrap();
        }
        out
    }
}

pub fn stats(manifest: &DatasetManifest, resolution_bin_width: f64) -> Result<DatasetStats> {
    if !(resolution_bin_width > 0.0 && resolution_bin_width.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "resolution bin width must be positive, got {resolution_bin_width}"
        )));
    }
    let mut orientation = vec![0; NUM_BINS];
    let mut resolution: Vec<usize> = Vec::new();
    for r in manifest.records() {
        orientation[r.orientation.bin()] += 1;
        let bucket = (r.bbox.resolution() / resolution_bin_width).floor() as usize;
        if resolution.len() <= bucket {
            resolution.resize(bucket + 1, 0);
        }
        resolution[bucket] += 1;
    }
    Ok(DatasetStats {
        orientation,
        resolution_bin_width,
        resolution,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::records::{BBox, LabelRecord, LabelSource};
    use crate::geometry::OrientationLabel;
    use chrono::DateTime;

    fn record(id: &str, theta: f64, w: f64, h: f64) -> LabelRecord {
        LabelRecord {
            image_ref: id.into(),
            instance_id: "0".into(),
            bbox: BBox::new(0.0, 0.0, w, h).unwrap(),
            orientation: OrientationLabel::from_degrees(theta).unwrap(),
            labeler_id: "t".into(),
            timestamp: DateTime::from_timestamp(0, 0).unwrap(),
            source: LabelSource::Human,
            split: None,
            extra: Default::default(),
        }
    }

    #[test]
    fn single_record() {
        let m = DatasetManifest::new(vec![record("a", 180.0, 100.0, 49.0)]).unwrap();
        let s = stats(&m, 1.0).unwrap();
        assert_eq!(s.orientation[36], 1);
        assert_eq!(s.resolution[70], 1);
        assert_eq!(s.resolution.iter().sum::<usize>(), 1);
        assert!(s.resolution_csv().lines().any(|l| l == "70,1"));
    }

    #[test]
    fn empty_manifest() {
        let s = stats(&DatasetManifest::default(), 10.0).unwrap();
        assert_eq!(s.total(), 0);
        assert!(s.orientation.iter().all(|&c| c == 0));
        assert!(s.resolution.is_empty());
        assert_eq!(s.orientation_csv().lines().count(), NUM_BINS + 1);
    }

    #[test]
    fn counts_sum_to_records() {
        let m = DatasetManifest::new(
            (0..50)
                .map(|i| record(&format!("i{i}"), i as f64 * 7.1, 10.0 + i as f64, 20.0))
                .collect(),
        )
        .unwrap();
        let s = stats(&m, 10.0).unwrap();
        assert_eq!(s.total(), 50);
        assert_eq!(s.resolution.iter().sum::<usize>(), 50);
        assert!(stats(&m, 0.0).is_err());
    }
}
