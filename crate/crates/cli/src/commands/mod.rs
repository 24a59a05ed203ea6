mod data;
mod hboe;
mod lifter;
mod report;
mod serve;

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use bodyorient_core::dataset::synth::KEYPOINTS_FILE;
use bodyorient_core::dataset::{
    index_keypoints, read_keypoints, read_labels, DatasetManifest, KeypointIndex, LabelRecord, Split,
};
use serde::{Deserialize, Serialize};

use crate::args::{Command, SplitArg};
use crate::Invalid;

pub fn execute(command: &Command) -> Result<()> {
    let common = command.common();
    fs::create_dir_all(&common.out_dir)
        .with_context(|| format!("creating output directory {}", common.out_dir.display()))?;
    let echo = serde_json::json!({ "command": command.name(), "args": command });
    write_json(&out_file(command, "config.json"), &echo)?;
    match command {
        Command::Synth(a) => data::synth(a),
        Command::Convert(a) => data::convert(a),
        Command::Stats(a) => data::stats(a),
        Command::TrainHboe(a) => hboe::train(a),
        Command::EvalHboe(a) => hboe::eval(a),
        Command::TrainLifter(a) => lifter::train(a),
        Command::EvalPose(a) => lifter::eval(a),
        Command::Report(a) => report::report(a),
        Command::Serve(a) => serve::serve(a),
    }
}

/// `<out-dir>/<command>-seed<N>.<suffix>`.
pub(crate) fn out_file(command: &Command, suffix: &str) -> PathBuf {
    let common = command.common();
    common
        .out_dir
        .join(format!("{}-seed{}.{suffix}", command.name(), common.seed))
}

pub(crate) fn named_out(common: &crate::args::Common, name: &str, suffix: &str) -> PathBuf {
    common.out_dir.join(format!("{name}-seed{}.{suffix}", common.seed))
}

pub(crate) fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Fails with [`Invalid`] when an input file does not exist.
pub(crate) fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Invalid(format!("input file {} does not exist", path.display())).into())
    }
}

pub(crate) fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    require_file(path)?;
    read_labels(path).with_context(|| format!("reading labels {}", path.display()))
}

/// Keypoints for `manifest`, from `explicit` or `keypoints2d.jsonl` in the same directory.
pub(crate) fn load_keypoints(manifest: &Path, explicit: Option<&Path>) -> Result<KeypointIndex> {
    let path = match explicit {
        Some(p) => p.to_path_buf(),
        None => manifest.parent().unwrap_or(Path::new(".")).join(KEYPOINTS_FILE),
    };
    require_file(&path)?;
    let records = read_keypoints(&path).with_context(|| format!("reading keypoints {}", path.display()))?;
    Ok(index_keypoints(records)?)
}

pub(crate) fn select(manifest: &DatasetManifest, split: SplitArg) -> Vec<&LabelRecord> {
    match split {
        SplitArg::Train => manifest.split(Split::Train),
        SplitArg::Test => manifest.split(Split::Test),
        SplitArg::All => manifest.records().iter().collect(),
    }
}

/// One orientation prediction. Label files have the same three fields, so they can be read
/// as predictions too.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub image_ref: String,
    pub instance_id: String,
    pub theta_deg: f64,
}

pub(crate) fn read_predictions(path: &Path) -> Result<HashMap<(String, String), f64>> {
    require_file(path)?;
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let p: Prediction =
            serde_json::from_str(&line).map_err(|e| Invalid(format!("{}:{}: {e}", path.display(), i + 1)))?;
        if !p.theta_deg.is_finite() {
            return Err(Invalid(format!("{}:{}: non-finite theta_deg", path.display(), i + 1)).into());
        }
        out.insert((p.image_ref, p.instance_id), p.theta_deg);
    }
    Ok(out)
}

/// Predicted and ground-truth angles for every record, in record order.
pub(crate) fn pair_predictions(
    records: &[&LabelRecord],
    predictions: &HashMap<(String, String), f64>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut preds = Vec::with_capacity(records.len());
    let mut gts = Vec::with_capacity(records.len());
    for r in records {
        let p = predictions
            .get(&(r.image_ref.clone(), r.instance_id.clone()))
            .ok_or_else(|| {
                Invalid(format!(
                    "no prediction for instance ({}, {})",
                    r.image_ref, r.instance_id
                ))
            })?;
        preds.push(*p);
        gts.push(r.orientation.theta_deg());
    }
    Ok((preds, gts))
}

pub(crate) fn nonempty<'a>(records: Vec<&'a LabelRecord>, what: &str) -> Result<Vec<&'a LabelRecord>> {
    if records.is_empty() {
        Err(Invalid(format!("no records in the {what} selection")).into())
    } else {
        Ok(records)
    }
}
