use std::collections::BTreeMap;

use anyhow::{Context, Result};
use bodyorient_core::dataset::synth::LABELS_FILE;
use bodyorient_core::dataset::{
    generate_synthetic, index_keypoints, read_keypoints, read_poses, stats as dataset_stats, write_jsonl, write_labels,
    DatasetManifest, Keypoints2D, LabelRecord, LabelSource, SyntheticSpec,
};
use bodyorient_core::geometry::{convert_pose_dataset, PoseConversion};
use chrono::DateTime;
use serde::Serialize;
use serde_json::Value;

use super::{load_manifest, named_out, require_file, write_text};
use crate::args::{ConvertArgs, StatsArgs, SynthArgs};

pub fn synth(a: &SynthArgs) -> Result<()> {
    let spec = SyntheticSpec {
        n_instances: a.n,
        theta: a.theta,
        noise: a.noise,
        limb_jitter: a.limb_jitter,
        test_fraction: a.test_fraction,
        seed: a.common.seed,
    };
    spec.validate()?;
    let data = generate_synthetic(&spec)?;
    data.write(&a.common.out_dir)?;
    println!(
        "wrote {} synthetic instances to {}",
        data.instances.len(),
        a.common.out_dir.display()
    );
    Ok(())
}

/// A pose record that could not be converted.
#[derive(Debug, Serialize)]
struct Skipped<'a> {
    image_ref: &'a str,
    instance_id: &'a str,
    line: usize,
    skipped: &'a str,
}

pub fn convert(a: &ConvertArgs) -> Result<()> {
    require_file(&a.poses)?;
    let poses = read_poses(&a.poses).with_context(|| format!("reading poses {}", a.poses.display()))?;
    let keypoints = match &a.keypoints {
        Some(p) => {
            require_file(p)?;
            Some(index_keypoints(read_keypoints(p)?)?)
        }
        None => None,
    };
    let skeletons: Vec<_> = poses.iter().map(|p| p.skeleton()).collect();
    let outcomes = convert_pose_dataset(&skeletons);

    let mut labels = Vec::new();
    let mut skipped = Vec::new();
    for (i, ((pose, skeleton), outcome)) in poses.iter().zip(&skeletons).zip(&outcomes).enumerate() {
        match outcome {
            PoseConversion::Label(orientation) => {
                let kp = keypoints
                    .as_ref()
                    .and_then(|k| k.get(&(pose.image_ref.clone(), pose.instance_id.clone())).cloned());
                let bbox = match (pose.bbox, kp) {
                    (Some(b), _) => b,
                    (None, Some(kp)) => kp.bbox(0.1)?,
                    (None, None) => Keypoints2D::project(skeleton).bbox(0.1)?,
                };
                let mut extra = BTreeMap::new();
                extra.insert("source_line".to_string(), Value::from(i + 1));
                labels.push(LabelRecord {
                    image_ref: pose.image_ref.clone(),
                    instance_id: pose.instance_id.clone(),
                    bbox,
                    orientation: *orientation,
                    labeler_id: "pose-conversion".into(),
                    timestamp: DateTime::UNIX_EPOCH,
                    source: LabelSource::Converted,
                    split: None,
                    extra,
                });
            }
            PoseConversion::Skipped { reason } => skipped.push(Skipped {
                image_ref: &pose.image_ref,
                instance_id: &pose.instance_id,
                line: i + 1,
                skipped: reason,
            }),
        }
    }
    let mut manifest = DatasetManifest::new(labels)?;
    manifest.assign_splits(a.test_fraction, a.common.seed)?;
    write_labels(&a.common.out_dir.join(LABELS_FILE), &manifest)?;
    write_jsonl(&a.common.out_dir.join("skipped.jsonl"), &skipped)?;
    println!(
        "converted {} of {} poses ({} skipped)",
        manifest.len(),
        poses.len(),
        skipped.len()
    );
    Ok(())
}

pub fn stats(a: &StatsArgs) -> Result<()> {
    let manifest = load_manifest(&a.data)?;
    let s = dataset_stats(&manifest, a.resolution_bin)?;
    write_text(&named_out(&a.common, "stats", "orientation.csv"), &s.orientation_csv())?;
    write_text(&named_out(&a.common, "stats", "resolution.csv"), &s.resolution_csv())?;
    println!(
        "{} records, {} images; histograms in {}",
        s.total(),
        manifest.num_images(),
        a.common.out_dir.display()
    );
    Ok(())
}
