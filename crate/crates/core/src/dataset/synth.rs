//! Synthetic skeletons with known orientation.
//!
//! A canonical T-pose (arms straight out to the side, head and knees slightly forward) is built through a kinematic tree with randomized bone lengths, rotated about the
//! camera x axis to the sampled orientation, projected orthographically and perturbed with
//! Gaussian keypoint noise. Skeleton units are roughly "torso lengths"; keypoints are in pixels.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, Duration};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wrap_degrees, OrientationLabel, Skeleton3D, Vec3};
use crate::joints::Joint;

use super::poses::{write_jsonl, KeypointRecord, Keypoints2D, PoseRecord};
use super::records::{split_for_image, write_labels, DatasetManifest, LabelRecord, LabelSource};

/// Pixels per skeleton unit in generated keypoints.
pub const PIXELS_PER_UNIT: f64 = 100.0;
/// Image position of the pelvis, `(row, col)`.
pub const IMAGE_ORIGIN: (f64, f64) = (300.0, 300.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ThetaDistribution {
    #[default]
    Uniform,
    /// Half the mass uniform, half a normal around 180 degrees (sd 45).
    PeakedFront,
    /// Uniform within `[lo, hi)` degrees (wrapping when `lo > hi`).
    Range { lo: f64, hi: f64 },
}

impl ThetaDistribution {
    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            ThetaDistribution::Uniform => rng.random_range(0.0..360.0),
            ThetaDistribution::PeakedFront => {
                if rng.random_bool(0.5) {
                    rng.random_range(0.0..360.0)
                } else {
                    let n = Normal::new(180.0, 45.0).expect("valid normal");
                    wrap_degrees(n.sample(rng))
                }
            }
            ThetaDistribution::Range { lo, hi } => {
                let width = wrap_degrees(hi - lo);
                let width = if width == 0.0 { 360.0 } else { width };
                wrap_degrees(lo + rng.random_range(0.0..width))
            }
        }
    }
}

/// Parses `uniform`, `peaked-front` or `LO:HI` in degrees.
impl std::str::FromStr for ThetaDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "peaked-front" => Ok(Self::PeakedFront),
            other => {
                let parsed = other
                    .split_once(':')
                    .and_then(|(lo, hi)| Some((lo.trim().parse::<f64>().ok()?, hi.trim().parse::<f64>().ok()?)));
                match parsed {
                    Some((lo, hi)) if lo.is_finite() && hi.is_finite() => Ok(Self::Range { lo, hi }),
                    _ => Err(Error::InvalidArgument(format!(
                        "unknown orientation distribution `{other}` (expected uniform, peaked-front or LO:HI)"
                    ))),
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_instances: usize,
    pub theta: ThetaDistribution,
    /// Standard deviation of 2-D keypoint noise in skeleton units.
    pub noise: f64,
    /// Each bone length is scaled by a factor drawn from `[1 - r, 1 + r]`.
    pub limb_jitter: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_instances: 1000,
            theta: ThetaDistribution::Uniform,
            noise: 0.02,
            limb_jitter: 0.1,
            test_fraction: 0.2,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_instances == 0 {
            return Err(Error::InvalidArgument("n_instances must be >= 1".into()));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise must be >= 0, got {}",
                self.noise
            )));
        }
        if !(0.0..1.0).contains(&self.limb_jitter) {
            return Err(Error::InvalidArgument(format!(
                "limb jitter must be in [0, 1), got {}",
                self.limb_jitter
            )));
        }
        if !(0.0..=1.0).contains(&self.test_fraction) {
            return Err(Error::InvalidArgument("test fraction must be in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Node {
    Pelvis,
    Thorax,
    Joint(Joint),
}

/// Kinematic tree of the rest pose at orientation 0 (seen from behind): x down, the person's
/// left towards -y, facing +z.
const BONES: [(Node, Node, [f64; 3]); 19] = {
    use Joint::*;
    use Node::{Joint as J, Pelvis, Thorax};
    [
        (Pelvis, J(LeftHip), [0.0, -0.18, 0.0]),
        (Pelvis, J(RightHip), [0.0, 0.18, 0.0]),
        (Pelvis, Thorax, [-1.0, 0.0, 0.0]),
        (Thorax, J(LeftShoulder), [0.0, -0.36, 0.0]),
        (Thorax, J(RightShoulder), [0.0, 0.36, 0.0]),
        (Thorax, J(Neck), [-0.12, 0.0, 0.0]),
        (J(Neck), J(Nose), [-0.25, 0.0, 0.18]),
        (J(Neck), J(LeftEye), [-0.33, -0.07, 0.14]),
        (J(Neck), J(RightEye), [-0.33, 0.07, 0.14]),
        (J(Neck), J(LeftEar), [-0.28, -0.14, 0.02]),
        (J(Neck), J(RightEar), [-0.28, 0.14, 0.02]),
        (J(LeftShoulder), J(LeftElbow), [0.0, -0.3, 0.0]),
        (J(RightShoulder), J(RightElbow), [0.0, 0.3, 0.0]),
        (J(LeftElbow), J(LeftWrist), [0.0, -0.26, 0.0]),
        (J(RightElbow), J(RightWrist), [0.0, 0.26, 0.0]),
        (J(LeftHip), J(LeftKnee), [0.5, -0.02, 0.06]),
        (J(RightHip), J(RightKnee), [0.5, 0.02, 0.06]),
        (J(LeftKnee), J(LeftAnkle), [0.5, 0.0, -0.05]),
        (J(RightKnee), J(RightAnkle), [0.5, 0.0, -0.05]),
    ]
};

/// Rest-pose skeleton at orientation 0 with bone lengths scaled by `factors` (one per bone).
fn rest_pose(factors: &[f64; BONES.len()]) -> Skeleton3D {
    let mut positions: BTreeMap<Node, Vec3> = BTreeMap::new();
    positions.insert(Node::Pelvis, Vec3::zeros());
    for ((parent, child, offset), f) in BONES.iter().zip(factors) {
        let base = positions[parent];
        positions.insert(*child, base + *f * Vec3::from(*offset));
    }
    Skeleton3D::from_joints(positions.into_iter().filter_map(|(n, p)| match n {
        Node::Joint(j) => Some((j.name(), p)),
        _ => None,
    }))
}

/// The unjittered rest pose rotated to `theta_deg`.
pub fn canonical_skeleton(theta_deg: f64) -> Skeleton3D {
    rest_pose(&[1.0; BONES.len()]).rotated_about_x(-theta_deg)
}

/// One generated instance.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticInstance {
    pub theta_deg: f64,
    pub skeleton: Skeleton3D,
    /// Noisy projected keypoints in pixels.
    pub keypoints: Keypoints2D,
    pub label: LabelRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub instances: Vec<SyntheticInstance>,
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let epoch = DateTime::from_timestamp(1_600_000_000, 0).expect("valid timestamp");
    let mut instances = Vec::with_capacity(spec.n_instances);
    for i in 0..spec.n_instances {
        let theta = spec.theta.sample(&mut rng);
        let mut factors = [1.0; BONES.len()];
        for f in &mut factors {
            *f = 1.0 + rng.random_range(-1.0..=1.0) * spec.limb_jitter;
        }
        let skeleton = rest_pose(&factors).rotated_about_x(-theta);
        let keypoints = Keypoints2D(
            skeleton
                .iter()
                .map(|(name, p)| {
                    let (dx, dy) = if spec.noise > 0.0 {
                        (noise.sample(&mut rng), noise.sample(&mut rng))
                    } else {
                        (0.0, 0.0)
                    };
                    (
                        name.to_string(),
                        [
                            IMAGE_ORIGIN.0 + PIXELS_PER_UNIT * (p.x + dx),
                            IMAGE_ORIGIN.1 + PIXELS_PER_UNIT * (p.y + dy),
                        ],
                    )
                })
                .collect(),
        );
        let image_ref = format!("synth/{i:06}");
        let label = LabelRecord {
            split: Some(split_for_image(&image_ref, spec.test_fraction, spec.seed)),
            image_ref,
            instance_id: "0".into(),
            bbox: keypoints.bbox(0.1)?,
            orientation: OrientationLabel::from_degrees(theta)?,
            labeler_id: "synthetic".into(),
            timestamp: epoch + Duration::seconds(i as i64),
            source: LabelSource::Synthetic,
            extra: BTreeMap::new(),
        };
        instances.push(SyntheticInstance {
            theta_deg: theta,
            skeleton,
            keypoints,
            label,
        });
    }
    Ok(SyntheticDataset { instances })
}

/// File names written by [`SyntheticDataset::write`].
pub const LABELS_FILE: &str = "labels.jsonl";
pub const POSES_FILE: &str = "poses3d.jsonl";
pub const KEYPOINTS_FILE: &str = "keypoints2d.jsonl";

impl SyntheticDataset {
    pub fn manifest(&self) -> Result<DatasetManifest> {
        DatasetManifest::new(self.instances.iter().map(|i| i.label.clone()).collect())
    }

    pub fn pose_records(&self) -> Vec<PoseRecord> {
        self.instances
            .iter()
            .map(|i| PoseRecord::from_skeleton(&i.label.image_ref, &i.label.instance_id, &i.skeleton))
            .collect()
    }

    pub fn keypoint_records(&self) -> Vec<KeypointRecord> {
        self.instances
            .iter()
            .map(|i| KeypointRecord {
                image_ref: i.label.image_ref.clone(),
                instance_id: i.label.instance_id.clone(),
                joints: i.keypoints.clone(),
                extra: BTreeMap::new(),
            })
            .collect()
    }

    /// Writes labels, 3-D poses and 2-D keypoints into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_labels(&dir.join(LABELS_FILE), &self.manifest()?)?;
        write_jsonl(&dir.join(POSES_FILE), &self.pose_records())?;
        write_jsonl(&dir.join(KEYPOINTS_FILE), &self.keypoint_records())?;
        Ok(())
    }
}
