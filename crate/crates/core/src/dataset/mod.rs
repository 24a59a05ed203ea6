//! Label and pose files, augmentation, synthetic data and dataset statistics.

pub mod augment;
pub mod poses;
pub mod records;
pub mod stats;
pub mod synth;

pub use augment::{augment, flip_label, AugmentOp, AugmentRecord};
pub use poses::{
    index_keypoints, keypoint_features, read_keypoints, read_poses, write_jsonl, KeypointIndex, KeypointRecord,
    Keypoints2D, PoseRecord, KEYPOINT_FEATURE_DIM,
};
pub use records::{read_labels, write_labels, BBox, DatasetManifest, LabelRecord, LabelSource, Split};
pub use stats::{stats, DatasetStats};
pub use synth::{generate_synthetic, SyntheticDataset, SyntheticInstance, SyntheticSpec, ThetaDistribution};
