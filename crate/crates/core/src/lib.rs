//! Body orientation estimation toolkit.
//!
//! Skeleton-to-orientation geometry, the 72-bin circular Gaussian orientation objective and
//! its metrics, soft-argmax integral pose regression with 2-D, 3-D and orientation
//! supervision, pose metrics, and dataset tooling. Everything runs on the CPU with a small
//! dense network standing in for an image backbone.
//!
//! Camera frame: `x` points down the image rows, `y` right along the columns, `z` into the
//! scene. An orientation of 0 degrees means the person's back faces the camera; 180 degrees
//! means they face it.

pub mod bins;
pub mod checkpoint;
pub mod dataset;
pub mod error;
pub mod geometry;
pub mod gradcheck;
pub mod hboe;
pub mod integral;
pub mod joints;
pub mod lifter;
pub mod metrics;
pub mod nn;
pub mod optim;
pub mod pose_loss;
pub mod pose_metrics;
pub mod report;

pub use bins::{
    angular_error, circular_bin_distance, target_distribution, GaussianTargetParams, Quadrant, TargetDist72,
};
pub use error::{Error, Result};
pub use geometry::{
    chest_direction, orientation_from_skeleton, shoulder_vector, torso_vector, CameraFrame, OrientationLabel,
    Skeleton3D, Vec3, NUM_BINS,
};
pub use hboe::{decode, hboe_loss, DecodeRule, ProbDist72, TinyModel, TrainConfig};
pub use integral::{soft_argmax, HeatmapVolume, VolumeDims};
pub use joints::Joint;
pub use metrics::{evaluate, MetricReport};
pub use pose_loss::{LossWeights, PoseEstimate};
pub use pose_metrics::{mpjpe, pa_mpjpe, PoseMetricReport};
