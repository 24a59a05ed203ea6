use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the core library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("skeleton is missing required joint `{0}`")]
    MissingJoint(String),

    #[error("joint `{0}` has a non-finite coordinate")]
    NonFiniteJoint(String),

    #[error("degenerate pose: torso and shoulder vectors are collinear or zero (|T x S| = {cross_norm:e})")]
    DegeneratePose { cross_norm: f64 },

    #[error("chest direction is nearly parallel to the camera x axis (y-z projection norm = {projection_norm:e})")]
    ChestNearAxisX { projection_norm: f64 },

    #[error("bin index {0} is outside 0..72")]
    BinOutOfRange(i64),

    #[error("invalid angle {0}")]
    InvalidAngle(f64),

    #[error("length mismatch: {left} predictions vs {right} ground-truth values")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate instance ({image_ref}, {instance_id}) at line {line}")]
    DuplicateInstance {
        image_ref: String,
        instance_id: String,
        line: usize,
    },

    #[error("rotation augmentation is not allowed on records carrying an orientation label")]
    RotationOnOrientation,

    #[error("training diverged: non-finite loss at epoch {epoch}, step {step}")]
    NonFiniteLoss { epoch: usize, step: usize },

    #[error("degenerate point set: {0}")]
    DegeneratePointSet(&'static str),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
