//! Body orientation from a 3-D skeleton.
//!
//! All coordinates live in a single fixed camera frame (see [`CameraFrame`]).
//! The chest facing direction is `C = T x S` where
//!
//! * `S = J_rs - J_ls` is the shoulder vector,
//! * `T = (J_lh + J_rh)/2 - (J_ls + J_rs)/2` runs from the shoulder midpoint to the hip midpoint.
//!
//! The orientation angle is the direction of `C` projected onto the y-z plane, measured from
//! `+z` towards `+y`: `theta = atan2(C.y, C.z)`. With this frame a person seen from behind is at
//! 0 degrees and a person facing the camera is at 180 degrees.

use std::collections::BTreeMap;

use nalgebra::{Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::joints::Joint;

pub type Vec3 = Vector3<f64>;

/// Number of orientation bins.
pub const NUM_BINS: usize = 72;
/// Width of one orientation bin in degrees.
pub const BIN_WIDTH_DEG: f64 = 5.0;

/// Relative tolerance on `|T x S|` below which a pose is degenerate.
pub const DEGENERATE_REL_EPS: f64 = 1e-8;
/// Minimum y-z projection norm of the unit chest direction.
pub const PROJECTION_EPS: f64 = 1e-6;

/// The camera frame convention used throughout the crate.
///
/// * `x` points down the image (row direction),
/// * `y` points right along the image (column direction),
/// * `z` points from the camera into the scene.
///
/// The frame is right-handed: `x × y = z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CameraFrame;

impl CameraFrame {
    pub const X: [f64; 3] = [1.0, 0.0, 0.0];
    pub const Y: [f64; 3] = [0.0, 1.0, 0.0];
    pub const Z: [f64; 3] = [0.0, 0.0, 1.0];

    pub fn x() -> Vec3 {
        Vec3::from(Self::X)
    }

    pub fn y() -> Vec3 {
        Vec3::from(Self::Y)
    }

    pub fn z() -> Vec3 {
        Vec3::from(Self::Z)
    }
}

/// Named 3-D joint positions in the camera frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Skeleton3D {
    joints: BTreeMap<String, Vec3>,
}

impl Skeleton3D {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_joints<I, S>(joints: I) -> Self
    where
        I: IntoIterator<Item = (S, Vec3)>,
        S: Into<String>,
    {
        Self {
            joints: joints.into_iter().map(|(n, p)| (n.into(), p)).collect(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, position: Vec3) -> Option<Vec3> {
        self.joints.insert(name.into(), position)
    }

    pub fn get(&self, name: &str) -> Option<&Vec3> {
        self.joints.get(name)
    }

    pub fn joint(&self, joint: Joint) -> Option<&Vec3> {
        self.joints.get(joint.name())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Vec3)> {
        self.joints.iter().map(|(n, p)| (n.as_str(), p))
    }

    pub fn len(&self) -> usize {
        self.joints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }

    /// Looks up a joint that must be present with finite coordinates.
    pub fn required(&self, joint: Joint) -> Result<Vec3> {
        let p = self
            .joint(joint)
            .ok_or_else(|| Error::MissingJoint(joint.name().to_string()))?;
        if p.iter().all(|c| c.is_finite()) {
            Ok(*p)
        } else {
            Err(Error::NonFiniteJoint(joint.name().to_string()))
        }
    }

    /// Checks that the four torso joints are present and finite.
    pub fn validate(&self) -> Result<()> {
        Joint::REQUIRED.iter().try_for_each(|&j| self.required(j).map(drop))
    }

    /// Applies `f` to every joint position.
    pub fn map(&self, mut f: impl FnMut(&Vec3) -> Vec3) -> Self {
        Self {
            joints: self.joints.iter().map(|(n, p)| (n.clone(), f(p))).collect(),
        }
    }

    /// Rotates every joint about the camera x axis (through the origin) by `degrees`.
    pub fn rotated_about_x(&self, degrees: f64) -> Self {
        let rot = Rotation3::from_axis_angle(&Vec3::x_axis(), degrees.to_radians());
        self.map(|p| rot * p)
    }
}

/// A continuous orientation angle together with its 5-degree bin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientationLabel {
    theta_deg: f64,
    bin: u8,
}

impl OrientationLabel {
    /// Builds a label from any finite angle, wrapping it into `[0, 360)`.
    pub fn from_degrees(theta_deg: f64) -> Result<Self> {
        if !theta_deg.is_finite() {
            return Err(Error::InvalidAngle(theta_deg));
        }
        let theta = wrap_degrees(theta_deg);
        Ok(Self {
            theta_deg: theta,
            bin: bin_of(theta),
        })
    }

    /// The label at the centre of `bin`.
    pub fn from_bin(bin: usize) -> Result<Self> {
        if bin >= NUM_BINS {
            return Err(Error::BinOutOfRange(bin as i64));
        }
        Ok(Self {
            theta_deg: bin as f64 * BIN_WIDTH_DEG,
            bin: bin as u8,
        })
    }

    pub fn theta_deg(&self) -> f64 {
        self.theta_deg
    }

    pub fn bin(&self) -> usize {
        self.bin as usize
    }
}

/// Wraps an angle into `[0, 360)`.
pub fn wrap_degrees(theta: f64) -> f64 {
    let t = theta.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if t >= 360.0 {
        0.0
    } else {
        t
    }
}

/// Bin index of an angle: `round(theta / 5) mod 72`, ties going to the upper bin.
pub fn bin_of(theta_deg: f64) -> u8 {
    let theta = wrap_degrees(theta_deg);
    ((theta / BIN_WIDTH_DEG + 0.5).floor() as i64).rem_euclid(NUM_BINS as i64) as u8
}

/// `S = J_rs - J_ls`, not normalized.
pub fn shoulder_vector(s: &Skeleton3D) -> Result<Vec3> {
    let ls = s.required(Joint::LeftShoulder)?;
    let rs = s.required(Joint::RightShoulder)?;
    Ok(rs - ls)
}

/// Hip midpoint minus shoulder midpoint.
pub fn torso_vector(s: &Skeleton3D) -> Result<Vec3> {
    let ls = s.required(Joint::LeftShoulder)?;
    let rs = s.required(Joint::RightShoulder)?;
    let lh = s.required(Joint::LeftHip)?;
    let rh = s.required(Joint::RightHip)?;
    Ok(0.5 * (lh + rh) - 0.5 * (ls + rs))
}

/// Normalized `T x S` from precomputed torso and shoulder vectors.
pub fn chest_from_vectors(torso: &Vec3, shoulder: &Vec3) -> Result<Vec3> {
    let cross = torso.cross(shoulder);
    let norm = cross.norm();
    let scale = torso.norm().max(shoulder.norm()).max(1.0);
    if !(norm > DEGENERATE_REL_EPS * scale) {
        return Err(Error::DegeneratePose { cross_norm: norm });
    }
    Ok(cross / norm)
}

/// Unit chest facing direction `(T x S) / |T x S|`.
pub fn chest_direction(s: &Skeleton3D) -> Result<Vec3> {
    let t = torso_vector(s)?;
    let sh = shoulder_vector(s)?;
    chest_from_vectors(&t, &sh)
}

/// Orientation angle of a unit chest direction.
pub fn orientation_from_chest(chest: &Vec3) -> Result<OrientationLabel> {
    let projection_norm = chest.y.hypot(chest.z);
    if !(projection_norm > PROJECTION_EPS) {
        return Err(Error::ChestNearAxisX { projection_norm });
    }
    OrientationLabel::from_degrees(chest.y.atan2(chest.z).to_degrees())
}

pub fn orientation_from_skeleton(s: &Skeleton3D) -> Result<OrientationLabel> {
    orientation_from_chest(&chest_direction(s)?)
}

/// Result of converting one pose record to an orientation label.
#[derive(Debug, Clone, PartialEq)]
pub enum PoseConversion {
    Label(OrientationLabel),
    Skipped { reason: String },
}

impl PoseConversion {
    pub fn label(&self) -> Option<OrientationLabel> {
        match self {
            PoseConversion::Label(l) => Some(*l),
            PoseConversion::Skipped { .. } => None,
        }
    }
}

/// Converts a 3-D pose dataset to orientation labels, one outcome per input record.
pub fn convert_pose_dataset<'a, I>(poses: I) -> Vec<PoseConversion>
where
    I: IntoIterator<Item = &'a Skeleton3D>,
{
    poses
        .into_iter()
        .map(|s| match orientation_from_skeleton(s) {
            Ok(label) => PoseConversion::Label(label),
            Err(e) => PoseConversion::Skipped { reason: e.to_string() },
        })
        .collect()
}
