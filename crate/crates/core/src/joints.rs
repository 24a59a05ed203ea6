//! The 18-joint body model shared by skeletons, keypoint files and the lifter.

use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// Joints of the 18-point body model (COCO-18 ordering).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Joint {
    Nose,
    Neck,
    RightShoulder,
    RightElbow,
    RightWrist,
    LeftShoulder,
    LeftElbow,
    LeftWrist,
    RightHip,
    RightKnee,
    RightAnkle,
    LeftHip,
    LeftKnee,
    LeftAnkle,
    RightEye,
    LeftEye,
    RightEar,
    LeftEar,
}

impl Joint {
    pub const ALL: [Joint; 18] = [
        Joint::Nose,
        Joint::Neck,
        Joint::RightShoulder,
        Joint::RightElbow,
        Joint::RightWrist,
        Joint::LeftShoulder,
        Joint::LeftElbow,
        Joint::LeftWrist,
        Joint::RightHip,
        Joint::RightKnee,
        Joint::RightAnkle,
        Joint::LeftHip,
        Joint::LeftKnee,
        Joint::LeftAnkle,
        Joint::RightEye,
        Joint::LeftEye,
        Joint::RightEar,
        Joint::LeftEar,
    ];

    /// The 16 joints regressed by the pose lifter (the body model without the eyes).
    pub const LIFTER: [Joint; 16] = [
        Joint::Nose,
        Joint::Neck,
        Joint::RightShoulder,
        Joint::RightElbow,
        Joint::RightWrist,
        Joint::LeftShoulder,
        Joint::LeftElbow,
        Joint::LeftWrist,
        Joint::RightHip,
        Joint::RightKnee,
        Joint::RightAnkle,
        Joint::LeftHip,
        Joint::LeftKnee,
        Joint::LeftAnkle,
        Joint::RightEar,
        Joint::LeftEar,
    ];

    /// Joints that every orientation computation needs.
    pub const REQUIRED: [Joint; 4] = [
        Joint::LeftShoulder,
        Joint::RightShoulder,
        Joint::LeftHip,
        Joint::RightHip,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Joint::Nose => "nose",
            Joint::Neck => "neck",
            Joint::RightShoulder => "right_shoulder",
            Joint::RightElbow => "right_elbow",
            Joint::RightWrist => "right_wrist",
            Joint::LeftShoulder => "left_shoulder",
            Joint::LeftElbow => "left_elbow",
            Joint::LeftWrist => "left_wrist",
            Joint::RightHip => "right_hip",
            Joint::RightKnee => "right_knee",
            Joint::RightAnkle => "right_ankle",
            Joint::LeftHip => "left_hip",
            Joint::LeftKnee => "left_knee",
            Joint::LeftAnkle => "left_ankle",
            Joint::RightEye => "right_eye",
            Joint::LeftEye => "left_eye",
            Joint::RightEar => "right_ear",
            Joint::LeftEar => "left_ear",
        }
    }

    /// The left/right counterpart; unpaired joints map to themselves.
    pub fn mirror(self) -> Joint {
        match self {
            Joint::RightShoulder => Joint::LeftShoulder,
            Joint::LeftShoulder => Joint::RightShoulder,
            Joint::RightElbow => Joint::LeftElbow,
            Joint::LeftElbow => Joint::RightElbow,
            Joint::RightWrist => Joint::LeftWrist,
            Joint::LeftWrist => Joint::RightWrist,
            Joint::RightHip => Joint::LeftHip,
            Joint::LeftHip => Joint::RightHip,
            Joint::RightKnee => Joint::LeftKnee,
            Joint::LeftKnee => Joint::RightKnee,
            Joint::RightAnkle => Joint::LeftAnkle,
            Joint::LeftAnkle => Joint::RightAnkle,
            Joint::RightEye => Joint::LeftEye,
            Joint::LeftEye => Joint::RightEye,
            Joint::RightEar => Joint::LeftEar,
            Joint::LeftEar => Joint::RightEar,
            j @ (Joint::Nose | Joint::Neck) => j,
        }
    }

    /// Name with the side prefix stripped, used to average paired joints in reports.
    pub fn group_name(self) -> &'static str {
        let name = self.name();
        name.strip_prefix("left_")
            .or_else(|| name.strip_prefix("right_"))
            .unwrap_or(name)
    }
}

impl fmt::Display for Joint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Joint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Joint::ALL
            .iter()
            .copied()
            .find(|j| j.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown joint name `{s}`")))
    }
}

/// Swaps a `left_`/`right_` prefix on an arbitrary joint name.
pub fn mirror_name(name: &str) -> String {
    if let Some(rest) = name.strip_prefix("left_") {
        format!("right_{rest}")
    } else if let Some(rest) = name.strip_prefix("right_") {
        format!("left_{rest}")
    } else {
        name.to_string()
    }
}
