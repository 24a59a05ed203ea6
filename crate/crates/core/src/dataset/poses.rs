//! 3-D pose and 2-D keypoint files.
//!
//! Both are JSON lines with `image_ref`, `instance_id` and a `joints` object mapping joint
//! names to `[x, y, z]` (poses) or `[x, y]` (keypoints). Pose files also accept a flat text
//! line per record, `name x y z name x y z ...`.
//!
//! 2-D keypoints use the camera-frame axes: `x` is the image row, `y` the image column.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::geometry::{Skeleton3D, Vec3};
use crate::joints::{mirror_name, Joint};

use super::records::BBox;

/// Named 2-D keypoints `(row, column)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Keypoints2D(pub BTreeMap<String, [f64; 2]>);

impl Keypoints2D {
    pub fn get(&self, joint: Joint) -> Option<[f64; 2]> {
        self.0.get(joint.name()).copied()
    }

    pub fn required(&self, joint: Joint) -> Result<[f64; 2]> {
        self.get(joint)
            .ok_or_else(|| Error::MissingJoint(joint.name().to_string()))
    }

    /// Orthographic projection of a skeleton onto the image plane (drops z).
    pub fn project(s: &Skeleton3D) -> Self {
        Self(s.iter().map(|(n, p)| (n.to_string(), [p.x, p.y])).collect())
    }

    /// Swaps left/right names.
    pub fn mirrored_names(&self) -> Self {
        Self(self.0.iter().map(|(n, p)| (mirror_name(n), *p)).collect())
    }

    /// Tight box around all keypoints, as `(min_row, min_col, max_row, max_col)`.
    pub fn extent(&self) -> Option<(f64, f64, f64, f64)> {
        let mut it = self.0.values();
        let first = it.next()?;
        let init = (first[0], first[1], first[0], first[1]);
        Some(it.fold(init, |(r0, c0, r1, c1), p| {
            (r0.min(p[0]), c0.min(p[1]), r1.max(p[0]), c1.max(p[1]))
        }))
    }

    /// Box around the keypoints with a relative margin, at least 1 pixel on each side.
    pub fn bbox(&self, margin: f64) -> Result<BBox> {
        let (r0, c0, r1, c1) = self.extent().ok_or(Error::EmptyInput("no keypoints to box"))?;
        let w = (c1 - c0).max(1.0);
        let h = (r1 - r0).max(1.0);
        BBox::new(
            c0 - margin * w,
            r0 - margin * h,
            w * (1.0 + 2.0 * margin),
            h * (1.0 + 2.0 * margin),
        )
    }
}

/// One 3-D pose line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    pub image_ref: String,
    pub instance_id: String,
    pub joints: BTreeMap<String, [f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<BBox>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

impl PoseRecord {
    pub fn from_skeleton(image_ref: &str, instance_id: &str, s: &Skeleton3D) -> Self {
        Self {
            image_ref: image_ref.to_string(),
            instance_id: instance_id.to_string(),
            joints: s.iter().map(|(n, p)| (n.to_string(), [p.x, p.y, p.z])).collect(),
            bbox: None,
            extra: BTreeMap::new(),
        }
    }

    pub fn skeleton(&self) -> Skeleton3D {
        Skeleton3D::from_joints(self.joints.iter().map(|(n, p)| (n.clone(), Vec3::from(*p))))
    }
}

/// One 2-D keypoint line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeypointRecord {
    pub image_ref: String,
    pub instance_id: String,
    pub joints: Keypoints2D,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

/// Keypoints keyed by `(image_ref, instance_id)`.
pub type KeypointIndex = BTreeMap<(String, String), Keypoints2D>;

/// Indexes keypoint records, rejecting duplicate instances.
pub fn index_keypoints(records: Vec<KeypointRecord>) -> Result<KeypointIndex> {
    let mut out = KeypointIndex::new();
    for (i, r) in records.into_iter().enumerate() {
        let key = (r.image_ref, r.instance_id);
        if out.contains_key(&key) {
            return Err(Error::DuplicateInstance {
                image_ref: key.0,
                instance_id: key.1,
                line: i + 1,
            });
        }
        out.insert(key, r.joints);
    }
    Ok(out)
}

fn parse_error(origin: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: origin.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_flat_pose(text: &str, origin: &Path, line: usize) -> Result<PoseRecord> {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    if !tokens.len().is_multiple_of(4) {
        return Err(parse_error(
            origin,
            line,
            "flat pose line must hold `name x y z` groups",
        ));
    }
    let mut joints = BTreeMap::new();
    for group in tokens.chunks_exact(4) {
        let mut xyz = [0.0; 3];
        for (v, t) in xyz.iter_mut().zip(&group[1..]) {
            *v = t
                .parse()
                .map_err(|_| parse_error(origin, line, format!("bad number `{t}`")))?;
        }
        joints.insert(group[0].to_string(), xyz);
    }
    Ok(PoseRecord {
        image_ref: format!("line{line}"),
        instance_id: "0".into(),
        joints,
        bbox: None,
        extra: BTreeMap::new(),
    })
}

pub fn parse_poses<R: BufRead>(reader: R, origin: &Path) -> Result<Vec<PoseRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let rec = if trimmed.starts_with('{') {
            serde_json::from_str(trimmed).map_err(|e| parse_error(origin, i + 1, e.to_string()))?
        } else {
            parse_flat_pose(trimmed, origin, i + 1)?
        };
        out.push(rec);
    }
    Ok(out)
}

pub fn read_poses(path: &Path) -> Result<Vec<PoseRecord>> {
    parse_poses(BufReader::new(File::open(path)?), path)
}

pub fn read_keypoints(path: &Path) -> Result<Vec<KeypointRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| parse_error(path, i + 1, e.to_string()))?);
    }
    Ok(out)
}

/// Writes any serializable records as JSON lines.
pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Root-relative, torso-normalized keypoint features for the orientation model.
///
/// Every joint of the 18-point model is expressed relative to the hip midpoint and divided by
/// the 2-D distance between the shoulder and hip midpoints, giving 36 values.
pub fn keypoint_features(kp: &Keypoints2D) -> Result<Vec<f64>> {
    let ls = kp.required(Joint::LeftShoulder)?;
    let rs = kp.required(Joint::RightShoulder)?;
    let lh = kp.required(Joint::LeftHip)?;
    let rh = kp.required(Joint::RightHip)?;
    let root = [(lh[0] + rh[0]) / 2.0, (lh[1] + rh[1]) / 2.0];
    let top = [(ls[0] + rs[0]) / 2.0, (ls[1] + rs[1]) / 2.0];
    let torso = (top[0] - root[0]).hypot(top[1] - root[1]);
    if !(torso > 1e-9) {
        return Err(Error::InvalidArgument("2-D torso length is zero".into()));
    }
    let mut out = Vec::with_capacity(2 * Joint::ALL.len());
    for j in Joint::ALL {
        let p = kp.required(j)?;
        out.push((p[0] - root[0]) / torso);
        out.push((p[1] - root[1]) / torso);
    }
    Ok(out)
}

pub const KEYPOINT_FEATURE_DIM: usize = 2 * Joint::ALL.len();

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    #[test]
    fn flat_and_json_pose_lines() {
        let text = "left_shoulder 0 -1 0 right_shoulder 0 1 0\n\n{\"image_ref\":\"a\",\"instance_id\":\"1\",\"joints\":{\"nose\":[1,2,3]}}\n";
        let poses = parse_poses(Cursor::new(text), Path::new("mem")).unwrap();
        assert_eq!(poses.len(), 2);
        assert_eq!(poses[0].image_ref, "line1");
        assert_eq!(poses[0].joints["right_shoulder"], [0.0, 1.0, 0.0]);
        assert_eq!(poses[1].skeleton().get("nose"), Some(&Vec3::new(1.0, 2.0, 3.0)));
    }

    #[test]
    fn bad_flat_line() {
        let err = parse_poses(Cursor::new("nose 1 2\n"), Path::new("mem")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = parse_poses(Cursor::new("nose 1 2 x\n"), Path::new("mem")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn features_are_translation_and_scale_invariant() {
        let mut kp = Keypoints2D::default();
        for (i, j) in Joint::ALL.iter().enumerate() {
            kp.0.insert(j.name().into(), [i as f64 * 0.3, (i as f64).sin()]);
        }
        kp.0.insert("left_hip".into(), [5.0, -0.5]);
        kp.0.insert("right_hip".into(), [5.0, 0.5]);
        let f = keypoint_features(&kp).unwrap();
        assert_eq!(f.len(), KEYPOINT_FEATURE_DIM);
        let moved = Keypoints2D(
            kp.0.iter()
                .map(|(n, p)| (n.clone(), [3.0 * p[0] + 7.0, 3.0 * p[1] - 2.0]))
                .collect(),
        );
        let g = keypoint_features(&moved).unwrap();
        for (a, b) in f.iter().zip(&g) {
            assert!((a - b).abs() < 1e-12);
        }
        kp.0.remove("nose");
        assert!(matches!(keypoint_features(&kp), Err(Error::MissingJoint(_))));
    }

    #[test]
    fn bbox_from_keypoints() {
        let kp = Keypoints2D([("a".to_string(), [10.0, 20.0]), ("b".to_string(), [30.0, 60.0])].into());
        let b = kp.bbox(0.0).unwrap();
        assert_eq!((b.x, b.y, b.w, b.h), (20.0, 10.0, 40.0, 20.0));
        assert!(Keypoints2D::default().bbox(0.1).is_err());
    }
}
