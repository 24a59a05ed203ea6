//! Flip and scale augmentation. In-plane rotation is refused for orientation-labelled data.

use nalgebra::Rotation3;

use crate::error::{Error, Result};
use crate::geometry::{OrientationLabel, Skeleton3D, Vec3};
use crate::joints::mirror_name;

use super::poses::Keypoints2D;
use super::records::{BBox, LabelRecord};

/// Orientation after a horizontal image flip: `(360 - theta) mod 360`.
///
/// A horizontal flip negates the camera y axis, which negates `sin theta` and keeps `cos theta`.
pub fn flip_label(theta_deg: f64) -> f64 {
    let t = crate::geometry::wrap_degrees(theta_deg);
    if t == 0.0 {
        0.0
    } else {
        360.0 - t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AugmentOp {
    /// Mirror about the vertical centre line of the instance box.
    Flip,
    /// Scale about the box centre by the given factor.
    Scale(f64),
    /// In-plane rotation in degrees; only valid for records without an orientation label.
    Rotate(f64),
}

/// The parts of a training sample that augmentation touches.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AugmentRecord {
    pub label: Option<LabelRecord>,
    pub keypoints: Option<Keypoints2D>,
    pub skeleton: Option<Skeleton3D>,
}

impl AugmentRecord {
    /// Centre `(row, col)` of the instance: the label box if present, else the keypoint extent.
    fn center(&self) -> (f64, f64) {
        if let Some(l) = &self.label {
            let (c, r) = l.bbox.center();
            return (r, c);
        }
        match self.keypoints.as_ref().and_then(Keypoints2D::extent) {
            Some((r0, c0, r1, c1)) => ((r0 + r1) / 2.0, (c0 + c1) / 2.0),
            None => (0.0, 0.0),
        }
    }
}

pub fn augment(record: &AugmentRecord, op: AugmentOp) -> Result<AugmentRecord> {
    let (row_c, col_c) = record.center();
    let mut out = record.clone();
    match op {
        AugmentOp::Flip => {
            if let Some(label) = &mut out.label {
                label.orientation = OrientationLabel::from_degrees(flip_label(label.orientation.theta_deg()))?;
            }
            if let Some(kp) = &record.keypoints {
                out.keypoints = Some(Keypoints2D(
                    kp.0.iter()
                        .map(|(n, p)| (mirror_name(n), [p[0], 2.0 * col_c - p[1]]))
                        .collect(),
                ));
            }
            if let Some(s) = &record.skeleton {
                out.skeleton = Some(Skeleton3D::from_joints(
                    s.iter().map(|(n, p)| (mirror_name(n), Vec3::new(p.x, -p.y, p.z))),
                ));
            }
        }
        AugmentOp::Scale(factor) => {
            if !(factor > 0.0 && factor.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "scale factor must be positive, got {factor}"
                )));
            }
            if let Some(label) = &mut out.label {
                let b = label.bbox;
                let (cx, cy) = b.center();
                let (w, h) = (b.w * factor, b.h * factor);
                label.bbox = BBox::new(cx - w / 2.0, cy - h / 2.0, w, h)?;
            }
            if let Some(kp) = &mut out.keypoints {
                for p in kp.0.values_mut() {
                    *p = [row_c + factor * (p[0] - row_c), col_c + factor * (p[1] - col_c)];
                }
            }
            if let Some(s) = &record.skeleton {
                out.skeleton = Some(s.map(|p| factor * p));
            }
        }
        AugmentOp::Rotate(degrees) => {
            if record.label.is_some() {
                return Err(Error::RotationOnOrientation);
            }
            let (sin, cos) = degrees.to_radians().sin_cos();
            if let Some(kp) = &mut out.keypoints {
                for p in kp.0.values_mut() {
                    let (dr, dc) = (p[0] - row_c, p[1] - col_c);
                    *p = [row_c + cos * dr - sin * dc, col_c + sin * dr + cos * dc];
                }
            }
            if let Some(s) = &record.skeleton {
                let rot = Rotation3::from_axis_angle(&Vec3::z_axis(), degrees.to_radians());
                out.skeleton = Some(s.map(|p| rot * p));
            }
        }
    }
    Ok(out)
}
