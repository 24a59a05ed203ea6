//! MPJPE, per-axis and per-joint breakdowns, and Procrustes-aligned MPJPE.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::{Matrix3, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::joints::Joint;

/// Evaluation protocol for 3-D pose error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    /// Unaligned (root-relative) MPJPE.
    #[default]
    Mpjpe,
    /// MPJPE after similarity Procrustes alignment.
    Pa,
}

impl std::str::FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mpjpe" => Ok(Protocol::Mpjpe),
            "pa" => Ok(Protocol::Pa),
            other => Err(Error::InvalidArgument(format!(
                "unknown protocol `{other}` (expected mpjpe or pa)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseMetricReport {
    pub n_poses: usize,
    pub mpjpe: f64,
    /// Mean absolute error along x, y and z.
    pub per_axis: [f64; 3],
    /// Mean error per joint group; left and right joints are averaged together.
    pub per_joint: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pa_mpjpe: Option<f64>,
}

/// Mean Euclidean joint error of one pose.
pub fn mpjpe(est: &[Vec3], gt: &[Vec3]) -> Result<f64> {
    check(est, gt)?;
    Ok(est.iter().zip(gt).map(|(e, g)| (e - g).norm()).sum::<f64>() / est.len() as f64)
}

fn check(est: &[Vec3], gt: &[Vec3]) -> Result<()> {
    if est.len() != gt.len() {
        return Err(Error::LengthMismatch {
            left: est.len(),
            right: gt.len(),
        });
    }
    if est.is_empty() {
        return Err(Error::EmptyInput("pose with no joints"));
    }
    Ok(())
}

/// Best similarity transform `(scale, rotation, translation)` mapping `src` onto `dst`.
///
/// Reflections are excluded by flipping the sign of the smallest singular direction.
pub fn similarity_align(src: &[Vec3], dst: &[Vec3]) -> Result<(f64, Matrix3<f64>, Vec3)> {
    check(src, dst)?;
    if src.len() < 3 {
        return Err(Error::DegeneratePointSet("need at least three joints"));
    }
    let n = src.len() as f64;
    let mu_s = src.iter().sum::<Vec3>() / n;
    let mu_d = dst.iter().sum::<Vec3>() / n;

    let mut dst_scatter = Matrix3::zeros();
    let mut cov = Matrix3::zeros();
    let mut var_s = 0.0;
    for (s, d) in src.iter().zip(dst) {
        let sc = s - mu_s;
        let dc = d - mu_d;
        cov += dc * sc.transpose();
        dst_scatter += dc * dc.transpose();
        var_s += sc.norm_squared();
    }
    let sv = dst_scatter.symmetric_eigenvalues();
    let mut sv: Vec<f64> = sv.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    if !(sv[0] > 0.0) || sv[1] <= 1e-12 * sv[0] {
        return Err(Error::DegeneratePointSet("ground-truth joints are collinear"));
    }
    if var_s == 0.0 {
        return Ok((0.0, Matrix3::identity(), mu_d));
    }

    let svd = SVD::new(cov, true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let mut signs = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        signs[(2, 2)] = -1.0;
    }
    let rotation = u * signs * v_t;
    let d = svd.singular_values;
    let trace = d[0] * signs[(0, 0)] + d[1] * signs[(1, 1)] + d[2] * signs[(2, 2)];
    let scale = trace / var_s;
    let translation = mu_d - scale * rotation * mu_s;
    Ok((scale, rotation, translation))
}

/// MPJPE after aligning `est` onto `gt` with the best similarity transform.
pub fn pa_mpjpe(est: &[Vec3], gt: &[Vec3]) -> Result<f64> {
    let (s, r, t) = similarity_align(est, gt)?;
    let aligned: Vec<Vec3> = est.iter().map(|p| s * (r * p) + t).collect();
    mpjpe(&aligned, gt)
}

/// Accumulates errors over a set of poses.
#[derive(Debug, Clone)]
pub struct PoseErrorAccumulator {
    joints: Vec<Joint>,
    n_poses: usize,
    sum_error: f64,
    sum_axis: [f64; 3],
    sum_joint: Vec<f64>,
    sum_pa: f64,
    pa: bool,
}

impl PoseErrorAccumulator {
    pub fn new(joints: &[Joint], with_pa: bool) -> Self {
        Self {
            joints: joints.to_vec(),
            n_poses: 0,
            sum_error: 0.0,
            sum_axis: [0.0; 3],
            sum_joint: vec![0.0; joints.len()],
            sum_pa: 0.0,
            pa: with_pa,
        }
    }

    pub fn add(&mut self, est: &[Vec3], gt: &[Vec3]) -> Result<()> {
        check(est, gt)?;
        if est.len() != self.joints.len() {
            return Err(Error::LengthMismatch {
                left: est.len(),
                right: self.joints.len(),
            });
        }
        let pa = if self.pa { Some(pa_mpjpe(est, gt)?) } else { None };
        let n = est.len() as f64;
        for (k, (e, g)) in est.iter().zip(gt).enumerate() {
            let diff = e - g;
            let err = diff.norm();
            self.sum_joint[k] += err;
            self.sum_error += err / n;
            for a in 0..3 {
                self.sum_axis[a] += diff[a].abs() / n;
            }
        }
        if let Some(pa) = pa {
            self.sum_pa += pa;
        }
        self.n_poses += 1;
        Ok(())
    }

    pub fn finish(&self) -> Result<PoseMetricReport> {
        if self.n_poses == 0 {
            return Err(Error::EmptyInput("no poses evaluated"));
        }
        let n = self.n_poses as f64;
        let mut groups: BTreeMap<String, (f64, usize)> = BTreeMap::new();
        for (j, s) in self.joints.iter().zip(&self.sum_joint) {
            let e = groups.entry(j.group_name().to_string()).or_default();
            e.0 += s / n;
            e.1 += 1;
        }
        Ok(PoseMetricReport {
            n_poses: self.n_poses,
            mpjpe: self.sum_error / n,
            per_axis: self.sum_axis.map(|s| s / n),
            per_joint: groups.into_iter().map(|(k, (s, c))| (k, s / c as f64)).collect(),
            pa_mpjpe: self.pa.then(|| self.sum_pa / n),
        })
    }
}

/// Single-pose report.
pub fn pose_report(joints: &[Joint], est: &[Vec3], gt: &[Vec3], with_pa: bool) -> Result<PoseMetricReport> {
    let mut acc = PoseErrorAccumulator::new(joints, with_pa);
    acc.add(est, gt)?;
    acc.finish()
}

impl PoseMetricReport {
    /// One header row and one value row: per-joint groups, then X, Y, Z, then the averages.
    pub fn to_csv(&self) -> String {
        let mut header = String::new();
        let mut row = String::new();
        for (name, v) in &self.per_joint {
            write!(header, "{name},").unwrap();
            write!(row, "{v},").unwrap();
        }
        header.push_str("x,y,z(depth),mpjpe");
        write!(
            row,
            "{},{},{},{}",
            self.per_axis[0], self.per_axis[1], self.per_axis[2], self.mpjpe
        )
        .unwrap();
        if let Some(pa) = self.pa_mpjpe {
            header.push_str(",pa_mpjpe");
            write!(row, ",{pa}").unwrap();
        }
        format!("{header}\n{row}\n")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Rotation3;

    fn sample_pose() -> Vec<Vec3> {
        (0..16)
            .map(|i| {
                let f = i as f64;
                Vec3::new((f * 0.7).sin(), (f * 1.3).cos(), 0.1 * f)
            })
            .collect()
    }

    #[test]
    fn identical_poses() {
        let p = sample_pose();
        let r = pose_report(&Joint::LIFTER, &p, &p, true).unwrap();
        assert_eq!(r.mpjpe, 0.0);
        assert_eq!(r.per_axis, [0.0; 3]);
        assert!(r.per_joint.values().all(|v| *v == 0.0));
        assert!(r.pa_mpjpe.unwrap() < 1e-9);
    }

    #[test]
    fn single_joint_offset() {
        let gt = sample_pose();
        let mut est = gt.clone();
        est[3] += Vec3::new(3.0, 4.0, 0.0);
        assert!((mpjpe(&est, &gt).unwrap() - 5.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn per_axis_depth_only() {
        let gt = sample_pose();
        let est: Vec<Vec3> = gt.iter().map(|p| p + Vec3::new(0.0, 0.0, 2.0)).collect();
        let r = pose_report(&Joint::LIFTER, &est, &gt, false).unwrap();
        assert!(r.per_axis[0].abs() < 1e-12 && r.per_axis[1].abs() < 1e-12);
        assert!((r.per_axis[2] - 2.0).abs() < 1e-12);
        assert!(r.pa_mpjpe.is_none());
    }

    #[test]
    fn left_right_are_averaged() {
        let gt = sample_pose();
        let mut est = gt.clone();
        let ls = Joint::LIFTER.iter().position(|&j| j == Joint::LeftShoulder).unwrap();
        est[ls] += Vec3::new(0.0, 2.0, 0.0);
        let r = pose_report(&Joint::LIFTER, &est, &gt, false).unwrap();
        assert!((r.per_joint["shoulder"] - 1.0).abs() < 1e-12);
        assert_eq!(r.per_joint["nose"], 0.0);
        assert_eq!(r.per_joint.len(), 9);
    }

    #[test]
    fn similarity_copy_aligns_to_zero() {
        let gt = sample_pose();
        let rot = Rotation3::from_euler_angles(0.3, -1.1, 2.0);
        let est: Vec<Vec3> = gt.iter().map(|p| 2.5 * (rot * p) + Vec3::new(1.0, -4.0, 7.0)).collect();
        assert!(pa_mpjpe(&est, &gt).unwrap() < 1e-9);
        assert!(mpjpe(&est, &gt).unwrap() > 1.0);
    }

    #[test]
    fn reflection_is_not_allowed() {
        let gt = sample_pose();
        let est: Vec<Vec3> = gt.iter().map(|p| Vec3::new(p.x, p.y, -p.z)).collect();
        assert!(pa_mpjpe(&est, &gt).unwrap() > 1e-3);
    }

    #[test]
    fn collinear_ground_truth_rejected() {
        let gt: Vec<Vec3> = (0..5).map(|i| Vec3::new(i as f64, 2.0 * i as f64, 0.0)).collect();
        let est = sample_pose()[..5].to_vec();
        assert!(matches!(pa_mpjpe(&est, &gt), Err(Error::DegeneratePointSet(_))));
        assert!(pa_mpjpe(&est[..2], &gt[..2]).is_err());
    }

    #[test]
    fn csv_layout() {
        let p = sample_pose();
        let r = pose_report(&Joint::LIFTER, &p, &p, true).unwrap();
        let csv = r.to_csv();
        let mut lines = csv.lines();
        let header = lines.next().unwrap();
        assert!(header.ends_with("x,y,z(depth),mpjpe,pa_mpjpe"));
        assert_eq!(header.split(',').count(), lines.next().unwrap().split(',').count());
        assert!("pa".parse::<Protocol>().is_ok());
        assert!("p2".parse::<Protocol>().is_err());
    }
}
