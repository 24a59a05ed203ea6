//! Supervision losses for integral pose regression: full 3-D, 2-D heat vectors and
//! body orientation, plus their weighted combination.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Skeleton3D, Vec3, DEGENERATE_REL_EPS};
use crate::integral::{heat_vectors, soft_argmax, HeatmapVolume};
use crate::joints::Joint;

/// Per-joint coordinate estimates, in heatmap coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseEstimate {
    pub joints: Vec<Joint>,
    pub positions: Vec<Vec3>,
}

impl PoseEstimate {
    pub fn new(joints: Vec<Joint>, positions: Vec<Vec3>) -> Result<Self> {
        if joints.len() != positions.len() {
            return Err(Error::LengthMismatch {
                left: joints.len(),
                right: positions.len(),
            });
        }
        Ok(Self { joints, positions })
    }

    /// Soft-argmax of every joint volume.
    pub fn from_heatmaps(h: &HeatmapVolume, joints: &[Joint]) -> Result<Self> {
        if h.num_joints() != joints.len() {
            return Err(Error::LengthMismatch {
                left: h.num_joints(),
                right: joints.len(),
            });
        }
        let positions = (0..joints.len()).map(|k| soft_argmax(h, k)).collect();
        Ok(Self {
            joints: joints.to_vec(),
            positions,
        })
    }

    pub fn index_of(&self, joint: Joint) -> Result<usize> {
        self.joints
            .iter()
            .position(|&j| j == joint)
            .ok_or_else(|| Error::MissingJoint(joint.name().to_string()))
    }

    pub fn position(&self, joint: Joint) -> Result<Vec3> {
        Ok(self.positions[self.index_of(joint)?])
    }
}

/// Sum over joints of squared Euclidean error against a named ground-truth skeleton.
pub fn loss_3d(est: &PoseEstimate, gt: &Skeleton3D) -> Result<f64> {
    let targets = est.joints.iter().map(|&j| gt.required(j)).collect::<Result<Vec<_>>>()?;
    loss_3d_aligned(&est.positions, &targets)
}

/// [`loss_3d`] for position lists in matching joint order.
pub fn loss_3d_aligned(est: &[Vec3], gt: &[Vec3]) -> Result<f64> {
    check_len(est.len(), gt.len())?;
    Ok(est.iter().zip(gt).map(|(e, g)| (e - g).norm_squared()).sum())
}

/// Gradient of [`loss_3d_aligned`] with respect to each estimate.
pub fn loss_3d_grad(est: &[Vec3], gt: &[Vec3]) -> Result<Vec<Vec3>> {
    check_len(est.len(), gt.len())?;
    Ok(est.iter().zip(gt).map(|(e, g)| 2.0 * (e - g)).collect())
}

fn check_len(a: usize, b: usize) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::LengthMismatch { left: a, right: b })
    }
}

/// Squared error of the x/y heat-vector expectations against 2-D joints, summed over joints.
pub fn loss_2d(h: &HeatmapVolume, gt_2d: &[[f64; 2]]) -> Result<f64> {
    check_len(h.num_joints(), gt_2d.len())?;
    Ok((0..h.num_joints())
        .map(|k| {
            let (ex, ey) = heat_vectors(h, k);
            (ex - gt_2d[k][0]).powi(2) + (ey - gt_2d[k][1]).powi(2)
        })
        .sum())
}

/// Gradient of [`loss_2d`] with respect to every heatmap cell (treated as free variables).
pub fn loss_2d_grad_heatmap(h: &HeatmapVolume, gt_2d: &[[f64; 2]]) -> Result<Vec<Vec<f64>>> {
    check_len(h.num_joints(), gt_2d.len())?;
    let dims = h.dims();
    Ok((0..h.num_joints())
        .map(|k| {
            let (ex, ey) = heat_vectors(h, k);
            let gx = 2.0 * (ex - gt_2d[k][0]);
            let gy = 2.0 * (ey - gt_2d[k][1]);
            (0..dims.len())
                .map(|idx| {
                    let c = dims.coord(idx);
                    gx * c[0] + gy * c[1]
                })
                .collect()
        })
        .collect())
}

/// [`loss_2d`] computed from joint estimates (the heat-vector expectations equal the x/y
/// components of the soft-argmax).
pub fn loss_2d_from_estimates(est: &[Vec3], gt_2d: &[[f64; 2]]) -> Result<f64> {
    check_len(est.len(), gt_2d.len())?;
    Ok(est
        .iter()
        .zip(gt_2d)
        .map(|(e, g)| (e.x - g[0]).powi(2) + (e.y - g[1]).powi(2))
        .sum())
}

pub fn loss_2d_grad(est: &[Vec3], gt_2d: &[[f64; 2]]) -> Result<Vec<Vec3>> {
    check_len(est.len(), gt_2d.len())?;
    Ok(est
        .iter()
        .zip(gt_2d)
        .map(|(e, g)| Vec3::new(2.0 * (e.x - g[0]), 2.0 * (e.y - g[1]), 0.0))
        .collect())
}

/// Orientation loss value. Degenerate torsos yield a flagged zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientationLoss {
    pub value: f64,
    pub degenerate: bool,
}

/// Torso joints in the order used by [`orientation_loss_torso`]: ls, rs, lh, rh.
pub const TORSO_JOINTS: [Joint; 4] = [
    Joint::LeftShoulder,
    Joint::RightShoulder,
    Joint::LeftHip,
    Joint::RightHip,
];

/// `(C.z - cos θ)^2 + (C.y - sin θ)^2` with `C` the normalized chest direction of the estimate.
pub fn orientation_loss(est: &PoseEstimate, theta_gt_deg: f64) -> Result<OrientationLoss> {
    let torso = torso_of(est)?;
    Ok(orientation_loss_torso(&torso, theta_gt_deg).0)
}

fn torso_of(est: &PoseEstimate) -> Result<[Vec3; 4]> {
    Ok([
        est.position(Joint::LeftShoulder)?,
        est.position(Joint::RightShoulder)?,
        est.position(Joint::LeftHip)?,
        est.position(Joint::RightHip)?,
    ])
}

/// Orientation loss and its gradient with respect to `[ls, rs, lh, rh]`.
pub fn orientation_loss_torso(torso: &[Vec3; 4], theta_gt_deg: f64) -> (OrientationLoss, [Vec3; 4]) {
    let [ls, rs, lh, rh] = *torso;
    let s = rs - ls;
    let t = 0.5 * (lh + rh) - 0.5 * (ls + rs);
    let u = t.cross(&s);
    let norm = u.norm();
    let scale = t.norm().max(s.norm()).max(1.0);
    if !(norm > DEGENERATE_REL_EPS * scale) {
        return (
            OrientationLoss {
                value: 0.0,
                degenerate: true,
            },
            [Vec3::zeros(); 4],
        );
    }
    let c = u / norm;
    let (sin, cos) = theta_gt_deg.to_radians().sin_cos();
    let value = (c.z - cos).powi(2) + (c.y - sin).powi(2);

    let dl_dc = Vec3::new(0.0, 2.0 * (c.y - sin), 2.0 * (c.z - cos));
    let dl_du = (dl_dc - c * dl_dc.dot(&c)) / norm;
    let dl_dt = s.cross(&dl_du);
    let dl_ds = dl_du.cross(&t);
    let grads = [-dl_ds - 0.5 * dl_dt, dl_ds - 0.5 * dl_dt, 0.5 * dl_dt, 0.5 * dl_dt];
    (
        OrientationLoss {
            value,
            degenerate: false,
        },
        grads,
    )
}

/// Gradient of [`orientation_loss`] with respect to every joint of the estimate.
pub fn orientation_loss_grad(est: &PoseEstimate, theta_gt_deg: f64) -> Result<(OrientationLoss, Vec<Vec3>)> {
    let torso = torso_of(est)?;
    let (loss, g) = orientation_loss_torso(&torso, theta_gt_deg);
    let mut grads = vec![Vec3::zeros(); est.joints.len()];
    for (joint, gj) in TORSO_JOINTS.iter().zip(g) {
        grads[est.index_of(*joint)?] += gj;
    }
    Ok((loss, grads))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_2d: f64,
    pub lambda_3d: f64,
    pub lambda_ori: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_2d: 1.0,
            lambda_3d: 1.0,
            lambda_ori: 0.1,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda_2d", self.lambda_2d),
            ("lambda_3d", self.lambda_3d),
            ("lambda_ori", self.lambda_ori),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Which dataset a sample comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupervisionSource {
    Pose3d,
    Pose2d,
    Orientation,
}

/// Labels available for one sample, in heatmap coordinates and estimate joint order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PoseTargets {
    pub pose3d: Option<Vec<Vec3>>,
    pub pose2d: Option<Vec<[f64; 2]>>,
    pub theta_deg: Option<f64>,
}

impl PoseTargets {
    pub fn source(&self) -> Option<SupervisionSource> {
        if self.pose3d.is_some() {
            Some(SupervisionSource::Pose3d)
        } else if self.theta_deg.is_some() {
            Some(SupervisionSource::Orientation)
        } else if self.pose2d.is_some() {
            Some(SupervisionSource::Pose2d)
        } else {
            None
        }
    }
}

/// Batch loss with gradients with respect to every joint estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct TotalLoss {
    pub value: f64,
    pub grads: Vec<Vec<Vec3>>,
    /// Orientation terms skipped because the estimated torso was degenerate.
    pub degenerate: usize,
}

/// Per-sample weighted sum of the applicable terms, mean-reduced over the batch.
pub fn total_loss(batch: &[(PoseEstimate, PoseTargets)], weights: &LossWeights) -> Result<TotalLoss> {
    weights.validate()?;
    if batch.is_empty() {
        return Ok(TotalLoss {
            value: 0.0,
            grads: Vec::new(),
            degenerate: 0,
        });
    }
    let scale = 1.0 / batch.len() as f64;
    let mut value = 0.0;
    let mut degenerate = 0;
    let mut all_grads = Vec::with_capacity(batch.len());
    for (est, targets) in batch {
        let mut grads = vec![Vec3::zeros(); est.positions.len()];
        if let Some(gt) = &targets.pose3d {
            if weights.lambda_3d > 0.0 {
                value += scale * weights.lambda_3d * loss_3d_aligned(&est.positions, gt)?;
                for (g, d) in grads.iter_mut().zip(loss_3d_grad(&est.positions, gt)?) {
                    *g += scale * weights.lambda_3d * d;
                }
            }
        }
        if let Some(gt) = &targets.pose2d {
            if weights.lambda_2d > 0.0 {
                value += scale * weights.lambda_2d * loss_2d_from_estimates(&est.positions, gt)?;
                for (g, d) in grads.iter_mut().zip(loss_2d_grad(&est.positions, gt)?) {
                    *g += scale * weights.lambda_2d * d;
                }
            }
        }
        if let Some(theta) = targets.theta_deg {
            if weights.lambda_ori > 0.0 {
                let (loss, g) = orientation_loss_grad(est, theta)?;
                if loss.degenerate {
                    degenerate += 1;
                }
                value += scale * weights.lambda_ori * loss.value;
                for (gi, d) in grads.iter_mut().zip(g) {
                    *gi += scale * weights.lambda_ori * d;
                }
            }
        }
        all_grads.push(grads);
    }
    Ok(TotalLoss {
        value,
        grads: all_grads,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integral::VolumeDims;

    fn torso_estimate(chest: Vec3) -> PoseEstimate {
        // Build a torso whose chest direction is `chest` (assumed orthogonal to x).
        let down = Vec3::new(1.0, 0.0, 0.0);
        // C = T x S with T = down  =>  S = C x T direction.
        let s = chest.cross(&down);
        PoseEstimate::new(
            TORSO_JOINTS.to_vec(),
            vec![-0.5 * s, 0.5 * s, down - 0.3 * s, down + 0.3 * s],
        )
        .unwrap()
    }

    #[test]
    fn loss_3d_examples() {
        let est = PoseEstimate::new(
            vec![Joint::Nose, Joint::Neck],
            vec![Vec3::new(1.0, 2.0, 3.0), Vec3::new(0.0, 0.0, 0.0)],
        )
        .unwrap();
        let gt = Skeleton3D::from_joints([("nose", Vec3::new(1.0, 2.0, 3.0)), ("neck", Vec3::new(0.0, 0.0, 0.0))]);
        assert_eq!(loss_3d(&est, &gt).unwrap(), 0.0);
        let gt = Skeleton3D::from_joints([("nose", Vec3::new(4.0, 6.0, 3.0)), ("neck", Vec3::new(0.0, 0.0, 0.0))]);
        assert_eq!(loss_3d(&est, &gt).unwrap(), 25.0);
        let missing = Skeleton3D::from_joints([("nose", Vec3::zeros())]);
        assert!(matches!(loss_3d(&est, &missing), Err(Error::MissingJoint(_))));
    }

    #[test]
    fn loss_2d_examples() {
        let dims = VolumeDims::cube(6).unwrap();
        let h = HeatmapVolume::point_mass(dims, 2, [3, 5, 2]).unwrap();
        assert_eq!(loss_2d(&h, &[[3.0, 5.0], [3.0, 5.0]]).unwrap(), 0.0);
        assert_eq!(loss_2d(&h, &[[5.0, 4.0], [3.0, 5.0]]).unwrap(), 5.0);
        assert!(loss_2d(&h, &[[0.0, 0.0]]).is_err());
    }

    #[test]
    fn orientation_loss_examples() {
        for theta in [0.0f64, 37.0, 180.0, 291.0] {
            let (s, c) = theta.to_radians().sin_cos();
            let est = torso_estimate(Vec3::new(0.0, s, c));
            let l = orientation_loss(&est, theta).unwrap();
            assert!(l.value < 1e-20, "theta {theta}: {}", l.value);
            assert!(!l.degenerate);
        }
        let est = torso_estimate(Vec3::new(0.0, 1.0, 0.0));
        let l = orientation_loss(&est, 0.0).unwrap();
        assert!((l.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_torso_is_flagged_zero() {
        let est = PoseEstimate::new(TORSO_JOINTS.to_vec(), vec![Vec3::zeros(); 4]).unwrap();
        let (l, g) = orientation_loss_grad(&est, 90.0).unwrap();
        assert!(l.degenerate);
        assert_eq!(l.value, 0.0);
        assert!(g.iter().all(|v| *v == Vec3::zeros()));
    }

    #[test]
    fn total_loss_examples() {
        let est = PoseEstimate::new(
            TORSO_JOINTS.to_vec(),
            vec![
                Vec3::new(0.0, -1.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
                Vec3::new(2.0, -0.5, 0.3),
                Vec3::new(2.0, 0.5, 0.0),
            ],
        )
        .unwrap();
        let gt3: Vec<Vec3> = est.positions.iter().map(|p| p + Vec3::new(0.5, 0.0, 0.0)).collect();
        let only_3d = PoseTargets {
            pose3d: Some(gt3.clone()),
            ..Default::default()
        };
        let w = LossWeights {
            lambda_2d: 1.0,
            lambda_3d: 1.0,
            lambda_ori: 0.1,
        };
        let batch = vec![(est.clone(), only_3d.clone()), (est.clone(), only_3d.clone())];
        let t = total_loss(&batch, &w).unwrap();
        assert!((t.value - loss_3d_aligned(&est.positions, &gt3).unwrap()).abs() < 1e-12);

        let zero = LossWeights {
            lambda_2d: 0.0,
            lambda_3d: 0.0,
            lambda_ori: 0.0,
        };
        let mixed = PoseTargets {
            pose3d: None,
            pose2d: Some(vec![[0.0, 0.0]; 4]),
            theta_deg: Some(45.0),
        };
        let batch = vec![(est.clone(), only_3d.clone()), (est.clone(), mixed.clone())];
        assert_eq!(total_loss(&batch, &zero).unwrap().value, 0.0);

        let expected = 0.5
            * (loss_3d_aligned(&est.positions, &gt3).unwrap()
                + loss_2d_from_estimates(&est.positions, mixed.pose2d.as_ref().unwrap()).unwrap()
                + 0.1 * orientation_loss(&est, 45.0).unwrap().value);
        let got = total_loss(&batch, &w).unwrap().value;
        assert!((got - expected).abs() < 1e-12);
        assert_eq!(mixed.source(), Some(SupervisionSource::Orientation));
        assert_eq!(only_3d.source(), Some(SupervisionSource::Pose3d));
    }

    #[test]
    fn negative_weights_rejected() {
        let w = LossWeights {
            lambda_ori: -0.1,
            ..Default::default()
        };
        assert!(total_loss(&[], &w).is_err());
    }
}
