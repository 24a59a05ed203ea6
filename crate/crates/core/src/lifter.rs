//! Toy 2-D to 3-D lifter trained with integral regression.
//!
//! A dense network maps normalized 2-D keypoints to one logit volume per joint. Soft-argmax
//! turns each volume into a coordinate, and the 3-D, 2-D and orientation losses are applied
//! to those coordinates. Samples come from up to three sources (full 3-D poses, 2-D poses,
//! 2-D poses with an orientation label) and every batch draws equally from the non-empty ones.
//!
//! Poses are root-relative (hip midpoint) and measured in units of the projected torso
//! length, so 2-D inputs, 2-D targets and 3-D targets share one scale.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::dataset::poses::Keypoints2D;
use crate::dataset::synth::{generate_synthetic, SyntheticSpec, ThetaDistribution};
use crate::error::{Error, Result};
use crate::geometry::{Skeleton3D, Vec3};
use crate::integral::{expectation, soft_argmax_backward_logits, volume_softmax, VolumeDims};
use crate::joints::Joint;
use crate::nn::{Activation, Mlp};
use crate::optim::{Adam, AdamConfig};
use crate::pose_loss::{total_loss, LossWeights, PoseEstimate, PoseTargets, SupervisionSource};
use crate::pose_metrics::{PoseErrorAccumulator, PoseMetricReport};

pub const CHECKPOINT_KIND: &str = "lifter";

/// Heatmap cells per torso length.
const VOLUME_SCALE: f64 = 1.75;
/// Shift along x so the head (about 1.7 torso lengths above the hips) fits in the volume.
const X_SHIFT: f64 = 0.35;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifterConfig {
    pub lr: f64,
    pub epochs: usize,
    /// Samples per step, split evenly across the non-empty sources.
    pub batch_size: usize,
    pub hidden: usize,
    /// Edge length of the cubic heatmap volume.
    pub volume: usize,
    pub weights: LossWeights,
    pub seed: u64,
    #[serde(default)]
    pub activation: Activation,
}

impl Default for LifterConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            epochs: 60,
            batch_size: 32,
            hidden: 64,
            volume: 8,
            weights: LossWeights::default(),
            seed: 0,
            activation: Activation::Tanh,
        }
    }
}

impl LifterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be >= 0, got {}",
                self.lr
            )));
        }
        if self.epochs == 0 || self.batch_size == 0 || self.hidden == 0 {
            return Err(Error::InvalidArgument(
                "epochs, batch size and hidden width must be >= 1".into(),
            ));
        }
        if self.volume < 2 {
            return Err(Error::InvalidArgument("volume edge must be >= 2".into()));
        }
        self.weights.validate()
    }
}

/// Maps normalized pose coordinates to 1-based heatmap coordinates and back.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordMap {
    center: Vec3,
}

impl CoordMap {
    pub fn new(dims: VolumeDims) -> Self {
        Self { center: dims.center() }
    }

    pub fn to_volume(&self, p: &Vec3) -> Vec3 {
        self.center + VOLUME_SCALE * (p + Vec3::new(X_SHIFT, 0.0, 0.0))
    }

    pub fn to_pose(&self, v: &Vec3) -> Vec3 {
        (v - self.center) / VOLUME_SCALE - Vec3::new(X_SHIFT, 0.0, 0.0)
    }
}

fn torso_frame_2d(points: impl Fn(Joint) -> Result<[f64; 2]>) -> Result<([f64; 2], f64)> {
    let ls = points(Joint::LeftShoulder)?;
    let rs = points(Joint::RightShoulder)?;
    let lh = points(Joint::LeftHip)?;
    let rh = points(Joint::RightHip)?;
    let root = [(lh[0] + rh[0]) / 2.0, (lh[1] + rh[1]) / 2.0];
    let top = [(ls[0] + rs[0]) / 2.0, (ls[1] + rs[1]) / 2.0];
    let unit = (top[0] - root[0]).hypot(top[1] - root[1]);
    if !(unit > 1e-9) {
        return Err(Error::InvalidArgument("projected torso length is zero".into()));
    }
    Ok((root, unit))
}

/// Normalized 2-D pose of the lifter joints, `(x, y)` per joint.
pub fn normalize_keypoints(kp: &Keypoints2D) -> Result<Vec<[f64; 2]>> {
    let (root, unit) = torso_frame_2d(|j| kp.required(j))?;
    Joint::LIFTER
        .iter()
        .map(|&j| {
            let p = kp.required(j)?;
            Ok([(p[0] - root[0]) / unit, (p[1] - root[1]) / unit])
        })
        .collect()
}

/// Normalized 3-D pose of the lifter joints: hip-midpoint relative, in projected torso lengths.
pub fn normalize_skeleton(s: &Skeleton3D) -> Result<Vec<Vec3>> {
    let (_, unit) = torso_frame_2d(|j| s.required(j).map(|p| [p.x, p.y]))?;
    let root = (s.required(Joint::LeftHip)? + s.required(Joint::RightHip)?) / 2.0;
    Joint::LIFTER
        .iter()
        .map(|&j| Ok((s.required(j)? - root) / unit))
        .collect()
}

fn flatten(points: &[[f64; 2]]) -> Vec<f64> {
    points.iter().flat_map(|p| p.iter().copied()).collect()
}

/// A training or evaluation example. Targets are normalized pose coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct LifterSample {
    pub input: Vec<f64>,
    pub pose3d: Option<Vec<Vec3>>,
    pub pose2d: Option<Vec<[f64; 2]>>,
    pub theta_deg: Option<f64>,
}

impl LifterSample {
    /// Sample supervised by a full 3-D pose.
    pub fn from_pose3d(kp: &Keypoints2D, skeleton: &Skeleton3D) -> Result<Self> {
        Ok(Self {
            input: flatten(&normalize_keypoints(kp)?),
            pose3d: Some(normalize_skeleton(skeleton)?),
            pose2d: None,
            theta_deg: None,
        })
    }

    /// Sample supervised by its 2-D pose and optionally a body orientation.
    pub fn from_pose2d(kp: &Keypoints2D, theta_deg: Option<f64>) -> Result<Self> {
        let pose2d = normalize_keypoints(kp)?;
        Ok(Self {
            input: flatten(&pose2d),
            pose3d: None,
            pose2d: Some(pose2d),
            theta_deg,
        })
    }

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

    fn targets(&self, map: &CoordMap) -> PoseTargets {
        PoseTargets {
            pose3d: self
                .pose3d
                .as_ref()
                .map(|p| p.iter().map(|v| map.to_volume(v)).collect()),
            pose2d: self.pose2d.as_ref().map(|p| {
                p.iter()
                    .map(|q| {
                        let v = map.to_volume(&Vec3::new(q[0], q[1], 0.0));
                        [v.x, v.y]
                    })
                    .collect()
            }),
            theta_deg: self.theta_deg,
        }
    }
}

/// Samples grouped by supervision source.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LifterData {
    pub pose3d: Vec<LifterSample>,
    pub pose2d: Vec<LifterSample>,
    pub orientation: Vec<LifterSample>,
}

impl LifterData {
    fn sources(&self) -> Vec<&[LifterSample]> {
        [&self.pose3d, &self.pose2d, &self.orientation]
            .into_iter()
            .filter(|s| !s.is_empty())
            .map(|s| s.as_slice())
            .collect()
    }

    pub fn len(&self) -> usize {
        self.pose3d.len() + self.pose2d.len() + self.orientation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lifter {
    net: Mlp,
    dims: VolumeDims,
    seed: u64,
}

impl Lifter {
    pub fn new(cfg: &LifterConfig) -> Result<Self> {
        cfg.validate()?;
        let dims = VolumeDims::cube(cfg.volume)?;
        let sizes = [2 * Joint::LIFTER.len(), cfg.hidden, Joint::LIFTER.len() * dims.len()];
        Ok(Self {
            net: Mlp::new(&sizes, cfg.activation, cfg.seed)?,
            dims,
            seed: cfg.seed,
        })
    }

    pub fn network(&self) -> &Mlp {
        &self.net
    }

    pub fn dims(&self) -> VolumeDims {
        self.dims
    }

    fn volumes(&self, logits: &[f64]) -> Vec<Vec<f64>> {
        logits.chunks_exact(self.dims.len()).map(volume_softmax).collect()
    }

    /// Joint estimates in heatmap coordinates.
    pub fn estimate(&self, input: &[f64]) -> Result<PoseEstimate> {
        self.check_input(input)?;
        let vols = self.volumes(&self.net.forward(input));
        let positions = vols.iter().map(|v| expectation(self.dims, v)).collect();
        PoseEstimate::new(Joint::LIFTER.to_vec(), positions)
    }

    /// Normalized 3-D pose for a normalized 2-D input.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<Vec3>> {
        let map = CoordMap::new(self.dims);
        Ok(self.estimate(input)?.positions.iter().map(|v| map.to_pose(v)).collect())
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.net.input_dim() {
            return Err(Error::InvalidArgument(format!(
                "lifter expects {} inputs, got {}",
                self.net.input_dim(),
                input.len()
            )));
        }
        Ok(())
    }

    pub fn to_checkpoint(&self, cfg: &LifterConfig) -> Checkpoint<LifterConfig> {
        Checkpoint::new(CHECKPOINT_KIND, &self.net, self.seed, cfg.clone())
    }

    pub fn from_checkpoint(ckpt: &Checkpoint<LifterConfig>) -> Result<Self> {
        let net = ckpt.network()?;
        let dims = VolumeDims::cube(ckpt.config.volume)?;
        if net.output_dim() != Joint::LIFTER.len() * dims.len() || net.input_dim() != 2 * Joint::LIFTER.len() {
            return Err(Error::Checkpoint(
                "network shape does not match the lifter layout".into(),
            ));
        }
        Ok(Self {
            net,
            dims,
            seed: ckpt.seed,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifterEpoch {
    pub epoch: usize,
    pub mean_loss: f64,
    /// Orientation terms masked because the estimated torso was degenerate.
    pub degenerate: usize,
}

#[derive(Debug, Clone)]
pub struct LifterOutcome {
    pub model: Lifter,
    pub trace: Vec<LifterEpoch>,
}

/// Trains a fresh lifter. The 3-D source must be non-empty.
pub fn train_lifter(data: &LifterData, cfg: &LifterConfig) -> Result<LifterOutcome> {
    cfg.validate()?;
    if data.pose3d.is_empty() {
        return Err(Error::EmptyInput("3-D pose source"));
    }
    let mut model = Lifter::new(cfg)?;
    let sources = data.sources();
    for s in sources.iter().flat_map(|s| s.iter()) {
        model.check_input(&s.input)?;
    }
    let map = CoordMap::new(model.dims);
    let per_source = (cfg.batch_size / sources.len()).max(1);
    let steps = sources.iter().map(|s| s.len().div_ceil(per_source)).max().unwrap_or(1);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut orders: Vec<Vec<usize>> = sources.iter().map(|s| (0..s.len()).collect()).collect();
    let mut cursors = vec![0usize; sources.len()];
    let mut adam = Adam::new(
        model.net.num_params(),
        AdamConfig {
            lr: cfg.lr,
            ..AdamConfig::default()
        },
    );
    let mut grad = vec![0.0; model.net.num_params()];
    let mut grad_logits = vec![0.0; model.net.output_dim()];
    let mut trace = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        for o in &mut orders {
            o.shuffle(&mut rng);
        }
        cursors.iter_mut().for_each(|c| *c = 0);
        let (mut epoch_loss, mut degenerate) = (0.0, 0);
        for step in 0..steps {
            let mut picked = Vec::with_capacity(per_source * sources.len());
            for (k, src) in sources.iter().enumerate() {
                for _ in 0..per_source {
                    if cursors[k] == src.len() {
                        orders[k].shuffle(&mut rng);
                        cursors[k] = 0;
                    }
                    picked.push(&src[orders[k][cursors[k]]]);
                    cursors[k] += 1;
                }
            }
            let mut caches = Vec::with_capacity(picked.len());
            let mut batch = Vec::with_capacity(picked.len());
            for s in &picked {
                let cache = model.net.forward_cached(&s.input);
                let vols = model.volumes(cache.output());
                let positions = vols.iter().map(|v| expectation(model.dims, v)).collect();
                batch.push((PoseEstimate::new(Joint::LIFTER.to_vec(), positions)?, s.targets(&map)));
                caches.push((cache, vols));
            }
            let loss = total_loss(&batch, &cfg.weights)?;
            if !loss.value.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, step });
            }
            epoch_loss += loss.value;
            degenerate += loss.degenerate;
            grad.iter_mut().for_each(|g| *g = 0.0);
            for ((cache, vols), joint_grads) in caches.iter().zip(&loss.grads) {
                for ((out, vol), g) in grad_logits
                    .chunks_exact_mut(model.dims.len())
                    .zip(vols)
                    .zip(joint_grads)
                {
                    soft_argmax_backward_logits(model.dims, vol, g, out);
                }
                model.net.backward(cache, &grad_logits, &mut grad);
            }
            adam.step(model.net.params_mut(), &grad);
        }
        trace.push(LifterEpoch {
            epoch,
            mean_loss: epoch_loss / steps as f64,
            degenerate,
        });
    }
    Ok(LifterOutcome { model, trace })
}

/// Pose metrics of `model` on samples that carry a 3-D pose.
pub fn evaluate_lifter(model: &Lifter, samples: &[LifterSample], with_pa: bool) -> Result<PoseMetricReport> {
    let mut acc = PoseErrorAccumulator::new(&Joint::LIFTER, with_pa);
    for s in samples {
        let gt = s
            .pose3d
            .as_ref()
            .ok_or(Error::EmptyInput("evaluation sample without a 3-D pose"))?;
        acc.add(&model.predict(&s.input)?, gt)?;
    }
    acc.finish()
}

/// Baseline (no orientation loss) against the configured orientation weight on the same data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifterComparison {
    pub lambda_ori: f64,
    pub baseline: PoseMetricReport,
    pub with_orientation: PoseMetricReport,
}

impl LifterComparison {
    /// Relative change of depth error, negative when orientation supervision helps.
    pub fn depth_change(&self) -> f64 {
        self.with_orientation.per_axis[2] / self.baseline.per_axis[2] - 1.0
    }

    pub fn mpjpe_change(&self) -> f64 {
        self.with_orientation.mpjpe / self.baseline.mpjpe - 1.0
    }
}

pub fn compare_orientation_weight(
    train: &LifterData,
    test: &[LifterSample],
    cfg: &LifterConfig,
) -> Result<LifterComparison> {
    let baseline_cfg = LifterConfig {
        weights: LossWeights {
            lambda_ori: 0.0,
            ..cfg.weights
        },
        ..cfg.clone()
    };
    let baseline = train_lifter(train, &baseline_cfg)?;
    let ours = train_lifter(train, cfg)?;
    Ok(LifterComparison {
        lambda_ori: cfg.weights.lambda_ori,
        baseline: evaluate_lifter(&baseline.model, test, false)?,
        with_orientation: evaluate_lifter(&ours.model, test, false)?,
    })
}

/// Synthetic benchmark in which only half of the training samples carry depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifterBenchmarkSpec {
    /// Training instances; half get a 3-D pose, half only 2-D keypoints and an orientation.
    pub n_train: usize,
    pub n_test: usize,
    /// Orientations covered by the 3-D half.
    pub pose3d_theta: ThetaDistribution,
    pub noise: f64,
    pub seed: u64,
}

impl Default for LifterBenchmarkSpec {
    fn default() -> Self {
        Self {
            n_train: 1000,
            n_test: 500,
            pose3d_theta: ThetaDistribution::Range { lo: 350.0, hi: 10.0 },
            noise: 0.01,
            seed: 0,
        }
    }
}

/// Builds `(train, test)` for the depth-withheld benchmark. The test set covers all
/// orientations and carries 3-D poses.
pub fn lifter_benchmark(spec: &LifterBenchmarkSpec) -> Result<(LifterData, Vec<LifterSample>)> {
    let half = spec.n_train / 2;
    let make = |n: usize, theta: ThetaDistribution, seed: u64| {
        generate_synthetic(&SyntheticSpec {
            n_instances: n,
            theta,
            noise: spec.noise,
            seed,
            ..SyntheticSpec::default()
        })
    };
    let with_depth = make(half.max(1), spec.pose3d_theta, spec.seed)?;
    let without_depth = make(
        (spec.n_train - half).max(1),
        ThetaDistribution::Uniform,
        spec.seed.wrapping_add(1),
    )?;
    let test = make(
        spec.n_test.max(1),
        ThetaDistribution::Uniform,
        spec.seed.wrapping_add(2),
    )?;

    let mut data = LifterData::default();
    for i in &with_depth.instances {
        data.pose3d.push(LifterSample::from_pose3d(&i.keypoints, &i.skeleton)?);
    }
    for i in &without_depth.instances {
        data.orientation.push(LifterSample::from_pose2d(
            &i.keypoints,
            Some(i.label.orientation.theta_deg()),
        )?);
    }
    let test = test
        .instances
        .iter()
        .map(|i| LifterSample::from_pose3d(&i.keypoints, &i.skeleton))
        .collect::<Result<Vec<_>>>()?;
    Ok((data, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::synth::canonical_skeleton;
    use crate::geometry::orientation_from_skeleton;

    fn small_cfg() -> LifterConfig {
        LifterConfig {
            epochs: 3,
            batch_size: 8,
            hidden: 16,
            volume: 4,
            ..LifterConfig::default()
        }
    }

    #[test]
    fn coord_map_round_trip() {
        let map = CoordMap::new(VolumeDims::cube(8).unwrap());
        let p = Vec3::new(-1.2, 0.4, -0.7);
        assert!((map.to_pose(&map.to_volume(&p)) - p).norm() < 1e-12);
    }

    #[test]
    fn normalization_preserves_orientation() {
        let s = canonical_skeleton(130.0);
        let n = normalize_skeleton(&s).unwrap();
        let named = Skeleton3D::from_joints(Joint::LIFTER.iter().zip(&n).map(|(j, p)| (j.name(), *p)));
        let theta = orientation_from_skeleton(&named).unwrap().theta_deg();
        assert!((theta - 130.0).abs() < 1e-9);
        let hips = (named.joint(Joint::LeftHip).unwrap() + named.joint(Joint::RightHip).unwrap()) / 2.0;
        assert!(hips.norm() < 1e-12);
    }

    #[test]
    fn requires_3d_source() {
        let (mut data, _) = lifter_benchmark(&LifterBenchmarkSpec {
            n_train: 20,
            n_test: 4,
            ..Default::default()
        })
        .unwrap();
        data.pose3d.clear();
        assert!(matches!(train_lifter(&data, &small_cfg()), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn deterministic_per_seed() {
        let (data, test) = lifter_benchmark(&LifterBenchmarkSpec {
            n_train: 40,
            n_test: 8,
            ..Default::default()
        })
        .unwrap();
        let a = train_lifter(&data, &small_cfg()).unwrap();
        let b = train_lifter(&data, &small_cfg()).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(
            evaluate_lifter(&a.model, &test, true).unwrap(),
            evaluate_lifter(&b.model, &test, true).unwrap()
        );
    }

    #[test]
    fn checkpoint_round_trip() {
        let cfg = small_cfg();
        let model = Lifter::new(&cfg).unwrap();
        let back = Lifter::from_checkpoint(&model.to_checkpoint(&cfg)).unwrap();
        assert_eq!(model, back);
    }
}
