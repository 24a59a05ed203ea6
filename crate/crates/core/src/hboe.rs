//! The 72-way orientation head: softmax output, circular-Gaussian regression loss,
//! decoding, and a small trainable model.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bins::{argmax, target_distribution, GaussianTargetParams};
use crate::checkpoint::Checkpoint;
use crate::dataset::{keypoint_features, KeypointIndex, LabelRecord};
use crate::error::{Error, Result};
use crate::geometry::{wrap_degrees, OrientationLabel, BIN_WIDTH_DEG, NUM_BINS};
use crate::nn::{Activation, Mlp};
use crate::optim::{Adam, AdamConfig};

pub const CHECKPOINT_KIND: &str = "hboe";

/// Floor applied to `p[l_gt]` inside the cross-entropy loss.
pub const CE_EPS: f64 = 1e-12;

/// A probability distribution over the 72 orientation bins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbDist72([f64; NUM_BINS]);

impl ProbDist72 {
    pub fn new(p: [f64; NUM_BINS]) -> Result<Self> {
        let sum: f64 = p.iter().sum();
        if p.iter().any(|v| !(*v >= 0.0)) || (sum - 1.0).abs() >= 1e-6 {
            return Err(Error::InvalidArgument(format!(
                "not a probability distribution (sum = {sum})"
            )));
        }
        Ok(Self(p))
    }

    pub fn uniform() -> Self {
        Self([1.0 / NUM_BINS as f64; NUM_BINS])
    }

    pub fn one_hot(bin: usize) -> Result<Self> {
        if bin >= NUM_BINS {
            return Err(Error::BinOutOfRange(bin as i64));
        }
        let mut p = [0.0; NUM_BINS];
        p[bin] = 1.0;
        Ok(Self(p))
    }

    pub fn values(&self) -> &[f64; NUM_BINS] {
        &self.0
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64; NUM_BINS]) -> ProbDist72 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p = [0.0; NUM_BINS];
    let mut sum = 0.0;
    for (pi, &z) in p.iter_mut().zip(logits) {
        *pi = (z - max).exp();
        sum += *pi;
    }
    p.iter_mut().for_each(|v| *v /= sum);
    ProbDist72(p)
}

fn check_bin(bin: usize) -> Result<()> {
    if bin < NUM_BINS {
        Ok(())
    } else {
        Err(Error::BinOutOfRange(bin as i64))
    }
}

/// Sum of squared differences between `p` and the circular Gaussian centred on `l_gt`.
pub fn hboe_loss(p: &ProbDist72, l_gt: usize, sigma: f64) -> Result<f64> {
    let target = target_distribution(l_gt, GaussianTargetParams::new(sigma)?)?;
    Ok(p.0
        .iter()
        .zip(&target.values)
        .map(|(pi, ti)| (pi - ti) * (pi - ti))
        .sum())
}

/// Loss and its gradient with respect to the pre-softmax logits.
pub fn hboe_loss_grad(logits: &[f64; NUM_BINS], l_gt: usize, sigma: f64) -> Result<(f64, [f64; NUM_BINS])> {
    let target = target_distribution(l_gt, GaussianTargetParams::new(sigma)?)?;
    let p = softmax(logits);
    let mut dl_dp = [0.0; NUM_BINS];
    let mut loss = 0.0;
    for ((d, pi), ti) in dl_dp.iter_mut().zip(&p.0).zip(&target.values) {
        let diff = pi - ti;
        loss += diff * diff;
        *d = 2.0 * diff;
    }
    Ok((loss, softmax_backward(&p, &dl_dp)))
}

/// Pulls `d loss / d p` back through the softmax.
fn softmax_backward(p: &ProbDist72, dl_dp: &[f64; NUM_BINS]) -> [f64; NUM_BINS] {
    let dot: f64 = p.0.iter().zip(dl_dp).map(|(a, b)| a * b).sum();
    let mut out = [0.0; NUM_BINS];
    for i in 0..NUM_BINS {
        out[i] = p.0[i] * (dl_dp[i] - dot);
    }
    out
}

/// Cross-entropy against a one-hot target. `clamped` is set when `p[l_gt]` had to be floored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossEntropy {
    pub loss: f64,
    pub clamped: bool,
}

pub fn cross_entropy_loss(p: &ProbDist72, l_gt: usize) -> Result<CrossEntropy> {
    check_bin(l_gt)?;
    let q = p.0[l_gt];
    Ok(CrossEntropy {
        loss: -q.max(CE_EPS).ln(),
        clamped: q < CE_EPS,
    })
}

/// Cross-entropy and its gradient with respect to the logits (`p - onehot`).
pub fn cross_entropy_grad(logits: &[f64; NUM_BINS], l_gt: usize) -> Result<(f64, [f64; NUM_BINS])> {
    check_bin(l_gt)?;
    let p = softmax(logits);
    let loss = cross_entropy_loss(&p, l_gt)?.loss;
    let mut g = p.0;
    g[l_gt] -= 1.0;
    Ok((loss, g))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DecodeRule {
    /// Centre of the most probable bin.
    #[default]
    Argmax,
    /// Probability-weighted circular mean of the bin centres.
    #[serde(rename = "cmean")]
    CircularMean,
}

impl std::str::FromStr for DecodeRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "argmax" => Ok(DecodeRule::Argmax),
            "cmean" => Ok(DecodeRule::CircularMean),
            other => Err(Error::InvalidArgument(format!(
                "unknown decode rule `{other}` (expected argmax or cmean)"
            ))),
        }
    }
}

/// Continuous angle in degrees from a bin distribution.
pub fn decode(p: &ProbDist72, rule: DecodeRule) -> f64 {
    match rule {
        DecodeRule::Argmax => argmax(&p.0) as f64 * BIN_WIDTH_DEG,
        DecodeRule::CircularMean => {
            let (mut s, mut c) = (0.0, 0.0);
            for (i, &pi) in p.0.iter().enumerate() {
                let a = (i as f64 * BIN_WIDTH_DEG).to_radians();
                s += pi * a.sin();
                c += pi * a.cos();
            }
            wrap_degrees(s.atan2(c).to_degrees())
        }
    }
}

/// Which objective drives training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HboeObjective {
    #[default]
    CircularGaussian,
    CrossEntropy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub sigma: f64,
    pub seed: u64,
    pub hidden: usize,
    #[serde(default)]
    pub activation: Activation,
    #[serde(default)]
    pub objective: HboeObjective,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            epochs: 80,
            batch_size: 32,
            sigma: 4.0,
            seed: 0,
            hidden: 128,
            activation: Activation::Tanh,
            objective: HboeObjective::CircularGaussian,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be >= 0, got {}",
                self.lr
            )));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be >= 1".into()));
        }
        GaussianTargetParams::new(self.sigma)?;
        Ok(())
    }
}

/// One training example: an engineered feature vector and its orientation.
#[derive(Debug, Clone, PartialEq)]
pub struct HboeSample {
    pub features: Vec<f64>,
    pub label: OrientationLabel,
}

impl HboeSample {
    /// Pairs each label with the keypoint features of the same instance.
    pub fn from_labels<'a, I>(labels: I, keypoints: &KeypointIndex) -> Result<Vec<Self>>
    where
        I: IntoIterator<Item = &'a LabelRecord>,
    {
        labels
            .into_iter()
            .map(|r| {
                let kp = keypoints
                    .get(&(r.image_ref.clone(), r.instance_id.clone()))
                    .ok_or_else(|| {
                        Error::InvalidArgument(format!(
                            "no keypoints for instance ({}, {})",
                            r.image_ref, r.instance_id
                        ))
                    })?;
                Ok(Self {
                    features: keypoint_features(kp)?,
                    label: r.orientation,
                })
            })
            .collect()
    }
}

/// Dense `input -> hidden -> 72` network followed by a softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct TinyModel {
    net: Mlp,
    seed: u64,
}

impl TinyModel {
    pub fn new(input_dim: usize, hidden: usize, activation: Activation, seed: u64) -> Result<Self> {
        Ok(Self {
            net: Mlp::new(&[input_dim, hidden, NUM_BINS], activation, seed)?,
            seed,
        })
    }

    pub fn for_config(input_dim: usize, cfg: &TrainConfig) -> Result<Self> {
        Self::new(input_dim, cfg.hidden, cfg.activation, cfg.seed)
    }

    pub fn from_network(net: Mlp, seed: u64) -> Result<Self> {
        if net.output_dim() != NUM_BINS {
            return Err(Error::InvalidArgument(format!(
                "orientation head must have {NUM_BINS} outputs, got {}",
                net.output_dim()
            )));
        }
        Ok(Self { net, seed })
    }

    pub fn network(&self) -> &Mlp {
        &self.net
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn input_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn logits(&self, features: &[f64]) -> [f64; NUM_BINS] {
        let out = self.net.forward(features);
        out.try_into().expect("head has 72 outputs")
    }

    pub fn predict(&self, features: &[f64]) -> ProbDist72 {
        softmax(&self.logits(features))
    }

    pub fn predict_angle(&self, features: &[f64], rule: DecodeRule) -> f64 {
        decode(&self.predict(features), rule)
    }

    pub fn to_checkpoint(&self, cfg: &TrainConfig) -> Checkpoint<TrainConfig> {
        Checkpoint::new(CHECKPOINT_KIND, &self.net, self.seed, cfg.clone())
    }

    pub fn from_checkpoint(ckpt: &Checkpoint<TrainConfig>) -> Result<Self> {
        Self::from_network(ckpt.network()?, ckpt.seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: TinyModel,
    pub trace: Vec<EpochStats>,
}

pub fn train_hboe(dataset: &[HboeSample], model: TinyModel, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_hboe_with(dataset, model, cfg, |_, _, _| Ok(()))
}

/// Trains with a per-epoch hook, e.g. for writing checkpoints.
pub fn train_hboe_with<F>(
    dataset: &[HboeSample],
    mut model: TinyModel,
    cfg: &TrainConfig,
    mut on_epoch: F,
) -> Result<TrainOutcome>
where
    F: FnMut(usize, &TinyModel, f64) -> Result<()>,
{
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyInput("orientation training set"));
    }
    if let Some(bad) = dataset.iter().find(|s| s.features.len() != model.input_dim()) {
        return Err(Error::InvalidArgument(format!(
            "feature length {} does not match model input {}",
            bad.features.len(),
            model.input_dim()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(
        model.net.num_params(),
        AdamConfig {
            lr: cfg.lr,
            ..AdamConfig::default()
        },
    );
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut grad = vec![0.0; model.net.num_params()];
    let mut trace = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (step, batch) in order.chunks(cfg.batch_size).enumerate() {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / batch.len() as f64;
            for &idx in batch {
                let sample = &dataset[idx];
                let cache = model.net.forward_cached(&sample.features);
                let logits: &[f64; NUM_BINS] = cache.output().try_into().unwrap();
                let (loss, mut g) = match cfg.objective {
                    HboeObjective::CircularGaussian => hboe_loss_grad(logits, sample.label.bin(), cfg.sigma)?,
                    HboeObjective::CrossEntropy => cross_entropy_grad(logits, sample.label.bin())?,
                };
                if !loss.is_finite() {
                    return Err(Error::NonFiniteLoss { epoch, step });
                }
                epoch_loss += loss;
                g.iter_mut().for_each(|v| *v *= scale);
                model.net.backward(&cache, &g, &mut grad);
            }
            adam.step(model.net.params_mut(), &grad);
        }
        let mean_loss = epoch_loss / dataset.len() as f64;
        on_epoch(epoch, &model, mean_loss)?;
        trace.push(EpochStats { epoch, mean_loss });
    }
    Ok(TrainOutcome { model, trace })
}
