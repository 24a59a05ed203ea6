use std::path::PathBuf;

use bodyorient_core::dataset::ThetaDistribution;
use bodyorient_core::hboe::HboeObjective;
use bodyorient_core::pose_metrics::Protocol;
use bodyorient_core::DecodeRule;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "bodyorient", version, about = "Body orientation estimation toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Generate a synthetic skeleton dataset with labels, 3-D poses and 2-D keypoints.
    Synth(SynthArgs),
    /// Train the 72-bin orientation model on keypoint features.
    TrainHboe(TrainHboeArgs),
    /// Evaluate an orientation checkpoint or a predictions file against labels.
    EvalHboe(EvalHboeArgs),
    /// Train the heatmap-volume pose lifter from 3-D, 2-D and orientation supervision.
    TrainLifter(TrainLifterArgs),
    /// Evaluate a lifter checkpoint on 3-D poses.
    EvalPose(EvalPoseArgs),
    /// Convert a 3-D pose file into orientation labels.
    Convert(ConvertArgs),
    /// Orientation and instance-resolution histograms of a label file.
    Stats(StatsArgs),
    /// Run the labelling service.
    Serve(ServeArgs),
    /// Breakdowns, accuracy curves, sigma sweeps and cross-dataset matrices.
    Report(ReportArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::TrainHboe(_) => "train-hboe",
            Command::EvalHboe(_) => "eval-hboe",
            Command::TrainLifter(_) => "train-lifter",
            Command::EvalPose(_) => "eval-pose",
            Command::Convert(_) => "convert",
            Command::Stats(_) => "stats",
            Command::Serve(_) => "serve",
            Command::Report(_) => "report",
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            Command::Synth(a) => &a.common,
            Command::TrainHboe(a) => &a.common,
            Command::EvalHboe(a) => &a.common,
            Command::TrainLifter(a) => &a.common,
            Command::EvalPose(a) => &a.common,
            Command::Convert(a) => &a.common,
            Command::Stats(a) => &a.common,
            Command::Serve(a) => &a.common,
            Command::Report(a) => &a.common,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct Common {
    /// Directory for every file the command writes.
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecodeArg {
    Argmax,
    Cmean,
}

impl From<DecodeArg> for DecodeRule {
    fn from(d: DecodeArg) -> Self {
        match d {
            DecodeArg::Argmax => DecodeRule::Argmax,
            DecodeArg::Cmean => DecodeRule::CircularMean,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveArg {
    CircularGaussian,
    CrossEntropy,
}

impl From<ObjectiveArg> for HboeObjective {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::CircularGaussian => HboeObjective::CircularGaussian,
            ObjectiveArg::CrossEntropy => HboeObjective::CrossEntropy,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolArg {
    Mpjpe,
    Pa,
}

impl From<ProtocolArg> for Protocol {
    fn from(p: ProtocolArg) -> Self {
        match p {
            ProtocolArg::Mpjpe => Protocol::Mpjpe,
            ProtocolArg::Pa => Protocol::Pa,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum SplitArg {
    Train,
    Test,
    All,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Breakdown {
    Quadrant,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: Common,
    /// Number of instances.
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Standard deviation of keypoint noise, in torso-relative skeleton units.
    #[arg(long, default_value_t = 0.02)]
    pub noise: f64,
    /// Relative bone-length jitter.
    #[arg(long, default_value_t = 0.1)]
    pub limb_jitter: f64,
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    /// `uniform`, `peaked-front` or `LO:HI` in degrees.
    #[arg(long, default_value = "uniform", value_parser = parse_theta)]
    pub theta: ThetaDistribution,
}

fn parse_theta(s: &str) -> Result<ThetaDistribution, String> {
    s.parse().map_err(|e: bodyorient_core::Error| e.to_string())
}

#[derive(Debug, Args, Serialize)]
pub struct HboeData {
    /// Label manifest (JSON lines).
    #[arg(long)]
    pub data: PathBuf,
    /// 2-D keypoints; defaults to `keypoints2d.jsonl` next to the manifest.
    #[arg(long)]
    pub keypoints: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct HboeTraining {
    #[arg(long, default_value_t = 4.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 80)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 128)]
    pub hidden: usize,
    #[arg(long, value_enum, default_value_t = ObjectiveArg::CircularGaussian)]
    pub objective: ObjectiveArg,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainHboeArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: HboeData,
    #[command(flatten)]
    pub training: HboeTraining,
    #[arg(long, value_enum, default_value_t = DecodeArg::Argmax)]
    pub decode: DecodeArg,
    /// Checkpoint path; defaults to `<out-dir>/hboe-seed<N>.ckpt.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write `<out-dir>/checkpoints/epoch<E>.ckpt.json` every this many epochs.
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalHboeArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: HboeData,
    /// Orientation checkpoint; mutually exclusive with `--predictions`.
    #[arg(long, conflicts_with = "predictions", required_unless_present = "predictions")]
    pub ckpt: Option<PathBuf>,
    /// JSON lines with `image_ref`, `instance_id` and `theta_deg`.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = DecodeArg::Argmax)]
    pub decode: DecodeArg,
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    pub split: SplitArg,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainLifterArgs {
    #[command(flatten)]
    pub common: Common,
    /// 3-D poses; the network input is their orthographic projection.
    #[arg(long)]
    pub h36m_like: Option<PathBuf>,
    /// 2-D keypoints without depth.
    #[arg(long)]
    pub pose2d: Option<PathBuf>,
    /// Orientation labels for instances in `--pose2d`.
    #[arg(long, requires = "pose2d")]
    pub orient: Option<PathBuf>,
    /// 3-D poses held out for evaluation.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Use the built-in synthetic benchmark instead of files.
    #[arg(long, conflicts_with_all = ["h36m_like", "pose2d", "orient", "test"])]
    pub benchmark: bool,
    #[arg(long, default_value_t = 1000)]
    pub n_train: usize,
    #[arg(long, default_value_t = 500)]
    pub n_test: usize,
    /// Orientation range of the depth-supervised half of the benchmark.
    #[arg(long, default_value = "350:10", value_parser = parse_theta)]
    pub pose3d_theta: ThetaDistribution,
    /// Train a second model with the orientation loss switched off and compare.
    #[arg(long)]
    pub compare: bool,
    #[arg(long, default_value_t = 0.1)]
    pub lambda_ori: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda_2d: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda_3d: f64,
    #[arg(long, default_value_t = 60)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 64)]
    pub hidden: usize,
    /// Edge length of the cubic heatmap volume.
    #[arg(long, default_value_t = 8)]
    pub volume: usize,
    /// Checkpoint path; defaults to `<out-dir>/lifter-seed<N>.ckpt.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalPoseArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Ground-truth 3-D poses.
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long, value_enum, default_value_t = ProtocolArg::Mpjpe)]
    pub protocol: ProtocolArg,
}

#[derive(Debug, Args, Serialize)]
pub struct ConvertArgs {
    #[command(flatten)]
    pub common: Common,
    /// 3-D pose file (JSON lines or flat `name x y z` lines).
    #[arg(long)]
    pub poses: PathBuf,
    /// Optional 2-D keypoints used to derive instance boxes.
    #[arg(long)]
    pub keypoints: Option<PathBuf>,
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct StatsArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub data: PathBuf,
    /// Width of one resolution bucket in pixels.
    #[arg(long, default_value_t = 32.0)]
    pub resolution_bin: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct ServeArgs {
    #[command(flatten)]
    pub common: Common,
    /// Manifest listing the instances to label.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub images: PathBuf,
    /// Crop directory; defaults to `<images>/crops`.
    #[arg(long)]
    pub crops: Option<PathBuf>,
    /// Label store; defaults to `<out-dir>/labels.human.jsonl`.
    #[arg(long)]
    pub store: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value_t = 900)]
    pub session_ttl_secs: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    #[command(flatten)]
    pub common: Common,
    /// Label manifest; repeat for `--matrix`.
    #[arg(long, required = true)]
    pub data: Vec<PathBuf>,
    /// Keypoints for a single `--data`; defaults to `keypoints2d.jsonl` next to each manifest.
    #[arg(long)]
    pub keypoints: Option<PathBuf>,
    /// Predictions to analyse (JSON lines with `image_ref`, `instance_id`, `theta_deg`).
    #[arg(long, conflicts_with = "ckpt")]
    pub predictions: Option<PathBuf>,
    /// Orientation checkpoint to run instead of reading predictions.
    #[arg(long)]
    pub ckpt: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub breakdown: Option<Breakdown>,
    /// Cumulative accuracy at every whole degree from 0 to 180.
    #[arg(long)]
    pub curve: bool,
    /// Train one model per sigma and tabulate the results.
    #[arg(long)]
    pub sigma_sweep: bool,
    #[arg(long, value_delimiter = ',', default_values_t = bodyorient_core::report::SIGMA_GRID.to_vec())]
    pub sigmas: Vec<f64>,
    /// Train on each manifest and test on every manifest.
    #[arg(long)]
    pub matrix: bool,
    #[command(flatten)]
    pub training: HboeTraining,
    #[arg(long, value_enum, default_value_t = DecodeArg::Argmax)]
    pub decode: DecodeArg,
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    pub split: SplitArg,
}
