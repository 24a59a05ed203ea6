use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use bodyorient_core::checkpoint::Checkpoint;
use bodyorient_core::dataset::{read_keypoints, read_poses, Keypoints2D};
use bodyorient_core::lifter::{
    compare_orientation_weight, evaluate_lifter, lifter_benchmark, train_lifter, Lifter, LifterBenchmarkSpec,
    LifterConfig, LifterData, LifterSample, CHECKPOINT_KIND,
};
use bodyorient_core::pose_metrics::Protocol;
use bodyorient_core::LossWeights;

use super::{load_manifest, named_out, require_file, write_json, write_text};
use crate::args::{EvalPoseArgs, TrainLifterArgs};
use crate::Invalid;

/// Samples from a 3-D pose file; the network input is the orthographic projection.
fn pose3d_samples(path: &Path) -> Result<Vec<LifterSample>> {
    require_file(path)?;
    let poses = read_poses(path).with_context(|| format!("reading poses {}", path.display()))?;
    poses
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let s = p.skeleton();
            LifterSample::from_pose3d(&Keypoints2D::project(&s), &s)
                .with_context(|| format!("{}: record {}", path.display(), i + 1))
        })
        .collect()
}

fn file_data(a: &TrainLifterArgs) -> Result<(LifterData, Vec<LifterSample>)> {
    let Some(h36m) = &a.h36m_like else {
        return Err(Invalid("--h36m-like (or --benchmark) is required: training needs some 3-D poses".into()).into());
    };
    let mut data = LifterData {
        pose3d: pose3d_samples(h36m)?,
        ..LifterData::default()
    };
    if let Some(kp_path) = &a.pose2d {
        require_file(kp_path)?;
        let keypoints = read_keypoints(kp_path)?;
        let thetas: HashMap<(String, String), f64> = match &a.orient {
            Some(p) => load_manifest(p)?
                .records()
                .iter()
                .map(|r| ((r.image_ref.clone(), r.instance_id.clone()), r.orientation.theta_deg()))
                .collect(),
            None => HashMap::new(),
        };
        let mut matched = 0;
        for k in &keypoints {
            let theta = thetas.get(&(k.image_ref.clone(), k.instance_id.clone())).copied();
            let sample = LifterSample::from_pose2d(&k.joints, theta)?;
            if theta.is_some() {
                matched += 1;
                data.orientation.push(sample);
            } else {
                data.pose2d.push(sample);
            }
        }
        if matched < thetas.len() {
            return Err(Invalid(format!(
                "{} orientation labels have no keypoints in {}",
                thetas.len() - matched,
                kp_path.display()
            ))
            .into());
        }
    }
    let test = match &a.test {
        Some(p) => pose3d_samples(p)?,
        None => Vec::new(),
    };
    Ok((data, test))
}

pub fn train(a: &TrainLifterArgs) -> Result<()> {
    let cfg = LifterConfig {
        lr: a.lr,
        epochs: a.epochs,
        batch_size: a.batch_size,
        hidden: a.hidden,
        volume: a.volume,
        weights: LossWeights {
            lambda_2d: a.lambda_2d,
            lambda_3d: a.lambda_3d,
            lambda_ori: a.lambda_ori,
        },
        seed: a.common.seed,
        ..LifterConfig::default()
    };
    cfg.validate()?;
    let (data, test) = if a.benchmark {
        lifter_benchmark(&LifterBenchmarkSpec {
            n_train: a.n_train,
            n_test: a.n_test,
            pose3d_theta: a.pose3d_theta,
            seed: a.common.seed,
            ..LifterBenchmarkSpec::default()
        })?
    } else {
        file_data(a)?
    };
    println!(
        "training on {} samples: {} with 3-D poses, {} 2-D only, {} with orientation",
        data.len(),
        data.pose3d.len(),
        data.pose2d.len(),
        data.orientation.len()
    );

    if a.compare {
        if test.is_empty() {
            return Err(Invalid("--compare needs evaluation poses (--test or --benchmark)".into()).into());
        }
        let cmp = compare_orientation_weight(&data, &test, &cfg)?;
        write_json(&named_out(&a.common, "train-lifter", "compare.json"), &cmp)?;
        let mut csv = String::from("lambda_ori,");
        let header = cmp.baseline.to_csv();
        let (cols, _) = header.split_once('\n').unwrap_or((&header, ""));
        writeln!(csv, "{cols}").unwrap();
        for (lambda, r) in [(0.0, &cmp.baseline), (cmp.lambda_ori, &cmp.with_orientation)] {
            let body = r.to_csv();
            writeln!(csv, "{lambda},{}", body.lines().nth(1).unwrap_or("")).unwrap();
        }
        write_text(&named_out(&a.common, "train-lifter", "compare.csv"), &csv)?;
        println!(
            "depth (z) error {:.5} -> {:.5} ({:+.1}%), MPJPE {:.5} -> {:.5} ({:+.1}%)",
            cmp.baseline.per_axis[2],
            cmp.with_orientation.per_axis[2],
            100.0 * cmp.depth_change(),
            cmp.baseline.mpjpe,
            cmp.with_orientation.mpjpe,
            100.0 * cmp.mpjpe_change()
        );
        return Ok(());
    }

    let outcome = train_lifter(&data, &cfg)?;
    let ckpt_path = a
        .out
        .clone()
        .unwrap_or_else(|| named_out(&a.common, "lifter", "ckpt.json"));
    outcome.model.to_checkpoint(&cfg).save(&ckpt_path)?;
    let mut trace = String::from("epoch,mean_loss,degenerate\n");
    for e in &outcome.trace {
        writeln!(trace, "{},{},{}", e.epoch, e.mean_loss, e.degenerate).unwrap();
    }
    write_text(&named_out(&a.common, "train-lifter", "trace.csv"), &trace)?;
    println!("checkpoint {}", ckpt_path.display());
    if !test.is_empty() {
        let report = evaluate_lifter(&outcome.model, &test, true)?;
        write_text(&named_out(&a.common, "train-lifter", "pose.csv"), &report.to_csv())?;
        println!(
            "held-out MPJPE {:.5}, depth error {:.5}",
            report.mpjpe, report.per_axis[2]
        );
    }
    Ok(())
}

pub fn eval(a: &EvalPoseArgs) -> Result<()> {
    require_file(&a.ckpt)?;
    let ckpt: Checkpoint<LifterConfig> =
        Checkpoint::load(&a.ckpt, CHECKPOINT_KIND).with_context(|| format!("loading {}", a.ckpt.display()))?;
    let model = Lifter::from_checkpoint(&ckpt)?;
    let samples = pose3d_samples(&a.gt)?;
    if samples.is_empty() {
        return Err(Invalid(format!("{} holds no poses", a.gt.display())).into());
    }
    let with_pa = Protocol::from(a.protocol) == Protocol::Pa;
    let report = evaluate_lifter(&model, &samples, with_pa)?;
    write_json(&named_out(&a.common, "eval-pose", "metrics.json"), &report)?;
    write_text(&named_out(&a.common, "eval-pose", "pose.csv"), &report.to_csv())?;
    match report.pa_mpjpe {
        Some(pa) => println!("n = {}\nmpjpe = {}\npa_mpjpe = {pa}", report.n_poses, report.mpjpe),
        None => println!("n = {}\nmpjpe = {}", report.n_poses, report.mpjpe),
    }
    Ok(())
}
