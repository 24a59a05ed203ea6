use std::fmt::Write as _;
use std::fs;

use anyhow::{Context, Result};
use bodyorient_core::checkpoint::Checkpoint;
use bodyorient_core::dataset::{write_jsonl, KeypointIndex, LabelRecord, Split};
use bodyorient_core::hboe::{train_hboe_with, HboeSample, TrainConfig, CHECKPOINT_KIND};
use bodyorient_core::metrics::{evaluate_with, EvalOptions};
use bodyorient_core::{DecodeRule, TinyModel};

use super::{
    load_keypoints, load_manifest, named_out, nonempty, pair_predictions, read_predictions, require_file, select,
    write_json, write_text, Prediction,
};
use crate::args::{EvalHboeArgs, HboeTraining, SplitArg, TrainHboeArgs};
use crate::Invalid;

pub(crate) fn train_config(t: &HboeTraining, seed: u64) -> TrainConfig {
    TrainConfig {
        lr: t.lr,
        epochs: t.epochs,
        batch_size: t.batch_size,
        sigma: t.sigma,
        seed,
        hidden: t.hidden,
        objective: t.objective.into(),
        ..TrainConfig::default()
    }
}

pub(crate) fn load_model(path: &std::path::Path) -> Result<TinyModel> {
    require_file(path)?;
    let ckpt: Checkpoint<TrainConfig> =
        Checkpoint::load(path, CHECKPOINT_KIND).with_context(|| format!("loading {}", path.display()))?;
    Ok(TinyModel::from_checkpoint(&ckpt)?)
}

/// Runs `model` on every record.
pub(crate) fn predict_records(
    model: &TinyModel,
    records: &[&LabelRecord],
    keypoints: &KeypointIndex,
    rule: DecodeRule,
) -> Result<Vec<Prediction>> {
    let samples = HboeSample::from_labels(records.iter().copied(), keypoints)?;
    if let Some(s) = samples.first() {
        if s.features.len() != model.input_dim() {
            return Err(Invalid(format!(
                "checkpoint expects {} features, data has {}",
                model.input_dim(),
                s.features.len()
            ))
            .into());
        }
    }
    Ok(records
        .iter()
        .zip(&samples)
        .map(|(r, s)| Prediction {
            image_ref: r.image_ref.clone(),
            instance_id: r.instance_id.clone(),
            theta_deg: model.predict_angle(&s.features, rule),
        })
        .collect())
}

fn pairs(predictions: &[Prediction], records: &[&LabelRecord]) -> (Vec<f64>, Vec<f64>) {
    let preds = predictions.iter().map(|p| p.theta_deg).collect();
    let gts = records.iter().map(|r| r.orientation.theta_deg()).collect();
    (preds, gts)
}

pub fn train(a: &TrainHboeArgs) -> Result<()> {
    let cfg = train_config(&a.training, a.common.seed);
    cfg.validate()?;
    if a.checkpoint_every == Some(0) {
        return Err(Invalid("--checkpoint-every must be >= 1".into()).into());
    }
    let manifest = load_manifest(&a.data.data)?;
    let keypoints = load_keypoints(&a.data.data, a.data.keypoints.as_deref())?;
    let train_records = nonempty(manifest.split(Split::Train), "training")?;
    let train = HboeSample::from_labels(train_records.iter().copied(), &keypoints)?;

    let model = TinyModel::for_config(train[0].features.len(), &cfg)?;
    let ckpt_dir = a.common.out_dir.join("checkpoints");
    if a.checkpoint_every.is_some() {
        fs::create_dir_all(&ckpt_dir)?;
    }
    let outcome = train_hboe_with(&train, model, &cfg, |epoch, model, _| {
        if let Some(k) = a.checkpoint_every {
            if (epoch + 1) % k == 0 {
                model
                    .to_checkpoint(&cfg)
                    .save(&ckpt_dir.join(format!("epoch{:04}.ckpt.json", epoch + 1)))?;
            }
        }
        Ok(())
    })?;

    let ckpt_path = a
        .out
        .clone()
        .unwrap_or_else(|| named_out(&a.common, "hboe", "ckpt.json"));
    outcome.model.to_checkpoint(&cfg).save(&ckpt_path)?;

    let mut trace = String::from("epoch,mean_loss\n");
    for e in &outcome.trace {
        writeln!(trace, "{},{}", e.epoch, e.mean_loss).unwrap();
    }
    write_text(&named_out(&a.common, "train-hboe", "trace.csv"), &trace)?;

    let test_records = manifest.split(Split::Test);
    println!(
        "trained on {} instances for {} epochs; final loss {:.6}; checkpoint {}",
        train.len(),
        cfg.epochs,
        outcome.trace.last().map_or(f64::NAN, |e| e.mean_loss),
        ckpt_path.display()
    );
    if !test_records.is_empty() {
        let predictions = predict_records(&outcome.model, &test_records, &keypoints, a.decode.into())?;
        let (preds, gts) = pairs(&predictions, &test_records);
        let report = evaluate_with(&preds, &gts, &EvalOptions::default())?;
        write_json(&named_out(&a.common, "train-hboe", "metrics.json"), &report)?;
        print!("held-out split:\n{}", report.to_text());
    }
    Ok(())
}

pub fn eval(a: &EvalHboeArgs) -> Result<()> {
    let manifest = load_manifest(&a.data.data)?;
    let what = match a.split {
        SplitArg::Train => "train",
        SplitArg::Test => "test",
        SplitArg::All => "full",
    };
    let records = nonempty(select(&manifest, a.split), what)?;
    let (preds, gts) = match (&a.ckpt, &a.predictions) {
        (Some(ckpt), _) => {
            let model = load_model(ckpt)?;
            let keypoints = load_keypoints(&a.data.data, a.data.keypoints.as_deref())?;
            let predictions = predict_records(&model, &records, &keypoints, a.decode.into())?;
            write_jsonl(&named_out(&a.common, "eval-hboe", "predictions.jsonl"), &predictions)?;
            pairs(&predictions, &records)
        }
        (None, Some(path)) => pair_predictions(&records, &read_predictions(path)?)?,
        (None, None) => return Err(Invalid("either --ckpt or --predictions is required".into()).into()),
    };
    let report = evaluate_with(
        &preds,
        &gts,
        &EvalOptions {
            quadrants: true,
            ..EvalOptions::default()
        },
    )?;
    write_json(&named_out(&a.common, "eval-hboe", "metrics.json"), &report)?;
    write_text(&named_out(&a.common, "eval-hboe", "accuracy.csv"), &report.to_csv())?;
    print!("{}", report.to_text());
    Ok(())
}
