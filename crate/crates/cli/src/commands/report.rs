use std::path::Path;

use anyhow::Result;
use bodyorient_core::dataset::Split;
use bodyorient_core::hboe::HboeSample;
use bodyorient_core::metrics::{evaluate_with, EvalOptions};
use bodyorient_core::report::{cross_dataset_matrix, matrix_csv, sigma_csv, sigma_sweep, NamedDataset};

use super::hboe::{load_model, predict_records, train_config};
use super::{
    load_keypoints, load_manifest, named_out, nonempty, pair_predictions, read_predictions, select, write_text,
};
use crate::args::{Breakdown, ReportArgs};
use crate::Invalid;

fn dataset_name(path: &Path) -> String {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("data");
    match path.parent().and_then(|p| p.file_name()).and_then(|s| s.to_str()) {
        Some(dir) if stem == "labels" => dir.to_string(),
        _ => stem.to_string(),
    }
}

fn train_test(path: &Path, keypoints: Option<&Path>) -> Result<(Vec<HboeSample>, Vec<HboeSample>)> {
    let manifest = load_manifest(path)?;
    let kp = load_keypoints(path, keypoints)?;
    let train = nonempty(manifest.split(Split::Train), "training")?;
    let test = nonempty(manifest.split(Split::Test), "test")?;
    Ok((
        HboeSample::from_labels(train, &kp)?,
        HboeSample::from_labels(test, &kp)?,
    ))
}

pub fn report(a: &ReportArgs) -> Result<()> {
    let wants_eval = a.breakdown.is_some() || a.curve;
    if !(wants_eval || a.sigma_sweep || a.matrix) {
        return Err(Invalid("nothing to report: pass --breakdown, --curve, --sigma-sweep or --matrix".into()).into());
    }
    if a.data.len() > 1 && !a.matrix {
        return Err(Invalid("several --data files are only meaningful with --matrix".into()).into());
    }
    if a.data.len() > 1 && a.keypoints.is_some() {
        return Err(Invalid("--keypoints applies to a single --data file".into()).into());
    }
    let first = &a.data[0];
    let cfg = train_config(&a.training, a.common.seed);

    if wants_eval {
        let manifest = load_manifest(first)?;
        let records = nonempty(select(&manifest, a.split), "evaluation")?;
        let (preds, gts) = match (&a.predictions, &a.ckpt) {
            (Some(p), _) => pair_predictions(&records, &read_predictions(p)?)?,
            (None, Some(ckpt)) => {
                let model = load_model(ckpt)?;
                let kp = load_keypoints(first, a.keypoints.as_deref())?;
                let predictions = predict_records(&model, &records, &kp, a.decode.into())?;
                (
                    predictions.iter().map(|p| p.theta_deg).collect(),
                    records.iter().map(|r| r.orientation.theta_deg()).collect(),
                )
            }
            (None, None) => {
                return Err(Invalid("--breakdown and --curve need --predictions or --ckpt".into()).into());
            }
        };
        let report = evaluate_with(
            &preds,
            &gts,
            &EvalOptions {
                curve: a.curve,
                quadrants: a.breakdown == Some(Breakdown::Quadrant),
                ..EvalOptions::default()
            },
        )?;
        if let Some(csv) = report.quadrant_csv() {
            write_text(&named_out(&a.common, "report", "quadrant.csv"), &csv)?;
            print!("{csv}");
        }
        if let Some(csv) = report.curve_csv() {
            write_text(&named_out(&a.common, "report", "curve.csv"), &csv)?;
            println!("accuracy curve: {} points", csv.lines().count() - 1);
        }
    }

    if a.sigma_sweep {
        cfg.validate()?;
        let (train, test) = train_test(first, a.keypoints.as_deref())?;
        let rows = sigma_sweep(&train, &test, &cfg, &a.sigmas, a.decode.into())?;
        let csv = sigma_csv(&rows);
        write_text(&named_out(&a.common, "report", "sigma.csv"), &csv)?;
        print!("{csv}");
    }

    if a.matrix {
        cfg.validate()?;
        let datasets = a
            .data
            .iter()
            .map(|p| {
                let (train, test) = train_test(p, a.keypoints.as_deref())?;
                Ok(NamedDataset {
                    name: dataset_name(p),
                    train,
                    test,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let csv = matrix_csv(&cross_dataset_matrix(&datasets, &cfg, a.decode.into())?);
        write_text(&named_out(&a.common, "report", "matrix.csv"), &csv)?;
        print!("{csv}");
    }
    Ok(())
}
