//! Experiment tables: sigma sweeps and train/test dataset matrices for the orientation head.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hboe::{train_hboe, DecodeRule, HboeSample, TinyModel, TrainConfig};
use crate::metrics::{evaluate, threshold_key, MetricReport, DEFAULT_THRESHOLDS};

/// Target widths compared in the sigma ablation.
pub const SIGMA_GRID: [f64; 6] = [1.0, 2.0, 3.0, 4.0, 6.0, 8.0];

fn train_and_evaluate(
    train: &[HboeSample],
    test: &[HboeSample],
    cfg: &TrainConfig,
    rule: DecodeRule,
) -> Result<MetricReport> {
    let input_dim = train.first().ok_or(Error::EmptyInput("training set"))?.features.len();
    let model = TinyModel::for_config(input_dim, cfg)?;
    let trained = train_hboe(train, model, cfg)?.model;
    let preds: Vec<f64> = test.iter().map(|s| trained.predict_angle(&s.features, rule)).collect();
    let gts: Vec<f64> = test.iter().map(|s| s.label.theta_deg()).collect();
    evaluate(&preds, &gts, &DEFAULT_THRESHOLDS)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaRow {
    pub sigma: f64,
    pub report: MetricReport,
}

/// Trains one model per sigma with otherwise identical settings.
pub fn sigma_sweep(
    train: &[HboeSample],
    test: &[HboeSample],
    base: &TrainConfig,
    sigmas: &[f64],
    rule: DecodeRule,
) -> Result<Vec<SigmaRow>> {
    sigmas
        .iter()
        .map(|&sigma| {
            let cfg = TrainConfig { sigma, ..base.clone() };
            Ok(SigmaRow {
                sigma,
                report: train_and_evaluate(train, test, &cfg, rule)?,
            })
        })
        .collect()
}

fn metric_header(out: &mut String, report: &MetricReport) {
    out.push_str("n,mae_deg");
    for a in &report.accuracies {
        write!(out, ",acc_{}", threshold_key(a.threshold_deg)).unwrap();
    }
    out.push('\n');
}

fn metric_cells(out: &mut String, report: &MetricReport) {
    write!(out, "{},{}", report.n, report.mae_deg).unwrap();
    for a in &report.accuracies {
        write!(out, ",{}", a.accuracy_pct).unwrap();
    }
    out.push('\n');
}

pub fn sigma_csv(rows: &[SigmaRow]) -> String {
    let mut out = String::from("sigma,");
    match rows.first() {
        Some(r) => metric_header(&mut out, &r.report),
        None => out.push_str("n,mae_deg\n"),
    }
    for r in rows {
        write!(out, "{},", r.sigma).unwrap();
        metric_cells(&mut out, &r.report);
    }
    out
}

/// A named dataset with its own train and test portions.
#[derive(Debug, Clone)]
pub struct NamedDataset {
    pub name: String,
    pub train: Vec<HboeSample>,
    pub test: Vec<HboeSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixCell {
    pub train: String,
    pub test: String,
    pub report: MetricReport,
}

/// Trains on every dataset and evaluates on every test portion.
pub fn cross_dataset_matrix(datasets: &[NamedDataset], cfg: &TrainConfig, rule: DecodeRule) -> Result<Vec<MatrixCell>> {
    let mut cells = Vec::with_capacity(datasets.len() * datasets.len());
    for source in datasets {
        let input_dim = source
            .train
            .first()
            .ok_or(Error::EmptyInput("training set"))?
            .features
            .len();
        let model = train_hboe(&source.train, TinyModel::for_config(input_dim, cfg)?, cfg)?.model;
        for target in datasets {
            let preds: Vec<f64> = target
                .test
                .iter()
                .map(|s| model.predict_angle(&s.features, rule))
                .collect();
            let gts: Vec<f64> = target.test.iter().map(|s| s.label.theta_deg()).collect();
            cells.push(MatrixCell {
                train: source.name.clone(),
                test: target.name.clone(),
                report: evaluate(&preds, &gts, &DEFAULT_THRESHOLDS)?,
            });
        }
    }
    Ok(cells)
}

pub fn matrix_csv(cells: &[MatrixCell]) -> String {
    let mut out = String::from("train,test,");
    match cells.first() {
        Some(c) => metric_header(&mut out, &c.report),
        None => out.push_str("n,mae_deg\n"),
    }
    for c in cells {
        write!(out, "{},{},", c.train, c.test).unwrap();
        metric_cells(&mut out, &c.report);
    }
    out
}
