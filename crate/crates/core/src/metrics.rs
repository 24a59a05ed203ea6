//! Orientation evaluation: MAE, Accuracy-X, cumulative curves and quadrant breakdowns.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::bins::{angular_error, Quadrant};
use crate::error::{Error, Result};

/// Thresholds reported by default, in degrees.
pub const DEFAULT_THRESHOLDS: [f64; 5] = [5.0, 15.0, 22.5, 30.0, 45.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdAccuracy {
    pub threshold_deg: f64,
    pub accuracy_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub n: usize,
    pub mae_deg: f64,
    /// Sorted by threshold.
    pub accuracies: Vec<ThresholdAccuracy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrants: Option<BTreeMap<Quadrant, MetricReport>>,
    /// Accuracy at every whole degree from 0 to 180.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve: Option<Vec<ThresholdAccuracy>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub thresholds: Vec<f64>,
    pub curve: bool,
    pub quadrants: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            thresholds: DEFAULT_THRESHOLDS.to_vec(),
            curve: false,
            quadrants: false,
        }
    }
}

/// MAE and Accuracy-X over paired predictions and ground truths (degrees).
pub fn evaluate(preds: &[f64], gts: &[f64], thresholds: &[f64]) -> Result<MetricReport> {
    evaluate_with(
        preds,
        gts,
        &EvalOptions {
            thresholds: thresholds.to_vec(),
            ..EvalOptions::default()
        },
    )
}

pub fn evaluate_with(preds: &[f64], gts: &[f64], opts: &EvalOptions) -> Result<MetricReport> {
    if preds.len() != gts.len() {
        return Err(Error::LengthMismatch {
            left: preds.len(),
            right: gts.len(),
        });
    }
    if preds.is_empty() {
        return Err(Error::EmptyInput("no predictions to evaluate"));
    }
    if let Some(bad) = preds.iter().chain(gts).find(|a| !a.is_finite()) {
        return Err(Error::InvalidAngle(*bad));
    }
    let errors: Vec<f64> = preds.iter().zip(gts).map(|(&p, &g)| angular_error(p, g)).collect();
    let mut report = report_from_errors(errors, &opts.thresholds, opts.curve);

    if opts.quadrants {
        let mut groups: BTreeMap<Quadrant, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
        for (&p, &g) in preds.iter().zip(gts) {
            let entry = groups.entry(Quadrant::of(g)).or_default();
            entry.0.push(p);
            entry.1.push(g);
        }
        let sub_opts = EvalOptions {
            quadrants: false,
            ..opts.clone()
        };
        let mut quadrants = BTreeMap::new();
        for (q, (p, g)) in groups {
            quadrants.insert(q, evaluate_with(&p, &g, &sub_opts)?);
        }
        report.quadrants = Some(quadrants);
    }
    Ok(report)
}

fn report_from_errors(mut errors: Vec<f64>, thresholds: &[f64], curve: bool) -> MetricReport {
    // Summing in sorted order makes the result independent of input order.
    errors.sort_by(f64::total_cmp);
    let n = errors.len();
    let mae_deg = errors.iter().sum::<f64>() / n as f64;
    let accuracy = |x: f64| {
        let hits = errors.partition_point(|&e| e <= x);
        100.0 * hits as f64 / n as f64
    };
    let mut sorted = thresholds.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let accuracies = sorted
        .into_iter()
        .map(|t| ThresholdAccuracy {
            threshold_deg: t,
            accuracy_pct: accuracy(t),
        })
        .collect();
    let curve = curve.then(|| {
        (0..=180)
            .map(|t| ThresholdAccuracy {
                threshold_deg: t as f64,
                accuracy_pct: accuracy(t as f64),
            })
            .collect()
    });
    MetricReport {
        n,
        mae_deg,
        accuracies,
        quadrants: None,
        curve,
    }
}

pub(crate) fn threshold_key(t: f64) -> String {
    let s = format!("{t}");
    s.replace('.', "_")
}

impl MetricReport {
    pub fn accuracy_at(&self, threshold_deg: f64) -> Option<f64> {
        self.accuracies
            .iter()
            .find(|a| a.threshold_deg == threshold_deg)
            .map(|a| a.accuracy_pct)
    }

    /// Flat `key = value` text block.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "n = {}", self.n).unwrap();
        writeln!(out, "mae_deg = {}", self.mae_deg).unwrap();
        for a in &self.accuracies {
            writeln!(out, "acc_{} = {}", threshold_key(a.threshold_deg), a.accuracy_pct).unwrap();
        }
        if let Some(qs) = &self.quadrants {
            for (q, r) in qs {
                let prefix = q.name().to_lowercase();
                writeln!(out, "{prefix}.n = {}", r.n).unwrap();
                writeln!(out, "{prefix}.mae_deg = {}", r.mae_deg).unwrap();
                for a in &r.accuracies {
                    writeln!(
                        out,
                        "{prefix}.acc_{} = {}",
                        threshold_key(a.threshold_deg),
                        a.accuracy_pct
                    )
                    .unwrap();
                }
            }
        }
        out
    }

    /// One row per threshold: `threshold,accuracy`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,accuracy\n");
        for a in &self.accuracies {
            writeln!(out, "{},{}", a.threshold_deg, a.accuracy_pct).unwrap();
        }
        out
    }

    /// Cumulative accuracy curve as `threshold,accuracy`, if it was computed.
    pub fn curve_csv(&self) -> Option<String> {
        self.curve.as_ref().map(|curve| {
            let mut out = String::from("threshold,accuracy\n");
            for a in curve {
                writeln!(out, "{},{}", a.threshold_deg, a.accuracy_pct).unwrap();
            }
            out
        })
    }

    /// Quadrant breakdown as `quadrant,n,mae_deg,acc_*` rows, if it was computed.
    pub fn quadrant_csv(&self) -> Option<String> {
        let qs = self.quadrants.as_ref()?;
        let mut out = String::from("quadrant,n,mae_deg");
        for a in &self.accuracies {
            write!(out, ",acc_{}", threshold_key(a.threshold_deg)).unwrap();
        }
        out.push('\n');
        for q in Quadrant::ALL {
            let Some(r) = qs.get(&q) else {
                writeln!(out, "{q},0,,").unwrap();
                continue;
            };
            write!(out, "{q},{},{}", r.n, r.mae_deg).unwrap();
            for a in &r.accuracies {
                write!(out, ",{}", a.accuracy_pct).unwrap();
            }
            out.push('\n');
        }
        Some(out)
    }
}
