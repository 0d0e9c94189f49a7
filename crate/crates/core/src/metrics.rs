//! Rank correlation and error metrics for score predictions.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::PredictionRow;

/// A metric value together with a flag marking inputs on which the metric is
/// undefined. Degenerate values are reported as 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub value: f64,
    pub degenerate: bool,
}

impl MetricValue {
    fn ok(value: f64) -> Self {
        Self {
            value,
            degenerate: false,
        }
    }

    fn degenerate() -> Self {
        Self {
            value: 0.0,
            degenerate: true,
        }
    }
}

fn check_pair(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::dim(
            "metric",
            format!("{} predictions vs {} labels", a.len(), b.len()),
        ));
    }
    if let Some(x) = a.iter().chain(b).find(|x| !x.is_finite()) {
        return Err(Error::contract(format!(
            "metric input contains non-finite value {x}"
        )));
    }
    Ok(())
}

/// 1-based ranks, ties sharing the average of the positions they occupy.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn pearson_raw(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    (saa > 0.0 && sbb > 0.0).then(|| (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

pub fn pearson(a: &[f64], b: &[f64]) -> Result<MetricValue> {
    check_pair(a, b)?;
    if a.len() < 2 {
        return Ok(MetricValue::degenerate());
    }
    Ok(pearson_raw(a, b).map_or_else(MetricValue::degenerate, MetricValue::ok))
}

/// Spearman correlation: Pearson correlation of the average ranks.
pub fn spearman(pred: &[f64], truth: &[f64]) -> Result<MetricValue> {
    check_pair(pred, truth)?;
    if pred.len() < 2 {
        return Ok(MetricValue::degenerate());
    }
    let (rp, rt) = (average_ranks(pred), average_ranks(truth));
    Ok(pearson_raw(&rp, &rt).map_or_else(MetricValue::degenerate, MetricValue::ok))
}

fn nonempty(pred: &[f64], truth: &[f64]) -> Result<()> {
    check_pair(pred, truth)?;
    if pred.is_empty() {
        return Err(Error::contract("metric of an empty prediction set"));
    }
    Ok(())
}

pub fn mae(pred: &[f64], truth: &[f64]) -> Result<f64> {
    nonempty(pred, truth)?;
    Ok(pred
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t).abs())
        .sum::<f64>()
        / pred.len() as f64)
}

pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    nonempty(pred, truth)?;
    Ok((pred
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / pred.len() as f64)
        .sqrt())
}

/// Coefficient of determination `1 − SS_res / SS_tot`.
pub fn r2(pred: &[f64], truth: &[f64]) -> Result<MetricValue> {
    nonempty(pred, truth)?;
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let ss_tot: f64 = truth.iter().map(|t| (t - mean) * (t - mean)).sum();
    if ss_tot == 0.0 {
        return Ok(MetricValue::degenerate());
    }
    let ss_res: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(MetricValue::ok(1.0 - ss_res / ss_tot))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub scc: MetricValue,
    pub mae: f64,
    pub rmse: f64,
    pub r2: MetricValue,
}

impl EvalReport {
    pub fn from_predictions(pred: &[f64], truth: &[f64]) -> Result<Self> {
        Ok(Self {
            n: pred.len(),
            scc: spearman(pred, truth)?,
            mae: mae(pred, truth)?,
            rmse: rmse(pred, truth)?,
            r2: r2(pred, truth)?,
        })
    }

    /// Scores every row that carries a ground-truth label.
    pub fn from_rows(rows: &[PredictionRow]) -> Result<Self> {
        let (pred, truth): (Vec<f64>, Vec<f64>) = rows
            .iter()
            .filter_map(|r| r.true_label.map(|t| (r.prediction, t)))
            .unzip();
        Self::from_predictions(&pred, &truth)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("report serializes");
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Per-video predictions as tab-separated text; per-exemplar reconstructions
/// follow in columns `recon_0 … recon_{M−1}`.
pub fn write_prediction_rows(rows: &[PredictionRow], path: &Path) -> Result<()> {
    let m = rows.iter().map(|r| r.per_exemplar.len()).max().unwrap_or(0);
    let mut out = String::from("id\ttrue_label\tprediction");
    for k in 0..m {
        out.push_str(&format!("\trecon_{k}"));
    }
    out.push('\n');
    for r in rows {
        let label = r.true_label.map_or(String::new(), |t| t.to_string());
        out.push_str(&format!("{}\t{}\t{}", r.id, label, r.prediction));
        for k in 0..m {
            out.push('\t');
            if let Some(v) = r.per_exemplar.get(k) {
                out.push_str(&v.to_string());
            }
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
