//! Confusion counts and the derived attack metrics.
//!
//! A metric whose denominator is zero is reported as `0.0` and flagged via
//! [`MetricsRow::degenerate`].

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        ConfusionCounts { tp, fp, tn, fn_ }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub iteration: u64,
    pub success_rate: f64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub fpr: f64,
    pub f1: f64,
    /// True when any metric hit a 0/0 and was set to 0.
    pub degenerate: bool,
}

fn ratio(num: u64, den: u64, degenerate: &mut bool) -> f64 {
    if den == 0 {
        *degenerate = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn compute_metrics(c: &ConfusionCounts, iteration: u64) -> Result<MetricsRow> {
    if c.total() == 0 {
        return Err(Error::EmptyInput("confusion counts are all zero"));
    }
    let mut degenerate = false;
    let recall = ratio(c.tp, c.tp + c.fn_, &mut degenerate);
    let precision = ratio(c.tp, c.tp + c.fp, &mut degenerate);
    let fpr = ratio(c.fp, c.fp + c.tn, &mut degenerate);
    let accuracy = (c.tp + c.tn) as f64 / c.total() as f64;
    let f1 = if precision + recall == 0.0 {
        degenerate = true;
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(MetricsRow {
        iteration,
        success_rate: recall,
        accuracy,
        precision,
        recall,
        fpr,
        f1,
        degenerate,
    })
}

/// Counts from predicted and true member sets over a universe of ids.
pub fn confusion_from_predictions(predicted: &[u64], truth: &[u64], all: &[u64]) -> Result<ConfusionCounts> {
    let universe: HashSet<u64> = all.iter().copied().collect();
    let predicted: HashSet<u64> = predicted.iter().copied().collect();
    let truth: HashSet<u64> = truth.iter().copied().collect();
    if let Some(id) = predicted.iter().chain(&truth).find(|id| !universe.contains(id)) {
        return Err(Error::IndexOutOfRange(format!("id {id} is not in the candidate universe")));
    }
    let tp = predicted.intersection(&truth).count() as u64;
    let fp = predicted.len() as u64 - tp;
    let fn_ = truth.len() as u64 - tp;
    let tn = universe.len() as u64 - tp - fp - fn_;
    Ok(ConfusionCounts { tp, fp, tn, fn_ })
}
