//! Loss traces, convergence detection and classification scores.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ModelKind;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub global_epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub client: usize,
    pub round: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingTrace {
    pub entries: Vec<TraceEntry>,
}

impl TrainingTrace {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Shifts epochs by `offset` and stamps every entry with `round`.
    pub fn rebased(mut self, offset: usize, round: usize) -> Self {
        for e in &mut self.entries {
            e.global_epoch += offset;
            e.round = round;
        }
        self
    }

    pub fn append(&mut self, other: TrainingTrace) {
        self.entries.extend(other.entries);
    }

    pub fn for_client(&self, client: usize) -> TrainingTrace {
        TrainingTrace {
            entries: self.entries.iter().filter(|e| e.client == client).copied().collect(),
        }
    }

    pub fn last(&self) -> Option<&TraceEntry> {
        self.entries.last()
    }
}

/// Flatness window and tolerance for [`detect_convergence`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceCriterion {
    pub window: usize,
    pub flat_tol: f64,
}

impl Default for ConvergenceCriterion {
    fn default() -> Self {
        Self {
            window: 20,
            flat_tol: 1e-3,
        }
    }
}

impl ConvergenceCriterion {
    /// Defaults tuned for batch-1 SGD on min-max scaled tabular data.
    pub fn for_model(kind: ModelKind) -> Self {
        match kind {
            ModelKind::SvmHinge => Self {
                window: 50,
                flat_tol: 3e-2,
            },
            ModelKind::Logistic => Self {
                window: 20,
                flat_tol: 2e-3,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window < 2 {
            return Err(Error::InvalidMetricInput(format!(
                "window {} must be at least 2",
                self.window
            )));
        }
        if !(self.flat_tol > 0.0 && self.flat_tol.is_finite()) {
            return Err(Error::InvalidMetricInput(format!(
                "flat tolerance {} must be positive",
                self.flat_tol
            )));
        }
        Ok(())
    }

    pub fn detect(&self, trace: &TrainingTrace) -> Result<Option<usize>> {
        detect_convergence(trace, self.window, self.flat_tol)
    }
}

/// First epoch at which the validation loss has been flat over the last
/// `window` entries, or at which train and validation losses cross.
///
/// Both tests start once a full window is available, so a trace shorter than
/// `window` never converges. A crossing is a sign change of
/// `train_loss − val_loss` from the previous entry, or an exact tie.
pub fn detect_convergence(trace: &TrainingTrace, window: usize, flat_tol: f64) -> Result<Option<usize>> {
    ConvergenceCriterion { window, flat_tol }.validate()?;
    let e = &trace.entries;
    for idx in window.saturating_sub(1)..e.len() {
        let diff = e[idx].train_loss - e[idx].val_loss;
        let prev = e[idx - 1].train_loss - e[idx - 1].val_loss;
        let crossed = diff == 0.0 || (diff > 0.0) != (prev > 0.0) && prev != 0.0;
        let (lo, hi) = e[idx + 1 - window..=idx]
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), t| {
                (lo.min(t.val_loss), hi.max(t.val_loss))
            });
        if crossed || hi - lo <= flat_tol {
            return Ok(Some(e[idx].global_epoch));
        }
    }
    Ok(None)
}

fn check_lengths(predictions: &[i64], truth: &[i64]) -> Result<()> {
    if predictions.len() != truth.len() {
        return Err(Error::InvalidMetricInput(format!(
            "{} predictions for {} labels",
            predictions.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::InvalidMetricInput("no labels".into()));
    }
    Ok(())
}

fn one_vs_rest_f1(predictions: &[i64], truth: &[i64], class: i64) -> (f64, bool) {
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&p, &t) in predictions.iter().zip(truth) {
        match (p == class, t == class) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            _ => {}
        }
    }
    let present = tp + fp + fn_ > 0;
    if tp == 0 {
        return (0.0, present);
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fn_) as f64;
    (2.0 * precision * recall / (precision + recall), present)
}

/// F1 of the positive class (label 1); 0 when precision + recall is 0.
pub fn f1_binary(predictions: &[i64], truth: &[i64]) -> Result<f64> {
    check_lengths(predictions, truth)?;
    if let Some(bad) = predictions.iter().chain(truth).find(|&&l| l != 0 && l != 1) {
        return Err(Error::InvalidMetricInput(format!("label {bad} is not binary")));
    }
    Ok(one_vs_rest_f1(predictions, truth, 1).0)
}

/// Unweighted mean of one-vs-rest F1 over classes seen in either list.
pub fn f1_macro(predictions: &[i64], truth: &[i64], n_classes: usize) -> Result<f64> {
    check_lengths(predictions, truth)?;
    if let Some(bad) = predictions
        .iter()
        .chain(truth)
        .find(|&&l| l < 0 || l as usize >= n_classes)
    {
        return Err(Error::InvalidMetricInput(format!("label {bad} outside 0..{n_classes}")));
    }
    let scores: Vec<f64> = (0..n_classes as i64)
        .filter_map(|c| match one_vs_rest_f1(predictions, truth, c) {
            (f, true) => Some(f),
            (_, false) => None,
        })
        .collect();
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

pub fn accuracy(predictions: &[i64], truth: &[i64]) -> Result<f64> {
    check_lengths(predictions, truth)?;
    let hits = predictions.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / truth.len() as f64)
}

/// One convergence cell: the epoch, or `NC`.
pub fn convergence_cell(epoch: Option<usize>) -> String {
    epoch.map_or_else(|| "NC".to_string(), |e| e.to_string())
}

/// Long-form convergence rows `(deployment, client, epoch_or_NC)`.
pub fn convergence_rows(deployment: &str, epochs: &[Option<usize>]) -> Vec<[String; 3]> {
    epochs
        .iter()
        .enumerate()
        .map(|(k, e)| [deployment.to_string(), k.to_string(), convergence_cell(*e)])
        .collect()
}
