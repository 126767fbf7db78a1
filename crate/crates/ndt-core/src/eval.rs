//! Prediction scoring and SLA monitoring.
//!
//! Accuracy is normalized mean squared error in decibels,
//! `10 * log10(sum((y - yhat)^2) / sum(y^2))`, reported both over a whole
//! stream and over non-overlapping windows of consecutive examples so that
//! accuracy can be tracked across regime changes. The SLA side gives every
//! flow a packet delay budget proportional to its path propagation delay
//! (with a floor) and counts budget violations as predicted and as measured;
//! a misclassification is a flow where the two verdicts disagree.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Window length for the time-series views of NMSE and violation counts.
pub const NMSE_WINDOW: usize = 100;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("length mismatch: {labels} labels vs {predictions} predictions")]
    LengthMismatch { labels: usize, predictions: usize },

    #[error("empty input")]
    Empty,

    #[error("labels are identically zero, NMSE is undefined")]
    AllZeroLabels,
}

/// NMSE in dB. A perfect prediction has zero numerator and no finite dB
/// value; it is reported as `f64::NEG_INFINITY` rather than flooring the
/// error, so the anomaly stays visible downstream.
pub fn nmse_db(labels: &[f64], predictions: &[f64]) -> Result<f64, EvalError> {
    if labels.len() != predictions.len() {
        return Err(EvalError::LengthMismatch {
            labels: labels.len(),
            predictions: predictions.len(),
        });
    }
    if labels.is_empty() {
        return Err(EvalError::Empty);
    }
    let num: f64 = labels
        .iter()
        .zip(predictions)
        .map(|(y, p)| (y - p) * (y - p))
        .sum();
    let den: f64 = labels.iter().map(|y| y * y).sum();
    if den == 0.0 {
        return Err(EvalError::AllZeroLabels);
    }
    if num == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(10.0 * (num / den).log10())
}

/// One entry of a windowed NMSE series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NmseWindow {
    /// Index of the first example in the window.
    pub start: usize,
    pub len: usize,
    /// True when the stream ended before the window filled.
    pub partial: bool,
    pub value_db: f64,
}

/// NMSE over consecutive non-overlapping windows. The final window may be
/// shorter than `window`; it is reported with its actual size and flagged.
pub fn windowed_nmse(
    labels: &[f64],
    predictions: &[f64],
    window: usize,
) -> Result<Vec<NmseWindow>, EvalError> {
    assert!(window >= 1, "window must be at least 1");
    if labels.len() != predictions.len() {
        return Err(EvalError::LengthMismatch {
            labels: labels.len(),
            predictions: predictions.len(),
        });
    }
    let mut out = Vec::with_capacity(labels.len().div_ceil(window));
    for (i, (y, p)) in labels
        .chunks(window)
        .zip(predictions.chunks(window))
        .enumerate()
    {
        out.push(NmseWindow {
            start: i * window,
            len: y.len(),
            partial: y.len() < window,
            value_db: nmse_db(y, p)?,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// SLA monitoring
// ---------------------------------------------------------------------------

/// Packet-delay-budget assignment rule: `pdb = max(floor_s, beta * d_prop)`,
/// where `d_prop` is the flow path's propagation delay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlaPolicy {
    pub beta: f64,
    pub floor_s: f64,
}

impl Default for SlaPolicy {
    fn default() -> Self {
        SlaPolicy { beta: 3.0, floor_s: 1e-3 }
    }
}

impl SlaPolicy {
    pub fn pdb(&self, path_prop_delay_s: f64) -> f64 {
        (self.beta * path_prop_delay_s).max(self.floor_s)
    }
}

/// Violation counts over one window of flows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViolationWindow {
    pub start: usize,
    pub len: usize,
    pub partial: bool,
    pub predicted: usize,
    pub actual: usize,
    pub misclassified: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub predicted_violations: usize,
    pub actual_violations: usize,
    /// Flows whose predicted verdict disagrees with the measured one.
    pub misclassified: usize,
    pub windows: Vec<ViolationWindow>,
}

/// Classify each flow as compliant or in violation (strictly above its
/// budget), once by the predicted delay and once by the measured one, and
/// count disagreements. Windowing follows the same rule as [`windowed_nmse`].
pub fn classify_and_report(
    labels: &[f64],
    predictions: &[f64],
    pdbs: &[f64],
    window: usize,
) -> Result<ViolationReport, EvalError> {
    assert!(window >= 1, "window must be at least 1");
    if labels.len() != predictions.len() || labels.len() != pdbs.len() {
        return Err(EvalError::LengthMismatch {
            labels: labels.len(),
            predictions: predictions.len().min(pdbs.len()),
        });
    }
    let mut report = ViolationReport {
        predicted_violations: 0,
        actual_violations: 0,
        misclassified: 0,
        windows: Vec::with_capacity(labels.len().div_ceil(window)),
    };
    for (w, start) in (0..labels.len()).step_by(window).enumerate() {
        let end = (start + window).min(labels.len());
        let mut win = ViolationWindow {
            start: w * window,
            len: end - start,
            partial: end - start < window,
            predicted: 0,
            actual: 0,
            misclassified: 0,
        };
        for t in start..end {
            let predicted = predictions[t] > pdbs[t];
            let actual = labels[t] > pdbs[t];
            win.predicted += predicted as usize;
            win.actual += actual as usize;
            win.misclassified += (predicted != actual) as usize;
        }
        report.predicted_violations += win.predicted;
        report.actual_violations += win.actual;
        report.misclassified += win.misclassified;
        report.windows.push(win);
    }
    Ok(report)
}
