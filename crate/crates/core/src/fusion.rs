//! Weighted late fusion of two classifiers.
//!
//! `prediction = softmax(w1 * x1 + w2 * x2)` over pre-softmax outputs. The
//! predicted class is the argmax of the combined logits (ties to the lowest
//! index), not of the probabilities, so rounding inside `exp` can never
//! change it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{argmax, softmax};

/// Reference weight sweep; the first model never gets less weight than the
/// second.
pub const REFERENCE_WEIGHT_GRID: [(f64, f64); 3] = [(0.7, 0.3), (0.6, 0.4), (0.5, 0.5)];

/// Best-performing pair of the reference sweep.
pub const DEFAULT_WEIGHTS: (f64, f64) = (0.6, 0.4);

#[derive(Debug, Clone, PartialEq)]
pub struct LogitVector(Vec<f64>);

impl LogitVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::DimensionMismatch("logit vector needs at least one class".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput(format!("logit {v}")));
        }
        Ok(Self(values))
    }

    pub fn class_count(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn argmax(&self) -> usize {
        argmax(&self.0).expect("non-empty")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionWeights {
    w1: f64,
    w2: f64,
}

impl FusionWeights {
    pub fn new(w1: f64, w2: f64) -> Result<Self> {
        if !(w1.is_finite() && w2.is_finite()) || w1 < 0.0 || w2 < 0.0 {
            return Err(Error::InvalidWeights(format!(
                "weights must be finite and non-negative, got ({w1}, {w2})"
            )));
        }
        if w1 + w2 <= 0.0 {
            return Err(Error::InvalidWeights("w1 and w2 are both zero".into()));
        }
        Ok(Self { w1, w2 })
    }

    pub fn w1(&self) -> f64 {
        self.w1
    }

    pub fn w2(&self) -> f64 {
        self.w2
    }

    pub fn reference_grid() -> Vec<Self> {
        REFERENCE_WEIGHT_GRID
            .iter()
            .map(|&(a, b)| Self::new(a, b).expect("valid constant"))
            .collect()
    }
}

impl Default for FusionWeights {
    fn default() -> Self {
        Self::new(DEFAULT_WEIGHTS.0, DEFAULT_WEIGHTS.1).expect("valid constant")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FusedPrediction {
    pub probabilities: Vec<f64>,
    pub predicted_class: usize,
}

pub fn fuse(x1: &LogitVector, x2: &LogitVector, w: FusionWeights) -> Result<FusedPrediction> {
    if x1.class_count() != x2.class_count() {
        return Err(Error::DimensionMismatch(format!(
            "logit lengths {} and {}",
            x1.class_count(),
            x2.class_count()
        )));
    }
    let combined: Vec<f64> = x1.0.iter().zip(&x2.0).map(|(a, b)| w.w1 * a + w.w2 * b).collect();
    Ok(FusedPrediction {
        predicted_class: argmax(&combined).expect("non-empty"),
        probabilities: softmax(&combined),
    })
}

/// Top-1 accuracy of the fused prediction for each weight pair.
pub fn sweep_fuse(
    x1_batch: &[LogitVector],
    x2_batch: &[LogitVector],
    labels: &[usize],
    weight_grid: &[FusionWeights],
) -> Result<Vec<f64>> {
    if x1_batch.len() != x2_batch.len() || x1_batch.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "batches of {}, {} and {} labels",
            x1_batch.len(),
            x2_batch.len(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::DimensionMismatch("empty batch".into()));
    }
    weight_grid
        .iter()
        .map(|&w| {
            let mut correct = 0usize;
            for ((a, b), &label) in x1_batch.iter().zip(x2_batch).zip(labels) {
                if fuse(a, b, w)?.predicted_class == label {
                    correct += 1;
                }
            }
            Ok(correct as f64 / labels.len() as f64)
        })
        .collect()
}

/// On-disk logits: `{"classes": K, "rows": [[...], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitsFile {
    pub classes: usize,
    pub rows: Vec<Vec<f64>>,
}

impl LogitsFile {
    pub fn into_vectors(self) -> Result<Vec<LogitVector>> {
        self.rows
            .into_iter()
            .enumerate()
            .map(|(i, row)| {
                if row.len() != self.classes {
                    return Err(Error::DimensionMismatch(format!(
                        "row {i} has {} values, header says {}",
                        row.len(),
                        self.classes
                    )));
                }
                LogitVector::new(row)
            })
            .collect()
    }
}
