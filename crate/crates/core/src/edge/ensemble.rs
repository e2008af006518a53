//! Accuracy-softmax ensemble weighting and variance-based uncertainty.
//!
//! Generic over the scalar type so the same arithmetic serves `f32` edge
//! builds and the `f64` simulator.

use serde::{Deserialize, Serialize};

use super::EdgeError;
use crate::scalar::Real;

/// Historical accuracies, softmax temperature and the derived weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleWeights<T> {
    pub accuracies: Vec<T>,
    pub temperature: T,
    pub weights: Vec<T>,
}

/// `w_i = exp(α_i/Υ) / Σ_j exp(α_j/Υ)`.
///
/// Evaluated with the max-shift so large `α/Υ` cannot overflow. Weights that
/// would underflow to zero are floored at the smallest positive normal value
/// so every member keeps a strictly positive weight.
pub fn compute_weights<T: Real>(
    accuracies: &[T],
    temperature: T,
) -> Result<EnsembleWeights<T>, EdgeError> {
    if !(temperature > T::zero()) || !temperature.is_finite() {
        return Err(EdgeError::NonPositiveTemperature(temperature.as_f64()));
    }
    if accuracies.is_empty() {
        return Err(EdgeError::EmptyEnsemble);
    }
    if let Some(a) = accuracies
        .iter()
        .find(|a| !(**a >= T::zero() && **a <= T::one()))
    {
        return Err(EdgeError::InvalidAccuracy(a.as_f64()));
    }
    let top = accuracies.iter().fold(T::neg_infinity(), |m, &a| m.max(a));
    let raw: Vec<T> = accuracies
        .iter()
        .map(|&a| ((a - top) / temperature).exp().max(T::min_positive_value()))
        .collect();
    let total: T = raw.iter().copied().sum();
    Ok(EnsembleWeights {
        accuracies: accuracies.to_vec(),
        temperature,
        weights: raw.into_iter().map(|r| r / total).collect(),
    })
}

/// One EMA step `α_i ← decay·α_i + (1 − decay)·outcome`, then reweight.
pub fn update_accuracy<T: Real>(
    state: &EnsembleWeights<T>,
    scorer_index: usize,
    outcome: bool,
    decay: T,
) -> Result<EnsembleWeights<T>, EdgeError> {
    if scorer_index >= state.accuracies.len() {
        return Err(EdgeError::ScorerIndex {
            index: scorer_index,
            len: state.accuracies.len(),
        });
    }
    let mut acc = state.accuracies.clone();
    let target = if outcome { T::one() } else { T::zero() };
    acc[scorer_index] = decay * acc[scorer_index] + (T::one() - decay) * target;
    compute_weights(&acc, state.temperature)
}

/// Output of combining base-scorer predictions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Combined<T> {
    /// `A(x) = Σ w_i f_i(x)`.
    pub anomaly_score: T,
    /// `C(x) = 1 − mean_i u_i(x)`.
    pub confidence: T,
    /// `σ²(x) = Σ w_i (f_i(x) − A(x))²`.
    pub variance: T,
}

/// Combines `(score, uncertainty)` pairs with ensemble weights.
pub fn combine<T: Real>(predictions: &[(T, T)], weights: &[T]) -> Result<Combined<T>, EdgeError> {
    if predictions.len() != weights.len() {
        return Err(EdgeError::WeightMismatch {
            scorers: predictions.len(),
            weights: weights.len(),
        });
    }
    if predictions.is_empty() {
        return Err(EdgeError::EmptyEnsemble);
    }
    let score: T = predictions.iter().zip(weights).map(|(p, &w)| w * p.0).sum();
    let mean_u: T = predictions.iter().map(|p| p.1).sum::<T>() / T::from_count(predictions.len());
    let variance: T = predictions
        .iter()
        .zip(weights)
        .map(|(p, &w)| w * (p.0 - score) * (p.0 - score))
        .sum();
    Ok(Combined {
        anomaly_score: score.max(T::zero()).min(T::one()),
        confidence: (T::one() - mean_u).max(T::zero()).min(T::one()),
        variance: variance.max(T::zero()),
    })
}

/// Dual-threshold gate: both the score and the confidence must exceed their
/// thresholds strictly.
pub fn dual_threshold<T: Real>(anomaly_score: T, confidence: T, theta1: T, theta2: T) -> bool {
    anomaly_score > theta1 && confidence > theta2
}
