use std::fmt;

use serde::{Deserialize, Serialize};

use super::features::WindowFeatures;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScorerKind {
    ForestScorer,
    MarginScorer,
    RecurrentScorer,
}

impl fmt::Display for ScorerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// A base scorer's output; both fields lie in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub score: f64,
    pub uncertainty: f64,
}

/// Contract shared by the ensemble members. Prediction is a pure function of
/// the trained parameters and the input.
pub trait BaseScorer: Send + Sync {
    fn kind(&self) -> ScorerKind;
    fn predict(&self, features: &WindowFeatures) -> Prediction;
}

/// Normalized binary entropy in `[0, 1]`.
pub fn binary_entropy(p: f64) -> f64 {
    let p = p.clamp(0.0, 1.0);
    let term = |q: f64| if q > 0.0 { -q * q.log2() } else { 0.0 };
    term(p) + term(1.0 - p)
}
