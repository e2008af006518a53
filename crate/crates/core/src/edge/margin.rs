//! Linear max-margin classifier trained by hinge-loss subgradient descent.

use super::features::{WindowFeatures, SUMMARY_DIM};
use super::scorer::{BaseScorer, Prediction, ScorerKind};
use crate::math::{dot, sigmoid, Standardizer};

#[derive(Clone, Debug)]
pub struct MarginParams {
    pub lambda: f64,
    pub iterations: usize,
    pub learning_rate: f64,
}

impl Default for MarginParams {
    fn default() -> Self {
        MarginParams {
            lambda: 1e-3,
            iterations: 400,
            learning_rate: 0.5,
        }
    }
}

/// Score `σ(m)` of the signed margin `m = w·x + b`; uncertainty `1 − σ(|m|)`.
#[derive(Clone, Debug)]
pub struct MarginScorer {
    standardizer: Standardizer,
    weights: Vec<f64>,
    bias: f64,
}

impl MarginScorer {
    pub fn train(summaries: &[[f64; SUMMARY_DIM]], labels: &[bool], params: &MarginParams) -> Self {
        let standardizer = Standardizer::fit(summaries.iter().map(|s| s.as_slice()), SUMMARY_DIM);
        let xs: Vec<Vec<f64>> = summaries
            .iter()
            .map(|s| standardizer.transform(s))
            .collect();
        let ys: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect();
        let n = xs.len().max(1) as f64;
        let mut w = vec![0.0; SUMMARY_DIM];
        let mut b = 0.0;
        // Averaged iterate of full-batch subgradient descent on
        // λ/2‖w‖² + mean(max(0, 1 − y(w·x + b))).
        let mut w_avg = vec![0.0; SUMMARY_DIM];
        let mut b_avg = 0.0;
        for t in 0..params.iterations {
            let mut gw: Vec<f64> = w.iter().map(|wi| params.lambda * wi).collect();
            let mut gb = 0.0;
            for (x, &y) in xs.iter().zip(&ys) {
                if y * (dot(&w, x) + b) < 1.0 {
                    for (g, xi) in gw.iter_mut().zip(x) {
                        *g -= y * xi / n;
                    }
                    gb -= y / n;
                }
            }
            let lr = params.learning_rate / ((t + 1) as f64).sqrt();
            for (wi, g) in w.iter_mut().zip(&gw) {
                *wi -= lr * g;
            }
            b -= lr * gb;
            let k = (t + 1) as f64;
            for (a, wi) in w_avg.iter_mut().zip(&w) {
                *a += (wi - *a) / k;
            }
            b_avg += (b - b_avg) / k;
        }
        MarginScorer {
            standardizer,
            weights: w_avg,
            bias: b_avg,
        }
    }

    pub fn margin(&self, features: &WindowFeatures) -> f64 {
        let mut x = [0.0; SUMMARY_DIM];
        self.standardizer.apply(&features.summary, &mut x);
        dot(&self.weights, &x) + self.bias
    }
}

impl BaseScorer for MarginScorer {
    fn kind(&self) -> ScorerKind {
        ScorerKind::MarginScorer
    }

    fn predict(&self, features: &WindowFeatures) -> Prediction {
        let m = self.margin(features);
        Prediction {
            score: sigmoid(m),
            uncertainty: 1.0 - sigmoid(m.abs()),
        }
    }
}
