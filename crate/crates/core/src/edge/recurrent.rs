//! Single recurrent cell over the raw window sequence with a sigmoid head.
//!
//! The recurrent weights are drawn once from the seed and scaled to a
//! contractive spectral radius; only the output head is fitted. Hidden-state
//! statistics over the window (mean, mean square, final state) feed a
//! logistic head.

use rand::Rng;

use super::features::{WindowFeatures, N_CHANNELS};
use super::scorer::{binary_entropy, BaseScorer, Prediction, ScorerKind};
use crate::math::{dot, fit_logistic, sigmoid, Standardizer};
use crate::seed::SimRng;

pub const HIDDEN: usize = 12;
const READOUT: usize = 3 * HIDDEN;
const INPUT_CLIP: f64 = 8.0;

#[derive(Clone, Debug)]
pub struct RecurrentParams {
    pub spectral_radius: f64,
    pub input_scale: f64,
    pub head_l2: f64,
    pub head_iterations: usize,
    pub head_learning_rate: f64,
}

impl Default for RecurrentParams {
    fn default() -> Self {
        RecurrentParams {
            spectral_radius: 0.8,
            input_scale: 0.4,
            head_l2: 1e-4,
            head_iterations: 600,
            head_learning_rate: 1.0,
        }
    }
}

/// Score is the head's sigmoid output; uncertainty its normalized entropy.
#[derive(Clone, Debug)]
pub struct RecurrentScorer {
    input_norm: Standardizer,
    w_in: Vec<[f64; N_CHANNELS]>,
    w_rec: Vec<[f64; HIDDEN]>,
    bias: [f64; HIDDEN],
    readout_norm: Standardizer,
    head: Vec<f64>,
    head_bias: f64,
}

impl RecurrentScorer {
    pub fn train(
        sequences: &[&[[f64; N_CHANNELS]]],
        labels: &[bool],
        params: &RecurrentParams,
        rng: &mut SimRng,
    ) -> Self {
        let input_norm = Standardizer::fit(
            sequences
                .iter()
                .flat_map(|s| s.iter().map(|c| c.as_slice())),
            N_CHANNELS,
        );
        let w_in: Vec<[f64; N_CHANNELS]> = (0..HIDDEN)
            .map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0) * params.input_scale))
            .collect();
        let mut w_rec: Vec<[f64; HIDDEN]> = (0..HIDDEN)
            .map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)))
            .collect();
        let rho = spectral_radius(&w_rec);
        if rho > 0.0 {
            let s = params.spectral_radius / rho;
            w_rec.iter_mut().flatten().for_each(|w| *w *= s);
        }
        let bias = std::array::from_fn(|_| rng.random_range(-0.1..0.1));

        let mut scorer = RecurrentScorer {
            input_norm,
            w_in,
            w_rec,
            bias,
            readout_norm: Standardizer {
                mean: vec![0.0; READOUT],
                scale: vec![1.0; READOUT],
            },
            head: vec![0.0; READOUT],
            head_bias: 0.0,
        };
        let raw: Vec<[f64; READOUT]> = sequences.iter().map(|s| scorer.readout(s)).collect();
        scorer.readout_norm = Standardizer::fit(raw.iter().map(|r| r.as_slice()), READOUT);
        let xs: Vec<Vec<f64>> = raw
            .iter()
            .map(|r| scorer.readout_norm.transform(r))
            .collect();
        let ys: Vec<f64> = labels.iter().map(|&l| l as u8 as f64).collect();
        let (w, b) = fit_logistic(
            &xs,
            &ys,
            params.head_l2,
            params.head_learning_rate,
            params.head_iterations,
        );
        scorer.head = w;
        scorer.head_bias = b;
        scorer
    }

    fn readout(&self, steps: &[[f64; N_CHANNELS]]) -> [f64; READOUT] {
        let mut h = [0.0; HIDDEN];
        let mut x = [0.0; N_CHANNELS];
        let mut out = [0.0; READOUT];
        for step in steps {
            self.input_norm.apply(step, &mut x);
            x.iter_mut()
                .for_each(|v| *v = v.clamp(-INPUT_CLIP, INPUT_CLIP));
            let prev = h;
            for j in 0..HIDDEN {
                let a = dot(&self.w_in[j], &x) + dot(&self.w_rec[j], &prev) + self.bias[j];
                h[j] = a.tanh();
                out[j] += h[j];
                out[HIDDEN + j] += h[j] * h[j];
            }
        }
        let n = steps.len().max(1) as f64;
        for j in 0..HIDDEN {
            out[j] /= n;
            out[HIDDEN + j] /= n;
            out[2 * HIDDEN + j] = h[j];
        }
        out
    }

    pub fn probability(&self, steps: &[[f64; N_CHANNELS]]) -> f64 {
        let r = self.readout(steps);
        let mut z = [0.0; READOUT];
        self.readout_norm.apply(&r, &mut z);
        sigmoid(dot(&self.head, &z) + self.head_bias)
    }
}

/// Power-iteration estimate of the largest eigenvalue magnitude, bounded
/// above by the max absolute row sum.
fn spectral_radius(m: &[[f64; HIDDEN]]) -> f64 {
    let mut v = [1.0 / (HIDDEN as f64).sqrt(); HIDDEN];
    let mut est = 0.0;
    for _ in 0..200 {
        let mut next = [0.0; HIDDEN];
        for (j, row) in m.iter().enumerate() {
            next[j] = dot(row, &v);
        }
        let nn = dot(&next, &next).sqrt();
        if nn == 0.0 {
            return 0.0;
        }
        est = nn;
        v = next.map(|x| x / nn);
    }
    let row_bound = m
        .iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    est.min(row_bound).max(1e-12)
}

impl BaseScorer for RecurrentScorer {
    fn kind(&self) -> ScorerKind {
        ScorerKind::RecurrentScorer
    }

    fn predict(&self, features: &WindowFeatures) -> Prediction {
        let p = self.probability(&features.steps);
        Prediction {
            score: p,
            uncertainty: binary_entropy(p),
        }
    }
}
