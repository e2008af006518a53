use rand::seq::SliceRandom;

use super::classify::DeviationBaseline;
use super::features::{WindowFeatures, SUMMARY_DIM};
use super::forest::{ForestParams, ForestScorer};
use super::margin::{MarginParams, MarginScorer};
use super::recurrent::{RecurrentParams, RecurrentScorer};
use super::scorer::BaseScorer;
use super::EdgeError;
use crate::seed::{self, tag};
use crate::sensors::LabeledWindow;

#[derive(Clone, Debug)]
pub struct TrainingParams {
    pub holdout_fraction: f64,
    pub forest: ForestParams,
    pub margin: MarginParams,
    pub recurrent: RecurrentParams,
}

impl Default for TrainingParams {
    fn default() -> Self {
        TrainingParams {
            holdout_fraction: 0.3,
            forest: ForestParams::default(),
            margin: MarginParams::default(),
            recurrent: RecurrentParams::default(),
        }
    }
}

/// Trained ensemble members in fixed order (forest, margin, recurrent) with
/// their held-out accuracies, plus the clean-data deviation baseline.
pub struct TrainedScorers {
    pub scorers: Vec<Box<dyn BaseScorer>>,
    pub accuracies: Vec<f64>,
    pub baseline: DeviationBaseline,
    pub train_size: usize,
    pub holdout_size: usize,
}

pub fn train_base_scorers(
    training: &[LabeledWindow],
    seed: u64,
) -> Result<TrainedScorers, EdgeError> {
    train_base_scorers_with(training, seed, &TrainingParams::default())
}

/// Stratified split into train/holdout, fits each scorer on the train part
/// and records its holdout accuracy at the 0.5 decision threshold.
pub fn train_base_scorers_with(
    training: &[LabeledWindow],
    seed: u64,
    params: &TrainingParams,
) -> Result<TrainedScorers, EdgeError> {
    if training.is_empty() {
        return Err(EdgeError::EmptyTraining);
    }
    let positives = training.iter().filter(|w| w.is_attack).count();
    if positives == 0 || positives == training.len() {
        return Err(EdgeError::SingleClass);
    }

    let rng = &mut seed::rng(seed, &[tag::TRAINING]);
    let mut pos: Vec<usize> = (0..training.len())
        .filter(|&i| training[i].is_attack)
        .collect();
    let mut neg: Vec<usize> = (0..training.len())
        .filter(|&i| !training[i].is_attack)
        .collect();
    pos.shuffle(rng);
    neg.shuffle(rng);
    let cut = |v: &Vec<usize>| ((v.len() as f64) * params.holdout_fraction).round() as usize;
    let (pos_hold, neg_hold) = (cut(&pos), cut(&neg));
    let holdout: Vec<usize> = pos[..pos_hold]
        .iter()
        .chain(&neg[..neg_hold])
        .copied()
        .collect();
    let mut train: Vec<usize> = pos[pos_hold..]
        .iter()
        .chain(&neg[neg_hold..])
        .copied()
        .collect();
    train.sort_unstable();
    if holdout.is_empty() {
        return Err(EdgeError::SingleClass);
    }

    let features: Vec<WindowFeatures> = training
        .iter()
        .map(|w| WindowFeatures::from_window(&w.window))
        .collect();
    let summaries: Vec<[f64; SUMMARY_DIM]> = train.iter().map(|&i| features[i].summary).collect();
    let labels: Vec<bool> = train.iter().map(|&i| training[i].is_attack).collect();
    let sequences: Vec<&[[f64; super::features::N_CHANNELS]]> = train
        .iter()
        .map(|&i| features[i].steps.as_slice())
        .collect();

    let baseline = DeviationBaseline::fit(
        train
            .iter()
            .filter(|&&i| !training[i].is_attack)
            .map(|&i| &features[i].summary),
    );
    let scorers: Vec<Box<dyn BaseScorer>> = vec![
        Box::new(ForestScorer::train(
            &summaries,
            &labels,
            &params.forest,
            rng,
        )),
        Box::new(MarginScorer::train(&summaries, &labels, &params.margin)),
        Box::new(RecurrentScorer::train(
            &sequences,
            &labels,
            &params.recurrent,
            rng,
        )),
    ];
    let accuracies = scorers
        .iter()
        .map(|s| {
            let correct = holdout
                .iter()
                .filter(|&&i| (s.predict(&features[i]).score > 0.5) == training[i].is_attack)
                .count();
            correct as f64 / holdout.len() as f64
        })
        .collect();
    Ok(TrainedScorers {
        scorers,
        accuracies,
        baseline,
        train_size: train.len(),
        holdout_size: holdout.len(),
    })
}
