use rand::Rng;
use serde::{Deserialize, Serialize};

use super::privacy::{accountant_charge, add_laplace, PrivacyAccountant, PrivacyConfig};
use super::robust::{coordinate_mean, trimmed_mean_weighted};
use super::{Aggregation, AggregatorConfig, ClientUpdate, FederatedError, GlobalModel};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundSummary {
    /// Round index of the model produced.
    pub round: u64,
    pub received: usize,
    pub accepted: usize,
    pub aggregate_norm: f64,
    pub basic_epsilon: f64,
    pub advanced_epsilon: f64,
}

/// One coordinator round: drop malformed updates, aggregate the rest, add
/// Laplace noise to the aggregate and apply it.
///
/// Updates with non-finite entries, a wrong dimension or a stale round
/// number are rejected. With fewer than three accepted updates the trimmed
/// mean is undefined and the plain mean is used.
pub fn aggregate_round<T: Real, R: Rng + ?Sized>(
    global: &GlobalModel<T>,
    received: &[ClientUpdate<T>],
    agg: &AggregatorConfig,
    privacy: &PrivacyConfig,
    accountant: &mut PrivacyAccountant,
    rng: &mut R,
) -> Result<(GlobalModel<T>, RoundSummary), FederatedError> {
    if received.is_empty() {
        return Err(FederatedError::NoUpdates);
    }
    agg.validate()?;
    privacy.validate()?;
    let accepted: Vec<&ClientUpdate<T>> = received
        .iter()
        .filter(|u| {
            u.round == global.round
                && u.delta.len() == global.dim()
                && u.sample_count > 0
                && u.delta.iter().all(|v| v.is_finite())
        })
        .collect();
    if accepted.is_empty() {
        return Err(FederatedError::AllRejected(received.len()));
    }
    let deltas: Vec<Vec<T>> = accepted.iter().map(|u| u.delta.clone()).collect();
    let weights: Vec<f64> = accepted
        .iter()
        .map(|u| {
            if agg.weighted {
                u.sample_count as f64
            } else {
                1.0
            }
        })
        .collect();
    let robust = match agg.aggregation {
        Aggregation::TrimmedMean if deltas.len() >= 3 => {
            trimmed_mean_weighted(&deltas, &weights, agg.trim_ratio)?
        }
        _ => coordinate_mean(&deltas, &weights),
    };
    let noisy = add_laplace(
        &robust,
        privacy.sensitivity,
        privacy.epsilon,
        privacy.zero_noise,
        rng,
    )?;
    let (basic, advanced) = accountant_charge(accountant, 1);
    let next = GlobalModel {
        weights: global
            .weights
            .iter()
            .zip(&noisy)
            .map(|(&w, &d)| w + d)
            .collect(),
        round: global.round + 1,
    };
    let summary = RoundSummary {
        round: next.round,
        received: received.len(),
        accepted: accepted.len(),
        aggregate_norm: noisy.iter().map(|v| v.as_f64().powi(2)).sum::<f64>().sqrt(),
        basic_epsilon: basic,
        advanced_epsilon: advanced,
    };
    Ok((next, summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::federated::{
        byzantine_update, local_train, ByzantineBehavior, ByzantineKind, Quadratic,
    };
    use crate::ids::VehicleId;
    use crate::seed;

    fn quiet() -> PrivacyConfig {
        PrivacyConfig {
            zero_noise: true,
            ..Default::default()
        }
    }

    #[test]
    fn single_client_is_a_centralised_step() {
        let g = GlobalModel {
            weights: vec![0.0, 2.0],
            round: 5,
        };
        let q = Quadratic::isotropic(vec![1.0, 0.0]);
        let u = local_train(VehicleId(0), &g, &q, 0.25).unwrap();
        let mut acc = PrivacyAccountant::new(&quiet());
        let (next, s) = aggregate_round(
            &g,
            &[u],
            &AggregatorConfig::default(),
            &quiet(),
            &mut acc,
            &mut seed::rng(0, &[]),
        )
        .unwrap();
        assert_eq!(next.weights, vec![0.25, 1.5]);
        assert_eq!(next.round, 6);
        assert_eq!(s.accepted, 1);
        assert_eq!(acc.rounds_used, 1);
    }

    #[test]
    fn sign_flip_minority_barely_moves_aggregate() {
        let g = GlobalModel {
            weights: vec![0.0; 4],
            round: 0,
        };
        let rng = &mut seed::rng(4, &[]);
        let flip = ByzantineBehavior {
            kind: ByzantineKind::SignFlip,
            magnitude: 10.0,
        };
        let mut honest = Vec::new();
        let mut all = Vec::new();
        for k in 0..10u32 {
            let c: Vec<f64> = (0..4).map(|j| 1.0 + 0.1 * ((k + j) % 5) as f64).collect();
            let q = Quadratic::isotropic(c);
            let u = if k < 2 {
                byzantine_update(&flip, VehicleId(k), &g, &q, 0.5, rng).unwrap()
            } else {
                let u = local_train(VehicleId(k), &g, &q, 0.5).unwrap();
                honest.push(u.clone());
                u
            };
            all.push(u);
        }
        let agg = AggregatorConfig::default();
        let run = |ups: &[ClientUpdate<f64>]| {
            let mut acc = PrivacyAccountant::new(&quiet());
            aggregate_round(&g, ups, &agg, &quiet(), &mut acc, &mut seed::rng(0, &[]))
                .unwrap()
                .0
                .weights
        };
        let (with, without) = (run(&all), run(&honest));
        for (a, b) in with.iter().zip(&without) {
            assert!((a - b).abs() <= 0.1 * b.abs(), "{a} vs {b}");
        }
    }

    #[test]
    fn non_finite_updates_are_rejected() {
        let g = GlobalModel {
            weights: vec![0.0],
            round: 0,
        };
        let bad = ClientUpdate {
            vehicle_id: VehicleId(0),
            round: 0,
            delta: vec![f64::NAN],
            sample_count: 1,
        };
        let stale = ClientUpdate {
            vehicle_id: VehicleId(1),
            round: 7,
            delta: vec![1.0],
            sample_count: 1,
        };
        let mut acc = PrivacyAccountant::new(&quiet());
        let agg = AggregatorConfig::default();
        let rng = &mut seed::rng(0, &[]);
        assert_eq!(
            aggregate_round(
                &g,
                &[bad.clone(), stale.clone()],
                &agg,
                &quiet(),
                &mut acc,
                rng
            )
            .unwrap_err(),
            FederatedError::AllRejected(2)
        );
        let good = ClientUpdate {
            vehicle_id: VehicleId(2),
            round: 0,
            delta: vec![0.5],
            sample_count: 1,
        };
        let (next, s) =
            aggregate_round(&g, &[bad, good, stale], &agg, &quiet(), &mut acc, rng).unwrap();
        assert_eq!(next.weights, vec![0.5]);
        assert_eq!((s.received, s.accepted), (3, 1));
        assert_eq!(
            aggregate_round(&g, &[], &agg, &quiet(), &mut acc, rng).unwrap_err(),
            FederatedError::NoUpdates
        );
    }
}
