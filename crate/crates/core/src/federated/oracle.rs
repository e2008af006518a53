use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::local::{byzantine_update, local_train, LocalLoss, Quadratic};
use super::privacy::{PrivacyAccountant, PrivacyConfig};
use super::round::aggregate_round;
use super::{
    Aggregation, AggregatorConfig, ByzantineBehavior, ByzantineKind, FederatedError, GlobalModel,
};
use crate::ids::VehicleId;
use crate::seed::{self, tag};

/// Synthetic strongly convex federated problem with a known optimum.
///
/// Every client holds `F(w) = ½ (w − w*)ᵀ A (w − w*)` with diagonal `A`
/// whose eigenvalues are spread evenly over `[mu, lipschitz]`; clients see
/// the gradient plus i.i.d. Gaussian noise of standard deviation `noise_sd`.
/// The step size is `1/lipschitz`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleParams {
    pub n_clients: usize,
    pub byz_fraction: f64,
    pub behavior: ByzantineBehavior,
    pub mu: f64,
    pub lipschitz: f64,
    pub dim: usize,
    pub rounds: usize,
    pub noise_sd: f64,
    pub aggregation: Aggregation,
    pub trim_ratio: f64,
    pub seed: u64,
}

impl Default for OracleParams {
    fn default() -> Self {
        OracleParams {
            n_clients: 50,
            byz_fraction: 0.0,
            behavior: ByzantineBehavior {
                kind: ByzantineKind::SignFlip,
                magnitude: 10.0,
            },
            mu: 0.1,
            lipschitz: 1.0,
            dim: 10,
            rounds: 50,
            noise_sd: 0.0,
            aggregation: Aggregation::TrimmedMean,
            trim_ratio: 0.3,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleTrajectory {
    /// `F(w⁽ᵗ⁾) − F*` for `t = 0..=rounds`.
    pub suboptimality: Vec<f64>,
    pub byzantine_clients: usize,
}

impl OracleTrajectory {
    pub fn last(&self) -> f64 {
        *self
            .suboptimality
            .last()
            .expect("trajectory includes the initial point")
    }

    /// Least-squares slope of `ln(F − F*)` against the round index, over
    /// the points that are still strictly positive.
    pub fn log_slope(&self) -> f64 {
        let pts: Vec<(f64, f64)> = self
            .suboptimality
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0.0 && v.is_finite())
            .map(|(t, &v)| (t as f64, v.ln()))
            .collect();
        let n = pts.len() as f64;
        let (mx, my) = (
            pts.iter().map(|p| p.0).sum::<f64>() / n,
            pts.iter().map(|p| p.1).sum::<f64>() / n,
        );
        let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
        sxy / sxx
    }
}

pub fn convergence_oracle(p: &OracleParams) -> Result<OracleTrajectory, FederatedError> {
    if !(p.mu > 0.0 && p.mu <= p.lipschitz && p.lipschitz.is_finite()) {
        return Err(FederatedError::InvalidOracle("need 0 < mu <= lipschitz"));
    }
    if p.n_clients == 0 || p.dim == 0 {
        return Err(FederatedError::InvalidOracle(
            "need at least one client and one dimension",
        ));
    }
    if !(0.0..=1.0).contains(&p.byz_fraction) || p.byz_fraction > p.trim_ratio {
        return Err(FederatedError::InfeasibleByzantineFraction {
            fraction: p.byz_fraction,
            capacity: p.trim_ratio,
        });
    }
    let rng = &mut seed::rng(p.seed, &[tag::FEDERATED, 0x0AC1E]);
    let curvature: Vec<f64> = (0..p.dim)
        .map(|i| {
            if p.dim == 1 {
                p.mu
            } else {
                p.mu + (p.lipschitz - p.mu) * i as f64 / (p.dim - 1) as f64
            }
        })
        .collect();
    let optimum: Vec<f64> = (0..p.dim).map(|_| rng.sample(StandardNormal)).collect();
    let objective = Quadratic {
        center: optimum,
        curvature,
    };

    let eta = 1.0 / p.lipschitz;
    let n_byz = (p.byz_fraction * p.n_clients as f64).floor() as usize;
    let agg = AggregatorConfig {
        trim_ratio: p.trim_ratio,
        learning_rate: eta,
        aggregation: p.aggregation,
        ..AggregatorConfig::default()
    };
    let privacy = PrivacyConfig {
        zero_noise: true,
        ..PrivacyConfig::default()
    };
    let mut accountant = PrivacyAccountant::new(&privacy);

    let mut model = GlobalModel::<f64>::zeros(p.dim);
    let mut trajectory = vec![objective.loss(&model.weights)];
    for _ in 0..p.rounds {
        let mut updates = Vec::with_capacity(p.n_clients);
        for k in 0..p.n_clients {
            let vehicle = VehicleId(k as u32);
            let mut honest = local_train(vehicle, &model, &objective, eta)?;
            for d in &mut honest.delta {
                *d -= eta * p.noise_sd * rng.sample::<f64, _>(StandardNormal);
            }
            let update = if k < n_byz {
                match p.behavior.kind {
                    ByzantineKind::SignFlip => {
                        let mut u = honest;
                        u.delta.iter_mut().for_each(|d| *d *= -p.behavior.magnitude);
                        u
                    }
                    _ => byzantine_update(&p.behavior, vehicle, &model, &objective, eta, rng)?,
                }
            } else {
                honest
            };
            updates.push(update);
        }
        model = aggregate_round(&model, &updates, &agg, &privacy, &mut accountant, rng)?.0;
        trajectory.push(objective.loss(&model.weights));
    }
    Ok(OracleTrajectory {
        suboptimality: trajectory,
        byzantine_clients: n_byz,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_run_contracts_each_round() {
        let t = convergence_oracle(&OracleParams::default()).unwrap();
        let rate = 1.0 - 0.1;
        for w in t.suboptimality.windows(2) {
            assert!(w[1] <= rate * w[0] + 1e-6, "{} -> {}", w[0], w[1]);
        }
        assert!(t.log_slope() <= rate.ln() + 0.05);
    }

    #[test]
    fn trimmed_mean_resists_sign_flip_and_plain_mean_does_not() {
        let base = OracleParams {
            noise_sd: 0.05,
            seed: 3,
            ..Default::default()
        };
        let clean = convergence_oracle(&base).unwrap();
        let attacked = convergence_oracle(&OracleParams {
            byz_fraction: 0.2,
            ..base.clone()
        })
        .unwrap();
        let naive = convergence_oracle(&OracleParams {
            byz_fraction: 0.2,
            aggregation: Aggregation::Mean,
            ..base
        })
        .unwrap();
        assert_eq!(attacked.byzantine_clients, 10);
        assert!(
            attacked.last() <= 10.0 * clean.last(),
            "{} vs {}",
            attacked.last(),
            clean.last()
        );
        assert!(
            naive.last() >= 10.0 * attacked.last(),
            "{} vs {}",
            naive.last(),
            attacked.last()
        );
    }

    #[test]
    fn infeasible_fraction() {
        let p = OracleParams {
            byz_fraction: 0.35,
            ..Default::default()
        };
        assert!(matches!(
            convergence_oracle(&p),
            Err(FederatedError::InfeasibleByzantineFraction { .. })
        ));
    }
}
