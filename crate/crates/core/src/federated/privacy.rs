use rand::Rng;
use serde::{Deserialize, Serialize};

use super::FederatedError;
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrivacyConfig {
    pub epsilon: f64,
    pub delta_fail: f64,
    /// Δf. Laplace scale is `sensitivity / epsilon`.
    pub sensitivity: f64,
    /// Disables noise entirely. Only meant for tests that need exact reductions.
    #[serde(default)]
    pub zero_noise: bool,
}

impl Default for PrivacyConfig {
    fn default() -> Self {
        PrivacyConfig {
            epsilon: 1.0,
            delta_fail: 1e-5,
            sensitivity: 1.0,
            zero_noise: false,
        }
    }
}

impl PrivacyConfig {
    /// Sensitivity derived from the regional vehicle count, `Δf = 1/|V|`.
    pub fn for_region(
        vehicles: usize,
        epsilon: f64,
        delta_fail: f64,
    ) -> Result<Self, FederatedError> {
        if vehicles == 0 {
            return Err(FederatedError::ZeroVehicles);
        }
        let cfg = PrivacyConfig {
            epsilon,
            delta_fail,
            sensitivity: 1.0 / vehicles as f64,
            zero_noise: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), FederatedError> {
        if !(self.sensitivity > 0.0 && self.epsilon > 0.0)
            || !self.sensitivity.is_finite()
            || !self.epsilon.is_finite()
        {
            return Err(FederatedError::InvalidPrivacyScale {
                sensitivity: self.sensitivity,
                epsilon: self.epsilon,
            });
        }
        if !(self.delta_fail > 0.0 && self.delta_fail < 1.0) {
            return Err(FederatedError::InvalidDelta(self.delta_fail));
        }
        Ok(())
    }

    pub fn scale(&self) -> f64 {
        self.sensitivity / self.epsilon
    }
}

/// One Laplace(0, b) draw by inverse CDF: `−b·sgn(u)·ln(1 − 2|u|)`, `u ~ U(−½, ½)`.
pub fn laplace_sample<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random::<f64>() - 0.5;
        let tail = 1.0 - 2.0 * u.abs();
        if tail > 0.0 {
            return -scale * u.signum() * tail.ln();
        }
    }
}

/// Adds independent Laplace(0, Δf/ε) noise to every coordinate.
pub fn add_laplace<T: Real, R: Rng + ?Sized>(
    vector: &[T],
    sensitivity: f64,
    epsilon: f64,
    zero_noise: bool,
    rng: &mut R,
) -> Result<Vec<T>, FederatedError> {
    if !(sensitivity > 0.0 && epsilon > 0.0) || !(sensitivity / epsilon).is_finite() {
        return Err(FederatedError::InvalidPrivacyScale {
            sensitivity,
            epsilon,
        });
    }
    if zero_noise {
        return Ok(vector.to_vec());
    }
    let b = sensitivity / epsilon;
    Ok(vector
        .iter()
        .map(|&x| x + T::lit(laplace_sample(b, rng)))
        .collect())
}

/// Noises regional threat-pattern statistics for cross-region sharing, with
/// the sensitivity derived as `1/|V|` from the regional vehicle count.
pub fn privatize_signature<T: Real, R: Rng + ?Sized>(
    stats: &[T],
    regional_vehicles: usize,
    cfg: &PrivacyConfig,
    rng: &mut R,
) -> Result<Vec<T>, FederatedError> {
    let derived = PrivacyConfig::for_region(regional_vehicles, cfg.epsilon, cfg.delta_fail)?;
    add_laplace(
        stats,
        derived.sensitivity,
        derived.epsilon,
        cfg.zero_noise,
        rng,
    )
}

/// Rounds charged so far against a per-round ε.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivacyAccountant {
    pub rounds_used: u64,
    pub per_round_epsilon: f64,
    pub delta_fail: f64,
}

impl PrivacyAccountant {
    pub fn new(cfg: &PrivacyConfig) -> Self {
        PrivacyAccountant {
            rounds_used: 0,
            per_round_epsilon: cfg.epsilon,
            delta_fail: cfg.delta_fail,
        }
    }

    /// Basic composition, `T·ε`.
    pub fn basic(&self) -> f64 {
        self.rounds_used as f64 * self.per_round_epsilon
    }

    /// Advanced composition, `ε·√(2T·ln(1/δ)) + T·ε·(e^ε − 1)`.
    pub fn advanced(&self) -> f64 {
        let t = self.rounds_used as f64;
        let e = self.per_round_epsilon;
        e * (2.0 * t * (1.0 / self.delta_fail).ln()).sqrt() + t * e * e.exp_m1()
    }
}

/// Charges `rounds` more rounds and returns the (basic, advanced) totals.
pub fn accountant_charge(accountant: &mut PrivacyAccountant, rounds: u64) -> (f64, f64) {
    accountant.rounds_used += rounds;
    (accountant.basic(), accountant.advanced())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    fn laplace_cdf(x: f64, b: f64) -> f64 {
        if x < 0.0 {
            0.5 * (x / b).exp()
        } else {
            1.0 - 0.5 * (-x / b).exp()
        }
    }

    fn draws(n: usize, b: f64, tag: u64) -> Vec<f64> {
        let rng = &mut seed::rng(17, &[tag]);
        (0..n).map(|_| laplace_sample(b, rng)).collect()
    }

    #[test]
    fn moments() {
        let n = 100_000;
        let xs = draws(n, 1.0, 1);
        let mean = xs.iter().sum::<f64>() / n as f64;
        assert!(
            mean.abs() < 3.0 * (2.0f64.sqrt() / (n as f64).sqrt()),
            "{mean}"
        );
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((var - 2.0).abs() < 0.05, "{var}");
    }

    #[test]
    fn kolmogorov_smirnov() {
        let n = 100_000;
        let b = 0.37;
        let mut xs = draws(n, b, 2);
        xs.sort_by(f64::total_cmp);
        let d = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = laplace_cdf(x, b);
                (f - i as f64 / n as f64)
                    .abs()
                    .max(((i + 1) as f64 / n as f64 - f).abs())
            })
            .fold(0.0, f64::max);
        assert!(d < 1.6276 / (n as f64).sqrt(), "D = {d}");
    }

    #[test]
    fn zero_noise_is_identity() {
        let v = vec![0.25f32, -1.5];
        let rng = &mut seed::rng(1, &[]);
        assert_eq!(add_laplace(&v, 1.0, 1.0, true, rng).unwrap(), v);
        assert!(add_laplace(&v, 0.0, 1.0, false, rng).is_err());
        assert!(add_laplace(&v, 1.0, -1.0, false, rng).is_err());
    }

    #[test]
    fn signature_scale_from_vehicle_count() {
        assert_eq!(
            PrivacyConfig::for_region(100, 1.0, 1e-5).unwrap().scale(),
            0.01
        );
        assert_eq!(
            PrivacyConfig::for_region(1, 1.0, 1e-5).unwrap().scale(),
            1.0
        );
        assert_eq!(
            PrivacyConfig::for_region(0, 1.0, 1e-5),
            Err(FederatedError::ZeroVehicles)
        );
    }

    #[test]
    fn doubling_epsilon_halves_noise() {
        let n = 100_000;
        let zeros = vec![0.0; n];
        let sd = |eps: f64, tag: u64| {
            let cfg = PrivacyConfig {
                epsilon: eps,
                ..Default::default()
            };
            let noisy = privatize_signature(&zeros, 4, &cfg, &mut seed::rng(3, &[tag])).unwrap();
            (noisy.iter().map(|x| x * x).sum::<f64>() / n as f64).sqrt()
        };
        let ratio = sd(1.0, 1) / sd(2.0, 2);
        assert!((ratio - 2.0).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn accountant() {
        let mut a = PrivacyAccountant {
            rounds_used: 0,
            per_round_epsilon: 1.0,
            delta_fail: 1e-5,
        };
        assert_eq!(accountant_charge(&mut a, 0), (0.0, 0.0));
        assert_eq!(accountant_charge(&mut a, 10).0, 10.0);

        let mut a = PrivacyAccountant {
            rounds_used: 0,
            per_round_epsilon: 0.1,
            delta_fail: 1e-5,
        };
        let (basic, adv) = accountant_charge(&mut a, 10);
        let oracle = 0.1 * (20.0 * 100_000f64.ln()).sqrt() + 10.0 * 0.1 * (0.1f64.exp() - 1.0);
        assert!((adv - oracle).abs() < 1e-9);
        assert!(adv < 2.0 * basic);
    }

    #[test]
    fn advanced_is_monotone() {
        let mut prev = 0.0;
        for t in 1..50 {
            let a = PrivacyAccountant {
                rounds_used: t,
                per_round_epsilon: 0.5,
                delta_fail: 1e-5,
            };
            assert!(a.advanced() > prev);
            prev = a.advanced();
        }
        let lo = PrivacyAccountant {
            rounds_used: 10,
            per_round_epsilon: 0.2,
            delta_fail: 1e-5,
        };
        let hi = PrivacyAccountant {
            per_round_epsilon: 0.3,
            ..lo.clone()
        };
        assert!(hi.advanced() > lo.advanced());
    }
}
