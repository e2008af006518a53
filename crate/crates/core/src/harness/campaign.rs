//! Laying attack campaigns over the simulated timeline.

use std::collections::BTreeSet;

use rand::seq::{index, SliceRandom};
use rand::Rng;

use super::config::ScenarioConfig;
use crate::ids::VehicleId;
use crate::seed::{self, tag};
use crate::sensors::{AttackKind, AttackScenario, SensorError};

/// Splits `total` items across `shares` by the largest-remainder rule.
/// Ties on the remainder go to the earlier share.
pub fn largest_remainder(shares: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = shares.iter().sum();
    if total == 0 || sum <= 0.0 {
        return vec![0; shares.len()];
    }
    let exact: Vec<f64> = shares.iter().map(|s| s / sum * total as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| {
        (exact[b] - exact[b].floor())
            .total_cmp(&(exact[a] - exact[a].floor()))
            .then(a.cmp(&b))
    });
    let short = total - counts.iter().sum::<usize>();
    for &i in order.iter().take(short) {
        counts[i] += 1;
    }
    counts
}

/// Plans the campaigns for a scenario.
///
/// The timeline is cut into slots of one campaign length. A `coverage`
/// fraction of the slots (rounded) receives one campaign each, so campaigns
/// never overlap. Kinds follow `attack_mix` by largest remainder and are
/// shuffled over the chosen slots. Each campaign targets an independent
/// uniform sample of the fleet.
pub fn plan_campaigns(cfg: &ScenarioConfig) -> Result<Vec<AttackScenario>, SensorError> {
    let c = &cfg.campaigns;
    let slot_ms = (c.duration_s * 1000.0).round() as i64;
    let slots = (cfg.duration_ms() / slot_ms) as usize;
    let n = ((c.coverage * slots as f64).round() as usize).min(slots);
    if n == 0 || c.attack_mix.is_empty() {
        return Ok(Vec::new());
    }
    let rng = &mut seed::rng(cfg.seed, &[tag::CAMPAIGN]);

    let kinds: Vec<AttackKind> = c.attack_mix.keys().copied().collect();
    let shares: Vec<f64> = c.attack_mix.values().copied().collect();
    let mut plan: Vec<AttackKind> = kinds
        .iter()
        .zip(largest_remainder(&shares, n))
        .flat_map(|(&k, count)| std::iter::repeat_n(k, count))
        .collect();
    plan.shuffle(rng);

    let mut chosen = index::sample(rng, slots, n).into_vec();
    chosen.sort_unstable();

    let targets_per =
        ((c.target_fraction * cfg.n_vehicles as f64).round() as usize).clamp(1, cfg.n_vehicles);
    let (lo, hi) = c.intensity;
    chosen
        .into_iter()
        .zip(plan)
        .map(|(slot, kind)| {
            let targets: BTreeSet<VehicleId> = index::sample(rng, cfg.n_vehicles, targets_per)
                .into_iter()
                .map(|v| VehicleId(v as u32))
                .collect();
            let intensity = if hi > lo {
                rng.random_range(lo..=hi)
            } else {
                lo
            };
            let start = slot as i64 * slot_ms;
            AttackScenario::new(kind, intensity, start, start + slot_ms, targets)
        })
        .collect()
}
