use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    generate_clean_stream, inject_attack_labeled, label_stream, make_windows, AttackKind,
    AttackMagnitudes, AttackScenario, DriveProfile, LabeledWindow, SensorError, DEFAULT_WINDOW_LEN,
};
use crate::ids::VehicleId;
use crate::seed::{self, tag};

/// Shape of a labelled training corpus built from independent drive episodes.
///
/// Each episode is a fresh clean stream; an `attack_fraction` of them carry
/// one campaign spanning the whole episode, with kind drawn uniformly from
/// `kinds` and intensity uniformly from `intensity`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSpec {
    pub episodes: usize,
    pub episode_ms: i64,
    pub attack_fraction: f64,
    pub kinds: Vec<AttackKind>,
    pub intensity: (f64, f64),
    pub window_len: usize,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            episodes: 120,
            episode_ms: 2_000,
            attack_fraction: 0.5,
            kinds: AttackKind::SENSOR.to_vec(),
            intensity: (0.4, 1.0),
            window_len: DEFAULT_WINDOW_LEN,
        }
    }
}

/// Builds the corpus as non-overlapping windows. Episode `i` uses vehicle id
/// `i`, so every episode draws an independent clean stream.
pub fn build_corpus(
    seed: u64,
    spec: &CorpusSpec,
    profile: &DriveProfile,
    mags: &AttackMagnitudes,
) -> Result<Vec<LabeledWindow>, SensorError> {
    let rng = &mut seed::rng(seed, &[tag::TRAINING, 0xC0]);
    let mut out = Vec::new();
    for episode in 0..spec.episodes {
        let vehicle = VehicleId(episode as u32);
        let clean = generate_clean_stream(seed, vehicle, spec.episode_ms, profile)?;
        let mut labeled = label_stream(&clean);
        if !spec.kinds.is_empty() && rng.random::<f64>() < spec.attack_fraction {
            let kind = spec.kinds[rng.random_range(0..spec.kinds.len())];
            let (lo, hi) = spec.intensity;
            let intensity = if hi > lo {
                rng.random_range(lo..=hi)
            } else {
                lo
            };
            let scenario = AttackScenario::new(kind, intensity, 0, spec.episode_ms, [vehicle])?;
            inject_attack_labeled(&mut labeled, vehicle, &scenario, seed, mags)?;
        }
        out.extend(make_windows(
            &labeled,
            vehicle,
            spec.window_len,
            spec.window_len,
        )?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_is_seeded_and_mixed() {
        let spec = CorpusSpec {
            episodes: 40,
            ..Default::default()
        };
        let a = build_corpus(
            5,
            &spec,
            &DriveProfile::default(),
            &AttackMagnitudes::default(),
        )
        .unwrap();
        let b = build_corpus(
            5,
            &spec,
            &DriveProfile::default(),
            &AttackMagnitudes::default(),
        )
        .unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 40 * 4);
        let attacks = a.iter().filter(|w| w.is_attack).count();
        assert!(attacks > 40 && attacks < 120, "{attacks}");
        let kinds: std::collections::BTreeSet<_> = a.iter().filter_map(|w| w.attack_kind).collect();
        assert!(kinds.len() >= 4);
    }
}
