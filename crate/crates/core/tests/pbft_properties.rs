use std::collections::BTreeSet;

use haven::chain::{pbft_round, quorum, FaultConfig, FaultMode, UniformLink, ValidatorState};
use haven::seed;
use haven::NodeId;
use rand::seq::SliceRandom;
use rand::Rng;

fn validators(n: usize, faulty: &[usize], mode: FaultMode) -> Vec<ValidatorState> {
    (0..n)
        .map(|i| {
            ValidatorState::new(
                NodeId(i as u32),
                if faulty.contains(&i) {
                    mode
                } else {
                    FaultMode::Honest
                },
            )
        })
        .collect()
}

fn lossy(p: f64) -> UniformLink {
    UniformLink {
        base_ms: 200.0,
        jitter_fraction: 0.5,
        loss_probability: p,
    }
}

#[test]
fn safety_under_equivocation() {
    let rng = &mut seed::rng(100, &[]);
    let cfg = FaultConfig::default();
    for trial in 0..1000 {
        let n = rng.random_range(4..=10);
        let f = (n - 1) / 3;
        let k = rng.random_range(0..=f);
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(rng);
        let mut v = validators(n, &idx[..k], FaultMode::Byzantine);
        let view = rng.random_range(0..n as u64);
        let link = lossy(rng.random_range(0.0..0.2));
        let out = pbft_round(&mut v, &[trial as u8; 32], view, trial, &cfg, rng, &link).unwrap();
        let honest_commits: BTreeSet<[u8; 32]> = v
            .iter()
            .filter(|s| s.fault_mode == FaultMode::Honest)
            .filter_map(|s| s.committed)
            .collect();
        assert!(
            honest_commits.len() <= 1,
            "trial {trial}: n={n} byz={k} split commit"
        );
        let t = out.timing;
        assert_eq!(
            t.t_consensus_ms,
            t.t_prepare_ms.max(t.t_commit_ms) + t.t_network_ms
        );
    }
}

#[test]
fn liveness_with_up_to_f_crashes() {
    let rng = &mut seed::rng(101, &[]);
    let cfg = FaultConfig::default();
    for n in 4..=10 {
        let f = (n - 1) / 3;
        for _ in 0..50 {
            let mut others: Vec<usize> = (1..n).collect();
            others.shuffle(rng);
            let k = rng.random_range(0..=f);
            let mut v = validators(n, &others[..k], FaultMode::Crashed);
            let out = pbft_round(&mut v, &[9; 32], 0, 0, &cfg, rng, &lossy(0.0)).unwrap();
            assert!(out.committed, "n={n} crashed={k}");
            assert!(v
                .iter()
                .filter(|s| s.fault_mode == FaultMode::Honest)
                .all(|s| s.committed == Some([9; 32])));
        }
    }
}

/// With f + 1 validators down, n − f votes can never be collected. Byzantine
/// equivocators are excluded here: they show the genuine digest to half of the
/// network and can thereby complete a quorum for it.
#[test]
fn no_commit_beyond_fault_threshold() {
    let rng = &mut seed::rng(102, &[]);
    for n in 4..=10 {
        let f = (n - 1) / 3;
        for (mode, equivocate) in [(FaultMode::Crashed, true), (FaultMode::Byzantine, false)] {
            let cfg = FaultConfig {
                equivocate,
                ..FaultConfig::default()
            };
            for _ in 0..30 {
                let mut idx: Vec<usize> = (0..n).collect();
                idx.shuffle(rng);
                let mut v = validators(n, &idx[..f + 1], mode);
                let view = rng.random_range(0..n as u64);
                let out = pbft_round(&mut v, &[5; 32], view, 0, &cfg, rng, &lossy(0.0)).unwrap();
                assert!(!out.committed, "n={n} {mode:?}");
            }
        }
    }
    assert_eq!(quorum(4), 3);
}

#[test]
fn message_count_scales_quadratically() {
    let cfg = FaultConfig::default();
    let count = |n: usize| {
        let mut v = validators(n, &[], FaultMode::Honest);
        pbft_round(
            &mut v,
            &[1; 32],
            0,
            0,
            &cfg,
            &mut seed::rng(7, &[]),
            &lossy(0.0),
        )
        .unwrap()
        .message_count as f64
    };
    let (m4, m8, m16) = (count(4), count(8), count(16));
    for (a, b) in [(m4, m8), (m8, m16)] {
        let ratio = (b / a) / 4.0;
        assert!((0.8..=1.2).contains(&ratio), "{a} -> {b}");
    }
}
