use std::collections::BTreeMap;

use haven::edge::{
    train_base_scorers, ClassifierConfig, DetectorConfig, EdgeDetector, EdgeError, ThreatClass,
    WindowFeatures,
};
use haven::sensors::{
    build_corpus, generate_clean_stream, label_stream, make_windows, AttackKind, AttackMagnitudes,
    CorpusSpec, DriveProfile, LabeledWindow,
};
use haven::VehicleId;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn clean_windows(vehicles: u32, seed: u64) -> Vec<LabeledWindow> {
    (0..vehicles)
        .flat_map(|v| {
            let s =
                generate_clean_stream(seed, VehicleId(v), 2_000, &DriveProfile::default()).unwrap();
            make_windows(&label_stream(&s), VehicleId(v), 50, 50).unwrap()
        })
        .collect()
}

fn two_clusters() -> Vec<LabeledWindow> {
    let mut out = clean_windows(30, 1);
    for (i, w) in out.iter_mut().enumerate() {
        if i % 2 == 1 {
            for s in &mut w.window.samples {
                s.lidar_mean_distance += 10.0;
                s.cam_brightness += 0.3;
            }
            w.is_attack = true;
            w.attack_kind = Some(AttackKind::LidarSpoof);
        }
    }
    out
}

#[test]
fn separable_clusters_train_to_high_accuracy() {
    let trained = train_base_scorers(&two_clusters(), 11).unwrap();
    assert_eq!(trained.accuracies.len(), 3);
    for a in &trained.accuracies {
        assert!(*a > 0.9, "{:?}", trained.accuracies);
    }
}

#[test]
fn shuffled_labels_sit_at_chance() {
    let mut data = clean_windows(100, 2);
    let rng = &mut ChaCha8Rng::seed_from_u64(3);
    let mut labels: Vec<bool> = (0..data.len()).map(|i| i % 2 == 0).collect();
    labels.shuffle(rng);
    for (w, l) in data.iter_mut().zip(labels) {
        w.is_attack = l;
    }
    let trained = train_base_scorers(&data, 4).unwrap();
    for a in &trained.accuracies {
        assert!((0.4..=0.6).contains(a), "{:?}", trained.accuracies);
    }
}

#[test]
fn empty_and_single_class_are_rejected() {
    assert_eq!(
        train_base_scorers(&[], 1).err(),
        Some(EdgeError::EmptyTraining)
    );
    assert_eq!(
        train_base_scorers(&clean_windows(2, 1), 1).err(),
        Some(EdgeError::SingleClass)
    );
}

fn corpus(seed: u64, episodes: usize) -> Vec<LabeledWindow> {
    let spec = CorpusSpec {
        episodes,
        ..Default::default()
    };
    build_corpus(
        seed,
        &spec,
        &DriveProfile::default(),
        &AttackMagnitudes::default(),
    )
    .unwrap()
}

#[test]
fn detector_generalises_to_fresh_corpus() {
    let train = corpus(21, 150);
    let test = corpus(22, 80);
    let detector = EdgeDetector::from_trained(
        train_base_scorers(&train, 21).unwrap(),
        DetectorConfig::default(),
    )
    .unwrap();
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for w in &test {
        let v = detector.predict(&w.window).unwrap();
        match (v.is_anomaly, w.is_attack) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let acc = (tp + tn) as f64 / test.len() as f64;
    let f1 = 2.0 * tp as f64 / (2 * tp + fp + fn_) as f64;
    eprintln!("tp {tp} fp {fp} tn {tn} fn {fn_} acc {acc:.3} f1 {f1:.3}");
    assert!(acc >= 0.9 && f1 >= 0.88);
}

#[test]
fn attribution_confusion_is_diagonal_dominant() {
    let train = corpus(31, 150);
    let trained = train_base_scorers(&train, 31).unwrap();
    let baseline = trained.baseline;
    let cfg = ClassifierConfig::default();
    let mut confusion: BTreeMap<(AttackKind, ThreatClass), usize> = BTreeMap::new();
    for kind in AttackKind::SENSOR {
        let spec = CorpusSpec {
            episodes: 20,
            attack_fraction: 1.0,
            kinds: vec![kind],
            intensity: (1.0, 1.0),
            ..Default::default()
        };
        for w in build_corpus(
            32,
            &spec,
            &DriveProfile::default(),
            &AttackMagnitudes::default(),
        )
        .unwrap()
        {
            let class = baseline.classify_threat(&WindowFeatures::from_window(&w.window), &cfg);
            *confusion.entry((kind, class)).or_default() += 1;
        }
    }
    eprintln!("{confusion:?}");
    for kind in AttackKind::SENSOR {
        let total: usize = confusion
            .iter()
            .filter(|((k, _), _)| *k == kind)
            .map(|(_, n)| n)
            .sum();
        let hit = confusion
            .get(&(kind, ThreatClass::Attack(kind)))
            .copied()
            .unwrap_or(0);
        assert!(hit * 2 > total, "{kind}: {hit}/{total}");
    }
    let unknown = clean_windows(10, 33)
        .iter()
        .filter(|w| {
            baseline.classify_threat(&WindowFeatures::from_window(&w.window), &cfg)
                == ThreatClass::Unknown
        })
        .count();
    assert!(
        unknown >= 36,
        "{unknown}/40 clean windows attributed Unknown"
    );
}
