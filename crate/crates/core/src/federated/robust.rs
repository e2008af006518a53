use super::FederatedError;
use crate::scalar::{sort_reals, Real};

/// Type-7 (linear interpolation) sample quantile of an ascending slice.
pub fn quantile<T: Real>(sorted: &[T], p: f64) -> T {
    assert!(!sorted.is_empty(), "quantile of empty slice");
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let h = T::lit(pos - lo as f64);
    if lo == hi || h == T::zero() {
        sorted[lo]
    } else {
        sorted[lo] + h * (sorted[hi] - sorted[lo])
    }
}

fn median_sorted<T: Real>(sorted: &[T]) -> T {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        let (a, b) = (sorted[n / 2 - 1], sorted[n / 2]);
        a + (b - a) / T::lit(2.0)
    }
}

fn check_shape<T>(updates: &[Vec<T>], trim_ratio: f64) -> Result<usize, FederatedError> {
    if updates.len() < 3 {
        return Err(FederatedError::TooFewUpdates(updates.len()));
    }
    if !(0.0..0.5).contains(&trim_ratio) {
        return Err(FederatedError::InvalidTrimRatio(trim_ratio));
    }
    let dim = updates[0].len();
    if let Some(u) = updates.iter().find(|u| u.len() != dim) {
        return Err(FederatedError::DimensionMismatch {
            expected: dim,
            got: u.len(),
        });
    }
    Ok(dim)
}

/// Coordinate-wise trimmed mean.
///
/// Per coordinate, values whose absolute deviation from the median exceeds
/// the `(1 − β)` quantile of all absolute deviations are removed and the
/// rest averaged. The values closest to the median always survive. Survivors
/// are summed in sorted order as offsets from the median, so the result does
/// not depend on the order of `updates`.
pub fn trimmed_mean<T: Real>(
    updates: &[Vec<T>],
    trim_ratio: f64,
) -> Result<Vec<T>, FederatedError> {
    let ones = vec![1.0; updates.len()];
    trimmed_mean_weighted(updates, &ones, trim_ratio)
}

/// Like [`trimmed_mean`], but survivors are averaged with the given weights
/// (typically client sample counts).
pub fn trimmed_mean_weighted<T: Real>(
    updates: &[Vec<T>],
    weights: &[f64],
    trim_ratio: f64,
) -> Result<Vec<T>, FederatedError> {
    let dim = check_shape(updates, trim_ratio)?;
    if weights.len() != updates.len() {
        return Err(FederatedError::WeightMismatch {
            updates: updates.len(),
            weights: weights.len(),
        });
    }
    let n = updates.len();
    let mut column: Vec<(T, T)> = Vec::with_capacity(n);
    let mut values: Vec<T> = Vec::with_capacity(n);
    let mut devs: Vec<T> = Vec::with_capacity(n);
    let mut out = Vec::with_capacity(dim);
    for j in 0..dim {
        column.clear();
        column.extend(updates.iter().zip(weights).map(|(u, &w)| (u[j], T::lit(w))));
        column.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        values.clear();
        values.extend(column.iter().map(|c| c.0));
        let med = median_sorted(&values);

        devs.clear();
        devs.extend(values.iter().map(|&v| (v - med).abs()));
        sort_reals(&mut devs);
        let cut = quantile(&devs, 1.0 - trim_ratio);

        let (mut acc, mut total) = (T::zero(), T::zero());
        for &(v, w) in column.iter().filter(|(v, _)| (*v - med).abs() <= cut) {
            acc = acc + w * (v - med);
            total = total + w;
        }
        out.push(if total > T::zero() {
            med + acc / total
        } else {
            med
        });
    }
    Ok(out)
}

/// For each update, the fraction of coordinates in which the trimmed mean at
/// `trim_ratio` discards it.
pub fn trimmed_fraction<T: Real>(
    updates: &[Vec<T>],
    trim_ratio: f64,
) -> Result<Vec<f64>, FederatedError> {
    let dim = check_shape(updates, trim_ratio)?;
    let mut hits = vec![0usize; updates.len()];
    let mut values: Vec<T> = Vec::with_capacity(updates.len());
    for j in 0..dim {
        values.clear();
        values.extend(updates.iter().map(|u| u[j]));
        sort_reals(&mut values);
        let med = median_sorted(&values);
        let mut devs: Vec<T> = values.iter().map(|&v| (v - med).abs()).collect();
        sort_reals(&mut devs);
        let cut = quantile(&devs, 1.0 - trim_ratio);
        for (h, u) in hits.iter_mut().zip(updates) {
            *h += usize::from((u[j] - med).abs() > cut);
        }
    }
    Ok(hits
        .into_iter()
        .map(|h| if dim == 0 { 0.0 } else { h as f64 / dim as f64 })
        .collect())
}

/// Plain coordinate mean, the undefended baseline.
pub(crate) fn coordinate_mean<T: Real>(updates: &[Vec<T>], weights: &[f64]) -> Vec<T> {
    let dim = updates.first().map_or(0, Vec::len);
    let total: f64 = weights.iter().sum();
    (0..dim)
        .map(|j| {
            updates
                .iter()
                .zip(weights)
                .map(|(u, &w)| u[j] * T::lit(w))
                .sum::<T>()
                / T::lit(total)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Direct transcription of the definition: every quantity is recomputed
    /// by enumeration, with no shared helpers.
    fn brute_force(updates: &[Vec<f64>], beta: f64) -> Vec<f64> {
        let n = updates.len();
        (0..updates[0].len())
            .map(|j| {
                let xs: Vec<f64> = updates.iter().map(|u| u[j]).collect();
                // Order statistic k: the value with exactly k values strictly below it
                // (ties broken by index).
                let order = |v: &[f64], k: usize| -> f64 {
                    for (i, &x) in v.iter().enumerate() {
                        let below = v
                            .iter()
                            .enumerate()
                            .filter(|&(m, &y)| y < x || (y == x && m < i))
                            .count();
                        if below == k {
                            return x;
                        }
                    }
                    unreachable!()
                };
                let med = if n % 2 == 1 {
                    order(&xs, n / 2)
                } else {
                    (order(&xs, n / 2 - 1) + order(&xs, n / 2)) / 2.0
                };
                let devs: Vec<f64> = xs.iter().map(|x| (x - med).abs()).collect();
                let pos = (1.0 - beta) * (n - 1) as f64;
                let k = pos.floor() as usize;
                let lo = order(&devs, k);
                let hi = order(&devs, (k + 1).min(n - 1));
                let q = lo + (pos - k as f64) * (hi - lo);
                let kept: Vec<f64> = xs
                    .iter()
                    .zip(&devs)
                    .filter(|(_, &d)| d <= q)
                    .map(|(x, _)| *x)
                    .collect();
                kept.iter().sum::<f64>() / kept.len() as f64
            })
            .collect()
    }

    #[test]
    fn identical_updates_return_value_exactly() {
        let v = vec![0.1, -3.7, 1e-9, 12345.678];
        assert_eq!(trimmed_mean(&vec![v.clone(); 7], 0.3).unwrap(), v);
        let v32 = vec![0.1f32, -2.2];
        assert_eq!(trimmed_mean(&vec![v32.clone(); 4], 0.3).unwrap(), v32);
    }

    #[test]
    fn trimmed_fraction_marks_outliers_in_every_coordinate() {
        let mut ups: Vec<Vec<f64>> = (0..9)
            .map(|i| vec![i as f64 * 0.01, -2.0, 1.0])
            .collect();
        ups.push(vec![100.0, 100.0, 100.0]);
        let frac = trimmed_fraction(&ups, 0.3).unwrap();
        assert_eq!(frac[9], 1.0);
        assert!(frac[..9].iter().all(|&f| f < 0.5));
        assert!(matches!(
            trimmed_fraction(&ups[..2], 0.3),
            Err(FederatedError::TooFewUpdates(2))
        ));
    }

    #[test]
    fn single_huge_outlier_is_removed() {
        let mut u = vec![vec![1.0]; 9];
        u.push(vec![1e6]);
        assert_eq!(trimmed_mean(&u, 0.3).unwrap(), vec![1.0]);
        assert_eq!(brute_force(&u, 0.3), vec![1.0]);
    }

    #[test]
    fn zero_trim_is_plain_mean() {
        let u: Vec<Vec<f64>> = vec![
            vec![1.0, 4.0],
            vec![2.0, -1.0],
            vec![6.0, 0.5],
            vec![-3.0, 2.0],
        ];
        let got = trimmed_mean(&u, 0.0).unwrap();
        assert!((got[0] - 1.5).abs() < 1e-12);
        assert!((got[1] - 1.375).abs() < 1e-12);
    }

    #[test]
    fn shape_errors() {
        assert_eq!(
            trimmed_mean(&[vec![1.0], vec![2.0]], 0.3),
            Err(FederatedError::TooFewUpdates(2))
        );
        assert_eq!(
            trimmed_mean(&[vec![1.0], vec![2.0, 3.0], vec![1.0]], 0.3),
            Err(FederatedError::DimensionMismatch {
                expected: 1,
                got: 2
            })
        );
        assert_eq!(
            trimmed_mean(&vec![vec![1.0f64]; 3], 0.5),
            Err(FederatedError::InvalidTrimRatio(0.5))
        );
    }

    #[test]
    fn weighted_mode_uses_survivor_weights() {
        let u: Vec<Vec<f64>> = vec![vec![1.0], vec![2.0], vec![3.0], vec![100.0]];
        let got = trimmed_mean_weighted(&u, &[1.0, 1.0, 2.0, 50.0], 0.3).unwrap();
        // Median 2.5, deviations (1.5, 0.5, 0.5, 97.5); 0.7 quantile = 1.5 + 0.1·96 = 11.1.
        assert!((got[0] - (1.0 + 2.0 + 6.0) / 4.0).abs() < 1e-12);
    }

    #[test]
    fn quantile_interpolates() {
        let s = [0.0f64, 1.0, 2.0, 10.0];
        assert_eq!(quantile(&s, 0.0), 0.0);
        assert_eq!(quantile(&s, 1.0), 10.0);
        assert!((quantile(&s, 0.5) - 1.5).abs() < 1e-15);
    }

    fn update_sets() -> impl Strategy<Value = Vec<Vec<f64>>> {
        (3usize..=12, 1usize..=3).prop_flat_map(|(n, d)| {
            prop::collection::vec(prop::collection::vec(-100.0f64..100.0, d), n)
        })
    }

    proptest! {
        #[test]
        fn matches_brute_force(u in update_sets(), beta in 0.0f64..0.49) {
            let got = trimmed_mean(&u, beta).unwrap();
            let want = brute_force(&u, beta);
            for (g, w) in got.iter().zip(&want) {
                prop_assert!((g - w).abs() <= 1e-12 * (1.0 + w.abs()), "{g} vs {w}");
            }
        }

        #[test]
        fn permutation_invariant(u in update_sets(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut p = u.clone();
            p.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(trimmed_mean(&u, 0.3).unwrap(), trimmed_mean(&p, 0.3).unwrap());
        }

        /// Outliers (at most 20%) placed farther than the honest spread from
        /// the honest range cannot pull the aggregate outside that range.
        #[test]
        fn far_outliers_have_no_influence(
            honest in prop::collection::vec(-1.0f64..1.0, 8..=16),
            far in prop::collection::vec((any::<bool>(), 1e-6f64..1e9), 0..=4),
        ) {
            let lo = honest.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = honest.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let spread = hi - lo;
            let n_out = far.len().min(honest.len() / 4);
            let mut u: Vec<Vec<f64>> = honest.iter().map(|&h| vec![h]).collect();
            for &(up, gap) in &far[..n_out] {
                u.push(vec![if up { hi + spread + gap } else { lo - spread - gap }]);
            }
            let got = trimmed_mean(&u, 0.3).unwrap()[0];
            prop_assert!(got >= lo - 1e-12 && got <= hi + 1e-12, "{got} not in [{lo}, {hi}]");
        }
    }
}
