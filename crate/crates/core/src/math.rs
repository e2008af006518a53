//! Small dense-vector helpers shared by the learners.

use serde::{Deserialize, Serialize};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Population standard deviation.
pub fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len().max(1) as f64).sqrt()
}

/// Per-column z-scoring fitted on a training matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Columns with (near) zero spread get a floor scale of
    /// `1e-3 + 1e-2·|mean|` so constant channels still produce finite scores.
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [f64]>, dim: usize) -> Self {
        let mut n = 0usize;
        let mut sum = vec![0.0; dim];
        let mut sq = vec![0.0; dim];
        for r in rows {
            n += 1;
            for k in 0..dim {
                sum[k] += r[k];
                sq[k] += r[k] * r[k];
            }
        }
        let n = n.max(1) as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let scale = (0..dim)
            .map(|k| {
                let var = (sq[k] / n - mean[k] * mean[k]).max(0.0);
                var.sqrt().max(1e-3 + 1e-2 * mean[k].abs())
            })
            .collect();
        Standardizer { mean, scale }
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        for k in 0..self.mean.len() {
            out[k] = (x[k] - self.mean[k]) / self.scale[k];
        }
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.mean.len()];
        self.apply(x, &mut out);
        out
    }
}

/// Mean logistic loss `(1/n) Σ softplus(−y·(w·x + b))` with labels in {0, 1},
/// plus `l2/2·‖w‖²`.
pub fn logistic_loss(w: &[f64], b: f64, xs: &[Vec<f64>], ys: &[f64], l2: f64) -> f64 {
    let n = xs.len().max(1) as f64;
    let data: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, &y)| {
            let z = dot(w, x) + b;
            softplus(z) - y * z
        })
        .sum::<f64>()
        / n;
    data + 0.5 * l2 * dot(w, w)
}

/// Gradient of [`logistic_loss`] with respect to `(w, b)`.
pub fn logistic_grad(w: &[f64], b: f64, xs: &[Vec<f64>], ys: &[f64], l2: f64) -> (Vec<f64>, f64) {
    let n = xs.len().max(1) as f64;
    let mut gw: Vec<f64> = w.iter().map(|wi| l2 * wi).collect();
    let mut gb = 0.0;
    for (x, &y) in xs.iter().zip(ys) {
        let r = (sigmoid(dot(w, x) + b) - y) / n;
        for (g, xi) in gw.iter_mut().zip(x) {
            *g += r * xi;
        }
        gb += r;
    }
    (gw, gb)
}

/// Full-batch gradient descent on the logistic loss.
pub fn fit_logistic(
    xs: &[Vec<f64>],
    ys: &[f64],
    l2: f64,
    lr: f64,
    iters: usize,
) -> (Vec<f64>, f64) {
    let dim = xs.first().map_or(0, Vec::len);
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    for _ in 0..iters {
        let (gw, gb) = logistic_grad(&w, b, xs, ys, l2);
        for (wi, g) in w.iter_mut().zip(&gw) {
            *wi -= lr * g;
        }
        b -= lr * gb;
    }
    (w, b)
}
