use rand::Rng;
use rand_distr::StandardNormal;

use super::{ByzantineBehavior, ByzantineKind, ClientUpdate, FederatedError, GlobalModel};
use crate::ids::VehicleId;
use crate::scalar::Real;

/// A client's private objective `F_k`.
pub trait LocalLoss<T: Real> {
    fn sample_count(&self) -> usize;
    fn loss(&self, w: &[T]) -> T;
    fn gradient(&self, w: &[T]) -> Vec<T>;
    /// The objective an attacker optimises when it inverts its labels.
    fn label_flipped(&self) -> Self
    where
        Self: Sized;
}

/// Binary logistic regression; the last model coordinate is the bias.
#[derive(Clone, Debug, PartialEq)]
pub struct LogisticData<T> {
    pub xs: Vec<Vec<T>>,
    /// Labels in {0, 1}.
    pub ys: Vec<T>,
    pub l2: T,
}

fn sigmoid<T: Real>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

fn softplus<T: Real>(z: T) -> T {
    z.max(T::zero()) + (-z.abs()).exp().ln_1p()
}

impl<T: Real> LogisticData<T> {
    fn logit(&self, w: &[T], x: &[T]) -> T {
        let d = x.len();
        x.iter().zip(&w[..d]).map(|(&a, &b)| a * b).sum::<T>() + w[d]
    }
}

impl<T: Real> LocalLoss<T> for LogisticData<T> {
    fn sample_count(&self) -> usize {
        self.xs.len()
    }

    fn loss(&self, w: &[T]) -> T {
        let n = T::from_count(self.xs.len());
        let data: T = self
            .xs
            .iter()
            .zip(&self.ys)
            .map(|(x, &y)| {
                let z = self.logit(w, x);
                softplus(z) - y * z
            })
            .sum();
        let d = w.len() - 1;
        data / n + self.l2 * T::lit(0.5) * w[..d].iter().map(|&v| v * v).sum::<T>()
    }

    fn gradient(&self, w: &[T]) -> Vec<T> {
        let n = T::from_count(self.xs.len());
        let d = w.len() - 1;
        let mut g = vec![T::zero(); w.len()];
        for (x, &y) in self.xs.iter().zip(&self.ys) {
            let r = sigmoid(self.logit(w, x)) - y;
            for (gi, &xi) in g.iter_mut().zip(x) {
                *gi = *gi + r * xi;
            }
            g[d] = g[d] + r;
        }
        for (i, gi) in g.iter_mut().enumerate() {
            *gi = *gi / n;
            if i < d {
                *gi = *gi + self.l2 * w[i];
            }
        }
        g
    }

    fn label_flipped(&self) -> Self {
        LogisticData {
            xs: self.xs.clone(),
            ys: self.ys.iter().map(|&y| T::one() - y).collect(),
            l2: self.l2,
        }
    }
}

/// `F(w) = ½ Σ a_i (w_i − c_i)²` with diagonal curvature `a`.
#[derive(Clone, Debug, PartialEq)]
pub struct Quadratic<T> {
    pub center: Vec<T>,
    pub curvature: Vec<T>,
}

impl<T: Real> Quadratic<T> {
    pub fn isotropic(center: Vec<T>) -> Self {
        let curvature = vec![T::one(); center.len()];
        Quadratic { center, curvature }
    }
}

impl<T: Real> LocalLoss<T> for Quadratic<T> {
    fn sample_count(&self) -> usize {
        1
    }

    fn loss(&self, w: &[T]) -> T {
        w.iter()
            .zip(&self.center)
            .zip(&self.curvature)
            .map(|((&wi, &ci), &ai)| T::lit(0.5) * ai * (wi - ci) * (wi - ci))
            .sum()
    }

    fn gradient(&self, w: &[T]) -> Vec<T> {
        w.iter()
            .zip(&self.center)
            .zip(&self.curvature)
            .map(|((&wi, &ci), &ai)| ai * (wi - ci))
            .collect()
    }

    /// Mirrors the optimum through the origin.
    fn label_flipped(&self) -> Self {
        Quadratic {
            center: self.center.iter().map(|&c| -c).collect(),
            curvature: self.curvature.clone(),
        }
    }
}

/// One full-batch gradient step, returned as the difference
/// `w_k⁽ᵗ⁺¹⁾ − w⁽ᵗ⁾ = −η ∇F_k(w⁽ᵗ⁾)`.
pub fn local_train<T: Real, L: LocalLoss<T>>(
    vehicle: VehicleId,
    global: &GlobalModel<T>,
    local: &L,
    learning_rate: f64,
) -> Result<ClientUpdate<T>, FederatedError> {
    if local.sample_count() == 0 {
        return Err(FederatedError::EmptyLocalData);
    }
    if !(learning_rate > 0.0 && learning_rate.is_finite()) {
        return Err(FederatedError::NonPositiveLearningRate(learning_rate));
    }
    let eta = T::lit(learning_rate);
    let grad = local.gradient(&global.weights);
    if grad.len() != global.dim() {
        return Err(FederatedError::DimensionMismatch {
            expected: global.dim(),
            got: grad.len(),
        });
    }
    let stepped: Vec<T> = global
        .weights
        .iter()
        .zip(&grad)
        .map(|(&w, &g)| w - eta * g)
        .collect();
    Ok(ClientUpdate {
        vehicle_id: vehicle,
        round: global.round,
        delta: stepped
            .iter()
            .zip(&global.weights)
            .map(|(&a, &b)| a - b)
            .collect(),
        sample_count: local.sample_count(),
    })
}

/// The update a Byzantine client submits in place of its honest one.
pub fn byzantine_update<T: Real, L: LocalLoss<T>, R: Rng + ?Sized>(
    behavior: &ByzantineBehavior,
    vehicle: VehicleId,
    global: &GlobalModel<T>,
    local: &L,
    learning_rate: f64,
    rng: &mut R,
) -> Result<ClientUpdate<T>, FederatedError> {
    let m = T::lit(behavior.magnitude);
    let mut normal = || T::lit(rng.sample::<f64, _>(StandardNormal));
    let mut update = local_train(vehicle, global, local, learning_rate)?;
    update.delta = match behavior.kind {
        ByzantineKind::SignFlip => update.delta.iter().map(|&g| -m * g).collect(),
        ByzantineKind::LargeNorm => {
            let dir: Vec<T> = (0..global.dim()).map(|_| normal()).collect();
            let len = dir.iter().map(|&v| v * v).sum::<T>().sqrt();
            dir.into_iter().map(|v| m * v / len).collect()
        }
        ByzantineKind::RandomNoise => (0..global.dim()).map(|_| m * normal()).collect(),
        ByzantineKind::LabelFlip => {
            local_train(vehicle, global, &local.label_flipped(), learning_rate)?.delta
        }
    };
    Ok(update)
}
