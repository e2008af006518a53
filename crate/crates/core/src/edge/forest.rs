//! Bagged depth-limited decision trees over standardized window summaries.

use rand::seq::index::sample;
use rand::Rng;

use super::features::{WindowFeatures, SUMMARY_DIM};
use super::scorer::{BaseScorer, Prediction, ScorerKind};
use crate::math::Standardizer;
use crate::seed::SimRng;

#[derive(Clone, Debug)]
pub struct ForestParams {
    pub trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features examined per split.
    pub features_per_split: usize,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            trees: 25,
            max_depth: 6,
            min_leaf: 3,
            features_per_split: 7,
        }
    }
}

#[derive(Clone, Debug)]
enum Node {
    Leaf {
        vote: bool,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn vote(&self, x: &[f64]) -> bool {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { vote } => return vote,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

struct Builder<'a> {
    xs: &'a [Vec<f64>],
    ys: &'a [bool],
    params: &'a ForestParams,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn build(&mut self, idx: &mut [usize], depth: usize, rng: &mut SimRng) -> usize {
        let pos = idx.iter().filter(|&&i| self.ys[i]).count();
        let here = self.nodes.len();
        self.nodes.push(Node::Leaf {
            vote: 2 * pos > idx.len(),
        });
        if depth >= self.params.max_depth
            || pos == 0
            || pos == idx.len()
            || idx.len() < 2 * self.params.min_leaf
        {
            return here;
        }

        let dim = self.xs[0].len();
        let parent = gini(pos, idx.len());
        let mut best: Option<(f64, usize, f64)> = None;
        for feature in sample(rng, dim, self.params.features_per_split.min(dim)).iter() {
            idx.sort_by(|&a, &b| self.xs[a][feature].total_cmp(&self.xs[b][feature]));
            let mut left_pos = 0;
            for k in 1..idx.len() {
                left_pos += self.ys[idx[k - 1]] as usize;
                let (a, b) = (self.xs[idx[k - 1]][feature], self.xs[idx[k]][feature]);
                if a == b || k < self.params.min_leaf || idx.len() - k < self.params.min_leaf {
                    continue;
                }
                let n = idx.len() as f64;
                let impurity = (k as f64 / n) * gini(left_pos, k)
                    + ((idx.len() - k) as f64 / n) * gini(pos - left_pos, idx.len() - k);
                if impurity < parent - 1e-12 && best.is_none_or(|(bi, _, _)| impurity < bi) {
                    best = Some((impurity, feature, 0.5 * (a + b)));
                }
            }
        }
        let Some((_, feature, threshold)) = best else {
            return here;
        };
        let mid = partition(idx, |i| self.xs[i][feature] <= threshold);
        let (l, r) = idx.split_at_mut(mid);
        let left = self.build(l, depth + 1, rng);
        let right = self.build(r, depth + 1, rng);
        self.nodes[here] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        here
    }
}

fn partition(idx: &mut [usize], pred: impl Fn(usize) -> bool) -> usize {
    let mut mid = 0;
    for k in 0..idx.len() {
        if pred(idx[k]) {
            idx.swap(mid, k);
            mid += 1;
        }
    }
    mid
}

/// Score is the fraction of trees voting "anomalous"; uncertainty is the
/// variance `p(1 − p)` of those votes.
#[derive(Clone, Debug)]
pub struct ForestScorer {
    standardizer: Standardizer,
    trees: Vec<Tree>,
}

impl ForestScorer {
    pub fn train(
        summaries: &[[f64; SUMMARY_DIM]],
        labels: &[bool],
        params: &ForestParams,
        rng: &mut SimRng,
    ) -> Self {
        let standardizer = Standardizer::fit(summaries.iter().map(|s| s.as_slice()), SUMMARY_DIM);
        let xs: Vec<Vec<f64>> = summaries
            .iter()
            .map(|s| standardizer.transform(s))
            .collect();
        let n = xs.len();
        let trees = (0..params.trees)
            .map(|_| {
                let mut idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                let mut b = Builder {
                    xs: &xs,
                    ys: labels,
                    params,
                    nodes: Vec::new(),
                };
                b.build(&mut idx, 0, rng);
                Tree { nodes: b.nodes }
            })
            .collect();
        ForestScorer {
            standardizer,
            trees,
        }
    }

    pub fn tree_count(&self) -> usize {
        self.trees.len()
    }
}

impl BaseScorer for ForestScorer {
    fn kind(&self) -> ScorerKind {
        ScorerKind::ForestScorer
    }

    fn predict(&self, features: &WindowFeatures) -> Prediction {
        let mut x = [0.0; SUMMARY_DIM];
        self.standardizer.apply(&features.summary, &mut x);
        let votes = self.trees.iter().filter(|t| t.vote(&x)).count();
        let p = votes as f64 / self.trees.len().max(1) as f64;
        Prediction {
            score: p,
            uncertainty: p * (1.0 - p),
        }
    }
}
