//! Random forest of CART classification trees on `[x, b]`.
//!
//! Trees are grown on bootstrap samples with the Gini criterion, considering
//! `⌊√(d + 1)⌋` randomly chosen features per split. A leaf predicts the
//! fraction of accepted offers it holds; the forest averages its trees.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{factual_brier, targets, with_bid_column, EstimatorError, FittedModel, ForestGrid, Method, ModelPayload, Selection};
use crate::rng::{derive_seed, stream, stream_rng};
use crate::synthdata::PricingDataset;

const LEAF: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Node {
    feature: u32,
    threshold: f64,
    left: u32,
    right: u32,
    value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or hold a single sample.
    pub max_depth: Option<usize>,
    /// Features examined per split.
    pub max_features: usize,
    pub min_samples_split: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

struct Grower<'a> {
    x: &'a [f64],
    dim: usize,
    y: &'a [f64],
    params: TreeParams,
    nodes: Vec<Node>,
    features: Vec<usize>,
}

#[derive(Debug, Clone, Copy)]
struct Split {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

fn gini(pos: f64, total: f64) -> f64 {
    if total == 0.0 {
        return 0.0;
    }
    let p = pos / total;
    2.0 * p * (1.0 - p)
}

impl Grower<'_> {
    fn grow(&mut self, samples: &mut [usize], depth: usize, rng: &mut ChaCha8Rng) -> u32 {
        let n = samples.len();
        let pos: f64 = samples.iter().map(|&i| self.y[i]).sum();
        let value = pos / n as f64;
        let id = self.nodes.len() as u32;
        self.nodes.push(Node {
            feature: LEAF,
            threshold: 0.0,
            left: LEAF,
            right: LEAF,
            value,
        });
        let pure = pos == 0.0 || pos == n as f64;
        let depth_reached = self.params.max_depth.is_some_and(|m| depth >= m);
        if pure || depth_reached || n < self.params.min_samples_split.max(2) {
            return id;
        }
        let Some(split) = self.best_split(samples, rng) else {
            return id;
        };
        let (f, t) = (split.feature, split.threshold);
        let x = self.x;
        let dim = self.dim;
        samples.sort_by(|&a, &b| {
            let (va, vb) = (x[a * dim + f], x[b * dim + f]);
            va.total_cmp(&vb).then(a.cmp(&b))
        });
        let cut = samples.partition_point(|&i| x[i * dim + f] <= t);
        let (left, right) = samples.split_at_mut(cut);
        let l = self.grow(left, depth + 1, rng);
        let r = self.grow(right, depth + 1, rng);
        let node = &mut self.nodes[id as usize];
        node.feature = f as u32;
        node.threshold = t;
        node.left = l;
        node.right = r;
        id
    }

    /// Examines `max_features` random features; keeps drawing further
    /// features while none of the examined ones admits a split.
    fn best_split(&mut self, samples: &[usize], rng: &mut ChaCha8Rng) -> Option<Split> {
        self.features.shuffle(rng);
        let n = samples.len() as f64;
        let total_pos: f64 = samples.iter().map(|&i| self.y[i]).sum();
        let parent = gini(total_pos, n);
        let mut best: Option<Split> = None;
        let mut order: Vec<usize> = samples.to_vec();
        for (visited, &f) in self.features.clone().iter().enumerate() {
            if visited >= self.params.max_features && best.is_some() {
                break;
            }
            let x = self.x;
            let dim = self.dim;
            order.sort_by(|&a, &b| x[a * dim + f].total_cmp(&x[b * dim + f]));
            let mut left_pos = 0.0;
            for k in 0..order.len() - 1 {
                left_pos += self.y[order[k]];
                let (v, next) = (x[order[k] * dim + f], x[order[k + 1] * dim + f]);
                if v == next {
                    continue;
                }
                let nl = (k + 1) as f64;
                let nr = n - nl;
                let impurity = (nl * gini(left_pos, nl) + nr * gini(total_pos - left_pos, nr)) / n;
                if impurity < parent - 1e-15 && best.is_none_or(|b| impurity < b.impurity) {
                    let mut threshold = 0.5 * (v + next);
                    if threshold >= next {
                        threshold = v;
                    }
                    best = Some(Split {
                        feature: f,
                        threshold,
                        impurity,
                    });
                }
            }
        }
        best
    }
}

impl DecisionTree {
    /// Grows a tree on the rows listed in `samples` (repeats allowed).
    pub fn fit(x: &[f64], dim: usize, y: &[f64], samples: &[usize], params: TreeParams, rng: &mut ChaCha8Rng) -> Self {
        let mut grower = Grower {
            x,
            dim,
            y,
            params,
            nodes: Vec::new(),
            features: (0..dim).collect(),
        };
        let mut samples = samples.to_vec();
        if samples.is_empty() {
            return Self {
                nodes: vec![Node {
                    feature: LEAF,
                    threshold: 0.0,
                    left: LEAF,
                    right: LEAF,
                    value: 0.5,
                }],
            };
        }
        grower.grow(&mut samples, 0, rng);
        Self { nodes: grower.nodes }
    }

    pub fn predict(&self, features: &[f64]) -> f64 {
        let mut node = &self.nodes[0];
        while node.feature != LEAF {
            let next = if features[node.feature as usize] <= node.threshold {
                node.left
            } else {
                node.right
            };
            node = &self.nodes[next as usize];
        }
        node.value
    }

    /// Feature used at the root, if the root splits.
    pub fn root_feature(&self) -> Option<usize> {
        let root = self.nodes[0];
        (root.feature != LEAF).then_some(root.feature as usize)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: u32) -> usize {
            let n = nodes[i as usize];
            if n.feature == LEAF {
                0
            } else {
                1 + walk(nodes, n.left).max(walk(nodes, n.right))
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub trees: usize,
    pub max_depth: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    /// Number of model inputs, covariates plus the bid.
    pub n_features: usize,
    trees: Vec<DecisionTree>,
}

impl RandomForest {
    /// Grows `params.trees` trees; tree `t` uses seed `derive(seed, t)`.
    pub fn fit(x: &[f64], dim: usize, y: &[f64], params: ForestParams, seed: u64) -> Self {
        let n = y.len();
        let tree_params = TreeParams {
            max_depth: params.max_depth,
            max_features: ((dim as f64).sqrt().floor() as usize).max(1),
            min_samples_split: 2,
        };
        let trees = (0..params.trees)
            .map(|t| {
                let mut rng = stream_rng(derive_seed(seed, &[t as u64]), stream::FOREST);
                let bootstrap: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                DecisionTree::fit(x, dim, y, &bootstrap, tree_params, &mut rng)
            })
            .collect();
        Self { n_features: dim, trees }
    }

    pub fn predict(&self, features: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(features)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn response(&self, bid: f64, x: &[f64]) -> f64 {
        let mut features = x.to_vec();
        features.push(bid);
        self.predict(&features)
    }

    pub fn curve(&self, bids: &[f64], x: &[f64]) -> Vec<f64> {
        let mut features = x.to_vec();
        features.push(0.0);
        let last = features.len() - 1;
        bids.iter()
            .map(|&b| {
                features[last] = b;
                self.predict(&features)
            })
            .collect()
    }

    pub fn tree_count(&self) -> usize {
        self.trees.len()
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }
}

/// Grows one forest per grid member and keeps the best by validation Brier.
pub fn fit_random_forest(
    train: &PricingDataset,
    validation: &PricingDataset,
    grid: &ForestGrid,
    seed: u64,
) -> Result<FittedModel, EstimatorError> {
    if train.len() < 2 {
        return Err(EstimatorError::DegenerateData("a forest needs at least two rows".into()));
    }
    let x = with_bid_column(train);
    let y = targets(train);
    let dim = train.dim() + 1;
    let mut selection = Selection::new();
    for &trees in &grid.trees {
        for &depth in &grid.max_depth {
            let params = ForestParams {
                trees,
                max_depth: (depth > 0).then_some(depth),
            };
            let forest = RandomForest::fit(&x, dim, &y, params, seed);
            let brier = factual_brier(|b, row| forest.response(b, row), validation);
            let mut hp = super::Hyperparameters::new();
            hp.insert("trees".into(), trees.to_string());
            hp.insert(
                "max_depth".into(),
                params.max_depth.map_or("none".into(), |d| d.to_string()),
            );
            hp.insert("criterion".into(), "gini".into());
            selection.offer(brier, forest, hp);
        }
    }
    let (forest, hp, _) = selection.finish()?;
    Ok(FittedModel::new(Method::RandomForest, ModelPayload::RandomForest(forest)).with_hyperparameters(hp))
}
