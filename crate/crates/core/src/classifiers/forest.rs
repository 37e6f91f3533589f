//! CART random forest with Gini impurity.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    argmax, ClassifierError, ClassifierModel, Hyperparameters, LabeledDataset, ModelParams, Result,
    MODEL_FORMAT_VERSION,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows trees until leaves are pure or unsplittable.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    /// Candidates per split; `None` means ceil(sqrt(D)).
    pub max_features: Option<usize>,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: None,
            min_samples_split: 2,
            max_features: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    /// Rows with `x[feature] <= threshold` go to `left`.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        counts: Vec<u32>,
    },
}

/// Nodes in a flat arena; index 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
}

impl DecisionTree {
    pub fn leaf_counts(&self, x: &[f64]) -> &[u32] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
                TreeNode::Leaf { counts } => return counts,
            }
        }
    }

    /// Majority class of the reached leaf.
    pub fn predict(&self, x: &[f64]) -> usize {
        let counts: Vec<f64> = self.leaf_counts(x).iter().map(|&c| c as f64).collect();
        argmax(&counts)
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], i: usize) -> usize {
            match &nodes[i] {
                TreeNode::Split { left, right, .. } => {
                    1 + walk(nodes, *left).max(walk(nodes, *right))
                }
                TreeNode::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub n_classes: usize,
    pub trees: Vec<DecisionTree>,
}

impl Forest {
    pub fn vote_fractions(&self, x: &[f64]) -> Vec<f64> {
        let mut votes = vec![0.0; self.n_classes];
        for t in &self.trees {
            votes[t.predict(x)] += 1.0;
        }
        let n = self.trees.len() as f64;
        votes.iter_mut().for_each(|v| *v /= n);
        votes
    }
}

fn gini(counts: &[u32], total: u32) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / t).powi(2)).sum::<f64>()
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    k: usize,
    mtry: usize,
    max_depth: usize,
    min_split: usize,
    nodes: Vec<TreeNode>,
    rng: ChaCha8Rng,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

impl Builder<'_> {
    fn counts(&self, idx: &[usize]) -> Vec<u32> {
        let mut c = vec![0u32; self.k];
        for &i in idx {
            c[self.y[i]] += 1;
        }
        c
    }

    /// Lowest weighted child impurity over thresholds of one feature.
    fn best_for_feature(
        &self,
        idx: &mut [usize],
        feature: usize,
        total: &[u32],
    ) -> Option<Candidate> {
        idx.sort_by(|&a, &b| self.x[a][feature].total_cmp(&self.x[b][feature]));
        let n = idx.len() as u32;
        let mut left = vec![0u32; self.k];
        let mut right = total.to_vec();
        let mut best: Option<Candidate> = None;
        for p in 0..idx.len() - 1 {
            let c = self.y[idx[p]];
            left[c] += 1;
            right[c] -= 1;
            let lo = self.x[idx[p]][feature];
            let hi = self.x[idx[p + 1]][feature];
            if lo >= hi {
                continue;
            }
            let nl = p as u32 + 1;
            let impurity =
                (nl as f64 * gini(&left, nl) + (n - nl) as f64 * gini(&right, n - nl)) / n as f64;
            if best.as_ref().is_none_or(|b| impurity < b.impurity) {
                let mid = lo + (hi - lo) / 2.0;
                let threshold = if mid < hi { mid } else { lo };
                best = Some(Candidate {
                    feature,
                    threshold,
                    impurity,
                });
            }
        }
        best
    }

    fn grow(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let counts = self.counts(idx);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || depth >= self.max_depth || idx.len() < self.min_split {
            self.nodes.push(TreeNode::Leaf { counts });
            return self.nodes.len() - 1;
        }
        let d = self.x[0].len();
        let mut order: Vec<usize> = (0..d).collect();
        order.shuffle(&mut self.rng);
        let mut best: Option<Candidate> = None;
        // Sample mtry candidates; if none of them varies, keep drawing.
        for (tried, &f) in order.iter().enumerate() {
            if tried >= self.mtry && best.is_some() {
                break;
            }
            if let Some(c) = self.best_for_feature(idx, f, &counts) {
                if best.as_ref().is_none_or(|b| c.impurity < b.impurity) {
                    best = Some(c);
                }
            }
        }
        let Some(split) = best else {
            self.nodes.push(TreeNode::Leaf { counts });
            return self.nodes.len() - 1;
        };
        let me = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { counts: Vec::new() });
        let f = split.feature;
        let x = self.x;
        idx.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]));
        let cut = idx.partition_point(|&i| x[i][f] <= split.threshold);
        let (l, r) = idx.split_at_mut(cut);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[me] = TreeNode::Split {
            feature: f,
            threshold: split.threshold,
            left,
            right,
        };
        me
    }
}

fn grow_tree(data: &LabeledDataset, params: &ForestParams, mtry: usize, seed: u64) -> DecisionTree {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = data.len();
    let mut idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
    let mut b = Builder {
        x: &data.features,
        y: &data.labels,
        k: data.n_classes(),
        mtry,
        max_depth: params.max_depth.unwrap_or(usize::MAX),
        min_split: params.min_samples_split.max(2),
        nodes: Vec::new(),
        rng,
    };
    b.grow(&mut idx, 0);
    DecisionTree { nodes: b.nodes }
}

pub fn train_random_forest(
    data: &LabeledDataset,
    params: &ForestParams,
) -> Result<ClassifierModel> {
    data.check_trainable()?;
    if params.n_trees == 0 {
        return Err(ClassifierError::Hyperparameter(
            "n_trees must be positive".into(),
        ));
    }
    let d = data.dim();
    if d == 0 {
        return Err(ClassifierError::Hyperparameter("no feature columns".into()));
    }
    let mtry = params
        .max_features
        .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
        .clamp(1, d);
    let mut master = ChaCha8Rng::seed_from_u64(params.seed);
    let seeds: Vec<u64> = (0..params.n_trees).map(|_| master.gen()).collect();
    let trees = seeds
        .par_iter()
        .map(|&s| grow_tree(data, params, mtry, s))
        .collect();
    Ok(ClassifierModel {
        format_version: MODEL_FORMAT_VERSION,
        label_vocabulary: data.label_vocabulary.clone(),
        feature_names: data.feature_names.clone(),
        normalization: None,
        hyperparameters: Hyperparameters::RandomForest(params.clone()),
        params: ModelParams::RandomForest(Forest {
            n_classes: data.n_classes(),
            trees,
        }),
    })
}
