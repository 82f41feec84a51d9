//! CART decision tree with Gini impurity. Thresholds sit at midpoints
//! between sorted distinct values; ties break toward the lowest feature
//! index, then the lowest threshold, so training is fully deterministic.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Dataset, MlError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        pos: usize,
        neg: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub num_features: usize,
    pub nodes: Vec<Node>,
}

#[derive(Debug, Clone)]
pub struct TreeConfig {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            max_depth: None,
            min_samples_split: 2,
        }
    }
}

impl TreeModel {
    /// Positive fraction at the reached leaf.
    pub fn score(&self, x: &[f64]) -> f64 {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { pos, neg } => {
                    let total = pos + neg;
                    return if total == 0 {
                        1.0
                    } else {
                        *pos as f64 / total as f64
                    };
                }
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    idx = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

struct BestSplit {
    impurity: f64,
    feature: usize,
    threshold: f64,
}

/// Weighted Gini of a candidate partition.
fn weighted_gini(lp: usize, ln: usize, rp: usize, rn: usize) -> f64 {
    let gini = |p: usize, n: usize| -> f64 {
        let total = (p + n) as f64;
        if total == 0.0 {
            return 0.0;
        }
        let fp = p as f64 / total;
        let fn_ = n as f64 / total;
        1.0 - fp * fp - fn_ * fn_
    };
    let left = (lp + ln) as f64;
    let right = (rp + rn) as f64;
    let total = left + right;
    (left / total) * gini(lp, ln) + (right / total) * gini(rp, rn)
}

fn best_split_for_feature(
    ds: &Dataset,
    indices: &[usize],
    feature: usize,
) -> Option<(f64, f64)> {
    let mut pairs: Vec<(f64, bool)> = indices
        .iter()
        .map(|&i| (ds.features[i][feature], ds.targets[i]))
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));

    let total_pos = pairs.iter().filter(|(_, t)| *t).count();
    let total = pairs.len();
    let mut left_pos = 0usize;
    let mut left_n = 0usize;
    let mut best: Option<(f64, f64)> = None; // (impurity, threshold)
    for w in 0..total - 1 {
        if pairs[w].1 {
            left_pos += 1;
        }
        left_n += 1;
        if pairs[w].0 == pairs[w + 1].0 {
            continue;
        }
        let threshold = pairs[w].0 + (pairs[w + 1].0 - pairs[w].0) / 2.0;
        let imp = weighted_gini(
            left_pos,
            left_n - left_pos,
            total_pos - left_pos,
            (total - left_n) - (total_pos - left_pos),
        );
        let better = match best {
            None => true,
            Some((bi, _)) => imp < bi,
        };
        if better {
            best = Some((imp, threshold));
        }
    }
    best
}

pub(super) struct TreeBuilder<'a> {
    pub ds: &'a Dataset,
    pub cfg: &'a TreeConfig,
    /// When present, each split draws this many candidate features.
    pub subset: Option<(usize, ChaCha8Rng)>,
    pub nodes: Vec<Node>,
}

impl<'a> TreeBuilder<'a> {
    pub fn new(ds: &'a Dataset, cfg: &'a TreeConfig, subset: Option<(usize, ChaCha8Rng)>) -> Self {
        TreeBuilder {
            ds,
            cfg,
            subset,
            nodes: Vec::new(),
        }
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let d = self.ds.num_features();
        match &mut self.subset {
            None => (0..d).collect(),
            Some((m, rng)) => {
                // partial Fisher-Yates; sorted so feature scan order is fixed
                let m = (*m).min(d);
                let mut pool: Vec<usize> = (0..d).collect();
                for i in 0..m {
                    let j = rng.gen_range(i..d);
                    pool.swap(i, j);
                }
                let mut chosen = pool[..m].to_vec();
                chosen.sort_unstable();
                chosen
            }
        }
    }

    pub fn build(&mut self, indices: &[usize], depth: usize) -> usize {
        let pos = indices.iter().filter(|&&i| self.ds.targets[i]).count();
        let neg = indices.len() - pos;
        let depth_reached = self.cfg.max_depth.map(|d| depth >= d).unwrap_or(false);
        if pos == 0 || neg == 0 || indices.len() < self.cfg.min_samples_split || depth_reached {
            return self.push_leaf(pos, neg);
        }

        let candidates = self.candidate_features();
        let mut best: Option<BestSplit> = None;
        for feature in candidates {
            if let Some((impurity, threshold)) = best_split_for_feature(self.ds, indices, feature) {
                let better = match &best {
                    None => true,
                    Some(b) => impurity < b.impurity,
                };
                if better {
                    best = Some(BestSplit {
                        impurity,
                        feature,
                        threshold,
                    });
                }
            }
        }
        let Some(best) = best else {
            // no informative split among the candidates
            return self.push_leaf(pos, neg);
        };

        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
            .iter()
            .partition(|&&i| self.ds.features[i][best.feature] <= best.threshold);
        let node_idx = self.nodes.len();
        self.nodes.push(Node::Leaf { pos, neg }); // placeholder
        let left = self.build(&left_idx, depth + 1);
        let right = self.build(&right_idx, depth + 1);
        self.nodes[node_idx] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        node_idx
    }

    fn push_leaf(&mut self, pos: usize, neg: usize) -> usize {
        self.nodes.push(Node::Leaf { pos, neg });
        self.nodes.len() - 1
    }
}

pub fn train_decision_tree(ds: &Dataset, cfg: &TreeConfig) -> Result<super::Model, MlError> {
    ds.require_both_classes()?;
    let indices: Vec<usize> = (0..ds.len()).collect();
    let mut builder = TreeBuilder::new(ds, cfg, None);
    builder.build(&indices, 0);
    Ok(super::Model::Tree(TreeModel {
        num_features: ds.num_features(),
        nodes: builder.nodes,
    }))
}
