//! Random forest over CART trees. Per-tree randomness is pre-seeded from
//! `seed + tree_index`, so results never depend on scheduling or thread
//! count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{TreeBuilder, TreeConfig, TreeModel};
use super::{Dataset, MlError, Model};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaxFeaturesPolicy {
    /// ceil(d/3) candidate features per split (the 10-tree variant).
    ThirdOfFeatures,
    /// floor(sqrt(d)) candidate features per split (the 100-tree variant).
    SqrtOfFeatures,
    /// every feature considered at every split
    AllFeatures,
}

impl MaxFeaturesPolicy {
    pub fn candidate_count(&self, num_features: usize) -> usize {
        match self {
            MaxFeaturesPolicy::ThirdOfFeatures => num_features.div_ceil(3).max(1),
            MaxFeaturesPolicy::SqrtOfFeatures => ((num_features as f64).sqrt().floor() as usize).max(1),
            MaxFeaturesPolicy::AllFeatures => num_features,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_features_policy: MaxFeaturesPolicy,
    pub seed: u64,
    pub tree: TreeConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub num_features: usize,
    pub trees: Vec<TreeModel>,
}

impl ForestModel {
    /// Fraction of trees voting positive.
    pub fn score(&self, x: &[f64]) -> f64 {
        let votes = self
            .trees
            .iter()
            .filter(|t| t.score(x) >= 0.5)
            .count();
        votes as f64 / self.trees.len() as f64
    }
}

pub fn train_random_forest(ds: &Dataset, cfg: &ForestConfig) -> Result<Model, MlError> {
    ds.require_both_classes()?;
    if cfg.n_trees == 0 {
        return Err(MlError::DegenerateDataset("n_trees must be positive".into()));
    }
    let n = ds.len();
    let m = cfg.max_features_policy.candidate_count(ds.num_features());
    let mut trees = Vec::with_capacity(cfg.n_trees);
    for tree_index in 0..cfg.n_trees {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(tree_index as u64));
        let bootstrap: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
        let mut builder = TreeBuilder::new(ds, &cfg.tree, Some((m, rng)));
        builder.build(&bootstrap, 0);
        trees.push(TreeModel {
            num_features: ds.num_features(),
            nodes: builder.nodes,
        });
    }
    Ok(Model::Forest(ForestModel {
        num_features: ds.num_features(),
        trees,
    }))
}
