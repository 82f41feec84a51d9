//! Phase III classifiers: decision tree, random forest (10/100 variants),
//! linear SVM, and Gaussian naive Bayes, all trained deterministically from
//! (dataset, config, seed).

pub mod forest;
pub mod nb;
pub mod svm;
pub mod tree;

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use forest::{ForestConfig, ForestModel, MaxFeaturesPolicy};
pub use nb::{NbConfig, NbModel};
pub use svm::{SvmConfig, SvmModel};
pub use tree::{TreeConfig, TreeModel};

pub const MODEL_FORMAT: &str = "kitscan-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum MlError {
    #[error("degenerate dataset: {0}")]
    DegenerateDataset(String),
    #[error("dimension mismatch: model expects {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("model version {found} is not supported (expected {MODEL_VERSION})")]
    VersionMismatch { found: u64 },
    #[error("malformed model file: {0}")]
    MalformedModel(String),
}

/// Feature matrix plus binary targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub targets: Vec<bool>,
    pub feature_names: Vec<String>,
    pub kit_ids: Vec<String>,
}

impl Dataset {
    pub fn new(
        features: Vec<Vec<f64>>,
        targets: Vec<bool>,
        feature_names: Vec<String>,
        kit_ids: Vec<String>,
    ) -> Result<Self, MlError> {
        if features.len() != targets.len() || features.len() != kit_ids.len() {
            return Err(MlError::DegenerateDataset(
                "row, target and kit_id counts differ".into(),
            ));
        }
        let width = feature_names.len();
        if features.iter().any(|r| r.len() != width) {
            return Err(MlError::DegenerateDataset("ragged feature rows".into()));
        }
        let unique: BTreeSet<&String> = kit_ids.iter().collect();
        if unique.len() != kit_ids.len() {
            return Err(MlError::DegenerateDataset("duplicated kit_id".into()));
        }
        Ok(Dataset {
            features,
            targets,
            feature_names,
            kit_ids,
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn positives(&self) -> usize {
        self.targets.iter().filter(|t| **t).count()
    }

    /// Row subset in the given index order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            targets: indices.iter().map(|&i| self.targets[i]).collect(),
            feature_names: self.feature_names.clone(),
            kit_ids: indices.iter().map(|&i| self.kit_ids[i].clone()).collect(),
        }
    }

    pub fn require_both_classes(&self) -> Result<(), MlError> {
        let pos = self.positives();
        if pos == 0 || pos == self.len() {
            return Err(MlError::DegenerateDataset(
                "training data contains a single class".into(),
            ));
        }
        Ok(())
    }
}

/// A trained model; serializable, with bit-identical reloaded predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant")]
pub enum Model {
    Tree(TreeModel),
    Forest(ForestModel),
    LinearSvm(SvmModel),
    GaussianNb(NbModel),
}

impl Model {
    pub fn num_features(&self) -> usize {
        match self {
            Model::Tree(m) => m.num_features,
            Model::Forest(m) => m.num_features,
            Model::LinearSvm(m) => m.weights.len(),
            Model::GaussianNb(m) => m.pos_mean.len(),
        }
    }

    fn check_dims(&self, x: &[f64]) -> Result<(), MlError> {
        let expected = self.num_features();
        if x.len() != expected {
            return Err(MlError::DimensionMismatch {
                expected,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Positive-class score: vote fraction / posterior in [0,1], or the
    /// signed margin for the linear SVM.
    pub fn predict_score(&self, x: &[f64]) -> Result<f64, MlError> {
        self.check_dims(x)?;
        Ok(match self {
            Model::Tree(m) => m.score(x),
            Model::Forest(m) => m.score(x),
            Model::LinearSvm(m) => m.margin(x),
            Model::GaussianNb(m) => m.posterior(x),
        })
    }

    /// Thresholded score; ties break toward positive.
    pub fn predict(&self, x: &[f64]) -> Result<bool, MlError> {
        let score = self.predict_score(x)?;
        Ok(match self {
            Model::LinearSvm(_) => score >= 0.0,
            _ => score >= 0.5,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u64,
    model: serde_json::Value,
}

pub fn save_model(model: &Model, destination: &Path) -> Result<(), MlError> {
    let file = ModelFile {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_VERSION as u64,
        model: serde_json::to_value(model)
            .map_err(|e| MlError::MalformedModel(e.to_string()))?,
    };
    let text = serde_json::to_string_pretty(&file)
        .map_err(|e| MlError::MalformedModel(e.to_string()))?;
    std::fs::write(destination, text)?;
    Ok(())
}

pub fn load_model(source: &Path) -> Result<Model, MlError> {
    let text = std::fs::read_to_string(source)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| MlError::MalformedModel(e.to_string()))?;
    let version = value
        .get("version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| MlError::MalformedModel("missing version field".into()))?;
    if version != MODEL_VERSION as u64 {
        return Err(MlError::VersionMismatch { found: version });
    }
    let model = value
        .get("model")
        .ok_or_else(|| MlError::MalformedModel("missing model body".into()))?;
    serde_json::from_value(model.clone()).map_err(|e| MlError::MalformedModel(e.to_string()))
}

/// The fixed classifier roster used by the evaluation scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassifierKind {
    LinearSvm,
    DecisionTree,
    RandomForest10,
    RandomForest100,
    NaiveBayes,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 5] = [
        ClassifierKind::LinearSvm,
        ClassifierKind::DecisionTree,
        ClassifierKind::RandomForest10,
        ClassifierKind::RandomForest100,
        ClassifierKind::NaiveBayes,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ClassifierKind::LinearSvm => "Linear SVM",
            ClassifierKind::DecisionTree => "Decision Tree",
            ClassifierKind::RandomForest10 => "Random Forest 10",
            ClassifierKind::RandomForest100 => "Random Forest 100",
            ClassifierKind::NaiveBayes => "Naive Bayes",
        }
    }

    pub fn parse(s: &str) -> Option<ClassifierKind> {
        match s.to_ascii_lowercase().replace(['-', '_', ' '], "").as_str() {
            "linearsvm" | "svm" => Some(ClassifierKind::LinearSvm),
            "decisiontree" | "tree" | "dt" => Some(ClassifierKind::DecisionTree),
            "randomforest10" | "rf10" => Some(ClassifierKind::RandomForest10),
            "randomforest100" | "rf100" => Some(ClassifierKind::RandomForest100),
            "naivebayes" | "nb" => Some(ClassifierKind::NaiveBayes),
            _ => None,
        }
    }

    pub fn train(&self, ds: &Dataset, seed: u64) -> Result<Model, MlError> {
        match self {
            ClassifierKind::LinearSvm => svm::train_linear_svm(
                ds,
                &SvmConfig {
                    seed,
                    ..SvmConfig::default()
                },
            ),
            ClassifierKind::DecisionTree => tree::train_decision_tree(ds, &TreeConfig::default()),
            ClassifierKind::RandomForest10 => forest::train_random_forest(
                ds,
                &ForestConfig {
                    n_trees: 10,
                    max_features_policy: MaxFeaturesPolicy::ThirdOfFeatures,
                    seed,
                    tree: TreeConfig::default(),
                },
            ),
            ClassifierKind::RandomForest100 => forest::train_random_forest(
                ds,
                &ForestConfig {
                    n_trees: 100,
                    max_features_policy: MaxFeaturesPolicy::SqrtOfFeatures,
                    seed,
                    tree: TreeConfig::default(),
                },
            ),
            ClassifierKind::NaiveBayes => nb::train_gaussian_nb(ds, &NbConfig::default()),
        }
    }
}

#[cfg(test)]
pub(crate) fn toy_dataset(rows: &[(&[f64], bool)]) -> Dataset {
    let features: Vec<Vec<f64>> = rows.iter().map(|(r, _)| r.to_vec()).collect();
    let targets: Vec<bool> = rows.iter().map(|(_, t)| *t).collect();
    let width = features.first().map(|r| r.len()).unwrap_or(0);
    let names = (0..width).map(|i| format!("f{i}")).collect();
    let ids = (0..rows.len()).map(|i| format!("k{i}")).collect();
    Dataset::new(features, targets, names, ids).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn dataset_rejects_duplicate_ids() {
        let err = Dataset::new(
            vec![vec![0.0], vec![1.0]],
            vec![false, true],
            vec!["f".into()],
            vec!["same".into(), "same".into()],
        );
        assert!(err.is_err());
    }

    #[test]
    fn dimension_mismatch_reported() {
        let ds = toy_dataset(&[(&[0.0, 0.0], false), (&[1.0, 1.0], true)]);
        let model = ClassifierKind::DecisionTree.train(&ds, 42).unwrap();
        match model.predict(&[1.0]) {
            Err(MlError::DimensionMismatch { expected: 2, got: 1 }) => {}
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn save_load_roundtrip_predictions() {
        let ds = toy_dataset(&[
            (&[0.0, 1.0], false),
            (&[0.2, 0.8], false),
            (&[1.0, 0.1], true),
            (&[0.9, 0.0], true),
        ]);
        let dir = tempfile::tempdir().unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for kind in ClassifierKind::ALL {
            let model = kind.train(&ds, 42).unwrap();
            let path = dir.path().join(format!("{:?}.json", kind));
            save_model(&model, &path).unwrap();
            let reloaded = load_model(&path).unwrap();
            for _ in 0..100 {
                let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect();
                assert_eq!(model.predict(&x).unwrap(), reloaded.predict(&x).unwrap());
                assert_eq!(
                    model.predict_score(&x).unwrap(),
                    reloaded.predict_score(&x).unwrap()
                );
            }
        }
    }

    #[test]
    fn truncated_model_file_is_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let ds = toy_dataset(&[(&[0.0], false), (&[1.0], true)]);
        let model = ClassifierKind::DecisionTree.train(&ds, 1).unwrap();
        let path = dir.path().join("m.json");
        save_model(&model, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, &text[..text.len() / 2]).unwrap();
        assert!(matches!(load_model(&path), Err(MlError::MalformedModel(_))));
    }

    #[test]
    fn future_version_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        std::fs::write(
            &path,
            r#"{"format":"kitscan-model","version":99,"model":{}}"#,
        )
        .unwrap();
        assert!(matches!(
            load_model(&path),
            Err(MlError::VersionMismatch { found: 99 })
        ));
    }
}
