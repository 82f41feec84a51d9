//! Phase III harness: precision/recall/F1 metrics, seeded balanced
//! train/test splits, and the three experiment scenarios (80/20 split,
//! 20/80 split, leave-one-technique-out generalization).

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evasion::EvasionTechnique;
use crate::features::{LabeledSample, FEATURE_NAMES, TECHNIQUE_COLUMNS};
use crate::ml::{ClassifierKind, Dataset, MlError};
use crate::obfuscation::ObfuscationTechnique;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no kit in the dataset bears the excluded technique")]
    EmptyTestSet,
    #[error(transparent)]
    Ml(#[from] MlError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetLabel {
    Evasive,
    Obfuscated,
}

impl TargetLabel {
    pub fn name(&self) -> &'static str {
        match self {
            TargetLabel::Evasive => "evasive",
            TargetLabel::Obfuscated => "obfuscated",
        }
    }

    pub fn parse(s: &str) -> Option<TargetLabel> {
        match s.to_ascii_lowercase().as_str() {
            "evasive" | "evasion" => Some(TargetLabel::Evasive),
            "obfuscated" | "obfuscation" => Some(TargetLabel::Obfuscated),
            _ => None,
        }
    }

    pub fn of(&self, sample: &LabeledSample) -> bool {
        match self {
            TargetLabel::Evasive => sample.labels.evasive,
            TargetLabel::Obfuscated => sample.labels.obfuscated,
        }
    }
}

/// One of the eight detectable techniques, across both families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Technique {
    Evasion(EvasionTechnique),
    Obfuscation(ObfuscationTechnique),
}

impl Technique {
    pub const ALL: [Technique; 8] = [
        Technique::Evasion(EvasionTechnique::Htaccess),
        Technique::Evasion(EvasionTechnique::RobotsTxt),
        Technique::Evasion(EvasionTechnique::Php),
        Technique::Obfuscation(ObfuscationTechnique::UrlDecode),
        Technique::Obfuscation(ObfuscationTechnique::Eval),
        Technique::Obfuscation(ObfuscationTechnique::Hex),
        Technique::Obfuscation(ObfuscationTechnique::Base64),
        Technique::Obfuscation(ObfuscationTechnique::ObfuscatorTool),
    ];

    /// Matrix column name; same order as the CSV technique columns.
    pub fn column(&self) -> &'static str {
        let idx = Technique::ALL.iter().position(|t| t == self).unwrap();
        TECHNIQUE_COLUMNS[idx]
    }

    pub fn family(&self) -> TargetLabel {
        match self {
            Technique::Evasion(_) => TargetLabel::Evasive,
            Technique::Obfuscation(_) => TargetLabel::Obfuscated,
        }
    }

    pub fn present_in(&self, sample: &LabeledSample) -> bool {
        match self {
            Technique::Evasion(t) => sample.labels.evasion_techniques.contains(t),
            Technique::Obfuscation(t) => sample.labels.obfuscation_techniques.contains(t),
        }
    }

    /// Accepts both the short technique names and the matrix column names.
    pub fn parse(s: &str) -> Option<Technique> {
        let lowered = s.to_ascii_lowercase();
        let key = lowered
            .trim_start_matches("ev_")
            .trim_start_matches("ob_");
        match key {
            "htaccess" => Some(Technique::Evasion(EvasionTechnique::Htaccess)),
            "robots_txt" | "robots" => Some(Technique::Evasion(EvasionTechnique::RobotsTxt)),
            "php" => Some(Technique::Evasion(EvasionTechnique::Php)),
            "urldecode" => Some(Technique::Obfuscation(ObfuscationTechnique::UrlDecode)),
            "eval" => Some(Technique::Obfuscation(ObfuscationTechnique::Eval)),
            "hex" => Some(Technique::Obfuscation(ObfuscationTechnique::Hex)),
            "base64" => Some(Technique::Obfuscation(ObfuscationTechnique::Base64)),
            "obfuscator" | "obfuscator_tool" => {
                Some(Technique::Obfuscation(ObfuscationTechnique::ObfuscatorTool))
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub counts: ConfusionCounts,
}

/// P, R, F1 from confusion counts; any zero denominator yields 0.
pub fn compute_metrics(counts: ConfusionCounts) -> MetricsReport {
    let ratio = |num: usize, den: usize| -> f64 {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let precision = ratio(counts.tp, counts.tp + counts.fp);
    let recall = ratio(counts.tp, counts.tp + counts.fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    MetricsReport {
        precision,
        recall,
        f1,
        counts,
    }
}

/// Build an ML dataset from labeled samples with the chosen target label.
pub fn samples_to_dataset(samples: &[LabeledSample], target: TargetLabel) -> Result<Dataset, MlError> {
    Dataset::new(
        samples.iter().map(|s| s.features.0.clone()).collect(),
        samples.iter().map(|s| target.of(s)).collect(),
        FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        samples.iter().map(|s| s.kit_id.clone()).collect(),
    )
}

/// Seeded stratified split with a class-balanced training set.
///
/// A seeded draw takes `train_fraction` of each class as the training pool,
/// the pool's majority class is undersampled to the minority count, and
/// every sample not kept for training lands in the test set at its natural
/// class distribution. Row order within each side follows dataset order.
pub fn split_balanced(
    ds: &Dataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset), MlError> {
    ds.require_both_classes()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos: Vec<usize> = (0..ds.len()).filter(|&i| ds.targets[i]).collect();
    let mut neg: Vec<usize> = (0..ds.len()).filter(|&i| !ds.targets[i]).collect();
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let pos_take = (train_fraction * pos.len() as f64).floor() as usize;
    let neg_take = (train_fraction * neg.len() as f64).floor() as usize;
    let k = pos_take.min(neg_take);
    if k == 0 {
        return Err(MlError::DegenerateDataset(
            "training pool lost a class; raise the fraction or sample count".into(),
        ));
    }
    // the first k of each seeded draw form the balanced training set
    let mut train: Vec<usize> = pos[..k].iter().chain(neg[..k].iter()).copied().collect();
    train.sort_unstable();
    let chosen: BTreeSet<usize> = train.iter().copied().collect();
    let test: Vec<usize> = (0..ds.len()).filter(|i| !chosen.contains(i)).collect();
    Ok((ds.subset(&train), ds.subset(&test)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub train_total: usize,
    pub train_positives: usize,
    pub train_negatives: usize,
    pub test_total: usize,
    pub test_positives: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierMetrics {
    pub classifier: String,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRateEntry {
    pub classifier: String,
    pub detection_rate: f64,
    pub detected: usize,
    pub test_total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub schema_version: u32,
    /// "s1" | "s2" | "s3"
    pub scenario: String,
    pub target: String,
    pub excluded_technique: Option<String>,
    pub seed: u64,
    pub split: SplitSummary,
    pub metrics: Vec<ClassifierMetrics>,
    pub detection_rates: Vec<DetectionRateEntry>,
    #[serde(skip)]
    pub train_kit_ids: Vec<String>,
    #[serde(skip)]
    pub test_kit_ids: Vec<String>,
}

fn summarize(train: &Dataset, test: &Dataset) -> SplitSummary {
    SplitSummary {
        train_total: train.len(),
        train_positives: train.positives(),
        train_negatives: train.len() - train.positives(),
        test_total: test.len(),
        test_positives: test.positives(),
    }
}

fn run_split_scenario(
    samples: &[LabeledSample],
    target: TargetLabel,
    classifiers: &[ClassifierKind],
    seed: u64,
    train_fraction: f64,
    tag: &str,
) -> Result<ScenarioResult, EvalError> {
    let ds = samples_to_dataset(samples, target)?;
    let (train, test) = split_balanced(&ds, train_fraction, seed)?;
    let mut metrics = Vec::new();
    for kind in classifiers {
        let model = kind.train(&train, seed)?;
        let mut counts = ConfusionCounts::default();
        for (row, want) in test.features.iter().zip(&test.targets) {
            match (model.predict(row)?, *want) {
                (true, true) => counts.tp += 1,
                (true, false) => counts.fp += 1,
                (false, true) => counts.fn_ += 1,
                (false, false) => counts.tn += 1,
            }
        }
        metrics.push(ClassifierMetrics {
            classifier: kind.name().to_string(),
            metrics: compute_metrics(counts),
        });
    }
    Ok(ScenarioResult {
        schema_version: crate::SCHEMA_VERSION,
        scenario: tag.to_string(),
        target: target.name().to_string(),
        excluded_technique: None,
        seed,
        split: summarize(&train, &test),
        metrics,
        detection_rates: Vec::new(),
        train_kit_ids: train.kit_ids.clone(),
        test_kit_ids: test.kit_ids.clone(),
    })
}

/// 80% training (balanced) / 20% testing.
pub fn run_scenario1(
    samples: &[LabeledSample],
    target: TargetLabel,
    classifiers: &[ClassifierKind],
    seed: u64,
) -> Result<ScenarioResult, EvalError> {
    run_split_scenario(samples, target, classifiers, seed, 0.8, "s1")
}

/// 20% training (balanced) / 80% testing.
pub fn run_scenario2(
    samples: &[LabeledSample],
    target: TargetLabel,
    classifiers: &[ClassifierKind],
    seed: u64,
) -> Result<ScenarioResult, EvalError> {
    run_split_scenario(samples, target, classifiers, seed, 0.2, "s2")
}

/// Leave-one-technique-out: every kit bearing the excluded technique forms
/// the test set; the rest are relabeled as if the technique did not exist
/// and the balanced remainder trains the classifiers. Detection rate is the
/// fraction of test kits predicted positive.
pub fn run_scenario3(
    samples: &[LabeledSample],
    excluded: Technique,
    classifiers: &[ClassifierKind],
    seed: u64,
) -> Result<ScenarioResult, EvalError> {
    let target = excluded.family();
    let (test_samples, pool): (Vec<&LabeledSample>, Vec<&LabeledSample>) =
        samples.iter().partition(|s| excluded.present_in(s));
    if test_samples.is_empty() {
        return Err(EvalError::EmptyTestSet);
    }

    // relabel the pool ignoring the excluded technique
    let relabel = |s: &LabeledSample| -> bool {
        match target {
            TargetLabel::Evasive => s
                .labels
                .evasion_techniques
                .iter()
                .any(|t| Technique::Evasion(*t) != excluded),
            TargetLabel::Obfuscated => s
                .labels
                .obfuscation_techniques
                .iter()
                .any(|t| Technique::Obfuscation(*t) != excluded),
        }
    };
    let pool_ds = Dataset::new(
        pool.iter().map(|s| s.features.0.clone()).collect(),
        pool.iter().map(|s| relabel(s)).collect(),
        FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        pool.iter().map(|s| s.kit_id.clone()).collect(),
    )?;
    pool_ds.require_both_classes().map_err(EvalError::Ml)?;

    // balance the whole pool: seeded undersample of the majority class
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos: Vec<usize> = (0..pool_ds.len()).filter(|&i| pool_ds.targets[i]).collect();
    let mut neg: Vec<usize> = (0..pool_ds.len()).filter(|&i| !pool_ds.targets[i]).collect();
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let k = pos.len().min(neg.len());
    let mut train_idx: Vec<usize> = pos[..k].iter().chain(neg[..k].iter()).copied().collect();
    train_idx.sort_unstable();
    let train = pool_ds.subset(&train_idx);

    let mut detection_rates = Vec::new();
    for kind in classifiers {
        let model = kind.train(&train, seed)?;
        let mut detected = 0usize;
        for s in &test_samples {
            if model.predict(&s.features.0)? {
                detected += 1;
            }
        }
        detection_rates.push(DetectionRateEntry {
            classifier: kind.name().to_string(),
            detection_rate: detected as f64 / test_samples.len() as f64,
            detected,
            test_total: test_samples.len(),
        });
    }
    Ok(ScenarioResult {
        schema_version: crate::SCHEMA_VERSION,
        scenario: "s3".to_string(),
        target: target.name().to_string(),
        excluded_technique: Some(excluded.column().to_string()),
        seed,
        split: SplitSummary {
            train_total: train.len(),
            train_positives: train.positives(),
            train_negatives: train.len() - train.positives(),
            test_total: test_samples.len(),
            test_positives: test_samples.len(),
        },
        metrics: Vec::new(),
        detection_rates,
        train_kit_ids: train.kit_ids.clone(),
        test_kit_ids: test_samples.iter().map(|s| s.kit_id.clone()).collect(),
    })
}

/// Top-N author profiles from scan results; delegates aggregation and
/// ordering to the signature module.
pub fn profile_report(
    records: &[crate::authors::KitSignatureRecord],
    allowlist: &BTreeSet<String>,
    denylist: &BTreeSet<String>,
    top: usize,
) -> Vec<crate::authors::AuthorProfile> {
    let mut profiles = crate::authors::build_author_profiles(records, allowlist, denylist);
    profiles.truncate(top);
    profiles
}

pub fn write_json_report(result: &ScenarioResult, destination: &Path) -> Result<(), EvalError> {
    let mut text = serde_json::to_string_pretty(result)
        .map_err(|e| MlError::MalformedModel(e.to_string()))?;
    text.push('\n');
    std::fs::write(destination, text)?;
    Ok(())
}

/// Aligned plain-text table mirroring the JSON report.
pub fn render_table(result: &ScenarioResult) -> String {
    let mut out = String::new();
    let header = match &result.excluded_technique {
        Some(t) => format!(
            "Scenario {} | target: {} | excluded: {} | seed {}",
            result.scenario.to_uppercase(),
            result.target,
            t,
            result.seed
        ),
        None => format!(
            "Scenario {} | target: {} | seed {}",
            result.scenario.to_uppercase(),
            result.target,
            result.seed
        ),
    };
    out.push_str(&header);
    out.push('\n');
    out.push_str(&format!(
        "train: {} ({} pos / {} neg)  test: {} ({} pos)\n\n",
        result.split.train_total,
        result.split.train_positives,
        result.split.train_negatives,
        result.split.test_total,
        result.split.test_positives
    ));
    if result.detection_rates.is_empty() {
        out.push_str(&format!(
            "{:<18} {:>9} {:>7} {:>7}\n",
            "Classifier", "Precision", "Recall", "F1"
        ));
        for row in &result.metrics {
            out.push_str(&format!(
                "{:<18} {:>9.4} {:>7.4} {:>7.4}\n",
                row.classifier, row.metrics.precision, row.metrics.recall, row.metrics.f1
            ));
        }
    } else {
        out.push_str(&format!(
            "{:<18} {:>14} {:>15}\n",
            "Classifier", "Detection rate", "Detected/Total"
        ));
        for row in &result.detection_rates {
            out.push_str(&format!(
                "{:<18} {:>14.4} {:>10}/{}\n",
                row.classifier, row.detection_rate, row.detected, row.test_total
            ));
        }
    }
    out
}

pub fn write_table_report(result: &ScenarioResult, destination: &Path) -> Result<(), EvalError> {
    std::fs::write(destination, render_table(result))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FeatureVector, Labels, NUM_FEATURES};
    use rand::Rng;

    fn counts(tp: usize, fp: usize, fn_: usize, tn: usize) -> ConfusionCounts {
        ConfusionCounts { tp, fp, fn_, tn }
    }

    #[test]
    fn metrics_hand_computed() {
        let m = compute_metrics(counts(10, 0, 0, 0));
        assert_eq!((m.precision, m.recall, m.f1), (1.0, 1.0, 1.0));

        let m = compute_metrics(counts(3, 1, 2, 0));
        assert!((m.precision - 0.75).abs() < 1e-12);
        assert!((m.recall - 0.6).abs() < 1e-12);
        assert!((m.f1 - 2.0 * 0.75 * 0.6 / 1.35).abs() < 1e-12);

        let m = compute_metrics(counts(0, 0, 5, 0));
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn metrics_bounds_on_fuzzed_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..200 {
            let c = counts(
                rng.gen_range(0..20),
                rng.gen_range(0..20),
                rng.gen_range(0..20),
                rng.gen_range(0..20),
            );
            let m = compute_metrics(c);
            for v in [m.precision, m.recall, m.f1] {
                assert!((0.0..=1.0).contains(&v));
            }
            if m.precision > 0.0 && m.recall > 0.0 {
                let lo = m.precision.min(m.recall);
                let hi = m.precision.max(m.recall);
                assert!(m.f1 >= lo - 1e-12 && m.f1 <= hi + 1e-12);
            }
        }
    }

    /// Synthetic learnable samples: feature 0 tracks the evasive label with
    /// a wide margin, feature 1 is noise.
    fn learnable_samples(n_pos: usize, n_neg: usize) -> Vec<LabeledSample> {
        let mut samples = Vec::new();
        let mut push = |i: usize, evasive: bool| {
            let mut v = vec![0.0; NUM_FEATURES];
            v[0] = if evasive { 10.0 + (i % 4) as f64 } else { (i % 4) as f64 };
            v[1] = (i % 7) as f64;
            let mut evset = BTreeSet::new();
            if evasive {
                evset.insert(EvasionTechnique::Htaccess);
            }
            samples.push(LabeledSample {
                kit_id: format!("kit-{:04}", samples_len_hack(&samples)),
                features: FeatureVector(v),
                labels: Labels {
                    evasive,
                    obfuscated: false,
                    evasion_techniques: evset,
                    obfuscation_techniques: BTreeSet::new(),
                },
                signatures: Vec::new(),
            });
        };
        for i in 0..n_pos {
            push(i, true);
        }
        for i in 0..n_neg {
            push(i, false);
        }
        samples
    }

    fn samples_len_hack(s: &[LabeledSample]) -> usize {
        s.len()
    }

    #[test]
    fn split_balanced_matches_worked_example() {
        // 40 positive / 60 negative, fraction 0.8 -> 32/32 train, 36 test
        let samples = learnable_samples(40, 60);
        let ds = samples_to_dataset(&samples, TargetLabel::Evasive).unwrap();
        let (train, test) = split_balanced(&ds, 0.8, 42).unwrap();
        assert_eq!(train.len(), 64);
        assert_eq!(train.positives(), 32);
        assert_eq!(test.len(), 36);
        // disjoint kit ids
        let train_ids: BTreeSet<_> = train.kit_ids.iter().collect();
        assert!(test.kit_ids.iter().all(|id| !train_ids.contains(id)));
    }

    #[test]
    fn split_balanced_no_undersampling_when_balanced() {
        let samples = learnable_samples(50, 50);
        let ds = samples_to_dataset(&samples, TargetLabel::Evasive).unwrap();
        let (train, test) = split_balanced(&ds, 0.8, 1).unwrap();
        assert_eq!(train.len(), 80);
        assert_eq!(test.len(), 20);
    }

    #[test]
    fn split_balanced_deterministic() {
        let samples = learnable_samples(30, 45);
        let ds = samples_to_dataset(&samples, TargetLabel::Evasive).unwrap();
        let a = split_balanced(&ds, 0.8, 7).unwrap();
        let b = split_balanced(&ds, 0.8, 7).unwrap();
        assert_eq!(a.0.kit_ids, b.0.kit_ids);
        assert_eq!(a.1.kit_ids, b.1.kit_ids);
        let c = split_balanced(&ds, 0.8, 8).unwrap();
        assert_ne!(a.0.kit_ids, c.0.kit_ids);
    }

    #[test]
    fn scenario1_learns_separable_target() {
        let samples = learnable_samples(60, 80);
        let result = run_scenario1(
            &samples,
            TargetLabel::Evasive,
            &[ClassifierKind::DecisionTree, ClassifierKind::RandomForest10],
            42,
        )
        .unwrap();
        assert_eq!(result.scenario, "s1");
        for row in &result.metrics {
            assert!(row.metrics.f1 > 0.9, "{}: {:?}", row.classifier, row.metrics);
        }
        // split law: balanced training classes, disjoint ids
        assert_eq!(result.split.train_positives, result.split.train_negatives);
        let train: BTreeSet<_> = result.train_kit_ids.iter().collect();
        assert!(result.test_kit_ids.iter().all(|id| !train.contains(id)));
    }

    #[test]
    fn scenario2_reports_smaller_training_set() {
        let samples = learnable_samples(60, 80);
        let s1 = run_scenario1(&samples, TargetLabel::Evasive, &[ClassifierKind::DecisionTree], 42)
            .unwrap();
        let s2 = run_scenario2(&samples, TargetLabel::Evasive, &[ClassifierKind::DecisionTree], 42)
            .unwrap();
        assert!(s2.split.train_total < s1.split.train_total);
        assert_eq!(s2.scenario, "s2");
    }

    fn multi_technique_samples() -> Vec<LabeledSample> {
        // half the kits use htaccess, an overlapping quarter robots.txt,
        // plus clean kits; features 0/1 track the two techniques
        let mut samples = Vec::new();
        for i in 0..80 {
            let htaccess = i % 2 == 0;
            let robots = i % 4 == 1;
            let mut v = vec![0.0; NUM_FEATURES];
            if htaccess {
                v[0] = 8.0 + (i % 3) as f64;
            }
            if robots {
                v[1] = 8.0 + (i % 3) as f64;
            }
            let mut evset = BTreeSet::new();
            if htaccess {
                evset.insert(EvasionTechnique::Htaccess);
            }
            if robots {
                evset.insert(EvasionTechnique::RobotsTxt);
            }
            samples.push(LabeledSample {
                kit_id: format!("kit-{i:04}"),
                features: FeatureVector(v),
                labels: Labels {
                    evasive: !evset.is_empty(),
                    obfuscated: false,
                    evasion_techniques: evset,
                    obfuscation_techniques: BTreeSet::new(),
                },
                signatures: Vec::new(),
            });
        }
        samples
    }

    #[test]
    fn scenario3_excludes_technique_from_training() {
        let samples = multi_technique_samples();
        let excluded = Technique::Evasion(EvasionTechnique::RobotsTxt);
        let result =
            run_scenario3(&samples, excluded, &[ClassifierKind::RandomForest10], 42).unwrap();
        // leakage guard: no excluded-technique kit in training
        let robots_ids: BTreeSet<_> = samples
            .iter()
            .filter(|s| excluded.present_in(s))
            .map(|s| s.kit_id.clone())
            .collect();
        assert!(!robots_ids.is_empty());
        assert!(result.train_kit_ids.iter().all(|id| !robots_ids.contains(id)));
        assert_eq!(result.test_kit_ids.len(), robots_ids.len());
        assert_eq!(result.split.train_positives, result.split.train_negatives);
        assert_eq!(result.excluded_technique.as_deref(), Some("ev_robots_txt"));
    }

    #[test]
    fn scenario3_missing_technique_is_empty_test_set() {
        let samples = learnable_samples(10, 10);
        let err = run_scenario3(
            &samples,
            Technique::Obfuscation(ObfuscationTechnique::Base64),
            &[ClassifierKind::DecisionTree],
            42,
        );
        assert!(matches!(err, Err(EvalError::EmptyTestSet)));
    }

    #[test]
    fn technique_parse_and_columns() {
        assert_eq!(
            Technique::parse("eval"),
            Some(Technique::Obfuscation(ObfuscationTechnique::Eval))
        );
        assert_eq!(
            Technique::parse("ev_htaccess"),
            Some(Technique::Evasion(EvasionTechnique::Htaccess))
        );
        assert_eq!(Technique::parse("nonsense"), None);
        for (t, col) in Technique::ALL.iter().zip(TECHNIQUE_COLUMNS) {
            assert_eq!(t.column(), col);
        }
    }

    #[test]
    fn reports_byte_identical_across_runs() {
        let samples = learnable_samples(40, 40);
        let dir = tempfile::tempdir().unwrap();
        let mut bytes = Vec::new();
        for run in 0..2 {
            let result =
                run_scenario1(&samples, TargetLabel::Evasive, &ClassifierKind::ALL, 42).unwrap();
            let json = dir.path().join(format!("r{run}.json"));
            let table = dir.path().join(format!("r{run}.txt"));
            write_json_report(&result, &json).unwrap();
            write_table_report(&result, &table).unwrap();
            bytes.push((std::fs::read(json).unwrap(), std::fs::read(table).unwrap()));
        }
        assert_eq!(bytes[0], bytes[1]);
    }

    #[test]
    fn profile_report_orders_and_truncates() {
        use crate::authors::KitSignatureRecord;
        let rec = |id: &str, names: &[&str]| KitSignatureRecord {
            kit_id: id.into(),
            signatures: names.iter().map(|s| s.to_string()).collect(),
            evasive: false,
            obfuscated: false,
        };
        let records = vec![
            rec("a", &["zeta"]),
            rec("b", &["zeta", "alpha"]),
            rec("c", &["alpha"]),
            rec("d", &["alpha", "mid"]),
        ];
        let top = profile_report(&records, &BTreeSet::new(), &BTreeSet::new(), 2);
        assert_eq!(top.len(), 2);
        assert_eq!(top[0].name, "alpha");
        assert_eq!(top[1].name, "zeta");
    }
}
