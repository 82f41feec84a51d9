//! Linear SVM trained by seeded stochastic subgradient descent on the
//! L2-regularized hinge loss (Pegasos-style step sizes). Columns are
//! standardized with training statistics; zero-variance columns pass
//! through centered, contributing nothing.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Dataset, MlError, Model};

#[derive(Debug, Clone)]
pub struct SvmConfig {
    pub c: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            c: 1.0,
            epochs: 100,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub feature_means: Vec<f64>,
    pub feature_scales: Vec<f64>,
}

impl SvmModel {
    fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.feature_means)
            .zip(&self.feature_scales)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    /// Signed margin; >= 0 predicts positive.
    pub fn margin(&self, x: &[f64]) -> f64 {
        let z = self.standardize(x);
        self.weights.iter().zip(&z).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }
}

pub fn train_linear_svm(ds: &Dataset, cfg: &SvmConfig) -> Result<Model, MlError> {
    ds.require_both_classes()?;
    if cfg.epochs == 0 {
        return Err(MlError::DegenerateDataset("epochs must be >= 1".into()));
    }
    let n = ds.len();
    let d = ds.num_features();

    let mut means = vec![0.0; d];
    for row in &ds.features {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= n as f64;
    }
    let mut vars = vec![0.0; d];
    for row in &ds.features {
        for ((var, v), m) in vars.iter_mut().zip(row).zip(&means) {
            *var += (v - m) * (v - m);
        }
    }
    let scales: Vec<f64> = vars
        .iter()
        .map(|v| {
            let sd = (v / n as f64).sqrt();
            if sd > 0.0 {
                sd
            } else {
                1.0
            }
        })
        .collect();

    let standardized: Vec<Vec<f64>> = ds
        .features
        .iter()
        .map(|row| {
            row.iter()
                .zip(&means)
                .zip(&scales)
                .map(|((v, m), s)| (v - m) / s)
                .collect()
        })
        .collect();
    let labels: Vec<f64> = ds.targets.iter().map(|t| if *t { 1.0 } else { -1.0 }).collect();

    let lambda = 1.0 / (cfg.c * n as f64);
    let mut weights = vec![0.0; d];
    let mut bias = 0.0;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut t = 1u64;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let eta = 1.0 / (lambda * t as f64);
            let x = &standardized[i];
            let y = labels[i];
            let margin = weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + bias;
            let decay = 1.0 - eta * lambda;
            for w in &mut weights {
                *w *= decay;
            }
            if y * margin < 1.0 {
                for (w, v) in weights.iter_mut().zip(x) {
                    *w += eta * y * v;
                }
                bias += eta * y;
            }
            t += 1;
        }
    }

    Ok(Model::LinearSvm(SvmModel {
        weights,
        bias,
        feature_means: means,
        feature_scales: scales,
    }))
}
