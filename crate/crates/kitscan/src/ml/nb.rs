//! Gaussian naive Bayes: per-class feature means/variances with variance
//! smoothing, log-likelihood classification with empirical class priors.

use serde::{Deserialize, Serialize};

use super::{Dataset, MlError, Model};

#[derive(Debug, Clone)]
pub struct NbConfig {
    /// Smoothing is this factor times the largest column variance.
    pub var_smoothing: f64,
}

impl Default for NbConfig {
    fn default() -> Self {
        NbConfig {
            var_smoothing: 1e-9,
        }
    }
}

pub const VAR_SMOOTHING_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NbModel {
    pub pos_mean: Vec<f64>,
    pub pos_var: Vec<f64>,
    pub neg_mean: Vec<f64>,
    pub neg_var: Vec<f64>,
    pub log_prior_pos: f64,
    pub log_prior_neg: f64,
}

impl NbModel {
    fn log_likelihood(x: &[f64], mean: &[f64], var: &[f64], log_prior: f64) -> f64 {
        let mut ll = log_prior;
        for ((v, m), s2) in x.iter().zip(mean).zip(var) {
            ll += -0.5 * ((2.0 * std::f64::consts::PI * s2).ln() + (v - m) * (v - m) / s2);
        }
        ll
    }

    /// Posterior probability of the positive class.
    pub fn posterior(&self, x: &[f64]) -> f64 {
        let lp = Self::log_likelihood(x, &self.pos_mean, &self.pos_var, self.log_prior_pos);
        let ln = Self::log_likelihood(x, &self.neg_mean, &self.neg_var, self.log_prior_neg);
        let max = lp.max(ln);
        let ep = (lp - max).exp();
        let en = (ln - max).exp();
        ep / (ep + en)
    }
}

fn class_stats(rows: &[&Vec<f64>], d: usize) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len() as f64;
    let mut mean = vec![0.0; d];
    for row in rows {
        for (m, v) in mean.iter_mut().zip(row.iter()) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut var = vec![0.0; d];
    for row in rows {
        for ((s2, v), m) in var.iter_mut().zip(row.iter()).zip(&mean) {
            *s2 += (v - m) * (v - m);
        }
    }
    for s2 in &mut var {
        *s2 /= n;
    }
    (mean, var)
}

pub fn train_gaussian_nb(ds: &Dataset, cfg: &NbConfig) -> Result<Model, MlError> {
    ds.require_both_classes()?;
    let d = ds.num_features();
    let pos_rows: Vec<&Vec<f64>> = ds
        .features
        .iter()
        .zip(&ds.targets)
        .filter(|(_, t)| **t)
        .map(|(r, _)| r)
        .collect();
    let neg_rows: Vec<&Vec<f64>> = ds
        .features
        .iter()
        .zip(&ds.targets)
        .filter(|(_, t)| !**t)
        .map(|(r, _)| r)
        .collect();

    let (pos_mean, mut pos_var) = class_stats(&pos_rows, d);
    let (neg_mean, mut neg_var) = class_stats(&neg_rows, d);

    let (all_mean, all_var) = class_stats(&ds.features.iter().collect::<Vec<_>>(), d);
    let _ = all_mean;
    let max_var = all_var.iter().cloned().fold(0.0f64, f64::max);
    let epsilon = (cfg.var_smoothing * max_var).max(VAR_SMOOTHING_FLOOR);
    for s2 in pos_var.iter_mut().chain(neg_var.iter_mut()) {
        *s2 += epsilon;
    }

    let n = ds.len() as f64;
    Ok(Model::GaussianNb(NbModel {
        pos_mean,
        pos_var,
        neg_mean,
        neg_var,
        log_prior_pos: (pos_rows.len() as f64 / n).ln(),
        log_prior_neg: (neg_rows.len() as f64 / n).ln(),
    }))
}
