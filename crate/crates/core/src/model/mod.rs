//! Regression-tree and forest models of speedup.
//!
//! Trees are CART with squared-error (variance) reduction. A forest trains
//! each tree on a seeded bootstrap resample and predicts the mean over its
//! trees.

mod dataset;
mod tree;

pub use dataset::Dataset;
pub use tree::{best_split, BestSplit, Node, RegressionTree};

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureLookup, Sample};
use tree::GrowParams;

pub const MODEL_SCHEMA: &str = "spmvlab.model/v1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Share of samples used for training; the rest are held out.
    pub train_fraction: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub n_trees: usize,
    pub seed: u64,
    /// Train each tree on a bootstrap resample rather than all rows.
    pub bootstrap: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            train_fraction: 0.9,
            max_depth: 6,
            min_samples_leaf: 5,
            n_trees: 50,
            seed: 0,
            bootstrap: true,
        }
    }
}

impl TrainConfig {
    /// One tree on all rows.
    pub fn single_tree() -> Self {
        TrainConfig {
            n_trees: 1,
            bootstrap: false,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return Err(Error::Training(format!(
                "train fraction {} outside (0, 1]",
                self.train_fraction
            )));
        }
        if self.max_depth == 0 || self.n_trees == 0 || self.min_samples_leaf == 0 {
            return Err(Error::Training(
                "max depth, tree count and leaf size must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub schema: String,
    pub config: TrainConfig,
    pub features: Vec<String>,
    pub trees: Vec<RegressionTree>,
}

fn tree_rng(seed: u64, tree: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tree as u64 + 1);
    rng
}

impl Forest {
    /// Trains on every row of `data`; `train_fraction` is ignored here.
    pub fn fit(data: &Dataset, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let n = data.len();
        if n < 2 * cfg.min_samples_leaf {
            return Err(Error::Training(format!(
                "{n} samples is fewer than twice the minimum leaf size {}",
                cfg.min_samples_leaf
            )));
        }
        let params = GrowParams {
            max_depth: cfg.max_depth,
            min_samples_leaf: cfg.min_samples_leaf,
        };
        let trees = (0..cfg.n_trees)
            .into_par_iter()
            .map(|t| {
                let idx: Vec<usize> = if cfg.bootstrap {
                    let mut rng = tree_rng(cfg.seed, t);
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                RegressionTree::grow(data, &idx, params)
            })
            .collect();
        Ok(Forest {
            schema: MODEL_SCHEMA.to_string(),
            config: *cfg,
            features: data.feature_names().to_vec(),
            trees,
        })
    }

    pub fn fit_samples(samples: &[Sample], cfg: &TrainConfig) -> Result<Self> {
        Self::fit(&Dataset::from_samples(samples)?, cfg)
    }

    /// Prediction for a row laid out like `self.features`.
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict_row(x)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn tree_predictions(&self, x: &[f64]) -> Vec<f64> {
        self.trees.iter().map(|t| t.predict_row(x)).collect()
    }

    pub fn row_for(&self, input: &impl FeatureLookup) -> Result<Vec<f64>> {
        self.features
            .iter()
            .map(|name| {
                input
                    .feature(name)
                    .ok_or_else(|| Error::MissingFeature(name.clone()))
            })
            .collect()
    }

    pub fn predict(&self, input: &impl FeatureLookup) -> Result<f64> {
        Ok(self.predict_row(&self.row_for(input)?))
    }

    /// Mean of the per-tree importance vectors, renormalized to sum to 1.
    pub fn importance_vector(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.features.len()];
        for t in &self.trees {
            for (a, w) in acc.iter_mut().zip(t.importance()) {
                *a += w;
            }
        }
        let total: f64 = acc.iter().sum();
        if total > 0.0 {
            acc.iter_mut().for_each(|a| *a /= total);
        }
        acc
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: Forest = serde_json::from_str(text)?;
        if f.schema != MODEL_SCHEMA {
            return Err(Error::Training(format!(
                "unsupported model schema `{}`",
                f.schema
            )));
        }
        if f.trees.is_empty() || !f.trees.iter().all(|t| t.is_well_formed(f.features.len())) {
            return Err(Error::Training("model file has malformed trees".into()));
        }
        Ok(f)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Features with nonzero importance, heaviest first; ties keep column order.
pub fn feature_importance(model: &Forest) -> Vec<(String, f64)> {
    let mut ranked: Vec<(String, f64)> = model
        .features
        .iter()
        .cloned()
        .zip(model.importance_vector())
        .filter(|&(_, w)| w > 0.0)
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    ranked
}

/// Indented text rendering of one tree.
pub fn export_tree(model: &Forest, index: usize) -> Result<String> {
    let tree = model.trees.get(index).ok_or(Error::TreeIndex {
        index,
        len: model.trees.len(),
    })?;
    let mut out = String::new();
    let mut stack = vec![(0usize, 0usize)];
    while let Some((at, depth)) = stack.pop() {
        let pad = "  ".repeat(depth);
        match tree.nodes[at] {
            Node::Leaf {
                value, n_samples, ..
            } => {
                let _ = writeln!(out, "{pad}speedup={value:.4} (n={n_samples})");
            }
            Node::Split {
                feature,
                threshold,
                left,
                right,
                ..
            } => {
                let _ = writeln!(out, "{pad}{} ≤ {threshold:.6}", model.features[feature]);
                stack.push((right, depth + 1));
                stack.push((left, depth + 1));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoldoutReport {
    pub n_train: usize,
    pub n_holdout: usize,
    pub mae: Option<f64>,
    pub r2: Option<f64>,
}

/// Seeded shuffle split into training and held-out indices.
pub fn split_indices(n: usize, train_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut tree_rng(seed, usize::MAX - 1));
    let n_train = ((n as f64 * train_fraction).round() as usize).clamp(1.min(n), n);
    let holdout = idx.split_off(n_train);
    (idx, holdout)
}

/// Fits on the training share and scores the held-out rows.
pub fn train_holdout(data: &Dataset, cfg: &TrainConfig) -> Result<(Forest, HoldoutReport)> {
    cfg.validate()?;
    let (train, holdout) = split_indices(data.len(), cfg.train_fraction, cfg.seed);
    let model = Forest::fit(&data.subset(&train), cfg)?;
    let (mut mae, mut r2) = (None, None);
    if !holdout.is_empty() {
        let y: Vec<f64> = holdout.iter().map(|&i| data.label(i)).collect();
        let pred: Vec<f64> = holdout
            .iter()
            .map(|&i| model.predict_row(data.row(i)))
            .collect();
        let n = y.len() as f64;
        mae = Some(y.iter().zip(&pred).map(|(a, b)| (a - b).abs()).sum::<f64>() / n);
        let mean = y.iter().sum::<f64>() / n;
        let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
        let ss_res: f64 = y.iter().zip(&pred).map(|(a, b)| (a - b).powi(2)).sum();
        if ss_tot > 0.0 {
            r2 = Some(1.0 - ss_res / ss_tot);
        }
    }
    let report = HoldoutReport {
        n_train: train.len(),
        n_holdout: holdout.len(),
        mae,
        r2,
    };
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset(rows: Vec<Vec<f64>>, labels: Vec<f64>) -> Dataset {
        let p = rows[0].len();
        let names = (0..p).map(|j| format!("f{j}")).collect();
        let cells = rows
            .into_iter()
            .map(|r| r.into_iter().map(Some).collect())
            .collect();
        Dataset::from_columns(names, cells, labels).unwrap()
    }

    #[test]
    fn constant_labels_give_single_leaf() {
        let ds = dataset((0..20).map(|i| vec![i as f64]).collect(), vec![1.5; 20]);
        let f = Forest::fit(&ds, &TrainConfig::single_tree()).unwrap();
        assert_eq!(f.trees[0].nodes.len(), 1);
        assert_eq!(f.predict_row(&[100.0]), 1.5);
        assert!(feature_importance(&f).is_empty());
        assert_eq!(export_tree(&f, 0).unwrap().lines().count(), 1);
    }

    #[test]
    fn step_function_splits_once() {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![i as f64 / 40.0, (i % 3) as f64])
            .collect();
        let labels = rows
            .iter()
            .map(|r| if r[0] <= 0.45 { 2.0 } else { 1.0 })
            .collect();
        let ds = dataset(rows, labels);
        let f = Forest::fit(&ds, &TrainConfig::single_tree()).unwrap();
        let text = export_tree(&f, 0).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("f0 ≤ 0.4625"));
        assert_eq!(feature_importance(&f), vec![("f0".to_string(), 1.0)]);
        assert_eq!(f.predict_row(&[0.1, 0.0]), 2.0);
    }

    #[test]
    fn bad_tree_index() {
        let ds = dataset((0..20).map(|i| vec![i as f64]).collect(), vec![1.0; 20]);
        let f = Forest::fit(&ds, &TrainConfig::single_tree()).unwrap();
        assert!(matches!(
            export_tree(&f, 3),
            Err(Error::TreeIndex { index: 3, len: 1 })
        ));
    }

    #[test]
    fn too_few_samples() {
        let ds = dataset((0..9).map(|i| vec![i as f64]).collect(), vec![1.0; 9]);
        assert!(Forest::fit(&ds, &TrainConfig::single_tree()).is_err());
    }

    #[test]
    fn missing_feature_on_predict() {
        let ds = dataset((0..20).map(|i| vec![i as f64]).collect(), vec![1.0; 20]);
        let f = Forest::fit(&ds, &TrainConfig::single_tree()).unwrap();
        let input: std::collections::BTreeMap<String, f64> = [("g".to_string(), 1.0)].into();
        assert!(matches!(f.predict(&input), Err(Error::MissingFeature(n)) if n == "f0"));
    }

    #[test]
    fn holdout_split_sizes() {
        let (train, hold) = split_indices(100, 0.9, 3);
        assert_eq!((train.len(), hold.len()), (90, 10));
        let (train, hold) = split_indices(7, 1.0, 3);
        assert_eq!((train.len(), hold.len()), (7, 0));
    }
}
