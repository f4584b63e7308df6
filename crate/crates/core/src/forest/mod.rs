//! CART trees and bagged random-forest classifiers.

mod partition;
mod split;
mod tree;

pub use partition::{PartitionNode, PartitionTree};
pub use split::{best_split, gini_gain, GiniGain, Split};
pub use tree::{clip_bounds, FeatureBounds, GrowParams, Leaf, Tree, TreeNode};

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, tag};
use crate::tabular::{Dataset, Schema};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", content = "value", rename_all = "lowercase")]
pub enum SplitKind {
    /// `x < threshold` on a continuous feature.
    Less(f64),
    /// `x == level` on a categorical feature.
    Equal(usize),
}

impl SplitKind {
    pub(crate) fn sort_value(&self) -> f64 {
        match *self {
            SplitKind::Less(t) => t,
            SplitKind::Equal(l) => l as f64,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitLiteral {
    pub feature: usize,
    #[serde(flatten)]
    pub kind: SplitKind,
}

impl SplitLiteral {
    /// Whether the row satisfies the literal (rows that do go left).
    #[inline]
    pub fn holds(&self, row: &[f64]) -> bool {
        let v = row[self.feature];
        match self.kind {
            SplitKind::Less(t) => v < t,
            SplitKind::Equal(level) => v as usize == level,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "fraction", rename_all = "lowercase")]
pub enum Resample {
    /// n draws with replacement.
    Bootstrap,
    /// Draws without replacement of the given fraction of rows.
    Subsample(f64),
    /// Every row exactly once; leaves no out-of-bag rows.
    Full,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub num_trees: usize,
    /// Candidate features per node; `None` means floor(sqrt(d)).
    pub mtry: Option<usize>,
    pub min_node_size: usize,
    pub resample: Resample,
    /// Resample each class separately so every tree keeps the class sizes.
    pub stratified: bool,
    pub max_depth: Option<usize>,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            num_trees: 100,
            mtry: None,
            min_node_size: 2,
            resample: Resample::Bootstrap,
            stratified: false,
            max_depth: None,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn resolved_mtry(&self, d: usize) -> usize {
        self.mtry
            .unwrap_or_else(|| (d as f64).sqrt().floor() as usize)
            .clamp(1, d.max(1))
    }

    fn validate(&self, d: usize) -> Result<()> {
        if self.num_trees == 0 {
            return Err(Error::Config("forest needs at least one tree".into()));
        }
        if self.min_node_size == 0 {
            return Err(Error::Config("minimum node size must be at least 1".into()));
        }
        if let Some(m) = self.mtry {
            if m == 0 || m > d {
                return Err(Error::Config(format!("mtry {m} outside 1..={d}")));
            }
        }
        if let Resample::Subsample(f) = self.resample {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::Config(format!("subsample fraction {f} outside (0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Forest {
    pub trees: Vec<Tree>,
    pub config: ForestConfig,
    pub schema: Schema,
    pub n_classes: usize,
}

fn draw_inbag<R: Rng>(groups: &[Vec<usize>], resample: Resample, rng: &mut R) -> Vec<usize> {
    let mut rows = Vec::new();
    for group in groups {
        let n = group.len();
        if n == 0 {
            continue;
        }
        match resample {
            Resample::Bootstrap => rows.extend((0..n).map(|_| group[rng.random_range(0..n)])),
            Resample::Subsample(f) => {
                let k = ((n as f64 * f).round() as usize).clamp(1, n);
                rows.extend(index::sample(rng, n, k).into_iter().map(|i| group[i]));
            }
            Resample::Full => rows.extend_from_slice(group),
        }
    }
    rows
}

/// Fits a forest of `config.num_trees` trees to class labels in `0..K`.
///
/// Tree `b` draws all of its randomness from stream `b` of the forest seed,
/// so the result does not depend on the number of worker threads.
pub fn fit_forest(ds: &Dataset, labels: &[u32], config: &ForestConfig) -> Result<Forest> {
    let (n, d) = (ds.n_rows(), ds.n_cols());
    config.validate(d)?;
    if labels.len() != n {
        return Err(Error::Config(format!("{} labels for {n} rows", labels.len())));
    }
    if n < config.min_node_size {
        return Err(Error::InsufficientData(format!(
            "{n} rows, fewer than the minimum node size {}",
            config.min_node_size
        )));
    }
    let n_classes = labels.iter().max().map_or(2, |&m| m as usize + 1).max(2);
    let groups: Vec<Vec<usize>> = if config.stratified {
        let mut g = vec![Vec::new(); n_classes];
        for (i, &y) in labels.iter().enumerate() {
            g[y as usize].push(i);
        }
        g
    } else {
        vec![(0..n).collect()]
    };
    let params = GrowParams {
        mtry: config.resolved_mtry(d),
        min_node_size: config.min_node_size,
        max_depth: config.max_depth,
        n_classes,
    };
    let trees = (0..config.num_trees)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(config.seed, tag::FOREST, b as u64);
            let rows = draw_inbag(&groups, config.resample, &mut rng);
            Tree::grow(ds, labels, rows, &params, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Forest {
        trees,
        config: config.clone(),
        schema: ds.schema().clone(),
        n_classes,
    })
}

impl Forest {
    /// Mean soft label over all trees.
    pub fn predict_prob(&self, row: &[f64]) -> f64 {
        let total: f64 = self.trees.iter().map(|t| t.leaf_node(row).soft_label).sum();
        total / self.trees.len() as f64
    }

    /// Class with the largest pooled in-bag count over the leaves `row` reaches.
    pub fn predict_class(&self, row: &[f64]) -> usize {
        let mut votes = vec![0f64; self.n_classes];
        for tree in &self.trees {
            let leaf = tree.leaf_node(row);
            let total = leaf.train_count.max(1) as f64;
            for (v, &c) in votes.iter_mut().zip(&leaf.class_counts) {
                *v += c as f64 / total;
            }
        }
        argmax(&votes)
    }

    /// Out-of-bag accuracy for binary labels.
    ///
    /// Each row is scored by the mean soft label of the trees it was not drawn
    /// for, classified as 1 at a score of 0.5 or more.
    pub fn oob_accuracy(&self, ds: &Dataset, labels: &[u32]) -> Result<f64> {
        let (correct, counted) = (0..ds.n_rows())
            .into_par_iter()
            .map(|i| {
                let row = ds.row(i);
                let (sum, k) = self
                    .trees
                    .iter()
                    .filter(|t| t.inbag.get(i).copied().unwrap_or(0) == 0)
                    .fold((0.0, 0usize), |(s, k), t| (s + t.leaf_node(row).soft_label, k + 1));
                if k == 0 {
                    return (0usize, 0usize);
                }
                let pred = u32::from(sum / k as f64 >= 0.5);
                (usize::from(pred == labels[i]), 1)
            })
            .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
        if counted == 0 {
            return Err(Error::NoOobRows);
        }
        Ok(correct as f64 / counted as f64)
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = k;
        }
    }
    best
}
