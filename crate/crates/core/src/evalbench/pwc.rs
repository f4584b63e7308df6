//! Piecewise-constant forest density estimators: every leaf is a uniform
//! box weighted by its coverage.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arf::{leaf_coverage, normalize_coverage, ArfModel};
use crate::error::{Error, Result};
use crate::forde::{summarize_nll, NllReport};
use crate::forest::{clip_bounds, fit_forest, FeatureBounds, ForestConfig, PartitionTree};
use crate::tabular::{Dataset, Schema};
use crate::truncnorm::log_sum_exp;

/// Where the leaves come from.
#[derive(Clone, Copy, Debug)]
pub enum PwcMode<'a> {
    /// The leaves of a fitted adversarial forest.
    Unsupervised(&'a ArfModel),
    /// A classification forest grown on categorical column `target`. The
    /// model is a density over the remaining columns.
    Supervised { target: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PwcConfig {
    /// Used by supervised mode only.
    pub forest: ForestConfig,
}

impl Default for PwcConfig {
    fn default() -> Self {
        PwcConfig {
            forest: ForestConfig {
                num_trees: 100,
                min_node_size: 2,
                ..ForestConfig::default()
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PwcLeaf {
    pub coverage: f64,
    /// Leaf region clipped to the global data range.
    pub bounds: Vec<FeatureBounds>,
    /// Log of the inverse leaf volume.
    pub log_inv_volume: f64,
}

impl PwcLeaf {
    fn contains(&self, row: &[f64]) -> bool {
        self.bounds.iter().zip(row).all(|(b, &v)| match b {
            // Closed on the right so the global maximum stays inside.
            FeatureBounds::Interval { lo, hi } => *lo <= v && v <= *hi,
            FeatureBounds::Levels(l) => l.contains(&(v as usize)),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PwcModel {
    pub schema: Schema,
    pub trees: Vec<PartitionTree>,
    pub leaves: Vec<Vec<PwcLeaf>>,
    /// Global (min, max) of every continuous column.
    pub ranges: Vec<(f64, f64)>,
}

impl PwcModel {
    /// Assembles a model from partitions and per-leaf coverage. Coverage is
    /// renormalized to sum to one per tree.
    pub fn new(
        schema: Schema,
        trees: Vec<PartitionTree>,
        coverage: &[Vec<f64>],
        ranges: Vec<(f64, f64)>,
    ) -> Result<PwcModel> {
        if trees.len() != coverage.len() || ranges.len() != schema.len() {
            return Err(Error::Config("trees, coverage and ranges disagree in size".into()));
        }
        let coverage = normalize_coverage(&coverage.to_vec());
        let leaves = trees
            .iter()
            .zip(&coverage)
            .map(|(tree, q)| {
                let mut all = tree.all_leaf_bounds(&schema)?;
                if all.len() != q.len() {
                    return Err(Error::Config("coverage does not match the number of leaves".into()));
                }
                all.iter_mut()
                    .zip(q)
                    .map(|(bounds, &coverage)| {
                        clip_bounds(bounds, &ranges);
                        let mut log_inv_volume = 0.0;
                        for b in bounds.iter() {
                            log_inv_volume -= match b {
                                FeatureBounds::Interval { lo, hi } => (hi - lo).ln(),
                                FeatureBounds::Levels(l) => (l.len() as f64).ln(),
                            };
                        }
                        if coverage > 0.0 && !log_inv_volume.is_finite() {
                            return Err(Error::NonFinite(
                                "leaf with positive coverage has zero or unbounded volume".into(),
                            ));
                        }
                        Ok(PwcLeaf {
                            coverage,
                            bounds: std::mem::take(bounds),
                            log_inv_volume,
                        })
                    })
                    .collect()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PwcModel {
            schema,
            trees,
            leaves,
            ranges,
        })
    }
}

/// Fits a piecewise-constant density.
///
/// Leaf volumes are measured inside the bounding box of `ds`, which is what
/// makes the root-side leaves proper. In supervised mode coverage counts all
/// in-bag rows regardless of label.
pub fn fit_pwc(ds: &Dataset, mode: PwcMode<'_>, cfg: &PwcConfig) -> Result<PwcModel> {
    match mode {
        PwcMode::Unsupervised(arf) => {
            if ds.schema() != &arf.forest.schema || ds.n_rows() != arf.n_original {
                return Err(Error::SchemaMismatch("data is not the forest's training data".into()));
            }
            let coverage = leaf_coverage(&arf.forest)?;
            let trees = arf.forest.trees.iter().map(PartitionTree::from).collect();
            PwcModel::new(ds.schema().clone(), trees, &coverage, ds.column_ranges())
        }
        PwcMode::Supervised { target } => {
            if target >= ds.n_cols() || ds.schema().column(target).is_continuous() {
                return Err(Error::Config(format!("column {target} is not a categorical target")));
            }
            let (x, y) = ds.split_off_column(target);
            let labels: Vec<u32> = y.iter().map(|&v| v as u32).collect();
            let forest = fit_forest(&x, &labels, &cfg.forest)?;
            let coverage: Vec<Vec<f64>> = forest
                .trees
                .iter()
                .map(|t| t.leaves().iter().map(|l| l.train_count as f64 / t.n_b as f64).collect())
                .collect();
            let trees = forest.trees.iter().map(PartitionTree::from).collect();
            PwcModel::new(x.schema().clone(), trees, &coverage, x.column_ranges())
        }
    }
}

/// Log of the tree-averaged piecewise-constant density at `row`.
pub fn pwc_log_density(model: &PwcModel, row: &[f64]) -> f64 {
    let terms: Vec<f64> = model
        .trees
        .iter()
        .zip(&model.leaves)
        .map(|(tree, leaves)| {
            let leaf = &leaves[tree.leaf_of(row)];
            if leaf.coverage > 0.0 && leaf.contains(row) {
                leaf.coverage.ln() + leaf.log_inv_volume
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    log_sum_exp(&terms) - (model.trees.len() as f64).ln()
}

/// Negative log-likelihood of `ds`; zero-density rows are counted, not scored.
pub fn pwc_nll(model: &PwcModel, ds: &Dataset) -> Result<NllReport> {
    if ds.schema() != &model.schema {
        return Err(Error::SchemaMismatch("data schema differs from the model's".into()));
    }
    if ds.is_empty() {
        return Err(Error::InsufficientData("no rows to score".into()));
    }
    let ld: Vec<f64> = (0..ds.n_rows()).into_par_iter().map(|i| pwc_log_density(model, ds.row(i))).collect();
    Ok(summarize_nll(&ld, false))
}
