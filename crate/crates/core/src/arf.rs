//! Adversarial random forests.
//!
//! A forest learns to tell the real rows (label 1) from synthetic rows
//! (label 0). The first synthetic table draws every column independently from
//! its empirical marginal. Each later table draws a leaf of the current forest
//! with probability equal to its real-data coverage and then draws every
//! column independently from the real rows in that leaf. The loop stops when
//! a freshly trained forest can no longer beat `0.5 + delta` out-of-bag
//! accuracy, keeping the forest whose leaves generated the data that fooled it.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::{fit_forest, Forest, ForestConfig, Resample};
use crate::rng::{derive_seed, stream_rng, tag};
use crate::tabular::Dataset;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArfConfig {
    /// Forest settings for every round. Its `seed` is ignored: round `r`
    /// uses a seed derived from `seed` and `r`.
    pub forest: ForestConfig,
    pub delta: f64,
    /// Maximum number of challenger rounds after the initial forest.
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for ArfConfig {
    fn default() -> Self {
        ArfConfig {
            forest: ForestConfig {
                num_trees: 100,
                min_node_size: 2,
                resample: Resample::Bootstrap,
                stratified: true,
                ..ForestConfig::default()
            },
            delta: 0.0,
            max_iters: 10,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ArfModel {
    /// Forest whose splits define the density; rows `0..n_original` of its
    /// training table are the real data.
    pub forest: Forest,
    /// Out-of-bag accuracy of every forest trained, initial forest first.
    pub trace: Vec<f64>,
    pub iterations_run: usize,
    pub converged: bool,
    pub n_original: usize,
    pub config: ArfConfig,
}

/// Mixture weight of every leaf, indexed `[tree][leaf]`.
pub type Coverage = Vec<Vec<f64>>;

/// Draws `m` rows with every cell sampled independently from the observed
/// values of its column.
pub fn sample_marginal_bootstrap<R: Rng>(ds: &Dataset, m: usize, rng: &mut R) -> Result<Dataset> {
    let n = ds.n_rows();
    if n == 0 {
        return Err(Error::InsufficientData("cannot resample an empty dataset".into()));
    }
    let d = ds.n_cols();
    let mut cells = Vec::with_capacity(m * d);
    for _ in 0..m {
        for j in 0..d {
            cells.push(ds.value(rng.random_range(0..n), j));
        }
    }
    Dataset::new(ds.schema().clone(), cells)
}

/// Real-data coverage `2 * (in-bag real rows in leaf) / n_b` of every leaf.
///
/// Label 1 marks real rows. With class-stratified resampling the real rows
/// are exactly half of each tree's in-bag rows and coverage sums to one per
/// tree; otherwise the sums scatter around one.
pub fn leaf_coverage(forest: &Forest) -> Result<Coverage> {
    forest
        .trees
        .iter()
        .enumerate()
        .map(|(b, tree)| {
            let leaves = tree.leaves();
            let real: u64 = leaves.iter().map(|l| l.class_counts.get(1).copied().unwrap_or(0)).sum();
            if real == 0 {
                return Err(Error::InsufficientData(format!("tree {b} has no in-bag real rows")));
            }
            Ok(leaves
                .iter()
                .map(|l| 2.0 * l.class_counts.get(1).copied().unwrap_or(0) as f64 / tree.n_b as f64)
                .collect())
        })
        .collect()
}

/// Rescales each tree's weights to sum to one.
pub fn normalize_coverage(coverage: &Coverage) -> Coverage {
    coverage
        .iter()
        .map(|q| {
            let total: f64 = q.iter().sum();
            q.iter().map(|v| if total > 0.0 { v / total } else { 0.0 }).collect()
        })
        .collect()
}

/// In-bag real rows of every leaf (repeated by multiplicity), `[tree][leaf]`.
pub fn leaf_members(forest: &Forest, real: &Dataset) -> Vec<Vec<Vec<usize>>> {
    forest
        .trees
        .par_iter()
        .map(|tree| {
            let mut members = vec![Vec::new(); tree.n_leaves];
            for i in 0..real.n_rows() {
                let k = tree.inbag.get(i).copied().unwrap_or(0) as usize;
                if k > 0 {
                    let leaf = tree.leaf_of(real.row(i));
                    members[leaf].extend(std::iter::repeat_n(i, k));
                }
            }
            members
        })
        .collect()
}

/// Samples an index from cumulative weights ending at a positive total.
pub(crate) fn draw_cumulative<R: Rng + ?Sized>(cumulative: &[f64], rng: &mut R) -> usize {
    let total = *cumulative.last().unwrap();
    let u = rng.random::<f64>() * total;
    cumulative
        .partition_point(|&c| c <= u)
        .min(cumulative.len() - 1)
}

pub(crate) fn cumulative(weights: &[f64]) -> Vec<f64> {
    weights
        .iter()
        .scan(0.0, |acc, &w| {
            *acc += w;
            Some(*acc)
        })
        .collect()
}

/// Draws `m` rows: a uniform tree, a leaf with probability proportional to
/// its coverage, then every column independently from the in-bag real rows
/// of that leaf.
pub fn sample_leafwise<R: Rng>(
    forest: &Forest,
    real: &Dataset,
    coverage: &Coverage,
    m: usize,
    rng: &mut R,
) -> Result<Dataset> {
    let members = leaf_members(forest, real);
    let weights: Vec<Vec<f64>> = normalize_coverage(coverage)
        .iter()
        .zip(&members)
        .map(|(q, mem)| {
            // Leaves without real rows cannot be sampled from.
            q.iter().zip(mem).map(|(&w, m)| if m.is_empty() { 0.0 } else { w }).collect::<Vec<_>>()
        })
        .map(|q| cumulative(&q))
        .collect();
    let d = real.n_cols();
    let n_trees = forest.trees.len();
    let mut cells = Vec::with_capacity(m * d);
    for _ in 0..m {
        let b = rng.random_range(0..n_trees);
        if weights[b].last().is_none_or(|&t| t <= 0.0) {
            return Err(Error::Internal(format!("tree {b} has zero total coverage")));
        }
        let leaf = &members[b][draw_cumulative(&weights[b], rng)];
        for j in 0..d {
            cells.push(real.value(leaf[rng.random_range(0..leaf.len())], j));
        }
    }
    Dataset::new(real.schema().clone(), cells)
}

fn stacked_labels(n: usize) -> Vec<u32> {
    let mut y = vec![1u32; n];
    y.resize(2 * n, 0);
    y
}

fn round_config(cfg: &ArfConfig, round: usize) -> ForestConfig {
    ForestConfig {
        seed: derive_seed(derive_seed(cfg.seed, tag::ARF_ROUND), round as u64),
        ..cfg.forest.clone()
    }
}

/// Runs the adversarial loop on `ds`.
pub fn arf_fit(ds: &Dataset, cfg: &ArfConfig) -> Result<ArfModel> {
    if !(0.0..0.5).contains(&cfg.delta) {
        return Err(Error::Config(format!("delta {} outside [0, 0.5)", cfg.delta)));
    }
    if cfg.max_iters == 0 {
        return Err(Error::Config("max_iters must be at least 1".into()));
    }
    let n = ds.n_rows();
    if n < 2 * cfg.forest.min_node_size.max(1) {
        return Err(Error::InsufficientData(format!(
            "{n} rows, need at least twice the minimum node size {}",
            cfg.forest.min_node_size
        )));
    }
    let labels = stacked_labels(n);
    let threshold = 0.5 + cfg.delta;

    let synthetic = sample_marginal_bootstrap(ds, n, &mut stream_rng(cfg.seed, tag::ARF_MARGINAL, 0))?;
    let stack = ds.vstack(&synthetic)?;
    let mut current = fit_forest(&stack, &labels, &round_config(cfg, 0))?;
    let mut trace = vec![current.oob_accuracy(&stack, &labels)?];
    if trace[0] <= threshold {
        return Ok(ArfModel {
            forest: current,
            trace,
            iterations_run: 0,
            converged: true,
            n_original: n,
            config: cfg.clone(),
        });
    }
    for round in 1..=cfg.max_iters {
        let coverage = leaf_coverage(&current)?;
        let mut rng = stream_rng(cfg.seed, tag::ARF_LEAFWISE, round as u64);
        let synthetic = sample_leafwise(&current, ds, &coverage, n, &mut rng)?;
        let stack = ds.vstack(&synthetic)?;
        let challenger = fit_forest(&stack, &labels, &round_config(cfg, round))?;
        let acc = challenger.oob_accuracy(&stack, &labels)?;
        trace.push(acc);
        if acc <= threshold {
            return Ok(ArfModel {
                forest: current,
                trace,
                iterations_run: round,
                converged: true,
                n_original: n,
                config: cfg.clone(),
            });
        }
        current = challenger;
    }
    Ok(ArfModel {
        forest: current,
        trace,
        iterations_run: cfg.max_iters,
        converged: false,
        n_original: n,
        config: cfg.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::{Column, Schema};

    fn two_cols(n: usize) -> Dataset {
        let schema = Schema::new(vec![
            Column::continuous("x"),
            Column::categorical("c", ["a", "b"]),
        ])
        .unwrap();
        let cells = (0..n).flat_map(|i| [i as f64, (i % 2) as f64]).collect();
        Dataset::new(schema, cells).unwrap()
    }

    #[test]
    fn constant_column_stays_constant() {
        let schema = Schema::new(vec![Column::continuous("k")]).unwrap();
        let ds = Dataset::new(schema, vec![3.5; 20]).unwrap();
        let out = sample_marginal_bootstrap(&ds, 100, &mut stream_rng(1, 0, 0)).unwrap();
        assert!(out.cells().iter().all(|&v| v == 3.5));
    }

    #[test]
    fn empty_dataset_is_an_error() {
        let ds = two_cols(0);
        assert!(sample_marginal_bootstrap(&ds, 5, &mut stream_rng(1, 0, 0)).is_err());
    }

    #[test]
    fn coverage_arithmetic() {
        use crate::forest::{Leaf, Tree, TreeNode};
        let tree = Tree {
            root: TreeNode::Leaf(Leaf {
                id: 0,
                soft_label: 0.5,
                train_count: 100,
                class_counts: vec![50, 50],
            }),
            n_leaves: 1,
            inbag: vec![],
            n_b: 100,
        };
        let forest = Forest {
            trees: vec![tree],
            config: ForestConfig::default(),
            schema: two_cols(1).schema().clone(),
            n_classes: 2,
        };
        assert_eq!(leaf_coverage(&forest).unwrap(), vec![vec![1.0]]);
        let mut f2 = forest.clone();
        if let TreeNode::Leaf(l) = &mut f2.trees[0].root {
            l.class_counts = vec![95, 5];
        }
        assert_eq!(leaf_coverage(&f2).unwrap(), vec![vec![0.1]]);
    }

    #[test]
    fn loop_respects_bounds_and_label_stack() {
        let ds = two_cols(60);
        let cfg = ArfConfig {
            forest: ForestConfig {
                num_trees: 10,
                ..ArfConfig::default().forest
            },
            max_iters: 3,
            seed: 4,
            ..ArfConfig::default()
        };
        let model = arf_fit(&ds, &cfg).unwrap();
        assert!(model.iterations_run <= 3);
        assert_eq!(model.trace.len(), model.iterations_run + 1);
        for tree in &model.forest.trees {
            assert_eq!(tree.inbag.len(), 120);
            assert_eq!(tree.n_b, 120);
        }
    }

    #[test]
    fn invalid_config_rejected() {
        let ds = two_cols(10);
        let bad_delta = ArfConfig { delta: 0.5, ..ArfConfig::default() };
        assert!(arf_fit(&ds, &bad_delta).is_err());
        let bad_iters = ArfConfig { max_iters: 0, ..ArfConfig::default() };
        assert!(arf_fit(&ds, &bad_iters).is_err());
        assert!(arf_fit(&two_cols(3), &ArfConfig::default()).is_err());
    }
}
