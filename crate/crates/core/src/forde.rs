//! Forest density estimation.
//!
//! Every leaf of the converged adversarial forest becomes a mixture
//! component: its weight is the leaf's real-data coverage and its density is
//! a product of univariate densities, a truncated normal on each continuous
//! feature (truncated to the leaf's interval) and a smoothed categorical on
//! each categorical feature (restricted to the leaf's allowed levels). The
//! density of a row averages, over trees, the weighted component of the one
//! leaf per tree that contains it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arf::{leaf_coverage, leaf_members, normalize_coverage, ArfModel};
use crate::error::{Error, Result};
use crate::forest::{FeatureBounds, Forest, PartitionTree};
use crate::tabular::{mean, sample_std, Dataset, Schema};
use crate::truncnorm::{log_sum_exp, TruncNormal};

/// Smallest density floor used by [`nll`] when `zero_floor` is set.
pub const ZERO_DENSITY_FLOOR: f64 = 1e-300;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FordeConfig {
    /// Dirichlet pseudo-count added to every allowed level.
    pub prior_alpha: f64,
    /// Leaf standard deviations are floored at this multiple of the feature's
    /// global standard deviation (or at this value if that is zero).
    pub sigma_floor: f64,
    /// Score zero-density rows as `ZERO_DENSITY_FLOOR` instead of skipping them.
    pub zero_floor: bool,
    /// Which real rows of a leaf its distributions are estimated from.
    pub leaf_rows: LeafRows,
}

/// Real rows used to estimate a leaf's distributions. Coverage always
/// counts in-bag rows.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LeafRows {
    /// In-bag rows, repeated by bootstrap multiplicity.
    #[default]
    InBag,
    /// Distinct in-bag rows.
    DistinctInBag,
    /// Every real row that falls into the leaf, once each.
    All,
}

impl Default for FordeConfig {
    fn default() -> Self {
        FordeConfig {
            prior_alpha: 1.0,
            sigma_floor: 1e-6,
            zero_floor: false,
            leaf_rows: LeafRows::default(),
        }
    }
}

/// Level probabilities for one categorical feature, indexed by level.
/// Levels outside the leaf's allowed set have probability zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoricalParams {
    pub probs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum FeatureDist {
    Continuous(TruncNormal),
    Categorical(CategoricalParams),
}

impl FeatureDist {
    pub fn log_density(&self, x: f64) -> f64 {
        match self {
            FeatureDist::Continuous(tn) => tn.log_pdf(x),
            FeatureDist::Categorical(c) => c.probs.get(x as usize).map_or(f64::NEG_INFINITY, |p| p.ln()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeafProfile {
    pub tree: usize,
    pub leaf: usize,
    pub coverage: f64,
    pub bounds: Vec<FeatureBounds>,
    /// `None` for leaves without real rows; such leaves have zero weight.
    pub dist: Option<Vec<FeatureDist>>,
    pub original_count: usize,
}

impl LeafProfile {
    /// `ln(coverage * prod_j f_j(x_j))`.
    pub fn log_weighted_density(&self, row: &[f64]) -> f64 {
        match &self.dist {
            Some(dist) if self.coverage > 0.0 => {
                self.coverage.ln() + dist.iter().zip(row).map(|(f, &x)| f.log_density(x)).sum::<f64>()
            }
            _ => f64::NEG_INFINITY,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FordeModel {
    pub schema: Schema,
    pub trees: Vec<PartitionTree>,
    /// `profiles[b][l]` describes leaf `l` of tree `b`.
    pub profiles: Vec<Vec<LeafProfile>>,
    pub config: FordeConfig,
}

/// Mean and sample standard deviation of the leaf's values, truncated to the
/// leaf interval. The deviation is floored at `sigma_floor`, which also
/// covers single values and ties.
pub fn estimate_continuous(values: &[f64], lo: f64, hi: f64, sigma_floor: f64) -> Result<TruncNormal> {
    if values.is_empty() {
        return Err(Error::InsufficientData("no values to estimate from".into()));
    }
    let mu = mean(values);
    let sigma = sample_std(values).unwrap_or(0.0).max(sigma_floor);
    Ok(TruncNormal::new(mu, sigma, lo, hi))
}

/// Add-`alpha` smoothed level frequencies over the allowed levels.
pub fn estimate_categorical(
    values: &[usize],
    allowed: &[usize],
    n_levels: usize,
    prior_alpha: f64,
) -> Result<CategoricalParams> {
    if allowed.is_empty() {
        return Err(Error::Internal("no allowed levels".into()));
    }
    let mut counts = vec![0usize; n_levels];
    for &v in values {
        counts[v] += 1;
    }
    let denom = values.len() as f64 + prior_alpha * allowed.len() as f64;
    let mut probs = vec![0.0; n_levels];
    for &l in allowed {
        probs[l] = (counts[l] as f64 + prior_alpha) / denom;
    }
    Ok(CategoricalParams { probs })
}

/// Per-feature sigma floor derived from the data's global spread.
pub fn sigma_floors(ds: &Dataset, rel: f64) -> Vec<f64> {
    ds.column_std()
        .into_iter()
        .map(|s| if s > 0.0 { rel * s } else { rel })
        .collect()
}

/// Estimates leaf and distribution parameters from an adversarial forest and
/// the real data it was trained on.
pub fn forde_fit(arf: &ArfModel, ds: &Dataset, cfg: &FordeConfig) -> Result<FordeModel> {
    if ds.schema() != &arf.forest.schema {
        return Err(Error::SchemaMismatch("data schema differs from the forest's".into()));
    }
    if ds.n_rows() != arf.n_original {
        return Err(Error::SchemaMismatch(format!(
            "forest was trained on {} real rows, got {}",
            arf.n_original,
            ds.n_rows()
        )));
    }
    if !(cfg.prior_alpha > 0.0) {
        return Err(Error::Config(format!("prior alpha {} must be positive", cfg.prior_alpha)));
    }
    let coverage = normalize_coverage(&leaf_coverage(&arf.forest)?);
    let members = leaf_members(&arf.forest, ds);
    let psi_rows = match cfg.leaf_rows {
        LeafRows::InBag => None,
        mode => Some(psi_members(&arf.forest, ds, mode)),
    };
    let floors = sigma_floors(ds, cfg.sigma_floor);
    let schema = ds.schema();

    let trees: Vec<PartitionTree> = arf.forest.trees.iter().map(PartitionTree::from).collect();
    let profiles = trees
        .par_iter()
        .enumerate()
        .map(|(b, tree)| {
            let bounds = tree.all_leaf_bounds(schema)?;
            bounds
                .into_iter()
                .enumerate()
                .map(|(l, bounds)| {
                    let rows = &members[b][l];
                    let psi = psi_rows.as_ref().map_or(rows, |m| &m[b][l]);
                    let dist = if rows.is_empty() {
                        None
                    } else {
                        Some(leaf_distributions(ds, psi, &bounds, &floors, cfg)?)
                    };
                    Ok(LeafProfile {
                        tree: b,
                        leaf: l,
                        coverage: if rows.is_empty() { 0.0 } else { coverage[b][l] },
                        bounds,
                        dist,
                        original_count: rows.len(),
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let profiles = renormalize(profiles);
    Ok(FordeModel {
        schema: schema.clone(),
        trees,
        profiles,
        config: cfg.clone(),
    })
}

fn psi_members(forest: &Forest, ds: &Dataset, mode: LeafRows) -> Vec<Vec<Vec<usize>>> {
    forest
        .trees
        .par_iter()
        .map(|tree| {
            let mut members = vec![Vec::new(); tree.n_leaves];
            for i in 0..ds.n_rows() {
                let inbag = tree.inbag.get(i).copied().unwrap_or(0) > 0;
                if mode == LeafRows::All || inbag {
                    members[tree.leaf_of(ds.row(i))].push(i);
                }
            }
            members
        })
        .collect()
}

fn renormalize(mut profiles: Vec<Vec<LeafProfile>>) -> Vec<Vec<LeafProfile>> {
    for tree in &mut profiles {
        let total: f64 = tree.iter().map(|p| p.coverage).sum();
        if total > 0.0 {
            for p in tree.iter_mut() {
                p.coverage /= total;
            }
        }
    }
    profiles
}

fn leaf_distributions(
    ds: &Dataset,
    rows: &[usize],
    bounds: &[FeatureBounds],
    floors: &[f64],
    cfg: &FordeConfig,
) -> Result<Vec<FeatureDist>> {
    bounds
        .iter()
        .enumerate()
        .map(|(j, b)| match b {
            FeatureBounds::Interval { lo, hi } => {
                let values: Vec<f64> = rows.iter().map(|&i| ds.value(i, j)).collect();
                estimate_continuous(&values, *lo, *hi, floors[j]).map(FeatureDist::Continuous)
            }
            FeatureBounds::Levels(allowed) => {
                let values: Vec<usize> = rows.iter().map(|&i| ds.level(i, j)).collect();
                let n_levels = ds.schema().column(j).n_levels();
                estimate_categorical(&values, allowed, n_levels, cfg.prior_alpha)
                    .map(FeatureDist::Categorical)
            }
        })
        .collect()
}

impl FordeModel {
    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    /// The profile of the leaf containing `row` in each tree.
    pub fn containing_leaves<'a>(&'a self, row: &'a [f64]) -> impl Iterator<Item = &'a LeafProfile> + 'a {
        self.trees
            .iter()
            .zip(&self.profiles)
            .map(move |(t, p)| &p[t.leaf_of(row)])
    }

    /// Log of the coverage-weighted mixture density at `row`; `-inf` when
    /// every containing leaf assigns it zero density.
    pub fn log_density(&self, row: &[f64]) -> f64 {
        let terms: Vec<f64> = self.containing_leaves(row).map(|p| p.log_weighted_density(row)).collect();
        log_sum_exp(&terms) - (self.n_trees() as f64).ln()
    }

    pub fn log_density_all(&self, ds: &Dataset) -> Vec<f64> {
        (0..ds.n_rows()).into_par_iter().map(|i| self.log_density(ds.row(i))).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NllReport {
    /// Mean negative log-likelihood in nats over the scored rows.
    pub mean: f64,
    pub std_error: f64,
    pub n_rows: usize,
    pub n_scored: usize,
    /// Rows whose density is exactly zero.
    pub zero_density_rows: Vec<usize>,
}

/// Summarizes per-row log-densities as a negative log-likelihood.
pub fn summarize_nll(log_densities: &[f64], zero_floor: bool) -> NllReport {
    let mut losses = Vec::with_capacity(log_densities.len());
    let mut zero_density_rows = Vec::new();
    for (i, &ld) in log_densities.iter().enumerate() {
        if ld == f64::NEG_INFINITY {
            zero_density_rows.push(i);
            if zero_floor {
                losses.push(-ZERO_DENSITY_FLOOR.ln());
            }
        } else {
            losses.push(-ld);
        }
    }
    let (mean, std_error) = if losses.is_empty() {
        (f64::INFINITY, f64::NAN)
    } else {
        let m = mean(&losses);
        (m, sample_std(&losses).map_or(0.0, |s| s / (losses.len() as f64).sqrt()))
    };
    NllReport {
        mean,
        std_error,
        n_rows: log_densities.len(),
        n_scored: losses.len(),
        zero_density_rows,
    }
}

/// Mean negative log-likelihood of `ds` under `model`.
pub fn nll(model: &FordeModel, ds: &Dataset) -> Result<NllReport> {
    if ds.schema() != &model.schema {
        return Err(Error::SchemaMismatch("data schema differs from the model's".into()));
    }
    if ds.is_empty() {
        return Err(Error::InsufficientData("no rows to score".into()));
    }
    Ok(summarize_nll(&model.log_density_all(ds), model.config.zero_floor))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::PartitionNode;
    use crate::tabular::Column;

    #[test]
    fn continuous_estimate_closed_form() {
        let tn = estimate_continuous(&[0.2, 0.4, 0.6], 0.0, 1.0, 1e-6).unwrap();
        assert!((tn.mu - 0.4).abs() < 1e-15);
        assert!((tn.sigma - 0.2).abs() < 1e-15);
        assert_eq!((tn.lo, tn.hi), (0.0, 1.0));
    }

    #[test]
    fn ties_fall_back_to_floor() {
        let tn = estimate_continuous(&[1.5, 1.5], 1.0, 2.0, 1e-6).unwrap();
        assert_eq!(tn.sigma, 1e-6);
        assert!(tn.log_pdf(1.5).is_finite());
        let single = estimate_continuous(&[1.5], 1.0, 2.0, 0.25).unwrap();
        assert_eq!(single.sigma, 0.25);
        assert!(estimate_continuous(&[], 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn laplace_smoothing() {
        let p = estimate_categorical(&[0, 0], &[0, 1], 2, 1.0).unwrap();
        assert_eq!(p.probs, vec![0.75, 0.25]);
        let pinned = estimate_categorical(&[2, 2, 2], &[2], 3, 1.0).unwrap();
        assert_eq!(pinned.probs, vec![0.0, 0.0, 1.0]);
        let restricted = estimate_categorical(&[1], &[1, 2], 3, 1.0).unwrap();
        assert_eq!(restricted.probs[0], 0.0);
        assert!(estimate_categorical(&[], &[], 3, 1.0).is_err());
    }

    fn single_leaf_model(dist: Vec<FeatureDist>, coverage: f64, schema: Schema) -> FordeModel {
        let d = schema.len();
        FordeModel {
            schema,
            trees: vec![PartitionTree {
                root: PartitionNode::Leaf(0),
                n_leaves: 1,
            }],
            profiles: vec![vec![LeafProfile {
                tree: 0,
                leaf: 0,
                coverage,
                bounds: vec![
                    FeatureBounds::Interval {
                        lo: f64::NEG_INFINITY,
                        hi: f64::INFINITY
                    };
                    d
                ],
                dist: Some(dist),
                original_count: 1,
            }]],
            config: FordeConfig::default(),
        }
    }

    #[test]
    fn uniform_limit_has_unit_density() {
        let schema = Schema::new(vec![Column::continuous("a"), Column::continuous("b")]).unwrap();
        let u = FeatureDist::Continuous(TruncNormal::new(0.5, 1e7, 0.0, 1.0));
        let model = single_leaf_model(vec![u.clone(), u], 1.0, schema);
        for row in [[0.1, 0.2], [0.5, 0.5], [0.99, 0.01]] {
            assert!(model.log_density(&row).abs() < 1e-9);
        }
        assert_eq!(model.log_density(&[1.5, 0.5]), f64::NEG_INFINITY);
    }

    #[test]
    fn coverage_scales_density() {
        // 0.1 * 2.0 * 0.5 = 0.1
        let schema = Schema::new(vec![
            Column::categorical("a", ["x", "y"]),
            Column::categorical("b", ["x", "y"]),
        ])
        .unwrap();
        let model = single_leaf_model(
            vec![
                FeatureDist::Categorical(CategoricalParams { probs: vec![1.0, 0.0] }),
                FeatureDist::Categorical(CategoricalParams { probs: vec![0.5, 0.5] }),
            ],
            0.1,
            schema,
        );
        assert!((model.log_density(&[0.0, 1.0]).exp() - 0.05).abs() < 1e-15);

        let schema = Schema::new(vec![Column::continuous("a"), Column::continuous("b")]).unwrap();
        // Uniform on [0, 0.5] has density 2; uniform on [0, 2] has density 0.5.
        let model = single_leaf_model(
            vec![
                FeatureDist::Continuous(TruncNormal::new(0.25, 1e8, 0.0, 0.5)),
                FeatureDist::Continuous(TruncNormal::new(1.0, 1e8, 0.0, 2.0)),
            ],
            0.1,
            schema,
        );
        assert!((model.log_density(&[0.3, 1.7]).exp() - 0.1).abs() < 1e-9);
    }

    #[test]
    fn summary_counts_zero_rows() {
        let lds = [-1.0, f64::NEG_INFINITY, -3.0];
        let r = summarize_nll(&lds, false);
        assert_eq!(r.mean, 2.0);
        assert_eq!(r.zero_density_rows, vec![1]);
        assert_eq!(r.n_scored, 2);
        let f = summarize_nll(&lds, true);
        assert_eq!(f.n_scored, 3);
        assert!((f.mean - (4.0 - ZERO_DENSITY_FLOOR.ln()) / 3.0).abs() < 1e-12);
        let dup = summarize_nll(&[-1.0, -3.0, -1.0, -3.0], false);
        assert_eq!(dup.mean, r.mean);
    }
}
