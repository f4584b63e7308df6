//! Forest generative sampling, unconditional and evidence-conditioned.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arf::{cumulative, draw_cumulative, ArfConfig};
use crate::error::{Error, Result};
use crate::forde::{FeatureDist, FordeModel, LeafProfile};
use crate::forest::FeatureBounds;
use crate::rng::{stream_rng, tag};
use crate::tabular::{Dataset, Schema};

/// Restriction on a single feature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Constraint {
    /// Closed interval on a continuous feature.
    Interval { lo: f64, hi: f64 },
    /// Allowed level indices of a categorical feature.
    Levels(Vec<usize>),
}

/// A conjunction of per-feature constraints.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    constraints: Vec<(usize, Constraint)>,
}

impl Evidence {
    pub fn new(mut constraints: Vec<(usize, Constraint)>) -> Result<Self> {
        constraints.sort_by_key(|(j, _)| *j);
        if constraints.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Config("more than one constraint on a feature".into()));
        }
        for (j, c) in &constraints {
            let empty = match c {
                Constraint::Interval { lo, hi } => !(lo < hi),
                Constraint::Levels(levels) => levels.is_empty(),
            };
            if empty {
                return Err(Error::Config(format!("empty constraint on feature {j}")));
            }
        }
        Ok(Evidence { constraints })
    }

    /// Parses `;`-separated constraints such as `x1=1.0:1.2` (either end may
    /// be empty for an unbounded side) and `color=red|blue`.
    pub fn parse(text: &str, schema: &Schema) -> Result<Self> {
        let mut constraints = Vec::new();
        for part in text.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (name, value) = part
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("evidence {part:?} is not of the form name=value")))?;
            let name = name.trim();
            let j = schema
                .index_of(name)
                .ok_or_else(|| Error::Config(format!("evidence names unknown column {name:?}")))?;
            let constraint = match schema.column(j).levels() {
                None => {
                    let (lo, hi) = value
                        .split_once(':')
                        .ok_or_else(|| Error::Config(format!("interval for {name} must be lo:hi")))?;
                    let bound = |s: &str, inf: f64| -> Result<f64> {
                        let s = s.trim();
                        if s.is_empty() {
                            return Ok(inf);
                        }
                        s.parse::<f64>()
                            .ok()
                            .filter(|v| !v.is_nan())
                            .ok_or_else(|| Error::Config(format!("bad bound {s:?} for {name}")))
                    };
                    Constraint::Interval {
                        lo: bound(lo, f64::NEG_INFINITY)?,
                        hi: bound(hi, f64::INFINITY)?,
                    }
                }
                Some(_) => Constraint::Levels(
                    value
                        .split('|')
                        .map(|l| {
                            schema
                                .level_index(j, l.trim())
                                .ok_or_else(|| Error::Config(format!("{name} has no level {:?}", l.trim())))
                        })
                        .collect::<Result<Vec<_>>>()?,
                ),
            };
            constraints.push((j, constraint));
        }
        Evidence::new(constraints)
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn constraints(&self) -> &[(usize, Constraint)] {
        &self.constraints
    }

    /// Whether a row satisfies every constraint.
    pub fn admits(&self, row: &[f64]) -> bool {
        self.constraints.iter().all(|(j, c)| match c {
            Constraint::Interval { lo, hi } => *lo <= row[*j] && row[*j] <= *hi,
            Constraint::Levels(levels) => levels.contains(&(row[*j] as usize)),
        })
    }
}

/// How leaf weights react to evidence.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reweighting {
    /// Keep compatible leaves' coverage; trees with a compatible leaf are
    /// drawn uniformly.
    #[default]
    Coverage,
    /// Weight leaves by coverage times the evidence mass under the leaf's
    /// distribution and trees by their total weight: the exact posterior
    /// of the mixture.
    ExactBayes,
}

struct TreePlan {
    tree: usize,
    leaves: Vec<usize>,
    cumulative: Vec<f64>,
}

struct Plan<'a> {
    model: &'a FordeModel,
    evidence: &'a Evidence,
    trees: Vec<TreePlan>,
    /// Cumulative tree weights; `None` draws trees uniformly.
    tree_cumulative: Option<Vec<f64>>,
}

/// Evidence mass of a leaf, or `None` if the leaf cannot produce it.
fn leaf_evidence_mass(profile: &LeafProfile, evidence: &Evidence) -> Option<f64> {
    let dist = profile.dist.as_ref()?;
    if profile.coverage <= 0.0 {
        return None;
    }
    let mut mass = 1.0;
    for (j, c) in evidence.constraints() {
        let m = match (&dist[*j], c, &profile.bounds[*j]) {
            (FeatureDist::Continuous(tn), Constraint::Interval { lo, hi }, FeatureBounds::Interval { lo: blo, hi: bhi }) => {
                if !(lo.max(*blo) < hi.min(*bhi)) {
                    return None;
                }
                tn.log_mass(*lo, *hi).exp()
            }
            (FeatureDist::Categorical(p), Constraint::Levels(levels), _) => {
                levels.iter().filter_map(|&l| p.probs.get(l)).sum()
            }
            _ => return None,
        };
        if !(m > 0.0) {
            return None;
        }
        mass *= m;
    }
    Some(mass)
}

impl<'a> Plan<'a> {
    fn new(model: &'a FordeModel, evidence: &'a Evidence, mode: Reweighting) -> Result<Self> {
        let d = model.schema.len();
        for (j, c) in evidence.constraints() {
            let ok = *j < d
                && match c {
                    Constraint::Interval { .. } => model.schema.column(*j).is_continuous(),
                    Constraint::Levels(levels) => levels.iter().all(|&l| l < model.schema.column(*j).n_levels()),
                };
            if !ok {
                return Err(Error::Config(format!("constraint does not fit column {j}")));
            }
        }
        let mut trees = Vec::new();
        let mut tree_weights = Vec::new();
        for (b, profiles) in model.profiles.iter().enumerate() {
            let mut leaves = Vec::new();
            let mut weights = Vec::new();
            for p in profiles {
                if let Some(mass) = leaf_evidence_mass(p, evidence) {
                    leaves.push(p.leaf);
                    weights.push(match mode {
                        Reweighting::Coverage => p.coverage,
                        Reweighting::ExactBayes => p.coverage * mass,
                    });
                }
            }
            let total: f64 = weights.iter().sum();
            if evidence.is_empty() && !(total > 0.0) {
                return Err(Error::Internal(format!("tree {b} has zero total coverage")));
            }
            if total > 0.0 {
                tree_weights.push(total);
                trees.push(TreePlan {
                    tree: b,
                    leaves,
                    cumulative: cumulative(&weights),
                });
            }
        }
        if trees.is_empty() {
            return Err(Error::EvidenceUnsupported);
        }
        let tree_cumulative = (mode == Reweighting::ExactBayes).then(|| cumulative(&tree_weights));
        Ok(Plan {
            model,
            evidence,
            trees,
            tree_cumulative,
        })
    }

    fn draw_leaf<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, usize) {
        let t = match &self.tree_cumulative {
            None => rng.random_range(0..self.trees.len()),
            Some(c) => draw_cumulative(c, rng),
        };
        let plan = &self.trees[t];
        (plan.tree, plan.leaves[draw_cumulative(&plan.cumulative, rng)])
    }

    fn sample_row<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<f64>) {
        let (b, l) = self.draw_leaf(rng);
        let profile = &self.model.profiles[b][l];
        let dist = profile.dist.as_ref().expect("sampled leaves have distributions");
        let mut constraints = self.evidence.constraints().iter().peekable();
        for (j, f) in dist.iter().enumerate() {
            let constraint = constraints.next_if(|(k, _)| *k == j).map(|(_, c)| c);
            let x = match (f, constraint) {
                (FeatureDist::Continuous(tn), Some(Constraint::Interval { lo, hi })) => {
                    tn.restricted(*lo, *hi).unwrap_or(*tn).sample(rng)
                }
                (FeatureDist::Continuous(tn), _) => tn.sample(rng),
                (FeatureDist::Categorical(p), Some(Constraint::Levels(levels))) => {
                    let masked: Vec<f64> = p
                        .probs
                        .iter()
                        .enumerate()
                        .map(|(k, &w)| if levels.contains(&k) { w } else { 0.0 })
                        .collect();
                    draw_cumulative(&cumulative(&masked), rng) as f64
                }
                (FeatureDist::Categorical(p), _) => draw_cumulative(&cumulative(&p.probs), rng) as f64,
            };
            out.push(x);
        }
    }

    fn sample(&self, m: usize, seed: u64) -> Result<Dataset> {
        let d = self.model.schema.len();
        let rows: Vec<Vec<f64>> = (0..m)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream_rng(seed, tag::FORGE, i as u64);
                let mut row = Vec::with_capacity(d);
                self.sample_row(&mut rng, &mut row);
                row
            })
            .collect();
        Dataset::new(self.model.schema.clone(), rows.concat())
    }
}

/// Draws a tree uniformly and a leaf with probability equal to its coverage.
/// Forest settings for fitting a model meant for synthesis.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ForgePreset {
    /// 20 trees, minimum node size 2.
    #[default]
    Default,
    /// 10 trees, minimum node size 5.
    Benchmark,
}

impl ForgePreset {
    pub fn arf_config(self, seed: u64) -> ArfConfig {
        let (num_trees, min_node_size) = match self {
            ForgePreset::Default => (20, 2),
            ForgePreset::Benchmark => (10, 5),
        };
        let mut cfg = ArfConfig { seed, ..ArfConfig::default() };
        cfg.forest.num_trees = num_trees;
        cfg.forest.min_node_size = min_node_size;
        cfg
    }
}

pub fn sample_leaf_index<R: Rng + ?Sized>(model: &FordeModel, rng: &mut R) -> Result<(usize, usize)> {
    let evidence = Evidence::default();
    Ok(Plan::new(model, &evidence, Reweighting::Coverage)?.draw_leaf(rng))
}

/// Generates `m` synthetic rows. Row `i` uses its own random stream, so the
/// output depends only on `seed`.
pub fn forge_sample(model: &FordeModel, m: usize, seed: u64) -> Result<Dataset> {
    conditional_sample(model, &Evidence::default(), m, seed, Reweighting::Coverage)
}

/// Generates `m` rows restricted to leaves compatible with `evidence`, with
/// constrained features drawn from their leaf distributions restricted to the
/// evidence.
pub fn conditional_sample(
    model: &FordeModel,
    evidence: &Evidence,
    m: usize,
    seed: u64,
    mode: Reweighting,
) -> Result<Dataset> {
    if m == 0 {
        return Err(Error::Config("sample size must be at least 1".into()));
    }
    Plan::new(model, evidence, mode)?.sample(m, seed)
}
