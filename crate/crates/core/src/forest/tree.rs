use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::split::best_split;
use super::SplitLiteral;
use crate::serde_ext;
use crate::error::{Error, Result};
use crate::tabular::{Dataset, Schema};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Leaf {
    pub id: usize,
    /// Fraction of class-1 rows among the in-bag rows of the leaf.
    pub soft_label: f64,
    pub train_count: usize,
    /// In-bag row count per class.
    pub class_counts: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeNode {
    Internal {
        split: SplitLiteral,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf(Leaf),
}

/// Settings for growing one tree.
#[derive(Clone, Debug)]
pub struct GrowParams {
    pub mtry: usize,
    pub min_node_size: usize,
    pub max_depth: Option<usize>,
    pub n_classes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub root: TreeNode,
    pub n_leaves: usize,
    /// In-bag multiplicity of every row of the training table.
    #[serde(skip)]
    pub inbag: Vec<u32>,
    /// Number of in-bag rows, counting repeats.
    pub n_b: usize,
}

/// Per-feature region of a leaf.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureBounds {
    /// Half-open interval `[lo, hi)`; infinite ends are unbounded.
    Interval {
        #[serde(with = "serde_ext::lower_bound")]
        lo: f64,
        #[serde(with = "serde_ext::upper_bound")]
        hi: f64,
    },
    /// Allowed level indices, ascending.
    Levels(Vec<usize>),
}

impl FeatureBounds {
    pub fn contains(&self, v: f64) -> bool {
        match self {
            FeatureBounds::Interval { lo, hi } => *lo <= v && v < *hi,
            FeatureBounds::Levels(levels) => levels.contains(&(v as usize)),
        }
    }
}

struct Builder<'a, R> {
    ds: &'a Dataset,
    labels: &'a [u32],
    params: &'a GrowParams,
    rng: &'a mut R,
    next_leaf: usize,
}

impl<R: Rng> Builder<'_, R> {
    fn leaf(&mut self, rows: &[usize]) -> TreeNode {
        let mut class_counts = vec![0u64; self.params.n_classes];
        for &i in rows {
            class_counts[self.labels[i] as usize] += 1;
        }
        let soft_label = if rows.is_empty() || self.params.n_classes < 2 {
            0.0
        } else {
            class_counts[1] as f64 / rows.len() as f64
        };
        let id = self.next_leaf;
        self.next_leaf += 1;
        TreeNode::Leaf(Leaf {
            id,
            soft_label,
            train_count: rows.len(),
            class_counts,
        })
    }

    fn grow(&mut self, rows: &mut [usize], depth: usize) -> TreeNode {
        let p = self.params;
        let stop = rows.len() < 2 * p.min_node_size.max(1) || p.max_depth.is_some_and(|m| depth >= m);
        if stop {
            return self.leaf(rows);
        }
        let d = self.ds.n_cols();
        let order = index::sample(self.rng, d, d).into_vec();
        let mtry = p.mtry.clamp(1, d);
        let mut features = order[..mtry].to_vec();
        features.sort_unstable();
        let mut found = best_split(self.ds, rows, self.labels, p.n_classes, &features, p.min_node_size);
        // When none of the drawn features can split the node, keep drawing
        // one feature at a time rather than stopping early.
        for &f in &order[mtry..] {
            if found.is_some() {
                break;
            }
            found = best_split(self.ds, rows, self.labels, p.n_classes, &[f], p.min_node_size);
        }
        let Some(split) = found else {
            return self.leaf(rows);
        };
        let literal = split.literal;
        let mut n_left = 0;
        for k in 0..rows.len() {
            if literal.holds(self.ds.row(rows[k])) {
                rows.swap(k, n_left);
                n_left += 1;
            }
        }
        let (l, r) = rows.split_at_mut(n_left);
        let left = Box::new(self.grow(l, depth + 1));
        let right = Box::new(self.grow(r, depth + 1));
        TreeNode::Internal {
            split: literal,
            left,
            right,
        }
    }
}

impl Tree {
    /// Grows a tree on the in-bag multiset `rows` of `ds`.
    pub fn grow<R: Rng>(
        ds: &Dataset,
        labels: &[u32],
        mut rows: Vec<usize>,
        params: &GrowParams,
        rng: &mut R,
    ) -> Result<Tree> {
        if rows.len() < params.min_node_size.max(1) {
            return Err(Error::InsufficientData(format!(
                "{} in-bag rows, fewer than the minimum node size {}",
                rows.len(),
                params.min_node_size
            )));
        }
        let mut inbag = vec![0u32; ds.n_rows()];
        for &i in &rows {
            inbag[i] += 1;
        }
        let n_b = rows.len();
        let mut builder = Builder {
            ds,
            labels,
            params,
            rng,
            next_leaf: 0,
        };
        let root = builder.grow(&mut rows, 0);
        Ok(Tree {
            root,
            n_leaves: builder.next_leaf,
            inbag,
            n_b,
        })
    }

    pub fn leaf_node(&self, row: &[f64]) -> &Leaf {
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf(leaf) => return leaf,
                TreeNode::Internal { split, left, right } => {
                    node = if split.holds(row) { left } else { right };
                }
            }
        }
    }

    /// Id of the unique leaf that `row` falls into.
    pub fn leaf_of(&self, row: &[f64]) -> usize {
        self.leaf_node(row).id
    }

    /// Leaves in id order.
    pub fn leaves(&self) -> Vec<&Leaf> {
        fn walk<'a>(node: &'a TreeNode, out: &mut Vec<&'a Leaf>) {
            match node {
                TreeNode::Leaf(l) => out.push(l),
                TreeNode::Internal { left, right, .. } => {
                    walk(left, out);
                    walk(right, out);
                }
            }
        }
        let mut out = Vec::with_capacity(self.n_leaves);
        walk(&self.root, &mut out);
        out
    }

    /// Split path of every leaf, indexed by leaf id: (literal, taken-true).
    pub fn leaf_paths(&self) -> Vec<Vec<(SplitLiteral, bool)>> {
        fn walk(
            node: &TreeNode,
            path: &mut Vec<(SplitLiteral, bool)>,
            out: &mut Vec<Vec<(SplitLiteral, bool)>>,
        ) {
            match node {
                TreeNode::Leaf(l) => out[l.id] = path.clone(),
                TreeNode::Internal { split, left, right } => {
                    path.push((*split, true));
                    walk(left, path, out);
                    path.last_mut().unwrap().1 = false;
                    walk(right, path, out);
                    path.pop();
                }
            }
        }
        let mut out = vec![Vec::new(); self.n_leaves];
        walk(&self.root, &mut Vec::new(), &mut out);
        out
    }

    pub fn depth(&self) -> usize {
        fn depth(node: &TreeNode) -> usize {
            match node {
                TreeNode::Leaf(_) => 0,
                TreeNode::Internal { left, right, .. } => 1 + depth(left).max(depth(right)),
            }
        }
        depth(&self.root)
    }

    /// Bounds of every leaf, indexed by leaf id.
    pub fn all_leaf_bounds(&self, schema: &Schema) -> Result<Vec<Vec<FeatureBounds>>> {
        self.leaf_paths()
            .iter()
            .map(|path| bounds_from_path(path, schema))
            .collect()
    }

    /// Region of leaf `leaf_id`. Unbounded interval ends are infinite unless
    /// `global_ranges` is given, in which case they are clipped to it.
    pub fn leaf_bounds(
        &self,
        leaf_id: usize,
        schema: &Schema,
        global_ranges: Option<&[(f64, f64)]>,
    ) -> Result<Vec<FeatureBounds>> {
        let paths = self.leaf_paths();
        let path = paths
            .get(leaf_id)
            .ok_or_else(|| Error::Internal(format!("tree has no leaf {leaf_id}")))?;
        let mut bounds = bounds_from_path(path, schema)?;
        if let Some(ranges) = global_ranges {
            clip_bounds(&mut bounds, ranges);
        }
        Ok(bounds)
    }
}

/// Replaces infinite interval ends by the given ranges.
pub fn clip_bounds(bounds: &mut [FeatureBounds], ranges: &[(f64, f64)]) {
    for (b, &(min, max)) in bounds.iter_mut().zip(ranges) {
        if let FeatureBounds::Interval { lo, hi } = b {
            if lo.is_infinite() {
                *lo = min;
            }
            if hi.is_infinite() {
                *hi = max;
            }
        }
    }
}

pub(crate) fn bounds_from_path(path: &[(SplitLiteral, bool)], schema: &Schema) -> Result<Vec<FeatureBounds>> {
    use super::SplitKind;
    let mut bounds: Vec<FeatureBounds> = schema
        .columns()
        .iter()
        .map(|c| match c.levels() {
            None => FeatureBounds::Interval {
                lo: f64::NEG_INFINITY,
                hi: f64::INFINITY,
            },
            Some(levels) => FeatureBounds::Levels((0..levels.len()).collect()),
        })
        .collect();
    for &(lit, taken) in path {
        match (&mut bounds[lit.feature], lit.kind) {
            (FeatureBounds::Interval { lo, hi }, SplitKind::Less(t)) => {
                if taken {
                    *hi = hi.min(t);
                } else {
                    *lo = lo.max(t);
                }
            }
            (FeatureBounds::Levels(levels), SplitKind::Equal(level)) => {
                if taken {
                    levels.retain(|&l| l == level);
                } else {
                    levels.retain(|&l| l != level);
                }
            }
            _ => {
                return Err(Error::Internal(format!(
                    "literal kind does not match column {}",
                    lit.feature
                )))
            }
        }
    }
    if let Some(j) = bounds
        .iter()
        .position(|b| matches!(b, FeatureBounds::Levels(l) if l.is_empty()))
    {
        return Err(Error::Internal(format!("leaf allows no level of column {j}")));
    }
    Ok(bounds)
}
