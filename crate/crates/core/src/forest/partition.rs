use serde::{Deserialize, Serialize};

use super::tree::bounds_from_path;
use super::{FeatureBounds, SplitLiteral, Tree, TreeNode};
use crate::error::Result;
use crate::tabular::Schema;

/// Split structure of a tree with leaves reduced to their ids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionNode {
    Split {
        split: SplitLiteral,
        left: Box<PartitionNode>,
        right: Box<PartitionNode>,
    },
    Leaf(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionTree {
    pub root: PartitionNode,
    pub n_leaves: usize,
}

impl From<&TreeNode> for PartitionNode {
    fn from(node: &TreeNode) -> Self {
        match node {
            TreeNode::Leaf(l) => PartitionNode::Leaf(l.id),
            TreeNode::Internal { split, left, right } => PartitionNode::Split {
                split: *split,
                left: Box::new(left.as_ref().into()),
                right: Box::new(right.as_ref().into()),
            },
        }
    }
}

impl From<&Tree> for PartitionTree {
    fn from(tree: &Tree) -> Self {
        PartitionTree {
            root: (&tree.root).into(),
            n_leaves: tree.n_leaves,
        }
    }
}

impl PartitionTree {
    pub fn leaf_of(&self, row: &[f64]) -> usize {
        let mut node = &self.root;
        loop {
            match node {
                PartitionNode::Leaf(id) => return *id,
                PartitionNode::Split { split, left, right } => {
                    node = if split.holds(row) { left } else { right };
                }
            }
        }
    }

    /// Bounds of every leaf, indexed by leaf id.
    pub fn all_leaf_bounds(&self, schema: &Schema) -> Result<Vec<Vec<FeatureBounds>>> {
        fn walk(
            node: &PartitionNode,
            path: &mut Vec<(SplitLiteral, bool)>,
            out: &mut Vec<Vec<(SplitLiteral, bool)>>,
        ) {
            match node {
                PartitionNode::Leaf(id) => out[*id] = path.clone(),
                PartitionNode::Split { split, left, right } => {
                    path.push((*split, true));
                    walk(left, path, out);
                    path.last_mut().unwrap().1 = false;
                    walk(right, path, out);
                    path.pop();
                }
            }
        }
        let mut paths = vec![Vec::new(); self.n_leaves];
        walk(&self.root, &mut Vec::new(), &mut paths);
        paths.iter().map(|p| bounds_from_path(p, schema)).collect()
    }
}
