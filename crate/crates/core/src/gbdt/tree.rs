use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textfeat::SparseVector;

/// One node of a regression tree stored in pre-order.
///
/// The left child of a split at position `i` is always `i + 1`; `right` holds
/// the position of the right child. Routing goes left iff the feature value is
/// `<= threshold`, absent sparse features reading as 0.0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeNode {
    Split {
        feature: u32,
        threshold: f64,
        right: u32,
    },
    Leaf(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<TreeNode>", into = "Vec<TreeNode>")]
pub struct Tree {
    nodes: Vec<TreeNode>,
}

impl TryFrom<Vec<TreeNode>> for Tree {
    type Error = Error;

    fn try_from(nodes: Vec<TreeNode>) -> Result<Self> {
        Tree::from_nodes(nodes)
    }
}

impl From<Tree> for Vec<TreeNode> {
    fn from(t: Tree) -> Self {
        t.nodes
    }
}

impl Tree {
    pub fn leaf(value: f64) -> Self {
        Self {
            nodes: vec![TreeNode::Leaf(value)],
        }
    }

    /// A depth-one tree: `left` when `x[feature] <= threshold`, else `right`.
    pub fn stump(feature: u32, threshold: f64, left: f64, right: f64) -> Self {
        Self {
            nodes: vec![
                TreeNode::Split {
                    feature,
                    threshold,
                    right: 2,
                },
                TreeNode::Leaf(left),
                TreeNode::Leaf(right),
            ],
        }
    }

    /// Validates a pre-order node list.
    pub fn from_nodes(nodes: Vec<TreeNode>) -> Result<Self> {
        fn walk(nodes: &[TreeNode], at: usize) -> Result<usize> {
            match nodes.get(at) {
                None => Err(Error::Model(format!("tree node {at} out of range"))),
                Some(TreeNode::Leaf(v)) => {
                    if v.is_finite() {
                        Ok(at + 1)
                    } else {
                        Err(Error::Model(format!("non-finite leaf at node {at}")))
                    }
                }
                Some(TreeNode::Split {
                    threshold, right, ..
                }) => {
                    if !threshold.is_finite() {
                        return Err(Error::Model(format!("non-finite threshold at node {at}")));
                    }
                    let end_left = walk(nodes, at + 1)?;
                    if *right as usize != end_left {
                        return Err(Error::Model(format!(
                            "node {at}: right child {right} does not follow left subtree ending at {end_left}"
                        )));
                    }
                    walk(nodes, end_left)
                }
            }
        }
        if walk(&nodes, 0)? != nodes.len() {
            return Err(Error::Model("trailing tree nodes after pre-order walk".into()));
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn eval(&self, x: &SparseVector) -> f64 {
        let mut at = 0usize;
        loop {
            match self.nodes[at] {
                TreeNode::Leaf(v) => return v,
                TreeNode::Split {
                    feature,
                    threshold,
                    right,
                } => {
                    at = if x.get(feature) <= threshold {
                        at + 1
                    } else {
                        right as usize
                    };
                }
            }
        }
    }
}

/// Tree under construction, nodes in creation (breadth-first) order.
#[derive(Debug, Clone, Copy)]
pub(crate) enum BuildNode {
    Split {
        feature: u32,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf(f64),
}

/// Renumbers an arena rooted at 0 into pre-order.
pub(crate) fn to_preorder(arena: &[BuildNode]) -> Tree {
    fn emit(arena: &[BuildNode], at: usize, out: &mut Vec<TreeNode>) {
        match arena[at] {
            BuildNode::Leaf(v) => out.push(TreeNode::Leaf(v)),
            BuildNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                let pos = out.len();
                out.push(TreeNode::Split {
                    feature,
                    threshold,
                    right: 0,
                });
                emit(arena, left, out);
                let right_pos = out.len() as u32;
                if let TreeNode::Split { right: r, .. } = &mut out[pos] {
                    *r = right_pos;
                }
                emit(arena, right, out);
            }
        }
    }
    let mut nodes = Vec::with_capacity(arena.len());
    emit(arena, 0, &mut nodes);
    Tree { nodes }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stump_routes_on_threshold() {
        let t = Tree::stump(3, 0.5, -1.0, 2.0);
        assert_eq!(t.eval(&SparseVector::default()), -1.0);
        assert_eq!(t.eval(&SparseVector::from_pairs([(3, 0.5)])), -1.0);
        assert_eq!(t.eval(&SparseVector::from_pairs([(3, 0.7)])), 2.0);
    }

    #[test]
    fn preorder_renumbering() {
        // root splits on f0; its right child splits on f1
        let arena = [
            BuildNode::Split { feature: 0, threshold: 0.0, left: 1, right: 2 },
            BuildNode::Leaf(1.0),
            BuildNode::Split { feature: 1, threshold: 0.3, left: 3, right: 4 },
            BuildNode::Leaf(2.0),
            BuildNode::Leaf(3.0),
        ];
        let t = to_preorder(&arena);
        assert_eq!(Tree::from_nodes(t.nodes().to_vec()).unwrap(), t);
        assert_eq!(t.eval(&SparseVector::default()), 1.0);
        assert_eq!(t.eval(&SparseVector::from_pairs([(0, 1.0)])), 2.0);
        assert_eq!(t.eval(&SparseVector::from_pairs([(0, 1.0), (1, 0.9)])), 3.0);
    }

    #[test]
    fn malformed_trees_rejected() {
        let bad = vec![
            TreeNode::Split { feature: 0, threshold: 0.0, right: 3 },
            TreeNode::Leaf(0.0),
            TreeNode::Leaf(1.0),
        ];
        assert!(Tree::from_nodes(bad).is_err());
        assert!(Tree::from_nodes(vec![TreeNode::Leaf(0.0), TreeNode::Leaf(1.0)]).is_err());
        assert!(Tree::from_nodes(vec![]).is_err());
        assert!(Tree::from_nodes(vec![TreeNode::Leaf(f64::NAN)]).is_err());
    }
}
