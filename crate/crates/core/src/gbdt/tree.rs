use super::split::{node_totals, scan_feature, BestSplit};
use super::{DenseMatrix, TrainParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// Binary regression tree stored in preorder; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

impl RegressionTree {
    /// Builds from preorder nodes, checking child links and leaf values.
    pub fn from_nodes(nodes: Vec<Node>) -> Option<Self> {
        if nodes.is_empty() {
            return None;
        }
        let tree = Self { nodes };
        let mut next = 0;
        tree.check_preorder(0, &mut next)?;
        (next == tree.nodes.len()).then_some(tree)
    }

    fn check_preorder(&self, idx: usize, next: &mut usize) -> Option<()> {
        if idx != *next {
            return None;
        }
        *next += 1;
        match *self.nodes.get(idx)? {
            Node::Leaf { value } => value.is_finite().then_some(()),
            Node::Split {
                threshold,
                left,
                right,
                ..
            } => {
                if threshold.is_nan() {
                    return None;
                }
                self.check_preorder(left, next)?;
                self.check_preorder(right, next)
            }
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn leaf(value: f64) -> Self {
        Self {
            nodes: vec![Node::Leaf { value }],
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut idx = 0;
        loop {
            match self.nodes[idx] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => idx = if x[feature] < threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], idx: usize) -> usize {
            match nodes[idx] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }

    pub fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .max()
    }
}

/// Depth-first exact greedy builder over per-feature presorted row lists.
pub(crate) struct TreeBuilder<'a> {
    pub matrix: &'a DenseMatrix,
    pub grads: &'a [f64],
    pub hess: &'a [f64],
    pub params: &'a TrainParams,
    /// Candidate features, ascending.
    pub features: &'a [usize],
    goes_left: Vec<bool>,
    nodes: Vec<Node>,
}

impl<'a> TreeBuilder<'a> {
    pub fn new(
        matrix: &'a DenseMatrix,
        grads: &'a [f64],
        hess: &'a [f64],
        params: &'a TrainParams,
        features: &'a [usize],
    ) -> Self {
        Self {
            matrix,
            grads,
            hess,
            params,
            features,
            goes_left: vec![false; matrix.n_rows()],
            nodes: Vec::new(),
        }
    }

    /// `sorted[k]` lists the node rows in ascending `(value, row)` order of
    /// `features[k]`; `rows` lists the same rows ascending.
    pub fn build(mut self, rows: Vec<usize>, sorted: Vec<Vec<usize>>) -> RegressionTree {
        self.grow(rows, sorted, 0);
        RegressionTree { nodes: self.nodes }
    }

    fn grow(&mut self, rows: Vec<usize>, sorted: Vec<Vec<usize>>, depth: usize) -> usize {
        let idx = self.nodes.len();
        let (g, h) = node_totals(&rows, self.grads, self.hess);
        let leaf = Node::Leaf {
            value: -g / (h + self.params.lambda),
        };
        self.nodes.push(leaf);
        if depth >= self.params.max_depth || rows.len() < 2 {
            return idx;
        }

        let mut best = BestSplit::default();
        for (k, &f) in self.features.iter().enumerate() {
            scan_feature(
                self.matrix,
                f,
                &sorted[k],
                self.grads,
                self.hess,
                g,
                h,
                self.params,
                &mut best,
            );
        }
        let Some(split) = best.into_inner() else {
            return idx;
        };

        for &r in &rows {
            self.goes_left[r] = self.matrix.get(r, split.feature) < split.threshold;
        }
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&r| self.goes_left[r]);
        let mut left_sorted = Vec::with_capacity(sorted.len());
        let mut right_sorted = Vec::with_capacity(sorted.len());
        for list in sorted {
            let (l, r): (Vec<usize>, Vec<usize>) = list.iter().partition(|&&r| self.goes_left[r]);
            left_sorted.push(l);
            right_sorted.push(r);
        }
        drop(rows);

        let left = self.grow(left_rows, left_sorted, depth + 1);
        let right = self.grow(right_rows, right_sorted, depth + 1);
        self.nodes[idx] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        idx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stump() -> RegressionTree {
        RegressionTree::from_nodes(vec![
            Node::Split {
                feature: 1,
                threshold: 0.5,
                left: 1,
                right: 2,
            },
            Node::Leaf { value: -1.0 },
            Node::Leaf { value: 2.0 },
        ])
        .unwrap()
    }

    #[test]
    fn walk_uses_strict_less_than() {
        let t = stump();
        assert_eq!(t.predict(&[9.0, 0.4]), -1.0);
        assert_eq!(t.predict(&[9.0, 0.5]), 2.0);
        assert_eq!(t.depth(), 1);
        assert_eq!(t.max_feature(), Some(1));
    }

    #[test]
    fn rejects_non_preorder_layout() {
        let nodes = vec![
            Node::Split {
                feature: 0,
                threshold: 0.0,
                left: 2,
                right: 1,
            },
            Node::Leaf { value: 0.0 },
            Node::Leaf { value: 1.0 },
        ];
        assert!(RegressionTree::from_nodes(nodes).is_none());
        assert!(RegressionTree::from_nodes(vec![Node::Leaf { value: f64::NAN }]).is_none());
        assert!(RegressionTree::from_nodes(vec![]).is_none());
    }
}
