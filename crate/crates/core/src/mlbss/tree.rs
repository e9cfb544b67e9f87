use thiserror::Error;

use super::features::{FeatureVector, Scaling};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("training needs at least one example")]
    EmptyData,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TreeKind {
    AxisAligned,
    Oblique,
}

impl TreeKind {
    pub fn name(self) -> &'static str {
        match self {
            TreeKind::AxisAligned => "axis",
            TreeKind::Oblique => "oblique",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Leaf {
        class: usize,
    },
    /// `x[feature] < threshold` goes left.
    Axis {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    /// `w . x + b >= 0` goes right.
    Oblique {
        w: [f64; 3],
        b: f64,
        left: usize,
        right: usize,
    },
}

impl TreeNode {
    pub fn children(&self) -> Option<(usize, usize)> {
        match *self {
            TreeNode::Leaf { .. } => None,
            TreeNode::Axis { left, right, .. } | TreeNode::Oblique { left, right, .. } => Some((left, right)),
        }
    }

    /// Which child `x` is routed to; `None` at a leaf.
    pub fn route(&self, x: &[f64; 3]) -> Option<usize> {
        match *self {
            TreeNode::Leaf { .. } => None,
            TreeNode::Axis { feature, threshold, left, right } => {
                Some(if x[feature] < threshold { left } else { right })
            }
            TreeNode::Oblique { w, b, left, right } => {
                let s = w[0] * x[0] + w[1] * x[1] + w[2] * x[2] + b;
                Some(if s >= 0.0 { right } else { left })
            }
        }
    }
}

/// Decision tree over scaled `(rank, pdr, rnp)` predicting a block-size
/// class. Node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct OrdinalTreeModel {
    pub kind: TreeKind,
    pub nodes: Vec<TreeNode>,
    pub max_depth: usize,
    pub n_classes: usize,
    pub scaling: Scaling,
}

impl OrdinalTreeModel {
    /// A single-leaf model.
    pub fn constant(class: usize, n_classes: usize) -> Self {
        OrdinalTreeModel {
            kind: TreeKind::AxisAligned,
            nodes: vec![TreeNode::Leaf { class }],
            max_depth: 0,
            n_classes,
            scaling: Scaling::identity(),
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::Invalid(m));
        if self.nodes.is_empty() {
            return bad("tree has no nodes".into());
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![(0usize, 0usize)];
        while let Some((i, depth)) = stack.pop() {
            if i >= self.nodes.len() {
                return bad(format!("child index {i} out of range"));
            }
            if std::mem::replace(&mut seen[i], true) {
                return bad(format!("node {i} reachable twice"));
            }
            if depth > self.max_depth {
                return bad(format!("path depth {depth} exceeds max depth {}", self.max_depth));
            }
            match &self.nodes[i] {
                TreeNode::Leaf { class } if *class >= self.n_classes => {
                    return bad(format!("leaf class {class} out of range"));
                }
                TreeNode::Leaf { .. } => {}
                TreeNode::Axis { feature, threshold, left, right } => {
                    if self.kind != TreeKind::AxisAligned {
                        return bad("axis split in an oblique tree".into());
                    }
                    if *feature >= 3 || threshold.is_nan() {
                        return bad(format!("bad axis split at node {i}"));
                    }
                    stack.push((*left, depth + 1));
                    stack.push((*right, depth + 1));
                }
                TreeNode::Oblique { w, b, left, right } => {
                    if self.kind != TreeKind::Oblique {
                        return bad("oblique split in an axis-aligned tree".into());
                    }
                    if w.iter().chain([b]).any(|v| !v.is_finite()) {
                        return bad(format!("non-finite hyperplane at node {i}"));
                    }
                    stack.push((*left, depth + 1));
                    stack.push((*right, depth + 1));
                }
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return bad(format!("node {i} unreachable"));
        }
        Ok(())
    }

    pub fn predict(&self, f: &FeatureVector) -> usize {
        self.predict_scaled(&self.scaling.apply(f))
    }

    pub fn predict_scaled(&self, x: &[f64; 3]) -> usize {
        self.predict_from(0, x)
    }

    /// Prediction of the subtree rooted at `node`.
    pub fn predict_from(&self, mut node: usize, x: &[f64; 3]) -> usize {
        loop {
            match self.nodes[node].route(x) {
                Some(next) => node = next,
                None => {
                    let TreeNode::Leaf { class } = self.nodes[node] else { unreachable!() };
                    return class;
                }
            }
        }
    }

    /// Depth of every node (root 0).
    pub fn node_depths(&self) -> Vec<usize> {
        let mut d = vec![0; self.nodes.len()];
        let mut stack = vec![0];
        while let Some(i) = stack.pop() {
            if let Some((l, r)) = self.nodes[i].children() {
                d[l] = d[i] + 1;
                d[r] = d[i] + 1;
                stack.push(l);
                stack.push(r);
            }
        }
        d
    }

    /// Longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        self.node_depths().into_iter().max().unwrap_or(0)
    }

    /// Re-expresses axis splits as hyperplanes with identical routing.
    pub fn to_oblique(&self) -> OrdinalTreeModel {
        let nodes = self
            .nodes
            .iter()
            .map(|n| match *n {
                TreeNode::Axis { feature, threshold, left, right } => {
                    let mut w = [0.0; 3];
                    w[feature] = 1.0;
                    TreeNode::Oblique { w, b: -threshold, left, right }
                }
                ref other => other.clone(),
            })
            .collect();
        OrdinalTreeModel { kind: TreeKind::Oblique, nodes, ..self.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_model() {
        let m = OrdinalTreeModel::constant(1, 3);
        for r in 1..5 {
            assert_eq!(m.predict(&FeatureVector::new(r, 0.1 * r as f64, 2.0)), 1);
        }
    }

    #[test]
    fn single_axis_split() {
        let m = OrdinalTreeModel {
            kind: TreeKind::AxisAligned,
            nodes: vec![
                TreeNode::Axis { feature: 1, threshold: 0.5, left: 1, right: 2 },
                TreeNode::Leaf { class: 0 },
                TreeNode::Leaf { class: 2 },
            ],
            max_depth: 1,
            n_classes: 3,
            scaling: Scaling::identity(),
        };
        m.validate().unwrap();
        assert_eq!(m.predict(&FeatureVector::new(3, 0.4, 2.0)), 0);
        assert_eq!(m.predict(&FeatureVector::new(3, 0.5, 2.0)), 2);
    }

    #[test]
    fn oblique_boundary_goes_right() {
        let m = OrdinalTreeModel {
            kind: TreeKind::Oblique,
            nodes: vec![
                TreeNode::Oblique { w: [0.0, 1.0, -0.25], b: 0.0, left: 1, right: 2 },
                TreeNode::Leaf { class: 0 },
                TreeNode::Leaf { class: 1 },
            ],
            max_depth: 1,
            n_classes: 2,
            scaling: Scaling::identity(),
        };
        assert_eq!(m.predict(&FeatureVector::new(2, 0.5, 2.0)), 1);
        assert_eq!(m.predict(&FeatureVector::new(2, 0.49, 2.0)), 0);
    }

    #[test]
    fn validation_catches_structure_errors() {
        let mut m = OrdinalTreeModel::constant(0, 3);
        m.nodes.clear();
        assert!(m.validate().is_err());
        let m = OrdinalTreeModel {
            nodes: vec![TreeNode::Axis { feature: 0, threshold: 0.0, left: 0, right: 0 }],
            ..OrdinalTreeModel::constant(0, 3)
        };
        assert!(m.validate().is_err());
        assert!(OrdinalTreeModel::constant(5, 3).validate().is_err());
    }
}
