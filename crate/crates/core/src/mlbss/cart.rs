//! Greedy top-down tree growth under a cost-weighted impurity.

use super::features::Scaling;
use super::loss::OrdinalLoss;
use super::tree::{ModelError, OrdinalTreeModel, TreeKind, TreeNode};
use super::LabeledExample;

/// Scaled design matrix plus labels.
#[derive(Debug, Clone)]
pub struct TrainSet {
    pub x: Vec<[f64; 3]>,
    pub y: Vec<usize>,
}

impl TrainSet {
    pub fn new(data: &[LabeledExample], scaling: &Scaling) -> Self {
        TrainSet {
            x: data.iter().map(|e| scaling.apply(&e.features)).collect(),
            y: data.iter().map(|e| e.label).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Total cost of `model` on `set`.
pub fn training_cost(model: &OrdinalTreeModel, set: &TrainSet, loss: &OrdinalLoss) -> f64 {
    set.x.iter().zip(&set.y).map(|(x, &y)| loss.cost(y, model.predict_scaled(x))).sum()
}

fn counts(set: &TrainSet, idx: &[usize], k: usize) -> Vec<f64> {
    let mut c = vec![0.0; k];
    for &i in idx {
        c[set.y[i]] += 1.0;
    }
    c
}

/// `n * sum_ab p_a p_b C(a, b)`: Gini impurity with a cost matrix.
fn impurity(c: &[f64], loss: &OrdinalLoss) -> f64 {
    let n: f64 = c.iter().sum();
    if n == 0.0 {
        return 0.0;
    }
    let mut s = 0.0;
    for a in 0..c.len() {
        for b in 0..c.len() {
            s += c[a] * c[b] * loss.cost(a, b);
        }
    }
    s / n
}

struct Grower<'a> {
    set: &'a TrainSet,
    split_loss: &'a OrdinalLoss,
    leaf_loss: &'a OrdinalLoss,
    max_depth: usize,
    nodes: Vec<TreeNode>,
}

impl Grower<'_> {
    fn leaf(&mut self, idx: &[usize]) -> usize {
        let c = counts(self.set, idx, self.leaf_loss.k());
        let class = self.leaf_loss.best_class(&c).0;
        self.nodes.push(TreeNode::Leaf { class });
        self.nodes.len() - 1
    }

    fn best_split(&self, idx: &[usize]) -> Option<(usize, f64)> {
        let k = self.split_loss.k();
        let parent = impurity(&counts(self.set, idx, k), self.split_loss);
        let mut best: Option<(usize, f64, f64)> = None;
        for f in 0..3 {
            let mut order = idx.to_vec();
            order.sort_by(|&a, &b| self.set.x[a][f].total_cmp(&self.set.x[b][f]));
            let mut left = vec![0.0; k];
            let mut right = counts(self.set, idx, k);
            for w in 0..order.len() - 1 {
                let y = self.set.y[order[w]];
                left[y] += 1.0;
                right[y] -= 1.0;
                let (a, b) = (self.set.x[order[w]][f], self.set.x[order[w + 1]][f]);
                if a == b {
                    continue;
                }
                let score = impurity(&left, self.split_loss) + impurity(&right, self.split_loss);
                if score < parent - 1e-12 && best.is_none_or(|(_, _, s)| score < s) {
                    best = Some((f, 0.5 * (a + b), score));
                }
            }
        }
        best.map(|(f, t, _)| (f, t))
    }

    fn grow(&mut self, idx: &[usize], depth: usize) -> usize {
        let pure = idx.iter().all(|&i| self.set.y[i] == self.set.y[idx[0]]);
        if depth >= self.max_depth || idx.len() < 2 || pure {
            return self.leaf(idx);
        }
        let Some((feature, threshold)) = self.best_split(idx) else {
            return self.leaf(idx);
        };
        let me = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { class: 0 });
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.set.x[i][feature] < threshold);
        let left = self.grow(&l, depth + 1);
        let right = self.grow(&r, depth + 1);
        self.nodes[me] = TreeNode::Axis { feature, threshold, left, right };
        me
    }
}

fn grow_tree(
    set: &TrainSet,
    split_loss: &OrdinalLoss,
    leaf_loss: &OrdinalLoss,
    max_depth: usize,
    scaling: Scaling,
) -> OrdinalTreeModel {
    let mut g = Grower { set, split_loss, leaf_loss, max_depth, nodes: Vec::new() };
    let all: Vec<usize> = (0..set.len()).collect();
    g.grow(&all, 0);
    OrdinalTreeModel { kind: TreeKind::AxisAligned, nodes: g.nodes, max_depth, n_classes: leaf_loss.k(), scaling }
}

/// Greedy CART under `loss`.
///
/// Two structures are grown, one with the cost-weighted impurity and one
/// with plain Gini; both get cost-minimising leaf labels and the cheaper
/// one on the training data is returned.
pub fn train_cart(
    data: &[LabeledExample],
    loss: &OrdinalLoss,
    max_depth: usize,
    scaling: Scaling,
) -> Result<OrdinalTreeModel, ModelError> {
    if data.is_empty() {
        return Err(ModelError::EmptyData);
    }
    let set = TrainSet::new(data, &scaling);
    let zero_one = OrdinalLoss::zero_one(loss.k());
    let a = grow_tree(&set, loss, loss, max_depth, scaling);
    let b = grow_tree(&set, &zero_one, loss, max_depth, scaling);
    Ok(if training_cost(&b, &set, loss) < training_cost(&a, &set, loss) { b } else { a })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlbss::FeatureVector;

    fn ex(rank: u32, pdr: f64, rnp: f64, label: usize) -> LabeledExample {
        LabeledExample { features: FeatureVector::new(rank, pdr, rnp), label }
    }

    #[test]
    fn separable_toy_set_fits_exactly() {
        let data: Vec<_> = (0..20).map(|i| ex(2, i as f64 / 20.0, 1.5, usize::from(i >= 10) * 2)).collect();
        let loss = OrdinalLoss::from_sizes(&[16, 32, 64]);
        let m = train_cart(&data, &loss, 4, Scaling::identity()).unwrap();
        let set = TrainSet::new(&data, &Scaling::identity());
        assert_eq!(training_cost(&m, &set, &loss), 0.0);
        assert_eq!(m.nodes.len(), 3);
    }

    #[test]
    fn single_example_gives_depth_zero_tree() {
        let m = train_cart(&[ex(1, 0.5, 2.0, 1)], &OrdinalLoss::zero_one(3), 4, Scaling::identity()).unwrap();
        assert_eq!(m.nodes, vec![TreeNode::Leaf { class: 1 }]);
        assert_eq!(m.depth(), 0);
    }

    #[test]
    fn pure_data_stops_at_root() {
        let data: Vec<_> = (0..12).map(|i| ex(1 + i % 3, i as f64 / 12.0, 2.0, 2)).collect();
        let m = train_cart(&data, &OrdinalLoss::zero_one(3), 4, Scaling::identity()).unwrap();
        assert_eq!(m.nodes.len(), 1);
    }

    #[test]
    fn empty_data_rejected() {
        assert_eq!(train_cart(&[], &OrdinalLoss::zero_one(3), 4, Scaling::identity()), Err(ModelError::EmptyData));
    }
}
