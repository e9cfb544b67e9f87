//! Tree alternating optimisation.
//!
//! The tree structure is fixed. Each pass visits depth levels from the
//! deepest up to the root; nodes on one level see disjoint example sets,
//! so each can be re-fit exactly with everything else frozen. A node only
//! changes when its reduced problem strictly improves, which makes the
//! training cost non-increasing pass over pass.

use rand::Rng;

use super::cart::{training_cost, TrainSet};
use super::features::Scaling;
use super::loss::OrdinalLoss;
use super::tree::{ModelError, OrdinalTreeModel, TreeKind, TreeNode};
use super::LabeledExample;

#[derive(Debug, Clone)]
pub struct TaoResult {
    pub model: OrdinalTreeModel,
    /// Training cost before the first pass, then after each pass.
    pub pass_costs: Vec<f64>,
}

/// Refines `model` for `passes` passes under `loss`.
pub fn tao_refine(
    model: &OrdinalTreeModel,
    data: &[LabeledExample],
    loss: &OrdinalLoss,
    passes: usize,
) -> Result<TaoResult, ModelError> {
    model.validate()?;
    if data.is_empty() {
        return Err(ModelError::EmptyData);
    }
    let set = TrainSet::new(data, &model.scaling);
    let mut m = model.clone();
    let mut pass_costs = vec![training_cost(&m, &set, loss)];
    for _ in 0..passes {
        let depths = m.node_depths();
        let deepest = depths.iter().copied().max().unwrap_or(0);
        for level in (0..=deepest).rev() {
            for (node, idx) in reach_level(&m, &set, &depths, level) {
                refit_node(&mut m, node, &idx, &set, loss);
            }
        }
        pass_costs.push(training_cost(&m, &set, loss));
    }
    Ok(TaoResult { model: m, pass_costs })
}

/// Examples arriving at each node of depth `level`.
fn reach_level(m: &OrdinalTreeModel, set: &TrainSet, depths: &[usize], level: usize) -> Vec<(usize, Vec<usize>)> {
    let mut out: Vec<(usize, Vec<usize>)> =
        depths.iter().enumerate().filter(|(_, &d)| d == level).map(|(i, _)| (i, Vec::new())).collect();
    for (e, x) in set.x.iter().enumerate() {
        let mut node = 0;
        while depths[node] < level {
            match m.nodes[node].route(x) {
                Some(next) => node = next,
                None => break,
            }
        }
        if depths[node] == level {
            if let Some(slot) = out.iter_mut().find(|(n, _)| *n == node) {
                slot.1.push(e);
            }
        }
    }
    out
}

fn refit_node(m: &mut OrdinalTreeModel, node: usize, idx: &[usize], set: &TrainSet, loss: &OrdinalLoss) {
    if idx.is_empty() {
        return;
    }
    match m.nodes[node].clone() {
        TreeNode::Leaf { class } => {
            let mut counts = vec![0.0; loss.k()];
            for &i in idx {
                counts[set.y[i]] += 1.0;
            }
            let current: f64 = idx.iter().map(|&i| loss.cost(set.y[i], class)).sum();
            let (best, cost) = loss.best_class(&counts);
            if cost < current {
                m.nodes[node] = TreeNode::Leaf { class: best };
            }
        }
        split => {
            let (left, right) = split.children().expect("internal node");
            // Downstream cost of sending each example left or right.
            let cl: Vec<f64> = idx.iter().map(|&i| loss.cost(set.y[i], m.predict_from(left, &set.x[i]))).collect();
            let cr: Vec<f64> = idx.iter().map(|&i| loss.cost(set.y[i], m.predict_from(right, &set.x[i]))).collect();
            let xs: Vec<[f64; 3]> = idx.iter().map(|&i| set.x[i]).collect();
            let eval = |n: &TreeNode| -> f64 {
                xs.iter()
                    .zip(cl.iter().zip(&cr))
                    .map(|(x, (&l, &r))| if n.route(x) == Some(left) { l } else { r })
                    .sum()
            };
            let mut best_cost = eval(&split);
            let mut best = split.clone();
            let axis = best_axis_split(&xs, &cl, &cr, left, right);
            let mut candidates = Vec::new();
            match m.kind {
                TreeKind::AxisAligned => candidates.extend(axis),
                TreeKind::Oblique => {
                    let start = if let TreeNode::Oblique { w, b, .. } = split { Some((w, b)) } else { None };
                    let axis_plane = axis.map(|a| match a {
                        TreeNode::Axis { feature, threshold, .. } => {
                            let mut w = [0.0; 3];
                            w[feature] = 1.0;
                            (w, -threshold)
                        }
                        _ => unreachable!(),
                    });
                    let mut directions = Vec::new();
                    for (w, b) in start.into_iter().chain(axis_plane) {
                        candidates.push(TreeNode::Oblique { w, b, left, right });
                        let (w2, b2) = fit_hinge(&xs, &cl, &cr, w, b);
                        candidates.push(TreeNode::Oblique { w: w2, b: b2, left, right });
                        directions.push(w2);
                    }
                    directions.extend(plane_directions());
                    for w in directions {
                        if let Some(b) = best_bias(&xs, &cl, &cr, w) {
                            candidates.push(TreeNode::Oblique { w, b, left, right });
                        }
                    }
                }
            }
            for c in candidates {
                let cost = eval(&c);
                if cost < best_cost - 1e-9 {
                    best_cost = cost;
                    best = c;
                }
            }
            m.nodes[node] = best;
        }
    }
}

/// Exhaustive threshold scan minimising the downstream cost.
fn best_axis_split(xs: &[[f64; 3]], cl: &[f64], cr: &[f64], left: usize, right: usize) -> Option<TreeNode> {
    let n = xs.len();
    let total_right: f64 = cr.iter().sum();
    let mut best: Option<(f64, usize, f64)> = None;
    for f in 0..3 {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| xs[a][f].total_cmp(&xs[b][f]));
        // Everything to the right.
        let mut cost = total_right;
        let consider = |cost: f64, thr: f64, best: &mut Option<(f64, usize, f64)>| {
            if best.is_none_or(|(c, _, _)| cost < c) {
                *best = Some((cost, f, thr));
            }
        };
        consider(cost, xs[order[0]][f] - 1.0, &mut best);
        for w in 0..n {
            let i = order[w];
            cost += cl[i] - cr[i];
            let thr = if w + 1 < n {
                let (a, b) = (xs[i][f], xs[order[w + 1]][f]);
                if a == b {
                    continue;
                }
                0.5 * (a + b)
            } else {
                xs[i][f] + 1.0
            };
            consider(cost, thr, &mut best);
        }
    }
    best.map(|(_, feature, threshold)| TreeNode::Axis { feature, threshold, left, right })
}

/// Unit directions spread over each two-feature plane.
fn plane_directions() -> Vec<[f64; 3]> {
    const STEPS: usize = 24;
    let mut out = Vec::new();
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        for s in 0..STEPS {
            let a = std::f64::consts::PI * s as f64 / STEPS as f64;
            let mut w = [0.0; 3];
            w[i] = a.cos();
            w[j] = a.sin();
            out.push(w);
        }
    }
    out
}

/// Bias minimising the downstream cost for a fixed direction `w`.
fn best_bias(xs: &[[f64; 3]], cl: &[f64], cr: &[f64], w: [f64; 3]) -> Option<f64> {
    if w.iter().all(|&v| v == 0.0) || xs.is_empty() {
        return None;
    }
    let proj: Vec<f64> = xs.iter().map(|x| w[0] * x[0] + w[1] * x[1] + w[2] * x[2]).collect();
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| proj[a].total_cmp(&proj[b]));
    // Threshold below everything: all right.
    let mut cost: f64 = cr.iter().sum();
    let mut best = (cost, -(proj[order[0]] - 1.0));
    for k in 0..order.len() {
        let i = order[k];
        cost += cl[i] - cr[i];
        let b = match order.get(k + 1) {
            Some(&next) if proj[next] == proj[i] => continue,
            Some(&next) => -0.5 * (proj[i] + proj[next]),
            None => -(proj[i] + 1.0),
        };
        if cost < best.0 {
            best = (cost, b);
        }
    }
    Some(best.1)
}

/// Coordinate descent on a weighted hinge loss: examples that are cheaper
/// on the right get target +1, weighted by the cost difference.
fn fit_hinge(xs: &[[f64; 3]], cl: &[f64], cr: &[f64], w0: [f64; 3], b0: f64) -> ([f64; 3], f64) {
    let pts: Vec<([f64; 4], f64, f64)> = xs
        .iter()
        .zip(cl.iter().zip(cr))
        .filter(|(_, (l, r))| l != r)
        .map(|(x, (&l, &r))| ([x[0], x[1], x[2], 1.0], if r < l { 1.0 } else { -1.0 }, (l - r).abs()))
        .collect();
    let mut theta = [w0[0], w0[1], w0[2], b0];
    if pts.is_empty() {
        return (w0, b0);
    }
    let lambda = 1e-4 * pts.iter().map(|p| p.2).sum::<f64>();
    let mut margins: Vec<f64> = pts.iter().map(|(a, _, _)| dot4(a, &theta)).collect();
    for _sweep in 0..20 {
        for j in 0..4 {
            let old = theta[j];
            let u = minimise_coordinate(&pts, &margins, j, old, lambda);
            if u != old {
                for (m, (a, _, _)) in margins.iter_mut().zip(&pts) {
                    *m += a[j] * (u - old);
                }
                theta[j] = u;
            }
        }
    }
    ([theta[0], theta[1], theta[2]], theta[3])
}

fn dot4(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

/// Exact minimiser over `theta[j] = u` of
/// `lambda u^2 + sum_i v_i max(0, 1 - t_i (r_i + a_ij u))`.
fn minimise_coordinate(pts: &[([f64; 4], f64, f64)], margins: &[f64], j: usize, cur: f64, lambda: f64) -> f64 {
    // Each term is v max(0, c - d u) with c = 1 - t r, d = t a.
    let mut slope = 0.0;
    let mut breaks: Vec<(f64, f64)> = Vec::new();
    for ((a, t, v), m) in pts.iter().zip(margins) {
        let d = t * a[j];
        if d == 0.0 {
            continue;
        }
        let r = m - a[j] * cur;
        let c = 1.0 - t * r;
        if d > 0.0 {
            // Active for u < c/d; leaving raises the slope by v d.
            slope -= v * d;
        }
        breaks.push((c / d, v * d.abs()));
    }
    breaks.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut lo = f64::NEG_INFINITY;
    for &(p, delta) in &breaks {
        // Derivative on (lo, p) is 2 lambda u + slope.
        let u = -slope / (2.0 * lambda);
        if u > lo && u < p {
            return u;
        }
        if 2.0 * lambda * p + slope + delta >= 0.0 {
            return p;
        }
        slope += delta;
        lo = p;
    }
    -slope / (2.0 * lambda)
}

/// A complete oblique tree of the given depth with random hyperplanes and
/// leaf classes; a starting point for refinement tests.
pub fn random_oblique<R: Rng>(depth: usize, n_classes: usize, scaling: Scaling, rng: &mut R) -> OrdinalTreeModel {
    let mut nodes = Vec::new();
    fn build<R: Rng>(nodes: &mut Vec<TreeNode>, d: usize, k: usize, rng: &mut R) -> usize {
        let me = nodes.len();
        if d == 0 {
            nodes.push(TreeNode::Leaf { class: rng.gen_range(0..k) });
            return me;
        }
        nodes.push(TreeNode::Leaf { class: 0 });
        let w = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let b = rng.gen_range(-0.5..0.5);
        let left = build(nodes, d - 1, k, rng);
        let right = build(nodes, d - 1, k, rng);
        nodes[me] = TreeNode::Oblique { w, b, left, right };
        me
    }
    build(&mut nodes, depth, n_classes, rng);
    OrdinalTreeModel { kind: TreeKind::Oblique, nodes, max_depth: depth, n_classes, scaling }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coordinate_minimiser_matches_grid_search() {
        let pts =
            vec![([0.2, 0.0, 0.0, 1.0], 1.0, 2.0), ([0.8, 0.0, 0.0, 1.0], -1.0, 1.0), ([0.5, 0.0, 0.0, 1.0], 1.0, 0.5)];
        let theta = [0.3, 0.0, 0.0, -0.1];
        let margins: Vec<f64> = pts.iter().map(|(a, _, _)| dot4(a, &theta)).collect();
        let lambda = 0.05;
        let obj = |u: f64| {
            let mut th = theta;
            th[0] = u;
            lambda * u * u + pts.iter().map(|(a, t, v)| v * (1.0 - t * dot4(a, &th)).max(0.0)).sum::<f64>()
        };
        let u = minimise_coordinate(&pts, &margins, 0, theta[0], lambda);
        let grid_best = (-4000..4000).map(|i| obj(i as f64 / 100.0)).fold(f64::INFINITY, f64::min);
        assert!(obj(u) <= grid_best + 1e-9, "{} vs {}", obj(u), grid_best);
    }
}
