use crate::rateless::BlockSizeMenu;

/// Misclassification cost matrix over ordered block-size classes.
#[derive(Debug, Clone, PartialEq)]
pub struct OrdinalLoss {
    matrix: Vec<Vec<f64>>,
}

impl OrdinalLoss {
    /// `cost(a, b) = |B_a - B_b|` in bytes.
    pub fn from_menu(menu: &BlockSizeMenu) -> Self {
        Self::from_sizes(menu.sizes())
    }

    pub fn from_sizes(sizes: &[usize]) -> Self {
        let matrix = sizes.iter().map(|&a| sizes.iter().map(|&b| (a as f64 - b as f64).abs()).collect()).collect();
        OrdinalLoss { matrix }
    }

    /// Plain 0/1 loss over `k` classes.
    pub fn zero_one(k: usize) -> Self {
        let matrix = (0..k).map(|a| (0..k).map(|b| if a == b { 0.0 } else { 1.0 }).collect()).collect();
        OrdinalLoss { matrix }
    }

    pub fn k(&self) -> usize {
        self.matrix.len()
    }

    /// Cost of predicting `pred` when the truth is `truth`.
    pub fn cost(&self, truth: usize, pred: usize) -> f64 {
        self.matrix[truth][pred]
    }

    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.matrix
    }

    /// Class minimising total cost for the given per-class counts; ties go
    /// to the smaller class.
    pub fn best_class(&self, counts: &[f64]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for pred in 0..self.k() {
            let c: f64 = counts.iter().enumerate().map(|(t, &n)| n * self.cost(t, pred)).sum();
            if c < best.1 {
                best = (pred, c);
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_properties() {
        let l = OrdinalLoss::from_sizes(&[16, 32, 64]);
        for a in 0..3 {
            assert_eq!(l.cost(a, a), 0.0);
            for b in 0..3 {
                assert_eq!(l.cost(a, b), l.cost(b, a));
            }
        }
        assert!(l.cost(0, 1) < l.cost(0, 2));
        assert!(l.cost(2, 1) < l.cost(2, 0));
        assert_eq!(l.cost(0, 2), 48.0);
    }

    #[test]
    fn best_class_prefers_median_under_distance_cost() {
        let l = OrdinalLoss::from_sizes(&[16, 32, 64]);
        assert_eq!(l.best_class(&[1.0, 1.0, 1.0]).0, 1);
        assert_eq!(l.best_class(&[1.0, 0.0, 1.0]).0, 0);
    }
}
