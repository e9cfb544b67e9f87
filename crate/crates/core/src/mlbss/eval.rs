use rand::seq::SliceRandom;
use rand::SeedableRng;

use super::loss::OrdinalLoss;
use super::tree::{ModelError, OrdinalTreeModel};
use super::LabeledExample;
use crate::rng::{derive_seed, SimRng};

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub mean_cost: f64,
    /// `confusion[truth][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

pub fn evaluate(
    model: &OrdinalTreeModel,
    held_out: &[LabeledExample],
    loss: &OrdinalLoss,
) -> Result<Evaluation, ModelError> {
    if held_out.is_empty() {
        return Err(ModelError::EmptyData);
    }
    let k = loss.k();
    let mut confusion = vec![vec![0; k]; k];
    let mut hits = 0;
    let mut cost = 0.0;
    for e in held_out {
        let p = model.predict(&e.features);
        confusion[e.label][p] += 1;
        hits += usize::from(p == e.label);
        cost += loss.cost(e.label, p);
    }
    let n = held_out.len() as f64;
    Ok(Evaluation { accuracy: hits as f64 / n, mean_cost: cost / n, confusion })
}

/// Shuffled fold assignment: `folds` disjoint index sets covering `0..n`.
pub fn k_fold_indices(n: usize, folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let folds = folds.clamp(1, n.max(1));
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut SimRng::seed_from_u64(derive_seed(seed, &[0x4b_464f_4c44])));
    let mut out = vec![Vec::new(); folds];
    for (j, i) in idx.into_iter().enumerate() {
        out[j % folds].push(i);
    }
    out
}

#[derive(Debug, Clone)]
pub struct CvSummary {
    pub folds: Vec<Evaluation>,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub cost_mean: f64,
    pub cost_std: f64,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 { v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (m, var.sqrt())
}

/// K-fold cross-validation of `train` on `data`.
pub fn cross_validate<F>(
    data: &[LabeledExample],
    folds: usize,
    seed: u64,
    loss: &OrdinalLoss,
    mut train: F,
) -> Result<CvSummary, ModelError>
where
    F: FnMut(&[LabeledExample]) -> Result<OrdinalTreeModel, ModelError>,
{
    if data.len() < 2 {
        return Err(ModelError::EmptyData);
    }
    let parts = k_fold_indices(data.len(), folds.max(2), seed);
    let mut evals = Vec::new();
    for (f, test_idx) in parts.iter().enumerate() {
        let train_set: Vec<LabeledExample> =
            parts.iter().enumerate().filter(|(g, _)| *g != f).flat_map(|(_, p)| p.iter().map(|&i| data[i])).collect();
        let test: Vec<LabeledExample> = test_idx.iter().map(|&i| data[i]).collect();
        let model = train(&train_set)?;
        evals.push(evaluate(&model, &test, loss)?);
    }
    let (accuracy_mean, accuracy_std) = mean_std(&evals.iter().map(|e| e.accuracy).collect::<Vec<_>>());
    let (cost_mean, cost_std) = mean_std(&evals.iter().map(|e| e.mean_cost).collect::<Vec<_>>());
    Ok(CvSummary { folds: evals, accuracy_mean, accuracy_std, cost_mean, cost_std })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlbss::FeatureVector;

    #[test]
    fn constant_zero_on_balanced_three_classes() {
        let loss = OrdinalLoss::from_sizes(&[16, 32, 64]);
        let data: Vec<_> =
            (0..30).map(|i| LabeledExample { features: FeatureVector::new(1, 0.5, 1.0), label: i % 3 }).collect();
        let e = evaluate(&OrdinalTreeModel::constant(0, 3), &data, &loss).unwrap();
        assert!((e.accuracy - 1.0 / 3.0).abs() < 1e-12);
        assert!((e.mean_cost - (0.0 + 16.0 + 48.0) / 3.0).abs() < 1e-12);
        assert_eq!(e.confusion[1][0], 10);
    }

    #[test]
    fn folds_partition_the_data() {
        let f = k_fold_indices(23, 5, 3);
        let mut all: Vec<usize> = f.concat();
        all.sort();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        assert!(f.iter().all(|p| p.len() == 4 || p.len() == 5));
    }
}
