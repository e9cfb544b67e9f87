//! Block-size selection with cost-sensitive ordinal decision trees.
//!
//! Features are `(rank, pdr, rnp)` of a sender; labels index the block-size
//! menu; misprediction cost is the byte distance between block sizes.
//! Training starts from greedy CART and optionally refines the tree with
//! alternating optimisation, keeping axis-aligned splits or switching to
//! hyperplanes.

mod cart;
mod dataset;
mod eval;
mod export;
mod features;
mod loss;
mod tao;
mod tree;

use std::io::{BufRead, Write};
use std::str::FromStr;

pub use cart::{train_cart, training_cost, TrainSet};
pub use dataset::{generate_dataset, label_from_goodputs, ScenarioResult, SweepConfig};
pub use eval::{cross_validate, evaluate, k_fold_indices, CvSummary, Evaluation};
pub use export::{export_model, footprint_bytes, import_model, ExportReport};
pub use features::{Affine, FeatureVector, Scaling, FEATURE_NAMES};
pub use loss::OrdinalLoss;
pub use tao::{random_oblique, tao_refine, TaoResult};
pub use tree::{ModelError, OrdinalTreeModel, TreeKind, TreeNode};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledExample {
    pub features: FeatureVector,
    /// Index into the block-size menu.
    pub label: usize,
}

pub const DEFAULT_MAX_DEPTH: usize = 4;
pub const DEFAULT_PASSES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainKind {
    Cart,
    TaoCart,
    TaoOblique,
}

impl TrainKind {
    pub const ALL: [TrainKind; 3] = [TrainKind::Cart, TrainKind::TaoCart, TrainKind::TaoOblique];

    pub fn name(self) -> &'static str {
        match self {
            TrainKind::Cart => "cart",
            TrainKind::TaoCart => "tao-cart",
            TrainKind::TaoOblique => "tao-oblique",
        }
    }
}

impl FromStr for TrainKind {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, ModelError> {
        TrainKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            ModelError::Invalid(format!("unknown tree kind `{s}` (expected cart, tao-cart or tao-oblique)"))
        })
    }
}

/// A trained model and, for refined trees, the per-pass training cost.
#[derive(Debug, Clone)]
pub struct Trained {
    pub model: OrdinalTreeModel,
    pub pass_costs: Vec<f64>,
}

/// CART, optionally followed by axis-aligned or oblique refinement.
pub fn train(
    kind: TrainKind,
    data: &[LabeledExample],
    loss: &OrdinalLoss,
    max_depth: usize,
    passes: usize,
    scaling: Scaling,
) -> Result<Trained, ModelError> {
    let cart = train_cart(data, loss, max_depth, scaling)?;
    match kind {
        TrainKind::Cart => {
            let c = training_cost(&cart, &TrainSet::new(data, &scaling), loss);
            Ok(Trained { model: cart, pass_costs: vec![c] })
        }
        TrainKind::TaoCart => {
            let r = tao_refine(&cart, data, loss, passes)?;
            Ok(Trained { model: r.model, pass_costs: r.pass_costs })
        }
        TrainKind::TaoOblique => {
            let r = tao_refine(&cart.to_oblique(), data, loss, passes)?;
            Ok(Trained { model: r.model, pass_costs: r.pass_costs })
        }
    }
}

/// Largest rank in a dataset (at least 1).
pub fn max_rank(data: &[LabeledExample]) -> u32 {
    data.iter().map(|e| e.features.rank).max().unwrap_or(1).max(1)
}

/// Writes `rank,pdr,rnp,label` lines under a header.
pub fn write_dataset<W: Write>(mut w: W, data: &[LabeledExample]) -> std::io::Result<()> {
    writeln!(w, "rank,pdr,rnp,label")?;
    for e in data {
        writeln!(w, "{},{:?},{:?},{}", e.features.rank, e.features.pdr, e.features.rnp, e.label)?;
    }
    Ok(())
}

pub fn read_dataset<R: BufRead>(r: R) -> Result<Vec<LabeledExample>, ModelError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| ModelError::Parse { line: i + 1, msg: e.to_string() })?;
        let line = line.trim();
        if line.is_empty() || line.starts_with("rank") {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let bad = |m: &str| ModelError::Parse { line: i + 1, msg: m.to_string() };
        if f.len() != 4 {
            return Err(bad("expected rank,pdr,rnp,label"));
        }
        let rank = f[0].trim().parse().map_err(|_| bad("bad rank"))?;
        let pdr = f[1].trim().parse().map_err(|_| bad("bad pdr"))?;
        let rnp = f[2].trim().parse().map_err(|_| bad("bad rnp"))?;
        let label = f[3].trim().parse().map_err(|_| bad("bad label"))?;
        out.push(LabeledExample { features: FeatureVector { rank, pdr, rnp }, label });
    }
    Ok(out)
}
