//! Training data from simulation sweeps.
//!
//! Each scenario takes a forwarding node of the reference network, keeps
//! its rank and child count, and gives its child links a fresh random
//! quality level. The node then disseminates once per menu block size on
//! paired seeds; the label is the block size with the best mean goodput.

use rand::Rng;
use rayon::prelude::*;

use super::{FeatureVector, LabeledExample};
use crate::protocols::{run_protocol, Core, EngineConfig, ProtocolKind, ProtocolParams};
use crate::rateless::BlockSizeMenu;
use crate::rng::{derive_seed, Purpose, RngStreams};
use crate::topology::{LinkQualityTrace, Network, NodeId};

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub menu: BlockSizeMenu,
    /// Number of scenarios to simulate.
    pub count: usize,
    pub lq_min: f64,
    pub lq_max: f64,
    /// Per-link deviation around the scenario's quality level.
    pub lq_spread: f64,
    /// Paired repetitions averaged per block size.
    pub reps: usize,
    pub data_len: usize,
    pub engine: EngineConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            menu: BlockSizeMenu::packed(),
            count: 3000,
            lq_min: 0.2,
            lq_max: 1.0,
            lq_spread: 0.2,
            reps: 6,
            data_len: 1000,
            engine: EngineConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub index: usize,
    pub sender_rank: u32,
    pub child_lqs: Vec<f64>,
    pub features: FeatureVector,
    /// Mean goodput per menu class, bit/s.
    pub goodputs: Vec<f64>,
    pub label: Option<usize>,
}

/// Index of the largest goodput; the smaller class wins exact ties.
/// `None` when every entry is zero.
pub fn label_from_goodputs(g: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in g.iter().enumerate() {
        if v > 0.0 && best.is_none_or(|b| v > g[b]) {
            best = Some(i);
        }
    }
    best
}

/// A one-hop star: node 0 with `lqs.len()` children in one domain.
pub fn star_network(lqs: &[f64]) -> Network {
    let mut b = Network::builder().nodes(lqs.len() as u16 + 1);
    for (i, &q) in lqs.iter().enumerate() {
        b = b.edge(0, i as u16 + 1, LinkQualityTrace::constant(q));
    }
    b.domain(0..=lqs.len() as u16).build().expect("valid star")
}

fn run_scenario(net: &Network, senders: &[NodeId], cfg: &SweepConfig, seed: u64, index: usize) -> ScenarioResult {
    let mut rng = RngStreams::new(seed).global(Purpose::Dataset, index as u64);
    let sender = senders[rng.gen_range(0..senders.len())];
    let kids = net.children_of(sender).len().max(1);
    let level = rng.gen_range(cfg.lq_min..=cfg.lq_max);
    let child_lqs: Vec<f64> =
        (0..kids).map(|_| (level + rng.gen_range(-cfg.lq_spread..=cfg.lq_spread)).clamp(0.05, 1.0)).collect();
    let star = star_network(&child_lqs);
    let data: Vec<u8> = (0..cfg.data_len).map(|_| rng.gen()).collect();
    let run_seed = |rep: usize| derive_seed(seed, &[index as u64, rep as u64]);
    let f = Core::new(&star, data.clone(), cfg.engine.clone(), run_seed(0)).features(NodeId::ROOT);
    let features = FeatureVector { rank: net.rank_of(sender).unwrap_or(1), ..f };
    let goodputs: Vec<f64> = cfg
        .menu
        .sizes()
        .iter()
        .map(|&b| {
            let params = ProtocolParams {
                engine: cfg.engine.clone(),
                menu: cfg.menu.clone(),
                fixed_block: Some(b),
                ..Default::default()
            };
            let total: f64 = (0..cfg.reps.max(1))
                .map(|rep| {
                    run_protocol(ProtocolKind::Drp, &star, &data, &params, run_seed(rep))
                        .map_or(0.0, |o| o.metrics.goodput_bps())
                })
                .sum();
            total / cfg.reps.max(1) as f64
        })
        .collect();
    let label = label_from_goodputs(&goodputs);
    ScenarioResult { index, sender_rank: features.rank, child_lqs, features, goodputs, label }
}

/// Simulates `cfg.count` scenarios on forwarding nodes of `net`. Scenarios
/// where no block size completed are dropped with a warning.
pub fn generate_dataset(net: &Network, cfg: &SweepConfig, seed: u64) -> (Vec<LabeledExample>, Vec<ScenarioResult>) {
    let senders: Vec<NodeId> = net.nodes().iter().copied().filter(|&n| !net.is_leaf(n)).collect();
    if senders.is_empty() {
        log::warn!("network has no forwarding node; dataset is empty");
        return (Vec::new(), Vec::new());
    }
    let results: Vec<ScenarioResult> =
        (0..cfg.count).into_par_iter().map(|i| run_scenario(net, &senders, cfg, seed, i)).collect();
    let mut out = Vec::new();
    for r in &results {
        match r.label {
            Some(label) => out.push(LabeledExample { features: r.features, label }),
            None => log::warn!("scenario {}: zero goodput for every block size, skipped", r.index),
        }
    }
    (out, results)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tie_goes_to_smaller_class() {
        assert_eq!(label_from_goodputs(&[5.0, 7.0, 7.0]), Some(1));
        assert_eq!(label_from_goodputs(&[0.0, 0.0]), None);
        assert_eq!(label_from_goodputs(&[1.0, 3.0, 2.0]), Some(1));
    }
}
