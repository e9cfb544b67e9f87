//! Experiment fixtures shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::{Arc, OnceLock};

use rand::{Rng, SeedableRng};

use edrp_core::analytics::{gap_records, GapRecord};
use edrp_core::mlbss::{
    self, generate_dataset, LabeledExample, OrdinalLoss, OrdinalTreeModel, Scaling, SweepConfig, TrainKind,
};
use edrp_core::protocols::{run_protocol, EngineConfig, ProtocolKind, ProtocolParams, Sensing};
use edrp_core::rng::{derive_seed, round_seed, SimRng};
use edrp_core::simkernel::SimTime;
use edrp_core::topology::LinkQualityTrace;
use edrp_core::{Network, NodeId};

/// Seed of the desk-scale block-size dataset, fixed before any result
/// was looked at.
pub const DATASET_SEED: u64 = 20261015;
/// Master seed of the protocol-ordering campaigns.
pub const CAMPAIGN_SEED: u64 = 7;

pub fn repo_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

pub fn net15() -> Network {
    Network::load(repo_path("configs/net15.toml")).expect("net15 network")
}

pub fn payload(len: usize) -> Vec<u8> {
    edrp_core::campaign::campaign_data(CAMPAIGN_SEED, len)
}

/// Sender-quality and backoff of every data frame sent by a single sender
/// whose one child link has a quality drawn uniformly from [0, 1].
pub fn backoff_samples(lq_csma: bool, runs: u64, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = SimRng::seed_from_u64(seed);
    let kind = if lq_csma { ProtocolKind::DrpLqCsma } else { ProtocolKind::Drp };
    let params = ProtocolParams {
        engine: EngineConfig { timeout: SimTime::from_ms(10_000.0), ..EngineConfig::default() },
        ..ProtocolParams::default()
    };
    let data = payload(1000);
    let (mut lqs, mut backoffs) = (Vec::new(), Vec::new());
    for r in 0..runs {
        let lq: f64 = rng.gen();
        let net =
            Network::builder().nodes(2).edge(0, 1, LinkQualityTrace::constant(lq)).build().expect("two-node network");
        let out = run_protocol(kind, &net, &data, &params, derive_seed(seed, &[r])).expect("run");
        for p in out.metrics.packets.iter().filter(|p| p.kind == "data") {
            if let Some(l) = p.sender_lq {
                lqs.push(l);
                backoffs.push(p.backoff_ms as f64);
            }
        }
    }
    (lqs, backoffs)
}

/// Two relays already holding the object in one collision domain, each
/// with two children, forced to start their rounds `gap` ms apart.
pub fn two_sender_network() -> Network {
    let c = LinkQualityTrace::constant;
    Network::builder()
        .nodes(7)
        .edge(0, 1, c(0.9))
        .edge(0, 2, c(0.9))
        .edge(1, 3, c(0.8))
        .edge(1, 4, c(0.8))
        .edge(2, 5, c(0.8))
        .edge(2, 6, c(0.8))
        .domain(0..7)
        .build()
        .expect("two-sender network")
}

pub fn forced_gap_run(net: &Network, gap_ms: f64, seed: u64, sensing: Sensing) -> Vec<GapRecord> {
    let mut params = ProtocolParams::default();
    params.engine.sensing = sensing;
    params.engine.preloaded = vec![NodeId(1), NodeId(2)];
    params.drp.start_at_ms = BTreeMap::from([(NodeId(0), 1e9), (NodeId(1), 100.0), (NodeId(2), 100.0 + gap_ms)]);
    let out = run_protocol(ProtocolKind::Drp, net, &payload(1000), &params, seed).expect("run");
    gap_records(&out.metrics, net)
}

/// Forced gaps drawn uniformly from [0, 5000) ms, one per round.
pub fn forced_gap_records(rounds: u64, seed: u64, sensing: Sensing) -> Vec<GapRecord> {
    let net = two_sender_network();
    let mut rng = SimRng::seed_from_u64(seed);
    (0..rounds)
        .flat_map(|r| {
            let gap = rng.gen_range(0.0..5000.0);
            forced_gap_run(&net, gap, round_seed(seed, r), sensing)
        })
        .collect()
}

/// The regenerated desk-scale dataset (default sweep on the 15-node network).
pub fn desk_dataset() -> &'static [LabeledExample] {
    static DATA: OnceLock<Vec<LabeledExample>> = OnceLock::new();
    DATA.get_or_init(|| generate_dataset(&net15(), &SweepConfig::default(), DATASET_SEED).0)
}

pub fn desk_loss() -> OrdinalLoss {
    OrdinalLoss::from_menu(&SweepConfig::default().menu)
}

pub fn desk_scaling() -> Scaling {
    Scaling::standard(net15().max_rank())
}

/// TAO-oblique model trained on the full desk dataset.
pub fn desk_model() -> Arc<OrdinalTreeModel> {
    static MODEL: OnceLock<Arc<OrdinalTreeModel>> = OnceLock::new();
    MODEL
        .get_or_init(|| {
            let t = mlbss::train(
                TrainKind::TaoOblique,
                desk_dataset(),
                &desk_loss(),
                mlbss::DEFAULT_MAX_DEPTH,
                mlbss::DEFAULT_PASSES,
                desk_scaling(),
            )
            .expect("train");
            Arc::new(t.model)
        })
        .clone()
}

/// Goodput and completion time of `kind` over `rounds` paired seeds.
pub fn paired_rounds(kind: ProtocolKind, net: &Network, params: &ProtocolParams, rounds: u64) -> Vec<(f64, f64)> {
    let data = payload(1000);
    (0..rounds)
        .map(|r| {
            let m = run_protocol(kind, net, &data, params, round_seed(CAMPAIGN_SEED, r)).expect("run").metrics;
            (m.goodput_bps(), m.completion_time().as_secs())
        })
        .collect()
}

pub fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.into_iter().collect();
    v.iter().sum::<f64>() / v.len() as f64
}
