//! Dissemination protocols on top of a shared event-driven engine.
//!
//! [`engine::Core`] owns the channel, per-node MACs, rateless decoders and
//! metrics; each protocol is a [`Behavior`] reacting to receptions,
//! completions, finished transmissions and timers.

mod deluge;
mod drp;
mod engine;
mod estimator;
mod frame;
mod metrics;
mod mnp;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

pub use deluge::{request_exchange, suppresses, Deluge, DelugeConfig};
pub use drp::{drp_delay, BlockChoice, Drp, DrpConfig, StopEvent};
pub use engine::{Behavior, Core, EngineConfig, Sensing};
pub use estimator::{LinkEstimator, RNP_CAP};
pub use frame::{Control, Frame, FrameBody, CONTROL_BYTES};
pub use metrics::{PacketRecord, RunMetrics, SenderSession};
pub use mnp::{wins, Election, Mnp, MnpConfig};

use crate::mlbss::OrdinalTreeModel;
use crate::rateless::{BlockSizeMenu, RoundMeta};
use crate::topology::{Network, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProtocolKind {
    Drp,
    Edrp,
    RatelessDeluge,
    Mnp,
    /// DRP with link-quality-aware backoff only.
    DrpLqCsma,
    /// DRP with model-chosen block sizes only.
    DrpMlbss,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 6] = [
        ProtocolKind::Drp,
        ProtocolKind::Edrp,
        ProtocolKind::RatelessDeluge,
        ProtocolKind::Mnp,
        ProtocolKind::DrpLqCsma,
        ProtocolKind::DrpMlbss,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProtocolKind::Drp => "drp",
            ProtocolKind::Edrp => "edrp",
            ProtocolKind::RatelessDeluge => "rateless-deluge",
            ProtocolKind::Mnp => "mnp",
            ProtocolKind::DrpLqCsma => "drp-lqcsma",
            ProtocolKind::DrpMlbss => "drp-mlbss",
        }
    }

    pub fn needs_model(self) -> bool {
        matches!(self, ProtocolKind::Edrp | ProtocolKind::DrpMlbss)
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProtocolKind {
    type Err = ProtocolError;
    fn from_str(s: &str) -> Result<Self, ProtocolError> {
        ProtocolKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| ProtocolError::UnknownProtocol(s.to_string()))
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("unknown protocol `{0}` (expected drp, edrp, rateless-deluge, mnp, drp-lqcsma or drp-mlbss)")]
    UnknownProtocol(String),
    #[error("protocol `{0}` needs a trained model or a fixed block size")]
    MissingModel(ProtocolKind),
    #[error("data does not fit the codec: {0}")]
    Codec(#[from] crate::rateless::CodecError),
}

/// Everything a protocol run needs besides the network and the data.
#[derive(Debug, Clone)]
pub struct ProtocolParams {
    pub engine: EngineConfig,
    pub drp: DrpConfig,
    pub deluge: DelugeConfig,
    pub mnp: MnpConfig,
    pub menu: BlockSizeMenu,
    /// Block size for protocols without a model; the menu's middle entry
    /// when unset. For model-driven protocols this overrides the model.
    pub fixed_block: Option<usize>,
    pub model: Option<Arc<OrdinalTreeModel>>,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        ProtocolParams {
            engine: EngineConfig::default(),
            drp: DrpConfig::default(),
            deluge: DelugeConfig::default(),
            mnp: MnpConfig::default(),
            menu: BlockSizeMenu::packed(),
            fixed_block: None,
            model: None,
        }
    }
}

impl ProtocolParams {
    pub fn default_block(&self) -> usize {
        self.fixed_block.unwrap_or_else(|| self.menu.size(self.menu.middle()))
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub metrics: RunMetrics,
    pub trace: Vec<String>,
    /// Block size per sender session (DRP family).
    pub choices: Vec<(NodeId, usize)>,
    pub stops: Vec<StopEvent>,
}

/// Runs one dissemination of `data` from the root.
pub fn run_protocol(
    kind: ProtocolKind,
    net: &Network,
    data: &[u8],
    params: &ProtocolParams,
    seed: u64,
) -> Result<RunOutcome, ProtocolError> {
    let fixed = params.default_block();
    RoundMeta::new(data.len(), fixed)?;
    let core = Core::new(net, data.to_vec(), params.engine.clone(), seed);
    let model_choice = || -> Result<BlockChoice, ProtocolError> {
        if let Some(b) = params.fixed_block {
            return Ok(BlockChoice::Fixed(b));
        }
        let model = params.model.clone().ok_or(ProtocolError::MissingModel(kind))?;
        Ok(BlockChoice::Model { model, menu: params.menu.clone() })
    };
    let drp = |lq_csma: bool, block: BlockChoice| DrpConfig { lq_csma, block, ..params.drp.clone() };
    let (metrics, trace, choices, stops) = match kind {
        ProtocolKind::Drp | ProtocolKind::DrpLqCsma | ProtocolKind::Edrp | ProtocolKind::DrpMlbss => {
            let lq = matches!(kind, ProtocolKind::Edrp | ProtocolKind::DrpLqCsma);
            let block = if kind.needs_model() { model_choice()? } else { BlockChoice::Fixed(fixed) };
            let mut b = Drp::new(drp(lq, block));
            let (m, t) = core.run(&mut b);
            (m, t, b.choices, b.stops)
        }
        ProtocolKind::RatelessDeluge => {
            let mut b = Deluge::new(DelugeConfig { block_size: fixed, ..params.deluge.clone() });
            let (m, t) = core.run(&mut b);
            (m, t, Vec::new(), Vec::new())
        }
        ProtocolKind::Mnp => {
            let mut b = Mnp::new(MnpConfig { block_size: fixed, ..params.mnp.clone() });
            let (m, t) = core.run(&mut b);
            (m, t, Vec::new(), Vec::new())
        }
    };
    Ok(RunOutcome { metrics, trace, choices, stops })
}

pub fn run_drp(net: &Network, data: &[u8], params: &ProtocolParams, seed: u64) -> Result<RunOutcome, ProtocolError> {
    run_protocol(ProtocolKind::Drp, net, data, params, seed)
}

pub fn run_edrp(net: &Network, data: &[u8], params: &ProtocolParams, seed: u64) -> Result<RunOutcome, ProtocolError> {
    run_protocol(ProtocolKind::Edrp, net, data, params, seed)
}

pub fn run_rateless_deluge(
    net: &Network,
    data: &[u8],
    params: &ProtocolParams,
    seed: u64,
) -> Result<RunOutcome, ProtocolError> {
    run_protocol(ProtocolKind::RatelessDeluge, net, data, params, seed)
}

pub fn run_mnp(net: &Network, data: &[u8], params: &ProtocolParams, seed: u64) -> Result<RunOutcome, ProtocolError> {
    run_protocol(ProtocolKind::Mnp, net, data, params, seed)
}
