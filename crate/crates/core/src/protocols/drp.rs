//! DRP and its extensions.
//!
//! A node that finishes decoding arms a delay timer that shrinks with the
//! mean quality of its child links, then streams rateless packets until it
//! has overheard every child forward the object (passive acknowledgement).
//! Leaves cannot forward, so they answer with a one-frame completion
//! beacon instead. EDRP adds link-quality-aware backoff windows and a
//! per-session block-size choice from a trained model.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use super::engine::{Behavior, Core};
use super::frame::{Control, Frame, FrameBody};
use crate::mlbss::OrdinalTreeModel;
use crate::rateless::BlockSizeMenu;
use crate::simkernel::SimTime;
use crate::topology::NodeId;

/// How a sender picks the block size for a session.
#[derive(Debug, Clone)]
pub enum BlockChoice {
    Fixed(usize),
    Model { model: Arc<OrdinalTreeModel>, menu: BlockSizeMenu },
}

impl BlockChoice {
    pub fn choose(&self, core: &Core<'_>, n: NodeId) -> usize {
        match self {
            BlockChoice::Fixed(b) => *b,
            BlockChoice::Model { model, menu } => menu.size(model.predict(&core.features(n))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DrpConfig {
    pub d_min_ms: f64,
    pub d_max_ms: f64,
    /// Fraction of children that must be overheard before a sender stops.
    pub ack_threshold: f64,
    /// Use link-quality-aware backoff windows.
    pub lq_csma: bool,
    pub block: BlockChoice,
    /// Minimum spacing between completion beacons from one node.
    pub beacon_holdoff_ms: f64,
    /// Absolute start times overriding the delay timer for some nodes.
    pub start_at_ms: BTreeMap<NodeId, f64>,
}

impl Default for DrpConfig {
    fn default() -> Self {
        DrpConfig {
            d_min_ms: 0.0,
            d_max_ms: 5000.0,
            ack_threshold: 1.0,
            lq_csma: false,
            block: BlockChoice::Fixed(32),
            beacon_holdoff_ms: 250.0,
            start_at_ms: BTreeMap::new(),
        }
    }
}

/// Start delay for a sender whose children have mean link quality `mean_lq`.
pub fn drp_delay(mean_lq: f64, cfg: &DrpConfig) -> f64 {
    cfg.d_min_ms + (1.0 - mean_lq.clamp(0.0, 1.0)) * (cfg.d_max_ms - cfg.d_min_ms)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Decoding,
    Waiting,
    Sending,
    Done,
}

#[derive(Debug, Clone)]
struct NodeCtl {
    phase: Phase,
    acked: BTreeSet<NodeId>,
    block_size: usize,
    last_beacon: Option<SimTime>,
    beacon_queued: bool,
}

/// Stop-time audit used by the passive-acknowledgement tests.
#[derive(Debug, Clone, PartialEq)]
pub struct StopEvent {
    pub node: NodeId,
    pub at: SimTime,
    pub acked: usize,
    pub children: usize,
}

#[derive(Debug)]
pub struct Drp {
    cfg: DrpConfig,
    ctl: BTreeMap<NodeId, NodeCtl>,
    pub stops: Vec<StopEvent>,
    /// Block size chosen for each session, in session order.
    pub choices: Vec<(NodeId, usize)>,
}

const START_TIMER: u64 = 1;

impl Drp {
    pub fn new(cfg: DrpConfig) -> Self {
        Drp { cfg, ctl: BTreeMap::new(), stops: Vec::new(), choices: Vec::new() }
    }

    fn ctl(&mut self, n: NodeId) -> &mut NodeCtl {
        self.ctl.entry(n).or_insert(NodeCtl {
            phase: Phase::Decoding,
            acked: BTreeSet::new(),
            block_size: 0,
            last_beacon: None,
            beacon_queued: false,
        })
    }

    fn acks_satisfied(&mut self, core: &Core<'_>, n: NodeId) -> bool {
        let kids = core.net.children_of(n).len();
        let need = (self.cfg.ack_threshold * kids as f64).ceil() as usize;
        self.ctl(n).acked.len() >= need.min(kids)
    }

    fn send_beacon(&mut self, core: &mut Core<'_>, n: NodeId) {
        let now = core.now();
        let holdoff = self.cfg.beacon_holdoff_ms;
        let c = self.ctl(n);
        if c.beacon_queued || c.last_beacon.is_some_and(|t| now.as_ms() - t.as_ms() < holdoff) {
            return;
        }
        c.beacon_queued = true;
        let w = core.window(n, self.cfg.lq_csma);
        core.send(n, Frame::control(n, Control::Beacon), w);
    }

    fn send_data(&mut self, core: &mut Core<'_>, n: NodeId) {
        let b = self.ctl(n).block_size;
        match core.data_frame(n, b) {
            Ok(f) => {
                let w = core.window(n, self.cfg.lq_csma);
                core.send(n, f, w);
            }
            Err(e) => {
                log::warn!("node {n}: cannot build data frame: {e}");
                self.finish(core, n);
            }
        }
    }

    fn begin_sending(&mut self, core: &mut Core<'_>, n: NodeId) {
        let b = self.cfg.block.choose(core, n);
        self.choices.push((n, b));
        let c = self.ctl(n);
        c.phase = Phase::Sending;
        c.block_size = b;
        core.begin_session(n, b);
        self.send_data(core, n);
    }

    fn finish(&mut self, core: &mut Core<'_>, n: NodeId) {
        let now = core.now();
        let kids = core.net.children_of(n).len();
        let c = self.ctl(n);
        let was_sending = c.phase == Phase::Sending;
        c.phase = Phase::Done;
        let acked = c.acked.len();
        if was_sending {
            core.end_session(n);
        }
        self.stops.push(StopEvent { node: n, at: now, acked, children: kids });
    }
}

impl Behavior for Drp {
    fn start(&mut self, core: &mut Core<'_>) {
        let nodes: Vec<NodeId> = core.net.nodes().to_vec();
        for n in nodes {
            self.ctl(n);
            if core.is_complete(n) {
                self.on_complete(core, n);
            }
        }
    }

    fn on_complete(&mut self, core: &mut Core<'_>, n: NodeId) {
        if self.ctl(n).phase != Phase::Decoding {
            return;
        }
        if core.net.is_leaf(n) {
            self.ctl(n).phase = Phase::Done;
            if !n.is_root() {
                self.send_beacon(core, n);
            }
            return;
        }
        let delay = if let Some(&t) = self.cfg.start_at_ms.get(&n) {
            (t - core.now().as_ms()).max(0.0)
        } else if n.is_root() {
            0.0
        } else {
            drp_delay(core.mean_child_lq(n).unwrap_or(0.0), &self.cfg)
        };
        self.ctl(n).phase = Phase::Waiting;
        if delay == 0.0 {
            self.on_timer(core, n, START_TIMER);
        } else {
            core.set_timer(n, delay, START_TIMER);
        }
    }

    fn on_timer(&mut self, core: &mut Core<'_>, n: NodeId, _timer: u64) {
        if self.ctl(n).phase != Phase::Waiting {
            return;
        }
        if self.acks_satisfied(core, n) {
            self.finish(core, n);
            if !n.is_root() {
                self.send_beacon(core, n);
            }
        } else {
            self.begin_sending(core, n);
        }
    }

    fn on_receive(&mut self, core: &mut Core<'_>, rx: NodeId, frame: &Frame) {
        let from = frame.sender;
        let is_child = core.net.parent_of(from) == Some(rx);
        let ack = match &frame.body {
            FrameBody::Data { .. } => true,
            FrameBody::Control(Control::Beacon) => true,
            FrameBody::Control(_) => false,
        };
        if is_child && ack {
            self.ctl(rx).acked.insert(from);
        }
        // A finished node still hearing its parent's data answers so the
        // parent can stop.
        if frame.is_data() && core.net.parent_of(rx) == Some(from) && self.ctl(rx).phase == Phase::Done {
            self.send_beacon(core, rx);
        }
    }

    fn on_tx_done(&mut self, core: &mut Core<'_>, n: NodeId, frame: &Frame, _sent: bool) {
        match frame.body {
            FrameBody::Control(Control::Beacon) => {
                let now = core.now();
                let c = self.ctl(n);
                c.beacon_queued = false;
                c.last_beacon = Some(now);
            }
            FrameBody::Data { .. } => {
                if self.ctl(n).phase != Phase::Sending {
                    return;
                }
                if self.acks_satisfied(core, n) {
                    self.finish(core, n);
                } else {
                    self.send_data(core, n);
                }
            }
            FrameBody::Control(_) => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delay_endpoints_and_gap() {
        let c = DrpConfig::default();
        assert_eq!(drp_delay(1.0, &c), 0.0);
        assert_eq!(drp_delay(0.0, &c), 5000.0);
        let gap = drp_delay(0.70, &c) - drp_delay(0.71, &c);
        assert!((drp_delay(0.71, &c) - 1450.0).abs() < 1e-9);
        assert!((drp_delay(0.70, &c) - 1500.0).abs() < 1e-9);
        assert!((gap - 50.0).abs() < 1e-9);
    }

    #[test]
    fn delay_strictly_decreasing() {
        let c = DrpConfig::default();
        let mut prev = f64::INFINITY;
        for i in 0..=100 {
            let d = drp_delay(i as f64 / 100.0, &c);
            assert!(d < prev);
            prev = d;
        }
    }
}
