//! MNP-style sender election.
//!
//! A node holding the object advertises; nodes that still need it reply.
//! The advertiser then re-advertises with its reply count. After a short
//! decision window it transmits a burst unless it overheard a competing
//! advertiser with a higher count (ties go to the lower node id), in which
//! case it sleeps for a while and tries again.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use super::engine::{Behavior, Core};
use super::frame::{Control, Frame, FrameBody};
use crate::rateless::RoundMeta;
use crate::topology::NodeId;

#[derive(Debug, Clone)]
pub struct MnpConfig {
    pub block_size: usize,
    pub adv_interval_ms: f64,
    pub adv_interval_max_ms: f64,
    pub reply_window_ms: f64,
    pub reply_backoff_ms: f64,
    pub decision_window_ms: f64,
    pub sleep_ms: f64,
    /// Burst length as a multiple of the source block count.
    pub burst_factor: f64,
}

impl Default for MnpConfig {
    fn default() -> Self {
        MnpConfig {
            block_size: 32,
            adv_interval_ms: 1000.0,
            adv_interval_max_ms: 8000.0,
            reply_window_ms: 1500.0,
            reply_backoff_ms: 1000.0,
            decision_window_ms: 1000.0,
            sleep_ms: 3000.0,
            burst_factor: 1.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Idle,
    Advertising,
    Collecting,
    Announcing,
    Deciding,
    Bursting,
    Sleeping,
}

#[derive(Debug, Clone)]
struct NodeCtl {
    phase: Phase,
    gen: u64,
    interval_ms: f64,
    repliers: BTreeSet<NodeId>,
    /// Best competing (count, id) overheard this cycle.
    best_rival: Option<(u32, NodeId)>,
    burst_left: u32,
    pending_reply: Option<(NodeId, u64)>,
}

/// Outcome of one election at one node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Election {
    Transmit { node: NodeId, count: u32 },
    Sleep { node: NodeId, count: u32, winner: NodeId },
}

#[derive(Debug, Default)]
pub struct Mnp {
    cfg: MnpConfig,
    ctl: BTreeMap<NodeId, NodeCtl>,
    pub elections: Vec<Election>,
}

const ADV: u64 = 1;
const COLLECT: u64 = 2;
const DECIDE: u64 = 3;
const WAKE: u64 = 4;
const REPLY: u64 = 5;

fn timer(kind: u64, gen: u64) -> u64 {
    gen << 8 | kind
}

/// Does `(count, id)` beat `(other_count, other_id)`?
pub fn wins(count: u32, id: NodeId, other_count: u32, other_id: NodeId) -> bool {
    count > other_count || (count == other_count && id < other_id)
}

impl Mnp {
    pub fn new(cfg: MnpConfig) -> Self {
        Mnp { cfg, ..Default::default() }
    }

    fn ctl(&mut self, n: NodeId) -> &mut NodeCtl {
        let base = self.cfg.adv_interval_ms;
        self.ctl.entry(n).or_insert(NodeCtl {
            phase: Phase::Idle,
            gen: 0,
            interval_ms: base,
            repliers: BTreeSet::new(),
            best_rival: None,
            burst_left: 0,
            pending_reply: None,
        })
    }

    fn arm(&mut self, core: &mut Core<'_>, n: NodeId, kind: u64, delay: f64) {
        let c = self.ctl(n);
        c.gen += 1;
        let g = c.gen;
        core.set_timer(n, delay, timer(kind, g));
    }

    fn arm_adv(&mut self, core: &mut Core<'_>, n: NodeId) {
        let iv = self.ctl(n).interval_ms;
        let d = core.rng(n).gen_range(iv / 2.0..=iv);
        self.ctl(n).phase = Phase::Idle;
        self.arm(core, n, ADV, d);
    }

    fn burst_frame(&mut self, core: &mut Core<'_>, n: NodeId) {
        match core.data_frame(n, self.cfg.block_size) {
            Ok(f) => {
                let w = core.window(n, false);
                core.send(n, f, w);
            }
            Err(e) => log::warn!("node {n}: {e}"),
        }
    }
}

impl Behavior for Mnp {
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
        self.ctl(n).pending_reply = None;
        if core.net.receivers_of(n).next().is_some() {
            self.arm_adv(core, n);
        }
    }

    fn on_timer(&mut self, core: &mut Core<'_>, n: NodeId, t: u64) {
        let (kind, gen) = (t & 0xff, t >> 8);
        if kind == REPLY {
            let c = self.ctl(n);
            let Some((to, g)) = c.pending_reply else { return };
            if g != gen {
                return;
            }
            c.pending_reply = None;
            if !core.is_complete(n) {
                let w = core.window(n, false);
                core.send(n, Frame::control(n, Control::Reply { to }), w);
            }
            return;
        }
        if gen != self.ctl(n).gen {
            return;
        }
        match kind {
            ADV | WAKE => {
                let c = self.ctl(n);
                c.phase = Phase::Advertising;
                c.repliers.clear();
                c.best_rival = None;
                let w = core.window(n, false);
                core.send(n, Frame::control(n, Control::Advertise { count: 0, phase: 0 }), w);
            }
            COLLECT => {
                let cap = self.cfg.adv_interval_max_ms;
                let c = self.ctl(n);
                let count = c.repliers.len() as u32;
                if count == 0 {
                    c.interval_ms = (c.interval_ms * 2.0).min(cap);
                    self.arm_adv(core, n);
                    return;
                }
                c.phase = Phase::Announcing;
                let w = core.window(n, false);
                core.send(n, Frame::control(n, Control::Advertise { count, phase: 1 }), w);
            }
            DECIDE => {
                let base = self.cfg.adv_interval_ms;
                let sleep = self.cfg.sleep_ms;
                let k = RoundMeta::new(core.data_len(), self.cfg.block_size).map_or(1, |m| m.k);
                let bpp = core.blocks_per_packet(self.cfg.block_size).max(1);
                let burst = ((k as f64 * self.cfg.burst_factor) / bpp as f64).ceil() as u32;
                let c = self.ctl(n);
                let count = c.repliers.len() as u32;
                match c.best_rival {
                    Some((rc, rid)) if wins(rc, rid, count, n) => {
                        c.phase = Phase::Sleeping;
                        self.elections.push(Election::Sleep { node: n, count, winner: rid });
                        self.arm(core, n, WAKE, sleep);
                    }
                    _ => {
                        c.phase = Phase::Bursting;
                        c.burst_left = burst.max(1);
                        c.interval_ms = base;
                        self.elections.push(Election::Transmit { node: n, count });
                        self.burst_frame(core, n);
                    }
                }
            }
            _ => {}
        }
    }

    fn on_receive(&mut self, core: &mut Core<'_>, rx: NodeId, frame: &Frame) {
        let from = frame.sender;
        let FrameBody::Control(ctl) = &frame.body else { return };
        match *ctl {
            Control::Advertise { count, phase } => {
                if core.is_complete(rx) {
                    if phase == 1 {
                        let c = self.ctl(rx);
                        let better = c.best_rival.is_none_or(|(bc, bid)| wins(count, from, bc, bid));
                        if better {
                            c.best_rival = Some((count, from));
                        }
                    }
                    return;
                }
                if phase != 0 || self.ctl(rx).pending_reply.is_some() {
                    return;
                }
                let d = core.rng(rx).gen_range(0.0..=self.cfg.reply_backoff_ms);
                let c = self.ctl(rx);
                c.gen += 1;
                let g = c.gen;
                c.pending_reply = Some((from, g));
                core.set_timer(rx, d, timer(REPLY, g));
            }
            Control::Reply { to } if to == rx => {
                let c = self.ctl(rx);
                if matches!(c.phase, Phase::Advertising | Phase::Collecting) {
                    c.repliers.insert(from);
                }
            }
            _ => {}
        }
    }

    fn on_tx_done(&mut self, core: &mut Core<'_>, n: NodeId, frame: &Frame, _sent: bool) {
        let phase = self.ctl(n).phase;
        match (&frame.body, phase) {
            (FrameBody::Control(Control::Advertise { phase: 0, .. }), Phase::Advertising) => {
                self.ctl(n).phase = Phase::Collecting;
                let w = self.cfg.reply_window_ms;
                self.arm(core, n, COLLECT, w);
            }
            (FrameBody::Control(Control::Advertise { phase: 1, .. }), Phase::Announcing) => {
                self.ctl(n).phase = Phase::Deciding;
                let w = self.cfg.decision_window_ms;
                self.arm(core, n, DECIDE, w);
            }
            (FrameBody::Data { .. }, Phase::Bursting) => {
                let c = self.ctl(n);
                c.burst_left = c.burst_left.saturating_sub(1);
                if c.burst_left > 0 {
                    self.burst_frame(core, n);
                } else {
                    self.arm_adv(core, n);
                }
            }
            _ => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn election_rule() {
        assert!(wins(4, NodeId(9), 2, NodeId(1)));
        assert!(wins(3, NodeId(1), 3, NodeId(2)));
        assert!(!wins(3, NodeId(2), 3, NodeId(1)));
    }
}
