//! Rateless Deluge: advertise, request, broadcast.
//!
//! Every node holding the object advertises on a Trickle-like timer and
//! stays quiet for an interval in which it overheard another
//! advertisement. A receiver that still needs `x` blocks answers an
//! advertisement after a random backoff unless it overheard a request for
//! `y >= x` blocks addressed to the same advertiser. After a collection
//! window the advertiser broadcasts the largest requested block count.

use std::collections::BTreeMap;

use rand::Rng;

use super::engine::{Behavior, Core};
use super::frame::{Control, Frame, FrameBody};
use crate::topology::NodeId;

#[derive(Debug, Clone)]
pub struct DelugeConfig {
    pub block_size: usize,
    /// Base advertisement interval.
    pub adv_interval_ms: f64,
    /// Interval cap after repeated unanswered advertisements.
    pub adv_interval_max_ms: f64,
    /// How long an advertiser collects requests.
    pub request_window_ms: f64,
    /// Receivers draw their request backoff from `[0, this]`.
    pub request_backoff_ms: f64,
}

impl Default for DelugeConfig {
    fn default() -> Self {
        DelugeConfig {
            block_size: 32,
            adv_interval_ms: 1000.0,
            adv_interval_max_ms: 8000.0,
            request_window_ms: 1500.0,
            request_backoff_ms: 1000.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SenderPhase {
    Idle,
    Advertising,
    Collecting,
    Bursting,
}

#[derive(Debug, Clone)]
struct NodeCtl {
    phase: SenderPhase,
    /// Timer generation; stale timers are ignored.
    gen: u64,
    interval_ms: f64,
    heard_adv: bool,
    max_request: u32,
    requests_heard: u32,
    burst_left: u32,
    /// Receiver side: (advertiser, blocks wanted, timer generation).
    pending_request: Option<(NodeId, u32, u64)>,
}

#[derive(Debug, Default)]
pub struct Deluge {
    cfg: DelugeConfig,
    ctl: BTreeMap<NodeId, NodeCtl>,
    /// Requests actually transmitted, as (requester, advertiser, blocks).
    pub requests_sent: Vec<(NodeId, NodeId, u32)>,
    /// Broadcast bursts, as (sender, blocks).
    pub bursts: Vec<(NodeId, u32)>,
}

// Timer ids: low byte is the kind, the rest the generation.
const ADV: u64 = 1;
const COLLECT: u64 = 2;
const REQUEST: u64 = 3;

fn timer(kind: u64, gen: u64) -> u64 {
    gen << 8 | kind
}

/// A pending request for `want` blocks is dropped once a request for at
/// least as many blocks to the same advertiser has been overheard.
pub fn suppresses(overheard: u32, want: u32) -> bool {
    overheard >= want
}

/// One request exchange among receivers that all hear each other:
/// `(node, blocks wanted, backoff ms)`. Returns the requests actually
/// sent, in transmission order, and the burst size the sender picks.
pub fn request_exchange(wants: &[(NodeId, u32, f64)]) -> (Vec<(NodeId, u32)>, u32) {
    let mut order: Vec<&(NodeId, u32, f64)> = wants.iter().collect();
    order.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)));
    let mut sent: Vec<(NodeId, u32)> = Vec::new();
    for &&(n, want, _) in &order {
        if want > 0 && !sent.iter().any(|&(_, heard)| suppresses(heard, want)) {
            sent.push((n, want));
        }
    }
    let burst = sent.iter().map(|s| s.1).max().unwrap_or(0);
    (sent, burst)
}

impl Deluge {
    pub fn new(cfg: DelugeConfig) -> Self {
        Deluge { cfg, ..Default::default() }
    }

    fn ctl(&mut self, n: NodeId) -> &mut NodeCtl {
        let base = self.cfg.adv_interval_ms;
        self.ctl.entry(n).or_insert(NodeCtl {
            phase: SenderPhase::Idle,
            gen: 0,
            interval_ms: base,
            heard_adv: false,
            max_request: 0,
            requests_heard: 0,
            burst_left: 0,
            pending_request: None,
        })
    }

    fn arm_adv(&mut self, core: &mut Core<'_>, n: NodeId) {
        let iv = self.ctl(n).interval_ms;
        let delay = core.rng(n).gen_range(iv / 2.0..=iv);
        let c = self.ctl(n);
        c.gen += 1;
        c.heard_adv = false;
        let g = c.gen;
        core.set_timer(n, delay, timer(ADV, g));
    }

    fn send_burst_frame(&mut self, core: &mut Core<'_>, n: NodeId) {
        match core.data_frame(n, self.cfg.block_size) {
            Ok(f) => {
                let w = core.window(n, false);
                core.send(n, f, w);
            }
            Err(e) => log::warn!("node {n}: {e}"),
        }
    }
}

impl Behavior for Deluge {
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
        self.ctl(n).pending_request = None;
        if core.net.receivers_of(n).next().is_some() {
            self.arm_adv(core, n);
        }
    }

    fn on_timer(&mut self, core: &mut Core<'_>, n: NodeId, t: u64) {
        let (kind, gen) = (t & 0xff, t >> 8);
        match kind {
            ADV => {
                let c = self.ctl(n);
                if gen != c.gen || c.phase != SenderPhase::Idle {
                    return;
                }
                if c.heard_adv {
                    // Suppressed: someone nearby already advertised.
                    self.arm_adv(core, n);
                    return;
                }
                c.phase = SenderPhase::Advertising;
                let w = core.window(n, false);
                core.send(n, Frame::control(n, Control::Advertise { count: 0, phase: 0 }), w);
            }
            COLLECT => {
                let base = self.cfg.adv_interval_ms;
                let cap = self.cfg.adv_interval_max_ms;
                let bpp = core.blocks_per_packet(self.cfg.block_size).max(1) as u32;
                let c = self.ctl(n);
                if gen != c.gen || c.phase != SenderPhase::Collecting {
                    return;
                }
                if c.max_request > 0 {
                    c.phase = SenderPhase::Bursting;
                    c.burst_left = c.max_request.div_ceil(bpp);
                    c.interval_ms = base;
                    let blocks = c.max_request;
                    self.bursts.push((n, blocks));
                    self.send_burst_frame(core, n);
                } else {
                    c.phase = SenderPhase::Idle;
                    c.interval_ms = (c.interval_ms * 2.0).min(cap);
                    self.arm_adv(core, n);
                }
            }
            REQUEST => {
                let c = self.ctl(n);
                let Some((to, blocks, g)) = c.pending_request else {
                    return;
                };
                if g != gen {
                    return;
                }
                c.pending_request = None;
                if core.is_complete(n) {
                    return;
                }
                self.requests_sent.push((n, to, blocks));
                let w = core.window(n, false);
                core.send(n, Frame::control(n, Control::Request { to, blocks }), w);
            }
            _ => {}
        }
    }

    fn on_receive(&mut self, core: &mut Core<'_>, rx: NodeId, frame: &Frame) {
        let from = frame.sender;
        let FrameBody::Control(ctl) = &frame.body else {
            return;
        };
        match *ctl {
            Control::Advertise { .. } => {
                if core.is_complete(rx) {
                    self.ctl(rx).heard_adv = true;
                    return;
                }
                if self.ctl(rx).pending_request.is_some() {
                    return;
                }
                let want = core.blocks_needed(rx, self.cfg.block_size);
                let delay = core.rng(rx).gen_range(0.0..=self.cfg.request_backoff_ms);
                let c = self.ctl(rx);
                c.gen += 1;
                let g = c.gen;
                c.pending_request = Some((from, want, g));
                core.set_timer(rx, delay, timer(REQUEST, g));
            }
            Control::Request { to, blocks } => {
                if to == rx {
                    let c = self.ctl(rx);
                    c.requests_heard += 1;
                    if c.phase == SenderPhase::Collecting {
                        c.max_request = c.max_request.max(blocks);
                    }
                    return;
                }
                let c = self.ctl(rx);
                if let Some((p_to, want, _)) = c.pending_request {
                    if p_to == to && suppresses(blocks, want) {
                        c.pending_request = None;
                    }
                }
            }
            _ => {}
        }
    }

    fn on_tx_done(&mut self, core: &mut Core<'_>, n: NodeId, frame: &Frame, _sent: bool) {
        match &frame.body {
            FrameBody::Control(Control::Advertise { .. }) => {
                let window = self.cfg.request_window_ms;
                let c = self.ctl(n);
                if c.phase != SenderPhase::Advertising {
                    return;
                }
                c.phase = SenderPhase::Collecting;
                c.max_request = 0;
                c.gen += 1;
                let g = c.gen;
                core.set_timer(n, window, timer(COLLECT, g));
            }
            FrameBody::Data { .. } => {
                let c = self.ctl(n);
                if c.phase != SenderPhase::Bursting {
                    return;
                }
                c.burst_left = c.burst_left.saturating_sub(1);
                if c.burst_left > 0 {
                    self.send_burst_frame(core, n);
                } else {
                    c.phase = SenderPhase::Idle;
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
    fn larger_request_first_suppresses_the_smaller() {
        let (sent, burst) = request_exchange(&[(NodeId(1), 3, 400.0), (NodeId(2), 7, 100.0)]);
        assert_eq!(sent, vec![(NodeId(2), 7)]);
        assert_eq!(burst, 7);
    }

    #[test]
    fn smaller_request_first_does_not_silence_the_larger() {
        let (sent, burst) = request_exchange(&[(NodeId(1), 3, 100.0), (NodeId(2), 7, 400.0)]);
        assert_eq!(sent, vec![(NodeId(1), 3), (NodeId(2), 7)]);
        assert_eq!(burst, 7);
    }

    #[test]
    fn nothing_missing_means_no_request() {
        assert_eq!(request_exchange(&[(NodeId(1), 0, 5.0)]), (vec![], 0));
    }
}
