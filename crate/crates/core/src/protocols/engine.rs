//! Shared simulation machinery: per-node MAC, channel delivery, decoding
//! and metrics. Protocol logic plugs in through [`Behavior`].

use std::collections::{BTreeMap, VecDeque};

use rand::Rng;

use super::estimator::LinkEstimator;
use super::frame::{Frame, FrameBody};
use super::metrics::{PacketRecord, RunMetrics, SenderSession};
use crate::mac::{select_window, BackoffWindow, CsmaProcess, CsmaStep, LqCsmaParams};
use crate::mlbss::FeatureVector;
use crate::rateless::{
    blocks_per_packet, CodecError, DecoderState, Encoder, IngestOutcome, RoundMeta, DEFAULT_PAYLOAD_BUDGET,
};
use crate::rng::{Purpose, RngStreams, SimRng};
use crate::simkernel::{BlockErrorModel, Channel, EventKind, EventQueue, PhyConfig, SimTime, TraceDetail};
use crate::topology::{Network, NodeId};

/// Which transmissions a clear channel assessment detects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sensing {
    /// Any sender sharing a collision domain with the assessing node.
    #[default]
    Domain,
    /// Only senders with a link to the assessing node (hidden terminals
    /// possible inside a domain).
    Neighbors,
}

#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub phy: PhyConfig,
    pub error_model: BlockErrorModel,
    pub sensing: Sensing,
    pub mac: LqCsmaParams,
    pub max_csma_attempts: u32,
    pub payload_budget: usize,
    /// Simulated time after which the run is abandoned.
    pub timeout: SimTime,
    /// End the run as soon as every node has decoded.
    pub stop_when_complete: bool,
    pub estimator_window: usize,
    /// Nodes holding the object at time zero besides the origin.
    pub preloaded: Vec<NodeId>,
    pub trace: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            phy: PhyConfig::default(),
            error_model: BlockErrorModel::default(),
            sensing: Sensing::default(),
            mac: LqCsmaParams::default(),
            max_csma_attempts: CsmaProcess::DEFAULT_MAX_ATTEMPTS,
            payload_budget: DEFAULT_PAYLOAD_BUDGET,
            timeout: SimTime::from_ms(60_000.0),
            stop_when_complete: true,
            estimator_window: LinkEstimator::DEFAULT_WINDOW,
            preloaded: Vec::new(),
            trace: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ev {
    Backoff,
    TxStart,
    TxEnd(u64),
    Timer(u64),
}

impl TraceDetail for Ev {
    fn detail(&self) -> String {
        match self {
            Ev::TxEnd(id) => format!("tx={id}"),
            Ev::Timer(t) => format!("timer={t}"),
            _ => String::new(),
        }
    }
}

/// Protocol callbacks. All coordination between nodes must flow through
/// frames sent with [`Core::send`].
pub trait Behavior {
    fn start(&mut self, core: &mut Core<'_>);
    /// `rx` heard `frame` intact enough to read its header.
    fn on_receive(&mut self, core: &mut Core<'_>, rx: NodeId, frame: &Frame);
    /// `node` decoded the object.
    fn on_complete(&mut self, core: &mut Core<'_>, node: NodeId);
    /// A frame left the air (`sent`) or was dropped after failed access.
    fn on_tx_done(&mut self, core: &mut Core<'_>, node: NodeId, frame: &Frame, sent: bool);
    fn on_timer(&mut self, core: &mut Core<'_>, node: NodeId, timer: u64);
}

#[derive(Debug)]
struct Pending {
    frame: Frame,
    window: BackoffWindow,
}

#[derive(Debug)]
enum MacActivity {
    Backoff { proc: CsmaProcess, pending: Pending, access_start: SimTime },
    Turnaround { pending: Pending, access_start: SimTime, proc: CsmaProcess },
    OnAir,
}

struct InFlight {
    frame: Frame,
    record: PacketRecord,
}

struct NodeState {
    queue: VecDeque<Pending>,
    activity: Option<MacActivity>,
    rng_mac: SimRng,
    rng_chan: SimRng,
    rng_codec: SimRng,
    rng_proto: SimRng,
    decoders: BTreeMap<usize, DecoderState>,
    data: Option<Vec<u8>>,
    encoders: BTreeMap<usize, (Encoder, u16)>,
    estimator: LinkEstimator,
    session: Option<usize>,
}

pub struct Core<'a> {
    pub net: &'a Network,
    pub cfg: EngineConfig,
    data: Vec<u8>,
    queue: EventQueue<Ev>,
    channel: Channel,
    nodes: BTreeMap<NodeId, NodeState>,
    inflight: BTreeMap<u64, InFlight>,
    salt: u64,
    complete: usize,
    pub metrics: RunMetrics,
}

impl<'a> Core<'a> {
    pub fn new(net: &'a Network, data: Vec<u8>, cfg: EngineConfig, seed: u64) -> Self {
        let streams = RngStreams::new(seed);
        let mut queue = EventQueue::new();
        if cfg.trace {
            queue.enable_trace();
        }
        let mut nodes = BTreeMap::new();
        for &n in net.nodes() {
            let mut estimator = LinkEstimator::new(cfg.estimator_window);
            // Prior link history: one window of packet outcomes per child
            // link, as a node would have gathered from earlier traffic.
            let mut rng_est = streams.stream(n, Purpose::Estimator);
            let bytes = cfg.payload_budget + cfg.phy.header_bytes;
            for &c in net.children_of(n) {
                for i in 0..cfg.estimator_window {
                    let t = -(i as f64) * 100.0;
                    let lq = net.lq_sample(n, c, t.max(0.0), seed ^ i as u64).unwrap_or(0.0);
                    let p = cfg.error_model.success_prob(lq, bytes);
                    estimator.record(c, rng_est.gen_bool(p));
                }
            }
            nodes.insert(
                n,
                NodeState {
                    queue: VecDeque::new(),
                    activity: None,
                    rng_mac: streams.stream(n, Purpose::Mac),
                    rng_chan: streams.stream(n, Purpose::Channel),
                    rng_codec: streams.stream(n, Purpose::Codec),
                    rng_proto: streams.stream(n, Purpose::Protocol),
                    decoders: BTreeMap::new(),
                    data: None,
                    encoders: BTreeMap::new(),
                    estimator,
                    session: None,
                },
            );
        }
        let metrics = RunMetrics {
            data_len: data.len(),
            receivers: net.len().saturating_sub(1),
            completion: net.nodes().iter().map(|&n| (n, None)).collect(),
            ..Default::default()
        };
        Core {
            net,
            cfg,
            data,
            queue,
            channel: Channel::new(),
            nodes,
            inflight: BTreeMap::new(),
            salt: seed,
            complete: 0,
            metrics,
        }
    }

    pub fn now(&self) -> SimTime {
        self.queue.now()
    }

    pub fn data_len(&self) -> usize {
        self.data.len()
    }

    pub fn take_trace(&mut self) -> Vec<String> {
        self.queue.take_trace()
    }

    pub fn is_complete(&self, n: NodeId) -> bool {
        self.nodes.get(&n).is_some_and(|s| s.data.is_some())
    }

    pub fn all_complete(&self) -> bool {
        self.complete == self.nodes.len()
    }

    pub fn rng(&mut self, n: NodeId) -> &mut SimRng {
        &mut self.nodes.get_mut(&n).expect("known node").rng_proto
    }

    /// Mean downlink quality to the node's children right now.
    pub fn mean_child_lq(&self, n: NodeId) -> Option<f64> {
        self.net.mean_child_lq_salted(n, self.now().as_ms(), self.salt).ok()
    }

    pub fn lq(&self, from: NodeId, to: NodeId) -> Option<f64> {
        self.net.lq_sample(from, to, self.now().as_ms(), self.salt).ok()
    }

    /// Backoff window for the node's next frame.
    pub fn window(&self, n: NodeId, lq_aware: bool) -> BackoffWindow {
        if lq_aware {
            if let Some(l) = self.mean_child_lq(n) {
                if let Ok(w) = select_window(l, &self.cfg.mac) {
                    return w;
                }
            }
        }
        self.cfg.mac.traditional_window()
    }

    /// Block-size selection features from the node's link history.
    pub fn features(&self, n: NodeId) -> FeatureVector {
        let st = &self.nodes[&n];
        let rank = self.net.rank_of(n).unwrap_or(1);
        let (pdr, rnp) = st.estimator.summary(self.net.children_of(n)).unwrap_or((1.0, 1.0));
        FeatureVector { rank, pdr, rnp }
    }

    pub fn max_rank(&self) -> u32 {
        self.net.max_rank()
    }

    /// Blocks `n` still needs to finish decoding `block_size` blocks, with a
    /// margin for coding inefficiency.
    pub fn blocks_needed(&self, n: NodeId, block_size: usize) -> u32 {
        let Ok(meta) = RoundMeta::new(self.data.len(), block_size) else {
            return 0;
        };
        let have = self.nodes[&n].decoders.get(&block_size).map_or(0, |d| d.rank());
        let target = meta.k + meta.k.div_ceil(10);
        target.saturating_sub(have).max(1) as u32
    }

    pub fn blocks_per_packet(&self, block_size: usize) -> usize {
        blocks_per_packet(self.cfg.payload_budget, block_size)
    }

    /// Next data frame from `n`'s encoder for `block_size`.
    pub fn data_frame(&mut self, n: NodeId, block_size: usize) -> Result<Frame, CodecError> {
        let budget = self.cfg.payload_budget;
        let per = blocks_per_packet(budget, block_size);
        let st = self.nodes.get_mut(&n).expect("known node");
        let data = st.data.as_ref().ok_or(CodecError::EmptyData)?;
        if !st.encoders.contains_key(&block_size) {
            let enc = Encoder::new(data, block_size, budget)?;
            let tag: u16 = st.rng_codec.gen();
            st.encoders.insert(block_size, (enc, tag));
        }
        let (enc, tag) = st.encoders.get_mut(&block_size).expect("just inserted");
        let mut blocks = Vec::with_capacity(per);
        for _ in 0..per {
            blocks.push(enc.block(*tag));
            *tag = tag.wrapping_add(1);
        }
        Ok(Frame::data(n, enc.meta(), blocks))
    }

    /// Opens a bulk-transfer session for `n`; data frames sent until
    /// [`Core::end_session`] are attributed to it.
    pub fn begin_session(&mut self, n: NodeId, block_size: usize) -> usize {
        let id = self.metrics.sessions.len();
        self.metrics.sessions.push(SenderSession {
            node: n,
            block_size,
            start: self.now(),
            end: None,
            packets: 0,
            service_time_us: 0,
        });
        self.nodes.get_mut(&n).expect("known node").session = Some(id);
        id
    }

    pub fn end_session(&mut self, n: NodeId) {
        let now = self.now();
        if let Some(id) = self.nodes.get_mut(&n).and_then(|s| s.session.take()) {
            self.metrics.sessions[id].end = Some(now);
        }
    }

    fn session_access_start(&self, n: NodeId) -> Option<SimTime> {
        match &self.nodes[&n].activity {
            Some(MacActivity::Backoff { pending, access_start, .. })
            | Some(MacActivity::Turnaround { pending, access_start, .. }) => {
                pending.frame.is_data().then_some(*access_start)
            }
            Some(MacActivity::OnAir) => self
                .inflight
                .values()
                .find(|f| f.record.sender == n && f.record.session.is_some())
                .map(|f| f.record.access_start),
            None => None,
        }
    }

    pub fn mac_idle(&self, n: NodeId) -> bool {
        let st = &self.nodes[&n];
        st.activity.is_none() && st.queue.is_empty()
    }

    pub fn queued(&self, n: NodeId) -> usize {
        let st = &self.nodes[&n];
        st.queue.len() + usize::from(st.activity.is_some())
    }

    /// Hands a frame to `n`'s MAC.
    pub fn send(&mut self, n: NodeId, frame: Frame, window: BackoffWindow) {
        self.nodes.get_mut(&n).expect("known node").queue.push_back(Pending { frame, window });
        self.start_access(n);
    }

    /// Fires [`Behavior::on_timer`] for `n` after `delay_ms`.
    pub fn set_timer(&mut self, n: NodeId, delay_ms: f64, timer: u64) {
        let at = self.now().plus_ms(delay_ms.max(0.0));
        self.queue.schedule(at, EventKind::TimerFire, n, Ev::Timer(timer)).expect("future timer");
    }

    fn start_access(&mut self, n: NodeId) {
        let now = self.now();
        let max = self.cfg.max_csma_attempts;
        let st = self.nodes.get_mut(&n).expect("known node");
        if st.activity.is_some() {
            return;
        }
        let Some(pending) = st.queue.pop_front() else {
            return;
        };
        let (proc, at) = CsmaProcess::start(now, pending.window, max, &mut st.rng_mac);
        st.activity = Some(MacActivity::Backoff { proc, pending, access_start: now });
        self.queue.schedule(at, EventKind::BackoffExpire, n, Ev::Backoff).expect("future backoff");
    }

    fn sensed_busy(&self, n: NodeId, t: SimTime) -> bool {
        match self.cfg.sensing {
            Sensing::Domain => self.channel.busy_for(self.net, n, t),
            Sensing::Neighbors => {
                self.channel.active_at(t).any(|tx| tx.sender != n && self.net.link(tx.sender, n).is_some())
            }
        }
    }

    fn mark_complete(&mut self, n: NodeId, data: Vec<u8>) {
        let now = self.now();
        let st = self.nodes.get_mut(&n).expect("known node");
        if st.data.is_some() {
            return;
        }
        debug_assert_eq!(data, self.data);
        st.data = Some(data);
        st.decoders.clear();
        self.complete += 1;
        if let Some(slot) = self.metrics.completion.iter_mut().find(|(m, _)| *m == n) {
            slot.1 = Some(now);
        }
    }

    fn on_backoff<B: Behavior>(&mut self, beh: &mut B, n: NodeId) {
        let now = self.now();
        let busy = self.sensed_busy(n, now);
        let turnaround = self.cfg.phy.turnaround_us;
        let st = self.nodes.get_mut(&n).expect("known node");
        let Some(MacActivity::Backoff { mut proc, pending, access_start }) = st.activity.take() else {
            return;
        };
        match proc.on_assessment(now, busy, &mut st.rng_mac) {
            CsmaStep::Transmit => {
                st.activity = Some(MacActivity::Turnaround { pending, access_start, proc });
                self.queue.schedule(now.plus_us(turnaround), EventKind::TxStart, n, Ev::TxStart).expect("future tx");
            }
            CsmaStep::Retry(at) => {
                st.activity = Some(MacActivity::Backoff { proc, pending, access_start });
                self.queue.schedule(at, EventKind::BackoffExpire, n, Ev::Backoff).expect("future backoff");
            }
            CsmaStep::Fail => {
                self.metrics.channel_access_failures += 1;
                beh.on_tx_done(self, n, &pending.frame, false);
                self.start_access(n);
            }
        }
    }

    fn on_tx_start(&mut self, n: NodeId) {
        let now = self.now();
        let st = self.nodes.get_mut(&n).expect("known node");
        let Some(MacActivity::Turnaround { pending, access_start, proc }) = st.activity.take() else {
            return;
        };
        let session = if pending.frame.is_data() { st.session } else { None };
        let end = now.plus_us(self.cfg.phy.airtime_us(pending.frame.payload_bytes()));
        let id = self.channel.begin(self.net, n, now, end);
        let sender_lq = self.net.mean_child_lq_salted(n, access_start.as_ms(), self.salt).ok();
        let record = PacketRecord {
            sender: n,
            kind: pending.frame.kind_name(),
            block_size: pending.frame.block_size(),
            session,
            access_start,
            tx_start: now,
            tx_end: end,
            backoff_ms: proc.backoff_ms,
            attempts: proc.attempts,
            sender_lq,
            collided: false,
        };
        self.nodes.get_mut(&n).expect("known node").activity = Some(MacActivity::OnAir);
        self.inflight.insert(id, InFlight { frame: pending.frame, record });
        self.queue.schedule(end, EventKind::TxEnd, n, Ev::TxEnd(id)).expect("future end");
    }

    fn on_tx_end<B: Behavior>(&mut self, beh: &mut B, n: NodeId, id: u64) {
        let Some(ended) = self.channel.end(id) else {
            return;
        };
        let InFlight { frame, mut record } = self.inflight.remove(&id).expect("in flight");
        record.collided = ended.collided();
        if let Some(s) = record.session {
            let sess = &mut self.metrics.sessions[s];
            sess.packets += 1;
            sess.service_time_us += record.service_time_us();
        }
        let t_ms = ended.tx.start.as_ms();
        let header = self.cfg.phy.header_bytes;
        let model = self.cfg.error_model;
        let frame_bytes = frame.payload_bytes() + header;
        let net = self.net;
        let receivers: Vec<NodeId> = net.receivers_of(n).collect();
        let children = net.children_of(n);
        let mut heard = Vec::new();
        let mut completed = Vec::new();
        for r in receivers {
            let audible = self.channel.receivable(&ended, net, r);
            let lq = net.lq_sample(n, r, t_ms, self.salt).unwrap_or(0.0);
            let st = self.nodes.get_mut(&r).expect("known node");
            let delivered = audible && st.rng_chan.gen_bool(model.success_prob(lq, frame_bytes));
            if children.contains(&r) && frame.is_data() {
                self.nodes.get_mut(&n).expect("known node").estimator.record(r, delivered);
            }
            if !audible {
                continue;
            }
            let st = self.nodes.get_mut(&r).expect("known node");
            match &frame.body {
                FrameBody::Data { meta, blocks } => {
                    let header_ok = st.rng_chan.gen_bool(model.success_prob(lq, header));
                    let p_block = model.success_prob(lq, meta.block_size);
                    let survived: Vec<bool> = blocks.iter().map(|_| st.rng_chan.gen_bool(p_block)).collect();
                    if st.data.is_none() {
                        let dec = st.decoders.entry(meta.block_size).or_insert_with(|| DecoderState::new(*meta));
                        for (b, ok) in blocks.iter().zip(survived) {
                            if ok {
                                if let IngestOutcome::Accepted { .. } = dec.ingest(b) {
                                    if dec.is_complete() {
                                        break;
                                    }
                                }
                            }
                        }
                        if dec.is_complete() {
                            let data = dec.decoded_data().expect("complete");
                            completed.push((r, data));
                        }
                    }
                    if header_ok {
                        heard.push(r);
                    }
                }
                FrameBody::Control(_) => {
                    if delivered {
                        heard.push(r);
                    }
                }
            }
        }
        self.metrics.packets.push(record);
        self.nodes.get_mut(&n).expect("known node").activity = None;
        let mut done = Vec::new();
        for (r, data) in completed {
            self.mark_complete(r, data);
            done.push(r);
        }
        for r in heard {
            beh.on_receive(self, r, &frame);
        }
        for r in done {
            beh.on_complete(self, r);
        }
        beh.on_tx_done(self, n, &frame, true);
        self.start_access(n);
    }

    /// Runs `beh` to completion (or timeout) and returns the metrics.
    pub fn run<B: Behavior>(mut self, beh: &mut B) -> (RunMetrics, Vec<String>) {
        let origin = NodeId::ROOT;
        let data = self.data.clone();
        self.mark_complete(origin, data.clone());
        for n in self.cfg.preloaded.clone() {
            self.mark_complete(n, data.clone());
        }
        beh.start(&mut self);
        let timeout = self.cfg.timeout;
        loop {
            if self.cfg.stop_when_complete && self.all_complete() {
                break;
            }
            match self.queue.peek_time() {
                None => break,
                Some(t) if t > timeout => {
                    self.metrics.timed_out = true;
                    break;
                }
                _ => {}
            }
            let ev = self.queue.pop().expect("peeked");
            match ev.payload {
                Ev::Backoff => self.on_backoff(beh, ev.node),
                Ev::TxStart => self.on_tx_start(ev.node),
                Ev::TxEnd(id) => self.on_tx_end(beh, ev.node, id),
                Ev::Timer(t) => beh.on_timer(&mut self, ev.node, t),
            }
        }
        let now = self.now();
        let open: Vec<NodeId> = self.nodes.iter().filter(|(_, s)| s.session.is_some()).map(|(&n, _)| n).collect();
        for n in open {
            // A data frame still in its access procedure when the run stops
            // has served the session up to now.
            if let Some(start) = self.session_access_start(n) {
                let id = self.nodes[&n].session.expect("open session");
                self.metrics.sessions[id].service_time_us += now.0 - start.0;
            }
            self.end_session(n);
        }
        self.metrics.end_time = if self.metrics.timed_out { timeout.max(now) } else { now };
        let trace = self.queue.take_trace();
        (self.metrics, trace)
    }
}
