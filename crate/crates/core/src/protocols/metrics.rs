use crate::simkernel::SimTime;
use crate::topology::NodeId;

/// One transmitted frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PacketRecord {
    pub sender: NodeId,
    /// `"data"`, `"beacon"`, `"adv"`, `"req"` or `"reply"`.
    pub kind: &'static str,
    pub block_size: Option<usize>,
    /// Index into [`RunMetrics::sessions`] for data frames.
    pub session: Option<usize>,
    /// When the MAC began channel access for this frame.
    pub access_start: SimTime,
    pub tx_start: SimTime,
    pub tx_end: SimTime,
    /// Total backoff drawn before the frame went on air, ms.
    pub backoff_ms: u64,
    pub attempts: u32,
    /// Sender's mean downlink quality to its children at access start
    /// (`None` for leaves).
    pub sender_lq: Option<f64>,
    pub collided: bool,
}

impl PacketRecord {
    /// Service time: channel access plus airtime, in microseconds.
    pub fn service_time_us(&self) -> u64 {
        self.tx_end.0 - self.access_start.0
    }
}

/// One sender's contiguous bulk transfer of the object.
#[derive(Debug, Clone, PartialEq)]
pub struct SenderSession {
    pub node: NodeId,
    pub block_size: usize,
    pub start: SimTime,
    pub end: Option<SimTime>,
    pub packets: usize,
    /// Sum of the session's per-packet service times, us.
    pub service_time_us: u64,
}

impl SenderSession {
    pub fn duration_us(&self) -> Option<u64> {
        self.end.map(|e| e.0 - self.start.0)
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunMetrics {
    pub data_len: usize,
    /// Nodes other than the origin.
    pub receivers: usize,
    /// Decode completion time per node (origin at zero).
    pub completion: Vec<(NodeId, Option<SimTime>)>,
    pub packets: Vec<PacketRecord>,
    pub sessions: Vec<SenderSession>,
    pub channel_access_failures: usize,
    pub timed_out: bool,
    /// Simulation clock when the run stopped.
    pub end_time: SimTime,
}

impl RunMetrics {
    pub fn completed_receivers(&self) -> usize {
        self.completion.iter().filter(|(n, t)| !n.is_root() && t.is_some()).count()
    }

    pub fn all_complete(&self) -> bool {
        self.completion.iter().all(|(_, t)| t.is_some())
    }

    /// Time the last node finished decoding; the stop time when some never did.
    pub fn completion_time(&self) -> SimTime {
        if self.all_complete() {
            self.completion.iter().filter_map(|(_, t)| *t).max().unwrap_or(SimTime::ZERO)
        } else {
            self.end_time
        }
    }

    /// Decoded object bits delivered to receivers.
    pub fn useful_bits(&self) -> u64 {
        (self.completed_receivers() * self.data_len * 8) as u64
    }

    /// Useful bits per second of completion time.
    pub fn goodput_bps(&self) -> f64 {
        let t = self.completion_time().as_secs();
        if t <= 0.0 {
            0.0
        } else {
            self.useful_bits() as f64 / t
        }
    }

    pub fn data_packets(&self) -> usize {
        self.packets.iter().filter(|p| p.kind == "data").count()
    }

    pub fn control_packets(&self) -> usize {
        self.packets.len() - self.data_packets()
    }

    pub fn collided_packets(&self) -> usize {
        self.packets.iter().filter(|p| p.collided).count()
    }

    /// For every session, the smallest start-time gap to another session
    /// whose sender shares a collision domain (ms).
    pub fn session_gaps_ms(&self, share: impl Fn(NodeId, NodeId) -> bool) -> Vec<Option<f64>> {
        self.sessions
            .iter()
            .map(|a| {
                self.sessions
                    .iter()
                    .filter(|b| b.node != a.node && share(a.node, b.node))
                    .map(|b| (a.start.as_ms() - b.start.as_ms()).abs())
                    .min_by(f64::total_cmp)
            })
            .collect()
    }
}
