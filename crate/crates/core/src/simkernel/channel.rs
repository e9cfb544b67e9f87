use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use super::SimTime;
use crate::topology::{CollisionDomain, Network, NodeId};

/// Radio timing. Defaults follow an IEEE 802.15.4 O-QPSK PHY.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhyConfig {
    pub bitrate_bps: u64,
    /// Per-frame PHY + MAC header bytes (on air, never counted as goodput).
    pub header_bytes: usize,
    /// Delay between a clear channel assessment and the first bit on air.
    pub turnaround_us: u64,
}

impl Default for PhyConfig {
    fn default() -> Self {
        PhyConfig { bitrate_bps: 250_000, header_bytes: 12, turnaround_us: 192 }
    }
}

impl PhyConfig {
    pub fn airtime_us(&self, payload_bytes: usize) -> u64 {
        let bits = ((payload_bytes + self.header_bytes) * 8) as u64;
        (bits * 1_000_000).div_ceil(self.bitrate_bps).max(1)
    }
}

/// How a link's delivery probability turns into per-block survival.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlockErrorModel {
    /// Every block survives with probability `lq` whatever its length.
    PerBlock,
    /// `lq` is the survival probability of `reference_bytes` contiguous
    /// bytes; a block of `n` bytes survives with `lq^(n / reference_bytes)`
    /// (independent byte errors).
    PerByte { reference_bytes: f64 },
}

impl Default for BlockErrorModel {
    fn default() -> Self {
        BlockErrorModel::PerByte { reference_bytes: 100.0 }
    }
}

impl BlockErrorModel {
    pub fn success_prob(&self, lq: f64, bytes: usize) -> f64 {
        let lq = lq.clamp(0.0, 1.0);
        match *self {
            BlockErrorModel::PerBlock => lq,
            BlockErrorModel::PerByte { reference_bytes } => {
                if lq == 0.0 {
                    0.0
                } else {
                    lq.powf(bytes as f64 / reference_bytes)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transmission {
    pub id: u64,
    pub sender: NodeId,
    pub start: SimTime,
    pub end: SimTime,
    /// Collision domains the sender belongs to.
    pub domains: Vec<usize>,
}

impl Transmission {
    pub fn overlaps(&self, other: &Transmission) -> bool {
        self.start < other.end && other.start < self.end
    }

    fn shared_domains(&self, other: &Transmission) -> Vec<usize> {
        self.domains.iter().copied().filter(|d| other.domains.contains(d)).collect()
    }
}

/// Pairwise collision flags: two transmissions collide iff their
/// `[start, end)` intervals intersect and they share a collision domain.
pub fn detect_collisions(active: &[Transmission], domains: &[CollisionDomain]) -> Vec<bool> {
    let share =
        |a: &Transmission, b: &Transmission| domains.iter().any(|d| d.contains(a.sender) && d.contains(b.sender));
    let mut flags = vec![false; active.len()];
    for i in 0..active.len() {
        for j in i + 1..active.len() {
            if active[i].overlaps(&active[j]) && share(&active[i], &active[j]) {
                flags[i] = true;
                flags[j] = true;
            }
        }
    }
    flags
}

/// A transmission that has left the air, with the domains in which it was
/// overlapped by another sender.
#[derive(Debug, Clone)]
pub struct EndedTx {
    pub tx: Transmission,
    pub collided_domains: BTreeSet<usize>,
}

impl EndedTx {
    pub fn collided(&self) -> bool {
        !self.collided_domains.is_empty()
    }
}

/// Shared-medium state: what is on air, who collided, who is deaf.
#[derive(Debug, Default)]
pub struct Channel {
    active: BTreeMap<u64, (Transmission, BTreeSet<usize>)>,
    /// Recent transmit intervals per node, for half-duplex checks.
    recent: BTreeMap<NodeId, Vec<(SimTime, SimTime)>>,
    next_id: u64,
}

impl Channel {
    pub fn new() -> Self {
        Self::default()
    }

    /// Puts a transmission on air, flagging collisions with everything
    /// already on air in a shared domain.
    pub fn begin(&mut self, net: &Network, sender: NodeId, start: SimTime, end: SimTime) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        let tx = Transmission { id, sender, start, end, domains: net.domains_of(sender).to_vec() };
        let mut mine = BTreeSet::new();
        for (other, flags) in self.active.values_mut() {
            if !other.overlaps(&tx) {
                continue;
            }
            let shared = other.shared_domains(&tx);
            if !shared.is_empty() {
                flags.extend(shared.iter().copied());
                mine.extend(shared);
            }
        }
        let hist = self.recent.entry(sender).or_default();
        hist.retain(|&(_, e)| e.0 + 50_000 > start.0);
        hist.push((start, end));
        self.active.insert(id, (tx, mine));
        id
    }

    pub fn end(&mut self, id: u64) -> Option<EndedTx> {
        self.active.remove(&id).map(|(tx, collided_domains)| EndedTx { tx, collided_domains })
    }

    /// Carrier sense: is any transmission from a node sharing a collision
    /// domain with `node` on air at `t`?
    pub fn busy_for(&self, net: &Network, node: NodeId, t: SimTime) -> bool {
        self.active
            .values()
            .any(|(tx, _)| tx.sender != node && tx.start <= t && t < tx.end && net.share_domain(tx.sender, node))
    }

    /// Transmissions on air at `t`.
    pub fn active_at(&self, t: SimTime) -> impl Iterator<Item = &Transmission> + '_ {
        self.active.values().map(|(tx, _)| tx).filter(move |tx| tx.start <= t && t < tx.end)
    }

    pub fn on_air(&self) -> usize {
        self.active.len()
    }

    /// Was `node` transmitting at any point during `[start, end)`?
    pub fn was_transmitting(&self, node: NodeId, start: SimTime, end: SimTime) -> bool {
        self.recent.get(&node).map(|h| h.iter().any(|&(s, e)| s < end && start < e)).unwrap_or(false)
    }

    /// Can `receiver` hear `ended` at all? False when the receiver sits in a
    /// domain where the transmission collided, or was itself transmitting.
    pub fn receivable(&self, ended: &EndedTx, net: &Network, receiver: NodeId) -> bool {
        if receiver == ended.tx.sender {
            return false;
        }
        let in_collided = net.domains_of(receiver).iter().any(|d| ended.collided_domains.contains(d));
        !in_collided && !self.was_transmitting(receiver, ended.tx.start, ended.tx.end)
    }
}

/// Independent per-block survival draws for one receiver.
pub fn deliver_blocks<R: Rng + ?Sized>(
    lq: f64,
    n_blocks: usize,
    block_bytes: usize,
    model: BlockErrorModel,
    rng: &mut R,
) -> Vec<bool> {
    let p = model.success_prob(lq, block_bytes);
    (0..n_blocks).map(|_| rng.gen_bool(p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Purpose;
    use crate::rng::RngStreams;
    use crate::topology::LinkQualityTrace;

    fn tx(id: u64, sender: u16, s_ms: f64, e_ms: f64, domains: Vec<usize>) -> Transmission {
        Transmission { id, sender: NodeId(sender), start: SimTime::from_ms(s_ms), end: SimTime::from_ms(e_ms), domains }
    }

    fn domains(sets: &[&[u16]]) -> Vec<CollisionDomain> {
        sets.iter().map(|s| CollisionDomain { members: s.iter().map(|&n| NodeId(n)).collect() }).collect()
    }

    /// Brute-force oracle: interval intersection over every pair.
    fn oracle(active: &[Transmission], doms: &[CollisionDomain]) -> Vec<bool> {
        active
            .iter()
            .map(|a| {
                active.iter().any(|b| {
                    a.id != b.id
                        && a.start.0.max(b.start.0) < a.end.0.min(b.end.0)
                        && doms.iter().any(|d| d.contains(a.sender) && d.contains(b.sender))
                })
            })
            .collect()
    }

    #[test]
    fn touching_intervals_do_not_collide() {
        let d = domains(&[&[1, 2]]);
        let a = [tx(0, 1, 0.0, 5.0, vec![0]), tx(1, 2, 5.0, 10.0, vec![0])];
        assert_eq!(detect_collisions(&a, &d), vec![false, false]);
    }

    #[test]
    fn overlapping_same_domain_collide() {
        let d = domains(&[&[1, 2]]);
        let a = [tx(0, 1, 0.0, 5.0, vec![0]), tx(1, 2, 3.0, 8.0, vec![0])];
        assert_eq!(detect_collisions(&a, &d), oracle(&a, &d));
        assert_eq!(detect_collisions(&a, &d), vec![true, true]);
    }

    #[test]
    fn disjoint_domains_reuse_space() {
        let d = domains(&[&[1, 3], &[2, 4]]);
        let a = [tx(0, 1, 0.0, 5.0, vec![0]), tx(1, 2, 3.0, 8.0, vec![1])];
        assert_eq!(detect_collisions(&a, &d), vec![false, false]);
    }

    #[test]
    fn random_layouts_match_oracle_and_are_symmetric() {
        use rand::Rng;
        let mut rng = RngStreams::new(5).global(Purpose::Channel, 0);
        let d = domains(&[&[0, 1, 2], &[2, 3, 4], &[4, 5, 0]]);
        for _ in 0..200 {
            let n = rng.gen_range(2..8);
            let a: Vec<Transmission> = (0..n)
                .map(|i| {
                    let s = rng.gen_range(0.0..20.0);
                    tx(i, rng.gen_range(0..6), s, s + rng.gen_range(0.5..6.0), vec![])
                })
                .collect();
            assert_eq!(detect_collisions(&a, &d), oracle(&a, &d));
        }
    }

    #[test]
    fn channel_marks_both_sides_and_senses_busy() {
        let net = Network::builder()
            .nodes(4)
            .edge(0, 1, LinkQualityTrace::constant(1.0))
            .edge(0, 2, LinkQualityTrace::constant(1.0))
            .edge(0, 3, LinkQualityTrace::constant(1.0))
            .domain([1, 2])
            .build()
            .unwrap();
        let mut ch = Channel::new();
        let a = ch.begin(&net, NodeId(1), SimTime(0), SimTime(5000));
        assert!(ch.busy_for(&net, NodeId(2), SimTime(100)));
        assert!(!ch.busy_for(&net, NodeId(3), SimTime(100)));
        let b = ch.begin(&net, NodeId(2), SimTime(3000), SimTime(8000));
        let ea = ch.end(a).unwrap();
        let eb = ch.end(b).unwrap();
        assert!(ea.collided() && eb.collided());
        assert!(!ch.receivable(&ea, &net, NodeId(2)));
    }

    #[test]
    fn perfect_and_dead_links() {
        let mut rng = RngStreams::new(1).global(Purpose::Channel, 1);
        let m = BlockErrorModel::PerBlock;
        assert!(deliver_blocks(1.0, 10, 16, m, &mut rng).iter().all(|&b| b));
        assert!(deliver_blocks(0.0, 10, 16, m, &mut rng).iter().all(|&b| !b));
        let p = BlockErrorModel::default();
        assert!(deliver_blocks(0.0, 10, 16, p, &mut rng).iter().all(|&b| !b));
    }

    #[test]
    fn half_link_binomial_interval() {
        // Binomial(1000, 0.5): sd = 15.8; 99.9% two-sided ~ +-52.
        let mut rng = RngStreams::new(2024).global(Purpose::Channel, 2);
        let n = deliver_blocks(0.5, 1000, 16, BlockErrorModel::PerBlock, &mut rng).iter().filter(|&&b| b).count();
        assert!((450..=550).contains(&n), "{n}");
    }

    #[test]
    fn consecutive_blocks_are_independent() {
        // 2x2 chi-square on (block i, block i+1) outcomes; 1 dof, alpha 0.01.
        let mut rng = RngStreams::new(77).global(Purpose::Channel, 3);
        let draws = deliver_blocks(0.6, 40_001, 16, BlockErrorModel::PerBlock, &mut rng);
        let mut table = [[0f64; 2]; 2];
        for w in draws.windows(2) {
            table[w[0] as usize][w[1] as usize] += 1.0;
        }
        let n: f64 = table.iter().flatten().sum();
        let mut chi2 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let row: f64 = table[i].iter().sum();
                let col = table[0][j] + table[1][j];
                let expect = row * col / n;
                chi2 += (table[i][j] - expect).powi(2) / expect;
            }
        }
        assert!(chi2 < 6.635, "chi2 = {chi2}");
    }

    #[test]
    fn per_byte_model_penalises_long_blocks() {
        let m = BlockErrorModel::PerByte { reference_bytes: 100.0 };
        assert!((m.success_prob(0.5, 100) - 0.5).abs() < 1e-12);
        assert!(m.success_prob(0.5, 19) > m.success_prob(0.5, 67));
        assert_eq!(m.success_prob(1.0, 67), 1.0);
    }

    #[test]
    fn airtime_at_250kbps() {
        let phy = PhyConfig::default();
        // (100 + 12) bytes * 8 bits / 250 kbit/s = 3584 us
        assert_eq!(phy.airtime_us(100), 3584);
    }
}
