//! Nodes, the static rank-annotated dissemination tree, collision domains
//! and time-varying link quality.
//!
//! A [`Network`] is immutable once loaded and can be shared read-only by
//! any number of concurrent simulation runs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::rng::{derive_seed, unit_f64};

/// Node identifier. Node 0 is always the root (base station).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u16);

impl NodeId {
    pub const ROOT: NodeId = NodeId(0);

    pub fn is_root(self) -> bool {
        self == Self::ROOT
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TopologyError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("cycle detected at node {0}")]
    Cycle(NodeId),
    #[error("node {0} has no parent")]
    Orphan(NodeId),
    #[error("root node 0 cannot have a parent")]
    RootHasParent,
    #[error("network has no root node 0")]
    MissingRoot,
    #[error("node {0} has more than one parent")]
    MultipleParents(NodeId),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("duplicate node {0}")]
    DuplicateNode(NodeId),
    #[error("collision domain {0} has fewer than 2 members")]
    SmallDomain(usize),
    #[error("missing link {0} -> {1}")]
    UnknownLink(NodeId, NodeId),
    #[error("node {0} has no children")]
    Leaf(NodeId),
    #[error("invalid trace: {0}")]
    Trace(String),
    #[error("{0}")]
    Io(String),
}

/// One piece of a piecewise-constant delivery probability trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start_ms: f64,
    pub delivery_prob: f64,
}

/// Time-indexed delivery probability of one directed link.
///
/// `at_ms(t)` returns the probability of the last segment starting at or
/// before `t`. With a non-zero `jitter` amplitude, each `jitter_period_ms`
/// slot gets uniform noise in `[-jitter, jitter]` drawn from a hash of the
/// seed offset, the caller's salt and the slot index, then clamped to
/// `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkQualityTrace {
    segments: Vec<Segment>,
    pub seed_offset: u64,
    pub jitter: f64,
    pub jitter_period_ms: f64,
}

impl LinkQualityTrace {
    pub fn new(segments: Vec<Segment>) -> Result<Self, TopologyError> {
        match segments.first() {
            None => return Err(TopologyError::Trace("trace has no segments".into())),
            Some(s) if s.start_ms != 0.0 => return Err(TopologyError::Trace("first segment must start at 0".into())),
            _ => {}
        }
        for w in segments.windows(2) {
            if w[1].start_ms <= w[0].start_ms {
                return Err(TopologyError::Trace("segment start times must be strictly increasing".into()));
            }
        }
        if let Some(s) = segments.iter().find(|s| !(0.0..=1.0).contains(&s.delivery_prob)) {
            return Err(TopologyError::Trace(format!("delivery probability {} outside [0, 1]", s.delivery_prob)));
        }
        Ok(LinkQualityTrace { segments, seed_offset: 0, jitter: 0.0, jitter_period_ms: 1000.0 })
    }

    pub fn constant(p: f64) -> Self {
        Self::new(vec![Segment { start_ms: 0.0, delivery_prob: p }]).expect("valid constant trace")
    }

    pub fn with_jitter(mut self, amplitude: f64, period_ms: f64, seed_offset: u64) -> Self {
        self.jitter = amplitude.max(0.0);
        self.jitter_period_ms = period_ms.max(1.0);
        self.seed_offset = seed_offset;
        self
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    fn segment_index(&self, t_ms: f64) -> usize {
        self.segments.partition_point(|s| s.start_ms <= t_ms).saturating_sub(1)
    }

    /// Delivery probability at `t_ms` without a salt.
    pub fn at_ms(&self, t_ms: f64) -> f64 {
        self.sample(t_ms, 0)
    }

    /// Delivery probability at `t_ms`; `salt` selects an independent jitter
    /// realisation (campaigns pass the round seed).
    pub fn sample(&self, t_ms: f64, salt: u64) -> f64 {
        let idx = self.segment_index(t_ms);
        let base = self.segments[idx].delivery_prob;
        if self.jitter == 0.0 {
            return base;
        }
        let slot = (t_ms / self.jitter_period_ms).floor().max(0.0) as u64;
        let u = unit_f64(derive_seed(self.seed_offset ^ salt, &[idx as u64, slot]));
        (base + self.jitter * (2.0 * u - 1.0)).clamp(0.0, 1.0)
    }
}

/// Parses `[(t_ms, p), ...]`.
pub fn parse_trace(text: &str) -> Result<LinkQualityTrace, TopologyError> {
    let bad = |m: &str| TopologyError::Trace(format!("{m} in {text:?}"));
    let body = text.trim().strip_prefix('[').and_then(|s| s.strip_suffix(']')).ok_or_else(|| bad("expected [...]"))?;
    let mut segments = Vec::new();
    let mut rest = body.trim();
    while !rest.is_empty() {
        let open = rest.strip_prefix('(').ok_or_else(|| bad("expected '('"))?;
        let close = open.find(')').ok_or_else(|| bad("unclosed '('"))?;
        let mut parts = open[..close].split(',');
        let (t, p) = match (parts.next(), parts.next(), parts.next()) {
            (Some(t), Some(p), None) => (t.trim(), p.trim()),
            _ => return Err(bad("expected (t_ms, p)")),
        };
        let start_ms: f64 = t.parse().map_err(|_| bad("bad time"))?;
        let delivery_prob: f64 = p.parse().map_err(|_| bad("bad probability"))?;
        segments.push(Segment { start_ms, delivery_prob });
        rest = open[close + 1..].trim_start();
        if let Some(r) = rest.strip_prefix(',') {
            rest = r.trim_start();
        }
    }
    LinkQualityTrace::new(segments)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CollisionDomain {
    pub members: BTreeSet<NodeId>,
}

impl CollisionDomain {
    pub fn contains(&self, n: NodeId) -> bool {
        self.members.contains(&n)
    }
}

#[derive(Debug, Clone)]
pub struct Network {
    nodes: Vec<NodeId>,
    parent: BTreeMap<NodeId, NodeId>,
    children: BTreeMap<NodeId, Vec<NodeId>>,
    rank: BTreeMap<NodeId, u32>,
    domains: Vec<CollisionDomain>,
    /// Domain indices per node.
    membership: BTreeMap<NodeId, Vec<usize>>,
    links: BTreeMap<(NodeId, NodeId), LinkQualityTrace>,
}

/// Builder used by the config loader and by tests.
#[derive(Debug, Default, Clone)]
pub struct NetworkBuilder {
    nodes: Vec<NodeId>,
    edges: Vec<(NodeId, NodeId, LinkQualityTrace, LinkQualityTrace)>,
    extra_links: Vec<(NodeId, NodeId, LinkQualityTrace)>,
    domains: Vec<Vec<NodeId>>,
}

impl NetworkBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn nodes(mut self, count: u16) -> Self {
        self.nodes = (0..count).map(NodeId).collect();
        self
    }

    pub fn node_ids(mut self, ids: impl IntoIterator<Item = u16>) -> Self {
        self.nodes = ids.into_iter().map(NodeId).collect();
        self
    }

    /// Tree edge with the same trace in both directions.
    pub fn edge(self, parent: u16, child: u16, trace: LinkQualityTrace) -> Self {
        let up = trace.clone();
        self.edge_asym(parent, child, trace, up)
    }

    pub fn edge_asym(mut self, parent: u16, child: u16, down: LinkQualityTrace, up: LinkQualityTrace) -> Self {
        self.edges.push((NodeId(parent), NodeId(child), down, up));
        self
    }

    /// Additional directed non-tree link (overhearing between branches).
    pub fn link(mut self, from: u16, to: u16, trace: LinkQualityTrace) -> Self {
        self.extra_links.push((NodeId(from), NodeId(to), trace));
        self
    }

    pub fn domain(mut self, members: impl IntoIterator<Item = u16>) -> Self {
        self.domains.push(members.into_iter().map(NodeId).collect());
        self
    }

    pub fn build(self) -> Result<Network, TopologyError> {
        let mut seen = BTreeSet::new();
        for &n in &self.nodes {
            if !seen.insert(n) {
                return Err(TopologyError::DuplicateNode(n));
            }
        }
        if !seen.contains(&NodeId::ROOT) {
            return Err(TopologyError::MissingRoot);
        }
        let known = |n: NodeId| {
            if seen.contains(&n) {
                Ok(())
            } else {
                Err(TopologyError::UnknownNode(n))
            }
        };

        let mut parent = BTreeMap::new();
        let mut links = BTreeMap::new();
        for (p, c, down, up) in self.edges {
            known(p)?;
            known(c)?;
            if c.is_root() {
                return Err(TopologyError::RootHasParent);
            }
            if parent.insert(c, p).is_some() {
                return Err(TopologyError::MultipleParents(c));
            }
            links.insert((p, c), down);
            links.insert((c, p), up);
        }
        for (a, b, t) in self.extra_links {
            known(a)?;
            known(b)?;
            links.entry((a, b)).or_insert(t);
        }

        let mut nodes: Vec<NodeId> = seen.iter().copied().collect();
        nodes.sort();

        // Walk every node to the root; a walk longer than |nodes| is a cycle.
        let mut rank = BTreeMap::new();
        rank.insert(NodeId::ROOT, 1u32);
        for &n in &nodes {
            if n.is_root() {
                continue;
            }
            let mut cur = n;
            let mut hops = 0u32;
            while !cur.is_root() {
                cur = *parent.get(&cur).ok_or(TopologyError::Orphan(cur))?;
                hops += 1;
                if cur == n || hops as usize > nodes.len() {
                    return Err(TopologyError::Cycle(n));
                }
            }
            rank.insert(n, hops + 1);
        }

        let mut children: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        for (&c, &p) in &parent {
            children.entry(p).or_default().push(c);
        }

        let mut domains = Vec::new();
        let mut membership: BTreeMap<NodeId, Vec<usize>> = BTreeMap::new();
        for (i, members) in self.domains.into_iter().enumerate() {
            let set: BTreeSet<NodeId> = members.into_iter().collect();
            if set.len() < 2 {
                return Err(TopologyError::SmallDomain(i));
            }
            for &m in &set {
                known(m)?;
                membership.entry(m).or_default().push(i);
            }
            domains.push(CollisionDomain { members: set });
        }

        Ok(Network { nodes, parent, children, rank, domains, membership, links })
    }
}

// ---------------------------------------------------------------------------
// Config file format (TOML).

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    nodes: RawNodes,
    #[serde(default)]
    defaults: RawDefaults,
    #[serde(default)]
    edges: Vec<RawEdge>,
    #[serde(default)]
    links: Vec<RawLink>,
    #[serde(default)]
    collision_domains: Vec<RawDomain>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNodes {
    count: Option<u16>,
    ids: Option<Vec<u16>>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawDefaults {
    jitter: Option<f64>,
    jitter_period_ms: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEdge {
    parent: u16,
    child: u16,
    trace: toml::Spanned<String>,
    up_trace: Option<toml::Spanned<String>>,
    jitter: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLink {
    from: u16,
    to: u16,
    trace: toml::Spanned<String>,
    jitter: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDomain {
    members: Vec<u16>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl Network {
    pub fn builder() -> NetworkBuilder {
        NetworkBuilder::new()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Network, TopologyError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| TopologyError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Network, TopologyError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| TopologyError::Parse {
            line: e.span().map(|s| line_of(text, s.start)).unwrap_or(1),
            message: e.message().to_string(),
        })?;
        let period = raw.defaults.jitter_period_ms.unwrap_or(1000.0);
        let default_jitter = raw.defaults.jitter.unwrap_or(0.0);
        let trace_at = |s: &toml::Spanned<String>, jitter: Option<f64>, salt: u64| {
            parse_trace(s.get_ref())
                .map(|t| t.with_jitter(jitter.unwrap_or(default_jitter), period, salt))
                .map_err(|e| TopologyError::Parse { line: line_of(text, s.span().start), message: e.to_string() })
        };

        let mut b = NetworkBuilder::new();
        b = match (raw.nodes.count, raw.nodes.ids) {
            (Some(c), None) => b.nodes(c),
            (None, Some(ids)) => b.node_ids(ids),
            _ => {
                return Err(TopologyError::Parse {
                    line: 1,
                    message: "[nodes] needs exactly one of `count` or `ids`".into(),
                })
            }
        };
        for e in &raw.edges {
            let salt = ((e.parent as u64) << 16) | e.child as u64;
            let down = trace_at(&e.trace, e.jitter, salt)?;
            let up = match &e.up_trace {
                Some(u) => trace_at(u, e.jitter, salt ^ 0xFFFF_0000_0000)?,
                None => down.clone().with_jitter(down.jitter, period, salt ^ 0xFFFF_0000_0000),
            };
            b = b.edge_asym(e.parent, e.child, down, up);
        }
        for l in &raw.links {
            let salt = 0xA5A5_0000_0000 | ((l.from as u64) << 16) | l.to as u64;
            b = b.link(l.from, l.to, trace_at(&l.trace, l.jitter, salt)?);
        }
        for d in raw.collision_domains {
            b = b.domain(d.members);
        }
        b.build()
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, n: NodeId) -> bool {
        self.rank.contains_key(&n)
    }

    pub fn parent_of(&self, n: NodeId) -> Option<NodeId> {
        self.parent.get(&n).copied()
    }

    pub fn children_of(&self, n: NodeId) -> &[NodeId] {
        self.children.get(&n).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn is_leaf(&self, n: NodeId) -> bool {
        self.children_of(n).is_empty()
    }

    pub fn rank_of(&self, n: NodeId) -> Option<u32> {
        self.rank.get(&n).copied()
    }

    pub fn max_rank(&self) -> u32 {
        self.rank.values().copied().max().unwrap_or(1)
    }

    pub fn collision_domains(&self) -> &[CollisionDomain] {
        &self.domains
    }

    /// Indices of the collision domains `n` belongs to.
    pub fn domains_of(&self, n: NodeId) -> &[usize] {
        self.membership.get(&n).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn share_domain(&self, a: NodeId, b: NodeId) -> bool {
        let db = self.domains_of(b);
        self.domains_of(a).iter().any(|d| db.contains(d))
    }

    pub fn link(&self, from: NodeId, to: NodeId) -> Option<&LinkQualityTrace> {
        self.links.get(&(from, to))
    }

    /// Receivers that have a link from `sender`, in id order.
    pub fn receivers_of(&self, sender: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.links.range((sender, NodeId(0))..=(sender, NodeId(u16::MAX))).map(|(&(_, r), _)| r)
    }

    pub fn lq_at(&self, sender: NodeId, receiver: NodeId, t_ms: f64) -> Result<f64, TopologyError> {
        self.lq_sample(sender, receiver, t_ms, 0)
    }

    pub fn lq_sample(&self, sender: NodeId, receiver: NodeId, t_ms: f64, salt: u64) -> Result<f64, TopologyError> {
        self.link(sender, receiver).map(|t| t.sample(t_ms, salt)).ok_or(TopologyError::UnknownLink(sender, receiver))
    }

    /// Mean downlink quality from `sender` to its children.
    pub fn mean_child_lq(&self, sender: NodeId, t_ms: f64) -> Result<f64, TopologyError> {
        self.mean_child_lq_salted(sender, t_ms, 0)
    }

    pub fn mean_child_lq_salted(&self, sender: NodeId, t_ms: f64, salt: u64) -> Result<f64, TopologyError> {
        let kids = self.children_of(sender);
        if kids.is_empty() {
            return Err(TopologyError::Leaf(sender));
        }
        let mut sum = 0.0;
        for &c in kids {
            sum += self.lq_sample(sender, c, t_ms, salt)?;
        }
        Ok(sum / kids.len() as f64)
    }
}
