mod common;

use std::sync::Arc;

use rand::{Rng, SeedableRng};

use common::*;
use edrp_core::mlbss::OrdinalTreeModel;
use edrp_core::protocols::{
    run_protocol, Core, Deluge, DelugeConfig, Drp, DrpConfig, Election, EngineConfig, Mnp, MnpConfig, ProtocolKind,
    ProtocolParams,
};
use edrp_core::rng::{derive_seed, SimRng};
use edrp_core::simkernel::SimTime;
use edrp_core::topology::LinkQualityTrace;
use edrp_core::{Network, NodeId};

/// A random tree on `n` nodes; every parent shares a collision domain
/// with its children.
fn random_tree(n: u16, lq_min: f64, rng: &mut SimRng) -> Network {
    let mut b = Network::builder().nodes(n);
    let mut parents = vec![Vec::new(); n as usize];
    for c in 1..n {
        let p = rng.gen_range(0..c);
        parents[p as usize].push(c);
        b = b.edge(p, c, LinkQualityTrace::constant(rng.gen_range(lq_min..=1.0)));
    }
    for (p, kids) in parents.iter().enumerate() {
        if !kids.is_empty() {
            b = b.domain(std::iter::once(p as u16).chain(kids.iter().copied()));
        }
    }
    b.build().expect("random tree")
}

fn constant_params(class: usize) -> ProtocolParams {
    let p = ProtocolParams::default();
    ProtocolParams { model: Some(Arc::new(OrdinalTreeModel::constant(class, p.menu.len()))), ..p }
}

#[test]
fn senders_stop_only_after_every_child_decoded() {
    let mut rng = SimRng::seed_from_u64(31);
    let nets: Vec<Network> = std::iter::once(net15()).chain((0..10).map(|_| random_tree(12, 0.3, &mut rng))).collect();
    for (i, net) in nets.iter().enumerate() {
        let data = payload(600);
        let core = Core::new(net, data, EngineConfig::default(), derive_seed(31, &[i as u64]));
        let mut drp =
            Drp::new(DrpConfig { block: edrp_core::protocols::BlockChoice::Fixed(30), ..DrpConfig::default() });
        let (m, _) = core.run(&mut drp);
        assert!(!drp.stops.is_empty());
        for s in &drp.stops {
            assert_eq!(s.acked, s.children, "node {} stopped early", s.node);
            for &c in net.children_of(s.node) {
                let done = m.completion.iter().find(|(n, _)| *n == c).and_then(|(_, t)| *t);
                assert!(done.is_some_and(|t| t <= s.at), "child {c} of {} not decoded at stop", s.node);
            }
        }
    }
}

#[test]
fn every_protocol_completes_random_trees() {
    let mut rng = SimRng::seed_from_u64(50);
    let mut params = constant_params(1);
    params.engine.timeout = SimTime::from_ms(3_600_000.0);
    let data = payload(1000);
    for t in 0..50u64 {
        let n = rng.gen_range(2..=20);
        let net = random_tree(n, 0.2, &mut rng);
        for kind in [ProtocolKind::Drp, ProtocolKind::Edrp, ProtocolKind::RatelessDeluge, ProtocolKind::Mnp] {
            let out = run_protocol(kind, &net, &data, &params, derive_seed(50, &[t])).unwrap();
            assert!(out.metrics.all_complete(), "{kind} left nodes incomplete on tree {t} ({n} nodes)");
        }
    }
}

#[test]
fn round_duration_is_the_sum_of_packet_service_times() {
    let mut rng = SimRng::seed_from_u64(77);
    let nets: Vec<Network> = std::iter::once(net15()).chain((0..8).map(|_| random_tree(10, 0.3, &mut rng))).collect();
    let data = payload(1000);
    for (i, net) in nets.iter().enumerate() {
        for kind in [ProtocolKind::Drp, ProtocolKind::DrpLqCsma] {
            for seed in 0..5u64 {
                let out =
                    run_protocol(kind, net, &data, &ProtocolParams::default(), derive_seed(77, &[i as u64, seed]))
                        .unwrap();
                let ended: Vec<_> = out.metrics.sessions.iter().filter(|s| s.end.is_some()).collect();
                assert!(!ended.is_empty());
                for s in ended {
                    assert_eq!(s.duration_us(), Some(s.service_time_us), "{kind} net {i} seed {seed}, node {}", s.node);
                }
            }
        }
    }
}

#[test]
fn constant_model_matches_fixed_block_and_lq_flag_matches_drp() {
    let net = net15();
    let data = payload(1000);
    let base = ProtocolParams::default();
    let middle = base.menu.size(base.menu.middle());
    let fixed = ProtocolParams { fixed_block: Some(middle), ..base.clone() };
    let model = constant_params(base.menu.middle());
    for seed in [1u64, 2, 3] {
        let edrp = run_protocol(ProtocolKind::Edrp, &net, &data, &model, seed).unwrap();
        let lq_fixed = run_protocol(ProtocolKind::DrpLqCsma, &net, &data, &fixed, seed).unwrap();
        assert_eq!(edrp.metrics.packets, lq_fixed.metrics.packets);
        assert_eq!(edrp.metrics.completion, lq_fixed.metrics.completion);

        let ml_only = run_protocol(ProtocolKind::DrpMlbss, &net, &data, &model, seed).unwrap();
        let drp = run_protocol(ProtocolKind::Drp, &net, &data, &base, seed).unwrap();
        assert_eq!(ml_only.metrics.packets, drp.metrics.packets);
        assert_eq!(ml_only.metrics.completion, drp.metrics.completion);
    }
}

#[test]
fn model_driven_protocol_without_model_is_rejected() {
    let err = run_protocol(ProtocolKind::Edrp, &net15(), &payload(100), &ProtocolParams::default(), 1).unwrap_err();
    assert!(err.to_string().contains("edrp"));
    assert!("flood".parse::<ProtocolKind>().is_err());
}

fn pair(lq: f64) -> Network {
    Network::builder().nodes(2).edge(0, 1, LinkQualityTrace::constant(lq)).build().unwrap()
}

#[test]
fn deluge_single_receiver_sends_one_request_and_one_burst() {
    let net = pair(1.0);
    let core = Core::new(&net, payload(1000), EngineConfig::default(), 5);
    let mut d = Deluge::new(DelugeConfig::default());
    let (m, _) = core.run(&mut d);
    assert!(m.all_complete());
    assert_eq!(d.requests_sent.len(), 1);
    assert_eq!(d.bursts.len(), 1);
    assert_eq!(d.bursts[0].1, d.requests_sent[0].2);
}

#[test]
fn deluge_with_nothing_missing_only_advertises() {
    let net = pair(1.0);
    let cfg = EngineConfig {
        preloaded: vec![NodeId(1)],
        stop_when_complete: false,
        timeout: SimTime::from_ms(5000.0),
        ..EngineConfig::default()
    };
    let core = Core::new(&net, payload(1000), cfg, 5);
    let mut d = Deluge::new(DelugeConfig::default());
    let (m, _) = core.run(&mut d);
    assert!(m.packets.iter().any(|p| p.kind == "adv"));
    assert!(d.requests_sent.is_empty() && d.bursts.is_empty());
    assert_eq!(m.data_packets(), 0);
}

/// Origin 0 and its preloaded child 1 compete; 0 reaches `a` receivers,
/// 1 reaches `b`.
fn mnp_first_election(a: u16, b: u16) -> Vec<Election> {
    let c = LinkQualityTrace::constant(1.0);
    let mut builder = Network::builder().nodes(2 + a + b).edge(0, 1, c.clone());
    for i in 0..a {
        builder = builder.edge(0, 2 + i, c.clone());
    }
    for i in 0..b {
        builder = builder.edge(1, 2 + a + i, c.clone());
    }
    let net = builder.domain(0..2 + a + b).build().unwrap();
    let cfg = EngineConfig { preloaded: vec![NodeId(1)], ..EngineConfig::default() };
    let core = Core::new(&net, payload(1000), cfg, 9);
    let mut mnp = Mnp::new(MnpConfig::default());
    let (m, _) = core.run(&mut mnp);
    assert!(m.all_complete());
    mnp.elections
}

fn first_transmitter(e: &[Election]) -> NodeId {
    e.iter()
        .find_map(|x| match x {
            Election::Transmit { node, .. } => Some(*node),
            _ => None,
        })
        .expect("someone transmits")
}

#[test]
fn mnp_candidate_reaching_more_receivers_transmits() {
    let e = mnp_first_election(4, 2);
    assert_eq!(first_transmitter(&e), NodeId(0));
    assert!(e.iter().any(|x| matches!(x, Election::Sleep { node: NodeId(1), winner: NodeId(0), .. })));
    let e = mnp_first_election(2, 4);
    assert_eq!(first_transmitter(&e), NodeId(1));
}

#[test]
fn mnp_tie_goes_to_lower_id() {
    let e = mnp_first_election(3, 3);
    assert_eq!(first_transmitter(&e), NodeId(0));
}

#[test]
fn mnp_sole_candidate_transmits() {
    let net = pair(1.0);
    let core = Core::new(&net, payload(1000), EngineConfig::default(), 9);
    let mut mnp = Mnp::new(MnpConfig::default());
    let (m, _) = core.run(&mut mnp);
    assert!(m.all_complete());
    assert!(matches!(mnp.elections.first(), Some(Election::Transmit { node: NodeId(0), count: 1 })));
}

#[test]
fn degenerate_single_node_completes_immediately() {
    let net = Network::builder().nodes(1).build().unwrap();
    let out = run_protocol(ProtocolKind::Drp, &net, &payload(100), &ProtocolParams::default(), 1).unwrap();
    assert!(out.metrics.all_complete());
    assert_eq!(out.metrics.packets.len(), 0);
    assert_eq!(out.metrics.completion_time(), SimTime::ZERO);
}
