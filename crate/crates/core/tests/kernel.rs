mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};

use common::*;
use edrp_core::mac::{select_window, LqCsmaParams, LqMapping};
use edrp_core::protocols::{run_protocol, ProtocolKind, ProtocolParams, Sensing};
use edrp_core::rng::SimRng;
use edrp_core::topology::LinkQualityTrace;
use edrp_core::{Network, NodeId};

fn traced(kind: ProtocolKind, seed: u64) -> (String, Vec<String>) {
    let mut params = ProtocolParams::default();
    params.engine.trace = true;
    params.engine.sensing = Sensing::Neighbors;
    let out = run_protocol(kind, &net15(), &payload(1000), &params, seed).unwrap();
    (format!("{:?}", out.metrics), out.trace)
}

#[test]
fn same_seed_gives_identical_trace_and_metrics() {
    for kind in [ProtocolKind::Drp, ProtocolKind::DrpLqCsma, ProtocolKind::RatelessDeluge, ProtocolKind::Mnp] {
        let (m1, t1) = traced(kind, 99);
        let (m2, t2) = traced(kind, 99);
        assert!(!t1.is_empty());
        assert_eq!(t1, t2, "{kind}");
        assert_eq!(m1, m2, "{kind}");
        let (_, other) = traced(kind, 100);
        assert_ne!(t1, other, "{kind} ignores its seed");
    }
}

#[test]
fn trace_clock_never_runs_backwards() {
    for kind in [ProtocolKind::Drp, ProtocolKind::DrpLqCsma, ProtocolKind::RatelessDeluge, ProtocolKind::Mnp] {
        let (_, trace) = traced(kind, 5);
        let times: Vec<u64> = trace.iter().map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
        assert!(times.windows(2).all(|w| w[0] <= w[1]), "{kind}");
    }
}

fn random_network(n: u16, rng: &mut SimRng) -> Network {
    let mut b = Network::builder().nodes(n);
    for c in 1..n {
        b = b.edge(rng.gen_range(0..c), c, LinkQualityTrace::constant(rng.gen_range(0.0..=1.0)));
    }
    b.build().unwrap()
}

#[test]
fn ranks_count_hops_to_the_root() {
    let mut rng = SimRng::seed_from_u64(12);
    for _ in 0..100 {
        let net = random_network(rng.gen_range(1..40), &mut rng);
        for &n in net.nodes() {
            let mut hops = 0;
            let mut at = n;
            while let Some(p) = net.parent_of(at) {
                at = p;
                hops += 1;
                assert!(hops <= net.len(), "no path to the root from {n}");
            }
            assert_eq!(at, NodeId::ROOT);
            assert_eq!(net.rank_of(n), Some(hops as u32 + 1));
        }
    }
}

#[test]
fn mean_child_quality_lies_between_extremes() {
    let mut rng = SimRng::seed_from_u64(13);
    for _ in 0..100 {
        let net = random_network(rng.gen_range(2..30), &mut rng);
        for &n in net.nodes().iter().filter(|&&n| !net.is_leaf(n)) {
            let lqs: Vec<f64> = net.children_of(n).iter().map(|&c| net.lq_at(n, c, 0.0).unwrap()).collect();
            let m = net.mean_child_lq(n, 0.0).unwrap();
            let lo = lqs.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = lqs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            assert!(lo - 1e-12 <= m && m <= hi + 1e-12);
        }
    }
}

fn params() -> impl Strategy<Value = LqCsmaParams> {
    (1.0..100.0f64, 1.0..1000.0f64, 0.0..200.0f64, -200.0..200.0f64, prop::bool::ANY).prop_map(
        |(t_min, span, x, y, literal)| LqCsmaParams {
            t_min,
            t_max: t_min + span,
            x,
            y,
            mapping: if literal { LqMapping::Literal } else { LqMapping::Inverted },
            ..LqCsmaParams::default()
        },
    )
}

proptest! {
    #[test]
    fn windows_stay_inside_the_backoff_range(p in params(), l in -0.5..1.5f64) {
        let w = select_window(l, &p).unwrap();
        prop_assert!(1.0 <= w.lower && w.lower <= w.upper && w.upper <= p.t_max, "{w:?}");
    }

    #[test]
    fn better_links_never_get_later_windows(p in params(), a in 0.0..1.0f64, b in 0.0..1.0f64) {
        let p = LqCsmaParams { mapping: LqMapping::Inverted, ..p };
        let (hi, lo) = if a > b { (a, b) } else { (b, a) };
        let (wh, wl) = (select_window(hi, &p).unwrap(), select_window(lo, &p).unwrap());
        prop_assert!(wh.lower <= wl.lower && wh.upper <= wl.upper);
        if wh != wl {
            prop_assert!(wh.midpoint() < wl.midpoint());
        }
    }
}
