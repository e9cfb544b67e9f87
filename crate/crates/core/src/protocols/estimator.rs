use std::collections::{BTreeMap, VecDeque};

use crate::topology::NodeId;

/// Sliding-window delivery statistics for one sender's child links.
///
/// PDR is the fraction of delivered packets in the window; RNP is the
/// number of transmissions per delivered packet. The sender-level features
/// average PDR over children and take the worst child's RNP.
#[derive(Debug, Clone)]
pub struct LinkEstimator {
    window: usize,
    links: BTreeMap<NodeId, VecDeque<bool>>,
}

/// RNP reported for a link with no delivery in its window.
pub const RNP_CAP: f64 = 10.0;

impl LinkEstimator {
    pub const DEFAULT_WINDOW: usize = 100;

    pub fn new(window: usize) -> Self {
        LinkEstimator { window: window.max(1), links: BTreeMap::new() }
    }

    pub fn record(&mut self, child: NodeId, delivered: bool) {
        let w = self.links.entry(child).or_default();
        if w.len() == self.window {
            w.pop_front();
        }
        w.push_back(delivered);
    }

    pub fn samples(&self, child: NodeId) -> usize {
        self.links.get(&child).map_or(0, |w| w.len())
    }

    pub fn pdr(&self, child: NodeId) -> Option<f64> {
        let w = self.links.get(&child).filter(|w| !w.is_empty())?;
        Some(w.iter().filter(|&&d| d).count() as f64 / w.len() as f64)
    }

    pub fn rnp(&self, child: NodeId) -> Option<f64> {
        let w = self.links.get(&child).filter(|w| !w.is_empty())?;
        let ok = w.iter().filter(|&&d| d).count();
        Some(if ok == 0 { RNP_CAP } else { (w.len() as f64 / ok as f64).min(RNP_CAP) })
    }

    /// `(mean PDR, max RNP)` over the given children; `None` without data.
    pub fn summary(&self, children: &[NodeId]) -> Option<(f64, f64)> {
        let mut pdr_sum = 0.0;
        let mut n = 0;
        let mut rnp_max: f64 = 1.0;
        for &c in children {
            if let (Some(p), Some(r)) = (self.pdr(c), self.rnp(c)) {
                pdr_sum += p;
                rnp_max = rnp_max.max(r);
                n += 1;
            }
        }
        (n > 0).then(|| (pdr_sum / n as f64, rnp_max))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_slides() {
        let mut e = LinkEstimator::new(4);
        for d in [false, false, true, true, true, true] {
            e.record(NodeId(1), d);
        }
        assert_eq!(e.samples(NodeId(1)), 4);
        assert_eq!(e.pdr(NodeId(1)), Some(1.0));
        assert_eq!(e.rnp(NodeId(1)), Some(1.0));
    }

    #[test]
    fn summary_takes_mean_pdr_and_worst_rnp() {
        let mut e = LinkEstimator::new(10);
        for i in 0..10 {
            e.record(NodeId(1), true);
            e.record(NodeId(2), i % 2 == 0);
        }
        let (pdr, rnp) = e.summary(&[NodeId(1), NodeId(2)]).unwrap();
        assert!((pdr - 0.75).abs() < 1e-12);
        assert!((rnp - 2.0).abs() < 1e-12);
        assert_eq!(e.summary(&[NodeId(9)]), None);
    }

    #[test]
    fn dead_link_rnp_is_capped() {
        let mut e = LinkEstimator::new(5);
        e.record(NodeId(1), false);
        assert_eq!(e.rnp(NodeId(1)), Some(RNP_CAP));
    }
}
