use std::fmt::Write as _;
use std::io;
use std::path::Path;

use super::AnalyticsError;
use crate::protocols::RunMetrics;
use crate::topology::Network;

/// Sample Pearson correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, AnalyticsError> {
    if xs.len() != ys.len() {
        return Err(AnalyticsError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(AnalyticsError::TooFew { need: 2, got: xs.len() });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(AnalyticsError::ZeroVariance);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// A data packet tagged with the start-time gap of its round to the
/// nearest competing round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapRecord {
    pub gap_ms: f64,
    pub collided: bool,
}

/// Tags every data packet with its session's smallest start gap (first
/// data TxStart) to another sender sharing a collision domain. Packets of
/// sessions without any competitor are skipped.
pub fn gap_records(metrics: &RunMetrics, net: &Network) -> Vec<GapRecord> {
    let first_tx: Vec<Option<u64>> = (0..metrics.sessions.len())
        .map(|s| metrics.packets.iter().filter(|p| p.session == Some(s)).map(|p| p.tx_start.0).min())
        .collect();
    let gaps: Vec<Option<f64>> = metrics
        .sessions
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let ta = first_tx[i]?;
            metrics
                .sessions
                .iter()
                .enumerate()
                .filter(|(j, b)| *j != i && b.node != a.node && net.share_domain(a.node, b.node))
                .filter_map(|(j, _)| first_tx[j].map(|tb| ta.abs_diff(tb)))
                .min()
                .map(|us| us as f64 / 1000.0)
        })
        .collect();
    metrics
        .packets
        .iter()
        .filter_map(|p| {
            let gap = gaps[p.session?]?;
            Some(GapRecord { gap_ms: gap, collided: p.collided })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollisionBin {
    pub lo_ms: f64,
    pub hi_ms: f64,
    pub packets: usize,
    pub collided: usize,
}

impl CollisionBin {
    /// Collided fraction, `None` for a bin no packet fell into.
    pub fn rate(&self) -> Option<f64> {
        (self.packets > 0).then(|| self.collided as f64 / self.packets as f64)
    }
}

/// The three gap bins used for collision-rate analysis, in ms.
pub const DEFAULT_GAP_BINS: [(f64, f64); 3] = [(0.0, 1000.0), (1000.0, 3000.0), (3000.0, 5000.0)];

/// Collided-packet fraction per half-open gap bin `[lo, hi)`.
pub fn bin_collision_rates(records: &[GapRecord], bins: &[(f64, f64)]) -> Result<Vec<CollisionBin>, AnalyticsError> {
    if records.is_empty() {
        return Err(AnalyticsError::Empty);
    }
    let mut out: Vec<CollisionBin> =
        bins.iter().map(|&(lo, hi)| CollisionBin { lo_ms: lo, hi_ms: hi, packets: 0, collided: 0 }).collect();
    for r in records {
        if let Some(b) = out.iter_mut().find(|b| r.gap_ms >= b.lo_ms && r.gap_ms < b.hi_ms) {
            b.packets += 1;
            b.collided += usize::from(r.collided);
        }
    }
    Ok(out)
}

/// Right-continuous empirical CDF: sorted distinct values paired with the
/// fraction of samples at or below each.
pub fn empirical_cdf(values: &[f64]) -> Result<Vec<(f64, f64)>, AnalyticsError> {
    if values.is_empty() {
        return Err(AnalyticsError::Empty);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, x) in v.iter().enumerate() {
        let frac = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == *x => last.1 = frac,
            _ => out.push((*x, frac)),
        }
    }
    Ok(out)
}

#[derive(Debug, thiserror::Error)]
pub enum EmitError {
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error("writing {path}: {source}")]
    Io { path: String, source: io::Error },
}

fn write_text(path: &Path, text: &str) -> Result<(), EmitError> {
    std::fs::write(path, text).map_err(|source| EmitError::Io { path: path.display().to_string(), source })
}

/// Writes `value,cdf` rows for the empirical CDF of `values`.
pub fn emit_cdf(values: &[f64], path: &Path) -> Result<(), EmitError> {
    write_text(path, &cdf_csv("value", &[("", values)])?)
}

/// CDF rows for one or more labelled series: `series,<name>,cdf`.
pub fn cdf_csv(value_name: &str, series: &[(&str, &[f64])]) -> Result<String, AnalyticsError> {
    let labelled = series.len() > 1 || series.first().is_some_and(|s| !s.0.is_empty());
    let mut s = String::new();
    if labelled {
        let _ = writeln!(s, "series,{value_name},cdf");
    } else {
        let _ = writeln!(s, "{value_name},cdf");
    }
    for (name, values) in series {
        for (x, f) in empirical_cdf(values)? {
            if labelled {
                let _ = writeln!(s, "{name},{x},{f}");
            } else {
                let _ = writeln!(s, "{x},{f}");
            }
        }
    }
    Ok(s)
}

pub fn collision_bins_csv(rows: &[(&str, Vec<CollisionBin>)]) -> String {
    let mut s = String::from("series,lo_ms,hi_ms,packets,collided,rate\n");
    for (name, bins) in rows {
        for b in bins {
            let rate = b.rate().map(|r| r.to_string()).unwrap_or_else(|| "absent".into());
            let _ = writeln!(s, "{name},{},{},{},{},{rate}", b.lo_ms, b.hi_ms, b.packets, b.collided);
        }
    }
    s
}

/// `(sender_lq, backoff_ms)` for every data packet whose sender has children.
pub fn backoff_lq_pairs(metrics: &RunMetrics) -> Vec<(f64, f64)> {
    metrics
        .packets
        .iter()
        .filter(|p| p.kind == "data")
        .filter_map(|p| p.sender_lq.map(|lq| (lq, p.backoff_ms as f64)))
        .collect()
}

pub fn backoff_lq_csv(rows: &[(&str, Vec<(f64, f64)>)]) -> String {
    let mut s = String::from("series,sender_lq,backoff_ms\n");
    for (name, pairs) in rows {
        for (lq, bo) in pairs {
            let _ = writeln!(s, "{name},{lq},{bo}");
        }
    }
    s
}

pub fn write_csv(path: &Path, text: &str) -> Result<(), EmitError> {
    write_text(path, text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pearson_examples() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        assert!((pearson(&xs, &ys).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
        assert!((pearson(&xs, &neg).unwrap() + 1.0).abs() < 1e-12);
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 1.0, 3.0]).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(pearson(&[1.0, 1.0], &[1.0, 2.0]), Err(AnalyticsError::ZeroVariance));
        assert!(pearson(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn single_record_populates_one_bin() {
        let bins = bin_collision_rates(&[GapRecord { gap_ms: 1500.0, collided: true }], &DEFAULT_GAP_BINS).unwrap();
        let rates: Vec<Option<f64>> = bins.iter().map(CollisionBin::rate).collect();
        assert_eq!(rates, vec![None, Some(1.0), None]);
        assert!(bin_collision_rates(&[], &DEFAULT_GAP_BINS).is_err());
    }

    #[test]
    fn cdf_examples() {
        assert_eq!(empirical_cdf(&[5.0]).unwrap(), vec![(5.0, 1.0)]);
        assert_eq!(empirical_cdf(&[1.0, 2.0, 2.0, 4.0]).unwrap(), vec![(1.0, 0.25), (2.0, 0.75), (4.0, 1.0)]);
        assert_eq!(empirical_cdf(&[]), Err(AnalyticsError::Empty));
    }

    #[test]
    fn emit_cdf_writes_header_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        emit_cdf(&[2.0, 1.0], &p).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "value,cdf\n1,0.5\n2,1\n");
        assert!(matches!(emit_cdf(&[], &p), Err(EmitError::Analytics(AnalyticsError::Empty))));
    }
}
