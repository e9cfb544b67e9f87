use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rayon::prelude::*;
use thiserror::Error;

use super::config::{ConfigError, RunConfig};
use crate::analytics::{self, GapRecord, DEFAULT_GAP_BINS};
use crate::mlbss::{import_model, ModelError};
use crate::protocols::{run_protocol, DrpConfig, EngineConfig, ProtocolError, ProtocolKind, ProtocolParams};
use crate::rng::{derive_seed, round_seed, SimRng};
use crate::simkernel::SimTime;
use crate::topology::{Network, TopologyError};

/// Environment variable capping how many rounds run concurrently.
pub const THREADS_ENV: &str = "EDRP_SIM_THREADS";

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("network: {0}")]
    Topology(#[from] TopologyError),
    #[error("model: {0}")]
    Model(#[from] ModelError),
    #[error("round {round}: {source}")]
    Protocol { round: usize, source: ProtocolError },
    #[error(transparent)]
    Emit(#[from] analytics::EmitError),
    #[error("output directory {path}: {source}")]
    OutDir { path: String, source: std::io::Error },
    #[error("thread pool: {0}")]
    Threads(String),
}

/// Metrics of one seeded dissemination.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundResult {
    pub round: usize,
    pub seed: u64,
    pub goodput_bps: f64,
    pub completion_s: f64,
    pub complete: bool,
    pub data_packets: usize,
    pub control_packets: usize,
    pub collided_packets: usize,
    /// Smallest first-transmission gap between two senders sharing a
    /// collision domain, ms.
    pub delta_min_ms: Option<f64>,
    pub gaps: Vec<GapRecord>,
    pub backoff_lq: Vec<(f64, f64)>,
    pub trace: Vec<String>,
}

/// The object every round disseminates; fixed by the master seed.
pub fn campaign_data(seed: u64, len: usize) -> Vec<u8> {
    let mut rng = SimRng::seed_from_u64(derive_seed(seed, &[0x4441_5441]));
    let mut data = vec![0u8; len];
    rng.fill_bytes(&mut data);
    data
}

pub fn protocol_params(cfg: &RunConfig) -> Result<ProtocolParams, CampaignError> {
    let model = match (&cfg.model, cfg.fixed_block) {
        (Some(p), None) if cfg.protocol.needs_model() => {
            let text = std::fs::read_to_string(p)
                .map_err(|source| ConfigError::Io { path: p.display().to_string(), source })?;
            Some(Arc::new(import_model(&text)?))
        }
        _ => None,
    };
    let engine = EngineConfig {
        mac: cfg.mac,
        sensing: cfg.sensing,
        timeout: SimTime::from_ms(cfg.timeout_s * 1000.0),
        ..EngineConfig::default()
    };
    let drp = DrpConfig {
        d_min_ms: cfg.drp.d_min_ms,
        d_max_ms: cfg.drp.d_max_ms,
        ack_threshold: cfg.drp.ack_threshold,
        beacon_holdoff_ms: cfg.drp.beacon_holdoff_ms,
        ..DrpConfig::default()
    };
    Ok(ProtocolParams {
        engine,
        drp,
        menu: cfg.menu.clone(),
        fixed_block: cfg.fixed_block,
        model,
        ..ProtocolParams::default()
    })
}

/// Thread count from [`THREADS_ENV`], if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

fn run_one(
    kind: ProtocolKind,
    net: &Network,
    data: &[u8],
    params: &ProtocolParams,
    master: u64,
    round: usize,
) -> Result<RoundResult, CampaignError> {
    let seed = round_seed(master, round as u64);
    let out =
        run_protocol(kind, net, data, params, seed).map_err(|source| CampaignError::Protocol { round, source })?;
    let m = &out.metrics;
    let gaps = analytics::gap_records(m, net);
    Ok(RoundResult {
        round,
        seed,
        goodput_bps: m.goodput_bps(),
        completion_s: m.completion_time().as_secs(),
        complete: m.all_complete(),
        data_packets: m.data_packets(),
        control_packets: m.control_packets(),
        collided_packets: m.collided_packets(),
        delta_min_ms: gaps.iter().map(|g| g.gap_ms).min_by(f64::total_cmp),
        backoff_lq: analytics::backoff_lq_pairs(m),
        gaps,
        trace: out.trace,
    })
}

/// Runs every round of `kind` with paired per-round seeds. Results come
/// back in round order whatever the thread count.
pub fn simulate(
    kind: ProtocolKind,
    cfg: &RunConfig,
    net: &Network,
    params: &ProtocolParams,
) -> Result<Vec<RoundResult>, CampaignError> {
    let data = campaign_data(cfg.seed, cfg.data_len);
    let job = |r: usize| {
        let mut p = params.clone();
        p.engine.trace = cfg.trace && r == 0;
        run_one(kind, net, &data, &p, cfg.seed, r)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_cap().unwrap_or(0))
        .build()
        .map_err(|e| CampaignError::Threads(e.to_string()))?;
    pool.install(|| (0..cfg.rounds).into_par_iter().map(job).collect())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn summary_csv(rounds: &[RoundResult]) -> String {
    let mut s = String::from(
        "round,seed,goodput_bps,completion_s,complete,data_packets,control_packets,collided_packets,delta_min_ms\n",
    );
    for r in rounds {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.round,
            r.seed,
            r.goodput_bps,
            r.completion_s,
            r.complete,
            r.data_packets,
            r.control_packets,
            r.collided_packets,
            opt(r.delta_min_ms)
        );
    }
    s
}

pub fn build_id() -> String {
    format!("edrp-core {} ({})", env!("CARGO_PKG_VERSION"), if cfg!(debug_assertions) { "debug" } else { "release" })
}

pub fn reproducibility_stanza(cfg: &RunConfig, hash: &str) -> String {
    format!(
        "config_hash = \"{hash}\"\nmaster_seed = {}\nbuild = \"{}\"\nprotocol = \"{}\"\nrounds = {}\n",
        cfg.seed,
        build_id(),
        cfg.protocol,
        cfg.rounds
    )
}

/// Writes files into one directory and deletes them all again unless
/// [`Artifacts::commit`] is reached.
struct Artifacts {
    dir: PathBuf,
    written: Vec<PathBuf>,
    committed: bool,
}

impl Artifacts {
    fn new(dir: &Path) -> Result<Self, CampaignError> {
        std::fs::create_dir_all(dir)
            .map_err(|source| CampaignError::OutDir { path: dir.display().to_string(), source })?;
        Ok(Artifacts { dir: dir.to_path_buf(), written: Vec::new(), committed: false })
    }

    fn write(&mut self, name: &str, text: &str) -> Result<(), CampaignError> {
        let p = self.dir.join(name);
        self.written.push(p.clone());
        analytics::write_csv(&p, text)?;
        Ok(())
    }

    fn commit(mut self) -> Vec<PathBuf> {
        self.committed = true;
        std::mem::take(&mut self.written)
    }
}

impl Drop for Artifacts {
    fn drop(&mut self) {
        if !self.committed {
            for p in &self.written {
                let _ = std::fs::remove_file(p);
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct CampaignReport {
    pub config_hash: String,
    pub rounds: Vec<RoundResult>,
    pub files: Vec<PathBuf>,
}

impl CampaignReport {
    pub fn mean_goodput(&self) -> f64 {
        mean(self.rounds.iter().map(|r| r.goodput_bps))
    }

    pub fn mean_completion(&self) -> f64 {
        mean(self.rounds.iter().map(|r| r.completion_s))
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

fn round_artifacts(out: &mut Artifacts, series: &[(&str, &[RoundResult])]) -> Result<(), CampaignError> {
    let goodputs: Vec<(&str, Vec<f64>)> =
        series.iter().map(|(n, rs)| (*n, rs.iter().map(|r| r.goodput_bps).collect())).collect();
    let refs: Vec<(&str, &[f64])> = goodputs.iter().map(|(n, v)| (*n, v.as_slice())).collect();
    out.write("goodput_cdf.csv", &analytics::cdf_csv("goodput_bps", &refs).map_err(analytics::EmitError::from)?)?;

    let mut bins = Vec::new();
    for (name, rs) in series {
        let gaps: Vec<GapRecord> = rs.iter().flat_map(|r| r.gaps.iter().copied()).collect();
        let b = if gaps.is_empty() {
            DEFAULT_GAP_BINS
                .iter()
                .map(|&(lo, hi)| analytics::CollisionBin { lo_ms: lo, hi_ms: hi, packets: 0, collided: 0 })
                .collect()
        } else {
            analytics::bin_collision_rates(&gaps, &DEFAULT_GAP_BINS).map_err(analytics::EmitError::from)?
        };
        bins.push((*name, b));
    }
    out.write("collision_bins.csv", &analytics::collision_bins_csv(&bins))?;

    let pairs: Vec<(&str, Vec<(f64, f64)>)> =
        series.iter().map(|(n, rs)| (*n, rs.iter().flat_map(|r| r.backoff_lq.iter().copied()).collect())).collect();
    out.write("backoff_lq.csv", &analytics::backoff_lq_csv(&pairs))?;
    Ok(())
}

/// Runs the configured campaign and writes `summary.csv`, the analytics
/// CSVs, `reproducibility.toml` and, when tracing, `trace.csv` (round 0).
pub fn run_campaign(cfg: &RunConfig) -> Result<CampaignReport, CampaignError> {
    cfg.validate()?;
    let net = Network::load(&cfg.network)?;
    let params = protocol_params(cfg)?;
    let hash = cfg.config_hash()?;
    let rounds = simulate(cfg.protocol, cfg, &net, &params)?;

    let mut out = Artifacts::new(&cfg.out_dir)?;
    out.write("summary.csv", &summary_csv(&rounds))?;
    round_artifacts(&mut out, &[(cfg.protocol.name(), &rounds)])?;
    out.write("reproducibility.toml", &reproducibility_stanza(cfg, &hash))?;
    if cfg.trace {
        let mut t = String::from("t_us,kind,node,detail\n");
        for line in &rounds[0].trace {
            t.push_str(line);
            t.push('\n');
        }
        out.write("trace.csv", &t)?;
    }
    let files = out.commit();
    Ok(CampaignReport { config_hash: hash, rounds, files })
}

#[derive(Debug, Clone)]
pub struct CompareRow {
    pub protocol: ProtocolKind,
    pub mean_goodput_bps: f64,
    pub mean_completion_s: f64,
    pub complete_rounds: usize,
    /// Relative gain in mean goodput over the first protocol, percent.
    pub gain_pct: f64,
    /// Mean of the per-round paired goodput gains over the first protocol, percent.
    pub paired_gain_pct: f64,
}

#[derive(Debug, Clone)]
pub struct CompareReport {
    pub rows: Vec<CompareRow>,
    pub rounds: Vec<(ProtocolKind, Vec<RoundResult>)>,
    pub files: Vec<PathBuf>,
}

impl CompareReport {
    pub fn table(&self) -> String {
        let mut s =
            String::from("protocol,mean_goodput_bps,mean_completion_s,complete_rounds,gain_pct,paired_gain_pct\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{:.3},{:.4},{},{:.3},{:.3}",
                r.protocol, r.mean_goodput_bps, r.mean_completion_s, r.complete_rounds, r.gain_pct, r.paired_gain_pct
            );
        }
        s
    }

    pub fn row(&self, kind: ProtocolKind) -> Option<&CompareRow> {
        self.rows.iter().find(|r| r.protocol == kind)
    }
}

/// Runs several protocols over identical per-round seeds. The first
/// protocol is the baseline for gains. Writes `compare.csv`,
/// `compare_rounds.csv` and the analytics CSVs with one series per protocol.
pub fn compare(cfg: &RunConfig, kinds: &[ProtocolKind]) -> Result<CompareReport, CampaignError> {
    if kinds.is_empty() {
        return Err(ConfigError::Invalid("no protocols to compare".into()).into());
    }
    let net = Network::load(&cfg.network)?;
    let mut rounds = Vec::new();
    for &k in kinds {
        let kc = RunConfig { protocol: k, ..cfg.clone() };
        kc.validate()?;
        let params = protocol_params(&kc)?;
        rounds.push((k, simulate(k, &kc, &net, &params)?));
    }
    let base = &rounds[0].1;
    let base_mean = mean(base.iter().map(|r| r.goodput_bps));
    let rows = rounds
        .iter()
        .map(|(k, rs)| {
            let g = mean(rs.iter().map(|r| r.goodput_bps));
            let paired = mean(
                rs.iter()
                    .zip(base)
                    .filter(|(_, b)| b.goodput_bps > 0.0)
                    .map(|(r, b)| (r.goodput_bps / b.goodput_bps - 1.0) * 100.0),
            );
            CompareRow {
                protocol: *k,
                mean_goodput_bps: g,
                mean_completion_s: mean(rs.iter().map(|r| r.completion_s)),
                complete_rounds: rs.iter().filter(|r| r.complete).count(),
                gain_pct: if base_mean > 0.0 { (g / base_mean - 1.0) * 100.0 } else { 0.0 },
                paired_gain_pct: paired,
            }
        })
        .collect();
    let mut report = CompareReport { rows, rounds, files: Vec::new() };

    let mut out = Artifacts::new(&cfg.out_dir)?;
    out.write("compare.csv", &report.table())?;
    let mut paired = String::from("round,seed");
    for (k, _) in &report.rounds {
        let _ = write!(paired, ",{k}_goodput_bps,{k}_completion_s");
    }
    paired.push('\n');
    for i in 0..cfg.rounds {
        let _ = write!(paired, "{},{}", i, report.rounds[0].1[i].seed);
        for (_, rs) in &report.rounds {
            let _ = write!(paired, ",{},{}", rs[i].goodput_bps, rs[i].completion_s);
        }
        paired.push('\n');
    }
    out.write("compare_rounds.csv", &paired)?;
    let series: Vec<(&str, &[RoundResult])> = report.rounds.iter().map(|(k, rs)| (k.name(), rs.as_slice())).collect();
    round_artifacts(&mut out, &series)?;
    report.files = out.commit();
    Ok(report)
}
