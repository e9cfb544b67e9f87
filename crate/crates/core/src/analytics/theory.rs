use thiserror::Error;

use crate::rateless::{BlockSizeMenu, DEFAULT_PAYLOAD_BUDGET, PER_BLOCK_OVERHEAD};
use crate::simkernel::ServiceTimeDistribution;

#[derive(Debug, Error, PartialEq)]
pub enum AnalyticsError {
    #[error("channel state theta must lie in (0, 1], got {0}")]
    Theta(f64),
    #[error("block size must be positive")]
    BlockSize,
    #[error("need at least {need} values, got {got}")]
    TooFew { need: usize, got: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("input has zero variance")]
    ZeroVariance,
    #[error("no values to summarise")]
    Empty,
}

/// Probability that a round whose service time follows `dist` is still on
/// air `delta_ms` after it started, so a competitor starting then collides.
pub fn collision_prob(dist: &ServiceTimeDistribution, delta_ms: f64) -> f64 {
    1.0 - dist.cdf(delta_ms)
}

/// Inputs of the closed-form goodput model.
#[derive(Debug, Clone, PartialEq)]
pub struct GoodputConfig {
    pub data_len: usize,
    pub header_bytes: usize,
    pub per_block_overhead: usize,
    pub payload_budget: usize,
    /// Rateless inefficiency: extra fraction of blocks needed to decode.
    pub epsilon: f64,
    /// Block length at which `theta` is the block survival probability.
    /// A block of `B` bytes survives with `theta^(B / reference_bytes)`.
    pub reference_bytes: usize,
}

impl Default for GoodputConfig {
    fn default() -> Self {
        GoodputConfig {
            data_len: 1000,
            header_bytes: 12,
            per_block_overhead: PER_BLOCK_OVERHEAD,
            payload_budget: DEFAULT_PAYLOAD_BUDGET,
            epsilon: 0.1,
            reference_bytes: 100,
        }
    }
}

/// Expected byte budget of one dissemination at a given block size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoodputModel {
    pub block_size: usize,
    pub theta: f64,
    pub expected_useful: f64,
    pub expected_overhead: f64,
    pub expected_loss: f64,
}

impl GoodputModel {
    pub fn goodput(&self) -> f64 {
        self.expected_useful / (self.expected_useful + self.expected_overhead + self.expected_loss)
    }
}

/// Survival probability of a `block_size`-byte block.
pub fn block_success(theta: f64, block_size: usize, cfg: &GoodputConfig) -> f64 {
    theta.powf(block_size as f64 / cfg.reference_bytes as f64)
}

/// Useful, overhead and lost bytes expected when sending `cfg.data_len`
/// bytes in blocks of `block_size`.
///
/// Overhead covers everything spent on the blocks that arrive: padding of
/// the last source block, rateless redundancy, per-block CRC/index bytes
/// and the header share of the packets carrying them. Loss covers the full
/// on-air cost of the blocks that do not arrive.
pub fn analytic_goodput(block_size: usize, theta: f64, cfg: &GoodputConfig) -> Result<GoodputModel, AnalyticsError> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(AnalyticsError::Theta(theta));
    }
    if block_size == 0 {
        return Err(AnalyticsError::BlockSize);
    }
    let d = cfg.data_len as f64;
    let b = block_size as f64;
    let per_block = cfg.per_block_overhead as f64;
    let header_per_byte = cfg.header_bytes as f64 / cfg.payload_budget as f64;

    let n = cfg.data_len.div_ceil(block_size) as f64;
    let delivered = n * (1.0 + cfg.epsilon);
    let sent = delivered / block_success(theta, block_size, cfg);

    let overhead = (delivered * b - d) + per_block * delivered + header_per_byte * delivered * (b + per_block);
    let loss = (sent - delivered) * (b + per_block) * (1.0 + header_per_byte);
    Ok(GoodputModel { block_size, theta, expected_useful: d, expected_overhead: overhead, expected_loss: loss })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegretRecord {
    pub theta: f64,
    pub chosen_b: usize,
    pub optimal_b: usize,
    pub regret: f64,
}

impl RegretRecord {
    pub fn new(theta: f64, chosen_b: usize, menu: &BlockSizeMenu, cfg: &GoodputConfig) -> Result<Self, AnalyticsError> {
        let (best, table) = brute_force_optimal_b(menu, theta, cfg)?;
        let chosen = analytic_goodput(chosen_b, theta, cfg)?.goodput();
        let optimum = table.iter().find(|m| m.block_size == best).map(|m| m.goodput()).unwrap_or(chosen);
        Ok(RegretRecord { theta, chosen_b, optimal_b: best, regret: (optimum - chosen).max(0.0) })
    }
}

/// Evaluates every menu size; returns the goodput-maximising size (the
/// smaller one on ties) together with the full table.
pub fn brute_force_optimal_b(
    menu: &BlockSizeMenu,
    theta: f64,
    cfg: &GoodputConfig,
) -> Result<(usize, Vec<GoodputModel>), AnalyticsError> {
    let table = menu.sizes().iter().map(|&b| analytic_goodput(b, theta, cfg)).collect::<Result<Vec<_>, _>>()?;
    let mut best = &table[0];
    for m in &table[1..] {
        if m.goodput() > best.goodput() {
            best = m;
        }
    }
    Ok((best.block_size, table))
}

/// Regret of every menu size at `theta`; the optimum's entry is exactly 0.
pub fn regret_table(
    menu: &BlockSizeMenu,
    theta: f64,
    cfg: &GoodputConfig,
) -> Result<Vec<RegretRecord>, AnalyticsError> {
    let (best, table) = brute_force_optimal_b(menu, theta, cfg)?;
    let g_best = table.iter().find(|m| m.block_size == best).expect("best is in table").goodput();
    Ok(table
        .iter()
        .map(|m| RegretRecord { theta, chosen_b: m.block_size, optimal_b: best, regret: g_best - m.goodput() })
        .collect())
}
