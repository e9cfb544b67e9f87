//! Closed-form collision and goodput models, and the empirical metrics
//! (correlation, collision bins, CDFs) written out by campaigns.

mod empirical;
mod theory;

pub use crate::simkernel::ServiceTimeDistribution;
pub use empirical::{
    backoff_lq_csv, backoff_lq_pairs, bin_collision_rates, cdf_csv, collision_bins_csv, emit_cdf, empirical_cdf,
    gap_records, pearson, write_csv, CollisionBin, EmitError, GapRecord, DEFAULT_GAP_BINS,
};
pub use theory::{
    analytic_goodput, block_success, brute_force_optimal_b, collision_prob, regret_table, AnalyticsError,
    GoodputConfig, GoodputModel, RegretRecord,
};
