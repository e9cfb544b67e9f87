//! Seeded multi-round campaigns: configuration, execution and artifacts.
//!
//! Round `r` of a campaign always uses `round_seed(master, r)`, so every
//! protocol sees the same seeds and adding rounds never changes earlier
//! ones. Rounds run on a rayon pool capped by `EDRP_SIM_THREADS`; results
//! are collected in round order, which keeps `summary.csv` identical for
//! any thread count.

mod config;
mod run;

pub use config::{ConfigError, ConfigFile, DrpOverrides, DrpTuning, MacOverrides, RunConfig};
pub use run::{
    build_id, campaign_data, compare, protocol_params, reproducibility_stanza, run_campaign, simulate, summary_csv,
    thread_cap, CampaignError, CampaignReport, CompareReport, CompareRow, RoundResult, THREADS_ENV,
};
