//! Analytics for payment-ledger transaction streams.
//!
//! The pipeline runs in stages, each in its own module:
//!
//! - [`ingest`]: parse CSV / JSON-lines ledgers, keep native-to-native
//!   full payments, summarize by year.
//! - [`stats`]: empirical CCDFs, Pareto tail fits, daily activity series,
//!   DFT periodicity, and power-law correlation fits.
//! - [`concentration`]: the Herfindahl-Hirschman index and its modified
//!   inverse of order `n`, an effective count of significant shares.
//! - [`flow`]: daily inflow/outflow series per account and the Flow Index
//!   built on the modified inverse HH index, plus node classification.
//! - [`network`]: threshold-selected transaction networks, degree CCDFs and
//!   the Flow-Index based walnut (bow-tie) partition.
//! - [`synth`]: deterministic synthetic ledgers with known ground truth.

pub mod concentration;
pub mod error;
pub mod flow;
pub mod ingest;
pub mod network;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use ingest::TransactionRecord;

/// Smallest ledger unit; one native coin is `DROPS_PER_XRP` drops.
pub const DROPS_PER_XRP: u64 = 1_000_000;

/// The native currency code.
pub const NATIVE_CURRENCY: &str = "XRP";

/// Converts a whole-or-fractional XRP amount to drops, rounding to the nearest drop.
pub fn xrp_to_drops(xrp: f64) -> u64 {
    (xrp * DROPS_PER_XRP as f64).round() as u64
}

pub fn drops_to_xrp(drops: u128) -> f64 {
    drops as f64 / DROPS_PER_XRP as f64
}

/// Exact decimal rendering of a drop amount in XRP, always with six decimals.
pub fn format_xrp(drops: u128) -> String {
    let unit = DROPS_PER_XRP as u128;
    format!("{}.{:06}", drops / unit, drops % unit)
}
