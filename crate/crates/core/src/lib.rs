//! Trace-driven analysis and simulation of edge video caching.
//!
//! - [`geo`]: coordinates, grid cells, PoI labels, infrastructure and the
//!   nearest-node index.
//! - [`trace`]: request records, CSV ingestion, mobility statistics and the
//!   synthetic workload generator.
//! - [`analysis`]: popularity, spectra, entropies, divergence and fits.
//! - [`cache`]: LRU, LFU, random replacement and geo-collaborative planning.
//! - [`sim`]: the trace-driven simulator and its metrics.

pub mod analysis;
pub mod cache;
pub mod error;
pub mod geo;
pub mod sim;
pub mod stats;
pub mod trace;

pub use error::{Error, Result};
