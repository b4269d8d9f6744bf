//! Investor-stock ownership networks.
//!
//! Holdings of fund-management companies are projected into a directed,
//! weighted stock network; the crate then measures its topology, the herding
//! of institutions across out-degree groups, crash-day intraday returns of
//! hubs versus their successors (with randomized null networks), and pairwise
//! Toda-Yamamoto Granger causality between stocks.

pub mod causality;
mod components;
pub mod error;
pub mod herding;
pub mod ingest;
mod linalg;
pub mod measure;
pub mod metrics;
pub mod money;
pub mod network;
pub mod pipeline;
pub mod quantile;
pub mod special;
pub mod synthetic;
pub mod timeseries;

pub use error::{Error, Result};
pub use measure::Measure;
pub use money::Cents;
pub use network::{BipartiteGraph, StockNetwork};
