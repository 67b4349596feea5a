//! Reconstruction of co-creation networks from wiki revision histories.
//!
//! The pipeline reads revision histories, weights every editor pair by the product
//! of an alternating-timed-interaction count and a shared-section overlap, builds one
//! network per six-month window, prunes and reduces it to its giant component, and
//! measures its structure. Quadratic regressions then relate those measures to team
//! size and artifact age.

pub mod ati;
pub mod config;
pub mod format;
pub mod graph;
pub mod ingest;
pub mod metrics;
pub mod pipeline;
pub mod regression;
pub mod topic;
