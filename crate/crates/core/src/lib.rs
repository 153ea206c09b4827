//! End-to-end network slice provisioning under demand uncertainty.
//!
//! A macro-slot plan (VNF placement and routing) is found by solving a
//! sample-average MILP over sampled demand; each micro-slot then re-splits
//! gNB spectrum with a small LP against the observed demand.

#![allow(clippy::needless_range_loop)]

pub mod config;
pub mod demand;
pub mod det_smns;
pub mod error;
pub mod graph;
pub mod report;
pub mod rnsr;
pub mod sim;
pub mod slice;

pub use config::{load_config, parse_config, Config, Scenario};
pub use error::Error;
