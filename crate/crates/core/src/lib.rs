//! α-proportional-fair user association and resource allocation for
//! downlink cellular networks.
//!
//! The crate is organised bottom-up:
//!
//! - [`net_model`]: random topologies, SINR and instantaneous rates.
//! - [`utility`]: α-utilities, sum utility, Chiu-Jain fairness, percentiles.
//! - [`allocation`]: per-BS resource allocation for a fixed association.
//! - [`objective`]: single-station objectives (optimal / uniform allocation),
//!   their integer relaxations, greedy deltas and the non-convexity probes.
//! - [`msa`]: the convex multi-station problem, solved by projected gradient.
//! - [`algorithms`]: association constructors (CGA, LGA, LGAN, MSA rounding,
//!   heuristics, exhaustive search, randomized rounding).
//! - [`experiment`]: Monte-Carlo experiment runner and validation suite.

pub mod algorithms;
pub mod allocation;
pub mod error;
pub mod experiment;
pub mod matrix;
pub mod msa;
pub mod net_model;
pub mod objective;
pub mod utility;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use utility::Alpha;
