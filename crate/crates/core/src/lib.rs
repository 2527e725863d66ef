//! Downlink power control for multi-cell massive MIMO with distributed
//! antenna arrays (DAA).
//!
//! A base station in this model is a set of `N` geographically separated
//! sub-arrays with `M` antennas each. The crate builds the network geometry
//! and spatial channel covariances, computes MMSE / element-wise MMSE channel
//! estimation statistics, evaluates the closed-form downlink SINR under
//! maximum ratio transmission, and solves the network-wide max-min power
//! allocation by bisection over a second-order-cone feasibility problem.
//! A Monte-Carlo oracle provides independent ground truth for the closed
//! forms, and the harness module runs multi-drop experiments with CDF,
//! median, and 95%-likely statistics.

pub mod config;
pub mod covariance;
pub mod error;
pub mod estimation;
pub mod geometry;
pub mod harness;
pub mod oracle;
pub mod power_control;
pub mod sinr;

pub use config::{EstimatorKind, FadingMode, NetworkConfig};
pub use covariance::CovarianceSet;
pub use error::{Error, Result};
pub use estimation::{EstimatorStats, PilotGram};
pub use geometry::{Layout, Point};
pub use power_control::{ConeProblem, Feasibility, MaxMinResult};
pub use sinr::{PowerCoefficients, SinrReport};
