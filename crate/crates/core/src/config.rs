//! Scenario parameters shared by every module.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Channel fading model used when building covariance matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FadingMode {
    /// One-ring spatial correlation.
    Correlated,
    /// Scaled-identity covariances.
    Uncorrelated,
}

/// Channel estimator applied to the pilot observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    /// Full-covariance MMSE estimate.
    Mmse,
    /// Element-wise MMSE using only the covariance diagonals.
    EwMmse,
}

/// All scenario parameters: network dimensions, geometry, radio constants,
/// and solver knobs.
///
/// Powers are normalized so that the per-cell downlink budget is 1 and the
/// path gain at the 1 m reference distance is 1. `pilot_snr` and
/// `noise_power` are expressed after this normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    /// Number of cells (L).
    pub cells: usize,
    /// Single-antenna users per cell (K).
    pub users_per_cell: usize,
    /// Antenna sub-arrays per cell (N).
    pub subarrays_per_cell: usize,
    /// Antenna elements per sub-array (M).
    pub antennas_per_subarray: usize,
    /// Hexagonal cell circumradius in meters.
    pub cell_radius: f64,
    /// Radius of the first sub-array tier in meters.
    pub subarray_offset: f64,
    /// Minimum admissible user-to-sub-array distance in meters.
    pub min_user_distance: f64,
    /// Path-loss exponent kappa in gain = d^-kappa.
    pub path_loss_exponent: f64,
    /// Normalized pilot power per user (linear).
    pub pilot_snr: f64,
    /// Downlink noise power sigma_n^2 (linear, normalized).
    pub noise_power: f64,
    /// Channel bandwidth in Hz.
    pub bandwidth: f64,
    /// Fraction of the coherence interval spent on downlink data.
    pub dl_fraction: f64,
    /// Standard deviation of the uniform angular spread, in degrees.
    pub angular_spread_std_deg: f64,
    /// Optional direct override of the angular half-width Delta in degrees.
    /// When unset, Delta = sqrt(3) * angular_spread_std_deg.
    pub angular_spread_half_width_deg: Option<f64>,
    /// Antenna element spacing in wavelengths.
    pub antenna_spacing: f64,
    /// Log-normal shadow fading standard deviation in dB; None disables it.
    pub shadow_fading_std_db: Option<f64>,
    pub fading_mode: FadingMode,
    pub estimator: EstimatorKind,
    /// Seed for every random draw derived from this scenario.
    pub rng_seed: u64,
    /// Absolute bisection tolerance on the SINR target.
    pub bisection_tolerance: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            cells: 2,
            users_per_cell: 10,
            subarrays_per_cell: 4,
            antennas_per_subarray: 100,
            cell_radius: 1000.0,
            subarray_offset: 120.0,
            min_user_distance: 35.0,
            path_loss_exponent: 3.76,
            pilot_snr: 1e12,
            noise_power: 5e-10,
            bandwidth: 20e6,
            dl_fraction: 0.45,
            angular_spread_std_deg: 5.0,
            angular_spread_half_width_deg: None,
            antenna_spacing: 0.5,
            shadow_fading_std_db: None,
            fading_mode: FadingMode::Uncorrelated,
            estimator: EstimatorKind::Mmse,
            rng_seed: 1,
            bisection_tolerance: 1e-3,
        }
    }
}

impl NetworkConfig {
    /// Total antenna elements per cell, M * N.
    pub fn antennas_per_cell(&self) -> usize {
        self.antennas_per_subarray * self.subarrays_per_cell
    }

    /// Angular half-width Delta in radians.
    ///
    /// The angular spread is uniform on [theta - Delta, theta + Delta]; a
    /// uniform distribution with standard deviation s has half-width
    /// sqrt(3) * s.
    pub fn angular_half_width(&self) -> f64 {
        let deg = self
            .angular_spread_half_width_deg
            .unwrap_or(3f64.sqrt() * self.angular_spread_std_deg);
        deg.to_radians()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.cells == 0
            || self.users_per_cell == 0
            || self.subarrays_per_cell == 0
            || self.antennas_per_subarray == 0
        {
            return fail("L, K, N, M must all be at least 1".into());
        }
        if !(self.dl_fraction > 0.0 && self.dl_fraction <= 1.0) {
            return fail(format!("dl_fraction must be in (0, 1], got {}", self.dl_fraction));
        }
        if self.path_loss_exponent <= 2.0 {
            return fail(format!(
                "path_loss_exponent must exceed 2, got {}",
                self.path_loss_exponent
            ));
        }
        if self.noise_power <= 0.0 {
            return fail(format!("noise_power must be positive, got {}", self.noise_power));
        }
        if self.pilot_snr <= 0.0 {
            return fail(format!("pilot_snr must be positive, got {}", self.pilot_snr));
        }
        if !(self.subarray_offset > 0.0 && self.subarray_offset < self.cell_radius) {
            return fail(format!(
                "subarray_offset must lie in (0, cell_radius), got {}",
                self.subarray_offset
            ));
        }
        if self.min_user_distance <= 0.0 {
            return fail(format!(
                "min_user_distance must be positive, got {}",
                self.min_user_distance
            ));
        }
        if self.bandwidth <= 0.0 {
            return fail(format!("bandwidth must be positive, got {}", self.bandwidth));
        }
        if self.bisection_tolerance <= 0.0 {
            return fail(format!(
                "bisection_tolerance must be positive, got {}",
                self.bisection_tolerance
            ));
        }
        Ok(())
    }
}
