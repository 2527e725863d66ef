//! Channel covariance construction: one-ring spatial correlation for a
//! uniform linear array, uncorrelated fading, and assembly of the full
//! per-link covariance tensor.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, RngExt};

use crate::config::{FadingMode, NetworkConfig};
use crate::error::{Error, Result};
use crate::geometry::{large_scale_gain, Layout};

/// Default Gauss-Legendre order for the one-ring integral. The integrand is
/// smooth and bandlimited in the scatterer angle for practical M, so 64
/// nodes resolve it well past double precision (see the convergence test).
pub const DEFAULT_QUADRATURE_ORDER: usize = 64;

/// Tensor dimensions shared across the crate: (L, K, N, M).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub cells: usize,
    pub users: usize,
    pub subarrays: usize,
    pub antennas: usize,
}

impl Dims {
    pub fn from_config(config: &NetworkConfig) -> Self {
        Dims {
            cells: config.cells,
            users: config.users_per_cell,
            subarrays: config.subarrays_per_cell,
            antennas: config.antennas_per_subarray,
        }
    }

    /// Flat index for a (user cell j, user k, serving cell l, sub-array n)
    /// link.
    pub fn link(&self, j: usize, k: usize, l: usize, n: usize) -> usize {
        ((j * self.users + k) * self.cells + l) * self.subarrays + n
    }

    pub fn links(&self) -> usize {
        self.cells * self.users * self.cells * self.subarrays
    }
}

/// The covariance tensor: one M x M Hermitian PSD matrix per
/// (user, cell, sub-array) link, plus the underlying large-scale gains.
#[derive(Debug, Clone)]
pub struct CovarianceSet {
    pub dims: Dims,
    r: Vec<DMatrix<Complex64>>,
    beta: Vec<f64>,
}

impl CovarianceSet {
    pub fn new(dims: Dims, r: Vec<DMatrix<Complex64>>, beta: Vec<f64>) -> Self {
        assert_eq!(r.len(), dims.links());
        assert_eq!(beta.len(), dims.links());
        CovarianceSet { dims, r, beta }
    }

    /// Covariance of the channel from user (j, k) to sub-array (l, n).
    pub fn r(&self, j: usize, k: usize, l: usize, n: usize) -> &DMatrix<Complex64> {
        &self.r[self.dims.link(j, k, l, n)]
    }

    pub fn beta(&self, j: usize, k: usize, l: usize, n: usize) -> f64 {
        self.beta[self.dims.link(j, k, l, n)]
    }

    pub fn matrices(&self) -> &[DMatrix<Complex64>] {
        &self.r
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on the
/// Legendre polynomial.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1);
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let m = (order + 1) / 2;
    for i in 0..m {
        // Chebyshev-based initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (order as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence for P_order(x) and its derivative.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=order {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = order as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[order - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    (nodes, weights)
}

/// One-ring covariance for a uniform linear array.
///
/// Entry (m, p) is
/// `beta / (2 Delta) * integral over [theta - Delta, theta + Delta] of
/// exp(i 2 pi spacing (m - p) sin(alpha)) d alpha`,
/// evaluated with fixed-order Gauss-Legendre quadrature. The matrix is
/// Toeplitz and Hermitian by construction.
pub fn one_ring_covariance(
    antennas: usize,
    beta: f64,
    theta: f64,
    delta: f64,
    spacing: f64,
    order: usize,
) -> Result<DMatrix<Complex64>> {
    if delta <= 0.0 {
        return Err(Error::NonPositiveSpread(delta));
    }
    let (nodes, weights) = gauss_legendre(order);
    // First Toeplitz column: lag d = 0..M-1.
    let mut lags = vec![Complex64::new(0.0, 0.0); antennas];
    for (x, w) in nodes.iter().zip(&weights) {
        let alpha = theta + delta * x;
        let phase = 2.0 * std::f64::consts::PI * spacing * alpha.sin();
        for (d, lag) in lags.iter_mut().enumerate() {
            // exp(i * phase * d), weight already includes the 1/(2 Delta)
            // normalization after the change of variables.
            *lag += Complex64::from_polar(0.5 * w, phase * d as f64);
        }
    }
    for lag in &mut lags {
        *lag *= beta;
    }
    let mut r = DMatrix::zeros(antennas, antennas);
    for row in 0..antennas {
        for col in 0..antennas {
            r[(row, col)] = if row >= col {
                lags[row - col]
            } else {
                lags[col - row].conj()
            };
        }
    }
    Ok(r)
}

/// Uncorrelated fading: beta * I_M.
pub fn uncorrelated_covariance(antennas: usize, beta: f64) -> DMatrix<Complex64> {
    DMatrix::from_diagonal_element(antennas, antennas, Complex64::new(beta, 0.0))
}

/// Builds the full covariance tensor for a layout.
///
/// For each link the gain comes from the user-to-sub-array distance, the
/// nominal angle is the bearing from the sub-array to the user, and the
/// half-width comes from the configured angular spread. Optional log-normal
/// shadow fading multiplies the gain when enabled.
pub fn build_covariance_set<R: Rng>(
    config: &NetworkConfig,
    layout: &Layout,
    rng: &mut R,
) -> Result<CovarianceSet> {
    let dims = Dims::from_config(config);
    let delta = config.angular_half_width();
    let mut matrices = Vec::with_capacity(dims.links());
    let mut betas = Vec::with_capacity(dims.links());
    for j in 0..dims.cells {
        for k in 0..dims.users {
            for l in 0..dims.cells {
                for n in 0..dims.subarrays {
                    let user = layout.user_positions[j][k];
                    let subarray = layout.subarray_positions[l][n];
                    let mut beta =
                        large_scale_gain(user.distance(&subarray), config.path_loss_exponent)?;
                    if let Some(sigma_db) = config.shadow_fading_std_db {
                        let z: f64 = sample_standard_normal(rng);
                        beta *= 10f64.powf(sigma_db * z / 10.0);
                    }
                    let r = match config.fading_mode {
                        FadingMode::Uncorrelated => {
                            uncorrelated_covariance(dims.antennas, beta)
                        }
                        FadingMode::Correlated => {
                            let theta = subarray.bearing_to(&user);
                            one_ring_covariance(
                                dims.antennas,
                                beta,
                                theta,
                                delta,
                                config.antenna_spacing,
                                DEFAULT_QUADRATURE_ORDER,
                            )?
                        }
                    };
                    matrices.push(r);
                    betas.push(beta);
                }
            }
        }
    }
    Ok(CovarianceSet::new(dims, matrices, betas))
}

/// Standard normal draw via Box-Muller.
pub(crate) fn sample_standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
