//! Independent reference implementations: Monte Carlo SINR estimation by
//! direct channel simulation, and exhaustive grid search for tiny max-min
//! instances.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::config::{EstimatorKind, NetworkConfig};
use crate::covariance::{sample_standard_normal, CovarianceSet, Dims};
use crate::error::{Error, Result};
use crate::estimation::{compute_q, ewmmse_w, mmse_w, PilotGram};
use crate::sinr::PowerCoefficients;

/// Largest variable count accepted by the exhaustive grid search.
pub const MAX_GRID_VARS: usize = 3;

/// One realization of every channel vector h_{jk}^{ln}, indexed like the
/// covariance tensor.
#[derive(Debug, Clone)]
pub struct Channels {
    dims: Dims,
    h: Vec<DVector<Complex64>>,
}

impl Channels {
    pub fn h(&self, j: usize, k: usize, l: usize, n: usize) -> &DVector<Complex64> {
        &self.h[self.dims.link(j, k, l, n)]
    }
}

/// Draws h = R^{1/2} g with g standard complex normal, through per-link
/// eigendecompositions computed once up front. Tiny negative eigenvalues
/// from round-off are clipped to zero.
pub struct ChannelSampler {
    dims: Dims,
    factors: Vec<DMatrix<Complex64>>,
}

impl ChannelSampler {
    pub fn new(cov: &CovarianceSet) -> Self {
        let factors = cov
            .matrices()
            .iter()
            .map(|r| {
                let eig = nalgebra::SymmetricEigen::new(r.clone());
                let scale = DMatrix::from_diagonal(&eig.eigenvalues.map(|ev| {
                    Complex64::new(ev.max(0.0).sqrt(), 0.0)
                }));
                &eig.eigenvectors * scale
            })
            .collect();
        ChannelSampler {
            dims: cov.dims,
            factors,
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Channels {
        let m = self.dims.antennas;
        let h = self
            .factors
            .iter()
            .map(|f| {
                let g = DVector::from_fn(m, |_, _| complex_standard_normal(rng));
                f * g
            })
            .collect();
        Channels {
            dims: self.dims,
            h,
        }
    }
}

/// CN(0, 1): independent real and imaginary parts of variance 1/2.
pub fn complex_standard_normal<R: Rng>(rng: &mut R) -> Complex64 {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    Complex64::new(
        scale * sample_standard_normal(rng),
        scale * sample_standard_normal(rng),
    )
}

/// Monte Carlo SINR machinery: the per-link estimator matrices applied to
/// simulated pilot observations.
pub struct McSinrEstimator {
    dims: Dims,
    gram: PilotGram,
    pilot_snr: f64,
    /// W_{li}^n per own-cell link, flattened (l * users + i) * subarrays + n.
    w: Vec<DMatrix<Complex64>>,
}

impl McSinrEstimator {
    pub fn new(cov: &CovarianceSet, gram: &PilotGram, config: &NetworkConfig) -> Result<Self> {
        let d = cov.dims;
        let mut w = Vec::with_capacity(d.cells * d.users * d.subarrays);
        for l in 0..d.cells {
            for i in 0..d.users {
                for n in 0..d.subarrays {
                    let mat = match config.estimator {
                        EstimatorKind::Mmse => {
                            let q = compute_q(cov, gram, config.pilot_snr, l, i, n);
                            mmse_w(cov.r(l, i, l, n), &q, (l, i, n))?
                        }
                        EstimatorKind::EwMmse => {
                            ewmmse_w(cov, gram, config.pilot_snr, l, i, n)
                        }
                    };
                    w.push(mat);
                }
            }
        }
        Ok(McSinrEstimator {
            dims: d,
            gram: gram.clone(),
            pilot_snr: config.pilot_snr,
            w,
        })
    }

    pub fn w(&self, l: usize, i: usize, n: usize) -> &DMatrix<Complex64> {
        &self.w[(l * self.dims.users + i) * self.dims.subarrays + n]
    }

    /// Correlated pilot observation for user (l, i) at sub-array (l, n):
    /// y = sum_{j,k} rho_{jk}^{li} h_{jk}^{ln} + (1/sqrt(rho_tr)) noise.
    pub fn pilot_observation<R: Rng>(
        &self,
        channels: &Channels,
        l: usize,
        i: usize,
        n: usize,
        rng: &mut R,
    ) -> DVector<Complex64> {
        let d = self.dims;
        let m = d.antennas;
        let noise_scale = Complex64::new(1.0 / self.pilot_snr.sqrt(), 0.0);
        let mut y = DVector::from_fn(m, |_, _| noise_scale * complex_standard_normal(rng));
        for j in 0..d.cells {
            for k in 0..d.users {
                let rho = self.gram.rho(j, k, l, i);
                if rho.norm_sqr() > 0.0 {
                    y += channels.h(j, k, l, n) * rho.conj();
                }
            }
        }
        y
    }

    /// Channel estimates hhat_{li}^{ln} = W_{li}^n y for every own-cell
    /// link, in (l, i, n) order.
    pub fn pilot_phase<R: Rng>(
        &self,
        channels: &Channels,
        rng: &mut R,
    ) -> Vec<DVector<Complex64>> {
        let d = self.dims;
        let mut estimates = Vec::with_capacity(d.cells * d.users * d.subarrays);
        for l in 0..d.cells {
            for i in 0..d.users {
                for n in 0..d.subarrays {
                    let y = self.pilot_observation(channels, l, i, n, rng);
                    estimates.push(self.w(l, i, n) * y);
                }
            }
        }
        estimates
    }
}

/// Monte Carlo estimate of every user's effective downlink SINR under
/// maximum ratio transmission with the use-and-then-forget bound.
///
/// Each sample draws fresh channels and pilot noise, runs the configured
/// estimator, and accumulates the received signal inner products; the SINR
/// assembles the expectations as
/// |E m|^2 / (sum_{l,i} E|z_{li}|^2 - |E m|^2 + sigma^2)
/// with z_{li} = sum_n nu_{li}^n (h_{jk}^{ln})^H hhat_{li}^{ln} and
/// m = z_{jk}.
pub fn mc_sinr<R: Rng>(
    cov: &CovarianceSet,
    gram: &PilotGram,
    config: &NetworkConfig,
    nu: &PowerCoefficients,
    samples: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    assert!(samples > 0);
    let d = cov.dims;
    if nu.cells != d.cells || nu.users != d.users || nu.subarrays != d.subarrays {
        return Err(Error::DimensionMismatch(format!(
            "power coefficients are ({}, {}, {}) but the covariance set is ({}, {}, {})",
            nu.cells, nu.users, nu.subarrays, d.cells, d.users, d.subarrays
        )));
    }
    let sampler = ChannelSampler::new(cov);
    let estimator = McSinrEstimator::new(cov, gram, config)?;
    let users_total = d.cells * d.users;
    let mut mean = vec![Complex64::new(0.0, 0.0); users_total];
    let mut second = vec![0.0f64; users_total * d.cells * d.users];

    for _ in 0..samples {
        let channels = sampler.sample(rng);
        let estimates = estimator.pilot_phase(&channels, rng);
        for j in 0..d.cells {
            for k in 0..d.users {
                let user = j * d.users + k;
                for l in 0..d.cells {
                    for i in 0..d.users {
                        let mut z = Complex64::new(0.0, 0.0);
                        for n in 0..d.subarrays {
                            let hat = &estimates[(l * d.users + i) * d.subarrays + n];
                            z += channels.h(j, k, l, n).dotc(hat)
                                * Complex64::new(nu.get(l, i, n), 0.0);
                        }
                        second[(user * d.cells + l) * d.users + i] += z.norm_sqr();
                        if l == j && i == k {
                            mean[user] += z;
                        }
                    }
                }
            }
        }
    }

    let s = samples as f64;
    let mut gamma = Vec::with_capacity(users_total);
    for user in 0..users_total {
        let m = mean[user] / s;
        let signal = m.norm_sqr();
        let mut denom = config.noise_power - signal;
        for l in 0..d.cells {
            for i in 0..d.users {
                denom += second[(user * d.cells + l) * d.users + i] / s;
            }
        }
        gamma.push(if signal > 0.0 { signal / denom } else { 0.0 });
    }
    Ok(gamma)
}

/// Exhaustive grid search for max-min power control on instances with at
/// most [`MAX_GRID_VARS`] coefficients. Each coefficient ranges over
/// `grid_points` equally spaced values in [0, 1/sqrt(alpha)]; points that
/// break a per-cell power budget are discarded. Returns the best
/// coefficients and their minimum SINR.
pub fn brute_force_maxmin(
    stats: &crate::estimation::EstimatorStats,
    noise_power: f64,
    grid_points: usize,
) -> Result<(PowerCoefficients, f64)> {
    assert!(grid_points >= 2);
    let d = stats.dims;
    let vars = d.cells * d.users * d.subarrays;
    if vars > MAX_GRID_VARS {
        return Err(Error::GridTooLarge {
            max: MAX_GRID_VARS,
            got: vars,
        });
    }
    let mut bounds = Vec::with_capacity(vars);
    for l in 0..d.cells {
        for i in 0..d.users {
            for n in 0..d.subarrays {
                let alpha = stats.alpha(l, i, n);
                bounds.push(if alpha > 0.0 { 1.0 / alpha.sqrt() } else { 0.0 });
            }
        }
    }

    let mut best_nu = PowerCoefficients::zeros(d.cells, d.users, d.subarrays);
    let mut best_gamma = f64::NEG_INFINITY;
    let mut idx = vec![0usize; vars];
    loop {
        let flat: Vec<f64> = idx
            .iter()
            .zip(&bounds)
            .map(|(i, b)| *i as f64 / (grid_points - 1) as f64 * b)
            .collect();
        let nu = PowerCoefficients::from_flat(d.cells, d.users, d.subarrays, flat);
        let feasible = crate::sinr::per_cell_power(stats, &nu)
            .iter()
            .all(|p| *p <= 1.0 + 1e-12);
        if feasible {
            let report = crate::sinr::evaluate_sinr(stats, &nu, noise_power)?;
            if report.min_sinr > best_gamma {
                best_gamma = report.min_sinr;
                best_nu = nu;
            }
        }
        // Odometer increment.
        let mut pos = 0;
        loop {
            if pos == vars {
                return Ok((best_nu, best_gamma));
            }
            idx[pos] += 1;
            if idx[pos] < grid_points {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::{one_ring_covariance, uncorrelated_covariance};
    use crate::estimation::{estimator_stats, pilot_gram};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn config(cells: usize, users: usize, subarrays: usize, antennas: usize) -> NetworkConfig {
        NetworkConfig {
            cells,
            users_per_cell: users,
            subarrays_per_cell: subarrays,
            antennas_per_subarray: antennas,
            pilot_snr: 1.0,
            noise_power: 1.0,
            ..NetworkConfig::default()
        }
    }

    fn manual_set(
        c: &NetworkConfig,
        builder: impl Fn(usize, usize, usize, usize) -> DMatrix<Complex64>,
    ) -> CovarianceSet {
        let dims = Dims::from_config(c);
        let mut mats = Vec::new();
        let mut betas = Vec::new();
        for j in 0..dims.cells {
            for k in 0..dims.users {
                for l in 0..dims.cells {
                    for n in 0..dims.subarrays {
                        let r = builder(j, k, l, n);
                        betas.push(r.trace().re / dims.antennas as f64);
                        mats.push(r);
                    }
                }
            }
        }
        CovarianceSet::new(dims, mats, betas)
    }

    #[test]
    fn zero_covariance_gives_zero_channels() {
        let c = config(1, 1, 1, 3);
        let cov = manual_set(&c, |_, _, _, _| DMatrix::zeros(3, 3));
        let sampler = ChannelSampler::new(&cov);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ch = sampler.sample(&mut rng);
        assert!(ch.h(0, 0, 0, 0).norm() < 1e-12);
    }

    #[test]
    fn identity_covariance_matches_unit_variance() {
        let c = config(1, 1, 1, 2);
        let cov = manual_set(&c, |_, _, _, _| uncorrelated_covariance(2, 1.0));
        let sampler = ChannelSampler::new(&cov);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 10_000;
        let mut power = 0.0;
        for _ in 0..n {
            power += sampler.sample(&mut rng).h(0, 0, 0, 0).norm_squared();
        }
        let per_entry = power / (n as f64 * 2.0);
        assert!((per_entry - 1.0).abs() < 0.03, "variance {per_entry}");
    }

    #[test]
    fn rank_one_covariance_confines_samples_to_the_subspace() {
        let m = 3;
        let v = DVector::from_fn(m, |i, _| Complex64::from_polar(1.0, 0.7 * i as f64));
        let r = &v * v.adjoint();
        let c = config(1, 1, 1, m);
        let cov = manual_set(&c, |_, _, _, _| r.clone());
        let sampler = ChannelSampler::new(&cov);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let ch = sampler.sample(&mut rng);
            let h = ch.h(0, 0, 0, 0);
            // Component orthogonal to v must vanish up to the sqrt(eps)
            // noise floor of the eigendecomposition.
            let proj = &v * (v.dotc(h) / v.norm_squared());
            assert!((h - proj).norm() < 1e-6 * h.norm().max(1.0));
        }
    }

    #[test]
    fn noiseless_pilots_recover_the_channel() {
        let c = NetworkConfig {
            pilot_snr: 1e12,
            ..config(1, 1, 1, 3)
        };
        let cov = manual_set(&c, |_, _, _, _| uncorrelated_covariance(3, 1.0));
        let gram = pilot_gram(&c);
        let estimator = McSinrEstimator::new(&cov, &gram, &c).unwrap();
        let sampler = ChannelSampler::new(&cov);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ch = sampler.sample(&mut rng);
        let estimates = estimator.pilot_phase(&ch, &mut rng);
        let err = (&estimates[0] - ch.h(0, 0, 0, 0)).norm();
        assert!(err < 1e-4 * ch.h(0, 0, 0, 0).norm());
    }

    #[test]
    fn pilot_observation_covariance_matches_q() {
        let c = config(2, 2, 1, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let theta = [0.3, 1.1, -0.4, 0.9];
        let cov = manual_set(&c, |j, k, l, _| {
            one_ring_covariance(3, 0.5 + 0.2 * (j + l) as f64, theta[2 * j + k], 0.15, 0.5, 64)
                .unwrap()
        });
        let gram = pilot_gram(&c);
        let estimator = McSinrEstimator::new(&cov, &gram, &c).unwrap();
        let sampler = ChannelSampler::new(&cov);
        let q = compute_q(&cov, &gram, c.pilot_snr, 0, 0, 0);
        let mut emp = DMatrix::<Complex64>::zeros(3, 3);
        let n = 20_000;
        for _ in 0..n {
            let ch = sampler.sample(&mut rng);
            let y = estimator.pilot_observation(&ch, 0, 0, 0, &mut rng);
            emp += &y * y.adjoint();
        }
        emp /= Complex64::new(n as f64, 0.0);
        assert!(
            (&emp - &q).norm() < 0.05 * q.norm(),
            "empirical pilot covariance off by {}",
            (&emp - &q).norm() / q.norm()
        );
    }

    #[test]
    fn zero_power_gives_zero_mc_sinr() {
        let c = config(1, 1, 1, 2);
        let cov = manual_set(&c, |_, _, _, _| uncorrelated_covariance(2, 1.0));
        let gram = pilot_gram(&c);
        let nu = PowerCoefficients::zeros(1, 1, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let gamma = mc_sinr(&cov, &gram, &c, &nu, 100, &mut rng).unwrap();
        assert_eq!(gamma[0], 0.0);
    }

    #[test]
    fn ewmmse_coincides_with_mmse_for_diagonal_covariances() {
        let c = config(2, 1, 1, 2);
        let cov = manual_set(&c, |j, _, l, _| {
            uncorrelated_covariance(2, if j == l { 1.0 } else { 0.3 })
        });
        let gram = pilot_gram(&c);
        let nu = PowerCoefficients::uniform(2, 1, 1, 0.4);
        let ew = NetworkConfig {
            estimator: EstimatorKind::EwMmse,
            ..c.clone()
        };
        let a = mc_sinr(&cov, &gram, &c, &nu, 500, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let b = mc_sinr(&cov, &gram, &ew, &nu, 500, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10 * x.max(1e-300));
        }
    }

    #[test]
    fn mc_converges_to_the_closed_form_like_inverse_sqrt_n() {
        let c = config(2, 1, 1, 2);
        let cov = manual_set(&c, |j, _, l, _| {
            uncorrelated_covariance(2, if j == l { 1.0 } else { 0.4 })
        });
        let gram = pilot_gram(&c);
        let stats = estimator_stats(&cov, &gram, &c).unwrap();
        let nu = PowerCoefficients::uniform(2, 1, 1, 0.5);
        let reference = crate::sinr::evaluate_sinr(&stats, &nu, c.noise_power).unwrap();
        let err_at = |samples: usize| {
            let mut total = 0.0;
            for seed in 0..3 {
                let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
                let gamma = mc_sinr(&cov, &gram, &c, &nu, samples, &mut rng).unwrap();
                total += (gamma[0] - reference.sinr(0, 0)).abs() / reference.sinr(0, 0);
            }
            total / 3.0
        };
        let coarse = err_at(400);
        let fine = err_at(6_400);
        // 16x the samples should shrink the error by about 4x; allow slack.
        assert!(
            fine < 0.6 * coarse,
            "error did not shrink: {coarse} -> {fine}"
        );
        assert!(fine < 0.05, "fine-grid error {fine} too large");
    }

    #[test]
    fn estimate_energy_matches_alpha() {
        let c = config(2, 2, 1, 3);
        let cov = manual_set(&c, |j, k, l, _| {
            uncorrelated_covariance(3, 0.4 + 0.2 * ((j + k + l) % 3) as f64)
        });
        let gram = pilot_gram(&c);
        let stats = estimator_stats(&cov, &gram, &c).unwrap();
        let estimator = McSinrEstimator::new(&cov, &gram, &c).unwrap();
        let sampler = ChannelSampler::new(&cov);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 20_000;
        let mut energy = 0.0;
        for _ in 0..n {
            let ch = sampler.sample(&mut rng);
            let estimates = estimator.pilot_phase(&ch, &mut rng);
            energy += estimates[0].norm_squared();
        }
        let alpha = stats.alpha(0, 0, 0);
        let emp = energy / n as f64;
        assert!(
            (emp - alpha).abs() < 0.05 * alpha,
            "empirical {emp} vs alpha {alpha}"
        );
    }

    #[test]
    fn grid_search_rejects_large_instances() {
        let c = config(2, 1, 2, 2);
        let cov = manual_set(&c, |_, _, _, _| uncorrelated_covariance(2, 1.0));
        let gram = pilot_gram(&c);
        let stats = estimator_stats(&cov, &gram, &c).unwrap();
        assert!(matches!(
            brute_force_maxmin(&stats, 1.0, 5),
            Err(Error::GridTooLarge { max: 3, got: 4 })
        ));
    }

    #[test]
    fn grid_search_splits_power_equally_in_the_symmetric_case() {
        // One cell, two identical users: the max-min optimum is symmetric
        // and uses the full budget.
        let c = config(1, 2, 1, 2);
        let cov = manual_set(&c, |_, _, _, _| uncorrelated_covariance(2, 1.0));
        let gram = pilot_gram(&c);
        let stats = estimator_stats(&cov, &gram, &c).unwrap();
        let (nu, gamma) = brute_force_maxmin(&stats, 1.0, 81).unwrap();
        assert!(gamma > 0.0);
        let a = nu.get(0, 0, 0);
        let b = nu.get(0, 1, 0);
        assert!((a - b).abs() < 1e-12, "asymmetric optimum {a} vs {b}");
        let p = crate::sinr::per_cell_power(&stats, &nu);
        assert!(p[0] > 0.9, "optimum should use nearly full power, got {}", p[0]);
    }
}
