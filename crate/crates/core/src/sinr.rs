//! Closed-form downlink SINR under maximum ratio transmission, spectral
//! efficiency, throughput, and per-cell power usage.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::EstimatorStats;

/// Downlink power control coefficients nu_{li}^n, indexed [l][i][n].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCoefficients {
    pub cells: usize,
    pub users: usize,
    pub subarrays: usize,
    nu: Vec<f64>,
}

impl PowerCoefficients {
    pub fn zeros(cells: usize, users: usize, subarrays: usize) -> Self {
        PowerCoefficients {
            cells,
            users,
            subarrays,
            nu: vec![0.0; cells * users * subarrays],
        }
    }

    pub fn uniform(cells: usize, users: usize, subarrays: usize, value: f64) -> Self {
        assert!(value >= 0.0);
        PowerCoefficients {
            cells,
            users,
            subarrays,
            nu: vec![value; cells * users * subarrays],
        }
    }

    pub fn from_flat(cells: usize, users: usize, subarrays: usize, nu: Vec<f64>) -> Self {
        assert_eq!(nu.len(), cells * users * subarrays);
        PowerCoefficients {
            cells,
            users,
            subarrays,
            nu,
        }
    }

    pub fn get(&self, l: usize, i: usize, n: usize) -> f64 {
        self.nu[(l * self.users + i) * self.subarrays + n]
    }

    pub fn set(&mut self, l: usize, i: usize, n: usize, value: f64) {
        self.nu[(l * self.users + i) * self.subarrays + n] = value;
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.nu
    }

    pub fn len(&self) -> usize {
        self.nu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nu.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.nu.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        PowerCoefficients {
            cells: self.cells,
            users: self.users,
            subarrays: self.subarrays,
            nu: self.nu.iter().map(|v| v * factor).collect(),
        }
    }
}

/// Closed-form SINR and rate for every user, plus network-level summaries.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SinrReport {
    pub cells: usize,
    pub users: usize,
    /// gamma_{jk}, indexed [j][k].
    pub sinr: Vec<f64>,
    /// log2(1 + gamma), b/s/Hz.
    pub rate: Vec<f64>,
    pub min_sinr: f64,
    pub per_cell_power: Vec<f64>,
}

impl SinrReport {
    pub fn sinr(&self, j: usize, k: usize) -> f64 {
        self.sinr[j * self.users + k]
    }

    pub fn rate(&self, j: usize, k: usize) -> f64 {
        self.rate[j * self.users + k]
    }

    /// Per-user throughput BW * ell * rate, b/s.
    pub fn throughput(&self, bandwidth: f64, dl_fraction: f64) -> Vec<f64> {
        self.rate
            .iter()
            .map(|r| bandwidth * dl_fraction * r)
            .collect()
    }

    pub fn max_sinr(&self) -> f64 {
        self.sinr.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

fn check_dims(stats: &EstimatorStats, nu: &PowerCoefficients) -> Result<()> {
    if nu.cells != stats.dims.cells
        || nu.users != stats.dims.users
        || nu.subarrays != stats.dims.subarrays
    {
        return Err(Error::DimensionMismatch(format!(
            "power coefficients are ({}, {}, {}) but stats are ({}, {}, {})",
            nu.cells, nu.users, nu.subarrays, stats.dims.cells, stats.dims.users,
            stats.dims.subarrays
        )));
    }
    Ok(())
}

/// Closed-form effective downlink SINR:
///
/// gamma_{jk} = (sum_n nu_{jk}^n chi_{jk}^n)^2 /
///   ( sum_{l,i,n} (nu_{li}^n)^2 zeta_{jk}^{lin}
///   + sum_{l != j} (sum_n nu_{lk}^n xi_{jk}^{ln})^2
///   + sigma_n^2 )
pub fn evaluate_sinr(
    stats: &EstimatorStats,
    nu: &PowerCoefficients,
    noise_power: f64,
) -> Result<SinrReport> {
    assert!(noise_power > 0.0, "noise power must be positive");
    check_dims(stats, nu)?;
    let d = stats.dims;
    let mut sinr = Vec::with_capacity(d.cells * d.users);
    for j in 0..d.cells {
        for k in 0..d.users {
            let signal: f64 = (0..d.subarrays)
                .map(|n| nu.get(j, k, n) * stats.chi(j, k, n))
                .sum();
            let mut denom = noise_power;
            for l in 0..d.cells {
                for i in 0..d.users {
                    for n in 0..d.subarrays {
                        let v = nu.get(l, i, n);
                        denom += v * v * stats.zeta(j, k, l, i, n);
                    }
                }
                if l != j {
                    let coherent: f64 = (0..d.subarrays)
                        .map(|n| nu.get(l, k, n) * stats.xi(j, k, l, n))
                        .sum();
                    denom += coherent * coherent;
                }
            }
            sinr.push(signal * signal / denom);
        }
    }
    let rate: Vec<f64> = sinr.iter().map(|g| (1.0 + g).log2()).collect();
    let min_sinr = sinr.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(SinrReport {
        cells: d.cells,
        users: d.users,
        sinr,
        rate,
        min_sinr,
        per_cell_power: per_cell_power(stats, nu),
    })
}

/// Normalized transmit power in each cell:
/// P_l = sum_{i,n} (nu_{li}^n)^2 alpha_{li}^n.
pub fn per_cell_power(stats: &EstimatorStats, nu: &PowerCoefficients) -> Vec<f64> {
    let d = stats.dims;
    (0..d.cells)
        .map(|l| {
            let mut p = 0.0;
            for i in 0..d.users {
                for n in 0..d.subarrays {
                    let v = nu.get(l, i, n);
                    p += v * v * stats.alpha(l, i, n);
                }
            }
            p
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::NetworkConfig;
    use crate::covariance::{uncorrelated_covariance, CovarianceSet, Dims};
    use crate::estimation::{estimator_stats, pilot_gram};

    fn single_link_stats(beta: f64, rho_tr: f64, m: usize) -> EstimatorStats {
        let c = NetworkConfig {
            cells: 1,
            users_per_cell: 1,
            subarrays_per_cell: 1,
            antennas_per_subarray: m,
            pilot_snr: rho_tr,
            ..NetworkConfig::default()
        };
        let dims = Dims::from_config(&c);
        let cov = CovarianceSet::new(
            dims,
            vec![uncorrelated_covariance(m, beta)],
            vec![beta],
        );
        estimator_stats(&cov, &pilot_gram(&c), &c).unwrap()
    }

    #[test]
    fn zero_power_gives_zero_sinr() {
        let stats = single_link_stats(1.0, 1.0, 2);
        let nu = PowerCoefficients::zeros(1, 1, 1);
        let report = evaluate_sinr(&stats, &nu, 0.5).unwrap();
        assert_eq!(report.sinr(0, 0), 0.0);
        assert_eq!(report.rate(0, 0), 0.0);
        assert_eq!(report.min_sinr, 0.0);
    }

    #[test]
    fn scalar_case_matches_analytic_formula() {
        let (beta, rho_tr, m) = (1.3, 2.0, 4);
        let stats = single_link_stats(beta, rho_tr, m);
        let v = 0.37;
        let sigma2 = 0.8;
        let nu = PowerCoefficients::uniform(1, 1, 1, v);
        let report = evaluate_sinr(&stats, &nu, sigma2).unwrap();
        let denom = beta + 1.0 / rho_tr;
        let chi = m as f64 * beta * beta / denom;
        let zeta = m as f64 * beta.powi(3) / denom;
        let expected = (v * chi).powi(2) / (v * v * zeta + sigma2);
        assert!((report.sinr(0, 0) - expected).abs() < 1e-12 * expected);
        assert!((report.rate(0, 0) - (1.0 + expected).log2()).abs() < 1e-14);
    }

    #[test]
    fn doubling_power_increases_single_cell_sinr() {
        let stats = single_link_stats(1.0, 5.0, 3);
        let nu = PowerCoefficients::uniform(1, 1, 1, 0.2);
        let doubled = nu.scaled(2.0);
        let a = evaluate_sinr(&stats, &nu, 0.3).unwrap();
        let b = evaluate_sinr(&stats, &doubled, 0.3).unwrap();
        assert!(b.sinr(0, 0) > a.sinr(0, 0));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let stats = single_link_stats(1.0, 1.0, 2);
        let nu = PowerCoefficients::zeros(2, 1, 1);
        assert!(matches!(
            evaluate_sinr(&stats, &nu, 1.0),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn per_cell_power_single_term() {
        // nu = 0.5, alpha = 4 => P = 1.
        let stats = single_link_stats(2.0, 1e12, 2); // alpha ~ M beta = 4
        let nu = PowerCoefficients::uniform(1, 1, 1, 0.5);
        let p = per_cell_power(&stats, &nu);
        assert!((p[0] - 1.0).abs() < 1e-6);
        let zero = per_cell_power(&stats, &PowerCoefficients::zeros(1, 1, 1));
        assert_eq!(zero[0], 0.0);
    }

    #[test]
    fn throughput_at_unit_sinr() {
        let stats = single_link_stats(1.0, 1.0, 2);
        let nu = PowerCoefficients::zeros(1, 1, 1);
        let mut report = evaluate_sinr(&stats, &nu, 1.0).unwrap();
        report.sinr[0] = 1.0;
        report.rate[0] = 2f64.log2();
        let tp = report.throughput(20e6, 0.45);
        assert!((tp[0] - 9.0e6).abs() < 1e-6);
    }
}
