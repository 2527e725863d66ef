//! Pilot correlations, the pilot observation covariance Q, the MMSE and
//! element-wise MMSE estimator matrices W, and the scalar link statistics
//! (chi, zeta, xi, alpha) that fully determine the closed-form SINR and the
//! per-cell power constraint.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::config::{EstimatorKind, NetworkConfig};
use crate::covariance::{CovarianceSet, Dims};
use crate::error::{Error, Result};

/// Relative cap on the imaginary round-off of traces that are real by
/// Hermitian structure.
const IMAG_TRACE_TOL: f64 = 1e-9;

/// Pilot sequence correlations rho_{li}^{jk} = phi_{li}^H phi_{jk}.
///
/// With orthogonal pilots inside a cell and the same pilot set reused in
/// every cell, rho is 1 when the user indices match and 0 otherwise. The
/// container stays complex-valued for generality.
#[derive(Debug, Clone)]
pub struct PilotGram {
    cells: usize,
    users: usize,
    rho: Vec<Complex64>,
}

impl PilotGram {
    pub fn rho(&self, l: usize, i: usize, j: usize, k: usize) -> Complex64 {
        self.rho[((l * self.users + i) * self.cells + j) * self.users + k]
    }
}

/// Pilot gram under the paper's reuse scheme (tau_p = K, orthogonal pilots
/// per cell, full reuse across cells).
pub fn pilot_gram(config: &NetworkConfig) -> PilotGram {
    let (cells, users) = (config.cells, config.users_per_cell);
    let mut rho = vec![Complex64::new(0.0, 0.0); cells * users * cells * users];
    for l in 0..cells {
        for i in 0..users {
            for j in 0..cells {
                rho[((l * users + i) * cells + j) * users + i] = Complex64::new(1.0, 0.0);
            }
        }
    }
    PilotGram { cells, users, rho }
}

/// Pilot observation covariance for user (j, k) at sub-array (j, n):
/// Q = sum over (l, i) of |rho_{li}^{jk}|^2 R_{li}^{jn} + (1/rho_tr) I.
pub fn compute_q(
    cov: &CovarianceSet,
    gram: &PilotGram,
    pilot_snr: f64,
    j: usize,
    k: usize,
    n: usize,
) -> DMatrix<Complex64> {
    let m = cov.dims.antennas;
    let mut q = DMatrix::from_diagonal_element(m, m, Complex64::new(1.0 / pilot_snr, 0.0));
    for l in 0..cov.dims.cells {
        for i in 0..cov.dims.users {
            let w = gram.rho(l, i, j, k).norm_sqr();
            if w > 0.0 {
                q += cov.r(l, i, j, n).scale(w);
            }
        }
    }
    q
}

/// MMSE estimator matrix W = R Q^{-1}, computed through a Cholesky solve of
/// the Hermitian PD matrix Q.
pub fn mmse_w(
    r: &DMatrix<Complex64>,
    q: &DMatrix<Complex64>,
    link: (usize, usize, usize),
) -> Result<DMatrix<Complex64>> {
    let chol = q.clone().cholesky().ok_or(Error::SingularQ {
        cell: link.0,
        user: link.1,
        subarray: link.2,
    })?;
    // W = R Q^{-1}  <=>  Q W^H = R^H since Q is Hermitian.
    let wh = chol.solve(&r.adjoint());
    Ok(wh.adjoint())
}

/// Element-wise MMSE estimator: a diagonal matrix with entries
/// [R_{jk}^{jn}]_z / (sum |rho|^2 [R_{li}^{jn}]_z + 1/rho_tr).
pub fn ewmmse_w(
    cov: &CovarianceSet,
    gram: &PilotGram,
    pilot_snr: f64,
    j: usize,
    k: usize,
    n: usize,
) -> DMatrix<Complex64> {
    let m = cov.dims.antennas;
    let mut w = DMatrix::zeros(m, m);
    let r_self = cov.r(j, k, j, n);
    for z in 0..m {
        let mut denom = 1.0 / pilot_snr;
        for l in 0..cov.dims.cells {
            for i in 0..cov.dims.users {
                let weight = gram.rho(l, i, j, k).norm_sqr();
                if weight > 0.0 {
                    denom += weight * cov.r(l, i, j, n)[(z, z)].re;
                }
            }
        }
        w[(z, z)] = Complex64::new(r_self[(z, z)].re / denom, 0.0);
    }
    w
}

/// Per-link scalar statistics of the configured estimator.
///
/// All quantities are traces of products of Hermitian matrices; their
/// imaginary round-off is asserted small and discarded.
#[derive(Debug, Clone)]
pub struct EstimatorStats {
    pub dims: Dims,
    pub kind: EstimatorKind,
    /// chi_{jk}^n = tr(W_{jk}^n R_{jk}^{jn}), indexed [j][k][n].
    chi: Vec<f64>,
    /// zeta_{jk}^{lin} = tr(W_{li}^n Q_{li}^n W_{li}^{nH} R_{jk}^{ln}),
    /// indexed [j][k][l][i][n].
    zeta: Vec<f64>,
    /// xi_{jk}^{ln} = tr(W_{lk}^n R_{jk}^{ln}), indexed [j][k][l][n].
    xi: Vec<f64>,
    /// alpha_{li}^n = tr(W_{li}^n Q_{li}^n W_{li}^{nH}), indexed [l][i][n].
    alpha: Vec<f64>,
}

impl EstimatorStats {
    pub fn chi(&self, j: usize, k: usize, n: usize) -> f64 {
        self.chi[(j * self.dims.users + k) * self.dims.subarrays + n]
    }

    pub fn zeta(&self, j: usize, k: usize, l: usize, i: usize, n: usize) -> f64 {
        let d = &self.dims;
        self.zeta[(((j * d.users + k) * d.cells + l) * d.users + i) * d.subarrays + n]
    }

    pub fn xi(&self, j: usize, k: usize, l: usize, n: usize) -> f64 {
        let d = &self.dims;
        self.xi[((j * d.users + k) * d.cells + l) * d.subarrays + n]
    }

    pub fn alpha(&self, l: usize, i: usize, n: usize) -> f64 {
        self.alpha[(l * self.dims.users + i) * self.dims.subarrays + n]
    }

    pub fn alpha_sum(&self) -> f64 {
        self.alpha.iter().sum()
    }
}

fn trace_product(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for r in 0..a.nrows() {
        for c in 0..a.ncols() {
            acc += a[(r, c)] * b[(c, r)];
        }
    }
    acc
}

fn real_trace(value: Complex64, what: &str) -> f64 {
    let scale = value.norm().max(f64::MIN_POSITIVE);
    debug_assert!(
        value.im.abs() <= IMAG_TRACE_TOL * scale,
        "{what}: imaginary residue {} exceeds {} of magnitude {}",
        value.im,
        IMAG_TRACE_TOL,
        scale
    );
    value.re
}

/// Computes chi, zeta, xi, and alpha for every link, using the estimator
/// selected in the config.
pub fn estimator_stats(
    cov: &CovarianceSet,
    gram: &PilotGram,
    config: &NetworkConfig,
) -> Result<EstimatorStats> {
    let dims = cov.dims;
    let (cells, users, subarrays) = (dims.cells, dims.users, dims.subarrays);

    // W_{li}^n and B_{li}^n = W Q W^H for every own-cell link (l, i, n).
    let mut w_mats = Vec::with_capacity(cells * users * subarrays);
    let mut b_mats = Vec::with_capacity(cells * users * subarrays);
    for l in 0..cells {
        for i in 0..users {
            for n in 0..subarrays {
                let q = compute_q(cov, gram, config.pilot_snr, l, i, n);
                let w = match config.estimator {
                    EstimatorKind::Mmse => mmse_w(cov.r(l, i, l, n), &q, (l, i, n))?,
                    EstimatorKind::EwMmse => ewmmse_w(cov, gram, config.pilot_snr, l, i, n),
                };
                let b = &w * &q * w.adjoint();
                w_mats.push(w);
                b_mats.push(b);
            }
        }
    }
    let own = |l: usize, i: usize, n: usize| (l * users + i) * subarrays + n;

    let mut chi = vec![0.0; cells * users * subarrays];
    let mut zeta = vec![0.0; cells * users * cells * users * subarrays];
    let mut xi = vec![0.0; cells * users * cells * subarrays];
    let mut alpha = vec![0.0; cells * users * subarrays];

    for l in 0..cells {
        for i in 0..users {
            for n in 0..subarrays {
                let a = real_trace(b_mats[own(l, i, n)].trace(), "alpha");
                alpha[own(l, i, n)] = a.max(0.0);
            }
        }
    }
    for j in 0..cells {
        for k in 0..users {
            for n in 0..subarrays {
                let c = real_trace(
                    trace_product(&w_mats[own(j, k, n)], cov.r(j, k, j, n)),
                    "chi",
                );
                chi[(j * users + k) * subarrays + n] = c.max(0.0);
            }
            for l in 0..cells {
                for n in 0..subarrays {
                    let x = real_trace(
                        trace_product(&w_mats[own(l, k, n)], cov.r(j, k, l, n)),
                        "xi",
                    );
                    xi[((j * users + k) * cells + l) * subarrays + n] = x;
                }
                for i in 0..users {
                    for n in 0..subarrays {
                        let z = real_trace(
                            trace_product(&b_mats[own(l, i, n)], cov.r(j, k, l, n)),
                            "zeta",
                        );
                        zeta[(((j * users + k) * cells + l) * users + i) * subarrays + n] =
                            z.max(0.0);
                    }
                }
            }
        }
    }

    Ok(EstimatorStats {
        dims,
        kind: config.estimator,
        chi,
        zeta,
        xi,
        alpha,
    })
}
