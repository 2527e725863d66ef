//! Network-wide downlink power allocation: the equal-nu baseline and
//! max-min fairness via bisection over a second-order-cone feasibility
//! problem.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::EstimatorStats;
use crate::sinr::{evaluate_sinr, PowerCoefficients};

/// Constraint-margin floor accepted from the conic solver; a little looser
/// than the solver's own feasibility tolerance so boundary solutions from
/// late bisection steps are not rejected.
const FEASIBILITY_MARGIN_TOL: f64 = -1e-6;
/// Cap on automatic doublings of the upper bisection bound.
const MAX_BOUND_DOUBLINGS: usize = 60;

/// A sparse affine expression `sum coeff * x_idx + constant`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl AffineExpr {
    pub fn constant(value: f64) -> Self {
        AffineExpr {
            terms: Vec::new(),
            constant: value,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(idx, c)| c * x[*idx])
            .sum::<f64>()
            + self.constant
    }
}

/// `||vector|| <= scalar` with affine entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SocConstraint {
    pub vector: Vec<AffineExpr>,
    pub scalar: AffineExpr,
}

impl SocConstraint {
    /// Signed satisfaction margin: scalar - ||vector||.
    pub fn margin(&self, x: &[f64]) -> f64 {
        let norm = self
            .vector
            .iter()
            .map(|e| e.eval(x).powi(2))
            .sum::<f64>()
            .sqrt();
        self.scalar.eval(x) - norm
    }
}

/// The assembled feasibility problem for one SINR target.
///
/// Variables 0..nu_vars are the flattened power coefficients in
/// (cell, user, sub-array) order; any further variables are the auxiliary
/// coherent-interference bounds of the optional formulation. Linear
/// constraints read `expression >= 0`.
#[derive(Debug, Clone)]
pub struct ConeProblem {
    pub num_vars: usize,
    pub nu_vars: usize,
    pub cells: usize,
    pub users: usize,
    pub subarrays: usize,
    pub soc_constraints: Vec<SocConstraint>,
    pub linear_constraints: Vec<AffineExpr>,
}

impl ConeProblem {
    /// Smallest signed margin over every constraint at `x`.
    pub fn min_margin(&self, x: &[f64]) -> f64 {
        let lin = self
            .linear_constraints
            .iter()
            .map(|e| e.eval(x))
            .fold(f64::INFINITY, f64::min);
        let soc = self
            .soc_constraints
            .iter()
            .map(|c| c.margin(x))
            .fold(f64::INFINITY, f64::min);
        lin.min(soc)
    }

    /// Plain-text dump for cross-checking against external solvers.
    ///
    /// Line format (objective-free feasibility problem):
    /// - `version 1`, `vars <count>`, `nu_vars <count>`
    /// - `lin <expr>` meaning expr >= 0
    /// - `soc <dim>` followed by one `t <expr>` line and dim-1 `v <expr>`
    ///   lines, meaning the Euclidean norm of the v-block is at most t
    /// - expressions are `coeff*x<idx> ... + constant`
    pub fn export_text(&self) -> String {
        fn expr(e: &AffineExpr) -> String {
            let mut parts: Vec<String> = e
                .terms
                .iter()
                .map(|(idx, c)| format!("{c:.17e}*x{idx}"))
                .collect();
            parts.push(format!("{:.17e}", e.constant));
            parts.join(" + ")
        }
        let mut out = String::new();
        out.push_str("# second-order-cone feasibility problem\n");
        out.push_str("version 1\n");
        out.push_str(&format!("vars {}\n", self.num_vars));
        out.push_str(&format!("nu_vars {}\n", self.nu_vars));
        out.push_str(&format!(
            "dims cells={} users={} subarrays={}\n",
            self.cells, self.users, self.subarrays
        ));
        for lin in &self.linear_constraints {
            out.push_str(&format!("lin {}\n", expr(lin)));
        }
        for soc in &self.soc_constraints {
            out.push_str(&format!("soc {}\n", soc.vector.len() + 1));
            out.push_str(&format!("t {}\n", expr(&soc.scalar)));
            for v in &soc.vector {
                out.push_str(&format!("v {}\n", expr(v)));
            }
        }
        out
    }
}

/// Options for assembling the feasibility problem.
#[derive(Debug, Clone, Copy, Default)]
pub struct FeasibilityOptions {
    /// Enforce the power budget per (cell, sub-array) instead of per cell.
    pub per_array_power: bool,
    /// Bound each coherent interference term through explicit auxiliary
    /// variables instead of embedding the affine sum directly in the cone.
    pub auxiliary_coherent_terms: bool,
}

/// Result of one feasibility solve.
#[derive(Debug, Clone)]
pub enum Feasibility {
    Feasible(PowerCoefficients),
    Infeasible,
}

/// Termination status of the bisection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaxMinStatus {
    Converged,
    /// The upper bound stayed feasible through every automatic doubling.
    BoundsExhausted,
}

/// Output of the max-min allocator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaxMinResult {
    pub nu_star: PowerCoefficients,
    /// Achieved common SINR target (last feasible bisection point).
    pub gamma_star: f64,
    /// Bisection iterations (feasibility solves inside the search loop).
    pub iterations: usize,
    /// Smallest constraint margin of the returned point.
    pub feasibility_margin: f64,
    pub status: MaxMinStatus,
    /// Minimum closed-form SINR evaluated at nu_star.
    pub achieved_min_sinr: f64,
    /// (gamma, feasible) for every solve, in order.
    pub trace: Vec<(f64, bool)>,
}

/// Equal-nu allocation: one common coefficient sized so the whole network
/// power budget is used, nu = sqrt(L / sum alpha).
pub fn equal_nu(stats: &EstimatorStats) -> Result<PowerCoefficients> {
    let total = stats.alpha_sum();
    if total <= 0.0 {
        return Err(Error::DegenerateStats);
    }
    let d = stats.dims;
    let value = (d.cells as f64 / total).sqrt();
    Ok(PowerCoefficients::uniform(d.cells, d.users, d.subarrays, value))
}

/// Assembles the SOC feasibility problem for SINR target `gamma`.
///
/// Per user (j, k) one cone stacks nu_{li}^n sqrt(zeta_{jk}^{lin}) over all
/// (l, i, n), one coherent inter-cell coordinate per interfering cell, and
/// the noise standard deviation; the right-hand side is
/// (1/sqrt(gamma)) sum_n nu_{jk}^n chi_{jk}^n. The power budget enters as
/// ||diag(sqrt(alpha)) nu_l|| <= 1 and every nu is nonnegative.
pub fn build_feasibility(
    stats: &EstimatorStats,
    noise_power: f64,
    gamma: f64,
) -> Result<ConeProblem> {
    build_feasibility_with(stats, noise_power, gamma, FeasibilityOptions::default())
}

pub fn build_feasibility_with(
    stats: &EstimatorStats,
    noise_power: f64,
    gamma: f64,
    options: FeasibilityOptions,
) -> Result<ConeProblem> {
    if gamma <= 0.0 {
        return Err(Error::NonPositiveTarget(gamma));
    }
    let d = stats.dims;
    let (cells, users, subarrays) = (d.cells, d.users, d.subarrays);
    let nu_vars = cells * users * subarrays;
    let var = |l: usize, i: usize, n: usize| (l * users + i) * subarrays + n;

    let mut num_vars = nu_vars;
    // Auxiliary variable index for the coherent term of interferer cell l
    // seen by user (j, k) through sub-array n.
    let mut aux = std::collections::HashMap::new();
    if options.auxiliary_coherent_terms {
        for j in 0..cells {
            for k in 0..users {
                for l in 0..cells {
                    if l == j {
                        continue;
                    }
                    for n in 0..subarrays {
                        aux.insert((j, k, l, n), num_vars);
                        num_vars += 1;
                    }
                }
            }
        }
    }

    let mut linear = Vec::new();
    for idx in 0..num_vars {
        linear.push(AffineExpr {
            terms: vec![(idx, 1.0)],
            constant: 0.0,
        });
    }
    if options.auxiliary_coherent_terms {
        // |nu_{lk}^n xi_{jk}^{ln}| <= aux, split into two half-spaces.
        for ((j, k, l, n), &a) in &aux {
            let xi = stats.xi(*j, *k, *l, *n);
            linear.push(AffineExpr {
                terms: vec![(a, 1.0), (var(*l, *k, *n), -xi)],
                constant: 0.0,
            });
            linear.push(AffineExpr {
                terms: vec![(a, 1.0), (var(*l, *k, *n), xi)],
                constant: 0.0,
            });
        }
    }

    let inv_sqrt_gamma = 1.0 / gamma.sqrt();
    let mut socs = Vec::new();
    for j in 0..cells {
        for k in 0..users {
            let mut vector = Vec::new();
            for l in 0..cells {
                for i in 0..users {
                    for n in 0..subarrays {
                        vector.push(AffineExpr {
                            terms: vec![(var(l, i, n), stats.zeta(j, k, l, i, n).sqrt())],
                            constant: 0.0,
                        });
                    }
                }
            }
            for l in 0..cells {
                if l == j {
                    continue;
                }
                let terms = if options.auxiliary_coherent_terms {
                    (0..subarrays).map(|n| (aux[&(j, k, l, n)], 1.0)).collect()
                } else {
                    (0..subarrays)
                        .map(|n| (var(l, k, n), stats.xi(j, k, l, n)))
                        .collect()
                };
                vector.push(AffineExpr {
                    terms,
                    constant: 0.0,
                });
            }
            vector.push(AffineExpr::constant(noise_power.sqrt()));
            let scalar = AffineExpr {
                terms: (0..subarrays)
                    .map(|n| (var(j, k, n), inv_sqrt_gamma * stats.chi(j, k, n)))
                    .collect(),
                constant: 0.0,
            };
            socs.push(SocConstraint { vector, scalar });
        }
    }

    // Power budget cones.
    if options.per_array_power {
        for l in 0..cells {
            for n in 0..subarrays {
                let vector = (0..users)
                    .map(|i| AffineExpr {
                        terms: vec![(var(l, i, n), stats.alpha(l, i, n).sqrt())],
                        constant: 0.0,
                    })
                    .collect();
                socs.push(SocConstraint {
                    vector,
                    scalar: AffineExpr::constant(1.0),
                });
            }
        }
    } else {
        for l in 0..cells {
            let mut vector = Vec::new();
            for i in 0..users {
                for n in 0..subarrays {
                    vector.push(AffineExpr {
                        terms: vec![(var(l, i, n), stats.alpha(l, i, n).sqrt())],
                        constant: 0.0,
                    });
                }
            }
            socs.push(SocConstraint {
                vector,
                scalar: AffineExpr::constant(1.0),
            });
        }
    }

    Ok(ConeProblem {
        num_vars,
        nu_vars,
        cells,
        users,
        subarrays,
        soc_constraints: socs,
        linear_constraints: linear,
    })
}

/// Solves a feasibility problem with the Clarabel interior-point solver.
///
/// Feasible solutions are post-checked to satisfy every constraint with
/// margin at least `FEASIBILITY_MARGIN_TOL`; anything the solver cannot
/// certify either way is reported as a numerical failure, distinct from
/// infeasibility.
///
/// The problem is first solved as given. If the solver stalls — which
/// happens when the trace statistics sit many orders of magnitude below the
/// O(1) power budgets — it is re-solved after an exact equilibration
/// (variable and per-cone rescaling that preserves the feasible set), and
/// only a second stall is surfaced as an error.
pub fn solve_feasibility(problem: &ConeProblem) -> Result<Feasibility> {
    match solve_feasibility_attempt(problem, false) {
        Err(Error::NumericalFailure(_)) => solve_feasibility_attempt(problem, true),
        other => other,
    }
}

fn solve_feasibility_attempt(problem: &ConeProblem, equilibrate: bool) -> Result<Feasibility> {
    use clarabel::algebra::CscMatrix;
    use clarabel::solver::{
        DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
    };

    let n = problem.num_vars;
    // Rows of A and entries of b, in cone order: nonnegative block first,
    // then each SOC as [scalar; vector]. Clarabel solves Ax + s = b with
    // s in the cone product, so each affine expression contributes its
    // negated coefficients to A and its constant to b.
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    let mut b = Vec::new();
    let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
    let mut row = 0usize;
    // Cone membership of each row; scaling a whole cone by a positive
    // constant preserves it (each nonnegative row is its own 1-d cone).
    let mut group_of_row: Vec<usize> = Vec::new();
    let mut group = 0usize;

    let push_expr = |expr: &AffineExpr, row: usize, triplets: &mut Vec<(usize, usize, f64)>, b: &mut Vec<f64>| {
        for (idx, c) in &expr.terms {
            triplets.push((row, *idx, -c));
        }
        b.push(expr.constant);
    };

    for lin in &problem.linear_constraints {
        push_expr(lin, row, &mut triplets, &mut b);
        group_of_row.push(group);
        group += 1;
        row += 1;
    }
    cones.push(SupportedConeT::NonnegativeConeT(
        problem.linear_constraints.len(),
    ));
    for soc in &problem.soc_constraints {
        push_expr(&soc.scalar, row, &mut triplets, &mut b);
        group_of_row.push(group);
        row += 1;
        for v in &soc.vector {
            push_expr(v, row, &mut triplets, &mut b);
            group_of_row.push(group);
            row += 1;
        }
        group += 1;
        cones.push(SupportedConeT::SecondOrderConeT(soc.vector.len() + 1));
    }

    // Exact equilibration, applied only on the retry path: substitute
    // variables x_j = d_j * u_j with d_j = 1 / max_i |A_ij| over the SOC
    // rows (the nonnegativity rows carry unit coefficients by construction
    // and say nothing about the magnitudes the variables must balance),
    // then scale each cone by the inverse of its largest entry. Scaling a
    // whole cone by a positive constant preserves it, so the feasible set
    // is unchanged; the solution is mapped back through d before any
    // post-checks.
    let mut col_scale = vec![1.0f64; n];
    if equilibrate {
        let num_lin_rows = problem.linear_constraints.len();
        let mut col_max = vec![0.0f64; n];
        for (r, c, v) in &triplets {
            if *r >= num_lin_rows {
                col_max[*c] = col_max[*c].max(v.abs());
            }
        }
        for (s, m) in col_scale.iter_mut().zip(&col_max) {
            if *m > 0.0 {
                *s = 1.0 / m;
            }
        }
        for (_, c, v) in &mut triplets {
            *v *= col_scale[*c];
        }
        let mut group_max = vec![0.0f64; group];
        for (r, _, v) in &triplets {
            let g = group_of_row[*r];
            group_max[g] = group_max[g].max(v.abs());
        }
        for (r, bv) in b.iter().enumerate() {
            let g = group_of_row[r];
            group_max[g] = group_max[g].max(bv.abs());
        }
        let group_scale: Vec<f64> = group_max
            .iter()
            .map(|m| if *m > 0.0 { 1.0 / m } else { 1.0 })
            .collect();
        for (r, _, v) in &mut triplets {
            *v *= group_scale[group_of_row[*r]];
        }
        for (r, bv) in b.iter_mut().enumerate() {
            *bv *= group_scale[group_of_row[r]];
        }
    }

    let a = csc_from_triplets(row, n, &mut triplets);
    let p = CscMatrix::<f64>::zeros((n, n));
    let q = vec![0.0; n];
    let mut settings = DefaultSettings::default();
    settings.verbose = false;
    let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, settings)
        .map_err(|e| Error::NumericalFailure(format!("solver setup: {e:?}")))?;
    solver.solve();

    let status = solver.solution.status;
    match status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => {
            let x_full: Vec<f64> = solver
                .solution
                .x
                .iter()
                .zip(&col_scale)
                .map(|(u, d)| u * d)
                .collect();
            let x: Vec<f64> = x_full[..problem.nu_vars]
                .iter()
                .map(|v| v.max(0.0))
                .collect();
            let margin = problem.min_margin(&x_full);
            if margin < FEASIBILITY_MARGIN_TOL {
                return Err(Error::NumericalFailure(format!(
                    "solver returned a point violating constraints by {margin:.3e}"
                )));
            }
            Ok(Feasibility::Feasible(PowerCoefficients::from_flat(
                problem.cells,
                problem.users,
                problem.subarrays,
                x,
            )))
        }
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            Ok(Feasibility::Infeasible)
        }
        other => Err(Error::NumericalFailure(format!(
            "solver stalled with status {other:?}"
        ))),
    }
}

fn csc_from_triplets(
    rows: usize,
    cols: usize,
    triplets: &mut Vec<(usize, usize, f64)>,
) -> clarabel::algebra::CscMatrix<f64> {
    triplets.sort_by_key(|(r, c, _)| (*c, *r));
    let mut colptr = vec![0usize; cols + 1];
    let mut rowval = Vec::with_capacity(triplets.len());
    let mut nzval = Vec::with_capacity(triplets.len());
    for (r, c, v) in triplets.iter() {
        colptr[c + 1] += 1;
        rowval.push(*r);
        nzval.push(*v);
    }
    for c in 0..cols {
        colptr[c + 1] += colptr[c];
    }
    clarabel::algebra::CscMatrix::new(rows, cols, colptr, rowval, nzval)
}

/// Interference-free full-power SINR upper bound, used to initialize the
/// bisection: max over users of (sum_n chi^2 / alpha) / sigma^2.
pub fn sinr_upper_bound(stats: &EstimatorStats, noise_power: f64) -> f64 {
    let d = stats.dims;
    let mut best: f64 = 0.0;
    for j in 0..d.cells {
        for k in 0..d.users {
            let mut value = 0.0;
            for n in 0..d.subarrays {
                let alpha = stats.alpha(j, k, n);
                if alpha > 0.0 {
                    value += stats.chi(j, k, n).powi(2) / alpha;
                }
            }
            best = best.max(value / noise_power);
        }
    }
    best
}

/// Max-min power allocation by bisection on the SINR target.
pub fn maxmin(
    stats: &EstimatorStats,
    noise_power: f64,
    epsilon: f64,
    gamma_bounds: Option<(f64, f64)>,
) -> Result<MaxMinResult> {
    maxmin_with(stats, noise_power, epsilon, gamma_bounds, FeasibilityOptions::default())
}

pub fn maxmin_with(
    stats: &EstimatorStats,
    noise_power: f64,
    epsilon: f64,
    gamma_bounds: Option<(f64, f64)>,
    options: FeasibilityOptions,
) -> Result<MaxMinResult> {
    assert!(epsilon > 0.0, "bisection tolerance must be positive");
    let d = stats.dims;
    let (mut lo, mut hi) = gamma_bounds.unwrap_or((0.0, sinr_upper_bound(stats, noise_power)));
    if hi <= lo {
        return Err(Error::InvalidConfig(format!(
            "empty bisection range [{lo}, {hi}]"
        )));
    }

    let mut trace = Vec::new();
    let mut best: Option<(f64, PowerCoefficients)> = None;
    let mut status = MaxMinStatus::Converged;

    let solve_at = |gamma: f64, trace: &mut Vec<(f64, bool)>| -> Result<Option<PowerCoefficients>> {
        let problem = build_feasibility_with(stats, noise_power, gamma, options)?;
        match solve_feasibility(&problem)? {
            Feasibility::Feasible(nu) => {
                trace.push((gamma, true));
                Ok(Some(nu))
            }
            Feasibility::Infeasible => {
                trace.push((gamma, false));
                Ok(None)
            }
        }
    };

    // The upper bound must be infeasible for bisection to bracket the
    // optimum; double it until it is.
    let mut doublings = 0;
    while let Some(nu) = solve_at(hi, &mut trace)? {
        best = Some((hi, nu));
        lo = hi;
        if doublings >= MAX_BOUND_DOUBLINGS {
            status = MaxMinStatus::BoundsExhausted;
            break;
        }
        hi *= 2.0;
        doublings += 1;
    }

    let mut iterations = 0usize;
    if status == MaxMinStatus::Converged {
        while hi - lo > epsilon {
            let mid = 0.5 * (lo + hi);
            iterations += 1;
            match solve_at(mid, &mut trace)? {
                Some(nu) => {
                    best = Some((mid, nu));
                    lo = mid;
                }
                None => hi = mid,
            }
        }
    }

    let (gamma_star, nu_star) = best.unwrap_or((
        0.0,
        PowerCoefficients::zeros(d.cells, d.users, d.subarrays),
    ));
    let feasibility_margin = if gamma_star > 0.0 {
        let problem = build_feasibility_with(stats, noise_power, gamma_star, options)?;
        let mut x = nu_star.as_flat().to_vec();
        x.resize(problem.num_vars, 0.0);
        if options.auxiliary_coherent_terms {
            // Tight auxiliary values for the margin check.
            reconstruct_auxiliaries(stats, &nu_star, &mut x);
        }
        problem.min_margin(&x)
    } else {
        0.0
    };
    let achieved_min_sinr = evaluate_sinr(stats, &nu_star, noise_power)?.min_sinr;

    Ok(MaxMinResult {
        nu_star,
        gamma_star,
        iterations,
        feasibility_margin,
        status,
        achieved_min_sinr,
        trace,
    })
}

fn reconstruct_auxiliaries(stats: &EstimatorStats, nu: &PowerCoefficients, x: &mut [f64]) {
    let d = stats.dims;
    let mut idx = nu.len();
    for j in 0..d.cells {
        for k in 0..d.users {
            for l in 0..d.cells {
                if l == j {
                    continue;
                }
                for n in 0..d.subarrays {
                    x[idx] = (nu.get(l, k, n) * stats.xi(j, k, l, n)).abs();
                    idx += 1;
                }
            }
        }
    }
}
