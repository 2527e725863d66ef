//! Multi-drop experiment runner: sweeps DAA splits (N, M) at a fixed total
//! antenna count, runs the configured allocators on every drop, and reduces
//! the per-user throughputs to median / 95%-likely / CDF summaries.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::NetworkConfig;
use crate::covariance::build_covariance_set;
use crate::error::{Error, Result};
use crate::estimation::{estimator_stats, pilot_gram};
use crate::geometry::build_layout;
use crate::power_control::{equal_nu, maxmin};
use crate::sinr::evaluate_sinr;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Version tag written into every results and summary file.
pub const RESULTS_FORMAT_VERSION: u32 = 1;
/// Number of quantiles in the reported CDF.
pub const CDF_POINTS: usize = 100;

/// Power allocation strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Allocator {
    MaxMin,
    EqualNu,
}

impl std::fmt::Display for Allocator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Allocator::MaxMin => write!(f, "maxmin"),
            Allocator::EqualNu => write!(f, "equalnu"),
        }
    }
}

/// One antenna split: N sub-arrays of M antennas each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DaaSplit {
    pub subarrays: usize,
    pub antennas: usize,
}

/// A full experiment: a base scenario swept over antenna splits that share
/// one total antenna count per cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub base: NetworkConfig,
    pub splits: Vec<DaaSplit>,
    pub drops: usize,
    pub allocators: Vec<Allocator>,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.splits.is_empty() {
            return Err(Error::InvalidConfig("no antenna splits given".into()));
        }
        if self.drops == 0 {
            return Err(Error::InvalidConfig("drops must be at least 1".into()));
        }
        if self.allocators.is_empty() {
            return Err(Error::InvalidConfig("no allocators selected".into()));
        }
        let total = self.splits[0].subarrays * self.splits[0].antennas;
        for s in &self.splits {
            if s.subarrays == 0 || s.antennas == 0 {
                return Err(Error::InvalidConfig(format!(
                    "split ({}, {}) has a zero dimension",
                    s.subarrays, s.antennas
                )));
            }
            if s.subarrays * s.antennas != total {
                return Err(Error::InvalidConfig(format!(
                    "split ({}, {}) changes the total antenna count ({} vs {})",
                    s.subarrays,
                    s.antennas,
                    s.subarrays * s.antennas,
                    total
                )));
            }
        }
        Ok(())
    }

    /// The base scenario with one split applied.
    pub fn config_for(&self, split: DaaSplit) -> NetworkConfig {
        NetworkConfig {
            subarrays_per_cell: split.subarrays,
            antennas_per_subarray: split.antennas,
            ..self.base.clone()
        }
    }
}

/// Outcome of one allocator on one drop.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AllocatorOutcome {
    pub allocator: Allocator,
    pub min_sinr: f64,
    /// Per-user downlink throughput in b/s, row-major [cell][user].
    pub throughput: Vec<f64>,
    pub per_cell_power: Vec<f64>,
}

/// One successful drop.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DropResult {
    pub drop_index: usize,
    pub outcomes: Vec<AllocatorOutcome>,
}

/// All drops for one antenna split.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitResults {
    pub split: DaaSplit,
    pub drops: Vec<DropResult>,
    /// (drop index, error message) for drops that failed; they are excluded
    /// from the summaries.
    pub failed: Vec<(usize, String)>,
}

/// Complete experiment output, self-describing for downstream tooling.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentResults {
    pub format_version: u32,
    pub base_config: NetworkConfig,
    pub requested_drops: usize,
    pub allocators: Vec<Allocator>,
    pub per_split: Vec<SplitResults>,
}

fn run_drop(
    config: &NetworkConfig,
    allocators: &[Allocator],
    drop_index: usize,
    stream: u64,
) -> Result<DropResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    rng.set_stream(stream);
    let layout = build_layout(config, &mut rng)?;
    let cov = build_covariance_set(config, &layout, &mut rng)?;
    let gram = pilot_gram(config);
    let stats = estimator_stats(&cov, &gram, config)?;
    let mut outcomes = Vec::with_capacity(allocators.len());
    for &allocator in allocators {
        let nu = match allocator {
            Allocator::MaxMin => {
                maxmin(&stats, config.noise_power, config.bisection_tolerance, None)?.nu_star
            }
            Allocator::EqualNu => equal_nu(&stats)?,
        };
        let report = evaluate_sinr(&stats, &nu, config.noise_power)?;
        outcomes.push(AllocatorOutcome {
            allocator,
            min_sinr: report.min_sinr,
            throughput: report.throughput(config.bandwidth, config.dl_fraction),
            per_cell_power: report.per_cell_power.clone(),
        });
    }
    Ok(DropResult {
        drop_index,
        outcomes,
    })
}

/// Runs every (split, drop) pair, drops in parallel with deterministic
/// per-drop RNG streams, preserving drop order in the output.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResults> {
    spec.validate()?;
    let mut per_split = Vec::with_capacity(spec.splits.len());
    for (split_idx, &split) in spec.splits.iter().enumerate() {
        let config = spec.config_for(split);
        config.validate()?;
        let results: Vec<(usize, Result<DropResult>)> = (0..spec.drops)
            .into_par_iter()
            .map(|drop_index| {
                let stream = ((split_idx as u64) << 32) | drop_index as u64;
                (
                    drop_index,
                    run_drop(&config, &spec.allocators, drop_index, stream),
                )
            })
            .collect();
        let mut drops = Vec::new();
        let mut failed = Vec::new();
        for (drop_index, result) in results {
            match result {
                Ok(drop) => drops.push(drop),
                Err(e) => failed.push((drop_index, e.to_string())),
            }
        }
        per_split.push(SplitResults {
            split,
            drops,
            failed,
        });
    }
    Ok(ExperimentResults {
        format_version: RESULTS_FORMAT_VERSION,
        base_config: spec.base.clone(),
        requested_drops: spec.drops,
        allocators: spec.allocators.clone(),
        per_split,
    })
}

/// Linear-interpolation percentile of an unsorted sample, p in [0, 100].
/// The interpolation position is p/100 * (n - 1).
pub fn percentile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyResults);
    }
    assert!((0.0..=100.0).contains(&p), "percentile {p} out of range");
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Ok(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
}

/// Summary statistics for one (split, allocator) cell of the sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryRow {
    pub split: DaaSplit,
    pub allocator: Allocator,
    /// Pooled per-user throughput samples over all successful drops.
    pub samples: usize,
    pub median_throughput: f64,
    /// 95%-likely throughput: the 5th percentile of the pooled samples.
    pub likely95_throughput: f64,
    /// CDF support: quantiles at 0, 100/(n-1), ..., 100 percent.
    pub cdf: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub format_version: u32,
    pub rows: Vec<SummaryRow>,
}

/// Reduces experiment results to per-(split, allocator) statistics of the
/// pooled per-user throughput.
pub fn summarize(results: &ExperimentResults) -> Result<Summary> {
    let mut rows = Vec::new();
    for split_results in &results.per_split {
        for (slot, &allocator) in results.allocators.iter().enumerate() {
            let mut pooled = Vec::new();
            for drop in &split_results.drops {
                pooled.extend_from_slice(&drop.outcomes[slot].throughput);
            }
            if pooled.is_empty() {
                return Err(Error::EmptyResults);
            }
            let cdf = (0..CDF_POINTS)
                .map(|i| percentile(&pooled, 100.0 * i as f64 / (CDF_POINTS - 1) as f64))
                .collect::<Result<Vec<f64>>>()?;
            rows.push(SummaryRow {
                split: split_results.split,
                allocator,
                samples: pooled.len(),
                median_throughput: percentile(&pooled, 50.0)?,
                likely95_throughput: percentile(&pooled, 5.0)?,
                cdf,
            });
        }
    }
    Ok(Summary {
        format_version: RESULTS_FORMAT_VERSION,
        rows,
    })
}

/// Renders a summary as CSV, one row per (split, allocator), throughputs in
/// Mbit/s.
pub fn summary_csv(summary: &Summary) -> String {
    let mut out = String::from(
        "subarrays,antennas_per_subarray,allocator,samples,median_mbps,likely95_mbps\n",
    );
    for row in &summary.rows {
        out.push_str(&format!(
            "{},{},{},{},{:.4},{:.4}\n",
            row.split.subarrays,
            row.split.antennas,
            row.allocator,
            row.samples,
            row.median_throughput / 1e6,
            row.likely95_throughput / 1e6,
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::FadingMode;

    fn small_spec() -> ExperimentSpec {
        ExperimentSpec {
            base: NetworkConfig {
                cells: 2,
                users_per_cell: 2,
                fading_mode: FadingMode::Uncorrelated,
                ..NetworkConfig::default()
            },
            splits: vec![
                DaaSplit {
                    subarrays: 1,
                    antennas: 8,
                },
                DaaSplit {
                    subarrays: 2,
                    antennas: 4,
                },
            ],
            drops: 3,
            allocators: vec![Allocator::MaxMin, Allocator::EqualNu],
        }
    }

    #[test]
    fn percentile_matches_the_worked_examples() {
        let values: Vec<f64> = (1..=100).map(|v| v as f64).collect();
        assert!((percentile(&values, 50.0).unwrap() - 50.5).abs() < 1e-12);
        assert!((percentile(&values, 5.0).unwrap() - 5.95).abs() < 1e-12);
        assert_eq!(percentile(&values, 0.0).unwrap(), 1.0);
        assert_eq!(percentile(&values, 100.0).unwrap(), 100.0);
        assert!(percentile(&[], 50.0).is_err());
        // Order independence.
        let mut shuffled = values.clone();
        shuffled.reverse();
        assert_eq!(
            percentile(&values, 37.0).unwrap(),
            percentile(&shuffled, 37.0).unwrap()
        );
    }

    #[test]
    fn spec_validation_rejects_mismatched_splits() {
        let mut spec = small_spec();
        spec.splits.push(DaaSplit {
            subarrays: 3,
            antennas: 3,
        });
        assert!(matches!(spec.validate(), Err(Error::InvalidConfig(_))));

        let mut spec = small_spec();
        spec.drops = 0;
        assert!(spec.validate().is_err());

        let mut spec = small_spec();
        spec.allocators.clear();
        assert!(spec.validate().is_err());
    }

    #[test]
    fn experiments_are_deterministic() {
        let spec = small_spec();
        let a = run_experiment(&spec).unwrap();
        let b = run_experiment(&spec).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn summary_has_one_row_per_split_and_allocator() {
        let spec = small_spec();
        let results = run_experiment(&spec).unwrap();
        let summary = summarize(&results).unwrap();
        assert_eq!(summary.rows.len(), 4);
        for row in &summary.rows {
            assert_eq!(row.samples, 3 * 4); // drops * total users
            assert!(row.median_throughput > 0.0);
            assert!(row.likely95_throughput <= row.median_throughput);
            assert_eq!(row.cdf.len(), CDF_POINTS);
            assert!(row.cdf.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn maxmin_outcome_dominates_equal_nu_per_drop() {
        let spec = small_spec();
        let results = run_experiment(&spec).unwrap();
        for split in &results.per_split {
            for drop in &split.drops {
                let maxmin = &drop.outcomes[0];
                let equal = &drop.outcomes[1];
                assert!(maxmin.min_sinr >= equal.min_sinr * (1.0 - 1e-9));
            }
        }
    }

    #[test]
    fn failed_drops_are_recorded_and_excluded() {
        let mut spec = small_spec();
        spec.base.min_user_distance = 5_000.0; // sampling cannot succeed
        let results = run_experiment(&spec).unwrap();
        for split in &results.per_split {
            assert!(split.drops.is_empty());
            assert_eq!(split.failed.len(), spec.drops);
        }
        assert!(matches!(summarize(&results), Err(Error::EmptyResults)));
    }

    #[test]
    fn csv_mirrors_the_summary_rows() {
        let spec = small_spec();
        let results = run_experiment(&spec).unwrap();
        let summary = summarize(&results).unwrap();
        let csv = summary_csv(&summary);
        let lines: Vec<&str> = csv.trim_end().lines().collect();
        assert_eq!(lines.len(), 1 + summary.rows.len());
        assert!(lines[0].starts_with("subarrays,antennas_per_subarray,allocator"));
        assert!(lines[1].starts_with("1,8,maxmin,"));
    }

    #[test]
    fn results_json_round_trip() {
        let spec = small_spec();
        let results = run_experiment(&spec).unwrap();
        let s = serde_json::to_string(&results).unwrap();
        let back: ExperimentResults = serde_json::from_str(&s).unwrap();
        assert_eq!(back.format_version, RESULTS_FORMAT_VERSION);
        assert_eq!(back.per_split.len(), results.per_split.len());
    }
}
