use std::io::Write;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::algorithms::{run_algorithm, Algorithm};
use crate::allocation::{downlink_rates, optimal_allocation, uniform_allocation, Allocation, Association};
use crate::error::Result;
use crate::msa::solve_msa;
use crate::net_model::{compute_rate_matrix, generate_network_stream, NetworkInstance, RateMatrix};
use crate::objective::AllocMode;
use crate::utility::{chiu_jain, sum_utility, Alpha};

/// Name used for the MSA baseline rows.
pub const MSA_ROW: &str = "MSA";

/// One row of the results CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub sample_id: usize,
    pub alpha: Alpha,
    /// Algorithm name, or [`MSA_ROW`] for the multi-station baseline.
    pub algorithm: String,
    /// `optimal`, `uniform`, or `msa` for the baseline.
    pub alloc_mode: String,
    pub sum_utility: f64,
    /// `f_MSA - f_algo`; NaN where no MSA baseline exists (`α = ∞`).
    pub utility_loss_abs: f64,
    /// `utility_loss_abs / |f_MSA|`; NaN when `f_MSA` is zero or missing.
    pub utility_loss_rel: f64,
    /// Chiu-Jain index of the per-MU downlink rates.
    pub chiu_jain_network: f64,
    pub sum_throughput_bps: f64,
    /// Wall time of association plus allocation; absent when timing is off.
    pub runtime_ms: Option<f64>,
    /// Whether the MSA baseline of this (sample, α) cell converged.
    pub msa_converged: Option<bool>,
}

/// Knobs that do not belong in the config file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Record wall times. Off makes the output reproducible byte for byte.
    pub timing: bool,
    /// Keep every row's association and allocation in [`RunOutput::details`].
    pub keep_details: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            timing: true,
            keep_details: false,
        }
    }
}

/// Association (absent for the MSA baseline) and allocation behind a record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordDetail {
    pub association: Option<Association>,
    pub allocation: Allocation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub alpha: Alpha,
    pub algorithm: String,
    pub alloc_mode: String,
    pub metric: String,
    /// Number of finite values aggregated.
    pub n: usize,
    pub mean: f64,
    /// Normal-approximation 95% half-width `1.96 s / √n`; NaN for `n < 2`.
    pub ci95: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub records: Vec<ExperimentRecord>,
    pub summary: Vec<SummaryRow>,
    /// Parallel to `records` when [`RunOptions::keep_details`] is set.
    pub details: Option<Vec<RecordDetail>>,
}

impl RunOutput {
    /// Summary row for one (α, algorithm, mode, metric) cell.
    pub fn summary_for(&self, alpha: Alpha, algorithm: &str, alloc_mode: &str, metric: &str) -> Option<&SummaryRow> {
        self.summary.iter().find(|s| {
            s.alpha == alpha && s.algorithm == algorithm && s.alloc_mode == alloc_mode && s.metric == metric
        })
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutput> {
    run_experiment_with(config, RunOptions::default())
}

/// Runs every (sample, α, algorithm) cell. Samples run in parallel; sample
/// `i` draws its topology from RNG stream `i`, so the records do not depend
/// on the number of worker threads.
pub fn run_experiment_with(config: &ExperimentConfig, options: RunOptions) -> Result<RunOutput> {
    config.validate()?;
    let per_sample: Vec<Vec<(ExperimentRecord, Option<RecordDetail>)>> = (0..config.num_samples)
        .into_par_iter()
        .map(|sample_id| run_sample(config, options, sample_id))
        .collect::<Result<_>>()?;
    let (records, details): (Vec<_>, Vec<_>) = per_sample.into_iter().flatten().unzip();
    let summary = summarize(config, &records);
    let details = options
        .keep_details
        .then(|| details.into_iter().map(|d| d.expect("kept")).collect());
    Ok(RunOutput {
        records,
        summary,
        details,
    })
}

fn run_sample(
    config: &ExperimentConfig,
    options: RunOptions,
    sample_id: usize,
) -> Result<Vec<(ExperimentRecord, Option<RecordDetail>)>> {
    let instance = generate_network_stream(&config.scenario, sample_id as u64)?;
    let rates = compute_rate_matrix(&instance)?;
    let mut out = Vec::new();
    for &alpha in &config.alpha_grid {
        out.extend(run_cell(config, options, sample_id, alpha, &instance, &rates)?);
    }
    Ok(out)
}

fn metrics(alpha: Alpha, rates: &RateMatrix, alloc: &Allocation) -> (f64, f64, f64) {
    let r = downlink_rates(rates, alloc);
    let j = chiu_jain(&r).unwrap_or(f64::NAN);
    (sum_utility(alpha, &r), j, r.total())
}

fn run_cell(
    config: &ExperimentConfig,
    options: RunOptions,
    sample_id: usize,
    alpha: Alpha,
    instance: &NetworkInstance,
    rates: &RateMatrix,
) -> Result<Vec<(ExperimentRecord, Option<RecordDetail>)>> {
    let mut out = Vec::new();
    let msa = match alpha {
        Alpha::Finite(_) => Some(solve_msa(rates, alpha, &config.solver)?),
        Alpha::Infinity => None,
    };
    let f_msa = msa.as_ref().map_or(f64::NAN, |m| m.objective.value);
    let converged = msa.as_ref().map(|m| m.converged);
    let loss = |f: f64| {
        let abs = f_msa - f;
        let rel = if f_msa != 0.0 { abs / f_msa.abs() } else { f64::NAN };
        (abs, rel)
    };

    if let Some(m) = &msa {
        let (u, j, t) = metrics(alpha, rates, &m.allocation);
        out.push((
            ExperimentRecord {
                sample_id,
                alpha,
                algorithm: MSA_ROW.into(),
                alloc_mode: "msa".into(),
                sum_utility: u,
                utility_loss_abs: 0.0,
                utility_loss_rel: 0.0,
                chiu_jain_network: j,
                sum_throughput_bps: t,
                runtime_ms: None,
                msa_converged: converged,
            },
            options.keep_details.then(|| RecordDetail {
                association: None,
                allocation: m.allocation.clone(),
            }),
        ));
    }

    for spec in &config.algorithms {
        if spec.algorithm == Algorithm::MsaRnd && msa.is_none() {
            // Nothing to round at α = ∞.
            continue;
        }
        let cfg = spec.at(alpha);
        let start = Instant::now();
        let assoc = run_algorithm(&cfg, instance, rates, msa.as_ref().map(|m| &m.allocation))?;
        let alloc = match spec.alloc_mode {
            AllocMode::Optimal => optimal_allocation(rates, &assoc, alpha),
            AllocMode::Uniform => uniform_allocation(&assoc),
        };
        let elapsed = start.elapsed().as_secs_f64() * 1e3;
        let (u, j, t) = metrics(alpha, rates, &alloc);
        let (abs, rel) = loss(u);
        out.push((
            ExperimentRecord {
                sample_id,
                alpha,
                algorithm: spec.algorithm.name().into(),
                alloc_mode: spec.alloc_mode.to_string(),
                sum_utility: u,
                utility_loss_abs: abs,
                utility_loss_rel: rel,
                chiu_jain_network: j,
                sum_throughput_bps: t,
                runtime_ms: options.timing.then_some(elapsed),
                msa_converged: converged,
            },
            options.keep_details.then(|| RecordDetail {
                association: Some(assoc),
                allocation: alloc,
            }),
        ));
    }
    Ok(out)
}

/// Mean and `1.96 s / √n` over the finite entries.
pub fn mean_ci95(values: impl IntoIterator<Item = f64>) -> (usize, f64, f64) {
    let v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
    let n = v.len();
    if n == 0 {
        return (0, f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (n, mean, f64::NAN);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (n, mean, 1.96 * (var / n as f64).sqrt())
}

const SUMMARY_METRICS: [&str; 5] = [
    "sum_utility",
    "utility_loss_abs",
    "utility_loss_rel",
    "chiu_jain_network",
    "sum_throughput_bps",
];

fn metric_value(r: &ExperimentRecord, metric: &str) -> f64 {
    match metric {
        "sum_utility" => r.sum_utility,
        "utility_loss_abs" => r.utility_loss_abs,
        "utility_loss_rel" => r.utility_loss_rel,
        "chiu_jain_network" => r.chiu_jain_network,
        _ => r.sum_throughput_bps,
    }
}

fn summarize(config: &ExperimentConfig, records: &[ExperimentRecord]) -> Vec<SummaryRow> {
    let mut keys: Vec<(String, String)> = vec![(MSA_ROW.into(), "msa".into())];
    keys.extend(
        config
            .algorithms
            .iter()
            .map(|s| (s.algorithm.name().to_string(), s.alloc_mode.to_string())),
    );
    keys.dedup();
    let mut rows = Vec::new();
    for &alpha in &config.alpha_grid {
        for (algorithm, mode) in &keys {
            let cell: Vec<&ExperimentRecord> = records
                .iter()
                .filter(|r| r.alpha == alpha && &r.algorithm == algorithm && &r.alloc_mode == mode)
                .collect();
            if cell.is_empty() {
                continue;
            }
            for metric in SUMMARY_METRICS {
                let (n, mean, ci95) = mean_ci95(cell.iter().map(|r| metric_value(r, metric)));
                rows.push(SummaryRow {
                    alpha,
                    algorithm: algorithm.clone(),
                    alloc_mode: mode.clone(),
                    metric: metric.into(),
                    n,
                    mean,
                    ci95,
                });
            }
        }
    }
    rows
}

/// Provenance lines written above every CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvHeader {
    pub config_hash: String,
    pub seed: u64,
    /// Include a generation timestamp (breaks byte-for-byte reproducibility).
    pub timestamp: bool,
}

impl CsvHeader {
    pub fn for_config(config: &ExperimentConfig, timestamp: bool) -> Self {
        CsvHeader {
            config_hash: config.hash(),
            seed: config.scenario.rng_seed,
            timestamp,
        }
    }

    pub fn write<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "# ssanum {}", env!("CARGO_PKG_VERSION"))?;
        writeln!(w, "# config_sha256: {}", self.config_hash)?;
        writeln!(w, "# seed: {}", self.seed)?;
        writeln!(
            w,
            "# rate_unit: bit/s, rate = bandwidth_hz * log2(1 + sinr), powers in mW"
        )?;
        if self.timestamp {
            let secs = SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            writeln!(w, "# generated_unix: {secs}")?;
        }
        Ok(())
    }
}

/// Header block followed by one CSV row per item.
pub fn write_csv<W: Write, T: Serialize>(mut w: W, header: &CsvHeader, rows: &[T]) -> Result<()> {
    header.write(&mut w)?;
    let mut csv = csv::Writer::from_writer(w);
    for r in rows {
        csv.serialize(r)?;
    }
    csv.flush()?;
    Ok(())
}

/// Reads rows back, skipping the `#` header block.
pub fn read_records(text: &str) -> Result<Vec<ExperimentRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let rows = rdr.deserialize().collect::<std::result::Result<_, _>>()?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::config::AlgoSpec;
    use crate::net_model::ScenarioConfig;

    fn small(algos: Vec<AlgoSpec>, grid: Vec<Alpha>, samples: usize) -> ExperimentConfig {
        ExperimentConfig {
            num_samples: samples,
            alpha_grid: grid,
            scenario: ScenarioConfig {
                num_mus: 12,
                num_bss: 3,
                ..ScenarioConfig::default()
            },
            algorithms: algos,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn single_maxs_row_has_nonnegative_loss() {
        let cfg = small(vec![AlgoSpec::new(Algorithm::MaxS, AllocMode::Optimal)], vec![Alpha::ONE], 1);
        let out = run_experiment(&cfg).unwrap();
        let rows: Vec<_> = out.records.iter().filter(|r| r.algorithm == "MaxS").collect();
        assert_eq!(rows.len(), 1);
        let f_msa = out.records.iter().find(|r| r.algorithm == MSA_ROW).unwrap().sum_utility;
        assert!(rows[0].utility_loss_abs >= -1e-8 * f_msa.abs().max(1.0));
    }

    #[test]
    fn ci_formula() {
        let (n, m, h) = mean_ci95([1.0, 2.0, 3.0, f64::NAN]);
        assert_eq!((n, m), (3, 2.0));
        assert!((h - 1.96 / 3f64.sqrt()).abs() < 1e-15);
        assert!(mean_ci95([5.0]).2.is_nan());
    }

    #[test]
    fn throughput_matches_stored_allocation() {
        let cfg = small(
            vec![
                AlgoSpec::new(Algorithm::Cga, AllocMode::Optimal),
                AlgoSpec::new(Algorithm::Lgan, AllocMode::Uniform),
            ],
            vec![Alpha::Finite(0.5), Alpha::Infinity],
            2,
        );
        let out = run_experiment_with(&cfg, RunOptions { timing: false, keep_details: true }).unwrap();
        let details = out.details.as_ref().unwrap();
        assert_eq!(details.len(), out.records.len());
        for (rec, det) in out.records.iter().zip(details) {
            let inst = generate_network_stream(&cfg.scenario, rec.sample_id as u64).unwrap();
            let rates = compute_rate_matrix(&inst).unwrap();
            let total = downlink_rates(&rates, &det.allocation).total();
            assert_eq!(total, rec.sum_throughput_bps);
            assert!(rec.runtime_ms.is_none());
        }
        // No MSA baseline at α = ∞.
        assert!(out
            .records
            .iter()
            .filter(|r| r.alpha == Alpha::Infinity)
            .all(|r| r.algorithm != MSA_ROW && r.utility_loss_abs.is_nan()));
    }

    #[test]
    fn csv_round_trip() {
        let cfg = small(vec![AlgoSpec::new(Algorithm::MinD, AllocMode::Uniform)], vec![Alpha::Finite(2.0), Alpha::Infinity], 2);
        let out = run_experiment_with(&cfg, RunOptions { timing: false, keep_details: false }).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &CsvHeader::for_config(&cfg, false), &out.records).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# ssanum"));
        let back = read_records(&text).unwrap();
        assert_eq!(back.len(), out.records.len());
        for (a, b) in back.iter().zip(&out.records) {
            assert_eq!(a.sample_id, b.sample_id);
            assert_eq!(a.alpha, b.alpha);
            assert_eq!(a.sum_utility.to_bits(), b.sum_utility.to_bits());
        }
    }
}
