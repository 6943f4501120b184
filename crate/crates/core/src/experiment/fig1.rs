use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::Result;
use crate::msa::{msa_ssa_likeness, solve_msa};
use crate::net_model::{compute_rate_matrix, generate_network_stream};
use crate::utility::{percentile_sorted, Alpha};

pub const FIG1_PERCENTILES: [f64; 5] = [0.0, 25.0, 50.0, 75.0, 100.0];

/// Sample-averaged percentiles of the per-MU Chiu-Jain index `J_u` of the
/// MSA optimum at one α.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig1Row {
    pub alpha: Alpha,
    pub p0: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub p100: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig1Table {
    pub rows: Vec<Fig1Row>,
    /// Grid points with no MSA problem (`α = ∞`).
    pub skipped: Vec<Alpha>,
    /// (sample, α) cells whose MSA solve did not converge.
    pub unconverged: Vec<(usize, Alpha)>,
}

pub fn run_fig1_analysis(config: &ExperimentConfig) -> Result<Fig1Table> {
    config.validate()?;
    let finite: Vec<Alpha> = config
        .alpha_grid
        .iter()
        .copied()
        .filter(|a| !a.is_infinite())
        .collect();
    let skipped = config
        .alpha_grid
        .iter()
        .copied()
        .filter(|a| a.is_infinite())
        .collect();

    // Per sample: one percentile vector and convergence flag per finite α.
    let per_sample: Vec<Vec<([f64; 5], bool)>> = (0..config.num_samples)
        .into_par_iter()
        .map(|s| -> Result<_> {
            let inst = generate_network_stream(&config.scenario, s as u64)?;
            let rates = compute_rate_matrix(&inst)?;
            finite
                .iter()
                .map(|&alpha| {
                    let sol = solve_msa(&rates, alpha, &config.solver)?;
                    let mut j = msa_ssa_likeness(&rates, &sol.allocation)?.per_mu;
                    j.sort_by(f64::total_cmp);
                    Ok((FIG1_PERCENTILES.map(|q| percentile_sorted(&j, q)), sol.converged))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let n = config.num_samples as f64;
    let mut rows = Vec::with_capacity(finite.len());
    let mut unconverged = Vec::new();
    for (k, &alpha) in finite.iter().enumerate() {
        let mut acc = [0.0; 5];
        for (s, sample) in per_sample.iter().enumerate() {
            let (p, ok) = sample[k];
            for i in 0..5 {
                acc[i] += p[i];
            }
            if !ok {
                unconverged.push((s, alpha));
            }
        }
        let [p0, p25, p50, p75, p100] = acc.map(|v| v / n);
        rows.push(Fig1Row {
            alpha,
            p0,
            p25,
            p50,
            p75,
            p100,
        });
    }
    unconverged.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(Fig1Table {
        rows,
        skipped,
        unconverged,
    })
}
