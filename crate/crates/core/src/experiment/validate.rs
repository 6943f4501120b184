use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::algorithms::{
    brute_force_ssa, msa_round, run_cga, run_lga, run_lgan_observed, run_max_sinr, run_min_distance,
    rounding_expectation_check, BRUTE_FORCE_CAP,
};
use crate::allocation::{
    downlink_rates, optimal_allocation, optimal_shares, uniform_allocation, Association,
};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::msa::{solve_msa_observed, SolverSettings};
use crate::net_model::{compute_rate_matrix, generate_network_stream, stream_rng, ScenarioConfig};
use crate::objective::{f_so, f_ssa, f_su, greedy_delta, AllocMode, FractionalAssociation};
use crate::utility::{chiu_jain, sum_utility, Alpha};

/// Default instance sizes `(num_mus, num_bss)`.
pub const DEFAULT_SIZES: [(usize, usize); 3] = [(4, 2), (6, 3), (5, 4)];
/// Random instances drawn per size.
pub const INSTANCES_PER_SIZE: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub category: String,
    pub name: String,
    pub num_mus: usize,
    pub num_bss: usize,
    pub instance: usize,
    pub passed: bool,
    /// Empty on success, the violated quantity otherwise.
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CategoryCount {
    pub passed: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn counts(&self) -> BTreeMap<String, CategoryCount> {
        let mut m: BTreeMap<String, CategoryCount> = BTreeMap::new();
        for c in &self.checks {
            let e = m.entry(c.category.clone()).or_default();
            if c.passed {
                e.passed += 1;
            } else {
                e.failed += 1;
            }
        }
        m
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<12} {:>7} {:>7}", "category", "passed", "failed")?;
        for (cat, c) in self.counts() {
            writeln!(f, "{cat:<12} {:>7} {:>7}", c.passed, c.failed)?;
        }
        for c in self.failures() {
            writeln!(
                f,
                "FAIL {}/{} size {}x{} instance {}: {}",
                c.category, c.name, c.num_mus, c.num_bss, c.instance, c.detail
            )?;
        }
        Ok(())
    }
}

struct Recorder<'a> {
    report: &'a mut ValidationReport,
    size: (usize, usize),
    instance: usize,
}

impl Recorder<'_> {
    fn check(&mut self, category: &str, name: &str, ok: bool, detail: impl FnOnce() -> String) {
        self.report.checks.push(CheckResult {
            category: category.into(),
            name: name.into(),
            num_mus: self.size.0,
            num_bss: self.size.1,
            instance: self.instance,
            passed: ok,
            detail: if ok { String::new() } else { detail() },
        });
    }
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

const ALPHAS: [Alpha; 7] = [
    Alpha::Finite(0.0),
    Alpha::Finite(0.5),
    Alpha::Finite(1.0),
    Alpha::Finite(1.5),
    Alpha::Finite(2.0),
    Alpha::Finite(3.0),
    Alpha::Infinity,
];

/// Runs the cross-module invariants on random default-parameter networks of
/// each size. Sizes above the exhaustive-search cap are a configuration error.
pub fn run_validation_suite(seed: u64, sizes: &[(usize, usize)]) -> Result<ValidationReport> {
    if sizes.is_empty() {
        return Err(Error::Config("no sizes given".into()));
    }
    for &(nu, nb) in sizes {
        if nu == 0 || nb == 0 {
            return Err(Error::Config(format!("size {nu}x{nb} is empty")));
        }
        let within = u32::try_from(nu)
            .ok()
            .and_then(|e| (nb as u64).checked_pow(e))
            .is_some_and(|n| n <= BRUTE_FORCE_CAP);
        if !within {
            return Err(Error::Config(format!(
                "size {nu}x{nb} exceeds the exhaustive-search cap of {BRUTE_FORCE_CAP} associations"
            )));
        }
    }
    let mut report = ValidationReport::default();
    for (k, &(nu, nb)) in sizes.iter().enumerate() {
        for i in 0..INSTANCES_PER_SIZE {
            let mut rec = Recorder {
                report: &mut report,
                size: (nu, nb),
                instance: i,
            };
            let stream = (k * INSTANCES_PER_SIZE + i) as u64;
            check_instance(&mut rec, seed, stream, nu, nb)?;
        }
    }
    Ok(report)
}

fn check_instance(rec: &mut Recorder<'_>, seed: u64, stream: u64, nu: usize, nb: usize) -> Result<()> {
    let scenario = ScenarioConfig {
        num_mus: nu,
        num_bss: nb,
        rng_seed: seed,
        ..ScenarioConfig::default()
    };
    let inst = generate_network_stream(&scenario, stream)?;
    let rates = compute_rate_matrix(&inst)?;
    let mut rng = stream_rng(seed ^ 0x5eed, stream);

    // Rates follow from the SINRs.
    let bw = rates.bandwidth_hz();
    let worst = (0..nu)
        .flat_map(|u| (0..nb).map(move |b| (u, b)))
        .map(|(u, b)| (rates.rate(u, b) - bw * rates.sinr(u, b).ln_1p() / std::f64::consts::LN_2).abs() / rates.rate(u, b))
        .fold(0.0, f64::max);
    rec.check("net_model", "rate_from_sinr", worst < 1e-12, || format!("rel err {worst:e}"));

    let j = chiu_jain(rates.rates().row(0))?;
    rec.check("utility", "chiu_jain_range", j >= 1.0 / nb as f64 - 1e-12 && j <= 1.0, || {
        format!("J = {j}")
    });

    let assign: Vec<usize> = (0..nu).map(|_| rng.gen_range(0..nb)).collect();
    let assoc = Association::from_assignment(&assign, nb)?;
    for alpha in ALPHAS {
        check_allocation(rec, &rates, &assoc, alpha, &mut rng);
        check_objectives(rec, &rates, &assoc, alpha)?;
    }

    let settings = SolverSettings::default();
    for alpha in [0.5, 1.0, 2.0].map(Alpha::Finite) {
        let mut ascent = true;
        let mut feasible = true;
        let mut last = f64::NEG_INFINITY;
        let sol = solve_msa_observed(&rates, alpha, &settings, |it| {
            ascent &= it.scaled_objective >= last - 1e-12 * last.abs().max(1.0);
            last = it.scaled_objective;
            for b in 0..it.shares.cols() {
                feasible &= (it.shares.col_sum(b) - 1.0).abs() < 1e-12;
                feasible &= it.shares.col(b).all(|y| y >= -1e-12);
            }
        })?;
        rec.check("msa", "ascent", ascent, || format!("alpha {alpha}"));
        rec.check("msa", "feasible", feasible, || format!("alpha {alpha}"));
        rec.check("msa", "converged", sol.converged, || {
            format!("alpha {alpha}: stationarity {:e}", sol.stationarity)
        });
        let f_msa = sol.objective.value;
        let tol = 1e-8 * f_msa.abs().max(1.0);

        for mode in [AllocMode::Optimal, AllocMode::Uniform] {
            let (bf, best) = brute_force_ssa(&rates, alpha, mode)?;
            rec.check("msa", "dominates_brute_force", best.value <= f_msa + tol, || {
                format!("alpha {alpha} {mode}: f_msa {f_msa} < brute force {}", best.value)
            });
            let cands = [
                ("CGA", run_cga(&rates, alpha, mode)),
                ("LGA", run_lga(&rates, alpha, mode)),
                ("LGAN", run_lgan_observed(&rates, alpha, |_, _| {})),
                ("MSARnd", msa_round(&rates, &sol.allocation)?.association),
                ("MinD", run_min_distance(&inst)),
                ("MaxS", run_max_sinr(&rates)),
            ];
            for (name, z) in cands {
                rec.check("algorithms", "complete", z.is_complete(), || name.into());
                let v = f_ssa(&rates, &z, alpha, mode).value;
                rec.check("algorithms", "below_brute_force", v <= best.value + tol, || {
                    format!("{name} alpha {alpha} {mode}: {v} > {}", best.value)
                });
            }
            rec.check(
                "algorithms",
                "deterministic",
                run_cga(&rates, alpha, mode) == run_cga(&rates, alpha, mode)
                    && run_lga(&rates, alpha, mode) == run_lga(&rates, alpha, mode),
                || format!("alpha {alpha} {mode}"),
            );
            rec.check("algorithms", "brute_force_complete", bf.is_complete(), String::new);
        }

        // Greedy delta equals the global objective increase.
        let partial = Association::from_partial(
            (0..nu).map(|u| (u % 2 == 0).then(|| assign[u])).collect(),
            nb,
        )?;
        let first_free = partial.unassigned().next();
        if let Some(v) = first_free {
            let a = rng.gen_range(0..nb);
            let d = greedy_delta(&rates, &partial, (v, a), alpha, AllocMode::Optimal)?;
            let global = f_so(&rates, &partial.with(v, a), alpha).value - f_so(&rates, &partial, alpha).value;
            rec.check("algorithms", "greedy_delta_local", rel_close(d, global, 1e-9), || {
                format!("alpha {alpha}: local {d} vs global {global}")
            });
        }
    }

    let mut lgan_ok = true;
    run_lgan_observed(&rates, Alpha::ONE, |s, z| lgan_ok &= s.is_consistent_with(z));
    rec.check("algorithms", "lgan_congestion", lgan_ok, String::new);

    // Jensen direction of independent rounding.
    let x = Matrix::from_fn(nu, nb, |_, _| rng.gen::<f64>() + 0.05);
    let x = {
        let mut x = x;
        for u in 0..nu {
            let s = x.row_sum(u);
            x.row_mut(u).iter_mut().for_each(|v| *v /= s);
        }
        FractionalAssociation::new(x)?
    };
    for alpha in [0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 5.0].map(Alpha::Finite) {
        for mode in [AllocMode::Optimal, AllocMode::Uniform] {
            let c = rounding_expectation_check(&rates, &x, alpha, mode)?;
            rec.check("rounding", "jensen_direction", c.direction_ok, || {
                format!("alpha {alpha} {mode}: E {} vs f(x) {}", c.expectation, c.f_relaxed)
            });
        }
    }
    Ok(())
}

fn check_allocation(
    rec: &mut Recorder<'_>,
    rates: &crate::net_model::RateMatrix,
    assoc: &Association,
    alpha: Alpha,
    rng: &mut impl Rng,
) {
    let y = optimal_allocation(rates, assoc, alpha);
    for b in 0..assoc.num_bss() {
        let members = assoc.members(b);
        if members.is_empty() {
            continue;
        }
        let r: Vec<f64> = members.iter().map(|&u| rates.rate(u, b)).collect();
        let s: Vec<f64> = members.iter().map(|&u| y.share(u, b)).collect();
        let sum: f64 = s.iter().sum();
        rec.check("allocation", "column_sum", (sum - 1.0).abs() < 1e-12, || {
            format!("alpha {alpha} bs {b}: sum {sum}")
        });
        let value = |shares: &[f64]| -> f64 {
            let served: Vec<f64> = r.iter().zip(shares).map(|(r, y)| r * y).collect();
            sum_utility(alpha, &served)
        };
        let best = value(&s);
        let mut beaten = None;
        for _ in 0..50 {
            let mut t: Vec<f64> = r.iter().map(|_| rng.gen::<f64>() + 1e-3).collect();
            let ts: f64 = t.iter().sum();
            t.iter_mut().for_each(|v| *v /= ts);
            let v = value(&t);
            if v > best + 1e-9 * best.abs().max(1.0) {
                beaten = Some(v);
            }
        }
        rec.check("allocation", "beats_random_splits", beaten.is_none(), || {
            format!("alpha {alpha} bs {b}: closed form {best}, random {beaten:?}")
        });
        let closed = optimal_shares(&r, alpha);
        rec.check("allocation", "matches_closed_form", closed == s, || {
            format!("alpha {alpha} bs {b}")
        });
    }
}

fn check_objectives(
    rec: &mut Recorder<'_>,
    rates: &crate::net_model::RateMatrix,
    assoc: &Association,
    alpha: Alpha,
) -> Result<()> {
    let so = f_so(rates, assoc, alpha).value;
    let direct = sum_utility(alpha, &downlink_rates(rates, &optimal_allocation(rates, assoc, alpha)));
    rec.check("objective", "f_so_consistent", rel_close(so, direct, 1e-8), || {
        format!("alpha {alpha}: f_so {so} vs {direct}")
    });
    let su = f_su(rates, assoc, alpha).value;
    let direct = sum_utility(alpha, &downlink_rates(rates, &uniform_allocation(assoc)));
    rec.check("objective", "f_su_consistent", rel_close(su, direct, 1e-8), || {
        format!("alpha {alpha}: f_su {su} vs {direct}")
    });
    rec.check("objective", "f_su_le_f_so", su <= so + 1e-9 * so.abs().max(1.0), || {
        format!("alpha {alpha}: f_su {su} > f_so {so}")
    });
    if alpha == Alpha::ONE {
        rec.check("objective", "f_su_eq_f_so_at_one", su == so, || format!("{su} vs {so}"));
    }
    Ok(())
}
