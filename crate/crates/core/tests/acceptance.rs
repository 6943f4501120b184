//! Acceptance criteria. Run with `cargo test --test acceptance`; prints one
//! PASS/FAIL line per criterion and exits non-zero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use ssanum::algorithms::{brute_force_ssa, rounding_expectation_check, run_cga, Algorithm};
use ssanum::allocation::{
    allocation_rate_sensitivity, downlink_rates, optimal_allocation, optimal_shares,
    uniform_allocation, Association,
};
use ssanum::experiment::{
    run_experiment_with, run_fig1_analysis, write_csv, AlgoSpec, CsvHeader, ExperimentConfig,
    RunOptions, RunOutput,
};
use ssanum::msa::{solve_msa, solve_msa_observed, SolverSettings};
use ssanum::net_model::{compute_rate_matrix, generate_network_stream, stream_rng, RateMatrix, ScenarioConfig};
use ssanum::objective::{epsilon_gp_2bs1mu, f_so, f_su, AllocMode, FractionalAssociation};
use ssanum::utility::sum_utility;
use ssanum::{Alpha, Matrix};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("took {elapsed:?}, limit {limit:?}"))
}

/// Log-uniform rate in `[e^-3, e^3]`.
fn rand_rate(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(-3.0f64..3.0).exp()
}

fn rand_simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

fn default_rates(num_mus: usize, num_bss: usize, seed: u64, stream: u64) -> RateMatrix {
    let cfg = ScenarioConfig {
        num_mus,
        num_bss,
        rng_seed: seed,
        ..ScenarioConfig::default()
    };
    compute_rate_matrix(&generate_network_stream(&cfg, stream).unwrap()).unwrap()
}

fn served_utility(alpha: Alpha, r: &[f64], y: &[f64]) -> f64 {
    let served: Vec<f64> = r.iter().zip(y).map(|(r, y)| r * y).collect();
    sum_utility(alpha, &served)
}

fn closed_form_allocation() -> Outcome {
    let start = Instant::now();
    let mut rng = stream_rng(101, 0);
    let alphas = [0.25, 0.5, 2.0, 3.0, f64::INFINITY].map(|a| Alpha::new(a).unwrap());
    let mut worst_kkt: f64 = 0.0;
    for case in 0..500 {
        let alpha = alphas[case % alphas.len()];
        let n = rng.gen_range(1..=8);
        let r: Vec<f64> = (0..n).map(|_| rand_rate(&mut rng)).collect();
        let y = optimal_shares(&r, alpha);
        ensure((y.iter().sum::<f64>() - 1.0).abs() < 1e-12, || format!("case {case}: shares do not sum to 1"))?;
        // r^(1-α) y^(-α) equalised, in log form; at α = ∞ the served rates r·y.
        let logs: Vec<f64> = r
            .iter()
            .zip(&y)
            .map(|(r, y)| match alpha {
                Alpha::Finite(a) => (1.0 - a) * r.ln() - a * y.ln(),
                Alpha::Infinity => (r * y).ln(),
            })
            .collect();
        let spread = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - logs.iter().cloned().fold(f64::INFINITY, f64::min);
        let rel = spread.exp_m1();
        worst_kkt = worst_kkt.max(rel);
        ensure(rel < 1e-6, || format!("case {case} alpha {alpha}: KKT spread {rel:e}"))?;
        let best = served_utility(alpha, &r, &y);
        for _ in 0..200 {
            let t = rand_simplex(&mut rng, n);
            let v = served_utility(alpha, &r, &t);
            ensure(v <= best + 1e-9 * best.abs().max(1.0), || {
                format!("case {case} alpha {alpha}: random split {v} beats closed form {best}")
            })?;
        }
    }
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(5))?;
    Ok(format!("500 cases, worst KKT spread {worst_kkt:.1e}, {elapsed:.2?}"))
}

fn sensitivity_signs() -> Outcome {
    let start = Instant::now();
    let mut rng = stream_rng(102, 0);
    let assoc = Association::from_assignment(&[0, 0], 1).unwrap();
    let mut worst_at_one: f64 = 0.0;
    for case in 0..100 {
        let r = [rand_rate(&mut rng), rand_rate(&mut rng)];
        let rates = RateMatrix::from_rates(Matrix::from_rows(&[[r[0]], [r[1]]])).unwrap();
        let h = 1e-4 * r[0];
        for (a, sign) in [(0.5, 1.0), (1.0, 0.0), (2.0, -1.0)] {
            let d = allocation_rate_sensitivity(&rates, &assoc, Alpha::Finite(a), 0, h).unwrap();
            if sign == 0.0 {
                worst_at_one = worst_at_one.max(d.abs());
                ensure(d.abs() < 1e-9, || format!("case {case}: |d| = {d:e} at alpha 1"))?;
            } else {
                ensure(d * sign > 0.0, || format!("case {case} alpha {a}: derivative {d:e}"))?;
            }
        }
    }
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(1))?;
    Ok(format!("100 cases, max |d| at alpha 1 = {worst_at_one:e}, {elapsed:.2?}"))
}

fn table_consistency() -> Outcome {
    let mut rng = stream_rng(103, 0);
    let alphas = [0.0, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0, f64::INFINITY].map(|a| Alpha::new(a).unwrap());
    let mut worst: f64 = 0.0;
    for case in 0..500 {
        let alpha = alphas[case % alphas.len()];
        let (nu, nb) = (rng.gen_range(1..=12), rng.gen_range(1..=4));
        let rates = RateMatrix::from_rates(Matrix::from_fn(nu, nb, |_, _| rand_rate(&mut rng))).unwrap();
        let assign: Vec<usize> = (0..nu).map(|_| rng.gen_range(0..nb)).collect();
        let z = Association::from_assignment(&assign, nb).unwrap();
        let so = f_so(&rates, &z, alpha).value;
        let su = f_su(&rates, &z, alpha).value;
        let so_direct = sum_utility(alpha, &downlink_rates(&rates, &optimal_allocation(&rates, &z, alpha)));
        let su_direct = sum_utility(alpha, &downlink_rates(&rates, &uniform_allocation(&z)));
        for (name, a, b) in [("f_so", so, so_direct), ("f_su", su, su_direct)] {
            let rel = (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
            let rel = if a == b { 0.0 } else { rel };
            worst = worst.max(rel);
            ensure(rel < 1e-8, || format!("case {case} alpha {alpha}: {name} {a} vs {b}"))?;
        }
        if alpha == Alpha::ONE {
            ensure(so == su, || format!("case {case}: f_so {so} != f_su {su} at alpha 1"))?;
        }
    }
    Ok(format!("500 associations, worst relative gap {worst:.1e}"))
}

fn msa_solver() -> Outcome {
    let settings = SolverSettings::default();
    let mut rng = stream_rng(104, 0);
    let alphas = [0.0, 0.25, 0.5, 1.0, 2.0, 3.0].map(Alpha::Finite);
    let mut worst: f64 = 0.0;
    let mut one_bs = 0;
    for nu in 1..=4 {
        for alpha in alphas {
            for _ in 0..5 {
                let r: Vec<f64> = (0..nu).map(|_| rand_rate(&mut rng)).collect();
                let rates = RateMatrix::from_rates(Matrix::from_fn(nu, 1, |u, _| r[u])).unwrap();
                let mut last = f64::NEG_INFINITY;
                let mut invariant = Ok(());
                let sol = solve_msa_observed(&rates, alpha, &settings, |it| {
                    if it.scaled_objective < last - 1e-12 * last.abs().max(1.0) {
                        invariant = Err(format!("objective decreased at iteration {}", it.iteration));
                    }
                    last = it.scaled_objective;
                    let col = it.shares.col_sum(0);
                    if (col - 1.0).abs() > 1e-12 || it.shares.col(0).any(|y| y < -1e-12) {
                        invariant = Err(format!("infeasible iterate {}", it.iteration));
                    }
                })
                .unwrap();
                invariant.map_err(|e| format!("{nu} MUs alpha {alpha}: {e}"))?;
                let closed = optimal_shares(&r, alpha);
                for u in 0..nu {
                    let d = (sol.allocation.share(u, 0) - closed[u]).abs();
                    worst = worst.max(d);
                    ensure(d < 1e-5, || format!("{nu} MUs alpha {alpha}: share {u} off by {d:e}"))?;
                }
                one_bs += 1;
            }
        }
    }
    let mut min_margin = f64::INFINITY;
    for i in 0..20 {
        let rates = default_rates(10, 3, 104, i);
        for alpha in [0.5, 1.0, 2.0].map(Alpha::Finite) {
            let sol = solve_msa(&rates, alpha, &settings).unwrap();
            let f_msa = sol.objective.value;
            let bf = [AllocMode::Optimal, AllocMode::Uniform]
                .map(|m| brute_force_ssa(&rates, alpha, m).unwrap().1.value)
                .into_iter()
                .fold(f64::NEG_INFINITY, f64::max);
            let margin = (f_msa - bf) / f_msa.abs().max(1.0);
            min_margin = min_margin.min(margin);
            ensure(margin >= -1e-8, || {
                format!("instance {i} alpha {alpha}: f_MSA {f_msa} below SSA optimum {bf}")
            })?;
        }
    }
    Ok(format!(
        "{one_bs} one-BS solves, worst share error {worst:.1e}; 20 10x3 instances, min relative MSA-SSA margin {min_margin:.2e}"
    ))
}

fn jensen_direction() -> Outcome {
    let start = Instant::now();
    let mut rng = stream_rng(105, 0);
    let mut worst_eq: f64 = 0.0;
    let mut counts = [0usize; 3];
    for case in 0..200 {
        let (nu, nb) = if case % 2 == 0 { (4, 2) } else { (3, 3) };
        let rates = RateMatrix::from_rates(Matrix::from_fn(nu, nb, |_, _| rand_rate(&mut rng))).unwrap();
        let mut w = Matrix::zeros(nu, nb);
        for u in 0..nu {
            let row = rand_simplex(&mut rng, nb);
            w.row_mut(u).copy_from_slice(&row);
        }
        let x = FractionalAssociation::new(w).unwrap();
        for mode in [AllocMode::Optimal, AllocMode::Uniform] {
            for a in [0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 5.0] {
                let c = rounding_expectation_check(&rates, &x, Alpha::Finite(a), mode).unwrap();
                let (e, f) = (c.expectation, c.f_relaxed);
                let slack = 1e-12 * f.abs().max(1.0);
                let ok = if a < 2.0 {
                    counts[0] += 1;
                    e >= f - slack
                } else if a == 2.0 {
                    counts[1] += 1;
                    worst_eq = worst_eq.max((e - f).abs());
                    (e - f).abs() < 1e-9
                } else {
                    counts[2] += 1;
                    e <= f + slack
                };
                ensure(ok, || format!("case {case} alpha {a} {mode}: E = {e}, f(x) = {f}"))?;
                ensure(c.direction_ok, || format!("case {case} alpha {a} {mode}: direction flag"))?;
            }
        }
    }
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(30))?;
    Ok(format!(
        "{} >=, {} equal (max |E-f| {worst_eq:.1e}), {} <=; {elapsed:.2?}",
        counts[0], counts[1], counts[2]
    ))
}

fn scenario_config(samples: usize, alphas: &[f64], algos: Vec<AlgoSpec>) -> ExperimentConfig {
    ExperimentConfig {
        num_samples: samples,
        alpha_grid: alphas.iter().map(|&a| Alpha::new(a).unwrap()).collect(),
        algorithms: algos,
        scenario: ScenarioConfig {
            rng_seed: 2024,
            ..ScenarioConfig::default()
        },
        ..ExperimentConfig::default()
    }
}

fn ssa_likeness_percentiles() -> Outcome {
    let start = Instant::now();
    let grid = [0.1, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0];
    let table = run_fig1_analysis(&scenario_config(20, &grid, vec![])).unwrap();
    let mut worst75: f64 = 0.0;
    let mut worst50: f64 = 0.0;
    for row in &table.rows {
        worst75 = worst75.max((row.p75 - 0.05).abs());
        worst50 = worst50.max((row.p50 - 0.05).abs());
        ensure((row.p75 - 0.05).abs() <= 5e-3, || format!("alpha {}: p75 {}", row.alpha, row.p75))?;
        ensure((row.p50 - 0.05).abs() <= 1e-6, || format!("alpha {}: p50 {}", row.alpha, row.p50))?;
    }
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(600))?;
    Ok(format!(
        "20 samples x {} alphas, max |p75-0.05| {worst75:.1e}, max |p50-0.05| {worst50:.1e}, {} unconverged, {elapsed:.1?}",
        grid.len(),
        table.unconverged.len()
    ))
}

/// `a <= b` in mean, or their 95% intervals overlap.
fn ordered(out: &RunOutput, alpha: Alpha, metric: &str, a: &str, b: &str) -> Result<(), String> {
    let sa = out.summary_for(alpha, a, "optimal", metric).unwrap();
    let sb = out.summary_for(alpha, b, "optimal", metric).unwrap();
    let overlap = sa.mean - sa.ci95 <= sb.mean + sb.ci95;
    ensure(sa.mean <= sb.mean || overlap, || {
        format!(
            "alpha {alpha} {metric}: {a} {:.4e}±{:.1e} > {b} {:.4e}±{:.1e}",
            sa.mean, sa.ci95, sb.mean, sb.ci95
        )
    })
}

fn loss_ordering() -> Outcome {
    let start = Instant::now();
    let algos = [
        Algorithm::MsaRnd,
        Algorithm::Cga,
        Algorithm::Lga,
        Algorithm::Lgan,
        Algorithm::MinD,
        Algorithm::MaxS,
    ];
    let cfg = scenario_config(
        30,
        &[0.5, 1.0, 2.0],
        algos.iter().map(|&a| AlgoSpec::new(a, AllocMode::Optimal)).collect(),
    );
    let out = run_experiment_with(&cfg, RunOptions { timing: false, keep_details: false }).unwrap();
    let mut strict = 0;
    let mut overlapping = 0;
    for &alpha in &cfg.alpha_grid {
        for metric in ["utility_loss_abs", "utility_loss_rel"] {
            let mut pairs = vec![("MSARnd", "CGA"), ("CGA", "LGA")];
            for good in ["MSARnd", "CGA", "LGA"] {
                for bad in ["LGAN", "MinD", "MaxS"] {
                    pairs.push((good, bad));
                }
            }
            for (a, b) in pairs {
                ordered(&out, alpha, metric, a, b)?;
                let (ma, mb) = (
                    out.summary_for(alpha, a, "optimal", metric).unwrap().mean,
                    out.summary_for(alpha, b, "optimal", metric).unwrap().mean,
                );
                if ma <= mb {
                    strict += 1;
                } else {
                    overlapping += 1;
                }
            }
        }
    }
    let loss_floor = out
        .records
        .iter()
        .filter(|r| r.algorithm != "MSA")
        .map(|r| r.utility_loss_abs / out.records.iter().find(|m| m.algorithm == "MSA" && m.sample_id == r.sample_id && m.alpha == r.alpha).unwrap().sum_utility.abs().max(1.0))
        .fold(f64::INFINITY, f64::min);
    ensure(loss_floor >= -1e-8, || format!("negative loss {loss_floor:e}"))?;
    Ok(format!(
        "{strict} pairs ordered in mean, {overlapping} reversed within overlapping CIs, {:.1?}",
        start.elapsed()
    ))
}

fn alloc_mode_coincidence() -> Outcome {
    let mut algos = Vec::new();
    for a in [Algorithm::MsaRnd, Algorithm::Lgan, Algorithm::MinD] {
        for m in [AllocMode::Optimal, AllocMode::Uniform] {
            algos.push(AlgoSpec::new(a, m));
        }
    }
    let mut cfg = scenario_config(10, &[0.5, 1.0, 2.0], algos);
    cfg.scenario.num_mus = 50;
    cfg.scenario.num_bss = 10;
    let out = run_experiment_with(&cfg, RunOptions { timing: false, keep_details: false }).unwrap();
    let mut worst_eq: f64 = 0.0;
    for opt in out.records.iter().filter(|r| r.alloc_mode == "optimal") {
        let uni = out
            .records
            .iter()
            .find(|r| {
                r.alloc_mode == "uniform"
                    && r.algorithm == opt.algorithm
                    && r.sample_id == opt.sample_id
                    && r.alpha == opt.alpha
            })
            .unwrap();
        let (o, u) = (opt.sum_utility, uni.sum_utility);
        if opt.alpha == Alpha::ONE {
            worst_eq = worst_eq.max((o - u).abs());
            ensure((o - u).abs() < 1e-9, || {
                format!("{} sample {}: optimal {o} vs uniform {u}", opt.algorithm, opt.sample_id)
            })?;
        } else {
            ensure(o >= u - 1e-8 * o.abs().max(1.0), || {
                format!("{} sample {} alpha {}: optimal {o} < uniform {u}", opt.algorithm, opt.sample_id, opt.alpha)
            })?;
        }
    }
    Ok(format!("10 samples at 50x10, max |optimal - uniform| at alpha 1 = {worst_eq:e}"))
}

fn gp_example() -> Outcome {
    let pairs = [(4.0, 1.0), (1.0, 1.0), (2.0, 3.0), (10.0, 0.5), (0.3, 7.0)];
    let eps = [1e-2, 1e-4, 1e-6];
    let mut worst: f64 = 0.0;
    for (ra, rb) in pairs {
        for a in [1.5, 2.0, 3.0] {
            let mut pts = Vec::new();
            for e in eps {
                let g = epsilon_gp_2bs1mu(ra, rb, Alpha::Finite(a), e).unwrap();
                ensure(g.minimizer == 0, || {
                    format!("r=({ra},{rb}) alpha {a} eps {e}: minimiser {} ({:?})", g.minimizer, g.objectives)
                })?;
                pts.push(((1.0 / e).ln(), g.objectives[0].ln()));
            }
            let n = pts.len() as f64;
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
            let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
                / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
            let target = (a - 1.0) / 2.0;
            let rel = (slope - target).abs() / target;
            worst = worst.max(rel);
            ensure(rel <= 0.05, || format!("r=({ra},{rb}) alpha {a}: slope {slope} vs {target}"))?;
        }
    }
    Ok(format!("{} grids, worst relative slope error {worst:.1e}", pairs.len() * 3))
}

fn greedy_oracle_gap() -> Outcome {
    let mut ratios = Vec::new();
    let mut worst: f64 = 1.0;
    let mut optimal_hits = 0;
    for i in 0..100 {
        let rates = default_rates(6, 3, 110, i);
        for alpha in [0.5, 1.0, 2.0].map(Alpha::Finite) {
            let opt = brute_force_ssa(&rates, alpha, AllocMode::Optimal).unwrap().1.value;
            let cga = f_so(&rates, &run_cga(&rates, alpha, AllocMode::Optimal), alpha).value;
            ensure(cga <= opt + 1e-9 * opt.abs().max(1.0), || format!("instance {i}: CGA above optimum"))?;
            let ratio = 1.0 - (opt - cga) / opt.abs();
            if cga == opt {
                optimal_hits += 1;
            }
            worst = worst.min(ratio);
            ratios.push(ratio);
        }
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    ensure(mean >= 0.95, || format!("mean ratio {mean}"))?;
    Ok(format!(
        "mean ratio {mean:.6}, worst {worst:.6}, CGA optimal in {optimal_hits}/{} cases",
        ratios.len()
    ))
}

fn csv_determinism() -> Outcome {
    let algos = [Algorithm::MsaRnd, Algorithm::Cga, Algorithm::Lga, Algorithm::Lgan, Algorithm::MaxS]
        .map(|a| AlgoSpec::new(a, AllocMode::Optimal))
        .to_vec();
    let mut cfg = scenario_config(6, &[0.5, 1.0, f64::INFINITY], algos);
    cfg.scenario.num_mus = 40;
    cfg.scenario.num_bss = 8;
    let render = |threads: usize| -> Vec<u8> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let out = pool
            .install(|| run_experiment_with(&cfg, RunOptions { timing: false, keep_details: false }))
            .unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &CsvHeader::for_config(&cfg, false), &out.records).unwrap();
        buf
    };
    let first = render(4);
    let second = render(4);
    let serial = render(1);
    ensure(first == second, || "two runs differ".into())?;
    ensure(first == serial, || "result depends on the thread count".into())?;
    Ok(format!("{} bytes identical across reruns and thread counts", first.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("closed-form allocation optimality", closed_form_allocation),
        ("allocation sensitivity signs", sensitivity_signs),
        ("objective table consistency", table_consistency),
        ("MSA solver accuracy and dominance", msa_solver),
        ("rounding Jensen direction", jensen_direction),
        ("SSA-likeness percentiles", ssa_likeness_percentiles),
        ("utility-loss ordering", loss_ordering),
        ("optimal vs uniform allocation", alloc_mode_coincidence),
        ("epsilon-GP example", gp_example),
        ("greedy vs exhaustive optimum", greedy_oracle_gap),
        ("CSV determinism", csv_determinism),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|s| s.parse().ok());
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let n = i + 1;
        if only.is_some_and(|o| o != n) {
            continue;
        }
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match result {
            Ok(detail) => println!("PASS {n:>2} {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {n:>2} {name}: {why}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
