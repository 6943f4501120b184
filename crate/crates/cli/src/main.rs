//! `ssanum`: experiment runner, SSA-likeness table, validation suite and
//! brute-force oracle.
//!
//! Exit codes: 0 success, 1 configuration error, 2 validation failure,
//! 3 runtime error.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ssanum::algorithms::brute_force_ssa;
use ssanum::experiment::{
    run_experiment_with, run_fig1_analysis, run_validation_suite, write_csv, CsvHeader,
    ExperimentConfig, RunOptions, DEFAULT_SIZES,
};
use ssanum::net_model::{compute_rate_matrix, generate_network, ScenarioConfig};
use ssanum::objective::AllocMode;
use ssanum::{Alpha, Error};

#[derive(Parser)]
#[command(name = "ssanum", version, about = "Alpha-fair user association experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo experiment and write the per-record CSV plus a
    /// `.summary.csv` next to it.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_path` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides `scenario.rng_seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Omit the timestamp line and wall times, so reruns are byte-identical.
        #[arg(long)]
        no_timestamp: bool,
    },
    /// Percentiles of the per-MU Chiu-Jain index of the MSA optimum.
    Fig1 {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check the cross-module invariants on random instances.
    Validate {
        /// Instance sizes as `MUSxBSS`, comma separated.
        #[arg(long, value_delimiter = ',', value_parser = parse_size)]
        sizes: Option<Vec<(usize, usize)>>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Brute-force SSA optimum of one random default-parameter instance.
    Oracle {
        #[arg(long)]
        mus: usize,
        #[arg(long)]
        bss: usize,
        #[arg(long)]
        alpha: Alpha,
        #[arg(long)]
        mode: AllocMode,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (u, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected MUSxBSS, got {s:?}"))?;
    let p = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}"));
    Ok((p(u)?, p(b)?))
}

enum Failure {
    Config(String),
    Validation(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::InvalidScenario(_) | Error::InvalidAlpha(_) | Error::OverCap { .. } => {
                Failure::Config(e.to_string())
            }
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        cfg.scenario.rng_seed = s;
    }
    Ok(cfg)
}

fn summary_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.summary.csv"))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| {
        Failure::Runtime(format!("{}: {e}", path.display()))
    })?))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            no_timestamp,
        } => {
            let cfg = load_config(&config, seed)?;
            let out = out.unwrap_or_else(|| cfg.output_path.clone());
            let options = RunOptions {
                timing: !no_timestamp,
                keep_details: false,
            };
            let result = run_experiment_with(&cfg, options)?;
            let header = CsvHeader::for_config(&cfg, !no_timestamp);
            write_csv(create(&out)?, &header, &result.records)?;
            write_csv(create(&summary_path(&out))?, &header, &result.summary)?;
            let unconverged = result
                .records
                .iter()
                .filter(|r| r.algorithm == ssanum::experiment::MSA_ROW && r.msa_converged == Some(false))
                .count();
            eprintln!(
                "wrote {} records to {} ({} unconverged MSA solves)",
                result.records.len(),
                out.display(),
                unconverged
            );
        }
        Command::Fig1 { config, out, seed } => {
            let cfg = load_config(&config, seed)?;
            let table = run_fig1_analysis(&cfg)?;
            let header = CsvHeader::for_config(&cfg, false);
            match out {
                Some(p) => write_csv(create(&p)?, &header, &table.rows)?,
                None => write_csv(io::stdout().lock(), &header, &table.rows)?,
            }
            for a in &table.skipped {
                eprintln!("skipped alpha {a}: no MSA problem");
            }
            if !table.unconverged.is_empty() {
                eprintln!("{} unconverged MSA solves", table.unconverged.len());
            }
        }
        Command::Validate { sizes, seed } => {
            let sizes = sizes.unwrap_or_else(|| DEFAULT_SIZES.to_vec());
            let report = run_validation_suite(seed, &sizes)?;
            print!("{report}");
            if !report.all_passed() {
                return Err(Failure::Validation(format!(
                    "{} checks failed",
                    report.failures().count()
                )));
            }
        }
        Command::Oracle {
            mus,
            bss,
            alpha,
            mode,
            seed,
        } => {
            let scenario = ScenarioConfig {
                num_mus: mus,
                num_bss: bss,
                rng_seed: seed,
                ..ScenarioConfig::default()
            };
            let inst = generate_network(&scenario)?;
            let rates = compute_rate_matrix(&inst)?;
            let (assoc, value) = brute_force_ssa(&rates, alpha, mode)?;
            let assign = assoc.assignment().expect("complete");
            let mut w = io::stdout().lock();
            writeln!(w, "alpha: {alpha}")?;
            writeln!(w, "mode: {mode}")?;
            writeln!(w, "objective: {}", value.value)?;
            writeln!(
                w,
                "association: {}",
                assign.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(" ")
            )?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // Usage errors count as configuration errors; 2 is reserved.
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Validation(m)) => {
            eprintln!("error: validation failed, {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}
