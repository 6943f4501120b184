use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::algorithms::{AlgoConfig, Algorithm, BRUTE_FORCE_CAP};
use crate::error::{Error, Result};
use crate::msa::SolverSettings;
use crate::net_model::ScenarioConfig;
use crate::objective::AllocMode;
use crate::utility::Alpha;

/// One algorithm entry of an experiment; α comes from the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgoSpec {
    pub algorithm: Algorithm,
    pub alloc_mode: AllocMode,
}

impl AlgoSpec {
    pub fn new(algorithm: Algorithm, alloc_mode: AllocMode) -> Self {
        AlgoSpec { algorithm, alloc_mode }
    }

    pub fn at(self, alpha: Alpha) -> AlgoConfig {
        AlgoConfig {
            algorithm: self.algorithm,
            alloc_mode: self.alloc_mode,
            alpha,
        }
    }
}

/// Monte-Carlo experiment description, read from TOML.
///
/// ```toml
/// num_samples = 100
/// alpha_grid = [0.5, 1, 2, "inf"]
/// output_path = "results.csv"
///
/// [scenario]
/// num_mus = 100
/// num_bss = 20
/// rng_seed = 7
///
/// [[algorithms]]
/// algorithm = "CGA"
/// alloc_mode = "optimal"
///
/// [solver]
/// max_iters = 50000
/// ```
///
/// Every section and key is optional; omitted values take the defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub num_samples: usize,
    pub alpha_grid: Vec<Alpha>,
    pub output_path: PathBuf,
    pub scenario: ScenarioConfig,
    pub algorithms: Vec<AlgoSpec>,
    pub solver: SolverSettings,
}

pub fn default_alpha_grid() -> Vec<Alpha> {
    [0.0, 0.05, 0.1, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0, 3.0, 4.0]
        .into_iter()
        .map(Alpha::Finite)
        .chain([Alpha::Infinity])
        .collect()
}

/// MSARnd, CGA, LGA, LGAN, MinD and MaxS, all with optimal allocation.
pub fn default_algorithms() -> Vec<AlgoSpec> {
    [
        Algorithm::MsaRnd,
        Algorithm::Cga,
        Algorithm::Lga,
        Algorithm::Lgan,
        Algorithm::MinD,
        Algorithm::MaxS,
    ]
    .into_iter()
    .map(|a| AlgoSpec::new(a, AllocMode::Optimal))
    .collect()
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            num_samples: 100,
            alpha_grid: default_alpha_grid(),
            output_path: PathBuf::from("results.csv"),
            scenario: ScenarioConfig::default(),
            algorithms: default_algorithms(),
            solver: SolverSettings::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha_grid.is_empty() {
            return Err(Error::Config("alpha_grid must not be empty".into()));
        }
        if self.num_samples == 0 {
            return Err(Error::Config("num_samples must be at least 1".into()));
        }
        self.scenario
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        self.solver.validate()?;
        let (nu, nb) = (self.scenario.num_mus, self.scenario.num_bss);
        for spec in &self.algorithms {
            for &alpha in &self.alpha_grid {
                spec.at(alpha).validate(nu, nb).map_err(|_| {
                    Error::Config(format!(
                        "BruteForce needs num_bss^num_mus <= {BRUTE_FORCE_CAP}, got {nb}^{nu}"
                    ))
                })?;
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical TOML rendering, hex encoded.
    pub fn hash(&self) -> String {
        let text = self.to_toml_string().unwrap_or_default();
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}
