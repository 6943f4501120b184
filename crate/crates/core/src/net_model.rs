//! Network topology generation and the downlink SINR / rate model.
//!
//! BSs and MUs are dropped uniformly at random in a square arena. The SINR
//! of MU `u` served by BS `b` treats every other BS as interference:
//!
//! ```text
//! sinr_ub = p_b g(l_b, l_u) / (sum_{a != b} p_a g(l_a, l_u) + N)
//! rate_ub = W log2(1 + sinr_ub)
//! ```
//!
//! with `g(l, l') = |l - l'|^-gamma`, powers and noise in milliwatts and `W`
//! the bandwidth in hertz.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Layouts with any MU closer than this to a BS are redrawn.
pub const MIN_SEPARATION_M: f64 = 1.0;

const MAX_LAYOUT_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub num_mus: usize,
    pub num_bss: usize,
    /// Side length of the square arena, meters.
    pub arena_side: f64,
    /// Transmit power shared by every BS, milliwatts.
    pub tx_power_mw: f64,
    /// Background noise power, dBm. `-inf` means a noiseless channel.
    pub noise_dbm: f64,
    pub pathloss_exponent: f64,
    pub bandwidth_hz: f64,
    pub rng_seed: u64,
}

impl Default for ScenarioConfig {
    /// 100 MUs and 20 BSs in a 1000 m square, 1000 mW transmitters,
    /// 1.2 MHz bandwidth, -90 dBm noise and pathloss exponent 3.
    fn default() -> Self {
        ScenarioConfig {
            num_mus: 100,
            num_bss: 20,
            arena_side: 1000.0,
            tx_power_mw: 1000.0,
            noise_dbm: -90.0,
            pathloss_exponent: 3.0,
            bandwidth_hz: 1.2e6,
            rng_seed: 1,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidScenario(msg));
        if self.num_mus == 0 {
            return bad("num_mus must be at least 1".into());
        }
        if self.num_bss == 0 {
            return bad("num_bss must be at least 1".into());
        }
        if !(self.arena_side > 0.0 && self.arena_side.is_finite()) {
            return bad(format!("arena_side must be positive, got {}", self.arena_side));
        }
        if !(self.tx_power_mw > 0.0 && self.tx_power_mw.is_finite()) {
            return bad(format!("tx_power_mw must be positive, got {}", self.tx_power_mw));
        }
        if self.noise_dbm.is_nan() || self.noise_dbm == f64::INFINITY {
            return bad(format!("noise_dbm must be finite or -inf, got {}", self.noise_dbm));
        }
        if !(self.pathloss_exponent >= 2.0 && self.pathloss_exponent.is_finite()) {
            return bad(format!(
                "pathloss_exponent must be >= 2, got {}",
                self.pathloss_exponent
            ));
        }
        if !(self.bandwidth_hz > 0.0 && self.bandwidth_hz.is_finite()) {
            return bad(format!("bandwidth_hz must be positive, got {}", self.bandwidth_hz));
        }
        Ok(())
    }

    pub fn noise_mw(&self) -> f64 {
        dbm_to_mw(self.noise_dbm)
    }
}

/// `10^(dbm/10)` milliwatts; `-90 dBm` is `1e-9 mW`.
pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// Random generator for one independent stream of a seeded experiment.
///
/// Streams are ChaCha8 keyed by `seed` with the 64-bit stream id set to
/// `stream`; sample `i` of a Monte-Carlo run uses stream `i`, so its draws do
/// not depend on how samples are scheduled across threads.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkInstance {
    pub mu_positions: Vec<Point>,
    pub bs_positions: Vec<Point>,
    pub config: ScenarioConfig,
}

impl NetworkInstance {
    /// Builds an instance from explicit positions, checking arena bounds and
    /// the minimum MU-BS separation.
    pub fn new(
        mu_positions: Vec<Point>,
        bs_positions: Vec<Point>,
        mut config: ScenarioConfig,
    ) -> Result<Self> {
        config.num_mus = mu_positions.len();
        config.num_bss = bs_positions.len();
        config.validate()?;
        let side = config.arena_side;
        let inside = |p: &Point| (0.0..=side).contains(&p.x) && (0.0..=side).contains(&p.y);
        if !mu_positions.iter().chain(&bs_positions).all(inside) {
            return Err(Error::InvalidScenario(format!(
                "position outside [0, {side}]^2"
            )));
        }
        for mu in &mu_positions {
            for bs in &bs_positions {
                if mu.distance(bs) == 0.0 {
                    return Err(Error::CoincidentPoints);
                }
            }
        }
        Ok(NetworkInstance {
            mu_positions,
            bs_positions,
            config,
        })
    }

    pub fn num_mus(&self) -> usize {
        self.mu_positions.len()
    }

    pub fn num_bss(&self) -> usize {
        self.bs_positions.len()
    }

    pub fn distance(&self, u: usize, b: usize) -> f64 {
        self.mu_positions[u].distance(&self.bs_positions[b])
    }
}

/// Draws a network from `config.rng_seed` (stream 0).
pub fn generate_network(config: &ScenarioConfig) -> Result<NetworkInstance> {
    generate_network_stream(config, 0)
}

/// Draws a network from stream `stream` of `config.rng_seed`.
///
/// BS positions are drawn first, then MU positions, each coordinate as
/// `side * U[0,1)`. The whole layout is redrawn while any MU lies within
/// [`MIN_SEPARATION_M`] of a BS.
pub fn generate_network_stream(config: &ScenarioConfig, stream: u64) -> Result<NetworkInstance> {
    config.validate()?;
    let mut rng = stream_rng(config.rng_seed, stream);
    let side = config.arena_side;
    let draw = |n: usize, rng: &mut ChaCha8Rng| -> Vec<Point> {
        (0..n)
            .map(|_| {
                let x = side * rng.gen::<f64>();
                let y = side * rng.gen::<f64>();
                Point::new(x, y)
            })
            .collect()
    };
    for _ in 0..MAX_LAYOUT_ATTEMPTS {
        let bs_positions = draw(config.num_bss, &mut rng);
        let mu_positions = draw(config.num_mus, &mut rng);
        let separated = mu_positions.iter().all(|mu| {
            bs_positions
                .iter()
                .all(|bs| mu.distance(bs) >= MIN_SEPARATION_M)
        });
        if separated {
            return Ok(NetworkInstance {
                mu_positions,
                bs_positions,
                config: config.clone(),
            });
        }
    }
    Err(Error::InvalidScenario(format!(
        "no layout with {MIN_SEPARATION_M} m MU-BS separation after {MAX_LAYOUT_ATTEMPTS} draws"
    )))
}

/// Channel gain `|l1 - l2|^-gamma`.
pub fn pathloss(l1: &Point, l2: &Point, gamma: f64) -> Result<f64> {
    let d = l1.distance(l2);
    if d == 0.0 {
        return Err(Error::CoincidentPoints);
    }
    Ok(d.powf(-gamma))
}

/// Per-(MU, BS) instantaneous rates (bits/s) and SINRs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateMatrix {
    rates: Matrix,
    sinrs: Matrix,
    bandwidth_hz: f64,
}

impl RateMatrix {
    /// Wraps precomputed SINRs, deriving `rates = bandwidth * log2(1 + sinr)`.
    pub fn from_sinrs(sinrs: Matrix, bandwidth_hz: f64) -> Result<Self> {
        let rates = sinrs.map(|s| bandwidth_hz * s.ln_1p() / std::f64::consts::LN_2);
        let rm = RateMatrix {
            rates,
            sinrs,
            bandwidth_hz,
        };
        rm.check()?;
        Ok(rm)
    }

    /// Wraps an arbitrary positive rate matrix under a unit-bandwidth
    /// convention (`sinr = 2^r - 1`). Intended for synthetic instances with
    /// moderate rates.
    pub fn from_rates(rates: Matrix) -> Result<Self> {
        // Saturates for rates above ~1024 bit/s/Hz; only the ordering matters there.
        let sinrs = rates.map(|r| (r * std::f64::consts::LN_2).exp_m1().min(f64::MAX));
        let rm = RateMatrix {
            rates,
            sinrs,
            bandwidth_hz: 1.0,
        };
        rm.check()?;
        Ok(rm)
    }

    fn check(&self) -> Result<()> {
        if self.rates.rows() == 0 || self.rates.cols() == 0 {
            return Err(Error::Empty("rate matrix"));
        }
        for (&r, &s) in self.rates.as_slice().iter().zip(self.sinrs.as_slice()) {
            if !(r > 0.0 && r.is_finite() && s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidScenario(format!(
                    "rate {r} / sinr {s} is not strictly positive and finite"
                )));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn rate(&self, u: usize, b: usize) -> f64 {
        self.rates[(u, b)]
    }

    #[inline]
    pub fn sinr(&self, u: usize, b: usize) -> f64 {
        self.sinrs[(u, b)]
    }

    pub fn rates(&self) -> &Matrix {
        &self.rates
    }

    pub fn sinrs(&self) -> &Matrix {
        &self.sinrs
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.bandwidth_hz
    }

    pub fn num_mus(&self) -> usize {
        self.rates.rows()
    }

    pub fn num_bss(&self) -> usize {
        self.rates.cols()
    }

    pub fn max_rate(&self) -> f64 {
        self.rates.as_slice().iter().copied().fold(0.0, f64::max)
    }
}

/// Evaluates the SINR and rate of every (MU, BS) pair.
///
/// Fails only when a pair is coincident or the channel is noiseless with a
/// single BS (infinite SINR).
pub fn compute_rate_matrix(instance: &NetworkInstance) -> Result<RateMatrix> {
    let cfg = &instance.config;
    let noise = cfg.noise_mw();
    let nb = instance.num_bss();
    let mut sinrs = Matrix::zeros(instance.num_mus(), nb);
    let mut received = vec![0.0; nb];
    for (u, mu) in instance.mu_positions.iter().enumerate() {
        for (b, bs) in instance.bs_positions.iter().enumerate() {
            received[b] = cfg.tx_power_mw * pathloss(bs, mu, cfg.pathloss_exponent)?;
        }
        for b in 0..nb {
            let interference: f64 = received
                .iter()
                .enumerate()
                .filter(|&(a, _)| a != b)
                .map(|(_, p)| p)
                .sum();
            sinrs[(u, b)] = received[b] / (interference + noise);
        }
    }
    RateMatrix::from_sinrs(sinrs, cfg.bandwidth_hz)
}
