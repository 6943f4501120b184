//! α-proportional-fair utilities and the fairness / throughput metrics.
//!
//! Utilities live on the extended reals: a zero rate under `α >= 1` is
//! `f64::NEG_INFINITY`, which absorbs through sums and orders below every
//! finite value. No `+inf` is ever produced by a finite-α utility, so sums of
//! utilities never hit `inf - inf`.

use std::fmt;
use std::str::FromStr;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Fairness parameter: a finite `α >= 0` or the max-min limit `α = ∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Alpha {
    Finite(f64),
    Infinity,
}

impl Alpha {
    pub const ZERO: Alpha = Alpha::Finite(0.0);
    pub const ONE: Alpha = Alpha::Finite(1.0);

    pub fn new(value: f64) -> Result<Self> {
        if value == f64::INFINITY {
            Ok(Alpha::Infinity)
        } else if value >= 0.0 {
            Ok(Alpha::Finite(value))
        } else {
            Err(Error::InvalidAlpha(format!("{value} is not >= 0")))
        }
    }

    /// The finite value, or `None` for `α = ∞`.
    pub fn finite(self) -> Option<f64> {
        match self {
            Alpha::Finite(a) => Some(a),
            Alpha::Infinity => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Alpha::Infinity)
    }

    pub fn value(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

impl fmt::Display for Alpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Alpha::Finite(a) => write!(f, "{a}"),
            Alpha::Infinity => f.write_str("inf"),
        }
    }
}

impl FromStr for Alpha {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "+inf" => Ok(Alpha::Infinity),
            t => {
                let v: f64 = t
                    .parse()
                    .map_err(|_| Error::InvalidAlpha(format!("cannot parse {s:?}")))?;
                Alpha::new(v)
            }
        }
    }
}

impl Serialize for Alpha {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Alpha::Finite(a) => s.serialize_f64(*a),
            Alpha::Infinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Alpha {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct AlphaVisitor;

        impl Visitor<'_> for AlphaVisitor {
            type Value = Alpha;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a non-negative number or \"inf\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Alpha, E> {
                Alpha::new(v).map_err(E::custom)
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Alpha, E> {
                self.visit_f64(v as f64)
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Alpha, E> {
                self.visit_f64(v as f64)
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Alpha, E> {
                v.parse().map_err(E::custom)
            }
        }

        d.deserialize_any(AlphaVisitor)
    }
}

/// `U_α(R)` for a finite α, without argument checks.
#[inline]
pub(crate) fn utility_finite(alpha: f64, rate: f64) -> f64 {
    if alpha == 1.0 {
        rate.ln()
    } else if alpha == 0.0 {
        rate
    } else {
        rate.powf(1.0 - alpha) / (1.0 - alpha)
    }
}

/// Marginal utility `U'_α(R) = R^-α`.
#[inline]
pub(crate) fn marginal_utility(alpha: f64, rate: f64) -> f64 {
    if alpha == 0.0 {
        1.0
    } else if alpha == 1.0 {
        1.0 / rate
    } else {
        rate.powf(-alpha)
    }
}

/// α-utility of a single rate.
///
/// `R^(1-α)/(1-α)` for `α != 1`, `ln R` for `α = 1`. A zero rate maps to
/// `-inf` when `α >= 1` and to `0` otherwise. The max-min limit has no
/// per-rate utility; use [`sum_utility`] for `α = ∞`.
pub fn utility(alpha: Alpha, rate: f64) -> Result<f64> {
    if rate.is_nan() || rate < 0.0 {
        return Err(Error::NegativeRate(rate));
    }
    match alpha {
        Alpha::Finite(a) => Ok(utility_finite(a, rate)),
        Alpha::Infinity => Err(Error::Unsupported(
            "per-rate utility at alpha = inf; the max-min objective is the minimum rate".into(),
        )),
    }
}

/// Per-MU sum downlink rates `R_u`, bits/second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DownlinkRates(Vec<f64>);

impl DownlinkRates {
    pub fn new(rates: Vec<f64>) -> Result<Self> {
        if let Some(&r) = rates.iter().find(|r| !(**r >= 0.0)) {
            return Err(Error::NegativeRate(r));
        }
        Ok(DownlinkRates(rates))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }
}

impl std::ops::Deref for DownlinkRates {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Network utility `Σ_u U_α(R_u)`; for `α = ∞` the minimum rate.
pub fn sum_utility(alpha: Alpha, rates: &[f64]) -> f64 {
    match alpha {
        Alpha::Finite(a) => rates.iter().map(|&r| utility_finite(a, r)).sum(),
        Alpha::Infinity => rates.iter().copied().fold(f64::INFINITY, f64::min),
    }
}

/// Chiu-Jain index `(Σv)² / (n Σv²)`, in `[1/n, 1]`.
pub fn chiu_jain(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("chiu_jain input"));
    }
    if let Some(&v) = values.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::NegativeRate(v));
    }
    // Scale by the max first so tiny or huge magnitudes do not under/overflow
    // the sum of squares.
    let max = values.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return Err(Error::ZeroVector);
    }
    let (s, sq) = values.iter().fold((0.0, 0.0), |(s, sq), &v| {
        let w = v / max;
        (s + w, sq + w * w)
    });
    Ok((s * s / (values.len() as f64 * sq)).min(1.0))
}

/// Percentile `q ∈ [0, 100]` with linear interpolation between order
/// statistics: position `q/100 · (n-1)` in the sorted data.
pub fn percentile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("percentile input"));
    }
    if !(0.0..=100.0).contains(&q) {
        return Err(Error::Dimension(format!("percentile {q} outside [0, 100]")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(percentile_sorted(&sorted, q))
}

pub(crate) fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}
