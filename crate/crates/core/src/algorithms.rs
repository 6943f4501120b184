//! Association constructors.
//!
//! Every constructor returns a complete association; the allocation that
//! goes with it is chosen separately ([`AllocMode`]). All "arbitrary" choices
//! (ties, which requester a BS grants) resolve to the lowest index, so every
//! algorithm is a deterministic function of its inputs.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::allocation::{argmax_first, Allocation, Association};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::net_model::{stream_rng, NetworkInstance, RateMatrix};
use crate::objective::{
    bs_term, f_relaxed, f_ssa, AllocMode, FractionalAssociation, ObjectiveValue,
};
use crate::utility::{utility_finite, Alpha};

/// Exhaustive search is limited to `|B|^|U| <= 2^20` candidates.
pub const BRUTE_FORCE_CAP: u64 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "CGA")]
    Cga,
    #[serde(rename = "LGA")]
    Lga,
    #[serde(rename = "LGAN")]
    Lgan,
    #[serde(rename = "MSARnd")]
    MsaRnd,
    MinD,
    MaxS,
    BruteForce,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::MsaRnd,
        Algorithm::Cga,
        Algorithm::Lga,
        Algorithm::Lgan,
        Algorithm::MinD,
        Algorithm::MaxS,
        Algorithm::BruteForce,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Cga => "CGA",
            Algorithm::Lga => "LGA",
            Algorithm::Lgan => "LGAN",
            Algorithm::MsaRnd => "MSARnd",
            Algorithm::MinD => "MinD",
            Algorithm::MaxS => "MaxS",
            Algorithm::BruteForce => "BruteForce",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown algorithm {s:?}")))
    }
}

/// One algorithm run: which constructor, which allocation is paired with
/// the association it returns, and the fairness parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlgoConfig {
    pub algorithm: Algorithm,
    pub alloc_mode: AllocMode,
    pub alpha: Alpha,
}

impl AlgoConfig {
    /// Rejects exhaustive search on instances above [`BRUTE_FORCE_CAP`].
    pub fn validate(&self, num_mus: usize, num_bss: usize) -> Result<()> {
        if self.algorithm == Algorithm::BruteForce {
            check_cap(num_mus, num_bss)?;
        }
        Ok(())
    }
}

/// Runs the configured constructor. `msa` is required for
/// [`Algorithm::MsaRnd`].
pub fn run_algorithm(
    cfg: &AlgoConfig,
    instance: &NetworkInstance,
    rates: &RateMatrix,
    msa: Option<&Allocation>,
) -> Result<Association> {
    Ok(match cfg.algorithm {
        Algorithm::Cga => run_cga(rates, cfg.alpha, cfg.alloc_mode),
        Algorithm::Lga => run_lga(rates, cfg.alpha, cfg.alloc_mode),
        Algorithm::Lgan => run_lgan(rates, cfg.alpha),
        Algorithm::MsaRnd => {
            let y = msa.ok_or_else(|| Error::Config("MSARnd needs an MSA allocation".into()))?;
            msa_round(rates, y)?.association
        }
        Algorithm::MinD => run_min_distance(instance),
        Algorithm::MaxS => run_max_sinr(rates),
        Algorithm::BruteForce => brute_force_ssa(rates, cfg.alpha, cfg.alloc_mode)?.0,
    })
}

/// Ordering key of a greedy move: the objective delta, then (only at
/// `α = ∞`, where many moves leave the network minimum unchanged) the new
/// minimum served rate at the receiving BS.
#[derive(Debug, Clone, Copy, PartialEq)]
struct MoveKey {
    delta: f64,
    local: f64,
}

impl MoveKey {
    fn beats(&self, other: &MoveKey) -> bool {
        match self.delta.partial_cmp(&other.delta) {
            Some(Ordering::Greater) => true,
            Some(Ordering::Equal) => self.local > other.local,
            _ => false,
        }
    }
}

/// Incremental per-BS view of a partial association for greedy moves.
struct GreedyState<'a> {
    rates: &'a RateMatrix,
    alpha: Alpha,
    mode: AllocMode,
    assoc: Association,
    member_rates: Vec<Vec<f64>>,
    terms: Vec<f64>,
}

impl<'a> GreedyState<'a> {
    fn new(rates: &'a RateMatrix, alpha: Alpha, mode: AllocMode) -> Self {
        let nb = rates.num_bss();
        GreedyState {
            rates,
            alpha,
            mode,
            assoc: Association::empty(rates.num_mus(), nb),
            member_rates: vec![Vec::new(); nb],
            terms: (0..nb).map(|_| bs_term(&[], alpha, mode)).collect(),
        }
    }

    /// For `α = ∞`: the network minimum over every BS except `a`, for all
    /// `a`, via the two smallest terms.
    fn other_minima(&self) -> Vec<f64> {
        if !self.alpha.is_infinite() {
            return Vec::new();
        }
        let (mut lo, mut lo_idx, mut second) = (f64::INFINITY, usize::MAX, f64::INFINITY);
        for (b, &t) in self.terms.iter().enumerate() {
            if t < lo {
                second = lo;
                lo = t;
                lo_idx = b;
            } else if t < second {
                second = t;
            }
        }
        (0..self.terms.len())
            .map(|b| if b == lo_idx { second } else { lo })
            .collect()
    }

    fn key(&self, v: usize, a: usize, other_minima: &[f64]) -> MoveKey {
        let mut after = self.member_rates[a].clone();
        after.push(self.rates.rate(v, a));
        let new_local = bs_term(&after, self.alpha, self.mode);
        match self.alpha {
            Alpha::Finite(_) => MoveKey {
                delta: new_local - self.terms[a],
                local: 0.0,
            },
            Alpha::Infinity => {
                let others = other_minima[a];
                let old = others.min(self.terms[a]);
                let new = others.min(new_local);
                MoveKey {
                    delta: if old.is_finite() { new - old } else { new },
                    local: new_local,
                }
            }
        }
    }

    fn add(&mut self, v: usize, a: usize) {
        self.assoc.assign(v, a);
        self.member_rates[a].push(self.rates.rate(v, a));
        self.terms[a] = bs_term(&self.member_rates[a], self.alpha, self.mode);
    }
}

/// Centralized greedy: repeatedly commit the (MU, BS) pair with the largest
/// objective increase. Ties go to the lowest MU, then the lowest BS.
pub fn run_cga(rates: &RateMatrix, alpha: Alpha, mode: AllocMode) -> Association {
    let mut state = GreedyState::new(rates, alpha, mode);
    for _ in 0..rates.num_mus() {
        let others = state.other_minima();
        let mut best: Option<(usize, usize, MoveKey)> = None;
        for v in state.assoc.unassigned().collect::<Vec<_>>() {
            for a in 0..rates.num_bss() {
                let k = state.key(v, a, &others);
                if best.as_ref().map_or(true, |(_, _, bk)| k.beats(bk)) {
                    best = Some((v, a, k));
                }
            }
        }
        let (v, a, _) = best.expect("pool is non-empty");
        state.add(v, a);
    }
    state.assoc
}

/// Localized greedy in synchronous rounds. Every unassigned MU requests the
/// BS with the largest local objective increase; every BS then grants the
/// requester with the largest increase at that BS. Both phases read the
/// state at the start of the round.
pub fn run_lga(rates: &RateMatrix, alpha: Alpha, mode: AllocMode) -> Association {
    let nb = rates.num_bss();
    let mut state = GreedyState::new(rates, alpha, mode);
    while state.assoc.num_assigned() < rates.num_mus() {
        let others = state.other_minima();
        let mut requests: Vec<Vec<usize>> = vec![Vec::new(); nb];
        for u in state.assoc.unassigned().collect::<Vec<_>>() {
            let mut best = (0, state.key(u, 0, &others));
            for a in 1..nb {
                let k = state.key(u, a, &others);
                if k.beats(&best.1) {
                    best = (a, k);
                }
            }
            requests[best.0].push(u);
        }
        let mut grants = Vec::new();
        for (b, reqs) in requests.iter().enumerate() {
            let mut best: Option<(usize, MoveKey)> = None;
            for &v in reqs {
                let k = state.key(v, b, &others);
                if best.as_ref().map_or(true, |(_, bk)| k.beats(bk)) {
                    best = Some((v, k));
                }
            }
            if let Some((v, _)) = best {
                grants.push((v, b));
            }
        }
        for (v, b) in grants {
            state.add(v, b);
        }
    }
    state.assoc
}

/// Congestion counts shared by the rate-free localized greedy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LganState {
    pub congestion: Vec<usize>,
    /// Requests received by each BS in the current round.
    pub requests: Vec<Vec<usize>>,
    /// Unassigned MUs, ascending.
    pub pool: Vec<usize>,
}

impl LganState {
    fn new(num_mus: usize, num_bss: usize) -> Self {
        LganState {
            congestion: vec![0; num_bss],
            requests: vec![Vec::new(); num_bss],
            pool: (0..num_mus).collect(),
        }
    }

    /// `Σ_b κ_b` equals the number of associated MUs.
    pub fn is_consistent_with(&self, assoc: &Association) -> bool {
        self.congestion.iter().sum::<usize>() == assoc.num_assigned()
            && self.congestion == assoc.loads()
    }
}

pub fn run_lgan(rates: &RateMatrix, alpha: Alpha) -> Association {
    run_lgan_observed(rates, alpha, |_, _| {})
}

/// Rate-free localized greedy. MUs know only their own rates and each BS's
/// congestion count `κ_b`, assume uniform allocation, and request
/// `argmax_a U_α(r_ua / (κ_a + 1))`. Each BS grants its lowest-index
/// requester. `observer` sees the state after every round.
pub fn run_lgan_observed(
    rates: &RateMatrix,
    alpha: Alpha,
    mut observer: impl FnMut(&LganState, &Association),
) -> Association {
    let (nu, nb) = (rates.num_mus(), rates.num_bss());
    let mut state = LganState::new(nu, nb);
    let mut assoc = Association::empty(nu, nb);
    let score = |rate: f64| match alpha {
        Alpha::Finite(a) => utility_finite(a, rate),
        Alpha::Infinity => rate,
    };
    while !state.pool.is_empty() {
        for &u in &state.pool {
            let scores: Vec<f64> = (0..nb)
                .map(|a| score(rates.rate(u, a) / (state.congestion[a] + 1) as f64))
                .collect();
            state.requests[argmax_first(&scores)].push(u);
        }
        for b in 0..nb {
            if let Some(&u) = state.requests[b].iter().min() {
                assoc.assign(u, b);
                state.congestion[b] += 1;
            }
            state.requests[b].clear();
        }
        state.pool.retain(|&u| assoc.bs_of(u).is_none());
        debug_assert!(state.is_consistent_with(&assoc));
        observer(&state, &assoc);
    }
    assoc
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MsaRounding {
    pub association: Association,
    /// MUs whose MSA row was all zero; sent to their max-rate BS.
    pub zero_row_mus: Vec<usize>,
}

/// Rounds an MSA allocation: each MU joins `argmax_b r_ub y_ub`.
pub fn msa_round(rates: &RateMatrix, msa_alloc: &Allocation) -> Result<MsaRounding> {
    if (rates.num_mus(), rates.num_bss()) != (msa_alloc.num_mus(), msa_alloc.num_bss()) {
        return Err(Error::Dimension("rates and allocation differ in shape".into()));
    }
    let nb = rates.num_bss();
    let mut assign = Vec::with_capacity(rates.num_mus());
    let mut zero_row_mus = Vec::new();
    for u in 0..rates.num_mus() {
        let served: Vec<f64> = (0..nb)
            .map(|b| rates.rate(u, b) * msa_alloc.share(u, b).max(0.0))
            .collect();
        if served.iter().all(|&s| s == 0.0) {
            zero_row_mus.push(u);
            assign.push(argmax_first(rates.rates().row(u)));
        } else {
            assign.push(argmax_first(&served));
        }
    }
    Ok(MsaRounding {
        association: Association::from_assignment(&assign, nb)?,
        zero_row_mus,
    })
}

/// Each MU joins its nearest BS.
pub fn run_min_distance(instance: &NetworkInstance) -> Association {
    let nb = instance.num_bss();
    let assign: Vec<usize> = (0..instance.num_mus())
        .map(|u| {
            let neg: Vec<f64> = (0..nb).map(|b| -instance.distance(u, b)).collect();
            argmax_first(&neg)
        })
        .collect();
    Association::from_assignment(&assign, nb).expect("indices in range")
}

/// Each MU joins its highest-SINR BS.
pub fn run_max_sinr(rates: &RateMatrix) -> Association {
    let assign: Vec<usize> = (0..rates.num_mus())
        .map(|u| argmax_first(rates.sinrs().row(u)))
        .collect();
    Association::from_assignment(&assign, rates.num_bss()).expect("indices in range")
}

fn check_cap(num_mus: usize, num_bss: usize) -> Result<()> {
    let over = || Error::OverCap { num_mus, num_bss };
    let exp = u32::try_from(num_mus).map_err(|_| over())?;
    match (num_bss as u64).checked_pow(exp) {
        Some(n) if n <= BRUTE_FORCE_CAP => Ok(()),
        _ => Err(over()),
    }
}

/// Odometer over `{0..base}^len`, first digit most significant.
fn next_assignment(digits: &mut [usize], base: usize) -> bool {
    for d in digits.iter_mut().rev() {
        *d += 1;
        if *d < base {
            return true;
        }
        *d = 0;
    }
    false
}

/// Objective of a complete assignment with caller-owned scratch buffers.
fn eval_assignment(
    rates: &RateMatrix,
    assign: &[usize],
    alpha: Alpha,
    mode: AllocMode,
    scratch: &mut [Vec<f64>],
) -> f64 {
    for s in scratch.iter_mut() {
        s.clear();
    }
    for (u, &b) in assign.iter().enumerate() {
        scratch[b].push(rates.rate(u, b));
    }
    let terms = scratch.iter().map(|r| bs_term(r, alpha, mode));
    match alpha {
        Alpha::Infinity => terms.fold(f64::INFINITY, f64::min),
        Alpha::Finite(_) => terms.sum(),
    }
}

/// Exhaustive search over all `|B|^|U|` associations. Returns the first
/// maximiser in lexicographic order of the per-MU BS index vector.
pub fn brute_force_ssa(
    rates: &RateMatrix,
    alpha: Alpha,
    mode: AllocMode,
) -> Result<(Association, ObjectiveValue)> {
    let (nu, nb) = (rates.num_mus(), rates.num_bss());
    check_cap(nu, nb)?;
    let mut scratch = vec![Vec::with_capacity(nu); nb];
    let mut digits = vec![0; nu];
    let mut best = digits.clone();
    let mut best_val = eval_assignment(rates, &digits, alpha, mode, &mut scratch);
    while next_assignment(&mut digits, nb) {
        let v = eval_assignment(rates, &digits, alpha, mode, &mut scratch);
        if v > best_val {
            best_val = v;
            best.copy_from_slice(&digits);
        }
    }
    let assoc = Association::from_assignment(&best, nb)?;
    let value = f_ssa(rates, &assoc, alpha, mode);
    debug_assert!(value.value == best_val || (value.value - best_val).abs() <= 1e-12 * best_val.abs());
    Ok((assoc, value))
}

/// Samples `X_u ~ x_u` independently for every MU.
pub fn randomized_round(x: &FractionalAssociation, rng_seed: u64) -> Association {
    let mut rng = stream_rng(rng_seed, 0);
    randomized_round_with(x, &mut rng)
}

pub fn randomized_round_with<R: Rng>(x: &FractionalAssociation, rng: &mut R) -> Association {
    let nb = x.num_bss();
    let assign: Vec<usize> = (0..x.num_mus())
        .map(|u| {
            let draw: f64 = rng.gen();
            let row = x.weights().row(u);
            let mut acc = 0.0;
            let mut last_positive = 0;
            for (b, &w) in row.iter().enumerate() {
                if w > 0.0 {
                    acc += w;
                    last_positive = b;
                    if draw < acc {
                        return b;
                    }
                }
            }
            // Rows sum to one only up to rounding.
            last_positive
        })
        .collect();
    Association::from_assignment(&assign, nb).expect("indices in range")
}

/// Which inequality between `E[f(Z)]` and `f(x)` holds at a given α.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum JensenDirection {
    /// `E[f(Z)] >= f(x)`, for `α ∈ [0, 2)`.
    AtLeast,
    /// `E[f(Z)] = f(x)`, at `α = 2`.
    Equal,
    /// `E[f(Z)] <= f(x)`, for `α > 2`.
    AtMost,
    /// No claim (`α = ∞`).
    Unspecified,
}

impl JensenDirection {
    pub fn for_alpha(alpha: Alpha) -> Self {
        match alpha {
            Alpha::Finite(a) if a < 2.0 => JensenDirection::AtLeast,
            Alpha::Finite(a) if a == 2.0 => JensenDirection::Equal,
            Alpha::Finite(_) => JensenDirection::AtMost,
            Alpha::Infinity => JensenDirection::Unspecified,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundingCheck {
    /// Exact `E[f(Z)]` under independent rounding of each row of `x`.
    pub expectation: f64,
    /// Relaxed objective at `x`.
    pub f_relaxed: f64,
    pub direction: JensenDirection,
    pub direction_ok: bool,
    /// Best objective over integer outcomes with positive probability.
    pub best_in_support: f64,
    pub best_association: Association,
    pub support_size: usize,
}

/// Absolute tolerance for the `α = 2` equality, scaled by `max(1, |f(x)|)`.
pub const JENSEN_EQUALITY_TOL: f64 = 1e-9;
/// Rounding slack for the one-sided inequalities, scaled the same way.
pub const JENSEN_INEQUALITY_SLACK: f64 = 1e-12;

/// Computes `E[f(Z)]` exactly by enumerating every integer outcome of the
/// independent rounding `P(X_u = b) = x_ub`, weighted by `Π_u x_{u,X_u}`,
/// and compares it with the relaxed objective at `x`.
pub fn rounding_expectation_check(
    rates: &RateMatrix,
    x: &FractionalAssociation,
    alpha: Alpha,
    mode: AllocMode,
) -> Result<RoundingCheck> {
    let (nu, nb) = (x.num_mus(), x.num_bss());
    check_cap(nu, nb)?;
    let f_x = f_relaxed(rates, x, alpha, mode)?;

    let supports: Vec<Vec<usize>> = (0..nu)
        .map(|u| (0..nb).filter(|&b| x.weight(u, b) > 0.0).collect())
        .collect();
    let mut idx = vec![0usize; nu];
    let mut assign: Vec<usize> = supports.iter().map(|s| s[0]).collect();
    let mut scratch = vec![Vec::with_capacity(nu); nb];
    let mut expectation = 0.0;
    let mut best = f64::NEG_INFINITY;
    let mut best_assign = assign.clone();
    let mut support_size = 0;
    loop {
        let w: f64 = assign
            .iter()
            .enumerate()
            .map(|(u, &b)| x.weight(u, b))
            .product();
        let v = eval_assignment(rates, &assign, alpha, mode, &mut scratch);
        expectation += w * v;
        support_size += 1;
        if v > best {
            best = v;
            best_assign.copy_from_slice(&assign);
        }
        // Advance the mixed-radix counter over the supports.
        let mut u = nu;
        loop {
            if u == 0 {
                break;
            }
            u -= 1;
            idx[u] += 1;
            if idx[u] < supports[u].len() {
                assign[u] = supports[u][idx[u]];
                break;
            }
            idx[u] = 0;
            assign[u] = supports[u][0];
            if u == 0 {
                u = usize::MAX;
                break;
            }
        }
        if u == usize::MAX || (nu == 0) {
            break;
        }
    }

    let direction = JensenDirection::for_alpha(alpha);
    let scale = f_x.abs().max(1.0);
    let direction_ok = match direction {
        JensenDirection::AtLeast => expectation >= f_x - JENSEN_INEQUALITY_SLACK * scale,
        JensenDirection::Equal => (expectation - f_x).abs() < JENSEN_EQUALITY_TOL * scale,
        JensenDirection::AtMost => expectation <= f_x + JENSEN_INEQUALITY_SLACK * scale,
        JensenDirection::Unspecified => true,
    };
    Ok(RoundingCheck {
        expectation,
        f_relaxed: f_x,
        direction,
        direction_ok,
        best_in_support: best,
        best_association: Association::from_assignment(&best_assign, nb)?,
        support_size,
    })
}

/// Local search for a good relaxed association: from a random interior
/// point, move mass `δ·x_ub` from BS `b` to BS `c` within one MU's row
/// whenever it improves the relaxed objective, halving `δ` when a full sweep
/// finds no improvement. Not a certified optimum (the relaxation is
/// non-convex for `α != 1`).
pub fn local_search_relaxed(
    rates: &RateMatrix,
    alpha: Alpha,
    mode: AllocMode,
    seed: u64,
) -> Result<FractionalAssociation> {
    let (nu, nb) = (rates.num_mus(), rates.num_bss());
    let mut rng = stream_rng(seed, 1);
    let mut w = Matrix::from_fn(nu, nb, |_, _| 0.1 + rng.gen::<f64>());
    for u in 0..nu {
        let s = w.row_sum(u);
        w.row_mut(u).iter_mut().for_each(|v| *v /= s);
    }
    let eval = |w: &Matrix| -> Result<f64> {
        f_relaxed(rates, &FractionalAssociation::new(w.clone())?, alpha, mode)
    };
    let mut best = eval(&w)?;
    let mut delta = 0.5;
    while delta > 1e-6 {
        let mut improved = false;
        for u in 0..nu {
            for b in 0..nb {
                for c in 0..nb {
                    if b == c || w[(u, b)] == 0.0 {
                        continue;
                    }
                    let moved = if delta >= 0.5 { w[(u, b)] } else { delta * w[(u, b)] };
                    let mut cand = w.clone();
                    cand[(u, b)] -= moved;
                    cand[(u, c)] += moved;
                    if cand[(u, b)] < 1e-15 {
                        cand[(u, c)] += cand[(u, b)];
                        cand[(u, b)] = 0.0;
                    }
                    // Moving a whole row can round just above 1.
                    cand[(u, c)] = cand[(u, c)].min(1.0);
                    let v = eval(&cand)?;
                    if v > best {
                        best = v;
                        w = cand;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            delta *= 0.5;
        }
    }
    FractionalAssociation::new(w)
}
