//! BS resource allocation for a fixed association.
//!
//! Once every MU is attached to one BS, the network problem splits into one
//! small convex program per BS: share one unit of resource among the MUs in
//! `U_b` to maximise `Σ_{u∈U_b} U_α(r_ub y_ub)`. Its solution is closed form:
//!
//! - `α = 0`: everything to the member with the largest rate;
//! - `α = 1`: uniform shares `1/|U_b|`;
//! - `0 < α < ∞`: `y_ub ∝ r_ub^((1-α)/α)`;
//! - `α = ∞`: `y_ub ∝ 1/r_ub`, which equalises the served rates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::net_model::RateMatrix;
use crate::utility::{Alpha, DownlinkRates};

/// Below this α the closed form switches to the `α = 0` rule; the exponent
/// `(1-α)/α` is otherwise too large to be meaningful.
pub const ALPHA_ZERO_CUTOFF: f64 = 1e-8;

/// MU → BS association. A partial association (some MUs unassigned) is the
/// working state of the greedy algorithms; every algorithm returns a
/// complete one.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Association {
    assign: Vec<Option<usize>>,
    num_bss: usize,
}

impl Association {
    pub fn empty(num_mus: usize, num_bss: usize) -> Self {
        Association {
            assign: vec![None; num_mus],
            num_bss,
        }
    }

    /// Complete association from a per-MU BS index.
    pub fn from_assignment(assign: &[usize], num_bss: usize) -> Result<Self> {
        Self::from_partial(assign.iter().map(|&b| Some(b)).collect(), num_bss)
    }

    pub fn from_partial(assign: Vec<Option<usize>>, num_bss: usize) -> Result<Self> {
        if let Some(b) = assign.iter().flatten().find(|&&b| b >= num_bss) {
            return Err(Error::Dimension(format!("BS index {b} >= {num_bss}")));
        }
        Ok(Association { assign, num_bss })
    }

    /// Reads a 0/1 matrix whose rows each contain at most one 1.
    pub fn from_one_hot(z: &Matrix) -> Result<Self> {
        let mut assign = Vec::with_capacity(z.rows());
        for u in 0..z.rows() {
            let mut bs = None;
            for (b, &v) in z.row(u).iter().enumerate() {
                if v == 1.0 {
                    if bs.is_some() {
                        return Err(Error::Dimension(format!("row {u} has two ones")));
                    }
                    bs = Some(b);
                } else if v != 0.0 {
                    return Err(Error::Dimension(format!("row {u} is not 0/1")));
                }
            }
            assign.push(bs);
        }
        Ok(Association {
            assign,
            num_bss: z.cols(),
        })
    }

    pub fn num_mus(&self) -> usize {
        self.assign.len()
    }

    pub fn num_bss(&self) -> usize {
        self.num_bss
    }

    #[inline]
    pub fn bs_of(&self, u: usize) -> Option<usize> {
        self.assign[u]
    }

    pub fn is_complete(&self) -> bool {
        self.assign.iter().all(Option::is_some)
    }

    /// Per-MU BS indices if the association is complete.
    pub fn assignment(&self) -> Option<Vec<usize>> {
        self.assign.iter().copied().collect()
    }

    pub fn unassigned(&self) -> impl Iterator<Item = usize> + '_ {
        self.assign
            .iter()
            .enumerate()
            .filter(|(_, b)| b.is_none())
            .map(|(u, _)| u)
    }

    pub fn num_assigned(&self) -> usize {
        self.assign.iter().flatten().count()
    }

    /// Attaches an unassigned MU.
    pub fn assign(&mut self, u: usize, b: usize) {
        assert!(b < self.num_bss, "BS index out of range");
        assert!(self.assign[u].is_none(), "MU {u} already associated");
        self.assign[u] = Some(b);
    }

    pub fn with(&self, u: usize, b: usize) -> Association {
        let mut next = self.clone();
        next.assign(u, b);
        next
    }

    /// MUs attached to `b`, ascending.
    pub fn members(&self, b: usize) -> Vec<usize> {
        self.assign
            .iter()
            .enumerate()
            .filter(|(_, a)| **a == Some(b))
            .map(|(u, _)| u)
            .collect()
    }

    /// Members of every BS, each list ascending.
    pub fn members_by_bs(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_bss];
        for (u, b) in self.assign.iter().enumerate() {
            if let Some(b) = b {
                out[*b].push(u);
            }
        }
        out
    }

    pub fn loads(&self) -> Vec<usize> {
        let mut out = vec![0; self.num_bss];
        for b in self.assign.iter().flatten() {
            out[*b] += 1;
        }
        out
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_fn(self.num_mus(), self.num_bss, |u, b| {
            if self.assign[u] == Some(b) {
                1.0
            } else {
                0.0
            }
        })
    }
}

/// Resource shares `y_ub`; each non-idle BS column sums to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    shares: Matrix,
}

impl Allocation {
    /// Wraps a share matrix, checking entries lie in `[0, 1]` and every
    /// non-zero column sums to one within `1e-9`.
    pub fn new(shares: Matrix) -> Result<Self> {
        if let Some(v) = shares
            .as_slice()
            .iter()
            .find(|v| !(**v >= 0.0 && **v <= 1.0 + 1e-12))
        {
            return Err(Error::Infeasible(format!("share {v} outside [0, 1]")));
        }
        for b in 0..shares.cols() {
            let s = shares.col_sum(b);
            if s != 0.0 && (s - 1.0).abs() > 1e-9 {
                return Err(Error::Infeasible(format!("column {b} sums to {s}")));
            }
        }
        Ok(Allocation { shares })
    }

    pub(crate) fn from_matrix_unchecked(shares: Matrix) -> Self {
        Allocation { shares }
    }

    #[inline]
    pub fn share(&self, u: usize, b: usize) -> f64 {
        self.shares[(u, b)]
    }

    pub fn shares(&self) -> &Matrix {
        &self.shares
    }

    pub fn into_matrix(self) -> Matrix {
        self.shares
    }

    pub fn num_mus(&self) -> usize {
        self.shares.rows()
    }

    pub fn num_bss(&self) -> usize {
        self.shares.cols()
    }
}

/// Optimal shares for one BS given the member rates, in member order.
///
/// Ties under `α = 0` go to the first (lowest-index) member.
pub fn optimal_shares(rates: &[f64], alpha: Alpha) -> Vec<f64> {
    let n = rates.len();
    if n == 0 {
        return Vec::new();
    }
    match alpha {
        Alpha::Finite(a) if a < ALPHA_ZERO_CUTOFF => {
            let best = argmax_first(rates);
            (0..n).map(|i| if i == best { 1.0 } else { 0.0 }).collect()
        }
        Alpha::Finite(a) if a == 1.0 => vec![1.0 / n as f64; n],
        Alpha::Finite(a) => {
            // y ∝ exp(e ln r), normalised in log space so tiny α cannot overflow.
            let e = (1.0 - a) / a;
            let logs: Vec<f64> = rates.iter().map(|r| e * r.ln()).collect();
            normalise_exp(&logs)
        }
        Alpha::Infinity => {
            let inv: Vec<f64> = rates.iter().map(|r| 1.0 / r).collect();
            let total: f64 = inv.iter().sum();
            inv.into_iter().map(|w| w / total).collect()
        }
    }
}

fn normalise_exp(logs: &[f64]) -> Vec<f64> {
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

pub(crate) fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Closed-form optimal allocation for a (possibly partial) association.
/// Unassigned MUs and idle BSs get all-zero rows / columns.
pub fn optimal_allocation(rates: &RateMatrix, assoc: &Association, alpha: Alpha) -> Allocation {
    let mut shares = Matrix::zeros(assoc.num_mus(), assoc.num_bss());
    for (b, members) in assoc.members_by_bs().iter().enumerate() {
        let r: Vec<f64> = members.iter().map(|&u| rates.rate(u, b)).collect();
        for (&u, y) in members.iter().zip(optimal_shares(&r, alpha)) {
            shares[(u, b)] = y;
        }
    }
    Allocation::from_matrix_unchecked(shares)
}

/// Every BS splits its resource equally among its members.
pub fn uniform_allocation(assoc: &Association) -> Allocation {
    let loads = assoc.loads();
    let mut shares = Matrix::zeros(assoc.num_mus(), assoc.num_bss());
    for u in 0..assoc.num_mus() {
        if let Some(b) = assoc.bs_of(u) {
            shares[(u, b)] = 1.0 / loads[b] as f64;
        }
    }
    Allocation::from_matrix_unchecked(shares)
}

/// `R_u = Σ_b r_ub y_ub`.
pub fn downlink_rates(rates: &RateMatrix, alloc: &Allocation) -> DownlinkRates {
    let r = (0..alloc.num_mus())
        .map(|u| {
            rates
                .rates()
                .row(u)
                .iter()
                .zip(alloc.shares().row(u))
                .map(|(r, y)| r * y.max(0.0))
                .sum()
        })
        .collect();
    DownlinkRates::new(r).expect("non-negative by construction")
}

/// Central finite difference of `y*_ub` with respect to `r_ub`, where `b` is
/// the BS serving `u`.
///
/// Requires `0 < α < ∞`, at least two MUs on `b` and `0 < h < r_ub`.
pub fn allocation_rate_sensitivity(
    rates: &RateMatrix,
    assoc: &Association,
    alpha: Alpha,
    u: usize,
    h: f64,
) -> Result<f64> {
    let a = match alpha {
        Alpha::Finite(a) if a > 0.0 => a,
        _ => {
            return Err(Error::Sensitivity(format!(
                "alpha must be finite and positive, got {alpha}"
            )))
        }
    };
    let b = assoc
        .bs_of(u)
        .ok_or_else(|| Error::Sensitivity(format!("MU {u} is unassigned")))?;
    let members = assoc.members(b);
    if members.len() < 2 {
        return Err(Error::Sensitivity(format!(
            "MU {u} is alone on BS {b}; its share is identically 1"
        )));
    }
    let r_ub = rates.rate(u, b);
    if !(h > 0.0 && h < r_ub) {
        return Err(Error::Sensitivity(format!("step {h} must lie in (0, {r_ub})")));
    }
    let pos = members.iter().position(|&v| v == u).expect("u is a member");
    let base: Vec<f64> = members.iter().map(|&v| rates.rate(v, b)).collect();
    let share_at = |r: f64| {
        let mut col = base.clone();
        col[pos] = r;
        optimal_shares(&col, Alpha::Finite(a))[pos]
    };
    Ok((share_at(r_ub + h) - share_at(r_ub - h)) / (2.0 * h))
}
