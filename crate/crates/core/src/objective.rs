//! Single-station network objectives and their relaxations.
//!
//! For a complete association `z` the network utility under optimal BS
//! allocation is
//!
//! ```text
//! f_SO(z) = 1/(1-α) Σ_ub r_ub^(1-α) z_ub (1 + Σ_{v≠u} (r_vb/r_ub)^((1-α)/α) z_vb)^(α-1)
//! ```
//!
//! with dedicated forms at `α = 0` (sum of per-BS best rates), `α = 1`
//! (`Σ z_ub (ln r_ub - ln |U_b|)`) and `α = ∞` (minimum served rate). Under
//! uniform allocation (`f_SU`) the bracket is simply `|U_b|`. Replacing `z` by
//! a row-stochastic `x` gives the relaxed objectives `f_RSO` / `f_RSU`.
//!
//! Per-BS terms are computed in log space: with `e = (1-α)/α` and
//! `L = ln Σ_{v∈U_b} r_vb^e`, the bracket equals `exp(L - e ln r_ub)`.

use serde::{Deserialize, Serialize};

use crate::allocation::{downlink_rates, Allocation, Association, ALPHA_ZERO_CUTOFF};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::net_model::RateMatrix;
use crate::utility::{sum_utility, Alpha};

/// BS allocation policy paired with an association.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AllocMode {
    Optimal,
    Uniform,
}

impl std::fmt::Display for AllocMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AllocMode::Optimal => "optimal",
            AllocMode::Uniform => "uniform",
        })
    }
}

impl std::str::FromStr for AllocMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "optimal" | "o" => Ok(AllocMode::Optimal),
            "uniform" | "u" => Ok(AllocMode::Uniform),
            _ => Err(Error::Config(format!("unknown allocation mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveKind {
    OptimalAlloc,
    UniformAlloc,
    Msa,
}

impl From<AllocMode> for ObjectiveKind {
    fn from(m: AllocMode) -> Self {
        match m {
            AllocMode::Optimal => ObjectiveKind::OptimalAlloc,
            AllocMode::Uniform => ObjectiveKind::UniformAlloc,
        }
    }
}

/// A network utility together with how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValue {
    pub value: f64,
    pub kind: ObjectiveKind,
    pub alpha: Alpha,
}

/// Row-stochastic relaxation of an association.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionalAssociation {
    weights: Matrix,
}

impl FractionalAssociation {
    pub fn new(weights: Matrix) -> Result<Self> {
        for u in 0..weights.rows() {
            let row = weights.row(u);
            if row.iter().any(|w| !(*w >= 0.0 && *w <= 1.0)) {
                return Err(Error::NotRowStochastic {
                    row: u,
                    sum: row.iter().sum(),
                });
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::NotRowStochastic { row: u, sum });
            }
        }
        Ok(FractionalAssociation { weights })
    }

    pub fn from_association(assoc: &Association) -> Result<Self> {
        if !assoc.is_complete() {
            return Err(Error::Dimension("association is partial".into()));
        }
        Ok(FractionalAssociation {
            weights: assoc.to_matrix(),
        })
    }

    #[inline]
    pub fn weight(&self, u: usize, b: usize) -> f64 {
        self.weights[(u, b)]
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn num_mus(&self) -> usize {
        self.weights.rows()
    }

    pub fn num_bss(&self) -> usize {
        self.weights.cols()
    }

    pub fn is_integral(&self) -> bool {
        self.weights
            .as_slice()
            .iter()
            .all(|&w| w == 0.0 || w == 1.0)
    }
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Contribution of one BS to the network objective, given its members'
/// rates. For `α = ∞` this is the minimum served rate at the BS (`+inf` when
/// idle); otherwise the sum of member utilities (`0` when idle).
pub fn bs_term(member_rates: &[f64], alpha: Alpha, mode: AllocMode) -> f64 {
    let n = member_rates.len();
    if n == 0 {
        return match alpha {
            Alpha::Infinity => f64::INFINITY,
            Alpha::Finite(_) => 0.0,
        };
    }
    let nf = n as f64;
    match (alpha, mode) {
        (Alpha::Finite(a), _) if a == 1.0 => member_rates.iter().map(|r| r.ln() - nf.ln()).sum(),
        (Alpha::Finite(a), AllocMode::Optimal) if a < ALPHA_ZERO_CUTOFF => {
            member_rates.iter().copied().fold(0.0, f64::max)
        }
        (Alpha::Finite(a), AllocMode::Optimal) => {
            let e = (1.0 - a) / a;
            let logs = member_rates.iter().map(|r| e * r.ln());
            let lse = log_sum_exp(logs);
            member_rates
                .iter()
                .map(|r| {
                    let lr = r.ln();
                    ((1.0 - a) * lr + (a - 1.0) * (lse - e * lr)).exp()
                })
                .sum::<f64>()
                / (1.0 - a)
        }
        (Alpha::Finite(a), AllocMode::Uniform) if a == 0.0 => member_rates.iter().sum::<f64>() / nf,
        (Alpha::Finite(a), AllocMode::Uniform) => {
            member_rates
                .iter()
                .map(|r| r.powf(1.0 - a) * nf.powf(a - 1.0))
                .sum::<f64>()
                / (1.0 - a)
        }
        (Alpha::Infinity, AllocMode::Optimal) => {
            1.0 / member_rates.iter().map(|r| 1.0 / r).sum::<f64>()
        }
        (Alpha::Infinity, AllocMode::Uniform) => member_rates
            .iter()
            .map(|r| r / nf)
            .fold(f64::INFINITY, f64::min),
    }
}

fn combine(alpha: Alpha, terms: impl Iterator<Item = f64>) -> f64 {
    match alpha {
        Alpha::Infinity => terms.fold(f64::INFINITY, f64::min),
        Alpha::Finite(_) => terms.sum(),
    }
}

fn ssa_objective(rates: &RateMatrix, assoc: &Association, alpha: Alpha, mode: AllocMode) -> f64 {
    let terms = assoc.members_by_bs().into_iter().enumerate().map(|(b, m)| {
        let r: Vec<f64> = m.iter().map(|&u| rates.rate(u, b)).collect();
        bs_term(&r, alpha, mode)
    });
    combine(alpha, terms)
}

/// Network utility of `assoc` under the optimal per-BS allocation.
///
/// Unassigned MUs contribute nothing: `0` to the sum, and they are skipped by
/// the `α = ∞` minimum (an empty association evaluates to `+inf` there).
pub fn f_so(rates: &RateMatrix, assoc: &Association, alpha: Alpha) -> ObjectiveValue {
    ObjectiveValue {
        value: ssa_objective(rates, assoc, alpha, AllocMode::Optimal),
        kind: ObjectiveKind::OptimalAlloc,
        alpha,
    }
}

/// Network utility of `assoc` under uniform per-BS allocation. Identical to
/// [`f_so`] at `α = 1`.
pub fn f_su(rates: &RateMatrix, assoc: &Association, alpha: Alpha) -> ObjectiveValue {
    ObjectiveValue {
        value: ssa_objective(rates, assoc, alpha, AllocMode::Uniform),
        kind: ObjectiveKind::UniformAlloc,
        alpha,
    }
}

pub fn f_ssa(rates: &RateMatrix, assoc: &Association, alpha: Alpha, mode: AllocMode) -> ObjectiveValue {
    match mode {
        AllocMode::Optimal => f_so(rates, assoc, alpha),
        AllocMode::Uniform => f_su(rates, assoc, alpha),
    }
}

/// `Σ_u U_α(Σ_b r_ub y_ub)` for an arbitrary allocation.
pub fn f_msa(rates: &RateMatrix, alloc: &Allocation, alpha: Alpha) -> ObjectiveValue {
    ObjectiveValue {
        value: sum_utility(alpha, &downlink_rates(rates, alloc)),
        kind: ObjectiveKind::Msa,
        alpha,
    }
}

/// Objective change from attaching the unassigned MU `v` to BS `a`.
///
/// Only BS `a`'s term changes, so the delta is evaluated there alone. For
/// `α = ∞` the delta is the change in the network minimum served rate; when
/// nothing is assigned yet it is the new minimum itself.
pub fn greedy_delta(
    rates: &RateMatrix,
    assoc: &Association,
    candidate: (usize, usize),
    alpha: Alpha,
    mode: AllocMode,
) -> Result<f64> {
    let (v, a) = candidate;
    if assoc.bs_of(v).is_some() {
        return Err(Error::Dimension(format!("MU {v} is already associated")));
    }
    let members = assoc.members(a);
    let before: Vec<f64> = members.iter().map(|&u| rates.rate(u, a)).collect();
    let mut after = before.clone();
    after.push(rates.rate(v, a));
    let old_local = bs_term(&before, alpha, mode);
    let new_local = bs_term(&after, alpha, mode);
    match alpha {
        Alpha::Finite(_) => Ok(new_local - old_local),
        Alpha::Infinity => {
            let others = assoc
                .members_by_bs()
                .into_iter()
                .enumerate()
                .filter(|(b, _)| *b != a)
                .map(|(b, m)| {
                    let r: Vec<f64> = m.iter().map(|&u| rates.rate(u, b)).collect();
                    bs_term(&r, alpha, mode)
                })
                .fold(f64::INFINITY, f64::min);
            let old = others.min(old_local);
            let new = others.min(new_local);
            Ok(if old.is_finite() { new - old } else { new })
        }
    }
}

fn check_relaxed_dims(rates: &RateMatrix, x: &FractionalAssociation) -> Result<()> {
    if (rates.num_mus(), rates.num_bss()) != (x.num_mus(), x.num_bss()) {
        return Err(Error::Dimension(format!(
            "rates are {}x{}, association is {}x{}",
            rates.num_mus(),
            rates.num_bss(),
            x.num_mus(),
            x.num_bss()
        )));
    }
    Ok(())
}

/// Relaxed objective `f_RSO` / `f_RSU`: the closed forms above with the
/// integer association replaced by a row-stochastic `x`.
pub fn f_relaxed(
    rates: &RateMatrix,
    x: &FractionalAssociation,
    alpha: Alpha,
    mode: AllocMode,
) -> Result<f64> {
    check_relaxed_dims(rates, x)?;
    let (nu, nb) = (x.num_mus(), x.num_bss());

    // α = 0 with optimal allocation: Σ_b max_u r_ub x_ub.
    if let (Alpha::Finite(a), AllocMode::Optimal) = (alpha, mode) {
        if a < ALPHA_ZERO_CUTOFF && a != 1.0 {
            return Ok((0..nb)
                .map(|b| {
                    (0..nu)
                        .map(|u| rates.rate(u, b) * x.weight(u, b))
                        .fold(0.0, f64::max)
                })
                .sum());
        }
    }

    // Weighted congestion 1 + Σ_{v≠u} d_uvb x_vb seen by MU u at BS b.
    let congestion = |u: usize, b: usize| -> f64 {
        let lu = rates.rate(u, b).ln();
        1.0 + (0..nu)
            .filter(|&v| v != u)
            .map(|v| {
                let d = match (alpha, mode) {
                    (Alpha::Finite(a), AllocMode::Optimal) if a != 1.0 => {
                        ((1.0 - a) / a * (rates.rate(v, b).ln() - lu)).exp()
                    }
                    (Alpha::Infinity, AllocMode::Optimal) => (lu - rates.rate(v, b).ln()).exp(),
                    _ => 1.0,
                };
                d * x.weight(v, b)
            })
            .sum::<f64>()
    };

    match alpha {
        Alpha::Finite(a) => {
            let mut total = 0.0;
            for u in 0..nu {
                for b in 0..nb {
                    let w = x.weight(u, b);
                    if w == 0.0 {
                        continue;
                    }
                    let r = rates.rate(u, b);
                    let c = congestion(u, b);
                    total += if a == 1.0 {
                        w * (r.ln() - c.ln())
                    } else if a == 0.0 {
                        w * r / c
                    } else {
                        w * r.powf(1.0 - a) * c.powf(a - 1.0) / (1.0 - a)
                    };
                }
            }
            Ok(total)
        }
        Alpha::Infinity => Ok((0..nu)
            .map(|u| {
                (0..nb)
                    .map(|b| x.weight(u, b) * rates.rate(u, b) / congestion(u, b))
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min)),
    }
}

/// Eigenvalues `(λ_min, λ_max)` of the Hessian of `g(x, y) = x (1+y)^(α-1)`,
/// the generic summand of the relaxed objectives:
///
/// ```text
/// H = [ 0                       (α-1)(1+y)^(α-2)        ]
///     [ (α-1)(1+y)^(α-2)        (α-1)(α-2) x (1+y)^(α-3) ]
/// ```
///
/// `det H = -h_xy² < 0` whenever `α != 1`, so the eigenvalues have opposite
/// signs.
pub fn summand_hessian_eigs(x: f64, y: f64, alpha: Alpha) -> Result<(f64, f64)> {
    let a = match alpha {
        Alpha::Finite(a) if a > 0.0 && a != 1.0 => a,
        _ => {
            return Err(Error::Unsupported(format!(
                "Hessian probe needs finite alpha > 0, alpha != 1 (got {alpha})"
            )))
        }
    };
    if !(x > 0.0 && x <= 1.0) || !(y >= 0.0) {
        return Err(Error::Dimension(format!("(x, y) = ({x}, {y}) outside (0,1] x [0,inf)")));
    }
    let hxy = (a - 1.0) * (1.0 + y).powf(a - 2.0);
    let hyy = (a - 1.0) * (a - 2.0) * x * (1.0 + y).powf(a - 3.0);
    // Symmetric 2x2 [[0, c], [c, d]]: d/2 ± sqrt(d²/4 + c²).
    let half = 0.5 * hyy;
    let radius = half.hypot(hxy);
    let (lo, hi) = if half >= 0.0 {
        // Avoid cancellation in the small root: λ_lo λ_hi = -c².
        let hi = half + radius;
        (-hxy * hxy / hi, hi)
    } else {
        let lo = half - radius;
        (lo, -hxy * hxy / lo)
    };
    Ok((lo, hi))
}

/// KKT candidates of the ε-relaxed single-association geometric program on
/// two BSs `a`, `b` and one MU.
#[derive(Debug, Clone, PartialEq)]
pub struct GpExample {
    /// `(y_ua, y_ub)`: the interior point, then `(1, ε)` and `(ε, 1)`.
    pub candidates: [(f64, f64); 3],
    pub objectives: [f64; 3],
    /// Index of the candidate with the smallest objective.
    pub minimizer: usize,
}

/// `1/(α-1) ((r_ua y_ua)^(1-α) + (r_ub y_ub)^(1-α))`, the GP objective
/// (minimised).
pub fn gp_objective(r_ua: f64, r_ub: f64, alpha: f64, y_ua: f64, y_ub: f64) -> f64 {
    ((r_ua * y_ua).powf(1.0 - alpha) + (r_ub * y_ub).powf(1.0 - alpha)) / (alpha - 1.0)
}

/// Enumerates the three KKT candidates of the two-BS, one-MU ε-GP:
/// `(sqrt(ε r_ub / r_ua), sqrt(ε r_ua / r_ub))`, `(1, ε)` and `(ε, 1)`.
///
/// The interior point is where the product constraint is tight and both BSs
/// serve the same rate `sqrt(ε r_ua r_ub)`. Every point with
/// `y_ua y_ub = ε` has the same product of served rates, so by AM-GM the
/// interior point is the minimiser whenever it is feasible.
pub fn epsilon_gp_2bs1mu(r_ua: f64, r_ub: f64, alpha: Alpha, epsilon: f64) -> Result<GpExample> {
    let a = match alpha {
        Alpha::Finite(a) if a > 1.0 => a,
        _ => {
            return Err(Error::Unsupported(format!(
                "the GP form needs finite alpha > 1 (got {alpha})"
            )))
        }
    };
    if !(r_ua > 0.0 && r_ub > 0.0) {
        return Err(Error::NegativeRate(r_ua.min(r_ub)));
    }
    if !(epsilon > 0.0) {
        return Err(Error::Infeasible(format!("epsilon {epsilon} must be positive")));
    }
    let ratio = r_ua.max(r_ub) / r_ua.min(r_ub);
    if (epsilon * ratio).sqrt() >= 1.0 || epsilon >= 1.0 {
        return Err(Error::Infeasible(format!(
            "epsilon {epsilon} too large: interior candidate leaves the unit box"
        )));
    }
    let candidates = [
        ((epsilon * r_ub / r_ua).sqrt(), (epsilon * r_ua / r_ub).sqrt()),
        (1.0, epsilon),
        (epsilon, 1.0),
    ];
    let objectives = candidates.map(|(ya, yb)| gp_objective(r_ua, r_ub, a, ya, yb));
    let mut minimizer = 0;
    for i in 1..3 {
        if objectives[i] < objectives[minimizer] {
            minimizer = i;
        }
    }
    Ok(GpExample {
        candidates,
        objectives,
        minimizer,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::{optimal_allocation, uniform_allocation};

    fn rm(rows: &[&[f64]]) -> RateMatrix {
        RateMatrix::from_rates(Matrix::from_rows(rows)).unwrap()
    }

    #[test]
    fn f_so_log_example() {
        // log 2 + log 4 - 2 log 2 = log 2
        let r = rm(&[&[2.0], &[4.0]]);
        let z = Association::from_assignment(&[0, 0], 1).unwrap();
        assert!((f_so(&r, &z, Alpha::ONE).value - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn f_so_throughput_example() {
        let r = rm(&[&[4.0, 1.0], &[1.0, 3.0], &[2.0, 2.0]]);
        let z = Association::from_assignment(&[0, 1, 0], 2).unwrap();
        assert_eq!(f_so(&r, &z, Alpha::ZERO).value, 7.0);
    }

    #[test]
    fn f_su_examples() {
        let r = rm(&[&[4.0], &[1.0]]);
        let z = Association::from_assignment(&[0, 0], 1).unwrap();
        assert_eq!(f_su(&r, &z, Alpha::ZERO).value, 2.5);
        let r = rm(&[&[4.0], &[2.0]]);
        assert_eq!(f_su(&r, &z, Alpha::Infinity).value, 1.0);
        assert_eq!(f_su(&r, &z, Alpha::ONE).value, f_so(&r, &z, Alpha::ONE).value);
    }

    #[test]
    fn f_msa_matches_ssa_shaped_allocation() {
        let r = rm(&[&[4.0, 1.0], &[1.0, 3.0], &[2.0, 2.5]]);
        let z = Association::from_assignment(&[0, 1, 1], 2).unwrap();
        for alpha in [0.0, 0.5, 1.0, 2.0, 3.0] {
            let al = Alpha::Finite(alpha);
            let y = optimal_allocation(&r, &z, al);
            let a = f_msa(&r, &y, al).value;
            let b = f_so(&r, &z, al).value;
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{alpha}: {a} vs {b}");
            let y = uniform_allocation(&z);
            let a = f_msa(&r, &y, al).value;
            let b = f_su(&r, &z, al).value;
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn first_delta_is_own_utility() {
        let r = rm(&[&[3.0, 5.0], &[2.0, 7.0]]);
        let z = Association::empty(2, 2);
        let d = greedy_delta(&r, &z, (1, 1), Alpha::ONE, AllocMode::Optimal).unwrap();
        assert!((d - 7f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn second_member_delta_at_alpha_one() {
        // Adding v to a BS already serving u: (ln r_v - ln 2) + (ln r_u - ln 2) - ln r_u.
        let r = rm(&[&[3.0], &[5.0]]);
        let z = Association::from_partial(vec![Some(0), None], 1).unwrap();
        let d = greedy_delta(&r, &z, (1, 0), Alpha::ONE, AllocMode::Optimal).unwrap();
        assert!((d - (5f64.ln() - 2.0 * 2f64.ln())).abs() < 1e-15);
        assert!(greedy_delta(&r, &z, (0, 0), Alpha::ONE, AllocMode::Optimal).is_err());
    }

    #[test]
    fn hessian_examples() {
        for (x, y) in [(0.3, 0.0), (1.0, 4.0), (0.01, 0.5)] {
            let (lo, hi) = summand_hessian_eigs(x, y, Alpha::Finite(2.0)).unwrap();
            assert!((lo + 1.0).abs() < 1e-15 && (hi - 1.0).abs() < 1e-15);
        }
        let (lo, hi) = summand_hessian_eigs(0.5, 1.0, Alpha::Finite(0.5)).unwrap();
        assert!(lo < 0.0 && hi > 0.0);
        assert!(summand_hessian_eigs(0.5, 1.0, Alpha::ONE).is_err());
        assert!(summand_hessian_eigs(0.5, 1.0, Alpha::Infinity).is_err());
        assert!(summand_hessian_eigs(0.0, 1.0, Alpha::Finite(2.0)).is_err());
    }

    #[test]
    fn hessian_alpha_three_matches_numeric_eigensolve() {
        // H = [[0, 2·3^(1)], [2·3, 2·1·0.2·3^0]] = [[0, 6], [6, 0.4]] at (0.2, 2), α = 3.
        let (lo, hi) = summand_hessian_eigs(0.2, 2.0, Alpha::Finite(3.0)).unwrap();
        // Characteristic polynomial λ² - 0.4 λ - 36 = 0.
        let disc: f64 = 0.16 + 144.0;
        assert!((hi - (0.4 + disc.sqrt()) / 2.0).abs() < 1e-12);
        assert!((lo - (0.4 - disc.sqrt()) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn gp_examples() {
        let ex = epsilon_gp_2bs1mu(1.0, 1.0, Alpha::Finite(2.0), 1e-4).unwrap();
        assert_eq!(ex.minimizer, 0);
        assert!((ex.candidates[0].0 - 0.01).abs() < 1e-15);
        assert!((ex.candidates[0].1 - 0.01).abs() < 1e-15);

        let ex = epsilon_gp_2bs1mu(4.0, 1.0, Alpha::Finite(2.0), 1e-4).unwrap();
        assert_eq!(ex.minimizer, 0);
        assert!((ex.candidates[0].0 - 0.005).abs() < 1e-15);
        assert!((ex.candidates[0].1 - 0.02).abs() < 1e-15);
        // Hand evaluation: both served rates are 0.02, so 2 / 0.02.
        assert!((ex.objectives[0] - 100.0).abs() < 1e-9);
        assert!((ex.objectives[1] - (0.25 + 1e4)).abs() < 1e-6);
        assert!((ex.objectives[2] - (2500.0 + 1.0)).abs() < 1e-6);
        // The swapped point (0.02, 0.005) is feasible but worse: 12.5 + 200.
        assert!((gp_objective(4.0, 1.0, 2.0, 0.02, 0.005) - 212.5).abs() < 1e-9);
    }

    #[test]
    fn gp_interior_point_is_stationary_on_the_constraint() {
        for (ra, rb, a) in [(4.0, 1.0, 2.0), (10.0, 0.5, 1.5), (0.3, 7.0, 3.0)] {
            let eps = 1e-2;
            let ex = epsilon_gp_2bs1mu(ra, rb, Alpha::Finite(a), eps).unwrap();
            assert_eq!(ex.minimizer, 0);
            let (ya, yb) = ex.candidates[0];
            assert!((ra * ya - rb * yb).abs() < 1e-12);
            assert!((ya * yb - eps).abs() < 1e-15);
            let f0 = ex.objectives[0];
            for t in [0.9, 0.99, 1.01, 1.1] {
                assert!(gp_objective(ra, rb, a, ya * t, yb / t) > f0);
            }
            let closed = 2.0 / (a - 1.0) * (eps * ra * rb).powf((1.0 - a) / 2.0);
            assert!((f0 - closed).abs() < 1e-12 * closed);
        }
    }

    #[test]
    fn gp_rejects_bad_inputs() {
        assert!(epsilon_gp_2bs1mu(1.0, 1.0, Alpha::ONE, 1e-4).is_err());
        assert!(epsilon_gp_2bs1mu(100.0, 1.0, Alpha::Finite(2.0), 0.1).is_err());
        assert!(epsilon_gp_2bs1mu(1.0, 1.0, Alpha::Finite(2.0), 0.0).is_err());
    }

    #[test]
    fn relaxed_objective_reduces_to_integer_forms() {
        let r = rm(&[&[4.0, 1.5], &[1.0, 3.0], &[2.0, 2.5], &[0.7, 1.1]]);
        let z = Association::from_assignment(&[0, 1, 1, 1], 2).unwrap();
        let x = FractionalAssociation::from_association(&z).unwrap();
        for alpha in [
            Alpha::ZERO,
            Alpha::Finite(0.5),
            Alpha::ONE,
            Alpha::Finite(1.5),
            Alpha::Finite(3.0),
            Alpha::Infinity,
        ] {
            for mode in [AllocMode::Optimal, AllocMode::Uniform] {
                let a = f_relaxed(&r, &x, alpha, mode).unwrap();
                let b = f_ssa(&r, &z, alpha, mode).value;
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{alpha} {mode}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn fractional_association_checks_rows() {
        assert!(FractionalAssociation::new(Matrix::from_rows(&[[0.5, 0.4]])).is_err());
        assert!(FractionalAssociation::new(Matrix::from_rows(&[[1.2, -0.2]])).is_err());
        let x = FractionalAssociation::new(Matrix::from_rows(&[[0.5, 0.5], [1.0, 0.0]])).unwrap();
        assert!(!x.is_integral());
    }
}
