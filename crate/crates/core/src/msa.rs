//! Multi-station association: maximise `Σ_u U_α(Σ_b r_ub y_ub)` over
//! allocations whose BS columns each lie on the unit simplex.
//!
//! The problem is concave, so projected gradient ascent with an exact
//! projection onto each column simplex and a monotone Armijo line search
//! converges to the global optimum. By default the step is scaled by the
//! inverse Hessian diagonal and the projection uses the matching weighted
//! norm ([`Metric::Diagonal`]); plain Euclidean steps stall for small `α`.
//! Rates are divided by the largest
//! rate before solving: `U_α(cR)` is a positive multiple of `U_α(R)` (plus a
//! constant at `α = 1`), so the maximiser is unchanged and the gradients are
//! well scaled.

use serde::{Deserialize, Serialize};

use crate::allocation::Allocation;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::net_model::RateMatrix;
use crate::objective::{f_msa, ObjectiveValue};
use crate::utility::{chiu_jain, marginal_utility, utility_finite, Alpha};

const ARMIJO_SIGMA: f64 = 1e-4;
const MIN_STEP: f64 = 1e-30;
const MAX_STEP: f64 = 1e30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepRule {
    /// Constant step; halved only when a step would zero out an MU's rate.
    Fixed,
    /// Armijo backtracking from a Barzilai-Borwein trial step.
    Backtracking,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub max_iters: usize,
    /// Tolerance on the column-scaled projected-gradient step, see
    /// [`MsaSolution::stationarity`].
    pub grad_tol: f64,
    /// Relative objective improvement below which the solver stops.
    pub obj_tol: f64,
    pub step_rule: StepRule,
    /// Shares at or below this are treated as zero by the KKT residual.
    pub min_share_floor: f64,
    pub initial_step: f64,
    pub backtrack_factor: f64,
    pub metric: Metric,
}

/// Geometry of the gradient step and of the column projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// Plain gradient step, Euclidean projection.
    Euclidean,
    /// Step scaled by the inverse diagonal of the Hessian, projection in the
    /// matching weighted norm. Needed for small `α`, where served rates span
    /// many orders of magnitude within one column.
    Diagonal,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            max_iters: 50_000,
            grad_tol: 1e-7,
            obj_tol: 1e-15,
            step_rule: StepRule::Backtracking,
            min_share_floor: 1e-6,
            initial_step: 1.0,
            backtrack_factor: 0.5,
            metric: Metric::Diagonal,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be >= 1".into()));
        }
        if !(self.grad_tol > 0.0) || !(self.obj_tol > 0.0) {
            return Err(Error::Config("grad_tol and obj_tol must be positive".into()));
        }
        if !(self.min_share_floor >= 0.0) {
            return Err(Error::Config("min_share_floor must be >= 0".into()));
        }
        if !(self.initial_step > 0.0) {
            return Err(Error::Config("initial_step must be positive".into()));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(Error::Config("backtrack_factor must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsaSolution {
    pub allocation: Allocation,
    /// Objective on the original (unscaled) rates.
    pub objective: ObjectiveValue,
    pub iterations: usize,
    pub converged: bool,
    /// Largest per-BS variance of the column-normalised marginal utilities
    /// `r_ub U'(R_u) / max_v r_vb U'(R_v)` over shares above the floor.
    pub kkt_residual: f64,
    /// `max_b ‖P(y_b + g_b / max g_b) - y_b‖_∞` at the returned iterate;
    /// zero exactly at the optimum.
    pub stationarity: f64,
}

/// Snapshot handed to [`solve_msa_observed`] after every accepted iterate
/// (and once for the starting point, as iteration 0).
#[derive(Debug)]
pub struct IterateInfo<'a> {
    pub iteration: usize,
    /// Objective on the normalised rates `r / max r`; a positive affine image
    /// of the true objective, so it orders iterates identically.
    pub scaled_objective: f64,
    pub shares: &'a Matrix,
    pub step: f64,
}

/// In-place Euclidean projection onto `{v >= 0, Σ v = 1}`.
pub fn project_simplex(v: &mut [f64]) {
    let n = v.len();
    if n == 0 {
        return;
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, &s) in sorted.iter().enumerate() {
        cumsum += s;
        let t = (cumsum - 1.0) / (i + 1) as f64;
        if s - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
}

struct Problem<'a> {
    q: &'a Matrix,
    alpha: f64,
}

impl Problem<'_> {
    fn sum_rates(&self, y: &Matrix, out: &mut [f64]) {
        for (u, r) in out.iter_mut().enumerate() {
            *r = self
                .q
                .row(u)
                .iter()
                .zip(y.row(u))
                .map(|(q, y)| q * y)
                .sum();
        }
    }

    /// Objective, or `None` when some MU is left without rate while `α > 0`
    /// (utility `-inf` for `α >= 1`, infinite marginal utility below).
    fn objective(&self, rates: &[f64]) -> Option<f64> {
        if self.alpha > 0.0 && rates.iter().any(|&r| !(r > 0.0)) {
            return None;
        }
        let f: f64 = rates.iter().map(|&r| utility_finite(self.alpha, r)).sum();
        f.is_finite().then_some(f)
    }

    fn gradient(&self, rates: &[f64], g: &mut Matrix) {
        for (u, &r) in rates.iter().enumerate() {
            let m = marginal_utility(self.alpha, r);
            for (gb, q) in g.row_mut(u).iter_mut().zip(self.q.row(u)) {
                *gb = q * m;
            }
        }
    }

    /// Inverse of `|∂²f/∂y_ub²| = α q_ub² R_u^(-α-1)`.
    fn inverse_curvature(&self, rates: &[f64], w: &mut Matrix) {
        for (u, &r) in rates.iter().enumerate() {
            let c = self.alpha * marginal_utility(self.alpha, r) / r;
            for (wb, q) in w.row_mut(u).iter_mut().zip(self.q.row(u)) {
                *wb = 1.0 / (c * q * q);
            }
        }
    }
}

/// In-place projection onto `{v >= 0, Σ v = 1}` in the norm
/// `Σ_i (v_i - p_i)² / w_i`: `p_i = max(0, v_i - τ w_i)` for the unique `τ`
/// making the sum one. Weights must be positive.
pub fn project_simplex_weighted(v: &mut [f64], w: &[f64]) {
    let n = v.len();
    if n == 0 {
        return;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| (v[j] / w[j]).total_cmp(&(v[i] / w[i])));
    let (mut sv, mut sw) = (0.0, 0.0);
    let mut tau = 0.0;
    for (k, &i) in order.iter().enumerate() {
        sv += v[i];
        sw += w[i];
        tau = (sv - 1.0) / sw;
        match order.get(k + 1) {
            Some(&next) if v[next] / w[next] > tau => continue,
            _ => break,
        }
    }
    for (x, wi) in v.iter_mut().zip(w) {
        *x = (*x - tau * wi).max(0.0);
    }
}

fn project_columns(y: &mut Matrix, weights: Option<&Matrix>, buf: &mut Vec<f64>, wbuf: &mut Vec<f64>) {
    for b in 0..y.cols() {
        buf.clear();
        buf.extend(y.col(b));
        match weights {
            Some(w) => {
                wbuf.clear();
                wbuf.extend(w.col(b));
                project_simplex_weighted(buf, wbuf);
            }
            None => project_simplex(buf),
        }
        for (u, v) in buf.iter().enumerate() {
            y[(u, b)] = *v;
        }
    }
}

fn stationarity(y: &Matrix, g: &Matrix, buf: &mut Vec<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for b in 0..y.cols() {
        let scale = g.col(b).fold(0.0, f64::max);
        if !(scale > 0.0) {
            continue;
        }
        buf.clear();
        buf.extend(y.col(b).zip(g.col(b)).map(|(y, g)| y + g / scale));
        project_simplex(buf);
        for (p, yv) in buf.iter().zip(y.col(b)) {
            worst = worst.max((p - yv).abs());
        }
    }
    worst
}

fn kkt_residual(y: &Matrix, g: &Matrix, floor: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for b in 0..y.cols() {
        let scale = g.col(b).fold(0.0, f64::max);
        if !(scale > 0.0) {
            continue;
        }
        let active: Vec<f64> = y
            .col(b)
            .zip(g.col(b))
            .filter(|(y, _)| *y > floor)
            .map(|(_, g)| g / scale)
            .collect();
        if active.len() < 2 {
            continue;
        }
        let n = active.len() as f64;
        let mean = active.iter().sum::<f64>() / n;
        let var = active.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / n;
        worst = worst.max(var);
    }
    worst
}

/// Solves the MSA problem for a finite `α >= 0`.
pub fn solve_msa(rates: &RateMatrix, alpha: Alpha, settings: &SolverSettings) -> Result<MsaSolution> {
    solve_msa_observed(rates, alpha, settings, |_| {})
}

/// [`solve_msa`] with a callback invoked on every accepted iterate.
///
/// Starts from the interior point `y_ub = 1/|U|`. Each iteration takes a
/// gradient step, projects every BS column onto the simplex and, under
/// [`StepRule::Backtracking`], shrinks the step until the Armijo condition
/// holds, so the objective never decreases. Steps that would leave an MU with
/// zero rate while `α > 0` are always rejected. Stops when the scaled
/// projected-gradient step drops below `grad_tol`, when the relative
/// objective gain drops below `obj_tol`, or after `max_iters` iterations
/// (`converged = false`, best iterate returned).
pub fn solve_msa_observed(
    rates: &RateMatrix,
    alpha: Alpha,
    settings: &SolverSettings,
    mut observer: impl FnMut(&IterateInfo<'_>),
) -> Result<MsaSolution> {
    settings.validate()?;
    let a = alpha.finite().ok_or_else(|| {
        Error::Unsupported("the MSA solver handles finite alpha only".into())
    })?;
    let (nu, nb) = (rates.num_mus(), rates.num_bss());
    let scale = rates.max_rate();
    let q = rates.rates().map(|r| r / scale);
    let prob = Problem { q: &q, alpha: a };

    let mut y = Matrix::filled(nu, nb, 1.0 / nu as f64);
    let mut r = vec![0.0; nu];
    prob.sum_rates(&y, &mut r);
    let mut f = prob
        .objective(&r)
        .ok_or_else(|| Error::Infeasible("uniform start has a zero rate".into()))?;
    let mut g = Matrix::zeros(nu, nb);
    prob.gradient(&r, &mut g);
    let scaled = settings.metric == Metric::Diagonal && a > 0.0;
    let mut w = Matrix::filled(nu, nb, 1.0);
    if scaled {
        prob.inverse_curvature(&r, &mut w);
    }

    let mut buf = Vec::with_capacity(nu);
    let mut wbuf = Vec::with_capacity(nu);
    let mut trial = y.clone();
    let mut r_trial = vec![0.0; nu];
    let mut g_trial = Matrix::zeros(nu, nb);
    let mut step = settings.initial_step;
    let mut converged = false;
    let mut iterations = 0;
    let mut stat = stationarity(&y, &g, &mut buf);

    observer(&IterateInfo {
        iteration: 0,
        scaled_objective: f,
        shares: &y,
        step,
    });

    while iterations < settings.max_iters {
        if stat < settings.grad_tol {
            converged = true;
            break;
        }
        iterations += 1;

        // Find an acceptable step.
        let mut t = step;
        let accepted = loop {
            fill_step(&mut trial, &y, &g, &w, t);
            project_columns(&mut trial, scaled.then_some(&w), &mut buf, &mut wbuf);
            prob.sum_rates(&trial, &mut r_trial);
            let candidate = prob.objective(&r_trial);
            let ok = match (candidate, settings.step_rule) {
                (None, _) => false,
                (Some(_), StepRule::Fixed) => true,
                (Some(ft), StepRule::Backtracking) => {
                    let ascent: f64 = g
                        .as_slice()
                        .iter()
                        .zip(trial.as_slice().iter().zip(y.as_slice()))
                        .map(|(g, (tv, yv))| g * (tv - yv))
                        .sum();
                    ft >= f + ARMIJO_SIGMA * ascent
                }
            };
            if ok {
                break candidate;
            }
            t *= settings.backtrack_factor;
            if t < MIN_STEP {
                break None;
            }
        };
        let Some(f_new) = accepted else {
            // No ascent step left at machine precision.
            break;
        };

        prob.gradient(&r_trial, &mut g_trial);
        let gain = f_new - f;

        step = match settings.step_rule {
            StepRule::Fixed => t,
            StepRule::Backtracking if scaled => (2.0 * t).min(settings.initial_step),
            StepRule::Backtracking => {
                // Barzilai-Borwein: |s|² / -<s, Δg> for the concave objective.
                let mut ss = 0.0;
                let mut sg = 0.0;
                for i in 0..trial.as_slice().len() {
                    let s = trial.as_slice()[i] - y.as_slice()[i];
                    ss += s * s;
                    sg += s * (g_trial.as_slice()[i] - g.as_slice()[i]);
                }
                if sg < 0.0 && ss > 0.0 {
                    (ss / -sg).clamp(MIN_STEP, MAX_STEP)
                } else {
                    (2.0 * t).min(MAX_STEP)
                }
            }
        };

        std::mem::swap(&mut y, &mut trial);
        std::mem::swap(&mut r, &mut r_trial);
        std::mem::swap(&mut g, &mut g_trial);
        if scaled {
            prob.inverse_curvature(&r, &mut w);
        }
        f = f_new;
        stat = stationarity(&y, &g, &mut buf);

        observer(&IterateInfo {
            iteration: iterations,
            scaled_objective: f,
            shares: &y,
            step: t,
        });

        if gain.abs() <= settings.obj_tol * f.abs().max(1.0) {
            converged = true;
            break;
        }
    }
    if !converged && stat < settings.grad_tol {
        converged = true;
    }

    let kkt = kkt_residual(&y, &g, settings.min_share_floor);
    let allocation = Allocation::from_matrix_unchecked(y);
    let objective = f_msa(rates, &allocation, alpha);
    Ok(MsaSolution {
        allocation,
        objective,
        iterations,
        converged,
        kkt_residual: kkt,
        stationarity: stat,
    })
}

fn fill_step(trial: &mut Matrix, y: &Matrix, g: &Matrix, w: &Matrix, t: f64) {
    for u in 0..y.rows() {
        let row = trial.row_mut(u).iter_mut().zip(y.row(u)).zip(g.row(u)).zip(w.row(u));
        for (((tv, yv), gv), wv) in row {
            *tv = yv + t * wv * gv;
        }
    }
}

/// Per-MU Chiu-Jain index of the served-rate vector `(r_ub y_ub)_b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsaLikeness {
    pub per_mu: Vec<f64>,
    /// MUs with an all-zero row; reported as `1/|B|`.
    pub zero_rows: Vec<usize>,
}

/// How single-station-like an MSA allocation is: `1/|B|` for an MU served
/// by one BS, `1` for equal rates from every BS.
pub fn msa_ssa_likeness(rates: &RateMatrix, alloc: &Allocation) -> Result<SsaLikeness> {
    if (rates.num_mus(), rates.num_bss()) != (alloc.num_mus(), alloc.num_bss()) {
        return Err(Error::Dimension("rates and allocation differ in shape".into()));
    }
    let nb = rates.num_bss();
    let mut per_mu = Vec::with_capacity(rates.num_mus());
    let mut zero_rows = Vec::new();
    for u in 0..rates.num_mus() {
        let served: Vec<f64> = (0..nb)
            .map(|b| rates.rate(u, b) * alloc.share(u, b).max(0.0))
            .collect();
        match chiu_jain(&served) {
            Ok(j) => per_mu.push(j),
            Err(Error::ZeroVector) => {
                zero_rows.push(u);
                per_mu.push(1.0 / nb as f64);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(SsaLikeness { per_mu, zero_rows })
}
