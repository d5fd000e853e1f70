//! Solver-independent checks: complementarity residuals, numerical
//! best-response checks and brute-force oracles.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{self, MarketNetwork, ModelError, QuantityVector};
use crate::oligopoly::{Oligopoly, OligopolyError};

/// Largest number of grid points a single firm may scan in the grid oracle.
const MAX_GRID_POINTS: f64 = 1e7;
/// Largest number of profiles the exhaustive oligopoly oracle enumerates.
const MAX_PROFILES: u128 = 10_000_000;
const BEST_RESPONSE_MAX_ITERS: usize = 20_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Oligopoly(#[from] OligopolyError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// `last` and `previous` are the final two iterates; a cycle of
    /// period two alternates between them.
    #[error("best-response dynamics did not reach a fixed point in {rounds} rounds")]
    NonConvergent {
        rounds: usize,
        last: Vec<f64>,
        previous: Vec<f64>,
    },
    #[error("grid has {points} points per firm, too many to scan")]
    GridTooLarge { points: f64 },
    #[error("{profiles} profiles exceed the enumeration limit")]
    TooLarge { profiles: u128 },
}

/// Tolerances of a verification. `residual` bounds infeasibility and the
/// average complementarity residual, `gain` bounds profitable deviations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub residual: f64,
    pub gain: f64,
}

impl From<f64> for Tolerance {
    fn from(tol: f64) -> Self {
        Tolerance {
            residual: tol,
            gain: tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum VerifyWarning {
    /// A firm's own-profit Hessian had a positive eigenvalue at a sampled
    /// point, so the numerical best response may be local only.
    NonConcave { firm: usize, curvature: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    /// `q >= -tol`.
    pub feasible_q: bool,
    /// `F(q) >= -tol`.
    pub feasible_f: bool,
    /// `q^T F(q) / E`.
    pub mu: f64,
    /// Best profit improvement found per firm; empty when not computed.
    pub deviation_gains: Vec<f64>,
    pub verdict: bool,
    pub warnings: Vec<VerifyWarning>,
}

impl VerificationReport {
    pub fn worst_deviation_gain(&self) -> f64 {
        self.deviation_gains.iter().copied().fold(0.0, f64::max)
    }
}

fn check_shape(net: &MarketNetwork, q: &[f64]) -> Result<(), ModelError> {
    if q.len() != net.n_edges() {
        return Err(ModelError::ShapeMismatch {
            expected: net.n_edges(),
            got: q.len(),
        });
    }
    Ok(())
}

/// Feasibility flags and average residual. Panics if `q` has the wrong
/// length; use [`try_complementarity_residual`] for untrusted input.
pub fn complementarity_residual(net: &MarketNetwork, q: &[f64], tol: Tolerance) -> VerificationReport {
    try_complementarity_residual(net, q, tol).expect("quantity vector sized for the network")
}

pub fn try_complementarity_residual(
    net: &MarketNetwork,
    q: &[f64],
    tol: Tolerance,
) -> Result<VerificationReport, ModelError> {
    check_shape(net, q)?;
    let f = model::marginal_profit(net, q);
    let feasible_q = q.iter().all(|&x| x >= -tol.residual);
    let feasible_f = f.iter().all(|&x| x >= -tol.residual);
    let mu = q.iter().zip(&f).map(|(a, b)| a * b).sum::<f64>() / net.n_edges() as f64;
    let verdict = feasible_q && feasible_f && mu.is_finite() && mu <= tol.residual;
    Ok(VerificationReport {
        feasible_q,
        feasible_f,
        mu,
        deviation_gains: Vec::new(),
        verdict,
        warnings: Vec::new(),
    })
}

/// Residual check plus, for every firm, a numerical maximization of its own
/// profit with the other firms held fixed. The verdict additionally requires
/// every deviation gain to be at most `tol.gain`.
pub fn best_response_check(
    net: &MarketNetwork,
    q: &[f64],
    tol: Tolerance,
) -> Result<VerificationReport, ModelError> {
    let mut report = try_complementarity_residual(net, q, tol)?;
    net.check_quantities(q)?;
    let mut gains = Vec::with_capacity(net.n_firms());
    for firm in 0..net.n_firms() {
        let base = model::profit(net, q, firm);
        let current = net.strategy(q, firm);
        let starts = [
            current.clone(),
            vec![0.0; current.len()],
            current.iter().map(|x| 2.0 * x + 0.1).collect(),
        ];
        let mut best = base;
        for start in &starts {
            if let Some(curv) = own_curvature(net, q, firm, start) {
                if curv > 1e-9 && !report.warnings.iter().any(|w| matches!(w, VerifyWarning::NonConcave { firm: f, .. } if *f == firm)) {
                    report.warnings.push(VerifyWarning::NonConcave { firm, curvature: curv });
                }
            }
            best = best.max(maximize_own_profit(net, q, firm, start));
        }
        gains.push((best - base).max(0.0));
    }
    report.verdict = report.verdict && gains.iter().all(|&g| g <= tol.gain);
    report.deviation_gains = gains;
    Ok(report)
}

fn with_strategy(net: &MarketNetwork, q: &[f64], firm: usize, s: &[f64]) -> Vec<f64> {
    let mut out = q.to_vec();
    for (&e, &x) in net.firm_edges(firm).iter().zip(s) {
        out[e] = x;
    }
    out
}

/// Own-profit Hessian block `-(grad F)` at the point where the firm plays `s`.
fn own_hessian(net: &MarketNetwork, q: &[f64], firm: usize, s: &[f64]) -> DMatrix<f64> {
    let full = with_strategy(net, q, firm, s);
    let jac = model::jacobian_f(net, &full);
    let idx = net.firm_edges(firm);
    DMatrix::from_fn(idx.len(), idx.len(), |a, b| -0.5 * (jac[(idx[a], idx[b])] + jac[(idx[b], idx[a])]))
}

fn own_curvature(net: &MarketNetwork, q: &[f64], firm: usize, s: &[f64]) -> Option<f64> {
    let h = own_hessian(net, q, firm, s);
    SymmetricEigen::new(h).eigenvalues.iter().copied().reduce(f64::max)
}

/// Projected gradient ascent with Armijo backtracking on firm `firm`'s own
/// coordinates. Returns the best profit reached.
fn maximize_own_profit(net: &MarketNetwork, q: &[f64], firm: usize, start: &[f64]) -> f64 {
    let idx = net.firm_edges(firm);
    let value = |s: &[f64]| model::profit(net, &with_strategy(net, q, firm, s), firm);
    let grad = |s: &[f64]| {
        let f = model::marginal_profit(net, &with_strategy(net, q, firm, s));
        idx.iter().map(|&e| -f[e]).collect::<Vec<f64>>()
    };
    let lipschitz = own_hessian(net, q, firm, start).norm().max(1e-12);
    let mut step = 1.0 / lipschitz;
    let mut s = start.to_vec();
    let mut val = value(&s);
    for _ in 0..BEST_RESPONSE_MAX_ITERS {
        let g = grad(&s);
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = s.iter().zip(&g).map(|(x, d)| (x + step * d).max(0.0)).collect();
            let moved: f64 = trial.iter().zip(&s).map(|(a, b)| (a - b) * (a - b)).sum();
            if moved == 0.0 {
                return val;
            }
            let ascent: f64 = trial.iter().zip(&s).zip(&g).map(|((a, b), d)| (a - b) * d).sum();
            let tv = value(&trial);
            if tv >= val + 1e-4 * ascent {
                let gained = tv - val;
                s = trial;
                val = tv;
                accepted = true;
                step *= 2.0;
                if moved.sqrt() <= 1e-14 * (1.0 + s.iter().map(|x| x * x).sum::<f64>().sqrt()) || gained <= 0.0 {
                    return val;
                }
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    val
}

/// Synchronous best-response dynamics on the grid `{0, step, ..., q_max}`
/// for every edge, starting from zero. Each firm scans its whole grid and
/// keeps the lexicographically smallest maximizer.
pub fn brute_force_grid_equilibrium(
    net: &MarketNetwork,
    step: f64,
    q_max: f64,
    max_rounds: usize,
) -> Result<QuantityVector, VerifyError> {
    if !(step > 0.0 && step.is_finite() && q_max >= 0.0 && q_max.is_finite()) {
        return Err(VerifyError::InvalidArgument(format!(
            "need step > 0 and q_max >= 0, got step {step}, q_max {q_max}"
        )));
    }
    let levels = (q_max / step + 1e-9).floor() as usize + 1;
    for firm in 0..net.n_firms() {
        let points = (levels as f64).powi(net.firm_edges(firm).len() as i32);
        if points > MAX_GRID_POINTS {
            return Err(VerifyError::GridTooLarge { points });
        }
    }
    let mut idx = vec![0usize; net.n_edges()];
    let mut previous = idx.clone();
    let to_q = |idx: &[usize]| idx.iter().map(|&k| k as f64 * step).collect::<Vec<f64>>();
    for _ in 0..max_rounds {
        let q = to_q(&idx);
        let mut next = idx.clone();
        for firm in 0..net.n_firms() {
            let edges = net.firm_edges(firm);
            let mut trial = q.clone();
            let mut counter = vec![0usize; edges.len()];
            let mut best: Option<(f64, Vec<usize>)> = None;
            loop {
                for (&e, &k) in edges.iter().zip(&counter) {
                    trial[e] = k as f64 * step;
                }
                let p = model::profit(net, &trial, firm);
                if best.as_ref().is_none_or(|(b, _)| p > *b) {
                    best = Some((p, counter.clone()));
                }
                if !advance(&mut counter, levels) {
                    break;
                }
            }
            let (_, arg) = best.expect("grid is nonempty");
            for (&e, k) in edges.iter().zip(arg) {
                next[e] = k;
            }
        }
        if next == idx {
            return Ok(QuantityVector::new(net, to_q(&idx))?);
        }
        previous = std::mem::replace(&mut idx, next);
    }
    Err(VerifyError::NonConvergent {
        rounds: max_rounds,
        last: to_q(&idx),
        previous: to_q(&previous),
    })
}

/// Steps a mixed-radix counter, last digit fastest. Returns `false` after
/// the last combination.
fn advance(counter: &mut [usize], levels: usize) -> bool {
    for digit in counter.iter_mut().rev() {
        *digit += 1;
        if *digit < levels {
            return true;
        }
        *digit = 0;
    }
    false
}

/// Whether no firm gains by any unilateral integral deviation that keeps the
/// market total within the instance's evaluation range. Comparisons are exact
/// when the instance is rational.
pub fn is_integral_equilibrium(olig: &Oligopoly, q: &[i64]) -> Result<bool, VerifyError> {
    if q.len() != olig.n_firms() {
        return Err(VerifyError::InvalidArgument(format!(
            "profile has {} entries, instance has {} firms",
            q.len(),
            olig.n_firms()
        )));
    }
    if q.iter().any(|&x| x < 0) {
        return Err(VerifyError::InvalidArgument("negative quantity".into()));
    }
    let total: i64 = q.iter().sum();
    let limit = olig.q_cap() + 1;
    for (firm, &qi) in q.iter().enumerate() {
        let current = olig.profit_at(firm, qi, total)?;
        let others = total - qi;
        for d in 0..=(limit - others) {
            if d != qi && olig.profit_at(firm, d, others + d)? > current {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Minimum maximizer of `pi_i(q, q)` over `{0, ..., q_cap}` by a full scan.
fn scanned_monopoly(olig: &Oligopoly, firm: usize) -> Result<i64, VerifyError> {
    let mut best = (0, olig.profit_at(firm, 0, 0)?);
    for q in 1..=olig.q_cap() {
        let p = olig.profit_at(firm, q, q)?;
        if p > best.1 {
            best = (q, p);
        }
    }
    Ok(best.0)
}

/// Every integral equilibrium with `q_i <= Q_i* + 1`, in lexicographic order,
/// where `Q_i*` is found by scanning rather than by the solver's search.
pub fn exhaustive_oligopoly_oracle(olig: &Oligopoly) -> Result<Vec<Vec<i64>>, VerifyError> {
    let bounds = (0..olig.n_firms())
        .map(|i| scanned_monopoly(olig, i).map(|m| m + 1))
        .collect::<Result<Vec<i64>, _>>()?;
    let profiles = bounds
        .iter()
        .try_fold(1u128, |acc, &b| acc.checked_mul(b as u128 + 1))
        .unwrap_or(u128::MAX);
    if profiles > MAX_PROFILES {
        return Err(VerifyError::TooLarge { profiles });
    }
    let max_total: i64 = bounds.iter().sum();
    if max_total > olig.q_cap() + 1 {
        return Err(VerifyError::InvalidArgument(format!(
            "profiles reach total {max_total}, beyond the evaluation ceiling {}",
            olig.q_cap()
        )));
    }
    let mut found = Vec::new();
    let mut profile = vec![0i64; bounds.len()];
    loop {
        if is_integral_equilibrium(olig, &profile)? {
            found.push(profile.clone());
        }
        let mut pos = profile.len();
        loop {
            if pos == 0 {
                return Ok(found);
            }
            pos -= 1;
            if profile[pos] < bounds[pos] {
                profile[pos] += 1;
                break;
            }
            profile[pos] = 0;
        }
    }
}
