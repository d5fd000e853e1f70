//! Equilibria as solutions of the complementarity problem
//! `q >= 0, F(q) >= 0, q^T F(q) = 0`, found by following the central path
//! `q o F(q) = mu 1` with damped Newton steps.
//!
//! The method needs `F` monotone on the orthant. Convex costs make `grad S`
//! PSD; `grad R` is PSD when every market satisfies
//! `|P'(D)| >= |P''(D)| D / 2`, which [`check_monotone_revenue`] certifies on
//! a grid.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::equilibrium::{EquilibriumResult, Method};
use crate::model::{self, MarketNetwork, ModelError, PriceCurve, QuantityVector, PRICE_GRID_INTERVALS};

/// `F` must exceed this componentwise at a starting point.
const INTERIOR_MARGIN: f64 = 1e-12;
const REGULARIZATION: f64 = 1e-12;
const REGULARIZATION_GROWTH: f64 = 100.0;
const REGULARIZATION_ESCALATIONS: usize = 3;
const LINE_SEARCH_STEPS: usize = 60;
/// Largest ceiling tried when the initial-point ceiling is found by doubling.
const AUTO_CAP_LIMIT: f64 = 1e12;
/// Multiple of machine epsilon below which an SLC remainder is rounding noise.
const ROUNDING_SLACK: f64 = 64.0;
/// Sufficient-decrease constant on `mu` in the line search.
const DECREASE: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NcpError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("no t <= {q_cap} makes F(t 1) strictly positive")]
    NoFeasiblePoint { q_cap: f64 },
    #[error("starting point is not strictly interior")]
    InfeasibleStart,
    #[error("no convergence within {} iterations (mu = {})", .result.iterations, .result.mu)]
    MaxItersExceeded { result: Box<EquilibriumResult> },
    #[error("Newton system singular after regularization (mu = {})", .result.mu)]
    NewtonSingular { result: Box<EquilibriumResult> },
    #[error("line search could not reduce mu (mu = {})", .result.mu)]
    LineSearchFailed { result: Box<EquilibriumResult> },
}

/// The complementarity problem attached to a network.
#[derive(Debug, Clone, Copy)]
pub struct NcpProblem<'a> {
    net: &'a MarketNetwork,
}

impl<'a> NcpProblem<'a> {
    pub fn new(net: &'a MarketNetwork) -> Self {
        NcpProblem { net }
    }

    pub fn network(&self) -> &'a MarketNetwork {
        self.net
    }

    pub fn dimension(&self) -> usize {
        self.net.n_edges()
    }

    pub fn eval_f(&self, q: &[f64]) -> Vec<f64> {
        model::marginal_profit(self.net, q)
    }

    pub fn eval_jacobian(&self, q: &[f64]) -> DMatrix<f64> {
        model::jacobian_f(self.net, q)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NcpConfig {
    /// Target for `mu = q^T F(q) / E`.
    pub epsilon: f64,
    /// Centering factor: each Newton step aims at `sigma mu`.
    pub sigma: f64,
    /// Fraction of the distance to the boundary a step may cover.
    pub boundary_fraction: f64,
    pub max_iters: usize,
    /// Ceiling for the initial-point search. When `None`, it is found by
    /// doubling from 1 until `F(t 1) > 0`.
    pub q_cap: Option<f64>,
}

impl Default for NcpConfig {
    fn default() -> Self {
        NcpConfig {
            epsilon: 1e-9,
            sigma: 0.25,
            boundary_fraction: 0.995,
            max_iters: 500,
            q_cap: None,
        }
    }
}

impl NcpConfig {
    fn validate(&self) -> Result<(), NcpError> {
        let bad = |s: &str| Err(NcpError::InvalidConfig(s.into()));
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return bad("sigma must lie in (0, 1)");
        }
        if !(self.boundary_fraction > 0.0 && self.boundary_fraction < 1.0) {
            return bad("boundary fraction must lie in (0, 1)");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1");
        }
        if let Some(cap) = self.q_cap {
            if !(cap > 0.0 && cap.is_finite()) {
                return bad("q_cap must be positive");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityReport {
    pub condition_holds: bool,
    /// Minimum of `|P'(D)| - |P''(D)| D / 2` over all markets and grid points.
    pub worst_margin: f64,
    /// Per market, the grid demand attaining that market's minimum.
    pub worst_d: Vec<f64>,
    /// Per market minimum margin.
    pub margins: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlcReport {
    pub lambda_hat: f64,
    /// Samples that entered the maximum (those with a non-negligible curvature term).
    pub samples: usize,
}

/// Minimum of `|P'(D)| - |P''(D)| D / 2` over `grid` and where it occurs.
pub fn revenue_margin(price: &impl PriceCurve, grid: &[f64]) -> (f64, f64) {
    grid.iter()
        .map(|&d| (price.slope(d).abs() - price.curvature(d).abs() * d / 2.0, d))
        .fold((f64::INFINITY, 0.0), |best, cur| if cur.0 < best.0 { cur } else { best })
}

/// `{0, cap/1000, ..., cap}` per market with `cap` ten times the network's
/// quantity scale.
pub fn uniform_grid(net: &MarketNetwork) -> Vec<Vec<f64>> {
    let cap = 10.0 * net.quantity_scale();
    let grid: Vec<f64> = (0..=PRICE_GRID_INTERVALS)
        .map(|k| cap * k as f64 / PRICE_GRID_INTERVALS as f64)
        .collect();
    vec![grid; net.n_markets()]
}

/// Grid certificate that `grad R` is PSD: every market must satisfy
/// `|P'(D)| >= |P''(D)| D / 2` at each of its grid points.
pub fn check_monotone_revenue(net: &MarketNetwork, d_grid: &[Vec<f64>]) -> Result<MonotonicityReport, NcpError> {
    if d_grid.len() != net.n_markets() || d_grid.iter().any(Vec::is_empty) {
        return Err(NcpError::InvalidArgument(format!(
            "need a nonempty grid for each of the {} markets",
            net.n_markets()
        )));
    }
    let (margins, worst_d): (Vec<f64>, Vec<f64>) = d_grid
        .iter()
        .enumerate()
        .map(|(i, grid)| revenue_margin(net.price_function(i), grid))
        .unzip();
    let worst_margin = margins.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(MonotonicityReport {
        condition_holds: worst_margin >= 0.0,
        worst_margin,
        worst_d,
        margins,
    })
}

fn strictly_positive(f: &[f64]) -> bool {
    f.iter().all(|&x| x > INTERIOR_MARGIN)
}

/// Point `t d` with `F(t d) > 0`, using twice the smallest such `t` found by
/// bisection (capped by the ceiling).
fn feasible_along(net: &MarketNetwork, direction: &[f64], q_cap: Option<f64>) -> Result<QuantityVector, NcpError> {
    let at = |t: f64| direction.iter().map(|d| t * d).collect::<Vec<f64>>();
    let ok = |t: f64| strictly_positive(&model::marginal_profit(net, &at(t)));
    let hi = match q_cap {
        Some(cap) => {
            if !ok(cap) {
                return Err(NcpError::NoFeasiblePoint { q_cap: cap });
            }
            cap
        }
        None => {
            let mut t = 1.0;
            while !ok(t) {
                t *= 2.0;
                if t > AUTO_CAP_LIMIT {
                    return Err(NcpError::NoFeasiblePoint { q_cap: AUTO_CAP_LIMIT });
                }
            }
            t
        }
    };
    let (mut lo, mut hi_ok) = (0.0, hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi_ok);
        if mid <= lo || mid >= hi_ok {
            break;
        }
        if ok(mid) {
            hi_ok = mid;
        } else {
            lo = mid;
        }
    }
    let t = if ok((2.0 * hi_ok).min(hi)) { (2.0 * hi_ok).min(hi) } else { hi_ok };
    Ok(QuantityVector::new(net, at(t))?)
}

/// `q0 = t 1` with `F(q0) > 0` componentwise.
pub fn initial_feasible_point(net: &MarketNetwork, cfg: &NcpConfig) -> Result<QuantityVector, NcpError> {
    cfg.validate()?;
    feasible_along(net, &vec![1.0; net.n_edges()], cfg.q_cap)
}

/// Like [`initial_feasible_point`] along an arbitrary positive direction.
pub fn feasible_point_along(
    net: &MarketNetwork,
    direction: &[f64],
    cfg: &NcpConfig,
) -> Result<QuantityVector, NcpError> {
    cfg.validate()?;
    if direction.len() != net.n_edges() || direction.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
        return Err(NcpError::InvalidArgument(
            "direction must be positive with one entry per edge".into(),
        ));
    }
    feasible_along(net, direction, cfg.q_cap)
}

pub fn solve_ncp(problem: &NcpProblem, cfg: &NcpConfig) -> Result<EquilibriumResult, NcpError> {
    let q0 = initial_feasible_point(problem.net, cfg)?;
    solve_ncp_from(problem, &q0, cfg)
}

fn average(q: &[f64], f: &[f64]) -> f64 {
    q.iter().zip(f).map(|(a, b)| a * b).sum::<f64>() / q.len() as f64
}

/// Solves `(diag F + diag q grad F) dq = rhs`, adding a growing multiple of
/// the identity when the factorization fails.
fn newton_direction(matrix: DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let try_solve = |m: DMatrix<f64>| {
        m.lu()
            .solve(rhs)
            .filter(|x| x.iter().all(|v| v.is_finite()))
    };
    if let Some(x) = try_solve(matrix.clone()) {
        return Some(x);
    }
    let n = matrix.nrows();
    let mut delta = REGULARIZATION;
    for _ in 0..REGULARIZATION_ESCALATIONS {
        if let Some(x) = try_solve(&matrix + DMatrix::identity(n, n) * delta) {
            return Some(x);
        }
        delta *= REGULARIZATION_GROWTH;
    }
    None
}

/// Central-path iteration from a strictly interior `q0` (`q0 > 0`, `F(q0) > 0`).
pub fn solve_ncp_from(problem: &NcpProblem, q0: &[f64], cfg: &NcpConfig) -> Result<EquilibriumResult, NcpError> {
    cfg.validate()?;
    let net = problem.net;
    net.check_quantities(q0)?;
    let mut q = q0.to_vec();
    let mut f = problem.eval_f(&q);
    let mut evals = 1u64;
    if q.iter().any(|&x| x <= 0.0) || !strictly_positive(&f) {
        return Err(NcpError::InfeasibleStart);
    }
    let n = q.len();
    let mut mu = average(&q, &f);
    let mu0 = mu;
    let mut trace = vec![mu];

    let finish = |q: Vec<f64>, iterations: usize, converged: bool, trace: Vec<f64>, evals: u64| {
        let mut r = EquilibriumResult::from_quantities(net, q, Method::Nlcp, iterations, converged);
        r.f_evaluations = evals;
        r.mu0 = Some(mu0);
        r.mu_trace = trace;
        r
    };

    for iter in 0..cfg.max_iters {
        if mu <= cfg.epsilon {
            return Ok(finish(q, iter, true, trace, evals));
        }
        let jac = problem.eval_jacobian(&q);
        let mut matrix = jac;
        for r in 0..n {
            for c in 0..n {
                matrix[(r, c)] *= q[r];
            }
            matrix[(r, r)] += f[r];
        }
        let target = cfg.sigma * mu;
        let rhs = DVector::from_fn(n, |r, _| target - q[r] * f[r]);
        let Some(dq) = newton_direction(matrix, &rhs) else {
            return Err(NcpError::NewtonSingular {
                result: Box::new(finish(q, iter, false, trace, evals)),
            });
        };

        let mut alpha: f64 = 1.0;
        for (x, d) in q.iter().zip(dq.iter()) {
            if *d < 0.0 {
                alpha = alpha.min(-cfg.boundary_fraction * x / d);
            }
        }
        let mut accepted = None;
        for _ in 0..LINE_SEARCH_STEPS {
            let trial: Vec<f64> = q.iter().zip(dq.iter()).map(|(x, d)| x + alpha * d).collect();
            if trial.iter().all(|&x| x > 0.0) {
                let ft = problem.eval_f(&trial);
                evals += 1;
                let mt = average(&trial, &ft);
                if strictly_positive(&ft) && mt <= (1.0 - DECREASE * alpha * (1.0 - cfg.sigma)) * mu {
                    accepted = Some((trial, ft, mt));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((trial, ft, mt)) = accepted else {
            return Err(NcpError::LineSearchFailed {
                result: Box::new(finish(q, iter, false, trace, evals)),
            });
        };
        q = trial;
        f = ft;
        mu = mt;
        trace.push(mu);
    }
    if mu <= cfg.epsilon {
        return Ok(finish(q, cfg.max_iters, true, trace, evals));
    }
    Err(NcpError::MaxItersExceeded {
        result: Box::new(finish(q, cfg.max_iters, false, trace, evals)),
    })
}

/// Largest observed ratio
/// `||X (F(x+h) - F(x) - grad F(x) h)||_inf / |h^T grad F(x) h|`
/// over random interior `x` and `h = x o u` with `||u||_2 <= 1`.
pub fn check_slc_empirical(problem: &NcpProblem, n_samples: usize, rng_seed: u64) -> Result<SlcReport, NcpError> {
    if n_samples == 0 {
        return Err(NcpError::InvalidArgument("n_samples must be at least 1".into()));
    }
    let n = problem.dimension();
    let scale = problem.net.quantity_scale();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut lambda_hat: f64 = 0.0;
    let mut used = 0;
    for _ in 0..n_samples {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(1e-3..1.0) * scale).collect();
        let dir: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
        let radius: f64 = rng.gen_range(0.0..1.0);
        let h: Vec<f64> = x.iter().zip(&dir).map(|(xi, d)| xi * d / norm * radius).collect();

        let jac = problem.eval_jacobian(&x);
        let hv = DVector::from_column_slice(&h);
        let jh = &jac * &hv;
        let rhs = hv.dot(&jh).abs();
        if rhs < 1e-14 {
            continue;
        }
        let fx = problem.eval_f(&x);
        let xh: Vec<f64> = x.iter().zip(&h).map(|(a, b)| a + b).collect();
        let fxh = problem.eval_f(&xh);
        // Remainders at the level of rounding error count as zero.
        let lhs = (0..n)
            .map(|k| {
                let rem = fxh[k] - fx[k] - jh[k];
                let noise = ROUNDING_SLACK * f64::EPSILON * (fxh[k].abs() + fx[k].abs() + jh[k].abs());
                if rem.abs() <= noise {
                    0.0
                } else {
                    (x[k] * rem).abs()
                }
            })
            .fold(0.0, f64::max);
        lambda_hat = lambda_hat.max(lhs / rhs);
        used += 1;
    }
    Ok(SlcReport {
        lambda_hat,
        samples: used,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::*;
    use crate::model::{build_network, CostFunction, Edge, PriceFunction};
    use crate::potential::{solve_potential, PotentialProblem, SolverConfig};
    use crate::verify::{brute_force_grid_equilibrium, VerifyError};

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    fn grid() -> Vec<f64> {
        (0..=1000).map(|k| k as f64 * 0.01).collect()
    }

    #[test]
    fn revenue_margin_examples() {
        let (m, _) = revenue_margin(&PriceFunction::Linear { alpha: 1.0, beta: 2.0 }, &grid());
        assert_eq!(m, 2.0);
        let (m, _) = revenue_margin(&PriceFunction::Quadratic { a: 10.0, b: 1.0, c: 1.0 }, &grid());
        assert_eq!(m, 1.0);
        let (m, _) = revenue_margin(
            &PriceFunction::Cubic {
                a: 8.0,
                b: 0.0,
                c: 0.0,
                d: 1.0,
            },
            &grid(),
        );
        assert!(m.abs() < 1e-9);
        let report = check_monotone_revenue(&scenario3(), &uniform_grid(&scenario3())).unwrap();
        assert!(report.condition_holds);
        assert_eq!(report.worst_margin, 2.0);
    }

    #[test]
    fn initial_point_examples() {
        let s1 = scenario1();
        let q0 = initial_feasible_point(&s1, &NcpConfig::default()).unwrap();
        assert!(q0[0] > 0.25 && q0[0] == q0[1]);
        let fixed = NcpConfig {
            q_cap: Some(1.0),
            ..NcpConfig::default()
        };
        let q0 = initial_feasible_point(&s1, &fixed).unwrap();
        assert!(q0[0] > 0.25 && q0[0] <= 1.0);

        let worthless = build_network(
            2,
            1,
            [Edge::new(0, 0), Edge::new(0, 1)],
            vec![PriceFunction::Linear { alpha: 0.0, beta: 1.0 }],
            vec![CostFunction::QuadraticTotal { lambda: 0.0 }; 2],
        )
        .unwrap();
        let q0 = initial_feasible_point(&worthless, &NcpConfig::default()).unwrap();
        assert!(q0[0] > 0.0 && q0[0] < 1e-6);
    }

    #[test]
    fn solves_scenarios() {
        let cfg = NcpConfig::default();
        let s3 = scenario3();
        let r = solve_ncp(&NcpProblem::new(&s3), &cfg).unwrap();
        assert_close(&r.quantities, &[0.18, 0.1, 0.16], 1e-6);
        assert!(r.mu <= 1e-9);
        assert!(r.mu_trace.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-8)));
        let s2 = scenario2();
        let r = solve_ncp(&NcpProblem::new(&s2), &cfg).unwrap();
        let p = solve_potential(&PotentialProblem::new(&s2).unwrap(), &SolverConfig::default()).unwrap();
        assert_close(&r.quantities, &[0.125; 4], 1e-6);
        assert_close(&r.quantities, &p.quantities, 1e-6);
    }

    #[test]
    fn quadratic_price_duopoly_matches_grid_oracle() {
        let net = build_network(
            2,
            1,
            [Edge::new(0, 0), Edge::new(0, 1)],
            vec![PriceFunction::Quadratic { a: 10.0, b: 1.0, c: 1.0 }],
            vec![CostFunction::QuadraticTotal { lambda: 2.0 }; 2],
        )
        .unwrap();
        let r = solve_ncp(&NcpProblem::new(&net), &NcpConfig::default()).unwrap();
        assert!(r.mu <= 1e-9);
        assert!((r.quantities[0] - r.quantities[1]).abs() < 1e-9);
        // The symmetric equilibrium lies between grid points, so the grid
        // dynamics settle into a two-cycle of adjacent points around it.
        let (a, b) = match brute_force_grid_equilibrium(&net, 1e-3, 3.0, 200) {
            Ok(q) => (q.to_vec(), q.to_vec()),
            Err(VerifyError::NonConvergent { last, previous, .. }) => (last, previous),
            Err(e) => panic!("{e}"),
        };
        assert_close(&r.quantities, &a, 1e-3);
        assert_close(&r.quantities, &b, 1e-3);
        for k in 0..2 {
            let (lo, hi) = (a[k].min(b[k]), a[k].max(b[k]));
            assert!(lo - 1e-9 <= r.quantities[k] && r.quantities[k] <= hi + 1e-3);
        }
    }

    #[test]
    fn slc_examples() {
        let s3 = scenario3();
        let affine = check_slc_empirical(&NcpProblem::new(&s3), 200, 1).unwrap();
        assert!(affine.lambda_hat < 1e-12);
        let quad = build_network(
            2,
            1,
            [Edge::new(0, 0), Edge::new(0, 1)],
            vec![PriceFunction::Quadratic { a: 10.0, b: 1.0, c: 1.0 }],
            vec![CostFunction::QuadraticTotal { lambda: 1.0 }; 2],
        )
        .unwrap();
        let r = check_slc_empirical(&NcpProblem::new(&quad), 1000, 7).unwrap();
        assert!(r.lambda_hat.is_finite() && r.lambda_hat >= 0.0);
        assert!(matches!(
            check_slc_empirical(&NcpProblem::new(&s3), 0, 7),
            Err(NcpError::InvalidArgument(_))
        ));
    }
}
