//! Exact potential for networks with linear prices, and its maximization.
//!
//! With `P_i(D) = alpha_i - beta_i D` the function
//!
//! ```text
//! Phi(q) = sum_i [ alpha_i D_i - beta_i sum_j q_ij^2 - beta_i sum_{k<j} q_ij q_ik ] - sum_j c_j(s_j)
//! ```
//!
//! satisfies `dPhi/dq_ij = dpi_j/dq_ij` for every edge, so its maximizers over
//! `q >= 0` are exactly the equilibria. It is concave whenever the costs are
//! convex.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::equilibrium::{EquilibriumResult, Method};
use crate::model::{self, MarketNetwork, ModelError, PriceFunction};

const POWER_ITERATIONS: usize = 200;
const POWER_SEED: u64 = 0x9073_11a1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PotentialError {
    #[error("market {market} does not have a linear price")]
    NotLinear { market: usize },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("no convergence within {} iterations", .result.iterations)]
    MaxItersExceeded { result: Box<EquilibriumResult> },
    #[error("quantities exceeded {q_cap} after {iterations} iterations; the potential looks unbounded")]
    Unbounded { q_cap: f64, iterations: usize },
}

/// A network whose every market has a linear price.
#[derive(Debug, Clone, Copy)]
pub struct PotentialProblem<'a> {
    net: &'a MarketNetwork,
    coefficients: &'a [PriceFunction],
}

impl<'a> PotentialProblem<'a> {
    pub fn new(net: &'a MarketNetwork) -> Result<Self, PotentialError> {
        if let Some(market) = net.prices().iter().position(|p| !p.is_linear()) {
            return Err(PotentialError::NotLinear { market });
        }
        Ok(PotentialProblem {
            net,
            coefficients: net.prices(),
        })
    }

    pub fn network(&self) -> &'a MarketNetwork {
        self.net
    }

    /// `(alpha_i, beta_i)` of market `i`.
    pub fn coefficients(&self, market: usize) -> (f64, f64) {
        match self.coefficients[market] {
            PriceFunction::Linear { alpha, beta } => (alpha, beta),
            _ => unreachable!("checked at construction"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Stop once `||q - max(q + grad, 0)||_2 <= tol`.
    pub tol: f64,
    pub max_iters: usize,
    /// Step reduction factor of the Armijo backtracking.
    pub backtrack: f64,
    /// Sufficient-increase constant of the Armijo rule.
    pub armijo: f64,
    /// Report `Unbounded` once any quantity exceeds this.
    pub q_cap: f64,
    /// Starting point; zero when `None`.
    pub initial: Option<Vec<f64>>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-9,
            max_iters: 100_000,
            backtrack: 0.5,
            armijo: 1e-4,
            q_cap: 1e9,
            initial: None,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<(), PotentialError> {
        let bad = |s: &str| Err(PotentialError::InvalidConfig(s.into()));
        if !(self.tol > 0.0) {
            return bad("tol must be positive");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1");
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return bad("backtrack factor must lie in (0, 1)");
        }
        if !(self.armijo > 0.0 && self.armijo < 1.0) {
            return bad("armijo constant must lie in (0, 1)");
        }
        if !(self.q_cap > 0.0) {
            return bad("q_cap must be positive");
        }
        Ok(())
    }
}

/// `Phi(q)`.
pub fn potential_value(prob: &PotentialProblem, q: &[f64]) -> f64 {
    let net = prob.net;
    let mut total = 0.0;
    for i in 0..net.n_markets() {
        let (alpha, beta) = prob.coefficients(i);
        let mut d = 0.0;
        let mut squares = 0.0;
        for &e in net.market_edges(i) {
            d += q[e];
            squares += q[e] * q[e];
        }
        // sum_{k<j} q_j q_k = (D^2 - sum q^2) / 2
        let pairs = 0.5 * (d * d - squares);
        total += alpha * d - beta * squares - beta * pairs;
    }
    for j in 0..net.n_firms() {
        total -= net.cost_function(j).value(&net.strategy(q, j));
    }
    total
}

/// `grad Phi(q)`, entry `(i, j)` being `alpha_i - beta_i D_i - beta_i q_ij - dc_j/dq_ij`.
pub fn potential_gradient(prob: &PotentialProblem, q: &[f64]) -> Vec<f64> {
    let net = prob.net;
    let mut grad = vec![0.0; net.n_edges()];
    for i in 0..net.n_markets() {
        let (alpha, beta) = prob.coefficients(i);
        let d = model::demand(net, q, i);
        for &e in net.market_edges(i) {
            grad[e] = alpha - beta * d - beta * q[e];
        }
    }
    for j in 0..net.n_firms() {
        let g = net.cost_function(j).gradient(&net.strategy(q, j));
        for (&e, gk) in net.firm_edges(j).iter().zip(g) {
            grad[e] -= gk;
        }
    }
    grad
}

/// Largest eigenvalue of `-Hess Phi = grad F` (constant here), by power
/// iteration from a seeded random vector.
fn curvature_bound(prob: &PotentialProblem) -> f64 {
    let net = prob.net;
    let e = net.n_edges();
    let jac = model::jacobian_f(net, &vec![0.0; e]);
    let sym = 0.5 * (&jac + jac.transpose());
    let mut rng = ChaCha8Rng::seed_from_u64(POWER_SEED);
    let mut v = nalgebra::DVector::from_fn(e, |_, _| rng.gen_range(0.5..1.5));
    let mut lambda = 0.0;
    for _ in 0..POWER_ITERATIONS {
        let norm = v.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v /= norm;
        let w = &sym * &v;
        lambda = v.dot(&w);
        v = w;
    }
    lambda.max(0.0)
}

fn projected_step(q: &[f64], g: &[f64], step: f64) -> Vec<f64> {
    q.iter().zip(g).map(|(x, d)| (x + step * d).max(0.0)).collect()
}

/// Maximizes the potential by projected gradient ascent with Armijo
/// backtracking, starting from step `1/L`.
pub fn solve_potential(prob: &PotentialProblem, cfg: &SolverConfig) -> Result<EquilibriumResult, PotentialError> {
    cfg.validate()?;
    let net = prob.net;
    let mut q = match &cfg.initial {
        Some(q0) => {
            net.check_quantities(q0)?;
            q0.clone()
        }
        None => vec![0.0; net.n_edges()],
    };
    let lipschitz = curvature_bound(prob);
    // Any step up to 1/L increases a concave quadratic, so it is accepted
    // even when rounding hides the increase.
    let safe_step = if lipschitz > 1e-12 { 1.0 / (1.05 * lipschitz) } else { 1.0 };
    let mut step = safe_step;
    let mut value = potential_value(prob, &q);
    let mut evals = 0u64;
    let finish = |q: Vec<f64>, iterations: usize, converged: bool, evals: u64| {
        let mut r = EquilibriumResult::from_quantities(net, q, Method::Potential, iterations, converged);
        r.f_evaluations = evals;
        r
    };

    for iter in 0..cfg.max_iters {
        let grad = potential_gradient(prob, &q);
        evals += 1;
        let unit = projected_step(&q, &grad, 1.0);
        let stationarity = q
            .iter()
            .zip(&unit)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if stationarity <= cfg.tol {
            return Ok(finish(q, iter, true, evals));
        }
        loop {
            let trial = projected_step(&q, &grad, step);
            let ascent: f64 = trial.iter().zip(&q).zip(&grad).map(|((a, b), g)| (a - b) * g).sum();
            let trial_value = potential_value(prob, &trial);
            if trial_value >= value + cfg.armijo * ascent || step <= safe_step {
                q = trial;
                value = trial_value;
                break;
            }
            step *= cfg.backtrack;
        }
        step = (step * 2.0).max(safe_step);
        if q.iter().any(|&x| x > cfg.q_cap || !x.is_finite()) {
            return Err(PotentialError::Unbounded {
                q_cap: cfg.q_cap,
                iterations: iter + 1,
            });
        }
    }
    let result = finish(q, cfg.max_iters, false, evals);
    Err(PotentialError::MaxItersExceeded {
        result: Box::new(result),
    })
}
