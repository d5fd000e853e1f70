use serde::{Deserialize, Serialize};

use crate::model::{self, MarketNetwork};
use crate::verify;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Potential,
    Nlcp,
    Oligopoly,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Potential => "potential",
            Method::Nlcp => "nlcp",
            Method::Oligopoly => "oligopoly",
        }
    }
}

/// Output of a network solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumResult {
    pub method: Method,
    /// Quantities per edge in canonical order.
    pub quantities: Vec<f64>,
    pub demands: Vec<f64>,
    pub prices: Vec<f64>,
    pub profits: Vec<f64>,
    /// Average complementarity residual `q^T F(q) / E`.
    pub mu: f64,
    pub iterations: usize,
    /// Evaluations of `F` or of the potential gradient.
    pub f_evaluations: u64,
    pub converged: bool,
    /// Residual at the starting point (interior-point solver only).
    pub mu0: Option<f64>,
    /// Per-iteration residual trace (interior-point solver only).
    pub mu_trace: Vec<f64>,
}

impl EquilibriumResult {
    pub fn from_quantities(
        net: &MarketNetwork,
        quantities: Vec<f64>,
        method: Method,
        iterations: usize,
        converged: bool,
    ) -> Self {
        let mu = verify::complementarity_residual(net, &quantities, 0.0.into()).mu;
        EquilibriumResult {
            method,
            demands: model::demands(net, &quantities),
            prices: model::market_prices(net, &quantities),
            profits: model::profits(net, &quantities),
            quantities,
            mu,
            iterations,
            f_evaluations: 0,
            converged,
            mu0: None,
            mu_trace: Vec::new(),
        }
    }
}
