//! Network model: firms, markets, the bipartite access graph, price and cost
//! families, profits and the marginal profit field `F = R + S`.
//!
//! Edges are kept in canonical order: sorted by market index, then by firm
//! index. Every length-E vector in this crate (quantities, marginal fields,
//! Jacobian rows) follows that order.

use std::collections::BTreeSet;
use std::ops::Deref;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of grid intervals used when validating a price function.
pub const PRICE_GRID_INTERVALS: usize = 1000;

/// Seed for the random directions used by the PSD check on quadratic-form costs.
const PSD_CHECK_SEED: u64 = 0x5eed_c057;
const PSD_CHECK_DIRECTIONS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("edge list is empty")]
    NoEdges,
    #[error("edge (market {market}, firm {firm}) refers to an id out of range")]
    IdOutOfRange { market: usize, firm: usize },
    #[error("duplicate edge (market {market}, firm {firm})")]
    DuplicateEdge { market: usize, firm: usize },
    #[error("market {0} has no incident edge")]
    IsolatedMarket(usize),
    #[error("firm {0} has no incident edge")]
    IsolatedFirm(usize),
    #[error("expected {expected} {what}, got {got}")]
    CountMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("price of market {market} is increasing at D = {demand}")]
    NonDecreasingPrice { market: usize, demand: f64 },
    #[error("price of market {market} is convex at D = {demand}")]
    NonConcavePrice { market: usize, demand: f64 },
    #[error("cost of firm {firm} is not convex: {reason}")]
    NonConvexCost { firm: usize, reason: String },
    #[error("cost of firm {firm} has dimension {got}, firm has {expected} edges")]
    CostDimension {
        firm: usize,
        expected: usize,
        got: usize,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("quantity vector has length {got}, network has {expected} edges")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("quantity at edge {edge} is negative or not finite ({value})")]
    InvalidQuantity { edge: usize, value: f64 },
}

/// Anything that behaves like an inverse demand curve: value, slope and
/// curvature as functions of the total quantity `D` supplied to a market.
pub trait PriceCurve {
    fn value(&self, demand: f64) -> f64;
    fn slope(&self, demand: f64) -> f64;
    fn curvature(&self, demand: f64) -> f64;
}

/// Inverse demand function of one market.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PriceFunction {
    /// `P(D) = alpha - beta D`
    Linear { alpha: f64, beta: f64 },
    /// `P(D) = a - b D - c D^2`
    Quadratic { a: f64, b: f64, c: f64 },
    /// `P(D) = a - b D - c D^2 - d D^3`
    Cubic { a: f64, b: f64, c: f64, d: f64 },
    /// `P(D) = a - b (D + 1) ln(D + 1)`
    Entropy { a: f64, b: f64 },
}

impl PriceCurve for PriceFunction {
    fn value(&self, d: f64) -> f64 {
        match *self {
            PriceFunction::Linear { alpha, beta } => alpha - beta * d,
            PriceFunction::Quadratic { a, b, c } => a - d * (b + c * d),
            PriceFunction::Cubic { a, b, c, d: k } => a - d * (b + d * (c + k * d)),
            PriceFunction::Entropy { a, b } => a - b * (d + 1.0) * (d + 1.0).ln(),
        }
    }

    fn slope(&self, d: f64) -> f64 {
        match *self {
            PriceFunction::Linear { beta, .. } => -beta,
            PriceFunction::Quadratic { b, c, .. } => -b - 2.0 * c * d,
            PriceFunction::Cubic { b, c, d: k, .. } => -b - d * (2.0 * c + 3.0 * k * d),
            PriceFunction::Entropy { b, .. } => -b * ((d + 1.0).ln() + 1.0),
        }
    }

    fn curvature(&self, d: f64) -> f64 {
        match *self {
            PriceFunction::Linear { .. } => 0.0,
            PriceFunction::Quadratic { c, .. } => -2.0 * c,
            PriceFunction::Cubic { c, d: k, .. } => -2.0 * c - 6.0 * k * d,
            PriceFunction::Entropy { b, .. } => -b / (d + 1.0),
        }
    }
}

impl PriceFunction {
    fn params(&self) -> Vec<f64> {
        match *self {
            PriceFunction::Linear { alpha, beta } => vec![alpha, beta],
            PriceFunction::Quadratic { a, b, c } => vec![a, b, c],
            PriceFunction::Cubic { a, b, c, d } => vec![a, b, c, d],
            PriceFunction::Entropy { a, b } => vec![a, b],
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, PriceFunction::Linear { .. })
    }

    /// Smallest demand at which the price drops to zero, if it does so below `1e9`.
    pub fn zero_price_demand(&self) -> Option<f64> {
        if self.value(0.0) <= 0.0 {
            return Some(0.0);
        }
        let mut hi = 1.0;
        while self.value(hi) > 0.0 {
            hi *= 2.0;
            if hi > 1e9 {
                return None;
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.value(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(hi)
    }

    /// Grid check of `P' <= 0` and `P'' <= 0` on `{0, cap/1000, ..., cap}`.
    pub fn validate(&self, market: usize, demand_cap: f64) -> Result<(), ModelError> {
        if self.params().iter().any(|p| !p.is_finite()) {
            return Err(ModelError::InvalidParameter(format!(
                "price of market {market} has a non-finite parameter"
            )));
        }
        let step = demand_cap / PRICE_GRID_INTERVALS as f64;
        for k in 0..=PRICE_GRID_INTERVALS {
            let d = k as f64 * step;
            if self.slope(d) > 0.0 {
                return Err(ModelError::NonDecreasingPrice { market, demand: d });
            }
            if self.curvature(d) > 0.0 {
                return Err(ModelError::NonConcavePrice { market, demand: d });
            }
        }
        Ok(())
    }
}

/// Production cost of one firm as a function of its strategy `s`, the
/// quantities it ships along its own edges (in canonical edge order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CostFunction {
    /// `c(s) = lambda/2 * (sum s)^2`
    QuadraticTotal { lambda: f64 },
    /// `c(s) = sum_e lambda_e/2 * s_e^2 + mu_e * s_e`
    SeparableQuadratic { lambda: Vec<f64>, mu: Vec<f64> },
    /// `c(s) = s^T A s / 2 + b^T s`, `A` row-major and symmetric PSD.
    QuadraticForm { a: Vec<Vec<f64>>, b: Vec<f64> },
}

impl CostFunction {
    pub fn value(&self, s: &[f64]) -> f64 {
        match self {
            CostFunction::QuadraticTotal { lambda } => {
                let t: f64 = s.iter().sum();
                0.5 * lambda * t * t
            }
            CostFunction::SeparableQuadratic { lambda, mu } => s
                .iter()
                .zip(lambda.iter().zip(mu))
                .map(|(x, (l, m))| 0.5 * l * x * x + m * x)
                .sum(),
            CostFunction::QuadraticForm { a, b } => {
                let mut total = 0.0;
                for (row, (x, bk)) in a.iter().zip(s.iter().zip(b)) {
                    let ax: f64 = row.iter().zip(s).map(|(r, y)| r * y).sum();
                    total += 0.5 * x * ax + bk * x;
                }
                total
            }
        }
    }

    pub fn gradient(&self, s: &[f64]) -> Vec<f64> {
        match self {
            CostFunction::QuadraticTotal { lambda } => {
                let t: f64 = s.iter().sum();
                vec![lambda * t; s.len()]
            }
            CostFunction::SeparableQuadratic { lambda, mu } => s
                .iter()
                .zip(lambda.iter().zip(mu))
                .map(|(x, (l, m))| l * x + m)
                .collect(),
            CostFunction::QuadraticForm { a, b } => a
                .iter()
                .zip(b)
                .map(|(row, bk)| row.iter().zip(s).map(|(r, y)| r * y).sum::<f64>() + bk)
                .collect(),
        }
    }

    /// Hessian on the firm's own edges; constant for every family here.
    pub fn hessian(&self, dim: usize) -> DMatrix<f64> {
        match self {
            CostFunction::QuadraticTotal { lambda } => DMatrix::from_element(dim, dim, *lambda),
            CostFunction::SeparableQuadratic { lambda, .. } => {
                DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(lambda))
            }
            CostFunction::QuadraticForm { a, .. } => {
                DMatrix::from_fn(dim, dim, |r, c| a[r][c])
            }
        }
    }

    /// Whether the Hessian is diagonal for a firm with `dim` edges, i.e. the
    /// cost splits into independent per-market terms.
    pub fn is_separable(&self, dim: usize) -> bool {
        match self {
            CostFunction::QuadraticTotal { lambda } => dim <= 1 || *lambda == 0.0,
            CostFunction::SeparableQuadratic { .. } => true,
            CostFunction::QuadraticForm { a, .. } => a
                .iter()
                .enumerate()
                .all(|(r, row)| row.iter().enumerate().all(|(c, v)| r == c || *v == 0.0)),
        }
    }

    /// Returns `(lambda, mu)` of the per-edge term `lambda/2 s^2 + mu s` when
    /// the cost is separable.
    pub fn separable_terms(&self, dim: usize) -> Option<Vec<(f64, f64)>> {
        if !self.is_separable(dim) {
            return None;
        }
        Some(match self {
            CostFunction::QuadraticTotal { lambda } => vec![(*lambda, 0.0); dim],
            CostFunction::SeparableQuadratic { lambda, mu } => {
                lambda.iter().copied().zip(mu.iter().copied()).collect()
            }
            CostFunction::QuadraticForm { a, b } => {
                (0..dim).map(|k| (a[k][k], b[k])).collect()
            }
        })
    }

    /// Checks a cost of `firm` over `dim` edges: finite parameters, matching
    /// dimension and convexity.
    pub fn validate(&self, firm: usize, dim: usize) -> Result<(), ModelError> {
        let non_convex = |reason: String| ModelError::NonConvexCost { firm, reason };
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            CostFunction::QuadraticTotal { lambda } => {
                if !lambda.is_finite() || *lambda < 0.0 {
                    return Err(non_convex(format!("lambda = {lambda} must be >= 0")));
                }
            }
            CostFunction::SeparableQuadratic { lambda, mu } => {
                for (what, v) in [("lambda", lambda), ("mu", mu)] {
                    if v.len() != dim {
                        return Err(ModelError::CostDimension {
                            firm,
                            expected: dim,
                            got: v.len(),
                        });
                    }
                    if !finite(v) {
                        return Err(ModelError::InvalidParameter(format!(
                            "cost of firm {firm}: {what} has a non-finite entry"
                        )));
                    }
                }
                if let Some(l) = lambda.iter().find(|l| **l < 0.0) {
                    return Err(non_convex(format!("lambda entry {l} must be >= 0")));
                }
                if let Some(m) = mu.iter().find(|m| **m < 0.0) {
                    return Err(ModelError::InvalidParameter(format!(
                        "cost of firm {firm}: mu entry {m} must be >= 0"
                    )));
                }
            }
            CostFunction::QuadraticForm { a, b } => {
                if a.len() != dim || b.len() != dim || a.iter().any(|row| row.len() != dim) {
                    return Err(ModelError::CostDimension {
                        firm,
                        expected: dim,
                        got: a.len(),
                    });
                }
                if !finite(b) || a.iter().any(|row| !finite(row)) {
                    return Err(ModelError::InvalidParameter(format!(
                        "cost of firm {firm} has a non-finite entry"
                    )));
                }
                if let Some(x) = b.iter().find(|x| **x < 0.0) {
                    return Err(ModelError::InvalidParameter(format!(
                        "cost of firm {firm}: linear term {x} must be >= 0"
                    )));
                }
                let scale = a
                    .iter()
                    .flatten()
                    .fold(0.0f64, |m, v| m.max(v.abs()))
                    .max(1.0);
                for r in 0..dim {
                    for c in 0..r {
                        if (a[r][c] - a[c][r]).abs() > 1e-12 * scale {
                            return Err(non_convex(format!("A is not symmetric at ({r}, {c})")));
                        }
                    }
                }
                check_psd_directional(a, scale).map_err(non_convex)?;
            }
        }
        Ok(())
    }
}

/// Sampled PSD test: `x^T A x >= 0` along unit, pairwise and random directions.
fn check_psd_directional(a: &[Vec<f64>], scale: f64) -> Result<(), String> {
    let dim = a.len();
    let quad = |x: &[f64]| -> f64 {
        a.iter()
            .zip(x)
            .map(|(row, xi)| xi * row.iter().zip(x).map(|(r, y)| r * y).sum::<f64>())
            .sum()
    };
    let check = |x: &[f64]| -> Result<(), String> {
        let norm2: f64 = x.iter().map(|v| v * v).sum();
        let q = quad(x);
        if q < -1e-10 * scale * norm2 {
            Err(format!("negative curvature {q:.3e} along direction {x:?}"))
        } else {
            Ok(())
        }
    };
    let mut x = vec![0.0; dim];
    for i in 0..dim {
        x[i] = 1.0;
        check(&x)?;
        for j in 0..i {
            x[j] = -1.0;
            check(&x)?;
            x[j] = 0.0;
        }
        x[i] = 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(PSD_CHECK_SEED);
    for _ in 0..PSD_CHECK_DIRECTIONS {
        for v in x.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        check(&x)?;
    }
    Ok(())
}

/// One firm-market access edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub market: usize,
    pub firm: usize,
}

impl Edge {
    pub fn new(market: usize, firm: usize) -> Self {
        Edge { market, firm }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NetworkOptions {
    /// Upper end of the price validation grid. Defaults to ten times the
    /// largest zero-price demand over all markets.
    pub demand_cap: Option<f64>,
}

/// The bipartite firm–market graph with its price and cost functions.
/// Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketNetwork {
    n_firms: usize,
    n_markets: usize,
    edges: Vec<Edge>,
    prices: Vec<PriceFunction>,
    costs: Vec<CostFunction>,
    market_edges: Vec<Vec<usize>>,
    firm_edges: Vec<Vec<usize>>,
}

/// Builds a network with default validation options.
pub fn build_network(
    n_firms: usize,
    n_markets: usize,
    edges: impl IntoIterator<Item = Edge>,
    prices: Vec<PriceFunction>,
    costs: Vec<CostFunction>,
) -> Result<MarketNetwork, ModelError> {
    MarketNetwork::with_options(n_firms, n_markets, edges, prices, costs, NetworkOptions::default())
}

impl MarketNetwork {
    pub fn with_options(
        n_firms: usize,
        n_markets: usize,
        edges: impl IntoIterator<Item = Edge>,
        prices: Vec<PriceFunction>,
        costs: Vec<CostFunction>,
        options: NetworkOptions,
    ) -> Result<Self, ModelError> {
        let mut set = BTreeSet::new();
        for e in edges {
            if e.market >= n_markets || e.firm >= n_firms {
                return Err(ModelError::IdOutOfRange {
                    market: e.market,
                    firm: e.firm,
                });
            }
            if !set.insert(e) {
                return Err(ModelError::DuplicateEdge {
                    market: e.market,
                    firm: e.firm,
                });
            }
        }
        if set.is_empty() {
            return Err(ModelError::NoEdges);
        }
        if prices.len() != n_markets {
            return Err(ModelError::CountMismatch {
                what: "price functions",
                expected: n_markets,
                got: prices.len(),
            });
        }
        if costs.len() != n_firms {
            return Err(ModelError::CountMismatch {
                what: "cost functions",
                expected: n_firms,
                got: costs.len(),
            });
        }
        // BTreeSet iteration is already the canonical (market, firm) order.
        let edges: Vec<Edge> = set.into_iter().collect();
        let mut market_edges = vec![Vec::new(); n_markets];
        let mut firm_edges = vec![Vec::new(); n_firms];
        for (idx, e) in edges.iter().enumerate() {
            market_edges[e.market].push(idx);
            firm_edges[e.firm].push(idx);
        }
        if let Some(i) = market_edges.iter().position(Vec::is_empty) {
            return Err(ModelError::IsolatedMarket(i));
        }
        if let Some(j) = firm_edges.iter().position(Vec::is_empty) {
            return Err(ModelError::IsolatedFirm(j));
        }

        let demand_cap = options.demand_cap.unwrap_or_else(|| default_demand_cap(&prices));
        if !(demand_cap.is_finite() && demand_cap > 0.0) {
            return Err(ModelError::InvalidParameter(format!(
                "demand cap {demand_cap} must be positive"
            )));
        }
        for (i, p) in prices.iter().enumerate() {
            p.validate(i, demand_cap)?;
        }
        for (j, c) in costs.iter().enumerate() {
            c.validate(j, firm_edges[j].len())?;
        }

        Ok(MarketNetwork {
            n_firms,
            n_markets,
            edges,
            prices,
            costs,
            market_edges,
            firm_edges,
        })
    }

    pub fn n_firms(&self) -> usize {
        self.n_firms
    }

    pub fn n_markets(&self) -> usize {
        self.n_markets
    }

    /// Number of edges `E`.
    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, idx: usize) -> Edge {
        self.edges[idx]
    }

    /// Canonical index of edge `(market, firm)`.
    pub fn edge_index(&self, market: usize, firm: usize) -> Option<usize> {
        self.edges.binary_search(&Edge { market, firm }).ok()
    }

    pub fn prices(&self) -> &[PriceFunction] {
        &self.prices
    }

    pub fn price_function(&self, market: usize) -> &PriceFunction {
        &self.prices[market]
    }

    pub fn costs(&self) -> &[CostFunction] {
        &self.costs
    }

    pub fn cost_function(&self, firm: usize) -> &CostFunction {
        &self.costs[firm]
    }

    /// Edge indices incident to a market, ascending by firm.
    pub fn market_edges(&self, market: usize) -> &[usize] {
        &self.market_edges[market]
    }

    /// Edge indices incident to a firm, ascending by market.
    pub fn firm_edges(&self, firm: usize) -> &[usize] {
        &self.firm_edges[firm]
    }

    /// `N_M(i)`: firms that can supply market `i`.
    pub fn market_firms(&self, market: usize) -> impl Iterator<Item = usize> + '_ {
        self.market_edges[market].iter().map(|&e| self.edges[e].firm)
    }

    /// `N_F(j)`: markets firm `j` can supply.
    pub fn firm_markets(&self, firm: usize) -> impl Iterator<Item = usize> + '_ {
        self.firm_edges[firm].iter().map(|&e| self.edges[e].market)
    }

    pub fn all_prices_linear(&self) -> bool {
        self.prices.iter().all(PriceFunction::is_linear)
    }

    /// Largest demand at which some market price is still positive; a
    /// scale for search ranges.
    pub fn quantity_scale(&self) -> f64 {
        self.prices
            .iter()
            .filter_map(PriceFunction::zero_price_demand)
            .fold(0.0, f64::max)
            .max(1.0)
    }

    /// Restriction of `q` to firm `j`'s edges.
    pub fn strategy(&self, q: &[f64], firm: usize) -> Vec<f64> {
        self.firm_edges[firm].iter().map(|&e| q[e]).collect()
    }

    pub fn check_quantities(&self, q: &[f64]) -> Result<(), ModelError> {
        if q.len() != self.n_edges() {
            return Err(ModelError::ShapeMismatch {
                expected: self.n_edges(),
                got: q.len(),
            });
        }
        if let Some((edge, &value)) = q.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && v.is_finite())) {
            return Err(ModelError::InvalidQuantity { edge, value });
        }
        Ok(())
    }
}

fn default_demand_cap(prices: &[PriceFunction]) -> f64 {
    let q_max = prices
        .iter()
        .filter_map(PriceFunction::zero_price_demand)
        .fold(0.0, f64::max)
        .max(1.0);
    10.0 * q_max
}

/// Production quantities along every edge, canonical order, all `>= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantityVector(Vec<f64>);

impl QuantityVector {
    pub fn new(net: &MarketNetwork, values: Vec<f64>) -> Result<Self, ModelError> {
        net.check_quantities(&values)?;
        Ok(QuantityVector(values))
    }

    pub fn zeros(net: &MarketNetwork) -> Self {
        QuantityVector(vec![0.0; net.n_edges()])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for QuantityVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// `F = R + S`: negated profit gradient split into its revenue and cost parts.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalField {
    pub f: Vec<f64>,
    pub r: Vec<f64>,
    pub s: Vec<f64>,
}

/// `D_i`, total quantity supplied to market `i`.
pub fn demand(net: &MarketNetwork, q: &[f64], market: usize) -> f64 {
    net.market_edges(market).iter().map(|&e| q[e]).sum()
}

pub fn demands(net: &MarketNetwork, q: &[f64]) -> Vec<f64> {
    (0..net.n_markets()).map(|i| demand(net, q, i)).collect()
}

pub fn market_prices(net: &MarketNetwork, q: &[f64]) -> Vec<f64> {
    (0..net.n_markets())
        .map(|i| net.price_function(i).value(demand(net, q, i)))
        .collect()
}

/// `pi_j = sum_i P_i(D_i) q_ij - c_j(s_j)`.
pub fn profit(net: &MarketNetwork, q: &[f64], firm: usize) -> f64 {
    let revenue: f64 = net
        .firm_edges(firm)
        .iter()
        .map(|&e| {
            let market = net.edge(e).market;
            net.price_function(market).value(demand(net, q, market)) * q[e]
        })
        .sum();
    revenue - net.cost_function(firm).value(&net.strategy(q, firm))
}

pub fn profits(net: &MarketNetwork, q: &[f64]) -> Vec<f64> {
    (0..net.n_firms()).map(|j| profit(net, q, j)).collect()
}

/// `f_ij = -P_i(D_i) - P_i'(D_i) q_ij + dc_j/dq_ij`, with its revenue part
/// `r_ij` and cost part `s_ij`.
pub fn marginal_field(net: &MarketNetwork, q: &[f64]) -> MarginalField {
    let e_count = net.n_edges();
    let mut r = vec![0.0; e_count];
    for i in 0..net.n_markets() {
        let d = demand(net, q, i);
        let p = net.price_function(i);
        let (value, slope) = (p.value(d), p.slope(d));
        for &e in net.market_edges(i) {
            r[e] = -value - slope * q[e];
        }
    }
    let mut s = vec![0.0; e_count];
    for j in 0..net.n_firms() {
        let grad = net.cost_function(j).gradient(&net.strategy(q, j));
        for (&e, g) in net.firm_edges(j).iter().zip(grad) {
            s[e] = g;
        }
    }
    let f = r.iter().zip(&s).map(|(a, b)| a + b).collect();
    MarginalField { f, r, s }
}

/// Just `F(q)`.
pub fn marginal_profit(net: &MarketNetwork, q: &[f64]) -> Vec<f64> {
    marginal_field(net, q).f
}

/// Jacobian block of the marginal revenue of a single market whose firms
/// ship `q_market`. Row `j`, column `k` is `d r_j / d q_k`.
pub fn market_revenue_jacobian(price: &impl PriceCurve, q_market: &[f64]) -> DMatrix<f64> {
    let d: f64 = q_market.iter().sum();
    let (slope, curv) = (price.slope(d), price.curvature(d));
    let n = q_market.len();
    DMatrix::from_fn(n, n, |row, col| {
        let base = -slope - curv * q_market[row];
        if row == col {
            base - slope
        } else {
            base
        }
    })
}

/// `grad R`: market blocks, zero across markets.
pub fn jacobian_r(net: &MarketNetwork, q: &[f64]) -> DMatrix<f64> {
    let e_count = net.n_edges();
    let mut jac = DMatrix::zeros(e_count, e_count);
    for i in 0..net.n_markets() {
        let idx = net.market_edges(i);
        let local: Vec<f64> = idx.iter().map(|&e| q[e]).collect();
        let block = market_revenue_jacobian(net.price_function(i), &local);
        for (a, &ea) in idx.iter().enumerate() {
            for (b, &eb) in idx.iter().enumerate() {
                jac[(ea, eb)] = block[(a, b)];
            }
        }
    }
    jac
}

/// `grad S`: firm blocks holding each cost Hessian.
pub fn jacobian_s(net: &MarketNetwork, _q: &[f64]) -> DMatrix<f64> {
    let e_count = net.n_edges();
    let mut jac = DMatrix::zeros(e_count, e_count);
    for j in 0..net.n_firms() {
        let idx = net.firm_edges(j);
        let h = net.cost_function(j).hessian(idx.len());
        for (a, &ea) in idx.iter().enumerate() {
            for (b, &eb) in idx.iter().enumerate() {
                jac[(ea, eb)] = h[(a, b)];
            }
        }
    }
    jac
}

pub fn jacobian_f(net: &MarketNetwork, q: &[f64]) -> DMatrix<f64> {
    jacobian_r(net, q) + jacobian_s(net, q)
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn scenario1() -> MarketNetwork {
        build_network(
            2,
            1,
            [Edge::new(0, 0), Edge::new(0, 1)],
            vec![PriceFunction::Linear { alpha: 1.0, beta: 1.0 }],
            vec![CostFunction::QuadraticTotal { lambda: 1.0 }; 2],
        )
        .unwrap()
    }

    pub fn scenario2() -> MarketNetwork {
        build_network(
            2,
            2,
            [Edge::new(0, 0), Edge::new(0, 1), Edge::new(1, 0), Edge::new(1, 1)],
            vec![PriceFunction::Linear { alpha: 1.0, beta: 2.0 }; 2],
            vec![CostFunction::QuadraticTotal { lambda: 1.0 }; 2],
        )
        .unwrap()
    }

    pub fn scenario3() -> MarketNetwork {
        build_network(
            2,
            2,
            [Edge::new(1, 1), Edge::new(0, 0), Edge::new(1, 0)],
            vec![PriceFunction::Linear { alpha: 1.0, beta: 2.0 }; 2],
            vec![CostFunction::QuadraticTotal { lambda: 1.0 }; 2],
        )
        .unwrap()
    }
}
