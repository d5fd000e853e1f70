//! Splitting a network whose costs do not couple markets into one integral
//! oligopoly per market.

use super::{solve_oligopoly, CostSchedule, Oligopoly, OligopolyError, OligopolySolution, PriceSchedule, Value};
use crate::model::{CostFunction, Edge, MarketNetwork, PriceFunction};

/// Evaluation ceiling used when a market's price never reaches zero.
const FALLBACK_Q_CAP: i64 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct MarketOligopoly {
    pub market: usize,
    /// Network firm ids, in the order used by `oligopoly`.
    pub firms: Vec<usize>,
    /// Canonical edge index of each firm's edge into this market.
    pub edges: Vec<usize>,
    pub oligopoly: Oligopoly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegralNetworkSolution {
    pub markets: Vec<(usize, OligopolySolution)>,
    /// Quantities per edge; `None` when some market has no integral equilibrium.
    pub quantities: Option<Vec<i64>>,
    pub f_evaluations: u64,
}

pub fn price_schedule(price: &PriceFunction) -> PriceSchedule {
    let v = Value::from_f64;
    match *price {
        PriceFunction::Linear { alpha, beta } => PriceSchedule::linear(v(alpha), v(beta)),
        PriceFunction::Quadratic { a, b, c } => PriceSchedule::Polynomial {
            a: v(a),
            b: v(b),
            c: v(c),
            d: Value::ZERO,
        },
        PriceFunction::Cubic { a, b, c, d } => PriceSchedule::Polynomial {
            a: v(a),
            b: v(b),
            c: v(c),
            d: v(d),
        },
        PriceFunction::Entropy { a, b } => PriceSchedule::Entropy { a, b },
    }
}

pub fn default_q_cap(price: &PriceFunction, n_firms: usize) -> i64 {
    match price.zero_price_demand() {
        Some(d) if d.ceil() < 1e12 => n_firms as i64 * d.ceil() as i64 + 2,
        _ => FALLBACK_Q_CAP,
    }
}

/// One oligopoly per market when every firm's cost Hessian is diagonal.
/// A firm present in a single market is always separable. Without `q_cap`,
/// each market's ceiling is `n ceil(D0) + 2`, where `D0` is the demand at
/// which its price reaches zero.
pub fn decompose_separable(net: &MarketNetwork, q_cap: Option<i64>) -> Result<Vec<MarketOligopoly>, OligopolyError> {
    let prices = net.prices().iter().map(price_schedule).collect();
    let caps: Vec<i64> = (0..net.n_markets())
        .map(|i| q_cap.unwrap_or_else(|| default_q_cap(net.price_function(i), net.market_edges(i).len())))
        .collect();
    separable_markets(net.n_firms(), net.edges(), prices, net.costs(), &caps)
}

/// Builds one oligopoly per market from canonical (sorted, unique) `edges`,
/// integer price schedules and per-market ceilings. Fails with
/// `NotSeparable` when a cost couples a firm's markets.
pub fn separable_markets(
    n_firms: usize,
    edges: &[Edge],
    prices: Vec<PriceSchedule>,
    costs: &[CostFunction],
    q_caps: &[i64],
) -> Result<Vec<MarketOligopoly>, OligopolyError> {
    let mut firm_edges = vec![Vec::new(); n_firms];
    for (idx, e) in edges.iter().enumerate() {
        firm_edges[e.firm].push(idx);
    }
    let mut terms = Vec::with_capacity(n_firms);
    for (firm, own) in firm_edges.iter().enumerate() {
        match costs[firm].separable_terms(own.len()) {
            Some(t) => terms.push(t),
            None => return Err(OligopolyError::NotSeparable { firm }),
        }
    }
    prices
        .into_iter()
        .enumerate()
        .map(|(market, price)| {
            let idx: Vec<usize> = (0..edges.len()).filter(|&e| edges[e].market == market).collect();
            let firms: Vec<usize> = idx.iter().map(|&e| edges[e].firm).collect();
            let costs = idx
                .iter()
                .zip(&firms)
                .map(|(&e, &firm)| {
                    let k = firm_edges[firm].iter().position(|&x| x == e).unwrap();
                    let (lambda, mu) = terms[firm][k];
                    CostSchedule::polynomial(Value::from_f64(mu), Value::from_f64(lambda).half())
                })
                .collect();
            let oligopoly = Oligopoly::new(price, costs, q_caps[market])?;
            Ok(MarketOligopoly {
                market,
                firms,
                edges: idx,
                oligopoly,
            })
        })
        .collect()
}

/// Solves every market and assembles per-edge quantities.
pub fn solve_markets(parts: &[MarketOligopoly], n_edges: usize) -> Result<IntegralNetworkSolution, OligopolyError> {
    let mut quantities = Some(vec![0i64; n_edges]);
    let mut markets = Vec::with_capacity(parts.len());
    let mut f_evaluations = 0;
    for part in parts {
        let sol = solve_oligopoly(&part.oligopoly)?;
        f_evaluations += sol.f_evaluations;
        match (sol.quantities(), quantities.as_mut()) {
            (Some(qs), Some(all)) => {
                for (&e, &q) in part.edges.iter().zip(qs) {
                    all[e] = q;
                }
            }
            _ => quantities = None,
        }
        markets.push((part.market, sol));
    }
    Ok(IntegralNetworkSolution {
        markets,
        quantities,
        f_evaluations,
    })
}

/// Integral equilibrium of a separable network, market by market.
pub fn solve_network_integral(net: &MarketNetwork, q_cap: Option<i64>) -> Result<IntegralNetworkSolution, OligopolyError> {
    solve_markets(&decompose_separable(net, q_cap)?, net.n_edges())
}
