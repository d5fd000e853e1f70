//! Seeded random instances: networks whose price families all carry the
//! monotone-revenue certificate, and small integral oligopolies.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::model::{build_network, CostFunction, Edge, MarketNetwork, ModelError, PriceFunction};
use crate::oligopoly::{monopoly_optimum, CostSchedule, Oligopoly, PriceSchedule, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriceFamily {
    Linear,
    Quadratic,
    Cubic,
    Entropy,
    /// Each market draws one of the four families.
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostFamily {
    QuadraticTotal,
    SeparableQuadratic,
    QuadraticForm,
    Mixed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub n_firms: usize,
    pub n_markets: usize,
    /// Probability of each firm–market edge before the connectivity fix-up.
    pub density: f64,
    pub prices: PriceFamily,
    pub costs: CostFamily,
    /// Keep every cost Hessian at least `0.1 I`, which makes `F` strongly
    /// monotone and the equilibrium unique.
    pub strictly_convex: bool,
}

impl NetworkSpec {
    pub fn new(n_firms: usize, n_markets: usize) -> Self {
        NetworkSpec {
            n_firms,
            n_markets,
            density: 1.0,
            prices: PriceFamily::Linear,
            costs: CostFamily::QuadraticTotal,
            strictly_convex: false,
        }
    }
}

/// Parameters are rounded to this grid so generated files are short and
/// reproducible.
const PARAM_STEP: f64 = 1e-4;

fn round(x: f64) -> f64 {
    (x / PARAM_STEP).round() * PARAM_STEP
}

fn uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    round(rng.gen_range(lo..hi))
}

struct Components {
    parent: Vec<usize>,
}

impl Components {
    fn new(n: usize) -> Self {
        Components { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        self.parent[ra] = rb;
    }
}

/// Samples each edge with probability `density`, then adds random edges
/// between different components until the bipartite graph is connected.
pub fn random_edges(rng: &mut impl Rng, n_firms: usize, n_markets: usize, density: f64) -> Vec<Edge> {
    let mut edges = Vec::new();
    // Markets are nodes 0..m, firms m..m+n.
    let mut comps = Components::new(n_markets + n_firms);
    for market in 0..n_markets {
        for firm in 0..n_firms {
            if rng.gen_bool(density.clamp(0.0, 1.0)) {
                edges.push(Edge::new(market, firm));
                comps.union(market, n_markets + firm);
            }
        }
    }
    loop {
        let mut candidates = Vec::new();
        for market in 0..n_markets {
            for firm in 0..n_firms {
                if comps.find(market) != comps.find(n_markets + firm) {
                    candidates.push(Edge::new(market, firm));
                }
            }
        }
        let Some(&e) = candidates.choose(rng) else {
            break;
        };
        edges.push(e);
        comps.union(e.market, n_markets + e.firm);
    }
    edges.sort();
    edges
}

fn random_price(rng: &mut impl Rng, family: PriceFamily) -> PriceFunction {
    let family = match family {
        PriceFamily::Mixed => *[
            PriceFamily::Linear,
            PriceFamily::Quadratic,
            PriceFamily::Cubic,
            PriceFamily::Entropy,
        ]
        .choose(rng)
        .unwrap(),
        f => f,
    };
    match family {
        PriceFamily::Linear => PriceFunction::Linear {
            alpha: uniform(rng, 1.0, 10.0),
            beta: uniform(rng, 0.5, 3.0),
        },
        PriceFamily::Quadratic => PriceFunction::Quadratic {
            a: uniform(rng, 1.0, 10.0),
            b: uniform(rng, 0.5, 2.0),
            c: uniform(rng, 0.0, 1.0),
        },
        PriceFamily::Cubic => PriceFunction::Cubic {
            a: uniform(rng, 1.0, 10.0),
            b: uniform(rng, 0.5, 2.0),
            c: uniform(rng, 0.0, 0.5),
            d: uniform(rng, 0.0, 0.2),
        },
        PriceFamily::Entropy => PriceFunction::Entropy {
            a: uniform(rng, 1.0, 10.0),
            b: uniform(rng, 0.5, 2.0),
        },
        PriceFamily::Mixed => unreachable!(),
    }
}

fn random_cost(rng: &mut impl Rng, family: CostFamily, dim: usize, strict: bool) -> CostFunction {
    let family = match family {
        CostFamily::Mixed => *[
            CostFamily::QuadraticTotal,
            CostFamily::SeparableQuadratic,
            CostFamily::QuadraticForm,
        ]
        .choose(rng)
        .unwrap(),
        f => f,
    };
    let floor = if strict { 0.1 } else { 0.0 };
    match family {
        CostFamily::QuadraticTotal if !strict || dim == 1 => CostFunction::QuadraticTotal {
            lambda: uniform(rng, floor, 2.0),
        },
        // A total-quantity cost is only strictly convex for a single edge.
        CostFamily::QuadraticTotal | CostFamily::QuadraticForm => {
            let b: Vec<Vec<f64>> = (0..dim)
                .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let a = (0..dim)
                .map(|r| {
                    (0..dim)
                        .map(|c| {
                            let dot: f64 = (0..dim).map(|k| b[r][k] * b[c][k]).sum();
                            round(dot / dim as f64 + if r == c { floor + dim as f64 * PARAM_STEP } else { 0.0 })
                        })
                        .collect()
                })
                .collect();
            let lin = (0..dim).map(|_| uniform(rng, 0.0, 0.5)).collect();
            CostFunction::QuadraticForm { a, b: lin }
        }
        CostFamily::SeparableQuadratic => CostFunction::SeparableQuadratic {
            lambda: (0..dim).map(|_| uniform(rng, floor, 2.0)).collect(),
            mu: (0..dim).map(|_| uniform(rng, 0.0, 0.5)).collect(),
        },
        CostFamily::Mixed => unreachable!(),
    }
}

/// A random connected network drawn from `spec`.
pub fn random_network(rng: &mut impl Rng, spec: &NetworkSpec) -> Result<MarketNetwork, ModelError> {
    if !(spec.density > 0.0 && spec.density <= 1.0) {
        return Err(ModelError::InvalidParameter(format!(
            "density {} must lie in (0, 1]",
            spec.density
        )));
    }
    if spec.n_firms == 0 || spec.n_markets == 0 {
        return Err(ModelError::NoEdges);
    }
    let edges = random_edges(rng, spec.n_firms, spec.n_markets, spec.density);
    let prices = (0..spec.n_markets).map(|_| random_price(rng, spec.prices)).collect();
    let mut dims = vec![0; spec.n_firms];
    for e in &edges {
        dims[e.firm] += 1;
    }
    let costs = dims
        .iter()
        .map(|&d| random_cost(rng, spec.costs, d, spec.strictly_convex))
        .collect();
    build_network(spec.n_firms, spec.n_markets, edges, prices, costs)
}

/// Random single-market instance with at most `max_firms` firms, every
/// monopoly optimum at most `max_monopoly`, rational data, and `q_cap`
/// beyond the demand at which the price turns negative.
pub fn random_small_oligopoly(rng: &mut impl Rng, max_firms: usize, max_monopoly: i64) -> Oligopoly {
    loop {
        let n = rng.gen_range(1..=max_firms);
        let q_cap = 4 * max_monopoly * (n as i64 + 1) + 4;
        let price = if rng.gen_bool(0.3) {
            random_price_table(rng, q_cap)
        } else {
            PriceSchedule::Polynomial {
                a: Value::int(rng.gen_range(0..=2 * max_monopoly + 4)),
                b: Value::ratio(rng.gen_range(1..=4), 2),
                c: Value::ratio(rng.gen_range(0..=2), 8),
                d: Value::ZERO,
            }
        };
        let costs = (0..n)
            .map(|_| {
                if rng.gen_bool(0.3) {
                    random_cost_table(rng, q_cap)
                } else {
                    CostSchedule::polynomial(Value::ratio(rng.gen_range(0..=8), 2), Value::ratio(rng.gen_range(0..=4), 4))
                }
            })
            .collect();
        let Ok(olig) = Oligopoly::new(price, costs, q_cap) else {
            continue;
        };
        let ok = (0..n).all(|i| monopoly_optimum(&olig, i).is_ok_and(|m| m <= max_monopoly));
        let turns_negative = olig.price_at(q_cap / 2).is_ok_and(|p| p.is_negative());
        if ok && turns_negative {
            return olig;
        }
    }
}

/// Decreasing concave table with half-integer steps.
fn random_price_table(rng: &mut impl Rng, q_cap: i64) -> PriceSchedule {
    let mut values = Vec::with_capacity(q_cap as usize + 2);
    let mut p = Value::int(rng.gen_range(4..=40));
    let mut drop = Value::ratio(rng.gen_range(0..=4), 2);
    for _ in 0..q_cap + 2 {
        values.push(p);
        p = p - drop;
        if rng.gen_bool(0.4) {
            drop = drop + Value::ratio(rng.gen_range(1..=2), 2);
        }
    }
    PriceSchedule::Table(values)
}

/// Convex table with `c(0) = 0` and quarter-integer marginal costs.
fn random_cost_table(rng: &mut impl Rng, q_cap: i64) -> CostSchedule {
    let mut values = Vec::with_capacity(q_cap as usize + 2);
    let mut c = Value::ZERO;
    let mut marginal = Value::ratio(rng.gen_range(0..=8), 4);
    for _ in 0..q_cap + 2 {
        values.push(c);
        c = c + marginal;
        if rng.gen_bool(0.3) {
            marginal = marginal + Value::ratio(rng.gen_range(1..=3), 4);
        }
    }
    CostSchedule::Table(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fix_up_connects_sparse_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let edges = random_edges(&mut rng, 4, 4, 0.1);
            let mut comps = Components::new(8);
            for e in &edges {
                comps.union(e.market, 4 + e.firm);
            }
            let root = comps.find(0);
            assert!((0..8).all(|v| comps.find(v) == root));
        }
    }

    #[test]
    fn same_seed_same_network() {
        let spec = NetworkSpec {
            prices: PriceFamily::Mixed,
            costs: CostFamily::Mixed,
            density: 0.5,
            ..NetworkSpec::new(3, 3)
        };
        let a = random_network(&mut ChaCha8Rng::seed_from_u64(9), &spec).unwrap();
        let b = random_network(&mut ChaCha8Rng::seed_from_u64(9), &spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn small_oligopolies_respect_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            let olig = random_small_oligopoly(&mut rng, 3, 15);
            assert!(olig.n_firms() <= 3);
            for i in 0..olig.n_firms() {
                assert!(monopoly_optimum(&olig, i).unwrap() <= 15);
            }
        }
    }
}
