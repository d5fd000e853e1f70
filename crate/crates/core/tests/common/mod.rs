#![allow(dead_code)]

use cournot_core::generate::{random_network, CostFamily, NetworkSpec, PriceFamily};
use cournot_core::MarketNetwork;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random connected network with up to `max_side` firms and markets.
pub fn network(rng: &mut ChaCha8Rng, max_side: usize, prices: PriceFamily, costs: CostFamily, strict: bool) -> MarketNetwork {
    let spec = NetworkSpec {
        n_firms: rng.gen_range(1..=max_side),
        n_markets: rng.gen_range(1..=max_side),
        density: rng.gen_range(0.2..=1.0),
        prices,
        costs,
        strictly_convex: strict,
    };
    random_network(rng, &spec).expect("generated networks are valid")
}

pub fn quantities(rng: &mut ChaCha8Rng, len: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(lo..hi)).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
