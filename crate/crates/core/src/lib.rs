//! Pure Nash equilibria of Cournot competition on bipartite firm–market
//! networks.
//!
//! Three solvers are provided:
//!
//! * [`potential`]: linear prices, any convex costs. The game admits an exact
//!   potential whose maximizer over the nonnegative orthant is the
//!   equilibrium; it is found by projected gradient ascent.
//! * [`nlcp`]: general decreasing concave prices with a monotone marginal
//!   revenue. Equilibria are the solutions of `q >= 0, F(q) >= 0,
//!   q^T F(q) = 0` and are found by a central-path interior-point method.
//! * [`oligopoly`]: a single market with integral quantities, solved exactly
//!   by a nested binary search over the total quantity.
//!
//! [`verify`] holds solver-independent checks and brute-force oracles.

pub mod equilibrium;
pub mod generate;
pub mod model;
pub mod nlcp;
pub mod oligopoly;
pub mod potential;
pub mod verify;

pub use equilibrium::{EquilibriumResult, Method};
pub use model::{
    build_network, CostFunction, Edge, MarketNetwork, ModelError, PriceCurve, PriceFunction,
    QuantityVector,
};
