mod common;

use common::{max_abs_diff, network, quantities, rng};
use cournot_core::generate::{CostFamily, PriceFamily};
use cournot_core::model;
use cournot_core::potential::{potential_gradient, potential_value, solve_potential, PotentialProblem, SolverConfig};
use cournot_core::verify::{best_response_check, Tolerance};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gradient_equals_own_profit_derivative(seed in any::<u64>()) {
        let mut r = rng(seed);
        let net = network(&mut r, 5, PriceFamily::Linear, CostFamily::Mixed, false);
        let prob = PotentialProblem::new(&net).unwrap();
        let q = quantities(&mut r, net.n_edges(), 0.0, 2.0);
        let grad = potential_gradient(&prob, &q);
        let h = 1e-5;
        for e in 0..net.n_edges() {
            let firm = net.edge(e).firm;
            let (mut plus, mut minus) = (q.clone(), q.clone());
            plus[e] += h;
            minus[e] -= h;
            let fd = (model::profit(&net, &plus, firm) - model::profit(&net, &minus, firm)) / (2.0 * h);
            prop_assert!((fd - grad[e]).abs() <= 1e-5 * grad[e].abs().max(1.0));
        }
    }

    #[test]
    fn potential_is_midpoint_concave(seed in any::<u64>()) {
        let mut r = rng(seed);
        let net = network(&mut r, 4, PriceFamily::Linear, CostFamily::Mixed, false);
        let prob = PotentialProblem::new(&net).unwrap();
        for _ in 0..50 {
            let a = quantities(&mut r, net.n_edges(), 0.0, 3.0);
            let b = quantities(&mut r, net.n_edges(), 0.0, 3.0);
            let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
            let slack = potential_value(&prob, &mid) - 0.5 * (potential_value(&prob, &a) + potential_value(&prob, &b));
            prop_assert!(slack >= -1e-12, "slack {}", slack);
        }
    }

    #[test]
    fn market_pair_form_is_nonnegative(x in prop::collection::vec(-10.0f64..10.0, 1..8)) {
        let squares: f64 = x.iter().map(|v| v * v).sum();
        let mut pairs = 0.0;
        for j in 0..x.len() {
            for k in 0..j {
                pairs += x[j] * x[k];
            }
        }
        prop_assert!(squares + pairs >= -1e-12 * squares.max(1.0));
    }

    #[test]
    fn strictly_convex_instances_have_one_maximizer(seed in any::<u64>()) {
        let mut r = rng(seed);
        let net = network(&mut r, 4, PriceFamily::Linear, CostFamily::Mixed, true);
        let prob = PotentialProblem::new(&net).unwrap();
        let reference = solve_potential(&prob, &SolverConfig::default()).unwrap();
        for _ in 0..10 {
            let cfg = SolverConfig {
                initial: Some(quantities(&mut r, net.n_edges(), 0.0, 5.0)),
                ..SolverConfig::default()
            };
            let other = solve_potential(&prob, &cfg).unwrap();
            prop_assert!(max_abs_diff(&other.quantities, &reference.quantities) <= 1e-6);
        }
    }

    #[test]
    fn solutions_pass_best_response_check(seed in any::<u64>()) {
        let mut r = rng(seed);
        let net = network(&mut r, 4, PriceFamily::Linear, CostFamily::Mixed, false);
        let prob = PotentialProblem::new(&net).unwrap();
        let sol = solve_potential(&prob, &SolverConfig::default()).unwrap();
        let report = best_response_check(&net, &sol.quantities, Tolerance { residual: 1e-6, gain: 1e-6 }).unwrap();
        prop_assert!(report.verdict, "{:?}", report);
    }
}
