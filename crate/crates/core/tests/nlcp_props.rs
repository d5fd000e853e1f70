mod common;

use common::{max_abs_diff, network, quantities, rng};
use cournot_core::generate::{CostFamily, PriceFamily};
use cournot_core::model::jacobian_r;
use cournot_core::nlcp::{
    check_monotone_revenue, feasible_point_along, solve_ncp, solve_ncp_from, uniform_grid, NcpConfig, NcpProblem,
};
use cournot_core::potential::{solve_potential, PotentialProblem, SolverConfig};
use cournot_core::verify::{best_response_check, Tolerance};
use nalgebra::DVector;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn certificate_implies_psd_revenue_jacobian(seed in any::<u64>()) {
        let mut r = rng(seed);
        let net = network(&mut r, 4, PriceFamily::Mixed, CostFamily::Mixed, false);
        let report = check_monotone_revenue(&net, &uniform_grid(&net)).unwrap();
        prop_assert!(report.condition_holds);
        for _ in 0..100 {
            let q = quantities(&mut r, net.n_edges(), 0.0, 3.0);
            let x = DVector::from_vec(quantities(&mut r, net.n_edges(), -1.0, 1.0));
            let jr = jacobian_r(&net, &q);
            let form = x.dot(&(&jr * &x));
            prop_assert!(form >= -1e-10 * x.norm_squared(), "x^T grad R x = {}", form);
        }
    }

    #[test]
    fn residual_decreases_and_solution_is_equilibrium(seed in any::<u64>()) {
        let mut r = rng(seed);
        let net = network(&mut r, 4, PriceFamily::Mixed, CostFamily::Mixed, false);
        let cfg = NcpConfig::default();
        let sol = solve_ncp(&NcpProblem::new(&net), &cfg).unwrap();
        prop_assert!(sol.mu <= cfg.epsilon);
        prop_assert!(sol.mu_trace.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-8)));
        let gain_tol = 10.0 * cfg.epsilon * net.n_edges() as f64;
        let report = best_response_check(&net, &sol.quantities, Tolerance { residual: 1e-6, gain: gain_tol }).unwrap();
        prop_assert!(report.worst_deviation_gain() <= gain_tol, "{:?}", report);
    }

    #[test]
    fn agrees_with_potential_on_linear_prices(seed in any::<u64>()) {
        let mut r = rng(seed);
        let net = network(&mut r, 4, PriceFamily::Linear, CostFamily::Mixed, false);
        let ncp = solve_ncp(&NcpProblem::new(&net), &NcpConfig::default()).unwrap();
        let pot = solve_potential(&PotentialProblem::new(&net).unwrap(), &SolverConfig::default()).unwrap();
        prop_assert!(max_abs_diff(&ncp.quantities, &pot.quantities) <= 1e-5);
    }

    #[test]
    fn strongly_monotone_instances_have_one_solution(seed in any::<u64>()) {
        let mut r = rng(seed);
        let net = network(&mut r, 4, PriceFamily::Mixed, CostFamily::Mixed, true);
        let cfg = NcpConfig::default();
        let problem = NcpProblem::new(&net);
        let reference = solve_ncp(&problem, &cfg).unwrap();
        for _ in 0..5 {
            let dir = quantities(&mut r, net.n_edges(), 0.1, 1.0);
            let q0 = feasible_point_along(&net, &dir, &cfg).unwrap();
            let other = solve_ncp_from(&problem, &q0, &cfg).unwrap();
            prop_assert!(max_abs_diff(&other.quantities, &reference.quantities) <= 1e-6);
        }
    }
}
