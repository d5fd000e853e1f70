//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any fails.

use std::path::Path;
use std::time::{Duration, Instant};

use cournot_cli::bench::{run_bench, threads_from_env, Suite};
use cournot_cli::Scenario;
use cournot_core::generate::{random_network, random_small_oligopoly, CostFamily, NetworkSpec, PriceFamily};
use cournot_core::model::{self, market_revenue_jacobian, PriceCurve};
use cournot_core::nlcp::{
    check_monotone_revenue, feasible_point_along, revenue_margin, solve_ncp, solve_ncp_from, uniform_grid, NcpConfig,
    NcpProblem,
};
use cournot_core::oligopoly::{
    best_response_range, maximizer_bounds, monopoly_optimum, solve_oligopoly, CostSchedule, Oligopoly,
    OligopolyOutcome, PriceSchedule, Value,
};
use cournot_core::potential::{potential_gradient, potential_value, solve_potential, PotentialProblem, SolverConfig};
use cournot_core::verify::{best_response_check, exhaustive_oligopoly_oracle, Tolerance};
use cournot_core::{EquilibriumResult, MarketNetwork};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Random connected network with at most `max_edges` edges.
fn network(r: &mut ChaCha8Rng, prices: PriceFamily, costs: CostFamily, strict: bool, max_edges: usize) -> MarketNetwork {
    loop {
        let spec = NetworkSpec {
            density: r.gen_range(0.3..=1.0),
            prices,
            costs,
            strictly_convex: strict,
            ..NetworkSpec::new(r.gen_range(1..=6), r.gen_range(1..=5))
        };
        let net = random_network(r, &spec).expect("generator yields valid networks");
        if net.n_edges() <= max_edges {
            return net;
        }
    }
}

fn random_q(r: &mut ChaCha8Rng, net: &MarketNetwork) -> Vec<f64> {
    let scale = net.quantity_scale();
    (0..net.n_edges()).map(|_| r.gen_range(0.0..scale)).collect()
}

fn potential(net: &MarketNetwork, initial: Option<Vec<f64>>) -> Result<EquilibriumResult, String> {
    let prob = PotentialProblem::new(net).map_err(|e| e.to_string())?;
    let cfg = SolverConfig {
        initial,
        ..SolverConfig::default()
    };
    solve_potential(&prob, &cfg).map_err(|e| e.to_string())
}

fn ncp(net: &MarketNetwork) -> Result<EquilibriumResult, String> {
    solve_ncp(&NcpProblem::new(net), &NcpConfig::default()).map_err(|e| e.to_string())
}

fn scenario_reproduction() -> Outcome {
    struct Expected {
        file: &'static str,
        q: &'static [f64],
        p: &'static [f64],
        profits: Option<&'static [f64]>,
    }
    let cases = [
        Expected {
            file: "s1.json",
            q: &[0.25, 0.25],
            p: &[0.5],
            profits: Some(&[0.09375, 0.09375]),
        },
        Expected {
            file: "s2.json",
            q: &[0.125; 4],
            p: &[0.5, 0.5],
            profits: None,
        },
        Expected {
            file: "s3.json",
            q: &[0.18, 0.1, 0.16],
            p: &[0.64, 0.48],
            profits: Some(&[0.124, 0.064]),
        },
    ];
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut slowest = Duration::ZERO;
    for case in &cases {
        let s = Scenario::load(dir.join(case.file)).map_err(|e| e.to_string())?;
        let net = s.network().ok_or("bundled scenario has table prices")?;
        for method in ["potential", "nlcp"] {
            let start = Instant::now();
            let r = if method == "potential" { potential(net, None)? } else { ncp(net)? };
            let elapsed = start.elapsed();
            slowest = slowest.max(elapsed);
            let label = format!("{} by {method}", case.file);
            check(max_abs_diff(&r.quantities, case.q) <= 1e-6, || format!("{label}: q = {:?}", r.quantities))?;
            check(max_abs_diff(&r.prices, case.p) <= 1e-6, || format!("{label}: p = {:?}", r.prices))?;
            if let Some(pi) = case.profits {
                check(max_abs_diff(&r.profits, pi) <= 1e-6, || format!("{label}: profits = {:?}", r.profits))?;
            }
            check(elapsed <= Duration::from_secs(1), || format!("{label}: took {elapsed:?}"))?;
        }
    }
    Ok(format!("3 scenarios x 2 methods, slowest solve {slowest:.1?}"))
}

fn gradient_identity() -> Outcome {
    let mut r = rng(2);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let net = network(&mut r, PriceFamily::Linear, CostFamily::Mixed, false, 30);
        let prob = PotentialProblem::new(&net).map_err(|e| e.to_string())?;
        let q = random_q(&mut r, &net);
        let grad = potential_gradient(&prob, &q);
        for (e, g) in grad.iter().enumerate() {
            let firm = net.edge(e).firm;
            let h = 1e-6 * q[e].abs().max(1.0);
            let (mut plus, mut minus) = (q.clone(), q.clone());
            plus[e] += h;
            minus[e] -= h;
            let fd = (model::profit(&net, &plus, firm) - model::profit(&net, &minus, firm)) / (2.0 * h);
            let rel = (g - fd).abs() / fd.abs().max(1.0);
            worst = worst.max(rel);
            check(rel <= 1e-5, || format!("edge {e}: gradient {g}, finite difference {fd}"))?;
        }
    }
    Ok(format!("100 networks, worst relative error {worst:.2e}"))
}

fn concavity() -> Outcome {
    let mut r = rng(3);
    let mut worst = f64::INFINITY;
    for _ in 0..20 {
        let net = network(&mut r, PriceFamily::Linear, CostFamily::Mixed, false, 30);
        let prob = PotentialProblem::new(&net).map_err(|e| e.to_string())?;
        for _ in 0..1000 {
            let x = random_q(&mut r, &net);
            let y = random_q(&mut r, &net);
            let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
            let slack = potential_value(&prob, &mid) - 0.5 * (potential_value(&prob, &x) + potential_value(&prob, &y));
            worst = worst.min(slack);
            check(slack >= -1e-12, || format!("midpoint slack {slack:e}"))?;
        }
    }
    Ok(format!("20 networks x 1000 pairs, minimum slack {worst:.2e}"))
}

fn ncp_contract() -> Outcome {
    let mut r = rng(4);
    let tol = Tolerance {
        residual: 1e-6,
        gain: 1e-5,
    };
    let (mut max_iters, mut worst_gain) = (0, 0.0f64);
    for k in 0..50 {
        let net = network(&mut r, PriceFamily::Mixed, CostFamily::Mixed, false, 30);
        let cert = check_monotone_revenue(&net, &uniform_grid(&net)).map_err(|e| e.to_string())?;
        check(cert.condition_holds, || format!("instance {k} not certified: {}", cert.worst_margin))?;
        let res = ncp(&net).map_err(|e| format!("instance {k}: {e}"))?;
        check(res.mu <= 1e-9 && res.iterations <= 500, || {
            format!("instance {k}: mu {} after {} iterations", res.mu, res.iterations)
        })?;
        let report = best_response_check(&net, &res.quantities, tol).map_err(|e| e.to_string())?;
        check(report.verdict, || format!("instance {k}: {report:?}"))?;
        max_iters = max_iters.max(res.iterations);
        worst_gain = worst_gain.max(report.worst_deviation_gain());
    }
    Ok(format!("50 instances, at most {max_iters} iterations, worst gain {worst_gain:.2e}"))
}

fn cross_method() -> Outcome {
    let mut r = rng(5);
    let mut worst: f64 = 0.0;
    for k in 0..50 {
        let net = network(&mut r, PriceFamily::Linear, CostFamily::Mixed, false, 30);
        let a = potential(&net, None)?;
        let b = ncp(&net)?;
        let d = max_abs_diff(&a.quantities, &b.quantities);
        worst = worst.max(d);
        check(d <= 1e-5, || format!("instance {k}: differ by {d:e}"))?;
    }
    Ok(format!("50 instances, largest difference {worst:.2e}"))
}

/// `P(D) = 10 - D^4`: decreasing and concave, but `|P''| D / 2 = 6 D^3`
/// exceeds `|P'| = 4 D^3`.
struct Quartic;

impl PriceCurve for Quartic {
    fn value(&self, d: f64) -> f64 {
        10.0 - d.powi(4)
    }
    fn slope(&self, d: f64) -> f64 {
        -4.0 * d.powi(3)
    }
    fn curvature(&self, d: f64) -> f64 {
        -12.0 * d * d
    }
}

fn quadratic_form(m: &[Vec<f64>], x: &[f64]) -> f64 {
    m.iter().zip(x).map(|(row, xi)| xi * row.iter().zip(x).map(|(a, xj)| a * xj).sum::<f64>()).sum()
}

fn certificate() -> Outcome {
    let mut r = rng(6);
    let families = [PriceFamily::Linear, PriceFamily::Quadratic, PriceFamily::Cubic, PriceFamily::Entropy];
    for family in families {
        for k in 0..10 {
            let net = network(&mut r, family, CostFamily::QuadraticTotal, false, 30);
            let grid = uniform_grid(&net);
            check(grid.iter().all(|g| g.len() == 1001), || "grid is not 1000 intervals".into())?;
            let cert = check_monotone_revenue(&net, &grid).map_err(|e| e.to_string())?;
            check(cert.condition_holds, || format!("{family:?} instance {k}: margin {}", cert.worst_margin))?;
        }
    }

    let grid: Vec<f64> = (0..=1000).map(|k| 2.0 * k as f64 / 1000.0).collect();
    let (margin, at) = revenue_margin(&Quartic, &grid);
    check(margin < 0.0, || format!("violator margin {margin}"))?;
    // Sample directions for nine firms with all supply on the first one.
    let n = 9;
    let mut q = vec![0.0; n];
    q[0] = at;
    let jac = market_revenue_jacobian(&Quartic, &q);
    let jac: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| jac[(i, j)]).collect()).collect();
    let mut best = f64::INFINITY;
    // The other eight entries share a total `t`; the witness needs `t = -2`.
    for k in 0..=200 {
        let t = -3.0 + k as f64 / 50.0;
        let mut x = vec![t / (n - 1) as f64; n];
        x[0] = 1.0;
        best = best.min(quadratic_form(&jac, &x));
    }
    check(best < 0.0, || format!("no negative direction found, minimum {best}"))?;
    Ok(format!(
        "4 families x 10 networks pass; quartic margin {margin:.3} at D = {at}, witness x^T grad R x = {best:.3}"
    ))
}

fn oracle_equivalence() -> Outcome {
    let mut r = rng(7);
    let mut found = 0;
    for k in 0..200 {
        let olig = random_small_oligopoly(&mut r, 3, 15);
        let sol = solve_oligopoly(&olig).map_err(|e| e.to_string())?;
        let oracle = exhaustive_oligopoly_oracle(&olig).map_err(|e| e.to_string())?;
        match &sol.outcome {
            OligopolyOutcome::Equilibrium { quantities, .. } => {
                check(oracle.contains(quantities), || format!("instance {k}: {quantities:?} not in {oracle:?}"))?;
                found += 1;
            }
            OligopolyOutcome::NoEquilibrium => {
                check(oracle.is_empty(), || format!("instance {k}: oracle found {oracle:?}"))?
            }
        }
    }
    let duopoly = Oligopoly::new(PriceSchedule::linear(10, 1), vec![CostSchedule::polynomial(1, 0); 2], 20)
        .map_err(|e| e.to_string())?;
    let q = solve_oligopoly(&duopoly).map_err(|e| e.to_string())?;
    check(q.quantities() == Some(&[3, 3][..]), || format!("duopoly gave {:?}", q.outcome))?;
    Ok(format!("200 instances ({found} with equilibria) confirmed; duopoly gives (3, 3)"))
}

fn complexity() -> Outcome {
    let rows = run_bench(&[Suite::Oligopoly], 0, threads_from_env().map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let mut per_firm = Vec::new();
    for row in &rows {
        let q_max = row.q_max.ok_or("oligopoly row without q_max")? as f64;
        let log = q_max.log2();
        let bound = 4.0 * row.size as f64 * log * (log + 2.0);
        check(row.f_evals as f64 <= bound, || {
            format!("n = {}: {} evaluations exceed {bound:.0}", row.size, row.f_evals)
        })?;
        check(row.wall_time_s <= 5.0, || format!("n = {}: {:.2} s", row.size, row.wall_time_s))?;
        per_firm.push(row.f_evals as f64 / row.size as f64);
    }
    let spread = per_firm.iter().copied().fold(0.0, f64::max) / per_firm.iter().copied().fold(f64::INFINITY, f64::min);
    check(spread <= 4.0, || format!("evaluations per firm vary by {spread:.1}x"))?;
    let summary: Vec<String> = rows
        .iter()
        .map(|r| format!("n={} evals={} ({:.2}s)", r.size, r.f_evals, r.wall_time_s))
        .collect();
    Ok(summary.join(", "))
}

fn supermodularity_and_ranges() -> Outcome {
    let mut r = rng(9);
    for k in 0..20 {
        let olig = random_small_oligopoly(&mut r, 3, 10);
        let q_max: i64 = (0..olig.n_firms()).map(|i| monopoly_optimum(&olig, i).unwrap()).sum();
        check(q_max <= 30, || format!("instance {k}: Q_max {q_max}"))?;
        let n = q_max as usize + 1;
        for i in 0..olig.n_firms() {
            let obj = |lagged: bool| -> Result<Vec<Vec<Value>>, String> {
                (0..n)
                    .map(|q| {
                        (0..n)
                            .map(|t| {
                                let (q, t) = (q as i64, t as i64);
                                if lagged {
                                    olig.lagged_response_objective(i, q, t)
                                } else {
                                    olig.response_objective(i, q, t)
                                }
                                .map_err(|e| e.to_string())
                            })
                            .collect()
                    })
                    .collect()
            };
            let (f, g) = (obj(false)?, obj(true)?);
            for q in 0..n {
                for q2 in q + 1..n {
                    for t1 in 0..n {
                        for t2 in t1 + 1..n {
                            check(f[q2][t1] - f[q2][t2] >= f[q][t1] - f[q][t2], || {
                                format!("instance {k}, firm {i}: F not supermodular at q={q},{q2} Q={t1},{t2}")
                            })?;
                            check(t1 == 0 || g[q2][t1] - g[q2][t2] >= g[q][t1] - g[q][t2], || {
                                format!("instance {k}, firm {i}: G not supermodular at q={q},{q2} Q={t1},{t2}")
                            })?;
                        }
                    }
                }
            }
            let bounds: Vec<_> = (0..n as i64).map(|t| maximizer_bounds(&olig, i, t).unwrap()).collect();
            let capped: Vec<_> = (0..n as i64).map(|t| best_response_range(&olig, i, t).unwrap()).collect();
            for hi in 1..n {
                for lo in 0..hi {
                    check(
                        bounds[lo].lower >= bounds[hi].lower
                            && bounds[lo].upper >= bounds[hi].upper
                            && capped[lo].lower >= capped[hi].lower,
                        || format!("instance {k}, firm {i}: ranges not monotone between Q={lo} and Q={hi}"),
                    )?;
                }
            }
        }
    }
    Ok("20 instances checked exhaustively".into())
}

fn uniqueness() -> Outcome {
    let mut r = rng(10);
    let cfg = NcpConfig::default();
    let (mut worst, mut rejected): (f64, usize) = (0.0, 0);
    for k in 0..20 {
        let net = network(&mut r, PriceFamily::Linear, CostFamily::Mixed, true, 30);
        let problem = NcpProblem::new(&net);
        let scale = net.quantity_scale();
        let reference = potential(&net, None)?.quantities;
        for _ in 0..10 {
            let start: Vec<f64> = (0..net.n_edges()).map(|_| r.gen_range(0.0..2.0 * scale)).collect();
            let a = potential(&net, Some(start))?;
            // Coupled costs can keep `F` negative along a whole ray; draw again.
            let q0 = loop {
                let dir: Vec<f64> = (0..net.n_edges()).map(|_| r.gen_range(0.1..1.0)).collect();
                match feasible_point_along(&net, &dir, &cfg) {
                    Ok(q0) => break q0,
                    Err(_) => rejected += 1,
                }
                check(rejected < 10_000, || format!("instance {k}: no strictly feasible ray found"))?;
            };
            let b = solve_ncp_from(&problem, &q0, &cfg).map_err(|e| format!("instance {k}: {e}"))?;
            for q in [&a.quantities, &b.quantities] {
                let d = max_abs_diff(q, &reference);
                worst = worst.max(d);
                check(d <= 1e-6, || format!("instance {k}: start-dependent result, difference {d:e}"))?;
            }
        }
    }
    Ok(format!("20 instances x 10 starts x 2 solvers, largest spread {worst:.2e}, {rejected} infeasible rays redrawn"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("scenario reproduction", scenario_reproduction),
        ("gradient identity", gradient_identity),
        ("potential concavity", concavity),
        ("NCP contract", ncp_contract),
        ("cross-method agreement", cross_method),
        ("monotone-revenue certificate", certificate),
        ("oligopoly oracle equivalence", oracle_equivalence),
        ("oligopoly complexity accounting", complexity),
        ("supermodularity and monotone ranges", supermodularity_and_ranges),
        ("uniqueness by multistart", uniqueness),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        match outcome {
            Ok(detail) => println!("[PASS] criterion {}: {name} ({detail}) [{elapsed:.1?}]", k + 1),
            Err(why) => {
                failed += 1;
                println!("[FAIL] criterion {}: {name}: {why} [{elapsed:.1?}]", k + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
    println!("all {} criteria passed", criteria.len());
}
