//! Method selection, solving and verification of a loaded scenario.

use std::time::Instant;

use clap::ValueEnum;
use cournot_core::nlcp::{solve_ncp, NcpConfig, NcpProblem};
use cournot_core::oligopoly::{solve_markets, OligopolyError};
use cournot_core::potential::{solve_potential, PotentialProblem, SolverConfig};
use cournot_core::verify::{
    best_response_check, is_integral_equilibrium, try_complementarity_residual, Tolerance, VerifyWarning,
};
use cournot_core::{EquilibriumResult, Method};
use serde::Deserialize;

use crate::error::CliError;
use crate::report::{FirmRow, MarketRow, Outcome, ResultReport, VerifyMode, VerifySummary};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodChoice {
    /// Oligopoly for separable integral scenarios, potential for linear
    /// prices, nlcp otherwise.
    Auto,
    Potential,
    Nlcp,
    Oligopoly,
}

fn inapplicable(method: Method, reason: impl Into<String>) -> CliError {
    CliError::Inapplicable {
        method: method.as_str(),
        reason: reason.into(),
    }
}

/// Resolves `auto` and checks that an explicit choice applies.
pub fn select_method(s: &Scenario, choice: MethodChoice) -> Result<Method, CliError> {
    let separable = || match s.integral_markets() {
        Ok(_) => Ok(()),
        Err(e) => Err(inapplicable(Method::Oligopoly, e.to_string())),
    };
    let tables = |m: Method| inapplicable(m, "table prices are only defined at integer totals");
    match choice {
        MethodChoice::Auto => {
            if s.integral() && separable().is_ok() {
                Ok(Method::Oligopoly)
            } else if s.has_tables() {
                // Table prices only exist at integer totals.
                separable().map(|_| Method::Oligopoly)
            } else if s.network().is_some_and(|n| n.all_prices_linear()) {
                Ok(Method::Potential)
            } else {
                Ok(Method::Nlcp)
            }
        }
        MethodChoice::Potential => match s.network() {
            None => Err(tables(Method::Potential)),
            Some(net) if !net.all_prices_linear() => Err(inapplicable(Method::Potential, "some price is not linear")),
            Some(_) => Ok(Method::Potential),
        },
        MethodChoice::Nlcp => match s.network() {
            None => Err(tables(Method::Nlcp)),
            Some(_) => Ok(Method::Nlcp),
        },
        MethodChoice::Oligopoly => separable().map(|_| Method::Oligopoly),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Solver tolerance; each solver's default when `None`.
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
    /// Tolerance of the verification that follows the solve.
    pub verify_tol: Tolerance,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: None,
            max_iters: None,
            verify_tol: 1e-6.into(),
        }
    }
}

/// Solves `s` and verifies the rounded result, which is exactly what the
/// report holds.
pub fn solve_scenario(s: &Scenario, choice: MethodChoice, opts: &SolveOptions) -> Result<ResultReport, CliError> {
    let method = select_method(s, choice)?;
    let start = Instant::now();
    let report = match method {
        Method::Potential | Method::Nlcp => {
            let result = solve_continuous(s, method, opts)?;
            let wall = start.elapsed().as_secs_f64();
            continuous_report(s, result, wall)
        }
        Method::Oligopoly => integral_report(s, start)?,
    };
    let mut report = report.rounded();
    if let Some(q) = &report.quantities {
        let mode = match method {
            Method::Oligopoly => VerifyMode::Integral,
            _ => VerifyMode::Continuous,
        };
        report.verification = Some(verify_quantities(s, q, mode, opts.verify_tol)?.rounded());
    }
    Ok(report)
}

fn solve_continuous(s: &Scenario, method: Method, opts: &SolveOptions) -> Result<EquilibriumResult, CliError> {
    let net = s.network().expect("checked by select_method");
    let failed = |e: &dyn std::fmt::Display| CliError::Solver(e.to_string());
    if method == Method::Potential {
        let prob = PotentialProblem::new(net).map_err(|e| failed(&e))?;
        let defaults = SolverConfig::default();
        let cfg = SolverConfig {
            tol: opts.tol.unwrap_or(defaults.tol),
            max_iters: opts.max_iters.unwrap_or(defaults.max_iters),
            ..defaults
        };
        solve_potential(&prob, &cfg).map_err(|e| failed(&e))
    } else {
        let defaults = NcpConfig::default();
        let cfg = NcpConfig {
            epsilon: opts.tol.unwrap_or(defaults.epsilon),
            max_iters: opts.max_iters.unwrap_or(defaults.max_iters),
            ..defaults
        };
        solve_ncp(&NcpProblem::new(net), &cfg).map_err(|e| failed(&e))
    }
}

fn continuous_report(s: &Scenario, r: EquilibriumResult, wall: f64) -> ResultReport {
    ResultReport {
        method: r.method.as_str().into(),
        outcome: Outcome::Equilibrium,
        edges: s.edge_ids().to_vec(),
        quantities: Some(r.quantities),
        markets: r
            .demands
            .iter()
            .zip(&r.prices)
            .enumerate()
            .map(|(i, (&demand, &price))| MarketRow {
                id: s.market_id(i).clone(),
                demand,
                price,
            })
            .collect(),
        firms: r
            .profits
            .iter()
            .enumerate()
            .map(|(j, &profit)| FirmRow {
                id: s.firm_id(j).clone(),
                profit,
            })
            .collect(),
        unsolved_markets: Vec::new(),
        mu: Some(r.mu),
        iterations: r.iterations as u64,
        f_evaluations: r.f_evaluations,
        converged: r.converged,
        wall_time_s: wall,
        verification: None,
    }
}

fn integral_report(s: &Scenario, start: Instant) -> Result<ResultReport, CliError> {
    let oligopoly_failed = |e: OligopolyError| CliError::Solver(e.to_string());
    let parts = s.integral_markets().map_err(oligopoly_failed)?;
    let sol = solve_markets(&parts, s.n_edges()).map_err(oligopoly_failed)?;
    let wall = start.elapsed().as_secs_f64();

    let iterations = sol.markets.iter().map(|(_, m)| m.outer_iterations as u64).sum();
    let unsolved_markets = sol
        .markets
        .iter()
        .filter(|(_, m)| m.quantities().is_none())
        .map(|(i, _)| s.market_id(*i).clone())
        .collect();
    let mut report = ResultReport {
        method: Method::Oligopoly.as_str().into(),
        outcome: Outcome::NoEquilibrium,
        edges: s.edge_ids().to_vec(),
        quantities: None,
        markets: Vec::new(),
        firms: Vec::new(),
        unsolved_markets,
        mu: None,
        iterations,
        f_evaluations: sol.f_evaluations,
        converged: true,
        wall_time_s: wall,
        verification: None,
    };
    let Some(q) = sol.quantities else {
        return Ok(report);
    };

    let n_firms = s.file().firms.len();
    let mut profits = vec![0.0; n_firms];
    for part in &parts {
        let qs: Vec<i64> = part.edges.iter().map(|&e| q[e]).collect();
        let total: i64 = qs.iter().sum();
        let price = part.oligopoly.price_at(total).map_err(oligopoly_failed)?;
        report.markets.push(MarketRow {
            id: s.market_id(part.market).clone(),
            demand: total as f64,
            price: price.to_f64(),
        });
        for (k, (&firm, &qk)) in part.firms.iter().zip(&qs).enumerate() {
            let p = part.oligopoly.profit_at(k, qk, total).map_err(oligopoly_failed)?;
            profits[firm] += p.to_f64();
        }
    }
    report.firms = profits
        .into_iter()
        .enumerate()
        .map(|(j, profit)| FirmRow {
            id: s.firm_id(j).clone(),
            profit,
        })
        .collect();
    report.quantities = Some(q.iter().map(|&x| x as f64).collect());
    report.outcome = Outcome::Equilibrium;
    Ok(report)
}

/// Checks whether `q` is an equilibrium of `s`, in the given mode.
pub fn verify_quantities(s: &Scenario, q: &[f64], mode: VerifyMode, tol: Tolerance) -> Result<VerifySummary, CliError> {
    if q.len() != s.n_edges() {
        return Err(CliError::Shape {
            expected: s.n_edges(),
            got: q.len(),
        });
    }
    match mode {
        VerifyMode::Continuous => verify_continuous(s, q, tol),
        VerifyMode::Integral => verify_integral(s, q),
    }
}

fn verify_continuous(s: &Scenario, q: &[f64], tol: Tolerance) -> Result<VerifySummary, CliError> {
    let net = s.network().ok_or_else(|| CliError::Inapplicable {
        method: "continuous verification",
        reason: "table prices are only defined at integer totals".into(),
    })?;
    let shape = |e| CliError::Usage(format!("{e}"));
    let valid = q.iter().all(|x| x.is_finite() && *x >= 0.0);
    let report = if valid {
        best_response_check(net, q, tol).map_err(shape)?
    } else {
        try_complementarity_residual(net, q, tol).map_err(shape)?
    };
    Ok(VerifySummary {
        mode: VerifyMode::Continuous,
        verdict: report.verdict && valid,
        feasible_q: Some(report.feasible_q && valid),
        feasible_f: Some(report.feasible_f),
        mu: Some(report.mu),
        worst_deviation_gain: valid.then(|| report.worst_deviation_gain()),
        warnings: report
            .warnings
            .iter()
            .map(|w| match w {
                VerifyWarning::NonConcave { firm, curvature } => format!(
                    "profit of firm {} is not concave (curvature {curvature:.3e}); deviation gains may be local",
                    s.firm_id(*firm)
                ),
            })
            .collect(),
    })
}

fn verify_integral(s: &Scenario, q: &[f64]) -> Result<VerifySummary, CliError> {
    let parts = s.integral_markets().map_err(|e| CliError::Inapplicable {
        method: "integral verification",
        reason: e.to_string(),
    })?;
    let mut summary = VerifySummary {
        mode: VerifyMode::Integral,
        verdict: true,
        feasible_q: None,
        feasible_f: None,
        mu: None,
        worst_deviation_gain: None,
        warnings: Vec::new(),
    };
    if let Some(e) = q.iter().position(|x| !(x.fract() == 0.0 && *x >= 0.0 && *x < 9e15)) {
        let (m, f) = &s.edge_ids()[e];
        summary.verdict = false;
        summary.warnings.push(format!(
            "quantity {} on edge ({m}, {f}) is not a nonnegative integer",
            q[e]
        ));
        return Ok(summary);
    }
    summary.feasible_q = Some(true);
    for part in &parts {
        let qs: Vec<i64> = part.edges.iter().map(|&e| q[e] as i64).collect();
        match is_integral_equilibrium(&part.oligopoly, &qs) {
            Ok(true) => {}
            Ok(false) => {
                summary.verdict = false;
                summary
                    .warnings
                    .push(format!("a firm in market {} gains by deviating", s.market_id(part.market)));
            }
            Err(e) => {
                summary.verdict = false;
                summary.warnings.push(format!("market {}: {e}", s.market_id(part.market)));
            }
        }
    }
    Ok(summary)
}

/// Quantities to verify: a bare JSON array, or a solve report.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum QuantityInput {
    Plain(Vec<f64>),
    Report {
        quantities: Option<Vec<f64>>,
        #[serde(default)]
        verification: Option<ReportMode>,
    },
}

#[derive(Debug, Deserialize)]
struct ReportMode {
    mode: VerifyMode,
}

/// Parses a quantities file. Returns the vector and, for a report, the
/// verification mode it was produced with.
pub fn parse_quantities(text: &str) -> Result<(Vec<f64>, Option<VerifyMode>), CliError> {
    let input: QuantityInput = serde_json::from_str(text).map_err(|e| {
        CliError::Usage(format!(
            "quantities must be a JSON array of numbers or a solve report: {e}"
        ))
    })?;
    match input {
        QuantityInput::Plain(q) => Ok((q, None)),
        QuantityInput::Report {
            quantities: Some(q),
            verification,
        } => Ok((q, verification.map(|v| v.mode))),
        QuantityInput::Report { quantities: None, .. } => {
            Err(CliError::Usage("report holds no quantities (no equilibrium)".into()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(price: &str, cost_a: &str, integral: bool) -> Scenario {
        let text = format!(
            r#"{{
                "schema_version": 1,
                "markets": [
                    {{"id": 0, "price": {price}}},
                    {{"id": 1, "price": {{"kind": "linear", "params": {{"alpha": 10, "beta": 1}}}}}}
                ],
                "firms": [
                    {{"id": 0, "cost": {cost_a}}},
                    {{"id": 1, "cost": {{"kind": "quadratic_total", "params": {{"lambda": 2}}}}}}
                ],
                "edges": [[0, 0], [0, 1], [1, 0]],
                "integral": {integral}
            }}"#
        );
        Scenario::parse(&text).unwrap()
    }

    const LINEAR: &str = r#"{"kind": "linear", "params": {"alpha": 10, "beta": 1}}"#;
    const CUBIC: &str = r#"{"kind": "cubic", "params": {"a": 10, "b": 1, "c": 0.1, "d": 0.01}}"#;
    const TABLE: &str = r#"{"kind": "table", "params": {"values": [10, 9, 8, 7, 6, 5, 4, 3, 2, 1, 0, -1, -2, -3]}}"#;
    const SEPARABLE: &str = r#"{"kind": "separable_quadratic", "params": {"lambda": [2, 2], "mu": [0, 1]}}"#;
    const COUPLED: &str = r#"{"kind": "quadratic_total", "params": {"lambda": 2}}"#;

    #[test]
    fn auto_picks_oligopoly_for_separable_integral() {
        let s = scenario(LINEAR, SEPARABLE, true);
        assert_eq!(select_method(&s, MethodChoice::Auto).unwrap(), Method::Oligopoly);
    }

    #[test]
    fn auto_picks_potential_for_linear_prices() {
        // Integral but coupled costs fall through to the continuous rule.
        let s = scenario(LINEAR, COUPLED, true);
        assert_eq!(select_method(&s, MethodChoice::Auto).unwrap(), Method::Potential);
        let s = scenario(LINEAR, SEPARABLE, false);
        assert_eq!(select_method(&s, MethodChoice::Auto).unwrap(), Method::Potential);
    }

    #[test]
    fn auto_picks_nlcp_otherwise() {
        let s = scenario(CUBIC, SEPARABLE, false);
        assert_eq!(select_method(&s, MethodChoice::Auto).unwrap(), Method::Nlcp);
    }

    #[test]
    fn explicit_methods_are_checked() {
        let cubic = scenario(CUBIC, COUPLED, false);
        assert!(matches!(
            select_method(&cubic, MethodChoice::Potential),
            Err(CliError::Inapplicable { method: "potential", .. })
        ));
        assert!(matches!(
            select_method(&cubic, MethodChoice::Oligopoly),
            Err(CliError::Inapplicable { method: "oligopoly", .. })
        ));
        let table = scenario(TABLE, SEPARABLE, false);
        assert!(select_method(&table, MethodChoice::Nlcp).is_err());
        assert_eq!(select_method(&table, MethodChoice::Auto).unwrap(), Method::Oligopoly);
        let coupled_table = scenario(TABLE, COUPLED, false);
        assert!(select_method(&coupled_table, MethodChoice::Auto).is_err());
    }

    #[test]
    fn solve_report_reverifies_identically() {
        for (price, cost, integral) in [(LINEAR, COUPLED, false), (CUBIC, SEPARABLE, false), (LINEAR, SEPARABLE, true)] {
            let s = scenario(price, cost, integral);
            let report = solve_scenario(&s, MethodChoice::Auto, &SolveOptions::default()).unwrap();
            assert!(report.verified(), "{report:?}");
            let (q, mode) = parse_quantities(&crate::report::to_json(&report)).unwrap();
            let again = verify_quantities(&s, &q, mode.unwrap(), SolveOptions::default().verify_tol)
                .unwrap()
                .rounded();
            assert_eq!(Some(again), report.verification);
        }
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let s = scenario(LINEAR, COUPLED, false);
        assert!(matches!(
            verify_quantities(&s, &[0.0], VerifyMode::Continuous, 1e-6.into()),
            Err(CliError::Shape { expected: 3, got: 1 })
        ));
    }
}
