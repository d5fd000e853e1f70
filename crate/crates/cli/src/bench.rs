//! Benchmark suites: operation counts and wall time of the integral and
//! interior-point solvers on seeded instances.

use std::time::Instant;

use clap::ValueEnum;
use cournot_core::generate::{random_network, CostFamily, NetworkSpec, PriceFamily};
use cournot_core::nlcp::{solve_ncp, NcpConfig, NcpProblem};
use cournot_core::oligopoly::{solve_oligopoly, CostSchedule, Oligopoly, PriceSchedule};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::CliError;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "COURNOT_THREADS";

pub const OLIGOPOLY_SIZES: [usize; 3] = [10, 100, 1000];
/// Target for the sum of monopoly optima in the oligopoly suite.
pub const OLIGOPOLY_Q_MAX: i64 = 1_000_000;
pub const NLCP_EDGES: [usize; 3] = [4, 16, 64];

pub const CSV_HEADER: [&str; 7] = ["suite", "size", "method", "iterations", "f_evals", "wall_time_s", "q_max"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum Suite {
    Oligopoly,
    Nlcp,
}

impl Suite {
    pub fn as_str(self) -> &'static str {
        match self {
            Suite::Oligopoly => "oligopoly",
            Suite::Nlcp => "nlcp",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub suite: Suite,
    /// Firms for the oligopoly suite, edges for the nlcp suite.
    pub size: usize,
    pub method: &'static str,
    pub iterations: u64,
    pub f_evals: u64,
    pub wall_time_s: f64,
    /// Sum of monopoly optima, oligopoly suite only.
    pub q_max: Option<i64>,
}

/// Linear oligopoly `P(Q) = a - Q`, `c_i(q) = g_i q` with `a` chosen so the
/// monopoly optima sum to roughly `q_max`.
pub fn oligopoly_instance(n: usize, q_max: i64, seed: u64) -> Oligopoly {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = 2 * q_max / n as i64 + 1000;
    let costs = (0..n)
        .map(|_| CostSchedule::polynomial(rng.gen_range(0..2000i64), 0))
        .collect();
    Oligopoly::new(PriceSchedule::linear(a, 1), costs, 2 * q_max + a).expect("valid by construction")
}

/// Full bipartite linear-price network with about `edges` edges and
/// strictly convex costs.
pub fn nlcp_instance(edges: usize, seed: u64) -> cournot_core::MarketNetwork {
    let side = ((edges as f64).sqrt().round() as usize).max(1);
    let spec = NetworkSpec {
        prices: PriceFamily::Linear,
        costs: CostFamily::SeparableQuadratic,
        strictly_convex: true,
        ..NetworkSpec::new(side, side)
    };
    random_network(&mut ChaCha8Rng::seed_from_u64(seed), &spec).expect("valid by construction")
}

fn run_one(suite: Suite, size: usize, seed: u64) -> Result<BenchRow, CliError> {
    let instance_seed = seed ^ (size as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    match suite {
        Suite::Oligopoly => {
            let olig = oligopoly_instance(size, OLIGOPOLY_Q_MAX, instance_seed);
            let start = Instant::now();
            let sol = solve_oligopoly(&olig).map_err(|e| CliError::Solver(e.to_string()))?;
            Ok(BenchRow {
                suite,
                size,
                method: "oligopoly",
                iterations: sol.outer_iterations as u64,
                f_evals: sol.f_evaluations,
                wall_time_s: start.elapsed().as_secs_f64(),
                q_max: Some(sol.q_max),
            })
        }
        Suite::Nlcp => {
            let net = nlcp_instance(size, instance_seed);
            let start = Instant::now();
            let r = solve_ncp(&NcpProblem::new(&net), &NcpConfig::default())
                .map_err(|e| CliError::Solver(e.to_string()))?;
            Ok(BenchRow {
                suite,
                size: net.n_edges(),
                method: "nlcp",
                iterations: r.iterations as u64,
                f_evals: r.f_evaluations,
                wall_time_s: start.elapsed().as_secs_f64(),
                q_max: None,
            })
        }
    }
}

/// Thread cap from [`THREADS_ENV`], if set.
pub fn threads_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
    }
}

/// Runs every instance of `suites` on up to `threads` workers. Rows come
/// back sorted by suite, size and method whatever the completion order.
pub fn run_bench(suites: &[Suite], seed: u64, threads: Option<usize>) -> Result<Vec<BenchRow>, CliError> {
    let mut tasks = Vec::new();
    for &suite in suites {
        let sizes: &[usize] = match suite {
            Suite::Oligopoly => &OLIGOPOLY_SIZES,
            Suite::Nlcp => &NLCP_EDGES,
        };
        tasks.extend(sizes.iter().map(|&size| (suite, size)));
    }
    tasks.sort();
    tasks.dedup();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Usage(e.to_string()))?;
    let mut rows = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(suite, size)| run_one(suite, size, seed))
            .collect::<Result<Vec<_>, _>>()
    })?;
    rows.sort_by(|a, b| (a.suite, a.size, a.method).cmp(&(b.suite, b.size, b.method)));
    Ok(rows)
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("write to memory");
    for r in rows {
        w.write_record([
            r.suite.as_str().to_string(),
            r.size.to_string(),
            r.method.to_string(),
            r.iterations.to_string(),
            r.f_evals.to_string(),
            format!("{:.6}", r.wall_time_s),
            r.q_max.map(|q| q.to_string()).unwrap_or_default(),
        ])
        .expect("write to memory");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv is utf-8")
}
