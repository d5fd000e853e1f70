use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cournot_cli::bench::{bench_csv, run_bench, threads_from_env, Suite};
use cournot_cli::error::{EXIT_FAILURE, EXIT_INPUT, EXIT_NO_EQUILIBRIUM, EXIT_OK};
use cournot_cli::gen::{generate, CostKind, GenOptions, PriceKind};
use cournot_cli::report::{self, Outcome};
use cournot_cli::scenario::SCHEMA_VERSION;
use cournot_cli::{
    parse_quantities, select_method, solve_scenario, verify_quantities, CliError, Format, MethodChoice, Scenario,
    SolveOptions, VerifyMode,
};
use cournot_core::nlcp::{check_monotone_revenue, uniform_grid};
use cournot_core::verify::Tolerance;
use serde::Serialize;

/// Pure Nash equilibria of Cournot competition on firm-market networks.
#[derive(Parser)]
#[command(name = "cournot", version, about, long_about = None)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a scenario and verify the result.
    Solve(SolveArgs),
    /// Check whether given quantities form an equilibrium of a scenario.
    Verify(VerifyArgs),
    /// Write a seeded random scenario.
    Gen(GenArgs),
    /// Run benchmark suites and print CSV.
    Bench(BenchArgs),
    /// Print supported kinds, or the properties of a scenario.
    Info(InfoArgs),
}

#[derive(Args)]
struct Output {
    /// Also write a machine-readable copy (JSON, or CSV with --format csv).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Format of the report printed on stdout.
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

#[derive(Args)]
struct SolveArgs {
    scenario: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodChoice::Auto)]
    method: MethodChoice,
    /// Solver tolerance (stationarity for potential, mu for nlcp).
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Tolerance of the verification run after solving.
    #[arg(long, default_value_t = 1e-6)]
    verify_tol: f64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct VerifyArgs {
    scenario: PathBuf,
    /// JSON array of per-edge quantities in canonical order, or a solve report.
    quantities: PathBuf,
    /// Residual and deviation-gain tolerance.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Check integer deviations instead of the continuous conditions.
    #[arg(long)]
    integral: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2)]
    firms: usize,
    #[arg(long, default_value_t = 2)]
    markets: usize,
    /// Probability of each firm-market edge before the connectivity fix-up.
    #[arg(long, default_value_t = 1.0)]
    density: f64,
    #[arg(long, value_enum, default_value_t = PriceKind::Linear)]
    prices: PriceKind,
    #[arg(long, value_enum, default_value_t = CostKind::QuadraticTotal)]
    costs: CostKind,
    /// Keep every cost Hessian at least 0.1 I.
    #[arg(long)]
    strict: bool,
    /// Mark the scenario as integral.
    #[arg(long)]
    integral: bool,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Suite to run; repeat for several. No suite prints the header only.
    #[arg(long, value_enum)]
    suite: Vec<Suite>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InfoArgs {
    scenario: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn emit(output: &Output, stdout: String, machine: impl Fn(Format) -> String) -> Result<(), CliError> {
    print!("{stdout}");
    if let Some(path) = &output.out {
        let format = if output.format == Format::Csv { Format::Csv } else { Format::Json };
        write_file(path, &machine(format))?;
    }
    Ok(())
}

fn solve(args: SolveArgs) -> Result<i32, CliError> {
    let s = Scenario::load(&args.scenario)?;
    let opts = SolveOptions {
        tol: args.tol,
        max_iters: args.max_iters,
        verify_tol: args.verify_tol.into(),
    };
    let r = solve_scenario(&s, args.method, &opts)?;
    emit(&args.output, report::render_report(&r, args.output.format), |f| {
        report::render_report(&r, f)
    })?;
    Ok(match (r.outcome, r.verified()) {
        (Outcome::NoEquilibrium, _) => EXIT_NO_EQUILIBRIUM,
        (Outcome::Equilibrium, true) => EXIT_OK,
        (Outcome::Equilibrium, false) => EXIT_FAILURE,
    })
}

fn verify(args: VerifyArgs) -> Result<i32, CliError> {
    let s = Scenario::load(&args.scenario)?;
    let (q, report_mode) = parse_quantities(&read_file(&args.quantities)?)?;
    let mode = if args.integral || s.has_tables() {
        VerifyMode::Integral
    } else {
        report_mode.unwrap_or(if s.integral() { VerifyMode::Integral } else { VerifyMode::Continuous })
    };
    let tol: Tolerance = args.tol.into();
    let summary = verify_quantities(&s, &q, mode, tol)?.rounded();
    emit(&args.output, report::render_verify(&summary, args.output.format), |f| {
        report::render_verify(&summary, f)
    })?;
    Ok(if summary.verdict { EXIT_OK } else { EXIT_FAILURE })
}

fn gen(args: GenArgs) -> Result<i32, CliError> {
    let opts = GenOptions {
        seed: args.seed,
        n_firms: args.firms,
        n_markets: args.markets,
        density: args.density,
        prices: args.prices,
        costs: args.costs,
        strictly_convex: args.strict,
        integral: args.integral,
    };
    let text = generate(&opts)?.to_json();
    match &args.out {
        Some(path) => write_file(path, &text)?,
        None => print!("{text}"),
    }
    Ok(EXIT_OK)
}

fn bench(args: BenchArgs) -> Result<i32, CliError> {
    let rows = run_bench(&args.suite, args.seed, threads_from_env()?)?;
    let text = bench_csv(&rows);
    print!("{text}");
    if let Some(path) = &args.out {
        write_file(path, &text)?;
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct ScenarioInfo {
    markets: usize,
    firms: usize,
    edges: usize,
    integral: bool,
    table_prices: bool,
    all_prices_linear: bool,
    separable_costs: bool,
    auto_method: Option<&'static str>,
    monotone_revenue: Option<bool>,
    worst_revenue_margin: Option<f64>,
}

#[derive(Serialize)]
struct ToolInfo {
    version: &'static str,
    schema_version: u32,
    methods: [&'static str; 4],
    price_kinds: [&'static str; 5],
    cost_kinds: [&'static str; 3],
}

fn info(args: InfoArgs) -> Result<i32, CliError> {
    let Some(path) = args.scenario else {
        let tool = ToolInfo {
            version: env!("CARGO_PKG_VERSION"),
            schema_version: SCHEMA_VERSION,
            methods: ["auto", "potential", "nlcp", "oligopoly"],
            price_kinds: ["linear", "quadratic", "cubic", "entropy", "table"],
            cost_kinds: ["quadratic_total", "separable_quadratic", "quadratic_form"],
        };
        match args.format {
            Format::Table => {
                println!("cournot {}", tool.version);
                println!("schema_version  {}", tool.schema_version);
                println!("methods         {}", tool.methods.join(", "));
                println!("price kinds     {}", tool.price_kinds.join(", "));
                println!("cost kinds      {}", tool.cost_kinds.join(", "));
            }
            _ => print!("{}", report::to_json(&tool)),
        }
        return Ok(EXIT_OK);
    };
    let s = Scenario::load(&path)?;
    let certificate = s
        .network()
        .map(|net| check_monotone_revenue(net, &uniform_grid(net)).map_err(|e| CliError::Solver(e.to_string())))
        .transpose()?;
    let info = ScenarioInfo {
        markets: s.file().markets.len(),
        firms: s.file().firms.len(),
        edges: s.n_edges(),
        integral: s.integral(),
        table_prices: s.has_tables(),
        all_prices_linear: s.network().is_some_and(|n| n.all_prices_linear()),
        separable_costs: s.integral_markets().is_ok(),
        auto_method: select_method(&s, MethodChoice::Auto).ok().map(|m| m.as_str()),
        monotone_revenue: certificate.as_ref().map(|c| c.condition_holds),
        worst_revenue_margin: certificate.as_ref().map(|c| report::round_sig(c.worst_margin, 12)),
    };
    match args.format {
        Format::Table => {
            let show = |x: Option<String>| x.unwrap_or_else(|| "-".into());
            let rows = [
                ("markets", info.markets.to_string()),
                ("firms", info.firms.to_string()),
                ("edges", info.edges.to_string()),
                ("integral", info.integral.to_string()),
                ("table prices", info.table_prices.to_string()),
                ("all prices linear", info.all_prices_linear.to_string()),
                ("separable costs", info.separable_costs.to_string()),
                ("auto method", show(info.auto_method.map(String::from))),
                ("monotone revenue", show(info.monotone_revenue.map(|b| b.to_string()))),
                (
                    "worst revenue margin",
                    show(info.worst_revenue_margin.map(|m| report::fmt_sig(m, report::TABLE_DIGITS))),
                ),
            ];
            for (k, v) in rows {
                println!("{k:<22} {v}");
            }
        }
        _ => print!("{}", report::to_json(&info)),
    }
    Ok(EXIT_OK)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Help and version requests are not errors.
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT as u8 } else { EXIT_OK as u8 });
        }
    };
    let result = match cli.command {
        Command::Solve(a) => solve(a),
        Command::Verify(a) => verify(a),
        Command::Gen(a) => gen(a),
        Command::Bench(a) => bench(a),
        Command::Info(a) => info(a),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
