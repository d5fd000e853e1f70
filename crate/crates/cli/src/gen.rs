//! Seeded scenario generation.

use clap::ValueEnum;
use cournot_core::generate::{random_network, CostFamily, NetworkSpec, PriceFamily};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::CliError;
use crate::report::{round_sig, MACHINE_DIGITS};
use crate::scenario::{CostSpec, PriceSpec, Scenario, ScenarioFile};

/// Price families that carry the monotone-revenue certificate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PriceKind {
    Linear,
    Quadratic,
    Cubic,
    Entropy,
    Mixed,
}

impl From<PriceKind> for PriceFamily {
    fn from(k: PriceKind) -> Self {
        match k {
            PriceKind::Linear => PriceFamily::Linear,
            PriceKind::Quadratic => PriceFamily::Quadratic,
            PriceKind::Cubic => PriceFamily::Cubic,
            PriceKind::Entropy => PriceFamily::Entropy,
            PriceKind::Mixed => PriceFamily::Mixed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CostKind {
    QuadraticTotal,
    SeparableQuadratic,
    QuadraticForm,
    Mixed,
}

impl From<CostKind> for CostFamily {
    fn from(k: CostKind) -> Self {
        match k {
            CostKind::QuadraticTotal => CostFamily::QuadraticTotal,
            CostKind::SeparableQuadratic => CostFamily::SeparableQuadratic,
            CostKind::QuadraticForm => CostFamily::QuadraticForm,
            CostKind::Mixed => CostFamily::Mixed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenOptions {
    pub seed: u64,
    pub n_firms: usize,
    pub n_markets: usize,
    pub density: f64,
    pub prices: PriceKind,
    pub costs: CostKind,
    pub strictly_convex: bool,
    pub integral: bool,
}

impl GenOptions {
    pub fn new(seed: u64, n_firms: usize, n_markets: usize) -> Self {
        GenOptions {
            seed,
            n_firms,
            n_markets,
            density: 1.0,
            prices: PriceKind::Linear,
            costs: CostKind::QuadraticTotal,
            strictly_convex: false,
            integral: false,
        }
    }
}

/// A random connected scenario, fully determined by `opts`.
pub fn generate(opts: &GenOptions) -> Result<Scenario, CliError> {
    if !(opts.density > 0.0 && opts.density <= 1.0) {
        return Err(CliError::Usage(format!("density {} must lie in (0, 1]", opts.density)));
    }
    if opts.n_firms == 0 || opts.n_markets == 0 {
        return Err(CliError::Usage("need at least one firm and one market".into()));
    }
    let spec = NetworkSpec {
        density: opts.density,
        prices: opts.prices.into(),
        costs: opts.costs.into(),
        strictly_convex: opts.strictly_convex,
        ..NetworkSpec::new(opts.n_firms, opts.n_markets)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let net = random_network(&mut rng, &spec).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut file = ScenarioFile::from_network(&net, opts.integral);
    tidy(&mut file);
    Ok(Scenario::from_file(file)?)
}

/// Rounds parameters so the file shows `0.3` rather than `0.30000000000000004`.
fn tidy(file: &mut ScenarioFile) {
    let r = |x: &mut f64| *x = round_sig(*x, MACHINE_DIGITS);
    for m in &mut file.markets {
        match &mut m.price {
            PriceSpec::Linear { alpha, beta } => [alpha, beta].into_iter().for_each(r),
            PriceSpec::Quadratic { a, b, c } => [a, b, c].into_iter().for_each(r),
            PriceSpec::Cubic { a, b, c, d } => [a, b, c, d].into_iter().for_each(r),
            PriceSpec::Entropy { a, b } => [a, b].into_iter().for_each(r),
            PriceSpec::Table { values } => values.iter_mut().for_each(r),
        }
    }
    for f in &mut file.firms {
        match &mut f.cost {
            CostSpec::QuadraticTotal { lambda } => r(lambda),
            CostSpec::SeparableQuadratic { lambda, mu } => lambda.iter_mut().chain(mu.iter_mut()).for_each(r),
            CostSpec::QuadraticForm { a, b } => a.iter_mut().flatten().chain(b.iter_mut()).for_each(r),
        }
    }
}
