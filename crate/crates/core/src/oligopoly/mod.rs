//! Single-market Cournot oligopoly with integral quantities.
//!
//! Firm `i` producing `q_i` when the market total is `Q` earns
//! `pi_i(q_i, Q) = P(Q) q_i - c_i(q_i)`. Its marginal profit for one more unit
//! is `f_i(q_i, Q) = pi_i(q_i + 1, Q + 1) - pi_i(q_i, Q)`, which is
//! nonincreasing in both arguments when `P` is decreasing and concave and
//! `c_i` is convex. That monotonicity lets the solver binary search, for a
//! guessed total `Q`, each firm's interval of consistent quantities, and then
//! binary search the total itself.
//!
//! `P`, `c_i`, `pi_i` and `f_i` are zero at negative arguments.

mod decompose;
mod value;

pub use decompose::{
    decompose_separable, default_q_cap, price_schedule, separable_markets, solve_markets, solve_network_integral,
    IntegralNetworkSolution, MarketOligopoly,
};
pub use value::{Rational, Value};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OligopolyError {
    #[error("oligopoly needs at least one firm")]
    NoFirms,
    #[error("evaluation ceiling must be at least 1, got {0}")]
    BadCeiling(i64),
    #[error("price schedule is not decreasing and concave: {0}")]
    BadPrice(String),
    #[error("cost schedule of firm {firm} is not convex with c(0) = 0: {reason}")]
    BadCost { firm: usize, reason: String },
    #[error("table has {len} entries, needs {needed} to cover the evaluation ceiling")]
    TableTooShort { len: usize, needed: usize },
    #[error("argument {arg} is outside the evaluated range [0, {limit}]")]
    OutOfRange { arg: i64, limit: i64 },
    #[error("sum of monopoly optima {needed} exceeds the evaluation ceiling {q_cap}")]
    CeilingTooLow { needed: i64, q_cap: i64 },
    #[error("firm {0} is out of range")]
    NoSuchFirm(usize),
    #[error("no filling of the response ranges sums to {total}")]
    Infeasible { total: i64 },
    #[error("cost of firm {firm} couples several markets")]
    NotSeparable { firm: usize },
}

/// Inverse demand evaluated at integer totals.
#[derive(Debug, Clone, PartialEq)]
pub enum PriceSchedule {
    /// `P(Q) = a - b Q - c Q^2 - d Q^3` with `b, c, d >= 0`.
    Polynomial { a: Value, b: Value, c: Value, d: Value },
    /// `P(Q) = a - b (Q + 1) ln(Q + 1)` with `b >= 0`.
    Entropy { a: f64, b: f64 },
    /// Explicit values `P(0), P(1), ...`.
    Table(Vec<Value>),
}

impl PriceSchedule {
    pub fn linear(a: impl Into<Value>, b: impl Into<Value>) -> Self {
        PriceSchedule::Polynomial {
            a: a.into(),
            b: b.into(),
            c: Value::ZERO,
            d: Value::ZERO,
        }
    }

    pub fn table(values: impl IntoIterator<Item = f64>) -> Self {
        PriceSchedule::Table(values.into_iter().map(Value::from_f64).collect())
    }

    fn eval(&self, total: i64) -> Value {
        if total < 0 {
            return Value::ZERO;
        }
        match self {
            PriceSchedule::Polynomial { a, b, c, d } => {
                let x = Value::int(total);
                *a - x * (*b + x * (*c + x * *d))
            }
            PriceSchedule::Entropy { a, b } => {
                let x = total as f64 + 1.0;
                Value::Approx(a - b * x * x.ln())
            }
            PriceSchedule::Table(values) => values[total as usize],
        }
    }

    fn validate(&self, q_cap: i64) -> Result<(), OligopolyError> {
        let bad = |s: String| OligopolyError::BadPrice(s);
        match self {
            PriceSchedule::Polynomial { a, b, c, d } => {
                if [a, b, c, d].iter().any(|v| !v.is_finite()) {
                    return Err(bad("non-finite coefficient".into()));
                }
                if [b, c, d].iter().any(|v| v.is_negative()) {
                    return Err(bad("b, c and d must be nonnegative".into()));
                }
            }
            PriceSchedule::Entropy { a, b } => {
                if !(a.is_finite() && b.is_finite() && *b >= 0.0) {
                    return Err(bad("entropy needs finite a and b >= 0".into()));
                }
            }
            PriceSchedule::Table(values) => {
                let needed = q_cap as usize + 2;
                if values.len() < needed {
                    return Err(OligopolyError::TableTooShort {
                        len: values.len(),
                        needed,
                    });
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(bad("non-finite table entry".into()));
                }
                let mut prev_diff: Option<Value> = None;
                for (k, w) in values.windows(2).enumerate() {
                    let diff = w[1] - w[0];
                    if diff.is_positive() {
                        return Err(bad(format!("P({}) > P({k})", k + 1)));
                    }
                    if let Some(p) = prev_diff {
                        if (diff - p).is_positive() {
                            return Err(bad(format!("forward difference increases at Q = {k}")));
                        }
                    }
                    prev_diff = Some(diff);
                }
            }
        }
        Ok(())
    }
}

/// Production cost of one firm evaluated at integer quantities.
#[derive(Debug, Clone, PartialEq)]
pub enum CostSchedule {
    /// `c(q) = linear q + quadratic q^2`, both coefficients nonnegative.
    Polynomial { linear: Value, quadratic: Value },
    /// Explicit values `c(0) = 0, c(1), ...`.
    Table(Vec<Value>),
}

impl CostSchedule {
    pub fn polynomial(linear: impl Into<Value>, quadratic: impl Into<Value>) -> Self {
        CostSchedule::Polynomial {
            linear: linear.into(),
            quadratic: quadratic.into(),
        }
    }

    pub fn table(values: impl IntoIterator<Item = f64>) -> Self {
        CostSchedule::Table(values.into_iter().map(Value::from_f64).collect())
    }

    fn eval(&self, q: i64) -> Value {
        if q < 0 {
            return Value::ZERO;
        }
        match self {
            CostSchedule::Polynomial { linear, quadratic } => {
                let x = Value::int(q);
                x * (*linear + x * *quadratic)
            }
            CostSchedule::Table(values) => values[q as usize],
        }
    }

    fn validate(&self, firm: usize, q_cap: i64) -> Result<(), OligopolyError> {
        let bad = |reason: String| OligopolyError::BadCost { firm, reason };
        match self {
            CostSchedule::Polynomial { linear, quadratic } => {
                if !(linear.is_finite() && quadratic.is_finite()) {
                    return Err(bad("non-finite coefficient".into()));
                }
                if linear.is_negative() || quadratic.is_negative() {
                    return Err(bad("coefficients must be nonnegative".into()));
                }
            }
            CostSchedule::Table(values) => {
                let needed = q_cap as usize + 2;
                if values.len() < needed {
                    return Err(OligopolyError::TableTooShort {
                        len: values.len(),
                        needed,
                    });
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(bad("non-finite table entry".into()));
                }
                if values[0] != Value::ZERO {
                    return Err(bad("c(0) must be 0".into()));
                }
                let mut prev_diff: Option<Value> = None;
                for (k, w) in values.windows(2).enumerate() {
                    let diff = w[1] - w[0];
                    if let Some(p) = prev_diff {
                        if (p - diff).is_positive() {
                            return Err(bad(format!("marginal cost decreases at q = {k}")));
                        }
                    }
                    prev_diff = Some(diff);
                }
            }
        }
        Ok(())
    }
}

/// A single-market integral Cournot instance. Prices and costs are evaluated
/// on `{0, ..., q_cap + 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Oligopoly {
    price: PriceSchedule,
    costs: Vec<CostSchedule>,
    q_cap: i64,
}

/// Consecutive quantities `{lower, ..., upper}`; empty when `lower > upper`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResponseRange {
    pub lower: i64,
    pub upper: i64,
}

impl ResponseRange {
    pub fn is_empty(&self) -> bool {
        self.lower > self.upper
    }

    pub fn contains(&self, q: i64) -> bool {
        self.lower <= q && q <= self.upper
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OligopolyOutcome {
    Equilibrium { quantities: Vec<i64>, total: i64 },
    NoEquilibrium,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OligopolySolution {
    pub outcome: OligopolyOutcome,
    /// Monopoly optimum of every firm.
    pub monopoly: Vec<i64>,
    /// Upper end of the outer search, the sum of monopoly optima.
    pub q_max: i64,
    /// Number of marginal profit evaluations, monopoly searches included.
    pub f_evaluations: u64,
    pub outer_iterations: u32,
}

impl OligopolySolution {
    pub fn quantities(&self) -> Option<&[i64]> {
        match &self.outcome {
            OligopolyOutcome::Equilibrium { quantities, .. } => Some(quantities),
            OligopolyOutcome::NoEquilibrium => None,
        }
    }
}

impl Oligopoly {
    pub fn new(price: PriceSchedule, costs: Vec<CostSchedule>, q_cap: i64) -> Result<Self, OligopolyError> {
        if costs.is_empty() {
            return Err(OligopolyError::NoFirms);
        }
        if q_cap < 1 {
            return Err(OligopolyError::BadCeiling(q_cap));
        }
        price.validate(q_cap)?;
        for (i, c) in costs.iter().enumerate() {
            c.validate(i, q_cap)?;
        }
        Ok(Oligopoly { price, costs, q_cap })
    }

    pub fn n_firms(&self) -> usize {
        self.costs.len()
    }

    pub fn q_cap(&self) -> i64 {
        self.q_cap
    }

    pub fn price(&self) -> &PriceSchedule {
        &self.price
    }

    pub fn costs(&self) -> &[CostSchedule] {
        &self.costs
    }

    fn check_firm(&self, firm: usize) -> Result<(), OligopolyError> {
        if firm >= self.costs.len() {
            Err(OligopolyError::NoSuchFirm(firm))
        } else {
            Ok(())
        }
    }

    fn check_arg(&self, arg: i64, limit: i64) -> Result<(), OligopolyError> {
        if arg > limit {
            Err(OligopolyError::OutOfRange { arg, limit })
        } else {
            Ok(())
        }
    }

    /// `P(Q)`, for `Q <= q_cap + 1`.
    pub fn price_at(&self, total: i64) -> Result<Value, OligopolyError> {
        self.check_arg(total, self.q_cap + 1)?;
        Ok(self.price.eval(total))
    }

    /// `c_i(q)`, for `q <= q_cap + 1`.
    pub fn cost_at(&self, firm: usize, q: i64) -> Result<Value, OligopolyError> {
        self.check_firm(firm)?;
        self.check_arg(q, self.q_cap + 1)?;
        Ok(self.costs[firm].eval(q))
    }

    /// `pi_i(q_i, Q) = P(Q) q_i - c_i(q_i)`.
    pub fn profit_at(&self, firm: usize, q: i64, total: i64) -> Result<Value, OligopolyError> {
        self.check_firm(firm)?;
        self.check_arg(q, self.q_cap + 1)?;
        self.check_arg(total, self.q_cap + 1)?;
        Ok(self.profit_unchecked(firm, q, total))
    }

    fn profit_unchecked(&self, firm: usize, q: i64, total: i64) -> Value {
        if q < 0 || total < 0 {
            return Value::ZERO;
        }
        self.price.eval(total) * Value::int(q) - self.costs[firm].eval(q)
    }

    /// `f_i(q, Q) = P(Q+1) + (P(Q+1) - P(Q)) q - (c_i(q+1) - c_i(q))`.
    fn marginal_unchecked(&self, firm: usize, q: i64, total: i64) -> Value {
        if q < 0 || total < 0 {
            return Value::ZERO;
        }
        let next = self.price.eval(total + 1);
        let slope = next - self.price.eval(total);
        let cost = &self.costs[firm];
        next + slope * Value::int(q) - (cost.eval(q + 1) - cost.eval(q))
    }

    /// `F_i(q, Q) = P(Q+1) q + (P'(Q)/2)(q - 1/2)^2 - c_i(q)`, whose first
    /// difference in `q` is `f_i(q, Q)`.
    pub fn response_objective(&self, firm: usize, q: i64, total: i64) -> Result<Value, OligopolyError> {
        self.check_firm(firm)?;
        self.check_arg(q, self.q_cap + 1)?;
        self.check_arg(total, self.q_cap)?;
        if q < 0 || total < 0 {
            return Ok(Value::ZERO);
        }
        let next = self.price.eval(total + 1);
        let slope = next - self.price.eval(total);
        let shifted = Value::int(2 * q - 1) * Value::ratio(1, 2);
        Ok(next * Value::int(q) + (slope * shifted * shifted).half() - self.costs[firm].eval(q))
    }

    /// `G_i(q, Q) = F_i(q, Q - 1)`.
    pub fn lagged_response_objective(&self, firm: usize, q: i64, total: i64) -> Result<Value, OligopolyError> {
        self.response_objective(firm, q, total - 1)
    }
}

/// `f_i(q_i, Q)`: marginal profit of firm `i` for one more unit.
pub fn marginal_profit_i(olig: &Oligopoly, firm: usize, q: i64, total: i64) -> Result<Value, OligopolyError> {
    olig.check_firm(firm)?;
    olig.check_arg(q, olig.q_cap)?;
    olig.check_arg(total, olig.q_cap)?;
    Ok(olig.marginal_unchecked(firm, q, total))
}

/// Counts marginal profit evaluations.
struct Search<'a> {
    olig: &'a Oligopoly,
    evals: u64,
}

impl<'a> Search<'a> {
    fn new(olig: &'a Oligopoly) -> Self {
        Search { olig, evals: 0 }
    }

    fn f(&mut self, firm: usize, q: i64, total: i64) -> Value {
        self.evals += 1;
        self.olig.marginal_unchecked(firm, q, total)
    }

    /// Smallest `q` in `[0, hi]` with `f(q, Q) <= 0`; `hi` if none below it.
    fn lower_bound(&mut self, firm: usize, total: i64, hi: i64) -> i64 {
        let (mut lo, mut hi) = (0, hi);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if self.f(firm, mid, total).is_positive() {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Largest `q` in `[0, hi]` with `f(q - 1, Q - 1) >= 0`. `q = 0` always
    /// qualifies by the negative-argument convention.
    fn upper_bound(&mut self, firm: usize, total: i64, hi: i64) -> i64 {
        let (mut lo, mut hi) = (0, hi);
        while lo < hi {
            let mid = lo + (hi - lo + 1) / 2;
            if self.f(firm, mid - 1, total - 1).is_negative() {
                hi = mid - 1;
            } else {
                lo = mid;
            }
        }
        lo
    }

    /// Minimum maximizer of `pi_i(q, q)`: the first `q` with `f(q, q) <= 0`,
    /// bracketed by doubling so the cost depends on the optimum, not on `q_cap`.
    fn monopoly(&mut self, firm: usize) -> i64 {
        let cap = self.olig.q_cap;
        if !self.f(firm, 0, 0).is_positive() {
            return 0;
        }
        let mut hi = 1;
        while hi < cap && self.f(firm, hi, hi).is_positive() {
            hi = (hi * 2).min(cap);
        }
        let mut lo = hi / 2 + 1;
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if self.f(firm, mid, mid).is_positive() {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        lo
    }
}

/// Best-response range of firm `i` when the market total is `Q`: the
/// smallest `q_l >= 0` with `f_i(q_l, Q) <= 0` and the largest
/// `q_u <= Q + 1` with `f_i(q_u - 1, Q - 1) >= 0`. Empty when the firm would
/// need more than `Q + 1` units.
pub fn best_response_range(olig: &Oligopoly, firm: usize, total: i64) -> Result<ResponseRange, OligopolyError> {
    olig.check_firm(firm)?;
    if total < 0 {
        return Err(OligopolyError::OutOfRange { arg: total, limit: olig.q_cap });
    }
    olig.check_arg(total, olig.q_cap)?;
    let mut search = Search::new(olig);
    Ok(ResponseRange {
        lower: search.lower_bound(firm, total, olig.q_cap),
        upper: search.upper_bound(firm, total, total + 1),
    })
}

/// Like [`best_response_range`] but without the `Q + 1` cap on the upper
/// end: the minimum maximizer of `F_i(., Q)` and the maximum maximizer of
/// `G_i(., Q)` over `{0, ..., q_cap}`.
pub fn maximizer_bounds(olig: &Oligopoly, firm: usize, total: i64) -> Result<ResponseRange, OligopolyError> {
    olig.check_firm(firm)?;
    if total < 0 {
        return Err(OligopolyError::OutOfRange { arg: total, limit: olig.q_cap });
    }
    olig.check_arg(total, olig.q_cap)?;
    let mut search = Search::new(olig);
    Ok(ResponseRange {
        lower: search.lower_bound(firm, total, olig.q_cap),
        upper: search.upper_bound(firm, total, olig.q_cap),
    })
}

/// Quantity firm `i` would produce alone in the market (minimum maximizer of
/// `pi_i(q, q)`), capped at `q_cap`.
pub fn monopoly_optimum(olig: &Oligopoly, firm: usize) -> Result<i64, OligopolyError> {
    olig.check_firm(firm)?;
    Ok(Search::new(olig).monopoly(firm))
}

/// Picks `q_i` in each range summing to `total`. Starting from the lower
/// ends, units go one at a time to the firm with the smallest current
/// quantity that can still grow, lowest index first on ties. Symmetric
/// firms therefore receive equal quantities whenever the total allows it.
pub fn fill_quantities(ranges: &[ResponseRange], total: i64) -> Result<Vec<i64>, OligopolyError> {
    let infeasible = || OligopolyError::Infeasible { total };
    if ranges.iter().any(|r| r.is_empty() || r.lower < 0) {
        return Err(infeasible());
    }
    let low: i64 = ranges.iter().map(|r| r.lower).sum();
    let high: i64 = ranges.iter().map(|r| r.upper).sum();
    if total < low || total > high {
        return Err(infeasible());
    }
    // Water level: the largest L with sum_i clamp(L, l_i, u_i) <= total.
    let filled = |level: i64| -> i64 { ranges.iter().map(|r| level.clamp(r.lower, r.upper)).sum() };
    let (mut lo, mut hi) = (0, ranges.iter().map(|r| r.upper).max().unwrap_or(0));
    while lo < hi {
        let mid = lo + (hi - lo + 1) / 2;
        if filled(mid) <= total {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    let mut remaining = total - filled(lo);
    Ok(ranges
        .iter()
        .map(|r| {
            let q = lo.clamp(r.lower, r.upper);
            if remaining > 0 && r.lower <= lo && lo < r.upper {
                remaining -= 1;
                q + 1
            } else {
                q
            }
        })
        .collect())
}

/// Integral equilibrium by nested binary search over the market total.
pub fn solve_oligopoly(olig: &Oligopoly) -> Result<OligopolySolution, OligopolyError> {
    let n = olig.n_firms();
    let mut search = Search::new(olig);
    let monopoly: Vec<i64> = (0..n).map(|i| search.monopoly(i)).collect();
    let q_max: i64 = monopoly.iter().sum();
    if q_max > olig.q_cap {
        return Err(OligopolyError::CeilingTooLow {
            needed: q_max,
            q_cap: olig.q_cap,
        });
    }

    let finish = |outcome, search: &Search, outer| OligopolySolution {
        outcome,
        monopoly: monopoly.clone(),
        q_max,
        f_evaluations: search.evals,
        outer_iterations: outer,
    };

    // The outer search starts at Q = 1, so the all-zero profile is tested here.
    if (0..n).all(|i| !search.f(i, 0, 0).is_positive()) {
        let outcome = OligopolyOutcome::Equilibrium {
            quantities: vec![0; n],
            total: 0,
        };
        return Ok(finish(outcome, &search, 0));
    }

    let (mut lo, mut hi) = (1i64, q_max);
    let mut outer = 0u32;
    let mut ranges = Vec::with_capacity(n);
    while lo <= hi {
        outer += 1;
        let total = lo + (hi - lo) / 2;
        ranges.clear();
        for i in 0..n {
            let lower = search.lower_bound(i, total, q_max);
            let upper = search.upper_bound(i, total, total + 1);
            ranges.push(ResponseRange { lower, upper });
        }
        let sum_lower: i64 = ranges.iter().map(|r| r.lower).sum();
        let sum_upper: i64 = ranges.iter().map(|r| r.upper).sum();
        if sum_lower > total {
            lo = total + 1;
        } else if sum_upper < total {
            hi = total - 1;
        } else {
            let quantities = fill_quantities(&ranges, total)?;
            let outcome = OligopolyOutcome::Equilibrium { quantities, total };
            return Ok(finish(outcome, &search, outer));
        }
    }
    Ok(finish(OligopolyOutcome::NoEquilibrium, &search, outer))
}
