//! Solve and verification reports, and their JSON, CSV and table renderings.

use std::fmt::Write as _;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use crate::scenario::Id;

/// Significant digits of machine-readable numbers.
pub const MACHINE_DIGITS: usize = 12;
/// Significant digits of human-readable tables.
pub const TABLE_DIGITS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Table,
}

/// `x` rounded to `digits` significant digits.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", digits - 1, x).parse().expect("formatted float parses")
}

/// `x` with `digits` significant digits, in fixed notation when that stays short.
pub fn fmt_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    // Take the exponent after rounding so 0.09999999 prints as 0.1000.
    let x = round_sig(x, digits);
    let exp = x.abs().log10().floor() as i32;
    if (-4..6).contains(&exp) {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{:.*e}", digits - 1, x)
    }
}

/// Shortest text that reads back as `x`, in exponent notation for very
/// small or large magnitudes.
pub fn machine_str(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && !(1e-5..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyMode {
    /// Complementarity residual plus numerical best responses.
    Continuous,
    /// Exhaustive unilateral integer deviations, market by market.
    Integral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifySummary {
    pub mode: VerifyMode,
    pub verdict: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feasible_q: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feasible_f: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub worst_deviation_gain: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Equilibrium,
    NoEquilibrium,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketRow {
    pub id: Id,
    pub demand: f64,
    pub price: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirmRow {
    pub id: Id,
    pub profit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultReport {
    pub method: String,
    pub outcome: Outcome,
    /// `[market_id, firm_id]` per entry of `quantities`, canonical order.
    pub edges: Vec<(Id, Id)>,
    pub quantities: Option<Vec<f64>>,
    pub markets: Vec<MarketRow>,
    pub firms: Vec<FirmRow>,
    /// Markets without an integral equilibrium.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unsolved_markets: Vec<Id>,
    pub mu: Option<f64>,
    pub iterations: u64,
    pub f_evaluations: u64,
    pub converged: bool,
    pub wall_time_s: f64,
    pub verification: Option<VerifySummary>,
}

impl ResultReport {
    pub fn verified(&self) -> bool {
        self.verification.as_ref().is_some_and(|v| v.verdict)
    }

    /// Rounds every float to [`MACHINE_DIGITS`] significant digits.
    pub fn rounded(mut self) -> Self {
        let r = |x: &mut f64| *x = round_sig(*x, MACHINE_DIGITS);
        self.quantities.iter_mut().flatten().for_each(r);
        for m in &mut self.markets {
            r(&mut m.demand);
            r(&mut m.price);
        }
        self.firms.iter_mut().for_each(|f| r(&mut f.profit));
        self.mu.iter_mut().for_each(r);
        r(&mut self.wall_time_s);
        if let Some(v) = &mut self.verification {
            v.round();
        }
        self
    }
}

impl VerifySummary {
    fn round(&mut self) {
        for x in self.mu.iter_mut().chain(self.worst_deviation_gain.iter_mut()) {
            *x = round_sig(*x, MACHINE_DIGITS);
        }
    }

    pub fn rounded(mut self) -> Self {
        self.round();
        self
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn csv_text(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("write to memory");
    for row in rows {
        w.write_record(&row).expect("write to memory");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv is utf-8")
}

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn render_report(report: &ResultReport, format: Format) -> String {
    match format {
        Format::Json => to_json(report),
        Format::Csv => report_csv(report),
        Format::Table => report_table(report),
    }
}

pub fn render_verify(summary: &VerifySummary, format: Format) -> String {
    match format {
        Format::Json => to_json(summary),
        Format::Csv => {
            let rows = verify_fields(summary, machine_str)
                .into_iter()
                .map(|(k, v)| vec![k.to_string(), v])
                .collect();
            csv_text(&["field", "value"], rows)
        }
        Format::Table => {
            let mut out = String::new();
            for (k, v) in verify_fields(summary, |x| fmt_sig(x, TABLE_DIGITS)) {
                writeln!(out, "{k:<22} {v}").unwrap();
            }
            for w in &summary.warnings {
                writeln!(out, "warning: {w}").unwrap();
            }
            out
        }
    }
}

fn verify_fields(v: &VerifySummary, num: impl Fn(f64) -> String) -> Vec<(&'static str, String)> {
    let mode = match v.mode {
        VerifyMode::Continuous => "continuous",
        VerifyMode::Integral => "integral",
    };
    let mut fields = vec![("mode", mode.to_string()), ("verdict", v.verdict.to_string())];
    if let Some(x) = v.feasible_q {
        fields.push(("feasible_q", x.to_string()));
    }
    if let Some(x) = v.feasible_f {
        fields.push(("feasible_f", x.to_string()));
    }
    if let Some(x) = v.mu {
        fields.push(("mu", num(x)));
    }
    if let Some(x) = v.worst_deviation_gain {
        fields.push(("worst_deviation_gain", num(x)));
    }
    fields
}

fn outcome_str(o: Outcome) -> &'static str {
    match o {
        Outcome::Equilibrium => "equilibrium",
        Outcome::NoEquilibrium => "no_equilibrium",
    }
}

fn report_csv(r: &ResultReport) -> String {
    let mut rows = Vec::new();
    let mut push = |record: &str, market: String, firm: String, value: String| {
        rows.push(vec![record.to_string(), market, firm, value]);
    };
    if let Some(q) = &r.quantities {
        for ((m, f), x) in r.edges.iter().zip(q) {
            push("quantity", m.to_string(), f.to_string(), machine_str(*x));
        }
    }
    for m in &r.markets {
        push("demand", m.id.to_string(), String::new(), machine_str(m.demand));
        push("price", m.id.to_string(), String::new(), machine_str(m.price));
    }
    for f in &r.firms {
        push("profit", String::new(), f.id.to_string(), machine_str(f.profit));
    }
    for m in &r.unsolved_markets {
        push("unsolved_market", m.to_string(), String::new(), String::new());
    }
    let summary = [
        ("method", r.method.clone()),
        ("outcome", outcome_str(r.outcome).to_string()),
        ("mu", opt(r.mu.map(machine_str))),
        ("iterations", r.iterations.to_string()),
        ("f_evaluations", r.f_evaluations.to_string()),
        ("converged", r.converged.to_string()),
        ("wall_time_s", machine_str(r.wall_time_s)),
        ("verdict", r.verified().to_string()),
    ];
    for (k, v) in summary {
        push(k, String::new(), String::new(), v);
    }
    csv_text(&["record", "market", "firm", "value"], rows)
}

fn report_table(r: &ResultReport) -> String {
    let n = |x: f64| fmt_sig(x, TABLE_DIGITS);
    let mut out = String::new();
    writeln!(out, "method       {}", r.method).unwrap();
    writeln!(out, "outcome      {}", outcome_str(r.outcome)).unwrap();
    let verdict = match &r.verification {
        Some(v) if v.verdict => "verified",
        Some(_) => "NOT verified",
        None => "-",
    };
    writeln!(out, "verdict      {verdict}").unwrap();
    if let Some(mu) = r.mu {
        writeln!(out, "mu           {}", n(mu)).unwrap();
    }
    writeln!(out, "iterations   {}", r.iterations).unwrap();
    writeln!(out, "f evals      {}", r.f_evaluations).unwrap();
    writeln!(out, "wall time    {} s", n(r.wall_time_s)).unwrap();
    if let Some(q) = &r.quantities {
        writeln!(out, "\n{:<12} {:<12} {:>12}", "market", "firm", "quantity").unwrap();
        for ((m, f), x) in r.edges.iter().zip(q) {
            writeln!(out, "{:<12} {:<12} {:>12}", m.to_string(), f.to_string(), n(*x)).unwrap();
        }
    }
    if !r.markets.is_empty() {
        writeln!(out, "\n{:<12} {:>12} {:>12}", "market", "demand", "price").unwrap();
        for m in &r.markets {
            writeln!(out, "{:<12} {:>12} {:>12}", m.id.to_string(), n(m.demand), n(m.price)).unwrap();
        }
    }
    if !r.firms.is_empty() {
        writeln!(out, "\n{:<12} {:>12}", "firm", "profit").unwrap();
        for f in &r.firms {
            writeln!(out, "{:<12} {:>12}", f.id.to_string(), n(f.profit)).unwrap();
        }
    }
    if !r.unsolved_markets.is_empty() {
        let ids: Vec<String> = r.unsolved_markets.iter().map(Id::to_string).collect();
        writeln!(out, "\nno integral equilibrium in market(s) {}", ids.join(", ")).unwrap();
    }
    if let Some(v) = &r.verification {
        for w in &v.warnings {
            writeln!(out, "warning: {w}").unwrap();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(round_sig(0.1 + 0.2, 12), 0.3);
        assert_eq!(round_sig(123456789.123456789, 4), 123500000.0);
        assert_eq!(fmt_sig(0.25, 4), "0.2500");
        assert_eq!(fmt_sig(0.09375, 4), "0.09375");
        assert_eq!(fmt_sig(1234.5678, 4), "1235");
        assert_eq!(fmt_sig(1.5e-9, 4), "1.500e-9");
        assert_eq!(fmt_sig(0.0, 4), "0");
        assert_eq!(fmt_sig(0.099999999, 4), "0.1000");
        assert_eq!(fmt_sig(9.99996, 4), "10.00");
    }

    #[test]
    fn machine_text_reads_back() {
        for x in [0.25, -1.71256619879e-10, 3.5e20, 0.0, 123.456] {
            assert_eq!(machine_str(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(machine_str(-1.5e-10), "-1.5e-10");
    }

    #[test]
    fn rounding_is_idempotent() {
        for x in [1.0 / 3.0, 2.0f64.sqrt() * 1e7, -7.123456789012345e-5] {
            let once = round_sig(x, MACHINE_DIGITS);
            assert_eq!(round_sig(once, MACHINE_DIGITS), once);
            let text = format!("{once:e}");
            let mantissa = text.split('e').next().unwrap();
            assert!(mantissa.chars().filter(char::is_ascii_digit).count() <= MACHINE_DIGITS, "{text}");
        }
    }
}
