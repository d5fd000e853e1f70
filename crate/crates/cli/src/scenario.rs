//! Scenario files: JSON description of a network, its validation into a
//! `MarketNetwork`, and canonical re-serialization.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use cournot_core::model::{build_network, CostFunction, Edge, MarketNetwork, ModelError, PriceFunction};
use cournot_core::oligopoly::{
    default_q_cap, price_schedule, separable_markets, CostSchedule, MarketOligopoly, Oligopoly, OligopolyError,
    PriceSchedule,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    /// Malformed JSON or a field of the wrong shape.
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    /// Well-formed file describing an invalid network.
    #[error("{path}: {reason}")]
    Invalid { path: String, reason: String },
}

fn invalid(path: impl Into<String>, reason: impl fmt::Display) -> ScenarioError {
    ScenarioError::Invalid {
        path: path.into(),
        reason: reason.to_string(),
    }
}

/// Market or firm identifier, either a number or a name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Id {
    Num(u64),
    Name(String),
}

impl fmt::Display for Id {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Id::Num(n) => write!(f, "{n}"),
            Id::Name(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriceSpec {
    Linear {
        alpha: f64,
        beta: f64,
    },
    Quadratic {
        a: f64,
        b: f64,
        c: f64,
    },
    Cubic {
        a: f64,
        b: f64,
        c: f64,
        d: f64,
    },
    Entropy {
        a: f64,
        b: f64,
    },
    /// `P(0), P(1), ...` at integer totals; only usable by the integral solver.
    Table {
        values: Vec<f64>,
    },
}

impl PriceSpec {
    pub fn function(&self) -> Option<PriceFunction> {
        Some(match *self {
            PriceSpec::Linear { alpha, beta } => PriceFunction::Linear { alpha, beta },
            PriceSpec::Quadratic { a, b, c } => PriceFunction::Quadratic { a, b, c },
            PriceSpec::Cubic { a, b, c, d } => PriceFunction::Cubic { a, b, c, d },
            PriceSpec::Entropy { a, b } => PriceFunction::Entropy { a, b },
            PriceSpec::Table { .. } => return None,
        })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            PriceSpec::Linear { .. } => "linear",
            PriceSpec::Quadratic { .. } => "quadratic",
            PriceSpec::Cubic { .. } => "cubic",
            PriceSpec::Entropy { .. } => "entropy",
            PriceSpec::Table { .. } => "table",
        }
    }
}

impl From<&PriceFunction> for PriceSpec {
    fn from(p: &PriceFunction) -> Self {
        match *p {
            PriceFunction::Linear { alpha, beta } => PriceSpec::Linear { alpha, beta },
            PriceFunction::Quadratic { a, b, c } => PriceSpec::Quadratic { a, b, c },
            PriceFunction::Cubic { a, b, c, d } => PriceSpec::Cubic { a, b, c, d },
            PriceFunction::Entropy { a, b } => PriceSpec::Entropy { a, b },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum CostSpec {
    QuadraticTotal { lambda: f64 },
    SeparableQuadratic { lambda: Vec<f64>, mu: Vec<f64> },
    QuadraticForm { a: Vec<Vec<f64>>, b: Vec<f64> },
}

impl From<CostSpec> for CostFunction {
    fn from(c: CostSpec) -> Self {
        match c {
            CostSpec::QuadraticTotal { lambda } => CostFunction::QuadraticTotal { lambda },
            CostSpec::SeparableQuadratic { lambda, mu } => CostFunction::SeparableQuadratic { lambda, mu },
            CostSpec::QuadraticForm { a, b } => CostFunction::QuadraticForm { a, b },
        }
    }
}

impl From<&CostFunction> for CostSpec {
    fn from(c: &CostFunction) -> Self {
        match c.clone() {
            CostFunction::QuadraticTotal { lambda } => CostSpec::QuadraticTotal { lambda },
            CostFunction::SeparableQuadratic { lambda, mu } => CostSpec::SeparableQuadratic { lambda, mu },
            CostFunction::QuadraticForm { a, b } => CostSpec::QuadraticForm { a, b },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSpec {
    pub id: Id,
    pub price: PriceSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FirmSpec {
    pub id: Id,
    pub cost: CostSpec,
}

/// On-disk scenario. Markets and firms are indexed by their position in the
/// file; edges refer to them by id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    pub markets: Vec<MarketSpec>,
    pub firms: Vec<FirmSpec>,
    pub edges: Vec<(Id, Id)>,
    /// Ask for integer quantities.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub integral: bool,
    /// Evaluation ceiling of the integral solver.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_cap: Option<i64>,
}

impl ScenarioFile {
    /// Scenario describing `net`, with ids `0..n` for markets and firms.
    pub fn from_network(net: &MarketNetwork, integral: bool) -> Self {
        ScenarioFile {
            schema_version: SCHEMA_VERSION,
            markets: net
                .prices()
                .iter()
                .enumerate()
                .map(|(i, p)| MarketSpec {
                    id: Id::Num(i as u64),
                    price: p.into(),
                })
                .collect(),
            firms: net
                .costs()
                .iter()
                .enumerate()
                .map(|(j, c)| FirmSpec {
                    id: Id::Num(j as u64),
                    cost: c.into(),
                })
                .collect(),
            edges: net
                .edges()
                .iter()
                .map(|e| (Id::Num(e.market as u64), Id::Num(e.firm as u64)))
                .collect(),
            integral,
            q_cap: None,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scenario serializes");
        s.push('\n');
        s
    }
}

/// A validated scenario: edges in canonical (market, firm) order and, unless
/// some market has a table price, the network itself.
#[derive(Debug, Clone)]
pub struct Scenario {
    file: ScenarioFile,
    edges: Vec<Edge>,
    network: Option<MarketNetwork>,
    costs: Vec<CostFunction>,
}

impl Scenario {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: ScenarioFile = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            ScenarioError::Parse {
                path: if path == "." { "(root)".into() } else { path },
                message: inner.to_string(),
            }
        })?;
        Self::from_file(file)
    }

    pub fn from_file(mut file: ScenarioFile) -> Result<Self, ScenarioError> {
        if file.schema_version != SCHEMA_VERSION {
            return Err(invalid(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, got {}", file.schema_version),
            ));
        }
        let market_index = index_ids(file.markets.iter().map(|m| &m.id), "markets")?;
        let firm_index = index_ids(file.firms.iter().map(|f| &f.id), "firms")?;
        if file.edges.is_empty() {
            return Err(invalid("edges", "no edges"));
        }

        let mut keyed = Vec::with_capacity(file.edges.len());
        for (k, (m, f)) in file.edges.iter().enumerate() {
            let market = *market_index
                .get(m)
                .ok_or_else(|| invalid(format!("edges[{k}][0]"), format!("unknown market id {m}")))?;
            let firm = *firm_index
                .get(f)
                .ok_or_else(|| invalid(format!("edges[{k}][1]"), format!("unknown firm id {f}")))?;
            keyed.push((Edge::new(market, firm), k));
        }
        keyed.sort();
        for w in keyed.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(invalid(format!("edges[{}]", w[1].1), "duplicate edge"));
            }
        }
        let edges: Vec<Edge> = keyed.iter().map(|(e, _)| *e).collect();
        file.edges = keyed.into_iter().map(|(_, k)| file.edges[k].clone()).collect();

        let mut degree = vec![0; file.firms.len()];
        for e in &edges {
            degree[e.firm] += 1;
        }
        let costs: Vec<CostFunction> = file.firms.iter().map(|f| f.cost.clone().into()).collect();
        for (j, c) in costs.iter().enumerate() {
            if degree[j] == 0 {
                return Err(invalid(format!("firms[{j}]"), "firm has no edges"));
            }
            c.validate(j, degree[j]).map_err(|e| invalid(format!("firms[{j}].cost"), e))?;
        }
        if let Some(cap) = file.q_cap {
            if cap < 1 {
                return Err(invalid("q_cap", "must be at least 1"));
            }
        }

        let tables = file.markets.iter().any(|m| m.price.function().is_none());
        // Table markets get a linear stand-in so the structural checks still run.
        let prices = file
            .markets
            .iter()
            .map(|m| m.price.function().unwrap_or(PriceFunction::Linear { alpha: 1.0, beta: 1.0 }))
            .collect();
        let net = build_network(file.firms.len(), file.markets.len(), edges.iter().copied(), prices, costs.clone())
            .map_err(network_error)?;

        let scenario = Scenario {
            file,
            edges,
            network: (!tables).then_some(net),
            costs,
        };
        for (i, m) in scenario.file.markets.iter().enumerate() {
            if let PriceSpec::Table { values } = &m.price {
                let cap = scenario.market_q_cap(i);
                let zero = vec![CostSchedule::polynomial(0, 0)];
                Oligopoly::new(PriceSchedule::table(values.iter().copied()), zero, cap)
                    .map_err(|e| invalid(format!("markets[{i}].price.params.values"), e))?;
            }
        }
        Ok(scenario)
    }

    /// The canonical file: edges sorted by (market, firm) position.
    pub fn file(&self) -> &ScenarioFile {
        &self.file
    }

    pub fn to_json(&self) -> String {
        self.file.to_json()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// `None` when some market has a table price.
    pub fn network(&self) -> Option<&MarketNetwork> {
        self.network.as_ref()
    }

    pub fn integral(&self) -> bool {
        self.file.integral
    }

    pub fn has_tables(&self) -> bool {
        self.network.is_none()
    }

    pub fn market_id(&self, i: usize) -> &Id {
        &self.file.markets[i].id
    }

    pub fn firm_id(&self, j: usize) -> &Id {
        &self.file.firms[j].id
    }

    pub fn edge_ids(&self) -> &[(Id, Id)] {
        &self.file.edges
    }

    fn market_q_cap(&self, i: usize) -> i64 {
        if let Some(cap) = self.file.q_cap {
            return cap;
        }
        let n = self.edges.iter().filter(|e| e.market == i).count();
        match &self.file.markets[i].price {
            PriceSpec::Table { values } => values.len() as i64 - 2,
            p => default_q_cap(&p.function().expect("not a table"), n),
        }
    }

    /// One integral oligopoly per market, or `NotSeparable` when a firm's
    /// cost couples its markets.
    pub fn integral_markets(&self) -> Result<Vec<MarketOligopoly>, OligopolyError> {
        let prices = self
            .file
            .markets
            .iter()
            .map(|m| match (&m.price, m.price.function()) {
                (PriceSpec::Table { values }, _) => PriceSchedule::table(values.iter().copied()),
                (_, Some(f)) => price_schedule(&f),
                (_, None) => unreachable!("only tables lack a price function"),
            })
            .collect();
        let caps: Vec<i64> = (0..self.file.markets.len()).map(|i| self.market_q_cap(i)).collect();
        separable_markets(self.file.firms.len(), &self.edges, prices, &self.costs, &caps)
    }
}

fn index_ids<'a>(ids: impl Iterator<Item = &'a Id>, list: &str) -> Result<HashMap<Id, usize>, ScenarioError> {
    let mut index = HashMap::new();
    for (k, id) in ids.enumerate() {
        if index.insert(id.clone(), k).is_some() {
            return Err(invalid(format!("{list}[{k}].id"), format!("duplicate id {id}")));
        }
    }
    if index.is_empty() {
        return Err(invalid(list, "list is empty"));
    }
    Ok(index)
}

fn network_error(e: ModelError) -> ScenarioError {
    match e {
        ModelError::IsolatedMarket(i) => invalid(format!("markets[{i}]"), "market has no edges"),
        ModelError::IsolatedFirm(j) => invalid(format!("firms[{j}]"), "firm has no edges"),
        ModelError::NonDecreasingPrice { market, .. } | ModelError::NonConcavePrice { market, .. } => {
            invalid(format!("markets[{market}].price"), e)
        }
        ModelError::NonConvexCost { firm, .. } | ModelError::CostDimension { firm, .. } => {
            invalid(format!("firms[{firm}].cost"), e)
        }
        other => invalid("(root)", other),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const S1: &str = r#"{
        "schema_version": 1,
        "markets": [{"id": "m", "price": {"kind": "linear", "params": {"alpha": 1, "beta": 1}}}],
        "firms": [
            {"id": "a", "cost": {"kind": "quadratic_total", "params": {"lambda": 1}}},
            {"id": "b", "cost": {"kind": "quadratic_total", "params": {"lambda": 1}}}
        ],
        "edges": [["m", "b"], ["m", "a"]]
    }"#;

    fn error_path(text: &str) -> String {
        match Scenario::parse(text).unwrap_err() {
            ScenarioError::Parse { path, .. } | ScenarioError::Invalid { path, .. } => path,
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn parses_and_orders_edges_canonically() {
        let s = Scenario::parse(S1).unwrap();
        assert_eq!(s.edges(), &[Edge::new(0, 0), Edge::new(0, 1)]);
        assert_eq!(s.edge_ids()[0], (Id::Name("m".into()), Id::Name("a".into())));
        assert!(s.network().is_some());
    }

    #[test]
    fn write_then_parse_is_identity() {
        let s = Scenario::parse(S1).unwrap();
        let again = Scenario::parse(&s.to_json()).unwrap();
        assert_eq!(again.file(), s.file());
        assert_eq!(again.network(), s.network());
        assert_eq!(again.to_json(), s.to_json());
    }

    #[test]
    fn diagnostics_name_the_field() {
        assert_eq!(error_path(&S1.replace("\"alpha\": 1", "\"alpha\": \"x\"")), "markets[0].price.params.alpha");
        assert_eq!(error_path(&S1.replace("\"schema_version\": 1", "\"schema_version\": 2")), "schema_version");
        assert_eq!(error_path(&S1.replace("[\"m\", \"b\"]", "[\"m\", \"z\"]")), "edges[0][1]");
        assert_eq!(error_path(&S1.replace("[\"m\", \"b\"]", "[\"m\", \"a\"]")), "edges[1]");
        assert_eq!(error_path(&S1.replace("\"lambda\": 1}}},", "\"lambda\": -1}}},")), "firms[0].cost");
        assert_eq!(error_path(&S1.replace("\"beta\": 1", "\"beta\": -1")), "markets[0].price");
        assert_eq!(error_path(&S1.replace("\"id\": \"b\"", "\"id\": \"a\"")), "firms[1].id");
        assert_eq!(error_path(&S1.replace("linear", "hyperbolic")), "markets[0].price.kind");
        assert!(error_path(&S1.replace("\"beta\": 1", "\"beta\": 1, \"gamma\": 2")).starts_with("markets[0].price.params"));
    }

    #[test]
    fn table_prices_skip_the_network() {
        let text = S1.replace(
            r#"{"kind": "linear", "params": {"alpha": 1, "beta": 1}}"#,
            r#"{"kind": "table", "params": {"values": [10, 9, 8, 7, 6, 5, 4, 3, 2, 1, 0, -1]}}"#,
        );
        let s = Scenario::parse(&text).unwrap();
        assert!(s.has_tables());
        let parts = s.integral_markets().unwrap();
        assert_eq!(parts[0].oligopoly.q_cap(), 10);

        let increasing = text.replace("[10, 9,", "[8, 9,");
        assert_eq!(error_path(&increasing), "markets[0].price.params.values");
    }
}
