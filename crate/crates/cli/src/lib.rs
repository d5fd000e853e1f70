//! Command-line front end for `cournot-core`: scenario files, solver
//! dispatch, verification, scenario generation and benchmarks.

pub mod bench;
pub mod dispatch;
pub mod error;
pub mod gen;
pub mod report;
pub mod scenario;

pub use dispatch::{parse_quantities, select_method, solve_scenario, verify_quantities, MethodChoice, SolveOptions};
pub use error::CliError;
pub use report::{Format, ResultReport, VerifyMode, VerifySummary};
pub use scenario::{Scenario, ScenarioError, ScenarioFile};
