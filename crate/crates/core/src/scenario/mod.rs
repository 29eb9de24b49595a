//! Configured experiments: loading, running and reporting.

mod config;
mod report;
mod run;

pub use config::{
    load_config, parse_config, AffineOracleParams, ConfigError, CounterexampleParams, CouplingParams, ErgodicParams,
    FddParams, HittingParams, IntegratorParams, LawParams, MetricParams, ModelConfig, ScenarioConfig, SchemaIssue,
    ValidateParams, VariationParams,
};
pub use report::{
    aggregate_reports, rows_from_csv, rows_to_csv, Aggregate, Check, MetricRow, Provenance, ReadRowsError, RunReport,
    Stderr, CSV_HEADER,
};
pub use run::{configured_suites, run_counterexample, run_scenario, run_suites, RunError, Suite, Z};
