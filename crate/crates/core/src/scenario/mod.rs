//! JSON scenario files: schema, validation, execution and the CSV/JSON artifacts they emit.

mod config;
mod run;

pub use config::{
    Checks, GridSpec, McSpec, ModelSpec, OrderingCheck, OutputSpec, ResolvedVariant, ScenarioConfig, SolverSpec,
    Variant,
};
pub use run::{
    check_invariants, closed_form_c, closed_form_value, fmt_num, run_scenario, run_suite, Artifacts, McRow,
    ScenarioReport, SuiteEntry, SuiteManifest, SuiteReport, SuiteStatus, Table, VariantOutcome,
};
