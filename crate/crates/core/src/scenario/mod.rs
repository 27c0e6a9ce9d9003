//! Scenario catalog, configuration, orchestration and report emission.

mod catalog;
mod checks;
mod config;
mod converge;
mod run;

pub use catalog::{defaults, ids, list_scenarios, CatalogEntry};
pub use checks::CheckResult;
pub use config::{
    layer, load, parse_flat, parse_override, CheckSpec, ConvergeQuantity, FlatConfig, GridSpec,
    InitialSpec, ScenarioConfig,
};
pub use converge::{converge, ConvergenceOutcome, LevelResult};
pub use run::{run_scenario, simulate, RunData, RunOutcome, RunReport, Series, Timing};

/// Loads a catalog scenario by id with `key=value` overrides applied.
pub fn catalog_config(id: &str, overrides: &[&str]) -> crate::Result<ScenarioConfig> {
    let mut flat = FlatConfig::new();
    flat.insert("scenario".into(), toml::Value::String(id.into()));
    let parsed = overrides
        .iter()
        .map(|o| parse_override(o))
        .collect::<crate::Result<Vec<_>>>()?;
    ScenarioConfig::from_flat(layer(flat, &parsed)?)
}
