//! Scenario loading, presets, the sampling runner and CSV export.

pub mod config;
pub mod csv;
pub mod presets;
pub mod run;

pub use config::{load_scenario, ConfigError, Scenario};
pub use csv::{export_csv, parse_csv, to_csv, CSV_HEADER};
pub use presets::{builtin_presets, Environment};
pub use run::{run_scenario, ResultSet, RunError};
