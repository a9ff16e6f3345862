//! Scenario configuration, the simulation loop, sweeps, reports and output.

pub mod config;
pub mod output;
pub mod reports;
pub mod selfcheck;
pub mod sim;
pub mod sweep;

pub use config::{from_versioned_str, GridConfig, ScenarioConfig};
pub use output::{emit_results, Format, Table};
pub use sim::{measure_realized_rates, run_simulation, RealizedRates, RunResult};
pub use sweep::{run_sweep, SweepRow, SweepTable};
