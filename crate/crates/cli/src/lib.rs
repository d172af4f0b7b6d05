//! Library side of the experiment harness: scenario loading, CSV
//! emission, the built-in reference table reproductions and the sweep
//! studies. The `mcmesh` binary is a thin clap front end over this.

pub mod builtins;
pub mod config;
pub mod output;
pub mod plot;
pub mod sweep;

pub use builtins::{reproduce_table, table_ids, ReproResult, ReproRow};
pub use config::{load_scenario, render_scenario};
pub use output::{results_csv, summary_csv, RunRow};
pub use sweep::{coupling_sweep, orthogonality_sweep, SweepOutput, SweepPoint};
