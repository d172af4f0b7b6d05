//! Scenario files: a single TOML document deserializing straight into
//! [`Scenario`]. The schema is documented in the repository README;
//! parse failures surface toml's line/column positions untouched.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use mcmesh_core::Scenario;

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read scenario file {}", path.display()))?;
    let scenario: Scenario = toml::from_str(&text)
        .with_context(|| format!("invalid scenario file {}", path.display()))?;
    Ok(scenario)
}

/// Round-trips the resolved scenario back to TOML, defaults filled in;
/// what `--dry-run` prints.
pub fn render_scenario(scenario: &Scenario) -> Result<String> {
    toml::to_string_pretty(scenario).context("cannot render scenario")
}
