//! Command-line orchestration for the wave / Klein-Gordon simulator: config
//! parsing, presets and the `run`, `resume` and `verify` verbs.

pub mod commands;
pub mod config;
pub mod presets;

use std::path::Path;

use anyhow::{anyhow, Context, Result};

use config::RunConfig;

/// Loads a configuration from a file or a named preset and applies the
/// output-directory override. Returns the parsed config and its source text.
pub fn load_config(path: Option<&Path>, preset: Option<&str>) -> Result<(RunConfig, String)> {
    let text = match (path, preset) {
        (Some(p), None) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        (None, Some(name)) => presets::preset(name)
            .ok_or_else(|| anyhow!("unknown preset \"{name}\"; available: {}", presets::names().join(", ")))?
            .to_string(),
        _ => return Err(anyhow!("give exactly one of a config file or --preset")),
    };
    let mut cfg = RunConfig::parse(&text)?;
    cfg.apply_env();
    Ok((cfg, text))
}
