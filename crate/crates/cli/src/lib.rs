//! Experiment runner behind the `sipkit` binary.

pub mod config;
pub mod experiments;

use std::time::Instant;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

pub use config::{resolve, Config, Experiment, Params, Resolved};
pub use experiments::Check;

/// Contents of `summary.json`. Only `wall_time_s` varies between runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub experiment: String,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub wall_time_s: f64,
}

impl Summary {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Run an experiment and write its artifacts, `config.json` and `summary.json`.
pub fn execute(r: &Resolved) -> Result<Summary> {
    let t = Instant::now();
    let checks = experiments::run(r).with_context(|| format!("experiment {}", r.experiment))?;
    let summary = Summary { experiment: r.experiment.name().into(), seed: r.seed, checks, wall_time_s: t.elapsed().as_secs_f64() };
    let config = Config {
        experiment: Some(r.experiment),
        seed: Some(r.seed),
        output_dir: Some(r.output_dir.clone()),
        threads: None,
        params: r.params.clone(),
    };
    write_json(&r.output_dir.join("config.json"), &config)?;
    write_json(&r.output_dir.join("summary.json"), &summary)?;
    Ok(summary)
}

fn write_json<T: Serialize>(path: &std::path::Path, v: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
