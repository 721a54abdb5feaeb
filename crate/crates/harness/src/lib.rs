//! Scenario runner for the flow laboratory: TOML scenarios in, CSV time
//! series plus JSON summary and manifest out, and the acceptance suite.

pub mod acceptance;
pub mod config;
pub mod output;
pub mod scenario;
pub mod verdict;

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

pub use config::ScenarioConfig;
pub use scenario::{run_scenario, RunArtifacts, Summary};
pub use verdict::{verdict, Classification, Verdict};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error("{0}: {1}")]
    Csv(String, #[source] csv::Error),
    #[error(transparent)]
    Core(#[from] krf_core::Error),
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub name: String,
    pub classification: Option<Classification>,
    pub checks_pass: bool,
    pub error: Option<String>,
}

/// Runs independent scenarios concurrently and writes `sweep.csv` in the
/// output root. Rows keep the input order.
pub fn run_sweep(configs: &[ScenarioConfig], out_root: &Path) -> Result<Vec<SweepRow>, HarnessError> {
    let mut names: Vec<&str> = configs.iter().map(|c| c.name.as_str()).collect();
    names.sort_unstable();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        return Err(HarnessError::ConfigInvalid(format!("key `name`: duplicate scenario name {}", w[0])));
    }
    let rows: Vec<SweepRow> = configs
        .par_iter()
        .map(|c| match run_scenario(c, out_root) {
            Ok(a) => SweepRow {
                name: c.name.clone(),
                classification: Some(a.summary.verdict.classification),
                checks_pass: a.summary.checks_pass,
                error: None,
            },
            Err(e) => SweepRow { name: c.name.clone(), classification: None, checks_pass: false, error: Some(e.to_string()) },
        })
        .collect();
    let path = out_root.join("sweep.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| HarnessError::Csv(path.display().to_string(), e))?;
    for r in &rows {
        w.serialize(r)
            .map_err(|e| HarnessError::Csv(path.display().to_string(), e))?;
    }
    w.flush().map_err(|e| HarnessError::Io(path.display().to_string(), e))?;
    Ok(rows)
}
