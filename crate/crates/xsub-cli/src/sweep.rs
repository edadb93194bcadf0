//! Sweep orchestration: the Cartesian hyperparameter grid per seed, a
//! bounded worker pool, and canonical CSV emission. Output bytes depend
//! only on config and seeds, never on worker count or completion order.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::experiment::{build_context, cells, run_cell, SeedContext};

/// Exact header of the results CSV.
pub const CSV_HEADER: &str = "seed,alpha,beta,k,mode,scenario,accuracy,attack_sr,\
detection_rate,queries_predict,queries_explain,wall_time_ms";

/// One sweep cell's measurements; one CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub seed: u64,
    pub alpha: f64,
    pub beta: f64,
    pub k: usize,
    pub mode: String,
    pub scenario: String,
    pub accuracy: f64,
    pub attack_sr: f64,
    pub detection_rate: Option<f64>,
    pub queries_predict: u64,
    pub queries_explain: u64,
    pub wall_time_ms: u64,
}

impl MetricsRecord {
    pub fn csv_row(&self) -> String {
        let detection = self
            .detection_rate
            .map(|d| format!("{d:.6}"))
            .unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{:.6},{:.6},{},{},{},{}",
            self.seed,
            self.alpha,
            self.beta,
            self.k,
            self.mode,
            self.scenario,
            self.accuracy,
            self.attack_sr,
            detection,
            self.queries_predict,
            self.queries_explain,
            self.wall_time_ms
        )
    }

    /// Row identity without the wall-time column; the unit of determinism
    /// comparisons.
    pub fn deterministic_row(&self) -> String {
        let row = self.csv_row();
        row[..row.rfind(',').expect("csv row has columns")].to_string()
    }
}

fn canonical_order(a: &MetricsRecord, b: &MetricsRecord) -> std::cmp::Ordering {
    a.scenario
        .cmp(&b.scenario)
        .then(a.mode.cmp(&b.mode))
        .then(a.k.cmp(&b.k))
        .then(a.alpha.total_cmp(&b.alpha))
        .then(a.beta.total_cmp(&b.beta))
        .then(a.seed.cmp(&b.seed))
}

/// Build one context per seed, run every cell of the grid under a bounded
/// worker pool, and return the records in canonical order.
pub fn run_sweep(cfg: &RunConfig, workers: usize) -> Result<Vec<MetricsRecord>, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::Other(format!("worker pool: {e}")))?;
    let grid = cells(cfg);
    let mut records = pool.install(|| -> Result<Vec<MetricsRecord>, CliError> {
        let contexts: Vec<SeedContext> = cfg
            .sweep
            .seeds
            .par_iter()
            .map(|&seed| build_context(cfg, seed))
            .collect::<Result<_, _>>()?;
        let jobs: Vec<(usize, &crate::experiment::Cell)> = (0..contexts.len())
            .flat_map(|ci| grid.iter().map(move |cell| (ci, cell)))
            .collect();
        jobs.par_iter()
            .map(|(ci, cell)| run_cell(&contexts[*ci], cfg, cell))
            .collect()
    })?;
    records.sort_by(canonical_order);
    Ok(records)
}

/// Append records to the CSV, writing the header first when the file is new.
pub fn append_csv(path: &Path, records: &[MetricsRecord]) -> Result<(), CliError> {
    let fresh = !path.exists();
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    if fresh {
        writeln!(f, "{CSV_HEADER}")?;
    }
    for r in records {
        writeln!(f, "{}", r.csv_row())?;
    }
    Ok(())
}
