//! Turn a results CSV into per-(K, mode) trend series: mean and standard
//! deviation of attack SR over seeds at each (alpha, beta) point.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::CliError;
use crate::sweep::CSV_HEADER;

pub const PLOT_HEADER: &str = "alpha,beta,attack_sr_mean,attack_sr_std";

#[derive(Debug, PartialEq, Eq, PartialOrd, Ord, Clone)]
struct GroupKey {
    scenario: String,
    k: usize,
    mode: String,
}

/// Write one grouped series file per `(scenario, K, mode)` combination in
/// the CSV; returns the created paths.
pub fn emit_plot_data(csv_path: &Path, out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let text = fs::read_to_string(csv_path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::File(format!("{}: empty CSV", csv_path.display())))?;
    if header != CSV_HEADER {
        return Err(CliError::File(format!(
            "{}: unexpected CSV header",
            csv_path.display()
        )));
    }

    // (group -> (alpha bits, beta bits) -> attack_sr per seed); float bits
    // order like the values because alpha and beta are non-negative
    let mut groups: BTreeMap<GroupKey, BTreeMap<(u64, u64), Vec<f64>>> = BTreeMap::new();
    let mut rows = 0usize;
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 12 {
            return Err(CliError::File(format!(
                "{}: line {}: expected 12 fields, got {}",
                csv_path.display(),
                lineno + 2,
                fields.len()
            )));
        }
        let parse_f64 = |ix: usize, name: &str| -> Result<f64, CliError> {
            fields[ix].parse().map_err(|_| {
                CliError::File(format!(
                    "{}: line {}: bad {name} `{}`",
                    csv_path.display(),
                    lineno + 2,
                    fields[ix]
                ))
            })
        };
        let alpha = parse_f64(1, "alpha")?;
        let beta = parse_f64(2, "beta")?;
        let k: usize = fields[3].parse().map_err(|_| {
            CliError::File(format!(
                "{}: line {}: bad k `{}`",
                csv_path.display(),
                lineno + 2,
                fields[3]
            ))
        })?;
        let attack_sr = parse_f64(7, "attack_sr")?;
        let key = GroupKey {
            scenario: fields[5].to_string(),
            k,
            mode: fields[4].to_string(),
        };
        groups
            .entry(key)
            .or_default()
            .entry((alpha.to_bits(), beta.to_bits()))
            .or_default()
            .push(attack_sr);
        rows += 1;
    }
    if rows == 0 {
        return Err(CliError::File(format!(
            "{}: CSV has no data rows",
            csv_path.display()
        )));
    }

    let mut written = Vec::new();
    for (key, series) in groups {
        let path = out_dir.join(format!(
            "plot_{}_k{}_{}.csv",
            key.scenario, key.k, key.mode
        ));
        let mut f = fs::File::create(&path)?;
        writeln!(f, "{PLOT_HEADER}")?;
        for ((alpha_bits, beta_bits), values) in series {
            let (mean, std) = mean_std(&values);
            writeln!(
                f,
                "{},{},{mean:.6},{std:.6}",
                f64::from_bits(alpha_bits),
                f64::from_bits(beta_bits)
            )?;
        }
        written.push(path);
    }
    Ok(written)
}

/// Mean and population standard deviation; a single value has deviation 0.
fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.max(0.0).sqrt())
}
