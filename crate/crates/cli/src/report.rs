//! CSV emission. Floats are written with Rust's shortest round-trip
//! formatting, so a rerun with the same seed produces byte-identical
//! files.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use gsde_core::GEstimate;

pub fn write_csv(dir: &Path, name: &str, header: &str, rows: &[String]) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;
    let path = dir.join(name);
    let mut text = String::with_capacity(header.len() + 1 + rows.iter().map(|r| r.len() + 1).sum::<usize>());
    text.push_str(header);
    text.push('\n');
    for row in rows {
        text.push_str(row);
        text.push('\n');
    }
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

pub fn estimate_rows(est: &GEstimate) -> Vec<String> {
    est.per_policy()
        .iter()
        .map(|p| format!("{},{},{},{},{}", p.id, p.params, p.mean, p.se, p.n_paths))
        .collect()
}

pub const ESTIMATE_HEADER: &str = "id,parameters,mean,se,n_paths";

/// One-line human summary of an estimate.
pub fn print_estimate(label: &str, est: &GEstimate) {
    let best = est.argmax_policy();
    println!(
        "{label}: {} (se {}) attained by {} [{}] over {} policies",
        est.value(),
        est.value_se(),
        best.id,
        best.params,
        est.per_policy().len()
    );
}
