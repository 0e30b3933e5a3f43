//! File formats.
//!
//! `value.csv` columns: `pi_1..pi_d, value`. `policy.csv` columns:
//! `pi_1..pi_d, target_1..target_d`. One row per grid node in grid order.
//! Numbers use Rust's shortest round-trip formatting, so files parse back
//! bit-exactly.

use std::fs::File;
use std::path::Path;
use std::sync::Arc;

use ergoport_core::{Policy, SimplexGrid, ValueFunction, WealthPath};
use serde::Serialize;

use crate::error::CliError;

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn writer(path: &Path) -> Result<csv::Writer<File>, CliError> {
    csv::Writer::from_path(path).map_err(|e| io_err(path, e))
}

fn header(prefix: &str, d: usize) -> impl Iterator<Item = String> + '_ {
    (1..=d).map(move |i| format!("{prefix}_{i}"))
}

pub fn write_value_csv(path: &Path, vf: &ValueFunction) -> Result<(), CliError> {
    let grid = vf.grid();
    let mut w = writer(path)?;
    let head: Vec<String> = header("pi", grid.dim()).chain(["value".to_string()]).collect();
    w.write_record(&head).map_err(|e| io_err(path, e))?;
    for (p, v) in grid.points().zip(vf.values()) {
        let row: Vec<String> = p.iter().chain([v]).map(|x| x.to_string()).collect();
        w.write_record(&row).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_policy_csv(path: &Path, policy: &Policy) -> Result<(), CliError> {
    let grid = policy.grid();
    let d = grid.dim();
    let mut w = writer(path)?;
    let head: Vec<String> = header("pi", d).chain(header("target", d)).collect();
    w.write_record(&head).map_err(|e| io_err(path, e))?;
    for (p, t) in grid.points().zip(policy.targets()) {
        let row: Vec<String> = p.iter().chain(t).map(|x| x.to_string()).collect();
        w.write_record(&row).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Parses a policy file written for `grid`. Node coordinates must match the
/// grid within 1e-12; errors name the offending row (1-based, header is 1).
pub fn read_policy_csv(path: &Path, grid: Arc<SimplexGrid>) -> Result<Policy, CliError> {
    let d = grid.dim();
    let mut r = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    let cols = r.headers().map_err(|e| io_err(path, e))?.len();
    if cols != 2 * d {
        return Err(CliError::Config(format!(
            "{}: expected {} columns for a {d}-asset policy, found {cols}",
            path.display(),
            2 * d
        )));
    }
    let mut targets = Vec::with_capacity(grid.len() * d);
    let mut count = 0;
    for (k, rec) in r.records().enumerate() {
        let row = k + 2;
        let rec = rec.map_err(|e| CliError::Config(format!("{} row {row}: {e}", path.display())))?;
        if count >= grid.len() {
            return Err(CliError::Config(format!("{} row {row}: more rows than grid nodes", path.display())));
        }
        let nums = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| CliError::Config(format!("{} row {row}: {e}", path.display())))?;
        if nums.len() != 2 * d {
            return Err(CliError::Config(format!("{} row {row}: expected {} fields", path.display(), 2 * d)));
        }
        let node = grid.point(count);
        if nums[..d].iter().zip(node).any(|(a, b)| (a - b).abs() > 1e-12) {
            return Err(CliError::Config(format!(
                "{} row {row}: node {:?} does not match grid node {node:?}",
                path.display(),
                &nums[..d]
            )));
        }
        targets.extend_from_slice(&nums[d..]);
        count += 1;
    }
    if count != grid.len() {
        return Err(CliError::Config(format!(
            "{}: {count} rows, grid has {} nodes",
            path.display(),
            grid.len()
        )));
    }
    Policy::new(grid, targets).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), value).map_err(|e| io_err(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Columns: `t, r_1..r_d` (log-returns of period t), `pre_*`, `post_*`,
/// `decay, traded, log_wealth` (after period t). `t` starts at 1.
pub fn write_path_csv(path: &Path, returns: &ergoport_core::GrossPath, rec: &WealthPath) -> Result<(), CliError> {
    let d = returns.dim();
    let mut w = writer(path)?;
    let head: Vec<String> = ["t".to_string()]
        .into_iter()
        .chain(header("r", d))
        .chain(header("pre", d))
        .chain(header("post", d))
        .chain(["decay", "traded", "log_wealth"].map(String::from))
        .collect();
    w.write_record(&head).map_err(|e| io_err(path, e))?;
    for t in 0..rec.horizon() {
        let mut row = vec![(t + 1).to_string()];
        row.extend(returns.step(t).iter().map(|g| g.ln().to_string()));
        row.extend(rec.pre_weights[t].iter().map(|x| x.to_string()));
        row.extend(rec.post_weights[t].iter().map(|x| x.to_string()));
        row.push(rec.decays[t].to_string());
        row.push(u8::from(rec.traded[t]).to_string());
        row.push(rec.log_wealth[t + 1].to_string());
        w.write_record(&row).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}
