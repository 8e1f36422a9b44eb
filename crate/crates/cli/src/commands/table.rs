//! Per-image variation table for (target, projection) pairs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use frameguard::fmt::sig9;
use frameguard::metric::{frame_variation, MetricConfig, Variation};
use serde::{Deserialize, Serialize};

use crate::commands::CommandConfig;
use crate::error::{CliError, CliResult};
use crate::output::{read_labelmap, OutputDir};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableConfig {
    pub pairs: PathBuf,
    pub weight: f64,
}

struct Pair {
    line_no: usize,
    name: String,
    target: PathBuf,
    projected: PathBuf,
}

/// Reads `name,targetPath,projectedPath` lines; relative paths are taken
/// from the list file's directory. Blank lines and `#` comments are skipped.
fn read_pairs(path: &Path) -> CliResult<Vec<Pair>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        let [name, target, projected] = fields[..] else {
            return Err(CliError::input(format!(
                "row {line_no} ({trimmed:?}): expected name,targetPath,projectedPath"
            )));
        };
        if name.is_empty() || target.is_empty() || projected.is_empty() {
            return Err(CliError::input(format!("row {line_no} ({trimmed:?}): empty field")));
        }
        pairs.push(Pair {
            line_no,
            name: name.to_string(),
            target: base.join(target),
            projected: base.join(projected),
        });
    }
    Ok(pairs)
}

pub fn run(cfg: &TableConfig, out: Option<&Path>) -> CliResult<()> {
    let metric = MetricConfig::new(cfg.weight).map_err(CliError::input)?;
    let pairs = read_pairs(&cfg.pairs)?;
    if pairs.is_empty() {
        return Err(CliError::input(format!("{}: no pairs", cfg.pairs.display())));
    }

    let mut rows: Vec<(String, Variation)> = Vec::with_capacity(pairs.len());
    for p in &pairs {
        let row_err = |e: CliError| CliError::input(format!("row {} ({}): {e}", p.line_no, p.name));
        let target = read_labelmap(&p.target).map_err(row_err)?;
        let projected = read_labelmap(&p.projected).map_err(row_err)?;
        let v = frame_variation(&target, &projected, &metric).map_err(|e| row_err(CliError::input(e)))?;
        rows.push((p.name.clone(), v));
    }

    let values: Vec<f64> = rows.iter().map(|r| r.1.value()).collect();
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = values.iter().sum::<f64>() / values.len() as f64;

    let header = ("Name", "Face-frame variation");
    let name_w = rows.iter().map(|r| r.0.len()).chain([header.0.len(), 4]).max().unwrap_or(4);
    let val_w = header.1.len();
    let pct = |v: f64| format!("{:.3}%", v * 100.0);
    let mut text = String::new();
    let _ = writeln!(text, "{:<name_w$}  {:>val_w$}", header.0, header.1);
    let _ = writeln!(text, "{}", "-".repeat(name_w + 2 + val_w));
    for (name, v) in &rows {
        let _ = writeln!(text, "{:<name_w$}  {:>val_w$}", name, v.to_string());
    }
    let _ = writeln!(text, "{}", "-".repeat(name_w + 2 + val_w));
    for (label, v) in [("Min", min), ("Max", max), ("Mean", mean)] {
        let _ = writeln!(text, "{:<name_w$}  {:>val_w$}", label, pct(v));
    }
    print!("{text}");

    if let Some(dir) = out {
        let mut dir = OutputDir::create(dir)?;
        let mut csv = String::from("name,variation\n");
        for (name, v) in &rows {
            let _ = writeln!(csv, "{name},{}", sig9(v.value()));
        }
        dir.write("table.csv", csv)?;
        dir.write("table.txt", text)?;
        dir.finish(CommandConfig::Table(cfg.clone()), None)?;
    }
    Ok(())
}
