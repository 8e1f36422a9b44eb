use std::path::{Path, PathBuf};

use frameguard::metric::{frame_variation, variation_breakdown, MetricConfig};
use frameguard::fmt::sig9;
use serde::{Deserialize, Serialize};

use crate::commands::CommandConfig;
use crate::error::{CliError, CliResult};
use crate::output::{read_labelmap, OutputDir};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffConfig {
    pub a: PathBuf,
    pub b: PathBuf,
    pub weight: f64,
}

pub fn run(cfg: &DiffConfig, out: Option<&Path>) -> CliResult<()> {
    let metric = MetricConfig::new(cfg.weight).map_err(CliError::input)?;
    let a = read_labelmap(&cfg.a)?;
    let b = read_labelmap(&cfg.b)?;
    let mismatch = || {
        CliError::input(format!(
            "label maps differ in size: {} is {}x{}, {} is {}x{}",
            cfg.a.display(),
            a.width(),
            a.height(),
            cfg.b.display(),
            b.width(),
            b.height()
        ))
    };
    let variation = frame_variation(&a, &b, &metric).map_err(|_| mismatch())?;
    let counts = variation_breakdown(&a, &b).map_err(|_| mismatch())?;

    println!("variation: {variation}");
    println!("equal: {}", counts.equal);
    println!("face_hair: {}", counts.face_hair);
    println!("other: {}", counts.other);

    if let Some(dir) = out {
        let mut dir = OutputDir::create(dir)?;
        let csv = format!(
            "a,b,variation,equal,face_hair,other\n{},{},{},{},{},{}\n",
            cfg.a.display(),
            cfg.b.display(),
            sig9(variation.value()),
            counts.equal,
            counts.face_hair,
            counts.other
        );
        dir.write("diff.csv", csv)?;
        dir.finish(CommandConfig::Diff(cfg.clone()), None)?;
    }
    Ok(())
}
