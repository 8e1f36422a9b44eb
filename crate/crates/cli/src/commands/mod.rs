//! Subcommand implementations. Each takes a fully resolved config, so a run
//! can be repeated from its manifest.

pub mod correct;
pub mod diff;
pub mod sweep;
pub mod table;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::CliResult;

pub use correct::CorrectConfig;
pub use diff::DiffConfig;
pub use sweep::SweepConfig;
pub use table::TableConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum CommandConfig {
    Diff(DiffConfig),
    Correct(CorrectConfig),
    Sweep(SweepConfig),
    Table(TableConfig),
}

impl CommandConfig {
    /// Runs the command, writing outputs and a manifest to `out` when given.
    pub fn run(&self, out: Option<&Path>) -> CliResult<()> {
        match self {
            CommandConfig::Diff(c) => diff::run(c, out),
            CommandConfig::Correct(c) => correct::run(c, out),
            CommandConfig::Sweep(c) => sweep::run(c, out),
            CommandConfig::Table(c) => table::run(c, out),
        }
    }
}

pub(crate) fn require_out<'a>(out: Option<&'a Path>, command: &str) -> CliResult<&'a Path> {
    out.ok_or_else(|| crate::error::CliError::input(format!("{command} needs an output directory (--out)")))
}
