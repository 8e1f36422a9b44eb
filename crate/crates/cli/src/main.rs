use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use frameguard::adapter::DEFAULT_TIMEOUT;
use frameguard::correction::CorrectionConfig;
use frameguard::metric::DEFAULT_FACE_HAIR_WEIGHT;
use frameguard::sweeps::DEFAULT_BASE_COUNT;
use frameguard::encode_labelmap;

use frameguard_cli::backend::{parse_canvas, BackendSpec};
use frameguard_cli::commands::{CommandConfig, CorrectConfig, DiffConfig, SweepConfig, TableConfig};
use frameguard_cli::error::{CliError, CliResult};
use frameguard_cli::manifest::RunManifest;
use frameguard_cli::output::{absolute, read_latent};

/// Face-frame variation between segmentation label maps, and latent-code
/// correction that reduces it.
#[derive(Parser)]
#[command(name = "frameguard", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Face-frame variation between two label maps (binary PGM, classes 0/1/2).
    Diff {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = DEFAULT_FACE_HAIR_WEIGHT)]
        weight: f64,
        /// Also write diff.csv and a manifest here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reduce the variation between a target label map and a latent's render.
    Correct(CorrectArgs),
    /// Measure variation along latent directions.
    Sweep(SweepArgs),
    /// Variation table for `name,targetPath,projectedPath` pairs.
    Table {
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long, default_value_t = DEFAULT_FACE_HAIR_WEIGHT)]
        weight: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a latent code to a label map.
    Render {
        #[arg(long)]
        latent: PathBuf,
        #[arg(long, default_value = "blobface")]
        backend: BackendSpec,
        #[arg(long, default_value = "64x64", value_parser = parse_canvas)]
        canvas: (usize, usize),
        /// Output PGM file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Repeat the run recorded in a manifest.
    Rerun {
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct CorrectArgs {
    /// Target label map (PGM).
    #[arg(long)]
    target: PathBuf,
    /// Starting latent code, a JSON array.
    #[arg(long)]
    latent: PathBuf,
    #[arg(long, default_value = "blobface")]
    backend: BackendSpec,
    #[arg(long, default_value_t = 750)]
    iterations: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.005)]
    noise0: f64,
    #[arg(long, default_value_t = 0.75)]
    nrl: f64,
    #[arg(long, default_value_t = 10_000)]
    schedule_span: u64,
    #[arg(long, default_value_t = 10_000)]
    std_samples: usize,
    #[arg(long, default_value_t = DEFAULT_FACE_HAIR_WEIGHT)]
    weight: f64,
    #[arg(long, default_value_t = DEFAULT_TIMEOUT.as_secs_f64())]
    timeout_secs: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, default_value = "blobface")]
    backend: BackendSpec,
    #[arg(long, default_value = "64x64", value_parser = parse_canvas)]
    canvas: (usize, usize),
    /// Direction files, JSON `{name, range, steps, vector}`.
    #[arg(long, num_args = 1.., required = true)]
    directions: Vec<PathBuf>,
    /// Base latents, a JSON array of arrays.
    #[arg(long, conflicts_with = "num_bases")]
    bases: Option<PathBuf>,
    #[arg(long)]
    num_bases: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_FACE_HAIR_WEIGHT)]
    weight: f64,
    /// Backends to run in parallel.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, default_value_t = DEFAULT_TIMEOUT.as_secs_f64())]
    timeout_secs: f64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FRAMEGUARD_LOG", "warn")).init();
    // clap exits with 2 on usage errors, matching the input-error code.
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Diff { a, b, weight, out } => {
            let cfg = DiffConfig { a: absolute(&a)?, b: absolute(&b)?, weight };
            CommandConfig::Diff(cfg).run(out.as_deref())
        }
        Command::Correct(args) => {
            let cfg = CorrectConfig {
                target: absolute(&args.target)?,
                latent: absolute(&args.latent)?,
                backend: args.backend,
                weight: args.weight,
                correction: CorrectionConfig {
                    noise_0: args.noise0,
                    nrl: args.nrl,
                    schedule_span: args.schedule_span,
                    iterations: args.iterations,
                    std_samples: args.std_samples,
                    seed: args.seed,
                },
                timeout_secs: check_timeout(args.timeout_secs)?,
            };
            CommandConfig::Correct(cfg).run(Some(&args.out))
        }
        Command::Sweep(args) => {
            let cfg = SweepConfig {
                backend: args.backend,
                canvas: args.canvas,
                directions: args.directions.iter().map(|p| absolute(p)).collect::<CliResult<_>>()?,
                bases: args.bases.as_deref().map(absolute).transpose()?,
                num_bases: args.num_bases.unwrap_or(DEFAULT_BASE_COUNT),
                seed: args.seed,
                weight: args.weight,
                jobs: args.jobs,
                timeout_secs: check_timeout(args.timeout_secs)?,
            };
            CommandConfig::Sweep(cfg).run(Some(&args.out))
        }
        Command::Table { pairs, weight, out } => {
            let cfg = TableConfig { pairs: absolute(&pairs)?, weight };
            CommandConfig::Table(cfg).run(out.as_deref())
        }
        Command::Render { latent, backend, canvas, out } => render(&latent, &backend, canvas, &out),
        Command::Rerun { manifest, out } => {
            let m = RunManifest::load(&manifest)?;
            m.config.run(out.as_deref())
        }
    }
}

fn check_timeout(secs: f64) -> CliResult<f64> {
    if secs.is_finite() && secs > 0.0 {
        Ok(secs)
    } else {
        Err(CliError::input(format!("timeout must be positive, got {secs}")))
    }
}

fn render(latent: &Path, backend: &BackendSpec, canvas: (usize, usize), out: &Path) -> CliResult<()> {
    let z = read_latent(latent)?;
    let mut b = backend.open(canvas, DEFAULT_TIMEOUT)?;
    let map = b.render_labels(&z)?;
    std::fs::write(out, encode_labelmap(&map)).map_err(|e| CliError::io(out, e))?;
    Ok(())
}
