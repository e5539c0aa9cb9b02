use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use horolab_harness::config::{parse_list, ExperimentConfig, GroupSpec};
use horolab_harness::{run, HarnessError};

/// Numerical experiments on horocycle and geodesic flows of Schottky surfaces.
#[derive(Parser, Debug)]
#[command(name = "horolab", version)]
struct Cli {
    /// Experiment name (see --list).
    experiment: Option<String>,
    /// Named group preset: default, thin or asym.
    #[arg(long, conflicts_with = "group")]
    preset: Option<String>,
    /// Group description in JSON.
    #[arg(long)]
    group: Option<PathBuf>,
    /// Patterson-Sullivan word length.
    #[arg(long)]
    k: Option<usize>,
    /// Comma separated push times.
    #[arg(long)]
    t: Option<String>,
    /// Comma separated radii; `e6` means exp(6).
    #[arg(long)]
    r: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for the CSV and the run manifest.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    /// Number of base frames.
    #[arg(long)]
    frames: Option<usize>,
    /// Annulus half-width.
    #[arg(long)]
    r0: Option<f64>,
    /// JSON config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print the registered experiments and exit.
    #[arg(long)]
    list: bool,
}

fn build_config(cli: &Cli) -> Result<ExperimentConfig, HarnessError> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    config.apply_env()?;
    if let Some(e) = &cli.experiment {
        config.experiment = e.clone();
    }
    if let Some(p) = &cli.preset {
        config.group = GroupSpec::Preset(p.clone());
    }
    if let Some(g) = &cli.group {
        config.group = GroupSpec::File(g.clone());
    }
    if let Some(k) = cli.k {
        config.k = k;
    }
    if let Some(t) = &cli.t {
        config.t = parse_list(t)?;
    }
    if let Some(r) = &cli.r {
        config.r = parse_list(r)?;
    }
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    if let Some(o) = &cli.out {
        config.out = o.clone();
    }
    if let Some(n) = cli.threads {
        config.threads = n;
    }
    if let Some(n) = cli.frames {
        config.frames = n;
    }
    if let Some(r0) = cli.r0 {
        config.r0 = r0;
    }
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.list {
        for name in horolab_harness::EXPERIMENTS {
            println!("{name}");
        }
        return ExitCode::SUCCESS;
    }
    let result = build_config(&cli).and_then(|config| run(&config));
    match result {
        Ok(outcome) => {
            for c in &outcome.output.checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            println!("wrote {} and {}", outcome.csv_path.display(), outcome.manifest_path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("horolab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
