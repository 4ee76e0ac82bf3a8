use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ofdm_radar_cli::ini::Ini;
use ofdm_radar_cli::{render, run_experiment, table, CliError, Config};

/// OFDM radar simulator.
#[derive(Parser)]
#[command(name = "ofdr", version)]
struct Cli {
    /// Worker threads for Monte-Carlo trials (falls back to OFRD_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print resolution and unambiguous limits per preset (all when none given).
    Table { presets: Vec<String> },

    /// Run the experiment described by a config file.
    Run {
        /// Experiment name; overrides `run.experiment`.
        experiment: Option<String>,
        #[command(flatten)]
        opts: ConfigOpts,
        #[arg(long)]
        out: Option<PathBuf>,
    },

    /// Print the fully resolved config.
    Dump {
        experiment: Option<String>,
        #[command(flatten)]
        opts: ConfigOpts,
    },

    /// Render a radar image file to an 8-bit graymap.
    Render {
        image: PathBuf,
        /// Output directory (default: next to the image).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(clap::Args)]
struct ConfigOpts {
    #[arg(long)]
    config: Option<PathBuf>,
    /// `section.key=value`, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigOpts {
    fn load(&self, experiment: Option<&str>) -> Result<Config, CliError> {
        let mut ini = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                Ini::parse(&text)?
            }
            None => Ini::default(),
        };
        if let Some(e) = experiment {
            ini.set("run", "experiment", e);
        }
        for o in &self.overrides {
            ini.apply_override(o)?;
        }
        if let Some(seed) = self.seed {
            ini.set("run", "seed", &seed.to_string());
        }
        Config::from_ini(ini)
    }
}

fn threads(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    match flag {
        Some(n) => Ok(Some(n)),
        None => match std::env::var("OFRD_THREADS") {
            Ok(v) => v
                .trim()
                .parse()
                .map(Some)
                .map_err(|_| CliError::Config(format!("OFRD_THREADS=`{v}` is not a thread count"))),
            Err(_) => Ok(None),
        },
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = threads(cli.threads)? {
        if n == 0 {
            return Err(CliError::Config("thread count must be >= 1".into()));
        }
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::Table { presets } => print!("{}", table(&presets)?),
        Command::Run { experiment, opts, out } => {
            let cfg = opts.load(experiment.as_deref())?;
            let manifest = run_experiment(&cfg, out.as_deref())?;
            println!(
                "{}: {} artifacts in {} ({:.1} s)",
                manifest.experiment,
                manifest.artifacts.len() + 1,
                manifest.out_dir.display(),
                manifest.duration_s
            );
        }
        Command::Dump { experiment, opts } => print!("{}", opts.load(experiment.as_deref())?.dump()),
        Command::Render { image, out } => println!("{}", render(&image, out.as_deref())?.display()),
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
