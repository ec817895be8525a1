use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fickjacobs::scenario::{
    self, load_config, CsvLayout, Engine, ScenarioConfig, ScenarioError, ScenarioResult,
};

/// Output directory used when neither `--out` nor the environment names one.
const DEFAULT_OUT: &str = "fickjacobs-out";
const OUT_ENV: &str = "FICKJACOBS_OUT_DIR";

#[derive(Parser)]
#[command(name = "fickjacobs", version, about = "Fick-Jacobs channel diffusion scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate V(x), V(y) and f(y)
    Potential(Common),
    /// Tabulate y(x) and its inverse
    Transform(Common),
    /// Run the analytic, spectral and numeric engines and compare them
    Evolve {
        #[command(flatten)]
        common: Common,
        /// Comma-separated subset of a,s,n (analytic, spectral, numeric)
        #[arg(long, value_delimiter = ',', value_parser = parse_engine)]
        engines: Option<Vec<Engine>>,
        /// Write one CSV per engine holding every snapshot
        #[arg(long)]
        long_format: bool,
    },
    /// Tabulate the lowest energies of the transformed problem
    Spectrum {
        #[command(flatten)]
        common: Common,
        /// Also write the eigenfunctions
        #[arg(long)]
        dump_modes: bool,
    },
    /// Partner potentials from a sampled superpotential
    Susy(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario configs; several run concurrently
    #[arg(value_name = "CONFIG")]
    configs: Vec<PathBuf>,
    #[arg(long = "config", value_name = "PATH")]
    config_flags: Vec<PathBuf>,
    /// Output directory [env: FICKJACOBS_OUT_DIR]
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, short)]
    quiet: bool,
}

impl Common {
    fn paths(&self) -> Vec<&Path> {
        self.configs.iter().chain(&self.config_flags).map(PathBuf::as_path).collect()
    }

    fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }
}

fn parse_engine(s: &str) -> Result<Engine, String> {
    Engine::parse(s).ok_or_else(|| format!("unknown engine `{s}` (expected a, s or n)"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::Potential(c) | Command::Transform(c) | Command::Susy(c) => c,
        Command::Evolve { common, .. } | Command::Spectrum { common, .. } => common,
    };
    let paths = common.paths();
    if paths.is_empty() {
        eprintln!("error: no config given");
        return ExitCode::from(2);
    }
    let out = common.out_dir();

    let results: Vec<(&Path, ScenarioResult<Vec<PathBuf>>)> = std::thread::scope(|s| {
        let handles: Vec<_> = paths
            .iter()
            .map(|&p| {
                let (cmd, out) = (&cli.command, &out);
                (p, s.spawn(move || run_one(cmd, p, out)))
            })
            .collect();
        handles.into_iter().map(|(p, h)| (p, h.join().expect("scenario thread panicked"))).collect()
    });

    let mut code = 0;
    for (path, result) in results {
        match result {
            Ok(written) => {
                if !common.quiet {
                    for w in written {
                        println!("{}", w.display());
                    }
                }
            }
            Err(e) => {
                eprintln!("{}: {e}", path.display());
                code = code.max(e.exit_code());
            }
        }
    }
    ExitCode::from(code as u8)
}

fn scenario_dir(out: &Path, cfg: &ScenarioConfig) -> PathBuf {
    out.join(cfg.display_name())
}

fn run_one(cmd: &Command, path: &Path, out: &Path) -> ScenarioResult<Vec<PathBuf>> {
    let cfg = load_config(path)?;
    let dir = scenario_dir(out, &cfg);
    let single = |name: &str, table: scenario::Table| -> ScenarioResult<Vec<PathBuf>> {
        let file = dir.join(name);
        table.write(&file)?;
        Ok(vec![file])
    };
    match cmd {
        Command::Potential(_) => {
            warn_tabulated(&cfg)?;
            single("potential.csv", scenario::potential_table(&cfg)?)
        }
        Command::Transform(_) => single("transform.csv", scenario::transform_table(&cfg)?),
        Command::Susy(_) => single("susy.csv", scenario::susy_table(&cfg)?),
        Command::Spectrum { dump_modes, .. } => {
            let (energies, modes) = scenario::spectrum_tables(&cfg, *dump_modes)?;
            let mut written = single("spectrum.csv", energies)?;
            if let Some(modes) = modes {
                written.extend(single("modes.csv", modes)?);
            }
            Ok(written)
        }
        Command::Evolve { engines, long_format, .. } => {
            let mut run = scenario::run(&cfg, engines.as_deref())?;
            let layout = if *long_format { CsvLayout::Long } else { CsvLayout::PerSnapshot };
            run.write(&dir, layout)
        }
    }
}

fn warn_tabulated(cfg: &ScenarioConfig) -> Result<(), ScenarioError> {
    let problem = scenario::Problem::from_config(cfg)?;
    if problem.derivative_warning() {
        eprintln!(
            "warning: {}: second derivatives of tabulated data are approximate",
            cfg.display_name()
        );
    }
    Ok(())
}
