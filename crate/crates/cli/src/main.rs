use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ssf_cli::commands::{cmd_mu, cmd_resonance, cmd_scattering, cmd_ssf, cmd_verify, load_config, resolve_output};
use ssf_cli::emit::{svg_all_numeric, write_text};
use ssf_cli::error::{CliError, CliResult};
use ssf_cli::suites::Suite;
use ssf_core::numerics::Numerics;

#[derive(Parser)]
#[command(name = "ssf", version, about = "Spectral shift, resonance index, scattering and mu-invariant computations")]
struct Cli {
    /// Render the emitted CSV as a polyline SVG.
    #[arg(long, global = true, value_name = "PATH")]
    svg: Option<PathBuf>,
    /// Main output file (defaults to the config's output paths, then stdout).
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// SSF samples over the configured lambda grid.
    Ssf {
        #[arg(long)]
        config: PathBuf,
    },
    /// Resonance groups over [0, 1] and pole trajectories at one lambda.
    Resonance {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        lambda: f64,
        /// Trajectory table (defaults to `<out>.trajectory.csv` when --out is set).
        #[arg(long, value_name = "PATH")]
        trajectory: Option<PathBuf>,
    },
    /// Scattering matrix at lambda + i y with residuals, as JSON.
    Scattering {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        lambda: f64,
        #[arg(long, default_value_t = 0.0)]
        y: f64,
    },
    /// Per-theta mu-invariants at one lambda.
    Mu {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        lambda: f64,
    },
    /// Run a verification suite and print its JSON report.
    Verify {
        #[arg(long, value_enum)]
        suite: SuiteArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Take numerics from this config instead of the defaults.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Finite,
    Lattice,
    Rank1,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Self {
        match s {
            SuiteArg::Finite => Suite::Finite,
            SuiteArg::Lattice => Suite::Lattice,
            SuiteArg::Rank1 => Suite::Rank1,
        }
    }
}

fn deliver(text: &str, path: Option<&Path>) -> CliResult<()> {
    match path {
        Some(p) => write_text(&resolve_output(p), text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn deliver_csv(csv: &str, out: Option<&Path>, svg: Option<&Path>) -> CliResult<()> {
    deliver(csv, out)?;
    if let Some(svg) = svg {
        write_text(&resolve_output(svg), &svg_all_numeric(csv)?)?;
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    let out = cli.out.as_deref();
    let svg = cli.svg.as_deref();
    match cli.command {
        Command::Ssf { config } => {
            let cfg = load_config(&config)?;
            let csv = cmd_ssf(&cfg)?;
            let out = out.map(Path::to_path_buf).or(cfg.output.csv.as_ref().map(PathBuf::from));
            let svg = svg.map(Path::to_path_buf).or(cfg.output.svg.as_ref().map(PathBuf::from));
            deliver_csv(&csv, out.as_deref(), svg.as_deref())
        }
        Command::Resonance { config, lambda, trajectory } => {
            let cfg = load_config(&config)?;
            let res = cmd_resonance(&cfg, lambda)?;
            deliver_csv(&res.groups, out, svg)?;
            let traj = trajectory.or_else(|| out.map(|o| o.with_extension("trajectory.csv")));
            if let Some(t) = traj {
                write_text(&resolve_output(&t), &res.trajectory)?;
            }
            Ok(())
        }
        Command::Scattering { config, lambda, y } => {
            if svg.is_some() {
                return Err(CliError::Config("--svg needs a command that emits CSV".into()));
            }
            let cfg = load_config(&config)?;
            let out = out.map(Path::to_path_buf).or(cfg.output.json.as_ref().map(PathBuf::from));
            deliver(&cmd_scattering(&cfg, lambda, y)?, out.as_deref())
        }
        Command::Mu { config, lambda } => {
            let cfg = load_config(&config)?;
            deliver_csv(&cmd_mu(&cfg, lambda)?, out, svg)
        }
        Command::Verify { suite, seed, config } => {
            if svg.is_some() {
                return Err(CliError::Config("--svg needs a command that emits CSV".into()));
            }
            let nm = match config {
                Some(c) => load_config(&c)?.numerics,
                None => Numerics::default(),
            };
            let report = cmd_verify(suite.into(), seed, &nm);
            deliver(&report.to_json()?, out)?;
            if report.passed {
                Ok(())
            } else {
                let failing: Vec<String> = report.checks.iter().flat_map(|c| c.failure_summary()).collect();
                Err(CliError::Verification(failing.join("\n")))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ssf: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
