use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use stochastic_electron::cli::{self, CliError, ConfigSource, OUT_DIR_ENV};

#[derive(Parser)]
#[command(
    name = "stochastic-electron",
    version,
    about = "Stochastic scalar electron: path sampling and identity checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List builtin scenarios.
    List,
    /// Run a scenario document or a builtin.
    Run {
        /// Scenario document (TOML).
        #[arg(required_unless_present = "builtin", conflicts_with = "builtin")]
        config: Option<PathBuf>,
        #[arg(long)]
        builtin: Option<String>,
        /// Output directory; defaults to the config's `output_dir`, then
        /// `$STOCHASTIC_ELECTRON_OUT/<scenario>`, then `./out/<scenario>`.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Print an annotated template of the scenario document.
    DumpSchema,
}

fn out_dir(explicit: Option<PathBuf>, cfg: &cli::ScenarioConfig) -> PathBuf {
    explicit
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| {
            let root =
                std::env::var_os(OUT_DIR_ENV).map_or_else(|| PathBuf::from("out"), PathBuf::from);
            root.join(&cfg.scenario)
        })
}

fn run(
    config: Option<PathBuf>,
    builtin: Option<String>,
    out: Option<PathBuf>,
) -> Result<bool, CliError> {
    let cfg = match (config, builtin) {
        (Some(p), _) => cli::load_config(ConfigSource::Path(p))?,
        (None, Some(id)) => cli::builtin(&id).ok_or(CliError::UnknownBuiltin(id))?,
        (None, None) => unreachable!("clap requires a config or a builtin"),
    };
    let dir = out_dir(out, &cfg);
    let summary = cli::run(&cfg, &dir)?;
    for o in &summary.outcomes {
        let status = if o.matched() { "ok" } else { "MISMATCH" };
        let word = |p: bool| if p { "pass" } else { "fail" };
        println!(
            "{:<32} expected {:<4}  observed {:<4}  {status}",
            o.check.as_str(),
            word(o.expected_pass),
            word(o.passed)
        );
    }
    println!("artifacts in {}", dir.display());
    Ok(summary.all_matched())
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::List => {
            print!("{}", cli::list_scenarios());
            ExitCode::SUCCESS
        }
        Command::DumpSchema => {
            print!("{}", cli::schema());
            ExitCode::SUCCESS
        }
        Command::Run {
            config,
            builtin,
            out,
        } => match run(config, builtin, out) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::from(1),
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
    }
}
