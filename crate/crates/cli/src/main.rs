use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use finsler_cli::{run, Assertion, Command, MetricRegistry, Overrides, EXIT_ERROR};

#[derive(Parser)]
#[command(
    name = "finsler",
    version,
    about = "Numerical Finsler geometry in batch"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Overrides `[numeric].seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Report path; overrides `[output].report`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Exit with status 2 unless the verdict holds: berwald, not_berwald, landsberg or rigidity.
    #[arg(long, global = true, value_parser = parse_assertion)]
    assert: Option<Assertion>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the analyses listed in `[analysis].run`.
    Analyze { config: PathBuf },
    /// Run the classifier only.
    Classify { config: PathBuf },
    /// Sample and classify the holonomy of the averaged connection.
    Holonomy { config: PathBuf },
    /// Print the registered metric families.
    ListMetrics {
        /// Print a JSON array instead of text.
        #[arg(long)]
        json: bool,
    },
}

fn parse_assertion(s: &str) -> Result<Assertion, String> {
    Assertion::parse(s).ok_or_else(|| {
        format!("unknown verdict `{s}`; use berwald, not_berwald, landsberg or rigidity")
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let registry = MetricRegistry::with_builtins();
    let (command, path) = match cli.command {
        Cmd::ListMetrics { json } => {
            if json {
                let text = serde_json::to_string_pretty(&registry.families())
                    .expect("registry serializes");
                println!("{text}");
            } else {
                print!("{}", registry.describe());
            }
            return ExitCode::SUCCESS;
        }
        Cmd::Analyze { config } => (Command::Analyze, config),
        Cmd::Classify { config } => (Command::Classify, config),
        Cmd::Holonomy { config } => (Command::Holonomy, config),
    };
    let overrides = Overrides {
        seed: cli.seed,
        out: cli.out,
        assert: cli.assert,
    };
    match run(&path, command, &overrides, &registry) {
        Ok(outcome) => {
            if outcome.report.config.output.report.is_none() {
                print!("{}", outcome.report.to_json());
            }
            for (key, v) in &outcome.report.verdicts {
                eprintln!(
                    "{key}: {} (residual {:e}, tolerance {:e})",
                    v.label(),
                    v.value,
                    v.tolerance
                );
            }
            if let Some(m) = &outcome.message {
                eprintln!("{m}");
            }
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
