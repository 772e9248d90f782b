use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use eras::app::{self, parse_override, RunConfig, RunSummary};
use eras::kg_store::Split;
use eras::ErasError;

#[derive(Parser)]
#[command(name = "eras", version, about = "Relation-aware scoring function search for knowledge graph embedding")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed for every random stream; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory; overrides the config file.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,

    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

/// Any config key may follow the subcommand as `--key=value`.
#[derive(Args)]
struct Overrides {
    /// Config overrides written as key=value.
    #[arg(value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

/// Flags clap owns; every other `--key=value` argument is a config override.
const FLAGS: &[&str] = &["config", "seed", "output", "workers", "arch", "resume", "split", "help", "version"];

/// Rewrites `--key=value` overrides as bare `key=value` positionals.
fn split_overrides(args: impl IntoIterator<Item = String>) -> Vec<String> {
    args.into_iter()
        .map(|a| match a.strip_prefix("--").and_then(|r| r.split_once('=')) {
            Some((key, _)) if !FLAGS.contains(&key) => a[2..].to_owned(),
            _ => a,
        })
        .collect()
}

#[derive(Subcommand)]
enum Command {
    /// Search, derive, retrain and evaluate.
    Search(Overrides),
    /// Train a fixed architecture.
    Train {
        /// Architecture line ("N M : tokens") or a model name.
        #[arg(long)]
        arch: Option<String>,
        /// Continue from a checkpoint directory.
        #[arg(long)]
        resume: Option<PathBuf>,
        #[command(flatten)]
        rest: Overrides,
    },
    /// Evaluate a checkpoint.
    Eval {
        /// Checkpoint directory.
        checkpoint: PathBuf,
        #[arg(long, default_value = "test")]
        split: Split,
        #[command(flatten)]
        rest: Overrides,
    },
    /// Write the synthetic dataset described by [synthetic].
    Synth(Overrides),
    /// Report relation patterns of a dataset.
    Patterns(Overrides),
}

impl Cli {
    fn overrides(&self, rest: &Overrides) -> Result<Vec<(String, String)>, ErasError> {
        let mut out = rest
            .overrides
            .iter()
            .map(|s| parse_override(s))
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(seed) = self.seed {
            out.push(("seed".into(), seed.to_string()));
        }
        if let Some(o) = &self.output {
            out.push(("output".into(), toml_string(o)));
        }
        if let Some(w) = self.workers {
            out.push(("workers".into(), w.to_string()));
        }
        Ok(out)
    }

    fn load(&self, rest: &Overrides) -> Result<RunConfig, ErasError> {
        RunConfig::load(self.config.as_deref(), &self.overrides(rest)?)
    }
}

/// Quotes a path as a TOML string so the override never parses as a number.
fn toml_string(p: &Path) -> String {
    let s = p.display().to_string();
    if s.contains('\'') {
        format!("{s:?}")
    } else {
        format!("'{s}'")
    }
}

fn print_run(cfg: &RunConfig, summary: &RunSummary) {
    if let Ok(report) = std::fs::read_to_string(cfg.output.join("report.txt")) {
        println!("{report}");
    }
    println!(
        "architecture {}  test MRR {:.4}  artifacts in {}",
        summary.architecture,
        summary.test.mrr,
        cfg.output.display()
    );
}

fn run(cli: &Cli) -> Result<(), ErasError> {
    match &cli.command {
        Command::Search(rest) => {
            let cfg = cli.load(rest)?;
            print_run(&cfg, &app::cmd_search(&cfg)?);
        }
        Command::Train { arch, resume, rest } => {
            let cfg = cli.load(rest)?;
            print_run(&cfg, &app::cmd_train(&cfg, arch.as_deref(), resume.as_deref())?);
        }
        Command::Eval { checkpoint, split, rest } => {
            let cfg = match &cli.config {
                Some(_) => cli.load(rest)?,
                None => {
                    let mut ov = cli.overrides(rest)?;
                    if !ov.iter().any(|(k, _)| k == "output") {
                        ov.push(("output".into(), toml_string(checkpoint)));
                    }
                    app::checkpoint_config(checkpoint, &ov)?
                }
            };
            let (report, classification) = app::cmd_eval(&cfg, checkpoint, *split)?;
            println!("{}", report.render());
            if let Some(c) = classification {
                println!(
                    "triplet classification: valid accuracy {:.4}  test accuracy {:.4}",
                    c.valid_accuracy, c.test_accuracy
                );
            }
        }
        Command::Synth(rest) => println!("{}", app::cmd_synth(&cli.load(rest)?)?),
        Command::Patterns(rest) => print!("{}", app::cmd_patterns(&cli.load(rest)?)?.1),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse_from(split_overrides(std::env::args())) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
