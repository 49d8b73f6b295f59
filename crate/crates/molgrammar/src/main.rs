use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use molgrammar::config::{OracleKind, RunConfig};
use molgrammar::core::rank::AssemblyMode;
use molgrammar::files::write_json;
use molgrammar::pipeline::{self, Layout, PipelineError, Remote};
use molgrammar::report;

#[derive(Parser)]
#[command(name = "molgrammar", version, about = "Induce molecular graph grammars and sample from them")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML or JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true, value_enum)]
    oracle: Option<OracleKind>,
    #[arg(long, global = true)]
    endpoint: Option<String>,
    #[arg(long, global = true)]
    k: Option<usize>,
    #[arg(long, global = true, value_enum)]
    mode: Option<Mode>,
    /// Dataset file, one SMILES per line.
    #[arg(long, global = true)]
    dataset: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Decomposition passes per molecule.
    #[arg(long, global = true)]
    passes: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Topk,
    #[value(name = "first_k")]
    FirstK,
}

#[derive(Subcommand)]
enum Command {
    /// Decompose the dataset and write MSGs, logs and the pooled grammar.
    Induce,
    /// Sample molecules from a grammar and report metrics.
    Generate {
        /// Grammar file; defaults to `<output>/grammar.json`.
        #[arg(long)]
        grammar: Option<PathBuf>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Run per-molecule tournaments over induced passes and write the Top-k grammar.
    Rank,
    /// Metrics for a file of sampled SMILES against the dataset.
    Eval {
        samples: PathBuf,
    },
    /// Check that every molecule is re-derived from its own rules.
    RoundtripCheck,
}

fn load_config(c: &Common) -> Result<RunConfig, PipelineError> {
    let mut cfg = match &c.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = c.seed {
        cfg.seed = v;
    }
    if let Some(v) = c.workers {
        cfg.workers = v;
    }
    if let Some(v) = c.oracle {
        cfg.oracle = v;
    }
    if let Some(v) = &c.endpoint {
        cfg.endpoint = Some(v.clone());
    }
    if let Some(v) = c.k {
        cfg.k = v;
    }
    if let Some(v) = c.mode {
        cfg.mode = match v {
            Mode::Topk => AssemblyMode::TopK,
            Mode::FirstK => AssemblyMode::FirstK,
        };
    }
    if let Some(v) = &c.dataset {
        cfg.dataset = v.clone();
    }
    if let Some(v) = &c.output {
        cfg.output = v.clone();
    }
    if let Some(v) = c.passes {
        cfg.passes = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<bool, PipelineError> {
    let mut cfg = load_config(&cli.common)?;
    let remote = Remote::from_config(&cfg)?;
    match cli.command {
        Command::Induce => {
            let s = pipeline::induce(&cfg, &remote)?;
            print!("{}", report::induce_table(&s));
            Ok(s.failures.is_empty())
        }
        Command::Generate { grammar, samples } => {
            if let Some(n) = samples {
                cfg.samples = n;
            }
            let path = grammar.unwrap_or_else(|| Layout::new(&cfg.output).grammar());
            let g = pipeline::load_grammar(&path)?;
            let s = pipeline::generate(&cfg, &g)?;
            print!("{}", report::generate_table(&s));
            Ok(true)
        }
        Command::Rank => {
            let s = pipeline::rank(&cfg, &remote)?;
            if s.discrepant == 0 {
                eprintln!("warning: no molecule has discrepant passes; standings are trivial");
            }
            print!("{}", report::rank_table(&s));
            Ok(true)
        }
        Command::Eval { samples } => {
            let r = pipeline::eval(&cfg, &samples)?;
            write_json(&Layout::new(&cfg.output).report(), &r)?;
            print!("{}", report::metrics_table(&r));
            Ok(true)
        }
        Command::RoundtripCheck => {
            let s = pipeline::roundtrip_check(&cfg, &remote)?;
            print!("{}", report::roundtrip_table(&s));
            Ok(s.reproduced == s.molecules)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
