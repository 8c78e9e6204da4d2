//! `dlab` command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 invariant
//! violation.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dlab_core::pipeline::{ErrorKind, ExperimentConfig, PipelineError};

#[derive(Parser)]
#[command(name = "dlab", version, about = "Annotator-context experiments over judgment corpora")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
pub struct Global {
    /// TOML experiment config. Flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Top-level seed; every stage seed is derived from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Directory with posts.jsonl, comments.jsonl and verdicts.jsonl.
    #[arg(long, global = true)]
    pub corpus: Option<PathBuf>,
    /// Print the merged configuration as TOML and exit.
    #[arg(long, global = true)]
    pub print_effective_config: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Validate the corpus, apply the annotator activity filter and write the result.
    Ingest(commands::IngestArgs),
    /// Find self-disclosures and write spans and category profiles.
    Extract(commands::ExtractArgs),
    /// Embed posts, comments and optionally sentences to EMBX files.
    Embed(commands::EmbedArgs),
    /// Reduce and cluster disclosure comments; attach cluster ids to profiles.
    Cluster(commands::ClusterArgs),
    /// Partition verdicts into train/val/test without leakage.
    Split(commands::SplitArgs),
    /// Draw annotator context for every verdict in a partition.
    Sample(commands::SampleArgs),
    /// Train the classifier runs for one condition.
    Train(commands::TrainArgs),
    /// Evaluate trained runs on the test partition.
    Evaluate(commands::EvaluateArgs),
    /// Coverage, diversity, PCA, n-gram and audit tables.
    Analyze(commands::AnalyzeArgs),
    /// Generate a synthetic corpus with a known judgment rule.
    Synth(commands::SynthArgs),
    /// Merge evaluation rows into one results table with significance tests.
    Report(commands::ReportArgs),
    /// Run the whole configured pipeline.
    Run(commands::RunArgs),
}

/// Base configuration with the global overrides applied.
fn effective_config(g: &Global) -> Result<ExperimentConfig, PipelineError> {
    let mut cfg = match &g.config {
        Some(p) if !p.exists() => {
            return Err(PipelineError::new("config", ErrorKind::Usage, format!("config file {} does not exist", p.display())))
        }
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(o) = &g.out {
        cfg.output_dir = o.clone();
    }
    if let Some(c) = &g.corpus {
        cfg.corpus.dir = Some(c.clone());
        cfg.corpus.posts = None;
        cfg.corpus.comments = None;
        cfg.corpus.verdicts = None;
    }
    Ok(cfg)
}

fn configure_workers() -> Result<(), PipelineError> {
    let Ok(v) = std::env::var("DLAB_WORKERS") else { return Ok(()) };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| PipelineError::new("config", ErrorKind::Usage, format!("DLAB_WORKERS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| PipelineError::new("config", ErrorKind::Invariant, e))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    configure_workers()?;
    let mut cfg = effective_config(&cli.global)?;
    commands::apply_overrides(&cli.cmd_ref(), &mut cfg)?;
    if cli.global.print_effective_config {
        print!("{}", cfg.to_toml_string());
        return Ok(());
    }
    match cli.cmd {
        Cmd::Ingest(a) => commands::ingest(&cfg, &a),
        Cmd::Extract(a) => commands::extract(&cfg, &a),
        Cmd::Embed(a) => commands::embed(&cfg, &a),
        Cmd::Cluster(a) => commands::cluster(&cfg, &a),
        Cmd::Split(a) => commands::split(&cfg, &a),
        Cmd::Sample(a) => commands::sample(&cfg, &a),
        Cmd::Train(a) => commands::train(&cfg, &a),
        Cmd::Evaluate(a) => commands::evaluate(&cfg, &a),
        Cmd::Analyze(a) => commands::analyze(&cfg, &a),
        Cmd::Synth(a) => commands::synth(&cfg, &a),
        Cmd::Report(a) => commands::report(&cfg, &a),
        Cmd::Run(a) => commands::run(&cfg, &a),
    }
}

impl Cli {
    fn cmd_ref(&self) -> commands::Overrides<'_> {
        match &self.cmd {
            Cmd::Ingest(a) => commands::Overrides::Ingest(a),
            Cmd::Embed(a) => commands::Overrides::Embed(a),
            Cmd::Cluster(a) => commands::Overrides::Cluster(a),
            Cmd::Split(a) => commands::Overrides::Split(a),
            Cmd::Train(a) => commands::Overrides::Train(&a.train),
            Cmd::Evaluate(_) | Cmd::Sample(_) | Cmd::Extract(_) | Cmd::Analyze(_) | Cmd::Synth(_) | Cmd::Report(_) => {
                commands::Overrides::None
            }
            Cmd::Run(a) => commands::Overrides::Train(&a.train),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = match e.downcast_ref::<PipelineError>() {
                Some(p) => p.kind.exit_code(),
                None => ErrorKind::Data.exit_code(),
            };
            eprintln!("error: {e:#}");
            ExitCode::from(code as u8)
        }
    }
}
