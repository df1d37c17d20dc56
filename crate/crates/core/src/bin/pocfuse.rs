use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand};
use pocfuse::pipeline::{self, Command, ConfigFile, Overrides, PipelineConfig, PipelineError, Stage};

#[derive(Parser)]
#[command(name = "pocfuse", version, about = "Complete missing key aspects of PoC reports from CVE entries and related reports")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, env = "POCFUSE_WORKSPACE")]
    workspace: Option<PathBuf>,
    /// Report file for one source, e.g. exploitdb=edb.jsonl. Repeatable.
    #[arg(long = "source", global = true, value_name = "NAME=PATH")]
    sources: Vec<String>,
    #[arg(long, global = true)]
    cve: Option<PathBuf>,
    #[arg(long, global = true)]
    code_threshold: Option<f64>,
    #[arg(long, global = true)]
    text_threshold: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, env = "POCFUSE_EXTRACTOR_URL")]
    extractor_url: Option<String>,
    #[arg(long, global = true, env = "POCFUSE_CLASSIFIER_URL")]
    classifier_url: Option<String>,
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// markdown or csv
    #[arg(long, global = true)]
    format: Option<String>,
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    Ingest,
    Classify,
    Extract,
    Link,
    Complete,
    Stats,
    /// Labelled pair training set for an external classifier.
    Pairs,
    RunAll,
}

impl Cmd {
    fn command(self) -> Command {
        match self {
            Cmd::Ingest => Command::Stage(Stage::Ingest),
            Cmd::Classify => Command::Stage(Stage::Classify),
            Cmd::Extract => Command::Stage(Stage::Extract),
            Cmd::Link => Command::Stage(Stage::Link),
            Cmd::Complete => Command::Stage(Stage::Complete),
            Cmd::Stats => Command::Stage(Stage::Stats),
            Cmd::Pairs => Command::Stage(Stage::Pairs),
            Cmd::RunAll => Command::RunAll,
        }
    }
}

fn resolve(cli: &Cli) -> Result<PipelineConfig, PipelineError> {
    let (file, base) = match &cli.config {
        Some(path) => {
            let file = PipelineConfig::load_file(path).map_err(PipelineError::Config)?;
            let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
            (file, base)
        }
        None => (ConfigFile::default(), PathBuf::new()),
    };
    let flags = Overrides {
        workspace: cli.workspace.clone(),
        sources: cli.sources.clone(),
        cve: cli.cve.clone(),
        code_threshold: cli.code_threshold,
        text_threshold: cli.text_threshold,
        seed: cli.seed,
        extractor_url: cli.extractor_url.clone(),
        classifier_url: cli.classifier_url.clone(),
        jobs: cli.jobs,
        format: cli.format.clone(),
    };
    PipelineConfig::resolve(file, &base, flags).map_err(PipelineError::Config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match resolve(&cli).and_then(|c| pipeline::run(cli.command.command(), &c)) {
        Ok(outcomes) => {
            println!("{}", serde_json::json!({"status": "ok", "stages": outcomes}));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.summary_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
