use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use morphoprobe::pipeline::{
    cmd_embed, cmd_evaluate, cmd_report, cmd_train, cmd_validate_stimuli, Overrides,
    PipelineConfig, PipelineError, SpaceSelection,
};
use morphoprobe::synth::{write_corpus, CorpusSpec};
use morphoprobe::Execution;

#[derive(Parser)]
#[command(name = "morphoprobe", version, about = "Word probes and analogy evaluation over speech model activations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Pipeline configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed; overrides the file value.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Restrict the run to a single layer.
    #[arg(long, global = true)]
    layer: Option<u16>,
    /// raw, probe or both.
    #[arg(long, global = true)]
    space: Option<SpaceSelection>,
    /// Worker threads (0 = all cores, 1 = sequential).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory; overrides the file value.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// More logging (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Train one probe per configured layer.
    Train,
    /// Pool token embeddings into stores.
    Embed,
    /// Run the enabled evaluations into `results/`.
    Evaluate,
    /// Consolidate results into figure-data CSVs under `report/`.
    Report,
    /// Check curated materials and list the corpus's inflection pairs.
    ValidateStimuli,
    /// Write a planted synthetic corpus and a matching `pipeline.toml`.
    Synth {
        #[arg(long, default_value_t = 12)]
        nouns: usize,
        #[arg(long, default_value_t = 12)]
        verbs: usize,
        #[arg(long, default_value_t = 4)]
        tokens: usize,
        #[arg(long, default_value_t = 24)]
        dim: usize,
        /// Layers to emit.
        #[arg(long, value_delimiter = ',', default_value = "0,1")]
        layers: Vec<u16>,
    },
}

fn load(cli: &Cli) -> Result<PipelineConfig, PipelineError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| PipelineError::Config("--config is required".into()))?;
    let mut cfg = PipelineConfig::read(path)?;
    cfg.apply(&Overrides {
        seed: cli.seed,
        layer: cli.layer,
        space: cli.space,
        out: cli.out.clone(),
    });
    Ok(cfg)
}

fn run(cli: &Cli, exec: Execution) -> Result<(), PipelineError> {
    match &cli.command {
        Command::Train => {
            for p in cmd_train(&load(cli)?, exec)? {
                println!("{}", p.display());
            }
        }
        Command::Embed => {
            for p in cmd_embed(&load(cli)?, exec)? {
                println!("{}", p.display());
            }
        }
        Command::Evaluate => {
            let r = cmd_evaluate(&load(cli)?, exec)?;
            println!("{} result files written", r.files.len());
            for f in &r.failures {
                println!("partial failure: {f}");
            }
        }
        Command::Report => {
            let out = match (&cli.out, &cli.config) {
                (Some(o), _) => o.clone(),
                (None, Some(_)) => load(cli)?.out_dir(),
                (None, None) => return Err(PipelineError::Config("report needs --out or --config".into())),
            };
            let idx = cmd_report(&out)?;
            for f in &idx.written {
                println!("wrote report/{f}");
            }
            for (f, input) in &idx.missing {
                println!("skipped {f}: results/{input} missing");
            }
        }
        Command::ValidateStimuli => {
            let r = cmd_validate_stimuli(&load(cli)?)?;
            for c in &r.checks {
                println!("{} {}: {}", if c.ok { "ok  " } else { "FAIL" }, c.item, c.detail);
            }
            println!("{} inflection pairs, {} skipped", r.pairs.len(), r.skipped.len());
            if !r.ok() {
                return Err(PipelineError::Validation("some materials failed".into()));
            }
        }
        Command::Synth { nouns, verbs, tokens, dim, layers } => {
            let dir = cli
                .out
                .clone()
                .ok_or_else(|| PipelineError::Config("synth needs --out".into()))?;
            let spec = CorpusSpec {
                nouns: *nouns,
                verbs: *verbs,
                tokens_per_word: *tokens,
                dim: *dim,
                layers: layers.clone(),
                seed: cli.seed.unwrap_or(0),
                ..CorpusSpec::default()
            };
            let c = write_corpus(&spec, &dir)?;
            let cfg = PipelineConfig::fixture(layers, cli.seed.unwrap_or(0));
            let path = dir.join("pipeline.toml");
            std::fs::write(&path, cfg.to_toml())
                .map_err(|e| PipelineError::Failed(format!("{}: {e}", path.display())))?;
            println!(
                "{} utterances, {} tokens; config at {}",
                c.n_utterances,
                c.n_tokens,
                path.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let jobs = cli.jobs.unwrap_or(0);
    let exec = if jobs == 1 { Execution::Sequential } else { Execution::Parallel };
    if let Err(e) = morphoprobe::exec::set_threads(jobs) {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    match run(&cli, exec) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
