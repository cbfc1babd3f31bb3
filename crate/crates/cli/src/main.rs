use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use contrarag_cli::{CliError, Outcome, PipelineConfig, Runner, Stage};
use contrarag_core::rag::RetrievalCondition;
use contrarag_core::Execution;

/// Contradiction-aware retrieval-augmented generation over PubMed abstracts.
#[derive(Debug, Parser)]
#[command(name = "contrarag", version)]
struct Cli {
    /// Pipeline configuration file.
    #[arg(short, long, global = true, default_value = "contrarag.toml")]
    config: PathBuf,
    /// Output directory, overriding `paths.output`.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
    /// Accepted for compatibility; every stage is deterministic.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run all loops on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    /// Re-run stages even when their manifest is current.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct RankFlags {
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Context size for the retrieval conditions.
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print a default configuration.
    Init,
    /// Search PubMed and build raw evidence pools.
    Ingest,
    /// Temporal-citation balanced selection of at most 20 abstracts per query.
    Select,
    /// Embed queries, abstracts and sentences.
    Embed,
    /// Relevance, diversity and recency ranking.
    Rank(RankFlags),
    /// Pairwise contradiction scores and per-document salience.
    Contradict {
        #[arg(long)]
        theta: Option<f64>,
    },
    /// Answer every query under each retrieval condition.
    Generate {
        /// Condition to run (ms, mc, lc); repeatable.
        #[arg(long = "condition")]
        conditions: Vec<RetrievalCondition>,
        /// Configured model to run; repeatable.
        #[arg(long = "model")]
        models: Vec<String>,
        /// Keep earlier records and only fill in missing cells.
        #[arg(long)]
        resume: bool,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Score answers against the reference answers.
    Evaluate,
    /// Score/salience and period/salience distributions.
    Analyze {
        /// Joint score x salience histogram.
        #[arg(long)]
        table3: bool,
        /// Salience distribution per five-year interval.
        #[arg(long)]
        fig2: bool,
        /// Also render PNG heatmaps.
        #[arg(long)]
        png: bool,
    },
    /// Every stage in order, skipping those already current.
    Run(RankFlags),
}

fn apply_rank_flags(cfg: &mut PipelineConfig, f: &RankFlags) -> Result<(), CliError> {
    if let Some(l) = f.lambda {
        cfg.ranking.lambda = l;
    }
    if let Some(a) = f.alpha {
        cfg.ranking.alpha = a;
    }
    if let Some(k) = f.k {
        cfg.ranking.k = k;
    }
    cfg.validate()
}

fn execute(cli: Cli) -> Result<(), CliError> {
    if let Command::Init = cli.command {
        print!("{}", PipelineConfig::default().render());
        return Ok(());
    }
    if cli.seed.is_some() {
        log::debug!("--seed has no effect; the pipeline is deterministic");
    }
    let mut cfg = PipelineConfig::load(&cli.config)?;
    if let Some(out) = &cli.output {
        cfg.paths.output = std::env::current_dir()?.join(out);
    }
    let stages: Vec<Stage> = match &cli.command {
        Command::Rank(f) | Command::Run(f) => {
            apply_rank_flags(&mut cfg, f)?;
            if matches!(cli.command, Command::Rank(_)) {
                vec![Stage::Rank]
            } else {
                Vec::new()
            }
        }
        Command::Contradict { theta } => {
            if let Some(t) = theta {
                cfg.contradiction.theta = *t;
                cfg.validate()?;
            }
            vec![Stage::Contradict]
        }
        Command::Generate { k: Some(k), .. } => {
            cfg.ranking.k = *k;
            cfg.validate()?;
            vec![Stage::Generate]
        }
        Command::Ingest => vec![Stage::Ingest],
        Command::Select => vec![Stage::Select],
        Command::Embed => vec![Stage::Embed],
        Command::Generate { .. } => vec![Stage::Generate],
        Command::Evaluate => vec![Stage::Evaluate],
        Command::Analyze { .. } => vec![Stage::Analyze],
        Command::Init => unreachable!(),
    };
    let mut runner = Runner::new(cfg);
    runner.force = cli.force;
    if cli.sequential {
        runner.exec = Execution::Sequential;
    }
    match &cli.command {
        Command::Generate {
            conditions,
            models,
            resume,
            ..
        } => {
            runner.generate.conditions = (!conditions.is_empty()).then(|| conditions.clone());
            runner.generate.models = models.clone();
            runner.generate.resume = *resume;
        }
        Command::Analyze { table3, fig2, png } => {
            runner.analyze.table3 = *table3;
            runner.analyze.fig2 = *fig2;
            runner.analyze.png = *png;
        }
        _ => {}
    }
    let stages = if stages.is_empty() {
        runner.pipeline()
    } else {
        stages
    };
    for stage in stages {
        let outcome = runner.run_stage(stage)?;
        let verb = match outcome {
            Outcome::Ran => "done",
            Outcome::Skipped => "up to date",
        };
        eprintln!("{stage}: {verb}");
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            e.exit_code()
        }
    }
}
