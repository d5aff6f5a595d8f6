use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use dph_cli::commands;
use dph_cli::config::RunConfig;
use dph_cli::synth::SynthParams;

#[derive(Parser)]
#[command(name = "dph", version, about = "Binary hash codes for implicit-feedback recommendation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration; flags override its values.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "DPH_THREADS")]
    threads: Option<usize>,
    /// Only print warnings and errors.
    #[arg(long, short, global = true, conflicts_with = "verbose")]
    quiet: bool,
    /// Repeat for more detail.
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args, Default)]
struct Overrides {
    /// Published layer sizes, code length and vocabulary cap.
    #[arg(long, global = true)]
    paper_scale: bool,
    /// Seed for every random stage.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    interactions: Option<PathBuf>,
    #[arg(long, global = true)]
    documents: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    sparsity: Option<f64>,
    #[arg(long, global = true)]
    cold_threshold: Option<usize>,
    #[arg(long, global = true)]
    rep: Option<usize>,
    #[arg(long, global = true)]
    vocab_cap: Option<usize>,
    /// Code length in bits.
    #[arg(long, global = true)]
    bits: Option<usize>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true)]
    beta: Option<f64>,
    #[arg(long, global = true)]
    lambda: Option<f64>,
    #[arg(long, global = true)]
    outer_iters: Option<usize>,
    #[arg(long, global = true)]
    pretrain_epochs: Option<usize>,
    #[arg(long, global = true)]
    finetune_epochs: Option<usize>,
    #[arg(long, global = true)]
    negatives: Option<usize>,
    #[arg(long, global = true)]
    k_max: Option<usize>,
    /// Item counts for `bench`, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    bench_m: Option<Vec<usize>>,
}

#[derive(Subcommand)]
enum Command {
    /// Vectorize documents and split the feedback.
    Prepare,
    /// Pretrain the encoder and fit codes.
    Train,
    /// Accuracy@k and MRR on the sparse and cold test sets.
    Eval,
    /// Hamming versus float top-10 retrieval timings.
    Bench,
    /// Write a planted-block corpus.
    Synth(SynthArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Directory for interactions.csv, documents.jsonl and blocks.json.
    #[arg(long, default_value = ".")]
    dir: PathBuf,
    #[arg(long, default_value_t = 200)]
    users: usize,
    #[arg(long, default_value_t = 300)]
    items: usize,
    #[arg(long, default_value_t = 4)]
    blocks: usize,
    #[arg(long, default_value_t = 0.3)]
    density: f64,
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    #[arg(long, default_value_t = 0.1)]
    cold_fraction: f64,
}

fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let o = &cli.overrides;
    if o.paper_scale {
        cfg = cfg.paper_scale();
    }
    if let Some(s) = o.seed {
        cfg.set_seed(s);
    }
    macro_rules! set {
        ($($field:ident => $target:expr),* $(,)?) => {
            $(if let Some(v) = o.$field.clone() { $target = v; })*
        };
    }
    set! {
        interactions => cfg.paths.interactions,
        documents => cfg.paths.documents,
        out => cfg.paths.output,
        sparsity => cfg.split.sparsity_level,
        cold_threshold => cfg.split.cold_threshold,
        rep => cfg.data.rep_index,
        vocab_cap => cfg.data.vocab_cap,
        bits => cfg.hyper.r,
        alpha => cfg.hyper.alpha,
        beta => cfg.hyper.beta,
        lambda => cfg.hyper.lambda,
        outer_iters => cfg.hyper.outer_iters,
        pretrain_epochs => cfg.dae.pretrain.epochs,
        finetune_epochs => cfg.dae.finetune.epochs,
        negatives => cfg.eval.n_negatives,
        k_max => cfg.eval.k_max,
        bench_m => cfg.bench.m_list,
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    if let Command::Synth(args) = &cli.command {
        let params = SynthParams {
            n_users: args.users,
            n_items: args.items,
            blocks: args.blocks,
            density: args.density,
            noise: args.noise,
            cold_fraction: args.cold_fraction,
            seed: cli.overrides.seed.unwrap_or(0),
            ..SynthParams::default()
        };
        return commands::synth(&params, &args.dir);
    }
    let cfg = resolve_config(&cli)?;
    match cli.command {
        Command::Prepare => {
            let stats = commands::prepare(&cfg).context("prepare")?;
            print!("{}", stats.table());
        }
        Command::Train => {
            let m = commands::train(&cfg).context("train")?;
            println!("artifact {} after {} iterations", m.artifact_sha256, m.iterations);
        }
        Command::Eval => {
            let s = commands::eval(&cfg).context("eval")?;
            for r in [&s.reports.sparse, &s.reports.cold] {
                println!(
                    "{:<7} cases {:>6}  Acc@10 {:.4}  MRR {:.4}",
                    r.tag.as_str(),
                    r.n_test_cases,
                    r.accuracy(10),
                    r.mrr
                );
            }
        }
        Command::Bench => {
            let report = commands::bench(&cfg).context("bench")?;
            for row in &report.rows {
                println!("{:>9} {:?} {:.0} ns/query", row.m, row.representation, row.ns_per_query);
            }
        }
        Command::Synth(_) => unreachable!("handled above"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet {
        "warn"
    } else {
        match cli.verbose {
            0 => "info",
            1 => "debug",
            _ => "trace",
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::FAILURE
        }
    }
}
