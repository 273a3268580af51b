mod model_file;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use rulelist::bench::bench;
use rulelist::dataset::{load_csv, load_csv_unlabeled, BinarizeOptions, Binarizer};
use rulelist::evaluate::cross_validate;
use rulelist::miner::MineOptions;
use rulelist::pipeline::{build_pool, train, Lambda, Mining, TrainOptions};
use rulelist::posterior::Hyperparams;
use rulelist::search::{auto_lambda, MoveWeights, SearchConfig};
use rulelist::Error;

use crate::model_file::ModelFile;

#[derive(Parser, Debug)]
#[command(name = "rulelist", version, about = "Learn and apply Bayesian rule lists")]
struct Cli {
    /// Only print warnings and errors.
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Learn a rule list from a labelled CSV and write it as JSON.
    Train(TrainArgs),
    /// Score a CSV with a saved model.
    Predict(PredictArgs),
    /// k-fold cross-validation.
    Cv(CvArgs),
    /// Time the bit-vector capture engine against the set-based one.
    Bench(BenchArgs),
}

#[derive(Args, Debug, Clone)]
struct DataArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    data: PathBuf,

    /// Name of the label column.
    #[arg(long)]
    label: String,

    /// Label text meaning class 1. Without it labels must be 0/1.
    #[arg(long)]
    positive_label: Option<String>,

    #[arg(long, default_value_t = 4)]
    numeric_bins: usize,

    /// Levels rarer than this fraction of rows merge into `col=OTHER`.
    #[arg(long, default_value_t = 0.01)]
    rare_level_threshold: f64,
}

#[derive(Args, Debug, Clone)]
struct MiningArgs {
    /// Fixed minimum support fraction. Without it the support is tuned.
    #[arg(long)]
    min_support: Option<f64>,

    /// Pool size the support tuner aims for.
    #[arg(long, default_value_t = 300)]
    target_rules: usize,

    #[arg(long, default_value_t = 1)]
    min_card: usize,

    #[arg(long, default_value_t = 2)]
    max_card: usize,

    /// Write the mined pool (`id<TAB>literals<TAB>support`) here.
    #[arg(long)]
    dump_pool: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct ModelArgs {
    /// Expected list length. Without it λ is chosen by a pilot run.
    #[arg(long, conflicts_with = "auto_lambda")]
    lambda: Option<f64>,

    /// Choose λ from a pilot run at λ = 5 (the default).
    #[arg(long)]
    auto_lambda: bool,

    #[arg(long, default_value_t = 1.0)]
    eta: f64,

    #[arg(long, default_value_t = 1.0)]
    alpha0: f64,

    #[arg(long, default_value_t = 1.0)]
    alpha1: f64,
}

#[derive(Args, Debug, Clone)]
struct SearchArgs {
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
    chains: u64,

    #[arg(long, default_value_t = 5000, value_parser = clap::value_parser!(u64).range(1..))]
    iterations: u64,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    #[arg(long, default_value_t = 1)]
    initial_length: usize,

    /// Do not cap list length by the maximum-posterior length bound.
    #[arg(long)]
    no_mmax_cap: bool,

    /// Do not screen restarts with the prefix bound.
    #[arg(long)]
    no_prefix_screen: bool,

    /// Run chains serially so results do not depend on scheduling.
    #[arg(long)]
    deterministic: bool,

    /// Write one CSV line per improvement of the best list here.
    #[arg(long)]
    search_log: Option<PathBuf>,
}

impl SearchArgs {
    fn config(&self) -> SearchConfig {
        SearchConfig {
            chains: self.chains as usize,
            iterations: self.iterations as usize,
            seed: self.seed,
            initial_length: self.initial_length,
            enforce_m_max: !self.no_mmax_cap,
            prefix_screen: !self.no_prefix_screen,
            weights: MoveWeights::default(),
            deterministic: self.deterministic,
        }
    }
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    mining: MiningArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    search: SearchArgs,

    /// Where to write the model JSON.
    #[arg(long, default_value = "model.json")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,

    #[arg(long)]
    data: PathBuf,

    /// Output CSV; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CvArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    mining: MiningArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    search: SearchArgs,

    #[arg(long, default_value_t = 10)]
    folds: usize,

    /// Seed for the fold shuffle.
    #[arg(long, default_value_t = 0)]
    fold_seed: u64,

    /// Per-fold report (`fold,auc,accuracy,n_rules,seconds`).
    #[arg(long)]
    out: Option<PathBuf>,

    /// `n_rules,auc` pairs for sparsity plots.
    #[arg(long)]
    scatter: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    mining: MiningArgs,
    #[command(flatten)]
    model: ModelArgs,

    #[arg(long, default_value_t = 1)]
    chains: usize,

    #[arg(long, default_value_t = 2000)]
    iterations: usize,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// JSON report path.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn binarize_options(d: &DataArgs) -> BinarizeOptions {
    BinarizeOptions {
        numeric_bins: d.numeric_bins,
        rare_level_threshold: d.rare_level_threshold,
    }
}

fn mining(m: &MiningArgs) -> Mining {
    match m.min_support {
        Some(s) => Mining::Fixed(MineOptions {
            min_support: s,
            min_card: m.min_card,
            max_card: m.max_card,
        }),
        None => Mining::Tuned {
            target: m.target_rules,
            min_card: m.min_card,
            max_card: m.max_card,
        },
    }
}

fn train_options(d: &DataArgs, m: &MiningArgs, h: &ModelArgs, s: &SearchArgs) -> TrainOptions {
    TrainOptions {
        binarize: binarize_options(d),
        mining: mining(m),
        lambda: h.lambda.map_or(Lambda::Auto, Lambda::Fixed),
        eta: h.eta,
        alpha0: h.alpha0,
        alpha1: h.alpha1,
        search: s.config(),
    }
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).with_context(|| format!("writing {}", path.display()))
}

fn cmd_train(args: TrainArgs, quiet: bool) -> Result<()> {
    let d = &args.data;
    let table = load_csv(&d.data, &d.label, d.positive_label.as_deref())?;
    let opts = train_options(d, &args.mining, &args.model, &args.search);
    let fitted = train(&table, &opts)?;
    if let Some(path) = &args.mining.dump_pool {
        write_file(path, &fitted.pool.dump())?;
    }
    if let Some(path) = &args.search.search_log {
        let mut log = String::from("chain,iteration,m,log_prior,log_likelihood,log_posterior\n");
        for i in &fitted.outcome.improvements {
            log.push_str(&format!(
                "{},{},{},{},{},{}\n",
                i.chain, i.iteration, i.m, i.log_prior, i.log_likelihood, i.log_posterior
            ));
        }
        write_file(path, &log)?;
    }
    let file = ModelFile::new(
        d.label.clone(),
        d.positive_label.clone(),
        fitted.min_support,
        fitted.binarizer.clone(),
        fitted.model.clone(),
    );
    write_file(&args.out, &file.to_json()?)?;
    if !quiet {
        println!("{}", fitted.model);
    }
    log::info!(
        "log posterior {:.3}, lambda {}, {} rules, {:.2}s; model written to {}",
        fitted.model.posterior.log_posterior,
        fitted.hyperparams.lambda,
        fitted.model.len(),
        fitted.model.wall_seconds,
        args.out.display()
    );
    Ok(())
}

fn cmd_predict(args: PredictArgs) -> Result<()> {
    let text = fs::read_to_string(&args.model)
        .with_context(|| format!("reading model {}", args.model.display()))?;
    let file = ModelFile::from_json(&text)?;
    let table = load_csv_unlabeled(&args.data, Some(&file.label))?;
    let needed = file.model.referenced_features();
    let encoder: Binarizer = file.features.restricted_to(&needed);
    let data = encoder.transform(&table)?;
    let predictions = file.model.predict_dataset(&data)?;
    let mut out = String::from("row,probability,rule_index\n");
    for (row, (p, j)) in predictions.iter().enumerate() {
        out.push_str(&format!("{},{},{}\n", row + 1, p, j));
    }
    match &args.out {
        Some(path) => write_file(path, &out)?,
        None => std::io::stdout().write_all(out.as_bytes())?,
    }
    Ok(())
}

fn cmd_cv(args: CvArgs, quiet: bool) -> Result<()> {
    let d = &args.data;
    let table = load_csv(&d.data, &d.label, d.positive_label.as_deref())?;
    let opts = train_options(d, &args.mining, &args.model, &args.search);
    let report = cross_validate(&table, args.folds, args.fold_seed, &opts)?;
    if let Some(path) = &args.out {
        write_file(path, &report.to_csv())?;
    }
    if let Some(path) = &args.scatter {
        write_file(path, &report.scatter_csv())?;
    }
    if !quiet {
        print!("{}", report.to_csv());
        for (name, s) in [
            ("auc", report.auc),
            ("accuracy", report.accuracy),
            ("n_rules", report.n_rules),
            ("seconds", report.seconds),
        ] {
            println!("{name}: mean {:.4} median {:.4} std {:.4}", s.mean, s.median, s.std);
        }
    }
    Ok(())
}

fn cmd_bench(args: BenchArgs, quiet: bool) -> Result<()> {
    let d = &args.data;
    let table = load_csv(&d.data, &d.label, d.positive_label.as_deref())?;
    let data = rulelist::binarize(&table, &binarize_options(d))?;
    let (_, pool) = build_pool(&data, &mining(&args.mining))?;
    let cfg = SearchConfig {
        chains: args.chains.max(1),
        iterations: args.iterations,
        seed: args.seed,
        deterministic: true,
        ..Default::default()
    };
    let mut hp = Hyperparams {
        lambda: 5.0,
        eta: args.model.eta,
        alpha0: args.model.alpha0,
        alpha1: args.model.alpha1,
    };
    if let Some(l) = args.model.lambda {
        hp.lambda = l;
    } else if args.model.auto_lambda && args.iterations > 0 {
        hp.lambda = auto_lambda(&pool, data.labels(), &hp, &cfg)?;
    }
    let report = bench(&pool, data.labels(), &hp, &cfg)?;
    if let Some(path) = &args.out {
        write_file(path, &serde_json::to_string_pretty(&report)?)?;
    }
    if !quiet {
        println!("rows {}, pool {}, chains {}, steps per chain {}", data.n(), pool.len(), cfg.chains, cfg.iterations);
        for t in [&report.bitvector, &report.naive] {
            println!("{:<10} {:>10.4}s  best log posterior {:.3}", t.backend, t.seconds, t.best_log_posterior);
        }
        println!("speedup {:.1}x", report.speedup);
        println!("identical best lists: {}", report.identical_best);
    }
    Ok(())
}

/// Exit status by failure class: 2 usage, 3 data, 4 empty pool, 5 internal.
fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<model_file::FormatError>().is_some() {
        return 3;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::InvalidParameter(_) | Error::AlphaUnsupported { .. }) => 2,
        Some(
            Error::MissingFile(_)
            | Error::Io { .. }
            | Error::Csv { .. }
            | Error::MissingLabelColumn { .. }
            | Error::BadLabelValue { .. }
            | Error::BadNumericValue { .. }
            | Error::DuplicateColumn(_)
            | Error::EmptyTable
            | Error::MissingFeature(_)
            | Error::FeatureMismatch(_)
            | Error::SingleClassLabels
            | Error::DegenerateFold { .. },
        ) => 3,
        Some(Error::EmptyPool { .. }) => 4,
        Some(Error::InternalInconsistency(_)) => 5,
        _ => 1,
    }
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("RULELIST_THREADS") {
        let n: usize = v
            .parse()
            .with_context(|| format!("RULELIST_THREADS must be a positive integer, got `{v}`"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .context("configuring the worker pool")?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    let result = init_threads().and_then(|_| match cli.command {
        Command::Train(a) => cmd_train(a, cli.quiet),
        Command::Predict(a) => cmd_predict(a),
        Command::Cv(a) => cmd_cv(a, cli.quiet),
        Command::Bench(a) => cmd_bench(a, cli.quiet),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
