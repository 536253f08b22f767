//! The `implicit-nade` command-line tool.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error, 3 I/O
//! error. Options may also come from a `key=value` file given with
//! `--config`; flags on the command line win.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::data::{self, feedback_rows, LogFormat, RelativeRatingTable, SplitPair};
use crate::error::{Error, Result};
use crate::eval::{self, EvalOptions, RankResult};
use crate::imf::{self, ImfConfig};
use crate::model::{Activation, NadeModel};
use crate::persist::{self, SavedModel};
use crate::synth::{self, SynthConfig};
use crate::train::{self, TrainConfig};

/// Confidence rate used when `--alpha` is not given.
pub const DEFAULT_ALPHA: f64 = 100.0;

#[derive(Debug, Parser)]
#[command(
    name = "implicit-nade",
    version,
    about = "Implicit-feedback autoregressive collaborative filtering"
)]
#[command(args_override_self = true)]
pub struct Cli {
    /// Worker threads for evaluation, ALS solves and gradient batches.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: u16,

    /// File of key=value defaults for the subcommand's flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Aggregate a watch log into per-user counts.
    Ingest(IngestArgs),
    /// Convert counts into per-item relative ratings.
    Ratings(RatingsArgs),
    /// Hold out a fraction of every user's ratings.
    Split(SplitArgs),
    /// Train a model on a ratings file.
    Train(TrainArgs),
    /// Compute MPR of a model on a split.
    Evaluate(EvaluateArgs),
    /// Retrain and evaluate for a list of confidence rates.
    Sweep(SweepArgs),
    /// Top-K recommendations for one user.
    Predict(PredictArgs),
    /// Generate a latent-factor watch log.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    /// user_id,item_id
    Event,
    /// user_id,item_id,count
    Aggregated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Nade,
    Imf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepModels {
    Nade,
    Imf,
    Both,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Event)]
    pub format: FormatArg,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct RatingsArgs {
    /// Counts in user_id,item_id,count format.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 0.1, value_parser = parse_fraction)]
    pub fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub train_out: PathBuf,
    /// Also gets a `<path>.meta.json` sidecar.
    #[arg(long)]
    pub test_out: PathBuf,
}

#[derive(Debug, Args, Clone)]
pub struct NadeArgs {
    #[arg(long, default_value_t = 0.01, value_parser = parse_non_negative)]
    pub lr: f64,
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u32).range(1..))]
    pub batch_size: u32,
    #[arg(long, default_value_t = 0.01, value_parser = parse_non_negative)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u32).range(1..))]
    pub epochs: u32,
    /// Hidden units.
    #[arg(long, default_value_t = 256, value_parser = clap::value_parser!(u32).range(1..))]
    pub hidden: u32,
    #[arg(long, default_value = "tanh")]
    pub activation: Activation,
    #[arg(long, default_value_t = 0.01, value_parser = parse_non_negative)]
    pub init_scale: f64,
}

#[derive(Debug, Args, Clone)]
pub struct ImfArgs {
    #[arg(long, default_value_t = 256, value_parser = clap::value_parser!(u32).range(1..))]
    pub factors: u32,
    #[arg(long, default_value_t = 0.1, value_parser = parse_positive)]
    pub lambda: f64,
    #[arg(long, default_value_t = 15, value_parser = clap::value_parser!(u32).range(1..))]
    pub iterations: u32,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_enum, default_value_t = ModelKind::Nade)]
    pub model: ModelKind,
    /// Ratings file (user_id,item_id,relative_rating).
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Loss trace CSV; defaults to `<out>.trace.csv`.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_ALPHA, value_parser = parse_non_negative)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub nade: NadeArgs,
    #[command(flatten)]
    pub imf: ImfArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// Confidence rate for building inputs; factorization models default
    /// to the rate stored in the model file.
    #[arg(long, value_parser = parse_non_negative)]
    pub alpha: Option<f64>,
    /// Per-pair report; a `<path>.json` summary is written next to it.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Rank all items, including ones the user watched in training.
    #[arg(long)]
    pub include_train_items: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// Comma-separated confidence rates.
    #[arg(long, default_value = "1,10,100,300", value_parser = parse_alpha_list)]
    pub alphas: AlphaList,
    #[arg(long, value_enum, default_value_t = SweepModels::Both)]
    pub models: SweepModels,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub include_train_items: bool,
    #[command(flatten)]
    pub nade: NadeArgs,
    #[command(flatten)]
    pub imf: ImfArgs,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub user: String,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, value_parser = parse_non_negative)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 500)]
    pub users: usize,
    #[arg(long, default_value_t = 200)]
    pub items: usize,
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u32).range(1..))]
    pub factors: u32,
    #[arg(long, default_value_t = 0.1, value_parser = parse_density)]
    pub density: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 3.0, value_parser = parse_non_negative)]
    pub sharpness: f64,
    #[arg(long, default_value_t = 0.5, value_parser = parse_non_negative)]
    pub popularity_spread: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaList(pub Vec<f64>);

fn parse_f64(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("'{s}' is not a number"))?;
    if !v.is_finite() {
        return Err(format!("'{s}' is not finite"));
    }
    Ok(v)
}

fn parse_non_negative(s: &str) -> std::result::Result<f64, String> {
    let v = parse_f64(s)?;
    if v < 0.0 {
        return Err(format!("{v} must be >= 0"));
    }
    Ok(v)
}

fn parse_positive(s: &str) -> std::result::Result<f64, String> {
    let v = parse_f64(s)?;
    if v <= 0.0 {
        return Err(format!("{v} must be > 0"));
    }
    Ok(v)
}

fn parse_fraction(s: &str) -> std::result::Result<f64, String> {
    let v = parse_f64(s)?;
    if !(v > 0.0 && v < 1.0) {
        return Err(format!("fraction {v} must lie strictly between 0 and 1"));
    }
    Ok(v)
}

fn parse_density(s: &str) -> std::result::Result<f64, String> {
    let v = parse_f64(s)?;
    if !(0.0..1.0).contains(&v) {
        return Err(format!("density {v} must lie in [0, 1)"));
    }
    Ok(v)
}

fn parse_alpha_list(s: &str) -> std::result::Result<AlphaList, String> {
    let values: Vec<f64> = s
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(parse_non_negative)
        .collect::<std::result::Result<_, _>>()?;
    if values.is_empty() {
        return Err("alpha list is empty".into());
    }
    Ok(AlphaList(values))
}

impl NadeArgs {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.lr,
            batch_size: self.batch_size as usize,
            weight_decay: self.weight_decay,
            epochs: self.epochs as usize,
            seed,
            init_scale: self.init_scale,
        }
    }
}

impl ImfArgs {
    pub fn config(&self, alpha: f64, seed: u64) -> ImfConfig {
        ImfConfig {
            alpha,
            factors: self.factors as usize,
            lambda: self.lambda,
            iterations: self.iterations as usize,
            seed,
        }
    }
}

/// Exit status of a failed command.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Parse { .. } | Error::Validation(_) | Error::ModelFormat(_) => 2,
        Error::Io(_) => 3,
    }
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_logging();
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads as usize)
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker threads: {e}");
            return 3;
        }
    };
    match pool.install(|| execute(cli.command)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn init_logging() {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format(|buf, record| writeln!(buf, "{}", record.args()))
        .is_test(cfg!(test))
        .try_init();
}

const SUBCOMMANDS: &[&str] = &[
    "ingest", "ratings", "split", "train", "evaluate", "sweep", "predict", "synth",
];

/// Inserts `--key value` pairs from a `--config` file right after the
/// subcommand name, so that explicit flags (which come later) override them.
fn expand_config(mut args: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut path = None;
    let mut i = 1;
    while i < args.len() {
        let a = args[i].to_string_lossy().into_owned();
        if a == "--config" && i + 1 < args.len() {
            path = Some(PathBuf::from(args[i + 1].clone()));
            break;
        }
        if let Some(p) = a.strip_prefix("--config=") {
            path = Some(PathBuf::from(p));
            break;
        }
        i += 1;
    }
    let Some(path) = path else { return Ok(args) };
    let Some(sub_pos) = args
        .iter()
        .position(|a| SUBCOMMANDS.contains(&a.to_string_lossy().as_ref()))
    else {
        return Ok(args);
    };
    let reader = BufReader::new(File::open(&path)?);
    let mut extra: Vec<OsString> = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(n + 1, format!("expected key=value in {}", path.display())))?;
        let flag = format!("--{}", key.trim().replace('_', "-"));
        match value.trim() {
            "true" => extra.push(flag.into()),
            "false" => {}
            v => {
                extra.push(flag.into());
                extra.push(v.into());
            }
        }
    }
    args.splice(sub_pos + 1..sub_pos + 1, extra);
    Ok(args)
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Ingest(a) => cmd_ingest(&a),
        Command::Ratings(a) => cmd_ratings(&a),
        Command::Split(a) => cmd_split(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Predict(a) => cmd_predict(&a),
        Command::Synth(a) => cmd_synth(&a),
    }
}

fn cmd_ingest(a: &IngestArgs) -> Result<()> {
    let format = match a.format {
        FormatArg::Event => LogFormat::EventPerLine,
        FormatArg::Aggregated => LogFormat::PreAggregated,
    };
    let table = data::ingest(open(&a.input)?, format)?;
    table.write_to(create(&a.output)?)?;
    log::info!(
        "ingested {} users, {} items, {} pairs",
        table.n_users(),
        table.n_items(),
        table.nnz()
    );
    Ok(())
}

fn cmd_ratings(a: &RatingsArgs) -> Result<()> {
    let table = data::ingest(open(&a.input)?, LogFormat::PreAggregated)?;
    let ratings = data::relative_ratings(&table)?;
    ratings.write_to(create(&a.output)?)?;
    log::info!("wrote {} relative ratings", ratings.nnz());
    Ok(())
}

fn cmd_split(a: &SplitArgs) -> Result<()> {
    let ratings = RelativeRatingTable::read_from(open(&a.input)?)?;
    let split = data::holdout_split(&ratings, a.fraction, a.seed)?;
    split.write_to(create(&a.train_out)?, create(&a.test_out)?)?;
    let meta = serde_json::to_string_pretty(&split.meta()).expect("plain struct serialises");
    let mut side = create(&with_suffix(&a.test_out, ".meta.json"))?;
    writeln!(side, "{meta}")?;
    side.flush()?;
    log::info!(
        "split: {} train / {} test entries (fraction {}, seed {})",
        split.train.nnz(),
        split.test.nnz(),
        a.fraction,
        a.seed
    );
    Ok(())
}

/// Initialises and trains a neural model, returning it with its loss trace.
pub fn fit_nade(train: &RelativeRatingTable, alpha: f64, args: &NadeArgs, seed: u64) -> Result<(NadeModel, Vec<f64>)> {
    let cfg = args.train_config(seed);
    cfg.validate()?;
    let rows = feedback_rows(train, alpha)?;
    let mut model = NadeModel::init(
        train.n_items(),
        args.hidden as usize,
        args.activation,
        seed,
        args.init_scale,
    );
    let trace = train::train(&mut model, &rows, &cfg)?;
    Ok((model, trace))
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let table = RelativeRatingTable::read_from(open(&a.train)?)?;
    let trace_path = a.trace.clone().unwrap_or_else(|| with_suffix(&a.out, ".trace.csv"));
    match a.model {
        ModelKind::Nade => {
            log::info!(
                "nade: lr={} batch={} decay={} H={} epochs={} activation={} init_scale={} alpha={} seed={}",
                a.nade.lr,
                a.nade.batch_size,
                a.nade.weight_decay,
                a.nade.hidden,
                a.nade.epochs,
                a.nade.activation.name(),
                a.nade.init_scale,
                a.alpha,
                a.seed
            );
            let (model, trace) = fit_nade(&table, a.alpha, &a.nade, a.seed)?;
            persist::save_nade(&model, create(&a.out)?)?;
            write_trace(&trace_path, "epoch,loss", &trace)?;
            log::info!(
                "final mean ordered loss {:.6}",
                trace.last().copied().unwrap_or(f64::NAN)
            );
        }
        ModelKind::Imf => {
            log::info!(
                "imf: F={} lambda={} iterations={} alpha={} seed={}",
                a.imf.factors,
                a.imf.lambda,
                a.imf.iterations,
                a.alpha,
                a.seed
            );
            let (model, trace) = imf::imf_train(&table, &a.imf.config(a.alpha, a.seed))?;
            persist::save_imf(&model, create(&a.out)?)?;
            write_trace(&trace_path, "iteration,objective", &trace)?;
        }
    }
    Ok(())
}

fn write_trace(path: &Path, header: &str, values: &[f64]) -> Result<()> {
    let mut out = create(path)?;
    writeln!(out, "{header}")?;
    for (k, v) in values.iter().enumerate() {
        writeln!(out, "{},{}", k + 1, v)?;
    }
    out.flush()?;
    Ok(())
}

fn load_model(path: &Path) -> Result<SavedModel> {
    persist::load_any(open(path)?)
}

fn check_dims(model: &SavedModel, train: &RelativeRatingTable) -> Result<()> {
    let (m, u) = match model {
        SavedModel::Nade(n) => (n.n_items(), None),
        SavedModel::Imf(f) => (f.n_items(), Some(f.n_users())),
    };
    if m != train.n_items() {
        return Err(Error::validation(format!(
            "model covers {m} items but the training file has {}",
            train.n_items()
        )));
    }
    if let Some(u) = u {
        if u < train.n_users() {
            return Err(Error::validation(format!(
                "model covers {u} users but the data has {}",
                train.n_users()
            )));
        }
    }
    Ok(())
}

fn model_alpha(model: &SavedModel, alpha: Option<f64>) -> f64 {
    match (alpha, model) {
        (Some(a), _) => a,
        (None, SavedModel::Imf(f)) => f.alpha,
        (None, SavedModel::Nade(_)) => DEFAULT_ALPHA,
    }
}

/// MPR of a saved or freshly trained model on a split.
pub fn evaluate_model(
    model: &SavedModel,
    train: &RelativeRatingTable,
    test: &RelativeRatingTable,
    alpha: f64,
    options: EvalOptions,
) -> Result<RankResult> {
    check_dims(model, train)?;
    match model {
        SavedModel::Nade(n) => eval::mpr(|_, fb| n.logits_all(fb).to_vec(), train, test, alpha, options),
        SavedModel::Imf(f) => eval::mpr(|u, _| imf::imf_predict(f, u), train, test, alpha, options),
    }
}

fn cmd_evaluate(a: &EvaluateArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let (train, test) = SplitPair::read_from(open(&a.train)?, open(&a.test)?)?;
    let alpha = model_alpha(&model, a.alpha);
    let options = EvalOptions {
        exclude_train_items: !a.include_train_items,
    };
    let result = evaluate_model(&model, &train, &test, alpha, options)?;
    if let Some(path) = &a.report {
        result.write_report(&train.users, &train.items, create(path)?)?;
        let summary = serde_json::to_string_pretty(&result.summary()).expect("plain struct serialises");
        let mut side = create(&with_suffix(path, ".json"))?;
        writeln!(side, "{summary}")?;
        side.flush()?;
    }
    log::info!(
        "{} users, {} pairs, {} skipped",
        result.n_users,
        result.n_pairs(),
        result.n_skipped
    );
    println!("MPR,{}", result.mpr);
    Ok(())
}

fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    let (train, test) = SplitPair::read_from(open(&a.train)?, open(&a.test)?)?;
    let options = EvalOptions {
        exclude_train_items: !a.include_train_items,
    };
    let kinds: &[ModelKind] = match a.models {
        SweepModels::Nade => &[ModelKind::Nade],
        SweepModels::Imf => &[ModelKind::Imf],
        SweepModels::Both => &[ModelKind::Nade, ModelKind::Imf],
    };
    let mut rows = Vec::new();
    for &kind in kinds {
        for &alpha in &a.alphas.0 {
            let model = match kind {
                ModelKind::Nade => SavedModel::Nade(fit_nade(&train, alpha, &a.nade, a.seed)?.0),
                ModelKind::Imf => SavedModel::Imf(imf::imf_train(&train, &a.imf.config(alpha, a.seed))?.0),
            };
            let result = evaluate_model(&model, &train, &test, alpha, options)?;
            let name = match kind {
                ModelKind::Nade => "nade",
                ModelKind::Imf => "imf",
            };
            log::info!("{name} alpha={alpha}: MPR {:.4}", result.mpr);
            rows.push((name, alpha, result.mpr));
        }
    }
    let mut out = create(&a.out)?;
    writeln!(out, "model,alpha,mpr")?;
    for (name, alpha, mpr) in rows {
        writeln!(out, "{name},{alpha},{mpr}")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a sweep CSV back into `(model, alpha, mpr)` rows.
pub fn read_sweep<R: BufRead>(source: R) -> Result<Vec<(String, f64, f64)>> {
    let mut rows = Vec::new();
    for (n, line) in source.lines().enumerate() {
        let line = line?;
        if n == 0 {
            if line.trim() != "model,alpha,mpr" {
                return Err(Error::parse(1, "expected header 'model,alpha,mpr'"));
            }
            continue;
        }
        let f: Vec<&str> = line.trim().split(',').collect();
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::parse(n + 1, format!("invalid number '{s}'")))
        };
        match f.as_slice() {
            [m, a, v] => rows.push((m.to_string(), num(a)?, num(v)?)),
            _ => return Err(Error::parse(n + 1, "expected 3 fields")),
        }
    }
    Ok(rows)
}

/// Top-`k` unwatched items for one user as `(item_id, score)`, best first,
/// ties broken by ascending item id.
pub fn recommend(
    model: &SavedModel,
    train: &RelativeRatingTable,
    user: &str,
    k: usize,
    alpha: f64,
) -> Result<Vec<(String, f64)>> {
    check_dims(model, train)?;
    let u = train
        .users
        .get(user)
        .ok_or_else(|| Error::validation(format!("unknown user id '{user}'")))?;
    let fb = data::build_feedback(train.row(u), alpha, train.n_items())?;
    let scores = match model {
        SavedModel::Nade(n) => n.predict_all(&fb),
        SavedModel::Imf(f) => imf::imf_predict(f, u),
    };
    let mut ranked: Vec<(String, f64)> = (0..train.n_items())
        .filter(|&i| !fb.like(i))
        .map(|i| (train.items.id(i).to_owned(), scores[i]))
        .collect();
    ranked.sort_by(|x, y| y.1.total_cmp(&x.1).then_with(|| x.0.cmp(&y.0)));
    ranked.truncate(k);
    Ok(ranked)
}

fn cmd_predict(a: &PredictArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let train = RelativeRatingTable::read_from(open(&a.train)?)?;
    let alpha = model_alpha(&model, a.alpha);
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "item_id,score")?;
    for (item, score) in recommend(&model, &train, &a.user, a.k, alpha)? {
        writeln!(out, "{item},{score}")?;
    }
    Ok(())
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let cfg = SynthConfig {
        users: a.users,
        items: a.items,
        factors: a.factors as usize,
        density: a.density,
        seed: a.seed,
        sharpness: a.sharpness,
        popularity_spread: a.popularity_spread,
    };
    let data = synth::generate(&cfg)?;
    data.table.write_to(create(&a.out)?)?;
    log::info!(
        "synthesised {} pairs over {} users and {} items",
        data.table.nnz(),
        data.table.n_users(),
        data.table.n_items()
    );
    Ok(())
}
