use std::io::{IsTerminal, Write};
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use tenn_core::checkpoint::Checkpoint;
use tenn_core::dataset::{self, ColorSample};
use tenn_core::experiment::{
    self, compare_scalers, evaluate_split, nearest_colors, split_fingerprint, train_pipeline,
    ExperimentConfig, RecipePredictor, REFERENCE_PARAM_COUNT,
};
use tenn_core::network::{DEFAULT_BATCH_SIZE, DEFAULT_EPOCHS, DEFAULT_LEARNING_RATE};
use tenn_core::tokenizer::DEFAULT_MAX_LEN;
use tenn_core::{Metric, Rgb, ScaleMethod};

use crate::service::{self, ServiceState};

#[derive(Debug, Parser)]
#[command(
    name = "tenn",
    version,
    about = "Infer RGB color recipes from free-text color descriptions"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write a checkpoint.
    Train(TrainCmd),
    /// Predict a recipe for a description.
    Infer(InferCmd),
    /// Score a checkpoint on its held-out split.
    Evaluate(EvaluateCmd),
    /// Train one model per normalization method and tabulate accuracy.
    CompareScalers(CompareCmd),
    /// Serve a checkpoint over HTTP.
    Serve(ServeCmd),
    /// Print checkpoint metadata.
    ModelInfo(ModelInfoCmd),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Text,
    Json,
}

#[derive(Debug, Args)]
pub struct TrainingArgs {
    /// Dataset CSV with header `name,r,g,b`. Defaults to the bundled color chart.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value_t = experiment::DEFAULT_SEED)]
    pub seed: u64,
    /// Fraction of samples used for training.
    #[arg(long, default_value_t = experiment::DEFAULT_RATIO)]
    pub ratio: f64,
    #[arg(long, default_value = "minmax")]
    pub scaler: ScaleMethod,
    /// Hidden layer widths, comma separated. Defaults to 64 x 8, 32.
    #[arg(long, value_delimiter = ',')]
    pub layers: Option<Vec<usize>>,
    #[arg(long, default_value_t = DEFAULT_MAX_LEN)]
    pub max_len: usize,
    #[arg(long, default_value_t = DEFAULT_EPOCHS)]
    pub epochs: usize,
    #[arg(long, default_value_t = DEFAULT_LEARNING_RATE)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = DEFAULT_BATCH_SIZE)]
    pub batch_size: usize,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Number of held-out samples in the ΔE evaluation.
    #[arg(long, default_value_t = experiment::DEFAULT_EVAL_N)]
    pub n: usize,
    #[arg(long, default_value = "ciede2000")]
    pub metric: Metric,
    /// ΔE2000 threshold for the secondary accuracy figure.
    #[arg(long, default_value_t = experiment::DEFAULT_THRESHOLD)]
    pub threshold: f64,
}

#[derive(Debug, Args)]
pub struct TrainCmd {
    #[command(flatten)]
    pub training: TrainingArgs,
    /// Checkpoint output path.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the training report as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct InferCmd {
    #[arg(short, long)]
    pub model: PathBuf,
    /// Color description, e.g. "very light grey".
    #[arg(required = true, num_args = 1..)]
    pub description: Vec<String>,
    /// Number of nearest dataset colors to list.
    #[arg(long, default_value_t = experiment::DEFAULT_NEAREST_K)]
    pub k: usize,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct EvaluateCmd {
    #[arg(short, long)]
    pub model: PathBuf,
    /// Dataset the checkpoint was trained on. Defaults to the palette stored in the checkpoint.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[command(flatten)]
    pub eval: EvalArgs,
    /// Directory for `evaluate.json` and `evaluate.txt`.
    #[arg(long)]
    pub report_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct CompareCmd {
    #[command(flatten)]
    pub training: TrainingArgs,
    #[command(flatten)]
    pub eval: EvalArgs,
    /// Directory for `compare_scalers.json` and `compare_scalers.txt`.
    #[arg(long)]
    pub report_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct ServeCmd {
    #[arg(short, long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: IpAddr,
    /// Built UI assets served at `/`.
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ModelInfoCmd {
    #[arg(short, long)]
    pub model: PathBuf,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(cmd) => train(cmd),
        Command::Infer(cmd) => infer(cmd),
        Command::Evaluate(cmd) => evaluate(cmd),
        Command::CompareScalers(cmd) => compare(cmd),
        Command::Serve(cmd) => serve(cmd),
        Command::ModelInfo(cmd) => model_info(cmd),
    }
}

fn load_data(path: Option<&Path>) -> Result<Vec<ColorSample>> {
    match path {
        Some(p) => Ok(dataset::load_csv(p)?),
        None => Ok(dataset::bundled()),
    }
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let ckpt = Checkpoint::load(path)?;
    ckpt.to_pipeline()
        .with_context(|| format!("checkpoint {}", path.display()))?;
    Ok(ckpt)
}

fn experiment_config(args: &TrainingArgs, eval: Option<&EvalArgs>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig {
        max_len: args.max_len,
        ratio: args.ratio,
        seed: args.seed,
        scaler: args.scaler,
        learning_rate: args.learning_rate,
        epochs: args.epochs,
        batch_size: args.batch_size,
        ..Default::default()
    };
    if let Some(layers) = &args.layers {
        cfg.hidden = layers.clone();
    }
    if let Some(eval) = eval {
        cfg.eval_n = eval.n;
        cfg.metric = eval.metric;
        cfg.threshold = eval.threshold;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn write_reports(dir: &Path, stem: &str, json: &str, text: &str) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    write_file(&dir.join(format!("{stem}.json")), json)?;
    write_file(&dir.join(format!("{stem}.txt")), text)
}

fn emit(format: Format, json: &str, text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match format {
        Format::Json => out.write_all(json.as_bytes())?,
        Format::Text => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn swatches_enabled(format: Format) -> bool {
    format == Format::Text
        && std::env::var_os("NO_COLOR").is_none()
        && std::io::stdout().is_terminal()
}

fn swatch(c: Rgb) -> String {
    format!("\x1b[48;2;{};{};{}m      \x1b[0m ", c.r, c.g, c.b)
}

#[derive(Debug, Serialize)]
struct TrainSummary<'a> {
    scaler: ScaleMethod,
    seed: u64,
    layer_dims: &'a [usize],
    parameter_count: usize,
    reference_parameter_count: usize,
    train_samples: usize,
    test_samples: usize,
    split_fingerprint: String,
    vocab_size: usize,
    initial_loss: f64,
    final_train_loss: f64,
    final_test_loss: Option<f64>,
    epoch_losses: &'a [f64],
}

fn train(cmd: TrainCmd) -> Result<()> {
    let cfg = experiment_config(&cmd.training, None)?;
    let data = load_data(cmd.training.data.as_deref())?;
    let run = train_pipeline(&data, &cfg)?;
    let ckpt = Checkpoint::from_run(&run, data);
    ckpt.save(&cmd.out)?;

    let summary = TrainSummary {
        scaler: cfg.scaler,
        seed: cfg.seed,
        layer_dims: &ckpt.config.layer_dims,
        parameter_count: run.report.parameter_count,
        reference_parameter_count: REFERENCE_PARAM_COUNT,
        train_samples: run.split.train.len(),
        test_samples: run.split.test.len(),
        split_fingerprint: split_fingerprint(&run.split),
        vocab_size: run.pipeline.vocabulary.tokens().len(),
        initial_loss: run.report.initial_loss,
        final_train_loss: run.report.final_train_loss(),
        final_test_loss: run.report.final_test_loss,
        epoch_losses: &run.report.epoch_losses,
    };
    let json = to_json(&summary);
    if let Some(path) = &cmd.report {
        write_file(path, &json)?;
    }
    let text = format!(
        "scaler: {}\nlayer dims: {:?}\nparameters: {} (reference model: {})\nsplit: {} train / {} test (fingerprint {})\nvocabulary: {} tokens\nloss: {:.6} -> {:.6} after {} epochs\ntest loss: {}\ncheckpoint: {}\n",
        summary.scaler.display_name(),
        summary.layer_dims,
        summary.parameter_count,
        summary.reference_parameter_count,
        summary.train_samples,
        summary.test_samples,
        summary.split_fingerprint,
        summary.vocab_size,
        summary.initial_loss,
        summary.final_train_loss,
        summary.epoch_losses.len(),
        summary.final_test_loss.map_or("n/a".to_string(), |l| format!("{l:.6}")),
        cmd.out.display(),
    );
    emit(cmd.format, &json, &text)?;
    eprintln!("trained in {:.2?}", run.report.wall_time);
    Ok(())
}

#[derive(Debug, Serialize)]
struct InferOutput {
    description: String,
    rgb: Rgb,
    hex: String,
    tokens: Vec<u32>,
    nearest: Vec<service::NearestEntry>,
}

fn infer(cmd: InferCmd) -> Result<()> {
    let description = cmd.description.join(" ");
    let ckpt = load_checkpoint(&cmd.model)?;
    let pipeline = ckpt.to_pipeline()?;
    let (ids, _) = pipeline.encode(&description)?;
    let rgb = pipeline.predict(&description)?;
    let nearest: Vec<service::NearestEntry> =
        nearest_colors(&ckpt.palette, rgb, cmd.k.max(1), Metric::Ciede2000)
            .into_iter()
            .map(|(s, d)| service::NearestEntry {
                name: s.description.clone(),
                rgb: s.recipe,
                hex: s.recipe.hex(),
                delta_e: d,
            })
            .collect();
    let output = InferOutput {
        description,
        rgb,
        hex: rgb.hex(),
        tokens: ids.0,
        nearest,
    };

    let color = swatches_enabled(cmd.format);
    let mut text = String::new();
    if color {
        text.push_str(&swatch(rgb));
    }
    text.push_str(&format!("{}\n{}\n", output.rgb, output.hex));
    for n in &output.nearest {
        if color {
            text.push_str(&swatch(n.rgb));
        }
        text.push_str(&format!(
            "nearest: {} {} (ΔE2000 {:.4})\n",
            n.name, n.hex, n.delta_e
        ));
    }
    emit(cmd.format, &to_json(&output), &text)
}

fn evaluate(cmd: EvaluateCmd) -> Result<()> {
    let ckpt = load_checkpoint(&cmd.model)?;
    let pipeline = ckpt.to_pipeline()?;
    let data = match &cmd.data {
        Some(p) => dataset::load_csv(p)?,
        None => ckpt.palette.clone(),
    };
    let split = dataset::split(&data, ckpt.metadata.split_ratio, ckpt.metadata.seed)?;
    if cmd.eval.n > split.test.len() {
        bail!(
            "--n {} exceeds the {} held-out samples",
            cmd.eval.n,
            split.test.len()
        );
    }
    let cfg = ExperimentConfig {
        eval_n: cmd.eval.n,
        metric: cmd.eval.metric,
        threshold: cmd.eval.threshold,
        ..Default::default()
    };
    if cfg.eval_n == 0 {
        bail!("--n must be at least 1");
    }
    let report = evaluate_split(&pipeline, &split.test, &data, &cfg)?;
    let json = to_json(&report);
    let text = report.to_text();
    if let Some(dir) = &cmd.report_dir {
        write_reports(dir, "evaluate", &json, &text)?;
    }
    emit(cmd.format, &json, &text)
}

fn compare(cmd: CompareCmd) -> Result<()> {
    let cfg = experiment_config(&cmd.training, Some(&cmd.eval))?;
    let data = load_data(cmd.training.data.as_deref())?;
    let comparison = compare_scalers(&cfg, &data)?;
    let json = to_json(&comparison);
    let text = comparison.to_text();
    if let Some(dir) = &cmd.report_dir {
        write_reports(dir, "compare_scalers", &json, &text)?;
    }
    emit(cmd.format, &json, &text)
}

fn serve(cmd: ServeCmd) -> Result<()> {
    let ckpt = load_checkpoint(&cmd.model)?;
    let state = ServiceState::new(ckpt)?;
    let static_dir = match cmd.static_dir {
        Some(dir) if !dir.is_dir() => bail!("static directory {} does not exist", dir.display()),
        other => other,
    };
    let addr = SocketAddr::new(cmd.host, cmd.port);
    tokio::runtime::Runtime::new()?.block_on(service::serve(state, addr, static_dir))
}

fn model_info(cmd: ModelInfoCmd) -> Result<()> {
    let ckpt = load_checkpoint(&cmd.model)?;
    let state = ServiceState::new(ckpt)?;
    let info = service::model_info(&state);
    let text = format!(
        "layer dims: {:?}\nparameters: {} (reference model: {})\nscaler: {}\nvocabulary: {} tokens, max_len {}\ndataset: {} colors\nversion: {}\n",
        info.layer_dims,
        info.param_count,
        REFERENCE_PARAM_COUNT,
        info.scaler_method,
        info.vocab_size,
        info.max_len,
        info.dataset_size,
        info.model_version,
    );
    let json = to_json(&serde_json::json!({
        "model": info,
        "reference_param_count": REFERENCE_PARAM_COUNT,
    }));
    emit(cmd.format, &json, &text)
}
