use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use qcal_core::data::{
    build_dataset, ingest, ingest_reference, read_dataset, synthesize, write_dataset, write_low_cost,
    write_reference, CalibrationDataset, NaiveTime, SynthProfile,
};
use qcal_core::experiments::{
    benchmark_uncalibrated, cross_validate, emit_report, grid_search, holdout, read_report, FoldMode, FoldSpec,
    HyperparamGrid, Metric, MetricsReport, Protocol, DEFAULT_DRAWS,
};
use qcal_core::models::{ModelCheckpoint, ModelConfig, PresetName, TrainConfig};
use qcal_core::neural::{LossKind, OptimizerKind};
use qcal_core::par::{self, Execution};
use qcal_core::{Error, Result};

#[derive(Parser)]
#[command(name = "qcal", version, about = "Calibrate low-cost PM2.5 sensors with classical and quantum models")]
struct Cli {
    /// Worker threads (default: available cores). 1 runs everything sequentially.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Aggregate, fuse and align raw CSVs into an hourly dataset.
    Prepare(PrepareArgs),
    /// Generate a synthetic campaign and its prepared dataset.
    Synth(SynthArgs),
    /// Train on a chronological split and write checkpoint, report and predictions.
    Train(TrainArgs),
    /// Apply a checkpoint to a dataset.
    Predict(PredictArgs),
    /// K-fold cross-validation.
    CrossValidate(CrossValidateArgs),
    /// Loss of the uncalibrated sensors against the reference.
    Benchmark(BenchmarkArgs),
    /// Train every point of a hyperparameter grid on a fixed split.
    GridSearch(GridArgs),
    /// Print a summary of a report.json.
    Report(ReportArgs),
}

#[derive(Args)]
struct PrepareArgs {
    /// Low-cost sensor CSVs.
    #[arg(long = "low-cost", required = true, num_args = 1..)]
    low_cost: Vec<PathBuf>,
    #[arg(long)]
    reference: PathBuf,
    /// Output dataset CSV.
    #[arg(long)]
    out: PathBuf,
    /// Seconds east of UTC for timestamps without an offset.
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    utc_offset: i32,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Default,
    Perfect,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, env = "QSCALE_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 720)]
    hours: usize,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "default")]
    profile: ProfileArg,
    /// Overrides the profile's sensor gain.
    #[arg(long)]
    gain: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Ffnn,
    Vqr,
    Lstm,
    Qlstm,
    QlstmDesk,
}

impl From<ModelArg> for PresetName {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Ffnn => PresetName::Ffnn,
            ModelArg::Vqr => PresetName::Vqr,
            ModelArg::Lstm => PresetName::Lstm,
            ModelArg::Qlstm => PresetName::Qlstm,
            ModelArg::QlstmDesk => PresetName::QlstmDesk,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OptimizerArg {
    Sgd,
    Adam,
    Rmsprop,
}

#[derive(Clone, Copy, ValueEnum)]
enum LossArg {
    L1,
    Mse,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    L1,
    Mse,
    Rmse,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Shuffled,
    Contiguous,
}

/// Shared by `train` and `cross-validate`.
#[derive(Args)]
struct RunArgs {
    /// Preset the config file and flags start from.
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    /// JSON run config; see the README for its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset CSV; overrides the config's `data`.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, env = "QSCALE_SEED")]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long = "lr")]
    learning_rate: Option<f64>,
    #[arg(long, value_enum)]
    optimizer: Option<OptimizerArg>,
    #[arg(long, value_enum)]
    loss: Option<LossArg>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    /// Benchmark draws.
    #[arg(long, default_value_t = DEFAULT_DRAWS)]
    draws: usize,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    train_fraction: Option<f64>,
}

#[derive(Args)]
struct CrossValidateArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Fold count (default from the preset).
    #[arg(long)]
    k: Option<usize>,
    /// Default: contiguous for recurrent models, shuffled otherwise.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Output predictions CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchmarkArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "l1")]
    loss: MetricArg,
    /// Restrict to the last fraction of the hours, e.g. 0.3.
    #[arg(long)]
    test_fraction: Option<f64>,
    /// Rows per draw (default: half of the evaluated rows).
    #[arg(long)]
    sample_size: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_DRAWS)]
    draws: usize,
    #[arg(long, env = "QSCALE_SEED", default_value_t = 0)]
    seed: u64,
    /// Write the full distribution here as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GridArgs {
    /// Grid JSON.
    #[arg(long)]
    grid: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 0.75)]
    train_fraction: f64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// report.json to summarise.
    input: PathBuf,
}

/// Optional JSON run config. Missing fields come from the preset.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    #[serde(default)]
    data: Option<PathBuf>,
    #[serde(default)]
    model: Option<ModelConfig>,
    #[serde(default)]
    train: Option<TrainConfig>,
    #[serde(default)]
    train_fraction: Option<f64>,
    #[serde(default)]
    folds: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
struct Resolved {
    data: PathBuf,
    model: ModelConfig,
    train: TrainConfig,
    train_fraction: f64,
    folds: usize,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn resolve(run: &RunArgs) -> Result<Resolved> {
    let cfg: RunConfig = match &run.config {
        Some(p) => read_json(p)?,
        None => RunConfig::default(),
    };
    let preset = run.model.map(|m| PresetName::from(m).preset());
    let base = || {
        preset
            .clone()
            .ok_or_else(|| Error::Config("give --model or a config with both `model` and `train`".into()))
    };
    // --model names the architecture; the config may still supply training settings
    let model = match (&preset, cfg.model) {
        (Some(p), _) => p.model.clone(),
        (None, Some(m)) => m,
        (None, None) => base()?.model,
    };
    let mut train = match cfg.train {
        Some(t) => t,
        None => base()?.train,
    };
    let fallback = preset.clone().unwrap_or_else(|| PresetName::Ffnn.preset());
    if let Some(v) = run.seed {
        train.seed = v;
    }
    if let Some(v) = run.epochs {
        train.epochs = v;
    }
    if let Some(v) = run.learning_rate {
        train.learning_rate = v;
    }
    if let Some(v) = run.optimizer {
        train.optimizer = match v {
            OptimizerArg::Sgd => OptimizerKind::Sgd,
            OptimizerArg::Adam => OptimizerKind::Adam,
            OptimizerArg::Rmsprop => OptimizerKind::RmsProp,
        };
    }
    if let Some(v) = run.loss {
        train.loss = match v {
            LossArg::L1 => LossKind::L1,
            LossArg::Mse => LossKind::Mse,
        };
    }
    if let Some(v) = run.batch_size {
        train.batch_size = v;
    }
    if let Some(v) = run.window {
        train.window = v;
    }
    train.validate(&model)?;
    let data = run
        .data
        .clone()
        .or(cfg.data)
        .ok_or_else(|| Error::Config("no dataset: pass --data or set `data` in the config".into()))?;
    Ok(Resolved {
        data,
        model,
        train,
        train_fraction: cfg.train_fraction.unwrap_or(fallback.train_fraction),
        folds: cfg.folds.unwrap_or(fallback.folds),
    })
}

fn load_dataset(path: &Path) -> Result<CalibrationDataset> {
    if !path.is_file() {
        return Err(Error::Data(format!("dataset {} not found", path.display())));
    }
    let ds = read_dataset(fs::File::open(path)?)?;
    if ds.is_empty() {
        return Err(Error::Data(format!("dataset {} has no rows", path.display())));
    }
    log::info!("loaded {} hourly rows from {}", ds.len(), path.display());
    Ok(ds)
}

struct Manifest {
    command: &'static str,
    start: Instant,
}

impl Manifest {
    fn start(command: &'static str) -> Self {
        Self {
            command,
            start: Instant::now(),
        }
    }

    fn write(self, path: &Path, inputs: serde_json::Value, outputs: &[PathBuf]) -> Result<()> {
        let doc = json!({
            "command": self.command,
            "argv": std::env::args().collect::<Vec<_>>(),
            "version": env!("CARGO_PKG_VERSION"),
            "threads": rayon::current_num_threads(),
            "inputs": inputs,
            "outputs": outputs,
            "wall_time_seconds": self.start.elapsed().as_secs_f64(),
        });
        fs::write(path, serde_json::to_string_pretty(&doc)? + "\n")?;
        Ok(())
    }
}

/// `dir/manifest.json`, or `<stem>.manifest.json` beside a single file.
fn manifest_path_for_file(out: &Path) -> PathBuf {
    let stem = out.file_stem().map_or_else(|| "output".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}.manifest.json"))
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    Ok(())
}

fn cmd_prepare(a: PrepareArgs) -> Result<()> {
    let m = Manifest::start("prepare");
    let naive = NaiveTime {
        offset_seconds: a.utc_offset,
    };
    let raw = ingest(&a.low_cost, naive)?;
    let (reference, bad_ref) = ingest_reference(&a.reference, naive)?;
    let (ds, report) = build_dataset(&raw.samples, &reference)?;
    create_parent(&a.out)?;
    write_dataset(&ds, fs::File::create(&a.out)?)?;
    log::info!("{} rows kept: {report:?}", ds.len());
    println!("{}", serde_json::to_string(&report)?);
    m.write(
        &manifest_path_for_file(&a.out),
        json!({
            "low_cost": a.low_cost,
            "reference": a.reference,
            "utc_offset": a.utc_offset,
            "malformed_low_cost_rows": raw.malformed,
            "malformed_reference_rows": bad_ref,
            "clean": report,
        }),
        std::slice::from_ref(&a.out),
    )
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let m = Manifest::start("synth");
    let mut profile = match a.profile {
        ProfileArg::Default => SynthProfile::default(),
        ProfileArg::Perfect => SynthProfile::perfect(),
    };
    if let Some(g) = a.gain {
        profile.gain = g;
    }
    let campaign = synthesize(a.seed, a.hours, &profile)?;
    let (ds, report) = build_dataset(&campaign.low_cost, &campaign.reference)?;
    fs::create_dir_all(&a.out)?;
    let paths = [
        a.out.join("low_cost.csv"),
        a.out.join("reference.csv"),
        a.out.join("dataset.csv"),
    ];
    write_low_cost(&campaign.low_cost, fs::File::create(&paths[0])?)?;
    write_reference(&campaign.reference, fs::File::create(&paths[1])?)?;
    write_dataset(&ds, fs::File::create(&paths[2])?)?;
    log::info!("synthesized {} hours, {} rows kept", a.hours, ds.len());
    m.write(
        &a.out.join("manifest.json"),
        json!({ "seed": a.seed, "hours": a.hours, "profile": profile, "clean": report }),
        &paths,
    )
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let m = Manifest::start("train");
    let mut r = resolve(&a.run)?;
    if let Some(f) = a.train_fraction {
        r.train_fraction = f;
    }
    let ds = load_dataset(&r.data)?;
    log::info!("training {} for {} epochs", r.model.name(), r.train.epochs);
    let (cal, report) = holdout(&r.model, &r.train, &ds, r.train_fraction, a.run.draws)?;
    let mut outputs = emit_report(&report, &a.run.out)?;
    let ck = a.run.out.join("model.json");
    fs::write(&ck, cal.checkpoint()?.to_json()? + "\n")?;
    outputs.push(ck);
    print_summary(&report);
    m.write(&a.run.out.join("manifest.json"), json!({ "resolved": r, "draws": a.run.draws }), &outputs)
}

fn cmd_cross_validate(a: CrossValidateArgs) -> Result<()> {
    let m = Manifest::start("cross-validate");
    let r = resolve(&a.run)?;
    let mode = match a.mode {
        Some(ModeArg::Shuffled) => FoldMode::Shuffled,
        Some(ModeArg::Contiguous) => FoldMode::Contiguous,
        None if r.model.is_sequence() => FoldMode::Contiguous,
        None => FoldMode::Shuffled,
    };
    let spec = FoldSpec {
        k: a.k.unwrap_or(r.folds),
        mode,
        seed: r.train.seed,
    };
    let ds = load_dataset(&r.data)?;
    log::info!("{}-fold {:?} cross-validation of {}", spec.k, spec.mode, r.model.name());
    let report = cross_validate(&r.model, &r.train, &ds, &spec, a.run.draws)?;
    let outputs = emit_report(&report, &a.run.out)?;
    print_summary(&report);
    m.write(
        &a.run.out.join("manifest.json"),
        json!({ "resolved": r, "folds": spec, "draws": a.run.draws }),
        &outputs,
    )
}

fn cmd_predict(a: PredictArgs) -> Result<()> {
    let m = Manifest::start("predict");
    let text = fs::read_to_string(&a.checkpoint)?;
    let cal = ModelCheckpoint::from_json(&text)?.into_calibrator()?;
    let ds = load_dataset(&a.data)?;
    let preds = cal.predict(&ds)?;
    create_parent(&a.out)?;
    qcal_core::experiments::write_predictions(&preds, fs::File::create(&a.out)?)?;
    log::info!("wrote {} predictions", preds.len());
    m.write(
        &manifest_path_for_file(&a.out),
        json!({ "checkpoint": a.checkpoint, "data": a.data, "model": cal.model }),
        std::slice::from_ref(&a.out),
    )
}

fn cmd_benchmark(a: BenchmarkArgs) -> Result<()> {
    let m = Manifest::start("benchmark");
    let ds = load_dataset(&a.data)?;
    let ds = match a.test_fraction {
        Some(f) => qcal_core::data::chronological_split(&ds, 1.0 - f)?.1,
        None => ds,
    };
    if ds.is_empty() {
        return Err(Error::Config("test fraction leaves no rows".into()));
    }
    let metric = match a.loss {
        MetricArg::L1 => Metric::L1,
        MetricArg::Mse => Metric::Mse,
        MetricArg::Rmse => Metric::Rmse,
    };
    let size = a.sample_size.unwrap_or_else(|| ds.len().div_ceil(2));
    let dist = benchmark_uncalibrated(&ds, metric, size, a.draws, a.seed)?;
    log::info!(
        "{} draws of {} rows: mean {:.4}, std {:.4}",
        dist.n_draws,
        dist.sample_size,
        dist.summary.mean,
        dist.summary.std
    );
    println!("{:?}", dist.whole_set);
    if let Some(out) = &a.out {
        create_parent(out)?;
        let doc = json!({ "benchmark": dist, "draws": dist.draws });
        fs::write(out, serde_json::to_string_pretty(&doc)? + "\n")?;
        m.write(
            &manifest_path_for_file(out),
            json!({ "data": a.data, "test_fraction": a.test_fraction, "seed": a.seed }),
            std::slice::from_ref(out),
        )?;
    }
    Ok(())
}

fn cmd_grid(a: GridArgs) -> Result<()> {
    let m = Manifest::start("grid-search");
    let grid: HyperparamGrid = read_json(&a.grid)?;
    log::info!("grid has {} configurations", grid.size()?);
    let ds = load_dataset(&a.data)?;
    let result = grid_search(&grid, &ds, a.train_fraction)?;
    fs::create_dir_all(&a.out)?;
    let path = a.out.join("grid.json");
    fs::write(&path, serde_json::to_string_pretty(&result)? + "\n")?;
    for e in &result.entries {
        match &e.metrics {
            Some(mt) => println!(
                "{:>3}  L1 {:>9.4}  RMSE {:>9.4}  #{} {} lr {} epochs {} batch {} window {}",
                e.rank,
                mt.l1,
                mt.rmse,
                e.index,
                serde_json::to_string(&e.model)?,
                e.train.learning_rate,
                e.train.epochs,
                e.train.batch_size,
                e.train.window
            ),
            None => println!("{:>3}  failed: {}", e.rank, e.error.as_deref().unwrap_or("")),
        }
    }
    m.write(&a.out.join("manifest.json"), json!({ "grid": grid, "data": a.data }), &[path])
}

fn print_summary(r: &MetricsReport) {
    let protocol = match r.protocol {
        Protocol::Holdout { train_fraction } => format!("holdout, {:.0}% train", train_fraction * 100.0),
        Protocol::CrossValidation { folds } => format!("{}-fold {:?}", folds.k, folds.mode),
    };
    println!("{} ({protocol}), {} trainable parameters", r.model.name(), r.params.total);
    for f in &r.folds {
        match (&f.metrics, &f.benchmark) {
            (Some(m), Some(b)) => println!(
                "fold {}  L1 {:.4}  MSE {:.4}  RMSE {:.4}  (uncalibrated L1 {:.4}, RMSE {:.4})",
                f.fold, m.l1, m.mse, m.rmse, b.l1, b.rmse
            ),
            _ => println!("fold {}  failed: {}", f.fold, f.error.as_deref().unwrap_or("unknown")),
        }
    }
    if let Some(a) = &r.average {
        println!("average  L1 {:.4}  MSE {:.4}  RMSE {:.4}", a.l1, a.mse, a.rmse);
    }
    if let Some(b) = &r.benchmark {
        println!(
            "benchmark {:?}: whole set {:.4}, draws mean {:.4} ± {:.4}",
            b.metric, b.whole_set, b.summary.mean, b.summary.std
        );
    }
}

fn cmd_report(a: ReportArgs) -> Result<()> {
    print_summary(&read_report(&a.input)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        if n == 1 {
            par::set_execution(Execution::Sequential);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    match cli.command {
        Command::Prepare(a) => cmd_prepare(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::CrossValidate(a) => cmd_cross_validate(a),
        Command::Benchmark(a) => cmd_benchmark(a),
        Command::GridSearch(a) => cmd_grid(a),
        Command::Report(a) => cmd_report(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qcal: {e}");
            ExitCode::from(1)
        }
    }
}
