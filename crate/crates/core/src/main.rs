use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use anomaly_forecast::pipeline::dataset::{group_windows, read_windows_csv};
use anomaly_forecast::pipeline::report::{
    emit_evaluation, emit_results, format_table, read_report, read_trained, trained_path, write_trained,
    write_window_sets, MODELS_DIR, REPORT_FILE, WINDOWS_TEST_FILE, WINDOWS_TRAIN_FILE,
};
use anomaly_forecast::pipeline::{
    self, detect, ingest, predict_cell, train_cell, ExperimentConfig, ModelClass, Scale, SymbolWindows,
};
use anomaly_forecast::sarimax::ExogPolicy;

#[derive(Parser)]
#[command(version, about = "Forecast stock prices around detected price anomalies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Flag outliers and write the train/test window files.
    Detect(Common),
    /// Train models on the train windows written by `detect`.
    Train(Common),
    /// Forecast the test windows with the trained models.
    Evaluate(Common),
    /// Print the accuracy/time table of a finished run.
    Report(Common),
    /// Detect, train, evaluate and report in one go.
    RunAll(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    Universal,
    Industry,
    Single,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Sarimax,
    Lstm,
    Both,
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value = "config.toml")]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    scale: Option<ScaleArg>,
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    /// zero, hold-last or oracle.
    #[arg(long)]
    exog_policy: Option<ExogPolicy>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)
            .with_context(|| format!("loading {}", self.config.display()))?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(scale) = self.scale {
            cfg.scales = match scale {
                ScaleArg::Universal => vec![Scale::Universal],
                ScaleArg::Industry => vec![Scale::Industry],
                ScaleArg::Single => vec![Scale::Single],
                ScaleArg::All => Scale::ALL.to_vec(),
            };
        }
        if let Some(model) = self.model {
            cfg.models = match model {
                ModelArg::Sarimax => vec![ModelClass::Sarimax],
                ModelArg::Lstm => vec![ModelClass::Lstm],
                ModelArg::Both => ModelClass::ALL.to_vec(),
            };
        }
        if let Some(p) = self.exog_policy {
            cfg.exog_policy = p;
        }
        if let Some(e) = self.epochs {
            cfg.lstm.epochs = e;
        }
        if let Some(out) = &self.out {
            cfg.paths.output = out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn load_windows(cfg: &ExperimentConfig) -> Result<Vec<SymbolWindows>> {
    let out = &cfg.paths.output;
    let read = |name: &str| {
        let p = out.join(name);
        read_windows_csv(&p).with_context(|| format!("reading {} (run `detect` first)", p.display()))
    };
    Ok(group_windows(&cfg.resolve_symbols()?, read(WINDOWS_TRAIN_FILE)?, read(WINDOWS_TEST_FILE)?))
}

fn run_detect(cfg: &ExperimentConfig) -> Result<()> {
    let detection = detect(cfg, &ingest(cfg)?);
    for f in &detection.failures {
        log::warn!("{}: detection failed: {}", f.symbol, f.reason);
    }
    if detection.symbols.is_empty() {
        bail!("outlier detection failed for every symbol");
    }
    write_window_sets(&detection, &cfg.paths.output)?;
    for s in &detection.symbols {
        println!(
            "{:<6} fit {}  train windows {:>3}  test windows {:>3}",
            s.symbol,
            s.fit_year,
            s.windows.train.len(),
            s.windows.test.len()
        );
    }
    Ok(())
}

fn run_train(cfg: &ExperimentConfig) -> Result<()> {
    let windows = load_windows(cfg)?;
    let dir = cfg.paths.output.join(MODELS_DIR);
    for &class in &cfg.models {
        for &scale in &cfg.scales {
            let cell = train_cell(cfg, class, scale, &windows);
            let path = write_trained(&cell, &dir)?;
            println!(
                "{class}/{scale}: {} models, {} failures, {:.2}s -> {}",
                cell.models.len(),
                cell.failures.len(),
                cell.train_secs,
                path.display()
            );
        }
    }
    Ok(())
}

fn run_evaluate(cfg: &ExperimentConfig) -> Result<()> {
    let windows = load_windows(cfg)?;
    let dir = cfg.paths.output.join(MODELS_DIR);
    let mut trained = Vec::new();
    let mut cells = Vec::new();
    for &class in &cfg.models {
        for &scale in &cfg.scales {
            let path = trained_path(&dir, class, scale);
            let cell = read_trained(&path).with_context(|| format!("reading {} (run `train` first)", path.display()))?;
            cells.push(predict_cell(cfg, &cell, &windows));
            trained.push(cell);
        }
    }
    let report = emit_evaluation(None, &trained, &cells, &cfg.paths.output)?;
    print!("{}", format_table(&report.cells));
    Ok(())
}

fn run_report(out: &Path) -> Result<()> {
    let path = out.join(REPORT_FILE);
    let report = read_report(&path).with_context(|| format!("reading {}", path.display()))?;
    print!("{}", format_table(&report.cells));
    for f in &report.failures {
        log::warn!("{f:?}");
    }
    Ok(())
}

fn run_all(cfg: &ExperimentConfig) -> Result<()> {
    let experiment = pipeline::run_experiment(cfg)?;
    let report = emit_results(&experiment, &cfg.paths.output)?;
    print!("{}", format_table(&report.cells));
    println!("outputs in {}", cfg.paths.output.display());
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Detect(c) => run_detect(&c.load()?),
        Command::Train(c) => run_train(&c.load()?),
        Command::Evaluate(c) => run_evaluate(&c.load()?),
        Command::Report(c) => run_report(&c.load()?.paths.output),
        Command::RunAll(c) => run_all(&c.load()?),
    }
}

