//! The `gatr` command-line front end.
//!
//! Every command takes its parameters from a JSON [`RunConfig`] plus a few
//! flags; `GATR_SEED` overrides the config seed. Exit codes: 0 success,
//! 1 verification failure, 2 usage or configuration error, 3 runtime error.

mod config;
mod report;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{DatasetSection, EvalSection, ModelSection, RunConfig, Split, VerifySection, SEED_ENV};
pub use report::{aggregate, read_metrics, ReportRow, RunMetrics};

use crate::ga::{build_cayley_tables, Product};
use crate::model::{param_breakdown, read_checkpoint, write_checkpoint, Checkpoint, GatrConfig};
use crate::nbody::{
    evaluate, generate_dataset, metamorphic_deviation, read_dataset, train, write_dataset, write_dataset_csv, Dataset,
    EvalReport, ModelKind, ModelSpec, NBodyError, Precision, TrainConfig,
};
use crate::verify::{self, Suite};

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const LOSS_FILE: &str = "loss.csv";
pub const RUN_FILE: &str = "run.json";
pub const METRICS_FILE: &str = "metrics.csv";
pub const METAMORPHIC_FILE: &str = "metamorphic.csv";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Verification(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<NBodyError> for CliError {
    fn from(e: NBodyError) -> Self {
        match e {
            NBodyError::Config(_) | NBodyError::Mismatch(_) => CliError::Usage(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Runtime(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "gatr", version, about = "Projective geometric algebra transformer toolkit")]
pub struct Cli {
    /// Force sequential execution and fixed reduction order.
    #[arg(long, global = true)]
    pub deterministic: bool,
    /// Log progress at debug level.
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate one n-body dataset split.
    GenData {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        split: Split,
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the sample count of the split.
        #[arg(long)]
        samples: Option<usize>,
        /// Also write the samples as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run property suites; exits with 1 if any property fails.
    Verify {
        #[arg(long, default_value = "all")]
        suite: Suite,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        tolerance: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train a model and write checkpoint, loss curve and run record to a directory.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: ModelKind,
        #[arg(long)]
        out: PathBuf,
        /// Datasets to evaluate after training; split names come from file stems.
        #[arg(long = "eval")]
        eval: Vec<PathBuf>,
    },
    /// Evaluate a checkpoint on a dataset and record the metrics next to it.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Split name; defaults to the dataset file stem.
        #[arg(long)]
        split: Option<String>,
        /// Metrics CSV; defaults to metrics.csv beside the checkpoint.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Aggregate the metrics of many runs into one CSV.
    Report {
        #[arg(long)]
        runs: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the parameter breakdown of a GATr configuration.
    Params {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Use the full-size n-body configuration instead of the config file.
        #[arg(long)]
        reference: bool,
    },
    /// Write the Cayley and dual tables as text.
    Tables {
        #[arg(long)]
        out: PathBuf,
    },
}

/// Run record stored as `run.json` and as the checkpoint's config block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRecord {
    pub model: ModelKind,
    pub train_size: usize,
    pub spec: ModelSpec,
    pub training: TrainConfig,
    pub eval: EvalSection,
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = if cli.verbose { "debug" } else { "info" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let parallel = !cli.deterministic;
    match &cli.command {
        Command::GenData {
            config,
            out,
            split,
            seed,
            samples,
            csv,
        } => {
            let mut config = RunConfig::load(config.as_deref())?;
            if let Some(seed) = seed {
                config.dataset.seed = *seed;
            }
            gen_data(&config, *split, *samples, out, csv.as_deref(), parallel)
        }
        Command::Verify {
            suite,
            trials,
            tolerance,
            seed,
            config,
        } => {
            let config = RunConfig::load(config.as_deref())?;
            let mut options = config.verify.options();
            options.trials = trials.or(options.trials);
            options.tolerance = tolerance.or(options.tolerance);
            if let Some(seed) = seed {
                options.seed = *seed;
            }
            cmd_verify(*suite, &options)
        }
        Command::Train {
            config,
            data,
            model,
            out,
            eval,
        } => {
            let mut config = RunConfig::load(config.as_deref())?;
            if cli.deterministic {
                config.eval.parallel = false;
            }
            cmd_train(&config, data, *model, out, eval)
        }
        Command::Eval {
            checkpoint,
            data,
            split,
            out,
        } => cmd_eval(checkpoint, data, split.as_deref(), out.as_deref(), parallel),
        Command::Report { runs, out } => cmd_report(runs, out),
        Command::Params { config, reference } => {
            let gatr = if *reference {
                GatrConfig::reference()
            } else {
                RunConfig::load(config.as_deref())?.model.gatr
            };
            for line in params_report(&gatr)? {
                println!("{line}");
            }
            Ok(())
        }
        Command::Tables { out } => write_tables(out),
    }
}

pub fn gen_data(
    config: &RunConfig,
    split: Split,
    samples: Option<usize>,
    out: &Path,
    csv: Option<&Path>,
    parallel: bool,
) -> Result<(), CliError> {
    let (sample, n, seed) = config.split(split);
    let n = samples.unwrap_or(n);
    let data = generate_dataset(&sample, n, seed, parallel)?;
    write_file(out, |w| write_dataset(w, &data).map_err(CliError::from))?;
    if let Some(csv) = csv {
        write_file(csv, |w| write_dataset_csv(w, &data).map_err(CliError::from))?;
    }
    log::info!(
        "wrote {} {} samples of {} bodies to {}",
        data.len(),
        split.name(),
        data.n_bodies(),
        out.display()
    );
    Ok(())
}

pub fn cmd_verify(suite: Suite, options: &verify::VerifyOptions) -> Result<(), CliError> {
    let mut failed = Vec::new();
    for report in verify::run(suite, options) {
        println!("== {} ({:.2?})", report.name, report.elapsed);
        for p in &report.properties {
            println!("{p}");
            if !p.passed() {
                failed.push(p.name.clone());
            }
        }
    }
    if failed.is_empty() {
        println!("all properties passed");
        Ok(())
    } else {
        Err(CliError::Verification(format!("{} properties failed: {}", failed.len(), failed.join(", "))))
    }
}

pub fn load_dataset(path: &Path) -> Result<Dataset, CliError> {
    let file = File::open(path).map_err(|e| CliError::Usage(format!("cannot open dataset {}: {e}", path.display())))?;
    read_dataset(&mut BufReader::new(file)).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn split_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "eval".into())
}

pub fn cmd_train(config: &RunConfig, data: &Path, model: ModelKind, out: &Path, eval: &[PathBuf]) -> Result<(), CliError> {
    let data = load_dataset(data)?;
    let evals = eval
        .iter()
        .map(|p| Ok((split_name(p), load_dataset(p)?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    let spec = config.model.spec(model, data.n_bodies());
    spec.validate()?;
    for (name, d) in &evals {
        spec.check_bodies(d.n_bodies())
            .map_err(|e| CliError::Usage(format!("eval split {name}: {e}")))?;
    }
    fs::create_dir_all(out).map_err(io_err(out))?;
    let record = RunRecord {
        model,
        train_size: data.len(),
        spec: spec.clone(),
        training: config.training.clone(),
        eval: config.eval.clone(),
    };
    if let ModelSpec::Gatr(c) = &spec {
        for line in params_report(c)? {
            log::info!("{line}");
        }
    }
    log::info!("training {model} on {} samples for {} steps", data.len(), config.training.steps);
    let result = train(&spec, &data, &config.training)?;
    let record_json = serde_json::to_string_pretty(&record).map_err(|e| CliError::Runtime(e.to_string()))?;
    let ckpt = Checkpoint {
        config: record_json.clone(),
        params: result.params,
    };
    write_file(&out.join(CHECKPOINT_FILE), |w| {
        write_checkpoint(w, &ckpt).map_err(|e| CliError::Runtime(e.to_string()))
    })?;
    write_file(&out.join(LOSS_FILE), |w| {
        writeln!(w, "step,loss,lr")?;
        for p in &result.curve {
            writeln!(w, "{},{:e},{:e}", p.step, p.loss, p.lr)?;
        }
        Ok(())
    })?;
    write_file(&out.join(RUN_FILE), |w| Ok(writeln!(w, "{record_json}")?))?;
    if let Some(last) = result.curve.last() {
        log::info!("final training loss {:.6e}", last.loss);
    }
    for (name, d) in &evals {
        evaluate_into(&record, &ckpt, d, name, &out.join(METRICS_FILE), record.eval.parallel)?;
    }
    Ok(())
}

pub fn cmd_eval(
    checkpoint: &Path,
    data: &Path,
    split: Option<&str>,
    out: Option<&Path>,
    parallel: bool,
) -> Result<(), CliError> {
    let file = File::open(checkpoint).map_err(|e| CliError::Usage(format!("cannot open {}: {e}", checkpoint.display())))?;
    let ckpt = read_checkpoint(&mut BufReader::new(file)).map_err(|e| CliError::Usage(format!("{}: {e}", checkpoint.display())))?;
    let record: RunRecord = serde_json::from_str(&ckpt.config)
        .map_err(|e| CliError::Usage(format!("checkpoint config is not a run record: {e}")))?;
    let name = split.map(str::to_string).unwrap_or_else(|| split_name(data));
    let data = load_dataset(data)?;
    let out = match out {
        Some(p) => p.to_path_buf(),
        None => checkpoint.parent().unwrap_or(Path::new(".")).join(METRICS_FILE),
    };
    evaluate_into(&record, &ckpt, &data, &name, &out, parallel && record.eval.parallel).map(|_| ())
}

/// Evaluates and replaces the row of `split` in the metrics CSV at `out`.
/// Translated splits of GATr models also get the metamorphic check, written
/// beside `out`.
fn evaluate_into(
    record: &RunRecord,
    ckpt: &Checkpoint,
    data: &Dataset,
    split: &str,
    out: &Path,
    parallel: bool,
) -> Result<EvalReport, CliError> {
    let precision: Precision = record.eval.precision;
    let report = evaluate(&record.spec, &ckpt.params, data, precision, parallel)?;
    println!(
        "{split}: mse {:.6e} +- {:.6e} over {} samples ({} fallbacks)",
        report.mse, report.stderr, report.n_samples, report.fallbacks
    );
    let row = format!("{split},{:e},{:e}", report.mse, report.stderr);
    upsert_row(out, "split,mse,stderr", split, &row)?;
    let translated = data.header.translation_mean.iter().any(|t| *t != 0.0);
    if record.model == ModelKind::Gatr && translated {
        let dev = metamorphic_deviation(&record.spec, &ckpt.params, data, precision, parallel)?;
        println!("{split}: metamorphic max deviation {dev:.3e}");
        let path = out.with_file_name(METAMORPHIC_FILE);
        upsert_row(&path, "split,max_deviation", split, &format!("{split},{dev:e}"))?;
    }
    Ok(report)
}

/// Rewrites the CSV at `path`, replacing the row keyed by `key` or appending it.
fn upsert_row(path: &Path, header: &str, key: &str, row: &str) -> Result<(), CliError> {
    let mut rows: Vec<String> = match fs::read_to_string(path) {
        Ok(text) => text.lines().skip(1).filter(|l| !l.is_empty()).map(str::to_string).collect(),
        Err(_) => Vec::new(),
    };
    let prefix = format!("{key},");
    match rows.iter_mut().find(|r| r.starts_with(&prefix)) {
        Some(r) => *r = row.to_string(),
        None => rows.push(row.to_string()),
    }
    write_file(path, |w| {
        writeln!(w, "{header}")?;
        for r in &rows {
            writeln!(w, "{r}")?;
        }
        Ok(())
    })
}

pub fn cmd_report(runs: &Path, out: &Path) -> Result<(), CliError> {
    let metrics = read_metrics(runs)?;
    if metrics.is_empty() {
        return Err(CliError::Runtime(format!("no completed runs under {}", runs.display())));
    }
    let rows = aggregate(&metrics);
    write_file(out, |w| {
        writeln!(w, "model,train_size,split,mse,stderr")?;
        for r in &rows {
            writeln!(w, "{},{},{},{:e},{:e}", r.model, r.train_size, r.split, r.mse, r.stderr)?;
        }
        Ok(())
    })?;
    log::info!("aggregated {} runs into {} rows", metrics.len(), rows.len());
    Ok(())
}

/// Parameter count per group and in total.
pub fn params_report(config: &GatrConfig) -> Result<Vec<String>, CliError> {
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(config.seed);
    let params = crate::model::init_params(config, &mut rng);
    let groups = param_breakdown(&params);
    let mut lines: Vec<String> = groups.iter().map(|(g, n)| format!("{g:<16} {n:>10}")).collect();
    lines.push(format!("{:<16} {:>10}", "total", params.n_values()));
    Ok(lines)
}

pub fn write_tables(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let t = build_cayley_tables();
    for (name, text) in [
        ("cayley_geometric.txt", t.render_product(Product::Geometric)),
        ("cayley_wedge.txt", t.render_product(Product::Wedge)),
        ("dual_signs.txt", t.render_dual()),
    ] {
        let path = dir.join(name);
        fs::write(&path, text).map_err(io_err(&path))?;
    }
    Ok(())
}

/// Writes through a buffer; on failure the partial file is removed.
fn write_file<F>(path: &Path, f: F) -> Result<(), CliError>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<(), CliError>,
{
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let result = f(&mut w).and_then(|_| w.flush().map_err(io_err(path)));
    if result.is_err() {
        drop(w);
        let _ = fs::remove_file(path);
    }
    result
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}
