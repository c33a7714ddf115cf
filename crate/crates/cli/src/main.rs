//! `fgm` command-line tool: synthetic data generation, training, prediction,
//! evaluation and benchmark sweeps. Every command writes a `manifest.json`
//! into its output directory.

mod manifest;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use fgm::bench::{run_bench, write_csv, BenchConfig};
use fgm::dataset::{
    generate_split, generate_truth, load_ground_truth, load_groups, load_libsvm, load_tree,
    write_ground_truth, write_libsvm, ScalingPolicy, SyntheticSpec, Weighting, TEST_STREAM,
    TRAIN_STREAM,
};
use fgm::engine::{fgm_train, L0Policy, Model, ModelMode, SolverConfig, Structure, TraceRecord};
use fgm::loss::LossKind;
use fgm::FgmError;
use serde_json::json;

use manifest::Manifest;

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io { path: PathBuf, source: std::io::Error },
    Lib(FgmError),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io { .. } => EXIT_DATA,
            CliError::Lib(FgmError::Argument(_)) => EXIT_USAGE,
            CliError::Lib(FgmError::Numerical { .. }) => EXIT_NUMERICAL,
            // Data files that do not fit the model or structure.
            CliError::Lib(FgmError::Contract(_)) => EXIT_DATA,
            CliError::Lib(_) => EXIT_DATA,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Io { path, source } => write!(f, "I/O error on {}: {source}", path.display()),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl From<FgmError> for CliError {
    fn from(e: FgmError) -> Self {
        CliError::Lib(e)
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(name = "fgm", version, about = "Feature generating machine for sparse linear classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic train/test pair and its ground truth.
    Generate(GenerateArgs),
    /// Train a model with the cutting-plane solver.
    Train(TrainArgs),
    /// Predict labels for a data file.
    Predict(PredictArgs),
    /// Report accuracy, support size and (optionally) recovered features.
    Eval(EvalArgs),
    /// Run a benchmark sweep described by a TOML file.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    /// Number of informative features.
    #[arg(long)]
    informative: usize,
    /// Weighting type of the informative features: 1, 2 or 3.
    #[arg(long = "type", default_value_t = 1)]
    weighting: u8,
    /// Test split size (defaults to `n`).
    #[arg(long)]
    n_test: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Training data in LIBSVM format.
    #[arg(long)]
    data: PathBuf,
    /// Feature dimension; defaults to the largest index in the file.
    #[arg(long)]
    dim: Option<usize>,
    /// squared-hinge or logistic.
    #[arg(long)]
    loss: Option<LossKind>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long = "C")]
    c: Option<f64>,
    #[arg(long)]
    eps_apg: Option<f64>,
    #[arg(long)]
    eps_outer: Option<f64>,
    #[arg(long)]
    max_outer: Option<usize>,
    #[arg(long)]
    max_inner: Option<usize>,
    #[arg(long)]
    eta: Option<f64>,
    /// Fixed initial Lipschitz estimate; by default it scales with n·C.
    #[arg(long)]
    l0: Option<f64>,
    /// ones or inverse-norm.
    #[arg(long)]
    scaling: Option<ScalingPolicy>,
    #[arg(long)]
    seed: Option<u64>,
    /// Group file (`name: i1 i2 ...`).
    #[arg(long, conflicts_with_all = ["tree", "poly"])]
    groups: Option<PathBuf>,
    /// Tree file (`name parent|ROOT: i1 i2 ...`).
    #[arg(long, conflicts_with = "poly")]
    tree: Option<PathBuf>,
    /// Select degree-2 polynomial features of `(gamma x'z + r)^2`.
    #[arg(long)]
    poly: bool,
    #[arg(long, requires = "poly", default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, requires = "poly", default_value_t = 1.0)]
    r: f64,
    /// Anchor features scored per block in polynomial mode.
    #[arg(long, requires = "poly", default_value_t = 64)]
    block: usize,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Ground-truth file (`index weight` lines) for recovery counts.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// TOML benchmark description.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fgm: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn cmd_generate(a: GenerateArgs) -> CliResult<()> {
    if a.informative == 0 || a.informative > a.m {
        return Err(CliError::Usage(format!(
            "--informative must lie in 1..={}, got {}",
            a.m, a.informative
        )));
    }
    let weighting = Weighting::from_index(a.weighting)?;
    let n_test = a.n_test.unwrap_or(a.n);
    let spec = SyntheticSpec { n: a.n, m: a.m, informative: a.informative, weighting, seed: a.seed };
    let truth = generate_truth(&spec)?;
    let train = generate_split(&truth, a.n, a.seed, TRAIN_STREAM);
    let test = generate_split(&truth, n_test, a.seed, TEST_STREAM);

    create_dir(&a.out_dir)?;
    let mut manifest = Manifest::new("generate");
    manifest.config(json!({
        "n": a.n, "m": a.m, "informative": a.informative,
        "type": a.weighting, "n_test": n_test, "seed": a.seed,
    }));
    manifest.seed(a.seed);
    let paths = [a.out_dir.join("train.svm"), a.out_dir.join("test.svm"), a.out_dir.join("truth.txt")];
    write_libsvm(&train, &paths[0])?;
    write_libsvm(&test, &paths[1])?;
    write_ground_truth(&truth, &paths[2])?;
    for p in &paths {
        manifest.output(p);
    }
    manifest.finish(&a.out_dir)?;
    Ok(())
}

fn solver_config(a: &TrainArgs) -> SolverConfig {
    let d = SolverConfig::default();
    SolverConfig {
        budget: a.budget.unwrap_or(d.budget),
        c: a.c.unwrap_or(d.c),
        loss: a.loss.unwrap_or(d.loss),
        eps_apg: a.eps_apg.unwrap_or(d.eps_apg),
        eps_outer: a.eps_outer.unwrap_or(d.eps_outer),
        max_outer: a.max_outer.unwrap_or(d.max_outer),
        eta: a.eta.unwrap_or(d.eta),
        l0: a.l0.map_or(d.l0, L0Policy::Fixed),
        max_inner: a.max_inner.unwrap_or(d.max_inner),
        scaling: a.scaling.unwrap_or(d.scaling),
        seed: a.seed.unwrap_or(d.seed),
    }
}

fn write_trace(path: &Path, trace: &[TraceRecord]) -> CliResult<()> {
    let csv_err = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::Io { path: path.to_path_buf(), source: std::io::Error::other(format!("{other:?}")) },
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["iter", "F", "beta", "phi", "inner_iters", "selected", "seconds"])
        .map_err(csv_err)?;
    for r in trace {
        let selected: Vec<String> = r.selected.iter().map(usize::to_string).collect();
        w.write_record([
            r.iteration.to_string(),
            r.objective.to_string(),
            r.beta.to_string(),
            r.phi.to_string(),
            r.inner_iterations.to_string(),
            selected.join(" "),
            format!("{:.6}", r.seconds),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn cmd_train(a: TrainArgs) -> CliResult<()> {
    let cfg = solver_config(&a);
    cfg.validate()?;
    let mut manifest = Manifest::new("train");
    manifest.input(&a.data)?;
    let data = load_libsvm(&a.data, a.dim)?;
    let (structure, mode) = if let Some(path) = &a.groups {
        manifest.input(path)?;
        (Structure::Groups(load_groups(path, data.n_features())?), json!({"groups": path}))
    } else if let Some(path) = &a.tree {
        manifest.input(path)?;
        (Structure::Tree(load_tree(path, data.n_features())?), json!({"tree": path}))
    } else if a.poly {
        (
            Structure::Polynomial { gamma: a.gamma, r: a.r, block: a.block },
            json!({"poly": {"gamma": a.gamma, "r": a.r, "block": a.block}}),
        )
    } else {
        (Structure::Plain, json!("plain"))
    };

    let model = fgm_train(&data, &structure, &cfg)?;
    log::info!(
        "trained: {} outer iterations, {} units selected, stop {:?}",
        model.outer_iterations(),
        model.support_units().len(),
        model.stop_reason
    );

    create_dir(&a.out_dir)?;
    let model_path = a.out_dir.join("model.json");
    let trace_path = a.out_dir.join("trace.csv");
    model.save(&model_path)?;
    write_trace(&trace_path, &model.trace)?;
    manifest.config(json!({
        "data": a.data,
        "dim": data.n_features(),
        "structure": mode,
        "solver": serde_json::to_value(&cfg).expect("config serializes"),
    }));
    manifest.seed(cfg.seed);
    manifest.output(&model_path);
    manifest.output(&trace_path);
    manifest.finish(&a.out_dir)?;
    Ok(())
}

fn load_model_and_data(model: &Path, data: &Path, manifest: &mut Manifest) -> CliResult<(Model, fgm::dataset::SparseDataset)> {
    manifest.input(model)?;
    manifest.input(data)?;
    let model = Model::load(model)?;
    let dim = match (model.mode, model.poly) {
        (ModelMode::Polynomial, Some(map)) => map.m,
        _ => model.n_features,
    };
    let data = load_libsvm(data, Some(dim))?;
    Ok((model, data))
}

fn write_metrics(dir: &Path, metrics: &serde_json::Value, manifest: &mut Manifest) -> CliResult<()> {
    let path = dir.join("metrics.json");
    let text = serde_json::to_string_pretty(metrics).expect("metrics serialize");
    write_text(&path, &(text.clone() + "\n"))?;
    manifest.output(&path);
    println!("{text}");
    Ok(())
}

fn cmd_predict(a: PredictArgs) -> CliResult<()> {
    let mut manifest = Manifest::new("predict");
    let (model, data) = load_model_and_data(&a.model, &a.data, &mut manifest)?;
    let pred = model.predict(&data)?;
    let hits = pred.iter().zip(data.labels()).filter(|(p, y)| p == y).count();
    let accuracy = if pred.is_empty() { 0.0 } else { hits as f64 / pred.len() as f64 };

    create_dir(&a.out_dir)?;
    let pred_path = a.out_dir.join("predictions.txt");
    let mut text = String::with_capacity(3 * pred.len());
    for p in &pred {
        text.push_str(if *p > 0.0 { "+1\n" } else { "-1\n" });
    }
    write_text(&pred_path, &text)?;
    manifest.output(&pred_path);
    manifest.config(json!({"model": a.model, "data": a.data}));
    write_metrics(
        &a.out_dir,
        &json!({"accuracy": accuracy, "n": pred.len(), "support": model.support_units().len()}),
        &mut manifest,
    )?;
    manifest.finish(&a.out_dir)?;
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> CliResult<()> {
    let mut manifest = Manifest::new("eval");
    let (model, data) = load_model_and_data(&a.model, &a.data, &mut manifest)?;
    let recovered = match &a.truth {
        Some(path) => {
            if model.mode == ModelMode::Polynomial {
                return Err(CliError::Usage(
                    "--truth cannot be used with a polynomial model".into(),
                ));
            }
            manifest.input(path)?;
            let truth = load_ground_truth(path, Some(model.n_features))?;
            Some(model.evaluate_recovery(&truth)?)
        }
        None => None,
    };
    let metrics = json!({
        "accuracy": model.accuracy(&data)?,
        "n": data.n_samples(),
        "support": model.support_units().len(),
        "support_features": model.support_features().len(),
        "recovered": recovered,
    });
    create_dir(&a.out_dir)?;
    manifest.config(json!({"model": a.model, "data": a.data, "truth": a.truth}));
    write_metrics(&a.out_dir, &metrics, &mut manifest)?;
    manifest.finish(&a.out_dir)?;
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> CliResult<()> {
    let mut manifest = Manifest::new("bench");
    manifest.input(&a.config)?;
    let cfg = BenchConfig::load(&a.config)?;
    cfg.validate()?;
    let started = Instant::now();
    let rows = run_bench(&cfg)?;
    log::info!("bench: {} rows in {:.1}s", rows.len(), started.elapsed().as_secs_f64());

    create_dir(&a.out_dir)?;
    let csv_path = a.out_dir.join("results.csv");
    let mut buf = Vec::new();
    write_csv(&rows, &mut buf)?;
    let mut file = fs::File::create(&csv_path).map_err(|e| CliError::io(&csv_path, e))?;
    file.write_all(&buf).map_err(|e| CliError::io(&csv_path, e))?;
    manifest.output(&csv_path);
    manifest.config(serde_json::to_value(&cfg).expect("bench config serializes"));
    if let Some(&seed) = cfg.seeds.first() {
        manifest.seed(seed);
    }
    manifest.finish(&a.out_dir)?;
    Ok(())
}
