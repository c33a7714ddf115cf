//! Benchmark harness: trains every configured method on seeded synthetic
//! data and reports accuracy, support size and ground-truth recovery.
//!
//! Settings run in a worker pool, one task per `(seed, setting)`, each with
//! its own state; rows come back in a fixed order regardless of scheduling.

use std::collections::BTreeSet;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::{
    l1_match_supports, l1_prox_train, l2_full_train, retrain_unbiased, BaselineOptions,
    PathOptions, DEBIAS_C,
};
use crate::dataset::{
    generate_split, generate_synthetic, GroundTruth, SparseDataset, SyntheticSpec, Weighting,
    TEST_STREAM,
};
use crate::engine::{fgm_train, Model, ModelKind, SolverConfig, Structure};
use crate::error::{FgmError, Result};
use crate::loss::Loss;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "FGM_THREADS";

pub const METHODS: [&str; 5] = ["fgm", "fgm-debias", "l1", "l1-debias", "l2-full"];

/// Synthetic data shared by all settings of one seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchData {
    pub n: usize,
    pub m: usize,
    pub informative: usize,
    /// Weighting type 1, 2 or 3.
    #[serde(rename = "type", default = "one")]
    pub weighting: u8,
    pub n_test: usize,
}

fn one() -> u8 {
    1
}

fn default_debias_c() -> f64 {
    DEBIAS_C
}

fn default_l1_eps() -> f64 {
    1e-3
}

/// A benchmark description, usually read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub data: BenchData,
    pub seeds: Vec<u64>,
    pub methods: Vec<String>,
    /// FGM budgets; one setting each for `fgm` and `fgm-debias`.
    #[serde(default)]
    pub budgets: Vec<usize>,
    /// Optional grid of outer-iteration caps crossed with `budgets`; empty
    /// means the solver's own `max_outer`.
    #[serde(default)]
    pub max_outers: Vec<usize>,
    /// Explicit ℓ₁ weights; one setting each for `l1` and `l1-debias`.
    #[serde(default)]
    pub regs: Vec<f64>,
    /// Target support sizes for `l1`/`l1-debias`, reached by an ℓ₁ path
    /// sweep.
    #[serde(default)]
    pub targets: Vec<usize>,
    /// Solver settings for FGM and `l2-full`; the budget is overridden per
    /// setting.
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default = "default_debias_c")]
    pub debias_c: f64,
    #[serde(default = "default_l1_eps")]
    pub l1_eps: f64,
    /// Worker threads; falls back to `FGM_THREADS`, then to rayon's default.
    #[serde(default)]
    pub threads: Option<usize>,
}

impl BenchConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: BenchConfig =
            toml::from_str(text).map_err(|e| FgmError::argument(format!("bench config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| FgmError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        for m in &self.methods {
            if !METHODS.contains(&m.as_str()) {
                return Err(FgmError::argument(format!(
                    "unknown method '{m}' (expected one of {})",
                    METHODS.join(", ")
                )));
            }
        }
        if self.seeds.is_empty() {
            return Err(FgmError::argument("no seeds given"));
        }
        if self.data.informative > self.data.m {
            return Err(FgmError::argument("more informative features than features"));
        }
        Weighting::from_index(self.data.weighting)?;
        let wants = |m: &str| self.methods.iter().any(|x| x == m);
        if (wants("fgm") || wants("fgm-debias")) && self.budgets.is_empty() {
            return Err(FgmError::argument("fgm methods need at least one budget"));
        }
        if (wants("l1") || wants("l1-debias")) && self.regs.is_empty() && self.targets.is_empty() {
            return Err(FgmError::argument("l1 methods need regs or targets"));
        }
        if self.max_outers.contains(&0) {
            return Err(FgmError::argument("outer-iteration caps must be at least 1"));
        }
        if self.regs.iter().any(|r| !(*r > 0.0)) {
            return Err(FgmError::argument("l1 weights must be positive"));
        }
        if !(self.debias_c > 0.0) {
            return Err(FgmError::argument("debias_c must be positive"));
        }
        self.solver.validate()
    }

    fn wants(&self, method: &str) -> bool {
        self.methods.iter().any(|m| m == method)
    }
}

/// One result line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub method: String,
    pub setting: String,
    pub seed: u64,
    pub accuracy: f64,
    pub support: usize,
    pub recovered: usize,
    pub seconds: f64,
    /// Outer iterations for FGM rows, 0 otherwise.
    pub outer_iterations: usize,
    #[serde(skip)]
    pub model: Model,
}

impl BenchRow {
    pub const CSV_HEADER: [&'static str; 7] =
        ["method", "setting", "seed", "accuracy", "support", "recovered", "seconds"];

    pub fn csv_record(&self) -> [String; 7] {
        [
            self.method.clone(),
            self.setting.clone(),
            self.seed.to_string(),
            format!("{:.6}", self.accuracy),
            self.support.to_string(),
            self.recovered.to_string(),
            format!("{:.3}", self.seconds),
        ]
    }
}

/// Worker count from `FGM_THREADS`, if set to a positive integer.
pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&t| t > 0)
}

struct SeedData {
    train: SparseDataset,
    test: SparseDataset,
    truth: GroundTruth,
}

#[derive(Debug, Clone, Copy)]
enum Task {
    Fgm { budget: usize, max_outer: Option<usize> },
    L1Reg { reg: f64 },
    L1Targets,
    L2Full,
}

fn row(method: &str, setting: String, seed: u64, model: Model, data: &SeedData, seconds: f64) -> Result<BenchRow> {
    Ok(BenchRow {
        method: method.to_string(),
        setting,
        seed,
        accuracy: model.accuracy(&data.test)?,
        support: model.support_features().len(),
        recovered: model.evaluate_recovery(&data.truth)?,
        seconds,
        outer_iterations: model.outer_iterations(),
        model,
    })
}

fn run_task(cfg: &BenchConfig, seed: u64, data: &SeedData, task: Task) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    let retrain_opts = BaselineOptions { eps: 1e-4, max_iter: 5000, ..BaselineOptions::default() };
    let l1_opts = BaselineOptions { eps: cfg.l1_eps, max_iter: 5000, ..BaselineOptions::default() };
    let l1_loss = Loss::new(cfg.solver.loss, 1.0)?;
    let debias = |support: &[usize]| -> Result<Model> {
        retrain_unbiased(&data.train, support, cfg.solver.loss, cfg.debias_c, &retrain_opts)
    };
    match task {
        Task::Fgm { budget, max_outer } => {
            let solver = SolverConfig {
                budget,
                seed,
                max_outer: max_outer.unwrap_or(cfg.solver.max_outer),
                ..cfg.solver.clone()
            };
            let start = Instant::now();
            let model = fgm_train(&data.train, &Structure::Plain, &solver)?;
            let t_fgm = start.elapsed().as_secs_f64();
            let setting = match max_outer {
                Some(t) => format!("B={budget},T={t}"),
                None => format!("B={budget}"),
            };
            if cfg.wants("fgm-debias") {
                let support = model.support_features().to_vec();
                let start = Instant::now();
                let refit = debias(&support)?;
                let t = t_fgm + start.elapsed().as_secs_f64();
                rows.push(row("fgm-debias", setting.clone(), seed, refit, data, t)?);
            }
            if cfg.wants("fgm") {
                rows.insert(0, row("fgm", setting, seed, model, data, t_fgm)?);
            }
        }
        Task::L1Reg { reg } => {
            let start = Instant::now();
            let fit = l1_prox_train(&data.train, &l1_loss, reg, &l1_opts)?;
            let t_l1 = start.elapsed().as_secs_f64();
            let setting = format!("reg={reg}");
            let model = fit.into_model(ModelKind::L1);
            if cfg.wants("l1") {
                rows.push(row("l1", setting.clone(), seed, model.clone(), data, t_l1)?);
            }
            if cfg.wants("l1-debias") && !model.support_features().is_empty() {
                let start = Instant::now();
                let refit = debias(model.support_features())?;
                let t = t_l1 + start.elapsed().as_secs_f64();
                rows.push(row("l1-debias", setting, seed, refit, data, t)?);
            }
        }
        Task::L1Targets => {
            let start = Instant::now();
            let opts = PathOptions {
                solver: l1_opts,
                ..PathOptions::default()
            };
            let matches = l1_match_supports(&data.train, &l1_loss, &cfg.targets, &opts)?;
            let t_path = start.elapsed().as_secs_f64();
            for m in matches {
                if !m.matched {
                    log::warn!(
                        "seed {seed}: l1 path reached support {} for target {}",
                        m.support_size(),
                        m.target
                    );
                }
                let setting = format!("target={}", m.target);
                let model = m.weights.into_model(ModelKind::L1);
                if cfg.wants("l1") {
                    rows.push(row("l1", setting.clone(), seed, model.clone(), data, t_path)?);
                }
                if cfg.wants("l1-debias") && !model.support_features().is_empty() {
                    let start = Instant::now();
                    let refit = debias(model.support_features())?;
                    let t = t_path + start.elapsed().as_secs_f64();
                    rows.push(row("l1-debias", setting, seed, refit, data, t)?);
                }
            }
        }
        Task::L2Full => {
            let loss = cfg.solver.loss()?;
            let start = Instant::now();
            let fit = l2_full_train(&data.train, &loss, &retrain_opts)?;
            let t = start.elapsed().as_secs_f64();
            rows.push(row("l2-full", "all".into(), seed, fit.into_model(ModelKind::L2Full), data, t)?);
        }
    }
    Ok(rows)
}

/// Runs every `(seed, setting)` of the benchmark. Rows are ordered by seed,
/// then setting, then method.
pub fn run_bench(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    cfg.validate()?;
    let weighting = Weighting::from_index(cfg.data.weighting)?;
    let mut tasks = Vec::new();
    if cfg.wants("fgm") || cfg.wants("fgm-debias") {
        let budgets: BTreeSet<usize> = cfg.budgets.iter().copied().collect();
        let caps: Vec<Option<usize>> = if cfg.max_outers.is_empty() {
            vec![None]
        } else {
            cfg.max_outers.iter().copied().collect::<BTreeSet<_>>().into_iter().map(Some).collect()
        };
        for budget in budgets {
            tasks.extend(caps.iter().map(|&max_outer| Task::Fgm { budget, max_outer }));
        }
    }
    if cfg.wants("l1") || cfg.wants("l1-debias") {
        tasks.extend(cfg.regs.iter().map(|&reg| Task::L1Reg { reg }));
        if !cfg.targets.is_empty() {
            tasks.push(Task::L1Targets);
        }
    }
    if cfg.wants("l2-full") {
        tasks.push(Task::L2Full);
    }

    let threads = cfg.threads.or_else(threads_from_env).unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| FgmError::argument(format!("worker pool: {e}")))?;

    pool.install(|| {
        let seeds: Vec<(u64, SeedData)> = cfg
            .seeds
            .par_iter()
            .map(|&seed| {
                let spec = SyntheticSpec {
                    n: cfg.data.n,
                    m: cfg.data.m,
                    informative: cfg.data.informative,
                    weighting,
                    seed,
                };
                let (train, truth) = generate_synthetic(&spec)?;
                let test = generate_split(&truth, cfg.data.n_test, seed, TEST_STREAM);
                Ok((seed, SeedData { train, test, truth }))
            })
            .collect::<Result<_>>()?;
        let jobs: Vec<(usize, Task)> = (0..seeds.len())
            .flat_map(|s| tasks.iter().map(move |&t| (s, t)))
            .collect();
        let chunks: Vec<Vec<BenchRow>> = jobs
            .par_iter()
            .map(|&(s, task)| {
                let (seed, data) = &seeds[s];
                log::info!("bench: seed {seed}, {task:?}");
                run_task(cfg, *seed, data, task)
            })
            .collect::<Result<_>>()?;
        Ok(chunks.into_iter().flatten().collect())
    })
}

/// Writes rows as CSV with a header line.
pub fn write_csv<W: std::io::Write>(rows: &[BenchRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| FgmError::Serde(e.to_string());
    w.write_record(BenchRow::CSV_HEADER).map_err(err)?;
    for r in rows {
        w.write_record(r.csv_record()).map_err(err)?;
    }
    w.flush().map_err(|e| FgmError::Serde(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"
seeds = [1, 2]
methods = ["fgm", "fgm-debias", "l1", "l2-full"]
budgets = [3]
regs = [0.5]

[data]
n = 80
m = 40
informative = 5
n_test = 50
"#;

    #[test]
    fn parses_and_runs() {
        let cfg = BenchConfig::from_toml(SMALL).unwrap();
        let rows = run_bench(&cfg).unwrap();
        let methods: Vec<&str> = rows.iter().map(|r| r.method.as_str()).collect();
        assert_eq!(
            methods,
            ["fgm", "fgm-debias", "l1", "l2-full", "fgm", "fgm-debias", "l1", "l2-full"]
        );
        for r in rows.iter().filter(|r| r.method == "fgm") {
            let t = r.outer_iterations;
            assert!(r.support >= 3 && r.support <= 3 * t);
        }
    }

    #[test]
    fn unknown_method_is_rejected() {
        let text = SMALL.replace("\"l2-full\"", "\"svm\"");
        assert!(matches!(BenchConfig::from_toml(&text), Err(FgmError::Argument(_))));
    }

    #[test]
    fn csv_has_header_and_rows() {
        let cfg = BenchConfig::from_toml(&SMALL.replace("seeds = [1, 2]", "seeds = [4]")).unwrap();
        let rows = run_bench(&cfg).unwrap();
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "method,setting,seed,accuracy,support,recovered,seconds");
        assert_eq!(text.lines().count(), rows.len() + 1);
    }
}
