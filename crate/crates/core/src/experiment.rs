//! Experiment driver behind the `sigcomp` binary: builds datasets, runs one
//! solver (or all of them for a comparison) and writes tidy output files.
//!
//! Output of [`run_experiment`] in `cfg.out`:
//! - `trace.csv`: `k,objective,step_norm,eta,admm_iters,elapsed_s`
//! - `summary.json`: metrics, rank diagnostic and an echo of the config
//! - `model.csv`: `index,value` of θ* in packed layout

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{bundled_digits, load_digits_csv, make_binary_task, make_franke_datasets, Dataset, NoiseSpec, Task};
use crate::diagnostics::{
    adaptive_network_size, classification_errors, jacobian_rank, max_error, rms_error, DEFAULT_RANK_TOL,
};
use crate::error::{Error, Result};
use crate::fmt_f64;
use crate::losses::LossKind;
use crate::model::{inner_eval, predict, NetworkShape, ParamVector};
use crate::solvers::{
    baseline_fit, glpa_fit, lpa_fit, Baseline, BaselineConfig, FitReport, LineSearch, SolverConfig, SolverKind,
};

pub const SCHEMA_VERSION: u32 = 1;

/// ADMM iteration cap used for the digits tasks unless overridden.
pub const DIGITS_ADMM_MAX_ITERS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    Franke,
    Digits,
    CustomCsv,
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskKind::Franke => "franke",
            TaskKind::Digits => "digits",
            TaskKind::CustomCsv => "custom-csv",
        })
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "franke" => Ok(TaskKind::Franke),
            "digits" => Ok(TaskKind::Digits),
            "custom-csv" => Ok(TaskKind::CustomCsv),
            other => Err(Error::invalid(format!("unknown task '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    Zero,
    Uniform,
}

impl FromStr for InitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(InitKind::Zero),
            "uniform" => Ok(InitKind::Uniform),
            other => Err(Error::invalid(format!("unknown init '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub task: TaskKind,
    pub loss: LossKind,
    pub solver: SolverKind,
    /// Hidden width; `None` uses the adaptive size for the training set.
    pub q: Option<usize>,
    pub solver_config: SolverConfig,
    pub baseline: BaselineConfig,
    /// Noise level σ̃ for Franke training targets.
    pub noise_sigma: Option<f64>,
    pub seed: u64,
    pub init: InitKind,
    /// Half-width of the uniform initialization.
    pub init_scale: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub pair: (u8, u8),
    pub train_frac: f64,
    /// Divide digit pixels by 16.
    pub scale_pixels: bool,
    /// Digits CSV (digits task) or `x0..,y` CSV (custom-csv task).
    pub data: Option<PathBuf>,
    pub out: PathBuf,
}

impl ExperimentConfig {
    /// Defaults for a task, including the smaller ADMM cap used on digits.
    pub fn for_task(task: TaskKind) -> Self {
        let mut solver_config = SolverConfig::default();
        if task == TaskKind::Digits {
            solver_config.admm.max_iters = DIGITS_ADMM_MAX_ITERS;
        }
        let (loss, solver) = match task {
            TaskKind::Digits => (LossKind::Hinge, SolverKind::Glpa),
            _ => (LossKind::Quadratic, SolverKind::Lpa),
        };
        Self {
            task,
            loss,
            solver,
            q: None,
            solver_config,
            baseline: BaselineConfig::default(),
            noise_sigma: None,
            seed: 0,
            init: InitKind::Uniform,
            init_scale: 0.5,
            n_train: 289,
            n_test: 121,
            pair: (0, 1),
            train_frac: 0.7,
            scale_pixels: false,
            data: None,
            out: PathBuf::from("out"),
        }
    }

    /// Rejects inconsistent settings before any computation.
    pub fn validate(&self) -> Result<()> {
        if self.task == TaskKind::Franke && self.loss == LossKind::Hinge {
            return Err(Error::invalid(
                "hinge loss needs a classification task, franke is regression",
            ));
        }
        if self.task == TaskKind::CustomCsv && self.data.is_none() {
            return Err(Error::invalid("custom-csv task needs --data"));
        }
        if self.task == TaskKind::Franke && (self.n_train == 0 || self.n_test == 0) {
            return Err(Error::invalid("franke task needs n_train >= 1 and n_test >= 1"));
        }
        if self.noise_sigma.is_some() && self.task != TaskKind::Franke {
            return Err(Error::invalid("noise only applies to the franke task"));
        }
        if let Some(sigma) = self.noise_sigma {
            NoiseSpec::new(sigma, self.seed)?;
        }
        if self.q == Some(0) {
            return Err(Error::invalid("q must be >= 1"));
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            return Err(Error::invalid("init scale must be > 0"));
        }
        if !(self.train_frac > 0.0 && self.train_frac < 1.0) {
            return Err(Error::invalid("train fraction must be in (0, 1)"));
        }
        if self.pair.0 == self.pair.1 || self.pair.0 > 9 || self.pair.1 > 9 {
            return Err(Error::invalid("digit pair must be two different digits in 0..9"));
        }
        match self.solver.baseline() {
            Some(_) => self.baseline.validate(),
            None => self.solver_config.validate(),
        }
    }

    fn noise(&self) -> Result<Option<NoiseSpec>> {
        self.noise_sigma.map(|s| NoiseSpec::new(s, self.seed)).transpose()
    }
}

/// Training and test data for a config.
pub fn build_datasets(cfg: &ExperimentConfig) -> Result<(Dataset, Dataset)> {
    match cfg.task {
        TaskKind::Franke => make_franke_datasets(cfg.n_train, cfg.n_test, cfg.noise()?),
        TaskKind::Digits => {
            let records = match &cfg.data {
                Some(path) => load_digits_csv(path)?,
                None => bundled_digits(),
            };
            let (train, test) = make_binary_task(&records, cfg.pair.0, cfg.pair.1, cfg.train_frac, cfg.seed)?;
            if cfg.scale_pixels {
                Ok((train.scale_inputs(1.0 / 16.0), test.scale_inputs(1.0 / 16.0)))
            } else {
                Ok((train, test))
            }
        }
        TaskKind::CustomCsv => {
            let path = cfg
                .data
                .as_deref()
                .ok_or_else(|| Error::invalid("custom-csv task needs --data"))?;
            let task = if cfg.loss == LossKind::Hinge {
                Task::Binary
            } else {
                Task::Regression
            };
            split_dataset(&Dataset::read_csv(path, task)?, cfg.train_frac, cfg.seed)
        }
    }
}

/// Seeded shuffle, then `⌊frac · m⌋` rows for training.
pub fn split_dataset(data: &Dataset, frac: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (frac * data.len() as f64 + 1e-9).floor() as usize;
    if n_train == 0 || n_train == data.len() {
        return Err(Error::invalid(format!(
            "train fraction {frac} leaves an empty split of {} rows",
            data.len()
        )));
    }
    let take = |rows: &[usize]| {
        Dataset::new(
            DMatrix::from_fn(rows.len(), data.input_dim(), |i, j| data.inputs[(rows[i], j)]),
            DVector::from_fn(rows.len(), |i, _| data.targets[rows[i]]),
            data.task,
        )
    };
    Ok((take(&idx[..n_train])?, take(&idx[n_train..])?))
}

pub fn initial_params(cfg: &ExperimentConfig, shape: &NetworkShape) -> ParamVector {
    match cfg.init {
        InitKind::Zero => ParamVector::zeros(shape),
        InitKind::Uniform => ParamVector::uniform(shape, cfg.init_scale, cfg.seed),
    }
}

pub fn network_shape(cfg: &ExperimentConfig, train: &Dataset) -> Result<NetworkShape> {
    let q = cfg
        .q
        .unwrap_or_else(|| adaptive_network_size(train.len(), train.input_dim()));
    NetworkShape::new(train.input_dim(), q)
}

/// Runs one solver on prepared data.
pub fn fit(
    solver: SolverKind,
    cfg: &ExperimentConfig,
    train: &Dataset,
    shape: &NetworkShape,
    theta0: &ParamVector,
) -> Result<FitReport> {
    match solver {
        SolverKind::Lpa => lpa_fit(train, shape, cfg.loss, &cfg.solver_config, theta0),
        SolverKind::Glpa => glpa_fit(train, shape, cfg.loss, &cfg.solver_config, theta0),
        SolverKind::Sgdm => baseline_fit(train, shape, cfg.loss, Baseline::Sgdm, &cfg.baseline, theta0),
        SolverKind::Rmsprop => baseline_fit(train, shape, cfg.loss, Baseline::RmsProp, &cfg.baseline, theta0),
        SolverKind::Adam => baseline_fit(train, shape, cfg.loss, Baseline::Adam, &cfg.baseline, theta0),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub train_rms_error: f64,
    pub train_max_error: f64,
    pub test_rms_error: f64,
    pub test_max_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub train_errors: usize,
    pub train_size: usize,
    pub test_errors: usize,
    pub test_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankDiagnostic {
    pub rank: usize,
    pub rows: usize,
    pub full_row_rank: bool,
    pub tol_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub task: TaskKind,
    pub loss: LossKind,
    pub solver: SolverKind,
    pub q: usize,
    /// Adaptive width for this training set, reported even when `q` was given.
    pub q_adaptive: usize,
    pub n_params: usize,
    pub m_train: usize,
    pub m_test: usize,
    pub input_dim: usize,
    pub iterations: usize,
    pub converged: bool,
    pub stop_reason: crate::solvers::StopReason,
    pub final_objective: f64,
    /// Outer iterations whose backtracking exhausted all trials.
    pub backtrack_failures: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub regression: Option<RegressionMetrics>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub classification: Option<ClassificationMetrics>,
    pub rank: RankDiagnostic,
    pub elapsed_s: f64,
    pub config: ExperimentConfig,
}

/// Metrics and diagnostics for a finished fit.
pub fn summarize(
    cfg: &ExperimentConfig,
    solver: SolverKind,
    train: &Dataset,
    test: &Dataset,
    shape: &NetworkShape,
    report: &FitReport,
    elapsed_s: f64,
) -> Result<Summary> {
    let theta = &report.theta_star;
    let (regression, classification) = match train.task {
        Task::Regression => {
            let train_pred = predict(theta, shape, &train.inputs)?;
            let test_pred = predict(theta, shape, &test.inputs)?;
            let metrics = RegressionMetrics {
                train_rms_error: rms_error(train_pred.as_slice(), train.targets.as_slice())?,
                train_max_error: max_error(train_pred.as_slice(), train.targets.as_slice())?,
                test_rms_error: rms_error(test_pred.as_slice(), test.targets.as_slice())?,
                test_max_error: max_error(test_pred.as_slice(), test.targets.as_slice())?,
            };
            (Some(metrics), None)
        }
        Task::Binary => {
            let metrics = ClassificationMetrics {
                train_errors: classification_errors(theta, shape, train)?,
                train_size: train.len(),
                test_errors: classification_errors(theta, shape, test)?,
                test_size: test.len(),
            };
            (None, Some(metrics))
        }
    };
    let eval = inner_eval(theta, shape, &train.inputs, &train.targets, cfg.loss)?;
    let rank = jacobian_rank(&eval.jacobian, DEFAULT_RANK_TOL)?;

    Ok(Summary {
        schema_version: SCHEMA_VERSION,
        task: cfg.task,
        loss: cfg.loss,
        solver,
        q: shape.hidden(),
        q_adaptive: adaptive_network_size(train.len(), train.input_dim()),
        n_params: shape.n(),
        m_train: train.len(),
        m_test: test.len(),
        input_dim: train.input_dim(),
        iterations: report.iterations(),
        converged: report.converged,
        stop_reason: report.stop_reason,
        final_objective: report.final_objective,
        backtrack_failures: report
            .trace
            .iter()
            .filter(|r| r.line_search == LineSearch::Exhausted)
            .map(|r| r.k)
            .collect(),
        regression,
        classification,
        rank: RankDiagnostic {
            rank: rank.rank,
            rows: eval.m(),
            full_row_rank: rank.full_row_rank,
            tol_factor: DEFAULT_RANK_TOL,
        },
        elapsed_s,
        config: cfg.clone(),
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_with(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let mut w = create(path)?;
    body(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn write_trace_csv(path: &Path, report: &FitReport) -> Result<()> {
    write_with(path, |w| {
        writeln!(w, "k,objective,step_norm,eta,admm_iters,elapsed_s")?;
        for r in &report.trace {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.k,
                fmt_f64(r.objective),
                fmt_f64(r.step_norm),
                fmt_f64(r.eta),
                r.admm_iters,
                fmt_f64(r.elapsed)
            )?;
        }
        Ok(())
    })
}

pub fn write_model_csv(path: &Path, theta: &ParamVector) -> Result<()> {
    write_with(path, |w| {
        writeln!(w, "index,value")?;
        for (i, v) in theta.as_slice().iter().enumerate() {
            writeln!(w, "{i},{}", fmt_f64(*v))?;
        }
        Ok(())
    })
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::invalid(format!("cannot serialize {}: {e}", path.display())))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// One training run; writes `trace.csv`, `summary.json` and `model.csv` into `cfg.out`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Summary> {
    cfg.validate()?;
    let (train, test) = build_datasets(cfg)?;
    if cfg.loss == LossKind::Hinge && train.task != Task::Binary {
        return Err(Error::invalid("hinge loss needs a binary task"));
    }
    let shape = network_shape(cfg, &train)?;
    let theta0 = initial_params(cfg, &shape);

    let start = Instant::now();
    let report = fit(cfg.solver, cfg, &train, &shape, &theta0)?;
    let elapsed = start.elapsed().as_secs_f64();
    let summary = summarize(cfg, cfg.solver, &train, &test, &shape, &report, elapsed)?;

    ensure_dir(&cfg.out)?;
    write_trace_csv(&cfg.out.join("trace.csv"), &report)?;
    write_model_csv(&cfg.out.join("model.csv"), &report.theta_star)?;
    write_json(&cfg.out.join("summary.json"), &summary)?;
    Ok(summary)
}

/// Writes `train.csv` and `test.csv` (`x0..,y`) for the configured task into `out_dir`.
pub fn gen_data(cfg: &ExperimentConfig, out_dir: &Path) -> Result<(PathBuf, PathBuf)> {
    cfg.validate()?;
    let (train, test) = build_datasets(cfg)?;
    ensure_dir(out_dir)?;
    let train_path = out_dir.join("train.csv");
    let test_path = out_dir.join("test.csv");
    train.write_csv(&train_path)?;
    test.write_csv(&test_path)?;
    Ok((train_path, test_path))
}

pub const COMPARE_SOLVERS: [SolverKind; 4] = [
    SolverKind::Glpa,
    SolverKind::Sgdm,
    SolverKind::Rmsprop,
    SolverKind::Adam,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub schema_version: u32,
    pub runs: Vec<Summary>,
}

/// Runs GLPA and the three baselines from the same data and θ₀, one thread per
/// solver, and writes `comparison.csv` (`solver,k,objective`) plus
/// `comparison.json` into `cfg.out`.
pub fn compare_optimizers(cfg: &ExperimentConfig) -> Result<Comparison> {
    let mut base = cfg.clone();
    base.solver = SolverKind::Glpa;
    base.validate()?;
    base.baseline.validate()?;
    let (train, test) = build_datasets(&base)?;
    if base.loss == LossKind::Hinge && train.task != Task::Binary {
        return Err(Error::invalid("hinge loss needs a binary task"));
    }
    let shape = network_shape(&base, &train)?;
    let theta0 = initial_params(&base, &shape);

    let results: Vec<Result<(SolverKind, FitReport, f64)>> = std::thread::scope(|s| {
        let handles: Vec<_> = COMPARE_SOLVERS
            .iter()
            .map(|&solver| {
                let (base, train, shape, theta0) = (&base, &train, &shape, &theta0);
                s.spawn(move || {
                    let start = Instant::now();
                    let report = fit(solver, base, train, shape, theta0)?;
                    Ok((solver, report, start.elapsed().as_secs_f64()))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(Error::numerical("solver thread panicked")))
            })
            .collect()
    });

    let mut runs = Vec::new();
    let mut reports = Vec::new();
    for result in results {
        let (solver, report, elapsed) = result?;
        let mut run_cfg = base.clone();
        run_cfg.solver = solver;
        runs.push(summarize(&run_cfg, solver, &train, &test, &shape, &report, elapsed)?);
        reports.push((solver, report));
    }

    ensure_dir(&base.out)?;
    write_with(&base.out.join("comparison.csv"), |w| {
        writeln!(w, "solver,k,objective")?;
        for (solver, report) in &reports {
            for r in &report.trace {
                writeln!(w, "{solver},{},{}", r.k, fmt_f64(r.objective))?;
            }
        }
        Ok(())
    })?;
    let comparison = Comparison {
        schema_version: SCHEMA_VERSION,
        runs,
    };
    write_json(&base.out.join("comparison.json"), &comparison)?;
    Ok(comparison)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_hinge_on_regression() {
        let mut cfg = ExperimentConfig::for_task(TaskKind::Franke);
        cfg.loss = LossKind::Hinge;
        assert!(matches!(cfg.validate(), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn rejects_custom_without_data() {
        let cfg = ExperimentConfig::for_task(TaskKind::CustomCsv);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn rejects_empty_franke() {
        let mut cfg = ExperimentConfig::for_task(TaskKind::Franke);
        cfg.n_train = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn digits_defaults() {
        let cfg = ExperimentConfig::for_task(TaskKind::Digits);
        assert_eq!(cfg.solver_config.admm.max_iters, DIGITS_ADMM_MAX_ITERS);
        assert_eq!(cfg.loss, LossKind::Hinge);
        let (train, _) = build_datasets(&cfg).unwrap();
        assert_eq!(network_shape(&cfg, &train).unwrap().hidden(), 4);
    }

    #[test]
    fn split_sizes() {
        let (train, _) = make_franke_datasets(10, 1, None).unwrap();
        let (a, b) = split_dataset(&train, 0.7, 1).unwrap();
        assert_eq!((a.len(), b.len()), (7, 3));
        assert!(split_dataset(&train, 0.01, 1).is_err());
    }

    #[test]
    fn task_names_round_trip() {
        for t in [TaskKind::Franke, TaskKind::Digits, TaskKind::CustomCsv] {
            assert_eq!(t.to_string().parse::<TaskKind>().unwrap(), t);
        }
    }
}
