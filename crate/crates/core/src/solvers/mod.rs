//! Outer loops: the linearized proximal algorithm, its backtracking variant and
//! first-order baselines used for comparison.

mod baselines;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::losses::{outer_value, LossKind};
use crate::model::{inner_eval, inner_values, NetworkShape, ParamVector, ResidualEval};
use crate::subsolvers::{admm_solve, lm_step, subproblem_model_value, AdmmConfig};

pub use baselines::{baseline_fit, Baseline, BaselineConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Proximal stepsize of the subproblem.
    pub t: f64,
    /// Stop once `‖Δθ_k‖ < step_tol`.
    pub step_tol: f64,
    pub max_outer: usize,
    /// Sufficient-decrease constant.
    pub c: f64,
    /// Backtracking shrink factor.
    pub tau: f64,
    pub max_backtracks: usize,
    pub admm: AdmmConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            t: 1e5,
            step_tol: 1e-2,
            max_outer: 500,
            c: 1e-3,
            tau: 0.5,
            max_backtracks: 10,
            admm: AdmmConfig::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(Error::invalid(format!("t must be > 0, got {}", self.t)));
        }
        if self.step_tol.is_nan() || self.step_tol < 0.0 {
            return Err(Error::invalid(format!("step_tol must be >= 0, got {}", self.step_tol)));
        }
        if self.max_outer == 0 {
            return Err(Error::invalid("max_outer must be >= 1"));
        }
        if !(self.c > 0.0 && self.c < 1.0) {
            return Err(Error::invalid(format!("c must be in (0, 1), got {}", self.c)));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::invalid(format!("tau must be in (0, 1), got {}", self.tau)));
        }
        if self.max_backtracks == 0 {
            return Err(Error::invalid("max_backtracks must be >= 1"));
        }
        self.admm.validate()
    }
}

/// How the stepsize of an iteration was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LineSearch {
    /// Full step without a line search (LPA, baselines, terminal records).
    Unit,
    /// Sufficient-decrease rule satisfied.
    Accepted,
    /// No trial satisfied the rule; the smallest trial stepsize was taken.
    Exhausted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    /// `E(θ_k)`.
    pub objective: f64,
    /// `‖Δθ_k‖`.
    pub step_norm: f64,
    pub eta: f64,
    pub admm_iters: usize,
    /// Seconds since the fit started.
    pub elapsed: f64,
    pub line_search: LineSearch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    StepTol,
    MaxOuter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub theta_star: ParamVector,
    /// One record per visited iterate `θ_0 .. θ_K`; the last one is where the loop stopped.
    pub trace: Vec<IterationRecord>,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub final_objective: f64,
}

impl FitReport {
    /// Number of parameter updates applied.
    pub fn iterations(&self) -> usize {
        self.trace.len() - 1
    }

    /// Trace with wall-clock timings zeroed, for reproducibility comparisons.
    pub fn timing_free_trace(&self) -> Vec<IterationRecord> {
        self.trace
            .iter()
            .map(|r| IterationRecord { elapsed: 0.0, ..*r })
            .collect()
    }
}

/// Which outer method produced a fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Lpa,
    Glpa,
    Sgdm,
    Rmsprop,
    Adam,
}

impl SolverKind {
    pub fn baseline(self) -> Option<Baseline> {
        match self {
            SolverKind::Lpa | SolverKind::Glpa => None,
            SolverKind::Sgdm => Some(Baseline::Sgdm),
            SolverKind::Rmsprop => Some(Baseline::RmsProp),
            SolverKind::Adam => Some(Baseline::Adam),
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverKind::Lpa => "lpa",
            SolverKind::Glpa => "glpa",
            SolverKind::Sgdm => "sgdm",
            SolverKind::Rmsprop => "rmsprop",
            SolverKind::Adam => "adam",
        })
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lpa" => Ok(SolverKind::Lpa),
            "glpa" => Ok(SolverKind::Glpa),
            "sgdm" => Ok(SolverKind::Sgdm),
            "rmsprop" => Ok(SolverKind::Rmsprop),
            "adam" => Ok(SolverKind::Adam),
            other => Err(Error::invalid(format!("unknown solver '{other}'"))),
        }
    }
}

/// Training problem `E(θ) = 𝕃(F(θ))` bound to a dataset.
pub(crate) struct Problem<'a> {
    pub data: &'a Dataset,
    pub shape: &'a NetworkShape,
    pub loss: LossKind,
}

impl<'a> Problem<'a> {
    pub fn new(data: &'a Dataset, shape: &'a NetworkShape, loss: LossKind, theta0: &ParamVector) -> Result<Self> {
        if theta0.len() != shape.n() {
            return Err(Error::invalid(format!(
                "initial parameters have length {}, network needs {}",
                theta0.len(),
                shape.n()
            )));
        }
        if data.input_dim() != shape.input_dim() {
            return Err(Error::invalid(format!(
                "data has {} input columns, network expects {}",
                data.input_dim(),
                shape.input_dim()
            )));
        }
        Ok(Self { data, shape, loss })
    }

    pub fn m(&self) -> usize {
        self.data.len()
    }

    pub fn eval(&self, theta: &ParamVector) -> Result<ResidualEval> {
        inner_eval(theta, self.shape, &self.data.inputs, &self.data.targets, self.loss)
    }

    pub fn objective(&self, theta: &ParamVector) -> Result<f64> {
        let value = outer_value(&inner_values(theta, self.shape, self.data, self.loss)?, self.loss)?;
        finite_objective(value)
    }
}

pub(crate) fn finite_objective(value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::numerical(format!("training objective became {value}")))
    }
}

/// Solves the linearized subproblem at the current evaluation. Returns the step
/// and the number of ADMM iterations (0 on the closed-form path).
pub fn subproblem_step(
    eval: &ResidualEval,
    t: f64,
    loss: LossKind,
    admm: &AdmmConfig,
) -> Result<(DVector<f64>, usize)> {
    let m = eval.m();
    if loss.is_smooth() {
        Ok((lm_step(eval, t, m)?, 0))
    } else {
        let (step, trace) = admm_solve(eval, t, m, loss, admm)?;
        Ok((step, trace.iterations))
    }
}

fn offset(theta: &ParamVector, step: &DVector<f64>, eta: f64) -> ParamVector {
    ParamVector::from_dvector(theta.as_dvector() + step * eta)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BacktrackResult {
    pub eta: f64,
    /// Objective evaluations performed.
    pub evals: usize,
    pub accepted: bool,
    /// `E(θ_k + η Δθ_k)` at the returned η.
    pub objective: f64,
}

/// Tries `η = 1, τ, τ², …` (at most `max_backtracks` trials) until
///
/// ```text
/// E(θ + ηΔ) − E(θ) ≤ c·η·min(model(Δ) − E(θ), 0)
/// ```
///
/// where `model` is the subproblem objective. Falls back to the smallest trial.
pub fn backtrack(
    data: &Dataset,
    shape: &NetworkShape,
    loss: LossKind,
    theta_k: &ParamVector,
    dtheta_k: &DVector<f64>,
    eval_k: &ResidualEval,
    cfg: &SolverConfig,
) -> Result<BacktrackResult> {
    let problem = Problem::new(data, shape, loss, theta_k)?;
    let current = finite_objective(outer_value(&eval_k.values, loss)?)?;
    backtrack_inner(&problem, theta_k, dtheta_k, eval_k, current, cfg)
}

fn backtrack_inner(
    problem: &Problem<'_>,
    theta_k: &ParamVector,
    dtheta_k: &DVector<f64>,
    eval_k: &ResidualEval,
    current: f64,
    cfg: &SolverConfig,
) -> Result<BacktrackResult> {
    let model = subproblem_model_value(eval_k, dtheta_k, cfg.t, problem.m(), problem.loss)?;
    // An inexact ADMM step can leave the model above E(θ_k); never accept ascent then.
    let predicted = (model - current).min(0.0);

    let mut eta = 1.0;
    let mut last = f64::NAN;
    for trial in 1..=cfg.max_backtracks {
        let candidate = problem.objective(&offset(theta_k, dtheta_k, eta))?;
        last = candidate;
        if candidate - current <= cfg.c * eta * predicted {
            return Ok(BacktrackResult {
                eta,
                evals: trial,
                accepted: true,
                objective: candidate,
            });
        }
        if trial < cfg.max_backtracks {
            eta *= cfg.tau;
        }
    }
    Ok(BacktrackResult {
        eta,
        evals: cfg.max_backtracks,
        accepted: false,
        objective: last,
    })
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Globalization {
    None,
    Backtracking,
}

fn proximal_fit(
    data: &Dataset,
    shape: &NetworkShape,
    loss: LossKind,
    cfg: &SolverConfig,
    theta0: &ParamVector,
    mode: Globalization,
) -> Result<FitReport> {
    cfg.validate()?;
    let problem = Problem::new(data, shape, loss, theta0)?;
    let start = Instant::now();

    let mut theta = theta0.clone();
    let mut trace = Vec::new();
    for k in 0..=cfg.max_outer {
        let eval = problem.eval(&theta)?;
        let objective = finite_objective(outer_value(&eval.values, loss)?)?;
        let (step, admm_iters) = subproblem_step(&eval, cfg.t, loss, &cfg.admm)?;
        let step_norm = step.norm();
        if !step_norm.is_finite() {
            return Err(Error::numerical(format!("non-finite step at outer iteration {k}")));
        }

        let mut record = IterationRecord {
            k,
            objective,
            step_norm,
            eta: 1.0,
            admm_iters,
            elapsed: 0.0,
            line_search: LineSearch::Unit,
        };
        let stop = if step_norm < cfg.step_tol {
            Some(StopReason::StepTol)
        } else if k == cfg.max_outer {
            Some(StopReason::MaxOuter)
        } else {
            None
        };
        if let Some(reason) = stop {
            record.elapsed = start.elapsed().as_secs_f64();
            trace.push(record);
            return Ok(FitReport {
                theta_star: theta,
                trace,
                converged: reason == StopReason::StepTol,
                stop_reason: reason,
                final_objective: objective,
            });
        }

        if mode == Globalization::Backtracking {
            let bt = backtrack_inner(&problem, &theta, &step, &eval, objective, cfg)?;
            record.eta = bt.eta;
            record.line_search = if bt.accepted {
                LineSearch::Accepted
            } else {
                LineSearch::Exhausted
            };
        }
        theta = offset(&theta, &step, record.eta);
        record.elapsed = start.elapsed().as_secs_f64();
        trace.push(record);
    }
    unreachable!("loop returns at k == max_outer")
}

/// Linearized proximal algorithm: `θ_{k+1} = θ_k + Δθ_k`.
pub fn lpa_fit(
    data: &Dataset,
    shape: &NetworkShape,
    loss: LossKind,
    cfg: &SolverConfig,
    theta0: &ParamVector,
) -> Result<FitReport> {
    proximal_fit(data, shape, loss, cfg, theta0, Globalization::None)
}

/// LPA with backtracking: `θ_{k+1} = θ_k + η_k Δθ_k`.
pub fn glpa_fit(
    data: &Dataset,
    shape: &NetworkShape,
    loss: LossKind,
    cfg: &SolverConfig,
    theta0: &ParamVector,
) -> Result<FitReport> {
    proximal_fit(data, shape, loss, cfg, theta0, Globalization::Backtracking)
}
