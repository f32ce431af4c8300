//! Full-batch first-order baselines on `E(θ)` using the analytic (sub)gradient
//! `(1/m)·F′(θ)ᵀ g`, where `gᵢ` is a subgradient of `𝙻` at `Fᵢ(θ)`.

use std::fmt;
use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{finite_objective, offset, FitReport, IterationRecord, LineSearch, Problem, StopReason};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::losses::{outer_value, LossKind};
use crate::model::{NetworkShape, ParamVector};

const RMSPROP_ALPHA: f64 = 0.99;
const ADAM_BETA2: f64 = 0.999;
const DENOM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    Sgdm,
    RmsProp,
    Adam,
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Baseline::Sgdm => "sgdm",
            Baseline::RmsProp => "rmsprop",
            Baseline::Adam => "adam",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub lr: f64,
    /// Momentum buffer coefficient for SGDM and RMSProp; first-moment decay for Adam.
    pub momentum: f64,
    pub iters: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            momentum: 0.9,
            iters: 1000,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid(format!("learning rate must be > 0, got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        if self.iters == 0 {
            return Err(Error::invalid("baseline needs at least one iteration"));
        }
        Ok(())
    }
}

enum State {
    Sgdm {
        velocity: DVector<f64>,
    },
    RmsProp {
        square_avg: DVector<f64>,
        buffer: DVector<f64>,
    },
    Adam {
        first: DVector<f64>,
        second: DVector<f64>,
    },
}

impl State {
    fn new(kind: Baseline, n: usize) -> Self {
        match kind {
            Baseline::Sgdm => State::Sgdm {
                velocity: DVector::zeros(n),
            },
            Baseline::RmsProp => State::RmsProp {
                square_avg: DVector::zeros(n),
                buffer: DVector::zeros(n),
            },
            Baseline::Adam => State::Adam {
                first: DVector::zeros(n),
                second: DVector::zeros(n),
            },
        }
    }

    /// Parameter increment for step number `step` (1-based).
    fn update(&mut self, grad: &DVector<f64>, cfg: &BaselineConfig, step: usize) -> DVector<f64> {
        match self {
            State::Sgdm { velocity } => {
                if step == 1 {
                    velocity.copy_from(grad);
                } else {
                    *velocity *= cfg.momentum;
                    *velocity += grad;
                }
                -&*velocity * cfg.lr
            }
            State::RmsProp { square_avg, buffer } => {
                square_avg.zip_apply(grad, |s, g| *s = RMSPROP_ALPHA * *s + (1.0 - RMSPROP_ALPHA) * g * g);
                let scaled = grad.zip_map(square_avg, |g, s| g / (s.sqrt() + DENOM_EPS));
                *buffer *= cfg.momentum;
                *buffer += scaled;
                -&*buffer * cfg.lr
            }
            State::Adam { first, second } => {
                let beta1 = cfg.momentum;
                first.zip_apply(grad, |f, g| *f = beta1 * *f + (1.0 - beta1) * g);
                second.zip_apply(grad, |s, g| *s = ADAM_BETA2 * *s + (1.0 - ADAM_BETA2) * g * g);
                let c1 = 1.0 - beta1.powi(step as i32);
                let c2 = 1.0 - ADAM_BETA2.powi(step as i32);
                first.zip_map(second, |f, s| -cfg.lr * (f / c1) / ((s / c2).sqrt() + DENOM_EPS))
            }
        }
    }
}

/// Runs `cfg.iters` full-batch steps of the chosen optimizer. The report always
/// has `stop_reason == MaxOuter` and `iters + 1` trace records.
pub fn baseline_fit(
    data: &Dataset,
    shape: &NetworkShape,
    loss: LossKind,
    optimizer: Baseline,
    cfg: &BaselineConfig,
    theta0: &ParamVector,
) -> Result<FitReport> {
    cfg.validate()?;
    let problem = Problem::new(data, shape, loss, theta0)?;
    let m = problem.m() as f64;
    let start = Instant::now();
    let mut state = State::new(optimizer, shape.n());
    let mut theta = theta0.clone();
    let mut trace = Vec::with_capacity(cfg.iters + 1);

    for k in 0..=cfg.iters {
        let eval = problem.eval(&theta)?;
        let objective = finite_objective(outer_value(&eval.values, loss)?)?;
        let mut record = IterationRecord {
            k,
            objective,
            step_norm: 0.0,
            eta: 1.0,
            admm_iters: 0,
            elapsed: 0.0,
            line_search: LineSearch::Unit,
        };
        if k < cfg.iters {
            let outer_grad = eval.values.map(|z| loss.scalar_subgradient(z));
            let grad = eval.jacobian.tr_mul(&outer_grad) / m;
            let delta = state.update(&grad, cfg, k + 1);
            record.step_norm = delta.norm();
            theta = offset(&theta, &delta, 1.0);
        }
        record.elapsed = start.elapsed().as_secs_f64();
        trace.push(record);
    }

    let final_objective = trace.last().map(|r| r.objective).unwrap_or(f64::NAN);
    Ok(FitReport {
        theta_star: theta,
        trace,
        converged: false,
        stop_reason: StopReason::MaxOuter,
        final_objective,
    })
}
