//! Solvers for the linearized proximal subproblem
//!
//! ```text
//! min_Δ  𝕃(F + J·Δ) + ‖Δ‖² / (2t)
//! ```
//!
//! Quadratic loss has a closed-form regularized least-squares step. Absolute and
//! hinge losses go through ADMM on the splitting `μ = F + J·Δ`, where the
//! μ-update is a componentwise prox and the Δ-update reuses one Cholesky factor.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{outer_value_unchecked, prox, LossKind};
use crate::model::ResidualEval;

/// How the ADMM dual residual is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DualResidual {
    /// `s = ρ·J·(Δⁱ − Δⁱ⁻¹)`, an m-vector.
    #[default]
    Literal,
    /// `s = ρ·Jᵀ·J·(Δⁱ − Δⁱ⁻¹)`, the n-vector of textbook ADMM for this splitting.
    Transposed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmmConfig {
    pub rho: f64,
    pub eps: f64,
    pub max_iters: usize,
    #[serde(default)]
    pub dual_residual: DualResidual,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self {
            rho: 1e-2,
            eps: 1e-2,
            max_iters: 20,
            dual_residual: DualResidual::Literal,
        }
    }
}

impl AdmmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::invalid(format!("ADMM rho must be > 0, got {}", self.rho)));
        }
        if self.eps.is_nan() || self.eps <= 0.0 {
            return Err(Error::invalid(format!("ADMM eps must be > 0, got {}", self.eps)));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("ADMM max_iters must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmmTrace {
    pub iterations: usize,
    pub final_primal_residual_norm: f64,
    pub final_dual_residual_norm: f64,
    pub converged: bool,
    /// Norm of the final multiplier λ.
    pub multiplier_norm: f64,
    /// Number of matrix factorizations performed by the call.
    pub factorizations: usize,
}

/// Cholesky factor of `scale·JᵀJ + (1/t)·I`.
struct RegularizedGram {
    chol: Cholesky<f64, Dyn>,
}

impl RegularizedGram {
    fn factor(jacobian: &DMatrix<f64>, scale: f64, t: f64) -> Result<Self> {
        let mut gram = jacobian.tr_mul(jacobian);
        gram *= scale;
        for k in 0..gram.nrows() {
            gram[(k, k)] += 1.0 / t;
        }
        if gram.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical("non-finite entries in the subproblem matrix"));
        }
        let chol = Cholesky::new(gram)
            .ok_or_else(|| Error::numerical("Cholesky factorization of the subproblem matrix failed"))?;
        Ok(Self { chol })
    }

    fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(rhs)
    }
}

fn check_t(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::invalid(format!("proximal stepsize t must be > 0, got {t}")));
    }
    Ok(())
}

fn check_m(eval: &ResidualEval, m: usize) -> Result<()> {
    if m == 0 || eval.m() != m {
        return Err(Error::invalid(format!(
            "sample count {m} does not match residual length {}",
            eval.m()
        )));
    }
    Ok(())
}

/// Closed-form step for quadratic loss:
/// `((2/m)JᵀJ + (1/t)I) Δ = −(2/m) JᵀF`.
pub fn lm_step(eval: &ResidualEval, t: f64, m: usize) -> Result<DVector<f64>> {
    check_t(t)?;
    check_m(eval, m)?;
    let scale = 2.0 / m as f64;
    let gram = RegularizedGram::factor(&eval.jacobian, scale, t)?;
    let rhs = eval.jacobian.tr_mul(&eval.values) * (-scale);
    let step = gram.solve(&rhs);
    if step.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("closed-form step is not finite"));
    }
    Ok(step)
}

/// ADMM for the absolute/hinge subproblem, cold-started at `Δ = 0, λ = 0`.
///
/// Returns the last iterate when `max_iters` is reached without meeting the
/// residual tolerance; the trace then has `converged == false`.
pub fn admm_solve(
    eval: &ResidualEval,
    t: f64,
    m: usize,
    loss: LossKind,
    cfg: &AdmmConfig,
) -> Result<(DVector<f64>, AdmmTrace)> {
    check_t(t)?;
    check_m(eval, m)?;
    cfg.validate()?;
    if loss.is_smooth() {
        return Err(Error::invalid("ADMM subsolver handles absolute and hinge losses only"));
    }

    let j = &eval.jacobian;
    let f = &eval.values;
    let rho = cfg.rho;
    let kappa = 1.0 / (m as f64 * rho);
    let gram = RegularizedGram::factor(j, rho, t)?;

    let mut step = DVector::zeros(eval.n());
    let mut lambda = DVector::zeros(m);
    // J·Δ for the current iterate
    let mut j_step = DVector::zeros(m);
    let mut mu = DVector::zeros(m);
    let mut trace = AdmmTrace {
        iterations: 0,
        final_primal_residual_norm: f64::INFINITY,
        final_dual_residual_norm: f64::INFINITY,
        converged: false,
        multiplier_norm: 0.0,
        factorizations: 1,
    };

    for i in 1..=cfg.max_iters {
        for k in 0..m {
            let a = f[k] + j_step[k] - lambda[k] / rho;
            mu[k] = prox(a, kappa, loss)?;
        }

        let target = &mu - f + &lambda / rho;
        let next = gram.solve(&(j.tr_mul(&target) * rho));
        let next_j_step = j * &next;

        let primal = &mu - f - &next_j_step;
        lambda.axpy(rho, &primal, 1.0);

        let dual_norm = match cfg.dual_residual {
            DualResidual::Literal => (&next_j_step - &j_step).norm() * rho,
            DualResidual::Transposed => j.tr_mul(&(&next_j_step - &j_step)).norm() * rho,
        };
        let primal_norm = primal.norm();

        step = next;
        j_step = next_j_step;
        trace.iterations = i;
        trace.final_primal_residual_norm = primal_norm;
        trace.final_dual_residual_norm = dual_norm;

        if !primal_norm.is_finite() || !dual_norm.is_finite() {
            return Err(Error::numerical(format!("ADMM diverged at iteration {i}")));
        }
        if primal_norm < cfg.eps && dual_norm < cfg.eps {
            trace.converged = true;
            break;
        }
    }
    trace.multiplier_norm = lambda.norm();
    Ok((step, trace))
}

/// Subproblem objective `𝕃(F + J·Δ) + ‖Δ‖²/(2t)`.
pub fn subproblem_model_value(
    eval: &ResidualEval,
    dtheta: &DVector<f64>,
    t: f64,
    m: usize,
    loss: LossKind,
) -> Result<f64> {
    check_t(t)?;
    check_m(eval, m)?;
    if dtheta.len() != eval.n() {
        return Err(Error::invalid(format!(
            "step has length {}, jacobian has {} columns",
            dtheta.len(),
            eval.n()
        )));
    }
    let linearized = &eval.values + &eval.jacobian * dtheta;
    Ok(outer_value_unchecked(linearized.iter().copied(), m, loss) + dtheta.norm_squared() / (2.0 * t))
}
