//! Error metrics, Jacobian rank checks and the network-size rule.

use nalgebra::DMatrix;

use crate::data::{Dataset, Task};
use crate::error::{Error, Result};
use crate::losses::LossKind;
use crate::model::{inner_values, predict, NetworkShape, ParamVector};

fn check_lengths(pred: &[f64], actual: &[f64]) -> Result<()> {
    if pred.is_empty() || pred.len() != actual.len() {
        return Err(Error::invalid(format!(
            "prediction length {} does not match target length {}",
            pred.len(),
            actual.len()
        )));
    }
    Ok(())
}

/// Root mean squared error.
pub fn rms_error(pred: &[f64], actual: &[f64]) -> Result<f64> {
    check_lengths(pred, actual)?;
    let sum: f64 = pred.iter().zip(actual).map(|(p, a)| (p - a).powi(2)).sum();
    Ok((sum / pred.len() as f64).sqrt())
}

pub fn max_error(pred: &[f64], actual: &[f64]) -> Result<f64> {
    check_lengths(pred, actual)?;
    Ok(pred.iter().zip(actual).map(|(p, a)| (p - a).abs()).fold(0.0, f64::max))
}

/// Samples whose predicted sign disagrees with the label. An output of exactly
/// zero counts as an error.
pub fn classification_errors(theta: &ParamVector, shape: &NetworkShape, data: &Dataset) -> Result<usize> {
    if data.task != Task::Binary {
        return Err(Error::invalid("classification errors need a binary dataset"));
    }
    let outputs = predict(theta, shape, &data.inputs)?;
    Ok(outputs
        .iter()
        .zip(data.targets.iter())
        .filter(|(f, y)| *f * *y <= 0.0)
        .count())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankInfo {
    pub rank: usize,
    pub full_row_rank: bool,
}

/// Numerical rank: singular values above `tol_factor · max(m, n) · σ_max`.
pub fn jacobian_rank(jacobian: &DMatrix<f64>, tol_factor: f64) -> Result<RankInfo> {
    let (m, n) = jacobian.shape();
    if m == 0 || n == 0 {
        return Err(Error::invalid("rank needs a non-empty matrix"));
    }
    if jacobian.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("matrix has non-finite entries"));
    }
    let sv = jacobian.clone().svd(false, false).singular_values;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let cutoff = tol_factor * m.max(n) as f64 * smax;
    let rank = sv.iter().filter(|&&s| s > cutoff).count();
    Ok(RankInfo {
        rank,
        full_row_rank: rank == m,
    })
}

pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Smallest hidden width with `(d + 2)·q + 1 ≥ m`, i.e. `⌈(m − 1)/(d + 2)⌉`, at least 1.
pub fn adaptive_network_size(m: usize, d: usize) -> usize {
    let denom = d + 2;
    (m.saturating_sub(1)).div_ceil(denom).max(1)
}

/// Central-difference Jacobian of `F(θ)`.
pub fn finite_diff_jacobian(
    theta: &ParamVector,
    shape: &NetworkShape,
    data: &Dataset,
    loss: LossKind,
    h: f64,
) -> Result<DMatrix<f64>> {
    if h.is_nan() || h <= 0.0 {
        return Err(Error::invalid(format!("finite-difference step must be > 0, got {h}")));
    }
    let n = shape.n();
    let mut jac = DMatrix::zeros(data.len(), n);
    let mut probe = theta.as_slice().to_vec();
    for k in 0..n {
        let orig = probe[k];
        probe[k] = orig + h;
        let plus = inner_values(&ParamVector::new(shape, probe.clone())?, shape, data, loss)?;
        probe[k] = orig - h;
        let minus = inner_values(&ParamVector::new(shape, probe.clone())?, shape, data, loss)?;
        probe[k] = orig;
        jac.set_column(k, &((plus - minus) / (2.0 * h)));
    }
    Ok(jac)
}
