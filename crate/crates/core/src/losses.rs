//! Separable outer functions `𝕃(z) = (1/m) Σ 𝙻(zᵢ)` and their scalar proximity operators.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// `𝙻(z) = z²`
    Quadratic,
    /// `𝙻(z) = |z|`
    Absolute,
    /// `𝙻(z) = (1 − z)₊`, applied to margins.
    Hinge,
}

impl LossKind {
    pub const ALL: [LossKind; 3] = [LossKind::Quadratic, LossKind::Absolute, LossKind::Hinge];

    /// The scalar function `𝙻`.
    pub fn scalar(self, z: f64) -> f64 {
        match self {
            LossKind::Quadratic => z * z,
            LossKind::Absolute => z.abs(),
            LossKind::Hinge => (1.0 - z).max(0.0),
        }
    }

    /// A subgradient of `𝙻` at `z`; picks 0 at the kink of the absolute value
    /// and at the hinge corner.
    pub fn scalar_subgradient(self, z: f64) -> f64 {
        match self {
            LossKind::Quadratic => 2.0 * z,
            LossKind::Absolute => {
                if z > 0.0 {
                    1.0
                } else if z < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            LossKind::Hinge => {
                if z < 1.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn is_smooth(self) -> bool {
        self == LossKind::Quadratic
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::Quadratic => "quadratic",
            LossKind::Absolute => "absolute",
            LossKind::Hinge => "hinge",
        })
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quadratic" => Ok(LossKind::Quadratic),
            "absolute" => Ok(LossKind::Absolute),
            "hinge" => Ok(LossKind::Hinge),
            other => Err(Error::invalid(format!("unknown loss '{other}'"))),
        }
    }
}

/// `𝕃(z)`, i.e. the training objective when `z = F(θ)`.
pub fn outer_value(z: &DVector<f64>, loss: LossKind) -> Result<f64> {
    if z.is_empty() {
        return Err(Error::invalid("outer function needs at least one component"));
    }
    Ok(outer_value_unchecked(z.iter().copied(), z.len(), loss))
}

pub(crate) fn outer_value_unchecked(z: impl Iterator<Item = f64>, m: usize, loss: LossKind) -> f64 {
    z.map(|zi| loss.scalar(zi)).sum::<f64>() / m as f64
}

/// `argmin_μ κ·𝙻(μ) + ½(μ − a)²` for the non-smooth losses.
///
/// Boundary values fall in the middle (flat) branch.
pub fn prox(a: f64, kappa: f64, loss: LossKind) -> Result<f64> {
    if kappa.is_nan() || kappa <= 0.0 {
        return Err(Error::invalid(format!("prox needs kappa > 0, got {kappa}")));
    }
    match loss {
        LossKind::Absolute => Ok(soft_threshold(a, kappa)),
        LossKind::Hinge => Ok(hinge_prox(a, kappa)),
        LossKind::Quadratic => Err(Error::invalid(
            "no ADMM proximity operator for quadratic loss; use the closed-form step",
        )),
    }
}

fn soft_threshold(a: f64, kappa: f64) -> f64 {
    if a > kappa {
        a - kappa
    } else if a < -kappa {
        a + kappa
    } else {
        0.0
    }
}

fn hinge_prox(a: f64, kappa: f64) -> f64 {
    if a > 1.0 {
        a
    } else if a < 1.0 - kappa {
        a + kappa
    } else {
        1.0
    }
}

/// Membership in the set of minimizers of `𝕃`: `{0}` for regression losses,
/// `{z ≥ 1}` for hinge.
pub fn in_minimizer_set(z: &DVector<f64>, loss: LossKind, tol: f64) -> bool {
    match loss {
        LossKind::Quadratic | LossKind::Absolute => z.iter().all(|zi| zi.abs() <= tol),
        LossKind::Hinge => z.iter().all(|&zi| zi >= 1.0 - tol),
    }
}
