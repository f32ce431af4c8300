//! Three-layer sigmoid network `f(x; θ) = Σᵢ wᵢ σ(vᵢ·x + uᵢ) + w₀` and the
//! loss-specific inner map `F(θ)` with its dense Jacobian.
//!
//! Parameters are packed as `[w₁..w_q | v₁ (d entries) .. v_q | u₁..u_q | w₀]`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::losses::LossKind;

/// Dimensions of a single-hidden-layer sigmoid network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkShape {
    d: usize,
    q: usize,
}

impl NetworkShape {
    pub fn new(input_dim: usize, hidden: usize) -> Result<Self> {
        if input_dim == 0 || hidden == 0 {
            return Err(Error::invalid(format!(
                "network shape needs d >= 1 and q >= 1 (got d={input_dim}, q={hidden})"
            )));
        }
        Ok(Self {
            d: input_dim,
            q: hidden,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.d
    }

    pub fn hidden(&self) -> usize {
        self.q
    }

    /// Total parameter count `(d + 2)·q + 1`.
    pub fn n(&self) -> usize {
        (self.d + 2) * self.q + 1
    }

    pub fn w_offset(&self) -> usize {
        0
    }

    /// Start of neuron `i`'s input weights.
    pub fn v_offset(&self, i: usize) -> usize {
        self.q + i * self.d
    }

    pub fn u_offset(&self) -> usize {
        self.q + self.q * self.d
    }

    pub fn bias_index(&self) -> usize {
        self.n() - 1
    }
}

/// Flat parameter vector θ in the packed layout described at module level.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector(DVector<f64>);

impl ParamVector {
    pub fn new(shape: &NetworkShape, values: Vec<f64>) -> Result<Self> {
        if values.len() != shape.n() {
            return Err(Error::invalid(format!(
                "parameter vector has length {}, network needs {}",
                values.len(),
                shape.n()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("parameter vector has non-finite entries"));
        }
        Ok(Self(DVector::from_vec(values)))
    }

    pub fn zeros(shape: &NetworkShape) -> Self {
        Self(DVector::zeros(shape.n()))
    }

    /// Entries drawn i.i.d. uniform on `[-half_width, half_width]` from a seeded generator.
    pub fn uniform(shape: &NetworkShape, half_width: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self(DVector::from_fn(shape.n(), |_, _| {
            rng.random_range(-half_width..=half_width)
        }))
    }

    pub(crate) fn from_dvector(values: DVector<f64>) -> Self {
        Self(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn as_dvector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_dvector(self) -> DVector<f64> {
        self.0
    }

    /// Neuron `i` as `(w_i, v_i, u_i)`.
    pub fn neuron<'a>(&'a self, shape: &NetworkShape, i: usize) -> (f64, &'a [f64], f64) {
        let s = self.0.as_slice();
        let v0 = shape.v_offset(i);
        (s[shape.w_offset() + i], &s[v0..v0 + shape.d], s[shape.u_offset() + i])
    }

    pub fn bias(&self, shape: &NetworkShape) -> f64 {
        self.0[shape.bias_index()]
    }
}

/// `F(θ)` and `F′(θ)` at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualEval {
    pub values: DVector<f64>,
    /// m×n, row i is the gradient of `values[i]` with respect to θ.
    pub jacobian: DMatrix<f64>,
}

impl ResidualEval {
    pub fn new(values: DVector<f64>, jacobian: DMatrix<f64>) -> Result<Self> {
        if jacobian.nrows() != values.len() {
            return Err(Error::invalid(format!(
                "jacobian has {} rows but residual has length {}",
                jacobian.nrows(),
                values.len()
            )));
        }
        if values.iter().chain(jacobian.iter()).any(|v| !v.is_finite()) {
            return Err(Error::numerical("residual evaluation has non-finite entries"));
        }
        Ok(Self { values, jacobian })
    }

    /// Number of residual components.
    pub fn m(&self) -> usize {
        self.values.len()
    }

    /// Number of parameters.
    pub fn n(&self) -> usize {
        self.jacobian.ncols()
    }
}

/// Logistic function, branching on sign so `exp` never overflows.
pub fn sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

fn check_dims(theta: &ParamVector, shape: &NetworkShape, x: &[f64]) -> Result<()> {
    if theta.len() != shape.n() {
        return Err(Error::invalid(format!(
            "parameter vector has length {}, network needs {}",
            theta.len(),
            shape.n()
        )));
    }
    if x.len() != shape.d {
        return Err(Error::invalid(format!(
            "input has dimension {}, network expects {}",
            x.len(),
            shape.d
        )));
    }
    Ok(())
}

fn pre_activation(v: &[f64], x: &[f64], u: f64) -> f64 {
    v.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + u
}

fn forward_unchecked(theta: &ParamVector, shape: &NetworkShape, x: &[f64]) -> f64 {
    (0..shape.q)
        .map(|i| {
            let (w, v, u) = theta.neuron(shape, i);
            w * sigmoid(pre_activation(v, x, u))
        })
        .sum::<f64>()
        + theta.bias(shape)
}

/// Writes `∇θ f(x; θ)` scaled by `scale` into `out` (length n).
fn grad_into(theta: &ParamVector, shape: &NetworkShape, x: &[f64], scale: f64, mut out: impl FnMut(usize, f64)) {
    for i in 0..shape.q {
        let (w, v, u) = theta.neuron(shape, i);
        let s = sigmoid(pre_activation(v, x, u));
        let ds = w * s * (1.0 - s);
        out(shape.w_offset() + i, scale * s);
        let v0 = shape.v_offset(i);
        for (j, xj) in x.iter().enumerate() {
            out(v0 + j, scale * ds * xj);
        }
        out(shape.u_offset() + i, scale * ds);
    }
    out(shape.bias_index(), scale);
}

/// Network output at a single input.
pub fn forward(theta: &ParamVector, shape: &NetworkShape, x: &[f64]) -> Result<f64> {
    check_dims(theta, shape, x)?;
    Ok(forward_unchecked(theta, shape, x))
}

/// Analytic gradient of the network output with respect to θ, in packed layout.
pub fn grad_forward(theta: &ParamVector, shape: &NetworkShape, x: &[f64]) -> Result<DVector<f64>> {
    check_dims(theta, shape, x)?;
    let mut g = DVector::zeros(shape.n());
    grad_into(theta, shape, x, 1.0, |k, v| g[k] = v);
    Ok(g)
}

/// Network outputs for every row of `inputs`.
pub fn predict(theta: &ParamVector, shape: &NetworkShape, inputs: &DMatrix<f64>) -> Result<DVector<f64>> {
    let mut x = vec![0.0; inputs.ncols()];
    let mut out = DVector::zeros(inputs.nrows());
    for i in 0..inputs.nrows() {
        row_into(inputs, i, &mut x);
        out[i] = forward(theta, shape, &x)?;
    }
    Ok(out)
}

fn row_into(inputs: &DMatrix<f64>, i: usize, x: &mut [f64]) {
    for (j, xj) in x.iter_mut().enumerate() {
        *xj = inputs[(i, j)];
    }
}

/// `F(θ)` alone, without the Jacobian.
pub fn inner_values(theta: &ParamVector, shape: &NetworkShape, data: &Dataset, loss: LossKind) -> Result<DVector<f64>> {
    if loss == LossKind::Hinge && data.targets.iter().any(|&y| y != 1.0 && y != -1.0) {
        return Err(Error::invalid("hinge loss needs targets in {-1, +1}"));
    }
    let outputs = predict(theta, shape, &data.inputs)?;
    Ok(match loss {
        LossKind::Quadratic | LossKind::Absolute => outputs - &data.targets,
        LossKind::Hinge => outputs.component_mul(&data.targets),
    })
}

/// Builds `F(θ)` and its Jacobian for the given loss.
///
/// Regression losses use residuals `f(xᵢ) − yᵢ`; hinge uses margins `yᵢ f(xᵢ)`,
/// which requires every target to be exactly ±1.
pub fn inner_eval(
    theta: &ParamVector,
    shape: &NetworkShape,
    inputs: &DMatrix<f64>,
    targets: &DVector<f64>,
    loss: LossKind,
) -> Result<ResidualEval> {
    let m = inputs.nrows();
    if targets.len() != m {
        return Err(Error::invalid(format!("{m} input rows but {} targets", targets.len())));
    }
    if loss == LossKind::Hinge {
        if let Some(i) = targets.iter().position(|&y| y != 1.0 && y != -1.0) {
            return Err(Error::invalid(format!(
                "hinge loss needs targets in {{-1, +1}}, target {i} is {}",
                targets[i]
            )));
        }
    }
    let mut x = vec![0.0; inputs.ncols()];
    if m > 0 {
        row_into(inputs, 0, &mut x);
        check_dims(theta, shape, &x)?;
    }

    let mut values = DVector::zeros(m);
    let mut jacobian = DMatrix::zeros(m, shape.n());
    for i in 0..m {
        row_into(inputs, i, &mut x);
        let f = forward_unchecked(theta, shape, &x);
        let (value, scale) = match loss {
            LossKind::Quadratic | LossKind::Absolute => (f - targets[i], 1.0),
            LossKind::Hinge => (targets[i] * f, targets[i]),
        };
        values[i] = value;
        grad_into(theta, shape, &x, scale, |k, v| jacobian[(i, k)] = v);
    }
    ResidualEval::new(values, jacobian)
}
