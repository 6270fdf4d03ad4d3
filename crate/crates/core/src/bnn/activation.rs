//! Base activation functions and the per-neuron mixture activation.
//!
//! Each hidden neuron carries a 4-vector of mixture weights over
//! {leakyReLU, sigmoid, ReLU, tanh} plus an integer indicator selecting one
//! of them. During posterior sampling the indicator is drawn and the weight
//! vector is the matching unit basis vector; averaging over retained draws
//! recovers the soft mixture.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default negative slope of the leaky ReLU.
pub const DEFAULT_LEAKY_ALPHA: f64 = 0.01;

/// Tolerance for the mixture-weight simplex constraint.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Number of base activation functions.
pub const N_ACTIVATIONS: usize = 4;

/// The four base activations, identified 1..=4 in indicator draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    LeakyRelu = 1,
    Sigmoid = 2,
    Relu = 3,
    Tanh = 4,
}

impl Activation {
    pub fn from_id(id: usize) -> Result<Self> {
        match id {
            1 => Ok(Activation::LeakyRelu),
            2 => Ok(Activation::Sigmoid),
            3 => Ok(Activation::Relu),
            4 => Ok(Activation::Tanh),
            _ => Err(Error::invalid_input(format!(
                "activation id must be in 1..=4, got {id}"
            ))),
        }
    }

    pub fn id(self) -> usize {
        self as usize
    }

    /// Evaluate the activation; `alpha` is the leaky ReLU negative slope and
    /// is ignored by the other three.
    pub fn eval(self, z: f64, alpha: f64) -> f64 {
        match self {
            Activation::LeakyRelu => {
                if z > 0.0 {
                    z
                } else {
                    alpha * z
                }
            }
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative at `z`. At the ReLU/leakyReLU kink the left limit is used
    /// (slope `alpha` resp. 0).
    pub fn deriv(self, z: f64, alpha: f64) -> f64 {
        match self {
            Activation::LeakyRelu => {
                if z > 0.0 {
                    1.0
                } else {
                    alpha
                }
            }
            Activation::Sigmoid => {
                let s = 1.0 / (1.0 + (-z).exp());
                s * (1.0 - s)
            }
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
        }
    }

    pub const ALL: [Activation; N_ACTIVATIONS] = [
        Activation::LeakyRelu,
        Activation::Sigmoid,
        Activation::Relu,
        Activation::Tanh,
    ];
}

/// `h^{(m)}(z)` for base activation id `m` in 1..=4, with the default leaky
/// slope.
pub fn base_activation(m: usize, z: f64) -> Result<f64> {
    base_activation_alpha(m, z, DEFAULT_LEAKY_ALPHA)
}

/// `h^{(m)}(z)` with an explicit leaky ReLU slope.
pub fn base_activation_alpha(m: usize, z: f64, alpha: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::invalid_input(format!(
            "activation input must be finite, got {z}"
        )));
    }
    Ok(Activation::from_id(m)?.eval(z, alpha))
}

/// Per-layer, per-neuron activation mixture weights and indicators.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationMixture {
    /// One `Q_l x 4` weight matrix per hidden layer; rows live on the simplex.
    pub weights: Vec<Array2<f64>>,
    /// One indicator in 1..=4 per hidden neuron.
    pub indicators: Vec<Vec<usize>>,
    /// Leaky ReLU negative slope shared by all neurons.
    pub leaky_alpha: f64,
}

impl ActivationMixture {
    /// Uniform soft mixture (weight 1/4 on each base function).
    pub fn uniform(layer_widths: &[usize], leaky_alpha: f64) -> Self {
        let weights = layer_widths
            .iter()
            .map(|&q| Array2::from_elem((q, N_ACTIVATIONS), 0.25))
            .collect();
        let indicators = layer_widths.iter().map(|&q| vec![1usize; q]).collect();
        ActivationMixture {
            weights,
            indicators,
            leaky_alpha,
        }
    }

    /// Hard mixture: each neuron's weight row is the unit basis vector of its
    /// indicator.
    pub fn from_indicators(indicators: Vec<Vec<usize>>, leaky_alpha: f64) -> Result<Self> {
        let mut weights = Vec::with_capacity(indicators.len());
        for layer in &indicators {
            let mut w = Array2::<f64>::zeros((layer.len(), N_ACTIVATIONS));
            for (q, &m) in layer.iter().enumerate() {
                Activation::from_id(m)?;
                w[[q, m - 1]] = 1.0;
            }
            weights.push(w);
        }
        Ok(ActivationMixture {
            weights,
            indicators,
            leaky_alpha,
        })
    }

    /// Soft mixture from explicit weight rows; indicators are set to the
    /// heaviest component of each row.
    pub fn from_weights(weights: Vec<Array2<f64>>, leaky_alpha: f64) -> Result<Self> {
        let mut indicators = Vec::with_capacity(weights.len());
        for w in &weights {
            let mut layer = Vec::with_capacity(w.nrows());
            for row in w.rows() {
                validate_simplex(row.as_slice().unwrap())?;
                let argmax = row
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(b.1))
                    .map(|(i, _)| i + 1)
                    .unwrap();
                layer.push(argmax);
            }
            indicators.push(layer);
        }
        Ok(ActivationMixture {
            weights,
            indicators,
            leaky_alpha,
        })
    }

    pub fn n_layers(&self) -> usize {
        self.weights.len()
    }

    /// Set the indicator of neuron `(layer, q)` and make its weight row the
    /// matching basis vector.
    pub fn set_indicator(&mut self, layer: usize, q: usize, m: usize) -> Result<()> {
        Activation::from_id(m)?;
        self.indicators[layer][q] = m;
        let mut row = self.weights[layer].row_mut(q);
        row.fill(0.0);
        row[m - 1] = 1.0;
        Ok(())
    }

    /// Mixture activation of neuron `(layer, q)`:
    /// sum over the four base functions weighted by the neuron's omega row.
    pub fn eval(&self, layer: usize, q: usize, z: f64) -> Result<f64> {
        let row = self.weights[layer].row(q);
        validate_simplex(row.as_slice().unwrap())?;
        if !z.is_finite() {
            return Err(Error::invalid_input(format!(
                "activation input must be finite, got {z}"
            )));
        }
        let mut acc = 0.0;
        for (m, act) in Activation::ALL.iter().enumerate() {
            let w = row[m];
            if w != 0.0 {
                acc += w * act.eval(z, self.leaky_alpha);
            }
        }
        Ok(acc)
    }

    /// Unchecked fast path used by the forward pass; weights are validated on
    /// construction and after indicator updates.
    pub(crate) fn eval_unchecked(&self, layer: usize, q: usize, z: f64) -> f64 {
        let row = self.weights[layer].row(q);
        let mut acc = 0.0;
        for (m, act) in Activation::ALL.iter().enumerate() {
            let w = row[m];
            if w != 0.0 {
                acc += w * act.eval(z, self.leaky_alpha);
            }
        }
        acc
    }

    pub(crate) fn deriv_unchecked(&self, layer: usize, q: usize, z: f64) -> f64 {
        let row = self.weights[layer].row(q);
        let mut acc = 0.0;
        for (m, act) in Activation::ALL.iter().enumerate() {
            let w = row[m];
            if w != 0.0 {
                acc += w * act.deriv(z, self.leaky_alpha);
            }
        }
        acc
    }

    /// Validate every weight row against the simplex constraint.
    pub fn validate(&self) -> Result<()> {
        for (l, w) in self.weights.iter().enumerate() {
            for (q, row) in w.rows().into_iter().enumerate() {
                validate_simplex(row.as_slice().unwrap()).map_err(|_| {
                    Error::invalid_state(format!(
                        "mixture weights of neuron ({l},{q}) violate the simplex constraint"
                    ))
                })?;
            }
            for &m in &self.indicators[l] {
                Activation::from_id(m)?;
            }
        }
        Ok(())
    }

    /// Mean activation column per neuron across draws is not stored here;
    /// this returns the number of neurons in `layer`.
    pub fn layer_width(&self, layer: usize) -> usize {
        self.weights[layer].nrows()
    }
}

fn validate_simplex(row: &[f64]) -> Result<()> {
    let mut sum = 0.0;
    for &w in row {
        if !(w >= 0.0) {
            return Err(Error::invalid_state(format!(
                "mixture weight must be nonnegative, got {w}"
            )));
        }
        sum += w;
    }
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::invalid_state(format!(
            "mixture weights must sum to 1 within {SIMPLEX_TOL:.0e}, got {sum}"
        )));
    }
    Ok(())
}

/// Standalone mixture activation over an explicit weight 4-vector.
pub fn mixture_activation(mix: &ActivationMixture, layer: usize, q: usize, z: f64) -> Result<f64> {
    mix.eval(layer, q, z)
}
