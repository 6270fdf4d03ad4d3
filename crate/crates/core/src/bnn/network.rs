//! Network parameter containers and dimension bookkeeping.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::bnn::activation::ActivationMixture;
use crate::error::{Error, Result};

/// Architecture of the nonlinear term: `K` inputs, `L` hidden layers with
/// `widths[l]` neurons each, and a scalar output layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkShape {
    pub n_inputs: usize,
    pub widths: Vec<usize>,
}

impl NetworkShape {
    pub fn new(n_inputs: usize, widths: Vec<usize>) -> Result<Self> {
        if n_inputs == 0 {
            return Err(Error::invalid_input("network must have at least one input"));
        }
        if widths.is_empty() {
            return Err(Error::invalid_input(
                "network must have at least one hidden layer",
            ));
        }
        if widths.iter().any(|&q| q == 0) {
            return Err(Error::invalid_input(
                "every hidden layer must have at least one neuron",
            ));
        }
        Ok(NetworkShape { n_inputs, widths })
    }

    pub fn n_hidden_layers(&self) -> usize {
        self.widths.len()
    }

    /// `(rows, cols)` of weight matrix `W_l` for `l` in `0..=L` (index `L` is
    /// the `1 x Q_L` output layer).
    pub fn weight_dims(&self, l: usize) -> (usize, usize) {
        let n_layers = self.widths.len();
        if l == 0 {
            (self.widths[0], self.n_inputs)
        } else if l < n_layers {
            (self.widths[l], self.widths[l - 1])
        } else {
            (1, self.widths[n_layers - 1])
        }
    }

    /// Number of inner parameters moved by the HMC block: all hidden-layer
    /// weights plus one bias per hidden neuron.
    pub fn n_inner_params(&self) -> usize {
        let mut n = 0;
        for l in 0..self.widths.len() {
            let (r, c) = self.weight_dims(l);
            n += r * c + r;
        }
        n
    }
}

/// All sampled parameters of one regression draw: hidden and output weight
/// matrices, hidden biases, linear coefficients, and the activation mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    /// `W_1..W_{L+1}`; `weights[l]` has the dims given by `shape.weight_dims(l)`.
    pub weights: Vec<Array2<f64>>,
    /// One bias vector per hidden layer.
    pub biases: Vec<Array1<f64>>,
    /// Linear coefficients on the raw regressors.
    pub linear_coef: Array1<f64>,
    pub mixture: ActivationMixture,
}

impl NetworkParams {
    /// All-zero network with hard indicators (leakyReLU everywhere).
    pub fn zeros(shape: &NetworkShape, leaky_alpha: f64) -> Self {
        let n_layers = shape.n_hidden_layers();
        let weights = (0..=n_layers)
            .map(|l| Array2::zeros(shape.weight_dims(l)))
            .collect();
        let biases = shape.widths.iter().map(|&q| Array1::zeros(q)).collect();
        let indicators = shape.widths.iter().map(|&q| vec![1usize; q]).collect();
        NetworkParams {
            weights,
            biases,
            linear_coef: Array1::zeros(shape.n_inputs),
            mixture: ActivationMixture::from_indicators(indicators, leaky_alpha).unwrap(),
        }
    }

    /// Diffuse start: weights `N(0, sd^2)`, biases zero, linear coefficients
    /// zero, indicators drawn uniformly from the four base functions.
    pub fn random_init<R: Rng>(
        shape: &NetworkShape,
        sd: f64,
        leaky_alpha: f64,
        rng: &mut R,
    ) -> Self {
        let normal = Normal::new(0.0, sd).unwrap();
        let n_layers = shape.n_hidden_layers();
        let weights = (0..=n_layers)
            .map(|l| {
                let (r, c) = shape.weight_dims(l);
                Array2::from_shape_fn((r, c), |_| normal.sample(rng))
            })
            .collect();
        let biases = shape.widths.iter().map(|&q| Array1::zeros(q)).collect();
        let indicators = shape
            .widths
            .iter()
            .map(|&q| (0..q).map(|_| rng.gen_range(1..=4)).collect())
            .collect();
        NetworkParams {
            weights,
            biases,
            linear_coef: Array1::zeros(shape.n_inputs),
            mixture: ActivationMixture::from_indicators(indicators, leaky_alpha).unwrap(),
        }
    }

    pub fn shape(&self) -> NetworkShape {
        NetworkShape {
            n_inputs: self.weights[0].ncols(),
            widths: self.biases.iter().map(|b| b.len()).collect(),
        }
    }

    pub fn n_hidden_layers(&self) -> usize {
        self.biases.len()
    }

    /// Check dimensional consistency and entry finiteness.
    pub fn validate(&self, shape: &NetworkShape) -> Result<()> {
        let n_layers = shape.n_hidden_layers();
        if self.weights.len() != n_layers + 1 {
            return Err(Error::invalid_input(format!(
                "expected {} weight matrices, got {}",
                n_layers + 1,
                self.weights.len()
            )));
        }
        if self.biases.len() != n_layers {
            return Err(Error::invalid_input(format!(
                "expected {} bias vectors, got {}",
                n_layers,
                self.biases.len()
            )));
        }
        for (l, w) in self.weights.iter().enumerate() {
            let want = shape.weight_dims(l);
            if (w.nrows(), w.ncols()) != want {
                return Err(Error::invalid_input(format!(
                    "weight matrix {l} has dims {:?}, expected {:?}",
                    (w.nrows(), w.ncols()),
                    want
                )));
            }
            if w.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid_input(format!(
                    "weight matrix {l} contains non-finite entries"
                )));
            }
        }
        for (l, b) in self.biases.iter().enumerate() {
            if b.len() != shape.widths[l] {
                return Err(Error::invalid_input(format!(
                    "bias vector {l} has length {}, expected {}",
                    b.len(),
                    shape.widths[l]
                )));
            }
            if b.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid_input(format!(
                    "bias vector {l} contains non-finite entries"
                )));
            }
        }
        if self.linear_coef.len() != shape.n_inputs {
            return Err(Error::invalid_input(format!(
                "linear coefficient vector has length {}, expected {}",
                self.linear_coef.len(),
                shape.n_inputs
            )));
        }
        self.mixture.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_rejects_zero_counts() {
        assert!(NetworkShape::new(0, vec![2]).is_err());
        assert!(NetworkShape::new(3, vec![]).is_err());
        assert!(NetworkShape::new(3, vec![2, 0]).is_err());
    }

    #[test]
    fn weight_dims_follow_architecture() {
        let shape = NetworkShape::new(3, vec![4, 2]).unwrap();
        assert_eq!(shape.weight_dims(0), (4, 3));
        assert_eq!(shape.weight_dims(1), (2, 4));
        assert_eq!(shape.weight_dims(2), (1, 2));
        assert_eq!(shape.n_inner_params(), 4 * 3 + 4 + 2 * 4 + 2);
    }

    #[test]
    fn zeros_validates() {
        let shape = NetworkShape::new(2, vec![3]).unwrap();
        let params = NetworkParams::zeros(&shape, 0.01);
        params.validate(&shape).unwrap();
        assert_eq!(params.shape(), shape);
    }

    #[test]
    fn validate_catches_dim_mismatch() {
        let shape = NetworkShape::new(2, vec![3]).unwrap();
        let other = NetworkShape::new(2, vec![4]).unwrap();
        let params = NetworkParams::zeros(&other, 0.01);
        assert!(params.validate(&shape).is_err());
    }
}
