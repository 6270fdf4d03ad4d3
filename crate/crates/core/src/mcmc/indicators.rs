//! Multinomial draws of the per-neuron activation indicators.
//!
//! Each neuron's indicator is resampled conditional on all other parameters:
//! the four candidate activations are scored by the Gaussian data
//! log-likelihood, combined with the uniform 1/4 prior, and normalized with
//! log-sum-exp. Neurons are swept layer by layer in ascending index order so
//! seeded runs are reproducible.

use ndarray::{ArrayView1, ArrayView2};
use rand::Rng;

use crate::bnn::{forward, NetworkParams, N_ACTIVATIONS};
use crate::error::{Error, Result};

/// Data log-likelihood (up to the variance normalizing constants, which do
/// not depend on the indicators).
fn fit_loglik(
    params: &NetworkParams,
    y: ArrayView1<f64>,
    x: ArrayView2<f64>,
    noise_var: &[f64],
) -> f64 {
    let mut ll = 0.0;
    for (t, row) in x.rows().into_iter().enumerate() {
        let fwd = match forward(params, row) {
            Ok(f) => f,
            Err(_) => return f64::NEG_INFINITY,
        };
        let resid = y[t] - (params.linear_coef.dot(&row) + fwd.value);
        ll -= 0.5 * resid * resid / noise_var[t];
    }
    if ll.is_finite() {
        ll
    } else {
        f64::NEG_INFINITY
    }
}

/// One sweep over every neuron, drawing each indicator from its conditional
/// multinomial and leaving the mixture weights at the matching basis vector.
pub fn draw_activation_indicators<R: Rng>(
    params: &mut NetworkParams,
    y: ArrayView1<f64>,
    x: ArrayView2<f64>,
    noise_var: &[f64],
    rng: &mut R,
) -> Result<()> {
    if y.len() != x.nrows() || noise_var.len() != x.nrows() {
        return Err(Error::invalid_input(
            "indicator draw: y, X, and noise variances must have aligned rows",
        ));
    }
    let n_layers = params.n_hidden_layers();
    let mut logp = [0.0f64; N_ACTIVATIONS];
    for layer in 0..n_layers {
        for q in 0..params.biases[layer].len() {
            let current = params.mixture.indicators[layer][q];
            for m in 1..=N_ACTIVATIONS {
                params.mixture.set_indicator(layer, q, m)?;
                logp[m - 1] = fit_loglik(params, y, x, noise_var);
            }
            let max = logp.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            if max == f64::NEG_INFINITY {
                return Err(Error::numeric(
                    "indicator draw: all four activation candidates have zero likelihood",
                ));
            }
            let weights: Vec<f64> = logp.iter().map(|&lp| (lp - max).exp()).collect();
            let total: f64 = weights.iter().sum();
            let mut u = rng.gen::<f64>() * total;
            let mut chosen = current;
            for (m, &w) in weights.iter().enumerate() {
                if u < w {
                    chosen = m + 1;
                    break;
                }
                u -= w;
                chosen = m + 1;
            }
            params.mixture.set_indicator(layer, q, chosen)?;
        }
    }
    Ok(())
}
