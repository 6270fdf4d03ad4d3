//! Forward evaluation of the nonlinear term and its reverse-mode gradient.
//!
//! The forward pass keeps every pre-activation vector so the HMC block can
//! backpropagate without recomputing them.

use ndarray::{Array1, Array2, ArrayView1};

use crate::bnn::network::NetworkParams;
use crate::error::{Error, Result};

/// Result of one forward evaluation.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    /// Scalar output of the final layer.
    pub value: f64,
    /// Pre-activations `z_1..z_L`.
    pub preactivations: Vec<Array1<f64>>,
    /// Post-activations `h_1(z_1)..h_L(z_L)`.
    pub hidden: Vec<Array1<f64>>,
}

/// Gradient of the network output with respect to every hidden-layer weight
/// and bias. The output-layer weights are excluded; they are sampled in
/// closed form, not by HMC.
#[derive(Debug, Clone)]
pub struct InnerGradient {
    pub d_weights: Vec<Array2<f64>>,
    pub d_biases: Vec<Array1<f64>>,
}

/// Evaluate `f(x)`: affine layers with per-neuron mixture activations, then
/// the scalar output layer applied to the last hidden activation.
pub fn forward(params: &NetworkParams, x: ArrayView1<f64>) -> Result<ForwardPass> {
    let n_layers = params.n_hidden_layers();
    if x.len() != params.weights[0].ncols() {
        return Err(Error::invalid_input(format!(
            "input has length {}, network expects {}",
            x.len(),
            params.weights[0].ncols()
        )));
    }
    let mut preactivations = Vec::with_capacity(n_layers);
    let mut hidden = Vec::with_capacity(n_layers);
    let mut current = x.to_owned();
    for l in 0..n_layers {
        let mut z = params.weights[l].dot(&current);
        z += &params.biases[l];
        let mut h = Array1::<f64>::zeros(z.len());
        for (q, (&zq, hq)) in z.iter().zip(h.iter_mut()).enumerate() {
            *hq = params.mixture.eval_unchecked(l, q, zq);
        }
        preactivations.push(z);
        current = h.clone();
        hidden.push(h);
    }
    let value = params.weights[n_layers].row(0).dot(&current);
    Ok(ForwardPass {
        value,
        preactivations,
        hidden,
    })
}

/// Conditional mean `x'gamma + f(x)`.
pub fn predict_mean(params: &NetworkParams, x: ArrayView1<f64>) -> Result<f64> {
    if x.len() != params.linear_coef.len() {
        return Err(Error::invalid_input(format!(
            "input has length {}, linear coefficients expect {}",
            x.len(),
            params.linear_coef.len()
        )));
    }
    let fwd = forward(params, x)?;
    Ok(params.linear_coef.dot(&x) + fwd.value)
}

/// Reverse-mode gradient of `f(x)` with respect to `W_1..W_L` and
/// `b_1..b_L`, taken at the mixture weights currently in force.
pub fn forward_gradient(params: &NetworkParams, x: ArrayView1<f64>) -> Result<InnerGradient> {
    let fwd = forward(params, x)?;
    Ok(forward_gradient_from(params, x, &fwd))
}

/// Backpropagate through an already computed forward pass.
pub fn forward_gradient_from(
    params: &NetworkParams,
    x: ArrayView1<f64>,
    fwd: &ForwardPass,
) -> InnerGradient {
    let n_layers = params.n_hidden_layers();
    let mut d_weights: Vec<Array2<f64>> = params
        .weights
        .iter()
        .take(n_layers)
        .map(|w| Array2::zeros(w.raw_dim()))
        .collect();
    let mut d_biases: Vec<Array1<f64>> = params
        .biases
        .iter()
        .map(|b| Array1::zeros(b.len()))
        .collect();

    // delta_l[q] = df/dz_l[q], seeded from the scalar output layer.
    let out = params.weights[n_layers].row(0);
    let mut delta = Array1::<f64>::zeros(params.widths_last());
    for q in 0..delta.len() {
        delta[q] = out[q] * params.mixture.deriv_unchecked(n_layers - 1, q, fwd.preactivations[n_layers - 1][q]);
    }

    for l in (0..n_layers).rev() {
        for i in 0..delta.len() {
            let di = delta[i];
            d_biases[l][i] = di;
            if di != 0.0 {
                if l == 0 {
                    for (j, &uj) in x.iter().enumerate() {
                        d_weights[0][[i, j]] = di * uj;
                    }
                } else {
                    for (j, &uj) in fwd.hidden[l - 1].iter().enumerate() {
                        d_weights[l][[i, j]] = di * uj;
                    }
                }
            }
        }
        if l > 0 {
            let w = &params.weights[l];
            let mut next = Array1::<f64>::zeros(w.ncols());
            for j in 0..w.ncols() {
                let mut acc = 0.0;
                for i in 0..w.nrows() {
                    acc += w[[i, j]] * delta[i];
                }
                next[j] =
                    acc * params.mixture.deriv_unchecked(l - 1, j, fwd.preactivations[l - 1][j]);
            }
            delta = next;
        }
    }

    InnerGradient {
        d_weights,
        d_biases,
    }
}

impl NetworkParams {
    fn widths_last(&self) -> usize {
        self.biases.last().map(|b| b.len()).unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bnn::activation::DEFAULT_LEAKY_ALPHA;
    use crate::bnn::network::{NetworkParams, NetworkShape};
    use ndarray::{array, Array1, Array2};
    use rand::{Rng, SeedableRng};

    #[test]
    fn zero_network_outputs_zero() {
        let shape = NetworkShape::new(3, vec![4, 2]).unwrap();
        let params = NetworkParams::zeros(&shape, DEFAULT_LEAKY_ALPHA);
        let x = array![1.0, -2.0, 0.5];
        let fwd = forward(&params, x.view()).unwrap();
        assert_eq!(fwd.value, 0.0);
    }

    #[test]
    fn single_path_composition() {
        // L=1, Q=1, W_1 = [1, 0], indicator ReLU, W_2 = [2], x_1 = 3 -> 6.
        let shape = NetworkShape::new(2, vec![1]).unwrap();
        let mut params = NetworkParams::zeros(&shape, DEFAULT_LEAKY_ALPHA);
        params.weights[0][[0, 0]] = 1.0;
        params.weights[1][[0, 0]] = 2.0;
        params.mixture.set_indicator(0, 0, 3).unwrap();
        let x = array![3.0, 7.0];
        let fwd = forward(&params, x.view()).unwrap();
        assert_eq!(fwd.value, 6.0);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let shape = NetworkShape::new(3, vec![2]).unwrap();
        let params = NetworkParams::zeros(&shape, DEFAULT_LEAKY_ALPHA);
        let x = array![1.0, 2.0];
        assert!(forward(&params, x.view()).is_err());
        assert!(predict_mean(&params, x.view()).is_err());
    }

    #[test]
    fn predict_mean_zero_cases() {
        let shape = NetworkShape::new(3, vec![2]).unwrap();
        let params = NetworkParams::zeros(&shape, DEFAULT_LEAKY_ALPHA);
        let x = array![2.5, -1.0, 4.0];
        assert_eq!(predict_mean(&params, x.view()).unwrap(), 0.0);

        let mut params = params;
        params.linear_coef[0] = 1.0;
        assert_eq!(predict_mean(&params, x.view()).unwrap(), 2.5);
    }

    #[test]
    fn dead_relu_units_have_zero_gradient() {
        let shape = NetworkShape::new(2, vec![3]).unwrap();
        let mut params = NetworkParams::zeros(&shape, DEFAULT_LEAKY_ALPHA);
        for q in 0..3 {
            params.mixture.set_indicator(0, q, 3).unwrap();
        }
        params.weights[1].fill(1.0);
        let x = array![0.0, 0.0];
        let grad = forward_gradient(&params, x.view()).unwrap();
        assert!(grad.d_weights[0].iter().all(|&g| g == 0.0));
        assert!(grad.d_biases[0].iter().all(|&g| g == 0.0));
    }

    #[test]
    fn identity_region_gradient_is_downstream_product() {
        // Single neuron on the positive branch of leakyReLU: f = w2 * (w1 x),
        // so df/dw1 = w2 * x.
        let shape = NetworkShape::new(1, vec![1]).unwrap();
        let mut params = NetworkParams::zeros(&shape, DEFAULT_LEAKY_ALPHA);
        params.weights[0][[0, 0]] = 0.8;
        params.weights[1][[0, 0]] = -1.7;
        params.mixture.set_indicator(0, 0, 1).unwrap();
        let x = array![2.0];
        let grad = forward_gradient(&params, x.view()).unwrap();
        assert_eq!(grad.d_weights[0][[0, 0]], -1.7 * 2.0);
        assert_eq!(grad.d_biases[0][0], -1.7);
    }

    /// Literal loop-nest evaluator independent of the ndarray path.
    pub fn naive_forward(
        weights: &[Vec<Vec<f64>>],
        biases: &[Vec<f64>],
        indicators: &[Vec<usize>],
        alpha: f64,
        x: &[f64],
    ) -> f64 {
        let mut current = x.to_vec();
        for l in 0..biases.len() {
            let mut next = vec![0.0; biases[l].len()];
            for i in 0..next.len() {
                let mut z = biases[l][i];
                for j in 0..current.len() {
                    z += weights[l][i][j] * current[j];
                }
                next[i] = match indicators[l][i] {
                    1 => {
                        if z > 0.0 {
                            z
                        } else {
                            alpha * z
                        }
                    }
                    2 => 1.0 / (1.0 + (-z).exp()),
                    3 => z.max(0.0),
                    4 => z.tanh(),
                    _ => unreachable!(),
                };
            }
            current = next;
        }
        let out = &weights[biases.len()];
        let mut f = 0.0;
        for j in 0..current.len() {
            f += out[0][j] * current[j];
        }
        f
    }

    pub fn random_network<R: Rng>(
        rng: &mut R,
        max_dim: usize,
    ) -> (NetworkShape, NetworkParams, Array1<f64>) {
        let k = rng.gen_range(1..=max_dim);
        let n_layers = rng.gen_range(1..=2);
        let widths: Vec<usize> = (0..n_layers).map(|_| rng.gen_range(1..=max_dim)).collect();
        let shape = NetworkShape::new(k, widths.clone()).unwrap();
        let mut params = NetworkParams::zeros(&shape, DEFAULT_LEAKY_ALPHA);
        for l in 0..=n_layers {
            let (r, c) = shape.weight_dims(l);
            params.weights[l] = Array2::from_shape_fn((r, c), |_| rng.gen_range(-1.5..1.5));
        }
        for l in 0..n_layers {
            params.biases[l] = Array1::from_shape_fn(widths[l], |_| rng.gen_range(-0.5..0.5));
            for q in 0..widths[l] {
                params
                    .mixture
                    .set_indicator(l, q, rng.gen_range(1..=4))
                    .unwrap();
            }
        }
        let x = Array1::from_shape_fn(k, |_| rng.gen_range(-2.0..2.0));
        (shape, params, x)
    }

    #[test]
    fn forward_matches_naive_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let (_, params, x) = random_network(&mut rng, 5);
            let fwd = forward(&params, x.view()).unwrap();
            let weights: Vec<Vec<Vec<f64>>> = params
                .weights
                .iter()
                .map(|w| w.rows().into_iter().map(|r| r.to_vec()).collect())
                .collect();
            let biases: Vec<Vec<f64>> = params.biases.iter().map(|b| b.to_vec()).collect();
            let oracle = naive_forward(
                &weights,
                &biases,
                &params.mixture.indicators,
                DEFAULT_LEAKY_ALPHA,
                x.as_slice().unwrap(),
            );
            assert!(
                (fwd.value - oracle).abs() <= 1e-12,
                "forward {} vs oracle {}",
                fwd.value,
                oracle
            );
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        while checked < 20 {
            let (_, mut params, x) = random_network(&mut rng, 4);
            let fwd = forward(&params, x.view()).unwrap();
            // Stay away from the ReLU-family kinks.
            if fwd
                .preactivations
                .iter()
                .any(|z| z.iter().any(|v| v.abs() <= 1e-3))
            {
                continue;
            }
            let grad = forward_gradient(&params, x.view()).unwrap();
            let step = 1e-6;
            let n_layers = params.n_hidden_layers();
            for l in 0..n_layers {
                for i in 0..params.weights[l].nrows() {
                    for j in 0..params.weights[l].ncols() {
                        let orig = params.weights[l][[i, j]];
                        params.weights[l][[i, j]] = orig + step;
                        let up = forward(&params, x.view()).unwrap().value;
                        params.weights[l][[i, j]] = orig - step;
                        let down = forward(&params, x.view()).unwrap().value;
                        params.weights[l][[i, j]] = orig;
                        let fd = (up - down) / (2.0 * step);
                        let an = grad.d_weights[l][[i, j]];
                        let scale = fd.abs().max(an.abs()).max(1e-6);
                        assert!(
                            (fd - an).abs() <= 1e-4 * scale,
                            "weight ({l},{i},{j}): fd {fd} vs analytic {an}"
                        );
                    }
                }
                for i in 0..params.biases[l].len() {
                    let orig = params.biases[l][i];
                    params.biases[l][i] = orig + step;
                    let up = forward(&params, x.view()).unwrap().value;
                    params.biases[l][i] = orig - step;
                    let down = forward(&params, x.view()).unwrap().value;
                    params.biases[l][i] = orig;
                    let fd = (up - down) / (2.0 * step);
                    let an = grad.d_biases[l][i];
                    let scale = fd.abs().max(an.abs()).max(1e-6);
                    assert!(
                        (fd - an).abs() <= 1e-4 * scale,
                        "bias ({l},{i}): fd {fd} vs analytic {an}"
                    );
                }
            }
            checked += 1;
        }
    }

    #[test]
    fn predict_mean_affine_in_linear_coefficients() {
        // Dyadic-rational inputs keep the arithmetic exact.
        let shape = NetworkShape::new(3, vec![2]).unwrap();
        let mut params = NetworkParams::zeros(&shape, DEFAULT_LEAKY_ALPHA);
        params.weights[0][[0, 0]] = 0.5;
        params.weights[0][[1, 2]] = -0.25;
        params.weights[1][[0, 0]] = 1.5;
        params.weights[1][[0, 1]] = 0.75;
        let x = array![1.25, -0.5, 2.0];
        let g1 = array![0.5, 1.0, -0.25];
        let g2 = array![-1.5, 0.75, 0.125];

        let eval = |g: &Array1<f64>, p: &mut NetworkParams| {
            p.linear_coef = g.clone();
            predict_mean(p, x.view()).unwrap()
        };
        let sum = &g1 + &g2;
        let lhs = eval(&sum, &mut params);
        let a = eval(&g1, &mut params);
        let b = eval(&g2, &mut params);
        let zero = eval(&Array1::zeros(3), &mut params);
        assert_eq!(lhs, a + b - zero);
    }
}
