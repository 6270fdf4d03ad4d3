//! Hamiltonian Monte Carlo kernel with a leapfrog integrator, plus the
//! conditional target for the hidden-layer weights and biases.

use ndarray::{ArrayView1, ArrayView2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::bnn::{forward, forward_gradient_from, NetworkParams};
use crate::error::{Error, Result};
use crate::mcmc::horseshoe::HorseshoeState;

/// Trajectories whose energy error exceeds this are flagged as divergent.
pub const DIVERGENCE_ENERGY: f64 = 1000.0;

/// A differentiable potential energy `U(q) = -log target(q)`.
pub trait HmcTarget {
    fn dim(&self) -> usize;

    /// Potential at `q`, writing the gradient into `grad`.
    fn potential_and_grad(&mut self, q: &[f64], grad: &mut [f64]) -> f64;

    fn potential(&mut self, q: &[f64]) -> f64 {
        let mut scratch = vec![0.0; q.len()];
        self.potential_and_grad(q, &mut scratch)
    }
}

/// Outcome of one proposal.
#[derive(Debug, Clone, Copy)]
pub struct HmcStep {
    pub accepted: bool,
    pub divergent: bool,
    /// Energy error of the trajectory, `H(end) - H(start)`.
    pub delta_h: f64,
}

/// Run the leapfrog integrator for `n_steps` of size `step`, starting from
/// `(q, p)`. Returns the endpoint and the gradient evaluated there.
pub fn leapfrog<T: HmcTarget>(
    target: &mut T,
    q: &[f64],
    p: &[f64],
    step: f64,
    n_steps: usize,
) -> (Vec<f64>, Vec<f64>) {
    let dim = q.len();
    let mut q = q.to_vec();
    let mut p = p.to_vec();
    let mut grad = vec![0.0; dim];
    target.potential_and_grad(&q, &mut grad);
    for i in 0..dim {
        p[i] -= 0.5 * step * grad[i];
    }
    for s in 0..n_steps {
        for i in 0..dim {
            q[i] += step * p[i];
        }
        target.potential_and_grad(&q, &mut grad);
        let factor = if s + 1 == n_steps { 0.5 } else { 1.0 };
        for i in 0..dim {
            p[i] -= factor * step * grad[i];
        }
    }
    (q, p)
}

/// One HMC proposal with standard Gaussian momenta and a Metropolis
/// accept/reject step. `q` is updated in place on acceptance. Non-finite
/// energies reject the proposal and flag a divergence.
pub fn hmc_step<T: HmcTarget, R: Rng>(
    target: &mut T,
    q: &mut Vec<f64>,
    step: f64,
    n_steps: usize,
    rng: &mut R,
) -> HmcStep {
    let dim = q.len();
    let p0: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
    let u0 = target.potential(q);
    let k0: f64 = 0.5 * p0.iter().map(|v| v * v).sum::<f64>();
    let h0 = u0 + k0;

    let (q1, p1) = leapfrog(target, q, &p0, step, n_steps);
    let u1 = target.potential(&q1);
    let k1: f64 = 0.5 * p1.iter().map(|v| v * v).sum::<f64>();
    let h1 = u1 + k1;
    let delta_h = h1 - h0;

    if !delta_h.is_finite() || delta_h > DIVERGENCE_ENERGY {
        return HmcStep {
            accepted: false,
            divergent: true,
            delta_h,
        };
    }
    let log_u: f64 = rng.gen::<f64>().ln();
    let accepted = log_u < -delta_h;
    if accepted {
        *q = q1;
    }
    HmcStep {
        accepted,
        divergent: false,
        delta_h,
    }
}

/// Flat layout of the inner parameters: for each hidden layer, the weight
/// matrix in row-major order followed by the bias vector.
pub fn flatten_inner(params: &NetworkParams) -> Vec<f64> {
    let n_layers = params.n_hidden_layers();
    let mut out = Vec::new();
    for l in 0..n_layers {
        out.extend(params.weights[l].iter().copied());
        out.extend(params.biases[l].iter().copied());
    }
    out
}

/// Write a flat vector back into the hidden weights and biases.
pub fn unflatten_inner(q: &[f64], params: &mut NetworkParams) {
    let n_layers = params.n_hidden_layers();
    let mut idx = 0;
    for l in 0..n_layers {
        for w in params.weights[l].iter_mut() {
            *w = q[idx];
            idx += 1;
        }
        for b in params.biases[l].iter_mut() {
            *b = q[idx];
            idx += 1;
        }
    }
    debug_assert_eq!(idx, q.len());
}

/// Prior variances aligned with the flat layout: the bias of row `i` shares
/// the row's global scale and occupies the trailing local-scale column.
pub fn inner_prior_variances(params: &NetworkParams, scales: &HorseshoeState) -> Vec<f64> {
    let n_layers = params.n_hidden_layers();
    let mut out = Vec::new();
    for l in 0..n_layers {
        let block = &scales.inner[l];
        let cols = params.weights[l].ncols();
        for i in 0..params.weights[l].nrows() {
            for j in 0..cols {
                out.push(block.prior_variance(i, j));
            }
        }
        for i in 0..params.biases[l].len() {
            out.push(block.prior_variance(i, cols));
        }
    }
    out
}

/// Conditional negative log posterior of the inner weights: Gaussian
/// likelihood with per-observation variances plus independent Gaussian priors
/// with horseshoe-implied variances.
pub struct InnerWeightsTarget<'a> {
    pub y: ArrayView1<'a, f64>,
    pub x: ArrayView2<'a, f64>,
    /// Observation noise variances `exp(h_t)`.
    pub noise_var: Vec<f64>,
    pub prior_var: Vec<f64>,
    pub params: NetworkParams,
    dim: usize,
}

impl<'a> InnerWeightsTarget<'a> {
    pub fn new(
        y: ArrayView1<'a, f64>,
        x: ArrayView2<'a, f64>,
        noise_var: Vec<f64>,
        prior_var: Vec<f64>,
        params: NetworkParams,
    ) -> Self {
        let dim = flatten_inner(&params).len();
        InnerWeightsTarget {
            y,
            x,
            noise_var,
            prior_var,
            params,
            dim,
        }
    }
}

impl HmcTarget for InnerWeightsTarget<'_> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn potential_and_grad(&mut self, q: &[f64], grad: &mut [f64]) -> f64 {
        unflatten_inner(q, &mut self.params);
        grad.fill(0.0);
        let n_layers = self.params.n_hidden_layers();
        let mut u = 0.0;

        for (t, row) in self.x.rows().into_iter().enumerate() {
            let fwd = match forward(&self.params, row) {
                Ok(f) => f,
                Err(_) => return f64::INFINITY,
            };
            let mean = self.params.linear_coef.dot(&row) + fwd.value;
            let resid = self.y[t] - mean;
            let sigma2 = self.noise_var[t];
            u += 0.5 * resid * resid / sigma2;

            // dU/dtheta = -(resid / sigma2) * df/dtheta.
            let scale = -resid / sigma2;
            if scale != 0.0 {
                let g = forward_gradient_from(&self.params, row, &fwd);
                let mut idx = 0;
                for l in 0..n_layers {
                    for dw in g.d_weights[l].iter() {
                        grad[idx] += scale * dw;
                        idx += 1;
                    }
                    for db in g.d_biases[l].iter() {
                        grad[idx] += scale * db;
                        idx += 1;
                    }
                }
            }
        }

        for (i, &qi) in q.iter().enumerate() {
            let v = self.prior_var[i];
            u += 0.5 * qi * qi / v;
            grad[i] += qi / v;
        }
        if !u.is_finite() {
            return f64::INFINITY;
        }
        u
    }
}

/// One HMC update of the hidden-layer weights and biases conditional on
/// everything else. Returns the step outcome; `params` holds the (possibly
/// unchanged) state afterwards.
pub fn hmc_update_inner<R: Rng>(
    params: &mut NetworkParams,
    y: ArrayView1<f64>,
    x: ArrayView2<f64>,
    scales: &HorseshoeState,
    noise_var: &[f64],
    step: f64,
    n_steps: usize,
    rng: &mut R,
) -> Result<HmcStep> {
    if y.len() != x.nrows() || noise_var.len() != x.nrows() {
        return Err(Error::invalid_input(
            "hmc update: y, X, and noise variances must have aligned rows",
        ));
    }
    let prior_var = inner_prior_variances(params, scales);
    let mut q = flatten_inner(params);
    let mut target =
        InnerWeightsTarget::new(y.reborrow(), x.reborrow(), noise_var.to_vec(), prior_var, params.clone());
    let outcome = hmc_step(&mut target, &mut q, step, n_steps, rng);
    if outcome.accepted {
        unflatten_inner(&q, params);
    }
    Ok(outcome)
}
